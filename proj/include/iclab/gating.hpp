#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iclab/core.hpp"
#include "iclab/datagen.hpp"
#include "iclab/predictors.hpp"

namespace iclab {

// ---------------------------------------------------------------------------
// Gate keys and the two-expert alpha learner.
// ---------------------------------------------------------------------------

enum class GateKeyMode {
    QueryKey,              // the query's table key alone
    QueryAndRelevanceKey,  // plus the count of context pairs sharing that key
};

GateKeyMode gate_key_mode_from_string(const std::string& s);
std::string to_string(GateKeyMode m);

// QueryAndRelevanceKey appends "|<count>", where count is the number of context
// pairs whose own derived key equals the query's key. Computed from inputs
// only, so label shifts at evaluation time do not move an example between keys.
std::string gate_key(GateKeyMode mode, KeyingRule rule, const ExampleSequence& ex,
                     const BaseDistributionSpec& base);

// Exponentiated-gradient step on the two-expert weight:
// alpha' = alpha e^{-eta diff} / (alpha e^{-eta diff} + 1 - alpha),
// diff = loss(g) - loss(h). Maps (0, 1) into (0, 1) for any finite inputs.
double alpha_update(double alpha, double loss_diff, double eta);

// Default gate step size at per-key step t: sqrt(8 log(2) / t).
double gate_eta(int64_t t);

SimplexVector gated_predict(double alpha, const SimplexVector& g_pred,
                            const SimplexVector& h_pred);

// 1 when the in-weight expert is at least as good, ties included.
int oracle_alpha(double g_risk, double h_risk);

class AlphaTable {
public:
    AlphaTable();

    double alpha(const std::string& key) const;  // 0.5 for unseen keys
    void observe(const std::string& key, double loss_diff);

    int64_t steps(const std::string& key) const;
    double cumulative_diff(const std::string& key) const;
    std::vector<std::string> keys() const;
    size_t num_keys() const { return cells_.size(); }

    void set_schedule(std::function<double(int64_t)> eta);

private:
    struct Cell {
        double alpha = 0.5;
        double cum_diff = 0.0;
        int64_t steps = 0;
    };
    std::map<std::string, Cell> cells_;
    std::function<double(int64_t)> eta_;
};

// ---------------------------------------------------------------------------
// Regret ledger and the decomposition checks.
// ---------------------------------------------------------------------------

struct LedgerRecord {
    int64_t t = 0;
    std::string gate_key;
    double alpha_used = 0.0;
    double loss_f = 0.0;
    double loss_g = 0.0;
    double loss_h = 0.0;
    int label = 0;           // observed label, needed for hindsight baselines
    double loss_h_fixed = 0.0;  // loss of h under its initial parameters
};

class RegretLedger {
public:
    void append(LedgerRecord rec);
    size_t size() const { return recs_.size(); }
    bool empty() const { return recs_.empty(); }
    const std::vector<LedgerRecord>& records() const { return recs_; }

    // Per-key running sums of loss_g - loss_h.
    std::map<std::string, double> cumulative_loss_diff() const;

    // Hindsight gate: 1 iff sum_(t on key) loss_g - loss_h < 0, ties to 0.
    int alpha_star(const std::string& key) const;

    // Columns: t, gate_key, alpha_used, loss_f, loss_g, loss_h, label, loss_h_fixed.
    void write_csv(std::ostream& out) const;
    void write_csv_file(const std::string& path) const;
    static RegretLedger read_csv(std::istream& in);
    static RegretLedger read_csv_file(const std::string& path);

private:
    std::vector<LedgerRecord> recs_;
};

struct RegretCheckReport {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
    double margin = 0.0;  // rhs - lhs
};

// num_classes: label alphabet used for the per-key hindsight comparator
// (cross-entropy minimizer over observed labels, clamped to >= 1e-6 mass and
// renormalized).
RegretCheckReport check_regret_decomposition(const RegretLedger& ledger, int num_classes, double tol = 1e-9);
RegretCheckReport check_split_regret_decomposition(const RegretLedger& ledger, int num_classes, double tol = 1e-9);

struct OnlineToBatchReport {
    double avg_online_loss = 0.0;
    double batch_optimum = 0.0;  // entropy of the true conditional
    double regret_term = 0.0;
    double slack = 0.0;
    double rhs = 0.0;
    int64_t n = 0;
    bool holds = false;
};

// Average online in-weight loss on one key against the batch optimum plus the
// per-step regret rate plus the statistical slack 3 sqrt(log(100) / n). The key
// must be a NearestPrototype class key so the true conditional is known.
OnlineToBatchReport online_to_batch_check(const RegretLedger& ledger, const std::string& key,
                                          const BaseDistributionSpec& base, IWBackend backend);

// ---------------------------------------------------------------------------
// Bi-level online trainer (the full gated loop, or one of its two halves).
// ---------------------------------------------------------------------------

enum class ModelKind { ICOnly, IWOnly, Gated };

ModelKind model_kind_from_string(const std::string& s);
std::string to_string(ModelKind k);

struct TrainerOptions {
    ModelKind kind = ModelKind::Gated;
    KeyingRule keying = KeyingRule::NearestPrototype;
    GateKeyMode gate_mode = GateKeyMode::QueryAndRelevanceKey;
    IWBackend backend = IWBackend::KT;
    double epsilon = 0.01;
    double B = 1.0;
    bool learn_h = false;
    double h_step_size = 0.05;
};

// Per step: predict with the frozen state, observe the target, then update the
// in-weight table, the metric (optional), and the gate, in that order.
class Trainer {
public:
    Trainer(const BaseDistributionSpec& base, const TrainerOptions& opts);

    // Runs one online step and returns the model's prediction made before any
    // update. Appends one ledger record.
    SimplexVector step(const ExampleSequence& ex);

    // Prediction path only, no state change; alpha falls back to 0.5 on keys
    // never seen in training.
    SimplexVector predict(const ExampleSequence& ex) const;

    const RegretLedger& ledger() const { return ledger_; }
    const AlphaTable& alphas() const { return alphas_; }
    const InWeightTable& table() const { return table_; }
    InWeightTable& table() { return table_; }
    const ICPredictorParams& ic_params() const { return ic_; }
    const TrainerOptions& options() const { return opts_; }
    const BaseDistributionSpec& base() const { return base_; }
    int64_t steps() const { return t_; }

private:
    BaseDistributionSpec base_;  // owned copy, keeps bindings lifetime-safe
    TrainerOptions opts_;
    ICPredictorParams ic_;
    ICPredictorParams ic_initial_;  // fixed comparator for the ledger
    InWeightTable table_;
    AlphaTable alphas_;
    RegretLedger ledger_;
    int64_t t_ = 0;
};

}  // namespace iclab
