#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "iclab/core.hpp"
#include "iclab/datagen.hpp"

namespace iclab {

// ---------------------------------------------------------------------------
// In-context predictor: eps * 1 + (1 - C*eps) * sum_l softmax(-||x_l - x||_A)_l * y_l
// with the Mahalanobis norm ||v||_A = sqrt(v' A v), A PSD, spectral norm <= B.
// ---------------------------------------------------------------------------

struct ICPredictorParams {
    std::vector<double> A;   // row-major dim x dim
    int dim = 0;
    double B = 1.0;
    double epsilon = 0.01;   // uniform mixing weight, C * epsilon < 1
    int num_classes = 0;

    // A = min(1, B) * I, the default fixed parameterization.
    static ICPredictorParams identity(int dim, int num_classes, double epsilon, double B);

    // Symmetry within 1e-9, eigenvalues >= -1e-9, spectral norm <= B + 1e-9,
    // epsilon in [0, 1/C). Throws std::invalid_argument.
    void validate() const;

    bool is_scaled_identity() const { return scaled_identity_; }
    double identity_scale() const { return identity_scale_; }
    // Re-detect the fast path after editing A in place.
    void refresh_structure();

private:
    bool scaled_identity_ = false;
    double identity_scale_ = 0.0;
};

double mahalanobis(const std::vector<double>& v, const ICPredictorParams& params);

SimplexVector ic_predict(const ICPredictorParams& params, const ExampleSequence& ex);

// L1 sandwich for a prompt with k irrelevant labels out of L:
//   lower = 2k(1-eps C)/(k + (L-k) e^{2 sqrt(B)}) + 2 eps (C-1)
//   upper = 2k(1-eps C)/L + 2 eps (C-1)
std::pair<double, double> ic_l1_bounds(int L, int k, double B, double eps, int C);

// Cross-entropy sandwich; k == L collapses to (log(1/eps), log(1/eps)).
std::pair<double, double> ic_ce_bounds(int L, int k, double B, double eps, int C);

// Leading excess cross-entropy term of the add-half estimator after N_x
// observations of one key: (C-1)/2 * log(N_x)/N_x.
double kt_excess_bound(double N_x, int C);

// High-probability excess-risk bound for a per-key online learner:
// 6 G_inf sqrt(log(2 |X| C / delta) / N_x).
double generalization_bound(double g_inf, double domain_size, int C, double delta, double N_x);

// One-step projected gradient update of A on the current example under
// cross-entropy, followed by the PSD/spectral-norm projection. Used only when
// metric learning is switched on.
void ic_gradient_step(ICPredictorParams& params, const ExampleSequence& ex, double step_size);

// ---------------------------------------------------------------------------
// Keying: collapse an input vector to the lookup key of the tabular predictor.
// ---------------------------------------------------------------------------

enum class KeyingRule { ExactInput, NearestPrototype };

KeyingRule keying_rule_from_string(const std::string& s);
std::string to_string(KeyingRule r);

// ExactInput: the coordinates printed at 16 significant digits, comma joined.
// NearestPrototype: decimal class index of the best-dot-product prototype
// (ties to the lowest index).
std::string derive_key(KeyingRule rule, const std::vector<double>& input,
                       const BaseDistributionSpec& base);

// ---------------------------------------------------------------------------
// In-weight predictor: per-key estimator table.
// ---------------------------------------------------------------------------

enum class IWBackend { KT, EG };

IWBackend iw_backend_from_string(const std::string& s);
std::string to_string(IWBackend b);

class InWeightTable {
public:
    explicit InWeightTable(int num_classes, IWBackend backend = IWBackend::KT);

    void update(const std::string& key, int label);

    // KT: (count_i + 1/2) / (total + C/2); untouched keys give the uniform vector.
    // EG: current multiplicative-update weights.
    SimplexVector predict(const std::string& key) const;

    int64_t observations(const std::string& key) const;
    int64_t total_observations() const { return total_; }
    size_t num_keys() const { return table_.size(); }
    std::vector<std::string> keys() const;
    const std::vector<int64_t>& counts(const std::string& key) const;

    int num_classes() const { return C_; }
    IWBackend backend() const { return backend_; }

    // Default EG step size at per-key step t: sqrt(2 log(C) / t).
    void set_eg_schedule(std::function<double(int64_t)> eta);

    // {"backend": .., "num_classes": .., "table": {key: {"counts": [..], "total": n}}}
    // (EG entries also carry "weights").
    nlohmann::json to_json() const;
    static InWeightTable from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static InWeightTable load(const std::string& path);

private:
    struct Entry {
        std::vector<int64_t> counts;
        int64_t total = 0;
        std::vector<double> weights;  // EG only
    };
    Entry& touch(const std::string& key);

    std::map<std::string, Entry> table_;  // ordered: deterministic serialization
    int C_;
    IWBackend backend_;
    int64_t total_ = 0;
    std::function<double(int64_t)> eg_eta_;
};

}  // namespace iclab
