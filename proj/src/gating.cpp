#include "iclab/gating.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace iclab {

GateKeyMode gate_key_mode_from_string(const std::string& s) {
    if (s == "QueryKey") return GateKeyMode::QueryKey;
    if (s == "QueryAndRelevanceKey") return GateKeyMode::QueryAndRelevanceKey;
    throw std::invalid_argument("unknown gate key mode: " + s);
}

std::string to_string(GateKeyMode m) {
    return m == GateKeyMode::QueryKey ? "QueryKey" : "QueryAndRelevanceKey";
}

std::string gate_key(GateKeyMode mode, KeyingRule rule, const ExampleSequence& ex,
                     const BaseDistributionSpec& base) {
    std::string qkey = derive_key(rule, ex.query, base);
    if (mode == GateKeyMode::QueryKey) return qkey;
    int count = 0;
    for (const auto& pr : ex.context)
        if (derive_key(rule, pr.input, base) == qkey) ++count;
    qkey.push_back('|');
    qkey += std::to_string(count);
    return qkey;
}

double alpha_update(double alpha, double loss_diff, double eta) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("alpha_update: alpha outside (0, 1)");
    if (!(eta > 0.0)) throw std::invalid_argument("alpha_update: eta must be > 0");
    if (!std::isfinite(loss_diff)) throw std::invalid_argument("alpha_update: non-finite loss diff");
    // Work in log odds; equivalent to the weight form but immune to overflow.
    const double logit = std::log(alpha / (1.0 - alpha)) - eta * loss_diff;
    const double a = 1.0 / (1.0 + std::exp(-logit));
    // Keep strictly inside (0, 1) so later updates stay well defined.
    return std::min(std::max(a, 1e-300), 1.0 - 1e-16);
}

double gate_eta(int64_t t) {
    if (t < 1) throw std::invalid_argument("gate_eta: t must be >= 1");
    return std::sqrt(8.0 * std::log(2.0) / static_cast<double>(t));
}

SimplexVector gated_predict(double alpha, const SimplexVector& g_pred,
                            const SimplexVector& h_pred) {
    return convex_combination(alpha, g_pred, h_pred);
}

int oracle_alpha(double g_risk, double h_risk) {
    return g_risk <= h_risk ? 1 : 0;
}

AlphaTable::AlphaTable() : eta_(gate_eta) {}

double AlphaTable::alpha(const std::string& key) const {
    auto it = cells_.find(key);
    return it == cells_.end() ? 0.5 : it->second.alpha;
}

void AlphaTable::observe(const std::string& key, double loss_diff) {
    Cell& c = cells_[key];
    c.steps += 1;
    c.cum_diff += loss_diff;
    c.alpha = alpha_update(c.alpha, loss_diff, eta_(c.steps));
}

int64_t AlphaTable::steps(const std::string& key) const {
    auto it = cells_.find(key);
    return it == cells_.end() ? 0 : it->second.steps;
}

double AlphaTable::cumulative_diff(const std::string& key) const {
    auto it = cells_.find(key);
    return it == cells_.end() ? 0.0 : it->second.cum_diff;
}

std::vector<std::string> AlphaTable::keys() const {
    std::vector<std::string> out;
    out.reserve(cells_.size());
    for (const auto& [k, v] : cells_) out.push_back(k);
    return out;
}

void AlphaTable::set_schedule(std::function<double(int64_t)> eta) {
    if (!eta) throw std::invalid_argument("set_schedule: empty schedule");
    eta_ = std::move(eta);
}

void RegretLedger::append(LedgerRecord rec) {
    recs_.push_back(std::move(rec));
}

std::map<std::string, double> RegretLedger::cumulative_loss_diff() const {
    std::map<std::string, double> out;
    for (const auto& r : recs_) out[r.gate_key] += r.loss_g - r.loss_h;
    return out;
}

int RegretLedger::alpha_star(const std::string& key) const {
    double cum = 0.0;
    bool seen = false;
    for (const auto& r : recs_)
        if (r.gate_key == key) {
            cum += r.loss_g - r.loss_h;
            seen = true;
        }
    if (!seen) throw std::invalid_argument("alpha_star: key not present in ledger");
    return cum < 0.0 ? 1 : 0;
}

namespace {

void write_csv_field(std::ostream& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
}

}  // namespace

void RegretLedger::write_csv(std::ostream& out) const {
    out << "t,gate_key,alpha_used,loss_f,loss_g,loss_h,label,loss_h_fixed\n";
    for (const auto& r : recs_) {
        out << r.t << ',' << r.gate_key << ',';
        write_csv_field(out, r.alpha_used);
        out << ',';
        write_csv_field(out, r.loss_f);
        out << ',';
        write_csv_field(out, r.loss_g);
        out << ',';
        write_csv_field(out, r.loss_h);
        out << ',' << r.label << ',';
        write_csv_field(out, r.loss_h_fixed);
        out << '\n';
    }
}

void RegretLedger::write_csv_file(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    write_csv(f);
}

RegretLedger RegretLedger::read_csv(std::istream& in) {
    RegretLedger ledger;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("ledger csv: empty file");
    if (line.rfind("t,gate_key,alpha_used,loss_f,loss_g,loss_h", 0) != 0)
        throw std::runtime_error("ledger csv: unexpected header: " + line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        LedgerRecord r;
        auto next = [&]() {
            if (!std::getline(ss, field, ',')) throw std::runtime_error("ledger csv: short row");
            return field;
        };
        r.t = std::stoll(next());
        r.gate_key = next();
        r.alpha_used = std::stod(next());
        r.loss_f = std::stod(next());
        r.loss_g = std::stod(next());
        r.loss_h = std::stod(next());
        r.label = std::stoi(next());
        r.loss_h_fixed = std::stod(next());
        ledger.append(std::move(r));
    }
    return ledger;
}

RegretLedger RegretLedger::read_csv_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    return read_csv(f);
}

namespace {

struct HindsightCaches {
    // Per key: alpha_star and the clamped empirical-frequency comparator.
    std::map<std::string, int> astar;
    std::map<std::string, std::vector<double>> wstar;
};

HindsightCaches build_caches(const RegretLedger& ledger, int num_classes) {
    if (ledger.empty()) throw std::invalid_argument("regret check: empty ledger");
    if (num_classes < 2) throw std::invalid_argument("regret check: need at least 2 classes");
    HindsightCaches hc;
    std::map<std::string, double> cum;
    std::map<std::string, std::vector<double>> freq;
    for (const auto& r : ledger.records()) {
        cum[r.gate_key] += r.loss_g - r.loss_h;
        auto& f = freq[r.gate_key];
        if (f.empty()) f.assign(static_cast<size_t>(num_classes), 0.0);
        if (r.label < 0 || r.label >= num_classes)
            throw std::invalid_argument("regret check: ledger label out of range");
        f[static_cast<size_t>(r.label)] += 1.0;
    }
    for (auto& [key, f] : freq) {
        double total = 0.0;
        for (double v : f) total += v;
        for (double& v : f) v = std::max(v / total, 1e-6);
        double z = 0.0;
        for (double v : f) z += v;
        for (double& v : f) v /= z;
        hc.wstar.emplace(key, f);
        hc.astar[key] = cum[key] < 0.0 ? 1 : 0;
    }
    return hc;
}

}  // namespace

RegretCheckReport check_regret_decomposition(const RegretLedger& ledger, int num_classes, double tol) {
    const HindsightCaches hc = build_caches(ledger, num_classes);
    double sum_f = 0.0, sum_gstar = 0.0, sum_g = 0.0, regret_alpha = 0.0;
    for (const auto& r : ledger.records()) {
        const double lgstar =
            -std::log(hc.wstar.at(r.gate_key)[static_cast<size_t>(r.label)]);
        const int astar = hc.astar.at(r.gate_key);
        sum_f += r.loss_f;
        sum_g += r.loss_g;
        sum_gstar += lgstar;
        regret_alpha += (r.alpha_used - astar) * (r.loss_g - r.loss_h);
    }
    RegretCheckReport rep;
    rep.lhs = sum_f - sum_gstar;
    rep.rhs = regret_alpha + (sum_g - sum_gstar);
    rep.margin = rep.rhs - rep.lhs;
    rep.holds = rep.lhs <= rep.rhs + tol;
    return rep;
}

RegretCheckReport check_split_regret_decomposition(const RegretLedger& ledger, int num_classes, double tol) {
    const HindsightCaches hc = build_caches(ledger, num_classes);
    double sum_f = 0.0, sum_fstar = 0.0, regret_alpha = 0.0, regret_g = 0.0, regret_h = 0.0;
    for (const auto& r : ledger.records()) {
        const double lgstar =
            -std::log(hc.wstar.at(r.gate_key)[static_cast<size_t>(r.label)]);
        const int astar = hc.astar.at(r.gate_key);
        sum_f += r.loss_f;
        sum_fstar += astar ? lgstar : r.loss_h_fixed;
        regret_alpha += (r.alpha_used - astar) * (r.loss_g - r.loss_h);
        regret_g += astar * (r.loss_g - lgstar);
        regret_h += (1 - astar) * (r.loss_h - r.loss_h_fixed);
    }
    RegretCheckReport rep;
    rep.lhs = sum_f - sum_fstar;
    rep.rhs = regret_alpha + regret_g + regret_h;
    rep.margin = rep.rhs - rep.lhs;
    rep.holds = rep.lhs <= rep.rhs + tol;
    return rep;
}

OnlineToBatchReport online_to_batch_check(const RegretLedger& ledger, const std::string& key,
                                          const BaseDistributionSpec& base, IWBackend backend) {
    int cls = -1;
    try {
        size_t pos = 0;
        cls = std::stoi(key, &pos);
        if (pos != key.size()) cls = -1;
    } catch (const std::exception&) {
        cls = -1;
    }
    if (cls < 0 || cls >= base.num_classes())
        throw std::invalid_argument("online_to_batch_check: key must be a class index key");

    OnlineToBatchReport rep;
    double sum_g = 0.0;
    std::vector<double> freq(static_cast<size_t>(base.num_classes()), 0.0);
    for (const auto& r : ledger.records()) {
        if (r.gate_key != key && r.gate_key.rfind(key + "|", 0) != 0) continue;
        sum_g += r.loss_g;
        freq[static_cast<size_t>(r.label)] += 1.0;
        rep.n += 1;
    }
    if (rep.n < 100)
        throw std::invalid_argument("online_to_batch_check: fewer than 100 records on the key");

    rep.avg_online_loss = sum_g / static_cast<double>(rep.n);
    rep.batch_optimum = entropy(y_star_for_class(cls, base));

    if (backend == IWBackend::KT) {
        rep.regret_term = kt_excess_bound(static_cast<double>(rep.n), base.num_classes());
    } else {
        // Realized regret against the clamped empirical minimizer.
        for (double& v : freq) v = std::max(v / static_cast<double>(rep.n), 1e-6);
        double z = 0.0;
        for (double v : freq) z += v;
        for (double& v : freq) v /= z;
        double sum_star = 0.0;
        for (const auto& r : ledger.records()) {
            if (r.gate_key != key && r.gate_key.rfind(key + "|", 0) != 0) continue;
            sum_star += -std::log(freq[static_cast<size_t>(r.label)]);
        }
        rep.regret_term = (sum_g - sum_star) / static_cast<double>(rep.n);
    }
    rep.slack = 3.0 * std::sqrt(std::log(100.0) / static_cast<double>(rep.n));
    rep.rhs = rep.batch_optimum + rep.regret_term + rep.slack;
    rep.holds = rep.avg_online_loss <= rep.rhs;
    return rep;
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "ic_only") return ModelKind::ICOnly;
    if (s == "iw_only") return ModelKind::IWOnly;
    if (s == "gated") return ModelKind::Gated;
    throw std::invalid_argument("unknown model kind: " + s);
}

std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::ICOnly: return "ic_only";
        case ModelKind::IWOnly: return "iw_only";
        default: return "gated";
    }
}

Trainer::Trainer(const BaseDistributionSpec& base, const TrainerOptions& opts)
    : base_(base),
      opts_(opts),
      ic_(ICPredictorParams::identity(base.d, base.num_classes(), opts.epsilon, opts.B)),
      ic_initial_(ic_),
      table_(base.num_classes(), opts.backend) {
    base_.validate();
    if (base_.prototypes.empty()) throw std::invalid_argument("Trainer: prototypes not initialized");
}

SimplexVector Trainer::predict(const ExampleSequence& ex) const {
    switch (opts_.kind) {
        case ModelKind::IWOnly:
            return table_.predict(derive_key(opts_.keying, ex.query, base_));
        case ModelKind::ICOnly:
            return ic_predict(ic_, ex);
        default: {
            const SimplexVector g = table_.predict(derive_key(opts_.keying, ex.query, base_));
            const SimplexVector h = ic_predict(ic_, ex);
            return gated_predict(alphas_.alpha(gate_key(opts_.gate_mode, opts_.keying, ex, base_)),
                                 g, h);
        }
    }
}

SimplexVector Trainer::step(const ExampleSequence& ex) {
    t_ += 1;
    const std::string iw_key = derive_key(opts_.keying, ex.query, base_);
    const std::string gkey = gate_key(opts_.gate_mode, opts_.keying, ex, base_);

    const SimplexVector g_pred = table_.predict(iw_key);
    const SimplexVector h_pred = ic_predict(ic_, ex);
    const double a = opts_.kind == ModelKind::Gated ? alphas_.alpha(gkey)
                     : opts_.kind == ModelKind::IWOnly ? 1.0
                                                       : 0.0;
    const SimplexVector f_pred = gated_predict(a, g_pred, h_pred);

    LedgerRecord rec;
    rec.t = t_;
    rec.gate_key = gkey;
    rec.alpha_used = a;
    rec.loss_f = cross_entropy(f_pred, ex.target_label);
    rec.loss_g = cross_entropy(g_pred, ex.target_label);
    rec.loss_h = cross_entropy(h_pred, ex.target_label);
    rec.label = ex.target_label;
    rec.loss_h_fixed = opts_.learn_h
                           ? cross_entropy(ic_predict(ic_initial_, ex), ex.target_label)
                           : rec.loss_h;

    // Updates happen only after every prediction above was made.
    if (opts_.kind != ModelKind::ICOnly) table_.update(iw_key, ex.target_label);
    if (opts_.learn_h && opts_.kind != ModelKind::IWOnly)
        ic_gradient_step(ic_, ex, opts_.h_step_size);
    if (opts_.kind == ModelKind::Gated) alphas_.observe(gkey, rec.loss_g - rec.loss_h);

    ledger_.append(std::move(rec));
    return f_pred;
}

}  // namespace iclab
