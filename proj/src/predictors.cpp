#include "iclab/predictors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace iclab {

namespace {

Eigen::MatrixXd to_eigen(const std::vector<double>& flat, int d) {
    Eigen::MatrixXd M(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) M(i, j) = flat[static_cast<size_t>(i * d + j)];
    return M;
}

void from_eigen(const Eigen::MatrixXd& M, std::vector<double>& flat) {
    const int d = static_cast<int>(M.rows());
    flat.assign(static_cast<size_t>(d) * static_cast<size_t>(d), 0.0);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) flat[static_cast<size_t>(i * d + j)] = M(i, j);
}

}  // namespace

ICPredictorParams ICPredictorParams::identity(int dim, int num_classes, double epsilon, double B) {
    if (dim < 1) throw std::invalid_argument("ic params: dim must be >= 1");
    ICPredictorParams p;
    p.dim = dim;
    p.B = B;
    p.epsilon = epsilon;
    p.num_classes = num_classes;
    const double s = std::min(1.0, B);
    p.A.assign(static_cast<size_t>(dim) * static_cast<size_t>(dim), 0.0);
    for (int i = 0; i < dim; ++i) p.A[static_cast<size_t>(i * dim + i)] = s;
    p.refresh_structure();
    p.validate();
    return p;
}

void ICPredictorParams::refresh_structure() {
    scaled_identity_ = false;
    identity_scale_ = 0.0;
    if (dim < 1 || A.size() != static_cast<size_t>(dim) * static_cast<size_t>(dim)) return;
    const double s = A[0];
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            const double v = A[static_cast<size_t>(i * dim + j)];
            if (i == j ? v != s : v != 0.0) return;
        }
    scaled_identity_ = true;
    identity_scale_ = s;
}

void ICPredictorParams::validate() const {
    if (dim < 1) throw std::invalid_argument("ic params: dim must be >= 1");
    if (A.size() != static_cast<size_t>(dim) * static_cast<size_t>(dim))
        throw std::invalid_argument("ic params: A is not dim x dim");
    if (num_classes < 2) throw std::invalid_argument("ic params: need at least 2 classes");
    if (!(B >= 0.0)) throw std::invalid_argument("ic params: B must be >= 0");
    if (!(epsilon >= 0.0) || epsilon * num_classes >= 1.0)
        throw std::invalid_argument("ic params: epsilon outside [0, 1/C)");
    for (int i = 0; i < dim; ++i)
        for (int j = i + 1; j < dim; ++j)
            if (std::abs(A[static_cast<size_t>(i * dim + j)] - A[static_cast<size_t>(j * dim + i)]) >
                1e-9)
                throw std::invalid_argument("ic params: A not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(A, dim), Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (lo < -1e-9) throw std::invalid_argument("ic params: A has a negative eigenvalue");
    if (hi > B + 1e-9) throw std::invalid_argument("ic params: spectral norm of A exceeds B");
}

double mahalanobis(const std::vector<double>& v, const ICPredictorParams& params) {
    const int d = params.dim;
    if (static_cast<int>(v.size()) != d)
        throw std::invalid_argument("mahalanobis: dimension mismatch");
    double q = 0.0;
    if (params.is_scaled_identity()) {
        q = params.identity_scale() * dot(v, v);
    } else {
        for (int i = 0; i < d; ++i) {
            double row = 0.0;
            const double* a = &params.A[static_cast<size_t>(i * d)];
            for (int j = 0; j < d; ++j) row += a[j] * v[static_cast<size_t>(j)];
            q += v[static_cast<size_t>(i)] * row;
        }
    }
    return std::sqrt(std::max(q, 0.0));  // clamp PSD rounding noise
}

SimplexVector ic_predict(const ICPredictorParams& params, const ExampleSequence& ex) {
    if (ex.context.empty()) throw std::invalid_argument("ic_predict: empty context");
    const int C = params.num_classes;
    const size_t L = ex.context.size();

    // softmax over negative A-distances, computed stably
    std::vector<double> neg(L);
    double mx = -1e300;
    std::vector<double> diff(ex.query.size());
    for (size_t l = 0; l < L; ++l) {
        const auto& x = ex.context[l].input;
        if (x.size() != ex.query.size())
            throw std::invalid_argument("ic_predict: context dimension mismatch");
        for (size_t i = 0; i < diff.size(); ++i) diff[i] = x[i] - ex.query[i];
        neg[l] = -mahalanobis(diff, params);
        mx = std::max(mx, neg[l]);
    }
    double z = 0.0;
    for (size_t l = 0; l < L; ++l) {
        neg[l] = std::exp(neg[l] - mx);
        z += neg[l];
    }

    std::vector<double> p(static_cast<size_t>(C), params.epsilon);
    const double body = 1.0 - C * params.epsilon;
    for (size_t l = 0; l < L; ++l) {
        const int y = ex.context[l].label;
        if (y < 0 || y >= C) throw std::invalid_argument("ic_predict: context label out of range");
        p[static_cast<size_t>(y)] += body * (neg[l] / z);
    }
    return SimplexVector::normalized(std::move(p));
}

std::pair<double, double> ic_l1_bounds(int L, int k, double B, double eps, int C) {
    if (L < 1) throw std::invalid_argument("ic_l1_bounds: L must be >= 1");
    if (k < 0 || k > L) throw std::invalid_argument("ic_l1_bounds: k outside [0, L]");
    if (C < 2) throw std::invalid_argument("ic_l1_bounds: need at least 2 classes");
    if (!(B >= 0.0)) throw std::invalid_argument("ic_l1_bounds: B must be >= 0");
    if (!(eps >= 0.0) || eps * C >= 1.0)
        throw std::invalid_argument("ic_l1_bounds: epsilon outside [0, 1/C)");
    const double tail = 2.0 * eps * (C - 1);
    const double body = 1.0 - eps * C;
    const double lower = 2.0 * k * body / (k + (L - k) * std::exp(2.0 * std::sqrt(B))) + tail;
    const double upper = 2.0 * k * body / L + tail;
    return {lower, upper};
}

std::pair<double, double> ic_ce_bounds(int L, int k, double B, double eps, int C) {
    if (L < 1) throw std::invalid_argument("ic_ce_bounds: L must be >= 1");
    if (k < 0 || k > L) throw std::invalid_argument("ic_ce_bounds: k outside [0, L]");
    if (C < 2) throw std::invalid_argument("ic_ce_bounds: need at least 2 classes");
    if (!(B >= 0.0)) throw std::invalid_argument("ic_ce_bounds: B must be >= 0");
    if (k == L) {
        if (!(eps > 0.0) || eps * C >= 1.0)
            throw std::invalid_argument("ic_ce_bounds: epsilon outside (0, 1/C) for k == L");
        const double v = std::log(1.0 / eps);
        return {v, v};
    }
    if (!(eps >= 0.0) || eps * C >= 1.0)
        throw std::invalid_argument("ic_ce_bounds: epsilon outside [0, 1/C)");
    const double body = 1.0 - eps * C;
    const double lower = k * body / (k + (L - k) * std::exp(2.0 * std::sqrt(B))) + eps * (C - 1);
    const double upper = -std::log(body * (L - k) / L + eps);
    return {lower, upper};
}

double kt_excess_bound(double N_x, int C) {
    if (!(N_x >= 1.0)) throw std::invalid_argument("kt_excess_bound: N_x must be >= 1");
    if (C < 2) throw std::invalid_argument("kt_excess_bound: need at least 2 classes");
    return 0.5 * (C - 1) * std::log(N_x) / N_x;
}

double generalization_bound(double g_inf, double domain_size, int C, double delta, double N_x) {
    if (!(g_inf > 0.0)) throw std::invalid_argument("generalization_bound: G_inf must be > 0");
    if (!(domain_size >= 1.0))
        throw std::invalid_argument("generalization_bound: domain size must be >= 1");
    if (C < 2) throw std::invalid_argument("generalization_bound: need at least 2 classes");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("generalization_bound: delta outside (0, 1)");
    if (!(N_x >= 1.0)) throw std::invalid_argument("generalization_bound: N_x must be >= 1");
    return 6.0 * g_inf * std::sqrt(std::log(2.0 * domain_size * C / delta) / N_x);
}

void ic_gradient_step(ICPredictorParams& params, const ExampleSequence& ex, double step_size) {
    if (!(step_size > 0.0)) throw std::invalid_argument("ic_gradient_step: step size must be > 0");
    const int d = params.dim;
    const int C = params.num_classes;
    const size_t L = ex.context.size();
    if (L == 0) throw std::invalid_argument("ic_gradient_step: empty context");

    // Forward pass pieces.
    std::vector<std::vector<double>> diffs(L);
    std::vector<double> dist(L), s(L);
    double mx = -1e300;
    for (size_t l = 0; l < L; ++l) {
        diffs[l].resize(static_cast<size_t>(d));
        for (int i = 0; i < d; ++i)
            diffs[l][static_cast<size_t>(i)] = ex.context[l].input[static_cast<size_t>(i)] -
                                               ex.query[static_cast<size_t>(i)];
        dist[l] = mahalanobis(diffs[l], params);
        mx = std::max(mx, -dist[l]);
    }
    double z = 0.0;
    for (size_t l = 0; l < L; ++l) {
        s[l] = std::exp(-dist[l] - mx);
        z += s[l];
    }
    for (size_t l = 0; l < L; ++l) s[l] /= z;

    const int c = ex.target_label;
    const double body = 1.0 - C * params.epsilon;
    double pc = params.epsilon;
    for (size_t l = 0; l < L; ++l)
        if (ex.context[l].label == c) pc += body * s[l];

    // d loss / d s_l = -(body / pc) * 1{label_l == c}; chain through the softmax
    // and the distances. d dist_l / d A = diff diff' / (2 dist_l), skipped when
    // the pair sits on the query (distance about 0, flat direction).
    std::vector<double> gl(L, 0.0);
    for (size_t l = 0; l < L; ++l)
        gl[l] = (ex.context[l].label == c) ? -(body / pc) : 0.0;
    double avg = 0.0;
    for (size_t l = 0; l < L; ++l) avg += gl[l] * s[l];

    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d, d);
    for (size_t l = 0; l < L; ++l) {
        const double w = s[l] * (gl[l] - avg);  // d loss / d (-dist_l)
        if (w == 0.0 || dist[l] < 1e-12) continue;
        const double coeff = -w / (2.0 * dist[l]);  // d loss / d dist_l times d dist / d quad
        Eigen::Map<const Eigen::VectorXd> v(diffs[l].data(), d);
        G.noalias() += coeff * (v * v.transpose());
    }

    Eigen::MatrixXd A = to_eigen(params.A, d) - step_size * G;
    A = 0.5 * (A + A.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    Eigen::VectorXd ev = es.eigenvalues();
    for (int i = 0; i < d; ++i) ev(i) = std::min(std::max(ev(i), 0.0), params.B);
    A = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    from_eigen(A, params.A);
    params.refresh_structure();
}

KeyingRule keying_rule_from_string(const std::string& s) {
    if (s == "ExactInput") return KeyingRule::ExactInput;
    if (s == "NearestPrototype") return KeyingRule::NearestPrototype;
    throw std::invalid_argument("unknown keying rule: " + s);
}

std::string to_string(KeyingRule r) {
    return r == KeyingRule::ExactInput ? "ExactInput" : "NearestPrototype";
}

std::string derive_key(KeyingRule rule, const std::vector<double>& input,
                       const BaseDistributionSpec& base) {
    if (input.empty()) throw std::invalid_argument("derive_key: empty input");
    if (rule == KeyingRule::ExactInput) {
        std::string key;
        key.reserve(input.size() * 24);
        char buf[40];
        for (size_t i = 0; i < input.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.16g", input[i]);
            if (i) key.push_back(',');
            key += buf;
        }
        return key;
    }
    if (base.prototypes.empty())
        throw std::invalid_argument("derive_key: NearestPrototype needs prototypes");
    int best = 0;
    double best_dot = -1e300;
    for (size_t c = 0; c < base.prototypes.size(); ++c) {
        const double v = dot(input, base.prototypes[c]);
        if (v > best_dot) {
            best_dot = v;
            best = static_cast<int>(c);
        }
    }
    return std::to_string(best);
}

IWBackend iw_backend_from_string(const std::string& s) {
    if (s == "KT") return IWBackend::KT;
    if (s == "EG") return IWBackend::EG;
    throw std::invalid_argument("unknown in-weight backend: " + s);
}

std::string to_string(IWBackend b) { return b == IWBackend::KT ? "KT" : "EG"; }

InWeightTable::InWeightTable(int num_classes, IWBackend backend)
    : C_(num_classes), backend_(backend) {
    if (num_classes < 2) throw std::invalid_argument("InWeightTable: need at least 2 classes");
    eg_eta_ = [C = C_](int64_t t) { return std::sqrt(2.0 * std::log(C) / static_cast<double>(t)); };
}

InWeightTable::Entry& InWeightTable::touch(const std::string& key) {
    auto it = table_.find(key);
    if (it == table_.end()) {
        Entry e;
        e.counts.assign(static_cast<size_t>(C_), 0);
        if (backend_ == IWBackend::EG)
            e.weights.assign(static_cast<size_t>(C_), 1.0 / C_);
        it = table_.emplace(key, std::move(e)).first;
    }
    return it->second;
}

void InWeightTable::update(const std::string& key, int label) {
    if (label < 0 || label >= C_) throw std::invalid_argument("iw update: label out of range");
    Entry& e = touch(key);
    e.counts[static_cast<size_t>(label)] += 1;
    e.total += 1;
    total_ += 1;
    if (backend_ == IWBackend::EG) {
        // Multiplicative update under the cross-entropy gradient at the one-hot
        // observation: only the observed coordinate moves, then renormalize.
        const double eta = eg_eta_(e.total);
        const double w = e.weights[static_cast<size_t>(label)];
        const double arg = std::min(eta / std::max(w, 1e-300), 500.0);
        e.weights[static_cast<size_t>(label)] = w * std::exp(arg);
        double z = 0.0;
        for (double v : e.weights) z += v;
        for (double& v : e.weights) v /= z;
    }
}

SimplexVector InWeightTable::predict(const std::string& key) const {
    auto it = table_.find(key);
    if (backend_ == IWBackend::KT) {
        std::vector<double> p(static_cast<size_t>(C_));
        const double denom = (it == table_.end() ? 0.0 : static_cast<double>(it->second.total)) +
                             0.5 * C_;
        for (int i = 0; i < C_; ++i) {
            const double n = it == table_.end()
                                 ? 0.0
                                 : static_cast<double>(it->second.counts[static_cast<size_t>(i)]);
            p[static_cast<size_t>(i)] = (n + 0.5) / denom;
        }
        return SimplexVector::normalized(std::move(p));
    }
    if (it == table_.end()) return SimplexVector::uniform(C_);
    return SimplexVector::normalized(it->second.weights);
}

int64_t InWeightTable::observations(const std::string& key) const {
    auto it = table_.find(key);
    return it == table_.end() ? 0 : it->second.total;
}

std::vector<std::string> InWeightTable::keys() const {
    std::vector<std::string> out;
    out.reserve(table_.size());
    for (const auto& [k, v] : table_) out.push_back(k);
    return out;
}

const std::vector<int64_t>& InWeightTable::counts(const std::string& key) const {
    auto it = table_.find(key);
    if (it == table_.end()) throw std::invalid_argument("counts: unknown key");
    return it->second.counts;
}

void InWeightTable::set_eg_schedule(std::function<double(int64_t)> eta) {
    if (!eta) throw std::invalid_argument("set_eg_schedule: empty schedule");
    eg_eta_ = std::move(eta);
}

nlohmann::json InWeightTable::to_json() const {
    nlohmann::json t = nlohmann::json::object();
    for (const auto& [key, e] : table_) {
        nlohmann::json entry{{"counts", e.counts}, {"total", e.total}};
        if (backend_ == IWBackend::EG) entry["weights"] = e.weights;
        t[key] = std::move(entry);
    }
    return nlohmann::json{
        {"backend", to_string(backend_)}, {"num_classes", C_}, {"table", std::move(t)}};
}

InWeightTable InWeightTable::from_json(const nlohmann::json& j) {
    InWeightTable t(j.at("num_classes").get<int>(),
                    iw_backend_from_string(j.at("backend").get<std::string>()));
    for (const auto& [key, entry] : j.at("table").items()) {
        Entry e;
        e.counts = entry.at("counts").get<std::vector<int64_t>>();
        if (static_cast<int>(e.counts.size()) != t.C_)
            throw std::invalid_argument("table snapshot: counts length mismatch");
        e.total = entry.at("total").get<int64_t>();
        if (t.backend_ == IWBackend::EG) {
            e.weights = entry.at("weights").get<std::vector<double>>();
            if (static_cast<int>(e.weights.size()) != t.C_)
                throw std::invalid_argument("table snapshot: weights length mismatch");
        }
        t.total_ += e.total;
        t.table_.emplace(key, std::move(e));
    }
    return t;
}

void InWeightTable::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << to_json().dump(2) << "\n";
}

InWeightTable InWeightTable::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    nlohmann::json j;
    f >> j;
    return from_json(j);
}

}  // namespace iclab
