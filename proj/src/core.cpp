#include "iclab/core.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace iclab {

namespace {

void check_probs(const std::vector<double>& p) {
    if (p.size() < 2) throw std::invalid_argument("SimplexVector: need at least 2 classes");
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) throw std::invalid_argument("SimplexVector: negative or NaN entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("SimplexVector: entries sum to " + std::to_string(sum));
}

}  // namespace

SimplexVector::SimplexVector(std::vector<double> probs) : p_(std::move(probs)) {
    check_probs(p_);
}

SimplexVector SimplexVector::uniform(int num_classes) {
    if (num_classes < 2) throw std::invalid_argument("uniform: need at least 2 classes");
    return SimplexVector(std::vector<double>(static_cast<size_t>(num_classes), 1.0 / num_classes),
                         unchecked_t{});
}

SimplexVector SimplexVector::one_hot(int num_classes, int label) {
    if (num_classes < 2) throw std::invalid_argument("one_hot: need at least 2 classes");
    if (label < 0 || label >= num_classes) throw std::invalid_argument("one_hot: label out of range");
    std::vector<double> p(static_cast<size_t>(num_classes), 0.0);
    p[static_cast<size_t>(label)] = 1.0;
    return SimplexVector(std::move(p), unchecked_t{});
}

SimplexVector SimplexVector::normalized(std::vector<double> weights) {
    double sum = 0.0;
    for (double v : weights) {
        if (!(v >= 0.0)) throw std::invalid_argument("normalized: negative or NaN weight");
        sum += v;
    }
    if (!(sum > 0.0)) throw std::invalid_argument("normalized: zero total mass");
    for (double& v : weights) v /= sum;
    return SimplexVector(std::move(weights), unchecked_t{});
}

void validate_example(const ExampleSequence& ex, int num_classes) {
    auto check_pair = [&](const std::vector<double>& x, int label, const char* what) {
        if (x.empty()) throw std::invalid_argument(std::string(what) + ": empty input");
        const double n = l2_norm(x);
        if (std::abs(n - 1.0) > 1e-9)
            throw std::invalid_argument(std::string(what) + ": input norm " + std::to_string(n));
        if (label < 0 || label >= num_classes)
            throw std::invalid_argument(std::string(what) + ": label out of range");
    };
    check_pair(ex.query, ex.target_label, "query");
    for (const auto& pr : ex.context) {
        check_pair(pr.input, pr.label, "context pair");
        if (pr.input.size() != ex.query.size())
            throw std::invalid_argument("context pair: dimension mismatch with query");
    }
    if (ex.relevant != context_contains_label(ex, ex.target_label))
        throw std::invalid_argument("relevance flag inconsistent with context labels");
}

bool context_contains_label(const ExampleSequence& ex, int label) {
    for (const auto& pr : ex.context)
        if (pr.label == label) return true;
    return false;
}

int argmax_index(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("argmax_index: empty vector");
    size_t best = 0;
    for (size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return static_cast<int>(best);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(const std::vector<double>& v) {
    return std::sqrt(dot(v, v));
}

double cross_entropy(const SimplexVector& pred, const SimplexVector& target) {
    if (pred.size() != target.size()) throw std::invalid_argument("cross_entropy: size mismatch");
    double s = 0.0;
    for (int i = 0; i < pred.size(); ++i) {
        if (target[i] == 0.0) continue;
        if (pred[i] <= 0.0)
            throw std::domain_error("cross_entropy: zero predicted mass on a target class");
        s -= target[i] * std::log(pred[i]);
    }
    return s;
}

double cross_entropy(const SimplexVector& pred, int target_label) {
    if (target_label < 0 || target_label >= pred.size())
        throw std::invalid_argument("cross_entropy: label out of range");
    const double p = pred[target_label];
    if (p <= 0.0) throw std::domain_error("cross_entropy: zero predicted mass on the target class");
    return -std::log(p);
}

double zero_one(const SimplexVector& pred, int target_label) {
    if (target_label < 0 || target_label >= pred.size())
        throw std::invalid_argument("zero_one: label out of range");
    return argmax_index(pred.probs()) == target_label ? 0.0 : 1.0;
}

double l1_distance(const SimplexVector& a, const SimplexVector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("l1_distance: size mismatch");
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

double entropy(const SimplexVector& p) {
    double h = 0.0;
    for (int i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
    return h;
}

SimplexVector convex_combination(double alpha, const SimplexVector& g, const SimplexVector& h) {
    if (g.size() != h.size()) throw std::invalid_argument("convex_combination: size mismatch");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("convex_combination: alpha outside [0, 1]");
    std::vector<double> out(static_cast<size_t>(g.size()));
    for (int i = 0; i < g.size(); ++i) out[static_cast<size_t>(i)] = alpha * g[i] + (1.0 - alpha) * h[i];
    return SimplexVector(std::move(out), SimplexVector::unchecked_t{});
}

}  // namespace iclab
