#pragma once

#include <string>
#include <vector>

namespace iclab {

// Probability vector over class labels. Entries are validated nonnegative and
// summing to 1 within 1e-12 at construction.
class SimplexVector {
public:
    explicit SimplexVector(std::vector<double> probs);

    static SimplexVector uniform(int num_classes);
    static SimplexVector one_hot(int num_classes, int label);
    // Rescale nonnegative weights with positive total mass.
    static SimplexVector normalized(std::vector<double> weights);

    int size() const { return static_cast<int>(p_.size()); }
    double operator[](int i) const { return p_[static_cast<size_t>(i)]; }
    const std::vector<double>& probs() const { return p_; }

private:
    struct unchecked_t {};
    SimplexVector(std::vector<double> probs, unchecked_t) : p_(std::move(probs)) {}
    std::vector<double> p_;

    friend SimplexVector convex_combination(double, const SimplexVector&, const SimplexVector&);
};

// One context element: unit-norm input vector plus class label.
struct LabeledPair {
    std::vector<double> input;
    int label = 0;
};

// A full prompt: L labeled context pairs and an unlabeled query, together with
// the held target label. `relevant` must equal "some context label == target_label".
struct ExampleSequence {
    std::vector<LabeledPair> context;
    std::vector<double> query;
    int target_label = 0;
    bool relevant = false;
};

// Throws std::invalid_argument when the structural invariants are violated
// (unit-norm inputs within 1e-9, label range, relevance flag consistency).
void validate_example(const ExampleSequence& ex, int num_classes);

bool context_contains_label(const ExampleSequence& ex, int label);

// Lowest index wins ties.
int argmax_index(const std::vector<double>& v);

double dot(const std::vector<double>& a, const std::vector<double>& b);
double l2_norm(const std::vector<double>& v);

// -sum_c target_c * log(pred_c), natural log. Throws std::domain_error when a
// needed pred entry is zero.
double cross_entropy(const SimplexVector& pred, const SimplexVector& target);
double cross_entropy(const SimplexVector& pred, int target_label);

// 0 when argmax(pred) == target_label (ties resolved to the lowest index), else 1.
double zero_one(const SimplexVector& pred, int target_label);

double l1_distance(const SimplexVector& a, const SimplexVector& b);

// Shannon entropy, natural log; 0 log 0 = 0.
double entropy(const SimplexVector& p);

// alpha * g + (1 - alpha) * h without re-running the sum check.
SimplexVector convex_combination(double alpha, const SimplexVector& g, const SimplexVector& h);

}  // namespace iclab
