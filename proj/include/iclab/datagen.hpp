#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "iclab/core.hpp"
#include "iclab/rng.hpp"

namespace iclab {

// Class-prototype mixture on the unit sphere with a rare/frequent class split.
struct BaseDistributionSpec {
    int d = 0;
    std::vector<int> high_classes;   // frequent group, total mass p_high
    std::vector<int> low_classes;    // rare group, total mass 1 - p_high
    double p_high = 0.9;
    double sigma = 0.2;              // isotropic input noise scale
    double p_label = 0.0;            // label flip rate, flip goes to (c + 1) mod C
    bool noise_context_labels = false;  // extend label noise to context pairs
    std::vector<std::vector<double>> prototypes;  // row per class, unit norm

    int num_classes() const {
        return static_cast<int>(high_classes.size() + low_classes.size());
    }
    // Marginal probability of a single class label.
    double class_prob(int label) const;
    void validate() const;
};

// Draw num_classes unit-sphere prototypes; throws if two classes collide exactly.
std::vector<std::vector<double>> init_prototypes(int num_classes, int d, RngStream& rng);

// label := label with prob 1 - p_label, else (label + 1) mod num_classes.
int apply_label_noise(int label, int num_classes, double p_label, RngStream& rng);

// Prototype of the label plus Gaussian noise, re-normalized. sigma == 0 returns
// the prototype bytes untouched. Label noise applied iff with_label_noise.
LabeledPair sample_base_pair(const BaseDistributionSpec& base, RngStream& rng,
                             bool with_label_noise);

struct ContextSpec {
    int L = 1;
    double p_relevant = 0.9;
    std::optional<int> L_relevant;   // exact relevant-pair count when engaged
    int max_rejection = 10000;
    void validate() const;
};

// Counters for the non-throwing fallback paths of the rejection sampler.
struct SampleStats {
    int64_t rejection_fallbacks = 0;  // L-tuple cap hit, forced construction used
    int64_t conditioned_retries_exhausted = 0;
    void merge(const SampleStats& other) {
        rejection_fallbacks += other.rejection_fallbacks;
        conditioned_retries_exhausted += other.conditioned_retries_exhausted;
    }
};

// One training/eval example: query-target pair from the base distribution,
// relevance flag Bernoulli(p_relevant), L context pairs conditioned so that the
// tuple contains the target class iff the flag says so. Label noise hits the
// target afterwards (context labels only when base.noise_context_labels).
ExampleSequence sample_example(const BaseDistributionSpec& base, const ContextSpec& ctx,
                               RngStream& rng, SampleStats* stats = nullptr);

// Evaluation-cell variant: target class drawn uniformly from class_pool and the
// realized relevance flag forced to force_relevant.
ExampleSequence sample_example_conditioned(const BaseDistributionSpec& base,
                                           const ContextSpec& ctx, bool force_relevant,
                                           const std::vector<int>& class_pool, RngStream& rng,
                                           SampleStats* stats = nullptr);

// Cyclic label shift within the frequent group and within the rare group,
// applied to the target and every context label. Inputs untouched, relevance
// flag preserved (the shift is a bijection applied on both sides).
ExampleSequence make_oobd(const ExampleSequence& ex, const BaseDistributionSpec& base);

// True conditional label distribution for a query of class cls under the label
// noise model: mass 1 - p_label on cls, p_label on (cls + 1) mod C.
SimplexVector y_star_for_class(int cls, const BaseDistributionSpec& base);

// One JSON object per line:
// {"seq_id":..,"context":[{"x":[..],"y":..}],"query":[..],"target":..,"relevant":..}
void write_examples_jsonl(std::ostream& out, const std::vector<ExampleSequence>& examples);

}  // namespace iclab
