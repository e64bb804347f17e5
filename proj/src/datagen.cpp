#include "iclab/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace iclab {

double BaseDistributionSpec::class_prob(int label) const {
    for (int c : high_classes)
        if (c == label) return p_high / static_cast<double>(high_classes.size());
    for (int c : low_classes)
        if (c == label) return (1.0 - p_high) / static_cast<double>(low_classes.size());
    throw std::invalid_argument("class_prob: unknown label " + std::to_string(label));
}

void BaseDistributionSpec::validate() const {
    if (d < 1) throw std::invalid_argument("base: d must be >= 1");
    if (high_classes.empty() || low_classes.empty())
        throw std::invalid_argument("base: both class groups must be nonempty");
    const int C = num_classes();
    if (C < 2) throw std::invalid_argument("base: need at least 2 classes");
    std::vector<bool> seen(static_cast<size_t>(C), false);
    auto mark = [&](int c) {
        if (c < 0 || c >= C) throw std::invalid_argument("base: class id out of range");
        if (seen[static_cast<size_t>(c)]) throw std::invalid_argument("base: duplicate class id");
        seen[static_cast<size_t>(c)] = true;
    };
    for (int c : high_classes) mark(c);
    for (int c : low_classes) mark(c);
    if (!(p_high > 0.0 && p_high < 1.0)) throw std::invalid_argument("base: p_high outside (0, 1)");
    if (!(sigma >= 0.0)) throw std::invalid_argument("base: sigma must be >= 0");
    if (!(p_label >= 0.0 && p_label < 1.0)) throw std::invalid_argument("base: p_label outside [0, 1)");
    if (!prototypes.empty()) {
        if (static_cast<int>(prototypes.size()) != C)
            throw std::invalid_argument("base: prototype count does not match class count");
        for (const auto& p : prototypes) {
            if (static_cast<int>(p.size()) != d)
                throw std::invalid_argument("base: prototype dimension mismatch");
            if (std::abs(l2_norm(p) - 1.0) > 1e-9)
                throw std::invalid_argument("base: prototype not unit norm");
        }
    }
}

std::vector<std::vector<double>> init_prototypes(int num_classes, int d, RngStream& rng) {
    if (num_classes < 2) throw std::invalid_argument("init_prototypes: need at least 2 classes");
    if (d < 1) throw std::invalid_argument("init_prototypes: d must be >= 1");
    std::vector<std::vector<double>> protos;
    protos.reserve(static_cast<size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) {
        std::vector<double> v(static_cast<size_t>(d));
        double n = 0.0;
        do {
            for (double& x : v) x = rng.gaussian();
            n = l2_norm(v);
        } while (n == 0.0);
        for (double& x : v) x /= n;
        protos.push_back(std::move(v));
    }
    for (size_t i = 0; i < protos.size(); ++i)
        for (size_t j = i + 1; j < protos.size(); ++j)
            if (protos[i] == protos[j])
                throw std::runtime_error("init_prototypes: classes " + std::to_string(i) + " and " +
                                         std::to_string(j) + " drew identical prototypes");
    return protos;
}

int apply_label_noise(int label, int num_classes, double p_label, RngStream& rng) {
    if (label < 0 || label >= num_classes)
        throw std::invalid_argument("apply_label_noise: label out of range");
    if (!(p_label >= 0.0 && p_label < 1.0))
        throw std::invalid_argument("apply_label_noise: p_label outside [0, 1)");
    if (p_label == 0.0) return label;
    return rng.uniform01() < p_label ? (label + 1) % num_classes : label;
}

namespace {

int sample_label(const BaseDistributionSpec& base, RngStream& rng) {
    if (rng.uniform01() < base.p_high)
        return base.high_classes[static_cast<size_t>(rng.uniform_int(
            static_cast<int>(base.high_classes.size())))];
    return base.low_classes[static_cast<size_t>(rng.uniform_int(
        static_cast<int>(base.low_classes.size())))];
}

std::vector<double> sample_input(const BaseDistributionSpec& base, int label, RngStream& rng) {
    const auto& proto = base.prototypes[static_cast<size_t>(label)];
    if (base.sigma == 0.0) return proto;  // keep prototype bytes exactly
    std::vector<double> x(proto);
    for (double& v : x) v += base.sigma * rng.gaussian();
    double n = l2_norm(x);
    while (n == 0.0) {  // measure-zero guard
        x = proto;
        for (double& v : x) v += base.sigma * rng.gaussian();
        n = l2_norm(x);
    }
    for (double& v : x) v /= n;
    return x;
}

// Label from the marginal conditioned on != excluded.
int sample_label_excluding(const BaseDistributionSpec& base, int excluded, RngStream& rng) {
    for (;;) {
        int c = sample_label(base, rng);
        if (c != excluded) return c;
    }
}

// Cheap per-sample precondition; full parameter validation happens at run setup.
void require_prototypes(const BaseDistributionSpec& base) {
    if (base.prototypes.empty())
        throw std::invalid_argument("base: prototypes not initialized");
}

std::vector<LabeledPair> draw_context(const BaseDistributionSpec& base, const ContextSpec& ctx,
                                      int target_class, bool relevant, RngStream& rng,
                                      SampleStats* stats) {
    std::vector<LabeledPair> pairs;
    pairs.reserve(static_cast<size_t>(ctx.L));

    if (relevant && ctx.L_relevant.has_value()) {
        // Exact relevant-count mode: choose the slots, then fill.
        const int r = *ctx.L_relevant;
        std::vector<int> slots(static_cast<size_t>(ctx.L));
        for (int i = 0; i < ctx.L; ++i) slots[static_cast<size_t>(i)] = i;
        for (int i = 0; i < r; ++i) {  // partial Fisher-Yates
            int j = i + rng.uniform_int(ctx.L - i);
            std::swap(slots[static_cast<size_t>(i)], slots[static_cast<size_t>(j)]);
        }
        std::vector<bool> is_rel(static_cast<size_t>(ctx.L), false);
        for (int i = 0; i < r; ++i) is_rel[static_cast<size_t>(slots[static_cast<size_t>(i)])] = true;
        for (int l = 0; l < ctx.L; ++l) {
            int c = is_rel[static_cast<size_t>(l)]
                        ? target_class
                        : sample_label_excluding(base, target_class, rng);
            pairs.push_back({sample_input(base, c, rng), c});
        }
        return pairs;
    }

    // Rejection sampling on the L-tuple: accept iff contains-target == relevant.
    for (int attempt = 0; attempt < ctx.max_rejection; ++attempt) {
        pairs.clear();
        bool contains = false;
        for (int l = 0; l < ctx.L; ++l) {
            int c = sample_label(base, rng);
            contains = contains || (c == target_class);
            pairs.push_back({sample_input(base, c, rng), c});
        }
        if (contains == relevant) return pairs;
    }

    // Cap exhausted: force the condition instead of failing the run.
    if (stats) stats->rejection_fallbacks += 1;
    pairs.clear();
    for (int l = 0; l < ctx.L; ++l) {
        int c = relevant ? sample_label(base, rng)
                         : sample_label_excluding(base, target_class, rng);
        pairs.push_back({sample_input(base, c, rng), c});
    }
    if (relevant && !std::any_of(pairs.begin(), pairs.end(),
                                 [&](const LabeledPair& p) { return p.label == target_class; })) {
        int slot = rng.uniform_int(ctx.L);
        pairs[static_cast<size_t>(slot)] = {sample_input(base, target_class, rng), target_class};
    }
    return pairs;
}

ExampleSequence assemble(const BaseDistributionSpec& base, const ContextSpec& ctx,
                         int target_class, bool relevant, RngStream& rng, SampleStats* stats) {
    ExampleSequence ex;
    ex.query = sample_input(base, target_class, rng);
    ex.context = draw_context(base, ctx, target_class, relevant, rng, stats);
    const int C = base.num_classes();
    ex.target_label = apply_label_noise(target_class, C, base.p_label, rng);
    if (base.noise_context_labels && base.p_label > 0.0)
        for (auto& pr : ex.context) pr.label = apply_label_noise(pr.label, C, base.p_label, rng);
    ex.relevant = context_contains_label(ex, ex.target_label);
    return ex;
}

}  // namespace

LabeledPair sample_base_pair(const BaseDistributionSpec& base, RngStream& rng,
                             bool with_label_noise) {
    require_prototypes(base);
    const int c = sample_label(base, rng);
    LabeledPair pr{sample_input(base, c, rng), c};
    if (with_label_noise)
        pr.label = apply_label_noise(pr.label, base.num_classes(), base.p_label, rng);
    return pr;
}

void ContextSpec::validate() const {
    if (L < 1) throw std::invalid_argument("context: L must be >= 1");
    if (!(p_relevant >= 0.0 && p_relevant <= 1.0))
        throw std::invalid_argument("context: p_relevant outside [0, 1]");
    if (L_relevant.has_value() && (*L_relevant < 1 || *L_relevant > L))
        throw std::invalid_argument("context: L_relevant outside [1, L]");
    if (max_rejection < 1) throw std::invalid_argument("context: max_rejection must be >= 1");
}

ExampleSequence sample_example(const BaseDistributionSpec& base, const ContextSpec& ctx,
                               RngStream& rng, SampleStats* stats) {
    require_prototypes(base);
    ctx.validate();
    const int target_class = sample_label(base, rng);
    const bool relevant = rng.uniform01() < ctx.p_relevant;
    return assemble(base, ctx, target_class, relevant, rng, stats);
}

ExampleSequence sample_example_conditioned(const BaseDistributionSpec& base,
                                           const ContextSpec& ctx, bool force_relevant,
                                           const std::vector<int>& class_pool, RngStream& rng,
                                           SampleStats* stats) {
    require_prototypes(base);
    ctx.validate();
    if (class_pool.empty())
        throw std::invalid_argument("sample_example_conditioned: empty class pool");
    // Label noise can flip the realized flag, so resample until it matches.
    for (int attempt = 0; attempt < ctx.max_rejection; ++attempt) {
        const int target_class =
            class_pool[static_cast<size_t>(rng.uniform_int(static_cast<int>(class_pool.size())))];
        ExampleSequence ex = assemble(base, ctx, target_class, force_relevant, rng, stats);
        if (ex.relevant == force_relevant) return ex;
    }
    if (stats) stats->conditioned_retries_exhausted += 1;
    throw std::runtime_error("sample_example_conditioned: could not realize the requested cell");
}

ExampleSequence make_oobd(const ExampleSequence& ex, const BaseDistributionSpec& base) {
    std::unordered_map<int, int> shift;
    auto add_cycle = [&](const std::vector<int>& group) {
        const size_t n = group.size();
        for (size_t i = 0; i < n; ++i) shift[group[i]] = group[(i + 1) % n];
    };
    add_cycle(base.high_classes);
    add_cycle(base.low_classes);

    auto mapped = [&](int label) {
        auto it = shift.find(label);
        if (it == shift.end())
            throw std::invalid_argument("make_oobd: label " + std::to_string(label) +
                                        " not in either class group");
        return it->second;
    };

    ExampleSequence out = ex;
    out.target_label = mapped(ex.target_label);
    for (auto& pr : out.context) pr.label = mapped(pr.label);
    out.relevant = context_contains_label(out, out.target_label);
    if (out.relevant != ex.relevant)
        throw std::logic_error("make_oobd: relevance flag changed under a label bijection");
    return out;
}

SimplexVector y_star_for_class(int cls, const BaseDistributionSpec& base) {
    const int C = base.num_classes();
    if (cls < 0 || cls >= C) throw std::invalid_argument("y_star_for_class: label out of range");
    std::vector<double> p(static_cast<size_t>(C), 0.0);
    p[static_cast<size_t>(cls)] += 1.0 - base.p_label;
    p[static_cast<size_t>((cls + 1) % C)] += base.p_label;
    return SimplexVector(std::move(p));
}

void write_examples_jsonl(std::ostream& out, const std::vector<ExampleSequence>& examples) {
    for (size_t i = 0; i < examples.size(); ++i) {
        const auto& ex = examples[i];
        nlohmann::ordered_json j;
        j["seq_id"] = i;
        auto ctx = nlohmann::ordered_json::array();
        for (const auto& pr : ex.context)
            ctx.push_back(nlohmann::ordered_json{{"x", pr.input}, {"y", pr.label}});
        j["context"] = std::move(ctx);
        j["query"] = ex.query;
        j["target"] = ex.target_label;
        j["relevant"] = ex.relevant;
        out << j.dump() << "\n";
    }
}

}  // namespace iclab
