#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "iclab/datagen.hpp"
#include "iclab/gating.hpp"

namespace iclab {

struct BoundCurveTable;

// Full experiment description. JSON form mirrors the field names below; every
// block accepts partial overrides on top of the defaults, unknown keys are
// rejected with a message listing them.
struct ExperimentConfig {
    BaseDistributionSpec base;   // prototypes stay empty here; drawn per seed
    ContextSpec context;
    TrainerOptions model;
    std::vector<int64_t> sweep_N;
    std::vector<uint64_t> seeds;
    int samples_per_cell = 1000;
    std::vector<std::string> conditions;  // subset of {"IBD", "OOBD"}

    // d=64, classes 0-4 frequent / 5-9 rare, p_high=0.9, sigma=0.2, L=1,
    // p_relevant=0.9, gated model, N = 2^6..2^20 (step x4), seeds 1..5.
    static ExperimentConfig defaults();

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::string& path);
    nlohmann::ordered_json to_json() const;
    void validate() const;
};

// The base distribution a given seed trains and evaluates on: config base plus
// prototypes drawn from the seed's "proto" stream.
BaseDistributionSpec prepare_base(const ExperimentConfig& cfg, uint64_t seed);

struct TrainResult {
    Trainer trainer;
    SampleStats stats;
};

// Streams N examples and feeds them to the online trainer. ic_only trains on
// all-relevant contexts, iw_only on all-irrelevant ones, gated on the config's
// p_relevant. Same config+seed gives the identical example stream, and a
// smaller N consumes a prefix of a larger N's stream.
TrainResult run_training(const ExperimentConfig& cfg, int64_t N, uint64_t seed);

struct EvalCell {
    std::string split;        // "IBD" | "OOBD"
    std::string context;      // "relevant" | "irrelevant"
    std::string class_group;  // "C_H" | "C_L"
    double err01 = 0.0;       // NaN when the cell failed
    double ce = 0.0;
    int64_t n = 0;
    std::string error;        // empty on success
};

struct EvalReport {
    std::vector<EvalCell> cells;
    SampleStats stats;
};

// Four cells (context x class group) for one split, n_per_cell fresh draws
// each, labels cyclically shifted within each group for the OOBD split. The
// model is read-only here; eval streams derive from eval_root, never from the
// model, so every model variant sees identical evaluation examples.
EvalReport evaluate(const Trainer& model, const ExperimentConfig& cfg, const std::string& split,
                    int n_per_cell, RngSpec eval_root);

struct SweepOptions {
    std::string out_dir;
    int workers = 0;  // 0: ICLAB_WORKERS env var, else all hardware threads
};

struct SweepOutputs {
    std::string results_csv;
    std::string alpha_csv;
    std::string summary_json;
};

// Trains and evaluates every (N, seed) x {ic_only, iw_only, gated} job on a
// bounded worker pool and writes results.csv (exact column order: N, seed,
// model, split, context, class_group, err01, ce, n, error), alpha_summary.csv
// (final gate weights by class group, gated jobs only), and run_summary.json
// (config echo plus per-job counters and regret-decomposition checks). Output
// bytes depend only on the config, not on worker count or scheduling.
SweepOutputs run_sweep(const ExperimentConfig& cfg, const SweepOptions& opts);

struct ResultRow {
    int64_t N = 0;
    uint64_t seed = 0;
    std::string model, split, context, class_group;
    double err01 = 0.0;
    double ce = 0.0;
    int64_t n = 0;
    std::string error;
};

std::vector<ResultRow> read_results_csv(const std::string& path);

// One panel per (split, context, class_group): seed-mean err01 vs N on a log2
// axis, one line per model, shaded +-1 std over seeds. Also renders the
// closed-form bound curves (in-context sandwich vs k, in-weight excess vs
// per-key count). Returns the paths written.
std::vector<std::string> emit_plots(const std::string& results_csv_path,
                                    const std::string& out_dir);

// SVG panels for a closed-form curve table (in-context sandwich vs k,
// in-weight excess vs per-key observations).
std::vector<std::string> emit_bound_panels(const BoundCurveTable& table,
                                           const std::string& out_dir);

// Leading class index of a gate key ("3|1" -> 3, "3" -> 3), -1 when the key is
// not class-shaped (ExactInput keying).
int gate_key_class(const std::string& key);

// Examples drawn exactly as a gated training run at this seed would see them.
std::vector<ExampleSequence> generate_examples(const ExperimentConfig& cfg, int64_t n,
                                               uint64_t seed);

}  // namespace iclab
