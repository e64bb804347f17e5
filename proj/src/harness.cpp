#include "iclab/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "iclab/bounds.hpp"
#include "iclab/svg.hpp"

namespace iclab {
namespace {

constexpr const char* kResultsHeader =
    "N,seed,model,split,context,class_group,err01,ce,n,error";
constexpr const char* kAlphaHeader =
    "N,seed,group,mean_alpha,weighted_mean_alpha,num_keys,steps";

std::string fmt17(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Keep CSV rows structurally intact whatever an error message contains.
std::string sanitize_field(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

void require_object(const nlohmann::json& j, const std::string& where) {
    if (!j.is_object())
        throw std::invalid_argument("config: '" + where + "' must be a JSON object");
}

void reject_unknown(const nlohmann::json& j, const std::string& where,
                    std::initializer_list<const char*> allowed) {
    require_object(j, where);
    std::vector<std::string> unknown;
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) { known = true; break; }
        if (!known) unknown.push_back(item.key());
    }
    if (!unknown.empty()) {
        std::sort(unknown.begin(), unknown.end());
        std::string msg = "config: unknown key(s) in '" + where + "':";
        for (const auto& k : unknown) msg += " '" + k + "'";
        throw std::invalid_argument(msg);
    }
}

template <typename T>
T get_field(const nlohmann::json& j, const std::string& path) {
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config: bad value for '" + path + "': " + e.what());
    }
}

template <typename T>
void maybe(const nlohmann::json& block, const char* key, const std::string& path, T& out) {
    if (block.contains(key)) out = get_field<T>(block.at(key), path);
}

int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("ICLAB_WORKERS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (!end || *end != '\0' || v < 1 || v > 4096)
            throw std::invalid_argument("ICLAB_WORKERS must be a positive integer");
        return static_cast<int>(v);
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc ? static_cast<int>(hc) : 1;
}

const std::array<const char*, 2> kContexts = {"relevant", "irrelevant"};
const std::array<const char*, 2> kGroups = {"C_H", "C_L"};
const std::array<ModelKind, 3> kSweepModels = {ModelKind::ICOnly, ModelKind::IWOnly,
                                               ModelKind::Gated};

}  // namespace

ExperimentConfig ExperimentConfig::defaults() {
    ExperimentConfig cfg;
    cfg.base.d = 64;
    cfg.base.high_classes = {0, 1, 2, 3, 4};
    cfg.base.low_classes = {5, 6, 7, 8, 9};
    cfg.base.p_high = 0.9;
    cfg.base.sigma = 0.2;
    cfg.base.p_label = 0.0;
    cfg.context.L = 1;
    cfg.context.p_relevant = 0.9;
    cfg.context.max_rejection = 10000;
    cfg.model = TrainerOptions{};  // gated, KT, NearestPrototype, eps 0.01, B 1
    cfg.sweep_N = {1 << 6, 1 << 8, 1 << 10, 1 << 12, 1 << 14, 1 << 16, 1 << 18, 1 << 20};
    cfg.seeds = {1, 2, 3, 4, 5};
    cfg.samples_per_cell = 1000;
    cfg.conditions = {"IBD", "OOBD"};
    return cfg;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig cfg = defaults();
    reject_unknown(j, "config", {"base", "context", "model", "sweep", "eval"});

    if (j.contains("base")) {
        const auto& b = j.at("base");
        reject_unknown(b, "base", {"d", "high_classes", "low_classes", "p_high", "sigma",
                                   "p_label", "noise_context_labels"});
        maybe(b, "d", "base.d", cfg.base.d);
        maybe(b, "high_classes", "base.high_classes", cfg.base.high_classes);
        maybe(b, "low_classes", "base.low_classes", cfg.base.low_classes);
        maybe(b, "p_high", "base.p_high", cfg.base.p_high);
        maybe(b, "sigma", "base.sigma", cfg.base.sigma);
        maybe(b, "p_label", "base.p_label", cfg.base.p_label);
        maybe(b, "noise_context_labels", "base.noise_context_labels",
              cfg.base.noise_context_labels);
    }
    if (j.contains("context")) {
        const auto& c = j.at("context");
        reject_unknown(c, "context", {"L", "p_relevant", "L_relevant", "max_rejection"});
        maybe(c, "L", "context.L", cfg.context.L);
        maybe(c, "p_relevant", "context.p_relevant", cfg.context.p_relevant);
        if (c.contains("L_relevant")) {
            if (c.at("L_relevant").is_null())
                cfg.context.L_relevant.reset();
            else
                cfg.context.L_relevant = get_field<int>(c.at("L_relevant"), "context.L_relevant");
        }
        maybe(c, "max_rejection", "context.max_rejection", cfg.context.max_rejection);
    }
    if (j.contains("model")) {
        const auto& m = j.at("model");
        reject_unknown(m, "model", {"kind", "epsilon", "B", "backend", "keying", "gate_key",
                                    "learn_h", "h_step_size"});
        if (m.contains("kind"))
            cfg.model.kind = model_kind_from_string(get_field<std::string>(m.at("kind"), "model.kind"));
        maybe(m, "epsilon", "model.epsilon", cfg.model.epsilon);
        maybe(m, "B", "model.B", cfg.model.B);
        if (m.contains("backend"))
            cfg.model.backend =
                iw_backend_from_string(get_field<std::string>(m.at("backend"), "model.backend"));
        if (m.contains("keying"))
            cfg.model.keying =
                keying_rule_from_string(get_field<std::string>(m.at("keying"), "model.keying"));
        if (m.contains("gate_key"))
            cfg.model.gate_mode = gate_key_mode_from_string(
                get_field<std::string>(m.at("gate_key"), "model.gate_key"));
        maybe(m, "learn_h", "model.learn_h", cfg.model.learn_h);
        maybe(m, "h_step_size", "model.h_step_size", cfg.model.h_step_size);
    }
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        reject_unknown(s, "sweep", {"N", "seeds"});
        maybe(s, "N", "sweep.N", cfg.sweep_N);
        maybe(s, "seeds", "sweep.seeds", cfg.seeds);
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        reject_unknown(e, "eval", {"samples_per_cell", "conditions"});
        maybe(e, "samples_per_cell", "eval.samples_per_cell", cfg.samples_per_cell);
        maybe(e, "conditions", "eval.conditions", cfg.conditions);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("config: cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("config: " + path + ": " + e.what());
    }
    return from_json(j);
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
    nlohmann::ordered_json j;
    j["base"] = {{"d", base.d},
                 {"high_classes", base.high_classes},
                 {"low_classes", base.low_classes},
                 {"p_high", base.p_high},
                 {"sigma", base.sigma},
                 {"p_label", base.p_label},
                 {"noise_context_labels", base.noise_context_labels}};
    j["context"] = {{"L", context.L},
                    {"p_relevant", context.p_relevant},
                    {"L_relevant", context.L_relevant.has_value()
                                       ? nlohmann::ordered_json(*context.L_relevant)
                                       : nlohmann::ordered_json(nullptr)},
                    {"max_rejection", context.max_rejection}};
    j["model"] = {{"kind", to_string(model.kind)},
                  {"epsilon", model.epsilon},
                  {"B", model.B},
                  {"backend", to_string(model.backend)},
                  {"keying", to_string(model.keying)},
                  {"gate_key", to_string(model.gate_mode)},
                  {"learn_h", model.learn_h},
                  {"h_step_size", model.h_step_size}};
    j["sweep"] = {{"N", sweep_N}, {"seeds", seeds}};
    j["eval"] = {{"samples_per_cell", samples_per_cell}, {"conditions", conditions}};
    return j;
}

void ExperimentConfig::validate() const {
    base.validate();
    context.validate();
    const int C = base.num_classes();
    if (!(model.epsilon >= 0.0) || model.epsilon * C >= 1.0)
        throw std::invalid_argument("config: model.epsilon must lie in [0, 1/C)");
    if (!(model.B > 0.0)) throw std::invalid_argument("config: model.B must be > 0");
    if (model.learn_h && !(model.h_step_size > 0.0))
        throw std::invalid_argument("config: model.h_step_size must be > 0");
    for (int64_t n : sweep_N)
        if (n < 1) throw std::invalid_argument("config: sweep.N entries must be >= 1");
    std::set<uint64_t> distinct(seeds.begin(), seeds.end());
    if (distinct.size() != seeds.size())
        throw std::invalid_argument("config: sweep.seeds must be distinct");
    if (samples_per_cell < 1)
        throw std::invalid_argument("config: eval.samples_per_cell must be >= 1");
    if (conditions.empty())
        throw std::invalid_argument("config: eval.conditions must not be empty");
    std::set<std::string> seen;
    for (const auto& c : conditions) {
        if (c != "IBD" && c != "OOBD")
            throw std::invalid_argument("config: eval.conditions entries must be IBD or OOBD");
        if (!seen.insert(c).second)
            throw std::invalid_argument("config: duplicate eval condition '" + c + "'");
    }
}

BaseDistributionSpec prepare_base(const ExperimentConfig& cfg, uint64_t seed) {
    BaseDistributionSpec base = cfg.base;
    RngStream proto_rng(seed, "proto");
    base.prototypes = init_prototypes(base.num_classes(), base.d, proto_rng);
    base.validate();
    return base;
}

TrainResult run_training(const ExperimentConfig& cfg, int64_t N, uint64_t seed) {
    if (N < 0) throw std::invalid_argument("run_training: N must be >= 0");
    BaseDistributionSpec base = prepare_base(cfg, seed);

    ContextSpec ctx = cfg.context;
    if (cfg.model.kind == ModelKind::ICOnly) ctx.p_relevant = 1.0;
    if (cfg.model.kind == ModelKind::IWOnly) ctx.p_relevant = 0.0;

    TrainResult out{Trainer(base, cfg.model), SampleStats{}};
    RngStream train_rng(seed, "train/" + to_string(cfg.model.kind));
    for (int64_t t = 0; t < N; ++t)
        out.trainer.step(sample_example(base, ctx, train_rng, &out.stats));
    return out;
}

EvalReport evaluate(const Trainer& model, const ExperimentConfig& cfg, const std::string& split,
                    int n_per_cell, RngSpec eval_root) {
    if (split != "IBD" && split != "OOBD")
        throw std::invalid_argument("evaluate: split must be IBD or OOBD");
    if (n_per_cell < 1) throw std::invalid_argument("evaluate: n_per_cell must be >= 1");
    const BaseDistributionSpec& base = model.base();

    EvalReport rep;
    for (const char* context_kind : kContexts) {
        const bool force_relevant = std::string(context_kind) == "relevant";
        ContextSpec cell_ctx = cfg.context;
        cell_ctx.p_relevant = force_relevant ? 1.0 : 0.0;
        for (const char* group : kGroups) {
            const auto& pool =
                std::string(group) == "C_H" ? base.high_classes : base.low_classes;
            EvalCell cell;
            cell.split = split;
            cell.context = context_kind;
            cell.class_group = group;
            RngStream rng(eval_root.substream(split + std::string("/") + context_kind + "/" + group));
            try {
                double err_sum = 0.0, ce_sum = 0.0;
                for (int i = 0; i < n_per_cell; ++i) {
                    ExampleSequence ex =
                        sample_example_conditioned(base, cell_ctx, force_relevant, pool, rng,
                                                   &rep.stats);
                    if (split == "OOBD") ex = make_oobd(ex, base);
                    SimplexVector pred = model.predict(ex);
                    err_sum += zero_one(pred, ex.target_label);
                    ce_sum += cross_entropy(pred, ex.target_label);
                }
                cell.err01 = err_sum / n_per_cell;
                cell.ce = ce_sum / n_per_cell;
                cell.n = n_per_cell;
            } catch (const std::exception& e) {
                cell.err01 = std::numeric_limits<double>::quiet_NaN();
                cell.ce = std::numeric_limits<double>::quiet_NaN();
                cell.n = 0;
                cell.error = e.what();
            }
            rep.cells.push_back(std::move(cell));
        }
    }
    return rep;
}

int gate_key_class(const std::string& key) {
    size_t end = key.find('|');
    if (end == std::string::npos) end = key.size();
    if (end == 0 || end > 9) return -1;
    long v = 0;
    for (size_t i = 0; i < end; ++i) {
        char c = key[i];
        if (c < '0' || c > '9') return -1;
        v = v * 10 + (c - '0');
    }
    return static_cast<int>(v);
}

std::vector<ExampleSequence> generate_examples(const ExperimentConfig& cfg, int64_t n,
                                               uint64_t seed) {
    if (n < 0) throw std::invalid_argument("generate_examples: n must be >= 0");
    BaseDistributionSpec base = prepare_base(cfg, seed);
    RngStream rng(seed, "train/" + to_string(ModelKind::Gated));
    std::vector<ExampleSequence> out;
    out.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) out.push_back(sample_example(base, cfg.context, rng));
    return out;
}

namespace {

struct AlphaRow {
    std::string group;
    double mean_alpha = 0.0;
    double weighted_mean_alpha = 0.0;
    int64_t num_keys = 0;
    int64_t steps = 0;
};

std::vector<AlphaRow> alpha_rows_for(const Trainer& tr) {
    struct Acc {
        double sum = 0.0, wsum = 0.0;
        int64_t n = 0, steps = 0;
    };
    std::map<std::string, Acc> acc;
    const auto& base = tr.base();
    auto contains = [](const std::vector<int>& v, int c) {
        return std::find(v.begin(), v.end(), c) != v.end();
    };
    for (const auto& key : tr.alphas().keys()) {
        int cls = gate_key_class(key);
        std::string group = "other";
        if (cls >= 0 && contains(base.high_classes, cls)) group = "C_H";
        else if (cls >= 0 && contains(base.low_classes, cls)) group = "C_L";
        double a = tr.alphas().alpha(key);
        int64_t s = tr.alphas().steps(key);
        Acc& A = acc[group];
        A.sum += a;
        A.wsum += a * static_cast<double>(s);
        A.n += 1;
        A.steps += s;
    }
    std::vector<AlphaRow> rows;
    for (const char* g : {"C_H", "C_L", "other"}) {
        auto it = acc.find(g);
        if (it == acc.end() || it->second.n == 0) continue;
        const Acc& A = it->second;
        rows.push_back({g, A.sum / static_cast<double>(A.n),
                        A.steps > 0 ? A.wsum / static_cast<double>(A.steps)
                                    : A.sum / static_cast<double>(A.n),
                        A.n, A.steps});
    }
    return rows;
}

struct SweepJob {
    int64_t N = 0;
    uint64_t seed = 0;
    ModelKind kind = ModelKind::Gated;
};

struct JobOutput {
    std::vector<EvalCell> cells;
    std::vector<AlphaRow> alpha;
    bool has_checks = false;
    RegretCheckReport gate_check;
    RegretCheckReport split_check;
    SampleStats stats;
    std::string error;  // job-level failure
};

JobOutput run_job(const ExperimentConfig& cfg, const SweepJob& job) {
    JobOutput out;
    try {
        ExperimentConfig jcfg = cfg;
        jcfg.model.kind = job.kind;
        TrainResult tr = run_training(jcfg, job.N, job.seed);
        out.stats = tr.stats;
        RngSpec eval_root =
            RngSpec{job.seed, 0}.substream("eval").substream("N=" + std::to_string(job.N));
        for (const auto& split : cfg.conditions) {
            EvalReport rep = evaluate(tr.trainer, cfg, split, cfg.samples_per_cell, eval_root);
            out.stats.merge(rep.stats);
            for (auto& cell : rep.cells) out.cells.push_back(std::move(cell));
        }
        if (job.kind == ModelKind::Gated) {
            out.alpha = alpha_rows_for(tr.trainer);
            if (!tr.trainer.ledger().empty()) {
                const int C = cfg.base.num_classes();
                out.gate_check = check_regret_decomposition(tr.trainer.ledger(), C);
                out.split_check = check_split_regret_decomposition(tr.trainer.ledger(), C);
                out.has_checks = true;
            }
        }
    } catch (const std::exception& e) {
        out.error = e.what();
        out.cells.clear();
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (const auto& split : cfg.conditions)
            for (const char* context_kind : kContexts)
                for (const char* group : kGroups)
                    out.cells.push_back({split, context_kind, group, nan, nan, 0, out.error});
    }
    return out;
}

nlohmann::ordered_json check_to_json(const RegretCheckReport& r) {
    return {{"lhs", r.lhs}, {"rhs", r.rhs}, {"margin", r.margin}, {"holds", r.holds}};
}

}  // namespace

SweepOutputs run_sweep(const ExperimentConfig& cfg, const SweepOptions& opts) {
    cfg.validate();
    if (opts.out_dir.empty()) throw std::invalid_argument("run_sweep: out_dir is required");
    std::filesystem::create_directories(opts.out_dir);

    std::vector<SweepJob> jobs;
    for (int64_t N : cfg.sweep_N)
        for (uint64_t seed : cfg.seeds)
            for (ModelKind kind : kSweepModels) jobs.push_back({N, seed, kind});

    std::vector<JobOutput> outputs(jobs.size());
    const int workers =
        std::max(1, std::min(resolve_workers(opts.workers), static_cast<int>(jobs.size() ? jobs.size() : 1)));
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            outputs[i] = run_job(cfg, jobs[i]);
        }
    };
    if (jobs.size() > 1 && workers > 1) {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    } else {
        worker();
    }

    SweepOutputs paths;
    paths.results_csv = (std::filesystem::path(opts.out_dir) / "results.csv").string();
    paths.alpha_csv = (std::filesystem::path(opts.out_dir) / "alpha_summary.csv").string();
    paths.summary_json = (std::filesystem::path(opts.out_dir) / "run_summary.json").string();

    {
        std::ofstream f(paths.results_csv, std::ios::binary);
        if (!f) throw std::runtime_error("run_sweep: cannot open " + paths.results_csv);
        f << kResultsHeader << "\n";
        for (size_t i = 0; i < jobs.size(); ++i) {
            const auto& job = jobs[i];
            for (const auto& cell : outputs[i].cells) {
                f << job.N << ',' << job.seed << ',' << to_string(job.kind) << ','
                  << cell.split << ',' << cell.context << ',' << cell.class_group << ','
                  << fmt17(cell.err01) << ',' << fmt17(cell.ce) << ',' << cell.n << ','
                  << sanitize_field(cell.error) << "\n";
            }
        }
    }
    {
        std::ofstream f(paths.alpha_csv, std::ios::binary);
        if (!f) throw std::runtime_error("run_sweep: cannot open " + paths.alpha_csv);
        f << kAlphaHeader << "\n";
        for (size_t i = 0; i < jobs.size(); ++i) {
            for (const auto& row : outputs[i].alpha) {
                f << jobs[i].N << ',' << jobs[i].seed << ',' << row.group << ','
                  << fmt17(row.mean_alpha) << ',' << fmt17(row.weighted_mean_alpha) << ','
                  << row.num_keys << ',' << row.steps << "\n";
            }
        }
    }
    {
        nlohmann::ordered_json summary;
        summary["config"] = cfg.to_json();
        bool all_pass = true;
        auto jjobs = nlohmann::ordered_json::array();
        for (size_t i = 0; i < jobs.size(); ++i) {
            const auto& job = jobs[i];
            const auto& out = outputs[i];
            nlohmann::ordered_json jj;
            jj["N"] = job.N;
            jj["seed"] = job.seed;
            jj["model"] = to_string(job.kind);
            jj["rejection_fallbacks"] = out.stats.rejection_fallbacks;
            jj["conditioned_retries_exhausted"] = out.stats.conditioned_retries_exhausted;
            if (out.has_checks) {
                jj["gate_regret_check"] = check_to_json(out.gate_check);
                jj["split_regret_check"] = check_to_json(out.split_check);
                all_pass = all_pass && out.gate_check.holds && out.split_check.holds;
            }
            if (!out.error.empty()) jj["error"] = out.error;
            jjobs.push_back(std::move(jj));
        }
        summary["jobs"] = std::move(jjobs);
        summary["all_gate_checks_pass"] = all_pass;
        std::ofstream f(paths.summary_json, std::ios::binary);
        if (!f) throw std::runtime_error("run_sweep: cannot open " + paths.summary_json);
        f << summary.dump(2) << "\n";
    }
    return paths;
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::invalid_argument("read_results_csv: cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::invalid_argument("read_results_csv: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kResultsHeader)
        throw std::invalid_argument("read_results_csv: unexpected header: " + line);

    std::vector<ResultRow> rows;
    size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (line.back() == ',') fields.push_back("");  // empty trailing error column
        if (fields.size() != 10)
            throw std::invalid_argument("read_results_csv: line " + std::to_string(lineno) +
                                        ": expected 10 columns, got " +
                                        std::to_string(fields.size()));
        ResultRow r;
        r.N = std::strtoll(fields[0].c_str(), nullptr, 10);
        r.seed = std::strtoull(fields[1].c_str(), nullptr, 10);
        r.model = fields[2];
        r.split = fields[3];
        r.context = fields[4];
        r.class_group = fields[5];
        r.err01 = std::strtod(fields[6].c_str(), nullptr);
        r.ce = std::strtod(fields[7].c_str(), nullptr);
        r.n = std::strtoll(fields[8].c_str(), nullptr, 10);
        r.error = fields[9];
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<std::string> emit_bound_panels(const BoundCurveTable& table,
                                           const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::map<std::string, svg::Series> by_curve;
    for (const auto& row : table.rows) {
        svg::Series& s = by_curve[row.curve];
        s.name = row.curve;
        s.x.push_back(row.x);
        s.y.push_back(row.y);
    }
    std::vector<std::string> written;

    std::vector<svg::Series> ic;
    for (const char* name : {"ic_ce_lower", "ic_ce_upper"}) {
        auto it = by_curve.find(name);
        if (it != by_curve.end()) ic.push_back(it->second);
    }
    if (!ic.empty()) {
        svg::ChartSpec spec;
        spec.title = "In-context cross-entropy bounds";
        spec.x_label = "irrelevant context labels k";
        spec.y_label = "cross-entropy (nats)";
        std::string path = (std::filesystem::path(out_dir) / "bounds_ic.svg").string();
        svg::write_chart(path, spec, ic);
        written.push_back(path);
    }

    auto it = by_curve.find("iw_excess_leading");
    if (it != by_curve.end()) {
        std::vector<svg::Series> iw{it->second};
        if (table.params.contains("entropy_asymptote")) {
            double h = table.params.at("entropy_asymptote").get<double>();
            svg::Series flat;
            flat.name = "entropy floor";
            flat.x = it->second.x;
            flat.y.assign(it->second.x.size(), h);
            iw.push_back(std::move(flat));
        }
        svg::ChartSpec spec;
        spec.title = "In-weight excess risk";
        spec.x_label = "per-key observations";
        spec.y_label = "cross-entropy (nats)";
        spec.log2_x = true;
        std::string path = (std::filesystem::path(out_dir) / "bounds_iw.svg").string();
        svg::write_chart(path, spec, iw);
        written.push_back(path);
    }
    return written;
}

std::vector<std::string> emit_plots(const std::string& results_csv_path,
                                    const std::string& out_dir) {
    auto rows = read_results_csv(results_csv_path);
    std::filesystem::create_directories(out_dir);

    // (split, context, group) -> model -> N -> err01 samples over seeds.
    std::map<std::array<std::string, 3>, std::map<std::string, std::map<int64_t, std::vector<double>>>>
        panels;
    for (const auto& r : rows) {
        if (!r.error.empty() || std::isnan(r.err01)) continue;
        panels[{r.split, r.context, r.class_group}][r.model][r.N].push_back(r.err01);
    }

    std::vector<std::string> written;
    const std::array<const char*, 3> model_order = {"ic_only", "iw_only", "gated"};
    for (const char* split : {"IBD", "OOBD"}) {
        for (const char* context_kind : kContexts) {
            for (const char* group : kGroups) {
                auto pit = panels.find({split, context_kind, group});
                if (pit == panels.end()) continue;
                std::vector<svg::Series> series;
                for (const char* model : model_order) {
                    auto mit = pit->second.find(model);
                    if (mit == pit->second.end()) continue;
                    svg::Series s;
                    s.name = model;
                    for (const auto& [N, vals] : mit->second) {
                        double mean = 0.0;
                        for (double v : vals) mean += v;
                        mean /= static_cast<double>(vals.size());
                        double sd = 0.0;
                        if (vals.size() > 1) {
                            for (double v : vals) sd += (v - mean) * (v - mean);
                            sd = std::sqrt(sd / static_cast<double>(vals.size() - 1));
                        }
                        s.x.push_back(static_cast<double>(N));
                        s.y.push_back(mean);
                        s.y_lo.push_back(mean - sd);
                        s.y_hi.push_back(mean + sd);
                    }
                    if (!s.x.empty()) series.push_back(std::move(s));
                }
                if (series.empty()) continue;
                svg::ChartSpec spec;
                spec.title = std::string(split) + " / " + context_kind + " / " + group;
                spec.x_label = "N (training samples)";
                spec.y_label = "0-1 error";
                spec.log2_x = true;
                std::string path = (std::filesystem::path(out_dir) /
                                    ("err01_" + std::string(split) + "_" + context_kind + "_" +
                                     group + ".svg"))
                                       .string();
                svg::write_chart(path, spec, series);
                written.push_back(path);
            }
        }
    }

    // Closed-form side panels at the reference parameters.
    {
        std::vector<double> p(10, 0.001 / 9.0);
        p[0] = 0.999;
        SimplexVector y_star(std::move(p));
        std::vector<int> k_range;
        for (int k = 0; k <= 8; ++k) k_range.push_back(k);
        std::vector<double> n_range;
        for (int e = 0; e <= 17; ++e) n_range.push_back(std::pow(2.0, e));
        BoundCurveTable table = bound_curves(8, 0.001, 1.0, 10, y_star, k_range, n_range);
        write_bounds_csv_file(table, (std::filesystem::path(out_dir) / "bounds.csv").string());
        written.push_back((std::filesystem::path(out_dir) / "bounds.csv").string());
        for (auto& path : emit_bound_panels(table, out_dir)) written.push_back(std::move(path));
    }
    return written;
}

}  // namespace iclab
