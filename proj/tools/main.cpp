// Command-line front end: data dumps, single training runs, the full sweep,
// closed-form bound tables, ledger checks, and plotting.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "iclab/bounds.hpp"
#include "iclab/harness.hpp"

namespace {

iclab::ExperimentConfig load_config(const std::string& path) {
    return path.empty() ? iclab::ExperimentConfig::defaults()
                        : iclab::ExperimentConfig::load(path);
}

void print_check(const char* name, const iclab::RegretCheckReport& r) {
    std::printf("%s: lhs=%.12g rhs=%.12g margin=%.12g %s\n", name, r.lhs, r.rhs, r.margin,
                r.holds ? "holds" : "VIOLATED");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gated in-context/in-weight learning laboratory"};
    app.require_subcommand(1);
    int rc = 0;

    // --- gen-data -----------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "Dump sampled example sequences as JSONL");
    std::string gen_config, gen_out;
    int64_t gen_n = 100;
    uint64_t gen_seed = 1;
    gen->add_option("--config", gen_config, "Experiment config JSON (defaults when omitted)");
    gen->add_option("--n", gen_n, "Number of sequences")->check(CLI::NonNegativeNumber);
    gen->add_option("--seed", gen_seed, "Stream seed");
    gen->add_option("--out", gen_out, "Output path (stdout when omitted)");
    gen->callback([&]() {
        auto cfg = load_config(gen_config);
        auto examples = iclab::generate_examples(cfg, gen_n, gen_seed);
        if (gen_out.empty() || gen_out == "-") {
            iclab::write_examples_jsonl(std::cout, examples);
        } else {
            std::ofstream f(gen_out, std::ios::binary);
            if (!f) throw std::runtime_error("cannot open " + gen_out);
            iclab::write_examples_jsonl(f, examples);
            std::printf("wrote %zu sequences to %s\n", examples.size(), gen_out.c_str());
        }
    });

    // --- train --------------------------------------------------------------
    auto* train = app.add_subcommand("train", "One online training run, ledger to CSV");
    std::string tr_config, tr_model, tr_ledger = "ledger.csv", tr_table_out, tr_table_in;
    int64_t tr_N = 1 << 12;
    uint64_t tr_seed = 1;
    train->add_option("--config", tr_config, "Experiment config JSON");
    train->add_option("--N", tr_N, "Training steps")->check(CLI::NonNegativeNumber);
    train->add_option("--seed", tr_seed, "Run seed");
    train->add_option("--model", tr_model, "Override model kind: ic_only | iw_only | gated");
    train->add_option("--ledger", tr_ledger, "Ledger CSV output path");
    train->add_option("--table-out", tr_table_out, "Write the in-weight table snapshot JSON");
    train->add_option("--table-in", tr_table_in, "Warm-start from a table snapshot JSON");
    train->callback([&]() {
        auto cfg = load_config(tr_config);
        if (!tr_model.empty()) cfg.model.kind = iclab::model_kind_from_string(tr_model);

        iclab::BaseDistributionSpec base = iclab::prepare_base(cfg, tr_seed);
        iclab::ContextSpec ctx = cfg.context;
        if (cfg.model.kind == iclab::ModelKind::ICOnly) ctx.p_relevant = 1.0;
        if (cfg.model.kind == iclab::ModelKind::IWOnly) ctx.p_relevant = 0.0;

        iclab::Trainer trainer(base, cfg.model);
        if (!tr_table_in.empty()) {
            auto loaded = iclab::InWeightTable::load(tr_table_in);
            if (loaded.num_classes() != base.num_classes())
                throw std::invalid_argument("table snapshot class count does not match config");
            if (loaded.backend() != cfg.model.backend)
                throw std::invalid_argument("table snapshot backend does not match config");
            trainer.table() = std::move(loaded);
        }
        iclab::SampleStats stats;
        iclab::RngStream rng(tr_seed, "train/" + iclab::to_string(cfg.model.kind));
        for (int64_t t = 0; t < tr_N; ++t)
            trainer.step(iclab::sample_example(base, ctx, rng, &stats));

        trainer.ledger().write_csv_file(tr_ledger);
        std::printf("model=%s N=%lld seed=%llu ledger=%s fallbacks=%lld\n",
                    iclab::to_string(cfg.model.kind).c_str(),
                    static_cast<long long>(tr_N), static_cast<unsigned long long>(tr_seed),
                    tr_ledger.c_str(), static_cast<long long>(stats.rejection_fallbacks));
        if (!tr_table_out.empty()) {
            trainer.table().save(tr_table_out);
            std::printf("table snapshot: %s (%zu keys)\n", tr_table_out.c_str(),
                        trainer.table().num_keys());
        }
    });

    // --- sweep ---------------------------------------------------------------
    auto* sweep = app.add_subcommand("sweep", "Full (N, seed, model) grid, CSV outputs");
    std::string sw_config, sw_out_dir;
    int sw_workers = 0;
    sweep->add_option("--config", sw_config, "Experiment config JSON");
    sweep->add_option("--out-dir", sw_out_dir, "Output directory")->required();
    sweep->add_option("--workers", sw_workers,
                      "Worker threads (default: ICLAB_WORKERS env, else all cores)");
    sweep->callback([&]() {
        auto cfg = load_config(sw_config);
        iclab::SweepOptions opts;
        opts.out_dir = sw_out_dir;
        opts.workers = sw_workers;
        auto outputs = iclab::run_sweep(cfg, opts);
        std::printf("results: %s\nalpha summary: %s\nrun summary: %s\n",
                    outputs.results_csv.c_str(), outputs.alpha_csv.c_str(),
                    outputs.summary_json.c_str());
    });

    // --- bounds ---------------------------------------------------------------
    auto* bounds = app.add_subcommand("bounds", "Closed-form bound curves, CSV and SVG");
    std::string bd_out_dir;
    int bd_L = 8, bd_C = 10;
    double bd_eps = 0.001, bd_B = 1.0, bd_p_label = 0.001;
    bounds->add_option("--out-dir", bd_out_dir, "Output directory")->required();
    bounds->add_option("--L", bd_L, "Context length")->check(CLI::PositiveNumber);
    bounds->add_option("--epsilon", bd_eps, "In-context mixing weight");
    bounds->add_option("--B", bd_B, "Metric spectral-norm cap");
    bounds->add_option("--C", bd_C, "Class count")->check(CLI::PositiveNumber);
    bounds->add_option("--p-label", bd_p_label,
                       "Label-noise mass spread over the other classes in the target conditional");
    bounds->callback([&]() {
        std::vector<double> p(static_cast<size_t>(bd_C), bd_C > 1 ? bd_p_label / (bd_C - 1) : 0.0);
        p[0] = 1.0 - bd_p_label;
        iclab::SimplexVector y_star(std::move(p));
        std::vector<int> k_range;
        for (int k = 0; k <= bd_L; ++k) k_range.push_back(k);
        std::vector<double> n_range;
        for (int e = 0; e <= 17; ++e) n_range.push_back(std::pow(2.0, e));
        auto table = iclab::bound_curves(bd_L, bd_eps, bd_B, bd_C, y_star, k_range, n_range);
        std::filesystem::create_directories(bd_out_dir);
        std::string csv = (std::filesystem::path(bd_out_dir) / "bounds.csv").string();
        iclab::write_bounds_csv_file(table, csv);
        std::printf("wrote %s\n", csv.c_str());
        for (const auto& path : iclab::emit_bound_panels(table, bd_out_dir))
            std::printf("wrote %s\n", path.c_str());
    });

    // --- check -----------------------------------------------------------------
    auto* check = app.add_subcommand("check", "Regret-decomposition and batch-risk checks");
    std::string ck_ledger, ck_config, ck_otb_key;
    check->add_option("--ledger", ck_ledger, "Ledger CSV from a training run")->required();
    check->add_option("--config", ck_config, "Experiment config JSON (class count, backend)");
    check->add_option("--otb-key", ck_otb_key,
                      "Also run the online-to-batch check on this gate key");
    check->callback([&]() {
        auto cfg = load_config(ck_config);
        auto ledger = iclab::RegretLedger::read_csv_file(ck_ledger);
        std::printf("ledger: %zu records\n", ledger.size());
        const int C = cfg.base.num_classes();
        auto gate = iclab::check_regret_decomposition(ledger, C);
        auto split = iclab::check_split_regret_decomposition(ledger, C);
        print_check("gate regret decomposition", gate);
        print_check("split regret decomposition", split);
        bool ok = gate.holds && split.holds;
        if (!ck_otb_key.empty()) {
            auto otb = iclab::online_to_batch_check(ledger, ck_otb_key, cfg.base,
                                                    cfg.model.backend);
            std::printf("online-to-batch on '%s': avg=%.12g rhs=%.12g (optimum=%.12g "
                        "regret=%.12g slack=%.12g n=%lld) %s\n",
                        ck_otb_key.c_str(), otb.avg_online_loss, otb.rhs, otb.batch_optimum,
                        otb.regret_term, otb.slack, static_cast<long long>(otb.n),
                        otb.holds ? "holds" : "VIOLATED");
            ok = ok && otb.holds;
        }
        if (!ok) rc = 1;
    });

    // --- plot ---------------------------------------------------------------
    auto* plot = app.add_subcommand("plot", "Render SVG panels from a results CSV");
    std::string pl_csv, pl_out_dir;
    plot->add_option("--csv", pl_csv, "results.csv from a sweep")->required();
    plot->add_option("--out-dir", pl_out_dir, "Output directory")->required();
    plot->callback([&]() {
        for (const auto& path : iclab::emit_plots(pl_csv, pl_out_dir))
            std::printf("wrote %s\n", path.c_str());
    });

    // --- noise-tradeoff -------------------------------------------------------
    auto* noise = app.add_subcommand("noise-tradeoff",
                                     "Copy-vs-majority error rates under label noise");
    std::vector<double> nt_p;
    std::string nt_out;
    noise->add_option("--p", nt_p, "Flip rates in (0, 0.5); default table when omitted");
    noise->add_option("--out", nt_out, "CSV output path (stdout when omitted)");
    noise->callback([&]() {
        std::vector<double> ps = nt_p;
        if (ps.empty()) ps = {0.01, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45};
        std::string out = "p,iwl_err,icl_independent,icl_anticorrelated,icl_correlated\n";
        char buf[196];
        for (double p : ps) {
            auto row = iclab::noise_tradeoff(p);
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g\n", p, row.iwl_err,
                          row.icl_independent, row.icl_anticorrelated, row.icl_correlated);
            out += buf;
        }
        if (nt_out.empty() || nt_out == "-") {
            std::fputs(out.c_str(), stdout);
        } else {
            std::ofstream f(nt_out, std::ios::binary);
            if (!f) throw std::runtime_error("cannot open " + nt_out);
            f << out;
            std::printf("wrote %s\n", nt_out.c_str());
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return rc;
}
