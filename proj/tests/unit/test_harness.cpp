#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "iclab/bounds.hpp"
#include "iclab/harness.hpp"

using namespace iclab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Small grid that still exercises every job type.
ExperimentConfig tiny_config() {
    auto cfg = ExperimentConfig::defaults();
    cfg.base.d = 16;
    cfg.sweep_N = {16, 64};
    cfg.seeds = {1, 2};
    cfg.samples_per_cell = 25;
    return cfg;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) {
        path = fs::temp_directory_path() / name;
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("default config is valid and round trips through json") {
    auto cfg = ExperimentConfig::defaults();
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.base.d == 64);
    CHECK(cfg.base.high_classes == std::vector<int>{0, 1, 2, 3, 4});
    CHECK(cfg.base.low_classes == std::vector<int>{5, 6, 7, 8, 9});
    CHECK(cfg.context.L == 1);
    CHECK(cfg.context.p_relevant == 0.9);
    CHECK(cfg.sweep_N.size() == 8);
    CHECK(cfg.sweep_N.front() == 64);
    CHECK(cfg.sweep_N.back() == 1048576);
    CHECK(cfg.seeds == std::vector<uint64_t>{1, 2, 3, 4, 5});
    CHECK(cfg.conditions == std::vector<std::string>{"IBD", "OOBD"});

    auto back = ExperimentConfig::from_json(cfg.to_json());
    CHECK(back.to_json() == cfg.to_json());
}

TEST_CASE("partial overrides keep the other defaults") {
    auto j = nlohmann::json::parse(R"({"sweep": {"N": [32]}, "model": {"kind": "ic_only"}})");
    auto cfg = ExperimentConfig::from_json(j);
    CHECK(cfg.sweep_N == std::vector<int64_t>{32});
    CHECK(cfg.model.kind == ModelKind::ICOnly);
    CHECK(cfg.base.d == 64);  // untouched block
    CHECK(cfg.samples_per_cell == 1000);
}

TEST_CASE("unknown keys are rejected by name") {
    auto top = nlohmann::json::parse(R"({"based": {}})");
    try {
        ExperimentConfig::from_json(top);
        FAIL("expected a config error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("'based'") != std::string::npos);
    }

    auto nested = nlohmann::json::parse(R"({"model": {"modle": "gated"}})");
    try {
        ExperimentConfig::from_json(nested);
        FAIL("expected a config error");
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        CHECK(msg.find("'model'") != std::string::npos);
        CHECK(msg.find("'modle'") != std::string::npos);
    }
}

TEST_CASE("config type and enum errors carry the field path") {
    CHECK_THROWS_AS(
        ExperimentConfig::from_json(nlohmann::json::parse(R"({"model": {"kind": "both"}})")),
        std::invalid_argument);
    CHECK_THROWS_AS(
        ExperimentConfig::from_json(nlohmann::json::parse(R"({"base": {"d": "wide"}})")),
        std::invalid_argument);
    CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json::parse(R"({"context": 7})")),
                    std::invalid_argument);
}

TEST_CASE("L_relevant accepts an explicit null") {
    auto j = nlohmann::json::parse(R"({"context": {"L": 4, "L_relevant": null}})");
    auto cfg = ExperimentConfig::from_json(j);
    CHECK_FALSE(cfg.context.L_relevant.has_value());

    auto j2 = nlohmann::json::parse(R"({"context": {"L": 4, "L_relevant": 2}})");
    auto cfg2 = ExperimentConfig::from_json(j2);
    CHECK(cfg2.context.L_relevant == 2);
    // The null round trips.
    CHECK(cfg.to_json()["context"]["L_relevant"].is_null());
}

TEST_CASE("config validation failures") {
    auto cfg = ExperimentConfig::defaults();
    SUBCASE("epsilon too large") {
        cfg.model.epsilon = 0.1;  // 1/C
        CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    }
    SUBCASE("duplicate seeds") {
        cfg.seeds = {1, 1};
        CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    }
    SUBCASE("nonpositive N") {
        cfg.sweep_N = {0};
        CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    }
    SUBCASE("bad condition") {
        cfg.conditions = {"IBD", "XYZ"};
        CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    }
    SUBCASE("duplicate condition") {
        cfg.conditions = {"IBD", "IBD"};
        CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    }
    SUBCASE("no samples") {
        cfg.samples_per_cell = 0;
        CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    }
}

TEST_CASE("per-seed prototypes are reproducible and seed dependent") {
    auto cfg = tiny_config();
    auto a = prepare_base(cfg, 1);
    auto b = prepare_base(cfg, 1);
    auto c = prepare_base(cfg, 2);
    CHECK(a.prototypes == b.prototypes);
    CHECK(a.prototypes != c.prototypes);
    CHECK_NOTHROW(a.validate());
}

TEST_CASE("training streams are prefixes across N") {
    auto cfg = tiny_config();
    auto small = run_training(cfg, 64, 1);
    auto large = run_training(cfg, 256, 1);
    REQUIRE(small.trainer.ledger().size() == 64);
    REQUIRE(large.trainer.ledger().size() == 256);
    for (size_t i = 0; i < 64; ++i) {
        const auto& a = small.trainer.ledger().records()[i];
        const auto& b = large.trainer.ledger().records()[i];
        CHECK(a.gate_key == b.gate_key);
        CHECK(a.loss_f == b.loss_f);
        CHECK(a.alpha_used == b.alpha_used);
    }
}

TEST_CASE("generated examples match the gated training stream") {
    auto cfg = tiny_config();
    auto examples = generate_examples(cfg, 32, 1);
    REQUIRE(examples.size() == 32);

    auto base = prepare_base(cfg, 1);
    Trainer trainer(base, cfg.model);
    for (const auto& ex : examples) trainer.step(ex);

    auto reference = run_training(cfg, 32, 1);
    for (size_t i = 0; i < 32; ++i)
        CHECK(trainer.ledger().records()[i].loss_f ==
              reference.trainer.ledger().records()[i].loss_f);
}

TEST_CASE("zero training steps leave an empty ledger") {
    auto cfg = tiny_config();
    auto tr = run_training(cfg, 0, 1);
    CHECK(tr.trainer.ledger().empty());
    CHECK(tr.trainer.steps() == 0);
}

TEST_CASE("single-expert training streams force the context mix") {
    auto cfg = tiny_config();
    cfg.model.kind = ModelKind::ICOnly;
    auto ic = run_training(cfg, 50, 1);
    // All training contexts for the context-only model are relevant.
    for (const auto& r : ic.trainer.ledger().records()) CHECK(r.alpha_used == 0.0);

    cfg.model.kind = ModelKind::IWOnly;
    auto iw = run_training(cfg, 50, 1);
    for (const auto& r : iw.trainer.ledger().records()) CHECK(r.alpha_used == 1.0);
}

TEST_CASE("evaluation emits four ordered cells per split") {
    auto cfg = tiny_config();
    auto tr = run_training(cfg, 64, 1);
    RngSpec eval_root = RngSpec{1, 0}.substream("eval").substream("N=64");

    auto rep = evaluate(tr.trainer, cfg, "IBD", 25, eval_root);
    REQUIRE(rep.cells.size() == 4);
    CHECK(rep.cells[0].context == "relevant");
    CHECK(rep.cells[0].class_group == "C_H");
    CHECK(rep.cells[1].context == "relevant");
    CHECK(rep.cells[1].class_group == "C_L");
    CHECK(rep.cells[2].context == "irrelevant");
    CHECK(rep.cells[2].class_group == "C_H");
    CHECK(rep.cells[3].context == "irrelevant");
    CHECK(rep.cells[3].class_group == "C_L");
    for (const auto& cell : rep.cells) {
        CHECK(cell.split == "IBD");
        CHECK(cell.n == 25);
        CHECK(cell.error.empty());
        CHECK(cell.err01 >= 0.0);
        CHECK(cell.err01 <= 1.0);
        CHECK(cell.ce >= 0.0);
    }

    // Same root replays the identical evaluation.
    auto again = evaluate(tr.trainer, cfg, "IBD", 25, eval_root);
    for (size_t i = 0; i < 4; ++i) {
        CHECK(rep.cells[i].err01 == again.cells[i].err01);
        CHECK(rep.cells[i].ce == again.cells[i].ce);
    }
}

TEST_CASE("oobd evaluation defeats a pure table at zero input noise") {
    auto cfg = tiny_config();
    cfg.base.sigma = 0.0;
    cfg.model.kind = ModelKind::IWOnly;
    auto tr = run_training(cfg, 4096, 1);
    RngSpec eval_root = RngSpec{1, 0}.substream("eval").substream("N=4096");

    auto ibd = evaluate(tr.trainer, cfg, "IBD", 50, eval_root);
    for (const auto& cell : ibd.cells) CHECK(cell.err01 == 0.0);

    auto oobd = evaluate(tr.trainer, cfg, "OOBD", 50, eval_root);
    for (const auto& cell : oobd.cells) CHECK(cell.err01 == 1.0);
}

TEST_CASE("context-only model rides the label shift") {
    auto cfg = tiny_config();
    cfg.model.kind = ModelKind::ICOnly;
    double total = 0.0;
    for (uint64_t seed : {1, 2, 3}) {
        auto tr = run_training(cfg, 16, seed);
        auto rep = evaluate(tr.trainer, cfg, "OOBD", 50,
                            RngSpec{seed, 0}.substream("eval").substream("N=16"));
        total += rep.cells[0].err01;  // relevant context, frequent classes
        total += rep.cells[1].err01;  // relevant context, rare classes
    }
    CHECK(total / 6.0 < 0.05);
}

TEST_CASE("sweep output shape and determinism") {
    auto cfg = tiny_config();
    TempDir d1("iclab_sweep_a"), d2("iclab_sweep_b");

    SweepOptions o1;
    o1.out_dir = d1.path.string();
    o1.workers = 1;
    auto out1 = run_sweep(cfg, o1);

    SweepOptions o2;
    o2.out_dir = d2.path.string();
    o2.workers = 3;  // different pool size, same bytes
    auto out2 = run_sweep(cfg, o2);

    auto results = slurp(out1.results_csv);
    CHECK(results == slurp(out2.results_csv));
    CHECK(slurp(out1.alpha_csv) == slurp(out2.alpha_csv));
    CHECK(slurp(out1.summary_json) == slurp(out2.summary_json));

    std::istringstream in(results);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "N,seed,model,split,context,class_group,err01,ce,n,error");
    size_t rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    // 2 N values x 2 seeds x 3 models x 2 splits x 4 cells.
    CHECK(rows == 96);

    auto parsed = read_results_csv(out1.results_csv);
    REQUIRE(parsed.size() == 96);
    // Jobs are ordered N, then seed, then model; models in a fixed order.
    CHECK(parsed[0].N == 16);
    CHECK(parsed[0].seed == 1);
    CHECK(parsed[0].model == "ic_only");
    CHECK(parsed[8].model == "iw_only");
    CHECK(parsed[16].model == "gated");
    CHECK(parsed[24].seed == 2);
    CHECK(parsed[48].N == 64);
    for (const auto& r : parsed) {
        CHECK(r.error.empty());
        CHECK(r.n == 25);
    }

    // The gate summary carries only gated jobs: 2 N x 2 seeds.
    std::istringstream ain(slurp(out1.alpha_csv));
    REQUIRE(std::getline(ain, line));
    CHECK(line == "N,seed,group,mean_alpha,weighted_mean_alpha,num_keys,steps");
    size_t arows = 0;
    std::set<std::string> groups;
    while (std::getline(ain, line)) {
        if (line.empty()) continue;
        ++arows;
        auto first = line.find(',');
        auto second = line.find(',', first + 1);
        auto third = line.find(',', second + 1);
        groups.insert(line.substr(second + 1, third - second - 1));
    }
    CHECK(arows >= 4);
    CHECK(groups.count("C_H") == 1);
    CHECK(groups.count("C_L") == 1);

    auto summary = nlohmann::json::parse(slurp(out1.summary_json));
    CHECK(summary.contains("config"));
    CHECK(summary["config"]["base"]["d"] == 16);
    CHECK(summary["jobs"].size() == 12);
    CHECK(summary["all_gate_checks_pass"] == true);
    int checked = 0;
    for (const auto& job : summary["jobs"]) {
        CHECK(job.contains("rejection_fallbacks"));
        if (job["model"] == "gated") {
            CHECK(job["gate_regret_check"]["holds"] == true);
            CHECK(job["split_regret_check"]["holds"] == true);
            ++checked;
        }
    }
    CHECK(checked == 4);
}

TEST_CASE("sweep honors the worker environment variable") {
    auto cfg = tiny_config();
    cfg.sweep_N = {16};
    cfg.seeds = {1};
    TempDir d1("iclab_sweep_env1"), d2("iclab_sweep_env2");

    setenv("ICLAB_WORKERS", "2", 1);
    SweepOptions o1;
    o1.out_dir = d1.path.string();
    auto out1 = run_sweep(cfg, o1);
    setenv("ICLAB_WORKERS", "1", 1);
    SweepOptions o2;
    o2.out_dir = d2.path.string();
    auto out2 = run_sweep(cfg, o2);
    unsetenv("ICLAB_WORKERS");

    CHECK(slurp(out1.results_csv) == slurp(out2.results_csv));
}

TEST_CASE("empty grid produces header-only outputs") {
    auto cfg = tiny_config();
    cfg.sweep_N = {};
    TempDir d("iclab_sweep_empty");
    SweepOptions o;
    o.out_dir = d.path.string();
    auto out = run_sweep(cfg, o);
    CHECK(slurp(out.results_csv) == "N,seed,model,split,context,class_group,err01,ce,n,error\n");
    auto summary = nlohmann::json::parse(slurp(out.summary_json));
    CHECK(summary["jobs"].empty());
    CHECK(summary["all_gate_checks_pass"] == true);
}

TEST_CASE("results csv rejects a foreign header") {
    TempDir d("iclab_badcsv");
    auto path = (d.path / "results.csv").string();
    std::ofstream(path) << "a,b,c\n1,2,3\n";
    CHECK_THROWS_AS(read_results_csv(path), std::invalid_argument);
}

TEST_CASE("plots are rendered for every populated panel") {
    auto cfg = tiny_config();
    cfg.sweep_N = {16};
    cfg.seeds = {1, 2};
    TempDir d("iclab_plots");
    SweepOptions o;
    o.out_dir = d.path.string();
    auto out = run_sweep(cfg, o);

    auto written = emit_plots(out.results_csv, (d.path / "plots").string());
    // 8 error panels, the bound table, and 2 closed-form panels.
    CHECK(written.size() == 11);
    int svg_count = 0;
    for (const auto& path : written) {
        CHECK(fs::exists(path));
        if (path.size() > 4 && path.substr(path.size() - 4) == ".svg") {
            auto body = slurp(path);
            CHECK(body.rfind("<svg", 0) == 0);
            CHECK(body.find("</svg>") != std::string::npos);
            ++svg_count;
        }
    }
    CHECK(svg_count == 10);
}

TEST_CASE("gate keys map back to class groups") {
    CHECK(gate_key_class("3|1") == 3);
    CHECK(gate_key_class("3") == 3);
    CHECK(gate_key_class("12|0") == 12);
    CHECK(gate_key_class("0.12,0.3") == -1);
    CHECK(gate_key_class("") == -1);
    CHECK(gate_key_class("x|1") == -1);
}
