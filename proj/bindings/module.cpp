// Python bindings for the core operations: closed-form bounds, the in-context
// and in-weight predictors, the gate update, and the experiment harness.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "iclab/bounds.hpp"
#include "iclab/harness.hpp"

namespace py = pybind11;
using namespace iclab;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Gated in-context/in-weight learning laboratory";

    // Closed-form bounds ------------------------------------------------------
    m.def("ic_ce_bounds", &ic_ce_bounds, py::arg("L"), py::arg("k"), py::arg("B"),
          py::arg("eps"), py::arg("C"),
          "Cross-entropy sandwich (lower, upper) for k irrelevant labels out of L");
    m.def("ic_l1_bounds", &ic_l1_bounds, py::arg("L"), py::arg("k"), py::arg("B"),
          py::arg("eps"), py::arg("C"), "L1 sandwich (lower, upper)");
    m.def("kt_excess_bound", &kt_excess_bound, py::arg("N_x"), py::arg("C"),
          "Leading excess cross-entropy of the add-half estimator");
    m.def("generalization_bound", &generalization_bound, py::arg("g_inf"),
          py::arg("domain_size"), py::arg("C"), py::arg("delta"), py::arg("N_x"),
          "High-probability excess-risk bound for a per-key online learner");
    m.def("icl_floor_binary", &icl_floor_binary, py::arg("L"), py::arg("eps"),
          "Binary-class cross-entropy floor with one relevant context label");
    m.def("entropy_threshold", &entropy_threshold, py::arg("floor_value"),
          "Label-noise rate whose binary entropy equals the given floor");
    m.def(
        "noise_tradeoff",
        [](double p) {
            NoiseTradeoff t = noise_tradeoff(p);
            return py::make_tuple(t.iwl_err, t.icl_independent, t.icl_anticorrelated,
                                  t.icl_correlated);
        },
        py::arg("p"),
        "(majority error, copy error for independent / anti-correlated / correlated flips)");

    // Gate --------------------------------------------------------------------
    m.def("alpha_update", &alpha_update, py::arg("alpha"), py::arg("loss_diff"), py::arg("eta"),
          "Two-expert exponentiated-gradient step on the gate weight");
    m.def("gate_eta", &gate_eta, py::arg("t"), "Default gate step size at per-key step t");

    // In-context predictor ----------------------------------------------------
    m.def(
        "ic_predict_identity",
        [](const std::vector<std::pair<std::vector<double>, int>>& context,
           const std::vector<double>& query, int num_classes, double epsilon, double B) {
            ExampleSequence ex;
            ex.query = query;
            for (const auto& [x, y] : context) ex.context.push_back({x, y});
            ex.target_label = 0;
            auto params =
                ICPredictorParams::identity(static_cast<int>(query.size()), num_classes,
                                            epsilon, B);
            return ic_predict(params, ex).probs();
        },
        py::arg("context"), py::arg("query"), py::arg("num_classes"), py::arg("epsilon") = 0.01,
        py::arg("B") = 1.0,
        "Softmax-over-distances prediction with the identity metric; context is "
        "a list of (input, label) pairs");

    // In-weight predictor -----------------------------------------------------
    py::class_<InWeightTable>(m, "InWeightTable")
        .def(py::init([](int num_classes, const std::string& backend) {
                 return InWeightTable(num_classes, iw_backend_from_string(backend));
             }),
             py::arg("num_classes"), py::arg("backend") = "KT")
        .def("update", &InWeightTable::update, py::arg("key"), py::arg("label"))
        .def(
            "predict",
            [](const InWeightTable& t, const std::string& key) { return t.predict(key).probs(); },
            py::arg("key"))
        .def("observations", &InWeightTable::observations, py::arg("key"))
        .def("num_keys", &InWeightTable::num_keys)
        .def("num_classes", &InWeightTable::num_classes)
        .def("save", &InWeightTable::save, py::arg("path"))
        .def_static("load", &InWeightTable::load, py::arg("path"));

    // Harness -----------------------------------------------------------------
    m.def("default_config_json",
          []() { return ExperimentConfig::defaults().to_json().dump(2); },
          "The default experiment configuration as a JSON string");
    m.def(
        "train_summary",
        [](const std::string& config_json, int64_t N, uint64_t seed) {
            auto cfg = ExperimentConfig::from_json(nlohmann::json::parse(config_json));
            TrainResult res = run_training(cfg, N, seed);
            py::dict d;
            d["steps"] = res.trainer.steps();
            d["table_keys"] = res.trainer.table().num_keys();
            d["gate_keys"] = res.trainer.alphas().num_keys();
            d["rejection_fallbacks"] = res.stats.rejection_fallbacks;
            if (!res.trainer.ledger().empty()) {
                const int C = cfg.base.num_classes();
                d["gate_check_holds"] =
                    check_regret_decomposition(res.trainer.ledger(), C).holds;
                d["split_check_holds"] =
                    check_split_regret_decomposition(res.trainer.ledger(), C).holds;
            }
            return d;
        },
        py::arg("config_json"), py::arg("N"), py::arg("seed"),
        "Run one online training job and report table/gate sizes and the "
        "regret-decomposition checks");
    m.def(
        "run_sweep",
        [](const std::string& config_json, const std::string& out_dir, int workers) {
            auto cfg = ExperimentConfig::from_json(nlohmann::json::parse(config_json));
            SweepOptions opts;
            opts.out_dir = out_dir;
            opts.workers = workers;
            SweepOutputs out;
            {
                py::gil_scoped_release release;
                out = run_sweep(cfg, opts);
            }
            py::dict d;
            d["results_csv"] = out.results_csv;
            d["alpha_csv"] = out.alpha_csv;
            d["summary_json"] = out.summary_json;
            return d;
        },
        py::arg("config_json"), py::arg("out_dir"), py::arg("workers") = 0,
        "Full grid sweep; writes results.csv, alpha_summary.csv, run_summary.json");
}
