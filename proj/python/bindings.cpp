// Python bindings: configs travel as JSON text, results as plain dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "a3rl/density.hpp"
#include "a3rl/env.hpp"
#include "a3rl/error.hpp"
#include "a3rl/io.hpp"
#include "a3rl/replay.hpp"
#include "a3rl/theory.hpp"
#include "a3rl/trainer.hpp"

namespace py = pybind11;
using namespace a3rl;

namespace {

py::dict metrics_row(const trainer::MetricsRow& r) {
    py::dict d;
    d["env_step"] = r.env_step;
    d["eval_return"] = r.eval_return;
    d["eval_success"] = r.eval_success;
    d["critic_loss"] = r.critic_loss;
    d["actor_loss"] = r.actor_loss;
    d["density_loss"] = r.density_loss;
    d["mean_priority"] = r.mean_priority;
    d["max_priority"] = r.max_priority;
    d["mean_ratio_lcb"] = r.mean_ratio_lcb;
    d["mean_adv_lcb"] = r.mean_adv_lcb;
    d["beta"] = r.beta;
    d["wall_ms"] = r.wall_ms;
    return d;
}

py::dict train(const std::string& config_json, const std::optional<std::filesystem::path>& metrics_csv,
               const std::optional<std::filesystem::path>& checkpoint) {
    const auto config = io::config_from_json(config_json);
    trainer::TrainResult res;
    {
        py::gil_scoped_release release;
        res = trainer::train(config);
    }
    if (metrics_csv) trainer::write_metrics_csv(*metrics_csv, res.metrics);
    if (checkpoint)
        io::save_checkpoint(io::make_checkpoint(res.agent, io::config_hash(config), res.env_steps), *checkpoint);
    py::list rows;
    for (const auto& r : res.metrics) rows.append(metrics_row(r));
    py::dict out;
    out["metrics"] = rows;
    out["env_steps"] = res.env_steps;
    out["gradient_steps"] = res.gradient_steps;
    out["offline_reads"] = res.offline_reads;
    out["pure_online"] = res.pure_online;
    out["config_hash"] = io::config_hash(config);
    return out;
}

replay::PrioritySet priorities(const std::vector<double>& sigma, double rho) {
    return replay::make_priority_set(sigma, rho);
}

py::dict lemma1(const std::vector<double>& rewards, double beta1, double beta2, std::vector<double> grid) {
    const theory::SoftmaxBandit b{rewards, beta1, beta2};
    b.validate();
    if (grid.empty()) grid = theory::interior_grid(b, 5);
    const auto r = theory::check_lemma1(b, grid);
    py::dict d;
    d["xi"] = r.xi;
    d["sup_r"] = r.sup_r;
    d["argmax"] = r.argmax;
    d["holds"] = r.holds;
    d["constant_rewards"] = r.constant_rewards;
    return d;
}

}  // namespace

PYBIND11_MODULE(_a3rl, m) {
    m.doc() = "Advantage- and density-aware replay for offline-to-online RL";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    m.def("mode_names", &replay::mode_names);
    m.def("env_names", &env::env_names);
    m.def("policy_names", &env::policy_names);

    m.def("default_config", [] { return io::config_to_json(trainer::ExperimentConfig{}); },
          "Default experiment config as JSON text");
    m.def("normalize_config", [](const std::string& text) { return io::config_to_json(io::config_from_json(text)); },
          "Parse, validate and re-serialize a JSON config");
    m.def("config_hash", [](const std::string& text) { return io::config_hash(io::config_from_json(text)); });
    m.def("train", &train, py::arg("config_json"), py::arg("metrics_csv") = py::none(),
          py::arg("checkpoint") = py::none(), "Train one run; returns metrics and counters");
    m.def(
        "run_ablation_suite",
        [](const std::string& config_json, int seeds, const std::filesystem::path& out_dir) {
            const auto config = io::config_from_json(config_json);
            std::vector<trainer::SuiteRunResult> runs;
            {
                py::gil_scoped_release release;
                runs = trainer::run_ablation_suite(config, seeds, out_dir);
            }
            py::list out;
            for (const auto& s : trainer::summarize(runs)) {
                py::dict d;
                d["mode"] = s.label;
                d["seeds"] = s.seeds;
                d["return_mean"] = s.return_mean;
                d["return_std"] = s.return_std;
                d["success_mean"] = s.success_mean;
                d["success_std"] = s.success_std;
                out.append(d);
            }
            return out;
        },
        py::arg("config_json"), py::arg("seeds"), py::arg("out_dir"));

    m.def(
        "generate_dataset",
        [](const std::string& env_name, const std::string& policy, std::size_t n, std::uint64_t seed,
           const std::filesystem::path& out) {
            const auto data = env::generate_offline(env::make_env(env_name), env::policy_from_string(policy), n, seed);
            env::save_dataset(data, out);
            return data.size();
        },
        py::arg("env"), py::arg("policy"), py::arg("n"), py::arg("seed"), py::arg("out"));
    m.def("dataset_info", [](const std::filesystem::path& path) {
        const auto data = env::load_dataset(path);
        py::dict d;
        d["env"] = data.env_name;
        d["policy"] = data.policy;
        d["seed"] = data.seed;
        d["size"] = data.size();
        d["state_dim"] = data.state_dim;
        d["action_dim"] = data.action_dim;
        return d;
    });
    m.def("env_reset", [](const std::string& name, std::uint64_t seed) { return env::reset(env::make_env(name), seed); });
    m.def("env_step", [](const std::string& name, const std::vector<float>& state, const std::vector<float>& action) {
        const auto r = env::step(env::make_env(name), state, action);
        return py::make_tuple(r.next_state, r.reward, r.done);
    });

    m.def("a3_priority", &replay::a3_priority, py::arg("offline"), py::arg("ratio_lcb"), py::arg("adv_lcb"),
          py::arg("xi"));
    m.def("priority_probs", [](const std::vector<double>& sigma, double rho) { return priorities(sigma, rho).probs; },
          py::arg("sigma"), py::arg("rho"));
    m.def(
        "sample_batch",
        [](const std::vector<double>& sigma, double rho, std::size_t count, std::uint64_t seed) {
            Rng rng(seed);
            return replay::sample_batch(priorities(sigma, rho), count, rng);
        },
        py::arg("sigma"), py::arg("rho"), py::arg("count"), py::arg("seed"));
    m.def(
        "importance_weights",
        [](const std::vector<double>& sigma, double rho, const std::vector<std::size_t>& drawn, double beta) {
            return replay::importance_weights(priorities(sigma, rho), drawn, beta);
        },
        py::arg("sigma"), py::arg("rho"), py::arg("drawn"), py::arg("beta"));
    m.def("anneal_beta", &replay::anneal_beta, py::arg("step"), py::arg("total_steps"), py::arg("beta0"));

    m.def("f", &density::f);
    m.def("f_prime", &density::f_prime);
    m.def("f_conj_of_fprime", &density::f_conj_of_fprime);

    m.def(
        "bandit_R",
        [](const std::vector<double>& rewards, double beta1, double beta2, std::size_t arm, double xi) {
            return theory::bandit_R({rewards, beta1, beta2}, arm, xi);
        },
        py::arg("rewards"), py::arg("beta1"), py::arg("beta2"), py::arg("arm"), py::arg("xi"));
    m.def("check_lemma1", &lemma1, py::arg("rewards"), py::arg("beta1"), py::arg("beta2"),
          py::arg("xi_grid") = std::vector<double>{});
    m.def(
        "lemma1_sweep",
        [](std::size_t instances, std::size_t points, std::uint64_t seed) {
            const auto s = theory::run_lemma1_sweep(instances, points, seed);
            py::dict d;
            d["instances"] = s.instances;
            d["failures"] = s.failures;
            d["argmax_mismatches"] = s.argmax_mismatches;
            return d;
        },
        py::arg("instances"), py::arg("points"), py::arg("seed"));

    m.def("load_checkpoint", [](const std::filesystem::path& path) {
        const auto ck = io::load_checkpoint(path);
        py::dict blocks;
        for (const auto& b : ck.blocks) blocks[py::str(b.name)] = b.values;
        py::dict d;
        d["module"] = ck.module;
        d["config_hash"] = ck.config_hash;
        d["env_step"] = ck.env_step;
        d["blocks"] = blocks;
        return d;
    });
}
