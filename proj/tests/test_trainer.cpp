#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "a3rl/error.hpp"
#include "a3rl/io.hpp"
#include "a3rl/log.hpp"
#include "a3rl/trainer.hpp"

using namespace a3rl;
using namespace a3rl::trainer;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny() {
    ExperimentConfig c;
    c.batch_size = 16;
    c.gradient_steps = 2;
    c.ensemble_size = 2;
    c.hidden = 8;
    c.density_members = 2;
    c.density_hidden = 8;
    c.mc_samples = 2;
    c.total_steps = 300;
    c.warmup_steps = 100;
    c.eval_interval = 100;
    c.eval_episodes = 1;
    return c;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("a3rl_trainer_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

const env::OfflineDataset& reach_data() {
    static const auto data = env::generate_offline(env::point_reach(), env::BehaviorPolicy::Random, 2000, 3);
    return data;
}

}  // namespace

TEST_CASE("validation reports every violation") {
    ExperimentConfig c;
    c.target_subset = 3;
    c.gamma = 1.5;
    c.rho = 0.0;
    const auto bad = validate(c);
    CHECK(bad.size() >= 3);
    try {
        require_valid(c);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("target_subset") != std::string::npos);
        CHECK(msg.find("gamma") != std::string::npos);
        CHECK(msg.find("rho") != std::string::npos);
    }
    CHECK(validate(ExperimentConfig{}).empty());
}

TEST_CASE("defaults follow the published table") {
    const ExperimentConfig c;
    CHECK(c.batch_size == 256);
    CHECK(c.gradient_steps == 20);
    CHECK(c.hidden == 256);
    CHECK(c.hidden_layers == 2);
    CHECK(c.gamma == 0.99);
    CHECK(c.lr == 3e-4);
    CHECK(c.ensemble_size == 10);
    CHECK(c.rho == 0.3);
    CHECK(c.xi == 0.03);
}

TEST_CASE("training is deterministic and counts gradient steps") {
    const ExperimentConfig c = tiny();
    const auto a = train(c, &reach_data());
    const auto b = train(c, &reach_data());
    REQUIRE(a.metrics.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) CHECK(to_csv_line(a.metrics[k]) == to_csv_line(b.metrics[k]));
    CHECK(std::equal(a.agent.actor.params().begin(), a.agent.actor.params().end(), b.agent.actor.params().begin()));
    CHECK(a.gradient_steps == c.gradient_steps * (c.total_steps - c.warmup_steps));
    CHECK(a.env_steps == c.total_steps);
    CHECK(a.offline_reads == (c.total_steps - c.warmup_steps) * c.batch_size / 2);
    for (const auto& row : a.metrics) {
        CHECK(std::isfinite(row.eval_return));
        CHECK(row.wall_ms == 0.0);
    }
}

TEST_CASE("every mode trains") {
    for (const auto& name : replay::mode_names()) {
        CAPTURE(name);
        ExperimentConfig c = tiny();
        c.mode = replay::mode_from_string(name);
        const auto r = train(c, &reach_data());
        CHECK(r.metrics.size() == 3);
        CHECK(r.density.has_value() == replay::uses_density(c.mode));
    }
}

TEST_CASE("purely online runs never read the offline data") {
    ExperimentConfig c = tiny();
    const auto r = train(c, nullptr);
    CHECK(r.pure_online);
    CHECK(r.offline_reads == 0);
}

TEST_CASE("a missing dataset file falls back to online training with a warning") {
    ExperimentConfig c = tiny();
    c.offline_path = "/nonexistent/data.ds";
    std::string warning;
    auto previous = log::set_warning_sink([&](const std::string& m) { warning = m; });
    const auto r = train(c);
    log::set_warning_sink(previous);
    CHECK(r.pure_online);
    CHECK(warning.find("not found") != std::string::npos);
}

TEST_CASE("evaluation is deterministic") {
    const agent::Agent ag(make_agent_config(tiny(), env::point_maze()), 1);
    const auto a = evaluate(ag.actor, env::point_maze(), 3, 7);
    const auto b = evaluate(ag.actor, env::point_maze(), 3, 7);
    CHECK(a.mean_return == b.mean_return);
    CHECK(a.success_rate == b.success_rate);
    CHECK_THROWS_AS(evaluate(ag.actor, env::point_maze(), 0, 7), ConfigError);
}

TEST_CASE("ablation entries differ only where intended") {
    ExperimentConfig base = tiny();
    base.offline_path = "data.ds";
    const auto entries = ablation_entries(base);
    REQUIRE(entries.size() == 8);
    const auto& a3_online = entries[6];
    const auto& sac_online = entries[7];
    CHECK(a3_online.label == "A3_PURE_ONLINE");
    CHECK(sac_online.label == "SAC_PURE_ONLINE");
    ExperimentConfig diff = a3_online.config;
    diff.mode = sac_online.config.mode;
    CHECK(diff == sac_online.config);
    CHECK(a3_online.config.offline_path.empty());
    for (std::size_t k = 0; k < 6; ++k) CHECK(entries[k].config.offline_path == "data.ds");
}

TEST_CASE("ablation suite writes one file per mode and seed plus a summary") {
    ExperimentConfig c = tiny();
    c.total_steps = 150;
    c.eval_interval = 50;
    const fs::path d1 = fresh_dir("suite1"), d2 = fresh_dir("suite2");
    const auto runs = run_ablation_suite(c, 2, d1, &reach_data());
    CHECK(runs.size() == 16);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(d1)) files += e.path().extension() == ".csv" ? 1 : 0;
    CHECK(files == 17);
    CHECK(fs::exists(d1 / metrics_filename("PointReach", "TD_DENSITY", 1)));

    run_ablation_suite(c, 2, d2, &reach_data());
    for (const auto& e : fs::directory_iterator(d1))
        CHECK(read_bytes(e.path()) == read_bytes(d2 / e.path().filename()));

    const auto summary = summarize(runs);
    REQUIRE(summary.size() == 8);
    CHECK(summary[0].seeds == 2);

    std::vector<SuiteRunResult> one(runs.begin(), runs.begin() + 8);
    for (const auto& s : summarize(one)) {
        CHECK(s.return_std == 0.0);
        CHECK(s.success_std == 0.0);
    }
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("summary statistics") {
    std::vector<SuiteRunResult> runs(2);
    runs[0].label = runs[1].label = "A3";
    runs[0].metrics.push_back(MetricsRow{.eval_return = 1.0, .eval_success = 0.0});
    runs[1].metrics.push_back(MetricsRow{.eval_return = 3.0, .eval_success = 1.0});
    const auto s = summarize(runs);
    REQUIRE(s.size() == 1);
    CHECK(s[0].return_mean == doctest::Approx(2.0));
    CHECK(s[0].return_std == doctest::Approx(1.0));
    CHECK(s[0].success_std == doctest::Approx(0.5));
}

TEST_CASE("metrics file layout") {
    const fs::path d = fresh_dir("metrics");
    write_metrics_csv(d / "m.csv", {MetricsRow{.env_step = 5, .eval_return = -1.5}});
    std::ifstream in(d / "m.csv");
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == metrics_header());
    CHECK(row.rfind("5,-1.5,", 0) == 0);
    fs::remove_all(d);
}
