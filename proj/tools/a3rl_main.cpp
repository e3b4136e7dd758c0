// a3rl: dataset generation, training, ablation suites and theory checks.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "a3rl/env.hpp"
#include "a3rl/error.hpp"
#include "a3rl/io.hpp"
#include "a3rl/log.hpp"
#include "a3rl/theory.hpp"
#include "a3rl/trainer.hpp"

namespace fs = std::filesystem;
using namespace a3rl;

namespace {

struct GenDataArgs {
    std::string env = "PointReach";
    std::string policy = "random";
    std::size_t n = 50000;
    std::uint64_t seed = 0;
    std::string out;
};

struct TrainArgs {
    std::string config;
    std::string out_dir = ".";
    std::string mode;
    std::optional<std::uint64_t> seed;
};

struct TheoryArgs {
    double beta1 = 1.0;
    double beta2 = 2.0;
    std::vector<double> rewards{0.0, 0.5, 1.0};
    std::vector<double> xi_grid;
    std::string out = "lemma1_report.csv";
};

struct AblateArgs {
    std::string config;
    std::string out_dir = ".";
    int seeds = 1;
};

int gen_data(const GenDataArgs& a) {
    const env::EnvSpec spec = env::make_env(a.env);
    const env::BehaviorPolicy policy = env::policy_from_string(a.policy);
    const auto data = env::generate_offline(spec, policy, a.n, a.seed);
    env::save_dataset(data, a.out);
    std::cout << "wrote " << data.size() << " transitions (" << env::to_string(policy) << ", " << spec.name << ") to "
              << a.out << '\n';
    return 0;
}

trainer::ExperimentConfig config_with_overrides(const std::string& path, const std::string& mode,
                                                std::optional<std::uint64_t> seed) {
    trainer::ExperimentConfig config = path.empty() ? trainer::ExperimentConfig{} : io::load_config(path);
    if (!mode.empty()) config.mode = replay::mode_from_string(mode);
    if (seed) config.seed = *seed;
    trainer::require_valid(config);
    return config;
}

int train(const TrainArgs& a) {
    const auto config = config_with_overrides(a.config, a.mode, a.seed);
    if (config.offline_path.empty() && replay::uses_density(config.mode))
        log::warn("no offline dataset configured; mode " + replay::to_string(config.mode) + " runs purely online");
    fs::create_directories(a.out_dir);
    const auto result = trainer::train(config);
    const std::string stem = config.env + "_" + replay::to_string(config.mode) + "_" + std::to_string(config.seed);
    const fs::path csv = fs::path(a.out_dir) / (stem + ".csv");
    const fs::path ckpt = fs::path(a.out_dir) / (stem + ".ckpt");
    trainer::write_metrics_csv(csv, result.metrics);
    io::save_checkpoint(io::make_checkpoint(result.agent, io::config_hash(config), result.env_steps), ckpt);
    const auto& last = result.metrics.back();
    std::cout << "final eval return " << last.eval_return << " (success " << last.eval_success << ") after "
              << result.env_steps << " steps\n"
              << "metrics: " << csv.string() << "\ncheckpoint: " << ckpt.string() << '\n';
    return 0;
}

int verify_theory(const TheoryArgs& a) {
    theory::SoftmaxBandit bandit{a.rewards, a.beta1, a.beta2};
    bandit.validate();
    const auto grid = a.xi_grid.empty() ? theory::interior_grid(bandit, 5) : a.xi_grid;
    const auto report = theory::check_lemma1(bandit, grid);
    theory::write_lemma1_report(a.out, bandit, report);
    for (std::size_t k = 0; k < report.xi.size(); ++k)
        std::cout << "xi=" << report.xi[k] << "  sup R=" << report.sup_r[k] << "  argmax=" << report.argmax[k] << '\n';
    std::cout << (report.holds ? "monotone decrease holds" : "monotone decrease FAILS") << '\n';
    return report.holds ? 0 : 1;
}

int ablate(const AblateArgs& a) {
    if (a.seeds < 1) throw ConfigError("--seeds must be >= 1");
    const auto config = config_with_overrides(a.config, "", std::nullopt);
    const auto runs = trainer::run_ablation_suite(config, a.seeds, a.out_dir);
    for (const auto& s : trainer::summarize(runs))
        std::cout << s.label << ": return " << s.return_mean << " +- " << s.return_std << ", success "
                  << s.success_mean << " +- " << s.success_std << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"A3RL: advantage- and density-aware replay for offline-to-online RL"};
    app.require_subcommand(1);

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate an offline dataset from a scripted policy");
    gen_cmd->add_option("--env", gen.env, "PointReach | PointMaze")->capture_default_str();
    gen_cmd->add_option("--policy", gen.policy, "random | medium | expert | mix")->capture_default_str();
    gen_cmd->add_option("--n", gen.n, "Number of transitions")->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed, "Seed")->capture_default_str();
    gen_cmd->add_option("--out", gen.out, "Output file")->required();

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train one agent and write metrics plus a checkpoint");
    train_cmd->add_option("--config", tr.config, "JSON config (defaults when omitted)");
    train_cmd->add_option("--out-dir", tr.out_dir, "Output directory")->capture_default_str();
    train_cmd->add_option("--mode", tr.mode, "Priority mode override");
    train_cmd->add_option("--seed", tr.seed, "Seed override");

    TheoryArgs th;
    auto* theory_cmd = app.add_subcommand("verify-theory", "Check the monotone shift coefficient on a softmax bandit");
    theory_cmd->add_option("--beta1", th.beta1, "Online-data temperature")->capture_default_str();
    theory_cmd->add_option("--beta2", th.beta2, "Policy temperature")->capture_default_str();
    theory_cmd->add_option("--rewards", th.rewards, "Comma-separated arm rewards")->delimiter(',')->capture_default_str();
    theory_cmd->add_option("--xi-grid", th.xi_grid, "Comma-separated xi values (default: 5 interior points)")
        ->delimiter(',');
    theory_cmd->add_option("--out", th.out, "Report CSV")->capture_default_str();

    AblateArgs ab;
    auto* ablate_cmd = app.add_subcommand("ablate", "Run the 8-mode ablation suite over k seeds");
    ablate_cmd->add_option("--config", ab.config, "JSON config (defaults when omitted)");
    ablate_cmd->add_option("--out-dir", ab.out_dir, "Output directory")->capture_default_str();
    ablate_cmd->add_option("--seeds", ab.seeds, "Number of seeds")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*gen_cmd) return gen_data(gen);
        if (*train_cmd) return train(tr);
        if (*theory_cmd) return verify_theory(th);
        if (*ablate_cmd) return ablate(ab);
    } catch (const std::invalid_argument& e) {  // ConfigError, DimensionError
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
