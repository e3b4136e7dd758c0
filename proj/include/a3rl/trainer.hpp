#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "a3rl/agent.hpp"
#include "a3rl/density.hpp"
#include "a3rl/env.hpp"
#include "a3rl/replay.hpp"

namespace a3rl::trainer {

/// One training run. Defaults follow the published hyperparameter table
/// where it has an entry (batch 256, G = 20, 2 x 256 MLP, gamma 0.99,
/// lr 3e-4, E = 10, rho = 0.3, xi = 0.03, Adam); the rest are documented
/// choices.
struct ExperimentConfig {
    std::string env = "PointReach";
    std::string offline_path;  ///< empty: purely online
    replay::PriorityMode mode = replay::PriorityMode::A3;

    int batch_size = 256;      ///< N: pool size and minibatch size
    int gradient_steps = 20;   ///< G
    int ensemble_size = 10;    ///< E
    int target_subset = 2;     ///< Z
    int hidden = 256;
    int hidden_layers = 2;
    double gamma = 0.99;
    double alpha = 0.1;
    double tau_ema = 0.995;
    double xi = 0.03;
    double rho = 0.3;
    double beta0 = 0.4;
    double c_w = 1.0;
    double c_adv = 1.0;
    int mc_samples = 10;       ///< M
    int density_members = 5;   ///< N_e
    int density_hidden = 256;
    double lr = 3e-4;

    std::int64_t total_steps = 100000;
    std::int64_t warmup_steps = 1000;
    std::int64_t eval_interval = 5000;
    int eval_episodes = 10;
    std::uint64_t seed = 0;

    bool entropy_sign_plus = false;
    bool auto_alpha = false;
    bool actor_fresh_batch = false;  ///< actor uses a new draw instead of the last critic batch
    bool record_timing = false;      ///< fill the wall_ms column (breaks byte-reproducibility)

    bool operator==(const ExperimentConfig&) const = default;
};

/// Every violated constraint, one message per entry. Empty when valid.
std::vector<std::string> validate(const ExperimentConfig& config);
/// Throws ConfigError listing all violations.
void require_valid(const ExperimentConfig& config);

agent::AgentConfig make_agent_config(const ExperimentConfig& config, const env::EnvSpec& spec);
density::DensityConfig make_density_config(const ExperimentConfig& config);

/// One evaluation record.
struct MetricsRow {
    std::int64_t env_step = 0;
    double eval_return = 0.0;
    double eval_success = 0.0;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double density_loss = 0.0;
    double mean_priority = 0.0;
    double max_priority = 0.0;
    double mean_ratio_lcb = 0.0;  ///< over offline pool rows
    double mean_adv_lcb = 0.0;
    double beta = 0.0;
    double wall_ms = 0.0;
};

std::string metrics_header();
std::string to_csv_line(const MetricsRow& row);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);

/// Standard seed streams split from the master seed, so runs that differ only
/// in sampling see the same environment and initialization randomness.
enum Stream : std::uint64_t {
    kEnvStream = 1,
    kActStream = 2,
    kPoolStream = 3,
    kBatchStream = 4,
    kSubsetStream = 5,
    kPriorityStream = 6,
    kDensityStream = 7,
    kInitStream = 8,
    kEvalStream = 9,
    kNoiseStream = 10,
};

struct TrainResult {
    std::vector<MetricsRow> metrics;
    agent::Agent agent;
    std::optional<density::DensityEnsemble> density;
    std::int64_t env_steps = 0;
    std::int64_t gradient_steps = 0;
    std::int64_t offline_reads = 0;
    bool pure_online = false;
};

/// Per-step hook, called after the learning update of every post-warm-up
/// step (used by the acceptance reference comparison).
using StepHook = std::function<void(std::int64_t step, const agent::Agent&)>;

/// Runs the training loop. `offline` overrides config.offline_path when
/// non-null; a missing dataset means purely online (a warning is logged if
/// the mode would have used it).
TrainResult train(const ExperimentConfig& config, const env::OfflineDataset* offline = nullptr,
                  const StepHook& hook = {});

using Policy = std::function<std::vector<float>(std::span<const float>)>;

struct EvalResult {
    double mean_return = 0.0;
    double success_rate = 0.0;
};

/// Deterministic rollouts; episode e starts from reset(spec, Rng(seed).split(e)).
EvalResult evaluate(const Policy& policy, const env::EnvSpec& spec, int episodes, std::uint64_t seed);
/// Uses the actor's mean action.
EvalResult evaluate(const nn::DenseNet& actor, const env::EnvSpec& spec, int episodes, std::uint64_t seed);

/// Entry of the ablation suite: a label and the derived run config.
struct SuiteEntry {
    std::string label;
    ExperimentConfig config;
    bool pure_online = false;
};

/// The 8 suite modes for one seed: A3, UNIFORM, DENSITY_ONLY, ADV_ONLY, TD,
/// TD_DENSITY with the offline data, and A3_PURE_ONLINE / SAC_PURE_ONLINE
/// without it.
std::vector<SuiteEntry> ablation_entries(const ExperimentConfig& base);

std::string metrics_filename(const std::string& env, const std::string& label, std::uint64_t seed);

struct SuiteRunResult {
    std::string label;
    std::uint64_t seed = 0;
    std::vector<MetricsRow> metrics;
};

/// Runs every entry for seeds base.seed .. base.seed + seeds - 1, writing one
/// metrics CSV per (mode, seed) into `out_dir` and a summary CSV. Returns the
/// runs in deterministic order.
std::vector<SuiteRunResult> run_ablation_suite(const ExperimentConfig& base, int seeds,
                                               const std::filesystem::path& out_dir,
                                               const env::OfflineDataset* offline = nullptr);

struct SummaryRow {
    std::string label;
    std::size_t seeds = 0;
    double return_mean = 0.0;
    double return_std = 0.0;  ///< population std across seeds (0 for one seed)
    double success_mean = 0.0;
    double success_std = 0.0;
};

/// Mean +- std of the final evaluation row per label, in first-seen order.
std::vector<SummaryRow> summarize(const std::vector<SuiteRunResult>& runs);
void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);

}  // namespace a3rl::trainer
