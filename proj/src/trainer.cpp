#include "a3rl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "a3rl/error.hpp"
#include "a3rl/log.hpp"

namespace a3rl::trainer {

std::vector<std::string> validate(const ExperimentConfig& c) {
    std::vector<std::string> bad;
    auto need = [&](bool ok, const char* msg) {
        if (!ok) bad.emplace_back(msg);
    };
    const auto envs = env::env_names();
    need(std::find(envs.begin(), envs.end(), c.env) != envs.end(), "env: unknown environment name");
    need(c.batch_size >= 2, "batch_size: must be >= 2");
    need(c.gradient_steps >= 1, "gradient_steps: must be >= 1");
    need(c.ensemble_size >= 2, "ensemble_size: must be >= 2");
    need(c.target_subset == 1 || c.target_subset == 2, "target_subset: must be 1 or 2");
    need(c.target_subset <= c.ensemble_size, "target_subset: must not exceed ensemble_size");
    need(c.hidden >= 1, "hidden: must be >= 1");
    need(c.hidden_layers >= 1, "hidden_layers: must be >= 1");
    need(c.gamma >= 0.0 && c.gamma < 1.0, "gamma: must lie in [0, 1)");
    need(c.alpha >= 0.0 && std::isfinite(c.alpha), "alpha: must be finite and >= 0");
    need(c.tau_ema > 0.0 && c.tau_ema < 1.0, "tau_ema: must lie in (0, 1)");
    need(c.xi >= 0.0 && std::isfinite(c.xi), "xi: must be finite and >= 0");
    need(c.rho > 0.0 && c.rho <= 1.0, "rho: must lie in (0, 1]");
    need(c.beta0 > 0.0 && c.beta0 < 1.0, "beta0: must lie in (0, 1)");
    need(c.c_w >= 0.0 && std::isfinite(c.c_w), "c_w: must be finite and >= 0");
    need(c.c_adv >= 0.0 && std::isfinite(c.c_adv), "c_adv: must be finite and >= 0");
    need(c.mc_samples >= 2, "mc_samples: must be >= 2");
    need(c.density_members >= 2, "density_members: must be >= 2");
    need(c.density_hidden >= 1, "density_hidden: must be >= 1");
    need(c.lr > 0.0 && std::isfinite(c.lr), "lr: must be positive");
    need(c.total_steps >= 1, "total_steps: must be >= 1");
    need(c.warmup_steps >= 0 && c.warmup_steps < c.total_steps, "warmup_steps: must lie in [0, total_steps)");
    need(c.eval_interval >= 1, "eval_interval: must be >= 1");
    need(c.eval_episodes >= 1, "eval_episodes: must be >= 1");
    return bad;
}

void require_valid(const ExperimentConfig& config) {
    const auto bad = validate(config);
    if (bad.empty()) return;
    std::string msg = "invalid experiment config:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw ConfigError(msg);
}

agent::AgentConfig make_agent_config(const ExperimentConfig& c, const env::EnvSpec& spec) {
    agent::AgentConfig a;
    a.state_dim = spec.state_dim;
    a.action_dim = spec.action_dim;
    a.hidden = c.hidden;
    a.hidden_layers = c.hidden_layers;
    a.ensemble_size = c.ensemble_size;
    a.target_subset = c.target_subset;
    a.gamma = c.gamma;
    a.alpha = c.alpha;
    a.tau_ema = static_cast<float>(c.tau_ema);
    a.adam.lr = static_cast<float>(c.lr);
    a.entropy_sign_plus = c.entropy_sign_plus;
    a.auto_alpha = c.auto_alpha;
    a.mc_samples = c.mc_samples;
    a.c_adv = c.c_adv;
    return a;
}

density::DensityConfig make_density_config(const ExperimentConfig& c) {
    density::DensityConfig d;
    d.members = c.density_members;
    d.hidden = c.density_hidden;
    d.hidden_layers = c.hidden_layers;
    d.adam.lr = static_cast<float>(c.lr);
    d.c_w = c.c_w;
    return d;
}

// ---------------------------------------------------------------------------
// Metrics CSV

std::string metrics_header() {
    return "env_step,eval_return,eval_success,critic_loss,actor_loss,density_loss,mean_priority,max_priority,"
           "mean_ratio_lcb,mean_adv_lcb,beta,wall_ms";
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

std::string to_csv_line(const MetricsRow& r) {
    std::string line = std::to_string(r.env_step);
    for (double v : {r.eval_return, r.eval_success, r.critic_loss, r.actor_loss, r.density_loss, r.mean_priority,
                     r.max_priority, r.mean_ratio_lcb, r.mean_adv_lcb, r.beta, r.wall_ms})
        line += "," + fmt(v);
    return line;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << metrics_header() << '\n';
    for (const auto& r : rows) out << to_csv_line(r) << '\n';
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Evaluation

EvalResult evaluate(const Policy& policy, const env::EnvSpec& spec, int episodes, std::uint64_t seed) {
    if (episodes < 1) throw ConfigError("evaluate: episodes must be >= 1");
    const Rng root(seed);
    double total = 0.0;
    int successes = 0;
    for (int e = 0; e < episodes; ++e) {
        Rng rng = root.split(static_cast<std::uint64_t>(e));
        env::State s = env::reset(spec, rng);
        double ret = 0.0;
        bool reached = false;
        for (int t = 0; t < spec.horizon; ++t) {
            const auto a = policy(s);
            auto res = env::step(spec, s, a);
            ret += res.reward;
            s = std::move(res.next_state);
            if (res.done) {
                reached = true;
                break;
            }
        }
        total += ret;
        successes += reached ? 1 : 0;
    }
    return {total / episodes, static_cast<double>(successes) / episodes};
}

EvalResult evaluate(const nn::DenseNet& actor, const env::EnvSpec& spec, int episodes, std::uint64_t seed) {
    return evaluate([&](std::span<const float> s) { return agent::mean_action(actor, s); }, spec, episodes, seed);
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

// Running sums of the per-step diagnostics between two evaluations.
struct Accumulator {
    double critic = 0.0, actor = 0.0, density = 0.0;
    double mean_p = 0.0, max_p = 0.0, ratio = 0.0, adv = 0.0;
    std::int64_t steps = 0, density_steps = 0, ratio_steps = 0;

    void clear() { *this = {}; }
};

double mean_of(double sum, std::int64_t n) { return n > 0 ? sum / static_cast<double>(n) : 0.0; }

}  // namespace

TrainResult train(const ExperimentConfig& config, const env::OfflineDataset* offline, const StepHook& hook) {
    require_valid(config);
    const env::EnvSpec spec = env::make_env(config.env);

    env::OfflineDataset loaded;
    if (offline == nullptr && !config.offline_path.empty()) {
        if (std::filesystem::exists(config.offline_path)) {
            loaded = env::load_dataset(config.offline_path);
            offline = &loaded;
        } else {
            log::warn("offline dataset '" + config.offline_path + "' not found; training purely online");
        }
    }
    if (offline != nullptr && offline->empty()) offline = nullptr;
    if (offline != nullptr && (offline->state_dim != spec.state_dim || offline->action_dim != spec.action_dim))
        throw DimensionError("offline dataset dims do not match environment '" + spec.name + "'");

    const Rng master(config.seed);
    Rng env_rng = master.split(kEnvStream);
    Rng act_rng = master.split(kActStream);
    Rng pool_rng = master.split(kPoolStream);
    Rng batch_rng = master.split(kBatchStream);
    Rng subset_rng = master.split(kSubsetStream);
    Rng prio_rng = master.split(kPriorityStream);
    Rng noise_rng = master.split(kNoiseStream);
    const std::uint64_t eval_seed = master.split(kEvalStream).next_u64();

    TrainResult result;
    result.agent = agent::Agent(make_agent_config(config, spec), master.split(kInitStream).next_u64());
    result.pure_online = offline == nullptr;
    agent::Agent& ag = result.agent;

    const bool density_on = replay::uses_density(config.mode) && offline != nullptr;
    if (density_on)
        result.density.emplace(spec.state_dim + spec.action_dim, make_density_config(config),
                               master.split(kDensityStream).next_u64());

    replay::OnlineBuffer buffer(static_cast<std::size_t>(config.total_steps), spec.state_dim, spec.action_dim);
    const replay::PriorityParams params{config.mode, config.xi, config.rho, config.mc_samples};
    const auto n = static_cast<std::size_t>(config.batch_size);

    Accumulator acc;
    double last_beta = 0.0;
    const auto t0 = std::chrono::steady_clock::now();

    env::State s = env::reset(spec, env_rng);
    int ep_t = 0;
    for (std::int64_t t = 0; t < config.total_steps; ++t) {
        // Act and store.
        std::vector<float> a;
        if (t < config.warmup_steps) {
            a.resize(static_cast<std::size_t>(spec.action_dim));
            for (float& x : a) x = static_cast<float>(act_rng.uniform(-1.0, 1.0));
        } else {
            a = agent::sample_action(ag.actor, s, act_rng).action;
        }
        auto res = env::step(spec, s, a);
        buffer.push({s, a, res.reward, res.next_state, res.done, env::Source::Online});
        ++ep_t;
        if (res.done || ep_t >= spec.horizon) {
            s = env::reset(spec, env_rng);
            ep_t = 0;
        } else {
            s = std::move(res.next_state);
        }
        result.env_steps = t + 1;

        if (t >= config.warmup_steps) {
            try {
                CandidatePool pool = replay::form_pool(buffer, offline, n, pool_rng);
                result.offline_reads += static_cast<std::int64_t>(pool.offline_reads);

                if (density_on && pool.rows.count(env::Source::Offline) > 0 &&
                    pool.rows.count(env::Source::Online) > 0) {
                    if (const auto dl = density::update_ensemble(*result.density, pool)) {
                        acc.density += *dl;
                        ++acc.density_steps;
                    }
                }

                const replay::PrioritySet ps = replay::compute_priorities(
                    pool, ag, result.density ? &*result.density : nullptr, params, prio_rng);
                const double beta = replay::anneal_beta(static_cast<std::size_t>(t),
                                                        static_cast<std::size_t>(config.total_steps), config.beta0);
                last_beta = beta;

                TransitionBatch batch;
                double closs = 0.0;
                for (int g = 0; g < config.gradient_steps; ++g) {
                    const auto idx = replay::sample_batch(ps, n, batch_rng);
                    batch = pool.rows.gather(idx);
                    const auto subset = agent::draw_target_subset(config.ensemble_size, config.target_subset, subset_rng);
                    const auto y = agent::cdq_target(ag, batch, subset, noise_rng);
                    const auto u = replay::importance_weights(ps, idx, beta);
                    closs += agent::critic_update(ag, batch, y, u);
                    agent::target_ema(ag, static_cast<float>(config.tau_ema));
                    ++result.gradient_steps;
                }
                if (config.actor_fresh_batch) batch = pool.rows.gather(replay::sample_batch(ps, n, batch_rng));
                acc.actor += agent::actor_update(ag, batch, noise_rng);
                acc.critic += closs / config.gradient_steps;

                double sum_p = 0.0, max_p = 0.0;
                for (double p : ps.probs) {
                    sum_p += p;
                    max_p = std::max(max_p, p);
                }
                acc.mean_p += sum_p / static_cast<double>(ps.size());
                acc.max_p += max_p;
                double adv = 0.0;
                for (double v : ps.adv_lcb) adv += v;
                acc.adv += adv / static_cast<double>(ps.size());
                if (density_on) {
                    double ratio = 0.0;
                    std::size_t off = 0;
                    for (std::size_t i = 0; i < pool.size(); ++i)
                        if (pool.rows.is_offline(i)) {
                            ratio += ps.ratio_lcb[i];
                            ++off;
                        }
                    if (off > 0) {
                        acc.ratio += ratio / static_cast<double>(off);
                        ++acc.ratio_steps;
                    }
                }
                ++acc.steps;
            } catch (const NumericalError& e) {
                throw NumericalError("step " + std::to_string(t) + ": " + e.what());
            }
            if (hook) hook(t, ag);
        }

        if ((t + 1) % config.eval_interval == 0 || t + 1 == config.total_steps) {
            const EvalResult ev = evaluate(ag.actor, spec, config.eval_episodes, eval_seed);
            MetricsRow row;
            row.env_step = t + 1;
            row.eval_return = ev.mean_return;
            row.eval_success = ev.success_rate;
            row.critic_loss = mean_of(acc.critic, acc.steps);
            row.actor_loss = mean_of(acc.actor, acc.steps);
            row.density_loss = mean_of(acc.density, acc.density_steps);
            row.mean_priority = mean_of(acc.mean_p, acc.steps);
            row.max_priority = mean_of(acc.max_p, acc.steps);
            row.mean_ratio_lcb = mean_of(acc.ratio, acc.ratio_steps);
            row.mean_adv_lcb = mean_of(acc.adv, acc.steps);
            row.beta = last_beta;
            if (config.record_timing)
                row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            result.metrics.push_back(row);
            acc.clear();
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Ablation suite

std::vector<SuiteEntry> ablation_entries(const ExperimentConfig& base) {
    using replay::PriorityMode;
    std::vector<SuiteEntry> out;
    for (PriorityMode m : {PriorityMode::A3, PriorityMode::Uniform, PriorityMode::DensityOnly, PriorityMode::AdvOnly,
                           PriorityMode::TD, PriorityMode::TDDensity}) {
        ExperimentConfig c = base;
        c.mode = m;
        out.push_back({replay::to_string(m), c, false});
    }
    ExperimentConfig online = base;
    online.offline_path.clear();
    online.mode = PriorityMode::A3;
    out.push_back({"A3_PURE_ONLINE", online, true});
    online.mode = PriorityMode::Uniform;
    out.push_back({"SAC_PURE_ONLINE", online, true});
    return out;
}

std::string metrics_filename(const std::string& env, const std::string& label, std::uint64_t seed) {
    return env + "_" + label + "_" + std::to_string(seed) + ".csv";
}

std::vector<SuiteRunResult> run_ablation_suite(const ExperimentConfig& base, int seeds,
                                               const std::filesystem::path& out_dir,
                                               const env::OfflineDataset* offline) {
    if (seeds < 1) throw ConfigError("run_ablation_suite: seeds must be >= 1");
    require_valid(base);
    env::OfflineDataset loaded;
    if (offline == nullptr && !base.offline_path.empty()) {
        if (std::filesystem::exists(base.offline_path)) {
            loaded = env::load_dataset(base.offline_path);
            offline = &loaded;
        } else {
            log::warn("offline dataset '" + base.offline_path + "' not found; offline modes run purely online");
        }
    }
    std::filesystem::create_directories(out_dir);

    std::vector<SuiteRunResult> runs;
    for (int k = 0; k < seeds; ++k) {
        ExperimentConfig seeded = base;
        seeded.seed = base.seed + static_cast<std::uint64_t>(k);
        for (SuiteEntry& entry : ablation_entries(seeded)) {
            // The loaded dataset is passed explicitly so it is read only once.
            entry.config.offline_path.clear();
            TrainResult r = train(entry.config, entry.pure_online ? nullptr : offline);
            if (entry.pure_online && r.offline_reads != 0)
                throw NumericalError("purely online run read offline data");
            write_metrics_csv(out_dir / metrics_filename(base.env, entry.label, seeded.seed), r.metrics);
            runs.push_back({entry.label, seeded.seed, std::move(r.metrics)});
        }
    }
    write_summary_csv(out_dir / (base.env + "_summary.csv"), summarize(runs));
    return runs;
}

std::vector<SummaryRow> summarize(const std::vector<SuiteRunResult>& runs) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<const MetricsRow*>> finals;
    for (const auto& r : runs) {
        if (r.metrics.empty()) continue;
        if (!finals.contains(r.label)) order.push_back(r.label);
        finals[r.label].push_back(&r.metrics.back());
    }
    std::vector<SummaryRow> out;
    for (const auto& label : order) {
        const auto& rows = finals[label];
        const auto k = static_cast<double>(rows.size());
        SummaryRow s{.label = label, .seeds = rows.size()};
        for (const auto* m : rows) {
            s.return_mean += m->eval_return / k;
            s.success_mean += m->eval_success / k;
        }
        for (const auto* m : rows) {
            s.return_std += (m->eval_return - s.return_mean) * (m->eval_return - s.return_mean) / k;
            s.success_std += (m->eval_success - s.success_mean) * (m->eval_success - s.success_mean) / k;
        }
        s.return_std = std::sqrt(s.return_std);
        s.success_std = std::sqrt(s.success_std);
        out.push_back(s);
    }
    return out;
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << "mode,seeds,return_mean,return_std,success_mean,success_std\n";
    for (const auto& r : rows)
        out << r.label << ',' << r.seeds << ',' << fmt(r.return_mean) << ',' << fmt(r.return_std) << ','
            << fmt(r.success_mean) << ',' << fmt(r.success_std) << '\n';
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace a3rl::trainer
