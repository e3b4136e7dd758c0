#include "a3rl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "a3rl/error.hpp"
#include "a3rl/sampling.hpp"

namespace a3rl::agent {

namespace {

constexpr float kHalfLog2Pi = 0.918938533204672742f;

nn::NetSpec mlp(int in, int out, const AgentConfig& c, bool layer_norm, nn::HeadKind head) {
    nn::NetSpec spec;
    spec.widths.push_back(in);
    for (int l = 0; l < c.hidden_layers; ++l) spec.widths.push_back(c.hidden);
    spec.widths.push_back(out);
    spec.layer_norm = layer_norm;
    spec.head = head;
    return spec;
}

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw NumericalError(std::string(what) + " is not finite");
}

}  // namespace

nn::NetSpec critic_spec(const AgentConfig& c) {
    return mlp(c.state_dim + c.action_dim, 1, c, c.critic_layer_norm, nn::HeadKind::Linear);
}

nn::NetSpec actor_spec(const AgentConfig& c) {
    return mlp(c.state_dim, 2 * c.action_dim, c, c.actor_layer_norm, nn::HeadKind::GaussianMeanLogStd);
}

Agent::Agent(AgentConfig config, std::uint64_t seed) : config_(config), alpha_(config.alpha) {
    if (config_.ensemble_size < 2) throw ConfigError("critic ensemble needs E >= 2");
    if (config_.target_subset < 1 || config_.target_subset > 2 || config_.target_subset > config_.ensemble_size)
        throw ConfigError("target subset Z must be 1 or 2 and at most E");
    if (!(config_.tau_ema > 0.0f && config_.tau_ema < 1.0f)) throw ConfigError("tau_ema must lie in (0, 1)");
    if (config_.mc_samples < 2) throw ConfigError("advantage estimation needs M >= 2");

    const Rng root(seed);
    const nn::NetSpec cspec = critic_spec(config_);
    for (int i = 0; i < config_.ensemble_size; ++i) {
        Rng init = root.split(static_cast<std::uint64_t>(i));
        critics.push_back(nn::DenseNet::initialized(cspec, init.next_u64()));
        critic_opt.emplace_back(critics.back().param_count(), config_.adam);
    }
    targets = critics;
    Rng actor_init = root.split(1000);
    actor = nn::DenseNet::initialized(actor_spec(config_), actor_init.next_u64());
    actor_opt = nn::AdamState(actor.param_count(), config_.adam);
    log_alpha = static_cast<float>(std::log(alpha_));
    alpha_opt = nn::AdamState(1, config_.adam);
}

nn::Matrix draw_noise(std::size_t rows, std::size_t cols, Rng& rng) {
    nn::Matrix noise(rows, cols);
    for (auto& v : noise.values()) v = static_cast<float>(rng.normal());
    return noise;
}

ActorSample sample_actions(const nn::DenseNet& actor, const nn::Matrix& states, const nn::Matrix& noise,
                           bool keep_tape) {
    ActorSample out;
    out.head = actor.forward(states, keep_tape ? &out.tape : nullptr);
    const std::size_t d = out.head.cols() / 2;
    if (noise.rows() != states.rows() || noise.cols() != d) throw DimensionError("sample_actions: noise shape");
    out.actions = nn::Matrix(states.rows(), d);
    out.log_pi.assign(states.rows(), 0.0f);
    for (std::size_t r = 0; r < states.rows(); ++r) {
        float lp = 0.0f;
        for (std::size_t k = 0; k < d; ++k) {
            const float mean = out.head(r, k);
            const float log_std = out.head(r, d + k);
            const float z = noise(r, k);
            const float a = std::tanh(mean + std::exp(log_std) * z);
            out.actions(r, k) = a;
            lp += -0.5f * z * z - log_std - kHalfLog2Pi - std::log(1.0f - a * a + kTanhEps);
        }
        out.log_pi[r] = lp;
    }
    if (!nn::all_finite(out.log_pi)) throw NumericalError("sample_actions: non-finite log-probability");
    return out;
}

ActionSample sample_action(const nn::DenseNet& actor, std::span<const float> state, Rng& rng) {
    const std::size_t d = static_cast<std::size_t>(actor.spec().output_dim() / 2);
    const nn::Matrix noise = draw_noise(1, d, rng);
    ActorSample s = sample_actions(actor, nn::Matrix::from_row(state), noise);
    return {s.actions.values(), s.log_pi[0]};
}

std::vector<float> mean_action(const nn::DenseNet& actor, std::span<const float> state) {
    const std::vector<float> head = nn::forward(actor, state);
    std::vector<float> a(head.size() / 2);
    for (std::size_t k = 0; k < a.size(); ++k) a[k] = std::tanh(head[k]);
    return a;
}

double squashed_log_density(std::span<const float> mean, std::span<const float> log_std, std::span<const float> a) {
    double lp = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double ak = a[k];
        const double sigma = std::exp(static_cast<double>(log_std[k]));
        const double z = (std::atanh(ak) - mean[k]) / sigma;
        lp += -0.5 * z * z - log_std[k] - 0.5 * std::log(2.0 * M_PI) - std::log(1.0 - ak * ak + kTanhEps);
    }
    return lp;
}

std::vector<int> draw_target_subset(int ensemble_size, int subset, Rng& rng) {
    const auto picks = sample_without_replacement(static_cast<std::size_t>(ensemble_size),
                                                  static_cast<std::size_t>(subset), rng);
    return {picks.begin(), picks.end()};
}

std::vector<float> cdq_target(const Agent& agent, const TransitionBatch& batch, std::span<const int> subset,
                              const nn::Matrix& next_noise) {
    if (subset.empty()) throw ConfigError("cdq_target: empty critic subset");
    const auto& c = agent.config();
    const ActorSample next = sample_actions(agent.actor, batch.next_states, next_noise);
    const nn::Matrix sa_next = nn::hconcat(batch.next_states, next.actions);

    std::vector<float> qmin(batch.size(), std::numeric_limits<float>::infinity());
    for (int i : subset) {
        const nn::Matrix q = agent.targets.at(static_cast<std::size_t>(i)).forward(sa_next);
        for (std::size_t r = 0; r < batch.size(); ++r) qmin[r] = std::min(qmin[r], q(r, 0));
    }
    const auto gamma = static_cast<float>(c.gamma);
    const auto alpha = static_cast<float>(agent.alpha());
    const float sign = c.entropy_sign_plus ? 1.0f : -1.0f;
    std::vector<float> y(batch.size());
    for (std::size_t r = 0; r < batch.size(); ++r) {
        const float not_done = batch.dones[r] ? 0.0f : 1.0f;
        y[r] = batch.rewards[r] + gamma * not_done * (qmin[r] + sign * alpha * next.log_pi[r]);
    }
    if (!nn::all_finite(y)) throw NumericalError("cdq_target: non-finite target");
    return y;
}

std::vector<float> cdq_target(const Agent& agent, const TransitionBatch& batch, std::span<const int> subset,
                              Rng& rng) {
    const nn::Matrix noise = draw_noise(batch.size(), static_cast<std::size_t>(agent.config().action_dim), rng);
    return cdq_target(agent, batch, subset, noise);
}

double critic_loss(const nn::DenseNet& critic, const nn::Matrix& state_actions, std::span<const float> y,
                   std::span<const float> weights, nn::GradBuffer* grads) {
    const std::size_t b = state_actions.rows();
    if (y.size() != b || weights.size() != b) throw DimensionError("critic_loss: target/weight length mismatch");
    nn::Tape tape;
    const nn::Matrix q = critic.forward(state_actions, grads ? &tape : nullptr);
    const float inv_b = 1.0f / static_cast<float>(b);
    double loss = 0.0;
    nn::Matrix upstream(b, 1);
    for (std::size_t r = 0; r < b; ++r) {
        const float diff = y[r] - q(r, 0);
        loss += static_cast<double>(weights[r]) * static_cast<double>(diff) * static_cast<double>(diff);
        upstream(r, 0) = -2.0f * weights[r] * diff * inv_b;
    }
    loss /= static_cast<double>(b);
    require_finite(loss, "critic loss");
    if (grads) critic.backward(tape, upstream, *grads);
    return loss;
}

double critic_update(Agent& agent, const TransitionBatch& batch, std::span<const float> y,
                     std::span<const float> weights) {
    const nn::Matrix sa = batch.state_actions();
    double total = 0.0;
    for (std::size_t i = 0; i < agent.critics.size(); ++i) {
        auto& critic = agent.critics[i];
        nn::GradBuffer grads = critic.zero_grads();
        total += critic_loss(critic, sa, y, weights, &grads);
        nn::adam_step(critic.params(), grads, agent.critic_opt[i]);
    }
    return total / static_cast<double>(agent.critics.size());
}

double actor_loss(const Agent& agent, const nn::Matrix& states, const nn::Matrix& noise, nn::GradBuffer* grads,
                  std::vector<float>* log_pi_out) {
    const std::size_t b = states.rows();
    const std::size_t sd = states.cols();
    const ActorSample sample = sample_actions(agent.actor, states, noise, grads != nullptr);
    const std::size_t d = sample.actions.cols();
    const nn::Matrix sa = nn::hconcat(states, sample.actions);
    const auto e = static_cast<float>(agent.critics.size());
    const auto alpha = static_cast<float>(agent.alpha());

    std::vector<double> q_sum(b, 0.0);
    nn::Matrix d_action(b, d);
    const nn::Matrix q_up(b, 1, -1.0f / (e * static_cast<float>(b)));
    for (const auto& critic : agent.critics) {
        nn::Tape tape;
        const nn::Matrix q = critic.forward(sa, grads ? &tape : nullptr);
        for (std::size_t r = 0; r < b; ++r) q_sum[r] += q(r, 0);
        if (!grads) continue;
        nn::GradBuffer scratch = critic.zero_grads();
        const nn::Matrix d_in = critic.backward(tape, q_up, scratch);
        for (std::size_t r = 0; r < b; ++r)
            for (std::size_t k = 0; k < d; ++k) d_action(r, k) += d_in(r, sd + k);
    }

    double loss = 0.0;
    for (std::size_t r = 0; r < b; ++r)
        loss += static_cast<double>(alpha) * sample.log_pi[r] - q_sum[r] / static_cast<double>(e);
    loss /= static_cast<double>(b);
    require_finite(loss, "actor loss");
    if (log_pi_out) *log_pi_out = sample.log_pi;

    if (grads) {
        const float alpha_b = alpha / static_cast<float>(b);
        nn::Matrix upstream(b, 2 * d);
        for (std::size_t r = 0; r < b; ++r) {
            for (std::size_t k = 0; k < d; ++k) {
                const float a = sample.actions(r, k);
                const float one_minus = 1.0f - a * a;
                const float da = d_action(r, k) + alpha_b * (2.0f * a / (one_minus + kTanhEps));
                const float du = da * one_minus;
                const float sigma = std::exp(sample.head(r, d + k));
                upstream(r, k) = du;
                upstream(r, d + k) = du * sigma * noise(r, k) - alpha_b;
            }
        }
        agent.actor.backward(sample.tape, upstream, *grads);
    }
    return loss;
}

double actor_update(Agent& agent, const nn::Matrix& states, const nn::Matrix& noise) {
    nn::GradBuffer grads = agent.actor.zero_grads();
    std::vector<float> log_pi;
    const double loss = actor_loss(agent, states, noise, &grads, &log_pi);
    nn::adam_step(agent.actor.params(), grads, agent.actor_opt);

    if (agent.config().auto_alpha) {
        const double target_entropy = -static_cast<double>(agent.config().action_dim);
        double mean_lp = 0.0;
        for (float lp : log_pi) mean_lp += lp;
        mean_lp /= static_cast<double>(log_pi.size());
        // d/d(log alpha) of -alpha * (log pi + target entropy)
        const float g = static_cast<float>(-std::exp(static_cast<double>(agent.log_alpha)) * (mean_lp + target_entropy));
        std::span<float> la(&agent.log_alpha, 1);
        nn::adam_step(la, std::span<const float>(&g, 1), agent.alpha_opt);
        agent.set_alpha(std::exp(static_cast<double>(agent.log_alpha)));
    }
    return loss;
}

double actor_update(Agent& agent, const TransitionBatch& batch, Rng& rng) {
    const nn::Matrix noise = draw_noise(batch.size(), static_cast<std::size_t>(agent.config().action_dim), rng);
    return actor_update(agent, batch.states, noise);
}

void target_ema(Agent& agent, float tau) {
    if (!(tau > 0.0f && tau <= 1.0f)) throw ConfigError("target_ema: tau must lie in (0, 1]");
    for (std::size_t i = 0; i < agent.critics.size(); ++i)
        nn::polyak_average(agent.targets[i].params(), agent.critics[i].params(), tau);
}

std::vector<double> pessimistic_q(const Agent& agent, const nn::Matrix& state_actions) {
    const nn::Matrix q0 = agent.critics.at(0).forward(state_actions);
    const nn::Matrix q1 = agent.critics.at(1).forward(state_actions);
    std::vector<double> out(state_actions.rows());
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = std::min(q0(r, 0), q1(r, 0));
    return out;
}

std::vector<AdvantageEstimate> estimate_advantage_lcb(const Agent& agent, const nn::Matrix& states,
                                                      const nn::Matrix& actions, const nn::Matrix& noise,
                                                      int samples) {
    if (samples < 2) throw ConfigError("estimate_advantage_lcb: need M >= 2 samples");
    const std::size_t n = states.rows();
    const auto m = static_cast<std::size_t>(samples);
    if (noise.rows() != n * m) throw DimensionError("estimate_advantage_lcb: noise must have rows * M rows");

    nn::Matrix repeated(0, states.cols());
    repeated.reserve_rows(n * m);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < m; ++j) repeated.append_row(states.row(r));

    const ActorSample pi = sample_actions(agent.actor, repeated, noise);
    const std::vector<double> q_pi = pessimistic_q(agent, nn::hconcat(repeated, pi.actions));
    const std::vector<double> q_sa = pessimistic_q(agent, nn::hconcat(states, actions));
    const double alpha = agent.alpha();
    const double c = agent.config().c_adv;

    std::vector<AdvantageEstimate> out(n);
    std::vector<double> v(m);
    for (std::size_t r = 0; r < n; ++r) {
        double mean = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            v[j] = q_pi[r * m + j] - alpha * pi.log_pi[r * m + j];
            mean += v[j];
        }
        mean /= static_cast<double>(m);
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        double spread = std::sqrt(ss / static_cast<double>(m - 1));
        if (agent.config().adv_std_error) spread /= std::sqrt(static_cast<double>(m));

        auto& est = out[r];
        est.q = q_sa[r];
        est.value = mean;
        est.advantage = q_sa[r] - mean;
        est.uncertainty = spread;
        est.lcb = est.advantage - c * spread;
        if (!std::isfinite(est.lcb)) throw NumericalError("estimate_advantage_lcb: non-finite advantage");
    }
    return out;
}

std::vector<AdvantageEstimate> estimate_advantage_lcb(const Agent& agent, const nn::Matrix& states,
                                                      const nn::Matrix& actions, int samples, Rng& rng) {
    if (samples < 2) throw ConfigError("estimate_advantage_lcb: need M >= 2 samples");
    const nn::Matrix noise = draw_noise(states.rows() * static_cast<std::size_t>(samples),
                                        static_cast<std::size_t>(agent.config().action_dim), rng);
    return estimate_advantage_lcb(agent, states, actions, noise, samples);
}

AdvantageEstimate estimate_advantage_lcb(const Agent& agent, std::span<const float> s, std::span<const float> a,
                                         int samples, Rng& rng) {
    return estimate_advantage_lcb(agent, nn::Matrix::from_row(s), nn::Matrix::from_row(a), samples, rng).front();
}

}  // namespace a3rl::agent
