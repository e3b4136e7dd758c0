#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "a3rl/nn.hpp"
#include "a3rl/rng.hpp"
#include "a3rl/transition_batch.hpp"

namespace a3rl::agent {

struct AgentConfig {
    int state_dim = 4;
    int action_dim = 2;
    int hidden = 256;
    int hidden_layers = 2;
    int ensemble_size = 10;  ///< E critics
    int target_subset = 2;   ///< Z critics in the target min, 1 or 2
    bool critic_layer_norm = true;
    bool actor_layer_norm = false;
    double gamma = 0.99;
    double alpha = 0.1;
    float tau_ema = 0.995;   ///< weight kept on the old target parameters
    nn::AdamConfig adam{};

    /// Reproduces the "+ alpha log pi" target as printed in some write-ups of
    /// the algorithm; the max-entropy backup uses the minus sign (default).
    bool entropy_sign_plus = false;

    /// Optional temperature tuning toward target entropy -action_dim.
    bool auto_alpha = false;

    int mc_samples = 10;     ///< M on-policy samples for the soft value
    double c_adv = 1.0;      ///< LCB multiplier for the advantage
    bool adv_std_error = true; ///< spread = sample std / sqrt(M); false: sample std
};

/// Critic ensemble with EMA targets and a tanh-squashed Gaussian actor.
class Agent {
public:
    Agent() = default;
    Agent(AgentConfig config, std::uint64_t seed);

    const AgentConfig& config() const { return config_; }
    double alpha() const { return alpha_; }
    void set_alpha(double alpha) { alpha_ = alpha; }

    std::vector<nn::DenseNet> critics;
    std::vector<nn::DenseNet> targets;
    std::vector<nn::AdamState> critic_opt;
    nn::DenseNet actor;
    nn::AdamState actor_opt;
    float log_alpha = 0.0f;
    nn::AdamState alpha_opt;

private:
    AgentConfig config_;
    double alpha_ = 0.1;
};

nn::NetSpec critic_spec(const AgentConfig& config);
nn::NetSpec actor_spec(const AgentConfig& config);

inline constexpr float kTanhEps = 1e-6f;

/// Reparameterized actor samples for a batch of states.
struct ActorSample {
    nn::Matrix actions;      ///< tanh(mean + std * noise)
    std::vector<float> log_pi;
    nn::Matrix head;         ///< actor output: [mean | log_std]
    nn::Tape tape;
};

/// Samples with caller-provided standard-normal noise (rows x action_dim).
ActorSample sample_actions(const nn::DenseNet& actor, const nn::Matrix& states, const nn::Matrix& noise,
                           bool keep_tape = false);

/// Standard-normal noise matrix drawn row-major from `rng`.
nn::Matrix draw_noise(std::size_t rows, std::size_t cols, Rng& rng);

struct ActionSample {
    std::vector<float> action;
    float log_pi = 0.0f;
};

ActionSample sample_action(const nn::DenseNet& actor, std::span<const float> state, Rng& rng);

/// tanh(mean): the deterministic action used for evaluation.
std::vector<float> mean_action(const nn::DenseNet& actor, std::span<const float> state);

/// Log-density of the squashed Gaussian at action `a` in (-1, 1)^d, with the
/// same tanh correction term as the sampler.
double squashed_log_density(std::span<const float> mean, std::span<const float> log_std, std::span<const float> a);

/// Z distinct critic indices out of E.
std::vector<int> draw_target_subset(int ensemble_size, int subset, Rng& rng);

/// y = r + gamma (1 - done) (min_{i in subset} Q'_i(s', a') - alpha log pi(a'|s')),
/// a' ~ pi(.|s') with the given noise.
std::vector<float> cdq_target(const Agent& agent, const TransitionBatch& batch, std::span<const int> subset,
                              const nn::Matrix& next_noise);
std::vector<float> cdq_target(const Agent& agent, const TransitionBatch& batch, std::span<const int> subset,
                              Rng& rng);

/// Weighted mean squared error (1/B) sum_b u_b (y_b - Q(s_b, a_b))^2.
double critic_loss(const nn::DenseNet& critic, const nn::Matrix& state_actions, std::span<const float> y,
                   std::span<const float> weights, nn::GradBuffer* grads = nullptr);

/// One Adam step for every critic on its own weighted loss against the shared
/// targets. Returns the mean loss over critics.
double critic_update(Agent& agent, const TransitionBatch& batch, std::span<const float> y,
                     std::span<const float> weights);

/// (1/B) sum_b [alpha log pi(a_b|s_b) - (1/E) sum_i Q_i(s_b, a_b)], a_b from
/// the frozen noise. Accumulates the actor gradient when `grads` is non-null.
double actor_loss(const Agent& agent, const nn::Matrix& states, const nn::Matrix& noise,
                  nn::GradBuffer* grads = nullptr, std::vector<float>* log_pi_out = nullptr);

/// One Adam step on actor_loss with fresh noise from `rng`. No importance
/// weights. Also steps the temperature when auto_alpha is enabled.
double actor_update(Agent& agent, const TransitionBatch& batch, Rng& rng);
double actor_update(Agent& agent, const nn::Matrix& states, const nn::Matrix& noise);

/// targets <- tau * targets + (1 - tau) * critics for every member.
void target_ema(Agent& agent, float tau);

struct AdvantageEstimate {
    double advantage = 0.0;    ///< Q(s,a) - V(s)
    double uncertainty = 0.0;  ///< spread of the Monte-Carlo soft value
    double lcb = 0.0;          ///< advantage - c * uncertainty
    double q = 0.0;
    double value = 0.0;
};

/// Pessimistic Q(s, a) = min(Q_0, Q_1) of the current critics.
std::vector<double> pessimistic_q(const Agent& agent, const nn::Matrix& state_actions);

/// Advantage LCB for every row, using M on-policy actions per state.
/// `noise` has rows * M rows: sample j of row r sits at r * M + j.
std::vector<AdvantageEstimate> estimate_advantage_lcb(const Agent& agent, const nn::Matrix& states,
                                                      const nn::Matrix& actions, const nn::Matrix& noise, int samples);
std::vector<AdvantageEstimate> estimate_advantage_lcb(const Agent& agent, const nn::Matrix& states,
                                                      const nn::Matrix& actions, int samples, Rng& rng);
AdvantageEstimate estimate_advantage_lcb(const Agent& agent, std::span<const float> s, std::span<const float> a,
                                         int samples, Rng& rng);

}  // namespace a3rl::agent
