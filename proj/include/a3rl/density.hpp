#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "a3rl/nn.hpp"
#include "a3rl/rng.hpp"
#include "a3rl/transition_batch.hpp"

namespace a3rl::density {

/// Generator of the Jensen-Shannon variational bound:
/// f(y) = y log(2y / (y + 1)) + log(2 / (y + 1)).
double f(double y);

/// f'(y) = log(2y / (y + 1)); strictly below log 2. Requires y > 0.
double f_prime(double y);

/// f*(f'(w)) = log((1 + w) / 2). Requires w > 0.
double f_conj_of_fprime(double w);

struct DensityConfig {
    int members = 5;
    int hidden = 256;
    int hidden_layers = 2;
    bool layer_norm = false;
    nn::AdamConfig adam{};
    double c_w = 1.0;       ///< LCB multiplier on the member spread
    double eps_w = 1e-6;    ///< floor on the ratio LCB
    bool sample_std = false; ///< false: population std across members
};

/// Ratio estimate aggregated over the ensemble.
struct RatioEstimate {
    double mean = 0.0;
    double uncertainty = 0.0;
    double lcb = 0.0;
};

/// N_e independent ratio networks w(s, a) > 0 (softplus head), each with its
/// own optimizer state and bootstrap stream.
class DensityEnsemble {
public:
    DensityEnsemble() = default;
    DensityEnsemble(int input_dim, DensityConfig config, std::uint64_t seed);

    const DensityConfig& config() const { return config_; }
    std::size_t size() const { return members_.size(); }
    int input_dim() const { return input_dim_; }

    std::vector<nn::DenseNet>& members() { return members_; }
    const std::vector<nn::DenseNet>& members() const { return members_; }
    std::vector<nn::AdamState>& optimizers() { return optimizers_; }
    std::vector<Rng>& streams() { return streams_; }

private:
    DensityConfig config_;
    int input_dim_ = 0;
    std::vector<nn::DenseNet> members_;
    std::vector<nn::AdamState> optimizers_;
    std::vector<Rng> streams_;
};

/// Network spec used for every ensemble member.
nn::NetSpec member_spec(int input_dim, const DensityConfig& config);

/// Negated JS lower bound, -(E_P[f'(w)] - E_Q[f*(f'(w))]), with P = online
/// rows and Q = offline rows (each row is concat(s, a)). Accumulates the
/// parameter gradient into `grads` when non-null. Throws on empty batches.
double dr_loss(const nn::DenseNet& member, const nn::Matrix& online, const nn::Matrix& offline,
               nn::GradBuffer* grads = nullptr);

/// One Adam step per member on a private half-subsample of the pool's online
/// and offline rows. Returns the mean member loss, or nullopt (with a logged
/// warning) when the pool holds only one source.
std::optional<double> update_ensemble(DensityEnsemble& ensemble, const CandidatePool& pool);

/// Member mean, spread and LCB = max(mean - c_w * spread, eps_w).
RatioEstimate aggregate(std::span<const double> member_outputs, double c_w, double eps_w, bool sample_std = false);

RatioEstimate predict_lcb(const DensityEnsemble& ensemble, std::span<const float> s, std::span<const float> a);

/// Row-wise predict_lcb over concat(s, a) rows.
std::vector<RatioEstimate> predict_lcb(const DensityEnsemble& ensemble, const nn::Matrix& state_actions);

}  // namespace a3rl::density
