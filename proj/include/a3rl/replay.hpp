#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "a3rl/agent.hpp"
#include "a3rl/density.hpp"
#include "a3rl/env.hpp"
#include "a3rl/rng.hpp"
#include "a3rl/transition_batch.hpp"

namespace a3rl::replay {

/// Fixed-capacity ring of online transitions; the oldest entry is overwritten
/// once full.
class OnlineBuffer {
public:
    OnlineBuffer(std::size_t capacity, int state_dim, int action_dim);

    /// Throws ConfigError for non-online transitions, DimensionError for
    /// mismatched dims.
    void push(const env::Transition& t);

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return size_ == 0; }

    /// i-th oldest stored transition, 0 <= i < size().
    env::Transition at(std::size_t i) const;

    /// Appends slot `i` (oldest-first order) to `out`.
    void copy_to(std::size_t i, TransitionBatch& out) const;

private:
    std::size_t slot(std::size_t i) const { return (start_ + i) % capacity_; }

    std::size_t capacity_;
    int state_dim_;
    int action_dim_;
    std::size_t start_ = 0;
    std::size_t size_ = 0;
    nn::Matrix states_, actions_, next_states_;
    std::vector<float> rewards_;
    std::vector<std::uint8_t> dones_;
};

/// N/2 uniform draws from each source, without replacement (with replacement
/// when a source holds fewer than N/2 rows). A null or empty offline dataset
/// means purely online: all N rows come from the online buffer.
CandidatePool form_pool(const OnlineBuffer& online, const env::OfflineDataset* offline, std::size_t pool_size,
                        Rng& rng);

enum class PriorityMode { A3, Uniform, DensityOnly, AdvOnly, TD, TDDensity };

std::string to_string(PriorityMode mode);
PriorityMode mode_from_string(const std::string& name);
std::vector<std::string> mode_names();

/// Whether the mode reads the density ensemble / advantage / TD error.
bool uses_density(PriorityMode mode);
bool uses_advantage(PriorityMode mode);
bool uses_td(PriorityMode mode);

inline constexpr double kExpClip = 20.0;
inline constexpr double kTdFloor = 1e-3;

struct PriorityParams {
    PriorityMode mode = PriorityMode::A3;
    double xi = 0.03;    ///< advantage temperature
    double rho = 0.3;    ///< exponent applied to every priority
    int mc_samples = 10; ///< M for the advantage value estimate
};

/// Priorities and normalized sampling probabilities over one pool.
struct PrioritySet {
    std::vector<double> sigma;
    std::vector<double> probs;
    std::vector<double> cdf;  ///< running sums of probs, last entry == 1 up to rounding
    double rho = 0.3;
    double xi = 0.03;

    // Per-row terms that produced sigma (zero when the mode does not use them).
    std::vector<double> ratio_lcb;
    std::vector<double> adv_lcb;
    std::vector<double> td_error;

    std::size_t size() const { return sigma.size(); }
};

/// (w_lcb if offline else 1) * exp(clip(xi * adv_lcb, -20, 20)).
double a3_priority(bool offline, double ratio_lcb, double adv_lcb, double xi);

/// p_i = sigma_i^rho / sum_k sigma_k^rho, plus the cumulative table.
PrioritySet make_priority_set(std::vector<double> sigma, double rho, double xi = 0.0);

/// Priorities for every pool row under `params.mode`. `density` may be null
/// for modes that do not use it, and is ignored for pools without offline
/// rows. Throws NumericalError naming the first non-finite row.
PrioritySet compute_priorities(const CandidatePool& pool, const agent::Agent& agent,
                               const density::DensityEnsemble* density, const PriorityParams& params, Rng& rng);

/// `count` independent categorical draws (with replacement) by inverse CDF.
std::vector<std::size_t> sample_batch(const PrioritySet& ps, std::size_t count, Rng& rng);

/// u_i = (1 / (N p_i))^beta, divided by the largest value among the drawn rows.
std::vector<float> importance_weights(const PrioritySet& ps, std::span<const std::size_t> drawn, double beta);

/// Linear schedule beta0 -> 1 over [0, total_steps].
double anneal_beta(std::size_t step, std::size_t total_steps, double beta0);

}  // namespace a3rl::replay
