#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace a3rl::theory {

/// Bandit with online data d_on(a) ∝ exp(beta1 r(a)) and next policy
/// pi(a) ∝ exp(beta2 r(a)), beta2 > beta1 > 0.
struct SoftmaxBandit {
    std::vector<double> rewards;
    double beta1 = 1.0;
    double beta2 = 2.0;

    /// Throws ConfigError unless K >= 2, rewards finite and beta2 > beta1 > 0.
    void validate() const;
    std::vector<double> online_distribution() const;
    std::vector<double> policy_distribution() const;
};

/// Numerically stable softmax of beta * r.
std::vector<double> softmax(std::span<const double> r, double beta);

/// Distribution-shift coefficient
/// R(a; xi) = (pi(a) / d(a))^(1 - xi) * sum_a' d(a') pi(a')^xi / d(a)^xi,
/// for 0 <= xi < 1.
double bandit_R(const SoftmaxBandit& bandit, std::size_t arm, double xi);

struct SupR {
    double value = 0.0;
    std::size_t arm = 0;
};

SupR sup_R(const SoftmaxBandit& bandit, double xi);

/// Upper end of the interval on which sup_a R decreases: 1 - beta1 / beta2.
double xi_upper(const SoftmaxBandit& bandit);

/// `points` evenly spaced values strictly inside (0, xi_upper).
std::vector<double> interior_grid(const SoftmaxBandit& bandit, std::size_t points);

struct Lemma1Report {
    std::vector<double> xi;
    std::vector<double> sup_r;
    std::vector<std::size_t> argmax;
    bool constant_rewards = false;
    /// Strictly decreasing for non-constant rewards; non-increasing (flat)
    /// for constant rewards.
    bool holds = false;
};

/// Evaluates sup_a R along the grid. Throws ConfigError when beta2 <= beta1
/// or a grid point leaves (0, 1 - beta1 / beta2).
Lemma1Report check_lemma1(const SoftmaxBandit& bandit, std::span<const double> xi_grid);

struct Lemma1Sweep {
    std::size_t instances = 0;
    std::size_t failures = 0;
    std::size_t argmax_mismatches = 0;  ///< sup not attained at argmax r
};

/// Randomized instances (K in [2, 8], rewards in [0, 1], beta1 in [0.2, 3],
/// beta2 / beta1 in [1.2, 5]) checked on `points`-point interior grids.
Lemma1Sweep run_lemma1_sweep(std::size_t instances, std::size_t points, std::uint64_t seed);

/// Enumerable state-action table for the priority identity.
struct TabularCase {
    std::size_t num_states = 1;
    std::size_t num_actions = 1;
    std::vector<double> mu;    ///< sampling distribution of the batch, row-major [s][a]
    std::vector<double> d_on;  ///< online distribution
    std::vector<double> q;     ///< exact Q table
    double alpha = 1.0;        ///< softmax temperature of pi_hat ∝ exp(Q / alpha)
    double xi = 0.03;
};

struct IdentityResult {
    std::vector<double> advantage;   ///< Q - alpha log sum exp(Q / alpha)
    std::vector<double> reweighted;  ///< normalized mu * sigma
    std::vector<double> target;      ///< normalized d_on * pi_hat^(xi alpha)
    double max_deviation = 0.0;
};

/// With sigma = exp(xi A) d_on / mu, checks that mu * sigma is proportional to
/// d_on * pi_hat^(xi alpha) (pi_hat^xi when alpha = 1). Throws ConfigError on
/// zero mu cells or inconsistent table sizes.
IdentityResult check_priority_identity(const TabularCase& c);

/// CSV with one row per grid point:
/// beta1,beta2,rewards,xi,sup_r,argmax,pass
void write_lemma1_report(const std::filesystem::path& path, const SoftmaxBandit& bandit, const Lemma1Report& report);

}  // namespace a3rl::theory
