#include "a3rl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "a3rl/error.hpp"
#include "a3rl/rng.hpp"

namespace a3rl::theory {

void SoftmaxBandit::validate() const {
    if (rewards.size() < 2) throw ConfigError("softmax bandit needs at least two arms");
    for (double r : rewards)
        if (!std::isfinite(r)) throw ConfigError("softmax bandit rewards must be finite");
    if (!(beta1 > 0.0)) throw ConfigError("beta1 must be positive");
    if (!(beta2 > beta1)) throw ConfigError("beta2 must exceed beta1");
}

std::vector<double> softmax(std::span<const double> r, double beta) {
    const double top = *std::max_element(r.begin(), r.end());
    std::vector<double> p(r.size());
    double z = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        p[i] = std::exp(beta * (r[i] - top));
        z += p[i];
    }
    for (double& x : p) x /= z;
    return p;
}

std::vector<double> SoftmaxBandit::online_distribution() const { return softmax(rewards, beta1); }
std::vector<double> SoftmaxBandit::policy_distribution() const { return softmax(rewards, beta2); }

double bandit_R(const SoftmaxBandit& bandit, std::size_t arm, double xi) {
    if (!(xi >= 0.0 && xi < 1.0)) throw ConfigError("bandit_R: xi must lie in [0, 1)");
    if (arm >= bandit.rewards.size()) throw ConfigError("bandit_R: arm out of range");
    const auto d = bandit.online_distribution();
    const auto pi = bandit.policy_distribution();
    double mass = 0.0;
    for (std::size_t k = 0; k < d.size(); ++k) mass += d[k] * std::pow(pi[k], xi);
    return std::pow(pi[arm] / d[arm], 1.0 - xi) * mass / std::pow(d[arm], xi);
}

SupR sup_R(const SoftmaxBandit& bandit, double xi) {
    SupR best{-1.0, 0};
    for (std::size_t a = 0; a < bandit.rewards.size(); ++a) {
        const double v = bandit_R(bandit, a, xi);
        if (v > best.value) best = {v, a};
    }
    return best;
}

double xi_upper(const SoftmaxBandit& bandit) { return 1.0 - bandit.beta1 / bandit.beta2; }

std::vector<double> interior_grid(const SoftmaxBandit& bandit, std::size_t points) {
    const double hi = xi_upper(bandit);
    std::vector<double> grid(points);
    for (std::size_t k = 0; k < points; ++k)
        grid[k] = hi * static_cast<double>(k + 1) / static_cast<double>(points + 1);
    return grid;
}

Lemma1Report check_lemma1(const SoftmaxBandit& bandit, std::span<const double> xi_grid) {
    bandit.validate();
    const double hi = xi_upper(bandit);
    for (double xi : xi_grid)
        if (!(xi > 0.0 && xi < hi)) {
            std::ostringstream msg;
            msg << "xi = " << xi << " is outside (0, " << hi << ")";
            throw ConfigError(msg.str());
        }

    Lemma1Report report;
    const auto [lo_it, hi_it] = std::minmax_element(bandit.rewards.begin(), bandit.rewards.end());
    report.constant_rewards = *lo_it == *hi_it;
    for (double xi : xi_grid) {
        const SupR s = sup_R(bandit, xi);
        report.xi.push_back(xi);
        report.sup_r.push_back(s.value);
        report.argmax.push_back(s.arm);
    }
    report.holds = true;
    for (std::size_t k = 1; k < report.sup_r.size(); ++k) {
        const bool ok = report.constant_rewards ? report.sup_r[k] <= report.sup_r[k - 1] + 1e-12
                                                : report.sup_r[k] < report.sup_r[k - 1];
        report.holds = report.holds && ok;
    }
    return report;
}

Lemma1Sweep run_lemma1_sweep(std::size_t instances, std::size_t points, std::uint64_t seed) {
    Rng rng(seed);
    Lemma1Sweep sweep;
    for (std::size_t n = 0; n < instances; ++n) {
        SoftmaxBandit b;
        const std::size_t k = 2 + static_cast<std::size_t>(rng.below(7));
        b.rewards.resize(k);
        for (double& r : b.rewards) r = rng.uniform01();
        b.beta1 = rng.uniform(0.2, 3.0);
        b.beta2 = b.beta1 * rng.uniform(1.2, 5.0);
        const auto grid = interior_grid(b, points);
        const Lemma1Report report = check_lemma1(b, grid);
        ++sweep.instances;
        if (!report.holds) ++sweep.failures;
        const auto best = static_cast<std::size_t>(std::max_element(b.rewards.begin(), b.rewards.end()) -
                                                   b.rewards.begin());
        for (std::size_t a : report.argmax)
            if (a != best) {
                ++sweep.argmax_mismatches;
                break;
            }
    }
    return sweep;
}

IdentityResult check_priority_identity(const TabularCase& c) {
    const std::size_t cells = c.num_states * c.num_actions;
    if (cells == 0 || c.mu.size() != cells || c.d_on.size() != cells || c.q.size() != cells)
        throw ConfigError("check_priority_identity: tables must all have num_states * num_actions entries");
    if (!(c.alpha > 0.0)) throw ConfigError("check_priority_identity: alpha must be positive");
    for (double m : c.mu)
        if (!(m > 0.0)) throw ConfigError("check_priority_identity: mu has a zero-probability cell");

    IdentityResult res;
    res.advantage.resize(cells);
    std::vector<double> pi_hat(cells);
    for (std::size_t s = 0; s < c.num_states; ++s) {
        const double* q = &c.q[s * c.num_actions];
        const double top = *std::max_element(q, q + c.num_actions) / c.alpha;
        double z = 0.0;
        for (std::size_t a = 0; a < c.num_actions; ++a) z += std::exp(q[a] / c.alpha - top);
        const double log_partition = c.alpha * (top + std::log(z));
        for (std::size_t a = 0; a < c.num_actions; ++a) {
            const std::size_t i = s * c.num_actions + a;
            res.advantage[i] = q[a] - log_partition;
            pi_hat[i] = std::exp(res.advantage[i] / c.alpha);
        }
    }

    res.reweighted.resize(cells);
    res.target.resize(cells);
    double z1 = 0.0, z2 = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
        const double sigma = std::exp(c.xi * res.advantage[i]) * c.d_on[i] / c.mu[i];
        res.reweighted[i] = c.mu[i] * sigma;
        res.target[i] = c.d_on[i] * std::pow(pi_hat[i], c.xi * c.alpha);
        z1 += res.reweighted[i];
        z2 += res.target[i];
    }
    for (std::size_t i = 0; i < cells; ++i) {
        res.reweighted[i] /= z1;
        res.target[i] /= z2;
        res.max_deviation = std::max(res.max_deviation, std::abs(res.reweighted[i] - res.target[i]));
    }
    return res;
}

void write_lemma1_report(const std::filesystem::path& path, const SoftmaxBandit& bandit, const Lemma1Report& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    std::ostringstream rewards;
    rewards << std::setprecision(17);
    for (std::size_t k = 0; k < bandit.rewards.size(); ++k) rewards << (k ? ";" : "") << bandit.rewards[k];
    out << "beta1,beta2,rewards,xi,sup_r,argmax,pass\n";
    out << std::setprecision(17);
    for (std::size_t k = 0; k < report.xi.size(); ++k)
        out << bandit.beta1 << ',' << bandit.beta2 << ',' << rewards.str() << ',' << report.xi[k] << ','
            << report.sup_r[k] << ',' << report.argmax[k] << ',' << (report.holds ? 1 : 0) << '\n';
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace a3rl::theory
