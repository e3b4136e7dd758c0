#include "a3rl/replay.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "a3rl/error.hpp"
#include "a3rl/sampling.hpp"

namespace a3rl::replay {

OnlineBuffer::OnlineBuffer(std::size_t capacity, int state_dim, int action_dim)
    : capacity_(capacity),
      state_dim_(state_dim),
      action_dim_(action_dim),
      states_(capacity, static_cast<std::size_t>(state_dim)),
      actions_(capacity, static_cast<std::size_t>(action_dim)),
      next_states_(capacity, static_cast<std::size_t>(state_dim)),
      rewards_(capacity),
      dones_(capacity) {
    if (capacity == 0) throw ConfigError("OnlineBuffer: capacity must be positive");
}

void OnlineBuffer::push(const env::Transition& t) {
    if (t.source != env::Source::Online) throw ConfigError("OnlineBuffer::push: transition is not tagged ONLINE");
    if (static_cast<int>(t.s.size()) != state_dim_ || static_cast<int>(t.s_next.size()) != state_dim_ ||
        static_cast<int>(t.a.size()) != action_dim_)
        throw DimensionError("OnlineBuffer::push: transition dims do not match the buffer");
    std::size_t dst;
    if (size_ < capacity_) {
        dst = slot(size_);
        ++size_;
    } else {
        dst = start_;
        start_ = (start_ + 1) % capacity_;
    }
    std::copy(t.s.begin(), t.s.end(), states_.row(dst).begin());
    std::copy(t.a.begin(), t.a.end(), actions_.row(dst).begin());
    std::copy(t.s_next.begin(), t.s_next.end(), next_states_.row(dst).begin());
    rewards_[dst] = t.r;
    dones_[dst] = t.done ? 1 : 0;
}

env::Transition OnlineBuffer::at(std::size_t i) const {
    if (i >= size_) throw DimensionError("OnlineBuffer::at: index out of range");
    const std::size_t k = slot(i);
    env::Transition t;
    t.s.assign(states_.row(k).begin(), states_.row(k).end());
    t.a.assign(actions_.row(k).begin(), actions_.row(k).end());
    t.r = rewards_[k];
    t.s_next.assign(next_states_.row(k).begin(), next_states_.row(k).end());
    t.done = dones_[k] != 0;
    t.source = env::Source::Online;
    return t;
}

void OnlineBuffer::copy_to(std::size_t i, TransitionBatch& out) const {
    const std::size_t k = slot(i);
    out.append(states_.row(k), actions_.row(k), rewards_[k], next_states_.row(k), dones_[k] != 0,
               env::Source::Online);
}

namespace {

std::vector<std::size_t> draw_rows(std::size_t available, std::size_t wanted, Rng& rng) {
    if (available >= wanted) return sample_without_replacement(available, wanted, rng);
    return sample_with_replacement(available, wanted, rng);
}

}  // namespace

CandidatePool form_pool(const OnlineBuffer& online, const env::OfflineDataset* offline, std::size_t pool_size,
                        Rng& rng) {
    const bool has_offline = offline != nullptr && !offline->empty();
    if (online.empty() && !has_offline) throw ConfigError("form_pool: both online and offline sources are empty");
    if (pool_size < 2) throw ConfigError("form_pool: pool size must be at least 2");

    std::size_t n_online = pool_size;
    std::size_t n_offline = 0;
    if (has_offline) {
        n_online = online.empty() ? 0 : pool_size / 2;
        n_offline = pool_size - n_online;
    }

    CandidatePool pool;
    int sd = 0, ad = 0;
    if (has_offline) {
        sd = offline->state_dim;
        ad = offline->action_dim;
    } else {
        const env::Transition first = online.at(0);
        sd = static_cast<int>(first.s.size());
        ad = static_cast<int>(first.a.size());
    }
    pool.rows = TransitionBatch(sd, ad);

    for (std::size_t i : draw_rows(online.size(), n_online, rng)) online.copy_to(i, pool.rows);
    if (n_offline > 0) {
        for (std::size_t i : draw_rows(offline->size(), n_offline, rng)) {
            pool.rows.append(offline->states.row(i), offline->actions.row(i), offline->rewards[i],
                             offline->next_states.row(i), offline->dones[i] != 0, env::Source::Offline);
        }
        pool.offline_reads = n_offline;
    }
    return pool;
}

std::string to_string(PriorityMode mode) {
    switch (mode) {
        case PriorityMode::A3: return "A3";
        case PriorityMode::Uniform: return "UNIFORM";
        case PriorityMode::DensityOnly: return "DENSITY_ONLY";
        case PriorityMode::AdvOnly: return "ADV_ONLY";
        case PriorityMode::TD: return "TD";
        case PriorityMode::TDDensity: return "TD_DENSITY";
    }
    return "A3";
}

std::vector<std::string> mode_names() { return {"A3", "UNIFORM", "DENSITY_ONLY", "ADV_ONLY", "TD", "TD_DENSITY"}; }

PriorityMode mode_from_string(const std::string& name) {
    for (auto mode : {PriorityMode::A3, PriorityMode::Uniform, PriorityMode::DensityOnly, PriorityMode::AdvOnly,
                      PriorityMode::TD, PriorityMode::TDDensity})
        if (to_string(mode) == name) return mode;
    throw ConfigError("unknown priority mode '" + name + "' (valid: A3, UNIFORM, DENSITY_ONLY, ADV_ONLY, TD, TD_DENSITY)");
}

bool uses_density(PriorityMode mode) {
    return mode == PriorityMode::A3 || mode == PriorityMode::DensityOnly || mode == PriorityMode::TDDensity;
}

bool uses_advantage(PriorityMode mode) { return mode == PriorityMode::A3 || mode == PriorityMode::AdvOnly; }

bool uses_td(PriorityMode mode) { return mode == PriorityMode::TD || mode == PriorityMode::TDDensity; }

double a3_priority(bool offline, double ratio_lcb, double adv_lcb, double xi) {
    const double onlineness = offline ? ratio_lcb : 1.0;
    return onlineness * std::exp(std::clamp(xi * adv_lcb, -kExpClip, kExpClip));
}

PrioritySet make_priority_set(std::vector<double> sigma, double rho, double xi) {
    if (sigma.empty()) throw ConfigError("make_priority_set: no priorities");
    if (!(rho > 0.0)) throw ConfigError("make_priority_set: exponent rho must be positive");
    PrioritySet ps;
    ps.rho = rho;
    ps.xi = xi;
    ps.probs.resize(sigma.size());
    double total = 0.0;
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        if (!(sigma[i] > 0.0) || !std::isfinite(sigma[i])) {
            std::ostringstream msg;
            msg << "priority of pool row " << i << " is not a positive finite number (" << sigma[i] << ")";
            throw NumericalError(msg.str());
        }
        ps.probs[i] = std::pow(sigma[i], rho);
        total += ps.probs[i];
    }
    ps.cdf.resize(sigma.size());
    double running = 0.0;
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        ps.probs[i] /= total;
        running += ps.probs[i];
        ps.cdf[i] = running;
    }
    ps.sigma = std::move(sigma);
    const std::size_t n = ps.sigma.size();
    ps.ratio_lcb.assign(n, 0.0);
    ps.adv_lcb.assign(n, 0.0);
    ps.td_error.assign(n, 0.0);
    return ps;
}

PrioritySet compute_priorities(const CandidatePool& pool, const agent::Agent& agent,
                               const density::DensityEnsemble* density, const PriorityParams& params, Rng& rng) {
    const TransitionBatch& rows = pool.rows;
    const std::size_t n = rows.size();
    const PriorityMode mode = params.mode;

    std::vector<double> ratio(n, 1.0);
    const bool any_offline = rows.count(env::Source::Offline) > 0;
    if (uses_density(mode) && any_offline) {
        if (density == nullptr) throw ConfigError("compute_priorities: mode needs a density ensemble");
        // Only offline rows are scored; online rows use the indicator 1.
        std::vector<std::size_t> off_idx;
        for (std::size_t i = 0; i < n; ++i)
            if (rows.is_offline(i)) off_idx.push_back(i);
        const TransitionBatch off = rows.gather(off_idx);
        const auto est = density::predict_lcb(*density, off.state_actions());
        for (std::size_t k = 0; k < off_idx.size(); ++k) ratio[off_idx[k]] = est[k].lcb;
    }

    std::vector<double> adv(n, 0.0);
    if (uses_advantage(mode)) {
        const auto est = agent::estimate_advantage_lcb(agent, rows.states, rows.actions, params.mc_samples, rng);
        for (std::size_t i = 0; i < n; ++i) adv[i] = est[i].lcb;
    }

    std::vector<double> td(n, 0.0);
    if (uses_td(mode)) {
        const int pessimistic[2] = {0, 1};
        const std::vector<float> y = agent::cdq_target(agent, rows, pessimistic, rng);
        const std::vector<double> q = agent::pessimistic_q(agent, rows.state_actions());
        for (std::size_t i = 0; i < n; ++i) td[i] = static_cast<double>(y[i]) - q[i];
    }

    std::vector<double> sigma(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const bool off = rows.is_offline(i);
        switch (mode) {
            case PriorityMode::A3: sigma[i] = a3_priority(off, ratio[i], adv[i], params.xi); break;
            case PriorityMode::Uniform: sigma[i] = 1.0; break;
            case PriorityMode::DensityOnly: sigma[i] = off ? ratio[i] : 1.0; break;
            case PriorityMode::AdvOnly: sigma[i] = a3_priority(false, 1.0, adv[i], params.xi); break;
            case PriorityMode::TD: sigma[i] = std::abs(td[i]) + kTdFloor; break;
            case PriorityMode::TDDensity: sigma[i] = (off ? ratio[i] : 1.0) * (std::abs(td[i]) + kTdFloor); break;
        }
    }
    PrioritySet ps = make_priority_set(std::move(sigma), params.rho, params.xi);
    ps.ratio_lcb = std::move(ratio);
    ps.adv_lcb = std::move(adv);
    ps.td_error = std::move(td);
    return ps;
}

std::vector<std::size_t> sample_batch(const PrioritySet& ps, std::size_t count, Rng& rng) {
    if (ps.cdf.empty()) throw ConfigError("sample_batch: empty priority set");
    for (double p : ps.probs)
        if (std::isnan(p)) throw NumericalError("sample_batch: NaN in sampling probabilities");
    const double total = ps.cdf.back();
    std::vector<std::size_t> out(count);
    for (auto& idx : out) {
        const double u = rng.uniform01() * total;
        const auto it = std::upper_bound(ps.cdf.begin(), ps.cdf.end(), u);
        idx = std::min<std::size_t>(static_cast<std::size_t>(it - ps.cdf.begin()), ps.cdf.size() - 1);
    }
    return out;
}

std::vector<float> importance_weights(const PrioritySet& ps, std::span<const std::size_t> drawn, double beta) {
    if (beta < 0.0 || beta > 1.0) throw ConfigError("importance_weights: beta must lie in [0, 1]");
    const auto n = static_cast<double>(ps.size());
    std::vector<double> raw(drawn.size());
    double largest = 0.0;
    for (std::size_t k = 0; k < drawn.size(); ++k) {
        const double p = ps.probs.at(drawn[k]);
        if (!(p > 0.0)) throw NumericalError("importance_weights: drawn row has zero probability");
        raw[k] = std::pow(1.0 / (n * p), beta);
        largest = std::max(largest, raw[k]);
    }
    std::vector<float> out(drawn.size());
    for (std::size_t k = 0; k < drawn.size(); ++k) out[k] = static_cast<float>(raw[k] / largest);
    return out;
}

double anneal_beta(std::size_t step, std::size_t total_steps, double beta0) {
    if (!(beta0 > 0.0 && beta0 < 1.0)) throw ConfigError("anneal_beta: beta0 must lie in (0, 1)");
    if (total_steps == 0 || step > total_steps) throw ConfigError("anneal_beta: need 0 <= step <= total_steps");
    return beta0 + (1.0 - beta0) * static_cast<double>(step) / static_cast<double>(total_steps);
}

}  // namespace a3rl::replay
