#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "a3rl/env.hpp"
#include "a3rl/nn.hpp"

namespace a3rl {

/// Column-wise block of transitions with per-row source tags. Used for the
/// per-step candidate pool and for the minibatches drawn from it.
struct TransitionBatch {
    nn::Matrix states;
    nn::Matrix actions;
    std::vector<float> rewards;
    nn::Matrix next_states;
    std::vector<std::uint8_t> dones;
    std::vector<env::Source> sources;

    TransitionBatch() = default;
    TransitionBatch(int state_dim, int action_dim)
        : states(0, static_cast<std::size_t>(state_dim)),
          actions(0, static_cast<std::size_t>(action_dim)),
          next_states(0, static_cast<std::size_t>(state_dim)) {}

    std::size_t size() const { return rewards.size(); }
    bool is_offline(std::size_t i) const { return sources[i] == env::Source::Offline; }
    std::size_t count(env::Source source) const;

    void append(std::span<const float> s, std::span<const float> a, float r, std::span<const float> s_next, bool done,
                env::Source source);
    void append(const env::Transition& t) { append(t.s, t.a, t.r, t.s_next, t.done, t.source); }

    /// Rows at `indices` (repeats allowed), in that order.
    TransitionBatch gather(std::span<const std::size_t> indices) const;

    /// concat(s, a) per row: the input of critics and density nets.
    nn::Matrix state_actions() const { return nn::hconcat(states, actions); }
};

/// The per-step learning set: N/2 online rows and N/2 offline rows.
struct CandidatePool {
    TransitionBatch rows;
    std::size_t offline_reads = 0;  ///< offline rows copied into this pool

    std::size_t size() const { return rows.size(); }
};

}  // namespace a3rl
