#include "a3rl/transition_batch.hpp"

#include <algorithm>

#include "a3rl/error.hpp"

namespace a3rl {

std::size_t TransitionBatch::count(env::Source source) const {
    return static_cast<std::size_t>(std::count(sources.begin(), sources.end(), source));
}

void TransitionBatch::append(std::span<const float> s, std::span<const float> a, float r,
                             std::span<const float> s_next, bool done, env::Source source) {
    states.append_row(s);
    actions.append_row(a);
    next_states.append_row(s_next);
    rewards.push_back(r);
    dones.push_back(done ? 1 : 0);
    sources.push_back(source);
}

TransitionBatch TransitionBatch::gather(std::span<const std::size_t> indices) const {
    TransitionBatch out(static_cast<int>(states.cols()), static_cast<int>(actions.cols()));
    out.states.reserve_rows(indices.size());
    out.actions.reserve_rows(indices.size());
    out.next_states.reserve_rows(indices.size());
    for (std::size_t i : indices) {
        if (i >= size()) throw DimensionError("TransitionBatch::gather: index out of range");
        out.append(states.row(i), actions.row(i), rewards[i], next_states.row(i), dones[i] != 0, sources[i]);
    }
    return out;
}

}  // namespace a3rl
