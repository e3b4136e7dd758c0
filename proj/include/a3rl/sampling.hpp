#pragma once

#include <cstddef>
#include <unordered_set>
#include <vector>

#include "a3rl/error.hpp"
#include "a3rl/rng.hpp"

namespace a3rl {

/// k distinct indices from [0, n), uniformly over subsets (Floyd's algorithm).
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
    if (k > n) throw ConfigError("sample_without_replacement: k > n");
    std::vector<std::size_t> out;
    out.reserve(k);
    std::unordered_set<std::size_t> seen;
    seen.reserve(k * 2);
    for (std::size_t j = n - k; j < n; ++j) {
        const auto t = static_cast<std::size_t>(rng.below(j + 1));
        const std::size_t pick = seen.insert(t).second ? t : j;
        if (pick == j) seen.insert(j);
        out.push_back(pick);
    }
    return out;
}

/// k indices from [0, n) drawn independently with replacement.
inline std::vector<std::size_t> sample_with_replacement(std::size_t n, std::size_t k, Rng& rng) {
    if (n == 0 && k > 0) throw ConfigError("sample_with_replacement: empty range");
    std::vector<std::size_t> out(k);
    for (auto& i : out) i = static_cast<std::size_t>(rng.below(n));
    return out;
}

}  // namespace a3rl
