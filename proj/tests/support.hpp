#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace a3rl::testing {

/// Central differences of `loss` with respect to every entry of `params`.
inline std::vector<double> central_diff(std::span<float> params, const std::function<double()>& loss, float h) {
    std::vector<double> g(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const float keep = params[i];
        params[i] = keep + h;
        const double up = loss();
        params[i] = keep - h;
        const double down = loss();
        params[i] = keep;
        g[i] = (up - down) / (2.0 * static_cast<double>(h));
    }
    return g;
}

/// ||a - b|| / max(||a||, ||b||, tiny).
inline double rel_error(std::span<const float> a, std::span<const double> b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += static_cast<double>(a[i]) * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

}  // namespace a3rl::testing
