#pragma once

#include <cstddef>
#include <stdexcept>

namespace volheston {

// Uniform discretization of [0, T] with nodes t_k = k*T/n.
struct TimeGrid {
    double T = 1.0;
    int n = 100;

    TimeGrid() = default;
    TimeGrid(double horizon, int steps) : T(horizon), n(steps) {
        if (!(T > 0.0)) throw std::invalid_argument("TimeGrid: T must be > 0");
        if (n < 1) throw std::invalid_argument("TimeGrid: n must be >= 1");
    }

    double delta() const { return T / static_cast<double>(n); }
    double node(int k) const { return static_cast<double>(k) * T / static_cast<double>(n); }
    int size() const { return n + 1; }
};

} // namespace volheston
