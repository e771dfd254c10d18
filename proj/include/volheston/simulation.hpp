#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "volheston/grid.hpp"
#include "volheston/model.hpp"
#include "volheston/rng.hpp"

namespace volheston {

// Poisson arrivals on (0, T] with their marks; jump size per asset is
// params.jumps.eta(mark) >= 0.
struct JumpEvents {
    std::vector<double> times;
    std::vector<double> marks;
};

struct PathBundle {
    TimeGrid grid;
    int d = 0;
    int n_paths = 0;
    std::uint64_t seed = 0;
    bool has_increments = false;
    std::vector<double> V;  // (path, node 0..n, asset)
    std::vector<double> dW; // (path, step 1..n, asset), present when has_increments
    std::vector<double> dB;
    std::vector<JumpEvents> events;

    double v(int p, int k, int i) const { return V[(static_cast<std::size_t>(p) * (grid.n + 1) + k) * d + i]; }
    double dw(int p, int step, int i) const {
        return dW[(static_cast<std::size_t>(p) * grid.n + (step - 1)) * d + i];
    }
    double db(int p, int step, int i) const {
        return dB[(static_cast<std::size_t>(p) * grid.n + (step - 1)) * d + i];
    }
};

JumpEvents sample_jumps(const ModelParams& params, const TimeGrid& grid, std::uint64_t seed,
                        std::uint64_t path);

// K-integrated Euler-Maruyama scheme for the variance process.  Per-step
// Gaussian blocks follow the stabilized Cholesky factor of the step covariance
// (kernel-weighted integrals augmented with the plain Brownian increment);
// full truncation is applied inside the diffusion coefficient while the drift
// uses the raw iterate.
PathBundle simulate_V(const ModelParams& params, const TimeGrid& grid, int n_paths,
                      std::uint64_t seed, bool store_increments = true, int n_threads = 0);

// alpha(path, step, V_{t_{step-1}}) -> investment vector used on [t_{step-1}, t_step].
using StrategyFn =
    std::function<void(int, int, Eigen::Ref<const Eigen::VectorXd>, Eigen::Ref<Eigen::VectorXd>)>;

// Wraps a deterministic multiplier curve (rows = grid nodes) as
// alpha_i = m_i(t_{step-1}) * sqrt(V_i^+).
StrategyFn multiplier_strategy(const Eigen::MatrixXd& curve);
StrategyFn constant_strategy(const Eigen::VectorXd& alpha);

// Discounted representation of the additive wealth equation:
// X_{t_k} = e^{int_0^{t_k} r} (x0 + sum_l e^{-int_0^{t_l} r} (alpha' dB + alpha' lambda dt)).
// Returns wealth at every node, laid out (path, node).
std::vector<double> simulate_wealth_additive(const ModelParams& params, const PathBundle& bundle,
                                             const StrategyFn& strategy, double x0);

// Exact log-form of the multiplicative wealth equation (x0 > 0, paths stay positive).
std::vector<double> simulate_wealth_multiplicative(const ModelParams& params,
                                                   const PathBundle& bundle,
                                                   const StrategyFn& strategy, double x0);

} // namespace volheston
