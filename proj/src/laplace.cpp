#include "volheston/laplace.hpp"

#include <cmath>

#include "volheston/kernels.hpp"
#include "volheston/merton.hpp"
#include "volheston/simulation.hpp"

namespace volheston {

RiccatiSolution riccati_measure(const ModelParams& params, const TestMeasure& m,
                                const TimeGrid& grid) {
    const int d = params.d;
    if (m.density.size() != d || m.atom_at_T.size() != d)
        throw std::invalid_argument("riccati_measure: measure dimension mismatch");
    for (int i = 0; i < d; ++i)
        if (m.atom_at_T(i) != 0.0 && !params.kernels[i].bounded_at_zero())
            throw std::domain_error(
                "riccati_measure: atom forcing requires a kernel bounded at 0 (alpha = 1)");

    auto drv = [&](double s, const Eigen::VectorXd& psi) { return driver_measure(s, psi, params); };
    auto offs = [&, m](int j) {
        Eigen::VectorXd o = Eigen::VectorXd::Zero(d);
        for (int i = 0; i < d; ++i) {
            if (m.atom_at_T(i) == 0.0) continue;
            const double t = grid.node(j);
            o(i) = m.atom_at_T(i) * (t > 0.0 ? eval_kernel(params.kernels[i], t) : 1.0);
        }
        return o;
    };
    UtilityProblem tag = UtilityProblem::log_utility(d); // neutral tag for the shared solver
    return adams_solve(params, tag, grid, m.density, drv, offs, false);
}

double laplace_formula(const ModelParams& params, const RiccatiSolution& psi_m,
                       const TestMeasure& m, const TimeGrid& grid) {
    if (psi_m.blow_up)
        throw NumericalError("laplace_formula: Riccati solution blew up before T");
    const int n = grid.n;
    const int d = params.d;
    ForwardCurve fw = g0_curve(params, grid);

    double measure_part = 0.0;
    for (int i = 0; i < d; ++i) {
        double tz = 0.5 * (fw.g0(0, i) + fw.g0(n, i));
        for (int j = 1; j < n; ++j) tz += fw.g0(j, i);
        measure_part += m.density(i) * tz * grid.delta();
        measure_part += m.atom_at_T(i) * fw.g0(n, i);
    }

    double integral = 0.0;
    for (int j = 0; j <= n; ++j) {
        const double s = grid.node(j);
        const Eigen::VectorXd psi = psi_m.at_time_to_go(j);
        double v = jump_driver_term(psi, params.jumps, 0, 1.0);
        const Eigen::VectorXd F = driver_measure(s, psi, params);
        for (int i = 0; i < d; ++i) v += F(i) * fw.g0(j, i);
        integral += (j == 0 || j == n) ? 0.5 * v : v;
    }
    integral *= grid.delta();
    return std::exp(measure_part + integral);
}

McLaplaceResult mc_laplace(const ModelParams& params, const TestMeasure& m, const TimeGrid& grid,
                           int n_paths, std::uint64_t seed) {
    PathBundle bundle = simulate_V(params, grid, n_paths, seed, /*store_increments=*/false);
    const int n = grid.n;
    const int d = params.d;
    const double delta = grid.delta();

    double sum = 0.0, sum_sq = 0.0;
    bool finite = true;
    for (int p = 0; p < n_paths; ++p) {
        // Trapezoid rule for the integrated-variance exponent; a left-endpoint
        // sum biases the estimate well past the Monte Carlo resolution when the
        // mean variance curve is steep.
        double expo = 0.0;
        for (int i = 0; i < d; ++i) {
            double tz = 0.5 * (bundle.v(p, 0, i) + bundle.v(p, n, i));
            for (int k = 1; k < n; ++k) tz += bundle.v(p, k, i);
            expo += tz * m.density(i) * delta;
            expo += bundle.v(p, n, i) * m.atom_at_T(i);
        }
        const double val = std::exp(expo);
        if (!std::isfinite(val)) finite = false;
        sum += val;
        sum_sq += val * val;
    }
    McLaplaceResult res;
    res.estimate = sum / n_paths;
    const double var = std::max(0.0, sum_sq / n_paths - res.estimate * res.estimate);
    res.std_error = std::sqrt(var / n_paths);
    res.finite = finite && std::isfinite(res.estimate);
    if (!res.finite) res.diagnostic = "exponent overflow: measure too large for this configuration";
    return res;
}

} // namespace volheston
