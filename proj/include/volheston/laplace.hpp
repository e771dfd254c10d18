#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "volheston/grid.hpp"
#include "volheston/model.hpp"
#include "volheston/riccati.hpp"

namespace volheston {

// Test measure m(ds) = density . ds on [0, T] plus an atom u delta_T.
struct TestMeasure {
    Eigen::VectorXd density;
    Eigen::VectorXd atom_at_T;

    static TestMeasure lebesgue(int d, double c) {
        return {Eigen::VectorXd::Constant(d, c), Eigen::VectorXd::Zero(d)};
    }
    static TestMeasure atom(int d, double u) {
        return {Eigen::VectorXd::Zero(d), Eigen::VectorXd::Constant(d, u)};
    }
};

// Measure-extended Riccati equation
//   psi(t) = (K * m~)(t) + int_0^t K(t-s) F(T-s, psi(s)) ds
// solved by the fractional Adams machinery: the density acts as a constant
// forcing, the atom adds u K(t) pointwise.  Atoms require kernels bounded at 0.
RiccatiSolution riccati_measure(const ModelParams& params, const TestMeasure& m,
                                const TimeGrid& grid);

// Exponential-affine transform
//   E[exp(int_0^T V' m(ds))]
//     = exp(int g0' m(ds) + int [ jump term + F(s, psi(T-s))' g0(s) ] ds).
double laplace_formula(const ModelParams& params, const RiccatiSolution& psi_m,
                       const TestMeasure& m, const TimeGrid& grid);

struct McLaplaceResult {
    double estimate = 0.0;
    double std_error = 0.0;
    bool finite = true;
    std::string diagnostic;
};

// Monte Carlo of exp(trapezoid of V' c over the grid + V_T' u).
McLaplaceResult mc_laplace(const ModelParams& params, const TestMeasure& m, const TimeGrid& grid,
                           int n_paths, std::uint64_t seed);

} // namespace volheston
