#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "volheston/grid.hpp"
#include "volheston/model.hpp"

namespace volheston {

struct RiccatiSolution {
    TimeGrid grid;
    Eigen::MatrixXd psi; // (n+1) x d, row j = psi(t_j)
    UtilityProblem utility;
    std::optional<int> blow_up; // first node where |psi| exceeded the threshold

    Eigen::VectorXd at(int j) const { return psi.row(j).transpose(); }
    // psi(T - t_j) as used by strategies and value integrands.
    Eigen::VectorXd at_time_to_go(int j) const { return psi.row(grid.n - j).transpose(); }
};

// h_lambda(x) = (e^{lambda x} - lambda x - 1) / lambda, with the second-order
// series for |lambda x| < 1e-4 to avoid cancellation.
double h_lambda(double lambda, double x);

// sum_m w_m h_lambda(lambda, psi . eta(e_m)) against nu_k.
double jump_driver_term(const Eigen::VectorXd& psi, const JumpMeasureQuadrature& quad, int k,
                        double lambda);

// Riccati drivers F(s, psi); s enters through varsigma(s).
Eigen::VectorXd driver_exponential(double s, const Eigen::VectorXd& psi, const ModelParams& params,
                                   const UtilityProblem& utility);
Eigen::VectorXd driver_power(double s, const Eigen::VectorXd& psi, const ModelParams& params,
                             const UtilityProblem& utility);
// Driver of the measure-extended equation behind the Laplace transform
// (no market terms).
Eigen::VectorXd driver_measure(double s, const Eigen::VectorXd& psi, const ModelParams& params);

// Fractional Adams corrector/predictor weights for step k -> k+1:
// a-row of length k+2 and b-row of length k+1.
std::pair<Eigen::VectorXd, Eigen::VectorXd> adams_weights(double alpha, double delta, int k);

// Constant forcing a_i for the utility Riccati equations.
Eigen::VectorXd riccati_forcing(const ModelParams& params, const UtilityProblem& utility);

// Generic fractional Adams PECE solve of
//   psi(t) = offset(t) + int_0^t K(t-s) (forcing + F(T-s, psi(s))) ds
// with per-asset kernels/weights.  `hard_fail_on_blow_up` turns the blow-up
// flag into an exception (exponential case).
RiccatiSolution adams_solve(
    const ModelParams& params, const UtilityProblem& utility, const TimeGrid& grid,
    const Eigen::VectorXd& forcing,
    const std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>& driver,
    const std::function<Eigen::VectorXd(int)>& offset, bool hard_fail_on_blow_up);

// Utility Riccati solve per the predictor-corrector scheme; forcing constants
// are zeta_i - theta_i^2/(2 gamma) (exponential) or gamma theta_i^2/(2(1-gamma))
// (power) unless supplied explicitly.
RiccatiSolution solve_riccati(const ModelParams& params, const UtilityProblem& utility,
                              const TimeGrid& grid, const Eigen::VectorXd& forcing);
RiccatiSolution solve_riccati(const ModelParams& params, const UtilityProblem& utility,
                              const TimeGrid& grid);

struct AdmissibilityReport {
    double a_p = 0.0;          // constant a(p)
    double sup_term = 0.0;     // max_i sup_t (theta_i^2 + (sigma_v_i varsigma_i psi_i)^2)
    double bound = 0.0;        // a_bound / a(p)
    bool theta_bound_ok = false;
    std::vector<double> cond_u; // exp-integrability integrals per measure k = 0..d
    bool cond_u_finite = false;
    bool pass = false;
};

AdmissibilityReport check_admissibility(const ModelParams& params, const RiccatiSolution& sol,
                                        double a_bound, double p);

} // namespace volheston
