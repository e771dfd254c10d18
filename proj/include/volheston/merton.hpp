#pragma once

#include <Eigen/Dense>
#include <optional>

#include "volheston/grid.hpp"
#include "volheston/model.hpp"
#include "volheston/riccati.hpp"

namespace volheston {

// Deterministic slice of the adjusted forward process:
// g0(t) = v0 + mu0 * int_0^t K(s) ds per asset.
struct ForwardCurve {
    TimeGrid grid;
    Eigen::MatrixXd g0; // (n+1) x d
};

ForwardCurve g0_curve(const ModelParams& params, const TimeGrid& grid);

struct ControlFields {
    Eigen::VectorXd lambda_field;  // Lambda_t^i = sigma_v_i varsigma_i psi_i(T-t) sqrt(V_i)
    std::vector<double> u_nodes;   // U_t(e_m) = psi(T-t) . eta(e_m) at the nu_0 nodes
};

ControlFields control_fields(const ModelParams& params, const RiccatiSolution& sol, int node,
                             const Eigen::VectorXd& v_t);

struct StrategyPoint {
    Eigen::VectorXd alpha; // volatility-scaled strategy
    Eigen::VectorXd pi;    // invested amounts, alpha_i / sqrt(V_i) with a zero guard
};

StrategyPoint strategy_exponential(const ModelParams& params, const RiccatiSolution& sol, int node,
                                   const Eigen::VectorXd& v_t);
StrategyPoint strategy_power(const ModelParams& params, const RiccatiSolution& sol, int node,
                             const Eigen::VectorXd& v_t);
StrategyPoint strategy_log(const ModelParams& params, int node, const Eigen::VectorXd& v_t);

// Multiplier m_i(t_j) with alpha*_i = m_i sqrt(V_i); rows are grid nodes.
Eigen::MatrixXd strategy_multiplier_curve(const ModelParams& params, const UtilityProblem& utility,
                                          const RiccatiSolution* sol, const TimeGrid& grid);

struct ValueReport {
    UtilityProblem utility;
    double value = 0.0;
    double y0 = 0.0;                 // BSDE initial value embedded in the value formula
    Eigen::MatrixXd strategy_curve;  // (n+1) x d multipliers
    AdmissibilityReport diagnostics;
    std::optional<double> t_max;     // blow-up time when the Riccati solution stopped early
};

ValueReport value_exponential(const ModelParams& params, const RiccatiSolution& sol, double x0,
                              const TimeGrid& grid);
ValueReport value_power(const ModelParams& params, const RiccatiSolution& sol, double x0,
                        const TimeGrid& grid);
ValueReport value_log(const ModelParams& params, double x0, const TimeGrid& grid);

// E[V_t] per asset on the grid through the resolvent identity
// E[V] = g0 + R'_D * g0, evaluated in the integrated-by-parts form
// R(t) v0 + int_0^t R(t-s) K(s) mu0 ds so the kernel singularity is exact.
Eigen::MatrixXd expected_variance(const ModelParams& params, const TimeGrid& grid);

struct IndifferencePrice {
    double price = 0.0;       // definitional route through the two value functions
    double displayed = 0.0;   // the displayed closed formula (matches at gamma = 1)
    double discrepancy = 0.0; // price - displayed
};

IndifferencePrice indifference_price(const ModelParams& params, double gamma,
                                     const Eigen::VectorXd& zeta, double x0, const TimeGrid& grid);

// a(p)-based admissibility diagnostics at the minimal required bound; the
// exponential moment is certified by solving the comparison Riccati equation
// with constant forcing a(p) * sup_term.
AdmissibilityReport admissibility_diagnostics(const ModelParams& params, const RiccatiSolution& sol,
                                              double p = 2.0);

} // namespace volheston
