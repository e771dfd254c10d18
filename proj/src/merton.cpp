#include "volheston/merton.hpp"

#include <cmath>

#include "volheston/kernels.hpp"

namespace volheston {

namespace {

double trapezoid(const Eigen::VectorXd& values, double delta) {
    const int n = static_cast<int>(values.size()) - 1;
    double acc = 0.5 * (values(0) + values(n));
    for (int j = 1; j < n; ++j) acc += values(j);
    return acc * delta;
}

// Integrand of the exponential/power value formulas on the grid:
// jump term against nu_0 plus (forcing + F)' g0.
Eigen::VectorXd value_integrand(const ModelParams& params, const UtilityProblem& utility,
                                const RiccatiSolution& sol, const ForwardCurve& fw) {
    const int n = sol.grid.n;
    const Eigen::VectorXd forcing = riccati_forcing(params, utility);
    const double lambda = utility.kind == UtilityKind::exponential ? utility.gamma : 1.0;
    Eigen::VectorXd I(n + 1);
    for (int j = 0; j <= n; ++j) {
        const double s = sol.grid.node(j);
        const Eigen::VectorXd psi = sol.at_time_to_go(j);
        const Eigen::VectorXd F = utility.kind == UtilityKind::power
                                      ? driver_power(s, psi, params, utility)
                                      : driver_exponential(s, psi, params, utility);
        double v = jump_driver_term(psi, params.jumps, 0, lambda);
        for (int i = 0; i < params.d; ++i) v += (forcing(i) + F(i)) * fw.g0(j, i);
        I(j) = v;
    }
    return I;
}

} // namespace

ForwardCurve g0_curve(const ModelParams& params, const TimeGrid& grid) {
    ForwardCurve fw;
    fw.grid = grid;
    fw.g0.resize(grid.n + 1, params.d);
    for (int i = 0; i < params.d; ++i) {
        fw.g0(0, i) = params.v0(i);
        for (int j = 1; j <= grid.n; ++j)
            fw.g0(j, i) = params.v0(i) +
                          params.mu0(i) * integrated_kernel(params.kernels[i], 0.0, grid.node(j),
                                                            grid.node(j));
    }
    return fw;
}

ControlFields control_fields(const ModelParams& params, const RiccatiSolution& sol, int node,
                             const Eigen::VectorXd& v_t) {
    ControlFields out;
    const double t = sol.grid.node(node);
    const Eigen::VectorXd psi = sol.at_time_to_go(node);
    out.lambda_field.resize(params.d);
    for (int i = 0; i < params.d; ++i)
        out.lambda_field(i) = params.sigma_v(i) * params.varsigma_at(i, t) * psi(i) *
                              std::sqrt(std::max(v_t(i), 0.0));
    const auto& nu0 = params.jumps.nu.empty() ? JumpMeasureQuadrature::Measure{} : params.jumps.nu[0];
    const double psi_sum = psi.sum();
    out.u_nodes.reserve(nu0.nodes.size());
    for (double e : nu0.nodes) out.u_nodes.push_back(psi_sum * params.jumps.eta(e));
    return out;
}

namespace {

StrategyPoint finish_strategy(const Eigen::VectorXd& mult, const Eigen::VectorXd& v_t) {
    StrategyPoint s;
    const int d = static_cast<int>(v_t.size());
    s.alpha.resize(d);
    s.pi.resize(d);
    for (int i = 0; i < d; ++i) {
        const double root = std::sqrt(std::max(v_t(i), 0.0));
        s.alpha(i) = mult(i) * root;
        s.pi(i) = v_t(i) > 0.0 ? mult(i) : 0.0; // alpha / sqrt(V) with removable limit at 0
    }
    return s;
}

} // namespace

StrategyPoint strategy_exponential(const ModelParams& params, const RiccatiSolution& sol, int node,
                                   const Eigen::VectorXd& v_t) {
    const double t = sol.grid.node(node);
    const double g = sol.utility.gamma;
    const double disc = std::exp(-params.rate * (sol.grid.T - t));
    const Eigen::VectorXd psi = sol.at_time_to_go(node);
    Eigen::VectorXd mult(params.d);
    for (int i = 0; i < params.d; ++i)
        mult(i) = disc / g *
                  (params.theta(i) +
                   g * params.rho(i) * params.sigma_v(i) * params.varsigma_at(i, t) * psi(i));
    return finish_strategy(mult, v_t);
}

StrategyPoint strategy_power(const ModelParams& params, const RiccatiSolution& sol, int node,
                             const Eigen::VectorXd& v_t) {
    const double t = sol.grid.node(node);
    const double g = sol.utility.gamma;
    const Eigen::VectorXd psi = sol.at_time_to_go(node);
    Eigen::VectorXd mult(params.d);
    for (int i = 0; i < params.d; ++i)
        mult(i) = (params.theta(i) +
                   params.rho(i) * params.sigma_v(i) * params.varsigma_at(i, t) * psi(i)) /
                  (1.0 - g);
    return finish_strategy(mult, v_t);
}

StrategyPoint strategy_log(const ModelParams& params, int /*node*/, const Eigen::VectorXd& v_t) {
    return finish_strategy(params.theta, v_t);
}

Eigen::MatrixXd strategy_multiplier_curve(const ModelParams& params, const UtilityProblem& utility,
                                          const RiccatiSolution* sol, const TimeGrid& grid) {
    Eigen::MatrixXd curve(grid.n + 1, params.d);
    for (int j = 0; j <= grid.n; ++j) {
        const double t = grid.node(j);
        for (int i = 0; i < params.d; ++i) {
            switch (utility.kind) {
                case UtilityKind::log_utility:
                    curve(j, i) = params.theta(i);
                    break;
                case UtilityKind::exponential: {
                    const double psi = sol->psi(grid.n - j, i);
                    curve(j, i) = std::exp(-params.rate * (grid.T - t)) / utility.gamma *
                                  (params.theta(i) + utility.gamma * params.rho(i) *
                                                         params.sigma_v(i) *
                                                         params.varsigma_at(i, t) * psi);
                    break;
                }
                case UtilityKind::power: {
                    const double psi = sol->psi(grid.n - j, i);
                    curve(j, i) = (params.theta(i) + params.rho(i) * params.sigma_v(i) *
                                                         params.varsigma_at(i, t) * psi) /
                                  (1.0 - utility.gamma);
                    break;
                }
            }
        }
    }
    return curve;
}

AdmissibilityReport admissibility_diagnostics(const ModelParams& params, const RiccatiSolution& sol,
                                              double p) {
    // Minimal bound a = a(p) * sup_term; certify E[exp(a int sum_i V_i)] < infty
    // by the comparison Riccati equation with constant forcing a.
    AdmissibilityReport rep = check_admissibility(params, sol, 1.0, p);
    const double a_req = rep.a_p * std::max(rep.sup_term, 1e-300);
    rep = check_admissibility(params, sol, a_req * (1.0 + 1e-9), p);
    bool moment_ok = true;
    try {
        auto drv = [&](double s, const Eigen::VectorXd& psi) { return driver_measure(s, psi, params); };
        auto offs = [&](int) { return Eigen::VectorXd::Zero(params.d).eval(); };
        RiccatiSolution cmp =
            adams_solve(params, sol.utility, sol.grid, Eigen::VectorXd::Constant(params.d, a_req),
                        drv, offs, false);
        moment_ok = !cmp.blow_up.has_value();
    } catch (const std::exception&) {
        moment_ok = false;
    }
    rep.pass = rep.theta_bound_ok && rep.cond_u_finite && moment_ok;
    return rep;
}

ValueReport value_exponential(const ModelParams& params, const RiccatiSolution& sol, double x0,
                              const TimeGrid& grid) {
    if (sol.utility.kind != UtilityKind::exponential)
        throw std::invalid_argument("value_exponential: solution is not for exponential utility");
    if (grid.n != sol.grid.n || grid.T != sol.grid.T)
        throw std::invalid_argument("value_exponential: value grid must match the Riccati grid");
    const double g = sol.utility.gamma;
    ForwardCurve fw = g0_curve(params, grid);
    const Eigen::VectorXd I = value_integrand(params, sol.utility, sol, fw);
    if (!I.allFinite()) throw NumericalError("value_exponential: non-finite integrand");
    const double integral = trapezoid(I, grid.delta());
    const double theta0 = -std::exp(-g * std::exp(params.rate * grid.T) * x0) / g;

    ValueReport rep;
    rep.utility = sol.utility;
    rep.y0 = integral;
    rep.value = theta0 * std::exp(g * integral);
    rep.strategy_curve = strategy_multiplier_curve(params, sol.utility, &sol, grid);
    rep.diagnostics = admissibility_diagnostics(params, sol);
    return rep;
}

ValueReport value_power(const ModelParams& params, const RiccatiSolution& sol, double x0,
                        const TimeGrid& grid) {
    if (sol.utility.kind != UtilityKind::power)
        throw std::invalid_argument("value_power: solution is not for power utility");
    if (grid.n != sol.grid.n || grid.T != sol.grid.T)
        throw std::invalid_argument("value_power: value grid must match the Riccati grid");
    if (sol.blow_up) {
        const double t_max = sol.grid.node(*sol.blow_up);
        throw NumericalError("value_power: Riccati blow-up, T_max ~= " + std::to_string(t_max) +
                             " < T; refuse to evaluate");
    }
    const double g = sol.utility.gamma;
    ForwardCurve fw = g0_curve(params, grid);
    const Eigen::VectorXd I = value_integrand(params, sol.utility, sol, fw);
    const double integral = trapezoid(I, grid.delta());

    ValueReport rep;
    rep.utility = sol.utility;
    rep.y0 = g * params.rate * grid.T + integral;
    rep.value = std::pow(x0, g) / g * std::exp(g * params.rate * grid.T) * std::exp(integral);
    rep.strategy_curve = strategy_multiplier_curve(params, sol.utility, &sol, grid);
    rep.diagnostics = admissibility_diagnostics(params, sol);
    return rep;
}

Eigen::MatrixXd expected_variance(const ModelParams& params, const TimeGrid& grid) {
    ResolventCurve rc = resolvent(params.kernels, params.D, grid);
    const int n = grid.n;
    const int d = params.d;

    // Kernel mass over each lag cell, scaled by mu0.
    std::vector<Eigen::VectorXd> mass(n + 1, Eigen::VectorXd::Zero(d));
    for (int l = 1; l <= n; ++l)
        for (int i = 0; i < d; ++i)
            mass[l](i) = params.mu0(i) * integrated_kernel(params.kernels[i], 0.0, grid.delta(),
                                                           grid.node(l));

    Eigen::MatrixXd ev(n + 1, d);
    for (int k = 0; k <= n; ++k) {
        Eigen::VectorXd acc = rc.R[k] * params.v0;
        for (int l = 1; l <= k; ++l)
            acc += 0.5 * ((rc.R[k - l + 1] + rc.R[k - l]) * mass[l]);
        ev.row(k) = acc.transpose();
    }
    return ev;
}

ValueReport value_log(const ModelParams& params, double x0, const TimeGrid& grid) {
    if (!(x0 > 0.0)) throw std::invalid_argument("value_log: x0 must be > 0");
    const Eigen::MatrixXd ev = expected_variance(params, grid);
    double acc = 0.0;
    for (int i = 0; i < params.d; ++i)
        acc += 0.5 * params.theta(i) * params.theta(i) * trapezoid(ev.col(i), grid.delta());

    ValueReport rep;
    rep.utility = UtilityProblem::log_utility(params.d);
    rep.y0 = params.rate * grid.T + acc;
    rep.value = std::log(x0) + rep.y0;
    rep.strategy_curve = strategy_multiplier_curve(params, rep.utility, nullptr, grid);
    // alpha* = lambda is square-integrable whenever E[V] is finite on [0, T]
    rep.diagnostics.pass = ev.allFinite();
    rep.diagnostics.theta_bound_ok = rep.diagnostics.pass;
    rep.diagnostics.cond_u_finite = true;
    return rep;
}

IndifferencePrice indifference_price(const ModelParams& params, double gamma,
                                     const Eigen::VectorXd& zeta, double x0, const TimeGrid& grid) {
    (void)x0; // the CARA structure cancels the wealth level out of the price
    const int d = params.d;
    ForwardCurve fw = g0_curve(params, grid);
    const double disc = std::exp(-params.rate * grid.T);

    // Definitional route: V^{-Xi}(x0 - p, V0) = V^0(x0, V0) through the value
    // integrals of the zeta = 0 and zeta = -zeta problems.
    UtilityProblem u0 = UtilityProblem::exponential(gamma, Eigen::VectorXd::Zero(d));
    UtilityProblem ub = UtilityProblem::exponential(gamma, (-zeta).eval());
    ub.validate(params.theta);
    RiccatiSolution s0 = solve_riccati(params, u0, grid);
    RiccatiSolution sb = solve_riccati(params, ub, grid);
    const double a0 = trapezoid(value_integrand(params, u0, s0, fw), grid.delta());
    const double ab = trapezoid(value_integrand(params, ub, sb, fw), grid.delta());

    IndifferencePrice out;
    out.price = disc * (a0 - ab);

    // Displayed formula: forcings -theta^2/2 and -zeta - theta^2/2 without the
    // 1/gamma scaling; agrees with the definitional route when gamma = 1.
    Eigen::VectorXd f0(d), fb(d);
    for (int i = 0; i < d; ++i) {
        f0(i) = -0.5 * params.theta(i) * params.theta(i);
        fb(i) = -zeta(i) - 0.5 * params.theta(i) * params.theta(i);
    }
    auto drv = [&](double s, const Eigen::VectorXd& psi) {
        return driver_exponential(s, psi, params, u0);
    };
    auto offs = [&](int) { return Eigen::VectorXd::Zero(d).eval(); };
    RiccatiSolution p0 = adams_solve(params, u0, grid, f0, drv, offs, true);
    RiccatiSolution pb = adams_solve(params, u0, grid, fb, drv, offs, true);

    Eigen::VectorXd I(grid.n + 1);
    for (int j = 0; j <= grid.n; ++j) {
        const double s = grid.node(j);
        const Eigen::VectorXd psi0 = p0.at_time_to_go(j);
        const Eigen::VectorXd psib = pb.at_time_to_go(j);
        double v = jump_driver_term(psi0, params.jumps, 0, gamma) -
                   jump_driver_term(psib, params.jumps, 0, gamma);
        const Eigen::VectorXd F0 = driver_exponential(s, psi0, params, u0);
        const Eigen::VectorXd Fb = driver_exponential(s, psib, params, u0);
        for (int i = 0; i < d; ++i) v += (F0(i) - Fb(i) + zeta(i)) * fw.g0(j, i);
        I(j) = v;
    }
    out.displayed = disc * trapezoid(I, grid.delta());
    out.discrepancy = out.price - out.displayed;
    return out;
}

} // namespace volheston
