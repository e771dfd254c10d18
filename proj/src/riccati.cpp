#include "volheston/riccati.hpp"

#include <cmath>

#include "volheston/kernels.hpp"

namespace volheston {

namespace {
constexpr double kBlowUpThreshold = 1e8;
}

double h_lambda(double lambda, double x) {
    const double z = lambda * x;
    if (std::abs(z) < 1e-4) return lambda * x * x * 0.5 + lambda * lambda * x * x * x / 6.0;
    return (std::exp(z) - z - 1.0) / lambda;
}

double jump_driver_term(const Eigen::VectorXd& psi, const JumpMeasureQuadrature& quad, int k,
                        double lambda) {
    if (k < 0 || k >= static_cast<int>(quad.nu.size())) return 0.0;
    const auto& m = quad.nu[k];
    if (m.intensity == 0.0 || quad.kappa == 0.0) return 0.0;
    const double psi_sum = psi.sum(); // common jump size across assets: psi . eta(e) = (sum psi) eta(e)
    double acc = 0.0;
    for (std::size_t q = 0; q < m.nodes.size(); ++q)
        acc += m.weights[q] * h_lambda(lambda, psi_sum * quad.eta(m.nodes[q]));
    return acc;
}

Eigen::VectorXd driver_exponential(double s, const Eigen::VectorXd& psi, const ModelParams& params,
                                   const UtilityProblem& utility) {
    const int d = params.d;
    const double g = utility.gamma;
    Eigen::VectorXd out = params.D.transpose() * psi;
    for (int i = 0; i < d; ++i) {
        const double sp = params.varsigma_at(i, s) * psi(i);
        out(i) += -params.theta(i) * params.rho(i) * params.sigma_v(i) * sp;
        out(i) += 0.5 * g * params.sigma_v(i) * params.sigma_v(i) *
                  (1.0 - params.rho(i) * params.rho(i)) * sp * sp;
        out(i) += jump_driver_term(psi, params.jumps, i + 1, g);
    }
    return out;
}

Eigen::VectorXd driver_power(double s, const Eigen::VectorXd& psi, const ModelParams& params,
                             const UtilityProblem& utility) {
    const int d = params.d;
    const double g = utility.gamma;
    const double ratio = g / (1.0 - g);
    Eigen::VectorXd out = params.D.transpose() * psi;
    for (int i = 0; i < d; ++i) {
        const double sp = params.varsigma_at(i, s) * psi(i);
        out(i) += ratio * params.theta(i) * params.rho(i) * params.sigma_v(i) * sp;
        out(i) += 0.5 * params.sigma_v(i) * params.sigma_v(i) * sp * sp *
                  (1.0 + ratio * params.rho(i) * params.rho(i));
        out(i) += jump_driver_term(psi, params.jumps, i + 1, 1.0);
    }
    return out;
}

Eigen::VectorXd driver_measure(double s, const Eigen::VectorXd& psi, const ModelParams& params) {
    const int d = params.d;
    Eigen::VectorXd out = params.D.transpose() * psi;
    for (int i = 0; i < d; ++i) {
        const double sp = params.varsigma_at(i, s) * psi(i);
        out(i) += 0.5 * params.sigma_v(i) * params.sigma_v(i) * sp * sp;
        out(i) += jump_driver_term(psi, params.jumps, i + 1, 1.0);
    }
    return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> adams_weights(double alpha, double delta, int k) {
    if (!(alpha > 0.5 && alpha <= 1.0)) throw std::invalid_argument("adams_weights: alpha out of range");
    if (!(delta > 0.0)) throw std::invalid_argument("adams_weights: delta must be > 0");
    const double da = std::pow(delta, alpha);
    const double ga1 = std::tgamma(alpha + 1.0);
    const double ga2 = std::tgamma(alpha + 2.0);
    Eigen::VectorXd a(k + 2), b(k + 1);
    a(0) = da / ga2 *
           (std::pow(static_cast<double>(k), alpha + 1.0) -
            (k - alpha) * std::pow(static_cast<double>(k + 1), alpha));
    for (int j = 1; j <= k; ++j) {
        const double m = static_cast<double>(k - j);
        a(j) = da / ga2 *
               (std::pow(m + 2.0, alpha + 1.0) + std::pow(m, alpha + 1.0) -
                2.0 * std::pow(m + 1.0, alpha + 1.0));
    }
    a(k + 1) = da / ga2;
    for (int j = 0; j <= k; ++j) {
        const double m = static_cast<double>(k - j);
        b(j) = da / ga1 * (std::pow(m + 1.0, alpha) - std::pow(m, alpha));
    }
    return {a, b};
}

Eigen::VectorXd riccati_forcing(const ModelParams& params, const UtilityProblem& utility) {
    Eigen::VectorXd a(params.d);
    switch (utility.kind) {
        case UtilityKind::exponential:
            for (int i = 0; i < params.d; ++i)
                a(i) = utility.zeta(i) - params.theta(i) * params.theta(i) / (2.0 * utility.gamma);
            break;
        case UtilityKind::power:
            for (int i = 0; i < params.d; ++i)
                a(i) = utility.gamma * params.theta(i) * params.theta(i) /
                       (2.0 * (1.0 - utility.gamma));
            break;
        case UtilityKind::log_utility:
            a.setZero();
            break;
    }
    return a;
}

RiccatiSolution adams_solve(
    const ModelParams& params, const UtilityProblem& utility, const TimeGrid& grid,
    const Eigen::VectorXd& forcing,
    const std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>& driver,
    const std::function<Eigen::VectorXd(int)>& offset, bool hard_fail_on_blow_up) {
    const int d = params.d;
    const int n = grid.n;
    const double delta = grid.delta();

    // Lag tables: the b weights and interior a weights depend on k - j only.
    std::vector<Eigen::VectorXd> bw(d), aw(d);
    Eigen::VectorXd da(d), ga2(d);
    for (int i = 0; i < d; ++i) {
        const double alpha = params.kernels[i].alpha;
        da(i) = std::pow(delta, alpha);
        ga2(i) = std::tgamma(alpha + 2.0);
        bw[i].resize(n + 1);
        aw[i].resize(n + 1);
        const double ga1 = std::tgamma(alpha + 1.0);
        for (int p = 0; p <= n; ++p) {
            const double m = static_cast<double>(p);
            bw[i](p) = da(i) / ga1 * (std::pow(m + 1.0, alpha) - std::pow(m, alpha));
            aw[i](p) = da(i) / ga2(i) *
                       (std::pow(m + 2.0, alpha + 1.0) + std::pow(m, alpha + 1.0) -
                        2.0 * std::pow(m + 1.0, alpha + 1.0));
        }
        if (params.kernels[i].beta_decay != 0.0)
            throw std::invalid_argument(
                "adams_solve: fractional Adams weights cover beta_decay = 0 kernels only");
    }

    RiccatiSolution sol;
    sol.grid = grid;
    sol.utility = utility;
    sol.psi.setZero(n + 1, d);

    Eigen::MatrixXd fvals(n + 1, d); // f(t_j, psi_j) rows
    auto eval_f = [&](int j, const Eigen::VectorXd& psi) {
        return (forcing + driver(grid.T - grid.node(j), psi)).eval();
    };

    sol.psi.row(0) = offset(0).transpose();
    if (!sol.psi.row(0).allFinite())
        throw std::invalid_argument("adams_solve: offset is singular at t = 0");
    fvals.row(0) = eval_f(0, sol.psi.row(0).transpose()).transpose();

    for (int k = 0; k < n; ++k) {
        // Predictor.
        Eigen::VectorXd yp = Eigen::VectorXd::Zero(d);
        for (int i = 0; i < d; ++i) {
            double acc = 0.0;
            for (int j = 0; j <= k; ++j) acc += bw[i](k - j) * fvals(j, i);
            yp(i) = acc;
        }
        yp += offset(k + 1);
        const Eigen::VectorXd fp = eval_f(k + 1, yp);

        // Corrector (single PECE pass).
        Eigen::VectorXd y = Eigen::VectorXd::Zero(d);
        for (int i = 0; i < d; ++i) {
            const double alpha = params.kernels[i].alpha;
            double acc = da(i) / ga2(i) *
                         (std::pow(static_cast<double>(k), alpha + 1.0) -
                          (k - alpha) * std::pow(static_cast<double>(k + 1), alpha)) *
                         fvals(0, i);
            for (int j = 1; j <= k; ++j) acc += aw[i](k - j) * fvals(j, i);
            acc += da(i) / ga2(i) * fp(i);
            y(i) = acc;
        }
        y += offset(k + 1);

        sol.psi.row(k + 1) = y.transpose();
        if (!y.allFinite() || y.cwiseAbs().maxCoeff() > kBlowUpThreshold) {
            sol.blow_up = k + 1;
            if (hard_fail_on_blow_up)
                throw NumericalError("riccati: blow-up at node " + std::to_string(k + 1));
            // Keep the pre-blow-up prefix; later nodes stay zero.
            for (int j = k + 1; j <= n; ++j) sol.psi.row(j).setZero();
            return sol;
        }
        fvals.row(k + 1) = eval_f(k + 1, y).transpose();
    }
    return sol;
}

RiccatiSolution solve_riccati(const ModelParams& params, const UtilityProblem& utility,
                              const TimeGrid& grid, const Eigen::VectorXd& forcing) {
    auto drv = [&](double s, const Eigen::VectorXd& psi) {
        return utility.kind == UtilityKind::power ? driver_power(s, psi, params, utility)
                                                  : driver_exponential(s, psi, params, utility);
    };
    auto offs = [&](int) { return Eigen::VectorXd::Zero(params.d).eval(); };
    const bool hard = utility.kind == UtilityKind::exponential;
    return adams_solve(params, utility, grid, forcing, drv, offs, hard);
}

RiccatiSolution solve_riccati(const ModelParams& params, const UtilityProblem& utility,
                              const TimeGrid& grid) {
    return solve_riccati(params, utility, grid, riccati_forcing(params, utility));
}

AdmissibilityReport check_admissibility(const ModelParams& params, const RiccatiSolution& sol,
                                        double a_bound, double p) {
    if (!(p > 1.0)) throw std::invalid_argument("check_admissibility: p must be > 1");
    if (!(a_bound > 0.0)) throw std::invalid_argument("check_admissibility: a_bound must be > 0");
    AdmissibilityReport rep;
    const int d = params.d;

    double sigma_norm = 0.0; // |Sigma| = tr(Sigma^T Sigma) with Sigma = diag(rho)
    for (int i = 0; i < d; ++i) sigma_norm += params.rho(i) * params.rho(i);
    rep.a_p = std::max({p * (2.0 + sigma_norm), 2.0 * (8.0 * p * p - 2.0 * p) * (1.0 + sigma_norm * sigma_norm),
                        p * (1.0 + sigma_norm * sigma_norm)});

    double sup = 0.0;
    for (int j = 0; j <= sol.grid.n; ++j)
        for (int i = 0; i < d; ++i) {
            const double lam = params.sigma_v(i) * params.varsigma_at(i, sol.grid.node(j)) *
                               sol.psi(j, i);
            sup = std::max(sup, params.theta(i) * params.theta(i) + lam * lam);
        }
    rep.sup_term = sup;
    rep.bound = a_bound / rep.a_p;
    rep.theta_bound_ok = sup <= rep.bound;

    // Exponential integrability of U: int exp(p sup_t |U_t(e)|) nu_k(de);
    // eta >= 0 lets sup_t factor through as eta(e) * max_j |sum_i psi_i(t_j)|.
    rep.cond_u_finite = true;
    double sup_psi_sum = 0.0;
    for (int j = 0; j <= sol.grid.n; ++j)
        sup_psi_sum = std::max(sup_psi_sum, std::abs(sol.psi.row(j).sum()));
    const auto& quad = params.jumps;
    for (std::size_t k = 0; k < quad.nu.size(); ++k) {
        double integral = 0.0;
        if (quad.nu[k].intensity > 0.0 && quad.kappa != 0.0) {
            for (std::size_t m = 0; m < quad.nu[k].nodes.size(); ++m)
                integral += quad.nu[k].weights[m] *
                            std::exp(p * sup_psi_sum * quad.eta(quad.nu[k].nodes[m]));
        }
        rep.cond_u.push_back(integral);
        if (!std::isfinite(integral)) rep.cond_u_finite = false;
    }
    rep.pass = rep.theta_bound_ok && rep.cond_u_finite;
    return rep;
}

} // namespace volheston
