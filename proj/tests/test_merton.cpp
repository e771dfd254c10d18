#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "reference.hpp"
#include "volheston/merton.hpp"

using namespace volheston;

TEST_CASE("g0_curve") {
    SUBCASE("mu0 = 0 keeps g0 = v0") {
        ModelParams p = testref::one_asset_rough(0.6);
        p.mu0(0) = 0.0;
        const ForwardCurve fw = g0_curve(p, TimeGrid(1.0, 8));
        CHECK((fw.g0.array() - p.v0(0)).abs().maxCoeff() == 0.0);
    }
    SUBCASE("fractional closed form at t = 1") {
        ModelParams p = testref::one_asset_rough(0.6);
        p.v0(0) = 0.01;
        p.mu0(0) = 2.0;
        const TimeGrid grid(1.0, 10);
        const ForwardCurve fw = g0_curve(p, grid);
        const double expected = 0.01 + 2.0 / oracle::gamma_fn(1.6);
        CHECK(fw.g0(grid.n, 0) == doctest::Approx(expected).epsilon(1e-12));
        CHECK(expected == doctest::Approx(2.2484).epsilon(1e-4));
        CHECK(fw.g0(0, 0) == 0.01);
    }
    SUBCASE("constant kernel is affine in t") {
        ModelParams p = testref::one_asset_classic();
        const TimeGrid grid(2.0, 16);
        const ForwardCurve fw = g0_curve(p, grid);
        for (int k = 0; k <= grid.n; ++k)
            CHECK(fw.g0(k, 0) == doctest::Approx(0.04 + 0.08 * grid.node(k)).epsilon(1e-13));
    }
}

TEST_CASE("control_fields") {
    ModelParams p = testref::one_asset_rough(0.6);
    p.sigma_v(0) = 0.4;
    const TimeGrid grid(1.0, 4);
    RiccatiSolution sol;
    sol.grid = grid;
    sol.utility = UtilityProblem::exponential(0.2, 1);
    sol.psi = Eigen::MatrixXd::Zero(5, 1);

    SUBCASE("zero psi gives zero fields") {
        const ControlFields cf = control_fields(p, sol, 2, Eigen::VectorXd::Constant(1, 0.04));
        CHECK(cf.lambda_field(0) == 0.0);
    }
    SUBCASE("arithmetic: sigma 0.4, psi -0.5, V 0.04 -> -0.04") {
        sol.psi.setConstant(-0.5);
        const ControlFields cf = control_fields(p, sol, 1, Eigen::VectorXd::Constant(1, 0.04));
        CHECK(cf.lambda_field(0) == doctest::Approx(0.4 * (-0.5) * 0.2).epsilon(1e-14));
    }
    SUBCASE("kappa = 0 zeroes U at every node") {
        ModelParams pj = testref::one_asset_rough(0.6);
        pj.jumps = JumpMeasureQuadrature::gaussian(1, 2.0, 0.0);
        sol.psi.setConstant(-0.8);
        const ControlFields cf = control_fields(pj, sol, 1, Eigen::VectorXd::Constant(1, 0.04));
        for (double u : cf.u_nodes) CHECK(u == 0.0);
        CHECK(!cf.u_nodes.empty());
    }
}

namespace {

RiccatiSolution zero_solution(const UtilityProblem& u, const TimeGrid& grid, int d) {
    RiccatiSolution sol;
    sol.grid = grid;
    sol.utility = u;
    sol.psi = Eigen::MatrixXd::Zero(grid.n + 1, d);
    return sol;
}

} // namespace

TEST_CASE("strategies") {
    const TimeGrid grid(1.0, 8);

    SUBCASE("exponential with psi = 0, r = 0 is the Merton ratio") {
        ModelParams p = testref::one_asset_classic();
        p.rate = 0.0;
        const UtilityProblem u = UtilityProblem::exponential(0.2, 1);
        RiccatiSolution sol = zero_solution(u, grid, 1);
        const Eigen::VectorXd v = Eigen::VectorXd::Constant(1, 0.09);
        const StrategyPoint s = strategy_exponential(p, sol, 3, v);
        CHECK(s.alpha(0) == doctest::Approx(p.theta(0) * 0.3 / 0.2).epsilon(1e-14));
        CHECK(s.pi(0) == doctest::Approx(p.theta(0) / 0.2).epsilon(1e-14));
    }

    SUBCASE("V = 0 gives zero strategy and zero amounts") {
        ModelParams p = testref::one_asset_classic();
        const UtilityProblem u = UtilityProblem::exponential(0.2, 1);
        RiccatiSolution sol = zero_solution(u, grid, 1);
        sol.psi.setConstant(-0.4);
        const StrategyPoint s = strategy_exponential(p, sol, 0, Eigen::VectorXd::Zero(1));
        CHECK(s.alpha(0) == 0.0);
        CHECK(s.pi(0) == 0.0);
    }

    SUBCASE("power with psi = 0 is theta sqrt(V)/(1-gamma)") {
        ModelParams p = testref::one_asset_classic();
        const UtilityProblem u = UtilityProblem::power(0.25, 1);
        RiccatiSolution sol = zero_solution(u, grid, 1);
        const StrategyPoint s = strategy_power(p, sol, 2, Eigen::VectorXd::Constant(1, 0.04));
        CHECK(s.alpha(0) == doctest::Approx(p.theta(0) * 0.2 / 0.75).epsilon(1e-14));
    }

    SUBCASE("log strategy values and sqrt homogeneity") {
        ModelParams p = testref::two_asset();
        Eigen::VectorXd v(2);
        v << 0.01, 0.03;
        const StrategyPoint s = strategy_log(p, 0, v);
        CHECK(s.alpha(0) == doctest::Approx(0.01).epsilon(1e-14));
        CHECK(s.alpha(1) == doctest::Approx(0.1 * std::sqrt(0.03)).epsilon(1e-14));
        const StrategyPoint s4 = strategy_log(p, 0, (4.0 * v).eval());
        CHECK(s4.alpha(0) == doctest::Approx(2.0 * s.alpha(0)).epsilon(1e-14));
        CHECK(s4.alpha(1) == doctest::Approx(2.0 * s.alpha(1)).epsilon(1e-14));
    }

    SUBCASE("power strategy approaches the log strategy as gamma -> 0") {
        ModelParams p = testref::one_asset_rough(0.6);
        const TimeGrid g(1.0, 64);
        const Eigen::VectorXd v = Eigen::VectorXd::Constant(1, 0.05);
        const StrategyPoint slog = strategy_log(p, 10, v);
        double prev = 1e9;
        for (double gamma : {1e-2, 1e-3}) {
            const UtilityProblem u = UtilityProblem::power(gamma, 1);
            const RiccatiSolution sol = solve_riccati(p, u, g);
            const StrategyPoint s = strategy_power(p, sol, 10, v);
            const double diff = std::abs(s.alpha(0) - slog.alpha(0));
            CHECK(diff < prev);
            prev = diff;
        }
        CHECK(prev < 1e-4);
    }
}

TEST_CASE("value_exponential") {
    const TimeGrid grid(1.0, 64);

    SUBCASE("theta = 0, zeta = 0, kappa = 0 collapses to Theta_0") {
        ModelParams p = testref::one_asset_rough(0.7);
        p.theta(0) = 0.0;
        const UtilityProblem u = UtilityProblem::exponential(0.2, 1);
        const RiccatiSolution sol = solve_riccati(p, u, grid);
        const ValueReport rep = value_exponential(p, sol, 1.0, grid);
        const double theta0 = -std::exp(-0.2 * std::exp(0.02) * 1.0) / 0.2;
        CHECK(rep.value == doctest::Approx(theta0).epsilon(1e-14));
        CHECK(rep.y0 == 0.0);
    }

    SUBCASE("r = 0, x0 = 0 gives Theta_0 = -1/gamma") {
        ModelParams p = testref::one_asset_rough(0.7);
        p.theta(0) = 0.0;
        p.rate = 0.0;
        const UtilityProblem u = UtilityProblem::exponential(0.2, 1);
        const RiccatiSolution sol = solve_riccati(p, u, grid);
        const ValueReport rep = value_exponential(p, sol, 0.0, grid);
        CHECK(rep.value == doctest::Approx(-5.0).epsilon(1e-14));
    }

    SUBCASE("reference config: value is negative, beats the bond, increases in x0") {
        ModelParams p = testref::two_asset();
        const UtilityProblem u = UtilityProblem::exponential(0.2, 2);
        const RiccatiSolution sol = solve_riccati(p, u, grid);
        const ValueReport r1 = value_exponential(p, sol, 1.0, grid);
        const ValueReport r2 = value_exponential(p, sol, 1.5, grid);
        CHECK(r1.value < 0.0);
        const double bond_utility = -std::exp(-0.2 * std::exp(0.02) * 1.0) / 0.2;
        CHECK(r1.value >= bond_utility);
        CHECK(r2.value > r1.value);
        CHECK(r1.diagnostics.pass);
    }
}

TEST_CASE("value_power") {
    const TimeGrid grid(1.0, 64);

    SUBCASE("theta = 0, kappa = 0, r = 0 gives x0^gamma/gamma") {
        ModelParams p = testref::one_asset_rough(0.7);
        p.theta(0) = 0.0;
        p.rate = 0.0;
        const UtilityProblem u = UtilityProblem::power(0.5, 1);
        const RiccatiSolution sol = solve_riccati(p, u, grid);
        const ValueReport rep = value_power(p, sol, 2.0, grid);
        CHECK(rep.value == doctest::Approx(std::pow(2.0, 0.5) / 0.5).epsilon(1e-14));
    }

    SUBCASE("x0 = 1, gamma = 0.5, r = 0.02, theta = 0: 2 e^{0.01}") {
        ModelParams p = testref::one_asset_rough(0.7);
        p.theta(0) = 0.0;
        const UtilityProblem u = UtilityProblem::power(0.5, 1);
        const RiccatiSolution sol = solve_riccati(p, u, grid);
        const ValueReport rep = value_power(p, sol, 1.0, grid);
        CHECK(rep.value == doctest::Approx(2.0 * std::exp(0.01)).epsilon(1e-12));
        CHECK(rep.value == doctest::Approx(2.0201).epsilon(1e-4));
    }

    SUBCASE("monotone in x0 and positive") {
        ModelParams p = testref::two_asset();
        const UtilityProblem u = UtilityProblem::power(0.2, 2);
        const RiccatiSolution sol = solve_riccati(p, u, grid);
        const ValueReport r1 = value_power(p, sol, 1.0, grid);
        const ValueReport r2 = value_power(p, sol, 2.0, grid);
        CHECK(r1.value > 0.0);
        CHECK(r2.value > r1.value);
    }

    SUBCASE("refuses to evaluate past blow-up") {
        ModelParams p = testref::one_asset_classic();
        p.theta(0) = 2.0;
        p.sigma_v(0) = 2.5;
        p.rho(0) = 0.9;
        p.D(0, 0) = 0.0;
        const TimeGrid g(5.0, 200);
        const UtilityProblem u = UtilityProblem::power(0.9, 1);
        const RiccatiSolution sol = solve_riccati(p, u, g);
        REQUIRE(sol.blow_up.has_value());
        CHECK_THROWS_AS(value_power(p, sol, 1.0, g), NumericalError);
    }
}

TEST_CASE("expected_variance") {
    SUBCASE("node 0 is v0 and D = 0 gives g0 exactly") {
        ModelParams p = testref::one_asset_rough(0.6);
        p.D(0, 0) = 0.0;
        const TimeGrid grid(1.0, 50);
        const Eigen::MatrixXd ev = expected_variance(p, grid);
        const ForwardCurve fw = g0_curve(p, grid);
        CHECK(ev(0, 0) == doctest::Approx(p.v0(0)).epsilon(1e-14));
        CHECK((ev - fw.g0).cwiseAbs().maxCoeff() < 1e-12);
    }

    SUBCASE("CIR mean to 1e-4 at n = 400") {
        ModelParams p = testref::one_asset_classic(); // lambda = 2, mu = 0.08
        const TimeGrid grid(1.0, 400);
        const Eigen::MatrixXd ev = expected_variance(p, grid);
        double max_err = 0.0;
        for (int k = 0; k <= grid.n; ++k) {
            const double t = grid.node(k);
            const double mean = 0.08 / 2.0 + (0.04 - 0.08 / 2.0) * std::exp(-2.0 * t);
            max_err = std::max(max_err, std::abs(ev(k, 0) - mean));
        }
        CHECK(max_err < 1e-4);
    }
}

TEST_CASE("value_log") {
    SUBCASE("theta = 0 is the bond value") {
        ModelParams p = testref::one_asset_rough(0.6);
        p.theta(0) = 0.0;
        const ValueReport rep = value_log(p, 2.0, TimeGrid(1.0, 32));
        CHECK(rep.value == doctest::Approx(std::log(2.0) + 0.02).epsilon(1e-13));
    }

    SUBCASE("CIR closed-form integral to 1e-4") {
        ModelParams p = testref::one_asset_classic();
        const TimeGrid grid(1.0, 400);
        const ValueReport rep = value_log(p, 1.0, grid);
        // int_0^T (mu/l + (v0 - mu/l) e^{-l s}) ds, l = 2, mu = 0.08, v0 = 0.04
        const double l = 2.0, mu = 0.08, v0 = 0.04, T = 1.0;
        const double integral = mu / l * T + (v0 - mu / l) * (1.0 - std::exp(-l * T)) / l;
        const double expect = 0.02 * T + 0.5 * 0.3 * 0.3 * integral;
        CHECK(rep.value == doctest::Approx(expect).epsilon(1e-4));
    }

    SUBCASE("additive in log x0") {
        ModelParams p = testref::two_asset();
        const TimeGrid grid(1.0, 50);
        const ValueReport a = value_log(p, 1.0, grid);
        const ValueReport b = value_log(p, 3.0, grid);
        CHECK(b.value - a.value == doctest::Approx(std::log(3.0)).epsilon(1e-13));
    }
}

TEST_CASE("indifference_price") {
    const TimeGrid grid(1.0, 100);

    SUBCASE("zeta = 0 prices at zero") {
        ModelParams p = testref::two_asset();
        const IndifferencePrice ip =
            indifference_price(p, 0.2, Eigen::VectorXd::Zero(2), 1.0, grid);
        CHECK(ip.price == doctest::Approx(0.0).epsilon(1e-12));
    }

    SUBCASE("positive claim loading has positive buy price") {
        ModelParams p = testref::two_asset(2.0, 0.05);
        const IndifferencePrice ip =
            indifference_price(p, 0.2, Eigen::VectorXd::Constant(2, 0.005), 1.0, grid);
        CHECK(ip.price > 0.0);
    }

    SUBCASE("definitional and displayed routes agree at gamma = 1") {
        ModelParams p = testref::two_asset();
        const IndifferencePrice ip =
            indifference_price(p, 1.0, Eigen::VectorXd::Constant(2, 0.004), 1.0, grid);
        CHECK(ip.price == doctest::Approx(ip.displayed).epsilon(1e-10));
        // away from gamma = 1 the displayed forcings differ and so do the routes
        const IndifferencePrice ip2 =
            indifference_price(p, 0.2, Eigen::VectorXd::Constant(2, 0.004), 1.0, grid);
        CHECK(std::abs(ip2.discrepancy) > 1e-8);
    }
}

TEST_CASE("argmax invariance: closed-form strategies maximize the drift expressions") {
    ModelParams p = testref::two_asset();
    const TimeGrid grid(1.0, 100);
    std::mt19937_64 eng(2718);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    const UtilityProblem ue = UtilityProblem::exponential(0.2, 2);
    const UtilityProblem up = UtilityProblem::power(0.2, 2);
    const RiccatiSolution se = solve_riccati(p, ue, grid);
    const RiccatiSolution sp = solve_riccati(p, up, grid);

    const double step = 1e-3;
    auto scan_1d = [&](const std::function<double(double)>& f, bool maximize) {
        double best_x = -2.0, best_v = f(-2.0);
        for (double x = -2.0 + step; x <= 2.0 + 1e-12; x += step) {
            const double v = f(x);
            if (maximize ? v > best_v : v < best_v) {
                best_v = v;
                best_x = x;
            }
        }
        return best_x;
    };

    for (int rep = 0; rep < 10; ++rep) {
        const int node = 1 + static_cast<int>(uni(eng) * (grid.n - 1));
        Eigen::VectorXd v(2);
        v << 2.5 * uni(eng), 2.5 * uni(eng);
        const double t = grid.node(node);
        const double disc = std::exp(p.rate * (grid.T - t));
        Eigen::VectorXd lambda(2), lam_e(2), lam_p(2);
        for (int i = 0; i < 2; ++i) {
            lambda(i) = p.theta(i) * std::sqrt(v(i));
            lam_e(i) = lambda(i) + ue.gamma * p.rho(i) * p.sigma_v(i) * se.psi(grid.n - node, i) *
                                       std::sqrt(v(i));
            lam_p(i) = lambda(i) + p.rho(i) * p.sigma_v(i) * sp.psi(grid.n - node, i) * std::sqrt(v(i));
        }

        // exponential drift factor is separable across components
        const StrategyPoint ae = strategy_exponential(p, se, node, v);
        for (int i = 0; i < 2; ++i) {
            auto f = [&](double x) {
                return 0.5 * ue.gamma * ue.gamma * disc * disc * x * x -
                       ue.gamma * disc * x * lam_e(i);
            };
            const double bx = scan_1d(f, false);
            CHECK(std::abs(bx - ae.alpha(i)) <= step);
        }

        const StrategyPoint ap = strategy_power(p, sp, node, v);
        for (int i = 0; i < 2; ++i) {
            auto f = [&](double x) {
                return 0.5 * up.gamma * (up.gamma - 1.0) * x * x + up.gamma * x * lam_p(i);
            };
            const double bx = scan_1d(f, true);
            CHECK(std::abs(bx - ap.alpha(i)) <= step);
        }

        const StrategyPoint al = strategy_log(p, node, v);
        for (int i = 0; i < 2; ++i) {
            auto f = [&](double x) { return x * lambda(i) - 0.5 * x * x; };
            const double bx = scan_1d(f, true);
            CHECK(std::abs(bx - al.alpha(i)) <= step);
        }
    }
}
