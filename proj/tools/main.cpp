#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "volheston/config.hpp"
#include "volheston/io.hpp"
#include "volheston/kernels.hpp"
#include "volheston/laplace.hpp"
#include "volheston/merton.hpp"
#include "volheston/riccati.hpp"
#include "volheston/simulation.hpp"

namespace vh = volheston;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

std::ofstream open_artifact(const std::string& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write artifact " + name + " in " + dir);
    return out;
}

void write_json(const std::string& dir, const std::string& name, const ordered_json& j) {
    auto out = open_artifact(dir, name);
    out << j.dump(2) << "\n";
}

vh::RiccatiSolution solve_for_utility(const vh::ModelParams& params, const vh::UtilityProblem& u,
                                      const vh::TimeGrid& grid) {
    u.validate(params.theta);
    return vh::solve_riccati(params, u, grid);
}

ordered_json value_report_json(const vh::ExperimentConfig& cfg, const vh::ValueReport& rep,
                               const vh::TimeGrid& grid, double x0) {
    ordered_json j;
    j["utility"] = cfg.utility_kind;
    j["gamma"] = cfg.gamma;
    j["zeta"] = cfg.zeta;
    j["x0"] = x0;
    j["value"] = rep.value;
    j["y0"] = rep.y0;
    if (rep.t_max)
        j["t_max"] = *rep.t_max;
    else
        j["t_max"] = nullptr;
    j["admissible"] = rep.diagnostics.pass;
    ordered_json curve = ordered_json::array();
    for (int k = 0; k <= grid.n; ++k) {
        ordered_json row = ordered_json::array();
        row.push_back(grid.node(k));
        for (int i = 0; i < rep.strategy_curve.cols(); ++i) row.push_back(rep.strategy_curve(k, i));
        curve.push_back(row);
    }
    j["strategy_curve"] = curve;
    j["config_hash"] = cfg.config_hash();
    return j;
}

void cmd_solve_riccati(const vh::ExperimentConfig& cfg) {
    const vh::ModelParams params = cfg.to_model_params();
    const vh::TimeGrid grid = cfg.to_grid();
    const vh::UtilityProblem utility = cfg.to_utility();
    if (utility.kind == vh::UtilityKind::log_utility)
        throw vh::ConfigError({"utility.kind: solve-riccati needs exponential or power"});
    vh::RiccatiSolution sol = solve_for_utility(params, utility, grid);
    auto out = open_artifact(cfg.out_dir, "riccati.csv");
    out << "t";
    for (int i = 1; i <= params.d; ++i) out << ",psi_" << i;
    out << "\n";
    for (int k = 0; k <= grid.n; ++k) {
        out << vh::format_double(grid.node(k));
        for (int i = 0; i < params.d; ++i) out << "," << vh::format_double(sol.psi(k, i));
        out << "\n";
    }
}

void cmd_simulate(const vh::ExperimentConfig& cfg, bool with_wealth, double x0) {
    const vh::ModelParams params = cfg.to_model_params();
    const vh::TimeGrid grid = cfg.to_grid();
    vh::PathBundle bundle = vh::simulate_V(params, grid, cfg.paths, cfg.seed, with_wealth);

    std::vector<double> X;
    if (with_wealth) {
        const vh::UtilityProblem utility = cfg.to_utility();
        utility.validate(params.theta);
        Eigen::MatrixXd curve;
        if (utility.kind == vh::UtilityKind::log_utility) {
            curve = vh::strategy_multiplier_curve(params, utility, nullptr, grid);
        } else {
            vh::RiccatiSolution sol = vh::solve_riccati(params, utility, grid);
            curve = vh::strategy_multiplier_curve(params, utility, &sol, grid);
        }
        const vh::StrategyFn strat = vh::multiplier_strategy(curve);
        X = utility.kind == vh::UtilityKind::exponential
                ? vh::simulate_wealth_additive(params, bundle, strat, x0)
                : vh::simulate_wealth_multiplicative(params, bundle, strat, x0);
    }

    auto out = open_artifact(cfg.out_dir, "paths.csv");
    out << "path_id,k,t";
    for (int i = 1; i <= params.d; ++i) out << ",V_" << i;
    if (with_wealth) out << ",X";
    out << "\n";
    for (int p = 0; p < bundle.n_paths; ++p)
        for (int k = 0; k <= grid.n; ++k) {
            out << p << "," << k << "," << vh::format_double(grid.node(k));
            for (int i = 0; i < params.d; ++i) out << "," << vh::format_double(bundle.v(p, k, i));
            if (with_wealth)
                out << "," << vh::format_double(X[static_cast<std::size_t>(p) * (grid.n + 1) + k]);
            out << "\n";
        }
}

void cmd_strategy(const vh::ExperimentConfig& cfg) {
    const vh::ModelParams params = cfg.to_model_params();
    const vh::TimeGrid grid = cfg.to_grid();
    const vh::UtilityProblem utility = cfg.to_utility();
    utility.validate(params.theta);
    Eigen::MatrixXd curve;
    if (utility.kind == vh::UtilityKind::log_utility) {
        curve = vh::strategy_multiplier_curve(params, utility, nullptr, grid);
    } else {
        vh::RiccatiSolution sol = solve_for_utility(params, utility, grid);
        curve = vh::strategy_multiplier_curve(params, utility, &sol, grid);
    }
    auto out = open_artifact(cfg.out_dir, "strategy.csv");
    out << "t";
    for (int i = 1; i <= params.d; ++i) out << ",m_" << i;
    out << "\n";
    for (int k = 0; k <= grid.n; ++k) {
        out << vh::format_double(grid.node(k));
        for (int i = 0; i < params.d; ++i) out << "," << vh::format_double(curve(k, i));
        out << "\n";
    }
}

void cmd_value(const vh::ExperimentConfig& cfg, double x0) {
    const vh::ModelParams params = cfg.to_model_params();
    const vh::TimeGrid grid = cfg.to_grid();
    const vh::UtilityProblem utility = cfg.to_utility();
    utility.validate(params.theta);
    vh::ValueReport rep;
    switch (utility.kind) {
        case vh::UtilityKind::exponential:
            rep = vh::value_exponential(params, vh::solve_riccati(params, utility, grid), x0, grid);
            break;
        case vh::UtilityKind::power:
            rep = vh::value_power(params, vh::solve_riccati(params, utility, grid), x0, grid);
            break;
        case vh::UtilityKind::log_utility:
            rep = vh::value_log(params, x0, grid);
            break;
    }
    write_json(cfg.out_dir, "value.json", value_report_json(cfg, rep, grid, x0));
}

void cmd_indifference(const vh::ExperimentConfig& cfg, double x0) {
    const vh::ModelParams params = cfg.to_model_params();
    const vh::TimeGrid grid = cfg.to_grid();
    if (cfg.utility_kind != "exponential")
        throw vh::ConfigError({"utility.kind: indifference pricing needs exponential utility"});
    Eigen::Map<const Eigen::VectorXd> zeta(cfg.zeta.data(), static_cast<int>(cfg.zeta.size()));
    vh::IndifferencePrice p = vh::indifference_price(params, cfg.gamma, zeta, x0, grid);
    ordered_json j;
    j["gamma"] = cfg.gamma;
    j["zeta"] = cfg.zeta;
    j["x0"] = x0;
    j["price"] = p.price;
    j["displayed_formula"] = p.displayed;
    j["discrepancy"] = p.discrepancy;
    j["config_hash"] = cfg.config_hash();
    write_json(cfg.out_dir, "indifference.json", j);
}

void cmd_laplace(const vh::ExperimentConfig& cfg, double c, double u) {
    const vh::ModelParams params = cfg.to_model_params();
    const vh::TimeGrid grid = cfg.to_grid();
    vh::TestMeasure m{Eigen::VectorXd::Constant(params.d, c),
                      Eigen::VectorXd::Constant(params.d, u)};
    vh::RiccatiSolution psi = vh::riccati_measure(params, m, grid);
    const double formula = vh::laplace_formula(params, psi, m, grid);
    vh::McLaplaceResult mc = vh::mc_laplace(params, m, grid, cfg.paths, cfg.seed);
    const double z = mc.std_error > 0.0 ? (mc.estimate - formula) / mc.std_error : 0.0;
    ordered_json j;
    j["measure"] = {{"density", c}, {"atom_at_T", u}};
    j["formula_value"] = formula;
    j["mc_estimate"] = mc.estimate;
    j["mc_se"] = mc.std_error;
    j["z_score"] = z;
    j["pass"] = mc.finite && std::abs(z) <= 3.0;
    if (!mc.finite) j["diagnostic"] = mc.diagnostic;
    j["config_hash"] = cfg.config_hash();
    write_json(cfg.out_dir, "laplace.json", j);
    if (!mc.finite) throw vh::NumericalError("laplace-check: " + mc.diagnostic);
}

void cmd_expected_variance(const vh::ExperimentConfig& cfg) {
    const vh::ModelParams params = cfg.to_model_params();
    const vh::TimeGrid grid = cfg.to_grid();
    Eigen::MatrixXd ev = vh::expected_variance(params, grid);
    auto out = open_artifact(cfg.out_dir, "expected_variance.csv");
    out << "t";
    for (int i = 1; i <= params.d; ++i) out << ",ev_" << i;
    out << "\n";
    for (int k = 0; k <= grid.n; ++k) {
        out << vh::format_double(grid.node(k));
        for (int i = 0; i < params.d; ++i) out << "," << vh::format_double(ev(k, i));
        out << "\n";
    }
}

void cmd_convergence(const vh::ExperimentConfig& cfg) {
    const vh::ModelParams params = cfg.to_model_params();
    const vh::UtilityProblem utility = cfg.to_utility();
    if (utility.kind == vh::UtilityKind::log_utility)
        throw vh::ConfigError({"utility.kind: convergence needs exponential or power"});
    utility.validate(params.theta);
    auto out = open_artifact(cfg.out_dir, "convergence.csv");
    out << "n,error\n";
    for (int n : {50, 100, 200}) {
        vh::RiccatiSolution coarse = vh::solve_riccati(params, utility, vh::TimeGrid(cfg.T, n));
        vh::RiccatiSolution fine = vh::solve_riccati(params, utility, vh::TimeGrid(cfg.T, 2 * n));
        double err = 0.0;
        for (int j = 0; j <= n; ++j)
            err = std::max(err, (coarse.psi.row(j) - fine.psi.row(2 * j)).cwiseAbs().maxCoeff());
        out << n << "," << vh::format_double(err) << "\n";
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Merton portfolio optimization under multivariate Volterra-Heston volatility with jumps"};
    app.require_subcommand(1);

    std::string config_path;
    vh::ConfigOverrides ov;
    double x0 = 1.0, measure_c = 0.5, measure_u = 0.0;
    bool with_wealth = false;

    std::uint64_t seed_val = 0;
    int paths_val = 0, n_val = 0;
    double gamma_val = 0.0;
    std::string utility_val, out_val;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "configuration file")->required();
        sub->add_option("--out", out_val, "output directory (overrides output.dir)");
        sub->add_option("--seed", seed_val, "RNG seed (overrides mc.seed)");
        sub->add_option("--paths", paths_val, "Monte Carlo paths (overrides mc.paths)");
        sub->add_option("--n", n_val, "grid steps (overrides grid.n)");
        sub->add_option("--utility", utility_val, "utility kind (overrides utility.kind)")
            ->check(CLI::IsMember({"exponential", "power", "log"}));
        sub->add_option("--gamma", gamma_val, "risk aversion (overrides utility.gamma)");
    };

    CLI::App* c_riccati = app.add_subcommand("solve-riccati", "solve the Riccati equations -> riccati.csv");
    CLI::App* c_sim = app.add_subcommand("simulate", "simulate variance paths -> paths.csv");
    c_sim->add_flag("--wealth", with_wealth, "append the optimal-strategy wealth column");
    c_sim->add_option("--x0", x0, "initial wealth");
    CLI::App* c_strat = app.add_subcommand("optimal-strategy", "strategy multipliers -> strategy.csv");
    CLI::App* c_value = app.add_subcommand("value", "value function -> value.json");
    c_value->add_option("--x0", x0, "initial wealth");
    CLI::App* c_indiff = app.add_subcommand("indifference", "indifference buy price -> indifference.json");
    c_indiff->add_option("--x0", x0, "initial wealth");
    CLI::App* c_laplace = app.add_subcommand("laplace-check", "transform vs Monte Carlo -> laplace.json");
    c_laplace->add_option("--c", measure_c, "Lebesgue density per asset");
    c_laplace->add_option("--u", measure_u, "atom at T per asset");
    CLI::App* c_ev = app.add_subcommand("expected-variance", "E[V_t] curve -> expected_variance.csv");
    CLI::App* c_conv = app.add_subcommand("convergence", "psi grid refinement -> convergence.csv");
    for (CLI::App* sub : {c_riccati, c_sim, c_strat, c_value, c_indiff, c_laplace, c_ev, c_conv})
        add_common(sub);

    CLI11_PARSE(app, argc, argv);

    try {
        if (!out_val.empty()) ov.out_dir = out_val;
        for (CLI::App* sub : app.get_subcommands()) {
            if (sub->count("--seed")) ov.seed = seed_val;
            if (sub->count("--paths")) ov.paths = paths_val;
            if (sub->count("--n")) ov.n = n_val;
            if (sub->count("--utility")) ov.utility = utility_val;
            if (sub->count("--gamma")) ov.gamma = gamma_val;
        }
        const vh::ExperimentConfig cfg = vh::load_config(config_path, ov);

        if (c_riccati->parsed()) cmd_solve_riccati(cfg);
        if (c_sim->parsed()) cmd_simulate(cfg, with_wealth, x0);
        if (c_strat->parsed()) cmd_strategy(cfg);
        if (c_value->parsed()) cmd_value(cfg, x0);
        if (c_indiff->parsed()) cmd_indifference(cfg, x0);
        if (c_laplace->parsed()) cmd_laplace(cfg, measure_c, measure_u);
        if (c_ev->parsed()) cmd_expected_variance(cfg);
        if (c_conv->parsed()) cmd_convergence(cfg);
        return 0;
    } catch (const vh::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::domain_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const vh::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
