#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "volheston/kernels.hpp"

namespace volheston {

// Discretized jump measures nu_k, k = 0..d (index 0 is the state-independent
// component).  Marks e are mapped to a common per-asset jump size
// eta(e) = kappa * e^+ (positive part keeps jump sizes nonnegative).
struct JumpMeasureQuadrature {
    struct Measure {
        std::vector<double> nodes;
        std::vector<double> weights; // nonnegative, summing to the total mass
        double intensity = 0.0;
    };
    std::vector<Measure> nu; // size d + 1
    double kappa = 0.0;
    bool positive_part = true;
    std::string mark_law = "gaussian";

    double eta(double e) const { return kappa * (positive_part ? std::max(e, 0.0) : e); }

    // int eta d(nu_0); closed form beta*kappa/sqrt(2 pi) for the Gaussian mark
    // law, quadrature nodes otherwise.
    double eta_compensator() const;

    // Total simulated arrival intensity (mass of nu_0).
    double intensity0() const { return nu.empty() ? 0.0 : nu[0].intensity; }

    bool state_dependent() const;

    void validate() const;

    // nu_0 = intensity * N(0,1) through Gauss-Hermite nodes; nu_i = 0 for i >= 1.
    static JumpMeasureQuadrature gaussian(int d, double intensity, double kappa, int n_nodes = 64);
    static JumpMeasureQuadrature none(int d);
};

// Market and variance-process parameters.
struct ModelParams {
    int d = 1;
    std::vector<KernelSpec> kernels;
    Eigen::VectorXd v0;       // initial variance, >= 0
    Eigen::VectorXd mu0;      // mean-reversion level, >= 0
    Eigen::MatrixXd D;        // drift matrix, off-diagonal >= 0
    Eigen::VectorXd rho;      // stock/variance correlations in [-1, 1]
    Eigen::VectorXd theta;    // risk premia, >= 0
    Eigen::VectorXd sigma_v;  // vol-of-vol, > 0
    Eigen::VectorXd varsigma; // positive scaling (constant in time), default 1
    double rate = 0.02;
    JumpMeasureQuadrature jumps;

    void validate() const;
    double varsigma_at(int i, double /*t*/) const { return varsigma(i); }
};

enum class UtilityKind { exponential, power, log_utility };

struct UtilityProblem {
    UtilityKind kind = UtilityKind::exponential;
    double gamma = 0.0;       // > 0 (exponential), in (0,1) (power), unused (log)
    Eigen::VectorXd zeta;     // terminal-claim loadings (exponential only)

    static UtilityProblem exponential(double gamma, const Eigen::VectorXd& zeta);
    static UtilityProblem exponential(double gamma, int d) {
        return exponential(gamma, Eigen::VectorXd::Zero(d));
    }
    static UtilityProblem power(double gamma, int d);
    static UtilityProblem log_utility(int d);

    void validate(const Eigen::VectorXd& theta) const;
};

} // namespace volheston
