#include "volheston/model.hpp"

#include <cmath>

namespace volheston {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}

double JumpMeasureQuadrature::eta_compensator() const {
    if (nu.empty() || intensity0() == 0.0 || kappa == 0.0) return 0.0;
    if (mark_law == "gaussian" && positive_part) return intensity0() * kappa * kInvSqrt2Pi;
    double acc = 0.0;
    for (std::size_t m = 0; m < nu[0].nodes.size(); ++m) acc += nu[0].weights[m] * eta(nu[0].nodes[m]);
    return acc;
}

bool JumpMeasureQuadrature::state_dependent() const {
    for (std::size_t k = 1; k < nu.size(); ++k)
        if (nu[k].intensity != 0.0) return true;
    return false;
}

void JumpMeasureQuadrature::validate() const {
    if (kappa < 0.0) throw std::invalid_argument("jumps: kappa must be >= 0");
    if (!positive_part && kappa != 0.0)
        throw std::invalid_argument("jumps: eta must be nonnegative (positive part required)");
    for (const auto& m : nu) {
        if (m.nodes.size() != m.weights.size())
            throw std::invalid_argument("jumps: node/weight size mismatch");
        double tot = 0.0;
        for (double w : m.weights) {
            if (w < 0.0) throw std::invalid_argument("jumps: weights must be >= 0");
            tot += w;
        }
        if (std::abs(tot - m.intensity) > 1e-8 * std::max(1.0, m.intensity))
            throw std::invalid_argument("jumps: weights must sum to the measure mass");
    }
}

JumpMeasureQuadrature JumpMeasureQuadrature::gaussian(int d, double intensity, double kappa,
                                                      int n_nodes) {
    JumpMeasureQuadrature q;
    q.kappa = kappa;
    q.mark_law = "gaussian";
    q.nu.resize(d + 1);
    for (auto& m : q.nu) m.intensity = 0.0;
    q.nu[0].intensity = intensity;
    if (intensity > 0.0) {
        // Golub-Welsch for Gauss-Hermite: tridiagonal with off-diagonal sqrt(k/2).
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n_nodes, n_nodes);
        for (int k = 1; k < n_nodes; ++k) {
            const double b = std::sqrt(0.5 * k);
            J(k, k - 1) = b;
            J(k - 1, k) = b;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
        const double sqrt_pi = std::sqrt(M_PI);
        q.nu[0].nodes.resize(n_nodes);
        q.nu[0].weights.resize(n_nodes);
        for (int k = 0; k < n_nodes; ++k) {
            const double w_gh = sqrt_pi * es.eigenvectors()(0, k) * es.eigenvectors()(0, k);
            q.nu[0].nodes[k] = std::sqrt(2.0) * es.eigenvalues()(k); // mark value
            q.nu[0].weights[k] = intensity * w_gh / sqrt_pi;
        }
    }
    return q;
}

JumpMeasureQuadrature JumpMeasureQuadrature::none(int d) {
    JumpMeasureQuadrature q;
    q.nu.resize(d + 1);
    return q;
}

void ModelParams::validate() const {
    auto dim_ok = [&](const Eigen::VectorXd& v) { return static_cast<int>(v.size()) == d; };
    if (d < 1) throw std::invalid_argument("model: d must be >= 1");
    if (static_cast<int>(kernels.size()) != d) throw std::invalid_argument("model: kernels size != d");
    for (const auto& k : kernels) k.validate();
    if (!dim_ok(v0) || !dim_ok(mu0) || !dim_ok(rho) || !dim_ok(theta) || !dim_ok(sigma_v) ||
        !dim_ok(varsigma))
        throw std::invalid_argument("model: parameter vector length != d");
    if (D.rows() != d || D.cols() != d) throw std::invalid_argument("model: D must be d x d");
    for (int i = 0; i < d; ++i) {
        if (v0(i) < 0.0) throw std::invalid_argument("model: v0 must be >= 0");
        if (mu0(i) < 0.0) throw std::invalid_argument("model: mu0 must be >= 0");
        if (rho(i) < -1.0 || rho(i) > 1.0) throw std::invalid_argument("model: rho out of [-1,1]");
        if (theta(i) < 0.0) throw std::invalid_argument("model: theta must be >= 0");
        if (sigma_v(i) < 0.0) throw std::invalid_argument("model: sigma_v must be >= 0");
        if (!(varsigma(i) > 0.0)) throw std::invalid_argument("model: varsigma must be > 0");
        for (int j = 0; j < d; ++j)
            if (i != j && D(i, j) < 0.0)
                throw std::invalid_argument("model: off-diagonal D entries must be >= 0");
    }
    jumps.validate();
}

UtilityProblem UtilityProblem::exponential(double gamma, const Eigen::VectorXd& zeta) {
    UtilityProblem u;
    u.kind = UtilityKind::exponential;
    u.gamma = gamma;
    u.zeta = zeta;
    if (!(gamma > 0.0)) throw std::invalid_argument("utility: exponential needs gamma > 0");
    return u;
}

UtilityProblem UtilityProblem::power(double gamma, int d) {
    UtilityProblem u;
    u.kind = UtilityKind::power;
    u.gamma = gamma;
    u.zeta = Eigen::VectorXd::Zero(d);
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("utility: power needs gamma in (0,1)");
    return u;
}

UtilityProblem UtilityProblem::log_utility(int d) {
    UtilityProblem u;
    u.kind = UtilityKind::log_utility;
    u.gamma = 0.0;
    u.zeta = Eigen::VectorXd::Zero(d);
    return u;
}

void UtilityProblem::validate(const Eigen::VectorXd& theta) const {
    const int d = static_cast<int>(theta.size());
    if (static_cast<int>(zeta.size()) != d) throw std::invalid_argument("utility: zeta length != d");
    switch (kind) {
        case UtilityKind::exponential:
            if (!(gamma > 0.0)) throw std::invalid_argument("utility: exponential needs gamma > 0");
            for (int i = 0; i < d; ++i) {
                const double cap = theta(i) * theta(i) / (2.0 * gamma);
                if (zeta(i) > cap + 1e-15)
                    throw std::invalid_argument("utility: zeta[" + std::to_string(i) +
                                                "] violates zeta_i <= theta_i^2/(2 gamma) (" +
                                                std::to_string(zeta(i)) + " > " + std::to_string(cap) +
                                                ")");
            }
            break;
        case UtilityKind::power:
            if (!(gamma > 0.0 && gamma < 1.0))
                throw std::invalid_argument("utility: power needs gamma in (0,1)");
            if (zeta.cwiseAbs().maxCoeff() != 0.0)
                throw std::invalid_argument("utility: power requires zeta = 0");
            break;
        case UtilityKind::log_utility:
            break;
    }
}

} // namespace volheston
