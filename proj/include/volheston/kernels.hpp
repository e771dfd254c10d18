#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <vector>

#include "volheston/grid.hpp"

namespace volheston {

enum class KernelKind { constant, fractional, exponential, fractional_exponential };

// Scalar convolution kernel K(t) = t^(alpha-1) e^(-beta t) / Gamma(alpha).
// constant:    alpha = 1, beta = 0  (K == 1)
// fractional:  alpha in (1/2, 1], beta = 0
// exponential: alpha = 1, beta >= 0
struct KernelSpec {
    KernelKind kind = KernelKind::constant;
    double alpha = 1.0;
    double beta_decay = 0.0;

    static KernelSpec constant();
    static KernelSpec fractional(double alpha);
    static KernelSpec exponential(double beta);
    static KernelSpec fractional_exponential(double alpha, double beta);

    void validate() const;
    bool bounded_at_zero() const { return alpha == 1.0; }
};

// K(t) for t > 0; throws std::domain_error at t <= 0 (singular for alpha < 1).
double eval_kernel(const KernelSpec& spec, double t);

// Integral of K(t_k - s) over s in [a, b], 0 <= a < b <= t_k.
// Closed form for beta = 0; adaptive quadrature (rel tol 1e-10) otherwise.
double integrated_kernel(const KernelSpec& spec, double a, double b, double t_k);

// Integral of K(t_k - s) K(t_j - s) over s in [a, b], a < b <= min(t_k, t_j).
// The endpoint singularity at b = min(t_k, t_j) is removed by the substitution
// u = (min - s)^alpha before quadrature.
double covariance_entry(const KernelSpec& spec, double t_k, double t_j, double a, double b);

// Joint covariance of the kernel-weighted increments over the step
// [t_{l-1}, t_l]:  rows/cols 0..n-l cover int K(t_k - s) dW_s for k = l..n,
// and the last row/col is the plain increment dW (variance delta, cross term
// equal to the integrated kernel).  Symmetric PSD by construction.
Eigen::MatrixXd build_step_covariance(const KernelSpec& spec, const TimeGrid& grid, int step);

struct CholeskyResult {
    Eigen::MatrixXd L;  // lower triangular, L L^T ~= M + eps I
    double eps = 0.0;
};

// Cholesky with jitter escalation {0, j0, 10 j0, ...}; j0 defaults to
// 1e-12 * max diagonal.  Throws NumericalError once eps > 1e-4 * max diagonal.
CholeskyResult stabilized_cholesky(const Eigen::MatrixXd& M, double jitter_start = -1.0);

// Generalized Mittag-Leffler function E_{alpha,beta}(x), series summation to
// 1e-16 relative; |x| <= 50.
double mittag_leffler(double alpha, double beta_ml, double x);

// Nodes of R_D and R'_D where R_D - R_D * (K D) = I (matrix resolvent of the
// diagonal kernel against D).  For singular kernels R' has a t^(alpha-1)
// blow-up at 0; the smooth remainder S = R' - K D is kept alongside so that
// consumers can integrate the singular part in closed form.
struct ResolventCurve {
    TimeGrid grid;
    std::vector<Eigen::MatrixXd> R;        // R_D(t_k)
    std::vector<Eigen::MatrixXd> Rprime;   // R'_D(t_k); NaN entries at k = 0 when singular
    std::vector<Eigen::MatrixXd> smooth;   // S(t_k) = R'_D(t_k) - K(t_k) D
    std::vector<KernelSpec> kernels;
    Eigen::MatrixXd D;
};

ResolventCurve resolvent(const std::vector<KernelSpec>& kernels, const Eigen::MatrixXd& D,
                         const TimeGrid& grid);

// Failure of a numerical procedure (factorization breakdown, blow-up, ...).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {
// Adaptive Gauss-Kronrod 7/15 on [a, b] to the requested relative tolerance.
double adaptive_gk(const std::function<double(double)>& f, double a, double b, double rel_tol);
} // namespace detail

} // namespace volheston
