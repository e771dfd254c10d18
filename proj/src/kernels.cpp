#include "volheston/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace volheston {

KernelSpec KernelSpec::constant() { return {KernelKind::constant, 1.0, 0.0}; }

KernelSpec KernelSpec::fractional(double alpha) {
    KernelSpec s{KernelKind::fractional, alpha, 0.0};
    s.validate();
    return s;
}

KernelSpec KernelSpec::exponential(double beta) {
    KernelSpec s{KernelKind::exponential, 1.0, beta};
    s.validate();
    return s;
}

KernelSpec KernelSpec::fractional_exponential(double alpha, double beta) {
    KernelSpec s{KernelKind::fractional_exponential, alpha, beta};
    s.validate();
    return s;
}

void KernelSpec::validate() const {
    const bool frac = kind == KernelKind::fractional || kind == KernelKind::fractional_exponential;
    if (frac) {
        if (!(alpha > 0.5 && alpha <= 1.0))
            throw std::invalid_argument("KernelSpec: alpha must be in (1/2, 1]");
    } else if (alpha != 1.0) {
        throw std::invalid_argument("KernelSpec: alpha must be 1 for constant/exponential kernels");
    }
    if (!(beta_decay >= 0.0)) throw std::invalid_argument("KernelSpec: beta_decay must be >= 0");
    if ((kind == KernelKind::constant || kind == KernelKind::fractional) && beta_decay != 0.0)
        throw std::invalid_argument("KernelSpec: beta_decay must be 0 for this kind");
}

double eval_kernel(const KernelSpec& spec, double t) {
    if (!(t > 0.0)) throw std::domain_error("eval_kernel: t must be > 0");
    switch (spec.kind) {
        case KernelKind::constant:
            return 1.0;
        case KernelKind::exponential:
            return std::exp(-spec.beta_decay * t);
        case KernelKind::fractional:
            return std::pow(t, spec.alpha - 1.0) / std::tgamma(spec.alpha);
        case KernelKind::fractional_exponential:
            return std::pow(t, spec.alpha - 1.0) * std::exp(-spec.beta_decay * t) /
                   std::tgamma(spec.alpha);
    }
    return 0.0;
}

namespace detail {

namespace {
// Gauss-Kronrod 7-15 abscissae/weights on [-1, 1].
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct GkEstimate {
    double value;
    double error;
};

GkEstimate gk15(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fv[15];
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(c - h * kXgk[i]);
        fv[14 - i] = f(c + h * kXgk[i]);
    }
    fv[7] = f(c);
    double resk = 0.0, resg = 0.0;
    for (int i = 0; i < 7; ++i) resk += kWgk[i] * (fv[i] + fv[14 - i]);
    resk += kWgk[7] * fv[7];
    for (int i = 0; i < 3; ++i) resg += kWg[i] * (fv[2 * i + 1] + fv[13 - 2 * i]);
    resg += kWg[3] * fv[7];
    return {resk * h, std::abs(resk - resg) * h};
}

void gk_recurse(const std::function<double(double)>& f, double a, double b, double tol_abs,
                int depth, double& acc) {
    GkEstimate e = gk15(f, a, b);
    if (e.error <= tol_abs || depth >= 52 || b - a < 1e-15 * std::abs(b)) {
        acc += e.value;
        return;
    }
    const double m = 0.5 * (a + b);
    gk_recurse(f, a, m, 0.5 * tol_abs, depth + 1, acc);
    gk_recurse(f, m, b, 0.5 * tol_abs, depth + 1, acc);
}

} // namespace

double adaptive_gk(const std::function<double(double)>& f, double a, double b, double rel_tol) {
    if (a == b) return 0.0;
    GkEstimate first = gk15(f, a, b);
    const double scale = std::max(std::abs(first.value), 1e-300);
    if (first.error <= rel_tol * scale) return first.value;
    double acc = 0.0;
    gk_recurse(f, a, b, rel_tol * scale, 0, acc);
    return acc;
}

} // namespace detail

double integrated_kernel(const KernelSpec& spec, double a, double b, double t_k) {
    if (!(0.0 <= a && a < b && b <= t_k))
        throw std::domain_error("integrated_kernel: need 0 <= a < b <= t_k");
    const double alpha = spec.alpha;
    const double beta = spec.beta_decay;
    // In the lag variable u = t_k - s the interval is [t_k - b, t_k - a].
    const double u0 = t_k - b;
    const double u1 = t_k - a;
    if (beta == 0.0)
        return (std::pow(u1, alpha) - std::pow(u0, alpha)) / std::tgamma(alpha + 1.0);
    if (alpha == 1.0) return (std::exp(-beta * u0) - std::exp(-beta * u1)) / beta;
    // Substitution w = u^alpha removes the endpoint singularity.
    const double inv_alpha = 1.0 / alpha;
    auto f = [&](double w) { return std::exp(-beta * std::pow(w, inv_alpha)); };
    return detail::adaptive_gk(f, std::pow(u0, alpha), std::pow(u1, alpha), 1e-10) /
           (alpha * std::tgamma(alpha));
}

double covariance_entry(const KernelSpec& spec, double t_k, double t_j, double a, double b) {
    const double lo = std::min(t_k, t_j);
    const double hi = std::max(t_k, t_j);
    if (!(a < b && b <= lo)) throw std::domain_error("covariance_entry: need a < b <= min(t_k, t_j)");
    const double alpha = spec.alpha;
    const double beta = spec.beta_decay;
    const double g = std::tgamma(alpha);

    if (spec.kind == KernelKind::constant) return b - a;
    if (alpha == 1.0) {
        // exp(-beta (t_k - s)) exp(-beta (t_j - s))
        if (beta == 0.0) return b - a;
        return std::exp(-beta * (t_k + t_j)) * (std::exp(2.0 * beta * b) - std::exp(2.0 * beta * a)) /
               (2.0 * beta);
    }
    if (t_k == t_j) {
        // (t_k - s)^(2 alpha - 2) e^{-2 beta (t_k - s)}; substitute w = (t_k - s)^(2 alpha - 1).
        const double p = 2.0 * alpha - 1.0;
        const double w0 = std::pow(t_k - b, p);
        const double w1 = std::pow(t_k - a, p);
        if (beta == 0.0) return (w1 - w0) / (p * g * g);
        const double inv_p = 1.0 / p;
        auto f = [&](double w) { return std::exp(-2.0 * beta * std::pow(w, inv_p)); };
        return detail::adaptive_gk(f, w0, w1, 1e-10) / (p * g * g);
    }
    // General case: substitute w = (lo - s)^alpha; the (lo - s)^(alpha - 1) factor
    // cancels against the Jacobian and the integrand stays bounded.
    const double gap = hi - lo;
    const double inv_alpha = 1.0 / alpha;
    const double w0 = std::pow(lo - b, alpha);
    const double w1 = std::pow(lo - a, alpha);
    auto f = [&](double w) {
        const double u = std::pow(w, inv_alpha); // u = lo - s
        double v = std::pow(gap + u, alpha - 1.0);
        if (beta != 0.0) v *= std::exp(-2.0 * beta * u);
        return v;
    };
    double pref = 1.0 / (alpha * g * g);
    if (beta != 0.0) pref *= std::exp(-beta * gap);
    return pref * detail::adaptive_gk(f, w0, w1, 1e-10);
}

Eigen::MatrixXd build_step_covariance(const KernelSpec& spec, const TimeGrid& grid, int step) {
    if (step < 1 || step > grid.n) throw std::domain_error("build_step_covariance: step out of range");
    const int m = grid.n - step + 1; // number of kernel-weighted rows
    const double a = grid.node(step - 1);
    const double b = grid.node(step);
    Eigen::MatrixXd M(m + 1, m + 1);
    for (int i = 0; i < m; ++i) {
        const double ti = grid.node(step + i);
        for (int j = i; j < m; ++j) {
            const double v = covariance_entry(spec, ti, grid.node(step + j), a, b);
            M(i, j) = v;
            M(j, i) = v;
        }
        const double c = integrated_kernel(spec, a, b, ti);
        M(i, m) = c;
        M(m, i) = c;
    }
    M(m, m) = grid.delta();
    return M;
}

CholeskyResult stabilized_cholesky(const Eigen::MatrixXd& M, double jitter_start) {
    const int n = static_cast<int>(M.rows());
    double max_diag = 0.0;
    for (int i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(M(i, i)));
    if (jitter_start < 0.0) jitter_start = 1e-12 * std::max(max_diag, 1e-100);
    const double eps_cap = 1e-4 * std::max(max_diag, 1e-100);

    double eps = 0.0;
    while (true) {
        Eigen::MatrixXd A = M;
        if (eps > 0.0) A.diagonal().array() += eps;
        Eigen::LLT<Eigen::MatrixXd> llt(A);
        if (llt.info() == Eigen::Success) return {Eigen::MatrixXd(llt.matrixL()), eps};
        if (eps == 0.0)
            eps = jitter_start > 0.0 ? jitter_start : 1e-12 * std::max(max_diag, 1e-100);
        else
            eps *= 10.0;
        if (eps > eps_cap)
            throw NumericalError("stabilized_cholesky: jitter escalation exceeded 1e-4 * max diagonal");
    }
}

double mittag_leffler(double alpha, double beta_ml, double x) {
    if (!(alpha > 0.0)) throw std::invalid_argument("mittag_leffler: alpha must be > 0");
    if (!(beta_ml > 0.0)) throw std::invalid_argument("mittag_leffler: beta must be > 0");
    if (std::abs(x) > 50.0)
        throw std::out_of_range("mittag_leffler: |x| > 50, series truncation unreliable");
    long double sum = 0.0L;
    const long double lax = x == 0.0 ? 0.0L : std::log(std::fabs((long double)x));
    for (int k = 0; k < 20000; ++k) {
        long double lt = (x == 0.0 && k > 0)
                             ? -std::numeric_limits<long double>::infinity()
                             : (long double)k * lax - lgammal((long double)(alpha * k + beta_ml));
        long double term = std::exp(lt);
        if (x < 0.0 && (k & 1)) term = -term;
        sum += term;
        if (k > 4 && std::fabs(term) < 1e-16L * std::max<long double>(std::fabs(sum), 1e-30L)) break;
        if (x == 0.0) break;
    }
    return static_cast<double>(sum);
}

namespace {

// K_i * K_j convolution at lag t (beta = 0: closed form t^(ai+aj-1)/Gamma(ai+aj)).
double kernel_self_convolution(const KernelSpec& ki, const KernelSpec& kj, double t) {
    if (t <= 0.0) return 0.0;
    if (ki.beta_decay == 0.0 && kj.beta_decay == 0.0) {
        const double p = ki.alpha + kj.alpha - 1.0;
        return std::pow(t, p) / std::tgamma(ki.alpha + kj.alpha);
    }
    // Split at t/2 and soften the endpoint singularities by power substitution.
    auto piece = [&](const KernelSpec& inner, const KernelSpec& outer) {
        // int_0^{t/2} inner(s) outer(t - s) ds with w = s^{alpha_inner}
        const double ai = inner.alpha;
        const double inv = 1.0 / ai;
        const double gi = std::tgamma(ai);
        auto f = [&](double w) {
            const double s = std::pow(w, inv);
            return std::exp(-inner.beta_decay * s) * eval_kernel(outer, t - s);
        };
        return detail::adaptive_gk(f, 0.0, std::pow(0.5 * t, ai), 1e-10) / (ai * gi);
    };
    return piece(ki, kj) + piece(kj, ki);
}

// (K D)^(p*) at lag t for beta = 0 kernels: sum over index chains of the
// D-products times t^(sum alpha - 1)/Gamma(sum alpha).
Eigen::MatrixXd kd_power_closed(const std::vector<KernelSpec>& kernels, const Eigen::MatrixXd& D,
                                int p, double t) {
    const int d = static_cast<int>(kernels.size());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
    if (t <= 0.0) return out;
    // chain enumeration: indices m_0 = i, m_1, ..., m_{p-2}, final j
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double acc = 0.0;
            const std::size_t combos = static_cast<std::size_t>(std::pow(d, p - 1));
            for (std::size_t c = 0; c < combos; ++c) {
                std::size_t cc = c;
                double dprod = 1.0;
                double alpha_sum = kernels[i].alpha;
                int prev = i;
                for (int q = 0; q < p - 1; ++q) {
                    const int m = static_cast<int>(cc % d);
                    cc /= d;
                    dprod *= D(prev, m);
                    alpha_sum += kernels[m].alpha;
                    prev = m;
                }
                dprod *= D(prev, j);
                if (dprod != 0.0) acc += dprod * std::pow(t, alpha_sum - 1.0) / std::tgamma(alpha_sum);
            }
            out(i, j) = acc;
        }
    return out;
}

} // namespace

ResolventCurve resolvent(const std::vector<KernelSpec>& kernels, const Eigen::MatrixXd& D,
                         const TimeGrid& grid) {
    const int d = static_cast<int>(kernels.size());
    if (D.rows() != d || D.cols() != d) throw std::invalid_argument("resolvent: D size mismatch");

    // Solve on an internally refined grid and restrict; the trapezoidal product
    // integration needs the extra resolution near the kernel singularity.
    int refine = std::max(1, (1600 + grid.n - 1) / grid.n);
    while (refine > 1 && refine * grid.n > 6400) --refine;
    const int nf = refine * grid.n;
    const TimeGrid fine(grid.T, nf);
    const double dt = fine.delta();

    // Exact kernel mass over each lag cell [t_{l-1}, t_l], per asset.
    std::vector<Eigen::VectorXd> mass(nf + 1, Eigen::VectorXd::Zero(d));
    for (int l = 1; l <= nf; ++l)
        for (int i = 0; i < d; ++i)
            mass[l](i) = integrated_kernel(kernels[i], 0.0, dt, fine.node(l));

    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
    std::vector<Eigen::MatrixXd> kdm(nf + 1, Eigen::MatrixXd::Zero(d, d));
    for (int l = 1; l <= nf; ++l) kdm[l] = mass[l].asDiagonal() * D;
    auto kd = [&](int l) -> const Eigen::MatrixXd& { return kdm[l]; };

    // Implicit trapezoidal step: X(t_k) (I - B/2) = rhs with B = diag(mass_1) D,
    // solved through the transposed system (I - B/2)^T X^T = rhs^T.
    const Eigen::MatrixXd B1 = kd(1);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu((I - 0.5 * B1).transpose());
    if (std::abs(lu.determinant()) < 1e-300)
        throw NumericalError("resolvent: singular implicit step");

    auto solve_volterra = [&](const std::vector<Eigen::MatrixXd>& forcing) {
        std::vector<Eigen::MatrixXd> X(nf + 1);
        X[0] = forcing[0];
        Eigen::MatrixXd rhs(d, d), pair(d, d);
        for (int k = 1; k <= nf; ++k) {
            rhs = forcing[k];
            rhs.noalias() += 0.5 * X[k - 1] * B1;
            for (int l = 2; l <= k; ++l) {
                pair = X[k - l + 1] + X[k - l];
                rhs.noalias() += 0.5 * pair * kd(l);
            }
            X[k] = lu.solve(rhs.transpose()).transpose();
            if (!X[k].allFinite()) throw NumericalError("resolvent: non-finite iterate");
        }
        return X;
    };

    // R - R*(KD) = I.
    std::vector<Eigen::MatrixXd> forcing(nf + 1, I);
    std::vector<Eigen::MatrixXd> Rf = solve_volterra(forcing);

    // Smooth part of the derivative: S = (KD)^(2*) + S*(KD), R' = K D + S.
    // For beta = 0 the (KD)^(2*), (KD)^(3*) powers are closed forms; peeling
    // them leaves a t^(4 alpha - 1) remainder the trapezoid handles well.
    bool all_beta0 = true;
    for (const auto& k : kernels) all_beta0 &= (k.beta_decay == 0.0);

    std::vector<Eigen::MatrixXd> Sf;
    if (all_beta0) {
        std::vector<Eigen::MatrixXd> q4(nf + 1, Eigen::MatrixXd::Zero(d, d));
        for (int k = 1; k <= nf; ++k) q4[k] = kd_power_closed(kernels, D, 4, fine.node(k));
        Sf = solve_volterra(q4); // remainder T
        for (int k = 1; k <= nf; ++k)
            Sf[k] += kd_power_closed(kernels, D, 2, fine.node(k)) +
                     kd_power_closed(kernels, D, 3, fine.node(k));
    } else {
        std::vector<Eigen::MatrixXd> q(nf + 1, Eigen::MatrixXd::Zero(d, d));
        for (int k = 1; k <= nf; ++k) {
            const double t = fine.node(k);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    double acc = 0.0;
                    for (int m = 0; m < d; ++m) {
                        if (D(i, m) == 0.0 || D(m, j) == 0.0) continue;
                        acc += D(i, m) * D(m, j) * kernel_self_convolution(kernels[i], kernels[m], t);
                    }
                    q[k](i, j) = acc;
                }
        }
        Sf = solve_volterra(q);
    }

    ResolventCurve out;
    out.grid = grid;
    out.kernels = kernels;
    out.D = D;
    out.R.resize(grid.n + 1);
    out.Rprime.resize(grid.n + 1);
    out.smooth.resize(grid.n + 1);
    for (int k = 0; k <= grid.n; ++k) {
        out.R[k] = Rf[k * refine];
        out.smooth[k] = Sf[k * refine];
        Eigen::MatrixXd rp = out.smooth[k];
        const double t = grid.node(k);
        for (int i = 0; i < d; ++i) {
            double kv;
            if (t > 0.0)
                kv = eval_kernel(kernels[i], t);
            else if (kernels[i].bounded_at_zero())
                kv = 1.0; // K(0) = e^0 / Gamma(1)
            else
                kv = std::numeric_limits<double>::quiet_NaN();
            for (int j = 0; j < d; ++j) rp(i, j) += D(i, j) == 0.0 ? 0.0 : kv * D(i, j);
        }
        out.Rprime[k] = rp;
    }
    return out;
}

} // namespace volheston
