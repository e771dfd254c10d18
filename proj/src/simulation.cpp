#include "volheston/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "volheston/kernels.hpp"

namespace volheston {

JumpEvents sample_jumps(const ModelParams& params, const TimeGrid& grid, std::uint64_t seed,
                        std::uint64_t path) {
    JumpEvents ev;
    const double beta = params.jumps.intensity0();
    if (beta <= 0.0) return ev;
    RngStream gaps(seed, path, StreamPurpose::jump_gap);
    RngStream marks(seed, path, StreamPurpose::jump_mark);
    double t = 0.0;
    while (true) {
        t += gaps.next_exponential(beta);
        if (t > grid.T) break;
        ev.times.push_back(t);
        ev.marks.push_back(marks.next_normal());
    }
    return ev;
}

namespace {

// Per-asset precomputation shared by every path: exact kernel cell masses,
// the master Cholesky factor of the kernel-integral covariance table and the
// augmented-increment rows.  Step l of n uses the leading (n-l+1) block.
struct AssetTables {
    Eigen::VectorXd c;      // c(p) = int over one cell of K at lag p, p = 1..n
    Eigen::MatrixXd Lg;     // lower Cholesky factor of the n x n table (+ eps I)
    Eigen::VectorXd wrow;   // forward-substitution solution of Lg w = c
    Eigen::VectorXd dval;   // dval(m): conditional std dev of dW given the m kernel rows
    double eps = 0.0;
};

AssetTables build_asset_tables(const KernelSpec& spec, const TimeGrid& grid) {
    const int n = grid.n;
    const double delta = grid.delta();
    AssetTables tab;
    tab.c.resize(n + 1);
    tab.c(0) = 0.0;
    for (int p = 1; p <= n; ++p) tab.c(p) = integrated_kernel(spec, 0.0, delta, p * delta);

    Eigen::MatrixXd S(n, n);
    for (int p = 1; p <= n; ++p)
        for (int q = p; q <= n; ++q) {
            const double v = covariance_entry(spec, p * delta, q * delta, 0.0, delta);
            S(p - 1, q - 1) = v;
            S(q - 1, p - 1) = v;
        }

    // The per-step matrices are the leading blocks of S augmented with the
    // increment row, so a single jitter level must both factor S and keep
    // every augmented Schur complement positive; escalate until it does
    // (same {0, j0, 10 j0, ...} policy as stabilized_cholesky).
    const double max_diag = std::max(S.diagonal().maxCoeff(), delta);
    const double j0 = 1e-12 * max_diag;
    const double cap = 1e-4 * max_diag;
    for (double eps = 0.0; eps <= cap; eps = (eps == 0.0 ? j0 : 10.0 * eps)) {
        Eigen::MatrixXd A = S;
        if (eps > 0.0) A.diagonal().array() += eps;
        Eigen::LLT<Eigen::MatrixXd> llt(A);
        if (llt.info() != Eigen::Success) continue;
        tab.Lg = llt.matrixL();
        tab.eps = eps;
        tab.wrow = tab.Lg.triangularView<Eigen::Lower>().solve(tab.c.tail(n));
        tab.dval.resize(n + 1);
        bool ok = true;
        double acc = 0.0;
        for (int m = 1; m <= n; ++m) {
            acc += tab.wrow(m - 1) * tab.wrow(m - 1);
            const double dd = delta + eps - acc;
            if (dd <= 0.0) {
                ok = false;
                break;
            }
            tab.dval(m) = std::sqrt(dd);
        }
        if (ok) return tab;
    }
    throw NumericalError("simulate_V: augmented covariance not factorizable");
}

} // namespace

PathBundle simulate_V(const ModelParams& params, const TimeGrid& grid, int n_paths,
                      std::uint64_t seed, bool store_increments, int n_threads) {
    params.validate();
    if (n_paths < 1) throw std::invalid_argument("simulate_V: n_paths must be >= 1");
    if (params.jumps.state_dependent())
        throw std::invalid_argument("simulate_V: state-dependent jump measures are not simulated");

    const int d = params.d;
    const int n = grid.n;
    const double delta = grid.delta();

    std::vector<AssetTables> tabs;
    tabs.reserve(d);
    for (int i = 0; i < d; ++i) tabs.push_back(build_asset_tables(params.kernels[i], grid));

    const double comp = params.jumps.eta_compensator();

    PathBundle bundle;
    bundle.grid = grid;
    bundle.d = d;
    bundle.n_paths = n_paths;
    bundle.seed = seed;
    bundle.has_increments = store_increments;
    bundle.V.assign(static_cast<std::size_t>(n_paths) * (n + 1) * d, 0.0);
    if (store_increments) {
        bundle.dW.assign(static_cast<std::size_t>(n_paths) * n * d, 0.0);
        bundle.dB.assign(static_cast<std::size_t>(n_paths) * n * d, 0.0);
    }
    bundle.events.resize(n_paths);

    const double beta = params.jumps.intensity0();
    const bool jumps_on = beta > 0.0;

    // Fixed-width path blocks (zero-padded tail) keep the Eigen kernel tiling,
    // and therefore the floating-point accumulation order, identical for a
    // given path whatever the thread partition or total path count.
    constexpr int kBlock = 256;
    const int total_blocks = (n_paths + kBlock - 1) / kBlock;

    auto worker = [&](int blk_begin, int blk_end) {
        Eigen::MatrixXd Z(n + 1, kBlock), U(n, kBlock);
        std::vector<Eigen::MatrixXd> A(d, Eigen::MatrixXd(n + 1, kBlock));
        Eigen::MatrixXd Vcur(d, kBlock), DV(d, kBlock);
        Eigen::VectorXd drift(kBlock), diff(kBlock), dWvec(kBlock);

        for (int blk = blk_begin; blk < blk_end; ++blk) {
            const int b0 = blk * kBlock;
            const int P = std::min(kBlock, n_paths - b0);
            Z.setZero();
            for (auto& a : A) a.setZero();
            Vcur.setZero();

            // Jump contributions enter the accumulators up front: node k
            // collects K_i(t_k - T_m) eta(e_m) over arrivals T_m < t_k.
            for (int p = 0; p < P; ++p) {
                JumpEvents ev = sample_jumps(params, grid, seed, b0 + p);
                if (jumps_on && !ev.times.empty()) {
                    for (std::size_t m = 0; m < ev.times.size(); ++m) {
                        const double eta = params.jumps.eta(ev.marks[m]);
                        if (eta == 0.0) continue;
                        const int k_first = static_cast<int>(std::floor(ev.times[m] / delta)) + 1;
                        for (int k = k_first; k <= n; ++k) {
                            const double lag = grid.node(k) - ev.times[m];
                            if (lag <= 0.0) continue;
                            for (int i = 0; i < d; ++i)
                                A[i](k, p) += eval_kernel(params.kernels[i], lag) * eta;
                        }
                    }
                }
                bundle.events[b0 + p] = std::move(ev);
                for (int i = 0; i < d; ++i) {
                    Vcur(i, p) = params.v0(i);
                    bundle.V[(static_cast<std::size_t>(b0 + p) * (n + 1)) * d + i] = params.v0(i);
                }
            }

            for (int step = 1; step <= n; ++step) {
                const int m = n - step + 1;
                const double t_prev = grid.node(step - 1);
                DV.noalias() = params.D * Vcur;

                for (int i = 0; i < d; ++i) {
                    const AssetTables& tab = tabs[i];
                    for (int p = 0; p < P; ++p) {
                        RngStream rng(seed, b0 + p, StreamPurpose::gauss_block, i, step);
                        for (int r = 0; r <= m; ++r) Z(r, p) = rng.next_normal();
                    }
                    U.topRows(m).noalias() =
                        tab.Lg.topLeftCorner(m, m).triangularView<Eigen::Lower>() * Z.topRows(m);
                    dWvec.noalias() = Z.topRows(m).transpose() * tab.wrow.head(m);
                    dWvec += tab.dval(m) * Z.row(m).transpose();

                    const double sv = params.sigma_v(i) * params.varsigma_at(i, t_prev);
                    for (int p = 0; p < P; ++p) {
                        drift(p) = params.mu0(i) + DV(i, p) - comp;
                        diff(p) = sv * std::sqrt(std::max(Vcur(i, p), 0.0));
                    }
                    for (int p = 0; p < P; ++p)
                        A[i].col(p).segment(step, m) += drift(p) * tab.c.segment(1, m) +
                                                        diff(p) * U.col(p).head(m);

                    if (store_increments) {
                        const double rho = params.rho(i);
                        // dB | dW ~ N(rho dW, (1 - rho^2) delta)
                        const double orth = std::sqrt(std::max(0.0, 1.0 - rho * rho) * delta);
                        for (int p = 0; p < P; ++p) {
                            double db = rho * dWvec(p);
                            if (orth > 0.0) {
                                RngStream perp(seed, b0 + p, StreamPurpose::b_perp, i, step);
                                db += orth * perp.next_normal();
                            }
                            const std::size_t base =
                                (static_cast<std::size_t>(b0 + p) * n + (step - 1)) * d + i;
                            bundle.dW[base] = dWvec(p);
                            bundle.dB[base] = db;
                        }
                    }
                }
                for (int p = 0; p < P; ++p)
                    for (int i = 0; i < d; ++i) {
                        const double v = params.v0(i) + A[i](step, p);
                        Vcur(i, p) = v;
                        bundle.V[(static_cast<std::size_t>(b0 + p) * (n + 1) + step) * d + i] = v;
                    }
            }
        }
    };

    int threads = n_threads > 0 ? n_threads
                                : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = std::min<int>(threads, total_blocks);
    if (threads <= 1) {
        worker(0, total_blocks);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (total_blocks + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const int lo = t * chunk;
            const int hi = std::min(total_blocks, lo + chunk);
            if (lo < hi) pool.emplace_back(worker, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    return bundle;
}

StrategyFn multiplier_strategy(const Eigen::MatrixXd& curve) {
    return [curve](int /*path*/, int step, Eigen::Ref<const Eigen::VectorXd> v_prev,
                   Eigen::Ref<Eigen::VectorXd> alpha) {
        for (int i = 0; i < v_prev.size(); ++i)
            alpha(i) = curve(step - 1, i) * std::sqrt(std::max(v_prev(i), 0.0));
    };
}

StrategyFn constant_strategy(const Eigen::VectorXd& a) {
    return [a](int, int, Eigen::Ref<const Eigen::VectorXd>, Eigen::Ref<Eigen::VectorXd> alpha) {
        alpha = a;
    };
}

std::vector<double> simulate_wealth_additive(const ModelParams& params, const PathBundle& bundle,
                                             const StrategyFn& strategy, double x0) {
    if (!bundle.has_increments)
        throw std::invalid_argument("simulate_wealth_additive: bundle lacks Brownian increments");
    const int n = bundle.grid.n;
    const int d = bundle.d;
    const double delta = bundle.grid.delta();
    const double r = params.rate;
    std::vector<double> X(static_cast<std::size_t>(bundle.n_paths) * (n + 1));
    Eigen::VectorXd alpha(d), vprev(d);
    for (int p = 0; p < bundle.n_paths; ++p) {
        double acc = 0.0;
        X[static_cast<std::size_t>(p) * (n + 1)] = x0;
        for (int l = 1; l <= n; ++l) {
            for (int i = 0; i < d; ++i) vprev(i) = bundle.v(p, l - 1, i);
            strategy(p, l, vprev, alpha);
            double gain = 0.0;
            for (int i = 0; i < d; ++i) {
                const double lam = params.theta(i) * std::sqrt(std::max(vprev(i), 0.0));
                gain += alpha(i) * (bundle.db(p, l, i) + lam * delta);
            }
            acc += std::exp(-r * bundle.grid.node(l)) * gain;
            X[static_cast<std::size_t>(p) * (n + 1) + l] =
                std::exp(r * bundle.grid.node(l)) * (x0 + acc);
        }
    }
    return X;
}

std::vector<double> simulate_wealth_multiplicative(const ModelParams& params,
                                                   const PathBundle& bundle,
                                                   const StrategyFn& strategy, double x0) {
    if (!(x0 > 0.0)) throw std::invalid_argument("simulate_wealth_multiplicative: x0 must be > 0");
    if (!bundle.has_increments)
        throw std::invalid_argument("simulate_wealth_multiplicative: bundle lacks increments");
    const int n = bundle.grid.n;
    const int d = bundle.d;
    const double delta = bundle.grid.delta();
    const double r = params.rate;
    std::vector<double> X(static_cast<std::size_t>(bundle.n_paths) * (n + 1));
    Eigen::VectorXd alpha(d), vprev(d);
    for (int p = 0; p < bundle.n_paths; ++p) {
        double lx = std::log(x0);
        X[static_cast<std::size_t>(p) * (n + 1)] = x0;
        for (int l = 1; l <= n; ++l) {
            for (int i = 0; i < d; ++i) vprev(i) = bundle.v(p, l - 1, i);
            strategy(p, l, vprev, alpha);
            double drift = r;
            double stoch = 0.0;
            for (int i = 0; i < d; ++i) {
                const double lam = params.theta(i) * std::sqrt(std::max(vprev(i), 0.0));
                drift += alpha(i) * lam - 0.5 * alpha(i) * alpha(i);
                stoch += alpha(i) * bundle.db(p, l, i);
            }
            lx += drift * delta + stoch;
            X[static_cast<std::size_t>(p) * (n + 1) + l] = std::exp(lx);
        }
    }
    return X;
}

} // namespace volheston
