#pragma once

#include <optional>
#include <vector>

#include "mklnet/data.hpp"

namespace mklnet {

/// Regularization weights: lambda1 on the empirical norm ||f_m||_n,
/// lambda2 on the RKHS norm ||f_m||_H, lambda3 on ||f_m||_H^2.
struct RegParams {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double lambda3 = 0.0;

    void validate() const {
        if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0)
            throw input_error("regularization weights must be nonnegative");
    }
};

struct FitOptions {
    double outer_tol = 1e-8;   // relative objective decrease per sweep
    int max_sweeps = 500;
    double inner_tol = 1e-10;  // block stationarity residual
    int max_inner = 10000;
    double zero_tol = 1e-12;   // zero-test bisection tolerance
    double kkt_tol = 1e-6;     // certificate required before declaring convergence
    bool record_trace = true;

    void validate() const {
        if (!(outer_tol > 0.0 && inner_tol > 0.0 && zero_tol > 0.0))
            throw input_error("tolerances must be positive");
        if (max_sweeps < 1 || max_inner < 1) throw input_error("iteration caps must be positive");
    }
};

struct MklModel {
    std::vector<Vec> alpha;      // per block, length n; exactly zero off the active set
    std::vector<int> active;
    std::vector<double> trace;   // objective per sweep, trace[0] at the start
    double objective_value = 0.0;
    double kkt_residual = 0.0;
    bool converged = false;
    RegParams params;
};

namespace detail {

/// Minimum over ||w|| <= 1 of ||g - (lambda1/sqrt(n)) D^(1/2) w||, the distance
/// from the smooth-loss gradient to the empirical-norm subdifferential disc.
/// The zero block is optimal iff this is <= lambda2.
inline double zero_test_distance(const Vec& g, const Vec& d, double lambda1, int n,
                                 double zero_tol) {
    if (lambda1 == 0.0) return g.norm();
    const double a = lambda1 / std::sqrt(static_cast<double>(n));

    // Unconstrained minimizer w_i = g_i / (a sqrt(d_i)); feasible iff inside the ball.
    double inside = 0.0;
    double residual_sq_at_zero_d = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        if (d[i] > 0.0)
            inside += (g[i] * g[i]) / (a * a * d[i]);
        else
            residual_sq_at_zero_d += g[i] * g[i];
    }
    if (inside <= 1.0) return std::sqrt(residual_sq_at_zero_d);

    // Otherwise the constraint binds; solve ||w(theta)|| = 1 for the multiplier
    // theta >= 0 with w_i = a sqrt(d_i) g_i / (a^2 d_i + theta), decreasing in theta.
    auto norm_sq = [&](double theta) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            if (d[i] <= 0.0) continue;
            const double w = a * std::sqrt(d[i]) * g[i] / (a * a * d[i] + theta);
            acc += w * w;
        }
        return acc;
    };
    double hi = a * std::sqrt(g.cwiseProduct(d.cwiseSqrt()).squaredNorm());
    if (hi <= 0.0) hi = 1.0;
    int expand = 0;
    while (norm_sq(hi) > 1.0) {
        hi *= 2.0;
        if (++expand > 200) throw numeric_error("zero test: bisection failed to bracket");
    }
    double lo = 0.0;
    while (hi - lo > zero_tol * hi) {
        const double mid = 0.5 * (lo + hi);
        (norm_sq(mid) > 1.0 ? lo : hi) = mid;
    }
    const double theta = 0.5 * (lo + hi);
    double dist_sq = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        const double r = g[i] * theta / (a * a * std::max(d[i], 0.0) + theta);
        dist_sq += r * r;
    }
    return std::sqrt(dist_sq);
}

/// Block objective in whitened coordinates, dropping the ||r||^2 constant:
/// (1/n)(beta' D beta - 2 z' D^(1/2) beta)
///   + (lambda1/sqrt(n)) ||D^(1/2) beta|| + lambda2 ||beta|| + lambda3 ||beta||^2.
inline double block_objective_shifted(const Vec& beta, const Vec& z, const Vec& d,
                                      double lambda1, double lambda2, double lambda3, int n) {
    const double nn = static_cast<double>(n);
    const Vec sd = d.cwiseSqrt();
    const double quad = beta.dot(d.cwiseProduct(beta));
    const double lin = z.dot(sd.cwiseProduct(beta));
    return (quad - 2.0 * lin) / nn + lambda1 * std::sqrt(quad / nn) + lambda2 * beta.norm() +
           lambda3 * beta.squaredNorm();
}

inline double block_stationarity(const Vec& beta, const Vec& z, const Vec& d, double lambda1,
                                 double lambda2, double lambda3, int n) {
    const double nn = static_cast<double>(n);
    const double t1 = std::sqrt(beta.dot(d.cwiseProduct(beta)) / nn);
    const double t2 = beta.norm();
    if (t1 <= 0.0 || t2 <= 0.0) return std::numeric_limits<double>::infinity();
    Vec r(beta.size());
    for (Eigen::Index i = 0; i < beta.size(); ++i) {
        r[i] = (2.0 / nn) * (d[i] * beta[i] - std::sqrt(d[i]) * z[i]) +
               lambda1 * d[i] * beta[i] / (nn * t1) + lambda2 * beta[i] / t2 +
               2.0 * lambda3 * beta[i];
    }
    return r.norm();
}

// Backtracking subgradient descent, used only when the fixed point stalls.
inline Vec block_subgradient_polish(Vec beta, const Vec& z, const Vec& d, double lambda1,
                                    double lambda2, double lambda3, int n, int iterations) {
    const double nn = static_cast<double>(n);
    const Vec sd = d.cwiseSqrt();
    double obj = block_objective_shifted(beta, z, d, lambda1, lambda2, lambda3, n);
    double step = 1.0;
    for (int it = 0; it < iterations; ++it) {
        const double t1 = std::sqrt(beta.dot(d.cwiseProduct(beta)) / nn);
        const double t2 = beta.norm();
        Vec grad = (2.0 / nn) * (d.cwiseProduct(beta) - sd.cwiseProduct(z)) +
                   2.0 * lambda3 * beta;
        if (t1 > 0.0) grad += (lambda1 / (nn * t1)) * d.cwiseProduct(beta);
        if (t2 > 0.0) grad += (lambda2 / t2) * beta;
        const double gn = grad.norm();
        if (gn == 0.0) break;
        bool improved = false;
        for (int b = 0; b < 60; ++b) {
            Vec cand = beta - (step / gn) * grad;
            const double cobj = block_objective_shifted(cand, z, d, lambda1, lambda2, lambda3, n);
            if (cobj < obj) {
                beta = std::move(cand);
                obj = cobj;
                improved = true;
                step *= 1.3;
                break;
            }
            step *= 0.5;
        }
        if (!improved && step < 1e-18) break;
    }
    return beta;
}

}  // namespace detail

/// TRUE iff the zero coefficient vector is optimal for the block subproblem,
/// i.e. zero lies in the subdifferential of the regularized block objective.
/// g is the whitened smooth-loss gradient at zero, g = -(2/n) D^(1/2) U' r.
inline bool block_zero_test(const Vec& g, const Vec& d, double lambda1, double lambda2, int n,
                            double zero_tol = 1e-12) {
    if (g.size() != d.size()) throw input_error("zero test: gradient/eigenvalue size mismatch");
    return detail::zero_test_distance(g, d, lambda1, n, zero_tol) <= lambda2;
}

/// Solves the per-block subproblem in whitened coordinates (alpha = U D^(-1/2) beta):
///   min_beta (1/n)||r - U D^(1/2) beta||^2 + lambda1 sqrt(beta'D beta/n)
///            + lambda2 ||beta|| + lambda3 ||beta||^2,
/// by a damped fixed point on the two scalars t1 = ||f||_n, t2 = ||beta||,
/// with the coefficient closed form in between. Near-boundary blocks make the
/// plain iteration crawl, so a log-space Newton step on the scalar pair takes
/// over once the damped phase slows. z = U' r. Returns zero when either
/// scalar underflows (the block is then reclassified as zero).
inline Vec solve_block(const Vec& z, const Vec& d, double lambda1, double lambda2, double lambda3,
                       int n, const FitOptions& opts = {}) {
    const double nn = static_cast<double>(n);
    const Eigen::Index r = z.size();
    Vec numer(r), base(r);
    for (Eigen::Index i = 0; i < r; ++i) {
        numer[i] = (2.0 / nn) * std::sqrt(d[i]) * z[i];
        base[i] = (2.0 / nn) * d[i] + 2.0 * lambda3;
    }
    const double scale = numer.norm();
    if (scale == 0.0) return Vec::Zero(r);
    const double tol = opts.inner_tol * std::max(1.0, scale);

    auto closed_form = [&](double t1, double t2) {
        Vec beta(r);
        for (Eigen::Index i = 0; i < r; ++i) {
            const double denom = base[i] + lambda1 * d[i] / (nn * t1) + lambda2 / t2;
            beta[i] = denom > 0.0 ? numer[i] / denom : 0.0;
        }
        return beta;
    };
    auto scalars = [&](const Vec& beta) {
        return std::pair<double, double>(std::sqrt(beta.dot(d.cwiseProduct(beta)) / nn),
                                         beta.norm());
    };
    auto stationarity = [&](const Vec& beta) {
        return detail::block_stationarity(beta, z, d, lambda1, lambda2, lambda3, n);
    };

    // Damped phase, starting from the smooth ridge solution (t = infinity).
    double t1 = std::numeric_limits<double>::infinity();
    double t2 = std::numeric_limits<double>::infinity();
    Vec beta;
    const int damped_iters = std::min(opts.max_inner, 200);
    for (int it = 0; it < damped_iters; ++it) {
        beta = closed_form(t1, t2);
        auto [t1n, t2n] = scalars(beta);
        if (t1n < 1e-14 || t2n < 1e-14) return Vec::Zero(r);
        if (stationarity(beta) <= tol) return beta;
        if (std::isinf(t1)) {
            t1 = t1n;
            t2 = t2n;
        } else {
            t1 = 0.5 * t1 + 0.5 * t1n;
            t2 = 0.5 * t2 + 0.5 * t2n;
        }
    }

    // Newton phase on G(u) = u - log T(exp(u)), u = (log t1, log t2); the
    // scalar map T is smooth and the root is the block optimum.
    {
        auto g_at = [&](double u1, double u2) {
            auto [a, b] = scalars(closed_form(std::exp(u1), std::exp(u2)));
            return std::pair<double, double>(u1 - std::log(a), u2 - std::log(b));
        };
        double u1 = std::log(t1), u2 = std::log(t2);
        for (int step = 0; step < 100; ++step) {
            const auto [g1, g2] = g_at(u1, u2);
            if (!std::isfinite(g1) || !std::isfinite(g2)) break;
            const double h = 1e-7;
            const auto [g1a, g2a] = g_at(u1 + h, u2);
            const auto [g1b, g2b] = g_at(u1, u2 + h);
            const double j11 = (g1a - g1) / h, j21 = (g2a - g2) / h;
            const double j12 = (g1b - g1) / h, j22 = (g2b - g2) / h;
            const double det = j11 * j22 - j12 * j21;
            if (!std::isfinite(det) || std::abs(det) < 1e-300) break;
            const double s1 = (j22 * g1 - j12 * g2) / det;
            const double s2 = (-j21 * g1 + j11 * g2) / det;
            if (std::abs(s1) > 30.0 || std::abs(s2) > 30.0) break;
            u1 -= s1;
            u2 -= s2;
            if (std::exp(u1) < 1e-14 || std::exp(u2) < 1e-14) return Vec::Zero(r);
            beta = closed_form(std::exp(u1), std::exp(u2));
            if (stationarity(beta) <= tol) return beta;
        }
        t1 = std::exp(u1);
        t2 = std::exp(u2);
    }

    // Remaining damped budget, then the subgradient fallback.
    for (int it = damped_iters; it < opts.max_inner; ++it) {
        beta = closed_form(t1, t2);
        auto [t1n, t2n] = scalars(beta);
        if (t1n < 1e-14 || t2n < 1e-14) return Vec::Zero(r);
        if (stationarity(beta) <= tol) return beta;
        t1 = 0.5 * t1 + 0.5 * t1n;
        t2 = 0.5 * t2 + 0.5 * t2n;
    }
    beta = detail::block_subgradient_polish(beta, z, d, lambda1, lambda2, lambda3, n, 5000);
    auto [t1n, t2n] = scalars(beta);
    if (t1n < 1e-14 || t2n < 1e-14) return Vec::Zero(r);
    if (stationarity(beta) <= std::max(1e3 * tol, 5e-7)) return beta;
    throw numeric_error("solve_block: fixed point and subgradient fallback both stalled");
}

namespace detail {

struct BlockState {
    BlockFactor factor;
    Vec beta;        // whitened coefficients, zero when inactive
    Vec prediction;  // U D^(1/2) beta at the training points
};

inline double whitened_objective(const Vec& residual, const std::vector<BlockState>& blocks,
                                 const RegParams& p, int n) {
    const double nn = static_cast<double>(n);
    double obj = residual.squaredNorm() / nn;
    for (const auto& b : blocks) {
        if (b.beta.size() == 0 || b.beta.isZero(0.0)) continue;
        const double quad = b.beta.dot(b.factor.d.cwiseProduct(b.beta));
        obj += p.lambda1 * std::sqrt(quad / nn) + p.lambda2 * b.beta.norm() +
               p.lambda3 * b.beta.squaredNorm();
    }
    return obj;
}

}  // namespace detail

/// Cyclic block coordinate descent for the additive-kernel elastic-net
/// objective. Each visit runs the exact zero test first and drops the block
/// to zero on a tie, which keeps the output deterministic and sparse.
inline MklModel fit(const Dataset& data, const std::vector<SpectralKernel>& kernels,
                    const RegParams& params, const FitOptions& opts = {},
                    const MklModel* warm_start = nullptr) {
    params.validate();
    opts.validate();
    const int n = static_cast<int>(data.size());
    const int m_count = static_cast<int>(data.num_blocks());
    if (static_cast<int>(kernels.size()) != m_count)
        throw input_error("fit: one kernel per block required");
    const double nn = static_cast<double>(n);

    std::vector<detail::BlockState> blocks(m_count);
    for (int m = 0; m < m_count; ++m) {
        blocks[m].factor = block_factor(kernels[m], data.x.col(m));
        const auto r = blocks[m].factor.rank();
        blocks[m].beta = Vec::Zero(r);
        blocks[m].prediction = Vec::Zero(n);
        if (warm_start && m < static_cast<int>(warm_start->alpha.size()) &&
            warm_start->alpha[m].size() == n) {
            blocks[m].beta = blocks[m].factor.d.cwiseSqrt().asDiagonal() *
                             (blocks[m].factor.u.transpose() * warm_start->alpha[m]);
            blocks[m].prediction = blocks[m].factor.u *
                                   blocks[m].factor.d.cwiseSqrt().cwiseProduct(blocks[m].beta);
        }
    }

    Vec residual = data.y;
    for (const auto& b : blocks) residual -= b.prediction;

    MklModel model;
    model.params = params;
    double obj = detail::whitened_objective(residual, blocks, params, n);
    if (!std::isfinite(obj)) throw numeric_error("fit: non-finite objective at start");
    if (opts.record_trace) model.trace.push_back(obj);

    // Certificate against the current residual state: zero-test slack for
    // zero blocks, stationarity norm otherwise.
    auto kkt_residual = [&]() {
        double kkt = 0.0;
        for (auto& b : blocks) {
            Vec partial = residual + b.prediction;
            Vec z = b.factor.u.transpose() * partial;
            if (b.beta.isZero(0.0)) {
                Vec g = -(2.0 / nn) * b.factor.d.cwiseSqrt().cwiseProduct(z);
                const double dist =
                    detail::zero_test_distance(g, b.factor.d, params.lambda1, n, opts.zero_tol);
                kkt = std::max(kkt, dist - params.lambda2);
            } else {
                kkt = std::max(kkt,
                               detail::block_stationarity(b.beta, z, b.factor.d, params.lambda1,
                                                          params.lambda2, params.lambda3, n));
            }
        }
        return kkt;
    };

    bool converged = false;
    double kkt = std::numeric_limits<double>::infinity();
    double kkt_at_last_check = std::numeric_limits<double>::infinity();
    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        for (int m = 0; m < m_count; ++m) {
            auto& b = blocks[m];
            Vec partial = residual + b.prediction;
            Vec z = b.factor.u.transpose() * partial;
            Vec g = -(2.0 / nn) * b.factor.d.cwiseSqrt().cwiseProduct(z);

            bool keep_zero;
            try {
                keep_zero = block_zero_test(g, b.factor.d, params.lambda1, params.lambda2, n,
                                            opts.zero_tol);
            } catch (const numeric_error&) {
                keep_zero = false;  // treat the block as nonzero and let the solver decide
            }

            Vec beta_new;
            if (keep_zero) {
                beta_new = Vec::Zero(b.factor.rank());
            } else {
                beta_new = solve_block(z, b.factor.d, params.lambda1, params.lambda2,
                                       params.lambda3, n, opts);
                // Keep whichever of {old, new} scores better; the inner solver
                // starts from the ridge point, not from the current iterate.
                const double newo = detail::block_objective_shifted(
                    beta_new, z, b.factor.d, params.lambda1, params.lambda2, params.lambda3, n);
                const double oldo =
                    b.beta.isZero(0.0)
                        ? 0.0
                        : detail::block_objective_shifted(b.beta, z, b.factor.d, params.lambda1,
                                                          params.lambda2, params.lambda3, n);
                if (oldo < newo) beta_new = b.beta;
            }
            Vec pred_new = b.factor.u * b.factor.d.cwiseSqrt().cwiseProduct(beta_new);
            residual += b.prediction - pred_new;
            b.beta = std::move(beta_new);
            b.prediction = std::move(pred_new);
        }

        const double prev = obj;
        obj = detail::whitened_objective(residual, blocks, params, n);
        if (!std::isfinite(obj)) throw numeric_error("fit: non-finite objective");
        if (opts.record_trace) model.trace.push_back(obj);
        if (prev - obj <= opts.outer_tol * std::max(std::abs(prev), 1e-300)) {
            kkt = kkt_residual();
            if (kkt <= opts.kkt_tol) {
                converged = true;
                break;
            }
            if (kkt >= 0.999 * kkt_at_last_check) break;  // certificate stalled
            kkt_at_last_check = kkt;
        }
    }
    if (std::isinf(kkt)) kkt = kkt_residual();

    model.converged = converged;
    model.kkt_residual = kkt;
    model.objective_value = obj;
    model.alpha.reserve(m_count);
    for (int m = 0; m < m_count; ++m) {
        auto& b = blocks[m];
        if (b.beta.isZero(0.0)) {
            model.alpha.push_back(Vec::Zero(n));
        } else {
            model.alpha.push_back(b.factor.u *
                                  b.factor.d.cwiseSqrt().cwiseInverse().cwiseProduct(b.beta));
            model.active.push_back(m);
        }
    }
    return model;
}

inline MklModel fit(const Dataset& data, const SpectralKernel& kernel, const RegParams& params,
                    const FitOptions& opts = {}, const MklModel* warm_start = nullptr) {
    return fit(data, std::vector<SpectralKernel>(data.num_blocks(), kernel), params, opts,
               warm_start);
}

/// The lambda3 = 0 special case.
inline MklModel l1_fit(const Dataset& data, const SpectralKernel& kernel, double lambda1,
                       double lambda2, const FitOptions& opts = {}) {
    return fit(data, kernel, RegParams{lambda1, lambda2, 0.0}, opts);
}

/// Objective evaluated through the Gram-matrix representer form on the
/// model's alpha vectors. Independent of the whitened path used inside fit.
inline double objective(const MklModel& model, const Dataset& data,
                        const std::vector<SpectralKernel>& kernels, const RegParams& params) {
    const int n = static_cast<int>(data.size());
    const int m_count = static_cast<int>(data.num_blocks());
    if (static_cast<int>(model.alpha.size()) != m_count)
        throw input_error("objective: model block count mismatch");
    if (static_cast<int>(kernels.size()) != m_count)
        throw input_error("objective: one kernel per block required");
    const double nn = static_cast<double>(n);
    Vec fitted = Vec::Zero(n);
    double penalty = 0.0;
    for (int m = 0; m < m_count; ++m) {
        if (model.alpha[m].size() != n) throw input_error("objective: alpha length mismatch");
        Mat a = kernels[m].basis_matrix(data.x.col(m));
        a *= kernels[m].eigenvalues().cwiseSqrt().asDiagonal();
        const Vec at_alpha = a.transpose() * model.alpha[m];  // A' alpha
        const Vec k_alpha = a * at_alpha;                     // K alpha
        fitted += k_alpha;
        const double h_sq = at_alpha.squaredNorm();           // alpha' K alpha
        const double emp_sq = k_alpha.squaredNorm() / nn;     // alpha' K^2 alpha / n
        penalty += params.lambda1 * std::sqrt(emp_sq) + params.lambda2 * std::sqrt(h_sq) +
                   params.lambda3 * h_sq;
    }
    return (data.y - fitted).squaredNorm() / nn + penalty;
}

inline double objective(const MklModel& model, const Dataset& data, const SpectralKernel& kernel,
                        const RegParams& params) {
    return objective(model, data, std::vector<SpectralKernel>(data.num_blocks(), kernel), params);
}

/// Eigen-coefficients of each fitted block (the representer expansion pushed
/// through the kernel spectrum).
inline std::vector<SpectralFunction> model_blocks(const MklModel& model, const Dataset& data,
                                                  const SpectralKernel& kernel) {
    std::vector<SpectralFunction> out;
    out.reserve(model.alpha.size());
    for (int m = 0; m < static_cast<int>(model.alpha.size()); ++m) {
        if (model.alpha[m].isZero(0.0)) {
            out.push_back(SpectralFunction::zero(kernel));
        } else {
            out.push_back(to_spectral(KernelExpansion(kernel, data.x.col(m), model.alpha[m])));
        }
    }
    return out;
}

/// Additive prediction sum_m f_m(x^(m)) at new design rows.
inline Vec predict(const std::vector<SpectralFunction>& blocks, const Mat& x) {
    if (static_cast<int>(blocks.size()) != x.cols())
        throw input_error("predict: block count differs from design columns");
    Vec out = Vec::Zero(x.rows());
    for (int m = 0; m < static_cast<int>(blocks.size()); ++m) {
        if (blocks[m].coeffs.isZero(0.0)) continue;
        out += blocks[m].eval(x.col(m));
    }
    return out;
}

}  // namespace mklnet
