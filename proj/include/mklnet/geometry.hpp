#pragma once

#include <functional>
#include <optional>

#include "mklnet/solver.hpp"

namespace mklnet {

/// Dependency measures of a block subset under the joint input law:
/// kappa is the smallest generalized eigenvalue of the inside-set quadratic
/// form ||sum f_m||^2 / sum ||f_m||^2, rho the largest canonical correlation
/// between the span of the set and the span of its complement. Their
/// combination sqrt((1 - rho^2) kappa) lower-bounds the restricted
/// eigenvalue of the additive model.
struct GeometryReport {
    std::vector<int> index_set;
    double kappa = 1.0;
    double rho = 0.0;
    double incoherence_bound = 1.0;  // sqrt(max(0,1-rho^2) * max(0,kappa))
    std::string method = "analytic-product";
    long mc_samples = 0;
};

inline double incoherence_bound(double kappa, double rho) {
    return std::sqrt(std::max(0.0, 1.0 - rho * rho) * std::max(0.0, kappa));
}

/// In the product design with centered components, cross-block L2 inner
/// products vanish and the Pythagorean identity gives kappa = 1, rho = 0.
inline GeometryReport geometry_analytic_product(const std::vector<int>& index_set,
                                                bool product_design = true) {
    if (!product_design)
        throw input_error("analytic geometry only applies to the product design");
    GeometryReport r;
    r.index_set = index_set;
    r.kappa = 1.0;
    r.rho = 0.0;
    r.incoherence_bound = 1.0;
    return r;
}

/// Fills one design row of M coordinates.
using DesignSampler = std::function<void(Rng&, Eigen::Ref<Eigen::RowVectorXd>)>;

inline DesignSampler product_design_sampler(int num_blocks) {
    return [num_blocks](Rng& rng, Eigen::Ref<Eigen::RowVectorXd> row) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (int m = 0; m < num_blocks; ++m) row[m] = unif(rng);
    };
}

/// Correlated design: coordinate m copies coordinate m-1 with the given
/// probability, else draws fresh. Marginals stay uniform.
inline DesignSampler chained_design_sampler(int num_blocks, double share_prob) {
    if (!(share_prob >= 0.0 && share_prob < 1.0))
        throw input_error("share probability must lie in [0,1)");
    return [num_blocks, share_prob](Rng& rng, Eigen::Ref<Eigen::RowVectorXd> row) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        row[0] = unif(rng);
        for (int m = 1; m < num_blocks; ++m) {
            const double coin = unif(rng);
            row[m] = coin < share_prob ? row[m - 1] : unif(rng);
        }
    };
}

namespace detail {

/// Monte Carlo second-moment matrix of the stacked per-block eigenfunctions
/// phi_k(x^(m)), m = 0..M-1, k = 1..k_trunc.
inline Mat joint_basis_gram(const SpectralKernel& kernel, int num_blocks, int k_trunc,
                            const DesignSampler& sampler, long n_mc, std::uint64_t seed) {
    const int dim = num_blocks * k_trunc;
    Mat g = Mat::Zero(dim, dim);
    Rng rng(mix_seed(seed, 0x67656f6dull));
    const long chunk = 512;
    Mat v(chunk, dim);
    Eigen::RowVectorXd row(num_blocks);
    long done = 0;
    while (done < n_mc) {
        const long take = std::min(chunk, n_mc - done);
        for (long i = 0; i < take; ++i) {
            sampler(rng, row);
            for (int m = 0; m < num_blocks; ++m)
                for (int k = 1; k <= k_trunc; ++k)
                    v(i, m * k_trunc + k - 1) = kernel.basis(k, row[m]);
        }
        g.selfadjointView<Eigen::Lower>().rankUpdate(v.topRows(take).transpose());
        done += take;
    }
    g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
    return g / static_cast<double>(n_mc);
}

inline Mat submatrix(const Mat& g, const std::vector<int>& rows, const std::vector<int>& cols) {
    Mat out(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = g(rows[i], cols[j]);
    return out;
}

/// Inverse square root with a 1e-10 whitening ridge; reports the rank on failure.
inline Mat inv_sqrt_whiten(const Mat& g) {
    Mat ridged = g;
    ridged.diagonal().array() += 1e-10;
    Eigen::SelfAdjointEigenSolver<Mat> es(ridged);
    if (es.info() != Eigen::Success) throw numeric_error("whitening eigensolve failed");
    const Vec& ev = es.eigenvalues();
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev[i] >= 1e-10) ++rank;
    if (rank < ev.size())
        throw numeric_error("singular whitening: rank " + std::to_string(rank) + " of " +
                            std::to_string(ev.size()));
    return es.eigenvectors() * ev.cwiseInverse().cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

}  // namespace detail

/// Monte Carlo estimate of the dependency measures for an arbitrary joint
/// design, representing each block by its leading k_trunc eigenfunctions.
inline GeometryReport geometry_spectral_mc(const SpectralKernel& kernel, int num_blocks,
                                           const std::vector<int>& index_set,
                                           const DesignSampler& sampler, int k_trunc = 32,
                                           long n_mc = 100000, std::uint64_t seed = 0) {
    if (k_trunc < 1 || k_trunc > kernel.truncation())
        throw input_error("geometry: truncation must lie in [1, K]");
    if (n_mc < 10000) throw input_error("geometry: at least 1e4 Monte Carlo samples required");
    for (int m : index_set)
        if (m < 0 || m >= num_blocks) throw input_error("geometry: index outside [0, M)");

    const Mat g = detail::joint_basis_gram(kernel, num_blocks, k_trunc, sampler, n_mc, seed);

    std::vector<int> in_rows, out_rows;
    for (int m = 0; m < num_blocks; ++m) {
        const bool inside = std::find(index_set.begin(), index_set.end(), m) != index_set.end();
        for (int k = 0; k < k_trunc; ++k)
            (inside ? in_rows : out_rows).push_back(m * k_trunc + k);
    }

    GeometryReport r;
    r.index_set = index_set;
    r.method = "spectral-MC";
    r.mc_samples = n_mc;

    const Mat g_ii = detail::submatrix(g, in_rows, in_rows);
    // Denominator of the inside-set quadratic form: per-block marginal Grams.
    Mat denom = Mat::Zero(g_ii.rows(), g_ii.cols());
    for (std::size_t b = 0; b < index_set.size(); ++b)
        denom.block(b * k_trunc, b * k_trunc, k_trunc, k_trunc) =
            g_ii.block(b * k_trunc, b * k_trunc, k_trunc, k_trunc);
    denom.diagonal().array() += 1e-10;
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(g_ii, denom);
    if (ges.info() != Eigen::Success) throw numeric_error("geometry: generalized eigensolve failed");
    r.kappa = ges.eigenvalues().minCoeff();

    if (out_rows.empty()) {
        r.rho = 0.0;
    } else {
        const Mat g_jj = detail::submatrix(g, out_rows, out_rows);
        const Mat g_ij = detail::submatrix(g, in_rows, out_rows);
        const Mat c = detail::inv_sqrt_whiten(g_ii) * g_ij * detail::inv_sqrt_whiten(g_jj);
        Eigen::JacobiSVD<Mat> svd(c);
        r.rho = std::min(svd.singularValues().maxCoeff(), 1.0);
    }
    r.incoherence_bound = incoherence_bound(r.kappa, r.rho);
    return r;
}

/// Constants attached to the oracle rate bounds. b2 is exactly 16; b1 depends
/// on how evenly the source components spread; the h-weighted variants feed
/// the lower-bound diagnostic.
struct RateConstants {
    double b1 = 0.0;
    double b2 = 16.0;
    std::optional<double> b3;
    std::optional<double> weighted_r2;  // (sum_m ||g_m||_H^2 / h_m)^(1/2)
    std::vector<double> h;
};

inline RateConstants rate_constants(const GroundTruth& truth,
                                    const std::vector<double>& h = {}) {
    if (truth.active_count() < 1) throw input_error("rate constants need an active truth");
    const double d = static_cast<double>(truth.active_count());
    RateConstants out;
    out.b1 = 16.0 * (1.0 + std::sqrt(d) * truth.max_active_g_norm() / truth.r2_g());
    if (!h.empty()) {
        if (static_cast<int>(h.size()) != truth.active_count())
            throw input_error("rate constants: one h per active block required");
        double acc = 0.0;
        double peak = 0.0;
        for (int i = 0; i < truth.active_count(); ++i) {
            if (!(h[i] > 0.0)) throw input_error("rate constants: h values must be positive");
            const double gn = rkhs_norm(truth.g[truth.active[i]]);
            acc += gn * gn / h[i];
            peak = std::max(peak, gn / h[i]);
        }
        out.weighted_r2 = std::sqrt(acc);
        out.b3 = 32.0 * (1.0 + std::sqrt(d) * peak / *out.weighted_r2);
        out.h = h;
    }
    return out;
}

/// Per-block check that the fitted component keeps at least half of the true
/// RKHS norm; the asymptotic statement behind it is a consistency property,
/// so finite-n runs report trends rather than asserting a probability.
struct RecoveryDiagnostic {
    struct Row {
        int block = 0;
        double fitted_norm = 0.0;
        double threshold = 0.0;
        bool pass = false;
    };
    std::vector<Row> rows;

    double pass_rate() const {
        if (rows.empty()) return 1.0;
        double acc = 0.0;
        for (const auto& r : rows) acc += r.pass ? 1.0 : 0.0;
        return acc / static_cast<double>(rows.size());
    }
};

inline RecoveryDiagnostic recovery_diagnostic(const std::vector<double>& fitted_norms,
                                              const GroundTruth& truth) {
    if (static_cast<int>(fitted_norms.size()) != truth.num_blocks)
        throw input_error("recovery diagnostic: one norm per block required");
    RecoveryDiagnostic out;
    for (int m : truth.active) {
        RecoveryDiagnostic::Row row;
        row.block = m;
        row.fitted_norm = fitted_norms[m];
        row.threshold = 0.5 * rkhs_norm(truth.f[m]);
        row.pass = row.fitted_norm >= row.threshold;
        out.rows.push_back(row);
    }
    return out;
}

inline RecoveryDiagnostic recovery_diagnostic(const MklModel& model, const Dataset& data,
                                              const GroundTruth& truth) {
    const auto blocks = model_blocks(model, data, truth.kernel);
    std::vector<double> norms;
    norms.reserve(blocks.size());
    for (const auto& b : blocks) norms.push_back(rkhs_norm(b));
    return recovery_diagnostic(norms, truth);
}

}  // namespace mklnet
