#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "mklnet/core.hpp"

namespace mklnet {

/// Mercer kernel on [0,1] with an explicit eigen-system: eigenvalues
/// mu_k = c * k^(-1/s) over the shifted-cosine orthonormal basis
/// phi_k(x) = sqrt(2) cos(pi k x), k = 1..K, under the uniform measure.
///
/// The scale c is derived, never user-set: sup |phi_k| = sqrt(2), so
/// c = raw / (2 * sum_k k^(-1/s)) guarantees sup_x k(x,x) <= raw via the
/// crude bound 2 * sum_k mu_k <= raw.
class SpectralKernel {
public:
    static constexpr int default_truncation = 512;

    static SpectralKernel cosine(double decay_exponent, int truncation = default_truncation,
                                 double raw_scale = 1.0) {
        return SpectralKernel(decay_exponent, truncation, raw_scale);
    }

    double decay_exponent() const { return s_; }
    int truncation() const { return k_; }
    double scale() const { return c_; }
    const std::string& basis_id() const { return basis_; }

    /// Upper bound on the kernel evaluation error due to truncating the
    /// eigen-expansion at K terms: 2c * sum_{k>K} k^(-1/s).
    double truncation_error() const { return trunc_err_; }

    /// mu_k for 1-based index k.
    double eigenvalue(int k) const { return c_ * std::pow(static_cast<double>(k), -1.0 / s_); }

    Vec eigenvalues() const {
        Vec mu(k_);
        for (int k = 1; k <= k_; ++k) mu[k - 1] = eigenvalue(k);
        return mu;
    }

    /// phi_k(x) for 1-based index k.
    double basis(int k, double x) const {
        return std::numbers::sqrt2 * std::cos(std::numbers::pi * k * x);
    }

    /// n x K matrix with entry (i,k-1) = phi_k(points[i]). No domain check;
    /// callers validate once.
    Mat basis_matrix(const Vec& points) const {
        const auto n = points.size();
        Mat b(n, k_);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double px = std::numbers::pi * points[i];
            for (int k = 1; k <= k_; ++k) b(i, k - 1) = std::numbers::sqrt2 * std::cos(k * px);
        }
        return b;
    }

    /// Kernel evaluation sum_k mu_k phi_k(x) phi_k(y). The basis product is
    /// grouped first so the sum is symmetric to the last bit.
    double eval(double x, double y) const {
        check_domain(x);
        check_domain(y);
        double acc = 0.0;
        for (int k = 1; k <= k_; ++k) acc += eigenvalue(k) * (basis(k, x) * basis(k, y));
        return acc;
    }

    double operator()(double x, double y) const { return eval(x, y); }

    bool same_as(const SpectralKernel& o) const {
        return s_ == o.s_ && k_ == o.k_ && c_ == o.c_ && basis_ == o.basis_;
    }

    static void check_domain(double x) {
        if (!(x >= 0.0 && x <= 1.0)) throw input_error("kernel input outside [0,1]");
    }

private:
    SpectralKernel(double s, int truncation, double raw_scale)
        : s_(s), k_(truncation) {
        if (!(s > 0.0 && s < 1.0)) throw input_error("decay exponent must lie in (0,1)");
        if (truncation < 1) throw input_error("truncation must be positive");
        if (!(raw_scale > 0.0)) throw input_error("raw scale must be positive");
        double sum = 0.0;
        for (int k = 1; k <= k_; ++k) sum += std::pow(static_cast<double>(k), -1.0 / s_);
        c_ = raw_scale / (2.0 * sum);
        // integral tail bound: sum_{k>K} k^(-1/s) <= s/(1-s) * K^(1-1/s)
        trunc_err_ = 2.0 * c_ * s_ / (1.0 - s_) * std::pow(static_cast<double>(k_), 1.0 - 1.0 / s_);
    }

    double s_;
    int k_;
    double c_;
    double trunc_err_;
    std::string basis_ = "cosine01";
};

/// Evaluate-only kernel without an eigen-system; usable for Gram matrices
/// but excluded from every exact-norm path.
struct GaussianKernel {
    double bandwidth = 0.25;

    double eval(double x, double y) const {
        SpectralKernel::check_domain(x);
        SpectralKernel::check_domain(y);
        const double z = (x - y) / bandwidth;
        return std::exp(-0.5 * z * z);
    }
    double operator()(double x, double y) const { return eval(x, y); }
};

struct GramMatrix {
    Mat entries;  // n x n, symmetric PSD
    Vec anchors;  // the n points the kernel was evaluated at
};

template <class Kernel>
GramMatrix gram(const Kernel& kernel, const Vec& points) {
    if (points.size() == 0) throw input_error("gram: empty point list");
    for (Eigen::Index i = 0; i < points.size(); ++i) SpectralKernel::check_domain(points[i]);
    const auto n = points.size();
    Mat g(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            g(i, j) = kernel.eval(points[i], points[j]);
            g(j, i) = g(i, j);
        }
    return GramMatrix{std::move(g), points};
}

// The factored form mu^(1/2)-weighted basis gives the same matrix as the
// entrywise sum but in O(n^2 K) BLAS3 time.
inline GramMatrix gram(const SpectralKernel& kernel, const Vec& points) {
    if (points.size() == 0) throw input_error("gram: empty point list");
    for (Eigen::Index i = 0; i < points.size(); ++i) SpectralKernel::check_domain(points[i]);
    Mat a = kernel.basis_matrix(points);
    a *= kernel.eigenvalues().cwiseSqrt().asDiagonal();
    const auto n = points.size();
    Mat g = Mat::Zero(n, n);
    g.selfadjointView<Eigen::Lower>().rankUpdate(a);
    g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
    return GramMatrix{std::move(g), points};
}

struct EigenSystem {
    Mat u;              // n x n orthonormal columns
    Vec d;              // nonnegative, descending
    int clamped = 0;    // eigenvalues below the clamp threshold set to zero
};

/// Symmetric eigendecomposition with descending eigenvalues. Values below
/// 1e-12 * trace are clamped to zero (the solver divides by sqrt(d)).
/// Throws numeric_error when U D U^T fails to reconstruct the input.
inline EigenSystem eigensystem(const GramMatrix& gm) {
    const auto n = gm.entries.rows();
    Eigen::SelfAdjointEigenSolver<Mat> es(gm.entries);
    if (es.info() != Eigen::Success) throw numeric_error("eigensystem: decomposition failed");
    EigenSystem out;
    out.u = es.eigenvectors().rowwise().reverse();
    out.d = es.eigenvalues().reverse();
    const double trace = std::max(gm.entries.trace(), 0.0);
    const double clamp = 1e-12 * trace;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (out.d[i] < clamp) {
            if (out.d[i] != 0.0) ++out.clamped;
            out.d[i] = 0.0;
        }
    }
    const double resid = (out.u * out.d.asDiagonal() * out.u.transpose() - gm.entries).norm();
    if (resid > 1e-8 * std::max(trace, 1e-300))
        throw numeric_error("eigensystem: reconstruction residual " + std::to_string(resid));
    return out;
}

/// Low-rank factor of a spectral-kernel Gram matrix: U (n x r) with
/// orthonormal columns and positive eigenvalues d (descending), r <= min(n,K).
/// Same clamp rule as eigensystem(); equals its positive part.
struct BlockFactor {
    Mat u;
    Vec d;

    Eigen::Index rank() const { return d.size(); }
};

inline BlockFactor block_factor(const SpectralKernel& kernel, const Vec& points) {
    const auto n = points.size();
    if (n == 0) throw input_error("block_factor: empty point list");
    if (n <= kernel.truncation()) {
        EigenSystem es = eigensystem(gram(kernel, points));
        Eigen::Index r = 0;
        while (r < es.d.size() && es.d[r] > 0.0) ++r;
        return BlockFactor{es.u.leftCols(r), es.d.head(r)};
    }
    // n > K: eigendecompose the K x K matrix A^T A instead, A = Phi sqrt(mu).
    for (Eigen::Index i = 0; i < n; ++i) SpectralKernel::check_domain(points[i]);
    Mat a = kernel.basis_matrix(points);
    a *= kernel.eigenvalues().cwiseSqrt().asDiagonal();
    Mat s = Mat::Zero(kernel.truncation(), kernel.truncation());
    s.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
    s.triangularView<Eigen::StrictlyUpper>() = s.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(s);
    if (es.info() != Eigen::Success) throw numeric_error("block_factor: decomposition failed");
    Vec d = es.eigenvalues().reverse();
    Mat v = es.eigenvectors().rowwise().reverse();
    const double clamp = 1e-12 * std::max(s.trace(), 0.0);
    Eigen::Index r = 0;
    while (r < d.size() && d[r] > clamp) ++r;
    BlockFactor out;
    out.d = d.head(r);
    out.u = a * v.leftCols(r) * out.d.cwiseSqrt().cwiseInverse().asDiagonal();
    return out;
}

}  // namespace mklnet
