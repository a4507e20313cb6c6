#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <variant>
#include <vector>

#include "mklnet/kernel.hpp"

namespace mklnet {

/// Function represented by coordinates in the kernel's eigenbasis:
/// f = sum_k coeffs[k-1] * phi_k.
struct SpectralFunction {
    SpectralKernel kernel;
    Vec coeffs;  // length <= K; missing entries are zero

    SpectralFunction(SpectralKernel k, Vec c) : kernel(std::move(k)), coeffs(std::move(c)) {
        if (coeffs.size() > kernel.truncation())
            throw representation_error("coefficients beyond the kernel truncation support");
    }

    static SpectralFunction zero(const SpectralKernel& k) {
        return SpectralFunction(k, Vec::Zero(k.truncation()));
    }

    double eval(double x) const {
        SpectralKernel::check_domain(x);
        double acc = 0.0;
        for (Eigen::Index k = 0; k < coeffs.size(); ++k)
            acc += coeffs[k] * kernel.basis(static_cast<int>(k) + 1, x);
        return acc;
    }

    Vec eval(const Vec& points) const {
        for (Eigen::Index i = 0; i < points.size(); ++i) SpectralKernel::check_domain(points[i]);
        Mat b = kernel.basis_matrix(points);
        return b.leftCols(coeffs.size()) * coeffs;
    }
};

/// Representer-theorem form f(x) = sum_i alpha[i] * k(x, anchors[i]).
struct KernelExpansion {
    SpectralKernel kernel;
    Vec anchors;
    Vec alpha;

    KernelExpansion(SpectralKernel k, Vec anc, Vec a)
        : kernel(std::move(k)), anchors(std::move(anc)), alpha(std::move(a)) {
        if (anchors.size() != alpha.size())
            throw input_error("expansion: anchors and coefficients differ in length");
    }

    double eval(double x) const {
        SpectralKernel::check_domain(x);
        double acc = 0.0;
        for (Eigen::Index i = 0; i < anchors.size(); ++i)
            acc += alpha[i] * kernel.eval(x, anchors[i]);
        return acc;
    }
};

/// One additive component, in either representation.
struct BlockFunction {
    std::variant<SpectralFunction, KernelExpansion> rep;
    int block = 0;

    const SpectralKernel& kernel() const {
        return std::visit([](const auto& f) -> const SpectralKernel& { return f.kernel; }, rep);
    }
    double eval(double x) const {
        return std::visit([&](const auto& f) { return f.eval(x); }, rep);
    }
};

/// Eigen-coefficients of an expansion: b_k = mu_k * sum_i alpha_i phi_k(x_i).
inline SpectralFunction to_spectral(const KernelExpansion& f) {
    Vec b = f.kernel.eigenvalues().asDiagonal() *
            (f.kernel.basis_matrix(f.anchors).transpose() * f.alpha);
    return SpectralFunction(f.kernel, std::move(b));
}

inline SpectralFunction to_spectral(const BlockFunction& f) {
    if (const auto* s = std::get_if<SpectralFunction>(&f.rep)) return *s;
    return to_spectral(std::get<KernelExpansion>(f.rep));
}

inline double l2_norm(const SpectralFunction& f) { return f.coeffs.norm(); }

inline double rkhs_norm(const SpectralFunction& f) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < f.coeffs.size(); ++k)
        acc += f.coeffs[k] * f.coeffs[k] / f.kernel.eigenvalue(static_cast<int>(k) + 1);
    return std::sqrt(acc);
}

inline double rkhs_norm(const KernelExpansion& f) {
    if (f.anchors.size() == 0) return 0.0;
    const GramMatrix g = gram(f.kernel, f.anchors);
    const double q = f.alpha.dot(g.entries * f.alpha);
    return std::sqrt(std::max(q, 0.0));
}

inline double rkhs_norm(const BlockFunction& f) {
    return std::visit([](const auto& g) { return rkhs_norm(g); }, f.rep);
}

/// Interpolation-space norm sqrt(sum_k mu_k^(-beta) b_k^2); beta = 0 is the
/// L2 norm, beta = 1 the RKHS norm.
inline double interpolation_norm(const SpectralFunction& f, double beta) {
    if (!(beta >= 0.0 && beta <= 2.0)) throw input_error("interpolation order must lie in [0,2]");
    double acc = 0.0;
    for (Eigen::Index k = 0; k < f.coeffs.size(); ++k)
        acc += f.coeffs[k] * f.coeffs[k] *
               std::pow(f.kernel.eigenvalue(static_cast<int>(k) + 1), -beta);
    if (!std::isfinite(acc)) throw representation_error("interpolation norm diverged");
    return std::sqrt(acc);
}

/// Root mean square over the sample points.
template <class F>
double empirical_norm(const F& f, const Vec& points) {
    if (points.size() == 0) throw input_error("empirical norm: empty point list");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < points.size(); ++i) {
        const double v = f.eval(points[i]);
        acc += v * v;
    }
    return std::sqrt(acc / static_cast<double>(points.size()));
}

/// Dense-grid maximum of |f|; a lower bound on the true sup-norm.
template <class F>
double sup_norm_estimate(const F& f, int grid_size = 100000) {
    if (grid_size < 1000) throw input_error("sup norm grid must have at least 1000 points");
    double best = 0.0;
    for (int i = 0; i < grid_size; ++i) {
        const double x = static_cast<double>(i) / (grid_size - 1);
        best = std::max(best, std::abs(f.eval(x)));
    }
    return best;
}

/// T^beta: multiplies eigen-coefficient k by mu_k^beta.
inline SpectralFunction power_operator(const SpectralFunction& f, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw input_error("power operator exponent must lie in [0,1]");
    Vec b = f.coeffs;
    for (Eigen::Index k = 0; k < b.size(); ++k)
        b[k] *= std::pow(f.kernel.eigenvalue(static_cast<int>(k) + 1), beta);
    return SpectralFunction(f.kernel, std::move(b));
}

/// Draws f = T^(q/2) g with ||g||_H <= radius. The direction is a Gaussian
/// draw weighted by the spectrum (coefficient k proportional to mu_k before
/// normalization); an isotropic direction in RKHS coordinates would put
/// nearly all L2 mass on the truncation tail. The radius factor is uniform
/// on (0,1]. The result satisfies interpolation_norm(f, 1+q) <= radius.
inline SpectralFunction sample_smoothness_ball(const SpectralKernel& kernel, double smoothness,
                                               double radius, Rng& rng,
                                               double spectral_weight = 1.0) {
    if (!(smoothness >= 0.0 && smoothness <= 1.0))
        throw input_error("smoothness must lie in [0,1]");
    if (radius < 0.0) throw input_error("ball radius must be nonnegative");
    const int kk = kernel.truncation();
    if (radius == 0.0) return SpectralFunction::zero(kernel);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec g(kk);
    for (int k = 1; k <= kk; ++k)
        g[k - 1] = std::pow(kernel.eigenvalue(k), spectral_weight) * gauss(rng);
    SpectralFunction gf(kernel, std::move(g));
    const double h = rkhs_norm(gf);
    if (h == 0.0) return SpectralFunction::zero(kernel);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double r = radius * (1.0 - unif(rng));  // uniform on (0, radius]
    gf.coeffs *= r / h;
    return power_operator(gf, smoothness / 2.0);
}

/// (sum_m ||f_m||_H^p)^(1/p); p may be infinity (maximum).
inline double mixed_norm(const std::vector<BlockFunction>& blocks, double p) {
    if (blocks.empty()) throw input_error("mixed norm: empty block list");
    if (!(p >= 1.0)) throw input_error("mixed norm order must satisfy p >= 1");
    std::vector<double> norms;
    norms.reserve(blocks.size());
    for (const auto& b : blocks) norms.push_back(rkhs_norm(b));
    if (std::isinf(p)) return *std::max_element(norms.begin(), norms.end());
    double acc = 0.0;
    for (double v : norms) acc += std::pow(v, p);
    return std::pow(acc, 1.0 / p);
}

inline double mixed_norm(const std::vector<SpectralFunction>& blocks, double p) {
    if (blocks.empty()) throw input_error("mixed norm: empty block list");
    if (!(p >= 1.0)) throw input_error("mixed norm order must satisfy p >= 1");
    std::vector<double> norms;
    norms.reserve(blocks.size());
    for (const auto& b : blocks) norms.push_back(rkhs_norm(b));
    if (std::isinf(p)) return *std::max_element(norms.begin(), norms.end());
    double acc = 0.0;
    for (double v : norms) acc += std::pow(v, p);
    return std::pow(acc, 1.0 / p);
}

}  // namespace mklnet
