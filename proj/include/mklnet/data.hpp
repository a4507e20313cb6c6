#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "mklnet/function.hpp"

namespace mklnet {

enum class TruthProfile { homogeneous, inhomogeneous, custom };

inline std::string to_string(TruthProfile p) {
    switch (p) {
        case TruthProfile::homogeneous: return "homogeneous";
        case TruthProfile::inhomogeneous: return "inhomogeneous";
        case TruthProfile::custom: return "custom";
    }
    return "custom";
}

inline TruthProfile truth_profile_from_string(const std::string& s) {
    if (s == "homogeneous") return TruthProfile::homogeneous;
    if (s == "inhomogeneous") return TruthProfile::inhomogeneous;
    if (s == "custom") return TruthProfile::custom;
    throw input_error("unknown truth profile: " + s);
}

/// Additive ground truth over M coordinates: component m is f_m = T^(q/2) g_m,
/// nonzero exactly on the active set.
struct GroundTruth {
    SpectralKernel kernel;
    int num_blocks = 0;       // M
    double smoothness = 0.0;  // q
    std::vector<int> active;  // 0-based block indices, size d
    std::vector<SpectralFunction> g;  // size M, zero off the active set
    std::vector<SpectralFunction> f;  // f[m] = T^(q/2) g[m]
    TruthProfile profile = TruthProfile::custom;

    int active_count() const { return static_cast<int>(active.size()); }

    /// (sum_m ||f_m||_H^p)^(1/p)
    double mixed_norm_f(double p) const { return mixed_norm(f, p); }
    double mixed_norm_g(double p) const { return mixed_norm(g, p); }
    double r1_f() const { return mixed_norm_f(1.0); }
    double r2_g() const { return mixed_norm_g(2.0); }

    double max_active_g_norm() const {
        double best = 0.0;
        for (int m : active) best = std::max(best, rkhs_norm(g[m]));
        return best;
    }

    double eval(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
        double acc = 0.0;
        for (int m : active) acc += f[m].eval(x[m]);
        return acc;
    }

    /// sum_m ||f_m||_H bounds the sup-norm when sup k(x,x) <= 1.
    double sup_norm_bound() const {
        double acc = 0.0;
        for (int m : active) acc += rkhs_norm(f[m]);
        return acc;
    }
};

/// Draws the active components of a ground truth. Homogeneous scales each
/// component to ||f_m||_H = 1; inhomogeneous to ||f_m||_H = 1/m on the active
/// set {1..d}; custom rescales the whole draw so that the l2-mixed norm of g
/// hits r_target.
inline GroundTruth make_truth(const SpectralKernel& kernel, int num_blocks, int active_count,
                              double smoothness, TruthProfile profile, double r_target,
                              std::uint64_t seed, bool permute_active = false) {
    if (num_blocks < 1) throw input_error("make_truth: at least one block required");
    if (active_count < 0 || active_count > num_blocks)
        throw input_error("make_truth: active count must lie in [0, M]");
    if (!(smoothness >= 0.0 && smoothness <= 1.0))
        throw input_error("make_truth: smoothness must lie in [0,1]");
    if (profile == TruthProfile::custom && !(r_target > 0.0) && active_count > 0)
        throw input_error("make_truth: custom profile needs a positive target norm");

    GroundTruth t{kernel, num_blocks, smoothness, {}, {}, {}, profile};
    t.g.reserve(num_blocks);
    t.f.reserve(num_blocks);
    for (int m = 0; m < num_blocks; ++m) {
        t.g.push_back(SpectralFunction::zero(kernel));
        t.f.push_back(SpectralFunction::zero(kernel));
    }

    Rng rng(mix_seed(seed, 0x7472757468ull));
    std::vector<int> order(num_blocks);
    std::iota(order.begin(), order.end(), 0);
    if (permute_active) {
        if (profile == TruthProfile::inhomogeneous)
            throw input_error("make_truth: the inhomogeneous profile fixes the active set {1..d}");
        std::shuffle(order.begin(), order.end(), rng);
    }
    t.active.assign(order.begin(), order.begin() + active_count);
    std::sort(t.active.begin(), t.active.end());

    double sq_g = 0.0;
    for (int idx = 0; idx < active_count; ++idx) {
        const int m = t.active[idx];
        SpectralFunction gm = sample_smoothness_ball(kernel, smoothness, 1.0, rng);
        SpectralFunction fm = power_operator(gm, smoothness / 2.0);
        const double fh = rkhs_norm(fm);
        if (fh == 0.0) throw numeric_error("make_truth: degenerate component draw");
        switch (profile) {
            case TruthProfile::homogeneous:
                gm.coeffs /= fh;
                break;
            case TruthProfile::inhomogeneous:
                gm.coeffs *= 1.0 / (static_cast<double>(idx) + 1.0) / fh;
                break;
            case TruthProfile::custom:
                break;
        }
        sq_g += rkhs_norm(gm) * rkhs_norm(gm);
        t.g[m] = std::move(gm);
    }
    if (profile == TruthProfile::custom && active_count > 0) {
        const double rescale = r_target / std::sqrt(sq_g);
        for (int m : t.active) t.g[m].coeffs *= rescale;
    }
    for (int m : t.active) t.f[m] = power_operator(t.g[m], smoothness / 2.0);
    return t;
}

struct NoiseSpec {
    enum class Kind { none, bounded, gaussian };
    Kind kind = Kind::none;
    double level = 0.0;  // radius L for bounded, sigma for gaussian

    static NoiseSpec none() { return {Kind::none, 0.0}; }
    static NoiseSpec bounded(double radius) {
        if (radius < 0.0) throw input_error("bounded noise radius must be nonnegative");
        return {Kind::bounded, radius};
    }
    static NoiseSpec gaussian(double sigma) {
        if (!(sigma > 0.0)) throw input_error("gaussian noise sigma must be positive");
        return {Kind::gaussian, sigma};
    }
};

/// Product-design sample: row i holds the M independent uniform coordinates,
/// y_i = sum_m f_m(x_i^(m)) + eps_i.
struct Dataset {
    Mat x;  // n x M
    Vec y;  // n
    NoiseSpec noise;
    std::uint64_t seed = 0;

    Eigen::Index size() const { return x.rows(); }
    Eigen::Index num_blocks() const { return x.cols(); }

    Dataset head(Eigen::Index m) const { return Dataset{x.topRows(m), y.head(m), noise, seed}; }
    Dataset tail(Eigen::Index m) const {
        return Dataset{x.bottomRows(m), y.tail(m), noise, seed};
    }
};

inline Dataset sample_dataset(const GroundTruth& truth, int n, const NoiseSpec& noise,
                              std::uint64_t seed) {
    if (n < 1) throw input_error("sample_dataset: need at least one sample");
    Rng rng(mix_seed(seed, 0x64617461ull));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int m_count = truth.num_blocks;
    Mat x(n, m_count);
    for (int i = 0; i < n; ++i)
        for (int m = 0; m < m_count; ++m) x(i, m) = unif(rng);

    Vec y(n);
    for (int i = 0; i < n; ++i) y[i] = truth.eval(x.row(i));

    switch (noise.kind) {
        case NoiseSpec::Kind::none:
            break;
        case NoiseSpec::Kind::bounded: {
            std::uniform_real_distribution<double> eps(-noise.level, noise.level);
            for (int i = 0; i < n; ++i) y[i] += eps(rng);
            break;
        }
        case NoiseSpec::Kind::gaussian: {
            std::normal_distribution<double> eps(0.0, noise.level);
            for (int i = 0; i < n; ++i) y[i] += eps(rng);
            break;
        }
    }
    return Dataset{std::move(x), std::move(y), noise, seed};
}

/// Exact squared L2(Pi) distance between an additive model and the truth.
/// In the product design with centered components the cross terms vanish,
/// so the error is the sum of per-block coefficient distances.
inline double exact_l2_error(const std::vector<SpectralFunction>& blocks,
                             const GroundTruth& truth) {
    if (static_cast<int>(blocks.size()) != truth.num_blocks)
        throw input_error("exact_l2_error: block count differs from the truth");
    double acc = 0.0;
    for (int m = 0; m < truth.num_blocks; ++m) {
        if (!blocks[m].kernel.same_as(truth.kernel))
            throw input_error("exact_l2_error: kernel mismatch");
        const Vec& a = blocks[m].coeffs;
        const Vec& b = truth.f[m].coeffs;
        const Eigen::Index common = std::min(a.size(), b.size());
        acc += (a.head(common) - b.head(common)).squaredNorm();
        if (a.size() > common) acc += a.tail(a.size() - common).squaredNorm();
        if (b.size() > common) acc += b.tail(b.size() - common).squaredNorm();
    }
    return acc;
}

}  // namespace mklnet
