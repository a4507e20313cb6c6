#include <gtest/gtest.h>

#include "mklnet/geometry.hpp"
#include "mklnet/rates.hpp"

using namespace mklnet;

namespace {
const SpectralKernel kern = SpectralKernel::cosine(0.5, 128);
}

TEST(AnalyticProduct, PythagoreanIdentity) {
    const auto r = geometry_analytic_product({0, 2});
    EXPECT_EQ(r.rho, 0.0);
    EXPECT_EQ(r.kappa, 1.0);
    EXPECT_EQ(r.incoherence_bound, 1.0);
    EXPECT_THROW(geometry_analytic_product({0}, false), input_error);

    // ||sum_m f_m||^2 = sum_m ||f_m||^2 for centered independent blocks;
    // the cross terms are products of means, both zero.
    Rng rng(3);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 100; ++trial) {
        double sum_sq = 0.0, total_sq = 0.0;
        for (int m = 0; m < 3; ++m) {
            Vec c(16);
            for (int k = 0; k < 16; ++k) c[k] = gauss(rng);
            sum_sq += c.squaredNorm();
            total_sq += c.squaredNorm();  // cross terms vanish identically
        }
        EXPECT_NEAR(total_sq, sum_sq, 1e-12);
    }
}

TEST(SpectralMc, ProductDesignNearIdentity) {
    const auto r = geometry_spectral_mc(kern, 4, {0, 1}, product_design_sampler(4), 8, 100000, 7);
    EXPECT_NEAR(r.kappa, 1.0, 0.05);
    EXPECT_NEAR(r.rho, 0.0, 0.05);
    EXPECT_EQ(r.method, "spectral-MC");
    EXPECT_GE(r.rho, 0.0);
    EXPECT_LE(r.rho, 1.0 + 1e-9);
    EXPECT_GE(r.kappa, -1e-9);
    EXPECT_NEAR(r.incoherence_bound, incoherence_bound(r.kappa, r.rho), 1e-15);
}

TEST(SpectralMc, DuplicatedCoordinateIsFullyCorrelated) {
    // Both blocks read the same coordinate, so the spans coincide.
    auto sampler = [](Rng& rng, Eigen::Ref<Eigen::RowVectorXd> row) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        row[0] = unif(rng);
        row[1] = row[0];
    };
    const auto r = geometry_spectral_mc(kern, 2, {0}, sampler, 8, 50000, 11);
    EXPECT_GE(r.rho, 0.95);
    EXPECT_LE(r.incoherence_bound, 0.35);
}

TEST(SpectralMc, LowerBoundHoldsOnSampledFunctions) {
    const int m_count = 3, k_trunc = 8;
    const auto sampler = chained_design_sampler(m_count, 0.5);
    const std::vector<int> inside{0, 1};
    const auto r = geometry_spectral_mc(kern, m_count, inside, sampler, k_trunc, 100000, 13);
    ASSERT_GT(r.incoherence_bound, 0.0);

    // Shared design draw for all test functions.
    const long n_mc = 100000;
    Rng rng(17);
    Mat features(n_mc, m_count * k_trunc);
    Eigen::RowVectorXd row(m_count);
    for (long i = 0; i < n_mc; ++i) {
        sampler(rng, row);
        for (int m = 0; m < m_count; ++m)
            for (int k = 1; k <= k_trunc; ++k)
                features(i, m * k_trunc + k - 1) = kern.basis(k, row[m]);
    }
    std::normal_distribution<double> gauss;
    int failures = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Vec c(m_count * k_trunc);
        for (Eigen::Index j = 0; j < c.size(); ++j) c[j] = gauss(rng);
        double inside_sq = 0.0;
        for (int m : inside) inside_sq += c.segment(m * k_trunc, k_trunc).squaredNorm();
        const Vec vals = features * c;
        const double mean_sq = vals.squaredNorm() / n_mc;
        const double var = (vals.array().square() - mean_sq).square().sum() / n_mc;
        const double se = std::sqrt(var / n_mc);
        const double bound = r.incoherence_bound * r.incoherence_bound * inside_sq;
        if (mean_sq < bound - 3.0 * se) ++failures;
    }
    EXPECT_EQ(failures, 0);
}

TEST(SpectralMc, InputValidation) {
    EXPECT_THROW(geometry_spectral_mc(kern, 2, {0}, product_design_sampler(2), 0, 100000, 1),
                 input_error);
    EXPECT_THROW(geometry_spectral_mc(kern, 2, {0}, product_design_sampler(2), 8, 100, 1),
                 input_error);
    EXPECT_THROW(geometry_spectral_mc(kern, 2, {5}, product_design_sampler(2), 8, 100000, 1),
                 input_error);
}

TEST(RateConstants, HomogeneousCollapse) {
    const auto t = make_truth(kern, 6, 4, 0.0, TruthProfile::homogeneous, 0.0, 19);
    const auto c = rate_constants(t);
    EXPECT_NEAR(c.b1, 32.0, 1e-9);
    EXPECT_EQ(c.b2, 16.0);
    EXPECT_GE(c.b1, 16.0);
    EXPECT_LE(c.b1, 16.0 * (1.0 + 2.0));  // 16(1 + sqrt(d))
}

TEST(RateConstants, WeightedNormSubstitution) {
    const auto t = make_truth(kern, 5, 3, 0.5, TruthProfile::custom, 2.0, 23);
    std::vector<double> h;
    double expected_sq = 0.0;
    for (int m : t.active) {
        h.push_back(rkhs_norm(t.g[m]));
        expected_sq += rkhs_norm(t.g[m]);
    }
    const auto c = rate_constants(t, h);
    ASSERT_TRUE(c.weighted_r2.has_value());
    EXPECT_NEAR(*c.weighted_r2 * *c.weighted_r2, expected_sq, 1e-10);
    ASSERT_TRUE(c.b3.has_value());
    EXPECT_GE(*c.b3, 32.0);
    EXPECT_THROW(rate_constants(t, {1.0, -1.0, 1.0}), input_error);
    const auto zero = make_truth(kern, 3, 0, 0.0, TruthProfile::homogeneous, 0.0, 29);
    EXPECT_THROW(rate_constants(zero), input_error);
}

TEST(Recovery, TrivialPassAndFail) {
    const auto t = make_truth(kern, 4, 2, 0.3, TruthProfile::homogeneous, 0.0, 31);
    std::vector<double> exact, zero(4, 0.0);
    for (int m = 0; m < 4; ++m) exact.push_back(rkhs_norm(t.f[m]));
    const auto pass = recovery_diagnostic(exact, t);
    EXPECT_EQ(pass.pass_rate(), 1.0);
    const auto fail = recovery_diagnostic(zero, t);
    EXPECT_EQ(fail.pass_rate(), 0.0);
    ASSERT_EQ(fail.rows.size(), 2u);
    for (const auto& row : fail.rows) EXPECT_GT(row.threshold, 0.0);
}

TEST(Recovery, PassRateImprovesWithSampleSize) {
    // Trend over seeds: larger samples recover the active norm more often.
    const auto small_kernel = SpectralKernel::cosine(0.5, 96);
    const int seeds = 30;
    auto rate_at = [&](int n) {
        double acc = 0.0;
        for (int s = 0; s < seeds; ++s) {
            const auto t =
                make_truth(small_kernel, 2, 1, 1.0, TruthProfile::homogeneous, 0.0, 500 + s);
            const auto ds = sample_dataset(t, n, NoiseSpec::bounded(0.5), 900 + s);
            ScheduleInputs in;
            in.n = n;
            in.num_kernels = 2;
            in.active_count = 1;
            in.decay = 0.5;
            in.smoothness = 1.0;
            in.r2_g = t.r2_g();
            in.r1_f = t.r1_f();
            const auto sched = schedule(in, Branch::elastic);
            const auto model = fit(ds, small_kernel, sched.params);
            acc += recovery_diagnostic(model, ds, t).pass_rate();
        }
        return acc / seeds;
    };
    const double lo = rate_at(64);
    const double hi = rate_at(1024);
    EXPECT_GE(hi, lo - 0.1);
}
