#include <gtest/gtest.h>

#include "mklnet/data.hpp"

using namespace mklnet;

namespace {
const SpectralKernel kern = SpectralKernel::cosine(0.5, 64);
}

TEST(MakeTruth, HomogeneousNormsAreExact) {
    const auto t = make_truth(kern, 8, 4, 0.0, TruthProfile::homogeneous, 0.0, 7);
    ASSERT_EQ(t.active_count(), 4);
    for (int m : t.active) EXPECT_NEAR(rkhs_norm(t.f[m]), 1.0, 1e-12);
    EXPECT_NEAR(t.mixed_norm_f(2.0), 2.0, 1e-12);  // d^(1/2)
    EXPECT_NEAR(t.mixed_norm_f(1.0), 4.0, 1e-12);
    for (int m = 0; m < t.num_blocks; ++m) {
        const bool active = std::find(t.active.begin(), t.active.end(), m) != t.active.end();
        if (!active) EXPECT_EQ(l2_norm(t.f[m]), 0.0);
    }
}

TEST(MakeTruth, ZeroActiveCount) {
    const auto t = make_truth(kern, 5, 0, 0.5, TruthProfile::homogeneous, 0.0, 3);
    EXPECT_EQ(t.active_count(), 0);
    EXPECT_EQ(t.mixed_norm_f(1.0), 0.0);
    EXPECT_EQ(t.mixed_norm_g(2.0), 0.0);
}

TEST(MakeTruth, InhomogeneousHarmonicNorms) {
    const auto t = make_truth(kern, 6, 3, 0.3, TruthProfile::inhomogeneous, 0.0, 11);
    EXPECT_NEAR(t.r1_f(), 1.0 + 0.5 + 1.0 / 3.0, 1e-12);
    EXPECT_EQ(t.active, (std::vector<int>{0, 1, 2}));
}

TEST(MakeTruth, CustomHitsSourceNormTarget) {
    for (double q : {0.0, 0.5, 1.0}) {
        const auto t = make_truth(kern, 7, 3, q, TruthProfile::custom, 2.5, 13);
        EXPECT_NEAR(t.r2_g(), 2.5, 2.5 * 1e-9);
    }
}

TEST(MakeTruth, InputValidation) {
    EXPECT_THROW(make_truth(kern, 4, 5, 0.0, TruthProfile::homogeneous, 0.0, 1), input_error);
    EXPECT_THROW(make_truth(kern, 4, 2, 1.5, TruthProfile::homogeneous, 0.0, 1), input_error);
}

TEST(SampleDataset, NoiselessResponsesAreExact) {
    const auto t = make_truth(kern, 4, 2, 0.5, TruthProfile::homogeneous, 0.0, 5);
    const auto ds = sample_dataset(t, 64, NoiseSpec::none(), 9);
    for (int i = 0; i < 64; ++i) EXPECT_EQ(ds.y[i], t.eval(ds.x.row(i)));
}

TEST(SampleDataset, BoundedNoiseStaysBounded) {
    const auto t = make_truth(kern, 4, 2, 0.0, TruthProfile::homogeneous, 0.0, 5);
    const auto ds = sample_dataset(t, 512, NoiseSpec::bounded(0.5), 21);
    for (int i = 0; i < 512; ++i) {
        const double eps = ds.y[i] - t.eval(ds.x.row(i));
        EXPECT_LE(std::abs(eps), 0.5);
    }
}

TEST(SampleDataset, DeterministicGivenSeed) {
    const auto t = make_truth(kern, 3, 1, 0.2, TruthProfile::homogeneous, 0.0, 5);
    const auto a = sample_dataset(t, 40, NoiseSpec::gaussian(0.3), 77);
    const auto b = sample_dataset(t, 40, NoiseSpec::gaussian(0.3), 77);
    EXPECT_EQ((a.x - b.x).norm(), 0.0);
    EXPECT_EQ((a.y - b.y).norm(), 0.0);
    const auto c = sample_dataset(t, 40, NoiseSpec::gaussian(0.3), 78);
    EXPECT_NE((a.y - c.y).norm(), 0.0);
}

TEST(SampleDataset, NoiseValidation) {
    EXPECT_THROW(NoiseSpec::gaussian(0.0), input_error);
    EXPECT_THROW(NoiseSpec::gaussian(-1.0), input_error);
    EXPECT_THROW(NoiseSpec::bounded(-0.5), input_error);
}

TEST(ExactError, ZeroForTheTruthItself) {
    const auto t = make_truth(kern, 5, 2, 0.4, TruthProfile::homogeneous, 0.0, 19);
    EXPECT_EQ(exact_l2_error(t.f, t), 0.0);
}

TEST(ExactError, SingleCoefficientOffset) {
    const auto t = make_truth(kern, 3, 1, 0.0, TruthProfile::homogeneous, 0.0, 23);
    auto blocks = t.f;
    const double delta = 0.37;
    blocks[2].coeffs[0] += delta;
    EXPECT_NEAR(exact_l2_error(blocks, t), delta * delta, 1e-14);
}

TEST(ExactError, KernelMismatchRejected) {
    const auto t = make_truth(kern, 2, 1, 0.0, TruthProfile::homogeneous, 0.0, 29);
    std::vector<SpectralFunction> blocks;
    const auto other = SpectralKernel::cosine(0.6, 64);
    blocks.push_back(SpectralFunction::zero(other));
    blocks.push_back(SpectralFunction::zero(other));
    EXPECT_THROW(exact_l2_error(blocks, t), input_error);
}

TEST(ExactError, MatchesMonteCarloOnProductDesign) {
    Rng rng(31);
    const auto t = make_truth(kern, 3, 2, 0.5, TruthProfile::homogeneous, 0.0, 37);
    auto blocks = t.f;
    std::normal_distribution<double> gauss;
    for (int m = 0; m < 3; ++m)
        for (int k = 0; k < 8; ++k)
            blocks[m].coeffs[k] += 0.1 * std::sqrt(kern.eigenvalue(k + 1)) * gauss(rng);
    const double exact = exact_l2_error(blocks, t);

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const long trials = 1000000;
    double sum = 0.0, sum_sq = 0.0;
    Eigen::RowVectorXd x(3);
    for (long i = 0; i < trials; ++i) {
        double diff = 0.0;
        for (int m = 0; m < 3; ++m) {
            x[m] = unif(rng);
            diff += blocks[m].eval(x[m]) - t.f[m].eval(x[m]);
        }
        sum += diff * diff;
        sum_sq += diff * diff * diff * diff;
    }
    const double mean = sum / trials;
    const double se = std::sqrt(std::max(0.0, sum_sq / trials - mean * mean) / trials);
    EXPECT_NEAR(mean, exact, 3.0 * se);
}

TEST(ProductDesign, CrossBlockCorrelationShrinks) {
    const auto t = make_truth(kern, 4, 4, 0.0, TruthProfile::homogeneous, 0.0, 41);
    for (long n : {200L, 3200L}) {
        double worst = 0.0;
        const int seeds = 40;
        double acc = 0.0, acc_sq = 0.0;
        for (int s = 0; s < seeds; ++s) {
            const auto ds = sample_dataset(t, static_cast<int>(n), NoiseSpec::none(), 100 + s);
            double corr = 0.0;
            for (long i = 0; i < n; ++i)
                corr += t.f[0].eval(ds.x(i, 0)) * t.f[1].eval(ds.x(i, 1));
            corr /= static_cast<double>(n);
            acc += corr;
            acc_sq += corr * corr;
            worst = std::max(worst, std::abs(corr));
        }
        const double mean = acc / seeds;
        const double sd = std::sqrt(std::max(acc_sq / seeds - mean * mean, 1e-30));
        // Mean empirical correlation is zero up to Monte Carlo error.
        EXPECT_LE(std::abs(mean), 3.0 * sd / std::sqrt(static_cast<double>(seeds)));
        // And its scale shrinks like n^(-1/2).
        EXPECT_LE(worst, 10.0 / std::sqrt(static_cast<double>(n)));
    }
}

TEST(ProductDesign, ResponsesAreCentered) {
    const auto t = make_truth(kern, 4, 2, 0.0, TruthProfile::homogeneous, 0.0, 43);
    const int n = 4096;
    const auto ds = sample_dataset(t, n, NoiseSpec::none(), 51);
    double mean = ds.y.mean();
    double sd = std::sqrt((ds.y.array() - mean).square().sum() / (n - 1));
    EXPECT_LE(std::abs(mean), 3.0 * sd / std::sqrt(static_cast<double>(n)));
}
