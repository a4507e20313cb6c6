#include <gtest/gtest.h>

#include <filesystem>

#include "mklnet/io.hpp"

using namespace mklnet;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "mklnet_io_test";
    fs::create_directories(dir);
    return (dir / name).string();
}

}  // namespace

TEST(KernelJson, RoundTripDerivesScale) {
    const auto k = SpectralKernel::cosine(0.37, 96);
    const json j = to_json(k);
    EXPECT_FALSE(j.contains("scale"));  // derived, never stored
    const auto back = kernel_from_json(j);
    EXPECT_TRUE(back.same_as(k));
    EXPECT_THROW(kernel_from_json(json{{"s", 0.5}, {"basis", "rbf"}}), input_error);
}

TEST(DatasetCsv, ExactRoundTrip) {
    const auto kern = SpectralKernel::cosine(0.5, 64);
    const auto t = make_truth(kern, 3, 2, 0.5, TruthProfile::homogeneous, 0.0, 3);
    const auto ds = sample_dataset(t, 37, NoiseSpec::gaussian(0.25), 5);
    const auto path = temp_path("roundtrip.csv");
    write_dataset_csv(path, ds);
    const auto back = read_dataset_csv(path);
    ASSERT_EQ(back.size(), ds.size());
    ASSERT_EQ(back.num_blocks(), ds.num_blocks());
    EXPECT_EQ((back.x - ds.x).norm(), 0.0);
    EXPECT_EQ((back.y - ds.y).norm(), 0.0);
}

TEST(Bundle, SidecarRebuildsTruth) {
    const auto kern = SpectralKernel::cosine(0.6, 48);
    TruthSpec spec;
    spec.num_blocks = 4;
    spec.active_count = 2;
    spec.smoothness = 0.5;
    spec.profile = TruthProfile::inhomogeneous;
    spec.seed = 99;
    const auto truth = spec.realize(kern);
    const auto ds = sample_dataset(truth, 20, NoiseSpec::bounded(0.5), 7);

    const auto csv = temp_path("bundle.csv");
    write_bundle(csv, sidecar_path_for(csv), kern, spec, ds);
    const auto bundle = read_bundle(csv);
    EXPECT_TRUE(bundle.kernel.same_as(kern));
    EXPECT_EQ(bundle.truth.active, truth.active);
    EXPECT_NEAR(bundle.truth.r1_f(), truth.r1_f(), 1e-15);
    EXPECT_EQ((bundle.data.y - ds.y).norm(), 0.0);
    EXPECT_EQ(bundle.data.noise.kind, NoiseSpec::Kind::bounded);
}

TEST(ModelJson, RoundTrip) {
    MklModel m;
    m.params = RegParams{0.1, 0.05, 0.01};
    m.alpha = {Vec::LinSpaced(4, -1.0, 1.0), Vec::Zero(4)};
    m.active = {0};
    m.trace = {1.0, 0.5, 0.25};
    m.objective_value = 0.25;
    m.kkt_residual = 1e-9;
    m.converged = true;
    const auto path = temp_path("model.json");
    write_json(path, to_json(m, "data/run.csv"));
    const auto back = model_from_json(read_json(path));
    EXPECT_EQ(back.params.lambda2, m.params.lambda2);
    EXPECT_EQ((back.alpha[0] - m.alpha[0]).norm(), 0.0);
    EXPECT_EQ(back.active, m.active);
    EXPECT_EQ(back.trace, m.trace);
    EXPECT_TRUE(back.converged);
}

TEST(ReportCsv, HeadersAndRows) {
    SelectionResult sel;
    SelectionRow row;
    row.params = RegParams{0.5, 0.25, 0.125};
    row.validation_mse = 0.75;
    row.converged = true;
    sel.table = {row};
    const auto path = temp_path("selection.csv");
    write_selection_csv(path, sel, {0.5});
    const auto text = read_text(path);
    EXPECT_NE(text.find("lambda1,lambda2,lambda3,validation_mse,exact_l2_error,converged"),
              std::string::npos);
    EXPECT_NE(text.find("0.5,0.25,0.125,0.75,0.5,1"), std::string::npos);

    RateReport report;
    report.axis = "n";
    report.branch = Branch::elastic;
    RatePoint p;
    p.axis = 128;
    p.mean_err = 0.01;
    p.se = 0.001;
    report.points = {p};
    report.slope.slope = -0.8;
    report.theory_exponent = -0.8;
    const auto rpath = temp_path("rates.csv");
    write_rate_csv(rpath, report, 0, 2);
    const auto rtext = read_text(rpath);
    EXPECT_NE(rtext.find("n,d,mean_err,se,branch,slope,theory_exponent"), std::string::npos);
    EXPECT_NE(rtext.find("128,2,0.01,0.001,elastic,-0.8,-0.8"), std::string::npos);
}
