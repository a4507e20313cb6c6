#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "mklnet/io.hpp"

namespace fs = std::filesystem;
using mklnet::json;

namespace {

std::string cli() {
    const char* path = std::getenv("MKLNET_CLI");
    if (!path) throw std::runtime_error("MKLNET_CLI not set");
    return path;
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "mklnet_cli_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run(const std::string& args) {
    const int rc = std::system((cli() + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(rc);
}

bool same_bytes(const fs::path& a, const fs::path& b) {
    return mklnet::read_text(a.string()) == mklnet::read_text(b.string());
}

}  // namespace

TEST(Cli, GenDataIsByteReproducible) {
    const auto a = fresh_dir("gen_a");
    const auto b = fresh_dir("gen_b");
    const std::string flags = "gen-data --M 4 --d 2 --q 1 --s 0.5 --K 64 --n 64 --seed 7 --out ";
    ASSERT_EQ(run(flags + a.string()), 0);
    ASSERT_EQ(run(flags + b.string()), 0);
    EXPECT_TRUE(same_bytes(a / "run.csv", b / "run.csv"));
    EXPECT_TRUE(same_bytes(a / "run.json", b / "run.json"));
    EXPECT_TRUE(same_bytes(a / "manifest.json", b / "manifest.json"));
}

TEST(Cli, FitEmitsSelfConsistentModel) {
    const auto dir = fresh_dir("fit");
    ASSERT_EQ(run("gen-data --M 3 --d 1 --q 0 --s 0.5 --K 64 --n 48 --seed 3 --out " +
                  dir.string()),
              0);
    const auto csv = (dir / "run.csv").string();
    ASSERT_EQ(run("fit --data " + csv + " --branch elastic --t 1 --out " + dir.string()), 0);
    const auto bundle = mklnet::read_bundle(csv);
    const auto model = mklnet::model_from_json(mklnet::read_json((dir / "model.json").string()));
    const double recomputed =
        mklnet::objective(model, bundle.data, bundle.kernel, model.params);
    EXPECT_NEAR(recomputed, model.objective_value, 1e-10 * std::max(1.0, recomputed));
}

TEST(Cli, ManifestRerunReproducesBytes) {
    const auto a = fresh_dir("rerun_a");
    const auto b = fresh_dir("rerun_b");
    ASSERT_EQ(run("gen-data --M 3 --d 1 --n 32 --seed 11 --K 64 --out " + a.string()), 0);
    ASSERT_EQ(run("rerun --manifest " + (a / "manifest.json").string() + " --out " + b.string()),
              0);
    EXPECT_TRUE(same_bytes(a / "run.csv", b / "run.csv"));
    EXPECT_TRUE(same_bytes(a / "run.json", b / "run.json"));
}

TEST(Cli, RatesSmokeEmitsSlopeColumn) {
    const auto dir = fresh_dir("rates");
    ASSERT_EQ(run("rates --branch l1 --s 0.5 --q 0 --d 1 --M 3 --K 64 "
                  "--n-grid 32,64,128,512 --seeds 10 --jobs 2 --seed 5 --out report.csv "
                  "--out-dir " +
                  dir.string()),
              0);
    const auto text = mklnet::read_text((dir / "report.csv").string());
    EXPECT_NE(text.find("n,d,mean_err,se,branch,slope,theory_exponent"), std::string::npos);
    EXPECT_NE(text.find("l1"), std::string::npos);
    // four grid rows plus header
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
}

TEST(Cli, GeometryAndDiagnoseRun) {
    const auto dir = fresh_dir("geom");
    ASSERT_EQ(run("geometry --design product --method analytic --M 4 --I 0,1 --out " +
                  dir.string()),
              0);
    const auto rep = mklnet::read_json((dir / "geometry.json").string());
    EXPECT_EQ(rep.at("rho").get<double>(), 0.0);
    EXPECT_EQ(rep.at("kappa").get<double>(), 1.0);

    const auto ddir = fresh_dir("diag");
    ASSERT_EQ(run("gen-data --M 2 --d 1 --n 64 --seed 13 --K 64 --noise none --out " +
                  ddir.string()),
              0);
    const auto csv = (ddir / "run.csv").string();
    ASSERT_EQ(run("fit --data " + csv + " --l1 0.01 --l2 0.005 --l3 0 --out " + ddir.string()), 0);
    ASSERT_EQ(run("diagnose --data " + csv + " --model " + (ddir / "model.json").string() +
                  " --out " + ddir.string()),
              0);
    const auto diag = mklnet::read_json((ddir / "diagnose.json").string());
    EXPECT_TRUE(diag.contains("pass_rate"));
}

TEST(Cli, SelectEmitsTable) {
    const auto dir = fresh_dir("select");
    ASSERT_EQ(run("gen-data --M 2 --d 1 --n 40 --seed 17 --K 64 --noise none --out " +
                  dir.string()),
              0);
    ASSERT_EQ(run("select --data " + (dir / "run.csv").string() +
                  " --budget 4 --jobs 2 --out " + dir.string()),
              0);
    const auto text = mklnet::read_text((dir / "selection.csv").string());
    EXPECT_NE(text.find("lambda1,lambda2,lambda3,validation_mse"), std::string::npos);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 33);  // header + 16 + 16
}

TEST(Cli, UnknownFlagIsUsageError) {
    EXPECT_EQ(run("gen-data --frobnicate 1 --out /tmp/mklnet_cli_unused"), 2);
    EXPECT_EQ(run("no-such-command"), 2);
}

TEST(Cli, EnvSeedFallback) {
    const auto a = fresh_dir("env_a");
    const auto b = fresh_dir("env_b");
    const std::string base = "gen-data --M 2 --d 1 --n 16 --K 64 --out ";
    ASSERT_EQ(std::system(("MKLNET_SEED=99 " + cli() + " " + base + a.string() +
                           " >/dev/null 2>&1")
                              .c_str()),
              0);
    ASSERT_EQ(run(base + b.string() + " --seed 99"), 0);
    EXPECT_TRUE(same_bytes(a / "run.csv", b / "run.csv"));
}
