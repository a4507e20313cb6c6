// Command-line front end: data generation, fitting, validation-based
// selection, dependency geometry, rate sweeps and recovery diagnostics.
// Every subcommand resolves its options into a JSON config, runs from that
// config alone, and writes a manifest next to its outputs, so `rerun`
// reproduces any run byte-for-byte.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "mklnet/mklnet.hpp"

namespace fs = std::filesystem;
using mklnet::json;

namespace {

std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t flag_value) {
    if (opt->count() > 0) return flag_value;
    if (const char* env = std::getenv("MKLNET_SEED")) return std::strtoull(env, nullptr, 10);
    return flag_value;
}

void write_manifest(const std::string& out_dir, const std::string& command, const json& config) {
    mklnet::write_json((fs::path(out_dir) / "manifest.json").string(),
                       json{{"command", command},
                            {"config", config},
                            {"version", mklnet::library_version}});
}

mklnet::NoiseSpec noise_from_config(const json& cfg) {
    const std::string kind = cfg.at("noise").get<std::string>();
    const double level = cfg.at("noise_level").get<double>();
    if (kind == "none") return mklnet::NoiseSpec::none();
    if (kind == "bounded") return mklnet::NoiseSpec::bounded(level);
    if (kind == "gaussian") return mklnet::NoiseSpec::gaussian(level);
    throw mklnet::input_error("unknown noise kind: " + kind);
}

std::vector<long> parse_grid(const std::string& text) {
    std::vector<long> grid;
    std::istringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) grid.push_back(std::strtol(tok.c_str(), nullptr, 10));
    }
    if (grid.empty()) throw mklnet::input_error("empty grid: " + text);
    return grid;
}

mklnet::RegParams schedule_from_config(const json& cfg, const mklnet::DataBundle& bundle) {
    if (cfg.contains("lambda1")) {
        return mklnet::RegParams{cfg.at("lambda1").get<double>(), cfg.at("lambda2").get<double>(),
                                 cfg.at("lambda3").get<double>()};
    }
    mklnet::ScheduleInputs in;
    in.n = bundle.data.size();
    in.num_kernels = bundle.truth_spec.num_blocks;
    in.active_count = std::max(bundle.truth_spec.active_count, 1);
    in.decay = bundle.kernel.decay_exponent();
    in.smoothness = bundle.truth_spec.smoothness;
    in.r2_g = bundle.truth.r2_g();
    in.r1_f = bundle.truth.r1_f();
    in.t = cfg.at("t").get<double>();
    in.psi = cfg.at("psi").get<double>();
    return mklnet::schedule(in, mklnet::branch_from_string(cfg.at("branch").get<std::string>()))
        .params;
}

// ---- subcommand bodies; each runs purely from its config -----------------------

void run_gen_data(const json& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const auto kernel =
        mklnet::SpectralKernel::cosine(cfg.at("s").get<double>(), cfg.at("K").get<int>());
    mklnet::TruthSpec spec;
    spec.num_blocks = cfg.at("M").get<int>();
    spec.active_count = cfg.at("d").get<int>();
    spec.smoothness = cfg.at("q").get<double>();
    spec.profile = mklnet::truth_profile_from_string(cfg.at("profile").get<std::string>());
    spec.r_target = cfg.at("r_target").get<double>();
    spec.seed = cfg.at("seed").get<std::uint64_t>();
    const auto truth = spec.realize(kernel);
    const auto data = mklnet::sample_dataset(truth, cfg.at("n").get<int>(),
                                             noise_from_config(cfg), spec.seed);
    const auto name = cfg.at("name").get<std::string>();
    mklnet::write_bundle((fs::path(out_dir) / (name + ".csv")).string(),
                         (fs::path(out_dir) / (name + ".json")).string(), kernel, spec, data);
    write_manifest(out_dir, "gen-data", cfg);
}

void run_fit(const json& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const auto bundle = mklnet::read_bundle(cfg.at("data").get<std::string>());
    const auto params = schedule_from_config(cfg, bundle);
    const auto model = mklnet::fit(bundle.data, bundle.kernel, params);
    const auto name = cfg.at("name").get<std::string>();
    mklnet::write_json((fs::path(out_dir) / (name + ".json")).string(),
                       mklnet::to_json(model, cfg.at("data").get<std::string>()));
    write_manifest(out_dir, "fit", cfg);
}

void run_select(const json& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const auto bundle = mklnet::read_bundle(cfg.at("data").get<std::string>());
    const auto mode = cfg.at("grid_mode").get<std::string>() == "paper-exact"
                          ? mklnet::GridMode::paper_exact
                          : mklnet::GridMode::log_subsampled;
    const auto grid = mklnet::build_grid(static_cast<int>(bundle.data.size()), mode,
                                         cfg.at("budget").get<int>());
    const auto clip_spec = cfg.at("clip_bound").get<double>() > 0.0
                               ? mklnet::ClipSpec::fixed(cfg.at("clip_bound").get<double>())
                               : mklnet::ClipSpec::automatic(bundle.data.y,
                                                             cfg.at("margin").get<double>());
    const auto sel = mklnet::select(bundle.data, bundle.kernel, grid, clip_spec, {},
                                    cfg.at("jobs").get<int>());
    mklnet::write_selection_csv((fs::path(out_dir) / "selection.csv").string(), sel);
    auto [train, validation] = mklnet::split(bundle.data);
    mklnet::write_json((fs::path(out_dir) / "model.json").string(),
                       mklnet::to_json(sel.model, cfg.at("data").get<std::string>()));
    mklnet::write_json((fs::path(out_dir) / "chosen.json").string(),
                       json{{"params", mklnet::to_json(sel.chosen)},
                            {"index", sel.chosen_index},
                            {"clip_bound", sel.clip_spec.bound},
                            {"train_rows", train.size()},
                            {"validation_rows", validation.size()}});
    write_manifest(out_dir, "select", cfg);
}

void run_geometry(const json& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const auto kernel =
        mklnet::SpectralKernel::cosine(cfg.at("s").get<double>(), cfg.at("K").get<int>());
    const int m_count = cfg.at("M").get<int>();
    std::vector<int> index_set;
    for (long v : parse_grid(cfg.at("index_set").get<std::string>()))
        index_set.push_back(static_cast<int>(v));
    mklnet::GeometryReport report;
    const std::string design = cfg.at("design").get<std::string>();
    if (design == "product" && cfg.at("method").get<std::string>() == "analytic") {
        report = mklnet::geometry_analytic_product(index_set);
    } else {
        mklnet::DesignSampler sampler =
            design == "product"
                ? mklnet::product_design_sampler(m_count)
                : mklnet::chained_design_sampler(m_count, cfg.at("share_prob").get<double>());
        report = mklnet::geometry_spectral_mc(kernel, m_count, index_set, sampler,
                                              cfg.at("k_trunc").get<int>(),
                                              cfg.at("n_mc").get<long>(),
                                              cfg.at("seed").get<std::uint64_t>());
    }
    mklnet::write_json((fs::path(out_dir) / "geometry.json").string(), mklnet::to_json(report));
    write_manifest(out_dir, "geometry", cfg);
}

void run_rates(const json& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    mklnet::SweepConfig sc;
    sc.kernel = mklnet::SpectralKernel::cosine(cfg.at("s").get<double>(), cfg.at("K").get<int>());
    sc.num_kernels = cfg.at("M").get<int>();
    sc.active_count = cfg.at("d").get<int>();
    sc.smoothness = cfg.at("q").get<double>();
    sc.noise = noise_from_config(cfg);
    sc.t = cfg.at("t").get<double>();
    sc.psi = cfg.at("psi").get<double>();
    sc.seeds = cfg.at("seeds").get<int>();
    sc.seed = cfg.at("seed").get<std::uint64_t>();
    sc.jobs = cfg.at("jobs").get<int>();
    const auto branch = mklnet::branch_from_string(cfg.at("branch").get<std::string>());

    mklnet::RateReport report;
    long fixed_n = 0, fixed_d = sc.active_count;
    if (cfg.contains("d_grid")) {
        fixed_n = cfg.at("n").get<long>();
        report = mklnet::run_d_sweep(sc, fixed_n, parse_grid(cfg.at("d_grid").get<std::string>()),
                                     branch);
    } else {
        report = mklnet::run_rate_sweep(sc, parse_grid(cfg.at("n_grid").get<std::string>()),
                                        branch);
    }
    mklnet::write_rate_csv((fs::path(out_dir) / cfg.at("name").get<std::string>()).string(),
                           report, fixed_n, fixed_d);
    if (!report.warnings.empty())
        mklnet::write_json((fs::path(out_dir) / "warnings.json").string(),
                           json{{"warnings", report.warnings}});
    write_manifest(out_dir, "rates", cfg);
}

void run_diagnose(const json& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const auto bundle = mklnet::read_bundle(cfg.at("data").get<std::string>());
    const auto model = mklnet::model_from_json(mklnet::read_json(cfg.at("model").get<std::string>()));
    const auto diag = mklnet::recovery_diagnostic(model, bundle.data, bundle.truth);
    json rows = json::array();
    for (const auto& r : diag.rows)
        rows.push_back(json{{"block", r.block},
                            {"fitted_norm", r.fitted_norm},
                            {"threshold", r.threshold},
                            {"pass", r.pass}});
    json out{{"rows", std::move(rows)}, {"pass_rate", diag.pass_rate()}};
    if (bundle.truth.active_count() >= 1) {
        const auto consts = mklnet::rate_constants(bundle.truth);
        out["rate_constants"] = json{{"b1", consts.b1}, {"b2", consts.b2}};
    }
    mklnet::write_json((fs::path(out_dir) / "diagnose.json").string(), out);
    write_manifest(out_dir, "diagnose", cfg);
}

void dispatch(const std::string& command, const json& cfg, const std::string& out_dir) {
    if (command == "gen-data") return run_gen_data(cfg, out_dir);
    if (command == "fit") return run_fit(cfg, out_dir);
    if (command == "select") return run_select(cfg, out_dir);
    if (command == "geometry") return run_geometry(cfg, out_dir);
    if (command == "rates") return run_rates(cfg, out_dir);
    if (command == "diagnose") return run_diagnose(cfg, out_dir);
    throw mklnet::input_error("unknown command in manifest: " + command);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Additive-kernel regression with elastic-net and group-sparse penalties"};
    app.require_subcommand(1);

    std::string out_dir = ".";
    json cfg;
    std::string command;

    // gen-data ------------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "Draw a synthetic ground truth and dataset");
    {
        static int m_count = 8, d = 2, n = 256, big_k = mklnet::SpectralKernel::default_truncation;
        static double q = 0.0, s = 0.5, r_target = 1.0, noise_level = 0.5;
        static std::string profile = "homogeneous", noise = "bounded", name = "run";
        static std::uint64_t seed = 0;
        gen->add_option("--M", m_count, "number of kernel blocks");
        gen->add_option("--d", d, "number of active blocks");
        gen->add_option("--q", q, "truth smoothness in [0,1]");
        gen->add_option("--s", s, "kernel eigenvalue decay exponent in (0,1)");
        gen->add_option("--K", big_k, "kernel truncation");
        gen->add_option("--n", n, "sample size");
        gen->add_option("--profile", profile, "homogeneous|inhomogeneous|custom");
        gen->add_option("--r-target", r_target, "source norm target for the custom profile");
        gen->add_option("--noise", noise, "none|bounded|gaussian");
        gen->add_option("--noise-level", noise_level, "radius L or sigma");
        auto* seed_opt = gen->add_option("--seed", seed, "seed (or MKLNET_SEED)");
        gen->add_option("--out", out_dir, "output directory")->required();
        gen->add_option("--name", name, "basename for the csv/json pair");
        gen->callback([&, seed_opt] {
            command = "gen-data";
            cfg = json{{"M", m_count}, {"d", d}, {"q", q}, {"s", s}, {"K", big_k}, {"n", n},
                       {"profile", profile}, {"r_target", r_target}, {"noise", noise},
                       {"noise_level", noise_level}, {"seed", resolve_seed(seed_opt, seed)},
                       {"name", name}};
        });
    }

    // fit ------------------------------------------------------------------
    auto* fit_cmd = app.add_subcommand("fit", "Fit one model on a stored dataset");
    {
        static std::string data, branch = "elastic", name = "model";
        static double t = 1.0, psi = 1.0, l1 = -1.0, l2 = -1.0, l3 = -1.0;
        fit_cmd->add_option("--data", data, "dataset csv (sidecar json required)")->required();
        fit_cmd->add_option("--branch", branch, "l1|elastic schedule branch");
        fit_cmd->add_option("--t", t, "confidence parameter, t >= 1");
        fit_cmd->add_option("--psi", psi, "penalty constant knob");
        auto* o1 = fit_cmd->add_option("--l1", l1, "explicit lambda1 (overrides the schedule)");
        fit_cmd->add_option("--l2", l2, "explicit lambda2");
        fit_cmd->add_option("--l3", l3, "explicit lambda3");
        fit_cmd->add_option("--out", out_dir, "output directory")->required();
        fit_cmd->add_option("--name", name, "model file basename");
        fit_cmd->callback([&, o1] {
            command = "fit";
            cfg = json{{"data", data}, {"branch", branch}, {"t", t}, {"psi", psi}, {"name", name}};
            if (o1->count() > 0) {
                cfg["lambda1"] = l1;
                cfg["lambda2"] = std::max(l2, 0.0);
                cfg["lambda3"] = std::max(l3, 0.0);
            }
        });
    }

    // select -----------------------------------------------------------------
    auto* sel = app.add_subcommand("select", "Validation-based parameter selection");
    {
        static std::string data, grid_mode = "log-subsampled";
        static int budget = 8, jobs = 1;
        static double clip_bound = 0.0, margin = 0.1;
        sel->add_option("--data", data, "dataset csv")->required();
        sel->add_option("--grid-mode", grid_mode, "paper-exact|log-subsampled");
        sel->add_option("--budget", budget, "values per coordinate in subsampled mode");
        sel->add_option("--clip-bound", clip_bound, "fixed clip bound B (0 = auto from max|y|)");
        sel->add_option("--margin", margin, "margin for the automatic bound");
        sel->add_option("--jobs", jobs, "parallel candidate fits");
        sel->add_option("--out", out_dir, "output directory")->required();
        sel->callback([&] {
            command = "select";
            cfg = json{{"data", data},     {"grid_mode", grid_mode}, {"budget", budget},
                       {"clip_bound", clip_bound}, {"margin", margin}, {"jobs", jobs}};
        });
    }

    // geometry -----------------------------------------------------------------
    auto* geo = app.add_subcommand("geometry", "Dependency measures of a block subset");
    {
        static std::string design = "product", method = "mc", index_set = "0";
        static int m_count = 4, k_trunc = 32, big_k = 128;
        static long n_mc = 100000;
        static double s = 0.5, share_prob = 0.5;
        static std::uint64_t seed = 0;
        geo->add_option("--design", design, "product|chained");
        geo->add_option("--method", method, "analytic|mc (analytic for product only)");
        geo->add_option("--share-prob", share_prob, "coordinate share probability (chained)");
        geo->add_option("--M", m_count, "number of blocks");
        geo->add_option("--I", index_set, "comma-separated 0-based block indices");
        geo->add_option("--k-trunc", k_trunc, "eigenfunctions per block");
        geo->add_option("--n-mc", n_mc, "Monte Carlo samples");
        geo->add_option("--s", s, "kernel decay exponent");
        geo->add_option("--K", big_k, "kernel truncation");
        auto* seed_opt = geo->add_option("--seed", seed, "seed (or MKLNET_SEED)");
        geo->add_option("--out", out_dir, "output directory")->required();
        geo->callback([&, seed_opt] {
            command = "geometry";
            cfg = json{{"design", design}, {"method", method}, {"share_prob", share_prob},
                       {"M", m_count}, {"index_set", index_set}, {"k_trunc", k_trunc},
                       {"n_mc", n_mc}, {"s", s}, {"K", big_k},
                       {"seed", resolve_seed(seed_opt, seed)}};
        });
    }

    // rates -----------------------------------------------------------------------
    auto* rates = app.add_subcommand("rates", "Empirical convergence-rate sweep");
    {
        static std::string branch = "l1", n_grid = "128,256,512,1024,2048", d_grid, name = "report.csv";
        static int m_count = 8, d = 2, seeds = 20, jobs = 1,
                   big_k = mklnet::SpectralKernel::default_truncation;
        static long n_fixed = 1024;
        static double s = 0.5, q = 0.0, t = 1.0, psi = 1.0, noise_level = 0.5;
        static std::string noise = "bounded";
        static std::uint64_t seed = 0;
        rates->add_option("--branch", branch, "l1|elastic");
        rates->add_option("--s", s, "kernel decay exponent");
        rates->add_option("--q", q, "truth smoothness");
        rates->add_option("--d", d, "active blocks");
        rates->add_option("--M", m_count, "total blocks");
        rates->add_option("--n-grid", n_grid, "comma-separated sample sizes");
        auto* dg = rates->add_option("--d-grid", d_grid, "sweep d instead, at fixed --n");
        rates->add_option("--n", n_fixed, "fixed sample size for --d-grid");
        rates->add_option("--seeds", seeds, "replicates per grid point");
        rates->add_option("--noise", noise, "none|bounded|gaussian");
        rates->add_option("--noise-level", noise_level, "radius L or sigma");
        rates->add_option("--t", t, "confidence parameter");
        rates->add_option("--psi", psi, "penalty constant knob");
        rates->add_option("--K", big_k, "kernel truncation");
        rates->add_option("--jobs", jobs, "parallel cells");
        auto* seed_opt = rates->add_option("--seed", seed, "seed (or MKLNET_SEED)");
        rates->add_option("--out", name, "report csv filename");
        rates->add_option("--out-dir", out_dir, "output directory");
        rates->callback([&, dg, seed_opt] {
            command = "rates";
            cfg = json{{"branch", branch}, {"s", s}, {"q", q}, {"d", d}, {"M", m_count},
                       {"seeds", seeds}, {"noise", noise}, {"noise_level", noise_level},
                       {"t", t}, {"psi", psi}, {"K", big_k}, {"jobs", jobs},
                       {"seed", resolve_seed(seed_opt, seed)}, {"name", name}};
            if (dg->count() > 0) {
                cfg["d_grid"] = d_grid;
                cfg["n"] = n_fixed;
            } else {
                cfg["n_grid"] = n_grid;
            }
        });
    }

    // diagnose ---------------------------------------------------------------------
    auto* diag = app.add_subcommand("diagnose", "Recovery diagnostic for a fitted model");
    {
        static std::string data, model;
        diag->add_option("--data", data, "dataset csv")->required();
        diag->add_option("--model", model, "model json")->required();
        diag->add_option("--out", out_dir, "output directory")->required();
        diag->callback([&] {
            command = "diagnose";
            cfg = json{{"data", data}, {"model", model}};
        });
    }

    // rerun ------------------------------------------------------------------------
    auto* rerun = app.add_subcommand("rerun", "Re-execute a run from its manifest");
    {
        static std::string manifest;
        rerun->add_option("--manifest", manifest, "manifest json")->required();
        rerun->add_option("--out", out_dir, "output directory")->required();
        rerun->callback([&] {
            const json m = mklnet::read_json(manifest);
            command = m.at("command").get<std::string>();
            cfg = m.at("config");
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        dispatch(command, cfg, out_dir);
    } catch (const mklnet::input_error& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        try {
            fs::create_directories(out_dir);
            mklnet::write_json((fs::path(out_dir) / "diagnostics.json").string(),
                               json{{"command", command}, {"error", e.what()}, {"config", cfg}});
        } catch (...) {
        }
        return 3;
    }
    return 0;
}
