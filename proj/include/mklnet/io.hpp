#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mklnet/rates.hpp"
#include "mklnet/selection.hpp"

namespace mklnet {

inline constexpr const char* library_version = "0.1.0";

using nlohmann::json;

// ---- kernel ----------------------------------------------------------------

/// {"s": ..., "K": ..., "basis": "cosine01"}; the scale is derived, never stored.
inline json to_json(const SpectralKernel& k) {
    return json{{"s", k.decay_exponent()}, {"K", k.truncation()}, {"basis", k.basis_id()}};
}

inline SpectralKernel kernel_from_json(const json& j) {
    const std::string basis = j.value("basis", "cosine01");
    if (basis != "cosine01") throw input_error("unsupported basis id: " + basis);
    return SpectralKernel::cosine(j.at("s").get<double>(), j.value("K", SpectralKernel::default_truncation));
}

// ---- noise / truth ----------------------------------------------------------

inline json to_json(const NoiseSpec& n) {
    switch (n.kind) {
        case NoiseSpec::Kind::none: return json{{"kind", "none"}};
        case NoiseSpec::Kind::bounded: return json{{"kind", "bounded"}, {"level", n.level}};
        case NoiseSpec::Kind::gaussian: return json{{"kind", "gaussian"}, {"level", n.level}};
    }
    return json{{"kind", "none"}};
}

inline NoiseSpec noise_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "none") return NoiseSpec::none();
    if (kind == "bounded") return NoiseSpec::bounded(j.at("level").get<double>());
    if (kind == "gaussian") return NoiseSpec::gaussian(j.at("level").get<double>());
    throw input_error("unknown noise kind: " + kind);
}

/// Everything needed to regenerate a ground truth deterministically.
struct TruthSpec {
    int num_blocks = 1;
    int active_count = 1;
    double smoothness = 0.0;
    TruthProfile profile = TruthProfile::homogeneous;
    double r_target = 1.0;
    std::uint64_t seed = 0;

    GroundTruth realize(const SpectralKernel& kernel) const {
        return make_truth(kernel, num_blocks, active_count, smoothness, profile, r_target, seed);
    }
};

inline json to_json(const TruthSpec& t) {
    return json{{"M", t.num_blocks},   {"d", t.active_count}, {"q", t.smoothness},
                {"profile", to_string(t.profile)}, {"r_target", t.r_target}, {"seed", t.seed}};
}

inline TruthSpec truth_spec_from_json(const json& j) {
    TruthSpec t;
    t.num_blocks = j.at("M").get<int>();
    t.active_count = j.at("d").get<int>();
    t.smoothness = j.at("q").get<double>();
    t.profile = truth_profile_from_string(j.at("profile").get<std::string>());
    t.r_target = j.value("r_target", 1.0);
    t.seed = j.at("seed").get<std::uint64_t>();
    return t;
}

// ---- functions / models -----------------------------------------------------

inline json to_json(const SpectralFunction& f) {
    return json{{"kernel", to_json(f.kernel)},
                {"coeffs", std::vector<double>(f.coeffs.begin(), f.coeffs.end())}};
}

inline SpectralFunction spectral_function_from_json(const json& j) {
    const auto kernel = kernel_from_json(j.at("kernel"));
    const auto c = j.at("coeffs").get<std::vector<double>>();
    return SpectralFunction(kernel, Eigen::Map<const Vec>(c.data(), c.size()));
}

inline json to_json(const RegParams& p) {
    return json{{"lambda1", p.lambda1}, {"lambda2", p.lambda2}, {"lambda3", p.lambda3}};
}

inline RegParams reg_params_from_json(const json& j) {
    return RegParams{j.at("lambda1").get<double>(), j.at("lambda2").get<double>(),
                     j.at("lambda3").get<double>()};
}

/// Model serialization keeps the anchors by reference to the dataset file.
inline json to_json(const MklModel& m, const std::string& data_path) {
    json alpha = json::array();
    for (const auto& a : m.alpha) alpha.push_back(std::vector<double>(a.begin(), a.end()));
    return json{{"params", to_json(m.params)},
                {"alpha", std::move(alpha)},
                {"active", m.active},
                {"trace", m.trace},
                {"objective", m.objective_value},
                {"kkt_residual", m.kkt_residual},
                {"converged", m.converged},
                {"data", data_path}};
}

inline MklModel model_from_json(const json& j) {
    MklModel m;
    m.params = reg_params_from_json(j.at("params"));
    for (const auto& a : j.at("alpha")) {
        const auto v = a.get<std::vector<double>>();
        m.alpha.push_back(Eigen::Map<const Vec>(v.data(), v.size()));
    }
    m.active = j.at("active").get<std::vector<int>>();
    m.trace = j.at("trace").get<std::vector<double>>();
    m.objective_value = j.at("objective").get<double>();
    m.kkt_residual = j.at("kkt_residual").get<double>();
    m.converged = j.at("converged").get<bool>();
    return m;
}

inline json to_json(const GeometryReport& r) {
    return json{{"index_set", r.index_set},
                {"kappa", r.kappa},
                {"rho", r.rho},
                {"incoherence_bound", r.incoherence_bound},
                {"method", r.method},
                {"mc_samples", r.mc_samples}};
}

// ---- text helpers ------------------------------------------------------------

namespace detail {

/// Shortest round-trip decimal form.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace detail

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot open for writing: " + path);
    out << text;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json read_json(const std::string& path) { return json::parse(read_text(path)); }

// ---- dataset CSV -------------------------------------------------------------

/// Columns x_1..x_M,y; one row per sample, full round-trip precision.
inline void write_dataset_csv(const std::string& path, const Dataset& data) {
    std::ostringstream out;
    for (Eigen::Index m = 0; m < data.num_blocks(); ++m) out << "x_" << (m + 1) << ",";
    out << "y\n";
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        for (Eigen::Index m = 0; m < data.num_blocks(); ++m)
            out << detail::format_double(data.x(i, m)) << ",";
        out << detail::format_double(data.y[i]) << "\n";
    }
    write_text(path, out.str());
}

inline Dataset read_dataset_csv(const std::string& path) {
    std::istringstream in(read_text(path));
    std::string line;
    if (!std::getline(in, line)) throw input_error("empty dataset file: " + path);
    const auto cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',')) + 1;
    if (cols < 2) throw input_error("dataset needs at least one coordinate column");
    std::vector<double> values;
    Eigen::Index rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cellText;
        Eigen::Index got = 0;
        while (std::getline(ls, cellText, ',')) {
            values.push_back(std::strtod(cellText.c_str(), nullptr));
            ++got;
        }
        if (got != cols) throw input_error("ragged dataset row in " + path);
        ++rows;
    }
    Dataset data;
    data.x.resize(rows, cols - 1);
    data.y.resize(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index m = 0; m < cols - 1; ++m) data.x(i, m) = values[i * cols + m];
        data.y[i] = values[i * cols + cols - 1];
    }
    return data;
}

/// Dataset plus the sidecar needed to reproduce it and its ground truth.
struct DataBundle {
    SpectralKernel kernel = SpectralKernel::cosine(0.5);
    TruthSpec truth_spec;
    GroundTruth truth{SpectralKernel::cosine(0.5), 0, 0.0, {}, {}, {}, TruthProfile::custom};
    Dataset data;
};

inline void write_bundle(const std::string& csv_path, const std::string& sidecar_path,
                         const SpectralKernel& kernel, const TruthSpec& spec,
                         const Dataset& data) {
    write_dataset_csv(csv_path, data);
    write_json(sidecar_path,
               json{{"kernel", to_json(kernel)},
                    {"truth", to_json(spec)},
                    {"noise", to_json(data.noise)},
                    {"data_seed", data.seed},
                    {"n", data.size()}});
}

inline std::string sidecar_path_for(const std::string& csv_path) {
    const auto dot = csv_path.rfind('.');
    return (dot == std::string::npos ? csv_path : csv_path.substr(0, dot)) + ".json";
}

inline DataBundle read_bundle(const std::string& csv_path) {
    const json side = read_json(sidecar_path_for(csv_path));
    DataBundle b;
    b.kernel = kernel_from_json(side.at("kernel"));
    b.truth_spec = truth_spec_from_json(side.at("truth"));
    b.truth = b.truth_spec.realize(b.kernel);
    b.data = read_dataset_csv(csv_path);
    b.data.noise = noise_from_json(side.at("noise"));
    b.data.seed = side.at("data_seed").get<std::uint64_t>();
    return b;
}

// ---- report CSVs ---------------------------------------------------------------

inline void write_selection_csv(const std::string& path, const SelectionResult& sel,
                                const std::vector<double>& exact_errors = {}) {
    std::ostringstream out;
    out << "lambda1,lambda2,lambda3,validation_mse,exact_l2_error,converged\n";
    for (std::size_t i = 0; i < sel.table.size(); ++i) {
        const auto& r = sel.table[i];
        out << detail::format_double(r.params.lambda1) << ","
            << detail::format_double(r.params.lambda2) << ","
            << detail::format_double(r.params.lambda3) << ","
            << detail::format_double(r.validation_mse) << ",";
        if (i < exact_errors.size()) out << detail::format_double(exact_errors[i]);
        out << "," << (r.converged ? 1 : 0) << "\n";
    }
    write_text(path, out.str());
}

inline void write_rate_csv(const std::string& path, const RateReport& report, long fixed_n,
                           long fixed_d) {
    std::ostringstream out;
    out << "n,d,mean_err,se,branch,slope,theory_exponent\n";
    for (const auto& p : report.points) {
        const long n = report.axis == "n" ? p.axis : fixed_n;
        const long d = report.axis == "d" ? p.axis : fixed_d;
        out << n << "," << d << "," << detail::format_double(p.mean_err) << ","
            << detail::format_double(p.se) << "," << to_string(report.branch) << ","
            << detail::format_double(report.slope.slope) << ","
            << detail::format_double(report.theory_exponent) << "\n";
    }
    write_text(path, out.str());
}

}  // namespace mklnet
