#pragma once

#include <atomic>
#include <thread>

#include "mklnet/geometry.hpp"

namespace mklnet {

enum class Branch { l1, elastic };

inline std::string to_string(Branch b) { return b == Branch::l1 ? "l1" : "elastic"; }

inline Branch branch_from_string(const std::string& s) {
    if (s == "l1") return Branch::l1;
    if (s == "elastic") return Branch::elastic;
    throw input_error("unknown branch: " + s);
}

/// max(1, sqrt(t), t/sqrt(n)); scales every penalty with the confidence level t.
inline double confidence_scale(double t, long n) {
    if (!(t > 0.0) || n < 1) throw input_error("confidence scale needs t > 0 and n >= 1");
    return std::max({1.0, std::sqrt(t), t / std::sqrt(static_cast<double>(n))});
}

/// max(lambda^(-s/2)/sqrt(n), lambda^(-1/2)/n^(1/(1+s)), sqrt(log(M)/n)).
inline double penalty_scale(double lambda, long n, int num_kernels, double decay) {
    if (!(lambda > 0.0)) throw input_error("penalty scale needs lambda > 0");
    if (n < 1 || num_kernels < 1) throw input_error("penalty scale needs n, M >= 1");
    const double nn = static_cast<double>(n);
    const double a = std::pow(lambda, -decay / 2.0) / std::sqrt(nn);
    const double b = std::pow(lambda, -0.5) / std::pow(nn, 1.0 / (1.0 + decay));
    const double c = std::sqrt(std::log(static_cast<double>(num_kernels)) / nn);
    return std::max({a, b, c});
}

struct ScheduleInputs {
    long n = 0;
    int num_kernels = 0;   // M
    int active_count = 0;  // d
    double decay = 0.5;    // s
    double smoothness = 0.0;  // q
    double r2_g = 0.0;     // l2-mixed norm of the source components (elastic)
    double r1_f = 0.0;     // l1-mixed norm of the truth (the lambda3 = 0 branch)
    double t = 1.0;
    double psi = 1.0;      // unknown universal constant, configuration knob

    void validate() const {
        if (n < 1 || num_kernels < 1 || active_count < 1)
            throw input_error("schedule: counts must be positive");
        if (!(decay > 0.0 && decay < 1.0)) throw input_error("schedule: decay must lie in (0,1)");
        if (!(smoothness >= 0.0 && smoothness <= 1.0))
            throw input_error("schedule: smoothness must lie in [0,1]");
        if (!(t >= 1.0)) throw input_error("schedule: t must be at least 1");
        if (!(psi > 0.0)) throw input_error("schedule: psi must be positive");
    }
};

struct Schedule {
    RegParams params;
    double lambda = 0.0;  // the coupling value the penalties are derived from
};

/// The oracle penalty choice: lambda1 = psi * eta(t) * xi_n(lambda),
/// lambda2 = lambda1 * sqrt(lambda), lambda3 = lambda (elastic) or 0.
/// The coupling value is d^(1/(1+q+s)) n^(-1/(1+q+s)) R2^(-2/(1+q+s)) on the
/// elastic branch and d^((1-s)/(1+s)) n^(-1/(1+s)) R1^(-2/(1+s)) otherwise.
inline Schedule schedule(const ScheduleInputs& in, Branch branch) {
    in.validate();
    const double nn = static_cast<double>(in.n);
    const double d = static_cast<double>(in.active_count);
    double lambda;
    if (branch == Branch::elastic) {
        if (!(in.r2_g > 0.0)) throw input_error("schedule: elastic branch needs r2_g > 0");
        const double e = 1.0 + in.smoothness + in.decay;
        lambda = std::pow(d, 1.0 / e) * std::pow(nn, -1.0 / e) * std::pow(in.r2_g, -2.0 / e);
    } else {
        if (!(in.r1_f > 0.0)) throw input_error("schedule: l1 branch needs r1_f > 0");
        const double e = 1.0 + in.decay;
        lambda = std::pow(d, (1.0 - in.decay) / e) * std::pow(nn, -1.0 / e) *
                 std::pow(in.r1_f, -2.0 / e);
    }
    Schedule out;
    out.lambda = lambda;
    out.params.lambda1 =
        in.psi * confidence_scale(in.t, in.n) * penalty_scale(lambda, in.n, in.num_kernels, in.decay);
    out.params.lambda2 = out.params.lambda1 * std::sqrt(lambda);
    out.params.lambda3 = branch == Branch::elastic ? lambda : 0.0;
    return out;
}

/// Leading n-exponent of the oracle bound: -1/(1+s) for the lambda3 = 0
/// branch, -(1+q)/(1+q+s) with the ridge term.
inline double theoretical_exponent(double decay, double smoothness, Branch branch) {
    if (branch == Branch::l1) return -1.0 / (1.0 + decay);
    return -(1.0 + smoothness) / (1.0 + smoothness + decay);
}

/// d-exponent of the oracle bound's leading term.
inline double theoretical_d_exponent(double decay, double smoothness, Branch branch) {
    if (branch == Branch::l1) return (1.0 - decay) / (1.0 + decay);
    return (1.0 + smoothness) / (1.0 + smoothness + decay);
}

/// Leading terms of the two oracle bounds for given mixed norms.
inline std::pair<double, double> bound_expressions(double decay, double smoothness, int d, long n,
                                                   double r1_f, double r2_g) {
    const double dd = static_cast<double>(d);
    const double nn = static_cast<double>(n);
    const double e1 = 1.0 + decay;
    const double e2 = 1.0 + smoothness + decay;
    const double l1 = std::pow(dd, (1.0 - decay) / e1) * std::pow(nn, -1.0 / e1) *
                      std::pow(r1_f, 2.0 * decay / e1);
    const double el = std::pow(dd, (1.0 + smoothness) / e2) *
                      std::pow(nn, -(1.0 + smoothness) / e2) * std::pow(r2_g, 2.0 * decay / e2);
    return {l1, el};
}

/// Ordinary least squares on (x, y); returns slope, its standard error and
/// the intercept.
struct SlopeFit {
    double slope = 0.0;
    double se = 0.0;
    double intercept = 0.0;
};

inline SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t k = x.size();
    if (k != y.size() || k < 2) throw input_error("slope fit needs at least two points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(k);
    my /= static_cast<double>(k);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0) throw input_error("slope fit: degenerate abscissae");
    SlopeFit out;
    out.slope = sxy / sxx;
    out.intercept = my - out.slope * mx;
    if (k > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const double r = y[i] - out.intercept - out.slope * x[i];
            rss += r * r;
        }
        out.se = std::sqrt(rss / static_cast<double>(k - 2) / sxx);
    }
    return out;
}

struct SweepConfig {
    SpectralKernel kernel = SpectralKernel::cosine(0.5);
    int num_kernels = 8;     // M
    int active_count = 2;    // d
    double smoothness = 0.0; // q
    TruthProfile profile = TruthProfile::homogeneous;
    double r_target = 1.0;   // custom profile only
    NoiseSpec noise = NoiseSpec::bounded(0.5);
    double t = 1.0;
    double psi = 1.0;
    int seeds = 20;
    std::uint64_t seed = 0;
    int jobs = 1;
    FitOptions fit_opts;
};

struct RateCell {
    long axis = 0;  // n (or d)
    int seed_index = 0;
    double error = 0.0;
    bool converged = false;
    double precondition = 0.0;  // psi sqrt(n) xi^2 d, with the constant treated as 1
    bool precondition_ok = true;
};

struct RatePoint {
    long axis = 0;
    double mean_err = 0.0;
    double se = 0.0;
    int cells = 0;
    bool flagged = false;  // some cell failed to converge; excluded from the slope
};

struct RateReport {
    std::string axis = "n";
    Branch branch = Branch::l1;
    std::vector<RatePoint> points;
    std::vector<RateCell> cells;
    SlopeFit slope;
    double theory_exponent = 0.0;
    std::vector<std::string> warnings;
};

namespace detail {

template <class CellFn>
void run_cells(std::vector<RateCell>& cells, int jobs, CellFn&& fn) {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) break;
            fn(cells[i]);
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
}

inline void aggregate_and_fit(RateReport& report, const std::vector<long>& grid, int seeds,
                              double theory) {
    std::vector<double> lx, ly;
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        RatePoint p;
        p.axis = grid[gi];
        double sum = 0.0, sum_sq = 0.0;
        int proxy_violations = 0;
        for (int j = 0; j < seeds; ++j) {
            const auto& c = report.cells[gi * seeds + j];
            sum += c.error;
            sum_sq += c.error * c.error;
            if (!c.converged) p.flagged = true;
            if (!c.precondition_ok) ++proxy_violations;
        }
        if (proxy_violations > 0)
            report.warnings.push_back("precondition proxy above 1 in " +
                                      std::to_string(proxy_violations) + "/" +
                                      std::to_string(seeds) + " cells at axis " +
                                      std::to_string(grid[gi]));
        p.cells = seeds;
        p.mean_err = sum / seeds;
        const double var = std::max(0.0, sum_sq / seeds - p.mean_err * p.mean_err);
        p.se = std::sqrt(var / seeds);
        if (p.flagged)
            report.warnings.push_back("axis point " + std::to_string(p.axis) +
                                      " had non-converged fits; excluded from the slope");
        else if (p.mean_err > 0.0) {
            lx.push_back(std::log(static_cast<double>(p.axis)));
            ly.push_back(std::log(p.mean_err));
        }
        report.points.push_back(p);
    }
    if (lx.size() < 2) throw numeric_error("rate sweep: fewer than two usable grid points");
    report.slope = fit_slope(lx, ly);
    report.theory_exponent = theory;
}

}  // namespace detail

/// Sweeps the sample size: per (n, seed) cell draw a truth and a dataset,
/// fit with the oracle schedule, record the exact L2 error; then aggregate
/// and fit the log-log slope. Cells are independent jobs; aggregation order
/// is fixed, so results do not depend on the thread count.
inline RateReport run_rate_sweep(const SweepConfig& cfg, const std::vector<long>& n_grid,
                                 Branch branch) {
    if (n_grid.size() < 4) throw input_error("rate sweep: need at least 4 grid points");
    if (n_grid.back() < 16 * n_grid.front())
        throw input_error("rate sweep: grid must span at least a 16x range");
    if (cfg.seeds < 10) throw input_error("rate sweep: need at least 10 seeds");

    RateReport report;
    report.axis = "n";
    report.branch = branch;
    report.cells.resize(n_grid.size() * cfg.seeds);
    for (std::size_t gi = 0; gi < n_grid.size(); ++gi)
        for (int j = 0; j < cfg.seeds; ++j) {
            auto& c = report.cells[gi * cfg.seeds + j];
            c.axis = n_grid[gi];
            c.seed_index = j;
        }

    detail::run_cells(report.cells, cfg.jobs, [&](RateCell& cell) {
        const auto truth =
            make_truth(cfg.kernel, cfg.num_kernels, cfg.active_count, cfg.smoothness, cfg.profile,
                       cfg.r_target, mix_seed(cfg.seed, 0x74727574ull, cell.seed_index));
        const auto data = sample_dataset(truth, static_cast<int>(cell.axis), cfg.noise,
                                         mix_seed(cfg.seed, cell.axis, cell.seed_index));
        ScheduleInputs in;
        in.n = cell.axis;
        in.num_kernels = cfg.num_kernels;
        in.active_count = cfg.active_count;
        in.decay = cfg.kernel.decay_exponent();
        in.smoothness = cfg.smoothness;
        in.r2_g = truth.r2_g();
        in.r1_f = truth.r1_f();
        in.t = cfg.t;
        in.psi = cfg.psi;
        const auto sched = schedule(in, branch);
        const auto model = fit(data, cfg.kernel, sched.params, cfg.fit_opts);
        cell.error = exact_l2_error(model_blocks(model, data, cfg.kernel), truth);
        cell.converged = model.converged;
        const double xi = penalty_scale(sched.lambda, in.n, in.num_kernels, in.decay);
        cell.precondition = in.psi * std::sqrt(static_cast<double>(in.n)) * xi * xi *
                            static_cast<double>(in.active_count);
        cell.precondition_ok =
            cell.precondition <= 1.0 &&
            std::log(static_cast<double>(in.num_kernels)) <= std::sqrt(static_cast<double>(in.n));
    });

    detail::aggregate_and_fit(report, n_grid, cfg.seeds,
                              theoretical_exponent(cfg.kernel.decay_exponent(), cfg.smoothness,
                                                   branch));
    return report;
}

/// Sweeps the number of active blocks at a fixed sample size. Every d in the
/// grid must stay within M/2.
inline RateReport run_d_sweep(const SweepConfig& cfg, long n, const std::vector<long>& d_grid,
                              Branch branch) {
    if (d_grid.size() < 2) throw input_error("d sweep: need at least 2 grid points");
    for (long d : d_grid)
        if (d < 1 || 2 * d > cfg.num_kernels)
            throw input_error("d sweep: every d must lie in [1, M/2]");

    RateReport report;
    report.axis = "d";
    report.branch = branch;
    report.cells.resize(d_grid.size() * cfg.seeds);
    for (std::size_t gi = 0; gi < d_grid.size(); ++gi)
        for (int j = 0; j < cfg.seeds; ++j) {
            auto& c = report.cells[gi * cfg.seeds + j];
            c.axis = d_grid[gi];
            c.seed_index = j;
        }

    detail::run_cells(report.cells, cfg.jobs, [&](RateCell& cell) {
        const int d = static_cast<int>(cell.axis);
        const auto truth =
            make_truth(cfg.kernel, cfg.num_kernels, d, cfg.smoothness, cfg.profile, cfg.r_target,
                       mix_seed(cfg.seed, cell.axis, 0x64737765ull + cell.seed_index));
        const auto data = sample_dataset(truth, static_cast<int>(n), cfg.noise,
                                         mix_seed(cfg.seed, cell.axis, cell.seed_index));
        ScheduleInputs in;
        in.n = n;
        in.num_kernels = cfg.num_kernels;
        in.active_count = d;
        in.decay = cfg.kernel.decay_exponent();
        in.smoothness = cfg.smoothness;
        in.r2_g = truth.r2_g();
        in.r1_f = truth.r1_f();
        in.t = cfg.t;
        in.psi = cfg.psi;
        const auto sched = schedule(in, branch);
        const auto model = fit(data, cfg.kernel, sched.params, cfg.fit_opts);
        cell.error = exact_l2_error(model_blocks(model, data, cfg.kernel), truth);
        cell.converged = model.converged;
        const double xi = penalty_scale(sched.lambda, in.n, in.num_kernels, in.decay);
        cell.precondition =
            in.psi * std::sqrt(static_cast<double>(in.n)) * xi * xi * static_cast<double>(d);
        cell.precondition_ok =
            cell.precondition <= 1.0 &&
            std::log(static_cast<double>(in.num_kernels)) <= std::sqrt(static_cast<double>(in.n));
    });

    detail::aggregate_and_fit(
        report, d_grid, cfg.seeds,
        theoretical_d_exponent(cfg.kernel.decay_exponent(), cfg.smoothness, branch));
    return report;
}

struct PhaseRow {
    double smoothness = 0.0;
    double l1_bound = 0.0;
    double elastic_bound = 0.0;
    bool crossover = false;  // elastic bound strictly below the l1 bound
    double r1_f = 0.0;
    double r2_g = 0.0;
};

/// Evaluates the two closed-form bound expressions along a smoothness grid,
/// deriving the l1-mixed norm from a seeded truth with the requested source
/// norm, and flags where the ridge branch wins.
inline std::vector<PhaseRow> phase_transition_scan(const SpectralKernel& kernel, int d, long n,
                                                   double r2_g, const std::vector<double>& q_grid,
                                                   std::uint64_t seed = 0) {
    if (d < 1) throw input_error("phase scan: need d >= 1");
    std::vector<PhaseRow> rows;
    rows.reserve(q_grid.size());
    for (double q : q_grid) {
        const auto truth = make_truth(kernel, d, d, q, TruthProfile::custom, r2_g, seed);
        PhaseRow row;
        row.smoothness = q;
        row.r1_f = truth.r1_f();
        row.r2_g = truth.r2_g();
        std::tie(row.l1_bound, row.elastic_bound) =
            bound_expressions(kernel.decay_exponent(), q, d, n, row.r1_f, row.r2_g);
        row.crossover = row.elastic_bound < row.l1_bound;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace mklnet
