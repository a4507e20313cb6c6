#pragma once

#include <atomic>
#include <thread>
#include <tuple>

#include "mklnet/solver.hpp"

namespace mklnet {

/// Truncates a prediction to [-B, B].
inline double clip(double value, double bound) {
    if (!(bound > 0.0)) throw input_error("clip bound must be positive");
    if (value >= bound) return bound;
    if (value <= -bound) return -bound;
    return value;
}

struct ClipSpec {
    double bound = 0.0;   // B; must dominate ||f*||_inf for the contraction
    double margin = 0.1;  // delta used when bound is derived from the data

    static ClipSpec fixed(double bound) {
        if (!(bound > 0.0)) throw input_error("clip bound must be positive");
        return ClipSpec{bound, 0.0};
    }
    /// B = (1 + delta) * max_i |y_i|, strictly above every response.
    static ClipSpec automatic(const Vec& y, double margin = 0.1) {
        if (margin < 0.0) throw input_error("clip margin must be nonnegative");
        const double peak = y.size() ? y.cwiseAbs().maxCoeff() : 0.0;
        return ClipSpec{(1.0 + margin) * std::max(peak, 1e-12), margin};
    }
};

/// Deterministic half split: first floor(n/2) rows train, the rest validate.
inline std::pair<Dataset, Dataset> split(const Dataset& data) {
    const auto n = data.size();
    if (n < 2) throw input_error("split: need at least two samples");
    const auto n_train = n / 2;
    return {data.head(n_train), data.tail(n - n_train)};
}

enum class GridMode { paper_exact, log_subsampled };

/// Candidate triples for validation. The exact mode enumerates
/// Gamma_n = {1/n^2, 2/n^2, ..., 1} for both coupling branches
/// (lambda2 = lambda1 * lambda3^(1/2), and the lambda3 = 0 branch with a free
/// coupling value); it grows as n^4 and is only allowed for n <= 8. The
/// subsampled mode draws log-spaced values from [1/n^2, 1] instead.
struct ParamGrid {
    std::vector<RegParams> triples;
    GridMode mode = GridMode::log_subsampled;
    std::vector<double> values;  // the underlying 1-d candidate set
};

inline ParamGrid build_grid(int n, GridMode mode, int budget = 8) {
    if (n < 2) throw input_error("build_grid: need n >= 2");
    ParamGrid grid;
    grid.mode = mode;
    if (mode == GridMode::paper_exact) {
        if (n > 8)
            throw input_error(
                "build_grid: the exact candidate set has n^4 entries per branch and is only "
                "supported for n <= 8; use log_subsampled");
        const int count = n * n;
        for (int i = 1; i <= count; ++i)
            grid.values.push_back(static_cast<double>(i) / static_cast<double>(count));
    } else {
        if (budget < 4) throw input_error("build_grid: budget must be at least 4");
        const double lo = 1.0 / (static_cast<double>(n) * n);
        for (int i = 0; i < budget; ++i) {
            const double t = static_cast<double>(i) / (budget - 1);
            grid.values.push_back(std::exp((1.0 - t) * std::log(lo)));
        }
        grid.values.front() = lo;
        grid.values.back() = 1.0;
    }
    // elastic branch
    for (double l1 : grid.values)
        for (double l3 : grid.values)
            grid.triples.push_back(RegParams{l1, l1 * std::sqrt(l3), l3});
    // lambda3 = 0 branch; the coupling value plays the role of lambda3.
    for (double l1 : grid.values)
        for (double lam : grid.values)
            grid.triples.push_back(RegParams{l1, l1 * std::sqrt(lam), 0.0});
    return grid;
}

struct SelectionRow {
    RegParams params;
    double validation_mse = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    bool failed = false;
    std::string error;
};

struct SelectionResult {
    RegParams chosen;
    int chosen_index = -1;
    MklModel model;  // fitted on the training half
    ClipSpec clip_spec;
    std::vector<SelectionRow> table;  // in grid order
};

struct selection_error : std::runtime_error {
    std::vector<SelectionRow> table;
    selection_error(const std::string& what, std::vector<SelectionRow> t)
        : std::runtime_error(what), table(std::move(t)) {}
};

/// Fits every candidate on the training half and picks the triple whose
/// clipped predictor minimizes the validation MSE; ties break lexicographically
/// on (lambda1, lambda3, lambda2).
inline SelectionResult select(const Dataset& data, const SpectralKernel& kernel,
                              const ParamGrid& grid, const ClipSpec& clip_spec,
                              const FitOptions& opts = {}, int jobs = 1) {
    if (grid.triples.empty()) throw input_error("select: empty grid");
    auto [train, validation] = split(data);
    const auto n_val = validation.size();

    std::vector<SelectionRow> table(grid.triples.size());
    std::vector<MklModel> models(grid.triples.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= grid.triples.size()) break;
            auto& row = table[i];
            row.params = grid.triples[i];
            try {
                models[i] = fit(train, kernel, grid.triples[i], opts);
                const auto blocks = model_blocks(models[i], train, kernel);
                const Vec pred = predict(blocks, validation.x);
                double acc = 0.0;
                for (Eigen::Index j = 0; j < n_val; ++j) {
                    const double e = clip(pred[j], clip_spec.bound) - validation.y[j];
                    acc += e * e;
                }
                row.validation_mse = acc / static_cast<double>(n_val);
                row.converged = models[i].converged;
            } catch (const std::exception& e) {
                row.failed = true;
                row.error = e.what();
            }
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    int best = -1;
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (table[i].failed) continue;
        if (best < 0) {
            best = static_cast<int>(i);
            continue;
        }
        const auto& a = table[i];
        const auto& b = table[best];
        const auto key = [](const SelectionRow& r) {
            return std::make_tuple(r.validation_mse, r.params.lambda1, r.params.lambda3,
                                   r.params.lambda2);
        };
        if (key(a) < key(b)) best = static_cast<int>(i);
    }
    if (best < 0) throw selection_error("select: every candidate fit failed", std::move(table));

    SelectionResult out;
    out.chosen = grid.triples[best];
    out.chosen_index = best;
    out.model = std::move(models[best]);
    out.clip_spec = clip_spec;
    out.table = std::move(table);
    return out;
}

}  // namespace mklnet
