#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "condsamp/bias.hpp"
#include "condsamp/ccgan.hpp"
#include "condsamp/density.hpp"
#include "condsamp/errors.hpp"
#include "condsamp/parallel.hpp"
#include "condsamp/sde.hpp"

// The coupled sampling workflow: generator-seeded parallel umbrella runs with
// pooled histograms, the umbrella-only vs coupled convergence benchmark, the
// effective-ODE closure by conditional averaging, and coverage diagnostics.

namespace condsamp {

/// Random stream used by chain k of a coupled run (stream 0 stays free for
/// other consumers of the same seed).
inline std::uint64_t chain_stream(int k) { return static_cast<std::uint64_t>(k) + 1; }

struct CouplingConfig {
    SdeSystem system;
    const GanModel* gan = nullptr;
    BiasSpec bias;
    int n_chains = 10;
    int steps_per_chain = 1000;
    int warmup = -1;  // < 0: 10% of steps_per_chain
    double dt = 1.0;
    std::uint64_t seed = 0;
    double target_label = 0.0;
    int fast_coord = 1;
    int hist_bins = 100;
    std::optional<std::pair<double, double>> hist_range;  // default: mean +- 5 sd
};

/// Draw n_chains initial states from the generator at the target label, run
/// one umbrella trajectory per chain (chain k on random stream k+1), pool the
/// fast-coordinate histograms. The pooled result does not depend on the order
/// in which chains finish.
inline std::pair<SampleSet, HistogramEstimate> run_coupled_sampling(
    const CouplingConfig& cfg) {
    if (cfg.n_chains < 1) throw ConfigError("couple: n_chains must be >= 1", "n_chains");
    if (!cfg.gan) throw ConfigError("couple: no generator model", "gan_model_path");
    const int warmup = cfg.warmup >= 0 ? cfg.warmup : default_warmup(cfg.steps_per_chain);
    if (warmup >= cfg.steps_per_chain)
        throw ConfigError("couple: warmup must be below steps_per_chain", "warmup");

    const SampleSet inits =
        sample_ccgan(*cfg.gan, cfg.target_label, cfg.n_chains, cfg.seed);
    if (inits.dim() != cfg.system.dim)
        throw DimensionError("couple: generator output dimension != system dimension");

    std::vector<SampleSet> chains(cfg.n_chains);
    std::vector<std::string> failures(cfg.n_chains);
    parallel_for(static_cast<std::size_t>(cfg.n_chains), [&](std::size_t k) {
        try {
            chains[k] = run_umbrella(cfg.system, cfg.bias, inits.points.row(k).transpose(),
                                     cfg.steps_per_chain, warmup, cfg.dt, cfg.seed,
                                     chain_stream(static_cast<int>(k)));
        } catch (const IntegrationDivergedError& e) {
            failures[k] = "chain " + std::to_string(k) + " (stream " +
                          std::to_string(chain_stream(static_cast<int>(k))) +
                          ") diverged: " + e.what();
        }
    });
    for (const auto& f : failures)
        if (!f.empty()) throw Error("run_coupled_sampling: " + f);

    std::pair<double, double> range;
    if (cfg.hist_range) {
        range = *cfg.hist_range;
    } else {
        double sum = 0.0, sum2 = 0.0;
        std::int64_t n = 0;
        for (const auto& c : chains) {
            sum += c.points.col(cfg.fast_coord).sum();
            sum2 += c.points.col(cfg.fast_coord).array().square().sum();
            n += c.size();
        }
        const double mean = sum / static_cast<double>(n);
        const double sd = std::sqrt(std::max(0.0, sum2 / static_cast<double>(n) - mean * mean));
        range = {mean - 5.0 * sd, mean + 5.0 * sd};
        if (!(range.first < range.second)) range = {mean - 1.0, mean + 1.0};
    }
    std::vector<HistogramEstimate> hists;
    hists.reserve(chains.size());
    for (const auto& c : chains)
        hists.push_back(histogram(Eigen::VectorXd(c.points.col(cfg.fast_coord)),
                                  cfg.hist_bins, range));
    HistogramEstimate pooled = pool(hists);
    SampleSet all = SampleSet::concat(chains);
    all.labels = Eigen::VectorXd::Constant(all.size(), cfg.target_label);
    return {std::move(all), std::move(pooled)};
}

struct BenchmarkConfig {
    SdeSystem system;
    const GanModel* gan = nullptr;
    double slow_target = 5.0;
    int slow_coord = 0;
    int fast_coord = 1;
    double k_spring = 10.0;
    double dt = 1e-3;
    std::vector<long> budgets;
    int n_trials = 50;
    int n_chains = 10;
    bool run_us_only = true;
    bool run_coupled = true;
    int hist_bins = 260;
    std::pair<double, double> hist_range{-1.3, 1.3};
    Eigen::VectorXd us_start;  // start of the umbrella-only chain
    std::uint64_t seed = 0;
    ReferencePdf reference;
};

struct BenchmarkRow {
    long budget = 0;
    std::string method;
    int trial = 0;
    double l1 = 0.0;
};

struct BenchmarkCell {
    long budget = 0;
    std::string method;
    double mean = 0.0;
    double stddev = 0.0;
    int n = 0;
};

/// L1 error of the estimated fast-coordinate PDF against the reference, per
/// (method, budget, trial). Budgets count SDE steps (force evaluations); the
/// coupled method splits each budget evenly across its chains.
inline std::vector<BenchmarkRow> convergence_benchmark(const BenchmarkConfig& cfg) {
    struct Task {
        int method;  // 0 = us_only, 1 = coupled
        long budget;
        int trial;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    std::uint64_t task_id = 0;
    for (int method = 0; method < 2; ++method) {
        if ((method == 0 && !cfg.run_us_only) || (method == 1 && !cfg.run_coupled)) continue;
        for (long budget : cfg.budgets)
            for (int trial = 0; trial < cfg.n_trials; ++trial)
                tasks.push_back(
                    {method, budget, trial, RngStream(cfg.seed, 0xBE9C + task_id++).next_u64()});
    }
    const BiasSpec bias = BiasSpec::raw(cfg.slow_coord, cfg.k_spring, cfg.slow_target);
    std::vector<BenchmarkRow> rows(tasks.size());
    parallel_for(tasks.size(), [&](std::size_t idx) {
        const Task& task = tasks[idx];
        HistogramEstimate est;
        if (task.method == 0) {
            const int n_steps = static_cast<int>(task.budget);
            const SampleSet run =
                run_umbrella(cfg.system, bias, cfg.us_start, n_steps,
                             default_warmup(n_steps), cfg.dt, task.seed, /*stream=*/0);
            est = histogram(Eigen::VectorXd(run.points.col(cfg.fast_coord)), cfg.hist_bins,
                            cfg.hist_range);
        } else {
            CouplingConfig run_cfg;
            run_cfg.system = cfg.system;
            run_cfg.gan = cfg.gan;
            run_cfg.bias = bias;
            run_cfg.n_chains = cfg.n_chains;
            run_cfg.steps_per_chain = static_cast<int>(task.budget / cfg.n_chains);
            run_cfg.dt = cfg.dt;
            run_cfg.seed = task.seed;
            run_cfg.target_label = cfg.slow_target;
            run_cfg.fast_coord = cfg.fast_coord;
            run_cfg.hist_bins = cfg.hist_bins;
            run_cfg.hist_range = cfg.hist_range;
            est = run_coupled_sampling(run_cfg).second;
        }
        rows[idx] = {task.budget, task.method == 0 ? "us_only" : "coupled", task.trial,
                     l1_error(est, cfg.reference)};
    });
    return rows;
}

inline std::vector<BenchmarkCell> summarize_benchmark(const std::vector<BenchmarkRow>& rows) {
    std::vector<BenchmarkCell> cells;
    for (const auto& r : rows) {
        auto it = std::find_if(cells.begin(), cells.end(), [&](const BenchmarkCell& c) {
            return c.budget == r.budget && c.method == r.method;
        });
        if (it == cells.end()) {
            cells.push_back({r.budget, r.method, 0.0, 0.0, 0});
            it = cells.end() - 1;
        }
        it->mean += r.l1;
        it->stddev += r.l1 * r.l1;
        ++it->n;
    }
    for (auto& c : cells) {
        c.mean /= c.n;
        c.stddev = std::sqrt(std::max(0.0, c.stddev / c.n - c.mean * c.mean));
    }
    return cells;
}

/// Anything that can produce full-dimension states conditioned on a slow value.
using ConditionalSampler =
    std::function<SampleSet(double slow_value, int n, std::uint64_t seed)>;

inline ConditionalSampler gan_conditional_sampler(const GanModel& model) {
    return [&model](double z, int n, std::uint64_t seed) {
        return sample_ccgan(model, z, n, seed);
    };
}

struct ClosureDrift {
    double value = 0.0;
    double std_error = 0.0;
};

/// Monte Carlo estimate of the effective slow drift B(z): the slow component
/// of the system drift averaged over conditional samples with the slow
/// coordinate pinned to z.
inline ClosureDrift closure_drift(const ConditionalSampler& sampler, const SdeSystem& sys,
                                  double z, int n, std::uint64_t seed, int slow_coord = 0) {
    const SampleSet samples = sampler(z, n, seed);
    if (samples.dim() != sys.dim)
        throw DimensionError("closure_drift: sampler dimension != system dimension");
    double sum = 0.0, sum2 = 0.0;
    Eigen::VectorXd state(sys.dim);
    for (Eigen::Index i = 0; i < samples.size(); ++i) {
        state = samples.points.row(i).transpose();
        state(slow_coord) = z;
        const double mu1 = sys.drift(state, 0.0)(slow_coord);
        sum += mu1;
        sum2 += mu1 * mu1;
    }
    const double n_d = static_cast<double>(samples.size());
    ClosureDrift out;
    out.value = sum / n_d;
    const double var = std::max(0.0, sum2 / n_d - out.value * out.value);
    out.std_error = std::sqrt(var / n_d);
    return out;
}

struct ClosureResult {
    Eigen::VectorXd grid;      // increasing slow values
    Eigen::VectorXd b_values;  // estimated B at the grid
    Eigen::VectorXd std_errors;
    std::vector<double> effective_path;  // optional, filled by the caller
};

/// Tabulate B(z) over a grid of slow values.
inline ClosureResult closure_grid(const ConditionalSampler& sampler, const SdeSystem& sys,
                                  const Eigen::VectorXd& grid, int n_per_point,
                                  std::uint64_t seed, int slow_coord = 0) {
    ClosureResult res;
    res.grid = grid;
    res.b_values.resize(grid.size());
    res.std_errors.resize(grid.size());
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        const ClosureDrift d = closure_drift(sampler, sys, grid(i), n_per_point,
                                             seed + static_cast<std::uint64_t>(i), slow_coord);
        res.b_values(i) = d.value;
        res.std_errors(i) = d.std_error;
        if (!std::isfinite(d.value)) throw Error("closure_grid: non-finite drift estimate");
    }
    return res;
}

/// Forward-Euler path of dz/dt = B(z); returns z at every step (size
/// n_steps + 1 with n_steps = round(T / dt)).
inline Eigen::VectorXd integrate_effective_ode(const std::function<double(double)>& b,
                                               double z0, double total_time, double dt) {
    if (dt <= 0.0) throw Error("integrate_effective_ode: dt must be positive");
    const long n_steps = std::lround(total_time / dt);
    Eigen::VectorXd path(n_steps + 1);
    path(0) = z0;
    double z = z0;
    for (long i = 0; i < n_steps; ++i) {
        z += dt * b(z);
        path(i + 1) = z;
    }
    return path;
}

/// Same, with B linearly interpolated on the tabulated grid; leaving the grid
/// raises an extrapolation error.
inline Eigen::VectorXd integrate_effective_ode(const ClosureResult& closure, double z0,
                                               double total_time, double dt) {
    const Eigen::VectorXd& g = closure.grid;
    const Eigen::VectorXd& b = closure.b_values;
    if (g.size() < 2) throw Error("integrate_effective_ode: grid needs >= 2 points");
    auto interp = [&](double z) {
        if (z < g(0) || z > g(g.size() - 1))
            throw Error("integrate_effective_ode: slow value " + std::to_string(z) +
                        " left the tabulated grid");
        Eigen::Index hi = 1;
        while (hi < g.size() - 1 && g(hi) < z) ++hi;
        const double t = (z - g(hi - 1)) / (g(hi) - g(hi - 1));
        return (1.0 - t) * b(hi - 1) + t * b(hi);
    };
    return integrate_effective_ode(interp, z0, total_time, dt);
}

/// Fraction of reference points that have a sample within `radius`.
inline double conditional_coverage(const SampleSet& samples, const SampleSet& reference,
                                   double radius) {
    if (samples.size() == 0 || reference.size() == 0)
        throw Error("conditional_coverage: empty input");
    if (samples.dim() != reference.dim())
        throw DimensionError("conditional_coverage: dimension mismatch");
    const double r2 = radius * radius;
    std::vector<int> covered(reference.size(), 0);
    parallel_for(static_cast<std::size_t>(reference.size()), [&](std::size_t i) {
        const Eigen::RowVectorXd ref = reference.points.row(i);
        for (Eigen::Index j = 0; j < samples.size(); ++j) {
            if ((samples.points.row(j) - ref).squaredNorm() <= r2) {
                covered[i] = 1;
                break;
            }
        }
    });
    double total = 0.0;
    for (int c : covered) total += c;
    return total / static_cast<double>(reference.size());
}

}  // namespace condsamp
