#pragma once

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "condsamp/bias.hpp"
#include "condsamp/ccgan.hpp"
#include "condsamp/config.hpp"
#include "condsamp/density.hpp"
#include "condsamp/io.hpp"
#include "condsamp/manifold.hpp"
#include "condsamp/pipeline.hpp"
#include "condsamp/sde.hpp"
#include "condsamp/version.hpp"

// Command-line entry point. Every subcommand writes its artifacts under the
// --out directory and finishes by writing manifest.json (atomically), so an
// interrupted run leaves no final artifact behind. Exit codes: 0 success,
// 1 usage/configuration error, 2 numerical failure.

namespace condsamp {

namespace cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

struct RunManifest {
    std::string command;
    std::string config_path;
    std::string output_dir;
    std::uint64_t seed = 0;
    std::string tool_version = kVersion;
    double wall_time_s = 0.0;
    std::uint64_t config_hash = 0;

    void write(const fs::path& out_dir) const {
        json j{{"command", command},       {"config_path", config_path},
               {"output_dir", output_dir}, {"seed", seed},
               {"tool_version", tool_version}, {"wall_time_s", wall_time_s},
               {"config_hash", config_hash}};
        io::atomic_write(out_dir / "manifest.json", j.dump(2) + "\n");
    }
};

class StopWatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

inline fs::path ensure_out_dir(const std::string& out) {
    fs::path dir(out);
    fs::create_directories(dir);
    return dir;
}

inline std::map<std::string, double> parse_param_flags(const std::vector<std::string>& kvs) {
    std::map<std::string, double> params;
    for (const auto& kv : kvs) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--param expects name=value, got \"" + kv + "\"", "param");
        params[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    }
    return params;
}

inline Eigen::VectorXd default_x0(const std::string& system_id) {
    if (system_id == "ou2d" || system_id == "doublewell") return Eigen::Vector2d(0.0, 1.0);
    if (system_id == "halfmoon") return Eigen::Vector2d(1.0, 0.0);
    return Eigen::Vector3d(0.0, 0.0, 0.0);  // caps3d
}

inline void require_file(const std::string& path, const std::string& flag) {
    if (!fs::exists(path))
        throw ConfigError("file not found: " + path + " (from " + flag + ")", flag);
}

/// Strip a leading time column from a CSV matrix if its header starts with t.
inline Eigen::MatrixXd data_columns(const io::CsvData& csv) {
    if (!csv.header.empty() && csv.header.front() == "t")
        return csv.values.rightCols(csv.values.cols() - 1);
    return csv.values;
}

inline BiasSpec resolve_bias(const cfg::BiasConfig& b) {
    if (b.kind == "raw_coordinate") return BiasSpec::raw(b.cv_index, b.k, b.target);
    require_file(b.dmap_model_path, "bias.dmap_model_path");
    auto model = std::make_shared<DmapModel>(io::load_dmap(b.dmap_model_path));
    auto interp = std::make_shared<CvInterpolant>(
        make_interpolant(std::shared_ptr<const DmapModel>(model), b.coord_index));
    return BiasSpec::learned(interp, b.k, b.target);
}

inline void write_histogram_csv(const fs::path& path, const HistogramEstimate& h) {
    Eigen::MatrixXd m(h.bins(), 3);
    for (int b = 0; b < h.bins(); ++b) {
        m(b, 0) = h.edges(b);
        m(b, 1) = h.edges(b + 1);
        m(b, 2) = h.density(b);
    }
    io::write_csv(path, {"bin_lo", "bin_hi", "density"}, m);
}

// --- subcommand bodies -----------------------------------------------------

inline int cmd_simulate(const std::string& system_id,
                        const std::vector<std::string>& params, long steps, double dt,
                        std::uint64_t seed, std::uint64_t stream,
                        const std::vector<double>& x0_flag, const std::string& out) {
    StopWatch watch;
    const fs::path out_dir = ensure_out_dir(out);
    const SdeSystem sys = make_benchmark(system_id, parse_param_flags(params));
    Eigen::VectorXd x0 = default_x0(system_id);
    if (!x0_flag.empty()) {
        if (static_cast<int>(x0_flag.size()) != sys.dim)
            throw ConfigError("--x0 must have " + std::to_string(sys.dim) + " components",
                              "x0");
        x0 = Eigen::Map<const Eigen::VectorXd>(x0_flag.data(), sys.dim);
    }
    const Trajectory traj = integrate(sys, x0, static_cast<int>(steps), dt, seed, stream);
    io::save_trajectory(out_dir / "trajectory.csv", traj, sys.params);
    RunManifest manifest{"simulate", "", out, seed};
    manifest.config_hash = fnv1a(system_id + "/" + std::to_string(steps) + "/" +
                                 io::format_double(dt) + "/" + std::to_string(seed));
    manifest.wall_time_s = watch.seconds();
    manifest.write(out_dir);
    return 0;
}

inline int cmd_dmap_fit(const std::string& data_path, const std::string& metric,
                        double eps, double alpha, int n_eigs, long subsample,
                        const std::string& system_id, const std::vector<std::string>& params,
                        int burst_n, double burst_dt, std::uint64_t seed,
                        const std::string& out) {
    StopWatch watch;
    const fs::path out_dir = ensure_out_dir(out);
    require_file(data_path, "--data");
    SampleSet data{data_columns(io::read_csv(data_path))};
    if (subsample > 0 && subsample < data.size())
        data = data.thin(data.size() / subsample).slice(0, subsample);
    const DmapMetric m =
        metric == "mahalanobis" ? DmapMetric::mahalanobis : DmapMetric::euclidean;
    std::optional<double> eps_opt;
    if (eps > 0.0) eps_opt = eps;

    std::vector<Eigen::MatrixXd> covs;
    DmapModel model;
    if (m == DmapMetric::mahalanobis) {
        if (system_id.empty())
            throw ConfigError("mahalanobis metric needs --system for covariance bursts",
                              "system");
        const SdeSystem sys = make_benchmark(system_id, parse_param_flags(params));
        covs.resize(data.size());
        parallel_for(static_cast<std::size_t>(data.size()), [&](std::size_t i) {
            covs[i] = estimate_local_covariance(sys, data.points.row(i).transpose(), burst_n,
                                                burst_dt, seed, /*stream=*/0x10000 + i);
        });
        model = fit_dmap(data, m, eps_opt, alpha, n_eigs, &covs);
    } else {
        model = fit_dmap(data, m, eps_opt, alpha, n_eigs);
    }
    io::save_dmap(out_dir / "model.dmap", model);
    io::write_csv(out_dir / "eigvals.csv", {"eigval"}, model.eigvals);
    RunManifest manifest{"dmap-fit", data_path, out, seed};
    manifest.config_hash = fnv1a(data_path + "/" + metric + "/" + io::format_double(alpha));
    manifest.wall_time_s = watch.seconds();
    manifest.write(out_dir);
    return 0;
}

inline int cmd_dmap_eval(const std::string& model_path, int coord,
                         const std::string& points_path, const std::string& out) {
    StopWatch watch;
    const fs::path out_dir = ensure_out_dir(out);
    require_file(model_path, "--model");
    require_file(points_path, "--points");
    auto model = std::make_shared<const DmapModel>(io::load_dmap(model_path));
    const CvInterpolant interp = make_interpolant(model, coord);
    const Eigen::MatrixXd pts = data_columns(io::read_csv(points_path));
    Eigen::MatrixXd result(pts.rows(), 1 + pts.cols());
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        const Eigen::VectorXd x = pts.row(i).transpose();
        result(i, 0) = nystrom_extend(interp, x);
        result.block(i, 1, 1, pts.cols()) = nystrom_gradient(interp, x).transpose();
    }
    std::vector<std::string> header{"phi"};
    for (Eigen::Index c = 0; c < pts.cols(); ++c)
        header.push_back("dphi_dx" + std::to_string(c + 1));
    io::write_csv(out_dir / "eval.csv", header, result);
    RunManifest manifest{"dmap-eval", model_path, out, 0};
    manifest.config_hash = fnv1a(model_path + "/" + std::to_string(coord));
    manifest.wall_time_s = watch.seconds();
    manifest.write(out_dir);
    return 0;
}

inline int cmd_umbrella(const std::string& config_path, const std::string& out) {
    StopWatch watch;
    const fs::path out_dir = ensure_out_dir(out);
    require_file(config_path, "--config");
    const std::string raw = io::read_file(config_path);
    const cfg::UmbrellaConfig c = cfg::UmbrellaConfig::parse(cfg::load_json_file(config_path));
    const SdeSystem sys = make_benchmark(c.system.id, c.system.params);
    if (static_cast<int>(c.x0.size()) != sys.dim)
        throw ConfigError("x0 must have " + std::to_string(sys.dim) + " components", "x0");
    const Eigen::VectorXd x0 =
        Eigen::Map<const Eigen::VectorXd>(c.x0.data(), static_cast<Eigen::Index>(c.x0.size()));
    const SampleSet samples =
        run_umbrella(sys, resolve_bias(c.bias), x0, static_cast<int>(c.steps),
                     static_cast<int>(c.warmup), c.dt, c.seed);
    Eigen::MatrixXd m(samples.size(), samples.dim() + 1);
    m.leftCols(samples.dim()) = samples.points;
    m.col(samples.dim()) = *samples.labels;
    std::vector<std::string> header;
    for (Eigen::Index i = 0; i < samples.dim(); ++i)
        header.push_back("x" + std::to_string(i + 1));
    header.push_back("label");
    io::write_csv(out_dir / "samples.csv", header, m);
    RunManifest manifest{"umbrella", config_path, out, c.seed};
    manifest.config_hash = fnv1a(raw);
    manifest.wall_time_s = watch.seconds();
    manifest.write(out_dir);
    return 0;
}

inline int cmd_gan_train(const std::string& data_path, int label_col,
                         const std::string& arch, int noise_dim, const TrainConfig& tc,
                         const std::string& out) {
    StopWatch watch;
    const fs::path out_dir = ensure_out_dir(out);
    require_file(data_path, "--data");
    const Eigen::MatrixXd values = data_columns(io::read_csv(data_path));
    if (label_col < 0 || label_col >= values.cols())
        throw ConfigError("--label-col out of range", "label-col");
    SampleSet data{values};
    data.labels = values.col(label_col);
    TrainLog log;
    const GanModel model = train_ccgan(data, arch, noise_dim, tc, &log);
    io::save_gan(out_dir / "model.gan", model);
    Eigen::MatrixXd curve(static_cast<Eigen::Index>(log.d_loss.size()), 3);
    for (Eigen::Index i = 0; i < curve.rows(); ++i) {
        curve(i, 0) = static_cast<double>(i);
        curve(i, 1) = log.d_loss[static_cast<std::size_t>(i)];
        curve(i, 2) = log.g_loss[static_cast<std::size_t>(i)];
    }
    io::write_csv(out_dir / "train_log.csv", {"epoch", "d_loss", "g_loss"}, curve);
    RunManifest manifest{"gan-train", data_path, out, tc.seed};
    manifest.config_hash = fnv1a(data_path + "/" + arch + "/" + std::to_string(tc.epochs) +
                                 "/" + std::to_string(tc.seed));
    manifest.wall_time_s = watch.seconds();
    manifest.write(out_dir);
    return 0;
}

inline int cmd_gan_sample(const std::string& model_path, double label, long n,
                          std::uint64_t seed, const std::string& out) {
    StopWatch watch;
    const fs::path out_dir = ensure_out_dir(out);
    require_file(model_path, "--model");
    const GanModel model = io::load_gan(model_path);
    const SampleSet samples = sample_ccgan(model, label, static_cast<int>(n), seed);
    std::vector<std::string> header;
    for (Eigen::Index i = 0; i < samples.dim(); ++i)
        header.push_back("x" + std::to_string(i + 1));
    io::write_csv(out_dir / "samples.csv", header, samples.points);
    RunManifest manifest{"gan-sample", model_path, out, seed};
    manifest.config_hash =
        fnv1a(model_path + "/" + io::format_double(label) + "/" + std::to_string(n));
    manifest.wall_time_s = watch.seconds();
    manifest.write(out_dir);
    return 0;
}

inline int cmd_couple(const std::string& config_path, const std::string& out) {
    StopWatch watch;
    const fs::path out_dir = ensure_out_dir(out);
    require_file(config_path, "--config");
    const std::string raw = io::read_file(config_path);
    const cfg::CoupleConfig c = cfg::CoupleConfig::parse(cfg::load_json_file(config_path));
    require_file(c.gan_model_path, "gan_model_path");
    const GanModel gan = io::load_gan(c.gan_model_path);
    CouplingConfig run;
    run.system = make_benchmark(c.system.id, c.system.params);
    run.gan = &gan;
    run.bias = resolve_bias(c.bias);
    run.n_chains = c.n_chains;
    run.steps_per_chain = static_cast<int>(c.steps_per_chain);
    run.warmup = static_cast<int>(c.warmup);
    run.dt = c.dt;
    run.seed = c.seed;
    run.target_label = c.target_label;
    run.fast_coord = c.fast_coord;
    run.hist_bins = c.hist_bins;
    run.hist_range = c.hist_range;
    const auto [samples, hist] = run_coupled_sampling(run);
    Eigen::MatrixXd m(samples.size(), samples.dim() + 1);
    m.leftCols(samples.dim()) = samples.points;
    m.col(samples.dim()) = *samples.labels;
    std::vector<std::string> header;
    for (Eigen::Index i = 0; i < samples.dim(); ++i)
        header.push_back("x" + std::to_string(i + 1));
    header.push_back("label");
    io::write_csv(out_dir / "pooled_samples.csv", header, m);
    write_histogram_csv(out_dir / "pooled_hist.csv", hist);
    const Eigen::VectorXd fast = samples.points.col(c.fast_coord);
    io::atomic_write(
        out_dir / "summary.json",
        json{{"config_hash", fnv1a(raw)},
             {"seed", c.seed},
             {"metrics",
              {{"n_samples", samples.size()},
               {"fast_mean", fast.mean()},
               {"fast_var", (fast.array() - fast.mean()).square().mean()}}}}
                .dump(2) +
            "\n");
    RunManifest manifest{"couple", config_path, out, c.seed};
    manifest.config_hash = fnv1a(raw);
    manifest.wall_time_s = watch.seconds();
    manifest.write(out_dir);
    return 0;
}

inline int cmd_bench(const std::string& config_path, const std::string& out) {
    StopWatch watch;
    const fs::path out_dir = ensure_out_dir(out);
    require_file(config_path, "--config");
    const std::string raw = io::read_file(config_path);
    const cfg::BenchConfig c = cfg::BenchConfig::parse(cfg::load_json_file(config_path));
    require_file(c.gan_model_path, "gan_model_path");
    const GanModel gan = io::load_gan(c.gan_model_path);
    BenchmarkConfig bench;
    bench.system = make_benchmark(c.system.id, c.system.params);
    bench.gan = &gan;
    bench.slow_target = c.slow_target;
    bench.slow_coord = c.slow_coord;
    bench.fast_coord = c.fast_coord;
    bench.k_spring = c.k;
    bench.dt = c.dt;
    bench.budgets = c.budgets;
    bench.n_trials = c.n_trials;
    bench.n_chains = c.n_chains;
    bench.run_us_only = false;
    bench.run_coupled = false;
    for (const auto& m : c.methods) {
        if (m == "us_only") bench.run_us_only = true;
        if (m == "coupled") bench.run_coupled = true;
    }
    bench.hist_bins = c.hist_bins;
    bench.hist_range = c.hist_range;
    if (static_cast<int>(c.us_start.size()) != bench.system.dim)
        throw ConfigError("us_start must have " + std::to_string(bench.system.dim) +
                          " components", "us_start");
    bench.us_start = Eigen::Map<const Eigen::VectorXd>(
        c.us_start.data(), static_cast<Eigen::Index>(c.us_start.size()));
    bench.seed = c.seed;
    bench.reference = true_fast_pdf(c.system.id, c.slow_target, c.system.params);
    const std::vector<BenchmarkRow> rows = convergence_benchmark(bench);

    Eigen::MatrixXd row_m(static_cast<Eigen::Index>(rows.size()), 4);
    for (Eigen::Index i = 0; i < row_m.rows(); ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        row_m(i, 0) = static_cast<double>(r.budget);
        row_m(i, 1) = r.method == "us_only" ? 0.0 : 1.0;
        row_m(i, 2) = static_cast<double>(r.trial);
        row_m(i, 3) = r.l1;
    }
    // method encoded by name in its own CSV column
    std::string csv = "budget,method,trial,l1_error\n";
    for (const auto& r : rows)
        csv += std::to_string(r.budget) + "," + r.method + "," + std::to_string(r.trial) +
               "," + io::format_double(r.l1) + "\n";
    io::atomic_write(out_dir / "l1_rows.csv", csv);
    std::string summary = "budget,method,mean,std,n\n";
    for (const auto& cell : summarize_benchmark(rows))
        summary += std::to_string(cell.budget) + "," + cell.method + "," +
                   io::format_double(cell.mean) + "," + io::format_double(cell.stddev) + "," +
                   std::to_string(cell.n) + "\n";
    io::atomic_write(out_dir / "l1_summary.csv", summary);
    json metrics = json::array();
    for (const auto& cell : summarize_benchmark(rows))
        metrics.push_back({{"budget", cell.budget},
                           {"method", cell.method},
                           {"mean_l1", cell.mean},
                           {"std_l1", cell.stddev},
                           {"n_trials", cell.n}});
    io::atomic_write(out_dir / "summary.json",
                     json{{"config_hash", fnv1a(raw)}, {"seed", c.seed},
                          {"metrics", metrics}}
                             .dump(2) +
                         "\n");
    RunManifest manifest{"bench-converge", config_path, out, c.seed};
    manifest.config_hash = fnv1a(raw);
    manifest.wall_time_s = watch.seconds();
    manifest.write(out_dir);
    return 0;
}

inline int cmd_closure(const std::string& config_path, const std::string& out) {
    StopWatch watch;
    const fs::path out_dir = ensure_out_dir(out);
    require_file(config_path, "--config");
    const std::string raw = io::read_file(config_path);
    const cfg::ClosureConfig c = cfg::ClosureConfig::parse(cfg::load_json_file(config_path));
    require_file(c.gan_model_path, "gan_model_path");
    const GanModel gan = io::load_gan(c.gan_model_path);
    const SdeSystem sys = make_benchmark(c.system.id, c.system.params);
    Eigen::VectorXd grid(c.grid_n);
    for (int i = 0; i < c.grid_n; ++i)
        grid(i) = c.grid_lo + (c.grid_hi - c.grid_lo) * i / (c.grid_n - 1);
    ClosureResult res = closure_grid(gan_conditional_sampler(gan), sys, grid, c.n_per_point,
                                     c.seed, c.slow_coord);
    Eigen::MatrixXd m(grid.size(), 3);
    m.col(0) = res.grid;
    m.col(1) = res.b_values;
    m.col(2) = res.std_errors;
    io::write_csv(out_dir / "closure.csv", {"z", "B", "std_error"}, m);
    if (c.run_ode) {
        const Eigen::VectorXd path =
            integrate_effective_ode(res, c.ode_z0, c.ode_time, c.ode_dt);
        Eigen::MatrixXd pm(path.size(), 2);
        for (Eigen::Index i = 0; i < path.size(); ++i) pm(i, 0) = c.ode_dt * i;
        pm.col(1) = path;
        io::write_csv(out_dir / "effective_path.csv", {"t", "z"}, pm);
    }
    RunManifest manifest{"closure", config_path, out, c.seed};
    manifest.config_hash = fnv1a(raw);
    manifest.wall_time_s = watch.seconds();
    manifest.write(out_dir);
    return 0;
}

// --- dispatch ----------------------------------------------------------------

inline int dispatch(const std::vector<std::string>& argv) {
    CLI::App app{"conditional equilibrium sampling for multiscale SDEs"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    // simulate
    auto* sim = app.add_subcommand("simulate", "integrate a benchmark system");
    std::string sim_system;
    std::vector<std::string> sim_params;
    long sim_steps = 10000;
    double sim_dt = 1.0;
    std::uint64_t sim_seed = 0, sim_stream = 0;
    std::vector<double> sim_x0;
    std::string sim_out = "run";
    sim->add_option("--system", sim_system, "ou2d|halfmoon|doublewell|caps3d")->required();
    sim->add_option("--param", sim_params, "parameter override name=value");
    sim->add_option("--steps", sim_steps, "number of steps")->required();
    sim->add_option("--dt", sim_dt, "time step")->required();
    sim->add_option("--seed", sim_seed, "random seed");
    sim->add_option("--stream", sim_stream, "random stream index");
    sim->add_option("--x0", sim_x0, "initial state components");
    sim->add_option("--out", sim_out, "output directory")->required();

    // dmap-fit
    auto* dfit = app.add_subcommand("dmap-fit", "fit a diffusion map to data");
    std::string dfit_data, dfit_metric = "euclidean", dfit_system, dfit_out = "run";
    std::vector<std::string> dfit_params;
    double dfit_eps = 0.0, dfit_alpha = 1.0, dfit_burst_dt = 1e-4;
    int dfit_neigs = 5, dfit_burst_n = 200;
    long dfit_subsample = 0;
    std::uint64_t dfit_seed = 0;
    dfit->add_option("--data", dfit_data, "CSV of points (or trajectory CSV)")->required();
    dfit->add_option("--metric", dfit_metric, "euclidean|mahalanobis");
    dfit->add_option("--eps", dfit_eps, "kernel bandwidth (0 = median heuristic)");
    dfit->add_option("--alpha", dfit_alpha, "density normalization exponent");
    dfit->add_option("--n-eigs", dfit_neigs, "number of eigenpairs");
    dfit->add_option("--subsample", dfit_subsample, "thin data to this many points");
    dfit->add_option("--system", dfit_system, "system for covariance bursts (mahalanobis)");
    dfit->add_option("--param", dfit_params, "system parameter override name=value");
    dfit->add_option("--burst-n", dfit_burst_n, "one-step increments per covariance");
    dfit->add_option("--burst-dt", dfit_burst_dt, "burst time step");
    dfit->add_option("--seed", dfit_seed, "random seed for bursts");
    dfit->add_option("--out", dfit_out, "output directory")->required();

    // dmap-eval
    auto* deval = app.add_subcommand("dmap-eval", "evaluate a learned coordinate");
    std::string deval_model, deval_points, deval_out = "run";
    int deval_coord = 1;
    deval->add_option("--model", deval_model, "dmap model file")->required();
    deval->add_option("--coord", deval_coord, "coordinate index (>= 1)");
    deval->add_option("--points", deval_points, "CSV of evaluation points")->required();
    deval->add_option("--out", deval_out, "output directory")->required();

    // umbrella
    auto* umb = app.add_subcommand("umbrella", "run a biased trajectory");
    std::string umb_config, umb_out = "run";
    umb->add_option("--config", umb_config, "umbrella config JSON")->required();
    umb->add_option("--out", umb_out, "output directory")->required();

    // gan-train
    auto* gtrain = app.add_subcommand("gan-train", "train the conditional generator");
    std::string gtrain_data, gtrain_arch = "table1", gtrain_out = "run";
    int gtrain_label_col = 0, gtrain_noise = 1;
    TrainConfig tc;
    gtrain->add_option("--data", gtrain_data, "training CSV")->required();
    gtrain->add_option("--label-col", gtrain_label_col, "label column index");
    gtrain->add_option("--arch", gtrain_arch, "table1|table2");
    gtrain->add_option("--noise-dim", gtrain_noise, "generator noise dimension");
    gtrain->add_option("--epochs", tc.epochs, "update cycles");
    gtrain->add_option("--batch", tc.batch_size, "batch size");
    gtrain->add_option("--lr", tc.lr, "learning rate");
    gtrain->add_option("--seed", tc.seed, "random seed");
    gtrain->add_option("--kappa", tc.kappa_override, "vicinity radius (normalized labels)");
    gtrain->add_option("--sigma", tc.sigma_override, "label perturbation scale");
    gtrain->add_option("--vicinity-target", tc.vicinity_target,
                       "average in-batch vicinity size for the kappa default");
    gtrain->add_flag("--early-stop", tc.early_stop, "stop on discriminator-loss plateau");
    gtrain->add_option("--out", gtrain_out, "output directory")->required();

    // gan-sample
    auto* gsample = app.add_subcommand("gan-sample", "sample the generator at a label");
    std::string gsample_model, gsample_out = "run";
    double gsample_label = 0.0;
    long gsample_n = 1000;
    std::uint64_t gsample_seed = 0;
    gsample->add_option("--model", gsample_model, "GAN model file")->required();
    gsample->add_option("--label", gsample_label, "conditioning value")->required();
    gsample->add_option("--n", gsample_n, "number of samples")->required();
    gsample->add_option("--seed", gsample_seed, "random seed");
    gsample->add_option("--out", gsample_out, "output directory")->required();

    // couple
    auto* couple = app.add_subcommand("couple", "generator-seeded parallel umbrella runs");
    std::string couple_config, couple_out = "run";
    couple->add_option("--config", couple_config, "coupling config JSON")->required();
    couple->add_option("--out", couple_out, "output directory")->required();

    // bench-converge
    auto* bench = app.add_subcommand("bench-converge", "umbrella-only vs coupled L1 benchmark");
    std::string bench_config, bench_out = "run";
    bench->add_option("--config", bench_config, "benchmark config JSON")->required();
    bench->add_option("--out", bench_out, "output directory")->required();

    // closure
    auto* closure = app.add_subcommand("closure", "effective slow-drift closure");
    std::string closure_config, closure_out = "run";
    closure->add_option("--config", closure_config, "closure config JSON")->required();
    closure->add_option("--out", closure_out, "output directory")->required();

    std::vector<std::string> args(argv.rbegin(), argv.rend());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help() << std::flush;
        return 1;
    }

    try {
        if (sim->parsed())
            return cmd_simulate(sim_system, sim_params, sim_steps, sim_dt, sim_seed,
                                sim_stream, sim_x0, sim_out);
        if (dfit->parsed())
            return cmd_dmap_fit(dfit_data, dfit_metric, dfit_eps, dfit_alpha, dfit_neigs,
                                dfit_subsample, dfit_system, dfit_params, dfit_burst_n,
                                dfit_burst_dt, dfit_seed, dfit_out);
        if (deval->parsed())
            return cmd_dmap_eval(deval_model, deval_coord, deval_points, deval_out);
        if (umb->parsed()) return cmd_umbrella(umb_config, umb_out);
        if (gtrain->parsed())
            return cmd_gan_train(gtrain_data, gtrain_label_col, gtrain_arch, gtrain_noise,
                                 tc, gtrain_out);
        if (gsample->parsed())
            return cmd_gan_sample(gsample_model, gsample_label, gsample_n, gsample_seed,
                                  gsample_out);
        if (couple->parsed()) return cmd_couple(couple_config, couple_out);
        if (bench->parsed()) return cmd_bench(bench_config, bench_out);
        if (closure->parsed()) return cmd_closure(closure_config, closure_out);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IntegrationDivergedError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::cerr << "no subcommand given\n" << app.help();
    return 1;
}

}  // namespace cli

}  // namespace condsamp
