#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "condsamp/errors.hpp"
#include "condsamp/parallel.hpp"
#include "condsamp/rng.hpp"
#include "condsamp/sample_set.hpp"

// SDE systems dX = mu(X,t) dt + sigma(X,t) dB and their Euler-Maruyama
// integration with counter-based per-trajectory random streams.

namespace condsamp {

using DriftFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;
using DiffusionFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&, double)>;

struct SdeSystem {
    std::string id;
    int dim = 0;
    int noise_dim = 0;
    DriftFn drift;
    DiffusionFn diffusion;
    std::map<std::string, double> params;
};

struct Trajectory {
    Eigen::MatrixXd states;  // (n_steps + 1) x dim, row 0 is the initial state
    double dt = 0.0;
    std::uint64_t seed = 0;
    std::string system_id;
};

struct TransformMap {
    std::string id;
    int dim = 0;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> forward;
};

namespace detail {

inline double get_param(const std::map<std::string, double>& p, const std::string& k) {
    auto it = p.find(k);
    if (it == p.end()) throw Error("missing parameter: " + k);
    return it->second;
}

/// Well-depth control of the two-basin fast potential; zero at z1 = 5 where
/// the basins have equal depth.
inline double doublewell_depth(double z1) { return 0.4 * z1 - 2.0; }

inline double doublewell_drift_z2(double z1, double z2, double h) {
    const double d = doublewell_depth(z1);
    const double opz = 1.0 + z2;
    const double t1 = opz * opz *
                      (2.0 * (1.0 + h - d) * z2 - 2.0 * h +
                       3.0 * (0.75 * d - 2.0) * z2 * z2 + 4.0 * z2 * z2 * z2);
    const double t2 = 2.0 * opz *
                      (h - 2.0 * h * z2 + (1.0 + h - d) * z2 * z2 +
                       (0.75 * d - 2.0) * z2 * z2 * z2 + z2 * z2 * z2 * z2);
    return -(t1 + t2);
}

// Closed-form drift/diffusion of the half-moon system (the Ito push-forward of
// the planar slow/fast OU system through y = (x2 cos u, x2 sin u), u = x1+x2-1).
//
// The textbook radial factor y1*sqrt((y1^2+y2^2)/y1^2) is evaluated in its
// absolute-value reading sqrt(y1^2+y2^2); the signed reading flips every
// coefficient for y1 < 0, which turns the radial relaxation into an
// instability and makes trajectories blow up once they cross the y2 axis.
inline void halfmoon_coeffs(const Eigen::VectorXd& y, double a1, double a2, double a3,
                            double a4, Eigen::Vector2d& mu, Eigen::Matrix2d& sig) {
    const double y1 = y(0), y2 = y(1);
    const double r2 = y1 * y1 + y2 * y2;
    if (r2 == 0.0) throw Error("halfmoon drift: state at the coordinate origin");
    const double r = std::sqrt(r2);
    mu(0) = -0.5 *
            (((a2 * a2 + a4 * a4 + 2.0 * a3) * y1 + 2.0 * y2 * (a1 + a3)) * r -
             2.0 * a3 * y1 * y1 * y2 - 2.0 * a3 * y2 * y2 * y2 + 2.0 * a4 * a4 * y2 -
             2.0 * a3 * y1) /
            r;
    mu(1) = (((a1 + a3) * y1 - 0.5 * y2 * (a2 * a2 + a4 * a4 + 2.0 * a3)) * r -
             a3 * y1 * y1 * y1 + (-a3 * y2 * y2 + a4 * a4) * y1 + a3 * y2) /
            r;
    sig(0, 0) = -a2 * y2;
    sig(0, 1) = a4 * (y1 / r - y2);
    sig(1, 0) = a2 * y1;
    sig(1, 1) = a4 * (y1 + y2 / r);
}

}  // namespace detail

/// The four benchmark systems with their default parameters; `overrides`
/// replaces defaults by name. Throws on an unknown id or parameter name.
inline SdeSystem make_benchmark(const std::string& system_id,
                                const std::map<std::string, double>& overrides = {}) {
    std::map<std::string, double> p;
    if (system_id == "ou2d" || system_id == "halfmoon") {
        p = {{"a1", 1e-3}, {"a2", 1e-3}, {"a3", 1e-1}, {"a4", 1e-1}};
    } else if (system_id == "doublewell") {
        p = {{"a1", 1e-4}, {"a2", 1e-4}, {"a3", 1e-1}, {"h", 8.0}};
    } else if (system_id == "caps3d") {
        p = {{"a1", 1.0}, {"a2", 10.0}, {"a3", std::sqrt(0.02)},
             {"a4", 100.0}, {"a5", std::sqrt(0.02)}};
    } else {
        throw Error("make_benchmark: unknown system id '" + system_id + "'");
    }
    for (const auto& [k, v] : overrides) {
        if (!p.count(k))
            throw Error("make_benchmark: '" + system_id + "' has no parameter '" + k + "'");
        p[k] = v;
    }

    SdeSystem sys;
    sys.id = system_id;
    sys.params = p;
    if (system_id == "ou2d") {
        sys.dim = 2;
        sys.noise_dim = 2;
        const double a1 = p["a1"], a2 = p["a2"], a3 = p["a3"], a4 = p["a4"];
        sys.drift = [a1, a3](const Eigen::VectorXd& x, double) {
            return Eigen::Vector2d(a1, a3 * (1.0 - x(1)));
        };
        sys.diffusion = [a2, a4](const Eigen::VectorXd&, double) {
            Eigen::Matrix2d s = Eigen::Matrix2d::Zero();
            s(0, 0) = a2;
            s(1, 1) = a4;
            return Eigen::MatrixXd(s);
        };
    } else if (system_id == "halfmoon") {
        sys.dim = 2;
        sys.noise_dim = 2;
        const double a1 = p["a1"], a2 = p["a2"], a3 = p["a3"], a4 = p["a4"];
        sys.drift = [a1, a2, a3, a4](const Eigen::VectorXd& y, double) {
            Eigen::Vector2d mu;
            Eigen::Matrix2d sig;
            detail::halfmoon_coeffs(y, a1, a2, a3, a4, mu, sig);
            return Eigen::VectorXd(mu);
        };
        sys.diffusion = [a1, a2, a3, a4](const Eigen::VectorXd& y, double) {
            Eigen::Vector2d mu;
            Eigen::Matrix2d sig;
            detail::halfmoon_coeffs(y, a1, a2, a3, a4, mu, sig);
            return Eigen::MatrixXd(sig);
        };
    } else if (system_id == "doublewell") {
        sys.dim = 2;
        sys.noise_dim = 2;
        const double a1 = p["a1"], a2 = p["a2"], a3 = p["a3"], h = p["h"];
        sys.drift = [a1, h](const Eigen::VectorXd& z, double) {
            return Eigen::Vector2d(a1, detail::doublewell_drift_z2(z(0), z(1), h));
        };
        sys.diffusion = [a2, a3](const Eigen::VectorXd&, double) {
            Eigen::Matrix2d s = Eigen::Matrix2d::Zero();
            s(0, 0) = a2;
            s(1, 1) = a3;
            return Eigen::MatrixXd(s);
        };
    } else {  // caps3d
        sys.dim = 3;
        sys.noise_dim = 2;
        const double a1 = p["a1"], a2 = p["a2"], a3 = p["a3"], a4 = p["a4"], a5 = p["a5"];
        sys.drift = [a1, a2, a4](const Eigen::VectorXd&, double) {
            return Eigen::Vector3d(a1, a2, a4);
        };
        sys.diffusion = [a3, a5](const Eigen::VectorXd&, double) {
            Eigen::MatrixXd s = Eigen::MatrixXd::Zero(3, 2);
            s(1, 0) = a3;
            s(2, 1) = a5;
            return s;
        };
    }
    return sys;
}

/// One Euler-Maruyama step: state + mu dt + sigma sqrt(dt) normals.
inline Eigen::VectorXd em_step(const SdeSystem& sys, const Eigen::VectorXd& state,
                               double t, double dt, const Eigen::VectorXd& normals) {
    if (dt <= 0.0) throw Error("em_step: dt must be positive");
    if (normals.size() != sys.noise_dim)
        throw DimensionError("em_step: expected " + std::to_string(sys.noise_dim) +
                             " normals, got " + std::to_string(normals.size()));
    Eigen::VectorXd next = state + sys.drift(state, t) * dt +
                           sys.diffusion(state, t) * (std::sqrt(dt) * normals);
    if (!next.allFinite())
        throw IntegrationDivergedError(0, "em_step: non-finite state produced");
    return next;
}

/// Integrate n_steps Euler-Maruyama steps. Deterministic in
/// (system, x0, n_steps, dt, seed, stream); `stream` selects the random stream
/// so trajectory k of an ensemble can be reproduced in isolation.
inline Trajectory integrate(const SdeSystem& sys, const Eigen::VectorXd& x0, int n_steps,
                            double dt, std::uint64_t seed, std::uint64_t stream = 0) {
    if (n_steps < 1) throw Error("integrate: n_steps must be >= 1");
    if (x0.size() != sys.dim) throw DimensionError("integrate: x0 has wrong dimension");
    RngStream rng(seed, stream);
    Trajectory traj;
    traj.states.resize(n_steps + 1, sys.dim);
    traj.dt = dt;
    traj.seed = seed;
    traj.system_id = sys.id;
    traj.states.row(0) = x0;
    Eigen::VectorXd x = x0;
    Eigen::VectorXd normals(sys.noise_dim);
    for (int i = 0; i < n_steps; ++i) {
        for (int k = 0; k < sys.noise_dim; ++k) normals(k) = rng.next_normal();
        try {
            x = em_step(sys, x, i * dt, dt, normals);
        } catch (const IntegrationDivergedError&) {
            throw IntegrationDivergedError(
                static_cast<std::size_t>(i),
                sys.id + ": integration diverged at step " + std::to_string(i) +
                    " (non-finite state); consider reducing k*dt");
        }
        traj.states.row(i + 1) = x;
    }
    return traj;
}

/// Independent trajectories, one random stream per member (stream index = k).
/// Runs members in parallel; the result vector is ordered by member index.
inline std::vector<Trajectory> integrate_ensemble(
    const SdeSystem& sys, const std::vector<Eigen::VectorXd>& x0s, int n_steps, double dt,
    std::uint64_t seed) {
    std::vector<Trajectory> out(x0s.size());
    parallel_for(x0s.size(), [&](std::size_t k) {
        out[k] = integrate(sys, x0s[k], n_steps, dt, seed, k);
    });
    return out;
}

/// y1 = x2 cos(x1+x2-1), y2 = x2 sin(x1+x2-1).
inline TransformMap halfmoon_map() {
    TransformMap m;
    m.id = "halfmoon";
    m.dim = 2;
    m.forward = [](const Eigen::VectorXd& x) {
        const double u = x(0) + x(1) - 1.0;
        return Eigen::VectorXd(Eigen::Vector2d(x(1) * std::cos(u), x(1) * std::sin(u)));
    };
    return m;
}

/// Inverse of the half-moon map on a band whose angular extent is below one
/// turn: the angle is lifted to the 2*pi branch nearest `u_center`.
inline Eigen::Vector2d halfmoon_inverse(const Eigen::Vector2d& y, double u_center) {
    const double r = y.norm();
    if (r == 0.0) throw Error("halfmoon_inverse: point at the origin");
    const double u_raw = std::atan2(y(1), y(0));
    const double two_pi = 2.0 * M_PI;
    const double u = u_raw + two_pi * std::round((u_center - u_raw) / two_pi);
    return {u - r + 1.0, r};
}

/// y1 = x1 + x2^2 + x3^2, y2 = x2^2 + x3^2, y3 = x3.
inline TransformMap caps_map() {
    TransformMap m;
    m.id = "caps";
    m.dim = 3;
    m.forward = [](const Eigen::VectorXd& x) {
        const double q = x(1) * x(1) + x(2) * x(2);
        return Eigen::VectorXd(Eigen::Vector3d(x(0) + q, q, x(2)));
    };
    return m;
}

/// Row-wise forward image; labels and weights are carried through.
inline SampleSet apply_transform(const SampleSet& points, const TransformMap& map) {
    if (points.dim() != map.dim)
        throw DimensionError("apply_transform: point dimension does not match map");
    SampleSet out = points;
    for (Eigen::Index i = 0; i < points.size(); ++i)
        out.points.row(i) = map.forward(points.points.row(i).transpose());
    return out;
}

/// View a trajectory as samples; `label_col` (if >= 0) copies that coordinate
/// into the label column.
inline SampleSet to_sample_set(const Trajectory& traj, int label_col = -1) {
    SampleSet s(traj.states);
    if (label_col >= 0) s.labels = traj.states.col(label_col);
    return s;
}

}  // namespace condsamp
