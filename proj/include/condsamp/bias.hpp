#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>

#include "condsamp/errors.hpp"
#include "condsamp/manifold.hpp"
#include "condsamp/sde.hpp"

// Umbrella-sampling biases: a harmonic restraint U = (k/2)(cv - target)^2 on
// either a raw state coordinate or a learned diffusion-map coordinate. The
// biased system adds the force -grad U to the drift; the diffusion is
// untouched.

namespace condsamp {

struct BiasSpec {
    enum class Kind { raw_coordinate, learned_cv };
    Kind kind = Kind::raw_coordinate;
    double k_spring = 1.0;
    double target = 0.0;
    int cv_index = 0;                           // raw_coordinate
    std::shared_ptr<const CvInterpolant> cv;    // learned_cv

    static BiasSpec raw(int coordinate, double k, double target) {
        BiasSpec s;
        s.kind = Kind::raw_coordinate;
        s.cv_index = coordinate;
        s.k_spring = k;
        s.target = target;
        return s;
    }
    static BiasSpec learned(std::shared_ptr<const CvInterpolant> interp, double k,
                            double target) {
        BiasSpec s;
        s.kind = Kind::learned_cv;
        s.cv = std::move(interp);
        s.k_spring = k;
        s.target = target;
        return s;
    }
};

/// Restraint potential value at a state (used by the force/finite-difference
/// cross checks).
inline double bias_potential(const BiasSpec& spec, const Eigen::VectorXd& x) {
    const double cv = spec.kind == BiasSpec::Kind::raw_coordinate
                          ? x(spec.cv_index)
                          : nystrom_extend(*spec.cv, x);
    const double d = cv - spec.target;
    return 0.5 * spec.k_spring * d * d;
}

inline SdeSystem bias_system(const SdeSystem& base, const BiasSpec& spec) {
    if (spec.k_spring <= 0.0) throw ConfigError("bias: k_spring must be positive", "bias.k");
    if (spec.kind == BiasSpec::Kind::raw_coordinate) {
        if (spec.cv_index < 0 || spec.cv_index >= base.dim)
            throw ConfigError("bias: cv_index out of range", "bias.cv_index");
    } else {
        if (!spec.cv) throw ConfigError("bias: learned_cv without interpolant", "bias.cv");
        if (spec.cv->model->point_dim() != base.dim)
            throw DimensionError("bias: interpolant dimension does not match system");
    }
    SdeSystem biased = base;
    biased.id = base.id + "+bias";
    const DriftFn base_drift = base.drift;
    if (spec.kind == BiasSpec::Kind::raw_coordinate) {
        const int c = spec.cv_index;
        const double k = spec.k_spring, target = spec.target;
        biased.drift = [base_drift, c, k, target](const Eigen::VectorXd& x, double t) {
            Eigen::VectorXd mu = base_drift(x, t);
            mu(c) -= k * (x(c) - target);
            return mu;
        };
    } else {
        const auto interp = spec.cv;
        const double k = spec.k_spring, target = spec.target;
        biased.drift = [base_drift, interp, k, target](const Eigen::VectorXd& x, double t) {
            Eigen::VectorXd mu = base_drift(x, t);
            const auto [phi, grad] = nystrom_value_and_gradient(*interp, x);
            mu -= k * (phi - target) * grad;
            return mu;
        };
    }
    return biased;
}

/// Integrate the biased system, drop the first `warmup` states and return the
/// remainder labeled with the restraint target.
inline SampleSet run_umbrella(const SdeSystem& base, const BiasSpec& spec,
                              const Eigen::VectorXd& x0, int n_steps, int warmup,
                              double dt, std::uint64_t seed, std::uint64_t stream = 0) {
    if (warmup >= n_steps) throw Error("run_umbrella: warmup must be < n_steps");
    const SdeSystem biased = bias_system(base, spec);
    const Trajectory traj = integrate(biased, x0, n_steps, dt, seed, stream);
    const Eigen::Index kept = traj.states.rows() - 1 - warmup;
    SampleSet out(Eigen::MatrixXd(traj.states.bottomRows(kept)));
    out.labels = Eigen::VectorXd::Constant(kept, spec.target);
    return out;
}

/// Default burn-in length: 10% of the run.
inline int default_warmup(int n_steps) { return n_steps / 10; }

}  // namespace condsamp
