#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <lapacke.h>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "condsamp/errors.hpp"
#include "condsamp/parallel.hpp"
#include "condsamp/sample_set.hpp"
#include "condsamp/sde.hpp"

// Diffusion maps with Euclidean or Mahalanobis metrics, and differentiable
// Nystrom out-of-sample evaluation of the learned coordinates.
//
// Construction: A_ij = exp(-d_ij^2 / (2 eps)), P_ii = sum_j A_ij,
// Abar = P^(-alpha/2) A P^(-alpha/2), W = row-normalized Abar. The
// eigendecomposition is done on the symmetric conjugate
// S = Dbar^(-1/2) Abar Dbar^(-1/2) (Dbar = row sums of Abar), whose
// eigenvectors map to those of W via v = Dbar^(-1/2) u.

namespace condsamp {

enum class DmapMetric { euclidean, mahalanobis };

struct DmapModel {
    Eigen::MatrixXd train_points;  // N x n
    DmapMetric metric = DmapMetric::euclidean;
    double eps_kernel = 0.0;
    double alpha = 1.0;
    Eigen::VectorXd eigvals;   // descending, eigvals(0) = 1
    Eigen::MatrixXd eigvecs;   // N x K, unit-norm columns, deterministic sign
    Eigen::VectorXd degree;    // P_ii
    Eigen::VectorXd deg_pow;   // P_ii^(-alpha/2), cached for extension
    std::vector<Eigen::MatrixXd> local_covs;      // Mahalanobis only
    std::vector<Eigen::MatrixXd> local_cov_pinv;  // cached pseudoinverses

    Eigen::Index n_train() const { return train_points.rows(); }
    Eigen::Index point_dim() const { return train_points.cols(); }
};

/// Moore-Penrose pseudoinverse of a symmetric PSD matrix via spectral cutoff:
/// eigenvalues below rel_cutoff * max are treated as zero.
inline Eigen::MatrixXd pinv_psd(const Eigen::MatrixXd& m, double rel_cutoff = 1e-10) {
    if (m.rows() != m.cols()) throw DimensionError("pinv_psd: matrix not square");
    if ((m - m.transpose()).cwiseAbs().maxCoeff() >
        1e-10 * std::max(1.0, m.cwiseAbs().maxCoeff()))
        throw Error("pinv_psd: matrix not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const Eigen::VectorXd& w = es.eigenvalues();
    const double cut = rel_cutoff * std::max(w.cwiseAbs().maxCoeff(), 0.0);
    Eigen::VectorXd winv = Eigen::VectorXd::Zero(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (w(i) > cut) winv(i) = 1.0 / w(i);
    return es.eigenvectors() * winv.asDiagonal() * es.eigenvectors().transpose();
}

/// Squared Mahalanobis distance 0.5 (xj-xi)^T (Ci^+ + Cj^+) (xj-xi), with the
/// pseudoinverses supplied precomputed.
inline double mahalanobis_sq_pinv(const Eigen::VectorXd& xi, const Eigen::VectorXd& xj,
                                  const Eigen::MatrixXd& ci_pinv,
                                  const Eigen::MatrixXd& cj_pinv) {
    const Eigen::VectorXd d = xj - xi;
    return 0.5 * d.dot((ci_pinv + cj_pinv) * d);
}

inline double mahalanobis_sq(const Eigen::VectorXd& xi, const Eigen::VectorXd& xj,
                             const Eigen::MatrixXd& ci, const Eigen::MatrixXd& cj) {
    return mahalanobis_sq_pinv(xi, xj, pinv_psd(ci), pinv_psd(cj));
}

/// Local noise covariance at `point` from n_burst one-step increments:
/// (1/(n_burst dt)) sum delta delta^T. Symmetric PSD by construction.
inline Eigen::MatrixXd estimate_local_covariance(const SdeSystem& sys,
                                                 const Eigen::VectorXd& point, int n_burst,
                                                 double dt, std::uint64_t seed,
                                                 std::uint64_t stream = 0) {
    if (n_burst < 2) throw Error("estimate_local_covariance: n_burst must be >= 2");
    RngStream rng(seed, stream);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(sys.dim, sys.dim);
    Eigen::VectorXd normals(sys.noise_dim);
    for (int b = 0; b < n_burst; ++b) {
        for (int k = 0; k < sys.noise_dim; ++k) normals(k) = rng.next_normal();
        const Eigen::VectorXd delta = em_step(sys, point, 0.0, dt, normals) - point;
        acc.noalias() += delta * delta.transpose();
    }
    return acc / (static_cast<double>(n_burst) * dt);
}

namespace detail {

inline Eigen::MatrixXd pairwise_sq_dist(const DmapModel& model) {
    const Eigen::Index n = model.n_train();
    Eigen::MatrixXd d2(n, n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        const Eigen::VectorXd xi = model.train_points.row(i).transpose();
        for (Eigen::Index j = 0; j < n; ++j) {
            const Eigen::VectorXd xj = model.train_points.row(j).transpose();
            d2(i, j) = model.metric == DmapMetric::euclidean
                           ? (xj - xi).squaredNorm()
                           : mahalanobis_sq_pinv(xi, xj, model.local_cov_pinv[i],
                                                 model.local_cov_pinv[j]);
        }
    });
    return d2;
}

/// Median of pairwise squared distances over a subsample of <= 2000 points.
inline double median_bandwidth(const Eigen::MatrixXd& d2) {
    const Eigen::Index n = d2.rows();
    const Eigen::Index stride = std::max<Eigen::Index>(1, n / 2000);
    std::vector<double> vals;
    for (Eigen::Index i = 0; i < n; i += stride)
        for (Eigen::Index j = i + stride; j < n; j += stride) vals.push_back(d2(i, j));
    if (vals.empty()) throw Error("median_bandwidth: not enough points");
    auto mid = vals.begin() + vals.size() / 2;
    std::nth_element(vals.begin(), mid, vals.end());
    return *mid;
}

/// Top-k eigenpairs of a dense symmetric matrix (ascending from LAPACK,
/// returned descending).
inline void top_eigs_sym(Eigen::MatrixXd s, int k, Eigen::VectorXd& vals,
                         Eigen::MatrixXd& vecs) {
    const lapack_int n = static_cast<lapack_int>(s.rows());
    k = std::min<int>(k, static_cast<int>(n));
    Eigen::VectorXd w(n);
    Eigen::MatrixXd z(n, k);
    std::vector<lapack_int> isuppz(2 * std::max(1, k));
    lapack_int m = 0;
    const lapack_int info = LAPACKE_dsyevr(
        LAPACK_COL_MAJOR, 'V', 'I', 'U', n, s.data(), n, 0.0, 0.0, n - k + 1, n, 0.0, &m,
        w.data(), z.data(), n, isuppz.data());
    if (info != 0) throw Error("eigen-solver failed to converge (dsyevr info=" +
                               std::to_string(info) + ")");
    vals.resize(k);
    vecs.resize(n, k);
    for (int j = 0; j < k; ++j) {  // reverse to descending order
        vals(j) = w(m - 1 - j);
        vecs.col(j) = z.col(m - 1 - j);
    }
}

}  // namespace detail

/// Fit a diffusion map. `eps_kernel` defaults to the median of pairwise
/// squared distances (metric-specific) over a 2000-point subsample; `covs`
/// supplies per-point noise covariances and is required for the Mahalanobis
/// metric. Eigenvector signs are fixed so each column correlates nonnegatively
/// with the first data coordinate.
inline DmapModel fit_dmap(const SampleSet& points, DmapMetric metric,
                          std::optional<double> eps_kernel, double alpha, int n_eigs,
                          const std::vector<Eigen::MatrixXd>* covs = nullptr) {
    if (eps_kernel && *eps_kernel <= 0.0) throw Error("fit_dmap: eps_kernel must be > 0");
    if (metric == DmapMetric::mahalanobis && covs == nullptr)
        throw Error("fit_dmap: mahalanobis metric requires local covariances");
    const Eigen::Index n = points.size();
    if (n < 3) throw Error("fit_dmap: need at least 3 points");

    DmapModel model;
    model.train_points = points.points;
    model.metric = metric;
    model.alpha = alpha;
    if (covs) {
        if (static_cast<Eigen::Index>(covs->size()) != n)
            throw DimensionError("fit_dmap: covariance count != point count");
        model.local_covs = *covs;
        model.local_cov_pinv.resize(covs->size());
        parallel_for(covs->size(), [&](std::size_t i) {
            model.local_cov_pinv[i] = pinv_psd(model.local_covs[i]);
        });
    }

    Eigen::MatrixXd d2 = detail::pairwise_sq_dist(model);
    model.eps_kernel = eps_kernel ? *eps_kernel : detail::median_bandwidth(d2);

    // A, degrees, alpha-normalization
    Eigen::MatrixXd a = (-d2 / (2.0 * model.eps_kernel)).array().exp();
    model.degree = a.rowwise().sum();
    model.deg_pow = model.degree.array().pow(-alpha / 2.0);
    Eigen::MatrixXd abar = model.deg_pow.asDiagonal() * a * model.deg_pow.asDiagonal();
    const Eigen::VectorXd dbar = abar.rowwise().sum();
    const Eigen::VectorXd dbar_isqrt = dbar.array().rsqrt();
    Eigen::MatrixXd s = dbar_isqrt.asDiagonal() * abar * dbar_isqrt.asDiagonal();
    s = 0.5 * (s + s.transpose());  // enforce exact symmetry

    Eigen::VectorXd vals;
    Eigen::MatrixXd vecs;
    detail::top_eigs_sym(std::move(s), n_eigs, vals, vecs);
    model.eigvals = vals;
    model.eigvecs.resize(n, vals.size());
    for (Eigen::Index k = 0; k < vals.size(); ++k) {
        Eigen::VectorXd v = dbar_isqrt.cwiseProduct(vecs.col(k));
        v /= v.norm();
        const double corr = (points.points.col(0).array() - points.points.col(0).mean())
                                .matrix()
                                .dot(v);
        if (corr < 0.0 || (corr == 0.0 && v(0) < 0.0)) v = -v;
        model.eigvecs.col(k) = v;
    }
    return model;
}

/// Out-of-sample evaluator of one diffusion-map coordinate:
/// Phi(x) = sum_i w(x, x_i) phi_i / lambda with the row-normalized kernel
/// weights w. Reproduces the training values exactly at training points.
struct CvInterpolant {
    std::shared_ptr<const DmapModel> model;
    int coord_index = 1;
    Eigen::VectorXd nystrom_weights;  // eigvecs(:, k) / eigvals(k)
};

inline CvInterpolant make_interpolant(std::shared_ptr<const DmapModel> model,
                                      int coord_index) {
    if (coord_index < 1 || coord_index >= model->eigvals.size())
        throw Error("make_interpolant: coord_index out of range");
    CvInterpolant interp;
    interp.model = std::move(model);
    interp.coord_index = coord_index;
    interp.nystrom_weights =
        interp.model->eigvecs.col(coord_index) / interp.model->eigvals(coord_index);
    return interp;
}

namespace detail {

/// Kernel row against the training set at x, evaluated with the max shifted
/// out of the exponent so far-field queries stay finite. For the Mahalanobis
/// metric the covariance at x is taken from the nearest training point
/// (piecewise constant), which keeps training-point evaluation exact.
struct KernelRow {
    Eigen::VectorXd g;       // deg_pow_j * exp(-(d2_j - d2_min) / (2 eps))
    Eigen::MatrixXd dd2;     // N x n, gradient of d2_j with respect to x
    double sum_g = 0.0;
};

inline KernelRow kernel_row(const DmapModel& m, const Eigen::VectorXd& x) {
    const Eigen::Index n = m.n_train();
    KernelRow row;
    row.g.resize(n);
    row.dd2.resize(n, m.point_dim());
    Eigen::VectorXd d2(n);
    const Eigen::MatrixXd* cx_pinv = nullptr;
    if (m.metric == DmapMetric::mahalanobis) {
        Eigen::Index nearest = 0;
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j) {
            const double dj = (m.train_points.row(j).transpose() - x).squaredNorm();
            if (dj < best) {
                best = dj;
                nearest = j;
            }
        }
        cx_pinv = &m.local_cov_pinv[nearest];
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::VectorXd diff = x - m.train_points.row(j).transpose();
        if (m.metric == DmapMetric::euclidean) {
            d2(j) = diff.squaredNorm();
            row.dd2.row(j) = 2.0 * diff.transpose();
        } else {
            const Eigen::MatrixXd msum = *cx_pinv + m.local_cov_pinv[j];
            d2(j) = 0.5 * diff.dot(msum * diff);
            row.dd2.row(j) = (msum * diff).transpose();
        }
    }
    const double d2min = d2.minCoeff();
    row.g = m.deg_pow.array() * ((d2min - d2.array()) / (2.0 * m.eps_kernel)).exp();
    row.sum_g = row.g.sum();
    return row;
}

}  // namespace detail

inline double nystrom_extend(const CvInterpolant& interp, const Eigen::VectorXd& x) {
    const DmapModel& m = *interp.model;
    if (x.size() != m.point_dim()) throw DimensionError("nystrom_extend: wrong dimension");
    const auto row = detail::kernel_row(m, x);
    return row.g.dot(interp.nystrom_weights) / row.sum_g;
}

/// Value and analytic gradient from one kernel evaluation (the biased drift
/// needs both at every step).
inline std::pair<double, Eigen::VectorXd> nystrom_value_and_gradient(
    const CvInterpolant& interp, const Eigen::VectorXd& x) {
    const DmapModel& m = *interp.model;
    if (x.size() != m.point_dim())
        throw DimensionError("nystrom_gradient: wrong dimension");
    const auto row = detail::kernel_row(m, x);
    // dg_j = -g_j * dd2_j / (2 eps); grad = (dg^T w) / sum_g - value * sum(dg) / sum_g
    const Eigen::VectorXd gw = row.g.cwiseProduct(interp.nystrom_weights);
    const double value = gw.sum() / row.sum_g;
    const double scale = -1.0 / (2.0 * m.eps_kernel);
    Eigen::VectorXd grad = scale / row.sum_g *
                           (row.dd2.transpose() * gw - value * (row.dd2.transpose() * row.g));
    return {value, std::move(grad)};
}

/// Analytic gradient of nystrom_extend.
inline Eigen::VectorXd nystrom_gradient(const CvInterpolant& interp,
                                        const Eigen::VectorXd& x) {
    return nystrom_value_and_gradient(interp, x).second;
}

}  // namespace condsamp
