#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "condsamp/errors.hpp"
#include "condsamp/sde.hpp"

// Conditional density estimation: histograms with exact count bookkeeping (so
// pooling parallel runs reproduces the histogram of the concatenated samples
// bit for bit), quadrature-backed reference PDFs, and the L1 error metric.

namespace condsamp {

struct HistogramEstimate {
    Eigen::VectorXd edges;    // B + 1, strictly increasing
    Eigen::VectorXd density;  // B, integrates to 1 over in-range samples
    std::vector<std::int64_t> counts;
    std::int64_t n_samples = 0;  // in-range samples
    std::int64_t n_below = 0;    // counted, not binned
    std::int64_t n_above = 0;

    int bins() const { return static_cast<int>(density.size()); }
    double bin_width(int b) const { return edges(b + 1) - edges(b); }
    double midpoint(int b) const { return 0.5 * (edges(b) + edges(b + 1)); }
};

/// Density-normalized histogram. Samples outside [lo, hi) are tallied in
/// n_below / n_above and excluded from the normalization.
inline HistogramEstimate histogram(std::span<const double> samples, int bins,
                                   std::pair<double, double> range) {
    if (bins < 1) throw Error("histogram: bins must be >= 1");
    const auto [lo, hi] = range;
    if (!(lo < hi)) throw Error("histogram: empty range");
    if (samples.empty()) throw Error("histogram: empty sample set");
    HistogramEstimate h;
    h.edges.resize(bins + 1);
    for (int b = 0; b <= bins; ++b)
        h.edges(b) = lo + (hi - lo) * static_cast<double>(b) / bins;
    h.counts.assign(bins, 0);
    const double inv_w = bins / (hi - lo);
    for (double s : samples) {
        if (s < lo) {
            ++h.n_below;
        } else if (s >= hi) {
            ++h.n_above;
        } else {
            int b = static_cast<int>((s - lo) * inv_w);
            if (b >= bins) b = bins - 1;  // right edge rounding
            ++h.counts[b];
            ++h.n_samples;
        }
    }
    h.density.resize(bins);
    for (int b = 0; b < bins; ++b)
        h.density(b) = h.n_samples > 0
                           ? static_cast<double>(h.counts[b]) /
                                 (static_cast<double>(h.n_samples) * h.bin_width(b))
                           : 0.0;
    return h;
}

inline HistogramEstimate histogram(const Eigen::VectorXd& samples, int bins,
                                   std::pair<double, double> range) {
    return histogram(std::span<const double>(samples.data(),
                                             static_cast<std::size_t>(samples.size())),
                     bins, range);
}

/// Count-weighted combination of estimates over identical edges. Because the
/// integer counts are summed, the result equals the histogram of the
/// concatenated raw samples exactly, in any combination order.
inline HistogramEstimate pool(const std::vector<HistogramEstimate>& estimates) {
    if (estimates.empty()) throw Error("pool: no estimates");
    HistogramEstimate out = estimates.front();
    for (std::size_t k = 1; k < estimates.size(); ++k) {
        const auto& e = estimates[k];
        if (e.edges.size() != out.edges.size() || (e.edges - out.edges).cwiseAbs().maxCoeff() != 0.0)
            throw Error("pool: mismatched bin edges");
        for (int b = 0; b < out.bins(); ++b) out.counts[b] += e.counts[b];
        out.n_samples += e.n_samples;
        out.n_below += e.n_below;
        out.n_above += e.n_above;
    }
    for (int b = 0; b < out.bins(); ++b)
        out.density(b) = out.n_samples > 0
                             ? static_cast<double>(out.counts[b]) /
                                   (static_cast<double>(out.n_samples) * out.bin_width(b))
                             : 0.0;
    return out;
}

struct ReferencePdf {
    std::function<double(double)> eval;
    double lo = 0.0, hi = 0.0;
    double norm_check = 0.0;  // quadrature of eval over [lo, hi]
};

namespace detail {

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a,
                                   double b, double fa, double fm, double fb, double whole,
                                   double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-10, int max_depth = 48) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // split into a few panels first so narrow features are not stepped over
    const int panels = 64;
    double total = 0.0;
    for (int i = 0; i < panels; ++i) {
        const double x0 = a + (b - a) * i / panels;
        const double x1 = a + (b - a) * (i + 1) / panels;
        const double f0 = f(x0), f1 = f(x1), fm2 = f(0.5 * (x0 + x1));
        const double w = (x1 - x0) / 6.0 * (f0 + 4.0 * fm2 + f1);
        total += detail::adaptive_simpson_rec(f, x0, x1, f0, fm2, f1, w, tol / panels,
                                              max_depth);
    }
    (void)whole;
    return total;
}

/// Sum over bins of |density - ref(midpoint)| * width. Lies in [0, 2] for
/// normalized inputs.
inline double l1_error(const HistogramEstimate& est, const ReferencePdf& ref) {
    double err = 0.0;
    for (int b = 0; b < est.bins(); ++b)
        err += std::fabs(est.density(b) - ref.eval(est.midpoint(b))) * est.bin_width(b);
    return err;
}

namespace detail {

/// Fast-coordinate potential of the two-basin system, built by integrating the
/// negated z2-drift with per-interval Simpson (midpoint) quadrature on a
/// uniform grid, plus cubic Hermite evaluation between nodes.
struct TabulatedPotential {
    double lo, hi, step;
    std::vector<double> v;       // potential at nodes
    std::vector<double> dv;      // derivative (= -drift) at nodes
    double v_min = 0.0;

    TabulatedPotential(const std::function<double(double)>& drift, double lo_, double hi_,
                       int n_grid)
        : lo(lo_), hi(hi_), step((hi_ - lo_) / (n_grid - 1)), v(n_grid), dv(n_grid) {
        v[0] = 0.0;
        dv[0] = -drift(lo);
        for (int i = 1; i < n_grid; ++i) {
            const double a = lo + (i - 1) * step, b = lo + i * step;
            const double fa = -drift(a), fm = -drift(0.5 * (a + b)), fb = -drift(b);
            v[i] = v[i - 1] + step / 6.0 * (fa + 4.0 * fm + fb);
            dv[i] = fb;
        }
        v_min = *std::min_element(v.begin(), v.end());
    }

    double operator()(double z) const {
        if (z <= lo) return v.front() + dv.front() * (z - lo);
        if (z >= hi) return v.back() + dv.back() * (z - hi);
        const int i = std::min<int>(static_cast<int>((z - lo) / step),
                                    static_cast<int>(v.size()) - 2);
        const double t = (z - (lo + i * step)) / step;
        const double h00 = (1 + 2 * t) * (1 - t) * (1 - t);
        const double h10 = t * (1 - t) * (1 - t);
        const double h01 = t * t * (3 - 2 * t);
        const double h11 = t * t * (t - 1);
        return h00 * v[i] + h10 * step * dv[i] + h01 * v[i + 1] + h11 * step * dv[i + 1];
    }
};

}  // namespace detail

/// True stationary law of the fast coordinate given the slow value.
/// ou2d: Normal(1, a4^2/(2 a3)). doublewell: density proportional to
/// exp(-2 V(z2; z1) / a3^2) with V from quadrature of the negated drift.
inline ReferencePdf true_fast_pdf(const std::string& system_id, double slow_value,
                                  const std::map<std::string, double>& params = {},
                                  std::pair<double, double> support = {0.0, 0.0}) {
    SdeSystem sys = make_benchmark(system_id, params);
    ReferencePdf ref;
    if (system_id == "ou2d") {
        const double a3 = sys.params.at("a3"), a4 = sys.params.at("a4");
        const double var = a4 * a4 / (2.0 * a3);
        const double sd = std::sqrt(var);
        const double mean = 1.0;
        ref.lo = support.first < support.second ? support.first : mean - 6.0 * sd;
        ref.hi = support.first < support.second ? support.second : mean + 6.0 * sd;
        ref.eval = [mean, var](double x) {
            return std::exp(-0.5 * (x - mean) * (x - mean) / var) /
                   std::sqrt(2.0 * M_PI * var);
        };
    } else if (system_id == "doublewell") {
        const double a3 = sys.params.at("a3");
        const double h = sys.params.at("h");
        const double z1 = slow_value;
        ref.lo = support.first < support.second ? support.first : -2.5;
        ref.hi = support.first < support.second ? support.second : 2.5;
        auto drift = [z1, h](double z2) { return detail::doublewell_drift_z2(z1, z2, h); };
        auto pot = std::make_shared<detail::TabulatedPotential>(drift, ref.lo, ref.hi, 10001);
        const double two_over_s2 = 2.0 / (a3 * a3);
        const double vmin = pot->v_min;
        auto unnorm = [pot, two_over_s2, vmin](double z) {
            return std::exp(-two_over_s2 * ((*pot)(z)-vmin));
        };
        const double z_norm = adaptive_simpson(unnorm, ref.lo, ref.hi, 1e-12);
        ref.eval = [unnorm, z_norm](double z) { return unnorm(z) / z_norm; };
    } else {
        throw Error("true_fast_pdf: unsupported system '" + system_id + "'");
    }
    ref.norm_check = adaptive_simpson(ref.eval, ref.lo, ref.hi, 1e-10);
    return ref;
}

}  // namespace condsamp
