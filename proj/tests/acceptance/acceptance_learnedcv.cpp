#include "acceptance_util.hpp"

#include <memory>
#include <vector>

#include "condsamp/bias.hpp"
#include "condsamp/manifold.hpp"
#include "condsamp/parallel.hpp"
#include "condsamp/sde.hpp"

// Criterion 5: umbrella sampling on the learned coordinate. A Mahalanobis
// diffusion map is fitted on a transformed-system band around x1 = 10, the
// restraint targets the interpolated coordinate value of the x1 = 10 point,
// and the sampled pre-images must average to x1 = 10 within 0.25.

using namespace condsamp;
using acceptance::fmt;
using acceptance::report;

TEST_CASE("criterion 5: learned-coordinate umbrella at x1 = 10") {
    const SdeSystem hm = make_benchmark("halfmoon");
    const TransformMap map = halfmoon_map();

    // band data x1 in about [8.5, 11.5], simulated directly in the transformed
    // coordinates
    const Eigen::VectorXd y0 = map.forward(Eigen::Vector2d(8.5, 1.0));
    const Trajectory traj = integrate(hm, y0, 60000, 5e-2, 501);
    const SampleSet data = to_sample_set(traj).thin(20).slice(0, 3000);

    std::vector<Eigen::MatrixXd> covs(data.size());
    parallel_for(static_cast<std::size_t>(data.size()), [&](std::size_t i) {
        covs[i] = estimate_local_covariance(hm, data.points.row(i).transpose(), 150, 1e-4,
                                            502, i);
    });
    std::vector<Eigen::MatrixXd> pinvs(covs.size());
    for (std::size_t i = 0; i < covs.size(); ++i) pinvs[i] = pinv_psd(covs[i]);
    std::vector<double> d2s;
    for (Eigen::Index i = 0; i < data.size(); i += 6)
        for (Eigen::Index j = i + 6; j < data.size(); j += 6)
            d2s.push_back(mahalanobis_sq_pinv(data.points.row(i).transpose(),
                                              data.points.row(j).transpose(), pinvs[i],
                                              pinvs[j]));
    std::nth_element(d2s.begin(), d2s.begin() + d2s.size() / 2, d2s.end());
    const double eps = d2s[d2s.size() / 2] * 0.01;

    auto model = std::make_shared<const DmapModel>(
        fit_dmap(data, DmapMetric::mahalanobis, eps, 1.0, 3, &covs));
    auto interp = std::make_shared<const CvInterpolant>(make_interpolant(model, 1));

    // pre-image slow values of the training band, for the sanity of the fit
    Eigen::VectorXd x1_pre(data.size());
    for (Eigen::Index i = 0; i < data.size(); ++i)
        x1_pre(i) = halfmoon_inverse(data.points.row(i).transpose(), 10.0)(0);
    INFO("band spearman " << acceptance::spearman(model->eigvecs.col(1), x1_pre));

    // restraint target: the learned coordinate at the image of (10, 1)
    const double phi0 = nystrom_extend(*interp, map.forward(Eigen::Vector2d(10.0, 1.0)));
    const BiasSpec spec = BiasSpec::learned(interp, 1000.0, phi0);
    const SampleSet run = run_umbrella(hm, spec, map.forward(Eigen::Vector2d(9.0, 1.0)),
                                       20000, 2000, 5e-2, 503);

    double mean_x1 = 0.0;
    for (Eigen::Index i = 0; i < run.size(); ++i)
        mean_x1 += halfmoon_inverse(run.points.row(i).transpose(), 10.0)(0);
    mean_x1 /= static_cast<double>(run.size());
    report("criterion 5 (learned-CV umbrella pre-image)", std::fabs(mean_x1 - 10.0) <= 0.25,
           "mean pre-image x1=" + fmt(mean_x1) + " target 10 +- 0.25");
}
