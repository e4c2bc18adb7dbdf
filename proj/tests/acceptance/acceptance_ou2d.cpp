#include "acceptance_util.hpp"

#include "condsamp/bias.hpp"
#include "condsamp/ccgan.hpp"
#include "condsamp/sde.hpp"

// Criteria 1 and 2: conditional-moment reproduction by the trained generator
// and by umbrella sampling on the slow/fast benchmark, and the distributional
// agreement between the two at the conditioning value x1 = 10.

using namespace condsamp;
using acceptance::fmt;
using acceptance::report;

namespace {

const GanModel& trained_model() {
    static const GanModel model = [] {
        const SdeSystem sys = make_benchmark("ou2d");
        const Trajectory traj = integrate(sys, Eigen::Vector2d(0, 1), 30000, 1.0, 1001);
        SampleSet data = to_sample_set(traj, /*label_col=*/0);
        TrainConfig cfg;
        cfg.epochs = 2500;
        cfg.batch_size = 128;
        cfg.vicinity_target = 25.0;
        cfg.seed = 12;
        return train_ccgan(data, "table1", 1, cfg);
    }();
    return model;
}

}  // namespace

TEST_CASE("criterion 1: conditional moments at x1 = 10") {
    const SampleSet gen = sample_ccgan(trained_model(), 10.0, 10000, 7);
    const Eigen::VectorXd g2 = gen.points.col(1);
    const double g_mean = g2.mean();
    const double g_var = (g2.array() - g_mean).square().mean();
    report("criterion 1a (generator moments)",
           std::fabs(g_mean - 1.0) <= 0.1 && std::fabs(g_var - 0.05) <= 0.025,
           "mean(x2)=" + fmt(g_mean) + " var(x2)=" + fmt(g_var) +
               " bounds: |mean-1|<=0.1 |var-0.05|<=0.025");

    const SdeSystem sys = make_benchmark("ou2d");
    const BiasSpec spec = BiasSpec::raw(0, 1.0, 10.0);
    const SampleSet us =
        run_umbrella(sys, spec, Eigen::Vector2d(0.0, 1.0), 110000, 10000, 1.0, 21);
    const Eigen::VectorXd u2 = us.points.col(1);
    const double u_mean = u2.mean();
    const double u_var = (u2.array() - u_mean).square().mean();
    report("criterion 1b (umbrella moments)",
           std::fabs(u_mean - 1.0) <= 0.1 && std::fabs(u_var - 0.05) <= 0.025,
           "mean(x2)=" + fmt(u_mean) + " var(x2)=" + fmt(u_var) +
               " bounds: |mean-1|<=0.1 |var-0.05|<=0.025");
}

TEST_CASE("criterion 2: umbrella vs generator distributional agreement") {
    const SampleSet gen = sample_ccgan(trained_model(), 10.0, 10000, 8);
    const SdeSystem sys = make_benchmark("ou2d");
    const BiasSpec spec = BiasSpec::raw(0, 1.0, 10.0);
    const SampleSet us =
        run_umbrella(sys, spec, Eigen::Vector2d(0.0, 1.0), 110000, 10000, 1.0, 22);
    // thin the chain to 10^4 roughly independent draws
    const std::vector<double> us_x2 = acceptance::column(us.points, 1, 0, 10);
    const std::vector<double> gan_x2 = acceptance::column(gen.points, 1);
    const double ks = acceptance::ks_statistic(us_x2, gan_x2);
    report("criterion 2 (US vs generator KS)", ks <= 0.1,
           "KS=" + fmt(ks) + " at 10^4 samples each, bound 0.1");
}
