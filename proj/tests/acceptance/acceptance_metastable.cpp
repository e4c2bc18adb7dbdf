#include "acceptance_util.hpp"

#include <vector>

#include "condsamp/ccgan.hpp"
#include "condsamp/density.hpp"
#include "condsamp/pipeline.hpp"
#include "condsamp/sde.hpp"

// Criteria 6 and 7: the metastable two-basin benchmark at barrier height
// h = 8. A single umbrella chain cannot cross the barrier, so its density
// estimate stays one-sided (high error, small variance), while generator-
// seeded parallel chains populate both basins and converge.

using namespace condsamp;
using acceptance::fmt;
using acceptance::report;

namespace {

// training set: short unbiased bursts started from both basins across a range
// of slow values, so the generator sees a balanced two-basin conditional
const GanModel& trained_model() {
    static const GanModel model = [] {
        const SdeSystem sys = make_benchmark("doublewell", {{"h", 8.0}});
        const int n_traj = 120, n_steps = 260, warm = 10;
        std::vector<Eigen::VectorXd> x0s;
        RngStream init_rng(601);
        for (int k = 0; k < n_traj; ++k)
            x0s.push_back(Eigen::Vector2d(3.0 + 4.0 * init_rng.next_uniform(),
                                          k % 2 == 0 ? 1.0 : -1.0));
        const auto ens = integrate_ensemble(sys, x0s, n_steps, 1e-3, 602);
        std::vector<SampleSet> parts;
        for (const auto& traj : ens)
            parts.push_back(to_sample_set(traj, /*label_col=*/0).slice(warm, n_steps + 1));
        SampleSet data = SampleSet::concat(parts);  // 30,120 points
        TrainConfig cfg;
        cfg.epochs = 2500;
        cfg.batch_size = 128;
        cfg.vicinity_target = 25.0;
        cfg.seed = 603;
        return train_ccgan(data, "table2", 1, cfg);
    }();
    return model;
}

}  // namespace

TEST_CASE("criterion 6: convergence advantage under metastability") {
    BenchmarkConfig cfg;
    cfg.system = make_benchmark("doublewell", {{"h", 8.0}});
    cfg.gan = &trained_model();
    cfg.slow_target = 5.0;
    cfg.k_spring = 100.0;
    cfg.dt = 1e-3;
    cfg.budgets = {1000, 10000, 100000};
    cfg.n_trials = 50;
    cfg.n_chains = 10;
    cfg.hist_bins = 260;
    cfg.hist_range = {-1.3, 1.3};
    cfg.us_start = Eigen::Vector2d(5.0, -1.0);
    cfg.seed = 604;
    cfg.reference = true_fast_pdf("doublewell", 5.0, {{"h", 8.0}});
    const auto rows = convergence_benchmark(cfg);
    const auto cells = summarize_benchmark(rows);
    auto cell = [&](const std::string& m, long b) {
        for (const auto& c : cells)
            if (c.method == m && c.budget == b) return c;
        throw Error("missing benchmark cell");
    };
    bool coupled_beats_us = true;
    std::string detail;
    for (long b : cfg.budgets) {
        const auto cu = cell("coupled", b), uu = cell("us_only", b);
        coupled_beats_us = coupled_beats_us && cu.mean < uu.mean;
        detail += "budget " + std::to_string(b) + ": coupled " + fmt(cu.mean) +
                  " vs us " + fmt(uu.mean) + "; ";
    }
    report("criterion 6a (coupled beats single-chain US at every budget)",
           coupled_beats_us, detail + "50 trials each");

    const auto trapped = cell("us_only", 10000);
    const double cv = trapped.stddev / trapped.mean;
    report("criterion 6b (single-chain trapping signature)",
           trapped.mean >= 0.5 && cv <= 0.2,
           "us_only at budget 10^4: mean L1=" + fmt(trapped.mean) + " cv=" + fmt(cv) +
               " bounds: mean>=0.5 cv<=0.2");
}

TEST_CASE("criterion 7: equal-depth bimodality at z1 = 5") {
    CouplingConfig cfg;
    cfg.system = make_benchmark("doublewell", {{"h", 8.0}});
    cfg.gan = &trained_model();
    cfg.bias = BiasSpec::raw(0, 100.0, 5.0);
    cfg.n_chains = 400;
    cfg.steps_per_chain = 250;  // 10^5 force evaluations total
    cfg.dt = 1e-3;
    cfg.seed = 605;
    cfg.target_label = 5.0;
    cfg.fast_coord = 1;
    cfg.hist_bins = 520;
    cfg.hist_range = {{-1.3, 1.3}};
    const auto [samples, hist] = run_coupled_sampling(cfg);

    // locate the two highest local maxima of the pooled density
    int best_plus = -1, best_minus = -1;
    for (int b = 0; b < hist.bins(); ++b) {
        if (hist.midpoint(b) > 0.0) {
            if (best_plus < 0 || hist.density(b) > hist.density(best_plus)) best_plus = b;
        } else {
            if (best_minus < 0 || hist.density(b) > hist.density(best_minus)) best_minus = b;
        }
    }
    const double w = hist.bin_width(0);
    const double mode_plus = hist.midpoint(best_plus);
    const double mode_minus = hist.midpoint(best_minus);
    const bool modes_ok = std::fabs(mode_plus - 1.0) <= w && std::fabs(mode_minus + 1.0) <= w;
    report("criterion 7a (modes at +-1 within one bin)", modes_ok,
           "modes at " + fmt(mode_minus) + ", " + fmt(mode_plus) + " bin width " + fmt(w));

    const ReferencePdf ref = true_fast_pdf("doublewell", 5.0, {{"h", 8.0}});
    const double l1 = l1_error(hist, ref);
    report("criterion 7b (L1 against the quadrature reference)", l1 <= 0.15,
           "L1=" + fmt(l1) + " at budget 10^5, bound 0.15");
}
