#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "condsamp/errors.hpp"
#include "condsamp/neural.hpp"
#include "condsamp/rng.hpp"
#include "condsamp/sample_set.hpp"

// Continuous-conditional GAN trained with the hard vicinal discriminator
// loss. For each batch element j the label is perturbed once per step,
// y~_j = y_j + eps (eps ~ N(0, sigma^2)), and the term averages
// log D(x_i, y~_j) over the vicinity {i : |y~_j - y_i| <= kappa}, normalized
// by the vicinity count. Empty vicinities are skipped and the outer
// normalization uses the number of non-empty terms. The generator objective
// is the opposing sign of the fake term.

namespace condsamp {

struct HvdlParams {
    double kappa_vicinity = 0.0;
    double sigma_label = 0.0;
    double c1 = 1.0;
    double c2 = 1.0;
};

struct GanModel {
    DenseNet generator;
    DenseNet discriminator;
    int noise_dim = 1;
    int data_dim = 0;
    double label_lo = 0.0, label_hi = 1.0;
    HvdlParams hvdl;
    Eigen::VectorXd data_shift, data_scale;  // generator works on standardized data
    std::string arch_id;

    double normalize_label(double y) const { return (y - label_lo) / (label_hi - label_lo); }
    double denormalize_label(double u) const { return label_lo + u * (label_hi - label_lo); }
};

struct TrainConfig {
    int epochs = 5000;  // one epoch = one discriminator/generator update cycle
    int batch_size = 512;
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    std::uint64_t seed = 0;
    int d_steps_per_g_step = 1;
    double vicinity_target = 50.0;  // average in-batch vicinity size behind kappa
    double kappa_override = 0.0;    // > 0 pins kappa (normalized label units)
    double sigma_override = -1.0;   // >= 0 pins sigma (normalized label units)
    bool early_stop = false;
    int early_stop_window = 250;
    double early_stop_tol = 1e-4;
};

struct TrainLog {
    std::vector<double> d_loss, g_loss;
};

/// Architectures by id. "table1": generator 16-32-64-128-256 with batchnorm
/// and identity activations between the dense layers; "table2": generator
/// 200x5 with batchnorm + leaky ReLU(0.2). Both discriminators are 100x5 ReLU
/// with a sigmoid output on input (data, label).
inline GanModel make_gan(const std::string& arch_id, int data_dim, int noise_dim,
                         std::uint64_t seed) {
    std::vector<int> g_hidden;
    Activation g_act;
    if (arch_id == "table1") {
        g_hidden = {16, 32, 64, 128, 256};
        g_act = Activation::identity;
    } else if (arch_id == "table2") {
        g_hidden = {200, 200, 200, 200, 200};
        g_act = Activation::leaky_relu;
    } else {
        throw Error("make_gan: unknown architecture '" + arch_id + "'");
    }
    GanModel m;
    m.arch_id = arch_id;
    m.data_dim = data_dim;
    m.noise_dim = noise_dim;
    RngStream rng(seed, /*stream=*/0xA11C);
    int in = noise_dim + 1;
    for (int width : g_hidden) {
        m.generator.layers.push_back(make_dense_layer(in, width, g_act, true, rng));
        in = width;
    }
    m.generator.layers.push_back(
        make_dense_layer(in, data_dim, Activation::identity, false, rng));
    in = data_dim + 1;
    for (int k = 0; k < 5; ++k) {
        m.discriminator.layers.push_back(
            make_dense_layer(in, 100, Activation::relu, false, rng));
        in = 100;
    }
    m.discriminator.layers.push_back(
        make_dense_layer(in, 1, Activation::sigmoid, false, rng));
    m.data_shift = Eigen::VectorXd::Zero(data_dim);
    m.data_scale = Eigen::VectorXd::Ones(data_dim);
    return m;
}

namespace detail {

inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

/// log(sigmoid(x)) and log(1 - sigmoid(x)) evaluated from the logit.
inline double log_sigmoid(double x) { return -softplus(-x); }
inline double log_one_minus_sigmoid(double x) { return -softplus(x); }

struct VicinityPairs {
    std::vector<int> sample_index;     // i of each pair
    std::vector<int> term_index;       // j of each pair
    std::vector<double> pair_weight;   // 1 / (|V_j| * #nonempty terms)
    std::vector<double> query_label;   // y_j + eps_j of each pair
    int nonempty_terms = 0;
};

/// Pairs (i, j) with |y_j + eps_j - y_i| <= kappa, weighted for the HVDL
/// double sum. `perturbed` holds y_j + eps_j.
inline VicinityPairs build_vicinity_pairs(const Eigen::VectorXd& labels,
                                          const Eigen::VectorXd& perturbed, double kappa) {
    const int n = static_cast<int>(labels.size());
    VicinityPairs out;
    std::vector<int> counts(n, 0);
    for (int j = 0; j < n; ++j) {
        int c = 0;
        for (int i = 0; i < n; ++i)
            if (std::fabs(perturbed(j) - labels(i)) <= kappa) ++c;
        counts[j] = c;
        if (c > 0) ++out.nonempty_terms;
    }
    if (out.nonempty_terms == 0) return out;
    for (int j = 0; j < n; ++j) {
        if (counts[j] == 0) continue;
        const double w = 1.0 / (static_cast<double>(counts[j]) * out.nonempty_terms);
        for (int i = 0; i < n; ++i) {
            if (std::fabs(perturbed(j) - labels(i)) <= kappa) {
                out.sample_index.push_back(i);
                out.term_index.push_back(j);
                out.pair_weight.push_back(w);
                out.query_label.push_back(perturbed(j));
            }
        }
    }
    return out;
}

/// Assemble the discriminator input rows (x_i, y~_j) for a pair set.
inline Eigen::MatrixXd pair_rows(const Eigen::MatrixXd& x, const VicinityPairs& pairs) {
    Eigen::MatrixXd rows(pairs.sample_index.size(), x.cols() + 1);
    for (std::size_t r = 0; r < pairs.sample_index.size(); ++r) {
        rows.block(r, 0, 1, x.cols()) = x.row(pairs.sample_index[r]);
        rows(r, x.cols()) = pairs.query_label[r];
    }
    return rows;
}

inline Eigen::VectorXd perturb_labels(const Eigen::VectorXd& labels, double sigma,
                                      RngStream& rng) {
    Eigen::VectorXd out(labels.size());
    for (Eigen::Index j = 0; j < labels.size(); ++j)
        out(j) = labels(j) + (sigma > 0.0 ? sigma * rng.next_normal() : 0.0);
    return out;
}

/// Discriminator logits for rows (net's final sigmoid is bypassed so the loss
/// can be evaluated in a saturation-safe form).
inline Eigen::VectorXd logits(DenseNet& d, const Eigen::MatrixXd& rows, bool train,
                              ForwardCache* cache = nullptr) {
    DenseLayer& last = d.layers.back();
    const Activation saved = last.act;
    last.act = Activation::identity;
    Eigen::MatrixXd out = forward(d, rows, train, cache);
    last.act = saved;
    return out.col(0);
}

}  // namespace detail

/// The two hard-vicinal loss values for given real and fake batches, with
/// labels already normalized. One label perturbation is drawn per term from
/// `rng`. Returns (d_loss, g_loss); g_loss is the negated fake term.
inline std::pair<double, double> hvdl_losses(GanModel& model,
                                             const Eigen::MatrixXd& x_real,
                                             const Eigen::VectorXd& y_real,
                                             const Eigen::MatrixXd& x_fake,
                                             const Eigen::VectorXd& y_fake,
                                             RngStream& rng) {
    if (x_real.rows() == 0 || x_fake.rows() == 0) throw Error("hvdl_losses: empty batch");
    const HvdlParams& hv = model.hvdl;
    const Eigen::VectorXd pr = detail::perturb_labels(y_real, hv.sigma_label, rng);
    const Eigen::VectorXd pg = detail::perturb_labels(y_fake, hv.sigma_label, rng);
    const auto pairs_r = detail::build_vicinity_pairs(y_real, pr, hv.kappa_vicinity);
    const auto pairs_g = detail::build_vicinity_pairs(y_fake, pg, hv.kappa_vicinity);
    double real_term = 0.0, fake_term = 0.0;
    if (!pairs_r.sample_index.empty()) {
        const Eigen::VectorXd lr =
            detail::logits(model.discriminator, detail::pair_rows(x_real, pairs_r), false);
        for (std::size_t r = 0; r < pairs_r.pair_weight.size(); ++r)
            real_term += pairs_r.pair_weight[r] * detail::log_sigmoid(lr(r));
    }
    if (!pairs_g.sample_index.empty()) {
        const Eigen::VectorXd lg =
            detail::logits(model.discriminator, detail::pair_rows(x_fake, pairs_g), false);
        for (std::size_t r = 0; r < pairs_g.pair_weight.size(); ++r)
            fake_term += pairs_g.pair_weight[r] * detail::log_one_minus_sigmoid(lg(r));
    }
    const double d_loss = -hv.c1 * real_term - hv.c2 * fake_term;
    const double g_loss = hv.c2 * fake_term;
    return {d_loss, g_loss};
}

/// Default vicinity radius: the smallest kappa whose dataset-average neighbor
/// count corresponds to `target` expected neighbors in a batch of the given
/// size. Labels must be normalized.
inline double default_kappa(const Eigen::VectorXd& labels, int batch_size, double target) {
    std::vector<double> sorted(labels.data(), labels.data() + labels.size());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    const double required = target * n / static_cast<double>(batch_size);
    auto avg_count = [&](double kappa) {
        double total = 0.0;
        for (double y : sorted) {
            const auto lo = std::lower_bound(sorted.begin(), sorted.end(), y - kappa);
            const auto hi = std::upper_bound(sorted.begin(), sorted.end(), y + kappa);
            total += static_cast<double>(hi - lo);
        }
        return total / n;
    };
    double lo = 0.0, hi = 1.0;
    while (avg_count(hi) < required && hi < 64.0) hi *= 2.0;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (avg_count(mid) >= required ? hi : lo) = mid;
    }
    return hi;
}

/// Train on a labeled sample set. Labels are normalized to [0,1] over their
/// observed range, data is standardized per dimension; both transforms are
/// stored in the model. Aborts with the epoch index if a loss goes non-finite.
inline GanModel train_ccgan(const SampleSet& data, const std::string& arch_id,
                            int noise_dim, const TrainConfig& cfg, TrainLog* log = nullptr) {
    if (!data.labels) throw Error("train_ccgan: data has no labels");
    if (!data.points.allFinite()) throw Error("train_ccgan: non-finite training data");
    const Eigen::Index n = data.size();
    GanModel model = make_gan(arch_id, static_cast<int>(data.dim()), noise_dim, cfg.seed);

    model.label_lo = data.labels->minCoeff();
    model.label_hi = data.labels->maxCoeff();
    if (model.label_hi <= model.label_lo) model.label_hi = model.label_lo + 1.0;
    Eigen::VectorXd y_norm(n);
    for (Eigen::Index i = 0; i < n; ++i) y_norm(i) = model.normalize_label((*data.labels)(i));

    model.data_shift = data.points.colwise().mean();
    Eigen::VectorXd sd =
        ((data.points.rowwise() - model.data_shift.transpose()).array().square().colwise().mean())
            .sqrt();
    model.data_scale = sd.cwiseMax(1e-12);
    Eigen::MatrixXd x_std =
        (data.points.rowwise() - model.data_shift.transpose()).array().rowwise() /
        model.data_scale.transpose().array();

    model.hvdl.kappa_vicinity =
        cfg.kappa_override > 0.0
            ? cfg.kappa_override
            : default_kappa(y_norm, cfg.batch_size, cfg.vicinity_target);
    model.hvdl.sigma_label =
        cfg.sigma_override >= 0.0
            ? cfg.sigma_override
            : std::pow(static_cast<double>(n), -0.8);

    RngStream rng(cfg.seed, /*stream=*/0x7141);
    AdamState d_state, g_state;
    d_state.init(model.discriminator);
    g_state.init(model.generator);
    const HvdlParams& hv = model.hvdl;
    const int nb = cfg.batch_size;

    auto draw_batch = [&](Eigen::MatrixXd& x, Eigen::VectorXd& y) {
        x.resize(nb, model.data_dim);
        y.resize(nb);
        for (int r = 0; r < nb; ++r) {
            const auto idx = static_cast<Eigen::Index>(rng.next_u64() % n);
            x.row(r) = x_std.row(idx);
            y(r) = y_norm(idx);
        }
    };
    auto draw_gen_input = [&](const Eigen::VectorXd& y) {
        Eigen::MatrixXd gin(y.size(), model.noise_dim + 1);
        for (Eigen::Index r = 0; r < y.size(); ++r) {
            for (int k = 0; k < model.noise_dim; ++k) gin(r, k) = rng.next_normal();
            gin(r, model.noise_dim) = y(r);
        }
        return gin;
    };

    if (log) {
        log->d_loss.clear();
        log->g_loss.clear();
    }
    double early_accum = 0.0;
    double early_prev = std::numeric_limits<double>::infinity();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double d_loss_val = 0.0;
        for (int ds = 0; ds < cfg.d_steps_per_g_step; ++ds) {
            Eigen::MatrixXd xr;
            Eigen::VectorXd yr;
            draw_batch(xr, yr);
            Eigen::VectorXd yg(nb);
            for (int r = 0; r < nb; ++r)
                yg(r) = y_norm(static_cast<Eigen::Index>(rng.next_u64() % n));
            const Eigen::MatrixXd xg = forward(model.generator, draw_gen_input(yg), true);

            const Eigen::VectorXd pr = detail::perturb_labels(yr, hv.sigma_label, rng);
            const Eigen::VectorXd pg = detail::perturb_labels(yg, hv.sigma_label, rng);
            const auto pairs_r = detail::build_vicinity_pairs(yr, pr, hv.kappa_vicinity);
            const auto pairs_g = detail::build_vicinity_pairs(yg, pg, hv.kappa_vicinity);

            Gradients d_grads;
            d_grads.setZero(model.discriminator);
            double loss = 0.0;
            for (int side = 0; side < 2; ++side) {
                const auto& pairs = side == 0 ? pairs_r : pairs_g;
                if (pairs.sample_index.empty()) continue;
                const Eigen::MatrixXd rows =
                    detail::pair_rows(side == 0 ? xr : xg, pairs);
                ForwardCache cache;
                const Eigen::VectorXd lg =
                    detail::logits(model.discriminator, rows, true, &cache);
                Eigen::MatrixXd up(rows.rows(), 1);
                for (Eigen::Index r = 0; r < lg.size(); ++r) {
                    const double w = pairs.pair_weight[r];
                    const double sig = 1.0 / (1.0 + std::exp(-lg(r)));
                    if (side == 0) {
                        loss -= hv.c1 * w * detail::log_sigmoid(lg(r));
                        up(r, 0) = -hv.c1 * w * (1.0 - sig);
                    } else {
                        loss -= hv.c2 * w * detail::log_one_minus_sigmoid(lg(r));
                        up(r, 0) = hv.c2 * w * sig;
                    }
                }
                Gradients part;
                // final layer acts as identity during the logit pass
                DenseLayer& last = model.discriminator.layers.back();
                const Activation saved = last.act;
                last.act = Activation::identity;
                backward(model.discriminator, cache, up, part);
                last.act = saved;
                for (std::size_t li = 0; li < d_grads.layers.size(); ++li) {
                    d_grads.layers[li].d_weight += part.layers[li].d_weight;
                    d_grads.layers[li].d_bias += part.layers[li].d_bias;
                }
            }
            if (!std::isfinite(loss))
                throw Error("train_ccgan: non-finite discriminator loss at epoch " +
                            std::to_string(epoch));
            adam_step(model.discriminator, d_grads, d_state, cfg.lr, cfg.beta1, cfg.beta2);
            d_loss_val = loss;
        }

        // generator step on a fresh batch
        Eigen::VectorXd yg(nb);
        for (int r = 0; r < nb; ++r)
            yg(r) = y_norm(static_cast<Eigen::Index>(rng.next_u64() % n));
        ForwardCache g_cache;
        const Eigen::MatrixXd gin = draw_gen_input(yg);
        const Eigen::MatrixXd xg = forward(model.generator, gin, true, &g_cache);
        const Eigen::VectorXd pg = detail::perturb_labels(yg, hv.sigma_label, rng);
        const auto pairs = detail::build_vicinity_pairs(yg, pg, hv.kappa_vicinity);
        double g_loss_val = 0.0;
        if (!pairs.sample_index.empty()) {
            const Eigen::MatrixXd rows = detail::pair_rows(xg, pairs);
            ForwardCache d_cache;
            const Eigen::VectorXd lg =
                detail::logits(model.discriminator, rows, true, &d_cache);
            Eigen::MatrixXd up(rows.rows(), 1);
            for (Eigen::Index r = 0; r < lg.size(); ++r) {
                const double w = pairs.pair_weight[r];
                const double sig = 1.0 / (1.0 + std::exp(-lg(r)));
                g_loss_val += hv.c2 * w * detail::log_one_minus_sigmoid(lg(r));
                up(r, 0) = -hv.c2 * w * sig;  // d/dlogit of w*log(1-sigmoid)
            }
            Gradients d_part;
            DenseLayer& last = model.discriminator.layers.back();
            const Activation saved = last.act;
            last.act = Activation::identity;
            const Eigen::MatrixXd d_input = backward(model.discriminator, d_cache, up, d_part);
            last.act = saved;
            Eigen::MatrixXd dxg = Eigen::MatrixXd::Zero(nb, model.data_dim);
            for (std::size_t r = 0; r < pairs.sample_index.size(); ++r)
                dxg.row(pairs.sample_index[r]) +=
                    d_input.block(static_cast<Eigen::Index>(r), 0, 1, model.data_dim);
            Gradients g_grads;
            backward(model.generator, g_cache, dxg, g_grads);
            adam_step(model.generator, g_grads, g_state, cfg.lr, cfg.beta1, cfg.beta2);
        }
        if (!std::isfinite(g_loss_val))
            throw Error("train_ccgan: non-finite generator loss at epoch " +
                        std::to_string(epoch));
        if (log) {
            log->d_loss.push_back(d_loss_val);
            log->g_loss.push_back(g_loss_val);
        }
        if (cfg.early_stop) {
            early_accum += d_loss_val;
            if ((epoch + 1) % cfg.early_stop_window == 0) {
                const double avg = early_accum / cfg.early_stop_window;
                early_accum = 0.0;
                if (std::fabs(avg - early_prev) < cfg.early_stop_tol) break;
                early_prev = avg;
            }
        }
    }
    return model;
}

/// Draw n points at a label (which may lie outside the training range).
/// Deterministic in (model, label, n, seed); the generator runs in eval mode.
inline SampleSet sample_ccgan(const GanModel& model, double label, int n,
                              std::uint64_t seed) {
    if (n < 1) throw Error("sample_ccgan: n must be >= 1");
    RngStream rng(seed, /*stream=*/0x5A11);
    Eigen::MatrixXd gin(n, model.noise_dim + 1);
    const double y = model.normalize_label(label);
    for (int r = 0; r < n; ++r) {
        for (int k = 0; k < model.noise_dim; ++k) gin(r, k) = rng.next_normal();
        gin(r, model.noise_dim) = y;
    }
    DenseNet gen = model.generator;  // forward() mutates only in train mode
    Eigen::MatrixXd out = forward(gen, gin, false);
    out = (out.array().rowwise() * model.data_scale.transpose().array()).matrix().rowwise() +
          model.data_shift.transpose();
    SampleSet s(out);
    s.labels = Eigen::VectorXd::Constant(n, label);
    return s;
}

}  // namespace condsamp
