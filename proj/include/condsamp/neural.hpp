#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "condsamp/errors.hpp"
#include "condsamp/rng.hpp"

// Minimal dense network stack: affine -> optional batch normalization ->
// activation per layer, explicit backward pass, and Adam. Everything operates
// on batches stored row-wise (B x features).

namespace condsamp {

enum class Activation { identity, relu, leaky_relu, sigmoid };

struct BatchNormParams {
    Eigen::VectorXd gamma, beta, running_mean, running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    static BatchNormParams init(Eigen::Index width) {
        BatchNormParams bn;
        bn.gamma = Eigen::VectorXd::Ones(width);
        bn.beta = Eigen::VectorXd::Zero(width);
        bn.running_mean = Eigen::VectorXd::Zero(width);
        bn.running_var = Eigen::VectorXd::Ones(width);
        return bn;
    }
};

struct DenseLayer {
    Eigen::MatrixXd weight;  // in x out
    Eigen::VectorXd bias;    // out
    Activation act = Activation::identity;
    double leaky_slope = 0.2;
    std::optional<BatchNormParams> bn;

    Eigen::Index in_dim() const { return weight.rows(); }
    Eigen::Index out_dim() const { return weight.cols(); }
};

struct DenseNet {
    std::vector<DenseLayer> layers;

    Eigen::Index input_dim() const { return layers.front().in_dim(); }
    Eigen::Index output_dim() const { return layers.back().out_dim(); }
};

/// Uniform fan-in initialization: weights and biases ~ U(+-sqrt(1/fan_in)).
inline DenseLayer make_dense_layer(Eigen::Index in, Eigen::Index out, Activation act,
                                   bool batchnorm, RngStream& rng,
                                   double leaky_slope = 0.2) {
    DenseLayer l;
    const double lim = std::sqrt(1.0 / static_cast<double>(in));
    l.weight.resize(in, out);
    l.bias.resize(out);
    for (Eigen::Index i = 0; i < in; ++i)
        for (Eigen::Index j = 0; j < out; ++j)
            l.weight(i, j) = lim * (2.0 * rng.next_uniform() - 1.0);
    for (Eigen::Index j = 0; j < out; ++j) l.bias(j) = lim * (2.0 * rng.next_uniform() - 1.0);
    l.act = act;
    l.leaky_slope = leaky_slope;
    if (batchnorm) l.bn = BatchNormParams::init(out);
    return l;
}

namespace detail {

inline Eigen::MatrixXd apply_activation(const Eigen::MatrixXd& p, Activation act,
                                        double slope) {
    switch (act) {
        case Activation::identity: return p;
        case Activation::relu: return p.cwiseMax(0.0);
        case Activation::leaky_relu:
            return p.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
        case Activation::sigmoid:
            return p.unaryExpr([](double v) {
                return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                : std::exp(v) / (1.0 + std::exp(v));
            });
    }
    throw Error("unknown activation");
}

inline Eigen::MatrixXd activation_grad(const Eigen::MatrixXd& p, Activation act,
                                       double slope) {
    switch (act) {
        case Activation::identity: return Eigen::MatrixXd::Ones(p.rows(), p.cols());
        case Activation::relu:
            return p.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
        case Activation::leaky_relu:
            return p.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; });
        case Activation::sigmoid:
            return p.unaryExpr([](double v) {
                const double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                          : std::exp(v) / (1.0 + std::exp(v));
                return s * (1.0 - s);
            });
    }
    throw Error("unknown activation");
}

}  // namespace detail

struct LayerCache {
    Eigen::MatrixXd input;    // B x in
    Eigen::VectorXd bn_mean, bn_var;
    Eigen::MatrixXd bn_norm;  // (a - mu) / sqrt(var + eps)
    Eigen::MatrixXd pre_act;  // input to the activation
};

struct ForwardCache {
    std::vector<LayerCache> layers;
    bool train = false;
};

/// Forward pass. Train mode uses batch statistics for batch normalization and
/// updates the running statistics; eval mode uses the stored running
/// statistics and is deterministic.
inline Eigen::MatrixXd forward(DenseNet& net, const Eigen::MatrixXd& batch, bool train,
                               ForwardCache* cache = nullptr) {
    if (batch.cols() != net.input_dim())
        throw DimensionError("forward: batch width does not match input dimension");
    if (cache) {
        cache->layers.assign(net.layers.size(), {});
        cache->train = train;
    }
    Eigen::MatrixXd h = batch;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        DenseLayer& l = net.layers[li];
        if (cache) cache->layers[li].input = h;
        Eigen::MatrixXd a = (h * l.weight).rowwise() + l.bias.transpose();
        if (l.bn) {
            BatchNormParams& bn = *l.bn;
            Eigen::VectorXd mu, var;
            if (train) {
                if (a.rows() < 2)
                    throw Error("forward: train-mode batchnorm requires batch size >= 2");
                mu = a.colwise().mean();
                var = (a.rowwise() - mu.transpose()).array().square().colwise().mean();
                bn.running_mean = (1.0 - bn.momentum) * bn.running_mean + bn.momentum * mu;
                bn.running_var = (1.0 - bn.momentum) * bn.running_var + bn.momentum * var;
            } else {
                mu = bn.running_mean;
                var = bn.running_var;
            }
            const Eigen::ArrayXd inv_sd = (var.array() + bn.eps).sqrt().inverse();
            Eigen::MatrixXd norm =
                (a.rowwise() - mu.transpose()).array().rowwise() * inv_sd.transpose();
            a = (norm.array().rowwise() * bn.gamma.transpose().array()).matrix().rowwise() +
                bn.beta.transpose();
            if (cache) {
                cache->layers[li].bn_mean = mu;
                cache->layers[li].bn_var = var;
                cache->layers[li].bn_norm = norm;
            }
        }
        if (cache) cache->layers[li].pre_act = a;
        h = detail::apply_activation(a, l.act, l.leaky_slope);
    }
    return h;
}

struct LayerGradients {
    Eigen::MatrixXd d_weight;
    Eigen::VectorXd d_bias;
    Eigen::VectorXd d_gamma, d_beta;  // only when the layer has batchnorm
};

struct Gradients {
    std::vector<LayerGradients> layers;

    void setZero(const DenseNet& net) {
        layers.assign(net.layers.size(), {});
        for (std::size_t i = 0; i < net.layers.size(); ++i) {
            const DenseLayer& l = net.layers[i];
            layers[i].d_weight = Eigen::MatrixXd::Zero(l.in_dim(), l.out_dim());
            layers[i].d_bias = Eigen::VectorXd::Zero(l.out_dim());
            if (l.bn) {
                layers[i].d_gamma = Eigen::VectorXd::Zero(l.out_dim());
                layers[i].d_beta = Eigen::VectorXd::Zero(l.out_dim());
            }
        }
    }
};

/// Backpropagate `upstream` (dLoss/dOutput, B x out) through the cached
/// forward pass. Fills parameter gradients and returns dLoss/dInput.
inline Eigen::MatrixXd backward(const DenseNet& net, const ForwardCache& cache,
                                const Eigen::MatrixXd& upstream, Gradients& grads) {
    if (cache.layers.size() != net.layers.size())
        throw Error("backward: stale or missing forward cache");
    if (!cache.train) throw Error("backward: forward pass must run in train mode");
    grads.layers.resize(net.layers.size());
    Eigen::MatrixXd dout = upstream;
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const DenseLayer& l = net.layers[li];
        const LayerCache& lc = cache.layers[li];
        LayerGradients& lg = grads.layers[li];
        Eigen::MatrixXd da =
            dout.cwiseProduct(detail::activation_grad(lc.pre_act, l.act, l.leaky_slope));
        if (l.bn) {
            const BatchNormParams& bn = *l.bn;
            const double b_inv = 1.0 / static_cast<double>(da.rows());
            lg.d_gamma = (da.cwiseProduct(lc.bn_norm)).colwise().sum();
            lg.d_beta = da.colwise().sum();
            const Eigen::ArrayXd inv_sd = (lc.bn_var.array() + bn.eps).sqrt().inverse();
            Eigen::MatrixXd dnorm =
                (da.array().rowwise() * bn.gamma.transpose().array()).matrix();
            const Eigen::RowVectorXd sum_dn = dnorm.colwise().sum();
            const Eigen::RowVectorXd sum_dn_norm =
                dnorm.cwiseProduct(lc.bn_norm).colwise().sum();
            Eigen::MatrixXd centered = dnorm;
            centered.rowwise() -= b_inv * sum_dn;
            centered -=
                (lc.bn_norm.array().rowwise() * (b_inv * sum_dn_norm.array())).matrix();
            da = (centered.array().rowwise() * inv_sd.transpose()).matrix();
        }
        lg.d_weight = lc.input.transpose() * da;
        lg.d_bias = da.colwise().sum();
        dout = da * l.weight.transpose();
    }
    return dout;
}

struct AdamState {
    struct Slot {
        Eigen::MatrixXd m_w, v_w;
        Eigen::VectorXd m_b, v_b, m_g, v_g, m_beta, v_beta;
    };
    std::vector<Slot> slots;
    long t = 0;

    void init(const DenseNet& net) {
        slots.assign(net.layers.size(), {});
        for (std::size_t i = 0; i < net.layers.size(); ++i) {
            const DenseLayer& l = net.layers[i];
            slots[i].m_w = Eigen::MatrixXd::Zero(l.in_dim(), l.out_dim());
            slots[i].v_w = Eigen::MatrixXd::Zero(l.in_dim(), l.out_dim());
            slots[i].m_b = Eigen::VectorXd::Zero(l.out_dim());
            slots[i].v_b = Eigen::VectorXd::Zero(l.out_dim());
            if (l.bn) {
                slots[i].m_g = Eigen::VectorXd::Zero(l.out_dim());
                slots[i].v_g = Eigen::VectorXd::Zero(l.out_dim());
                slots[i].m_beta = Eigen::VectorXd::Zero(l.out_dim());
                slots[i].v_beta = Eigen::VectorXd::Zero(l.out_dim());
            }
        }
        t = 0;
    }
};

namespace detail {

template <typename T>
void adam_update(T& param, const T& grad, T& m, T& v, double lr, double b1, double b2,
                 double eps, double bc1, double bc2) {
    m = b1 * m + (1.0 - b1) * grad;
    v = (b2 * v.array() + (1.0 - b2) * grad.array().square()).matrix();
    param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

}  // namespace detail

/// One bias-corrected Adam step over every parameter of the net.
inline void adam_step(DenseNet& net, const Gradients& grads, AdamState& state, double lr,
                      double beta1, double beta2, double eps_adam = 1e-8) {
    if (state.slots.size() != net.layers.size()) state.init(net);
    ++state.t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        DenseLayer& l = net.layers[i];
        const LayerGradients& g = grads.layers[i];
        AdamState::Slot& s = state.slots[i];
        detail::adam_update(l.weight, g.d_weight, s.m_w, s.v_w, lr, beta1, beta2, eps_adam,
                            bc1, bc2);
        detail::adam_update(l.bias, g.d_bias, s.m_b, s.v_b, lr, beta1, beta2, eps_adam, bc1,
                            bc2);
        if (l.bn) {
            detail::adam_update(l.bn->gamma, g.d_gamma, s.m_g, s.v_g, lr, beta1, beta2,
                                eps_adam, bc1, bc2);
            detail::adam_update(l.bn->beta, g.d_beta, s.m_beta, s.v_beta, lr, beta1, beta2,
                                eps_adam, bc1, bc2);
        }
    }
}

}  // namespace condsamp
