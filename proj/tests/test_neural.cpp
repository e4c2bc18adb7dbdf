#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "condsamp/neural.hpp"
#include "condsamp/rng.hpp"

using namespace condsamp;
using Catch::Approx;

namespace {

DenseNet tiny_net(std::uint64_t seed, bool with_bn) {
    RngStream rng(seed);
    DenseNet net;
    net.layers.push_back(make_dense_layer(3, 5, Activation::leaky_relu, with_bn, rng));
    net.layers.push_back(make_dense_layer(5, 4, Activation::relu, with_bn, rng));
    net.layers.push_back(make_dense_layer(4, 2, Activation::sigmoid, false, rng));
    return net;
}

double scalar_loss(const Eigen::MatrixXd& out) { return out.array().square().sum(); }

}  // namespace

TEST_CASE("forward pass") {
    SECTION("identity single layer with unit weights returns the input") {
        DenseNet net;
        DenseLayer l;
        l.weight = Eigen::MatrixXd::Identity(3, 3);
        l.bias = Eigen::VectorXd::Zero(3);
        l.act = Activation::identity;
        net.layers.push_back(l);
        Eigen::MatrixXd batch(2, 3);
        batch << 1, -2, 3, 0.5, 0, -1;
        REQUIRE((forward(net, batch, false) - batch).cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("leaky relu slope") {
        DenseNet net;
        DenseLayer l;
        l.weight = Eigen::MatrixXd::Identity(1, 1);
        l.bias = Eigen::VectorXd::Zero(1);
        l.act = Activation::leaky_relu;
        l.leaky_slope = 0.2;
        net.layers.push_back(l);
        Eigen::MatrixXd batch(2, 1);
        batch << -1.0, 2.0;
        const Eigen::MatrixXd out = forward(net, batch, false);
        REQUIRE(out(0, 0) == Approx(-0.2).epsilon(1e-15));
        REQUIRE(out(1, 0) == 2.0);
    }
    SECTION("hand-built 2-2-1 network against pencil-and-paper evaluation") {
        DenseNet net;
        DenseLayer l1;
        l1.weight.resize(2, 2);
        l1.weight << 1.0, -0.5, 0.25, 2.0;
        l1.bias = Eigen::Vector2d(0.1, -0.2);
        l1.act = Activation::relu;
        DenseLayer l2;
        l2.weight.resize(2, 1);
        l2.weight << 0.3, -1.0;
        l2.bias = Eigen::VectorXd::Constant(1, 0.05);
        l2.act = Activation::sigmoid;
        net.layers = {l1, l2};
        Eigen::MatrixXd batch(1, 2);
        batch << 0.8, -0.3;
        // a1 = (0.8*1 + -0.3*0.25 + 0.1, 0.8*-0.5 + -0.3*2 - 0.2) = (0.825, -1.2)
        // relu -> (0.825, 0); logit = 0.825*0.3 + 0.05 = 0.2975
        const double expected = 1.0 / (1.0 + std::exp(-0.2975));
        REQUIRE(forward(net, batch, false)(0, 0) == Approx(expected).epsilon(1e-12));
    }
    SECTION("train-mode batchnorm standardizes the batch") {
        RngStream rng(2);
        DenseNet net;
        net.layers.push_back(make_dense_layer(2, 4, Activation::identity, true, rng));
        Eigen::MatrixXd batch(64, 2);
        for (int i = 0; i < 64; ++i) {
            batch(i, 0) = rng.next_normal() * 3.0 + 1.0;
            batch(i, 1) = rng.next_normal();
        }
        const Eigen::MatrixXd out = forward(net, batch, true);
        for (int c = 0; c < 4; ++c) {
            REQUIRE(out.col(c).mean() == Approx(0.0).margin(1e-10));
            REQUIRE((out.col(c).array() - out.col(c).mean()).square().mean() ==
                    Approx(1.0).epsilon(1e-3));
        }
    }
    SECTION("eval-mode forwards are bitwise deterministic") {
        DenseNet net = tiny_net(3, true);
        Eigen::MatrixXd batch(8, 3);
        RngStream rng(4);
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 3; ++j) batch(i, j) = rng.next_normal();
        forward(net, batch, true);  // update running stats once
        const Eigen::MatrixXd a = forward(net, batch, false);
        const Eigen::MatrixXd b = forward(net, batch, false);
        REQUIRE((a - b).cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("batch-size-1 training with batchnorm is rejected") {
        DenseNet net = tiny_net(5, true);
        REQUIRE_THROWS_AS(forward(net, Eigen::MatrixXd::Zero(1, 3), true), Error);
    }
    SECTION("width mismatch is rejected") {
        DenseNet net = tiny_net(5, false);
        REQUIRE_THROWS_AS(forward(net, Eigen::MatrixXd::Zero(2, 4), false),
                          DimensionError);
    }
}

TEST_CASE("backward pass gradients match finite differences") {
    for (bool with_bn : {false, true}) {
        DYNAMIC_SECTION("batchnorm=" << with_bn) {
            DenseNet net = tiny_net(11, with_bn);
            Eigen::MatrixXd batch(6, 3);
            RngStream rng(12);
            for (int i = 0; i < 6; ++i)
                for (int j = 0; j < 3; ++j) batch(i, j) = rng.next_normal();

            auto loss_of_net = [&](DenseNet& n) {
                DenseNet copy = n;  // keep running stats untouched
                return scalar_loss(forward(copy, batch, true));
            };

            ForwardCache cache;
            const Eigen::MatrixXd out = forward(net, batch, true, &cache);
            Gradients grads;
            const Eigen::MatrixXd din = backward(net, cache, 2.0 * out, grads);

            const double h = 1e-6;
            for (std::size_t li = 0; li < net.layers.size(); ++li) {
                DenseLayer& l = net.layers[li];
                for (Eigen::Index r = 0; r < l.weight.rows(); r += 2) {
                    for (Eigen::Index c = 0; c < l.weight.cols(); c += 2) {
                        const double keep = l.weight(r, c);
                        l.weight(r, c) = keep + h;
                        const double up = loss_of_net(net);
                        l.weight(r, c) = keep - h;
                        const double dn = loss_of_net(net);
                        l.weight(r, c) = keep;
                        const double fd = (up - dn) / (2.0 * h);
                        REQUIRE(grads.layers[li].d_weight(r, c) ==
                                Approx(fd).epsilon(1e-4).margin(1e-7));
                    }
                }
                const double keep = l.bias(0);
                l.bias(0) = keep + h;
                const double up = loss_of_net(net);
                l.bias(0) = keep - h;
                const double dn = loss_of_net(net);
                l.bias(0) = keep;
                REQUIRE(grads.layers[li].d_bias(0) ==
                        Approx((up - dn) / (2.0 * h)).epsilon(1e-4).margin(1e-7));
                if (l.bn) {
                    auto bump = [&](Eigen::VectorXd& v) {
                        const double kept = v(1);
                        v(1) = kept + h;
                        const double u = loss_of_net(net);
                        v(1) = kept - h;
                        const double d = loss_of_net(net);
                        v(1) = kept;
                        return (u - d) / (2.0 * h);
                    };
                    REQUIRE(grads.layers[li].d_gamma(1) ==
                            Approx(bump(l.bn->gamma)).epsilon(1e-4).margin(1e-7));
                    REQUIRE(grads.layers[li].d_beta(1) ==
                            Approx(bump(l.bn->beta)).epsilon(1e-4).margin(1e-7));
                }
            }

            // input gradients
            for (int r = 0; r < 2; ++r) {
                for (int c = 0; c < 3; ++c) {
                    Eigen::MatrixXd bplus = batch, bminus = batch;
                    bplus(r, c) += h;
                    bminus(r, c) -= h;
                    DenseNet cp = net, cm = net;
                    const double fd =
                        (scalar_loss(forward(cp, bplus, true)) -
                         scalar_loss(forward(cm, bminus, true))) /
                        (2.0 * h);
                    REQUIRE(din(r, c) == Approx(fd).epsilon(1e-4).margin(1e-7));
                }
            }
        }
    }
}

TEST_CASE("backward edge cases") {
    SECTION("zero upstream gives zero gradients") {
        DenseNet net = tiny_net(21, true);
        Eigen::MatrixXd batch = Eigen::MatrixXd::Random(5, 3);
        ForwardCache cache;
        const Eigen::MatrixXd out = forward(net, batch, true, &cache);
        Gradients grads;
        backward(net, cache, Eigen::MatrixXd::Zero(out.rows(), out.cols()), grads);
        for (const auto& lg : grads.layers) {
            REQUIRE(lg.d_weight.cwiseAbs().maxCoeff() == 0.0);
            REQUIRE(lg.d_bias.cwiseAbs().maxCoeff() == 0.0);
        }
    }
    SECTION("duplicated rows double the gradients of a sum loss") {
        DenseNet net = tiny_net(22, false);
        Eigen::MatrixXd one(1, 3), two(2, 3);
        one << 0.4, -0.7, 0.1;
        two << 0.4, -0.7, 0.1, 0.4, -0.7, 0.1;
        ForwardCache c1, c2;
        const Eigen::MatrixXd o1 = forward(net, one, true, &c1);
        const Eigen::MatrixXd o2 = forward(net, two, true, &c2);
        Gradients g1, g2;
        backward(net, c1, Eigen::MatrixXd::Ones(1, 2), g1);
        backward(net, c2, Eigen::MatrixXd::Ones(2, 2), g2);
        for (std::size_t li = 0; li < net.layers.size(); ++li)
            REQUIRE((g2.layers[li].d_weight - 2.0 * g1.layers[li].d_weight)
                        .cwiseAbs()
                        .maxCoeff() < 1e-12);
    }
    SECTION("missing cache is rejected") {
        DenseNet net = tiny_net(23, false);
        Gradients g;
        REQUIRE_THROWS_AS(backward(net, ForwardCache{}, Eigen::MatrixXd::Zero(1, 2), g),
                          Error);
    }
}

TEST_CASE("adam") {
    SECTION("first step moves by about -lr * sign(gradient)") {
        DenseNet net;
        DenseLayer l;
        l.weight = Eigen::MatrixXd::Zero(2, 2);
        l.bias = Eigen::VectorXd::Zero(2);
        net.layers.push_back(l);
        Gradients g;
        g.setZero(net);
        g.layers[0].d_weight << 0.5, -3.0, 10.0, -0.01;
        AdamState st;
        adam_step(net, g, st, 1e-3, 0.9, 0.999, 1e-8);
        for (Eigen::Index r = 0; r < 2; ++r)
            for (Eigen::Index c = 0; c < 2; ++c)
                REQUIRE(net.layers[0].weight(r, c) ==
                        Approx(-1e-3 * (g.layers[0].d_weight(r, c) > 0 ? 1.0 : -1.0))
                            .epsilon(1e-6));
    }
    SECTION("zero gradients leave parameters untouched") {
        DenseNet net = tiny_net(31, true);
        const DenseNet before = net;
        Gradients g;
        g.setZero(net);
        AdamState st;
        for (int i = 0; i < 10; ++i) adam_step(net, g, st, 1e-2, 0.9, 0.999);
        for (std::size_t li = 0; li < net.layers.size(); ++li)
            REQUIRE((net.layers[li].weight - before.layers[li].weight)
                        .cwiseAbs()
                        .maxCoeff() == 0.0);
    }
    SECTION("quadratic bowl converges") {
        // minimize (w - 3)^2 over a single scalar weight
        DenseNet net;
        DenseLayer l;
        l.weight = Eigen::MatrixXd::Zero(1, 1);
        l.bias = Eigen::VectorXd::Zero(1);
        net.layers.push_back(l);
        AdamState st;
        for (int i = 0; i < 1000; ++i) {
            Gradients g;
            g.setZero(net);
            g.layers[0].d_weight(0, 0) = 2.0 * (net.layers[0].weight(0, 0) - 3.0);
            adam_step(net, g, st, 0.05, 0.9, 0.999);
        }
        REQUIRE(net.layers[0].weight(0, 0) == Approx(3.0).margin(1e-4));
    }
}
