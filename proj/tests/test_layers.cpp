#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "specrec/autodiff.hpp"
#include "specrec/rng.hpp"
#include "specrec/tensor.hpp"

using namespace specrec;

namespace {

// Random values bounded away from zero so FD never straddles the relu/L1
// kinks (the probe step is 1e-6, the margin 5e-2).
Tensor random_tensor(Rng& rng, std::vector<int> shape, double margin = 0.05) {
    Tensor t(std::move(shape));
    for (double& v : t.data) {
        const double mag = margin + rng.uniform(0.0, 1.0);
        v = rng.coin() ? mag : -mag;
    }
    return t;
}

using Builder = std::function<Node*(Graph&, const std::vector<Node*>&)>;

// Central finite differences against the tape's gradients. Error is
// absolute below magnitude 1 and relative above it.
double fd_worst_error(const std::vector<Tensor>& inputs, const Builder& build) {
    Graph g;
    std::vector<Node*> leaves;
    for (const Tensor& t : inputs) leaves.push_back(g.leaf(t, true));
    Node* loss = build(g, leaves);
    REQUIRE(loss->value.shape == std::vector<int>{1});
    g.backward(loss);

    auto eval_shifted = [&](std::size_t li, std::size_t j, double delta) {
        Graph g2;
        std::vector<Node*> l2;
        for (std::size_t k = 0; k < inputs.size(); ++k) {
            Tensor t = inputs[k];
            if (k == li) t.data[j] += delta;
            l2.push_back(g2.leaf(std::move(t), false));
        }
        return build(g2, l2)->value[0];
    };

    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t li = 0; li < inputs.size(); ++li) {
        for (std::size_t j = 0; j < inputs[li].numel(); ++j) {
            const double fd = (eval_shifted(li, j, h) - eval_shifted(li, j, -h)) / (2.0 * h);
            const double an = leaves[li]->grad[j];
            const double denom = std::max({1.0, std::abs(fd), std::abs(an)});
            worst = std::max(worst, std::abs(fd - an) / denom);
        }
    }
    return worst;
}

// squared sum as the probe loss: smooth, nonzero gradient everywhere
Node* sq_sum(Graph& g, Node* x) {
    Node* sq = g.mul(x, x);
    // mean |sq - (-1)| == mean(sq)+1: smooth since sq+1 > 0
    Tensor neg_ones(x->value.shape);
    neg_ones.fill(-1.0);
    return g.l1_loss(sq, neg_ones);
}

}  // namespace

TEST_CASE("convolution matches a directly computed cross-correlation") {
    Rng rng(11);
    const Tensor x = random_tensor(rng, {2, 3, 4});
    const Tensor w = random_tensor(rng, {3, 2, 3, 3});
    const Tensor b = random_tensor(rng, {3});

    Graph g;
    Node* out = g.conv2d(g.leaf(x, false), g.leaf(w, false), g.leaf(b, false));
    REQUIRE(out->value.shape == std::vector<int>{3, 3, 4});

    for (int co = 0; co < 3; ++co) {
        for (int y = 0; y < 3; ++y) {
            for (int xx = 0; xx < 4; ++xx) {
                double want = b[static_cast<std::size_t>(co)];
                for (int ky = -1; ky <= 1; ++ky) {
                    for (int kx = -1; kx <= 1; ++kx) {
                        const int iy = y + ky, ix = xx + kx;
                        if (iy < 0 || iy >= 3 || ix < 0 || ix >= 4) continue;
                        for (int ci = 0; ci < 2; ++ci) {
                            want += w.data[((static_cast<std::size_t>(co) * 2 + ci) * 3 + ky + 1) * 3 + kx + 1] *
                                    x.at3(ci, iy, ix);
                        }
                    }
                }
                CHECK(out->value.at3(co, y, xx) == doctest::Approx(want).epsilon(1e-13));
            }
        }
    }
}

TEST_CASE("1x1 convolution is a per-pixel channel mix") {
    Rng rng(12);
    const Tensor x = random_tensor(rng, {3, 2, 2});
    const Tensor w = random_tensor(rng, {2, 3, 1, 1});
    const Tensor b = random_tensor(rng, {2});

    Graph g;
    Node* out = g.conv2d(g.leaf(x, false), g.leaf(w, false), g.leaf(b, false));
    for (int co = 0; co < 2; ++co) {
        for (int y = 0; y < 2; ++y) {
            for (int xx = 0; xx < 2; ++xx) {
                double want = b[static_cast<std::size_t>(co)];
                for (int ci = 0; ci < 3; ++ci) want += w.data[static_cast<std::size_t>(co) * 3 + ci] * x.at3(ci, y, xx);
                CHECK(out->value.at3(co, y, xx) == doctest::Approx(want).epsilon(1e-13));
            }
        }
    }
}

TEST_CASE("a centered delta kernel reproduces its input channel") {
    Tensor x({1, 4, 4});
    for (std::size_t i = 0; i < x.numel(); ++i) x[i] = 0.1 * static_cast<double>(i) - 0.7;
    Tensor w({1, 1, 3, 3});
    w.data[4] = 1.0;  // center tap
    Tensor b({1});

    Graph g;
    Node* out = g.conv2d(g.leaf(x, false), g.leaf(w, false), g.leaf(b, false));
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(out->value[i] == x[i]);
}

TEST_CASE("convolution rejects malformed shapes") {
    Graph g;
    Node* x = g.leaf(Tensor({2, 4, 4}), false);
    CHECK_THROWS_AS(g.conv2d(x, g.leaf(Tensor({3, 2, 5, 5}), false), g.leaf(Tensor({3}), false)), std::invalid_argument);
    CHECK_THROWS_AS(g.conv2d(x, g.leaf(Tensor({3, 1, 3, 3}), false), g.leaf(Tensor({3}), false)), std::invalid_argument);
    CHECK_THROWS_AS(g.conv2d(x, g.leaf(Tensor({3, 2, 3, 3}), false), g.leaf(Tensor({2}), false)), std::invalid_argument);
}

TEST_CASE("convolution gradients agree with finite differences") {
    Rng rng(13);
    const std::vector<Tensor> inputs = {random_tensor(rng, {2, 4, 4}), random_tensor(rng, {3, 2, 3, 3}),
                                        random_tensor(rng, {3})};
    const double err = fd_worst_error(inputs, [](Graph& g, const std::vector<Node*>& l) {
        return sq_sum(g, g.conv2d(l[0], l[1], l[2]));
    });
    CHECK(err <= 1e-6);
}

TEST_CASE("1x1 convolution gradients agree with finite differences") {
    Rng rng(14);
    const std::vector<Tensor> inputs = {random_tensor(rng, {3, 3, 2}), random_tensor(rng, {2, 3, 1, 1}),
                                        random_tensor(rng, {2})};
    const double err = fd_worst_error(inputs, [](Graph& g, const std::vector<Node*>& l) {
        return sq_sum(g, g.conv2d(l[0], l[1], l[2]));
    });
    CHECK(err <= 1e-6);
}

TEST_CASE("leaky relu keeps positives and scales negatives") {
    Graph g;
    Node* x = g.leaf(Tensor({1, 1, 4}, {1.5, -2.0, 0.0, -0.25}), false);
    Node* y = g.leaky_relu(x, 0.01);
    CHECK(y->value[0] == 1.5);
    CHECK(y->value[1] == -0.02);
    CHECK(y->value[2] == 0.0);
    CHECK(y->value[3] == -0.0025);
}

TEST_CASE("leaky relu gradients agree with finite differences") {
    Rng rng(15);
    const std::vector<Tensor> inputs = {random_tensor(rng, {2, 3, 3})};
    const double err = fd_worst_error(inputs, [](Graph& g, const std::vector<Node*>& l) {
        return sq_sum(g, g.leaky_relu(l[0], 0.01));
    });
    CHECK(err <= 1e-6);
}

TEST_CASE("average pooling halves each dimension and averages quads") {
    Graph g;
    Node* x = g.leaf(Tensor({1, 2, 4}, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0}), false);
    Node* y = g.avgpool2(x);
    REQUIRE(y->value.shape == std::vector<int>{1, 1, 2});
    CHECK(y->value[0] == doctest::Approx(3.5).epsilon(1e-15));
    CHECK(y->value[1] == doctest::Approx(5.5).epsilon(1e-15));
    CHECK_THROWS_AS(g.avgpool2(g.leaf(Tensor({1, 3, 4}), false)), std::invalid_argument);
}

TEST_CASE("average pooling gradients agree with finite differences") {
    Rng rng(16);
    const std::vector<Tensor> inputs = {random_tensor(rng, {2, 4, 4})};
    const double err = fd_worst_error(inputs, [](Graph& g, const std::vector<Node*>& l) {
        return sq_sum(g, g.avgpool2(l[0]));
    });
    CHECK(err <= 1e-6);
}

TEST_CASE("upsampling follows the half-pixel bilinear weights") {
    Graph g;
    const double a = 0.3, b = -0.9, c = 1.7, d = 0.4;
    Node* x = g.leaf(Tensor({1, 2, 2}, {a, b, c, d}), false);
    Node* y = g.upsample2x(x);
    REQUIRE(y->value.shape == std::vector<int>{1, 4, 4});

    // per-axis source weights for outputs 0..3 of a length-2 input
    const double w0[4] = {1.0, 0.75, 0.25, 0.0};
    for (int yy = 0; yy < 4; ++yy) {
        for (int xx = 0; xx < 4; ++xx) {
            const double top = w0[xx] * a + (1.0 - w0[xx]) * b;
            const double bot = w0[xx] * c + (1.0 - w0[xx]) * d;
            const double want = w0[yy] * top + (1.0 - w0[yy]) * bot;
            CHECK(y->value.at3(0, yy, xx) == doctest::Approx(want).epsilon(1e-15));
        }
    }
}

TEST_CASE("upsampling a constant image stays constant") {
    Graph g;
    Tensor t({3, 2, 2});
    t.fill(0.42);
    Node* y = g.upsample2x(g.leaf(t, false));
    for (std::size_t i = 0; i < y->value.numel(); ++i) CHECK(y->value[i] == doctest::Approx(0.42).epsilon(1e-15));
}

TEST_CASE("upsampling gradients agree with finite differences") {
    Rng rng(17);
    const std::vector<Tensor> inputs = {random_tensor(rng, {2, 2, 3})};
    const double err = fd_worst_error(inputs, [](Graph& g, const std::vector<Node*>& l) {
        return sq_sum(g, g.upsample2x(l[0]));
    });
    CHECK(err <= 1e-6);
}

TEST_CASE("concatenation stacks channels and routes gradients to each parent") {
    Rng rng(18);
    const std::vector<Tensor> inputs = {random_tensor(rng, {2, 2, 2}), random_tensor(rng, {3, 2, 2})};

    Graph g;
    Node* cat = g.concat({g.leaf(inputs[0], false), g.leaf(inputs[1], false)});
    REQUIRE(cat->value.shape == std::vector<int>{5, 2, 2});
    for (std::size_t i = 0; i < inputs[0].numel(); ++i) CHECK(cat->value[i] == inputs[0][i]);
    for (std::size_t i = 0; i < inputs[1].numel(); ++i) CHECK(cat->value[inputs[0].numel() + i] == inputs[1][i]);
    CHECK_THROWS_AS(g.concat({g.leaf(Tensor({1, 2, 2}), false), g.leaf(Tensor({1, 3, 2}), false)}),
                    std::invalid_argument);

    const double err = fd_worst_error(inputs, [](Graph& g2, const std::vector<Node*>& l) {
        return sq_sum(g2, g2.concat({l[0], l[1]}));
    });
    CHECK(err <= 1e-6);
}

TEST_CASE("dense layer matches a hand matrix product and its gradients check out") {
    Rng rng(19);
    const std::vector<Tensor> inputs = {random_tensor(rng, {4}), random_tensor(rng, {3, 4}), random_tensor(rng, {3})};

    Graph g;
    Node* y = g.dense(g.leaf(inputs[0], false), g.leaf(inputs[1], false), g.leaf(inputs[2], false));
    for (int o = 0; o < 3; ++o) {
        double want = inputs[2][static_cast<std::size_t>(o)];
        for (int i = 0; i < 4; ++i) want += inputs[1].data[static_cast<std::size_t>(o) * 4 + i] * inputs[0][static_cast<std::size_t>(i)];
        CHECK(y->value[static_cast<std::size_t>(o)] == doctest::Approx(want).epsilon(1e-13));
    }

    const double err = fd_worst_error(inputs, [](Graph& g2, const std::vector<Node*>& l) {
        Node* out = g2.dense(l[0], l[1], l[2]);
        Node* sq = g2.mul(out, out);
        Tensor neg({3});
        neg.fill(-1.0);
        return g2.l1_loss(sq, neg);
    });
    CHECK(err <= 1e-6);
}

TEST_CASE("global average pooling reduces each channel to its mean") {
    Rng rng(20);
    const std::vector<Tensor> inputs = {random_tensor(rng, {3, 2, 4})};

    Graph g;
    Node* y = g.global_avg_pool(g.leaf(inputs[0], false));
    REQUIRE(y->value.shape == std::vector<int>{3});
    for (int c = 0; c < 3; ++c) {
        double want = 0.0;
        for (int i = 0; i < 8; ++i) want += inputs[0].data[static_cast<std::size_t>(c) * 8 + i];
        CHECK(y->value[static_cast<std::size_t>(c)] == doctest::Approx(want / 8.0).epsilon(1e-13));
    }

    const double err = fd_worst_error(inputs, [](Graph& g2, const std::vector<Node*>& l) {
        Node* out = g2.global_avg_pool(l[0]);
        Node* sq = g2.mul(out, out);
        Tensor neg({3});
        neg.fill(-1.0);
        return g2.l1_loss(sq, neg);
    });
    CHECK(err <= 1e-6);
}

TEST_CASE("softplus is log(1+exp(x)) with a linear tail") {
    Graph g;
    Node* y = g.softplus(g.leaf(Tensor({3}, {0.3, -2.0, 40.0}), false));
    CHECK(y->value[0] == doctest::Approx(std::log1p(std::exp(0.3))).epsilon(1e-15));
    CHECK(y->value[1] == doctest::Approx(std::log1p(std::exp(-2.0))).epsilon(1e-15));
    CHECK(y->value[2] == 40.0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(y->value[i] > 0.0);
}

TEST_CASE("softplus gradients agree with finite differences") {
    Rng rng(21);
    const std::vector<Tensor> inputs = {random_tensor(rng, {6})};
    const double err = fd_worst_error(inputs, [](Graph& g, const std::vector<Node*>& l) {
        Node* out = g.softplus(l[0]);
        Node* sq = g.mul(out, out);
        Tensor neg({6});
        neg.fill(-1.0);
        return g.l1_loss(sq, neg);
    });
    CHECK(err <= 1e-6);
}

TEST_CASE("elementwise add, sub and mul gradients agree with finite differences") {
    Rng rng(22);
    const std::vector<Tensor> inputs = {random_tensor(rng, {2, 2, 2}), random_tensor(rng, {2, 2, 2})};

    for (int which = 0; which < 3; ++which) {
        const double err = fd_worst_error(inputs, [which](Graph& g, const std::vector<Node*>& l) {
            Node* out = which == 0 ? g.add(l[0], l[1]) : which == 1 ? g.sub(l[0], l[1]) : g.mul(l[0], l[1]);
            return sq_sum(g, out);
        });
        CHECK(err <= 1e-6);
    }

    Graph g;
    Node* a = g.leaf(Tensor({1, 1, 2}, {2.0, 3.0}), false);
    Node* b = g.leaf(Tensor({1, 1, 2}, {5.0, -1.0}), false);
    CHECK(g.add(a, b)->value[0] == 7.0);
    CHECK(g.sub(a, b)->value[1] == 4.0);
    CHECK(g.mul(a, b)->value[0] == 10.0);
    CHECK_THROWS_AS(g.add(a, g.leaf(Tensor({1, 2, 1}), false)), std::invalid_argument);
}

TEST_CASE("constant-scale, constant-shift and scalar-times-constant layers") {
    Rng rng(23);
    Tensor t = random_tensor(rng, {2, 2, 2});

    {
        const std::vector<Tensor> inputs = {random_tensor(rng, {2, 2, 2})};
        const double err = fd_worst_error(inputs, [](Graph& g, const std::vector<Node*>& l) {
            return sq_sum(g, g.scale(l[0], -1.7));
        });
        CHECK(err <= 1e-6);
    }
    {
        const std::vector<Tensor> inputs = {random_tensor(rng, {2, 2, 2})};
        const double err = fd_worst_error(inputs, [&t](Graph& g, const std::vector<Node*>& l) {
            return sq_sum(g, g.add_const(l[0], t));
        });
        CHECK(err <= 1e-6);
    }
    {
        const std::vector<Tensor> inputs = {Tensor({1}, {0.8})};
        const double err = fd_worst_error(inputs, [&t](Graph& g, const std::vector<Node*>& l) {
            return sq_sum(g, g.scale_by(l[0], t));
        });
        CHECK(err <= 1e-6);
    }

    Graph g;
    Node* s = g.leaf(Tensor::scalar(3.0), false);
    Node* scaled = g.scale_by(s, Tensor({1, 1, 2}, {2.0, -4.0}));
    CHECK(scaled->value[0] == 6.0);
    CHECK(scaled->value[1] == -12.0);
    CHECK_THROWS_AS(g.scale_by(g.leaf(Tensor({2}), false), t), std::invalid_argument);
}

TEST_CASE("l1 loss is the mean absolute difference") {
    Graph g;
    Node* pred = g.leaf(Tensor({1, 2, 2}, {1.0, -1.0, 0.5, 2.0}), false);
    Node* loss = g.l1_loss(pred, Tensor({1, 2, 2}, {0.0, 1.0, 0.5, -2.0}));
    CHECK(loss->value[0] == doctest::Approx((1.0 + 2.0 + 0.0 + 4.0) / 4.0).epsilon(1e-15));
    CHECK_THROWS_AS(g.l1_loss(pred, Tensor({4})), std::invalid_argument);
}

TEST_CASE("l1 loss gradients agree with finite differences away from ties") {
    Rng rng(24);
    const std::vector<Tensor> inputs = {random_tensor(rng, {2, 3, 3})};
    Tensor target = random_tensor(rng, {2, 3, 3});
    // push targets further away so pred-target never changes sign under probing
    for (std::size_t i = 0; i < target.numel(); ++i) target[i] += inputs[0][i] > target[i] ? -2.0 : 2.0;

    const double err = fd_worst_error(inputs, [&target](Graph& g, const std::vector<Node*>& l) {
        return g.l1_loss(l[0], target);
    });
    CHECK(err <= 1e-6);
}

TEST_CASE("a chained block matches finite differences end to end") {
    Rng rng(25);
    const std::vector<Tensor> inputs = {random_tensor(rng, {2, 4, 4}), random_tensor(rng, {4, 2, 3, 3}),
                                        random_tensor(rng, {4}),       random_tensor(rng, {1, 8}),
                                        random_tensor(rng, {1})};
    const double err = fd_worst_error(inputs, [](Graph& g, const std::vector<Node*>& l) {
        Node* c = g.leaky_relu(g.conv2d(l[0], l[1], l[2]), 0.01);
        Node* p = g.upsample2x(g.avgpool2(c));
        Node* mixed = g.concat({p, g.sub(c, p)});
        Node* pooled = g.global_avg_pool(mixed);
        Node* gate = g.softplus(g.dense(pooled, l[3], l[4]));
        Tensor ref({1});
        ref.fill(-1.0);
        return g.l1_loss(g.mul(gate, gate), ref);
    });
    CHECK(err <= 1e-6);
}

TEST_CASE("backward seeds the loss, runs once, and only scalar losses sweep") {
    Graph g;
    Node* x = g.leaf(Tensor({2}, {0.5, -0.5}), true);
    Node* vec = g.add(x, x);
    CHECK_THROWS_AS(g.backward(vec), std::invalid_argument);

    Node* loss = g.l1_loss(vec, Tensor({2}, {9.0, 9.0}));
    g.backward(loss);
    CHECK(loss->grad[0] == 1.0);
    CHECK(x->grad[0] == doctest::Approx(-1.0).epsilon(1e-15));  // 2 paths * 0.5 mean weight * sign -1
    CHECK(x->grad[1] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK_THROWS_AS(g.backward(loss), std::logic_error);
}

TEST_CASE("gradients stay zero for frozen leaves") {
    Graph g;
    Node* frozen = g.leaf(Tensor({1, 2, 2}, {0.3, 0.4, 0.5, 0.6}), false);
    Node* live = g.leaf(Tensor({1, 2, 2}, {1.0, 1.0, 1.0, 1.0}), true);
    Node* loss = g.l1_loss(g.mul(frozen, live), Tensor({1, 2, 2}, {9.0, 9.0, 9.0, 9.0}));
    g.backward(loss);
    for (std::size_t i = 0; i < 4; ++i) CHECK(frozen->grad[i] == 0.0);
    for (std::size_t i = 0; i < 4; ++i) CHECK(live->grad[i] != 0.0);
}
