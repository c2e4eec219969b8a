// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include <functional>

#include <gtest/gtest.h>

#include "medrg/autograd.hpp"
#include "medrg/errors.hpp"
#include "medrg/layers.hpp"
#include "medrg/rng.hpp"

namespace medrg {
namespace {

using Builder = std::function<Var(Graph &, const std::vector<Var> &)>;

Parameter random_param(const std::string &name, int rows, int cols, Rng &rng, float scale = 1.0f) {
    return {name, normal_matrix(rows, cols, scale, rng), true};
}

/// Reduces any node to a scalar through fixed random weights: ones^T (out W).
Var reduce(Graph &g, Var out, std::uint64_t seed) {
    Rng rng(seed);
    const Matrix &v = g.value(out);
    const Var w = g.input(normal_matrix(v.cols(), 1, 1.0f, rng));
    const Var ones = g.input(Matrix::Ones(1, v.rows()));
    return g.matmul(ones, g.matmul(out, w));
}

double evaluate(const Builder &build, std::vector<Parameter> &params) {
    Graph g(false);
    std::vector<Var> vars;
    for (const auto &p : params) {
        vars.push_back(g.param(p));
    }
    return static_cast<double>(g.value(build(g, vars))(0, 0));
}

/// Compares the analytic parameter gradients with central differences in float.
void check_gradients(const Builder &build, std::vector<Parameter> params, double step = 1e-2) {
    Gradients grads;
    {
        Graph g;
        std::vector<Var> vars;
        for (const auto &p : params) {
            vars.push_back(g.param(p));
        }
        g.backward(build(g, vars));
        g.flush_parameter_grads(grads);
    }
    for (auto &p : params) {
        const Matrix *analytic = grads.find(p);
        for (Eigen::Index i = 0; i < p.value.size(); ++i) {
            const float original = p.value.data()[i];
            p.value.data()[i] = original + static_cast<float>(step);
            const double up = evaluate(build, params);
            p.value.data()[i] = original - static_cast<float>(step);
            const double down = evaluate(build, params);
            p.value.data()[i] = original;
            const double fd = (up - down) / (2 * step);
            const double a = analytic ? analytic->data()[i] : 0.0;
            EXPECT_NEAR(a, fd, 3e-3 + 3e-2 * std::abs(fd)) << p.name << "[" << i << "]";
        }
    }
}

TEST(Autograd, MatmulFamily) {
    Rng rng(1);
    std::vector<Parameter> ps{random_param("a", 3, 4, rng), random_param("b", 4, 2, rng),
                              random_param("c", 2, 4, rng), random_param("bias", 1, 2, rng)};
    check_gradients(
        [](Graph &g, const std::vector<Var> &v) {
            const Var ab = g.add_bias(g.matmul(v[0], v[1]), v[3]);
            const Var acT = g.matmul_bt(v[0], v[2]);
            const Var merged = g.concat_rows(std::vector<Var>{g.scale(ab, 0.5f), g.slice_rows(acT, 1, 2)});
            return reduce(g, g.add(merged, merged), 3);
        },
        ps);
}

TEST(Autograd, GeluAndLayerNorm) {
    Rng rng(2);
    std::vector<Parameter> ps{random_param("x", 3, 6, rng), random_param("gamma", 1, 6, rng),
                              random_param("beta", 1, 6, rng)};
    check_gradients(
        [](Graph &g, const std::vector<Var> &v) { return reduce(g, g.gelu(g.layer_norm(v[0], v[1], v[2])), 4); }, ps);
}

TEST(Autograd, AttentionCausalAndFull) {
    for (bool causal : {true, false}) {
        Rng rng(causal ? 3 : 4);
        std::vector<Parameter> ps{random_param("q", 4, 6, rng), random_param("k", 4, 6, rng),
                                  random_param("v", 4, 6, rng)};
        check_gradients(
            [causal](Graph &g, const std::vector<Var> &v) {
                return reduce(g, g.attention(v[0], v[1], v[2], 2, causal), 5);
            },
            ps);
    }
}

TEST(Autograd, CrossAttentionShapes) {
    Rng rng(5);
    std::vector<Parameter> ps{random_param("q", 1, 4, rng), random_param("k", 6, 4, rng),
                              random_param("v", 6, 4, rng)};
    check_gradients(
        [](Graph &g, const std::vector<Var> &v) { return reduce(g, g.attention(v[0], v[1], v[2], 2, false), 6); },
        ps);
}

TEST(Autograd, GatherAndCrossEntropy) {
    Rng rng(6);
    std::vector<Parameter> ps{random_param("table", 7, 5, rng), random_param("proj", 5, 7, rng)};
    const std::vector<int> ids{3, 1, 3, 6};
    const std::vector<int> targets{2, 0, 5, 1};
    const std::vector<float> mask{0, 1, 1, 1};
    check_gradients(
        [&](Graph &g, const std::vector<Var> &v) {
            return g.cross_entropy(g.matmul(g.gather_rows(v[0], ids), v[1]), targets, mask);
        },
        ps);
}

TEST(Autograd, CrossEntropyUniformIsLogV) {
    Graph g(false);
    const Var logits = g.input(Matrix::Zero(3, 11));
    const std::vector<int> t{1, 2, 3};
    const std::vector<float> m{1, 1, 1};
    EXPECT_NEAR(g.value(g.cross_entropy(logits, t, m))(0, 0), std::log(11.0), 1e-6);
    const std::vector<float> zero{0, 0, 0};
    EXPECT_THROW(g.cross_entropy(logits, t, zero), InvalidArgument);
}

TEST(Autograd, BoxRegressionLossGradient) {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Parameter> ps{random_param("raw", 1, 4, rng)};
        const BoundingBox target = BoundingBox::normalized(0.2, 0.3, 0.3, 0.4);
        check_gradients(
            [&](Graph &g, const std::vector<Var> &v) { return g.box_regression_loss(v[0], target, 1.0, 1.0); }, ps,
            1e-3);
    }
}

TEST(Autograd, BoxRegressionLossReportsTerms) {
    Graph g;
    Parameter raw{"raw", Matrix::Zero(1, 4), false};
    Graph::BoxLossTerms terms;
    const BoundingBox target = BoundingBox::normalized(0.5, 0.5, 0.25, 0.25);
    const Var loss = g.box_regression_loss(g.param(raw), target, 2.0, 3.0, &terms);
    EXPECT_NEAR(terms.l1, 0.0, 1e-12);
    EXPECT_NEAR(terms.giou, 0.0, 1e-12);
    EXPECT_NEAR(g.value(loss)(0, 0), 0.0, 1e-6);
    EXPECT_DOUBLE_EQ(terms.box.x, 0.5);
}

TEST(Autograd, WeightedSum) {
    Rng rng(8);
    std::vector<Parameter> ps{random_param("a", 1, 1, rng), random_param("b", 1, 1, rng)};
    check_gradients(
        [](Graph &g, const std::vector<Var> &v) {
            const std::vector<float> w{0.25f, -2.0f};
            return g.weighted_sum(std::vector<Var>{v[0], v[1]}, w);
        },
        ps);
}

TEST(Autograd, SharedParameterAccumulates) {
    Parameter p{"p", Matrix::Constant(1, 1, 3.0f), false};
    Graph g;
    const Var a = g.param(p);
    const Var b = g.param(p);
    const Var prod = g.matmul(a, b); // p^2
    g.backward(prod);
    Gradients grads;
    g.flush_parameter_grads(grads, 0.5f);
    EXPECT_FLOAT_EQ(grads.at(p)(0, 0), 3.0f);
}

TEST(Autograd, LayersMatchFiniteDifferences) {
    Rng rng(9);
    SelfAttentionBlock block("blk", 8, 2, true, 2, rng);
    ParameterList list;
    block.collect_parameters(list);
    // Enlarge the weights so the check is not dominated by the residual path.
    for (Parameter *p : list) {
        p->value *= 10.0f;
        if (p->name.find("gamma") != std::string::npos) {
            p->value.setConstant(1.0f);
        }
    }
    const Matrix x = normal_matrix(3, 8, 1.0f, rng);
    Gradients grads;
    {
        Graph g;
        const Var out = block(g, g.input(x));
        g.backward(reduce(g, out, 11));
        g.flush_parameter_grads(grads);
    }
    const auto eval = [&] {
        Graph g(false);
        const Var out = block(g, g.input(x));
        return static_cast<double>(g.value(reduce(g, out, 11))(0, 0));
    };
    int checked = 0;
    for (Parameter *p : list) {
        for (Eigen::Index i = 0; i < p->value.size(); i += 7) {
            const float original = p->value.data()[i];
            p->value.data()[i] = original + 1e-2f;
            const double up = eval();
            p->value.data()[i] = original - 1e-2f;
            const double down = eval();
            p->value.data()[i] = original;
            const double fd = (up - down) / 2e-2;
            const Matrix *a = grads.find(*p);
            ASSERT_NE(a, nullptr) << p->name;
            EXPECT_NEAR(a->data()[i], fd, 2e-2 + 5e-2 * std::abs(fd)) << p->name << "[" << i << "]";
            ++checked;
        }
    }
    EXPECT_GT(checked, 20);
}

} // namespace
} // namespace medrg
