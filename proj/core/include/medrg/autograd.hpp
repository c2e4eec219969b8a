// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "medrg/box_math.hpp"
#include "medrg/tensor.hpp"

namespace medrg {

/// Handle to a node in a Graph.
struct Var {
    std::uint32_t id = 0;
};

/// Per-sample reverse-mode tape over row-major float matrices. Parameter
/// leaves reference the parameter storage without copying; their gradients
/// are flushed into a Gradients object after backward(). One graph per
/// thread; graphs are not shared.
class Graph {
  public:
    explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    Graph(const Graph &) = delete;
    Graph &operator=(const Graph &) = delete;

    bool grad_enabled() const { return grad_enabled_; }

    Var input(Matrix value);
    Var param(const Parameter &p);

    const Matrix &value(Var v) const;
    /// Gradient of the last backward() target with respect to v; zero if v did not contribute.
    Matrix grad(Var v) const;

    Var matmul(Var a, Var b);
    /// a * b^T, evaluated row-by-row so each entry is independent of the other rows of b.
    Var matmul_bt(Var a, Var b);
    Var add(Var a, Var b);
    Var add_bias(Var a, Var bias);
    Var scale(Var a, float s);
    Var gelu(Var a);
    Var layer_norm(Var x, Var gamma, Var beta, float eps = 1e-5f);
    /// Multi-head scaled dot-product attention; q is n x d, k and v are m x d.
    Var attention(Var q, Var k, Var v, int heads, bool causal);
    Var slice_rows(Var a, Eigen::Index begin, Eigen::Index count);
    Var concat_rows(std::span<const Var> parts);
    Var gather_rows(Var table, std::span<const int> ids);
    /// Mean cross-entropy over rows with mask != 0; returns a 1x1 node.
    Var cross_entropy(Var logits, std::span<const int> targets, std::span<const float> mask);
    struct BoxLossTerms {
        double l1 = 0.0;
        double giou = 0.0;
        BoundingBox box; // the parameterized prediction
    };
    /// Parameterizes a 1x4 raw head output into a normalized box (parameterize_box)
    /// and returns lambda_l1 * smooth-L1 + lambda_giou * (1 - GIoU) against target.
    /// The chain rule through the parameterization runs in double precision.
    Var box_regression_loss(Var raw, const BoundingBox &target, double lambda_l1,
                            double lambda_giou, BoxLossTerms *terms = nullptr);
    /// sum_i w_i * s_i over 1x1 nodes.
    Var weighted_sum(std::span<const Var> scalars, std::span<const float> weights);

    /// Reverse pass from a 1x1 node.
    void backward(Var loss);

    /// grads[p] += scale * dL/dp for every parameter leaf that received gradient.
    void flush_parameter_grads(Gradients &grads, float scale = 1.0f) const;

    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Matrix own;
        const Parameter *param = nullptr;
        Matrix grad;
        bool needs_grad = false;
        std::function<void()> back;
    };

    Var push(Matrix value, bool needs_grad, std::function<void()> back = {});
    bool needs(Var v) const { return nodes_[v.id].needs_grad; }
    Matrix &grad_ref(Var v);
    const Matrix &grad_of(Var v) const { return nodes_[v.id].grad; }
    bool any_needs(std::initializer_list<Var> vs) const;

    std::deque<Node> nodes_;
    bool grad_enabled_;
};

} // namespace medrg
