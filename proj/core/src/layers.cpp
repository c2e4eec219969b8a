// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include "medrg/layers.hpp"

#include <algorithm>
#include <cmath>

namespace medrg {

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, float stddev, Rng &rng) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = static_cast<float>(rng.normal()) * stddev;
    }
    return m;
}

Linear::Linear(const std::string &name, Eigen::Index in, Eigen::Index out, Rng &rng, float stddev)
    : weight{name + ".weight", normal_matrix(in, out, stddev, rng), true},
      bias{name + ".bias", Matrix::Zero(1, out), false} {}

Var Linear::operator()(Graph &g, Var x) const {
    return g.add_bias(g.matmul(x, g.param(weight)), g.param(bias));
}

void Linear::collect_parameters(ParameterList &out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

LayerNorm::LayerNorm(const std::string &name, Eigen::Index dim)
    : gamma{name + ".gamma", Matrix::Ones(1, dim), false},
      beta{name + ".beta", Matrix::Zero(1, dim), false} {}

Var LayerNorm::operator()(Graph &g, Var x) const {
    return g.layer_norm(x, g.param(gamma), g.param(beta));
}

void LayerNorm::collect_parameters(ParameterList &out) {
    out.push_back(&gamma);
    out.push_back(&beta);
}

FeedForward::FeedForward(const std::string &name, Eigen::Index dim, Eigen::Index hidden, Rng &rng,
                         float out_stddev)
    : fc1(name + ".fc1", dim, hidden, rng), fc2(name + ".fc2", hidden, dim, rng, out_stddev) {}

Var FeedForward::operator()(Graph &g, Var x) const { return fc2(g, g.gelu(fc1(g, x))); }

void FeedForward::collect_parameters(ParameterList &out) {
    fc1.collect_parameters(out);
    fc2.collect_parameters(out);
}

namespace {

// Residual-branch output projections shrink with depth (GPT-2 convention).
float residual_std(int depth) {
    return kInitStd / std::sqrt(2.0f * static_cast<float>(std::max(depth, 1)));
}

} // namespace

SelfAttentionBlock::SelfAttentionBlock(const std::string &name, Eigen::Index dim, int heads_,
                                       bool causal_, int depth_for_init, Rng &rng)
    : ln_attn(name + ".ln_attn", dim),
      query(name + ".query", dim, dim, rng),
      key(name + ".key", dim, dim, rng),
      value(name + ".value", dim, dim, rng),
      out(name + ".out", dim, dim, rng, residual_std(depth_for_init)),
      ln_ffn(name + ".ln_ffn", dim),
      ffn(name + ".ffn", dim, 4 * dim, rng, residual_std(depth_for_init)),
      heads(heads_),
      causal(causal_) {}

Var SelfAttentionBlock::operator()(Graph &g, Var x) const {
    const Var h = ln_attn(g, x);
    const Var a = g.attention(query(g, h), key(g, h), value(g, h), heads, causal);
    x = g.add(x, out(g, a));
    return g.add(x, ffn(g, ln_ffn(g, x)));
}

void SelfAttentionBlock::collect_parameters(ParameterList &o) {
    ln_attn.collect_parameters(o);
    query.collect_parameters(o);
    key.collect_parameters(o);
    value.collect_parameters(o);
    out.collect_parameters(o);
    ln_ffn.collect_parameters(o);
    ffn.collect_parameters(o);
}

CrossAttentionBlock::CrossAttentionBlock(const std::string &name, Eigen::Index dim, int heads_,
                                         int depth_for_init, Rng &rng)
    : ln_query(name + ".ln_query", dim),
      ln_memory(name + ".ln_memory", dim),
      query(name + ".query", dim, dim, rng),
      key(name + ".key", dim, dim, rng),
      value(name + ".value", dim, dim, rng),
      out(name + ".out", dim, dim, rng, residual_std(depth_for_init)),
      ln_ffn(name + ".ln_ffn", dim),
      ffn(name + ".ffn", dim, 4 * dim, rng, residual_std(depth_for_init)),
      heads(heads_) {}

Var CrossAttentionBlock::operator()(Graph &g, Var q, Var memory) const {
    const Var hq = ln_query(g, q);
    const Var hm = ln_memory(g, memory);
    const Var a = g.attention(query(g, hq), key(g, hm), value(g, hm), heads, false);
    q = g.add(q, out(g, a));
    return g.add(q, ffn(g, ln_ffn(g, q)));
}

void CrossAttentionBlock::collect_parameters(ParameterList &o) {
    ln_query.collect_parameters(o);
    ln_memory.collect_parameters(o);
    query.collect_parameters(o);
    key.collect_parameters(o);
    value.collect_parameters(o);
    out.collect_parameters(o);
    ln_ffn.collect_parameters(o);
    ffn.collect_parameters(o);
}

} // namespace medrg
