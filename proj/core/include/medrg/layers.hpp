// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "medrg/autograd.hpp"
#include "medrg/rng.hpp"
#include "medrg/tensor.hpp"

namespace medrg {

/// Standard deviation used for every weight matrix and embedding table.
inline constexpr float kInitStd = 0.02f;

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, float stddev, Rng &rng);

struct Linear {
    Parameter weight; // in x out
    Parameter bias;   // 1 x out

    Linear() = default;
    Linear(const std::string &name, Eigen::Index in, Eigen::Index out, Rng &rng,
           float stddev = kInitStd);

    Var operator()(Graph &g, Var x) const;
    void collect_parameters(ParameterList &out);
};

struct LayerNorm {
    Parameter gamma;
    Parameter beta;

    LayerNorm() = default;
    LayerNorm(const std::string &name, Eigen::Index dim);

    Var operator()(Graph &g, Var x) const;
    void collect_parameters(ParameterList &out);
};

struct FeedForward {
    Linear fc1;
    Linear fc2;

    FeedForward() = default;
    FeedForward(const std::string &name, Eigen::Index dim, Eigen::Index hidden, Rng &rng,
                float out_stddev);

    Var operator()(Graph &g, Var x) const;
    void collect_parameters(ParameterList &out);
};

/// Pre-norm transformer block: x + attn(ln(x)), then x + ffn(ln(x)).
struct SelfAttentionBlock {
    LayerNorm ln_attn;
    Linear query, key, value, out;
    LayerNorm ln_ffn;
    FeedForward ffn;
    int heads = 1;
    bool causal = false;

    SelfAttentionBlock() = default;
    SelfAttentionBlock(const std::string &name, Eigen::Index dim, int heads, bool causal,
                       int depth_for_init, Rng &rng);

    Var operator()(Graph &g, Var x) const;
    void collect_parameters(ParameterList &out);
};

/// A query sequence attends over a fixed memory; pre-norm on both sides.
struct CrossAttentionBlock {
    LayerNorm ln_query;
    LayerNorm ln_memory;
    Linear query, key, value, out;
    LayerNorm ln_ffn;
    FeedForward ffn;
    int heads = 1;

    CrossAttentionBlock() = default;
    CrossAttentionBlock(const std::string &name, Eigen::Index dim, int heads, int depth_for_init,
                        Rng &rng);

    Var operator()(Graph &g, Var query_state, Var memory) const;
    void collect_parameters(ParameterList &out);
};

} // namespace medrg
