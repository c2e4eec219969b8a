// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include "medrg/phrase_model.hpp"

#include <cmath>
#include <string>

#include "medrg/errors.hpp"

namespace medrg {

void PhraseModelConfig::validate() const {
    if (hidden_dim <= 0 || layers <= 0 || heads <= 0 || max_length <= 0 || prefix_length <= 0 ||
        vision_dim <= 0) {
        throw InvalidArgument("PhraseModelConfig: all sizes must be positive");
    }
    if (hidden_dim % heads != 0) {
        throw InvalidArgument("PhraseModelConfig: hidden_dim must be divisible by heads");
    }
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(prefix_length))));
    if (side * side != prefix_length) {
        throw InvalidArgument("PhraseModelConfig: prefix_length must be a perfect square");
    }
    if (prefix_length >= max_length) {
        throw InvalidArgument("PhraseModelConfig: prefix_length must be below max_length");
    }
}

PhraseModel::PhraseModel(const PhraseModelConfig &config, Vocabulary vocab, Rng &rng)
    : config_(config), vocab_(std::move(vocab)) {
    config_.validate();
    const int d = config_.hidden_dim;
    const int V = vocab_.size();
    image_adapter_ = Linear("lm.image_adapter", config_.vision_dim, d, rng);
    token_embedding_ = {"lm.token_embedding", normal_matrix(V, d, kInitStd, rng), false};
    position_embedding_ = {"lm.position_embedding", normal_matrix(config_.max_length, d, kInitStd, rng), false};
    for (int l = 0; l < config_.layers; ++l) {
        blocks_.emplace_back("lm.block" + std::to_string(l), d, config_.heads, true, config_.layers, rng);
    }
    final_norm_ = LayerNorm("lm.final_norm", d);
    output_projection_ = {"lm.output_projection", normal_matrix(V, d, kInitStd, rng), true};
}

PhraseModel::Output PhraseModel::forward(Graph &g, Var image_features, std::span<const int> token_ids) const {
    const auto P = static_cast<Eigen::Index>(config_.prefix_length);
    const auto L = static_cast<Eigen::Index>(token_ids.size());
    if (g.value(image_features).rows() != P || g.value(image_features).cols() != config_.vision_dim) {
        throw InvalidArgument("PhraseModel::forward: image features must be " + std::to_string(P) + "x" +
                              std::to_string(config_.vision_dim));
    }
    if (L == 0) {
        throw InvalidArgument("PhraseModel::forward: empty token sequence");
    }
    if (P + L > config_.max_length) {
        throw InvalidArgument("PhraseModel::forward: sequence of " + std::to_string(P + L) +
                              " positions exceeds max_length " + std::to_string(config_.max_length));
    }
    const Var prefix = image_adapter_(g, image_features);
    const Var tokens = g.gather_rows(g.param(token_embedding_), token_ids);
    const std::array<Var, 2> parts{prefix, tokens};
    Var x = g.concat_rows(parts);
    x = g.add(x, g.slice_rows(g.param(position_embedding_), 0, P + L));
    for (const auto &block : blocks_) {
        x = block(g, x);
    }
    x = final_norm_(g, x);
    const Var hidden = g.slice_rows(x, P, L);
    const Var logits = g.matmul_bt(hidden, g.param(output_projection_));
    return {logits, hidden};
}

std::pair<Matrix, Matrix> PhraseModel::forward(const Matrix &image_features,
                                               std::span<const int> token_ids) const {
    Graph g(false);
    const Output out = forward(g, g.input(image_features), token_ids);
    return {g.value(out.logits), g.value(out.hidden)};
}

std::vector<int> PhraseModel::prompt(std::span<const int> report_ids) const {
    std::vector<int> ids;
    ids.reserve(report_ids.size() + 2);
    ids.push_back(vocab_.bos_id());
    ids.insert(ids.end(), report_ids.begin(), report_ids.end());
    ids.push_back(vocab_.eos_id());
    return ids;
}

GenerationOutput PhraseModel::generate(const Matrix &image_features, std::span<const int> report_ids,
                                       int max_new) const {
    GenerationOutput out;
    std::vector<int> seq = prompt(report_ids);
    const std::optional<int> box = vocab_.box_id();
    for (int step = 0; step < max_new; ++step) {
        const auto [logits, hidden] = forward(image_features, seq);
        Eigen::Index next = 0;
        logits.row(logits.rows() - 1).maxCoeff(&next); // first maximum on ties
        const int token = static_cast<int>(next);
        if (token == vocab_.eos_id()) {
            break;
        }
        seq.push_back(token);
        if (box && token == *box) {
            const auto position = static_cast<int>(seq.size()) - 1;
            const auto final_pass = forward(image_features, seq);
            out.e_box = final_pass.second.row(position);
            out.box_token_position = position;
            break;
        }
        out.phrase_tokens.push_back(token);
    }
    return out;
}

int PhraseModel::extend_vocab(const std::string &token) {
    const int id = vocab_.add(token);
    auto append_mean_row = [](Matrix &m) {
        const Eigen::RowVectorXf mean = m.colwise().mean();
        Matrix grown(m.rows() + 1, m.cols());
        grown.topRows(m.rows()) = m;
        grown.row(m.rows()) = mean;
        m = std::move(grown);
    };
    append_mean_row(token_embedding_.value);
    append_mean_row(output_projection_.value);
    return id;
}

void PhraseModel::collect_parameters(ParameterList &out) {
    image_adapter_.collect_parameters(out);
    out.push_back(&token_embedding_);
    out.push_back(&position_embedding_);
    for (auto &b : blocks_) {
        b.collect_parameters(out);
    }
    final_norm_.collect_parameters(out);
    out.push_back(&output_projection_);
}

ConstParameterList PhraseModel::parameters() const {
    ParameterList list;
    const_cast<PhraseModel *>(this)->collect_parameters(list);
    return {list.begin(), list.end()};
}

double phrase_loss(const Matrix &logits, std::span<const int> target_ids, std::span<const float> loss_mask) {
    Graph g(false);
    const Var loss = g.cross_entropy(g.input(logits), target_ids, loss_mask);
    return g.value(loss)(0, 0);
}

} // namespace medrg
