// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "medrg/autograd.hpp"
#include "medrg/layers.hpp"
#include "medrg/vocabulary.hpp"

namespace medrg {

struct PhraseModelConfig {
    int hidden_dim = 128;
    int layers = 4;
    int heads = 4;
    int max_length = 256;    // image prefix + tokens
    int prefix_length = 16;  // image tokens; must be a perfect square
    int vision_dim = 192;    // width of the incoming image features

    void validate() const;
    bool operator==(const PhraseModelConfig &) const = default;
};

struct GenerationOutput {
    std::vector<int> phrase_tokens;
    std::optional<Matrix> e_box;              // 1 x hidden_dim
    std::optional<int> box_token_position;    // index into the token sequence (prompt included)
};

/// Image-prefixed causal transformer language model. The vocabulary lives
/// with the model so that extending one extends the other.
class PhraseModel {
  public:
    PhraseModel(const PhraseModelConfig &config, Vocabulary vocab, Rng &rng);

    const PhraseModelConfig &config() const { return config_; }
    const Vocabulary &vocab() const { return vocab_; }
    int vocab_size() const { return vocab_.size(); }

    struct Output {
        Var logits; // L x V
        Var hidden; // L x d, final-norm hidden states at token positions
    };

    /// Causal self-attention over [adapter(image_features) ; embed(token_ids)].
    Output forward(Graph &g, Var image_features, std::span<const int> token_ids) const;

    /// Inference-only forward returning (logits, hidden).
    std::pair<Matrix, Matrix> forward(const Matrix &image_features, std::span<const int> token_ids) const;

    /// [BOS] report [EOS]
    std::vector<int> prompt(std::span<const int> report_ids) const;

    /// Greedy decoding after the prompt. Stops at the first <BOX> or EOS or after
    /// max_new tokens. e_box is the final hidden state at the <BOX> token's slot.
    GenerationOutput generate(const Matrix &image_features, std::span<const int> report_ids,
                              int max_new = 24) const;

    /// Appends `token` to the vocabulary with new embedding and output rows set to
    /// the mean of the existing rows. Returns the new id.
    int extend_vocab(const std::string &token);

    void collect_parameters(ParameterList &out);
    ConstParameterList parameters() const;

    /// Output projection (vocab x d); exposed for gradient inspection.
    const Parameter &output_projection() const { return output_projection_; }

  private:
    PhraseModelConfig config_;
    Vocabulary vocab_;
    Linear image_adapter_;
    Parameter token_embedding_;     // V x d
    Parameter position_embedding_;  // max_length x d
    std::vector<SelfAttentionBlock> blocks_;
    LayerNorm final_norm_;
    Parameter output_projection_;   // V x d
};

/// Mean token-level cross-entropy over positions with mask != 0.
/// Throws InvalidArgument when the mask is all zero.
double phrase_loss(const Matrix &logits, std::span<const int> target_ids, std::span<const float> loss_mask);

} // namespace medrg
