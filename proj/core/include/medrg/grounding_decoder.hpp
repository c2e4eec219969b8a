// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "medrg/autograd.hpp"
#include "medrg/box_math.hpp"
#include "medrg/image.hpp"
#include "medrg/layers.hpp"

namespace medrg {

struct VisionConfig {
    int image_height = 224;
    int image_width = 224;
    int patch_size = 16;
    int encoder_dim = 192;
    int encoder_layers = 4;
    int heads = 3;
    int decoder_blocks = 2;
    int embedding_dim = 128; // width of e_box coming from the language model
    /// Ablation: regress the box from the adapted e_box alone, skipping the image.
    bool direct_from_embedding = false;

    void validate() const;
    int grid_height() const { return image_height / patch_size; }
    int grid_width() const { return image_width / patch_size; }
    int num_patches() const { return grid_height() * grid_width(); }

    bool operator==(const VisionConfig &) const = default;
};

/// Raster-order patches (num_patches x patch^2), pixels scaled to [0, 1] and
/// standardized with mean 0.5 and std 0.25.
Matrix patchify(const GrayImage &image, const VisionConfig &config);

/// Vision encoder, e_box-conditioned cross-attention decoder and box MLP head.
class GroundingDecoder {
  public:
    GroundingDecoder(const VisionConfig &config, Rng &rng);

    const VisionConfig &config() const { return config_; }
    void set_direct_from_embedding(bool direct) { config_.direct_from_embedding = direct; }

    /// Patch embedding + learned positions + transformer encoder; returns z_enc (N x D).
    Var encode_image(Graph &g, Var patches) const;
    /// e_box (1 x d) becomes one query token attending over z_enc; returns z_dec (1 x D).
    Var decode_box_state(Graph &g, Var z_enc, Var e_box) const;
    /// Two-layer MLP head; returns the 1 x 4 raw outputs fed to parameterize_box.
    Var box_head(Graph &g, Var z_dec) const;
    /// Raw head outputs for either the full path or the direct-from-embedding path.
    Var ground_raw(Graph &g, Var z_enc, Var e_box) const;

    Matrix encode_image(const GrayImage &image) const;
    Matrix decode_box_state(const Matrix &z_enc, const Matrix &e_box) const;
    BoundingBox predict_box(const Matrix &z_dec) const;
    BoundingBox ground(const GrayImage &image, const Matrix &e_box) const;
    BoundingBox ground(const Matrix &z_enc, const Matrix &e_box) const;

    void collect_parameters(ParameterList &out);

    /// The head's parameters (used to zero them in tests).
    Linear &head_hidden() { return head_hidden_; }
    Linear &head_out() { return head_out_; }

  private:
    VisionConfig config_;
    Linear patch_embedding_;
    Parameter position_embedding_;
    std::vector<SelfAttentionBlock> encoder_;
    LayerNorm encoder_norm_;
    Linear query_adapter_;
    std::vector<CrossAttentionBlock> decoder_;
    LayerNorm decoder_norm_;
    Linear head_hidden_;
    Linear head_out_;
};

} // namespace medrg
