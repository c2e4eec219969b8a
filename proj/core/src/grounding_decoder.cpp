// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include "medrg/grounding_decoder.hpp"

#include <string>

#include "medrg/errors.hpp"

namespace medrg {

void VisionConfig::validate() const {
    if (image_height <= 0 || image_width <= 0 || patch_size <= 0 || encoder_dim <= 0 ||
        encoder_layers <= 0 || heads <= 0 || decoder_blocks <= 0 || embedding_dim <= 0) {
        throw InvalidArgument("VisionConfig: all sizes must be positive");
    }
    if (image_height % patch_size != 0 || image_width % patch_size != 0) {
        throw InvalidArgument("VisionConfig: image size must be divisible by patch size");
    }
    if (encoder_dim % heads != 0) {
        throw InvalidArgument("VisionConfig: encoder_dim must be divisible by heads");
    }
}

Matrix patchify(const GrayImage &image, const VisionConfig &config) {
    if (image.width != config.image_width || image.height != config.image_height) {
        throw InvalidArgument("encode_image: expected " + std::to_string(config.image_width) + "x" +
                              std::to_string(config.image_height) + " image, got " +
                              std::to_string(image.width) + "x" + std::to_string(image.height));
    }
    const int p = config.patch_size;
    Matrix out(config.num_patches(), p * p);
    for (int gy = 0; gy < config.grid_height(); ++gy) {
        for (int gx = 0; gx < config.grid_width(); ++gx) {
            const int row = gy * config.grid_width() + gx;
            for (int dy = 0; dy < p; ++dy) {
                for (int dx = 0; dx < p; ++dx) {
                    const float v = static_cast<float>(image.at(gx * p + dx, gy * p + dy)) / 255.0f;
                    out(row, dy * p + dx) = (v - 0.5f) / 0.25f;
                }
            }
        }
    }
    return out;
}

GroundingDecoder::GroundingDecoder(const VisionConfig &config, Rng &rng) : config_(config) {
    config_.validate();
    const int D = config_.encoder_dim;
    const int p = config_.patch_size;
    patch_embedding_ = Linear("vision.patch_embedding", p * p, D, rng);
    position_embedding_ = {"vision.position_embedding", normal_matrix(config_.num_patches(), D, kInitStd, rng), false};
    for (int l = 0; l < config_.encoder_layers; ++l) {
        encoder_.emplace_back("vision.encoder" + std::to_string(l), D, config_.heads, false,
                              config_.encoder_layers, rng);
    }
    encoder_norm_ = LayerNorm("vision.encoder_norm", D);
    query_adapter_ = Linear("vision.query_adapter", config_.embedding_dim, D, rng);
    for (int b = 0; b < config_.decoder_blocks; ++b) {
        decoder_.emplace_back("vision.decoder" + std::to_string(b), D, config_.heads,
                              config_.decoder_blocks, rng);
    }
    decoder_norm_ = LayerNorm("vision.decoder_norm", D);
    head_hidden_ = Linear("vision.head_hidden", D, D, rng);
    head_out_ = Linear("vision.head_out", D, 4, rng);
}

Var GroundingDecoder::encode_image(Graph &g, Var patches) const {
    Var x = patch_embedding_(g, patches);
    x = g.add(x, g.param(position_embedding_));
    for (const auto &block : encoder_) {
        x = block(g, x);
    }
    return encoder_norm_(g, x);
}

Var GroundingDecoder::decode_box_state(Graph &g, Var z_enc, Var e_box) const {
    if (g.value(e_box).rows() != 1 || g.value(e_box).cols() != config_.embedding_dim) {
        throw InvalidArgument("decode_box_state: e_box must be 1x" + std::to_string(config_.embedding_dim));
    }
    Var q = query_adapter_(g, e_box);
    for (const auto &block : decoder_) {
        q = block(g, q, z_enc);
    }
    return decoder_norm_(g, q);
}

Var GroundingDecoder::box_head(Graph &g, Var z_dec) const {
    return head_out_(g, g.gelu(head_hidden_(g, z_dec)));
}

Var GroundingDecoder::ground_raw(Graph &g, Var z_enc, Var e_box) const {
    if (config_.direct_from_embedding) {
        return box_head(g, query_adapter_(g, e_box));
    }
    return box_head(g, decode_box_state(g, z_enc, e_box));
}

Matrix GroundingDecoder::encode_image(const GrayImage &image) const {
    Graph g(false);
    return g.value(encode_image(g, g.input(patchify(image, config_))));
}

Matrix GroundingDecoder::decode_box_state(const Matrix &z_enc, const Matrix &e_box) const {
    Graph g(false);
    return g.value(decode_box_state(g, g.input(z_enc), g.input(e_box)));
}

namespace {

BoundingBox box_from_raw(const Matrix &raw) {
    return parameterize_box({raw(0, 0), raw(0, 1), raw(0, 2), raw(0, 3)}).box;
}

} // namespace

BoundingBox GroundingDecoder::predict_box(const Matrix &z_dec) const {
    Graph g(false);
    return box_from_raw(g.value(box_head(g, g.input(z_dec))));
}

BoundingBox GroundingDecoder::ground(const Matrix &z_enc, const Matrix &e_box) const {
    Graph g(false);
    return box_from_raw(g.value(ground_raw(g, g.input(z_enc), g.input(e_box))));
}

BoundingBox GroundingDecoder::ground(const GrayImage &image, const Matrix &e_box) const {
    if (config_.direct_from_embedding) {
        Graph g(false);
        const Var e = g.input(e_box);
        return box_from_raw(g.value(box_head(g, query_adapter_(g, e))));
    }
    return ground(encode_image(image), e_box);
}

void GroundingDecoder::collect_parameters(ParameterList &out) {
    patch_embedding_.collect_parameters(out);
    out.push_back(&position_embedding_);
    for (auto &b : encoder_) {
        b.collect_parameters(out);
    }
    encoder_norm_.collect_parameters(out);
    query_adapter_.collect_parameters(out);
    for (auto &b : decoder_) {
        b.collect_parameters(out);
    }
    decoder_norm_.collect_parameters(out);
    head_hidden_.collect_parameters(out);
    head_out_.collect_parameters(out);
}

} // namespace medrg
