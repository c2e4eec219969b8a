// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "medrg/domain.hpp"
#include "medrg/grounding_decoder.hpp"
#include "medrg/image.hpp"
#include "medrg/phrase_model.hpp"

namespace medrg {

struct ModelConfig {
    PhraseModelConfig language;
    VisionConfig vision;

    /// Copies the cross-component widths (vision_dim, embedding_dim) into place.
    ModelConfig &link();
    void validate() const;
    bool operator==(const ModelConfig &) const = default;
};

/// Adaptive average pooling of a grid_h x grid_w token grid down to side x side
/// cells, as a (side^2 x grid_h*grid_w) matrix.
Matrix adaptive_pool_matrix(int grid_h, int grid_w, int side);

struct LossWeights {
    double phrase = 1.0;
    double l1 = 1.0;
    double giou = 1.0;
};

/// A sample with its pixels patchified and its text encoded for one model.
struct PreparedSample {
    std::string id;
    Matrix patches;
    std::vector<int> report_ids;
    std::vector<int> phrase_ids;
    BoundingBox target; // normalized
};

struct SampleLoss {
    Var total;
    double phrase = 0.0;
    double l1 = 0.0;
    double giou = 0.0;
    BoundingBox box; // prediction at the teacher-forced <BOX> slot
};

/// Language model + grounding decoder sharing the image encoder.
class MedRGModel {
  public:
    MedRGModel(const ModelConfig &config, Vocabulary vocab, std::uint64_t seed);

    const ModelConfig &config() const { return config_; }
    const PhraseModel &language() const { return language_; }
    PhraseModel &language() { return language_; }
    const GroundingDecoder &vision() const { return vision_; }
    GroundingDecoder &vision() { return vision_; }
    const Vocabulary &vocab() const { return language_.vocab(); }

    void set_direct_from_embedding(bool direct);
    int extend_vocab(const std::string &token);

    /// Pooled encoder features forming the language model's image prefix.
    Var image_prefix(Graph &g, Var z_enc) const;
    Matrix image_prefix(const Matrix &z_enc) const;

    /// [BOS] report [EOS] phrase <BOX>; the index of the first phrase token is returned
    /// through answer_start.
    std::vector<int> training_sequence(const PreparedSample &s, std::size_t *answer_start = nullptr) const;

    /// Teacher-forced joint loss for one sample:
    /// weights.phrase * L_p + weights.l1 * L_l1 + weights.giou * L_giou.
    SampleLoss training_loss(Graph &g, const PreparedSample &s, const LossWeights &weights) const;

    /// Generate phrase and e_box, then ground when <BOX> was emitted.
    Prediction predict(const PreparedSample &s, int max_new_tokens = 24) const;

    PreparedSample prepare(const GroundingSample &sample, const GrayImage &image) const;

    ParameterList parameters();
    ConstParameterList parameters() const;

    /// Snapshot / restore of every parameter value, in parameters() order.
    std::vector<Matrix> snapshot() const;
    void restore(const std::vector<Matrix> &values);

  private:
    ModelConfig config_;
    PhraseModel language_;
    GroundingDecoder vision_;
    Matrix pool_;
};

/// Loads every image and prepares every sample. Image paths resolve against
/// the dataset file's directory.
std::vector<PreparedSample> prepare_samples(const MedRGModel &model, std::span<const GroundingSample> samples,
                                            const std::filesystem::path &dataset_path);

std::vector<Prediction> predict(const MedRGModel &model, std::span<const PreparedSample> samples,
                                int max_new_tokens = 24);

/// Single-file checkpoint: magic, JSON header (config, vocabulary, tensor manifest),
/// then raw little-endian float32 tensor data.
void save_checkpoint(const MedRGModel &model, const std::filesystem::path &path);
MedRGModel load_checkpoint(const std::filesystem::path &path);

} // namespace medrg
