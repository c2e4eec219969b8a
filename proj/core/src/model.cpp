// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include "medrg/model.hpp"

#include <cmath>

#include "medrg/errors.hpp"

namespace medrg {

ModelConfig &ModelConfig::link() {
    language.vision_dim = vision.encoder_dim;
    vision.embedding_dim = language.hidden_dim;
    return *this;
}

void ModelConfig::validate() const {
    language.validate();
    vision.validate();
    if (language.vision_dim != vision.encoder_dim || vision.embedding_dim != language.hidden_dim) {
        throw InvalidArgument("ModelConfig: language/vision widths are not linked");
    }
}

Matrix adaptive_pool_matrix(int grid_h, int grid_w, int side) {
    Matrix pool = Matrix::Zero(side * side, grid_h * grid_w);
    for (int oy = 0; oy < side; ++oy) {
        const int y0 = oy * grid_h / side;
        const int y1 = ((oy + 1) * grid_h + side - 1) / side;
        for (int ox = 0; ox < side; ++ox) {
            const int x0 = ox * grid_w / side;
            const int x1 = ((ox + 1) * grid_w + side - 1) / side;
            const float w = 1.0f / static_cast<float>((y1 - y0) * (x1 - x0));
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) {
                    pool(oy * side + ox, y * grid_w + x) = w;
                }
            }
        }
    }
    return pool;
}

namespace {

ModelConfig checked(ModelConfig c) {
    c.validate();
    return c;
}

} // namespace

MedRGModel::MedRGModel(const ModelConfig &config, Vocabulary vocab, std::uint64_t seed)
    : config_(checked(config)),
      language_([&] {
          Rng rng(mix_seed(seed, 1));
          return PhraseModel(config_.language, std::move(vocab), rng);
      }()),
      vision_([&] {
          Rng rng(mix_seed(seed, 2));
          return GroundingDecoder(config_.vision, rng);
      }()) {
    const int side = static_cast<int>(std::lround(std::sqrt(config_.language.prefix_length)));
    pool_ = adaptive_pool_matrix(config_.vision.grid_height(), config_.vision.grid_width(), side);
}

void MedRGModel::set_direct_from_embedding(bool direct) {
    config_.vision.direct_from_embedding = direct;
    vision_.set_direct_from_embedding(direct);
}

int MedRGModel::extend_vocab(const std::string &token) { return language_.extend_vocab(token); }

Var MedRGModel::image_prefix(Graph &g, Var z_enc) const { return g.matmul(g.input(pool_), z_enc); }

Matrix MedRGModel::image_prefix(const Matrix &z_enc) const { return pool_ * z_enc; }

std::vector<int> MedRGModel::training_sequence(const PreparedSample &s, std::size_t *answer_start) const {
    const auto box = vocab().box_id();
    if (!box) {
        throw InvalidArgument("training requires <BOX> in the vocabulary");
    }
    std::vector<int> seq = language_.prompt(s.report_ids);
    if (answer_start) {
        *answer_start = seq.size();
    }
    seq.insert(seq.end(), s.phrase_ids.begin(), s.phrase_ids.end());
    seq.push_back(*box);
    return seq;
}

SampleLoss MedRGModel::training_loss(Graph &g, const PreparedSample &s, const LossWeights &weights) const {
    std::size_t answer_start = 0;
    const std::vector<int> seq = training_sequence(s, &answer_start);

    const Var z_enc = vision_.encode_image(g, g.input(s.patches));
    const PhraseModel::Output lm = language_.forward(g, image_prefix(g, z_enc), seq);

    // Row t predicts token t + 1; only the answer (phrase + <BOX>) is supervised.
    std::vector<int> targets(seq.size(), 0);
    std::vector<float> mask(seq.size(), 0.0f);
    for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
        targets[t] = seq[t + 1];
        mask[t] = t + 1 >= answer_start ? 1.0f : 0.0f;
    }
    const Var l_phrase = g.cross_entropy(lm.logits, targets, mask);

    const auto box_pos = static_cast<Eigen::Index>(seq.size() - 1);
    const Var e_box = g.slice_rows(lm.hidden, box_pos, 1);
    const Var raw = vision_.ground_raw(g, z_enc, e_box);
    Graph::BoxLossTerms terms;
    const Var l_box = g.box_regression_loss(raw, s.target, weights.l1, weights.giou, &terms);

    const std::array<Var, 2> parts{l_phrase, l_box};
    const std::array<float, 2> w{static_cast<float>(weights.phrase), 1.0f};
    SampleLoss out;
    out.total = g.weighted_sum(parts, w);
    out.phrase = g.value(l_phrase)(0, 0);
    out.l1 = terms.l1;
    out.giou = terms.giou;
    out.box = terms.box;
    return out;
}

Prediction MedRGModel::predict(const PreparedSample &s, int max_new_tokens) const {
    Graph g(false);
    const Var z_enc_var = vision_.encode_image(g, g.input(s.patches));
    const Matrix &z_enc = g.value(z_enc_var);
    const GenerationOutput gen = language_.generate(image_prefix(z_enc), s.report_ids, max_new_tokens);
    Prediction p;
    p.sample_id = s.id;
    p.phrase = vocab().decode(gen.phrase_tokens);
    if (gen.e_box) {
        p.box = vision_.ground(z_enc, *gen.e_box);
    }
    return p;
}

PreparedSample MedRGModel::prepare(const GroundingSample &sample, const GrayImage &image) const {
    PreparedSample p;
    p.id = sample.id;
    p.patches = patchify(image, config_.vision);
    p.report_ids = vocab().encode(sample.report);
    p.phrase_ids = vocab().encode(sample.phrase);
    p.target = sample.normalized_box();
    return p;
}

ParameterList MedRGModel::parameters() {
    ParameterList list;
    language_.collect_parameters(list);
    vision_.collect_parameters(list);
    return list;
}

ConstParameterList MedRGModel::parameters() const {
    const ParameterList list = const_cast<MedRGModel *>(this)->parameters();
    return {list.begin(), list.end()};
}

std::vector<Matrix> MedRGModel::snapshot() const {
    std::vector<Matrix> out;
    for (const Parameter *p : parameters()) {
        out.push_back(p->value);
    }
    return out;
}

void MedRGModel::restore(const std::vector<Matrix> &values) {
    const ParameterList params = parameters();
    if (values.size() != params.size()) {
        throw InvalidArgument("restore: parameter count mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i]->value = values[i];
    }
}

std::vector<PreparedSample> prepare_samples(const MedRGModel &model, std::span<const GroundingSample> samples,
                                            const std::filesystem::path &dataset_path) {
    std::vector<PreparedSample> out;
    out.reserve(samples.size());
    for (const auto &s : samples) {
        out.push_back(model.prepare(s, read_pgm(resolve_image_path(dataset_path, s))));
    }
    return out;
}

std::vector<Prediction> predict(const MedRGModel &model, std::span<const PreparedSample> samples,
                                int max_new_tokens) {
    std::vector<Prediction> out;
    out.reserve(samples.size());
    for (const auto &s : samples) {
        out.push_back(model.predict(s, max_new_tokens));
    }
    return out;
}

} // namespace medrg
