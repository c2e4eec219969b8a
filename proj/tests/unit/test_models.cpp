// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "medrg/errors.hpp"
#include "medrg/model.hpp"
#include "medrg/synth_data.hpp"

namespace medrg {
namespace {

using testing::tiny_config;

struct ModelBench {
    Corpus corpus;
    Vocabulary vocab;
    std::vector<GrayImage> images;
};

ModelBench make_bench(int n = 6, bool include_box = true) {
    ModelBench s;
    const CorpusConfig cc = testing::tiny_corpus(n);
    s.corpus = build_corpus(cc);
    s.vocab = testing::corpus_vocab(s.corpus.samples, include_box);
    for (std::size_t i = 0; i < s.corpus.samples.size(); ++i) {
        s.images.push_back(render_sample(cc, i, s.corpus.specs[i]));
    }
    return s;
}

Matrix random_features(const PhraseModelConfig &c, std::uint64_t seed) {
    Rng rng(seed);
    return normal_matrix(c.prefix_length, c.vision_dim, 1.0f, rng);
}

TEST(Vocabulary, SpecialsAndCounts) {
    std::vector<std::string> corpus;
    for (int i = 0; i < 120; ++i) {
        corpus.push_back("word" + std::to_string(i));
    }
    const Vocabulary v = Vocabulary::build(corpus);
    EXPECT_EQ(v.size(), 125);
    EXPECT_EQ(v.box_id(), Vocabulary::build(corpus).box_id());
    EXPECT_EQ(v.token(v.pad_id()), "<PAD>");
    EXPECT_EQ(v.token(v.bos_id()), "<BOS>");
    EXPECT_EQ(v.decode(v.encode("word7 word19 word3")), "word7 word19 word3");
    EXPECT_EQ(v.encode("unseen")[0], v.unk_id());
    Vocabulary w = v;
    EXPECT_THROW(w.add("<BOX>"), InvalidArgument);
}

TEST(PhraseModel, ForwardShapesAndFiniteness) {
    const ModelBench s = make_bench();
    const ModelConfig mc = tiny_config();
    Rng rng(1);
    const PhraseModel lm(mc.language, s.vocab, rng);
    Rng ids_rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<int> ids(static_cast<std::size_t>(ids_rng.range(1, 20)));
        for (int &id : ids) {
            id = static_cast<int>(ids_rng.below(static_cast<std::uint64_t>(lm.vocab_size())));
        }
        const auto [logits, hidden] = lm.forward(random_features(mc.language, trial), ids);
        ASSERT_EQ(logits.rows(), static_cast<Eigen::Index>(ids.size()));
        ASSERT_EQ(logits.cols(), lm.vocab_size());
        ASSERT_EQ(hidden.cols(), mc.language.hidden_dim);
        EXPECT_TRUE(logits.allFinite());
    }
}

TEST(PhraseModel, OverlongSequenceRejected) {
    const ModelBench s = make_bench();
    const ModelConfig mc = tiny_config();
    Rng rng(1);
    const PhraseModel lm(mc.language, s.vocab, rng);
    const std::vector<int> ids(static_cast<std::size_t>(mc.language.max_length), 5);
    EXPECT_THROW(lm.forward(random_features(mc.language, 0), ids), InvalidArgument);
}

TEST(PhraseModel, CausalityIsExact) {
    const ModelBench s = make_bench();
    const ModelConfig mc = tiny_config();
    Rng rng(3);
    const PhraseModel lm(mc.language, s.vocab, rng);
    const Matrix feats = random_features(mc.language, 4);
    std::vector<int> ids{1, 7, 9, 11, 13, 4, 20, 21};
    const auto [logits_a, hidden_a] = lm.forward(feats, ids);
    for (std::size_t t = 0; t + 1 < ids.size(); ++t) {
        std::vector<int> changed = ids;
        for (std::size_t k = t + 1; k < ids.size(); ++k) {
            changed[k] = (changed[k] + 3) % lm.vocab_size();
        }
        const auto [logits_b, hidden_b] = lm.forward(feats, changed);
        for (std::size_t r = 0; r <= t; ++r) {
            EXPECT_TRUE((logits_a.row(r).array() == logits_b.row(r).array()).all()) << t << " " << r;
            EXPECT_TRUE((hidden_a.row(r).array() == hidden_b.row(r).array()).all());
        }
    }
}

TEST(PhraseModel, ExtendVocabPreservesOldLogitsBitExactly) {
    const ModelBench s = make_bench(6, false);
    ASSERT_FALSE(s.vocab.box_id());
    const ModelConfig mc = tiny_config();
    Rng rng(5);
    PhraseModel lm(mc.language, s.vocab, rng);
    const Matrix feats = random_features(mc.language, 6);
    const std::vector<int> ids{1, 8, 9, 10, 2, 12};
    const auto [before, hidden_before] = lm.forward(feats, ids);
    const int old_v = lm.vocab_size();
    const int id = lm.extend_vocab("<BOX>");
    EXPECT_EQ(id, old_v);
    EXPECT_EQ(lm.vocab_size(), old_v + 1);
    EXPECT_EQ(lm.vocab().box_id(), id);
    const auto [after, hidden_after] = lm.forward(feats, ids);
    EXPECT_TRUE((after.leftCols(old_v).array() == before.array()).all());
    EXPECT_TRUE((hidden_after.array() == hidden_before.array()).all());
    EXPECT_THROW(lm.extend_vocab("<BOX>"), InvalidArgument);
}

TEST(PhraseModel, GenerationDeterministicAndBudgeted) {
    const ModelBench s = make_bench();
    const ModelConfig mc = tiny_config();
    Rng rng(7);
    const PhraseModel lm(mc.language, s.vocab, rng);
    const Matrix feats = random_features(mc.language, 8);
    const std::vector<int> report = s.vocab.encode(s.corpus.samples[0].report);
    const GenerationOutput none = lm.generate(feats, report, 0);
    EXPECT_TRUE(none.phrase_tokens.empty());
    EXPECT_FALSE(none.e_box);
    const GenerationOutput a = lm.generate(feats, report, 10);
    const GenerationOutput b = lm.generate(feats, report, 10);
    EXPECT_EQ(a.phrase_tokens, b.phrase_tokens);
    EXPECT_EQ(a.e_box.has_value(), a.box_token_position.has_value());
    EXPECT_LE(a.phrase_tokens.size(), 10u);
}

TEST(PhraseModel, PhraseLossClosedForms) {
    const std::vector<int> targets{0, 3, 1};
    const std::vector<float> mask{1, 1, 0};
    EXPECT_NEAR(phrase_loss(Matrix::Zero(3, 9), targets, mask), std::log(9.0), 1e-6);
    Matrix sharp = Matrix::Zero(3, 9);
    for (int r = 0; r < 3; ++r) {
        sharp(r, targets[static_cast<std::size_t>(r)]) = 30.0f;
    }
    EXPECT_LT(phrase_loss(sharp, targets, mask), 1e-3);
    EXPECT_THROW(phrase_loss(sharp, targets, std::vector<float>{0, 0, 0}), InvalidArgument);
}

TEST(GroundingDecoder, EncoderShapesAndSensitivity) {
    const ModelBench s = make_bench();
    const ModelConfig mc = tiny_config();
    Rng rng(9);
    const GroundingDecoder dec(mc.vision, rng);
    const Matrix z0 = dec.encode_image(s.images[0]);
    EXPECT_EQ(z0.rows(), mc.vision.num_patches());
    EXPECT_EQ(z0.cols(), mc.vision.encoder_dim);
    EXPECT_TRUE(z0.allFinite());
    EXPECT_TRUE((z0.array() == dec.encode_image(s.images[0]).array()).all());
    EXPECT_FALSE((z0.array() == dec.encode_image(s.images[1]).array()).all());
    EXPECT_TRUE(dec.encode_image(GrayImage(32, 32, 0)).allFinite());
    EXPECT_THROW(dec.encode_image(GrayImage(48, 32, 0)), InvalidArgument);
}

TEST(GroundingDecoder, DefaultGridHas196Patches) { EXPECT_EQ(VisionConfig{}.num_patches(), 196); }

TEST(GroundingDecoder, DecoderDependsOnBothInputs) {
    const ModelBench s = make_bench();
    const ModelConfig mc = tiny_config();
    Rng rng(10);
    const GroundingDecoder dec(mc.vision, rng);
    Rng erng(11);
    const Matrix e1 = normal_matrix(1, mc.vision.embedding_dim, 1.0f, erng);
    const Matrix e2 = normal_matrix(1, mc.vision.embedding_dim, 1.0f, erng);
    const Matrix za = dec.encode_image(s.images[0]);
    const Matrix zb = dec.encode_image(s.images[1]);
    const Matrix d1 = dec.decode_box_state(za, e1);
    EXPECT_EQ(d1.cols(), mc.vision.encoder_dim);
    EXPECT_FALSE((d1.array() == dec.decode_box_state(za, e2).array()).all());
    EXPECT_FALSE((d1.array() == dec.decode_box_state(zb, e1).array()).all());
}

TEST(GroundingDecoder, ZeroHeadGivesCentreBoxAndAblationIgnoresImage) {
    const ModelBench s = make_bench();
    const ModelConfig mc = tiny_config();
    Rng rng(12);
    GroundingDecoder dec(mc.vision, rng);
    Rng erng(13);
    const Matrix e = normal_matrix(1, mc.vision.embedding_dim, 1.0f, erng);

    const BoundingBox full_a = dec.ground(s.images[0], e);
    const BoundingBox full_b = dec.ground(s.images[1], e);
    EXPECT_EQ(check_box(full_a), "");
    EXPECT_NE(full_a, full_b);

    dec.set_direct_from_embedding(true);
    const BoundingBox direct_a = dec.ground(s.images[0], e);
    EXPECT_EQ(check_box(direct_a), "");
    EXPECT_EQ(direct_a, dec.ground(s.images[1], e));
    dec.set_direct_from_embedding(false);

    for (Linear *l : {&dec.head_hidden(), &dec.head_out()}) {
        l->weight.value.setZero();
        l->bias.value.setZero();
    }
    const BoundingBox centre = dec.ground(s.images[0], e);
    EXPECT_DOUBLE_EQ(centre.x, 0.5);
    EXPECT_DOUBLE_EQ(centre.y, 0.5);
    EXPECT_DOUBLE_EQ(centre.w, 0.25);
    EXPECT_DOUBLE_EQ(centre.h, 0.25);
}

TEST(GroundingDecoder, PredictBoxValidForArbitraryState) {
    const ModelConfig mc = tiny_config();
    Rng rng(14);
    const GroundingDecoder dec(mc.vision, rng);
    for (int i = 0; i < 200; ++i) {
        const Matrix z = normal_matrix(1, mc.vision.encoder_dim, 50.0f, rng);
        const BoundingBox b = dec.predict_box(z);
        EXPECT_EQ(check_box(b), "");
        EXPECT_LE(b.x + b.w, 1.0);
        EXPECT_LE(b.y + b.h, 1.0);
    }
}

TEST(MedRGModel, EboxIsHiddenWidthAndIgnoresSuffix) {
    const ModelBench s = make_bench();
    const MedRGModel model(tiny_config(), s.vocab, 1);
    const PreparedSample p = model.prepare(s.corpus.samples[0], s.images[0]);
    const Matrix z = model.vision().encode_image(s.images[0]);
    const Matrix prefix = model.image_prefix(z);
    std::vector<int> seq = model.training_sequence(p);
    const int box_pos = static_cast<int>(seq.size()) - 1;
    ASSERT_EQ(seq.back(), *s.vocab.box_id());
    const auto [la, ha] = model.language().forward(prefix, seq);
    EXPECT_EQ(ha.cols(), model.config().language.hidden_dim);
    std::vector<int> longer = seq;
    for (int k = 0; k < 5; ++k) {
        longer.push_back(8 + k);
    }
    const auto [lb, hb] = model.language().forward(prefix, longer);
    EXPECT_TRUE((ha.row(box_pos).array() == hb.row(box_pos).array()).all());
}

TEST(MedRGModel, BoxLossGradientReachesLanguageModel) {
    const ModelBench s = make_bench();
    MedRGModel model(tiny_config(), s.vocab, 2);
    const PreparedSample p = model.prepare(s.corpus.samples[1], s.images[1]);
    Graph g;
    const SampleLoss loss = model.training_loss(g, p, LossWeights{0.0, 1.0, 1.0});
    g.backward(loss.total);
    Gradients grads;
    g.flush_parameter_grads(grads);
    double lm_blocks = 0.0;
    for (const Parameter *param : model.language().parameters()) {
        const Matrix *gr = grads.find(*param);
        if (param == &model.language().output_projection()) {
            EXPECT_TRUE(gr == nullptr || gr->cwiseAbs().maxCoeff() == 0.0f);
        } else if (gr && param->name.find("block") != std::string::npos) {
            lm_blocks += gr->norm();
        }
    }
    EXPECT_GT(lm_blocks, 0.0);
}

TEST(MedRGModel, InitialLossNearLogVPlusBoxLoss) {
    const ModelBench s = make_bench();
    const MedRGModel model(tiny_config(), s.vocab, 3);
    const PreparedSample p = model.prepare(s.corpus.samples[2], s.images[2]);
    Graph g(false);
    const SampleLoss loss = model.training_loss(g, p, LossWeights{});
    const double total = g.value(loss.total)(0, 0);
    const double expected = std::log(static_cast<double>(s.vocab.size())) + loss.l1 + loss.giou;
    EXPECT_NEAR(total, expected, 0.1 * expected);
    EXPECT_NEAR(total, loss.phrase + loss.l1 + loss.giou, 1e-5);
}

} // namespace
} // namespace medrg
