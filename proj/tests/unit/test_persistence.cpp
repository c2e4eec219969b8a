// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>

#include "fixtures.hpp"
#include "medrg/config_file.hpp"
#include "medrg/errors.hpp"
#include "medrg/synth_data.hpp"

namespace medrg {
namespace {

TEST(Checkpoint, RoundTripIsBitExact) {
    const CorpusConfig cc = testing::tiny_corpus(4, 2);
    const Corpus corpus = build_corpus(cc);
    ModelConfig mc = testing::tiny_config();
    mc.vision.direct_from_embedding = true;
    const MedRGModel model(mc, testing::corpus_vocab(corpus.samples), 21);
    testing::TempDir dir;
    save_checkpoint(model, dir / "m.ckpt");
    const MedRGModel back = load_checkpoint(dir / "m.ckpt");
    EXPECT_EQ(back.config(), model.config());
    EXPECT_EQ(back.vocab(), model.vocab());
    const auto a = model.snapshot();
    const auto b = back.snapshot();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_TRUE((a[i].array() == b[i].array()).all());
    }
    const PreparedSample p = model.prepare(corpus.samples[0], render_sample(cc, 0, corpus.specs[0]));
    EXPECT_EQ(model.predict(p, 8), back.predict(p, 8));
}

TEST(Checkpoint, BadFilesRaise) {
    testing::TempDir dir;
    EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), IoError);
    std::ofstream(dir / "junk.ckpt") << "definitely not a checkpoint";
    EXPECT_THROW(load_checkpoint(dir / "junk.ckpt"), ParseError);

    const MedRGModel model(testing::tiny_config(), Vocabulary::build(std::vector<std::string>{"a b c"}), 1);
    save_checkpoint(model, dir / "ok.ckpt");
    const auto size = std::filesystem::file_size(dir / "ok.ckpt");
    std::filesystem::resize_file(dir / "ok.ckpt", size - 10);
    EXPECT_THROW(load_checkpoint(dir / "ok.ckpt"), ParseError);
}

TEST(ConfigFile, ParsesKeysAndComments) {
    RunConfig c;
    apply_config_text("# comment\nlearning_rate = 0.001\n\nloss_weights.phrase=0  # ablation\n"
                      "language.hidden_dim = 64\nvision.patch_size = 8\nvision.direct_from_embedding = true\n",
                      c);
    EXPECT_DOUBLE_EQ(c.train.learning_rate, 0.001);
    EXPECT_EQ(c.train.loss_weights.phrase, 0.0);
    EXPECT_EQ(c.model.language.hidden_dim, 64);
    EXPECT_EQ(c.model.vision.embedding_dim, 64);
    EXPECT_EQ(c.model.vision.patch_size, 8);
    EXPECT_TRUE(c.model.vision.direct_from_embedding);
}

TEST(ConfigFile, ErrorsCarryLineNumbers) {
    RunConfig c;
    try {
        apply_config_text("seed = 3\nnot_a_key = 1\n", c, "run.cfg");
        FAIL();
    } catch (const ParseError &e) {
        EXPECT_NE(std::string(e.what()).find("run.cfg"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find('2'), std::string::npos);
    }
    EXPECT_THROW(apply_config_text("total_steps = many\n", c), ParseError);
    EXPECT_THROW(apply_config_text("total_steps\n", c), ParseError);
    EXPECT_THROW(set_config_value(c, "vision.bogus", "1"), InvalidArgument);
    EXPECT_THROW(set_config_value(c, "warmup_steps", "1.5"), InvalidArgument);
}

TEST(ConfigFile, FormatRoundTrips) {
    RunConfig c;
    c.train.learning_rate = 3.25e-4;
    c.train.seed = 12345678901ULL;
    c.train.loss_weights.giou = 0.5;
    c.model.language.layers = 3;
    c.model.vision.heads = 4;
    c.model.link();
    RunConfig back;
    apply_config_text(format_config(c), back);
    EXPECT_EQ(back.model, c.model);
    EXPECT_EQ(back.train.learning_rate, c.train.learning_rate);
    EXPECT_EQ(back.train.seed, c.train.seed);
    EXPECT_EQ(back.train.loss_weights.giou, 0.5);
    const std::string text = format_config(c);
    for (const std::string &key : config_keys()) {
        EXPECT_NE(text.find(key), std::string::npos) << key;
    }
}

} // namespace
} // namespace medrg
