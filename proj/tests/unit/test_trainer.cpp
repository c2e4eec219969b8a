// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "medrg/errors.hpp"
#include "medrg/synth_data.hpp"
#include "medrg/trainer.hpp"

namespace medrg {
namespace {

struct Bench {
    Vocabulary vocab;
    std::vector<PreparedSample> prepared;
};

Bench make_bench(int n = 8) {
    const CorpusConfig cc = testing::tiny_corpus(n, 4);
    const Corpus corpus = build_corpus(cc);
    Bench b;
    b.vocab = testing::corpus_vocab(corpus.samples);
    const MedRGModel scratch(testing::tiny_config(), b.vocab, 0);
    for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
        b.prepared.push_back(scratch.prepare(corpus.samples[i], render_sample(cc, i, corpus.specs[i])));
    }
    return b;
}

std::vector<const PreparedSample *> pointers(const std::vector<PreparedSample> &samples, std::size_t n) {
    std::vector<const PreparedSample *> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(&samples[i % samples.size()]);
    }
    return out;
}

TrainConfig quick_config() {
    TrainConfig c;
    c.learning_rate = 1e-3;
    c.warmup_steps = 0;
    c.total_steps = 10;
    c.grad_accumulation = 2;
    c.micro_batch = 2;
    c.eval_every = 5;
    c.max_new_tokens = 12;
    return c;
}

float max_abs_diff(const std::vector<Matrix> &a, const std::vector<Matrix> &b) {
    float worst = 0.0f;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, (a[i] - b[i]).cwiseAbs().maxCoeff());
    }
    return worst;
}

bool bit_identical(const std::vector<Matrix> &a, const std::vector<Matrix> &b) {
    if (a.size() != b.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].rows() != b[i].rows() || a[i].cols() != b[i].cols() || !(a[i].array() == b[i].array()).all()) {
            return false;
        }
    }
    return true;
}

TEST(Schedule, WarmupThenLinearDecay) {
    const TrainConfig c;
    EXPECT_EQ(lr_at(0, c), 0.0);
    EXPECT_DOUBLE_EQ(lr_at(50, c), 2.5e-5);
    EXPECT_DOUBLE_EQ(lr_at(100, c), 5e-5);
    EXPECT_DOUBLE_EQ(lr_at(300, c), 2.5e-5);
    EXPECT_EQ(lr_at(500, c), 0.0);
    EXPECT_THROW(lr_at(-1, c), InvalidArgument);
    EXPECT_THROW(lr_at(501, c), InvalidArgument);
    double previous = 0.0;
    for (int s = 0; s <= 100; ++s) {
        EXPECT_GE(lr_at(s, c), previous);
        previous = lr_at(s, c);
    }
}

TEST(Schedule, ConfigValidation) {
    TrainConfig c;
    EXPECT_EQ(c.samples_per_step(), 20);
    c.warmup_steps = 600;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = TrainConfig{};
    c.micro_batch = 0;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = TrainConfig{};
    c.loss_weights.giou = -1.0;
    EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(AdamWTest, FirstStepMovesByLearningRate) {
    Parameter p{"p", Matrix::Constant(2, 3, 1.0f), false};
    Gradients g;
    g.at(p) = Matrix::Constant(2, 3, 0.5f);
    g.at(p)(0, 0) = -2.0f;
    AdamW opt(0.9, 0.999, 1e-8, 0.01);
    opt.step({&p}, g, 0.1);
    EXPECT_EQ(opt.steps_taken(), 1);
    EXPECT_NEAR(p.value(0, 0), 1.1f, 1e-6);
    EXPECT_NEAR(p.value(1, 2), 0.9f, 1e-6);

    Parameter q{"q", Matrix::Constant(1, 1, 2.0f), true};
    Gradients zero;
    zero.at(q) = Matrix::Zero(1, 1);
    AdamW decay(0.9, 0.999, 1e-8, 0.5);
    decay.step({&q}, zero, 0.1);
    EXPECT_NEAR(q.value(0, 0), 2.0f * (1.0f - 0.05f), 1e-6);
}

TEST(TrainerTest, AccumulationMatchesConcatenatedBatch) {
    const Bench b = make_bench();
    const auto batch = pointers(b.prepared, 8);

    TrainConfig split = quick_config();
    split.grad_accumulation = 4;
    split.micro_batch = 2;
    TrainConfig whole = quick_config();
    whole.grad_accumulation = 1;
    whole.micro_batch = 8;

    MedRGModel ma(testing::tiny_config(), b.vocab, 11);
    MedRGModel mb(testing::tiny_config(), b.vocab, 11);
    Trainer ta(ma, split);
    Trainer tb(mb, whole);
    Gradients ga, gb;
    const StepLosses la = ta.accumulate_gradients(batch, ga);
    const StepLosses lb = tb.accumulate_gradients(batch, gb);
    EXPECT_NEAR(la.total, lb.total, 1e-9);
    for (const Parameter *p : ma.parameters()) {
        const Parameter *q = nullptr;
        for (const Parameter *c : mb.parameters()) {
            if (c->name == p->name) {
                q = c;
            }
        }
        ASSERT_NE(q, nullptr);
        const Matrix *x = ga.find(*p);
        const Matrix *y = gb.find(*q);
        ASSERT_EQ(x == nullptr, y == nullptr) << p->name;
        if (x) {
            EXPECT_LE((*x - *y).cwiseAbs().maxCoeff(), 1e-6f) << p->name;
        }
    }

    ta.train_step(batch);
    tb.train_step(batch);
    EXPECT_LE(max_abs_diff(ma.snapshot(), mb.snapshot()), 1e-6f);
}

TEST(TrainerTest, TotalIsTheWeightedSum) {
    const Bench b = make_bench();
    const auto batch = pointers(b.prepared, 4);
    TrainConfig c = quick_config();
    c.loss_weights = {0.7, 2.0, 0.4};
    MedRGModel model(testing::tiny_config(), b.vocab, 12);
    Trainer t(model, c);
    Gradients g;
    const StepLosses l = t.accumulate_gradients(batch, g);
    EXPECT_NEAR(l.total, 0.7 * l.phrase + 2.0 * l.l1 + 0.4 * l.giou, 1e-6);
    EXPECT_DOUBLE_EQ(l.box(), l.l1 + l.giou);
    EXPECT_GT(l.phrase, 0.0);
    EXPECT_GT(l.giou, 0.0);
}

TEST(TrainerTest, ZeroPhraseWeightStillTrainsLanguageBlocks) {
    const Bench b = make_bench();
    const auto batch = pointers(b.prepared, 4);
    TrainConfig c = quick_config();
    c.loss_weights.phrase = 0.0;
    MedRGModel model(testing::tiny_config(), b.vocab, 13);
    Trainer t(model, c);
    Gradients g;
    t.accumulate_gradients(batch, g);
    double blocks = 0.0;
    for (const Parameter *p : model.parameters()) {
        const Matrix *gr = g.find(*p);
        if (p->name == "lm.output_projection") {
            EXPECT_TRUE(gr == nullptr || gr->cwiseAbs().maxCoeff() == 0.0f);
        } else if (gr && p->name.rfind("lm.block", 0) == 0) {
            blocks += gr->norm();
        }
    }
    EXPECT_GT(blocks, 0.0);
}

TEST(TrainerTest, InitialLossNearLogVocabPlusBoxLoss) {
    const Bench b = make_bench();
    const auto batch = pointers(b.prepared, 8);
    MedRGModel model(testing::tiny_config(), b.vocab, 14);
    Trainer t(model, quick_config());
    Gradients g;
    const StepLosses l = t.accumulate_gradients(batch, g);
    const double expected = std::log(static_cast<double>(b.vocab.size())) + l.box();
    EXPECT_NEAR(l.total, expected, 0.1 * expected);
}

TEST(TrainerTest, StepsAreDeterministic) {
    const Bench b = make_bench();
    const auto batch = pointers(b.prepared, 4);
    auto run = [&](int threads) {
        TrainConfig c = quick_config();
        c.threads = threads;
        MedRGModel model(testing::tiny_config(), b.vocab, 15);
        Trainer t(model, c);
        std::vector<double> totals;
        for (int s = 0; s < 10; ++s) {
            totals.push_back(t.train_step(batch).total);
        }
        EXPECT_EQ(t.step(), 10);
        return std::pair{totals, model.snapshot()};
    };
    const auto [la, pa] = run(1);
    const auto [lb, pb] = run(1);
    const auto [lc, pc] = run(3);
    EXPECT_EQ(la, lb);
    EXPECT_TRUE(bit_identical(pa, pb));
    EXPECT_EQ(la, lc);
    EXPECT_TRUE(bit_identical(pa, pc));
    EXPECT_LT(la.back(), la.front());
}

TEST(TrainerTest, EveryLayerMovesAfterAStep) {
    const Bench b = make_bench();
    const auto batch = pointers(b.prepared, 4);
    MedRGModel model(testing::tiny_config(), b.vocab, 16);
    const std::vector<Matrix> before = model.snapshot();
    Trainer t(model, quick_config());
    t.train_step(batch);
    const std::vector<Matrix> after = model.snapshot();
    const ConstParameterList params = std::as_const(model).parameters();
    ASSERT_EQ(params.size(), before.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        EXPECT_FALSE((before[i].array() == after[i].array()).all()) << params[i]->name;
    }
}

TEST(TrainerTest, NonFiniteLossNamesTheTerm) {
    const Bench b = make_bench();
    const auto batch = pointers(b.prepared, 4);
    MedRGModel model(testing::tiny_config(), b.vocab, 17);
    for (Parameter *p : model.parameters()) {
        if (p->name == "lm.output_projection") {
            p->value(0, 0) = std::numeric_limits<float>::quiet_NaN();
        }
    }
    Trainer t(model, quick_config());
    try {
        t.train_step(batch);
        FAIL() << "expected NonFiniteLoss";
    } catch (const NonFiniteLoss &e) {
        EXPECT_EQ(e.term(), "L_p");
        EXPECT_EQ(e.step(), 1);
    }
}

TEST(FitTest, ZeroStepsOnlyValidates) {
    const Bench b = make_bench();
    TrainConfig c = quick_config();
    c.total_steps = 0;
    MedRGModel model(testing::tiny_config(), b.vocab, 18);
    const std::vector<Matrix> before = model.snapshot();
    const std::span<const PreparedSample> all(b.prepared);
    const FitResult r = fit(model, all.first(6), all.subspan(6), c);
    EXPECT_TRUE(r.state.history.empty());
    ASSERT_EQ(r.state.validations.size(), 1u);
    EXPECT_EQ(r.state.validations[0].first, 0);
    EXPECT_EQ(r.state.best_step, 0);
    EXPECT_TRUE(bit_identical(before, model.snapshot()));
}

TEST(FitTest, HistoryLogAndBestCheckpoint) {
    const Bench b = make_bench();
    testing::TempDir dir;
    TrainConfig c = quick_config();
    c.total_steps = 5;
    c.eval_every = 2;
    MedRGModel model(testing::tiny_config(), b.vocab, 19);
    const std::span<const PreparedSample> all(b.prepared);
    FitOptions options;
    options.best_checkpoint = dir / "best.ckpt";
    options.log_path = dir / "log.jsonl";
    int callbacks = 0;
    options.on_step = [&](const StepLosses &) { ++callbacks; };
    const FitResult r = fit(model, all.first(6), all.subspan(6), c, options);

    ASSERT_EQ(r.state.history.size(), 5u);
    EXPECT_EQ(callbacks, 5);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(r.state.history[i].step, static_cast<long>(i + 1));
        EXPECT_DOUBLE_EQ(r.state.history[i].lr, lr_at(static_cast<int>(i + 1), c));
    }
    std::vector<long> eval_steps;
    for (const auto &[step, miou] : r.state.validations) {
        eval_steps.push_back(step);
        EXPECT_LE(miou, r.state.best_val_miou);
    }
    EXPECT_EQ(eval_steps, (std::vector<long>{0, 2, 4, 5}));

    std::ifstream log(dir / "log.jsonl");
    std::string line;
    int lines = 0;
    while (std::getline(log, line)) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_TRUE(j.contains("L_all") && j.contains("L_p") && j.contains("L_l1") && j.contains("L_giou"));
        ++lines;
    }
    EXPECT_EQ(lines, 5);

    ASSERT_TRUE(std::filesystem::exists(dir / "best.ckpt"));
    const MedRGModel reloaded = load_checkpoint(dir / "best.ckpt");
    EXPECT_TRUE(bit_identical(reloaded.snapshot(), r.best_parameters));
    model.restore(r.best_parameters);
    const auto held_out = all.subspan(6);
    EXPECT_EQ(predict(reloaded, held_out, c.max_new_tokens), predict(model, held_out, c.max_new_tokens));

    // A second fit truncates the log.
    c.total_steps = 2;
    MedRGModel again(testing::tiny_config(), b.vocab, 19);
    fit(again, all.first(6), all.subspan(6), c, options);
    std::ifstream log2(dir / "log.jsonl");
    lines = 0;
    while (std::getline(log2, line)) {
        ++lines;
    }
    EXPECT_EQ(lines, 2);
}

} // namespace
} // namespace medrg
