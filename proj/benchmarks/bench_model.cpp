// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <array>

#include "medrg/synth_data.hpp"
#include "medrg/trainer.hpp"

namespace {

struct Fixture {
    medrg::ModelConfig config;
    medrg::Corpus corpus;
    std::vector<medrg::GrayImage> images;
    medrg::Vocabulary vocab;

    explicit Fixture(int size) {
        config.vision.image_width = size;
        config.vision.image_height = size;
        config.link();
        medrg::CorpusConfig cc;
        cc.width = size;
        cc.height = size;
        corpus = medrg::build_corpus(cc);
        std::vector<std::string> text;
        for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
            images.push_back(medrg::render_sample(cc, i, corpus.specs[i]));
            text.push_back(corpus.samples[i].report);
            text.push_back(corpus.samples[i].phrase);
        }
        vocab = medrg::Vocabulary::build(text);
    }
};

void BM_EncodeImage(benchmark::State &state) {
    const Fixture f(static_cast<int>(state.range(0)));
    const medrg::MedRGModel model(f.config, f.vocab, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.vision().encode_image(f.images[0]));
    }
}
BENCHMARK(BM_EncodeImage)->Arg(224)->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State &state) {
    const Fixture f(224);
    const medrg::MedRGModel model(f.config, f.vocab, 1);
    const medrg::PreparedSample s = model.prepare(f.corpus.samples[0], f.images[0]);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.predict(s, 24));
    }
}
BENCHMARK(BM_Predict)->Unit(benchmark::kMillisecond);

void BM_TrainingSampleGradient(benchmark::State &state) {
    const Fixture f(224);
    medrg::MedRGModel model(f.config, f.vocab, 1);
    const medrg::PreparedSample s = model.prepare(f.corpus.samples[0], f.images[0]);
    medrg::TrainConfig tc;
    tc.grad_accumulation = 1;
    tc.micro_batch = 1;
    medrg::Trainer trainer(model, tc);
    const std::array<const medrg::PreparedSample *, 1> batch{&s};
    for (auto _ : state) {
        medrg::Gradients g;
        benchmark::DoNotOptimize(trainer.accumulate_gradients(batch, g));
    }
}
BENCHMARK(BM_TrainingSampleGradient)->Unit(benchmark::kMillisecond);

} // namespace
