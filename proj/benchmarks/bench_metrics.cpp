// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "medrg/box_math.hpp"
#include "medrg/rng.hpp"
#include "medrg/synth_data.hpp"
#include "medrg/text_metrics.hpp"

namespace {

medrg::BoundingBox random_box(medrg::Rng &rng) {
    const double x = rng.uniform(0.0, 0.8);
    const double y = rng.uniform(0.0, 0.8);
    return medrg::BoundingBox::normalized(x, y, rng.uniform(0.01, 1.0 - x), rng.uniform(0.01, 1.0 - y));
}

void BM_Giou(benchmark::State &state) {
    medrg::Rng rng(1);
    std::vector<std::pair<medrg::BoundingBox, medrg::BoundingBox>> pairs;
    for (int i = 0; i < 1024; ++i) {
        pairs.emplace_back(random_box(rng), random_box(rng));
    }
    std::size_t i = 0;
    for (auto _ : state) {
        const auto &[a, b] = pairs[i++ & 1023];
        benchmark::DoNotOptimize(medrg::giou(a, b));
    }
}
BENCHMARK(BM_Giou);

void BM_BoxLossThroughParameterization(benchmark::State &state) {
    medrg::Rng rng(2);
    const auto target = random_box(rng);
    const medrg::Vec4 raw{0.1, -0.2, 0.3, 0.05};
    for (auto _ : state) {
        benchmark::DoNotOptimize(medrg::box_loss(medrg::parameterize_box(raw).box, target));
    }
}
BENCHMARK(BM_BoxLossThroughParameterization);

void BM_ScoreDetections(benchmark::State &state) {
    medrg::Rng rng(3);
    std::vector<medrg::BoxPair> pairs;
    for (int i = 0; i < state.range(0); ++i) {
        pairs.push_back({random_box(rng), random_box(rng)});
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(medrg::score_detections(pairs));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ScoreDetections)->Arg(100)->Arg(1000);

void BM_PhraseScores(benchmark::State &state) {
    const medrg::Corpus corpus = medrg::build_corpus([&] {
        medrg::CorpusConfig c;
        c.n_patients = static_cast<int>(state.range(0));
        return c;
    }());
    std::vector<medrg::Tokens> cands, refs;
    for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
        refs.push_back(medrg::tokenize(corpus.samples[i].phrase));
        cands.push_back(medrg::tokenize(corpus.samples[(i + 1) % corpus.samples.size()].phrase));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(medrg::score_token_lists(cands, refs));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PhraseScores)->Arg(100)->Arg(867);

} // namespace
