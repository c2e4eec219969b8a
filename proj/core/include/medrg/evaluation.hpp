// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "medrg/box_math.hpp"
#include "medrg/domain.hpp"
#include "medrg/text_metrics.hpp"

namespace medrg {

/// Grounding and phrase-extraction scores. Percentages and CIDEr are rounded
/// to two decimals; the unrounded fractions stay in `detection` and `phrases`.
struct MetricsReport {
    double ap10 = 0.0;
    double ap30 = 0.0;
    double ap50 = 0.0;
    double miou = 0.0;
    double bleu1 = 0.0;
    double bleu2 = 0.0;
    double rouge_l = 0.0;
    double cider = 0.0;
    std::size_t n_samples = 0;

    DetectionScores detection;
    PhraseScores phrases;
};

double round2(double v);

/// Scores predictions against references matched by sample id. Throws
/// InvalidArgument when a reference has no prediction.
MetricsReport evaluate(std::span<const Prediction> predictions, std::span<const GroundingSample> references);

nlohmann::json to_json(const MetricsReport &report);
void save_report(const MetricsReport &report, const std::filesystem::path &path);

/// Two-row table: AP10 AP30 AP50 mIoU | BLEU1 BLEU2 ROUGE_L CIDEr.
std::string format_table(const MetricsReport &report);

} // namespace medrg
