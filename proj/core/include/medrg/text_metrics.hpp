// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "medrg/domain.hpp"

namespace medrg {

using Tokens = std::vector<std::string>;

/// Lower-cases, treats ASCII punctuation as a separator and splits on whitespace.
Tokens tokenize(std::string_view text);

std::string join_tokens(std::span<const std::string> tokens);

/// Additive smoothing applied to zero clipped n-gram counts.
inline constexpr double kBleuEpsilon = 1e-9;

/// Corpus BLEU with uniform weights over orders 1..max_order and the
/// exp(1 - r/c) brevity penalty. One reference per candidate.
double bleu(std::span<const Tokens> candidates, std::span<const Tokens> references, int max_order);

/// Mean over pairs of the LCS F-measure (beta = 1).
double rouge_l(std::span<const Tokens> candidates, std::span<const Tokens> references);

/// Length of the longest common subsequence.
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// CIDEr over n-gram orders 1..4: per-order TF-IDF cosine (IDF = log(N / max(1, df))
/// over the reference corpus), averaged over orders and pairs, scaled by 10.
double cider(std::span<const Tokens> candidates, std::span<const Tokens> references);

struct PhraseScores {
    double bleu1 = 0.0;
    double bleu2 = 0.0;
    double rouge_l = 0.0;
    double cider = 0.0;
};

PhraseScores score_token_lists(std::span<const Tokens> candidates, std::span<const Tokens> references);

/// Aligns predictions to reference samples by sample id. Throws InvalidArgument
/// naming the first reference id without a prediction.
PhraseScores score_phrases(std::span<const Prediction> predictions,
                           std::span<const GroundingSample> references);

} // namespace medrg
