// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include "medrg/text_metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <unordered_map>

#include "medrg/errors.hpp"

namespace medrg {

Tokens tokenize(std::string_view text) {
    Tokens out;
    std::string current;
    for (const char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c) || std::ispunct(c)) {
            if (!current.empty()) {
                out.push_back(std::move(current));
                current.clear();
            }
            continue;
        }
        current.push_back(static_cast<char>(std::tolower(c)));
    }
    if (!current.empty()) {
        out.push_back(std::move(current));
    }
    return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
    std::string out;
    for (const auto &t : tokens) {
        if (!out.empty()) {
            out.push_back(' ');
        }
        out += t;
    }
    return out;
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts ngrams(const Tokens &tokens, std::size_t n) {
    NgramCounts counts;
    if (tokens.size() < n) {
        return counts;
    }
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                          tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
    }
    return counts;
}

void check_corpus(std::span<const Tokens> c, std::span<const Tokens> r, const char *metric) {
    if (c.empty()) {
        throw InvalidArgument(std::string(metric) + ": empty corpus");
    }
    if (c.size() != r.size()) {
        throw InvalidArgument(std::string(metric) + ": candidate and reference counts differ");
    }
}

} // namespace

double bleu(std::span<const Tokens> candidates, std::span<const Tokens> references, int max_order) {
    check_corpus(candidates, references, "bleu");
    if (max_order < 1) {
        throw InvalidArgument("bleu: max_order must be >= 1");
    }
    const auto N = static_cast<std::size_t>(max_order);
    std::vector<double> matches(N, 0.0);
    std::vector<double> totals(N, 0.0);
    double cand_len = 0.0;
    double ref_len = 0.0;

    for (std::size_t i = 0; i < candidates.size(); ++i) {
        cand_len += static_cast<double>(candidates[i].size());
        ref_len += static_cast<double>(references[i].size());
        for (std::size_t n = 1; n <= N; ++n) {
            const NgramCounts cand = ngrams(candidates[i], n);
            const NgramCounts ref = ngrams(references[i], n);
            for (const auto &[gram, count] : cand) {
                totals[n - 1] += count;
                if (auto it = ref.find(gram); it != ref.end()) {
                    matches[n - 1] += std::min(count, it->second);
                }
            }
        }
    }
    if (cand_len == 0.0) {
        return 0.0;
    }

    double log_sum = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        const double m = matches[n] > 0.0 ? matches[n] : kBleuEpsilon;
        const double t = std::max(totals[n], 1.0);
        log_sum += std::log(m / t);
    }
    const double bp = cand_len < ref_len ? std::exp(1.0 - ref_len / cand_len) : 1.0;
    return bp * std::exp(log_sum / static_cast<double>(N));
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l(std::span<const Tokens> candidates, std::span<const Tokens> references) {
    check_corpus(candidates, references, "rouge_l");
    double sum = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto &c = candidates[i];
        const auto &r = references[i];
        if (c.empty() || r.empty()) {
            continue;
        }
        const auto lcs = static_cast<double>(lcs_length(c, r));
        const double p = lcs / static_cast<double>(c.size());
        const double rec = lcs / static_cast<double>(r.size());
        if (p + rec > 0.0) {
            sum += 2.0 * p * rec / (p + rec);
        }
    }
    return sum / static_cast<double>(candidates.size());
}

double cider(std::span<const Tokens> candidates, std::span<const Tokens> references) {
    check_corpus(candidates, references, "cider");
    constexpr std::size_t kOrders = 4;
    const auto n_docs = static_cast<double>(references.size());

    std::array<std::map<std::vector<std::string>, int>, kOrders> doc_freq;
    for (const auto &ref : references) {
        for (std::size_t n = 1; n <= kOrders; ++n) {
            for (const auto &entry : ngrams(ref, n)) {
                ++doc_freq[n - 1][entry.first];
            }
        }
    }
    auto idf = [&](std::size_t order, const std::vector<std::string> &gram) {
        const auto &df = doc_freq[order];
        const auto it = df.find(gram);
        const double d = it == df.end() ? 1.0 : static_cast<double>(it->second);
        return std::log(n_docs / d);
    };

    double total = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        double pair_score = 0.0;
        for (std::size_t n = 1; n <= kOrders; ++n) {
            const NgramCounts cand = ngrams(candidates[i], n);
            const NgramCounts ref = ngrams(references[i], n);
            double dot = 0.0;
            double norm_c = 0.0;
            double norm_r = 0.0;
            for (const auto &[gram, count] : cand) {
                const double w = count * idf(n - 1, gram);
                norm_c += w * w;
                if (auto it = ref.find(gram); it != ref.end()) {
                    dot += w * it->second * idf(n - 1, gram);
                }
            }
            for (const auto &[gram, count] : ref) {
                const double w = count * idf(n - 1, gram);
                norm_r += w * w;
            }
            if (norm_c > 0.0 && norm_r > 0.0) {
                pair_score += dot / (std::sqrt(norm_c) * std::sqrt(norm_r));
            }
        }
        total += pair_score / static_cast<double>(kOrders);
    }
    return 10.0 * total / static_cast<double>(candidates.size());
}

PhraseScores score_token_lists(std::span<const Tokens> candidates, std::span<const Tokens> references) {
    return {bleu(candidates, references, 1), bleu(candidates, references, 2),
            rouge_l(candidates, references), cider(candidates, references)};
}

PhraseScores score_phrases(std::span<const Prediction> predictions,
                           std::span<const GroundingSample> references) {
    std::unordered_map<std::string, const Prediction *> by_id;
    for (const auto &p : predictions) {
        by_id.emplace(p.sample_id, &p);
    }
    std::vector<Tokens> cand;
    std::vector<Tokens> refs;
    cand.reserve(references.size());
    refs.reserve(references.size());
    for (const auto &s : references) {
        const auto it = by_id.find(s.id);
        if (it == by_id.end()) {
            throw InvalidArgument("score_phrases: no prediction for sample '" + s.id + "'");
        }
        cand.push_back(tokenize(it->second->phrase));
        refs.push_back(tokenize(s.phrase));
    }
    return score_token_lists(cand, refs);
}

} // namespace medrg
