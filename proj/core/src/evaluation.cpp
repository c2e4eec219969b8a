// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include "medrg/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_map>

#include "medrg/errors.hpp"

namespace medrg {

double round2(double v) { return std::round(v * 100.0) / 100.0; }

MetricsReport evaluate(std::span<const Prediction> predictions, std::span<const GroundingSample> references) {
    std::unordered_map<std::string, const Prediction *> by_id;
    for (const Prediction &p : predictions) {
        by_id.emplace(p.sample_id, &p);
    }
    std::vector<BoxPair> pairs;
    pairs.reserve(references.size());
    for (const GroundingSample &s : references) {
        const auto it = by_id.find(s.id);
        if (it == by_id.end()) {
            throw InvalidArgument("evaluate: no prediction for sample '" + s.id + "'");
        }
        pairs.push_back({it->second->box, s.normalized_box()});
    }

    MetricsReport r;
    r.n_samples = references.size();
    r.detection = score_detections(pairs);
    r.phrases = score_phrases(predictions, references);
    r.ap10 = round2(100.0 * r.detection.ap10);
    r.ap30 = round2(100.0 * r.detection.ap30);
    r.ap50 = round2(100.0 * r.detection.ap50);
    r.miou = round2(100.0 * r.detection.miou);
    r.bleu1 = round2(100.0 * r.phrases.bleu1);
    r.bleu2 = round2(100.0 * r.phrases.bleu2);
    r.rouge_l = round2(100.0 * r.phrases.rouge_l);
    r.cider = round2(r.phrases.cider);
    return r;
}

nlohmann::json to_json(const MetricsReport &r) {
    return nlohmann::json{{"ap10", r.ap10},   {"ap30", r.ap30},   {"ap50", r.ap50},
                          {"miou", r.miou},   {"bleu1", r.bleu1}, {"bleu2", r.bleu2},
                          {"rouge_l", r.rouge_l}, {"cider", r.cider}, {"n_samples", r.n_samples}};
}

void save_report(const MetricsReport &report, const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError(path.string(), "cannot open report for writing");
    }
    out << to_json(report).dump(2) << '\n';
    if (!out) {
        throw IoError(path.string(), "report write failure");
    }
}

std::string format_table(const MetricsReport &r) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "%8s %8s %8s %8s | %8s %8s %8s %8s\n"
                  "%8.2f %8.2f %8.2f %8.2f | %8.2f %8.2f %8.2f %8.2f\n",
                  "AP10", "AP30", "AP50", "mIoU", "BLEU1", "BLEU2", "ROUGE_L", "CIDEr", r.ap10, r.ap30,
                  r.ap50, r.miou, r.bleu1, r.bleu2, r.rouge_l, r.cider);
    return buf;
}

} // namespace medrg
