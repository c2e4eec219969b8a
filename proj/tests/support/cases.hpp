// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

// Hand-built inputs shared by the unit and acceptance suites.

#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "medrg/domain.hpp"
#include "medrg/text_metrics.hpp"

namespace medrg::cases {

/// Twenty small pairs with hand-checkable n-gram structure.
inline std::vector<std::pair<Tokens, Tokens>> text_pairs() {
    const char *raw[20][2] = {
        {"small left pleural effusion", "small left pleural effusion"},
        {"pleural effusion", "left pleural effusion"},
        {"left left left", "left pleural effusion"},
        {"large right nodule", "small right nodule"},
        {"mild opacity", "moderate left lower opacity"},
        {"right upper atelectasis", "right upper atelectasis"},
        {"effusion pleural left small", "small left pleural effusion"},
        {"nodule", "pulmonary nodule"},
        {"moderate right mid airspace opacity", "moderate right mid opacity"},
        {"cardiac enlargement", "large left mid cardiac enlargement"},
        {"small", "small"},
        {"a b a b", "a b"},
        {"left mid pneumothorax", "right mid pneumothorax"},
        {"large left lower pleural effusion", "large left lower pleural effusion"},
        {"there is a small nodule", "small nodule"},
        {"the the the the", "the cat"},
        {"upper lobe opacity", "lower lobe opacity"},
        {"x y z", "z y x"},
        {"moderate atelectasis", "moderate atelectasis right"},
        {"small left upper pneumothorax", "small right upper pneumothorax"},
    };
    std::vector<std::pair<Tokens, Tokens>> out;
    for (const auto &p : raw) {
        out.emplace_back(tokenize(p[0]), tokenize(p[1]));
    }
    return out;
}

/// True when every coordinate difference is away from the smooth-L1 kink and
/// every overlap/hull edge comparison is away from a tie.
inline bool away_from_kinks(const BoundingBox &a, const BoundingBox &b, double margin) {
    const auto pa = a.as_array();
    const auto pb = b.as_array();
    for (int k = 0; k < 4; ++k) {
        if (std::abs(std::abs(pa[k] - pb[k]) - 1.0) < margin) {
            return false;
        }
    }
    const double edges[4][2] = {{a.x, b.x}, {a.y, b.y}, {a.right(), b.right()}, {a.bottom(), b.bottom()}};
    for (const auto &e : edges) {
        if (std::abs(e[0] - e[1]) < margin) {
            return false;
        }
    }
    // Overlap width/height away from zero so the max(0, .) clamp is not at its kink.
    const double ow = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    const double oh = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    return std::abs(ow) > margin && std::abs(oh) > margin;
}

} // namespace medrg::cases
