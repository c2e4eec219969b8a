// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <span>

#include "medrg/domain.hpp"

namespace medrg {

using Vec4 = std::array<double, 4>;

double iou(const BoundingBox &a, const BoundingBox &b);

/// IoU minus the fraction of the enclosing box not covered by the union.
double giou(const BoundingBox &a, const BoundingBox &b);

struct SmoothL1 {
    double value = 0.0;
    Vec4 gradient{}; // d value / d pred
};

/// Sum over the four coordinates of 0.5 d^2 / beta (|d| < beta) or |d| - 0.5 beta.
SmoothL1 smooth_l1(const Vec4 &pred, const Vec4 &target, double beta = 1.0);

struct GiouTerm {
    double value = 0.0; // 1 - GIoU, in [0, 2)
    Vec4 gradient{};    // d value / d pred (x, y, w, h)
};

GiouTerm giou_loss(const BoundingBox &pred, const BoundingBox &target);

struct BoxLossValue {
    double total = 0.0;     // l1_term + giou_term
    double l1_term = 0.0;
    double giou_term = 0.0;
    Vec4 gradient{};        // d total / d pred
    Vec4 l1_gradient{};
    Vec4 giou_gradient{};
};

/// Smooth-L1 plus (1 - GIoU) on normalized boxes, with the analytic gradient
/// with respect to pred. Throws InvalidArgument on degenerate or mismatched input.
BoxLossValue box_loss(const BoundingBox &pred, const BoundingBox &target, double beta = 1.0);

/// One evaluation pair: an absent prediction counts as IoU 0.
struct BoxPair {
    std::optional<BoundingBox> pred;
    BoundingBox target;
};

double pair_iou(const BoxPair &pair);

double mean_iou(std::span<const BoxPair> pairs);

/// Fraction of pairs whose IoU strictly exceeds tau.
double ap_at(std::span<const BoxPair> pairs, double tau);

/// Fractions in [0, 1]; reports convert to percent.
struct DetectionScores {
    double miou = 0.0;
    double ap10 = 0.0;
    double ap30 = 0.0;
    double ap50 = 0.0;
};

DetectionScores score_detections(std::span<const BoxPair> pairs);

/// Normalized box from four unconstrained head outputs:
/// x = s(r0), y = s(r1), w = (1 - x) s(r2), h = (1 - y) s(r3), s the logistic
/// sigmoid. The result always satisfies x + w <= 1 and y + h <= 1.
struct BoxParameterization {
    BoundingBox box;
    std::array<Vec4, 4> jacobian{}; // jacobian[i][j] = d box_i / d raw_j
};

BoxParameterization parameterize_box(const Vec4 &raw);

} // namespace medrg
