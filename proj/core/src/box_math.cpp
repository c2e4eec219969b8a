// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include "medrg/box_math.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "medrg/errors.hpp"

namespace medrg {

namespace {

void require_same_space(const BoundingBox &a, const BoundingBox &b, const char *op) {
    if (a.space != b.space) {
        throw InvalidArgument(std::string(op) + ": boxes are in different coordinate spaces");
    }
    if (!(a.w > 0.0 && a.h > 0.0 && b.w > 0.0 && b.h > 0.0)) {
        throw InvalidArgument(std::string(op) + ": box width and height must be positive");
    }
}

double overlap_1d(double a0, double a1, double b0, double b1) {
    return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

double intersection(const BoundingBox &a, const BoundingBox &b) {
    return overlap_1d(a.x, a.right(), b.x, b.right()) * overlap_1d(a.y, a.bottom(), b.y, b.bottom());
}

double hull_area(const BoundingBox &a, const BoundingBox &b) {
    const double cw = std::max(a.right(), b.right()) - std::min(a.x, b.x);
    const double ch = std::max(a.bottom(), b.bottom()) - std::min(a.y, b.y);
    return cw * ch;
}

} // namespace

double iou(const BoundingBox &a, const BoundingBox &b) {
    require_same_space(a, b, "iou");
    const double inter = intersection(a, b);
    const double uni = a.area() + b.area() - inter;
    return std::clamp(inter / uni, 0.0, 1.0);
}

double giou(const BoundingBox &a, const BoundingBox &b) {
    require_same_space(a, b, "giou");
    const double inter = intersection(a, b);
    const double uni = a.area() + b.area() - inter;
    const double hull = hull_area(a, b);
    return inter / uni - (hull - uni) / hull;
}

SmoothL1 smooth_l1(const Vec4 &pred, const Vec4 &target, double beta) {
    if (!(beta > 0.0)) {
        throw InvalidArgument("smooth_l1: beta must be positive");
    }
    SmoothL1 out;
    for (std::size_t i = 0; i < 4; ++i) {
        const double d = pred[i] - target[i];
        const double ad = std::abs(d);
        // |d| == beta takes the quadratic branch; both branches agree there.
        if (ad <= beta) {
            out.value += 0.5 * d * d / beta;
            out.gradient[i] = d / beta;
        } else {
            out.value += ad - 0.5 * beta;
            out.gradient[i] = d > 0.0 ? 1.0 : -1.0;
        }
    }
    return out;
}

GiouTerm giou_loss(const BoundingBox &p, const BoundingBox &t) {
    require_same_space(p, t, "giou_loss");

    // Overlap along one axis and its derivative with respect to (p0, pw).
    // Ties choose the pred side; a zero-length overlap has zero derivative.
    struct Axis {
        double len;
        double d_origin;
        double d_size;
    };
    auto overlap = [](double p0, double pw, double t0, double tw) {
        const double p1 = p0 + pw;
        const double t1 = t0 + tw;
        const bool pred_hi = p1 <= t1;
        const bool pred_lo = p0 >= t0;
        const double len = (pred_hi ? p1 : t1) - (pred_lo ? p0 : t0);
        if (len <= 0.0) {
            return Axis{0.0, 0.0, 0.0};
        }
        return Axis{len, (pred_hi ? 1.0 : 0.0) - (pred_lo ? 1.0 : 0.0), pred_hi ? 1.0 : 0.0};
    };
    auto span = [](double p0, double pw, double t0, double tw) {
        const double p1 = p0 + pw;
        const double t1 = t0 + tw;
        const bool pred_hi = p1 >= t1;
        const bool pred_lo = p0 <= t0;
        const double len = (pred_hi ? p1 : t1) - (pred_lo ? p0 : t0);
        return Axis{len, (pred_hi ? 1.0 : 0.0) - (pred_lo ? 1.0 : 0.0), pred_hi ? 1.0 : 0.0};
    };

    const Axis ix = overlap(p.x, p.w, t.x, t.w);
    const Axis iy = overlap(p.y, p.h, t.y, t.h);
    const Axis cx = span(p.x, p.w, t.x, t.w);
    const Axis cy = span(p.y, p.h, t.y, t.h);

    const double inter = ix.len * iy.len;
    const double uni = p.w * p.h + t.w * t.h - inter;
    const double hull = cx.len * cy.len;

    // d/d(x, y, w, h)
    const Vec4 d_inter{ix.d_origin * iy.len, ix.len * iy.d_origin, ix.d_size * iy.len,
                       ix.len * iy.d_size};
    const Vec4 d_area{0.0, 0.0, p.h, p.w};
    const Vec4 d_hull{cx.d_origin * cy.len, cx.len * cy.d_origin, cx.d_size * cy.len,
                      cx.len * cy.d_size};

    // 1 - GIoU = 2 - I/U - U/C
    GiouTerm out;
    out.value = 2.0 - inter / uni - uni / hull;
    for (std::size_t k = 0; k < 4; ++k) {
        const double d_uni = d_area[k] - d_inter[k];
        const double d_iou = (d_inter[k] * uni - inter * d_uni) / (uni * uni);
        const double d_ratio = (d_uni * hull - uni * d_hull[k]) / (hull * hull);
        out.gradient[k] = -d_iou - d_ratio;
    }
    return out;
}

BoxLossValue box_loss(const BoundingBox &pred, const BoundingBox &target, double beta) {
    if (pred.space != CoordinateSpace::normalized || target.space != CoordinateSpace::normalized) {
        throw InvalidArgument("box_loss: both boxes must be normalized");
    }
    if (!(pred.w > 0.0 && pred.h > 0.0)) {
        throw InvalidArgument("box_loss: degenerate predicted box (w <= 0 or h <= 0)");
    }
    const SmoothL1 l1 = smooth_l1(pred.as_array(), target.as_array(), beta);
    const GiouTerm g = giou_loss(pred, target);
    BoxLossValue out;
    out.l1_term = l1.value;
    out.giou_term = g.value;
    out.total = l1.value + g.value;
    out.l1_gradient = l1.gradient;
    out.giou_gradient = g.gradient;
    for (std::size_t k = 0; k < 4; ++k) {
        out.gradient[k] = l1.gradient[k] + g.gradient[k];
    }
    return out;
}

double pair_iou(const BoxPair &pair) {
    return pair.pred ? iou(*pair.pred, pair.target) : 0.0;
}

double mean_iou(std::span<const BoxPair> pairs) {
    if (pairs.empty()) {
        throw InvalidArgument("mean_iou: empty pair list");
    }
    double sum = 0.0;
    for (const auto &p : pairs) {
        sum += pair_iou(p);
    }
    return sum / static_cast<double>(pairs.size());
}

double ap_at(std::span<const BoxPair> pairs, double tau) {
    if (pairs.empty()) {
        throw InvalidArgument("ap_at: empty pair list");
    }
    if (!(tau > 0.0 && tau < 1.0)) {
        throw InvalidArgument("ap_at: tau must lie in (0, 1)");
    }
    std::size_t hits = 0;
    for (const auto &p : pairs) {
        if (pair_iou(p) > tau) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

DetectionScores score_detections(std::span<const BoxPair> pairs) {
    return {mean_iou(pairs), ap_at(pairs, 0.1), ap_at(pairs, 0.3), ap_at(pairs, 0.5)};
}

} // namespace medrg

namespace medrg {

BoxParameterization parameterize_box(const Vec4 &raw) {
    auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    const double sx = sigmoid(raw[0]);
    const double sy = sigmoid(raw[1]);
    const double sw = sigmoid(raw[2]);
    const double sh = sigmoid(raw[3]);

    BoxParameterization out;
    out.box = BoundingBox::normalized(sx, sy, (1.0 - sx) * sw, (1.0 - sy) * sh);
    auto &J = out.jacobian;
    J[0][0] = sx * (1.0 - sx);
    J[1][1] = sy * (1.0 - sy);
    J[2][0] = -sw * sx * (1.0 - sx);
    J[2][2] = (1.0 - sx) * sw * (1.0 - sw);
    J[3][1] = -sh * sy * (1.0 - sy);
    J[3][3] = (1.0 - sy) * sh * (1.0 - sh);
    return out;
}

} // namespace medrg
