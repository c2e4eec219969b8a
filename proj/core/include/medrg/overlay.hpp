// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "medrg/domain.hpp"
#include "medrg/image.hpp"

namespace medrg {

inline constexpr Rgb kTruthColor{0, 255, 0};
inline constexpr Rgb kPredictionColor{255, 0, 0};
inline constexpr int kStrokeWidth = 2;

/// Pixel rectangle [x0, x1) x [y0, y1) covered by a box, clipped to the image.
struct PixelRect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};
PixelRect pixel_rect(const BoundingBox &box, int width, int height);

/// Draws the rectangle outline with the stroke lying just inside the perimeter.
void draw_rect(RgbImage &image, const PixelRect &rect, Rgb color, int stroke = kStrokeWidth);

/// Grayscale image promoted to RGB with the ground-truth box and, when
/// present, the predicted box (drawn on top).
RgbImage render_overlay(const GrayImage &image, const BoundingBox &truth,
                        const std::optional<BoundingBox> &prediction);

struct OverlayResult {
    std::size_t written = 0;
    std::vector<std::string> skipped; // dataset ids with no prediction
};

/// Writes <out_dir>/<id>.ppm per sample with a prediction and a
/// tab-separated sidecar <out_dir>/phrases.txt (id, truth, prediction).
OverlayResult write_overlays(std::span<const GroundingSample> samples, const std::filesystem::path &dataset_path,
                             std::span<const Prediction> predictions, const std::filesystem::path &out_dir);

} // namespace medrg
