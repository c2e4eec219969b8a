// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include "medrg/overlay.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "medrg/errors.hpp"

namespace medrg {

PixelRect pixel_rect(const BoundingBox &box, int width, int height) {
    const BoundingBox px = box.space == CoordinateSpace::pixel ? box : to_pixel(box, width, height);
    const auto clip = [](double v, int hi) { return std::clamp(static_cast<int>(std::lround(v)), 0, hi); };
    return {clip(px.x, width), clip(px.y, height), clip(px.right(), width), clip(px.bottom(), height)};
}

void draw_rect(RgbImage &image, const PixelRect &r, Rgb color, int stroke) {
    for (int y = r.y0; y < r.y1; ++y) {
        for (int x = r.x0; x < r.x1; ++x) {
            const bool edge = x < r.x0 + stroke || x >= r.x1 - stroke || y < r.y0 + stroke || y >= r.y1 - stroke;
            if (edge) {
                image.set(x, y, color);
            }
        }
    }
}

RgbImage render_overlay(const GrayImage &image, const BoundingBox &truth,
                        const std::optional<BoundingBox> &prediction) {
    RgbImage out(image.width, image.height);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const std::uint8_t v = image.at(x, y);
            out.set(x, y, {v, v, v});
        }
    }
    draw_rect(out, pixel_rect(truth, image.width, image.height), kTruthColor);
    if (prediction) {
        draw_rect(out, pixel_rect(*prediction, image.width, image.height), kPredictionColor);
    }
    return out;
}

OverlayResult write_overlays(std::span<const GroundingSample> samples, const std::filesystem::path &dataset_path,
                             std::span<const Prediction> predictions, const std::filesystem::path &out_dir) {
    std::unordered_map<std::string, const Prediction *> by_id;
    for (const Prediction &p : predictions) {
        by_id.emplace(p.sample_id, &p);
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw IoError(out_dir.string(), ec.message());
    }
    const std::filesystem::path sidecar_path = out_dir / "phrases.txt";
    std::ofstream sidecar(sidecar_path);
    if (!sidecar) {
        throw IoError(sidecar_path.string(), "cannot open phrase sidecar");
    }

    OverlayResult result;
    for (const GroundingSample &s : samples) {
        const auto it = by_id.find(s.id);
        if (it == by_id.end()) {
            result.skipped.push_back(s.id);
            continue;
        }
        const GrayImage image = read_pgm(resolve_image_path(dataset_path, s));
        write_ppm(render_overlay(image, s.box, it->second->box), out_dir / (s.id + ".ppm"));
        sidecar << s.id << '\t' << s.phrase << '\t' << it->second->phrase << '\n';
        ++result.written;
    }
    if (!sidecar) {
        throw IoError(sidecar_path.string(), "phrase sidecar write failure");
    }
    return result;
}

} // namespace medrg
