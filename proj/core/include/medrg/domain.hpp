// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace medrg {

enum class CoordinateSpace { pixel, normalized };

/// Axis-aligned box. (x, y) is the top-left corner, w the width, h the height.
struct BoundingBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;
    CoordinateSpace space = CoordinateSpace::normalized;

    double right() const { return x + w; }
    double bottom() const { return y + h; }
    double area() const { return w * h; }

    std::array<double, 4> as_array() const { return {x, y, w, h}; }

    static BoundingBox pixel(double x, double y, double w, double h) {
        return {x, y, w, h, CoordinateSpace::pixel};
    }
    static BoundingBox normalized(double x, double y, double w, double h) {
        return {x, y, w, h, CoordinateSpace::normalized};
    }

    bool operator==(const BoundingBox &) const = default;
};

/// Divides x, w by the image width and y, h by the image height.
BoundingBox to_normalized(const BoundingBox &box, int image_width, int image_height);
BoundingBox to_pixel(const BoundingBox &box, int image_width, int image_height);

/// Empty string when the box is valid in its space, otherwise the violated rule.
/// Pixel-space checks need the image size.
std::string check_box(const BoundingBox &box, int image_width = 0, int image_height = 0);

struct GroundingSample {
    std::string id;
    std::string patient_id;
    std::string image_path;
    int width = 0;
    int height = 0;
    std::string report;
    std::string phrase;
    BoundingBox box; // pixel space

    BoundingBox normalized_box() const { return to_normalized(box, width, height); }

    bool operator==(const GroundingSample &) const = default;
};

struct DatasetSplit {
    std::vector<GroundingSample> train;
    std::vector<GroundingSample> validation;
    std::vector<GroundingSample> test;
};

struct Prediction {
    std::string sample_id;
    std::string phrase;
    std::optional<BoundingBox> box; // normalized; empty when no <BOX> token was emitted

    bool box_valid() const { return box.has_value(); }

    bool operator==(const Prediction &) const = default;
};

/// Lower-cases and collapses whitespace runs to one space, trimming the ends.
std::string normalize_text(std::string_view text);

/// Case-insensitive, whitespace-collapsed substring test.
bool phrase_in_report(std::string_view phrase, std::string_view report);

/// Throws ValidationError naming the sample and rule on the first violation.
void validate_sample(const GroundingSample &sample);

/// Validates every sample and checks id uniqueness.
void validate_dataset(std::span<const GroundingSample> samples);

std::vector<GroundingSample> load_dataset(const std::filesystem::path &path);
void save_dataset(std::span<const GroundingSample> samples, const std::filesystem::path &path);

/// Image path of a sample, resolved against the dataset file's directory when relative.
std::filesystem::path resolve_image_path(const std::filesystem::path &dataset_path,
                                         const GroundingSample &sample);

struct SplitRatios {
    int train = 7;
    int validation = 1;
    int test = 2;
};

/// Patient counts for each split: floor-proportional, remainder handed out
/// one at a time in decreasing-ratio order starting with train.
std::array<std::size_t, 3> split_counts(std::size_t n_patients, const SplitRatios &ratios);

/// Patient-disjoint split. Unique patient ids are sorted, shuffled with the
/// seed, and partitioned by split_counts; samples keep their input order.
DatasetSplit split_by_patient(std::span<const GroundingSample> samples,
                              const SplitRatios &ratios, std::uint64_t seed);

void save_predictions(std::span<const Prediction> predictions, const std::filesystem::path &path);
std::vector<Prediction> load_predictions(const std::filesystem::path &path);

} // namespace medrg
