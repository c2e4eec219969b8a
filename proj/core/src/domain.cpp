// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include "medrg/domain.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "medrg/errors.hpp"
#include "medrg/rng.hpp"

namespace medrg {

using nlohmann::json;

BoundingBox to_normalized(const BoundingBox &box, int image_width, int image_height) {
    if (box.space == CoordinateSpace::normalized) {
        return box;
    }
    if (image_width <= 0 || image_height <= 0) {
        throw InvalidArgument("to_normalized: image dimensions must be positive");
    }
    const double W = image_width;
    const double H = image_height;
    return BoundingBox::normalized(box.x / W, box.y / H, box.w / W, box.h / H);
}

BoundingBox to_pixel(const BoundingBox &box, int image_width, int image_height) {
    if (box.space == CoordinateSpace::pixel) {
        return box;
    }
    if (image_width <= 0 || image_height <= 0) {
        throw InvalidArgument("to_pixel: image dimensions must be positive");
    }
    const double W = image_width;
    const double H = image_height;
    return BoundingBox::pixel(box.x * W, box.y * H, box.w * W, box.h * H);
}

std::string check_box(const BoundingBox &box, int image_width, int image_height) {
    const auto b = box.as_array();
    if (!std::all_of(b.begin(), b.end(), [](double v) { return std::isfinite(v); })) {
        return "box coordinates must be finite";
    }
    if (box.w <= 0.0 || box.h <= 0.0) {
        return "box width and height must be positive";
    }
    if (box.x < 0.0 || box.y < 0.0) {
        return "box origin must be non-negative";
    }
    if (box.space == CoordinateSpace::normalized) {
        if (box.right() > 1.0 || box.bottom() > 1.0) {
            return "normalized box must satisfy x+w <= 1 and y+h <= 1";
        }
    } else {
        if (box.right() > image_width) {
            return "box extends past image width (x+w > width)";
        }
        if (box.bottom() > image_height) {
            return "box extends past image height (y+h > height)";
        }
    }
    return {};
}

std::string normalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (const char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

bool phrase_in_report(std::string_view phrase, std::string_view report) {
    const std::string p = normalize_text(phrase);
    return !p.empty() && normalize_text(report).find(p) != std::string::npos;
}

void validate_sample(const GroundingSample &s) {
    const std::string &id = s.id;
    if (id.empty()) {
        throw ValidationError(id, "id must be non-empty");
    }
    if (s.patient_id.empty()) {
        throw ValidationError(id, "patient_id must be non-empty");
    }
    if (s.width <= 0 || s.height <= 0) {
        throw ValidationError(id, "image dimensions must be positive");
    }
    if (s.box.space != CoordinateSpace::pixel) {
        throw ValidationError(id, "sample box must be in pixel space");
    }
    if (auto rule = check_box(s.box, s.width, s.height); !rule.empty()) {
        throw ValidationError(id, rule);
    }
    if (!phrase_in_report(s.phrase, s.report)) {
        throw ValidationError(id, "phrase is not a substring of the report");
    }
}

void validate_dataset(std::span<const GroundingSample> samples) {
    std::unordered_set<std::string> seen;
    for (const auto &s : samples) {
        validate_sample(s);
        if (!seen.insert(s.id).second) {
            throw ValidationError(s.id, "duplicate sample id");
        }
    }
}

namespace {

json sample_to_json(const GroundingSample &s) {
    return json{{"id", s.id},
                {"patient_id", s.patient_id},
                {"image", s.image_path},
                {"width", s.width},
                {"height", s.height},
                {"report", s.report},
                {"phrase", s.phrase},
                {"box", {s.box.x, s.box.y, s.box.w, s.box.h}}};
}

BoundingBox box_from_json(const json &j, CoordinateSpace space) {
    if (!j.is_array() || j.size() != 4) {
        throw std::runtime_error("'box' must be an array of 4 numbers");
    }
    std::array<double, 4> v{};
    for (std::size_t i = 0; i < 4; ++i) {
        if (!j[i].is_number()) {
            throw std::runtime_error("'box' must be an array of 4 numbers");
        }
        v[i] = j[i].get<double>();
    }
    return {v[0], v[1], v[2], v[3], space};
}

GroundingSample sample_from_json(const json &j) {
    GroundingSample s;
    s.id = j.at("id").get<std::string>();
    s.patient_id = j.at("patient_id").get<std::string>();
    s.image_path = j.at("image").get<std::string>();
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    s.report = j.at("report").get<std::string>();
    s.phrase = j.at("phrase").get<std::string>();
    s.box = box_from_json(j.at("box"), CoordinateSpace::pixel);
    return s;
}

template <typename F>
void for_each_jsonl(const std::filesystem::path &path, F &&f) {
    std::ifstream in(path);
    if (!in) {
        throw IoError(path.string(), "cannot open for reading");
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json j;
        try {
            j = json::parse(line);
            f(j, line_no);
        } catch (const json::exception &e) {
            throw ParseError(path.string(), line_no, e.what());
        } catch (const ValidationError &) {
            throw;
        } catch (const std::runtime_error &e) {
            throw ParseError(path.string(), line_no, e.what());
        }
    }
    if (in.bad()) {
        throw IoError(path.string(), "read failure");
    }
}

void write_lines(const std::filesystem::path &path, const std::vector<std::string> &lines) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(path.string(), "cannot open for writing");
    }
    for (const auto &l : lines) {
        out << l << '\n';
    }
    out.flush();
    if (!out) {
        throw IoError(path.string(), "write failure");
    }
}

} // namespace

std::vector<GroundingSample> load_dataset(const std::filesystem::path &path) {
    std::vector<GroundingSample> samples;
    std::unordered_set<std::string> seen;
    for_each_jsonl(path, [&](const json &j, std::size_t) {
        GroundingSample s = sample_from_json(j);
        validate_sample(s);
        if (!seen.insert(s.id).second) {
            throw ValidationError(s.id, "duplicate sample id");
        }
        samples.push_back(std::move(s));
    });
    return samples;
}

void save_dataset(std::span<const GroundingSample> samples, const std::filesystem::path &path) {
    std::vector<std::string> lines;
    lines.reserve(samples.size());
    for (const auto &s : samples) {
        lines.push_back(sample_to_json(s).dump());
    }
    write_lines(path, lines);
}

std::filesystem::path resolve_image_path(const std::filesystem::path &dataset_path,
                                         const GroundingSample &sample) {
    std::filesystem::path p(sample.image_path);
    if (p.is_absolute()) {
        return p;
    }
    return dataset_path.parent_path() / p;
}

std::array<std::size_t, 3> split_counts(std::size_t n, const SplitRatios &ratios) {
    const std::array<long, 3> r{ratios.train, ratios.validation, ratios.test};
    if (std::any_of(r.begin(), r.end(), [](long v) { return v <= 0; })) {
        throw InvalidArgument("split ratios must be positive");
    }
    const auto total = static_cast<std::size_t>(r[0] + r[1] + r[2]);
    std::array<std::size_t, 3> counts{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        counts[i] = n * static_cast<std::size_t>(r[i]) / total;
        assigned += counts[i];
    }
    // Stable sort keeps train < validation < test among equal ratios.
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return r[a] > r[b]; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) {
        ++counts[order[k % 3]];
    }
    // Tiny patient pools: every split gets at least one patient.
    if (n >= 3) {
        for (std::size_t i = 0; i < 3; ++i) {
            if (counts[i] == 0) {
                const auto donor = static_cast<std::size_t>(
                    std::max_element(counts.begin(), counts.end()) - counts.begin());
                --counts[donor];
                ++counts[i];
            }
        }
    }
    return counts;
}

DatasetSplit split_by_patient(std::span<const GroundingSample> samples, const SplitRatios &ratios,
                              std::uint64_t seed) {
    std::set<std::string> unique;
    for (const auto &s : samples) {
        unique.insert(s.patient_id);
    }
    if (unique.size() < 3) {
        throw InvalidArgument("split_by_patient: need at least 3 patients to populate all splits, got " +
                              std::to_string(unique.size()));
    }
    std::vector<std::string> patients(unique.begin(), unique.end());
    Rng rng(seed);
    rng.shuffle(patients.begin(), patients.end());

    const auto counts = split_counts(patients.size(), ratios);
    std::map<std::string, int> assignment;
    std::size_t idx = 0;
    for (int part = 0; part < 3; ++part) {
        for (std::size_t k = 0; k < counts[static_cast<std::size_t>(part)]; ++k) {
            assignment[patients[idx++]] = part;
        }
    }

    DatasetSplit split;
    for (const auto &s : samples) {
        switch (assignment.at(s.patient_id)) {
        case 0: split.train.push_back(s); break;
        case 1: split.validation.push_back(s); break;
        default: split.test.push_back(s); break;
        }
    }
    return split;
}

void save_predictions(std::span<const Prediction> predictions, const std::filesystem::path &path) {
    std::vector<std::string> lines;
    lines.reserve(predictions.size());
    for (const auto &p : predictions) {
        const BoundingBox b = p.box.value_or(BoundingBox{});
        json j{{"sample_id", p.sample_id},
               {"phrase", p.phrase},
               {"box", {b.x, b.y, b.w, b.h}},
               {"box_valid", p.box_valid()}};
        lines.push_back(j.dump());
    }
    write_lines(path, lines);
}

std::vector<Prediction> load_predictions(const std::filesystem::path &path) {
    std::vector<Prediction> out;
    for_each_jsonl(path, [&](const json &j, std::size_t) {
        Prediction p;
        p.sample_id = j.at("sample_id").get<std::string>();
        p.phrase = j.at("phrase").get<std::string>();
        if (j.at("box_valid").get<bool>()) {
            p.box = box_from_json(j.at("box"), CoordinateSpace::normalized);
            if (auto rule = check_box(*p.box); !rule.empty()) {
                throw ValidationError(p.sample_id, rule);
            }
        }
        out.push_back(std::move(p));
    });
    return out;
}

} // namespace medrg
