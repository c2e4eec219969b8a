// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "medrg/domain.hpp"
#include "medrg/image.hpp"
#include "medrg/rng.hpp"

namespace medrg {

enum class Finding { cardiomegaly, effusion, pneumothorax, opacity, atelectasis, nodule };
enum class Side { left, right };
enum class Level { upper, mid, lower };
enum class Severity { small, moderate, large };

inline constexpr int kFindingCount = 6;
inline constexpr std::array<Finding, kFindingCount> kAllFindings{
    Finding::cardiomegaly, Finding::effusion,    Finding::pneumothorax,
    Finding::opacity,      Finding::atelectasis, Finding::nodule};

std::string finding_name(Finding f);  // e.g. "pleural effusion"
std::string finding_label(Finding f); // e.g. "effusion"; used for manifests
std::string side_name(Side s);
std::string level_name(Level l);
std::string severity_name(Severity s);

struct FindingSpec {
    Finding finding = Finding::opacity;
    Side side = Side::left;
    Level level = Level::mid;
    Severity severity = Severity::moderate;
    double intensity = 0.8; // < 0.5 renders darker than the background
    BoundingBox box;        // pixel space, integer valued

    /// "{severity} {side} {level} {finding}"
    std::string phrase() const;
};

/// Throws InvalidArgument when the spec cannot be rendered into a width x height image.
void validate_spec(const FindingSpec &spec, int width, int height);

/// Draws a spec whose box lies in the zone named by side and level (the
/// patient's left is the image's right) and whose size follows the severity.
FindingSpec sample_finding_spec(Rng &rng, int width, int height, Finding finding);

/// Whether pixel centre (px, py) lies inside the shape drawn for spec.
bool shape_contains(const FindingSpec &spec, double px, double py);

struct RenderStyle {
    double background = 128.0;
    double background_amplitude = 12.0; // smooth low-frequency variation
    double grain = 3.0;                 // per-pixel uniform noise amplitude
};

GrayImage render_image(const FindingSpec &spec, int width, int height, std::uint64_t noise_seed,
                       const RenderStyle &style = {});

struct Report {
    std::string text;
    std::string phrase;
};

/// A templated findings paragraph holding one key sentence with spec.phrase()
/// among distractor_count normal-anatomy sentences.
Report make_report(const FindingSpec &spec, Rng &rng, int distractor_count);
Report make_report(const FindingSpec &spec, Rng &rng, int min_distractors, int max_distractors);

struct CorpusConfig {
    int n_patients = 16;
    int samples_per_patient = 1;
    int width = 224;
    int height = 224;
    std::uint64_t seed = 0;
    int min_distractors = 1;
    int max_distractors = 4;
    RenderStyle style;

    void validate() const;
};

struct Corpus {
    std::vector<GroundingSample> samples;
    std::vector<FindingSpec> specs;
};

/// Builds the corpus in memory. Sample i draws from mix_seed(config.seed, i) only.
Corpus build_corpus(const CorpusConfig &config);
GrayImage render_sample(const CorpusConfig &config, std::size_t index, const FindingSpec &spec);

/// Writes <out_dir>/images/<id>.pgm and <out_dir>/dataset.jsonl.
std::vector<GroundingSample> generate_corpus(const CorpusConfig &config, const std::filesystem::path &out_dir);

/// Per-class sample counts of a corpus, in kAllFindings order.
std::array<std::size_t, kFindingCount> class_histogram(const std::vector<FindingSpec> &specs);

} // namespace medrg
