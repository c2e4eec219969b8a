// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include "medrg/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <string_view>

#include "medrg/errors.hpp"

namespace medrg {

std::string finding_name(Finding f) {
    switch (f) {
    case Finding::cardiomegaly: return "cardiac enlargement";
    case Finding::effusion: return "pleural effusion";
    case Finding::pneumothorax: return "pneumothorax";
    case Finding::opacity: return "airspace opacity";
    case Finding::atelectasis: return "atelectasis";
    case Finding::nodule: return "pulmonary nodule";
    }
    throw InvalidArgument("unknown finding");
}

std::string finding_label(Finding f) {
    switch (f) {
    case Finding::cardiomegaly: return "cardiomegaly";
    case Finding::effusion: return "effusion";
    case Finding::pneumothorax: return "pneumothorax";
    case Finding::opacity: return "opacity";
    case Finding::atelectasis: return "atelectasis";
    case Finding::nodule: return "nodule";
    }
    throw InvalidArgument("unknown finding");
}

std::string side_name(Side s) { return s == Side::left ? "left" : "right"; }

std::string level_name(Level l) {
    switch (l) {
    case Level::upper: return "upper";
    case Level::mid: return "mid";
    case Level::lower: return "lower";
    }
    throw InvalidArgument("unknown level");
}

std::string severity_name(Severity s) {
    switch (s) {
    case Severity::small: return "small";
    case Severity::moderate: return "moderate";
    case Severity::large: return "large";
    }
    throw InvalidArgument("unknown severity");
}

std::string FindingSpec::phrase() const {
    return severity_name(severity) + " " + side_name(side) + " " + level_name(level) + " " + finding_name(finding);
}

namespace {

constexpr int kMinSide = 8; // keeps area >= 64 at any image size

bool is_integral(double v) { return std::floor(v) == v; }

} // namespace

void validate_spec(const FindingSpec &spec, int width, int height) {
    if (width <= 0 || height <= 0) {
        throw InvalidArgument("image size must be positive");
    }
    const BoundingBox &b = spec.box;
    if (b.space != CoordinateSpace::pixel) {
        throw InvalidArgument("finding box must be in pixel space");
    }
    if (!is_integral(b.x) || !is_integral(b.y) || !is_integral(b.w) || !is_integral(b.h)) {
        throw InvalidArgument("finding box must have integer coordinates");
    }
    if (b.x < 0 || b.y < 0 || b.right() > width || b.bottom() > height) {
        throw InvalidArgument("finding box lies outside the image");
    }
    if (b.area() < 64.0) {
        throw InvalidArgument("finding box area below 64 pixels");
    }
    if (!(spec.intensity >= 0.0 && spec.intensity <= 1.0)) {
        throw InvalidArgument("intensity must lie in [0, 1]");
    }
}

FindingSpec sample_finding_spec(Rng &rng, int width, int height, Finding finding) {
    if (width < 4 * kMinSide || height < 4 * kMinSide) {
        throw InvalidArgument("image must be at least 32x32 pixels");
    }
    FindingSpec spec;
    spec.finding = finding;
    spec.side = rng.below(2) == 0 ? Side::left : Side::right;
    spec.level = static_cast<Level>(rng.below(3));
    spec.severity = static_cast<Severity>(rng.below(3));
    spec.intensity = rng.uniform();

    static constexpr double kSizeLo[3] = {0.14, 0.22, 0.30};
    static constexpr double kSizeHi[3] = {0.20, 0.28, 0.36};
    const auto sev = static_cast<int>(spec.severity);
    double fw = rng.uniform(kSizeLo[sev], kSizeHi[sev]);
    double fh = fw * rng.uniform(0.8, 1.25);
    if (finding == Finding::nodule) {
        fw *= 0.7;
        fh = fw * static_cast<double>(width) / static_cast<double>(height);
    }
    const double w = std::clamp(std::round(fw * width), static_cast<double>(kMinSide), width / 2.0);
    const double h = std::clamp(std::round(fh * height), static_cast<double>(kMinSide), height / 2.0);

    // Image right is the patient's left.
    const double cx = spec.side == Side::left ? rng.uniform(0.62, 0.78) : rng.uniform(0.22, 0.38);
    static constexpr double kLevelCentre[3] = {0.25, 0.5, 0.75};
    const double cy = kLevelCentre[static_cast<int>(spec.level)] + rng.uniform(-0.06, 0.06);

    const double x = std::clamp(std::round(cx * width - w / 2.0), 0.0, width - w);
    const double y = std::clamp(std::round(cy * height - h / 2.0), 0.0, height - h);
    spec.box = BoundingBox::pixel(x, y, w, h);
    return spec;
}

bool shape_contains(const FindingSpec &spec, double px, double py) {
    const BoundingBox &b = spec.box;
    double u = (px - b.x) / b.w;
    const double v = (py - b.y) / b.h;
    if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0) {
        return false;
    }
    // Shapes lean towards the lateral chest wall; mirror for the image-left side.
    if (spec.side == Side::right) {
        u = 1.0 - u;
    }
    const double du = 2.0 * u - 1.0;
    const double dv = 2.0 * v - 1.0;
    switch (spec.finding) {
    case Finding::cardiomegaly:
    case Finding::nodule:
        return du * du + dv * dv <= 1.0;
    case Finding::effusion:
        return v >= 1.0 - u;
    case Finding::pneumothorax: {
        const double ex = u - 1.0;
        const double ey = v - 0.5;
        return du * du + dv * dv <= 1.0 && ex * ex + ey * ey >= 0.09;
    }
    case Finding::opacity:
        return du * du * du * du + dv * dv * dv * dv <= 1.0;
    case Finding::atelectasis:
        return std::abs(v - u) <= 0.25;
    }
    return false;
}

namespace {

/// Bilinear interpolation of a coarse random lattice, values in [-1, 1].
class SmoothNoise {
  public:
    SmoothNoise(Rng &rng, int cells) : cells_(cells), lattice_((cells + 1) * (cells + 1)) {
        for (double &v : lattice_) {
            v = rng.uniform(-1.0, 1.0);
        }
    }

    double at(double u, double v) const {
        const double fx = u * cells_;
        const double fy = v * cells_;
        const int ix = std::min(static_cast<int>(fx), cells_ - 1);
        const int iy = std::min(static_cast<int>(fy), cells_ - 1);
        const double tx = fx - ix;
        const double ty = fy - iy;
        const auto node = [&](int i, int j) { return lattice_[static_cast<std::size_t>(j * (cells_ + 1) + i)]; };
        const double top = node(ix, iy) * (1.0 - tx) + node(ix + 1, iy) * tx;
        const double bottom = node(ix, iy + 1) * (1.0 - tx) + node(ix + 1, iy + 1) * tx;
        return top * (1.0 - ty) + bottom * ty;
    }

  private:
    int cells_;
    std::vector<double> lattice_;
};

} // namespace

GrayImage render_image(const FindingSpec &spec, int width, int height, std::uint64_t noise_seed,
                       const RenderStyle &style) {
    validate_spec(spec, width, height);
    Rng rng(noise_seed);
    const SmoothNoise noise(rng, 4);
    const double magnitude = 80.0 + 40.0 * std::abs(2.0 * spec.intensity - 1.0);
    const double delta = spec.intensity < 0.5 ? -magnitude : magnitude;

    GrayImage image(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double px = x + 0.5;
            const double py = y + 0.5;
            double value = style.background +
                           style.background_amplitude * noise.at(px / width, py / height) +
                           style.grain * rng.uniform(-1.0, 1.0);
            if (shape_contains(spec, px, py)) {
                value += delta;
            }
            image.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
        }
    }
    return image;
}

namespace {

constexpr std::string_view kDistractors[] = {
    "the trachea is midline",
    "no acute osseous abnormality is seen",
    "there is no pulmonary edema",
    "the visualized upper abdomen is unremarkable",
    "lung volumes are normal",
    "the hila are unremarkable",
    "there is no free air under the diaphragm",
    "mild degenerative changes of the thoracic spine are noted",
    "the aorta is mildly tortuous",
    "no focal consolidation is identified elsewhere",
    "the mediastinal contours are stable",
    "there is no evidence of vascular congestion",
};

constexpr std::string_view kKeyTemplates[] = {
    "there is a {}",
    "findings are consistent with a {}",
    "a {} is again noted",
    "interval development of a {}",
    "the study demonstrates a {}",
    "there has been no change in the {}",
};

std::string capitalize(std::string s) {
    if (!s.empty()) {
        s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    }
    return s;
}

} // namespace

Report make_report(const FindingSpec &spec, Rng &rng, int distractor_count) {
    constexpr auto kPool = std::size(kDistractors);
    if (distractor_count < 0 || static_cast<std::size_t>(distractor_count) > kPool) {
        throw InvalidArgument("distractor count must lie in [0, " + std::to_string(kPool) + "]");
    }
    Report report;
    report.phrase = spec.phrase();

    const std::string_view tmpl = kKeyTemplates[rng.below(std::size(kKeyTemplates))];
    const std::size_t slot = tmpl.find("{}");
    std::string key = std::string(tmpl.substr(0, slot)) + report.phrase + std::string(tmpl.substr(slot + 2));

    std::array<std::size_t, kPool> picks{};
    for (std::size_t i = 0; i < kPool; ++i) {
        picks[i] = i;
    }
    rng.shuffle(picks.begin(), picks.end());

    std::vector<std::string> sentences;
    for (int i = 0; i < distractor_count; ++i) {
        sentences.emplace_back(kDistractors[picks[static_cast<std::size_t>(i)]]);
    }
    const auto position = static_cast<std::ptrdiff_t>(rng.below(sentences.size() + 1));
    sentences.insert(sentences.begin() + position, std::move(key));

    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (i > 0) {
            report.text += ' ';
        }
        report.text += capitalize(sentences[i]) + '.';
    }
    return report;
}

Report make_report(const FindingSpec &spec, Rng &rng, int min_distractors, int max_distractors) {
    if (min_distractors < 0 || max_distractors < min_distractors) {
        throw InvalidArgument("invalid distractor range");
    }
    const int count = rng.range(min_distractors, max_distractors);
    return make_report(spec, rng, count);
}

void CorpusConfig::validate() const {
    if (n_patients <= 0 || samples_per_patient <= 0) {
        throw InvalidArgument("patient and per-patient counts must be positive");
    }
    if (width < 32 || height < 32) {
        throw InvalidArgument("image size must be at least 32x32");
    }
    if (min_distractors < 0 || max_distractors < min_distractors ||
        max_distractors > static_cast<int>(std::size(kDistractors))) {
        throw InvalidArgument("invalid distractor range");
    }
}

namespace {

std::string padded(std::size_t value, int digits) {
    std::string s = std::to_string(value);
    if (static_cast<int>(s.size()) < digits) {
        s.insert(0, static_cast<std::size_t>(digits) - s.size(), '0');
    }
    return s;
}

int digits_for(std::size_t n) {
    return std::max(4, static_cast<int>(std::to_string(n > 0 ? n - 1 : 0).size()));
}

} // namespace

Corpus build_corpus(const CorpusConfig &config) {
    config.validate();
    const auto n_patients = static_cast<std::size_t>(config.n_patients);
    const std::size_t total = n_patients * static_cast<std::size_t>(config.samples_per_patient);
    const int sample_digits = digits_for(total);
    const int patient_digits = digits_for(n_patients);

    // Classes are dealt from shuffled decks of all six so every prefix of the
    // corpus stays balanced.
    Rng deck_rng(mix_seed(config.seed, 0xdec));
    std::array<Finding, kFindingCount> deck = kAllFindings;

    Corpus corpus;
    corpus.samples.reserve(total);
    corpus.specs.reserve(total);
    for (std::size_t i = 0; i < total; ++i) {
        if (i % kFindingCount == 0) {
            deck = kAllFindings;
            deck_rng.shuffle(deck.begin(), deck.end());
        }
        Rng rng(mix_seed(config.seed, i));
        const FindingSpec spec = sample_finding_spec(rng, config.width, config.height, deck[i % kFindingCount]);
        const Report report = make_report(spec, rng, config.min_distractors, config.max_distractors);

        GroundingSample s;
        s.id = "s" + padded(i, sample_digits);
        s.patient_id = "p" + padded(i / static_cast<std::size_t>(config.samples_per_patient), patient_digits);
        s.image_path = "images/" + s.id + ".pgm";
        s.width = config.width;
        s.height = config.height;
        s.report = report.text;
        s.phrase = report.phrase;
        s.box = spec.box;
        validate_sample(s);
        corpus.samples.push_back(std::move(s));
        corpus.specs.push_back(spec);
    }
    return corpus;
}

GrayImage render_sample(const CorpusConfig &config, std::size_t index, const FindingSpec &spec) {
    return render_image(spec, config.width, config.height, mix_seed(mix_seed(config.seed, index), 0x1a6e),
                        config.style);
}

std::vector<GroundingSample> generate_corpus(const CorpusConfig &config, const std::filesystem::path &out_dir) {
    Corpus corpus = build_corpus(config);
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "images", ec);
    if (ec) {
        throw IoError((out_dir / "images").string(), ec.message());
    }
    for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
        write_pgm(render_sample(config, i, corpus.specs[i]), out_dir / corpus.samples[i].image_path);
    }
    save_dataset(corpus.samples, out_dir / "dataset.jsonl");
    return std::move(corpus.samples);
}

std::array<std::size_t, kFindingCount> class_histogram(const std::vector<FindingSpec> &specs) {
    std::array<std::size_t, kFindingCount> counts{};
    for (const FindingSpec &s : specs) {
        ++counts[static_cast<std::size_t>(s.finding)];
    }
    return counts;
}

} // namespace medrg
