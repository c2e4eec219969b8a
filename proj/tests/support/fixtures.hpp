// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <system_error>
#include <unistd.h>

#include "medrg/model.hpp"
#include "medrg/synth_data.hpp"

namespace medrg::testing {

/// Directory removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string &tag = "medrg") {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    const std::filesystem::path &path() const { return path_; }
    std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

/// A model small enough for unit tests: 32x32 images, width 16.
inline ModelConfig tiny_config(int image_size = 32) {
    ModelConfig c;
    c.vision.image_width = image_size;
    c.vision.image_height = image_size;
    c.vision.patch_size = 8;
    c.vision.encoder_dim = 16;
    c.vision.encoder_layers = 1;
    c.vision.heads = 2;
    c.vision.decoder_blocks = 1;
    c.language.hidden_dim = 16;
    c.language.layers = 2;
    c.language.heads = 2;
    c.language.prefix_length = 4;
    c.language.max_length = 96;
    c.link();
    return c;
}

inline CorpusConfig tiny_corpus(int n, std::uint64_t seed = 1, int size = 32) {
    CorpusConfig c;
    c.n_patients = n;
    c.width = size;
    c.height = size;
    c.seed = seed;
    return c;
}

inline Vocabulary corpus_vocab(const std::vector<GroundingSample> &samples, bool include_box = true) {
    std::vector<std::string> text;
    for (const auto &s : samples) {
        text.push_back(s.report);
        text.push_back(s.phrase);
    }
    return Vocabulary::build(text, include_box);
}

} // namespace medrg::testing
