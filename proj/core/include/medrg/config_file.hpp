// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "medrg/model.hpp"
#include "medrg/trainer.hpp"

namespace medrg {

struct RunConfig {
    TrainConfig train;
    ModelConfig model;
};

/// Key = value lines; '#' starts a comment. Training keys are the TrainConfig
/// field names (learning_rate, warmup_steps, loss_weights.phrase, ...), model
/// keys are prefixed with language. or vision. (language.hidden_dim,
/// vision.patch_size, ...). Unknown keys and malformed values raise ParseError.
void apply_config_text(std::string_view text, RunConfig &config, const std::string &source = "<config>");
void apply_config_file(const std::filesystem::path &path, RunConfig &config);

/// Sets a single key; throws InvalidArgument on an unknown key or bad value.
void set_config_value(RunConfig &config, std::string_view key, std::string_view value);

/// Every recognised key, in documentation order.
std::vector<std::string> config_keys();

/// Renders config as a file that apply_config_text reads back unchanged.
std::string format_config(const RunConfig &config);

} // namespace medrg
