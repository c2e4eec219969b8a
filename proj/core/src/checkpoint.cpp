// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "medrg/errors.hpp"
#include "medrg/model.hpp"

namespace medrg {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'M', 'E', 'D', 'R', 'G', 'C', 'K', '1'};

json config_to_json(const ModelConfig &c) {
    const auto &l = c.language;
    const auto &v = c.vision;
    return json{{"language",
                 {{"hidden_dim", l.hidden_dim},
                  {"layers", l.layers},
                  {"heads", l.heads},
                  {"max_length", l.max_length},
                  {"prefix_length", l.prefix_length},
                  {"vision_dim", l.vision_dim}}},
                {"vision",
                 {{"image_height", v.image_height},
                  {"image_width", v.image_width},
                  {"patch_size", v.patch_size},
                  {"encoder_dim", v.encoder_dim},
                  {"encoder_layers", v.encoder_layers},
                  {"heads", v.heads},
                  {"decoder_blocks", v.decoder_blocks},
                  {"embedding_dim", v.embedding_dim},
                  {"direct_from_embedding", v.direct_from_embedding}}}};
}

ModelConfig config_from_json(const json &j) {
    ModelConfig c;
    const json &l = j.at("language");
    c.language.hidden_dim = l.at("hidden_dim").get<int>();
    c.language.layers = l.at("layers").get<int>();
    c.language.heads = l.at("heads").get<int>();
    c.language.max_length = l.at("max_length").get<int>();
    c.language.prefix_length = l.at("prefix_length").get<int>();
    c.language.vision_dim = l.at("vision_dim").get<int>();
    const json &v = j.at("vision");
    c.vision.image_height = v.at("image_height").get<int>();
    c.vision.image_width = v.at("image_width").get<int>();
    c.vision.patch_size = v.at("patch_size").get<int>();
    c.vision.encoder_dim = v.at("encoder_dim").get<int>();
    c.vision.encoder_layers = v.at("encoder_layers").get<int>();
    c.vision.heads = v.at("heads").get<int>();
    c.vision.decoder_blocks = v.at("decoder_blocks").get<int>();
    c.vision.embedding_dim = v.at("embedding_dim").get<int>();
    c.vision.direct_from_embedding = v.at("direct_from_embedding").get<bool>();
    return c;
}

} // namespace

void save_checkpoint(const MedRGModel &model, const std::filesystem::path &path) {
    json manifest = json::array();
    std::uint64_t offset = 0;
    const ConstParameterList params = model.parameters();
    for (const Parameter *p : params) {
        manifest.push_back({{"name", p->name},
                            {"rows", p->value.rows()},
                            {"cols", p->value.cols()},
                            {"offset", offset}});
        offset += static_cast<std::uint64_t>(p->value.size()) * sizeof(float);
    }
    const json header{{"format", "medrg-checkpoint"},
                      {"version", 1},
                      {"config", config_to_json(model.config())},
                      {"vocab", model.vocab().tokens()},
                      {"tensors", manifest}};
    const std::string text = header.dump();
    const std::uint64_t header_len = text.size();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(path.string(), "cannot open checkpoint for writing");
    }
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char *>(&header_len), sizeof header_len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const Parameter *p : params) {
        out.write(reinterpret_cast<const char *>(p->value.data()),
                  static_cast<std::streamsize>(p->value.size() * sizeof(float)));
    }
    out.flush();
    if (!out) {
        throw IoError(path.string(), "checkpoint write failure");
    }
}

MedRGModel load_checkpoint(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(path.string(), "cannot open checkpoint");
    }
    char magic[8] = {};
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw ParseError(path.string(), 0, "not a medrg checkpoint");
    }
    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char *>(&header_len), sizeof header_len);
    if (!in || header_len > (1ULL << 30)) {
        throw ParseError(path.string(), 0, "corrupt checkpoint header length");
    }
    std::string text(header_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(header_len));
    if (!in) {
        throw ParseError(path.string(), 0, "truncated checkpoint header");
    }

    json header;
    ModelConfig config;
    std::vector<std::string> tokens;
    try {
        header = json::parse(text);
        config = config_from_json(header.at("config"));
        tokens = header.at("vocab").get<std::vector<std::string>>();
    } catch (const json::exception &e) {
        throw ParseError(path.string(), 0, e.what());
    }

    MedRGModel model(config, Vocabulary::from_tokens(std::move(tokens)), 0);
    std::unordered_map<std::string, Parameter *> by_name;
    for (Parameter *p : model.parameters()) {
        by_name.emplace(p->name, p);
    }

    const std::streamoff data_start = in.tellg();
    const json &tensors = header.at("tensors");
    if (tensors.size() != by_name.size()) {
        throw ParseError(path.string(), 0, "tensor count does not match the model");
    }
    for (const json &t : tensors) {
        const auto name = t.at("name").get<std::string>();
        const auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw ParseError(path.string(), 0, "unknown tensor '" + name + "'");
        }
        Parameter &p = *it->second;
        const auto rows = t.at("rows").get<Eigen::Index>();
        const auto cols = t.at("cols").get<Eigen::Index>();
        if (rows != p.value.rows() || cols != p.value.cols()) {
            throw ParseError(path.string(), 0, "shape mismatch for tensor '" + name + "'");
        }
        in.seekg(data_start + static_cast<std::streamoff>(t.at("offset").get<std::uint64_t>()));
        in.read(reinterpret_cast<char *>(p.value.data()), static_cast<std::streamsize>(p.value.size() * sizeof(float)));
        if (!in) {
            throw ParseError(path.string(), 0, "truncated data for tensor '" + name + "'");
        }
    }
    return model;
}

} // namespace medrg
