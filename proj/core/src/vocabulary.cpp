// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include "medrg/vocabulary.hpp"

#include <set>

#include "medrg/errors.hpp"
#include "medrg/text_metrics.hpp"

namespace medrg {

Vocabulary::Vocabulary() {
    for (auto t : {kPad, kBos, kEos, kUnk}) {
        add(std::string(t));
    }
}

Vocabulary Vocabulary::build(std::span<const std::string> corpus, bool include_box) {
    if (corpus.empty()) {
        throw InvalidArgument("build_vocab: empty corpus");
    }
    std::set<std::string> words;
    for (const auto &text : corpus) {
        for (auto &t : tokenize(text)) {
            words.insert(std::move(t));
        }
    }
    Vocabulary v;
    if (include_box) {
        v.add(std::string(kBox));
    }
    for (const auto &w : words) {
        if (!v.contains(w)) {
            v.add(w);
        }
    }
    return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
    if (tokens.size() < 4 || tokens[0] != kPad || tokens[1] != kBos || tokens[2] != kEos ||
        tokens[3] != kUnk) {
        throw InvalidArgument("vocabulary must start with <PAD> <BOS> <EOS> <UNK>");
    }
    Vocabulary v;
    for (std::size_t i = 4; i < tokens.size(); ++i) {
        v.add(std::move(tokens[i]));
    }
    return v;
}

const std::string &Vocabulary::token(int id) const {
    if (id < 0 || id >= size()) {
        throw InvalidArgument("token id out of range: " + std::to_string(id));
    }
    return tokens_[static_cast<std::size_t>(id)];
}

std::optional<int> Vocabulary::find(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

int Vocabulary::add(std::string token) {
    if (contains(token)) {
        throw InvalidArgument("vocabulary already contains '" + token + "'");
    }
    const int id = size();
    index_.emplace(token, id);
    tokens_.push_back(std::move(token));
    return id;
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
    std::vector<int> ids;
    for (const auto &t : tokenize(text)) {
        ids.push_back(find(t).value_or(unk_id()));
    }
    return ids;
}

std::string Vocabulary::decode(std::span<const int> ids) const {
    std::string out;
    for (const int id : ids) {
        if (!out.empty()) {
            out.push_back(' ');
        }
        out += token(id);
    }
    return out;
}

} // namespace medrg
