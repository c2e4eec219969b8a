// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace medrg {

/// Dense token <-> id map. Special tokens come first; extension only appends.
class Vocabulary {
  public:
    static constexpr std::string_view kPad = "<PAD>";
    static constexpr std::string_view kBos = "<BOS>";
    static constexpr std::string_view kEos = "<EOS>";
    static constexpr std::string_view kUnk = "<UNK>";
    static constexpr std::string_view kBox = "<BOX>";

    Vocabulary();

    /// Specials (PAD, BOS, EOS, UNK and, when include_box, <BOX>) followed by
    /// every distinct tokenize() word of the corpus in sorted order.
    static Vocabulary build(std::span<const std::string> corpus, bool include_box = true);

    /// Rebuilds from an ordered token list (checkpoint loading).
    static Vocabulary from_tokens(std::vector<std::string> tokens);

    int size() const { return static_cast<int>(tokens_.size()); }
    const std::vector<std::string> &tokens() const { return tokens_; }
    const std::string &token(int id) const;
    std::optional<int> find(std::string_view token) const;
    bool contains(std::string_view token) const { return find(token).has_value(); }

    /// Appends a token and returns its id; throws InvalidArgument when it already exists.
    int add(std::string token);

    int pad_id() const { return 0; }
    int bos_id() const { return 1; }
    int eos_id() const { return 2; }
    int unk_id() const { return 3; }
    /// Id of <BOX>, or nullopt before the vocabulary has been extended with it.
    std::optional<int> box_id() const { return find(kBox); }

    /// tokenize() then map; unknown words map to UNK.
    std::vector<int> encode(std::string_view text) const;
    /// Space-joined tokens.
    std::string decode(std::span<const int> ids) const;

    bool operator==(const Vocabulary &other) const { return tokens_ == other.tokens_; }

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

} // namespace medrg
