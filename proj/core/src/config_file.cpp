// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include "medrg/config_file.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "medrg/errors.hpp"

namespace medrg {

namespace {

struct Binding {
    std::string key;
    std::function<void(RunConfig &, std::string_view)> set;
    std::function<std::string(const RunConfig &)> get;
};

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
    T value{};
    const char *end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw InvalidArgument("config key '" + std::string(key) + "': cannot parse '" + std::string(text) + "'");
    }
    return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
    if (text == "true" || text == "1") {
        return true;
    }
    if (text == "false" || text == "0") {
        return false;
    }
    throw InvalidArgument("config key '" + std::string(key) + "': expected true or false");
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

template <typename T, typename Access>
Binding bind(std::string key, Access access) {
    Binding b;
    b.key = key;
    b.set = [key, access](RunConfig &c, std::string_view text) {
        if constexpr (std::is_same_v<T, bool>) {
            access(c) = parse_bool(key, text);
        } else {
            access(c) = parse_number<T>(key, text);
        }
    };
    b.get = [access](const RunConfig &c) {
        const T v = access(const_cast<RunConfig &>(c));
        if constexpr (std::is_same_v<T, bool>) {
            return std::string(v ? "true" : "false");
        } else if constexpr (std::is_floating_point_v<T>) {
            return format_double(v);
        } else {
            return std::to_string(v);
        }
    };
    return b;
}

#define MEDRG_BIND(T, key, expr) bind<T>(key, [](RunConfig &c) -> T & { return expr; })

const std::vector<Binding> &bindings() {
    static const std::vector<Binding> table = {
        MEDRG_BIND(double, "learning_rate", c.train.learning_rate),
        MEDRG_BIND(int, "warmup_steps", c.train.warmup_steps),
        MEDRG_BIND(int, "total_steps", c.train.total_steps),
        MEDRG_BIND(int, "grad_accumulation", c.train.grad_accumulation),
        MEDRG_BIND(int, "micro_batch", c.train.micro_batch),
        MEDRG_BIND(std::uint64_t, "seed", c.train.seed),
        MEDRG_BIND(double, "loss_weights.phrase", c.train.loss_weights.phrase),
        MEDRG_BIND(double, "loss_weights.l1", c.train.loss_weights.l1),
        MEDRG_BIND(double, "loss_weights.giou", c.train.loss_weights.giou),
        MEDRG_BIND(double, "weight_decay", c.train.weight_decay),
        MEDRG_BIND(double, "beta1", c.train.beta1),
        MEDRG_BIND(double, "beta2", c.train.beta2),
        MEDRG_BIND(double, "adam_epsilon", c.train.adam_epsilon),
        MEDRG_BIND(int, "eval_every", c.train.eval_every),
        MEDRG_BIND(int, "max_new_tokens", c.train.max_new_tokens),
        MEDRG_BIND(int, "threads", c.train.threads),
        MEDRG_BIND(int, "language.hidden_dim", c.model.language.hidden_dim),
        MEDRG_BIND(int, "language.layers", c.model.language.layers),
        MEDRG_BIND(int, "language.heads", c.model.language.heads),
        MEDRG_BIND(int, "language.max_length", c.model.language.max_length),
        MEDRG_BIND(int, "language.prefix_length", c.model.language.prefix_length),
        MEDRG_BIND(int, "vision.image_height", c.model.vision.image_height),
        MEDRG_BIND(int, "vision.image_width", c.model.vision.image_width),
        MEDRG_BIND(int, "vision.patch_size", c.model.vision.patch_size),
        MEDRG_BIND(int, "vision.encoder_dim", c.model.vision.encoder_dim),
        MEDRG_BIND(int, "vision.encoder_layers", c.model.vision.encoder_layers),
        MEDRG_BIND(int, "vision.heads", c.model.vision.heads),
        MEDRG_BIND(int, "vision.decoder_blocks", c.model.vision.decoder_blocks),
        MEDRG_BIND(bool, "vision.direct_from_embedding", c.model.vision.direct_from_embedding),
    };
    return table;
}

#undef MEDRG_BIND

const Binding *find_binding(std::string_view key) {
    for (const Binding &b : bindings()) {
        if (b.key == key) {
            return &b;
        }
    }
    return nullptr;
}

} // namespace

void set_config_value(RunConfig &config, std::string_view key, std::string_view value) {
    const Binding *b = find_binding(key);
    if (!b) {
        throw InvalidArgument("unknown config key '" + std::string(key) + "'");
    }
    b->set(config, trim(value));
}

void apply_config_text(std::string_view text, RunConfig &config, const std::string &source) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError(source, line_no, "expected 'key = value'");
        }
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));
        if (value.empty()) {
            throw ParseError(source, line_no, "missing value for '" + std::string(key) + "'");
        }
        try {
            set_config_value(config, key, value);
        } catch (const InvalidArgument &e) {
            throw ParseError(source, line_no, e.what());
        }
    }
    config.model.link();
}

void apply_config_file(const std::filesystem::path &path, RunConfig &config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(path.string(), "cannot open config file");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    apply_config_text(buffer.str(), config, path.string());
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const Binding &b : bindings()) {
        keys.push_back(b.key);
    }
    return keys;
}

std::string format_config(const RunConfig &config) {
    std::string out;
    for (const Binding &b : bindings()) {
        out += b.key + " = " + b.get(config) + "\n";
    }
    return out;
}

} // namespace medrg
