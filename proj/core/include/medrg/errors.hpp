// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace medrg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (JSON-lines record, config file, image header).
class ParseError : public Error {
  public:
    ParseError(std::string source, std::size_t line, const std::string &what)
        : Error(source + ":" + std::to_string(line) + ": " + what),
          source_(std::move(source)), line_(line) {}

    const std::string &source() const { return source_; }
    std::size_t line() const { return line_; }

  private:
    std::string source_;
    std::size_t line_;
};

/// A well-formed record that violates a data invariant.
class ValidationError : public Error {
  public:
    ValidationError(std::string sample_id, std::string rule)
        : Error("sample '" + sample_id + "': " + rule),
          sample_id_(std::move(sample_id)), rule_(std::move(rule)) {}

    const std::string &sample_id() const { return sample_id_; }
    const std::string &rule() const { return rule_; }

  private:
    std::string sample_id_;
    std::string rule_;
};

class IoError : public Error {
  public:
    IoError(std::string path, const std::string &what)
        : Error(path + ": " + what), path_(std::move(path)) {}

    const std::string &path() const { return path_; }

  private:
    std::string path_;
};

/// Shape or argument mismatch detected at an API boundary.
class InvalidArgument : public Error {
  public:
    using Error::Error;
};

/// Raised by the trainer when a loss term becomes NaN or infinite.
class NonFiniteLoss : public Error {
  public:
    NonFiniteLoss(std::string term, long step)
        : Error("non-finite loss term '" + term + "' at step " + std::to_string(step)),
          term_(std::move(term)), step_(step) {}

    const std::string &term() const { return term_; }
    long step() const { return step_; }

  private:
    std::string term_;
    long step_;
};

} // namespace medrg
