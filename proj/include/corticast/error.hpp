/*
 * Copyright 2026 The Corticast Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace corticast {

// Base class for data-level failures (bad files, bad manifests, bad values).
// Argument-level failures use std::invalid_argument.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad magic, unsupported version, truncated or trailing bytes.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Malformed text input; `line` is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Structurally valid input that disagrees with what it is paired with
// (vertex counts, channel names, array manifests).
class SchemaError : public Error {
 public:
  using Error::Error;
};

class DegenerateChannelError : public Error {
 public:
  explicit DegenerateChannelError(std::string channel)
      : Error("degenerate channel '" + channel + "': standard deviation below 1e-12"),
        channel_(std::move(channel)) {}
  const std::string& channel() const { return channel_; }

 private:
  std::string channel_;
};

// Required subject metadata is absent.
class MetadataError : public Error {
 public:
  MetadataError(const std::string& what, std::vector<std::string> subjects);
  const std::vector<std::string>& subjects() const { return subjects_; }

 private:
  std::vector<std::string> subjects_;
};

// Non-finite loss or gradient during training. `epoch` is 1-based, 0 when
// the failure is outside the epoch loop.
class NumericError : public Error {
 public:
  NumericError(std::size_t epoch, const std::string& what)
      : Error(epoch > 0 ? "epoch " + std::to_string(epoch) + ": " + what : what),
        epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

// API misuse that is a programming error (stale caches, wrong model mode).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace corticast
