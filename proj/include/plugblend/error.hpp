// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace plugblend {

enum class Errc {
  InvalidArgument,
  InvalidLogits,
  DegenerateWeights,
  VocabMismatch,
  ProviderUnavailable,
  UnknownControlCode,
  ModelFileInvalid,
  ContrastSetTooSmall,
  ShapeMismatch,
  InvalidPenalty,
  InvalidSketch,
  InvalidLineIndex,
  InsufficientData,
  UnknownLabel,
  NotFound,
  Conflict,
};

const char* errc_name(Errc code) noexcept;
std::optional<Errc> errc_from_name(std::string_view name) noexcept;

/// Every failure raised by the library carries one of the Errc kinds so the
/// C API can map it onto a stable status code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace plugblend
