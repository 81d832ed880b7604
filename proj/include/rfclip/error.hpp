// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rfclip {

enum class Errc {
  kShape,
  kDegenerateRow,
  kEmptyInput,
  kConfig,
  kCorruptionInfeasible,
  kParse,
  kSchema,
  kUniqueness,
  kInfeasiblePlan,
  kDiverged,
  kBatchTooSmall,
  kNumeric,
  kDuplicateRecord,
  kNoHistory,
  kIncompleteHistory,
  kUndefinedAuc,
  kMetric,
  kPrototype,
  kVersion,
  kIntegrity,
  kIo,
};

std::string_view errc_name(Errc code);

/// Single exception type for the library. `code()` identifies the failure
/// class; `index()` carries the offending row / line / batch when relevant.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what,
        std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(what), code_(code), index_(index) {}

  Errc code() const noexcept { return code_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  Errc code_;
  std::optional<std::size_t> index_;
};

}  // namespace rfclip
