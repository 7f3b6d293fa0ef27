// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kws {

inline constexpr std::string_view kNullLabel = "NULL";

struct LabelInfo {
  std::string alias;    // romanized ASCII name used on disk and on the CLI
  std::string display;  // Arabic form, UTF-8; empty for NULL
  bool operator==(const LabelInfo&) const = default;
};

/// Ordered, bidirectional label table. Indices are contiguous from 0.
class LabelMap {
 public:
  /// The 40 commands plus NULL (index 40).
  static LabelMap standard();

  /// Arbitrary table; must contain NULL exactly once and no duplicates.
  explicit LabelMap(std::vector<LabelInfo> labels);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::string& name(std::size_t index) const;
  const std::string& display(std::size_t index) const;
  std::optional<std::size_t> find(std::string_view alias) const;
  /// Throws LabelError for unknown aliases.
  std::size_t index(std::string_view alias) const;
  bool contains(std::string_view alias) const { return find(alias).has_value(); }
  std::size_t null_index() const { return index(kNullLabel); }

  const std::vector<LabelInfo>& entries() const noexcept { return labels_; }
  bool operator==(const LabelMap&) const = default;

 private:
  std::vector<LabelInfo> labels_;
};

}  // namespace kws
