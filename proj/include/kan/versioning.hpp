// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint store with major.minor versions and rewind-as-branch.

#pragma once

#include <compare>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kan/model.hpp"

namespace kan {

struct VersionId {
  int major = 0;
  int minor = 0;

  std::string to_string() const;
  static VersionId parse(const std::string& text);
  auto operator<=>(const VersionId&) const = default;
};

struct VersionEntry {
  VersionId id;
  std::optional<VersionId> parent;
  std::string op;
  std::string timestamp;
  std::string snapshot;  // file name inside the store directory
};

/// Layout: <dir>/index.jsonl (append-only) and <dir>/v<major>.<minor>.model.json.
class CheckpointStore {
 public:
  /// Creates the directory if needed and reads the index.
  explicit CheckpointStore(std::string dir);

  const std::string& dir() const { return dir_; }

  /// First commit is 0.0; later commits continue the active major.
  VersionId commit(const MultKanModel& model, const std::string& op);

  /// Restores `target` and records it as (max major + 1).(target minor).
  std::pair<MultKanModel, VersionId> rewind(const VersionId& target);

  MultKanModel load(const VersionId& id) const;
  std::optional<VersionId> active() const;
  bool contains(const VersionId& id) const;

  /// Index order, which is topological (parents first).
  const std::vector<VersionEntry>& history() const { return entries_; }

  /// "0.0 -> 0.1" style lines, one per version.
  std::string render() const;

 private:
  void append(const VersionEntry& e);
  const VersionEntry& find(const VersionId& id) const;

  std::string dir_;
  std::vector<VersionEntry> entries_;
};

}  // namespace kan
