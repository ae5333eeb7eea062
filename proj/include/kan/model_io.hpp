// SPDX-License-Identifier: Apache-2.0
//
// JSON model files. Output is byte-deterministic for a given model (sorted
// keys, shortest round-trip float formatting).

#pragma once

#include <string>

#include "kan/model.hpp"

namespace kan {

constexpr int kModelFormatVersion = 1;

std::string model_to_json(const MultKanModel& model);
MultKanModel model_from_json(const std::string& text);

void save_model(const std::string& path, const MultKanModel& model);
MultKanModel load_model(const std::string& path);

/// Whole-file helpers shared by the CLI and the version store.
std::string read_file(const std::string& path);
/// Writes via a temporary file and rename, so readers never see a torn file.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace kan
