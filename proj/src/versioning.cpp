// SPDX-License-Identifier: Apache-2.0

#include "kan/versioning.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kan/errors.hpp"
#include "kan/model_io.hpp"

namespace kan {

namespace fs = std::filesystem;
using nlohmann::json;

std::string VersionId::to_string() const {
  return std::to_string(major) + "." + std::to_string(minor);
}

VersionId VersionId::parse(const std::string& text) {
  const auto dot = text.find('.');
  auto digits = [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (dot == std::string::npos || !digits(text.substr(0, dot)) || !digits(text.substr(dot + 1)))
    throw InvalidArgument("malformed version id '" + text + "'");
  return {std::stoi(text.substr(0, dot)), std::stoi(text.substr(dot + 1))};
}

namespace {

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string snapshot_name(const VersionId& id) { return "v" + id.to_string() + ".model.json"; }

VersionEntry entry_from_json(const json& j) {
  VersionEntry e;
  e.id = VersionId::parse(j.at("version").get<std::string>());
  if (j.contains("parent") && !j.at("parent").is_null())
    e.parent = VersionId::parse(j.at("parent").get<std::string>());
  e.op = j.at("op").get<std::string>();
  e.timestamp = j.value("timestamp", "");
  e.snapshot = j.at("snapshot").get<std::string>();
  return e;
}

json entry_to_json(const VersionEntry& e) {
  json j;
  j["version"] = e.id.to_string();
  j["parent"] = e.parent ? json(e.parent->to_string()) : json(nullptr);
  j["op"] = e.op;
  j["timestamp"] = e.timestamp;
  j["snapshot"] = e.snapshot;
  return j;
}

}  // namespace

CheckpointStore::CheckpointStore(std::string dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create store directory '" + dir_ + "': " + ec.message());
  const fs::path index = fs::path(dir_) / "index.jsonl";
  if (!fs::exists(index)) return;
  const std::string text = read_file(index.string());
  std::vector<std::string> lines;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) lines.push_back(line);
  const bool complete_tail = !text.empty() && text.back() == '\n';
  for (std::size_t k = 0; k < lines.size(); ++k) {
    if (lines[k].empty()) continue;
    const bool last = k + 1 == lines.size();
    try {
      VersionEntry e = entry_from_json(json::parse(lines[k]));
      if (e.parent && !contains(*e.parent))
        throw IoError("version " + e.id.to_string() + " references unknown parent");
      if (contains(e.id)) throw IoError("duplicate version " + e.id.to_string());
      entries_.push_back(std::move(e));
    } catch (const std::exception& ex) {
      // A torn final line is the trace of an interrupted commit.
      if (last && !complete_tail) break;
      throw IoError("corrupted version index '" + index.string() + "' at line " +
                    std::to_string(k + 1) + ": " + ex.what());
    }
  }
}

bool CheckpointStore::contains(const VersionId& id) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.id == id; });
}

const VersionEntry& CheckpointStore::find(const VersionId& id) const {
  for (const auto& e : entries_)
    if (e.id == id) return e;
  throw InvalidArgument("unknown version " + id.to_string());
}

std::optional<VersionId> CheckpointStore::active() const {
  if (entries_.empty()) return std::nullopt;
  return entries_.back().id;
}

void CheckpointStore::append(const VersionEntry& e) {
  const fs::path index = fs::path(dir_) / "index.jsonl";
  // Drop a torn tail left by an interrupted commit before appending.
  if (fs::exists(index)) {
    std::string text = read_file(index.string());
    if (!text.empty() && text.back() != '\n') {
      const auto cut = text.rfind('\n');
      text = cut == std::string::npos ? std::string() : text.substr(0, cut + 1);
      write_file_atomic(index.string(), text);
    }
  }
  std::ofstream out(index, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot open '" + index.string() + "' for appending");
  out << entry_to_json(e).dump() << '\n';
  out.flush();
  if (!out) throw IoError("failed writing '" + index.string() + "'");
  entries_.push_back(e);
}

VersionId CheckpointStore::commit(const MultKanModel& model, const std::string& op) {
  VersionEntry e;
  if (entries_.empty()) {
    e.id = {0, 0};
  } else {
    e.parent = entries_.back().id;
    e.id = {e.parent->major, e.parent->minor + 1};
  }
  e.op = op;
  e.timestamp = now_iso();
  e.snapshot = snapshot_name(e.id);
  write_file_atomic((fs::path(dir_) / e.snapshot).string(), model_to_json(model));
  append(e);
  return e.id;
}

std::pair<MultKanModel, VersionId> CheckpointStore::rewind(const VersionId& target) {
  const VersionEntry& src = find(target);
  const std::string snapshot = read_file((fs::path(dir_) / src.snapshot).string());
  MultKanModel m = model_from_json(snapshot);
  int max_major = 0;
  for (const auto& e : entries_) max_major = std::max(max_major, e.id.major);
  VersionEntry e;
  e.id = {max_major + 1, target.minor};
  e.parent = target;
  e.op = "rewind";
  e.timestamp = now_iso();
  e.snapshot = snapshot_name(e.id);
  write_file_atomic((fs::path(dir_) / e.snapshot).string(), snapshot);
  append(e);
  return {std::move(m), e.id};
}

MultKanModel CheckpointStore::load(const VersionId& id) const {
  return load_model((fs::path(dir_) / find(id).snapshot).string());
}

std::string CheckpointStore::render() const {
  std::ostringstream os;
  for (const auto& e : entries_) {
    os << (e.parent ? e.parent->to_string() : std::string("-")) << " -> " << e.id.to_string() << "  "
       << e.op;
    if (!e.timestamp.empty()) os << "  " << e.timestamp;
    os << '\n';
  }
  return os.str();
}

}  // namespace kan
