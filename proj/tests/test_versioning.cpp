// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <unistd.h>

#include "kan/errors.hpp"
#include "kan/model_io.hpp"
#include "kan/versioning.hpp"
#include "test_util.hpp"

using namespace kan;
using namespace kan::testing;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("kan_store_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<double> parameters(const MultKanModel& m) {
  std::vector<double> out;
  for (const auto& layer : m.layers)
    for (const auto& e : layer.edges) {
      out.insert(out.end(), e.spline.coef.begin(), e.spline.coef.end());
      out.insert(out.end(), {e.base_scale, e.spline_scale, e.sym.a, e.sym.b, e.sym.c, e.sym.d});
    }
  return out;
}

}  // namespace

TEST_CASE("version ids render and parse") {
  CHECK(VersionId{1, 2}.to_string() == "1.2");
  CHECK(VersionId::parse("10.3") == VersionId{10, 3});
  CHECK(VersionId{0, 9} < VersionId{1, 0});
  for (const char* bad : {"", "1", "1.", ".2", "a.b", "1.2.3", "-1.0"})
    CHECK_THROWS_AS(VersionId::parse(bad), InvalidArgument);
}

TEST_CASE("fresh store commits start at 0.0") {
  TempDir dir;
  CheckpointStore store(dir.str());
  CHECK(store.history().empty());
  CHECK_FALSE(store.active());
  const MultKanModel m = random_model(parse_width("[2,[1,1],1]"), 1);
  CHECK(store.commit(m, "init") == VersionId{0, 0});
  CHECK(store.commit(m, "train") == VersionId{0, 1});
  CHECK(fs::exists(dir.path / "index.jsonl"));
  CHECK(fs::exists(dir.path / "v0.1.model.json"));
}

TEST_CASE("unchanged commits give distinct ids and byte-equal snapshots") {
  TempDir dir;
  CheckpointStore store(dir.str());
  const MultKanModel m = random_model(parse_width("[3,2,1]"), 4);
  const VersionId a = store.commit(m, "noop");
  const VersionId b = store.commit(m, "noop");
  CHECK(a != b);
  CHECK(slurp(dir.path / ("v" + a.to_string() + ".model.json")) ==
        slurp(dir.path / ("v" + b.to_string() + ".model.json")));
}

TEST_CASE("rewind opens a new major and restores parameters exactly") {
  TempDir dir;
  CheckpointStore store(dir.str());
  MultKanModel m = random_model(parse_width("[2,[0,1],1]"), 7);
  store.commit(m, "init");
  m.layers[0].edges[0].spline.coef[2] += 0.125;
  const MultKanModel at_01 = m;
  store.commit(m, "train");
  m.layers[0].edges[1].spline.coef[0] *= -1.0;
  store.commit(m, "fix_symbolic");

  auto [restored, id] = store.rewind({0, 1});
  CHECK(id == VersionId{1, 1});
  CHECK(parameters(restored) == parameters(at_01));
  CHECK(model_to_json(restored) == model_to_json(at_01));
  const Eigen::MatrixXd X = uniform_matrix(50, 2, -1, 1, 3);
  CHECK(max_abs_diff(evaluate(restored, X), evaluate(at_01, X)) == 0.0);
  CHECK(store.commit(restored, "fix_symbolic") == VersionId{1, 2});

  // Rewinding the active version only bumps the major.
  auto [same, id2] = store.rewind({1, 2});
  CHECK(id2 == VersionId{2, 2});
  CHECK(model_to_json(same) == model_to_json(store.load({1, 2})));
  auto [again, id3] = store.rewind({0, 0});
  CHECK(id3 == VersionId{3, 0});
  CHECK_THROWS_AS(store.rewind({7, 7}), InvalidArgument);
}

TEST_CASE("hypothesis-testing history forms two branches") {
  TempDir dir;
  {
    CheckpointStore store(dir.str());
    const MultKanModel m = random_model(parse_width("[2,1]"), 2);
    store.commit(m, "init");
    store.commit(m, "train");
    store.commit(m, "fix_symbolic");
    auto [r, id] = store.rewind({0, 1});
    store.commit(r, "fix_symbolic");
  }
  const CheckpointStore store(dir.str());
  const auto& h = store.history();
  REQUIRE(h.size() == 5);
  std::vector<std::string> ids, parents;
  for (const auto& e : h) {
    ids.push_back(e.id.to_string());
    parents.push_back(e.parent ? e.parent->to_string() : "-");
  }
  CHECK(ids == std::vector<std::string>{"0.0", "0.1", "0.2", "1.1", "1.2"});
  CHECK(parents == std::vector<std::string>{"-", "0.0", "0.1", "0.1", "1.1"});
  CHECK(store.active() == VersionId{1, 2});
  CHECK(store.render().find("0.1 -> 1.1") != std::string::npos);
}

TEST_CASE("random commits and rewinds keep a tree rooted at 0.0") {
  TempDir dir;
  CheckpointStore store(dir.str());
  std::mt19937_64 rng(12);
  MultKanModel m = random_model(parse_width("[2,2,1]"), 5);
  for (int k = 0; k < 10; ++k) {
    m.layers[0].edges[k % 4].spline.coef[0] += 0.01 * k;
    store.commit(m, "step" + std::to_string(k));
  }
  CHECK(store.history().size() == 10);
  for (int k = 0; k < 6; ++k) {
    const auto& h = store.history();
    const VersionId target = h[std::uniform_int_distribution<std::size_t>(0, h.size() - 1)(rng)].id;
    auto [r, id] = store.rewind(target);
    store.commit(r, "edit");
  }
  const auto& h = store.history();
  CHECK(h.size() == 22);
  CHECK(h.front().id == VersionId{0, 0});
  CHECK_FALSE(h.front().parent);
  int last_major = 0;
  for (std::size_t k = 1; k < h.size(); ++k) {
    REQUIRE(h[k].parent);
    // Parents precede children.
    bool seen = false;
    for (std::size_t q = 0; q < k; ++q) seen = seen || h[q].id == *h[k].parent;
    CHECK(seen);
    CHECK(h[k].id.major >= last_major);
    last_major = h[k].id.major;
  }
  for (const auto& e : h) CHECK_NOTHROW(store.load(e.id));
}

TEST_CASE("torn index tail is ignored and overwritten") {
  TempDir dir;
  {
    CheckpointStore store(dir.str());
    const MultKanModel m = random_model(parse_width("[1,1]"), 1);
    store.commit(m, "init");
    store.commit(m, "train");
  }
  {
    std::ofstream out(dir.path / "index.jsonl", std::ios::app | std::ios::binary);
    out << R"({"version":"0.2","parent":"0.1","op":"tra)";
  }
  CheckpointStore store(dir.str());
  CHECK(store.history().size() == 2);
  const MultKanModel m = store.load({0, 1});
  CHECK(store.commit(m, "prune") == VersionId{0, 2});
  const CheckpointStore reread(dir.str());
  CHECK(reread.history().size() == 3);
}

TEST_CASE("corruption before the tail is an I/O error") {
  TempDir dir;
  {
    CheckpointStore store(dir.str());
    const MultKanModel m = random_model(parse_width("[1,1]"), 1);
    store.commit(m, "init");
    store.commit(m, "train");
  }
  std::string text = slurp(dir.path / "index.jsonl");
  text.insert(0, "{not json}\n");
  std::ofstream(dir.path / "index.jsonl", std::ios::binary) << text;
  CHECK_THROWS_AS(CheckpointStore(dir.str()), IoError);
}

TEST_CASE("missing snapshot files surface as I/O errors") {
  TempDir dir;
  CheckpointStore store(dir.str());
  store.commit(random_model(parse_width("[1,1]"), 1), "init");
  fs::remove(dir.path / "v0.0.model.json");
  CHECK_THROWS_AS(store.load({0, 0}), IoError);
  CHECK_THROWS_AS(store.load({0, 5}), InvalidArgument);
}
