// SPDX-License-Identifier: Apache-2.0

#include "kan/model_io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kan/errors.hpp"

namespace kan {

using nlohmann::json;

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v))
    throw NonFiniteError(std::string("cannot serialize non-finite ") + what, -1);
}

json edge_to_json(const EdgeFunction& e) {
  json j;
  for (double c : e.spline.coef) require_finite(c, "spline coefficient");
  require_finite(e.base_scale, "base scale");
  require_finite(e.spline_scale, "spline scale");
  j["knots"] = e.spline.grid.knots();
  j["grid_intervals"] = e.spline.grid.num_intervals();
  j["order"] = e.spline.grid.order();
  j["coef"] = e.spline.coef;
  j["base_scale"] = e.base_scale;
  j["spline_scale"] = e.spline_scale;
  j["mask"] = e.mask;
  j["frozen"] = e.frozen;
  j["fresh"] = e.fresh;
  j["mode"] = std::string(edge_mode_name(e.mode));
  json s;
  s["prim"] = std::string(prim_name(e.sym.prim));
  s["a"] = e.sym.a;
  s["b"] = e.sym.b;
  s["c"] = e.sym.c;
  s["d"] = e.sym.d;
  j["symbolic"] = s;
  return j;
}

EdgeFunction edge_from_json(const json& j) {
  EdgeFunction e;
  Grid g(j.at("knots").get<std::vector<double>>(), j.at("grid_intervals").get<int>(),
         j.at("order").get<int>());
  e.spline = SplineCurve(std::move(g), j.at("coef").get<std::vector<double>>());
  e.base_scale = j.at("base_scale").get<double>();
  e.spline_scale = j.at("spline_scale").get<double>();
  e.mask = j.at("mask").get<bool>();
  e.frozen = j.at("frozen").get<bool>();
  e.fresh = j.value("fresh", false);
  e.mode = edge_mode_from_name(j.at("mode").get<std::string>());
  const json& s = j.at("symbolic");
  e.sym.prim = prim_from_name(s.at("prim").get<std::string>());
  e.sym.a = s.at("a").get<double>();
  e.sym.b = s.at("b").get<double>();
  e.sym.c = s.at("c").get<double>();
  e.sym.d = s.at("d").get<double>();
  return e;
}

}  // namespace

std::string model_to_json(const MultKanModel& model) {
  model.validate();
  json j;
  j["format"] = "multkan";
  j["format_version"] = kModelFormatVersion;
  json width = json::array();
  for (const auto& s : model.width) width.push_back(json{s.n_add, s.arities});
  j["width"] = width;
  j["input_names"] = model.input_names;
  j["use_base"] = model.use_base;
  json layers = json::array();
  for (const auto& layer : model.layers) {
    json lj;
    lj["n_in"] = layer.n_in;
    lj["n_out"] = layer.n_out;
    json edges = json::array();
    for (const auto& e : layer.edges) edges.push_back(edge_to_json(e));
    lj["edges"] = edges;
    layers.push_back(lj);
  }
  j["layers"] = layers;
  return j.dump(1) + "\n";
}

MultKanModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("malformed model file: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "multkan")
      throw InvalidArgument("not a model file");
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion)
      throw InvalidArgument("unsupported model format version " + std::to_string(version));
    MultKanModel m;
    for (const auto& w : j.at("width")) {
      NodeSpec s;
      s.n_add = w.at(0).get<int>();
      s.arities = w.at(1).get<std::vector<int>>();
      m.width.push_back(std::move(s));
    }
    m.input_names = j.at("input_names").get<std::vector<std::string>>();
    m.use_base = j.at("use_base").get<bool>();
    for (const auto& lj : j.at("layers")) {
      KanLayer layer;
      layer.n_in = lj.at("n_in").get<int>();
      layer.n_out = lj.at("n_out").get<int>();
      for (const auto& ej : lj.at("edges")) layer.edges.push_back(edge_from_json(ej));
      m.layers.push_back(std::move(layer));
    }
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed model file: ") + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw IoError("failed reading '" + path + "'");
  return os.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("failed writing '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

void save_model(const std::string& path, const MultKanModel& model) {
  write_file_atomic(path, model_to_json(model));
}

MultKanModel load_model(const std::string& path) { return model_from_json(read_file(path)); }

}  // namespace kan
