/*
 Copyright 2026 The cvxctg Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

// CSV tables with round-trip decimals and the surrogate JSON format.

#pragma once

#include "cvxctg/config.hpp"
#include "cvxctg/convex_fit.hpp"
#include "cvxctg/icnn.hpp"
#include "cvxctg/onestep.hpp"
#include "cvxctg/riccati.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

namespace cvxctg {

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) throw LoadError("not a number: '" + s + "'");
  return v;
}

/// Column-named table of strings; numeric cells go through format_double.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw LoadError("missing CSV column " + name);
  }

  [[nodiscard]] double number(std::size_t row, const std::string& name) const {
    return parse_double(rows.at(row).at(column(name)));
  }
};

inline void write_csv(const CsvTable& t, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParameterError("cannot open " + path + " for writing");
  auto line = [&os](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) {
    if (r.size() != t.header.size()) throw ContractError("CSV row width differs from header");
    line(r);
  }
  if (!os) throw ParameterError("failed writing " + path);
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open " + path);
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const auto k = s.find(',', start);
      cells.push_back(s.substr(start, k == std::string::npos ? std::string::npos : k - start));
      if (k == std::string::npos) break;
      start = k + 1;
    }
    return cells;
  };
  CsvTable t;
  std::string s;
  if (!std::getline(is, s) || s.empty()) throw LoadError(path + ": missing CSV header");
  t.header = split(s);
  while (std::getline(is, s)) {
    if (s.empty()) continue;
    t.rows.push_back(split(s));
    if (t.rows.back().size() != t.header.size()) {
      throw LoadError(path + ": row " + std::to_string(t.rows.size()) + " has the wrong width");
    }
  }
  return t;
}

inline void write_json(const Json& j, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParameterError("cannot open " + path + " for writing");
  os << j.dump(2) << '\n';
}

inline Json read_json(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open " + path);
  try {
    return Json::parse(is);
  } catch (const Json::exception& e) {
    throw LoadError(path + ": " + e.what());
  }
}

inline constexpr int kSurrogateSchemaVersion = 1;

namespace detail {

inline Json activation_json(const Activation& a) {
  return {{"kind", to_string(a.kind)}, {"slope", a.slope}};
}

inline Activation activation_from(const Json& j) {
  const auto kind = j.at("kind").get<std::string>();
  const double slope = j.at("slope").get<double>();
  if (kind == to_string(Activation::Kind::leaky_relu)) return Activation::leaky(slope);
  if (kind == to_string(Activation::Kind::relu)) return Activation::rectifier();
  if (kind == to_string(Activation::Kind::identity)) return Activation::linear();
  throw LoadError("unknown activation " + kind);
}

inline Json function_json(const SurrogateFunction& f, const Normalization& norm) {
  Json j;
  j["normalization"] = {{"scale", norm.scale}, {"offset", norm.offset}};
  if (const auto* pwa = std::get_if<InterpolantSet>(&f)) {
    j["points"] = matrix_json(pwa->points);
    j["values"] = vector_json(pwa->values);
    j["gradients"] = matrix_json(pwa->gradients);
    return j;
  }
  const auto& net = std::get<IcnnNet>(f);
  j["arch"] = {{"input_dim", net.arch.input_dim},
               {"hidden", net.arch.hidden},
               {"hidden_activation", activation_json(net.arch.hidden_activation)},
               {"output_activation", activation_json(net.arch.output_activation)}};
  Json layers = Json::array();
  for (const auto& l : net.params.layers) {
    // Effective W^z for readers; raw_z is what gets loaded.
    layers.push_back({{"Wx", matrix_json(l.Wx)},
                      {"b", vector_json(l.b)},
                      {"raw_z", l.raw_z.size() ? matrix_json(l.raw_z) : Json::array()},
                      {"Wz", l.raw_z.size() ? matrix_json(l.Wz()) : Json::array()}});
  }
  j["weights"] = std::move(layers);
  return j;
}

inline Matrix matrix_from(const Json& j, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols == 0) return Matrix(rows, cols);
  Matrix m = json_matrix(j, "matrix");
  if (m.rows() != rows || m.cols() != cols) throw LoadError("matrix has the wrong shape");
  return m;
}

inline SurrogateFunction function_from(const Json& j, SurrogateKind kind, Normalization& norm) {
  const Json& n = j.at("normalization");
  norm = {n.at("scale").get<double>(), n.at("offset").get<double>()};
  if (kind == SurrogateKind::pwa) {
    InterpolantSet s;
    s.points = json_matrix(j.at("points"), "points");
    s.values = json_vector(j.at("values"), "values");
    s.gradients = json_matrix(j.at("gradients"), "gradients");
    s.validate();
    return s;
  }
  IcnnNet net;
  const Json& a = j.at("arch");
  net.arch.input_dim = a.at("input_dim").get<Eigen::Index>();
  net.arch.hidden = a.at("hidden").get<std::vector<Eigen::Index>>();
  net.arch.hidden_activation = activation_from(a.at("hidden_activation"));
  net.arch.output_activation = activation_from(a.at("output_activation"));
  net.arch.validate();
  net.params = IcnnParams::zeros(net.arch);
  const Json& layers = j.at("weights");
  if (!layers.is_array() || layers.size() != net.params.layers.size()) {
    throw LoadError("ICNN layer count does not match the architecture");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = net.params.layers[i];
    l.Wx = matrix_from(layers[i].at("Wx"), l.Wx.rows(), l.Wx.cols());
    l.b = json_vector(layers[i].at("b"), "b");
    l.raw_z = matrix_from(layers[i].at("raw_z"), l.raw_z.rows(), l.raw_z.cols());
    const Matrix wz = matrix_from(layers[i].at("Wz"), l.raw_z.rows(), l.raw_z.cols());
    if (wz != l.Wz()) throw LoadError("stored Wz does not match raw_z squared");
  }
  net.params.check(net.arch);
  return net;
}

}  // namespace detail

inline Json surrogate_json(const SurrogateModel& s) {
  s.validate();
  Json j;
  j["schema_version"] = kSurrogateSchemaVersion;
  j["kind"] = to_string(s.kind());
  j["mu"] = s.mu;
  j["P_lqr"] = detail::matrix_json(s.P_lqr.matrix());
  j["value"] = detail::function_json(s.value, s.value_norm);
  j["feasibility"] = detail::function_json(s.feasibility, s.feasibility_norm);
  return j;
}

inline SurrogateModel surrogate_from_json(const Json& j) {
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kSurrogateSchemaVersion) {
      throw LoadError(detail::concat("surrogate schema version ", version, " is not supported (expected ",
                                     kSurrogateSchemaVersion, ")"));
    }
    const auto kind_name = j.at("kind").get<std::string>();
    SurrogateKind kind;
    if (kind_name == "pwa") {
      kind = SurrogateKind::pwa;
    } else if (kind_name == "icnn") {
      kind = SurrogateKind::icnn;
    } else {
      throw LoadError("unknown surrogate kind " + kind_name);
    }
    Normalization nv, nf;
    SurrogateFunction value = detail::function_from(j.at("value"), kind, nv);
    SurrogateFunction feas = detail::function_from(j.at("feasibility"), kind, nf);
    SurrogateModel s{std::move(value), std::move(feas), nv, nf,
                     QuadraticForm(detail::json_matrix(j.at("P_lqr"), "P_lqr")),
                     j.at("mu").get<double>()};
    s.validate();
    return s;
  } catch (const Json::exception& e) {
    throw LoadError(std::string("malformed surrogate: ") + e.what());
  } catch (const ParameterError& e) {
    throw LoadError(std::string("invalid surrogate: ") + e.what());
  }
}

inline void save_surrogate(const SurrogateModel& s, const std::string& path) {
  write_json(surrogate_json(s), path);
}

inline SurrogateModel load_surrogate(const std::string& path) {
  return surrogate_from_json(read_json(path));
}

}  // namespace cvxctg
