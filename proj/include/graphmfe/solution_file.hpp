#pragma once

// Solution files: a JSON document holding the field a solver produced, the
// parameters it was produced for and the solver's report.
//
//   {"format": "graphmfe-solution/1",
//    "graph_hash": "fnv1a64:...",
//    "equation": "dirac" | "vortex" | "green",
//    "parameters": {...},
//    "field": {"<vertex id>": value, ...} | null,
//    "report": {"status": ..., "residual_sup": ..., ...}}
//
// Doubles are written in shortest round-trip form, so reading a file back
// reproduces every value bit for bit.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphmfe/graph.hpp"
#include "graphmfe/graph_io.hpp"
#include "graphmfe/monotone.hpp"
#include "graphmfe/variational.hpp"

namespace graphmfe {

inline constexpr const char* kSolutionFormat = "graphmfe-solution/1";

struct SolutionFile {
  std::string graph_hash;
  std::string equation;
  nlohmann::json parameters = nlohmann::json::object();
  /// Field values in graph order; absent when the solver found no solution.
  std::optional<std::vector<std::pair<std::string, double>>> field;
  nlohmann::json report = nlohmann::json::object();

  static SolutionFile from_field(const WeightedGraph& g, std::string equation, const VertexField& u) {
    require_bound(g, u);
    SolutionFile s;
    s.graph_hash = ::graphmfe::graph_hash(g);
    s.equation = std::move(equation);
    std::vector<std::pair<std::string, double>> values;
    values.reserve(static_cast<std::size_t>(g.size()));
    for (Index i = 0; i < g.size(); ++i) values.emplace_back(g.id(i), u[i]);
    s.field = std::move(values);
    return s;
  }

  /// The stored field on g; throws if a vertex is missing.
  VertexField field_on(const WeightedGraph& g) const {
    if (!field) throw InvalidArgument("solution file has no field");
    Vector values = Vector::Constant(g.size(), std::numeric_limits<double>::quiet_NaN());
    for (const auto& [id, value] : *field) values[g.index_of(id)] = value;
    if (!values.allFinite()) throw InvalidArgument("solution file does not cover every vertex");
    return VertexField(g, std::move(values));
  }

  nlohmann::json to_json() const {
    nlohmann::json doc;
    doc["format"] = kSolutionFormat;
    doc["graph_hash"] = graph_hash;
    doc["equation"] = equation;
    doc["parameters"] = parameters;
    if (field) {
      nlohmann::json values = nlohmann::json::object();
      for (const auto& [id, value] : *field) values[id] = value;
      doc["field"] = std::move(values);
    } else {
      doc["field"] = nullptr;
    }
    doc["report"] = report;
    return doc;
  }

  std::string dump() const { return to_json().dump(2) + "\n"; }

  static SolutionFile from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || doc.value("format", "") != kSolutionFormat)
      throw InvalidArgument("not a graphmfe solution file");
    SolutionFile s;
    s.graph_hash = doc.at("graph_hash").get<std::string>();
    s.equation = doc.at("equation").get<std::string>();
    s.parameters = doc.at("parameters");
    s.report = doc.at("report");
    const auto& f = doc.at("field");
    if (f.is_object()) {
      std::vector<std::pair<std::string, double>> values;
      for (const auto& [id, value] : f.items()) values.emplace_back(id, value.get<double>());
      s.field = std::move(values);
    }
    return s;
  }

  static SolutionFile parse(const std::string& text) {
    try {
      return from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& ex) {
      throw InvalidArgument(std::string("malformed solution file: ") + ex.what());
    }
  }

  static SolutionFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open solution file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
  }
};

/// Writes through a temporary file and a rename so readers never see a partial file.
inline void write_file_atomically(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write '" + tmp + "'");
    out << contents;
    if (!out.flush()) throw InvalidArgument("cannot write '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw InvalidArgument("cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

/// ‖residual‖∞ of the stored field for the equation the file names.
inline double recompute_residual(const WeightedGraph& g, const SolutionFile& s) {
  const VertexField u = s.field_on(g);
  const auto& params = s.parameters;
  if (s.equation == "dirac") {
    const DiracProblem p(g, params.at("rho").get<double>(), params.at("pole").get<std::string>());
    return dirac_residual(p, u).values().lpNorm<Eigen::Infinity>();
  }
  if (s.equation == "vortex") {
    const auto ids = params.at("vortices").get<std::vector<std::string>>();
    const VortexProblem p(g, params.at("lambda").get<double>(), std::span<const std::string>(ids));
    return vortex_residual(p, u).values().lpNorm<Eigen::Infinity>();
  }
  if (s.equation == "green") {
    const Index pole = g.index_of(params.at("pole").get<std::string>());
    Vector r = detail::laplacian(g, u.values()) + Vector::Constant(g.size(), 1.0 / g.volume());
    r[pole] -= 1.0 / g.mu(pole);
    return r.lpNorm<Eigen::Infinity>();
  }
  throw InvalidArgument("unknown equation tag '" + s.equation + "'");
}

}  // namespace graphmfe
