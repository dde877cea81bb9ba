#pragma once

// JSON graph files:
//   {"vertices":[{"id":"a","mu":1.0},...], "edges":[{"u":"a","v":"b","w":1.0},...]}
// "mu" defaults to 1.0 and "w" to 1.0 when omitted.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "graphmfe/graph.hpp"

namespace graphmfe {

inline WeightedGraph graph_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw GraphError("graph document must be a JSON object");
  if (!doc.contains("vertices") || !doc["vertices"].is_array())
    throw GraphError("graph document needs a \"vertices\" array");

  GraphBuilder builder;
  for (const auto& v : doc["vertices"]) {
    if (!v.is_object() || !v.contains("id") || !v["id"].is_string())
      throw GraphError("every vertex needs a string \"id\"");
    double mu = 1.0;
    if (v.contains("mu")) {
      if (!v["mu"].is_number()) throw GraphError("vertex \"mu\" must be a number");
      mu = v["mu"].get<double>();
    }
    builder.add_vertex(v["id"].get<std::string>(), mu);
  }
  if (doc.contains("edges")) {
    if (!doc["edges"].is_array()) throw GraphError("\"edges\" must be an array");
    for (const auto& e : doc["edges"]) {
      if (!e.is_object() || !e.contains("u") || !e.contains("v") || !e["u"].is_string() ||
          !e["v"].is_string())
        throw GraphError("every edge needs string endpoints \"u\" and \"v\"");
      double w = 1.0;
      if (e.contains("w")) {
        if (!e["w"].is_number()) throw GraphError("edge \"w\" must be a number");
        w = e["w"].get<double>();
      }
      const auto& u = e["u"].get_ref<const std::string&>();
      const auto& v = e["v"].get_ref<const std::string&>();
      try {
        builder.add_edge(u, v, w);
      } catch (const UnknownVertex& ex) {
        throw GraphError(std::string("edge references ") + ex.what());
      }
    }
  }
  return builder.build();
}

inline WeightedGraph parse_graph_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& ex) {
    throw GraphError(std::string("malformed graph JSON: ") + ex.what());
  }
  return graph_from_json(doc);
}

inline WeightedGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open graph file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_graph_json(buf.str());
}

inline nlohmann::json graph_to_json(const WeightedGraph& g) {
  nlohmann::json vertices = nlohmann::json::array();
  for (Index i = 0; i < g.size(); ++i) vertices.push_back({{"id", g.id(i)}, {"mu", g.mu(i)}});
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : g.edges()) edges.push_back({{"u", g.id(e.u)}, {"v", g.id(e.v)}, {"w", e.weight}});
  return {{"vertices", std::move(vertices)}, {"edges", std::move(edges)}};
}

/// FNV-1a digest of the graph's ids, measures and merged edges, with doubles
/// hashed by bit pattern. Stable across runs and platforms with IEEE doubles.
inline std::string graph_hash(const WeightedGraph& g) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto bytes = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  auto number = [&bytes](auto x) { bytes(&x, sizeof(x)); };
  number(static_cast<std::int64_t>(g.size()));
  for (Index i = 0; i < g.size(); ++i) {
    const auto& id = g.id(i);
    number(static_cast<std::int64_t>(id.size()));
    bytes(id.data(), id.size());
    number(g.mu(i));
  }
  number(static_cast<std::int64_t>(g.edges().size()));
  for (const auto& e : g.edges()) {
    number(static_cast<std::int64_t>(e.u));
    number(static_cast<std::int64_t>(e.v));
    number(e.weight);
  }
  char out[24];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return std::string("fnv1a64:") + out;
}

}  // namespace graphmfe
