#pragma once

// Small graph factories used by tests, the acceptance suite and examples.

#include <random>
#include <string>

#include "graphmfe/graph.hpp"

namespace graphmfe {

inline WeightedGraph single_vertex_graph(double mu = 1.0) {
  GraphBuilder b;
  b.add_vertex("a", mu);
  return b.build();
}

/// Two vertices "a", "b" joined by one edge.
inline WeightedGraph two_vertex_graph(double w = 1.0, double mu_a = 1.0, double mu_b = 1.0) {
  GraphBuilder b;
  b.add_vertex("a", mu_a);
  b.add_vertex("b", mu_b);
  b.add_edge("a", "b", w);
  return b.build();
}

inline WeightedGraph path_graph(Index n, double w = 1.0) {
  GraphBuilder b;
  for (Index i = 0; i < n; ++i) b.add_vertex("v" + std::to_string(i));
  for (Index i = 0; i + 1 < n; ++i) b.add_edge(i, i + 1, w);
  return b.build();
}

struct RandomGraphOptions {
  Index min_vertices = 2;
  Index max_vertices = 50;
  double weight_min = 0.5;
  double weight_max = 2.0;
  double mu_min = 0.5;
  double mu_max = 2.0;
  /// Probability of each non-tree edge, on top of a random spanning tree.
  double extra_edge_probability = 0.15;
};

/// Random spanning tree (each new vertex attaches to a uniformly chosen
/// earlier one) plus independent extra edges.
template <class Rng>
WeightedGraph random_connected_graph(Rng& rng, const RandomGraphOptions& opts = {}) {
  std::uniform_int_distribution<Index> size_dist(opts.min_vertices, opts.max_vertices);
  std::uniform_real_distribution<double> weight(opts.weight_min, opts.weight_max);
  std::uniform_real_distribution<double> measure(opts.mu_min, opts.mu_max);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  const Index n = size_dist(rng);
  GraphBuilder b;
  for (Index i = 0; i < n; ++i) b.add_vertex("v" + std::to_string(i), measure(rng));
  for (Index i = 1; i < n; ++i) {
    std::uniform_int_distribution<Index> parent(0, i - 1);
    b.add_edge(i, parent(rng), weight(rng));
  }
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (coin(rng) < opts.extra_edge_probability) b.add_edge(i, j, weight(rng));
  return b.build();
}

}  // namespace graphmfe
