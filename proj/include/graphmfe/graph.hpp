#pragma once

// Finite weighted graphs with a vertex measure, real functions on their
// vertices, and the linear operators every solver in this library consumes:
//
//   Laplacian     (Δu)(x) = 1/μ(x) · Σ_{y~x} w_xy (u(y) − u(x))
//   energy        E(u)    = 1/4 · Σ_x Σ_{y~x} w_xy (u(y) − u(x))²  = −½ ∫ u Δu dμ
//   integral      ∫ f dμ  = Σ_x f(x) μ(x)
//
// The graph is immutable once built. Fields remember the graph they were
// created for and every operation rejects a field from another graph.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "graphmfe/errors.hpp"

namespace graphmfe {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;

struct Neighbor {
  Index vertex;
  double weight;
};

/// Undirected edge with u < v.
struct Edge {
  Index u;
  Index v;
  double weight;
};

namespace detail {
inline std::uint64_t next_graph_uid() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}
}  // namespace detail

class GraphBuilder;

/// Connected finite graph with symmetric positive edge weights and a positive
/// vertex measure. Vertices carry opaque string ids and a dense index in
/// insertion order.
class WeightedGraph {
 public:
  Index size() const noexcept { return static_cast<Index>(ids_.size()); }

  /// Identity used to bind fields. Copies share it since the graph is immutable.
  std::uint64_t uid() const noexcept { return uid_; }

  const std::string& id(Index i) const { return ids_.at(static_cast<std::size_t>(i)); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  std::optional<Index> find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  Index index_of(const std::string& id) const {
    auto i = find(id);
    if (!i) throw UnknownVertex(id);
    return *i;
  }

  double mu(Index i) const { return mu_[i]; }
  const Vector& measure() const noexcept { return mu_; }

  /// Σ_x μ(x).
  double volume() const noexcept { return volume_; }

  std::span<const Neighbor> neighbors(Index i) const {
    const auto begin = static_cast<std::size_t>(offsets_[static_cast<std::size_t>(i)]);
    const auto end = static_cast<std::size_t>(offsets_[static_cast<std::size_t>(i) + 1]);
    return std::span<const Neighbor>(adjacency_).subspan(begin, end - begin);
  }

  const std::vector<Edge>& edges() const noexcept { return edges_; }

  /// Σ_{y~x} w_xy.
  double weighted_degree(Index i) const { return degree_[i]; }
  const Vector& weighted_degrees() const noexcept { return degree_; }

  double max_weight() const noexcept { return max_weight_; }

  /// Symmetric positive semidefinite matrix L with L u = −μ ∘ Δu.
  Eigen::SparseMatrix<double> stiffness() const {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(size()) + 2 * edges_.size());
    for (Index i = 0; i < size(); ++i) triplets.emplace_back(i, i, degree_[i]);
    for (const auto& e : edges_) {
      triplets.emplace_back(e.u, e.v, -e.weight);
      triplets.emplace_back(e.v, e.u, -e.weight);
    }
    Eigen::SparseMatrix<double> L(size(), size());
    L.setFromTriplets(triplets.begin(), triplets.end());
    return L;
  }

 private:
  friend class GraphBuilder;
  WeightedGraph() = default;

  std::uint64_t uid_ = 0;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, Index> index_;
  Vector mu_;
  Vector degree_;
  double volume_ = 0.0;
  double max_weight_ = 0.0;
  std::vector<Edge> edges_;
  std::vector<Index> offsets_;
  std::vector<Neighbor> adjacency_;
};

/// Accumulates vertices and edges, then validates and freezes them into a
/// WeightedGraph. Parallel edges are merged by summing their weights.
class GraphBuilder {
 public:
  Index add_vertex(std::string id, double mu = 1.0) {
    if (!(std::isfinite(mu) && mu > 0.0))
      throw GraphError("vertex '" + id + "' has nonpositive measure");
    if (index_.count(id)) throw GraphError("duplicate vertex id '" + id + "'");
    const auto i = static_cast<Index>(ids_.size());
    index_.emplace(id, i);
    ids_.push_back(std::move(id));
    mu_.push_back(mu);
    return i;
  }

  void add_edge(Index u, Index v, double w = 1.0) {
    const auto n = static_cast<Index>(ids_.size());
    if (u < 0 || v < 0 || u >= n || v >= n) throw GraphError("edge endpoint out of range");
    if (u == v) throw GraphError("self-loop at vertex '" + ids_[static_cast<std::size_t>(u)] + "'");
    if (!(std::isfinite(w) && w > 0.0)) throw GraphError("edge weight must be positive");
    edges_[std::minmax(u, v)] += w;
  }

  void add_edge(const std::string& u, const std::string& v, double w = 1.0) {
    add_edge(lookup(u), lookup(v), w);
  }

  Index vertex_count() const noexcept { return static_cast<Index>(ids_.size()); }

  WeightedGraph build() const {
    if (ids_.empty()) throw GraphError("graph has no vertices");
    WeightedGraph g;
    g.uid_ = detail::next_graph_uid();
    g.ids_ = ids_;
    g.index_ = index_;
    const auto n = static_cast<Index>(ids_.size());
    g.mu_ = Eigen::Map<const Vector>(mu_.data(), n);
    g.volume_ = g.mu_.sum();
    g.degree_ = Vector::Zero(n);

    std::vector<Index> counts(static_cast<std::size_t>(n), 0);
    g.edges_.reserve(edges_.size());
    for (const auto& [key, w] : edges_) {
      g.edges_.push_back({key.first, key.second, w});
      ++counts[static_cast<std::size_t>(key.first)];
      ++counts[static_cast<std::size_t>(key.second)];
      g.degree_[key.first] += w;
      g.degree_[key.second] += w;
      g.max_weight_ = std::max(g.max_weight_, w);
    }
    g.offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
    for (std::size_t i = 0; i < counts.size(); ++i) g.offsets_[i + 1] = g.offsets_[i] + counts[i];
    g.adjacency_.resize(static_cast<std::size_t>(g.offsets_.back()));
    std::vector<Index> fill(g.offsets_.begin(), g.offsets_.end() - 1);
    for (const auto& e : g.edges_) {
      g.adjacency_[static_cast<std::size_t>(fill[static_cast<std::size_t>(e.u)]++)] = {e.v, e.weight};
      g.adjacency_[static_cast<std::size_t>(fill[static_cast<std::size_t>(e.v)]++)] = {e.u, e.weight};
    }

    // Breadth-first connectivity check.
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<Index> queue{0};
    seen[0] = 1;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      for (const auto& nb : g.neighbors(queue[head])) {
        if (!seen[static_cast<std::size_t>(nb.vertex)]) {
          seen[static_cast<std::size_t>(nb.vertex)] = 1;
          queue.push_back(nb.vertex);
        }
      }
    }
    if (static_cast<Index>(queue.size()) != n)
      throw GraphError("graph is disconnected (" + std::to_string(queue.size()) + " of " +
                       std::to_string(n) + " vertices reachable)");
    return g;
  }

 private:
  Index lookup(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw UnknownVertex(id);
    return it->second;
  }

  std::vector<std::string> ids_;
  std::unordered_map<std::string, Index> index_;
  std::vector<double> mu_;
  std::map<std::pair<Index, Index>, double> edges_;
};

/// Real function on the vertices of one graph. All values are finite.
class VertexField {
 public:
  explicit VertexField(const WeightedGraph& g) : uid_(g.uid()), values_(Vector::Zero(g.size())) {}

  VertexField(const WeightedGraph& g, Vector values) : uid_(g.uid()), values_(std::move(values)) {
    if (values_.size() != g.size())
      throw InvalidArgument("field has " + std::to_string(values_.size()) + " values, graph has " +
                            std::to_string(g.size()) + " vertices");
    if (!values_.allFinite()) throw NumericalError("vertex field contains a non-finite value");
  }

  static VertexField constant(const WeightedGraph& g, double c) {
    return VertexField(g, Vector::Constant(g.size(), c));
  }

  std::uint64_t graph_uid() const noexcept { return uid_; }
  bool bound_to(const WeightedGraph& g) const noexcept {
    return uid_ == g.uid() && values_.size() == g.size();
  }

  Index size() const noexcept { return values_.size(); }
  const Vector& values() const noexcept { return values_; }
  Vector& values() noexcept { return values_; }

  double operator[](Index i) const { return values_[i]; }
  double& operator[](Index i) { return values_[i]; }

  double at(const WeightedGraph& g, const std::string& id) const { return values_[g.index_of(id)]; }

 private:
  std::uint64_t uid_;
  Vector values_;
};

inline void require_bound(const WeightedGraph& g, const VertexField& f) {
  if (!f.bound_to(g)) throw BindingMismatch();
}

namespace detail {

inline Vector laplacian(const WeightedGraph& g, const Vector& u) {
  Vector out(g.size());
  for (Index x = 0; x < g.size(); ++x) {
    double acc = 0.0;
    for (const auto& nb : g.neighbors(x)) acc += nb.weight * (u[nb.vertex] - u[x]);
    out[x] = acc / g.mu(x);
  }
  return out;
}

inline double integral(const WeightedGraph& g, const Vector& f) { return g.measure().dot(f); }

}  // namespace detail

inline VertexField laplacian_apply(const WeightedGraph& g, const VertexField& u) {
  require_bound(g, u);
  return VertexField(g, detail::laplacian(g, u.values()));
}

/// Dirichlet energy ½∫|∇u|², normalized so that E(u) = −½ ∫ u Δu dμ.
inline double dirichlet_energy(const WeightedGraph& g, const VertexField& u) {
  require_bound(g, u);
  double acc = 0.0;
  for (const auto& e : g.edges()) {
    const double d = u[e.v] - u[e.u];
    acc += e.weight * d * d;
  }
  return 0.5 * acc;
}

inline double integrate(const WeightedGraph& g, const VertexField& f) {
  require_bound(g, f);
  return detail::integral(g, f.values());
}

/// Sum of unit point masses δ_p = 1/μ(p) at the poles (with multiplicity).
struct DiracSource {
  std::vector<Index> poles;
  VertexField field;

  double total_mass() const noexcept { return static_cast<double>(poles.size()); }
};

inline DiracSource dirac_field(const WeightedGraph& g, std::span<const Index> poles) {
  if (poles.empty()) throw InvalidArgument("dirac source needs at least one pole");
  Vector values = Vector::Zero(g.size());
  for (Index p : poles) {
    if (p < 0 || p >= g.size()) throw InvalidArgument("pole index out of range");
    values[p] += 1.0 / g.mu(p);
  }
  return {std::vector<Index>(poles.begin(), poles.end()), VertexField(g, std::move(values))};
}

inline DiracSource dirac_field(const WeightedGraph& g, std::span<const std::string> poles) {
  std::vector<Index> idx;
  idx.reserve(poles.size());
  for (const auto& id : poles) idx.push_back(g.index_of(id));
  return dirac_field(g, std::span<const Index>(idx));
}

struct NormAndMean {
  double sup_norm;
  double mean;
};

/// (max |f|, ∫f dμ / Vol).
inline NormAndMean sup_norm_and_mean(const WeightedGraph& g, const VertexField& f) {
  require_bound(g, f);
  return {f.values().lpNorm<Eigen::Infinity>(), detail::integral(g, f.values()) / g.volume()};
}

}  // namespace graphmfe
