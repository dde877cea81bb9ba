#pragma once

// Shared fixtures for the test binaries: seeded random instances and
// oracles that do not go through the library's own solvers.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "graphmfe/graphmfe.hpp"

namespace graphmfe::testing {

using Rng = std::mt19937_64;

inline Vector random_vector(Rng& rng, Index n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

inline Index random_index(Rng& rng, Index n) {
  return std::uniform_int_distribution<Index>(0, n - 1)(rng);
}

/// Dense Laplacian matrix D with (Du)(x) = Δu(x), built from the edge list.
inline Eigen::MatrixXd dense_laplacian(const WeightedGraph& g) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(g.size(), g.size());
  for (const auto& e : g.edges()) {
    D(e.u, e.v) += e.weight / g.mu(e.u);
    D(e.u, e.u) -= e.weight / g.mu(e.u);
    D(e.v, e.u) += e.weight / g.mu(e.v);
    D(e.v, e.v) -= e.weight / g.mu(e.v);
  }
  return D;
}

/// Mean-zero solution of Δu = f through the Moore–Penrose inverse of the
/// symmetric matrix M^{1/2} Δ M^{-1/2}, taken from a full eigendecomposition.
inline Vector pseudo_inverse_poisson(const WeightedGraph& g, const Vector& f) {
  const Vector s = g.measure().cwiseSqrt();
  const Eigen::MatrixXd S = s.asDiagonal() * dense_laplacian(g) * s.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd sym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Vector& lam = eig.eigenvalues();
  const double cutoff = 1e-10 * lam.cwiseAbs().maxCoeff();
  Vector inv = Vector::Zero(lam.size());
  for (Index i = 0; i < lam.size(); ++i)
    if (std::abs(lam[i]) > cutoff) inv[i] = 1.0 / lam[i];
  const Eigen::MatrixXd& Q = eig.eigenvectors();
  const Vector y = Q * inv.asDiagonal() * Q.transpose() * s.cwiseProduct(f);
  Vector u = s.cwiseInverse().cwiseProduct(y);
  // The eigen-route answer is orthogonal to √μ in the scaled space, which is
  // already the μ-mean-zero representative; subtract any roundoff residue.
  return u.array() - g.measure().dot(u) / g.volume();
}

/// Copy of g with vertex i relabeled to perm[i] (ids keep their strings).
inline WeightedGraph permuted(const WeightedGraph& g, const std::vector<Index>& perm) {
  std::vector<Index> inverse(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inverse[static_cast<std::size_t>(perm[i])] = static_cast<Index>(i);
  GraphBuilder b;
  for (Index k = 0; k < g.size(); ++k) {
    const Index i = inverse[static_cast<std::size_t>(k)];
    b.add_vertex(g.id(i), g.mu(i));
  }
  for (const auto& e : g.edges()) b.add_edge(perm[e.u], perm[e.v], e.weight);
  return b.build();
}

inline std::vector<Index> random_permutation(Rng& rng, Index n) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

/// Vortex sites: one to three draws with repetition allowed.
inline std::vector<Index> random_vortices(Rng& rng, Index n) {
  const int m = std::uniform_int_distribution<int>(1, 3)(rng);
  std::vector<Index> out;
  for (int k = 0; k < m; ++k) out.push_back(random_index(rng, n));
  return out;
}

/// Fresh scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("graphmfe-" + tag + "-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace graphmfe::testing
