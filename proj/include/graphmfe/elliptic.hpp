#pragma once

// Linear solves against the graph Laplacian.
//
// Both operators are assembled in the symmetric form obtained by multiplying
// with the measure: with L the stiffness matrix (L u = −μ∘Δu) and M = diag(μ),
//
//   Δu = f          ⇔  L u = −M f            (singular, kernel = constants)
//   (Δ − K) v = f   ⇔  (L + K M) v = −M f    (symmetric positive definite)
//
// Small graphs are factored densely. Larger graphs use Jacobi-preconditioned
// conjugate gradients. Either way the returned solution is checked against
// the sup-norm residual contract before it is handed back.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "graphmfe/errors.hpp"
#include "graphmfe/graph.hpp"

namespace graphmfe {

enum class SolveMethod { direct, iterative };

inline const char* to_string(SolveMethod m) { return m == SolveMethod::direct ? "direct" : "iterative"; }

struct LinearSolveReport {
  /// ‖(operator) x − f‖∞ recomputed from the returned solution.
  double residual_sup = 0.0;
  SolveMethod method = SolveMethod::direct;
  int iterations = 0;
};

struct LinearSolveOptions {
  /// The solve must reach ‖defect‖∞ ≤ rel_tol · max(1, ‖f‖∞).
  double rel_tol = 1e-9;
  /// Poisson right-hand sides need |∫f dμ| ≤ compat_rel_tol · Vol · ‖f‖∞.
  double compat_rel_tol = 1e-10;
  /// Graphs up to this many vertices are factored densely.
  Index dense_limit = 2000;
  /// Conjugate-gradient budget; 0 picks 20·N + 1000.
  int max_iterations = 0;
};

namespace detail {

struct CgOutcome {
  int iterations = 0;
  double defect = 0.0;
};

// Preconditioned CG on A x = b, where A is symmetric positive definite or
// positive semidefinite with b in its range. The stopping test uses the
// μ-scaled residual, which is exactly the defect of the operator equation.
// Returns early when the defect stagnates at the roundoff floor.
inline CgOutcome conjugate_gradient(const Eigen::SparseMatrix<double>& A, const Vector& inv_diag,
                                    const Vector& b, const Vector& inv_mu, double target,
                                    int max_iterations, Vector& x) {
  auto defect = [&inv_mu](const Vector& r) { return r.cwiseProduct(inv_mu).lpNorm<Eigen::Infinity>(); };
  Vector r = b - A * x;
  double current = defect(r);
  if (current <= target) return {0, current};

  Vector z = inv_diag.cwiseProduct(r);
  Vector p = z;
  Vector Ap(x.size());
  double rz = r.dot(z);
  double best = current;
  int since_best = 0;
  int it = 0;
  while (it < max_iterations) {
    ++it;
    Ap.noalias() = A * p;
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0)) break;
    const double alpha = rz / pAp;
    x.noalias() += alpha * p;
    if (it % 64 == 0)
      r = b - A * x;
    else
      r.noalias() -= alpha * Ap;
    current = defect(r);
    if (current <= target) {
      r = b - A * x;
      current = defect(r);
      if (current <= target) break;
    }
    if (current < 0.5 * best) {
      best = current;
      since_best = 0;
    } else if (++since_best > 400) {
      break;
    }
    z = inv_diag.cwiseProduct(r);
    const double rz_next = r.dot(z);
    if (rz_next == 0.0) break;
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  r = b - A * x;
  return {it, defect(r)};
}

inline int cg_budget(const LinearSolveOptions& opts, Index n) {
  return opts.max_iterations > 0 ? opts.max_iterations : static_cast<int>(20 * n + 1000);
}

}  // namespace detail

/// The screened operator (Δ − K), K > 0, factored once and reusable.
/// The graph must outlive the operator.
class ScreenedOperator {
 public:
  ScreenedOperator(const WeightedGraph& g, double K, LinearSolveOptions opts = {})
      : g_(&g), K_(K), opts_(opts) {
    if (!(std::isfinite(K) && K > 0.0)) throw NonpositiveK(K);
    A_ = g.stiffness();
    for (Index i = 0; i < g.size(); ++i) A_.coeffRef(i, i) += K * g.mu(i);
    A_.makeCompressed();
    if (g.size() <= opts_.dense_limit) {
      dense_.emplace(Eigen::MatrixXd(A_));
      if (dense_->info() != Eigen::Success) throw SolveFailed("dense factorization of (L + K M) failed");
    } else {
      inv_diag_ = A_.diagonal().cwiseInverse();
      inv_mu_ = g.measure().cwiseInverse();
    }
  }

  double K() const noexcept { return K_; }
  const WeightedGraph& graph() const noexcept { return *g_; }

  /// Solves (Δ − K) v = f on raw vectors.
  Vector solve(const Vector& f, LinearSolveReport* report = nullptr) const {
    const WeightedGraph& g = *g_;
    const Vector b = -g.measure().cwiseProduct(f);
    const double scale = std::max(1.0, f.lpNorm<Eigen::Infinity>());
    LinearSolveReport rep;
    Vector v;
    if (dense_) {
      v = dense_->solve(b);
      rep.method = SolveMethod::direct;
    } else {
      v = Vector::Constant(g.size(), -f.dot(g.measure()) / (K_ * g.volume()));
      auto cg = detail::conjugate_gradient(A_, inv_diag_, b, inv_mu_, 1e-2 * opts_.rel_tol * scale,
                                           detail::cg_budget(opts_, g.size()), v);
      rep.method = SolveMethod::iterative;
      rep.iterations = cg.iterations;
    }
    rep.residual_sup = (detail::laplacian(g, v) - K_ * v - f).lpNorm<Eigen::Infinity>();
    if (!v.allFinite() || !(rep.residual_sup <= opts_.rel_tol * scale))
      throw SolveFailed("screened solve missed its residual target: " + std::to_string(rep.residual_sup));
    if (report) *report = rep;
    return v;
  }

  std::pair<VertexField, LinearSolveReport> solve(const VertexField& f) const {
    require_bound(*g_, f);
    LinearSolveReport rep;
    Vector v = solve(f.values(), &rep);
    return {VertexField(*g_, std::move(v)), rep};
  }

 private:
  const WeightedGraph* g_;
  double K_;
  LinearSolveOptions opts_;
  Eigen::SparseMatrix<double> A_;
  std::optional<Eigen::LLT<Eigen::MatrixXd>> dense_;
  Vector inv_diag_;
  Vector inv_mu_;
};

/// The Laplacian Δ restricted to mean-zero fields, factored once and reusable.
/// The graph must outlive the operator.
class PoissonOperator {
 public:
  explicit PoissonOperator(const WeightedGraph& g, LinearSolveOptions opts = {}) : g_(&g), opts_(opts) {
    A_ = g.stiffness();
    if (g.size() <= opts_.dense_limit) {
      // L + m mᵀ/Vol is positive definite on a connected graph and its
      // solutions of compatible systems are automatically mean-zero.
      Eigen::MatrixXd dense(A_);
      dense.noalias() += g.measure() * g.measure().transpose() / g.volume();
      dense_.emplace(dense);
      if (dense_->info() != Eigen::Success) throw SolveFailed("dense factorization of the Laplacian failed");
    } else {
      inv_diag_ = A_.diagonal().cwiseInverse();
      inv_mu_ = g.measure().cwiseInverse();
    }
  }

  const WeightedGraph& graph() const noexcept { return *g_; }

  /// Mean-zero solution of Δu = f on raw vectors.
  Vector solve(const Vector& f, LinearSolveReport* report = nullptr) const {
    const WeightedGraph& g = *g_;
    const double fmax = f.lpNorm<Eigen::Infinity>();
    const double total = f.dot(g.measure());
    if (std::abs(total) > opts_.compat_rel_tol * g.volume() * fmax)
      throw CompatibilityViolated("Poisson right-hand side integrates to " + std::to_string(total) +
                                  ", not 0");
    const Vector compatible = f - Vector::Constant(f.size(), total / g.volume());
    const Vector b = -g.measure().cwiseProduct(compatible);
    const double scale = std::max(1.0, fmax);
    LinearSolveReport rep;
    Vector u;
    if (dense_) {
      u = dense_->solve(b);
      rep.method = SolveMethod::direct;
    } else {
      u = Vector::Zero(g.size());
      auto cg = detail::conjugate_gradient(A_, inv_diag_, b, inv_mu_, 1e-2 * opts_.rel_tol * scale,
                                           detail::cg_budget(opts_, g.size()), u);
      rep.method = SolveMethod::iterative;
      rep.iterations = cg.iterations;
    }
    u.array() -= u.dot(g.measure()) / g.volume();
    rep.residual_sup = (detail::laplacian(g, u) - f).lpNorm<Eigen::Infinity>();
    if (!u.allFinite() || !(rep.residual_sup <= opts_.rel_tol * scale))
      throw SolveFailed("Poisson solve missed its residual target: " + std::to_string(rep.residual_sup));
    if (report) *report = rep;
    return u;
  }

  std::pair<VertexField, LinearSolveReport> solve(const VertexField& f) const {
    require_bound(*g_, f);
    LinearSolveReport rep;
    Vector u = solve(f.values(), &rep);
    return {VertexField(*g_, std::move(u)), rep};
  }

 private:
  const WeightedGraph* g_;
  LinearSolveOptions opts_;
  Eigen::SparseMatrix<double> A_;
  std::optional<Eigen::LLT<Eigen::MatrixXd>> dense_;
  Vector inv_diag_;
  Vector inv_mu_;
};

/// Mean-zero solution of Δu = f. Throws CompatibilityViolated when ∫f dμ ≠ 0.
inline std::pair<VertexField, LinearSolveReport> solve_poisson(const WeightedGraph& g, const VertexField& f,
                                                               const LinearSolveOptions& opts = {}) {
  require_bound(g, f);
  return PoissonOperator(g, opts).solve(f);
}

/// Unique solution of (Δ − K) v = f for K > 0.
inline std::pair<VertexField, LinearSolveReport> solve_screened(const WeightedGraph& g, double K,
                                                                const VertexField& f,
                                                                const LinearSolveOptions& opts = {}) {
  require_bound(g, f);
  return ScreenedOperator(g, K, opts).solve(f);
}

/// Checks the discrete maximum principle on one field: whenever
/// (Δ − K)u ≥ −tol everywhere, u ≤ tol everywhere. Test oracle only.
inline bool maximum_principle_holds(const WeightedGraph& g, double K, const VertexField& u, double tol) {
  require_bound(g, u);
  const Vector screened = detail::laplacian(g, u.values()) - K * u.values();
  const bool hypothesis = (screened.array() >= -tol).all();
  const bool conclusion = (u.values().array() <= tol).all();
  return !hypothesis || conclusion;
}

/// Mean-zero Green's function: ΔG = δ_pole − 1/Vol.
inline VertexField green_function(const WeightedGraph& g, Index pole, const LinearSolveOptions& opts = {}) {
  if (pole < 0 || pole >= g.size()) throw InvalidArgument("pole index out of range");
  Vector rhs = Vector::Constant(g.size(), -1.0 / g.volume());
  rhs[pole] += 1.0 / g.mu(pole);
  return VertexField(g, PoissonOperator(g, opts).solve(rhs));
}

inline VertexField green_function(const WeightedGraph& g, const std::string& pole,
                                  const LinearSolveOptions& opts = {}) {
  return green_function(g, g.index_of(pole), opts);
}

}  // namespace graphmfe
