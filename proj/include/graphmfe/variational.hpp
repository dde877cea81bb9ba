#pragma once

// Dirac-source mean field equation
//
//   Δu + e^u = ρ δ_{x0}
//
// solved as a constrained minimization: J(u) = E(u) + ρ u(x0) over
// B = {u : ∫ e^u dμ = ρ}. A critical point of J on B satisfies
// −Δu + ρδ = λ e^u, and integrating forces the multiplier λ to equal 1,
// which is exactly the equation above.
//
// The solver runs projected gradient descent in the H¹ metric (L + M) with
// Armijo backtracking, and once ‖F‖∞ is small switches to damped Newton on
// F(u) = Δu + e^u − ρδ. Every accepted iterate is shifted back onto B.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/LU>
#include <Eigen/SparseLU>

#include "graphmfe/elliptic.hpp"
#include "graphmfe/graph.hpp"

namespace graphmfe {

/// exp() arguments above this are rejected so e^u stays representable.
inline constexpr double kExpGuard = 700.0;

class DiracProblem {
 public:
  DiracProblem(const WeightedGraph& g, double rho, Index pole) : g_(&g), rho_(rho), pole_(pole) {
    if (!(std::isfinite(rho) && rho > 0.0)) throw InvalidArgument("rho must be positive");
    if (pole < 0 || pole >= g.size()) throw InvalidArgument("pole index out of range");
  }
  DiracProblem(const WeightedGraph& g, double rho, const std::string& pole)
      : DiracProblem(g, rho, g.index_of(pole)) {}

  const WeightedGraph& graph() const noexcept { return *g_; }
  double rho() const noexcept { return rho_; }
  Index pole() const noexcept { return pole_; }

 private:
  const WeightedGraph* g_;
  double rho_;
  Index pole_;
};

struct DiracOptions {
  double tol = 1e-8;
  int max_iters = 10000;
  /// Switch from gradient descent to Newton once ‖F‖∞ drops below this.
  double newton_switch = 1e-3;
  /// Keep J after every accepted gradient step and ‖F‖∞ after every step.
  bool record_trace = false;
  LinearSolveOptions linear = {};
};

struct VariationalReport {
  double J_value = 0.0;
  /// |∫e^u dμ − ρ|.
  double constraint_defect = 0.0;
  /// ‖Δu + e^u − ρδ‖∞.
  double residual_sup = 0.0;
  double lagrange_multiplier = 0.0;
  int iterations = 0;
  int gradient_steps = 0;
  int newton_steps = 0;
  bool converged = false;
  /// max over accepted iterates of |∫e^u dμ − ρ| / ρ.
  double max_iterate_constraint_defect = 0.0;
  std::vector<double> energy_trace;
  std::vector<double> residual_trace;
};

namespace detail {

inline double energy(const WeightedGraph& g, const Vector& u) {
  double acc = 0.0;
  for (const auto& e : g.edges()) {
    const double d = u[e.v] - u[e.u];
    acc += e.weight * d * d;
  }
  return 0.5 * acc;
}

inline void require_exp_safe(const Vector& u) {
  if (u.size() > 0 && u.maxCoeff() > kExpGuard)
    throw ExpOverflow("field exceeds the exp guard (max u = " + std::to_string(u.maxCoeff()) + ")");
}

/// log ∫ e^u dμ without overflow.
inline double log_integral_exp(const WeightedGraph& g, const Vector& u) {
  const double top = u.maxCoeff();
  return top + std::log(g.measure().dot((u.array() - top).exp().matrix()));
}

inline double J(const DiracProblem& p, const Vector& u) {
  return energy(p.graph(), u) + p.rho() * u[p.pole()];
}

inline Vector project(const DiracProblem& p, const Vector& u) {
  Vector out = u.array() + (std::log(p.rho()) - log_integral_exp(p.graph(), u));
  require_exp_safe(out);
  return out;
}

inline Vector residual(const DiracProblem& p, const Vector& u) {
  require_exp_safe(u);
  Vector F = laplacian(p.graph(), u) + u.array().exp().matrix();
  F[p.pole()] -= p.rho() / p.graph().mu(p.pole());
  return F;
}

/// −Δu + ρδ: the μ-gradient of J, so dJ[φ] = ∫ g φ dμ.
inline Vector gradient(const DiracProblem& p, const Vector& u) {
  Vector g = -laplacian(p.graph(), u);
  g[p.pole()] += p.rho() / p.graph().mu(p.pole());
  return g;
}

/// Solves (Δ + diag(e^u)) δ = −F in the symmetric form (−L + M e^u) δ = −M F.
inline std::optional<Vector> newton_direction(const WeightedGraph& g, const Vector& u, const Vector& F,
                                              Index dense_limit) {
  const Vector weight = g.measure().cwiseProduct(u.array().exp().matrix());
  const Vector rhs = -g.measure().cwiseProduct(F);
  Eigen::SparseMatrix<double> A = -g.stiffness();
  for (Index i = 0; i < g.size(); ++i) A.coeffRef(i, i) += weight[i];
  Vector delta;
  if (g.size() <= dense_limit) {
    Eigen::MatrixXd dense(A);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(dense);
    delta = lu.solve(rhs);
  } else {
    A.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) return std::nullopt;
    delta = lu.solve(rhs);
  }
  if (!delta.allFinite()) return std::nullopt;
  const double scale = std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
  if ((A * delta - rhs).lpNorm<Eigen::Infinity>() > 1e-6 * scale) return std::nullopt;
  return delta;
}

}  // namespace detail

/// J(u) = E(u) + ρ u(x0).
inline double functional_J(const DiracProblem& p, const VertexField& u) {
  require_bound(p.graph(), u);
  return detail::J(p, u.values());
}

/// The field g = −Δu + ρδ representing dJ at u: dJ[φ] = ∫ g φ dμ.
inline VertexField functional_J_gradient(const DiracProblem& p, const VertexField& u) {
  require_bound(p.graph(), u);
  return VertexField(p.graph(), detail::gradient(p, u.values()));
}

/// Directional derivative −∫ Δu φ dμ + ρ φ(x0).
inline double functional_J_directional(const DiracProblem& p, const VertexField& u, const VertexField& phi) {
  require_bound(p.graph(), u);
  require_bound(p.graph(), phi);
  return detail::integral(p.graph(), detail::gradient(p, u.values()).cwiseProduct(phi.values()));
}

/// Shifts u by the constant log(ρ / ∫e^u dμ), the closest point of B along constants.
inline VertexField project_to_B(const DiracProblem& p, const VertexField& u) {
  require_bound(p.graph(), u);
  return VertexField(p.graph(), detail::project(p, u.values()));
}

/// Δu + e^u − ρδ.
inline VertexField dirac_residual(const DiracProblem& p, const VertexField& u) {
  require_bound(p.graph(), u);
  return VertexField(p.graph(), detail::residual(p, u.values()));
}

/// Multiplier λ of the stationarity system −Δu + ρδ = λ e^u, fitted in the
/// μ-weighted least-squares sense. Equals 1 at a solution.
inline double lagrange_multiplier(const DiracProblem& p, const VertexField& u) {
  require_bound(p.graph(), u);
  const auto& g = p.graph();
  detail::require_exp_safe(u.values());
  const Vector e = u.values().array().exp();
  return detail::integral(g, detail::gradient(p, u.values()).cwiseProduct(e)) /
         detail::integral(g, e.cwiseProduct(e));
}

/// Solves Δu + e^u = ρδ. On failure to converge within opts.max_iters the
/// best iterate is returned with converged = false.
inline std::pair<VertexField, VariationalReport> solve_dirac_mfe(const DiracProblem& p,
                                                                 const DiracOptions& opts = {}) {
  const WeightedGraph& g = p.graph();
  VariationalReport rep;
  const ScreenedOperator metric(g, 1.0, opts.linear);

  auto relative_defect = [&](const Vector& v) {
    return std::abs(detail::integral(g, v.array().exp().matrix()) - p.rho()) / p.rho();
  };

  Vector u = detail::project(p, Vector::Zero(g.size()));
  rep.max_iterate_constraint_defect = relative_defect(u);
  double J = detail::J(p, u);
  Vector F = detail::residual(p, u);
  double fnorm = F.lpNorm<Eigen::Infinity>();
  if (opts.record_trace) {
    rep.energy_trace.push_back(J);
    rep.residual_trace.push_back(fnorm);
  }

  Vector best = u;
  double best_fnorm = fnorm;
  double step = 1.0;
  int newton_cooldown = 0;
  bool gradient_stalled = false;

  while (rep.iterations < opts.max_iters) {
    if (fnorm <= opts.tol) {
      rep.converged = true;
      break;
    }
    ++rep.iterations;

    bool accepted = false;
    if ((fnorm < opts.newton_switch || gradient_stalled) && newton_cooldown == 0) {
      if (auto delta = detail::newton_direction(g, u, F, opts.linear.dense_limit)) {
        double t = 1.0;
        for (int k = 0; k < 40 && !accepted; ++k, t *= 0.5) {
          Vector trial = u + t * *delta;
          if (trial.maxCoeff() > kExpGuard) continue;
          try {
            trial = detail::project(p, trial);
          } catch (const ExpOverflow&) {
            continue;
          }
          const Vector Ft = detail::residual(p, trial);
          const double ft = Ft.lpNorm<Eigen::Infinity>();
          if (ft < (1.0 - 1e-4 * t) * fnorm) {
            u = std::move(trial);
            F = Ft;
            fnorm = ft;
            J = detail::J(p, u);
            accepted = true;
          }
        }
      }
      if (accepted) {
        ++rep.newton_steps;
        gradient_stalled = false;
      } else {
        newton_cooldown = 20;
      }
    } else if (newton_cooldown > 0) {
      --newton_cooldown;
    }

    if (!accepted) {
      // Projected gradient step in the H¹ metric: tangent to B at u.
      const Vector grad = detail::gradient(p, u);
      const Vector eu = u.array().exp();
      const Vector a = metric.solve(Vector(-grad));  // (L + M) a = M grad
      const Vector b = metric.solve(Vector(-eu));
      const Vector Meu = g.measure().cwiseProduct(eu);
      const double alpha = Meu.dot(a) / Meu.dot(b);
      const Vector d = -(a - alpha * b);
      const double slope = detail::integral(g, grad.cwiseProduct(d));
      if (slope < 0.0) {
        double t = std::min(2.0 * step, 1e8);
        for (int k = 0; k < 60; ++k, t *= 0.5) {
          Vector trial = u + t * d;
          if (trial.maxCoeff() > kExpGuard) continue;
          try {
            trial = detail::project(p, trial);
          } catch (const ExpOverflow&) {
            continue;
          }
          const double Jt = detail::J(p, trial);
          if (Jt <= J + 1e-4 * t * slope) {
            u = std::move(trial);
            J = Jt;
            F = detail::residual(p, u);
            fnorm = F.lpNorm<Eigen::Infinity>();
            step = t;
            accepted = true;
            break;
          }
        }
      }
      if (accepted) {
        ++rep.gradient_steps;
        if (opts.record_trace) rep.energy_trace.push_back(J);
      } else if (gradient_stalled && newton_cooldown > 0) {
        break;  // neither method makes progress
      } else {
        gradient_stalled = true;
        newton_cooldown = 0;
      }
    }

    if (accepted)
      rep.max_iterate_constraint_defect =
          std::max(rep.max_iterate_constraint_defect, relative_defect(u));
    if (opts.record_trace) rep.residual_trace.push_back(fnorm);
    if (fnorm < best_fnorm) {
      best = u;
      best_fnorm = fnorm;
    }
  }

  if (!rep.converged) u = best;
  VertexField solution(g, u);
  rep.J_value = detail::J(p, u);
  rep.residual_sup = detail::residual(p, u).lpNorm<Eigen::Infinity>();
  rep.constraint_defect = std::abs(detail::integral(g, u.array().exp().matrix()) - p.rho());
  rep.lagrange_multiplier = lagrange_multiplier(p, solution);
  rep.converged = rep.residual_sup <= opts.tol;
  return {std::move(solution), rep};
}

}  // namespace graphmfe
