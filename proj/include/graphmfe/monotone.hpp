#pragma once

// Vortex mean field equation
//
//   Δu = λ e^u (e^u − 1) + 4π Σ_j δ_{p_j}
//
// Write u = u0 + v with the background u0 solving
//
//   Δu0 = −4πM/Vol + 4π Σ_j δ_{p_j}          (mean zero),
//
// so that v solves the source-free problem
//
//   Δv = λ e^{u0+v} (e^{u0+v} − 1) + 4πM/Vol.
//
// Starting from v0 = −u0, the iteration
//
//   (Δ − K) v_n = λ e^{u0+v_{n−1}} (e^{u0+v_{n−1}} − 1) − K v_{n−1} + 4πM/Vol,   K ≥ 2λ,
//
// decreases pointwise and stays above every upper solution. It converges to
// the maximal solution when one exists and runs off to −∞ otherwise.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "graphmfe/elliptic.hpp"
#include "graphmfe/graph.hpp"

namespace graphmfe {

inline constexpr double kFourPi = 4.0 * std::numbers::pi;

class VortexProblem {
 public:
  VortexProblem(const WeightedGraph& g, double lambda, std::vector<Index> vortices)
      : g_(&g), lambda_(lambda), vortices_(std::move(vortices)) {
    if (!(std::isfinite(lambda) && lambda > 0.0)) throw InvalidArgument("lambda must be positive");
    if (vortices_.empty()) throw InvalidArgument("at least one vortex is required");
    for (Index p : vortices_)
      if (p < 0 || p >= g.size()) throw InvalidArgument("vortex index out of range");
  }

  VortexProblem(const WeightedGraph& g, double lambda, std::span<const std::string> vortices)
      : VortexProblem(g, lambda, indices(g, vortices)) {}

  const WeightedGraph& graph() const noexcept { return *g_; }
  double lambda() const noexcept { return lambda_; }
  const std::vector<Index>& vortices() const noexcept { return vortices_; }

  /// Number of vortices counted with multiplicity.
  Index M() const noexcept { return static_cast<Index>(vortices_.size()); }

  /// 4πM/Vol, the constant source of the transformed equation.
  double mean_source() const noexcept { return kFourPi * static_cast<double>(M()) / g_->volume(); }

  VortexProblem with_lambda(double lambda) const { return VortexProblem(*g_, lambda, vortices_); }

 private:
  static std::vector<Index> indices(const WeightedGraph& g, std::span<const std::string> ids) {
    std::vector<Index> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(g.index_of(id));
    return out;
  }

  const WeightedGraph* g_;
  double lambda_;
  std::vector<Index> vortices_;
};

enum class IterationStatus { converged, diverged, budget_exhausted };

inline const char* to_string(IterationStatus s) {
  switch (s) {
    case IterationStatus::converged: return "converged";
    case IterationStatus::diverged: return "diverged";
    case IterationStatus::budget_exhausted: return "budget_exhausted";
  }
  return "unknown";
}

struct VortexOptions {
  double tol = 1e-8;
  int max_iters = 100000;
  /// Screening constant; defaults to 2λ.
  std::optional<double> K;
  /// Declare divergence once min v < −(‖u0‖∞ + divergence_floor).
  double divergence_floor = 50.0;
  /// Convergence also needs ‖v_n − v_{n−1}‖∞ at or below this.
  double step_tol = 1e-12;
  /// Keep every iterate v_n in the trace.
  bool record_fields = false;
  LinearSolveOptions linear = {.rel_tol = 1e-12};
};

/// Evidence from one run of the monotone iteration.
struct IterationTrace {
  double K = 0.0;
  IterationStatus status = IterationStatus::budget_exhausted;
  /// v_0, v_1, ... (only when record_fields is set).
  std::vector<Vector> fields;
  /// ‖residual of the transformed equation at v_n‖∞, n = 0, 1, ...
  std::vector<double> residuals;
  /// ‖v_n − v_{n−1}‖∞, n = 1, 2, ...
  std::vector<double> steps;
  /// max over n, x of v_n(x) − v_{n−1}(x); nonpositive up to roundoff.
  double max_increase = -std::numeric_limits<double>::infinity();
};

struct SolverReport {
  IterationStatus status = IterationStatus::budget_exhausted;
  /// Which criterion decided the status.
  std::string reason;
  int iterations = 0;
  double K = 0.0;
  double lambda = 0.0;
  /// Residual of the transformed equation at the final v.
  double residual_sup = 0.0;
  /// Residual of the vortex equation at u = u0 + v (converged runs only).
  double vortex_residual_sup = 0.0;
  /// |λ ∫ e^u (e^u − 1) dμ + 4πM| (converged runs only).
  double mass_identity_defect = 0.0;
  /// 16πM/Vol.
  double necessary_bound = 0.0;
  double max_u = 0.0;
  double min_v = 0.0;
};

namespace detail {

// λ e^w (e^w − 1) with w = u0 + v ≤ 0 along the iteration.
inline Vector vortex_nonlinearity(double lambda, const Vector& w) {
  const Eigen::ArrayXd e = w.array().exp();
  return (lambda * e * (e - 1.0)).matrix();
}

inline Vector transformed_residual(const VortexProblem& p, const Vector& u0, const Vector& v) {
  return laplacian(p.graph(), v) - vortex_nonlinearity(p.lambda(), u0 + v) -
         Vector::Constant(v.size(), p.mean_source());
}

inline Vector iteration_rhs(const VortexProblem& p, double K, const Vector& u0, const Vector& v_prev) {
  return vortex_nonlinearity(p.lambda(), u0 + v_prev) - K * v_prev +
         Vector::Constant(v_prev.size(), p.mean_source());
}

inline void require_screening(const VortexProblem& p, double K) {
  if (!(std::isfinite(K) && K > 0.0)) throw NonpositiveK(K);
  if (K < 2.0 * p.lambda())
    throw InvalidArgument("monotone iteration needs K >= 2*lambda (K = " + std::to_string(K) +
                          ", lambda = " + std::to_string(p.lambda()) + ")");
}

}  // namespace detail

/// 16πM/Vol: no solution exists for smaller λ.
inline double necessary_lambda_bound(const WeightedGraph& g, Index M) {
  if (M < 1) throw InvalidArgument("M must be at least 1");
  return 4.0 * kFourPi * static_cast<double>(M) / g.volume();
}

/// Mean-zero u0 with Δu0 = −4πM/Vol + 4πΣδ_{p_j}.
inline VertexField solve_background(const VortexProblem& p, const LinearSolveOptions& opts = {}) {
  const auto& g = p.graph();
  Vector rhs = Vector::Constant(g.size(), -p.mean_source());
  for (Index v : p.vortices()) rhs[v] += kFourPi / g.mu(v);
  return VertexField(g, PoissonOperator(g, opts).solve(rhs));
}

inline VertexField solve_background(const WeightedGraph& g, std::span<const Index> vortices,
                                    const LinearSolveOptions& opts = {}) {
  return solve_background(VortexProblem(g, 1.0, std::vector<Index>(vortices.begin(), vortices.end())), opts);
}

/// Δv ≥ λ e^{u0+v}(e^{u0+v} − 1) + 4πM/Vol − tol at every vertex.
inline bool is_upper_solution(const VortexProblem& p, const VertexField& u0, const VertexField& v, double tol) {
  require_bound(p.graph(), u0);
  require_bound(p.graph(), v);
  return (detail::transformed_residual(p, u0.values(), v.values()).array() >= -tol).all();
}

/// One step of the monotone scheme. Requires K ≥ 2λ.
inline VertexField iterate_once(const VortexProblem& p, double K, const VertexField& u0, const VertexField& v_prev,
                                const LinearSolveOptions& opts = {.rel_tol = 1e-12}) {
  require_bound(p.graph(), u0);
  require_bound(p.graph(), v_prev);
  detail::require_screening(p, K);
  const ScreenedOperator op(p.graph(), K, opts);
  return VertexField(p.graph(), op.solve(detail::iteration_rhs(p, K, u0.values(), v_prev.values())));
}

/// Δu − λ e^u (e^u − 1) − 4πΣδ_{p_j}.
inline VertexField vortex_residual(const VortexProblem& p, const VertexField& u) {
  require_bound(p.graph(), u);
  const auto& g = p.graph();
  Vector r = detail::laplacian(g, u.values()) - detail::vortex_nonlinearity(p.lambda(), u.values());
  for (Index v : p.vortices()) r[v] -= kFourPi / g.mu(v);
  return VertexField(g, std::move(r));
}

/// Constant c such that v ≡ c is an upper solution, if one exists.
///
/// With t = e^{u0+c} the condition is λ t (t − 1) + 4πM/Vol < 0 at every
/// vertex, i.e. t strictly between the roots t± = (1 ± √(1 − 16πM/(λ Vol)))/2.
/// Such c exists iff t−/min e^{u0} < t+/max e^{u0}; the midpoint of the
/// admissible interval in log scale is returned.
inline std::optional<double> find_constant_upper_solution(const VortexProblem& p, const VertexField& u0) {
  require_bound(p.graph(), u0);
  const double disc = 1.0 - 4.0 * p.mean_source() / p.lambda();
  if (!(disc > 0.0)) return std::nullopt;
  const double root = std::sqrt(disc);
  const double t_lo = 0.5 * (1.0 - root);
  const double t_hi = 0.5 * (1.0 + root);
  const double c_lo = std::log(t_lo) - u0.values().minCoeff();
  const double c_hi = std::log(t_hi) - u0.values().maxCoeff();
  if (!(c_lo < c_hi)) return std::nullopt;
  const double c = 0.5 * (c_lo + c_hi);
  if (!is_upper_solution(p, u0, VertexField::constant(p.graph(), c), 0.0)) return std::nullopt;
  return c;
}

struct VortexSolution {
  /// u = u0 + v when the iteration converged.
  std::optional<VertexField> u;
  VertexField background;
  IterationTrace trace;
  SolverReport report;
};

/// Runs the monotone iteration from v0 = −u0. Non-existence is reported as a
/// status, never thrown.
inline VortexSolution solve_vortex_mfe(const VortexProblem& p, const VortexOptions& opts = {}) {
  const auto& g = p.graph();
  const double K = opts.K.value_or(2.0 * p.lambda());
  detail::require_screening(p, K);

  VertexField background = solve_background(p, opts.linear);
  const Vector& u0 = background.values();
  const ScreenedOperator op(g, K, opts.linear);
  const double floor = -(u0.lpNorm<Eigen::Infinity>() + opts.divergence_floor);

  IterationTrace trace;
  trace.K = K;
  SolverReport rep;
  rep.K = K;
  rep.lambda = p.lambda();
  rep.necessary_bound = necessary_lambda_bound(g, p.M());

  Vector v = -u0;
  double rnorm = detail::transformed_residual(p, u0, v).lpNorm<Eigen::Infinity>();
  trace.residuals.push_back(rnorm);
  if (opts.record_fields) trace.fields.push_back(v);

  bool decided = false;
  for (int n = 1; n <= opts.max_iters; ++n) {
    Vector next = op.solve(detail::iteration_rhs(p, K, u0, v));
    const Vector diff = next - v;
    const double step = diff.lpNorm<Eigen::Infinity>();
    trace.max_increase = std::max(trace.max_increase, diff.maxCoeff());
    trace.steps.push_back(step);
    v = std::move(next);
    rnorm = detail::transformed_residual(p, u0, v).lpNorm<Eigen::Infinity>();
    trace.residuals.push_back(rnorm);
    if (opts.record_fields) trace.fields.push_back(v);
    rep.iterations = n;

    if (v.minCoeff() < floor) {
      rep.status = IterationStatus::diverged;
      rep.reason = "iterate fell below the divergence floor";
      decided = true;
      break;
    }
    if (step <= opts.step_tol && rnorm <= opts.tol) {
      rep.status = IterationStatus::converged;
      rep.reason = "step and residual below tolerance";
      decided = true;
      break;
    }
  }
  if (!decided) {
    // A monotone sequence that neither settles nor keeps reducing its
    // residual over the last tenth of the budget is treated as divergent.
    const auto& r = trace.residuals;
    const std::size_t mark = r.size() - std::max<std::size_t>(1, r.size() / 10);
    if (r.back() >= r[mark]) {
      rep.status = IterationStatus::diverged;
      rep.reason = "residual stopped decreasing within the iteration budget";
    } else {
      rep.status = IterationStatus::budget_exhausted;
      rep.reason = "iteration budget exhausted while still converging";
    }
  }
  trace.status = rep.status;
  rep.residual_sup = rnorm;
  rep.min_v = v.minCoeff();

  VortexSolution out{std::nullopt, std::move(background), std::move(trace), rep};
  if (rep.status == IterationStatus::converged) {
    VertexField u(g, out.background.values() + v);
    out.report.vortex_residual_sup = vortex_residual(p, u).values().lpNorm<Eigen::Infinity>();
    out.report.mass_identity_defect =
        std::abs(detail::integral(g, detail::vortex_nonlinearity(p.lambda(), u.values())) +
                 kFourPi * static_cast<double>(p.M()));
    out.report.max_u = u.values().maxCoeff();
    out.u = std::move(u);
  }
  return out;
}

struct LambdaCriticalOptions {
  /// Target bracket width; 0 means 1e-3 · 16πM/Vol.
  double width = 0.0;
  /// First λ tried for the upper end; 0 means 2 · 16πM/Vol. Doubled until a solve succeeds.
  double upper_guess = 0.0;
  int max_doublings = 40;
  /// K = k_factor · λ for every solve.
  double k_factor = 2.0;
  VortexOptions solver = {};
};

/// Bracket [lower, upper] around the critical parameter: no solution was
/// found at lower, one was found at upper.
struct LambdaCritical {
  double lower = 0.0;
  double upper = 0.0;
  double bound_necessary = 0.0;
  SolverReport lower_evidence;
  SolverReport upper_evidence;
  int solves = 0;
};

/// Bisection for λ_c. The solvable set of λ is an up-closed interval, so a
/// failing λ is a valid lower end and a succeeding λ a valid upper end.
inline LambdaCritical estimate_lambda_c(const WeightedGraph& g, std::span<const Index> vortices,
                                        const LambdaCriticalOptions& opts = {}) {
  const VortexProblem base(g, 1.0, std::vector<Index>(vortices.begin(), vortices.end()));
  LambdaCritical out;
  out.bound_necessary = necessary_lambda_bound(g, base.M());
  const double width = opts.width > 0.0 ? opts.width : 1e-3 * out.bound_necessary;
  if (!(opts.k_factor >= 2.0)) throw InvalidArgument("k_factor must be at least 2");

  auto attempt = [&](double lambda) {
    VortexOptions so = opts.solver;
    so.K = opts.k_factor * lambda;
    so.record_fields = false;
    ++out.solves;
    return solve_vortex_mfe(base.with_lambda(lambda), so).report;
  };

  double lower = out.bound_necessary - 0.5 * width;
  if (lower <= 0.0) lower = 0.5 * out.bound_necessary;
  SolverReport lower_rep = attempt(lower);
  while (lower_rep.status == IterationStatus::converged) {
    // Cannot happen below the necessary bound; step down rather than trust it.
    lower *= 0.5;
    lower_rep = attempt(lower);
  }

  double upper = std::max(opts.upper_guess > 0.0 ? opts.upper_guess : 2.0 * out.bound_necessary, lower);
  SolverReport upper_rep = attempt(upper);
  for (int k = 0; upper_rep.status != IterationStatus::converged; ++k) {
    if (k >= opts.max_doublings)
      throw BudgetExhausted("no solution found up to lambda = " + std::to_string(upper));
    lower = upper;
    lower_rep = upper_rep;
    upper *= 2.0;
    upper_rep = attempt(upper);
  }

  while (upper - lower > width) {
    const double mid = 0.5 * (lower + upper);
    SolverReport rep = attempt(mid);
    if (rep.status == IterationStatus::converged) {
      upper = mid;
      upper_rep = rep;
    } else {
      lower = mid;
      lower_rep = rep;
    }
  }
  out.lower = lower;
  out.upper = upper;
  out.lower_evidence = lower_rep;
  out.upper_evidence = upper_rep;
  return out;
}

}  // namespace graphmfe
