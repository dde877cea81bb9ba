#pragma once

// Discrete flat tori: the square lattice Z² modulo a rank-2 sublattice
// spanned by two integer period vectors, with unit weights and unit measure.
// A point (x, y) of the lattice sits at (x/n, y/n) in the continuum, so the
// periods (n, 0) and (n/2, n) realize the torus with periods 1 and τ = 1/2 + i.
//
// Vertices are indexed through the Hermite normal form of the sublattice,
// basis (A, 0) and (B, C) with 0 ≤ B < A and A·C = |det|: every class has a
// unique representative in [0, A) × [0, C).

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <cstdlib>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "graphmfe/elliptic.hpp"
#include "graphmfe/graph.hpp"

namespace graphmfe {

struct TorusSpec {
  /// Lattice points per unit length of the continuum torus.
  long long n = 0;
  std::array<long long, 2> period1{};
  std::array<long long, 2> period2{};

  /// Periods (n, 0) and (n/2, n); n must be even and positive.
  static TorusSpec tau_half_plus_i(long long n) {
    if (n <= 0 || n % 2 != 0)
      throw InvalidArgument("the tau = 1/2 + i preset needs an even positive n, got " + std::to_string(n));
    return {n, {n, 0}, {n / 2, n}};
  }

  long long determinant() const { return period1[0] * period2[1] - period1[1] * period2[0]; }
};

/// Position in lattice units; divide by n for continuum coordinates.
struct LatticePoint {
  double x = 0.0;
  double y = 0.0;
};

class TorusGraph {
 public:
  explicit TorusGraph(const TorusSpec& spec) : spec_(spec), form_(normal_form(spec)), graph_(assemble()) {}

  const TorusSpec& spec() const noexcept { return spec_; }
  const WeightedGraph& graph() const noexcept { return graph_; }

  long long width() const noexcept { return form_.width; }
  long long height() const noexcept { return form_.height; }
  long long shift() const noexcept { return form_.shift; }

  /// Canonical representative of the class of (x, y).
  std::array<long long, 2> reduce(long long x, long long y) const {
    const long long q = floor_div(y, form_.height);
    y -= q * form_.height;
    x -= q * form_.shift;
    return {floor_mod(x, form_.width), y};
  }

  Index vertex(long long x, long long y) const {
    const auto [rx, ry] = reduce(x, y);
    return static_cast<Index>(ry * form_.width + rx);
  }

  std::array<long long, 2> position(Index v) const {
    return {static_cast<long long>(v) % form_.width, static_cast<long long>(v) / form_.width};
  }

  Index origin() const { return vertex(0, 0); }

  /// Image of v under x ↦ −x.
  Index negate(Index v) const {
    const auto [x, y] = position(v);
    return vertex(-x, -y);
  }

  Index translate(Index v, long long dx, long long dy) const {
    const auto [x, y] = position(v);
    return vertex(x + dx, y + dy);
  }

  /// Shortest representative of (dx, dy) modulo the period lattice.
  LatticePoint minimal_image(double dx, double dy) const {
    const double C = static_cast<double>(form_.height);
    const double A = static_cast<double>(form_.width);
    const double B = static_cast<double>(form_.shift);
    const double qy = std::round(dy / C);
    dy -= qy * C;
    dx -= qy * B;
    dx -= std::round(dx / A) * A;
    LatticePoint best{dx, dy};
    double best_norm = dx * dx + dy * dy;
    for (int k1 = -1; k1 <= 1; ++k1) {
      for (int k2 = -1; k2 <= 1; ++k2) {
        const double cx = dx + k1 * A + k2 * B;
        const double cy = dy + k2 * C;
        const double norm = cx * cx + cy * cy;
        if (norm < best_norm - 1e-12) {
          best = {cx, cy};
          best_norm = norm;
        }
      }
    }
    return best;
  }

  double distance(const LatticePoint& p, const LatticePoint& q) const {
    const auto d = minimal_image(q.x - p.x, q.y - p.y);
    return std::hypot(d.x, d.y);
  }

  /// ω1/2, ω2/2 and (ω1 + ω2)/2 in lattice units.
  std::array<LatticePoint, 3> half_periods() const {
    const auto [a, b] = spec_.period1;
    const auto [c, d] = spec_.period2;
    return {LatticePoint{a / 2.0, b / 2.0}, LatticePoint{c / 2.0, d / 2.0},
            LatticePoint{(a + c) / 2.0, (b + d) / 2.0}};
  }

 private:
  static long long floor_div(long long a, long long m) {
    long long q = a / m;
    if ((a % m != 0) && ((a < 0) != (m < 0))) --q;
    return q;
  }
  static long long floor_mod(long long a, long long m) { return a - floor_div(a, m) * m; }

  static void extended_gcd(long long a, long long b, long long& g, long long& s, long long& t) {
    long long old_r = a, r = b, old_s = 1, s1 = 0, old_t = 0, t1 = 1;
    while (r != 0) {
      const long long q = old_r / r;
      old_r = std::exchange(r, old_r - q * r);
      old_s = std::exchange(s1, old_s - q * s1);
      old_t = std::exchange(t1, old_t - q * t1);
    }
    if (old_r < 0) {
      old_r = -old_r;
      old_s = -old_s;
      old_t = -old_t;
    }
    g = old_r;
    s = old_s;
    t = old_t;
  }

  struct NormalForm {
    long long width = 0;
    long long height = 0;
    long long shift = 0;
  };

  static NormalForm normal_form(const TorusSpec& spec) {
    if (spec.n <= 0) throw InvalidArgument("torus scale n must be positive");
    const long long det = spec.determinant();
    if (det == 0) throw InvalidArgument("degenerate lattice: period vectors are parallel");
    // Extended gcd of the y components gives the (B, C) row; the other row
    // is (|det|/C, 0).
    const auto [a, b] = spec.period1;
    const auto [c, d] = spec.period2;
    long long g = 0, s = 0, t = 0;
    extended_gcd(b, d, g, s, t);
    NormalForm f;
    f.height = g;
    f.width = std::llabs(det) / g;
    f.shift = floor_mod(s * a + t * c, f.width);
    return f;
  }

  WeightedGraph assemble() const {
    GraphBuilder builder;
    for (long long y = 0; y < form_.height; ++y)
      for (long long x = 0; x < form_.width; ++x) builder.add_vertex(std::to_string(x) + "," + std::to_string(y));
    for (long long y = 0; y < form_.height; ++y) {
      for (long long x = 0; x < form_.width; ++x) {
        const Index here = vertex(x, y);
        for (const Index there : {vertex(x + 1, y), vertex(x, y + 1)})
          if (there != here) builder.add_edge(here, there, 1.0);
      }
    }
    return builder.build();
  }

  TorusSpec spec_;
  NormalForm form_;
  WeightedGraph graph_;
};

inline TorusGraph build_torus_graph(const TorusSpec& spec) { return TorusGraph(spec); }

/// Green's function with its pole at the origin class.
inline VertexField torus_green(const TorusGraph& torus, const LinearSolveOptions& opts = {}) {
  return green_function(torus.graph(), torus.origin(), opts);
}

enum class CriticalClass { max, min, saddle, degenerate };

inline const char* to_string(CriticalClass c) {
  switch (c) {
    case CriticalClass::max: return "max";
    case CriticalClass::min: return "min";
    case CriticalClass::saddle: return "saddle";
    case CriticalClass::degenerate: return "degenerate";
  }
  return "unknown";
}

struct CriticalPoint {
  Index vertex = 0;
  /// Canonical lattice position of the vertex.
  long long i = 0;
  long long j = 0;
  /// Stationary point of the local quadratic fit, in lattice units.
  LatticePoint refined;
  CriticalClass classification = CriticalClass::degenerate;
  double value = 0.0;
  bool is_pole = false;
  bool is_half_period = false;
};

struct CriticalPointSet {
  std::vector<CriticalPoint> points;
  Index pole = 0;

  /// Non-degenerate critical points other than the pole and the half periods.
  std::vector<CriticalPoint> additional() const {
    std::vector<CriticalPoint> out;
    for (const auto& p : points)
      if (!p.is_pole && !p.is_half_period && p.classification != CriticalClass::degenerate) out.push_back(p);
    return out;
  }
};

namespace detail {

// Least-squares fit of a + b x + c y + d x² + e xy + f y² to the 3×3 stencil,
// as the 6×9 pseudo-inverse of the design matrix. Stencil order: row-major
// over dy = −1..1, dx = −1..1.
inline const Eigen::Matrix<double, 6, 9>& quadratic_fit_operator() {
  static const Eigen::Matrix<double, 6, 9> op = [] {
    Eigen::Matrix<double, 9, 6> design;
    int row = 0;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx, ++row)
        design.row(row) << 1.0, dx, dy, dx * dx, dx * dy, dy * dy;
    return Eigen::Matrix<double, 6, 9>(
        (design.transpose() * design).ldlt().solve(design.transpose()));
  }();
  return op;
}

}  // namespace detail

/// Vertices where both central differences change sign (or vanish within
/// tol) across the vertex, refined to the stationary point of a quadratic fit
/// on the 3×3 stencil. A candidate is kept when that stationary point lies in
/// the vertex's own cell (|offset| ≤ 1/2 in both directions), or when the
/// fit is flat (degenerate). Points within one lattice unit of a half period
/// are labeled as such.
inline CriticalPointSet find_critical_points(const TorusGraph& torus, const VertexField& G, double tol,
                                             Index pole = -1) {
  const auto& g = torus.graph();
  require_bound(g, G);
  if (pole < 0) pole = torus.origin();
  auto value = [&](long long x, long long y) { return G[torus.vertex(x, y)]; };
  const auto& fit = detail::quadratic_fit_operator();

  CriticalPointSet out;
  out.pole = pole;
  std::vector<CriticalPoint> candidates;
  std::vector<double> offsets;
  for (Index v = 0; v < g.size(); ++v) {
    const auto [x, y] = torus.position(v);
    const double d1_center = value(x + 1, y) - value(x - 1, y);
    const double d1_left = value(x, y) - value(x - 2, y);
    const double d1_right = value(x + 2, y) - value(x, y);
    const double d2_center = value(x, y + 1) - value(x, y - 1);
    const double d2_down = value(x, y) - value(x, y - 2);
    const double d2_up = value(x, y + 2) - value(x, y);
    const bool fires1 = d1_left * d1_right <= 0.0 || std::abs(d1_center) <= tol;
    const bool fires2 = d2_down * d2_up <= 0.0 || std::abs(d2_center) <= tol;
    if (!(fires1 && fires2)) continue;

    Eigen::Matrix<double, 9, 1> stencil;
    int k = 0;
    for (long long dy = -1; dy <= 1; ++dy)
      for (long long dx = -1; dx <= 1; ++dx) stencil[k++] = value(x + dx, y + dy);
    const Eigen::Matrix<double, 6, 1> coef = fit * stencil;
    const Eigen::Vector2d grad(coef[1], coef[2]);
    Eigen::Matrix2d hess;
    hess << 2.0 * coef[3], coef[4], coef[4], 2.0 * coef[5];
    const double det = hess.determinant();

    CriticalPoint cp;
    cp.vertex = v;
    cp.i = x;
    cp.j = y;
    cp.value = G[v];
    cp.is_pole = (v == pole);
    if (std::abs(det) <= tol * tol) {
      if (grad.lpNorm<Eigen::Infinity>() > tol) continue;
      cp.classification = CriticalClass::degenerate;
      cp.refined = {static_cast<double>(x), static_cast<double>(y)};
      candidates.push_back(cp);
      offsets.push_back(0.0);
      continue;
    }
    const Eigen::Vector2d offset = -hess.inverse() * grad;
    if (offset.lpNorm<Eigen::Infinity>() > 0.5 + 1e-12) continue;
    cp.refined = {x + offset[0], y + offset[1]};
    if (det < 0.0)
      cp.classification = CriticalClass::saddle;
    else
      cp.classification = hess.trace() < 0.0 ? CriticalClass::max : CriticalClass::min;
    candidates.push_back(cp);
    offsets.push_back(offset.norm());
  }

  // Two neighboring vertices can claim the same critical point when it sits
  // on a cell boundary; keep the closer claim.
  std::vector<char> dropped(candidates.size(), 0);
  for (std::size_t a = 0; a < candidates.size(); ++a) {
    if (dropped[a] || candidates[a].classification == CriticalClass::degenerate) continue;
    for (std::size_t b = a + 1; b < candidates.size(); ++b) {
      if (dropped[b] || candidates[b].classification != candidates[a].classification) continue;
      if (torus.distance(candidates[a].refined, candidates[b].refined) < 0.75) {
        if (offsets[b] < offsets[a]) {
          dropped[a] = 1;
          break;
        }
        dropped[b] = 1;
      }
    }
  }

  const auto halves = torus.half_periods();
  for (std::size_t a = 0; a < candidates.size(); ++a) {
    if (dropped[a]) continue;
    auto cp = candidates[a];
    for (const auto& h : halves)
      if (torus.distance(cp.refined, h) <= 1.0) cp.is_half_period = true;
    out.points.push_back(cp);
  }
  return out;
}

/// |slope| of the line through the two additional critical points, measured
/// along their shortest connecting displacement. The sign depends on which
/// lattice image is taken and is not reported.
inline double critical_slope(const CriticalPointSet& cps, const TorusGraph& torus) {
  const auto extra = cps.additional();
  if (extra.size() != 2)
    throw AmbiguousCriticalSet("expected 2 additional critical points, found " + std::to_string(extra.size()));
  const auto d = torus.minimal_image(extra[1].refined.x - extra[0].refined.x,
                                     extra[1].refined.y - extra[0].refined.y);
  return std::abs(d.y / d.x);
}

}  // namespace graphmfe
