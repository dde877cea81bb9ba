#pragma once

// Command-line front end. Exit codes:
//   0  success (converged, bracket found, verification matched)
//   1  no solution found (solve-vortex) or verification mismatch
//   2  input error (bad flags, unreadable or invalid graph, bad parameters)
//   3  solver budget exhausted (solve-dirac iterations, lambda-c doublings)

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "graphmfe/graph_io.hpp"
#include "graphmfe/monotone.hpp"
#include "graphmfe/solution_file.hpp"
#include "graphmfe/torus.hpp"
#include "graphmfe/variational.hpp"

namespace graphmfe::cli {

enum ExitCode : int { kOk = 0, kNoSolution = 1, kInputError = 2, kBudget = 3 };

struct CommonArgs {
  std::string graph;
  std::optional<double> tol;
  std::optional<int> max_iters;
  std::string out;
  bool quiet = false;
};

struct SolveDiracArgs {
  CommonArgs common;
  double rho = 0.0;
  std::string pole;
};

struct SolveVortexArgs {
  CommonArgs common;
  double lambda = 0.0;
  std::vector<std::string> vortices;
  std::optional<double> K;
  double floor = 50.0;
};

struct LambdaCArgs {
  CommonArgs common;
  std::vector<std::string> vortices;
  double width = 0.0;
  double upper_guess = 0.0;
  double k_factor = 2.0;
};

struct TorusGreenArgs {
  long long n = 0;
  std::string preset = "tau-half-plus-i";
  std::vector<long long> periods;
  double tol = 1e-12;
  std::string out;
  std::string solution_out;
  bool quiet = false;
};

struct VerifyArgs {
  std::string solution;
  std::string graph;
  double tol = 1e-12;
};

namespace detail {

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty())
    out << text;
  else
    write_file_atomically(path, text);
}

inline nlohmann::json to_json(const SolverReport& r) {
  return {{"status", to_string(r.status)},
          {"reason", r.reason},
          {"iterations", r.iterations},
          {"K", r.K},
          {"lambda", r.lambda},
          {"transformed_residual_sup", r.residual_sup},
          {"necessary_bound", r.necessary_bound},
          {"min_v", r.min_v}};
}

}  // namespace detail

inline int cmd_solve_dirac(const SolveDiracArgs& args, std::ostream& out, std::ostream& err) {
  std::optional<WeightedGraph> graph;
  std::optional<DiracProblem> problem;
  try {
    graph.emplace(load_graph(args.common.graph));
    problem.emplace(*graph, args.rho, graph->index_of(args.pole));
  } catch (const Error& ex) {
    err << "solve-dirac: " << ex.what() << "\n";
    return kInputError;
  }
  DiracOptions opts;
  if (args.common.tol) opts.tol = *args.common.tol;
  if (args.common.max_iters) opts.max_iters = *args.common.max_iters;

  auto [u, rep] = solve_dirac_mfe(*problem, opts);
  auto file = SolutionFile::from_field(*graph, "dirac", u);
  file.parameters = {{"rho", args.rho}, {"pole", args.pole}};
  file.report = {{"status", rep.converged ? "converged" : "max_iterations_exceeded"},
                 {"residual_sup", rep.residual_sup},
                 {"constraint_defect", rep.constraint_defect},
                 {"J", rep.J_value},
                 {"lagrange_multiplier", rep.lagrange_multiplier},
                 {"iterations", rep.iterations},
                 {"gradient_steps", rep.gradient_steps},
                 {"newton_steps", rep.newton_steps},
                 {"tol", opts.tol}};
  try {
    detail::emit(args.common.out, file.dump(), out);
  } catch (const Error& ex) {
    err << "solve-dirac: " << ex.what() << "\n";
    return kInputError;
  }
  if (!args.common.quiet)
    err << "solve-dirac: " << (rep.converged ? "converged" : "did not converge") << " after "
        << rep.iterations << " iterations, residual " << rep.residual_sup << "\n";
  return rep.converged ? kOk : kBudget;
}

inline int cmd_solve_vortex(const SolveVortexArgs& args, std::ostream& out, std::ostream& err) {
  std::optional<WeightedGraph> graph;
  std::optional<VortexProblem> problem;
  try {
    graph.emplace(load_graph(args.common.graph));
    problem.emplace(*graph, args.lambda, std::span<const std::string>(args.vortices));
    if (args.K && *args.K < 2.0 * args.lambda) throw InvalidArgument("--K must be at least 2*lambda");
  } catch (const Error& ex) {
    err << "solve-vortex: " << ex.what() << "\n";
    return kInputError;
  }
  VortexOptions opts;
  if (args.common.tol) opts.tol = *args.common.tol;
  if (args.common.max_iters) opts.max_iters = *args.common.max_iters;
  opts.K = args.K;
  opts.divergence_floor = args.floor;

  const auto result = solve_vortex_mfe(*problem, opts);
  const auto& rep = result.report;
  SolutionFile file;
  if (result.u) {
    file = SolutionFile::from_field(*graph, "vortex", *result.u);
  } else {
    file.graph_hash = graph_hash(*graph);
    file.equation = "vortex";
  }
  file.parameters = {{"lambda", args.lambda}, {"vortices", args.vortices}, {"K", rep.K}};
  file.report = detail::to_json(rep);
  if (result.u) {
    file.report["residual_sup"] = rep.vortex_residual_sup;
    file.report["mass_identity_defect"] = rep.mass_identity_defect;
    file.report["max_u"] = rep.max_u;
  }
  const auto& steps = result.trace.steps;
  file.report["trace"] = {{"iterations", steps.size()},
                          {"max_increase", result.trace.max_increase},
                          {"first_residual", result.trace.residuals.front()},
                          {"last_residual", result.trace.residuals.back()},
                          {"last_step", steps.empty() ? 0.0 : steps.back()}};
  try {
    detail::emit(args.common.out, file.dump(), out);
  } catch (const Error& ex) {
    err << "solve-vortex: " << ex.what() << "\n";
    return kInputError;
  }
  if (!args.common.quiet)
    err << "solve-vortex: " << to_string(rep.status) << " (" << rep.reason << ") after " << rep.iterations
        << " iterations\n";
  return rep.status == IterationStatus::converged ? kOk : kNoSolution;
}

inline int cmd_lambda_c(const LambdaCArgs& args, std::ostream& out, std::ostream& err) {
  std::optional<WeightedGraph> graph;
  std::vector<Index> vortices;
  try {
    graph.emplace(load_graph(args.common.graph));
    if (args.vortices.empty()) throw InvalidArgument("at least one --vortex is required");
    for (const auto& id : args.vortices) vortices.push_back(graph->index_of(id));
    if (args.width < 0.0) throw InvalidArgument("--width must be positive");
    if (args.k_factor < 2.0) throw InvalidArgument("--k-factor must be at least 2");
  } catch (const Error& ex) {
    err << "lambda-c: " << ex.what() << "\n";
    return kInputError;
  }
  LambdaCriticalOptions opts;
  opts.width = args.width;
  opts.upper_guess = args.upper_guess;
  opts.k_factor = args.k_factor;
  if (args.common.tol) opts.solver.tol = *args.common.tol;
  if (args.common.max_iters) opts.solver.max_iters = *args.common.max_iters;

  LambdaCritical lc;
  try {
    lc = estimate_lambda_c(*graph, vortices, opts);
  } catch (const BudgetExhausted& ex) {
    err << "lambda-c: " << ex.what() << "\n";
    return kBudget;
  }
  nlohmann::json doc = {{"graph_hash", graph_hash(*graph)},
                        {"vortices", args.vortices},
                        {"lower", lc.lower},
                        {"upper", lc.upper},
                        {"width", lc.upper - lc.lower},
                        {"bound_necessary", lc.bound_necessary},
                        {"solves", lc.solves},
                        {"lower_evidence", detail::to_json(lc.lower_evidence)},
                        {"upper_evidence", detail::to_json(lc.upper_evidence)}};
  try {
    detail::emit(args.common.out, doc.dump(2) + "\n", out);
  } catch (const Error& ex) {
    err << "lambda-c: " << ex.what() << "\n";
    return kInputError;
  }
  if (!args.common.quiet)
    err << "lambda-c: lambda_c in [" << detail::format_double(lc.lower) << ", "
        << detail::format_double(lc.upper) << "]\n";
  return kOk;
}

inline int cmd_torus_green(const TorusGreenArgs& args, std::ostream& out, std::ostream& err) {
  std::optional<TorusGraph> torus;
  try {
    TorusSpec spec;
    if (!args.periods.empty()) {
      if (args.periods.size() != 4) throw InvalidArgument("--periods needs four integers a,b,c,d");
      spec.period1 = {args.periods[0], args.periods[1]};
      spec.period2 = {args.periods[2], args.periods[3]};
      spec.n = args.n > 0 ? args.n : static_cast<long long>(std::llround(std::hypot(
                                          static_cast<double>(spec.period1[0]), static_cast<double>(spec.period1[1]))));
    } else {
      if (args.preset != "tau-half-plus-i") throw InvalidArgument("unknown preset '" + args.preset + "'");
      spec = TorusSpec::tau_half_plus_i(args.n);
    }
    torus.emplace(spec);
  } catch (const Error& ex) {
    err << "torus-green: " << ex.what() << "\n";
    return kInputError;
  }

  const auto& g = torus->graph();
  const VertexField G = torus_green(*torus);
  Vector defect = graphmfe::detail::laplacian(g, G.values()) + Vector::Constant(g.size(), 1.0 / g.volume());
  defect[torus->origin()] -= 1.0 / g.mu(torus->origin());
  const double residual = defect.lpNorm<Eigen::Infinity>();
  const auto cps = find_critical_points(*torus, G, args.tol);
  const double n = static_cast<double>(torus->spec().n);

  std::ostringstream csv;
  csv << "i,j,refined_x,refined_y,class,G_value\n";
  for (const auto& cp : cps.points)
    csv << cp.i << "," << cp.j << "," << detail::format_double(cp.refined.x / n) << ","
        << detail::format_double(cp.refined.y / n) << "," << to_string(cp.classification) << ","
        << detail::format_double(cp.value) << "\n";

  std::ostringstream summary;
  summary << "# vertices=" << g.size() << "\n";
  summary << "# residual=" << detail::format_double(residual) << "\n";
  summary << "# critical_points=" << cps.points.size() << "\n";
  for (const auto& cp : cps.points) {
    const char* role = cp.is_pole ? "pole" : cp.is_half_period ? "half_period" : "additional";
    summary << "# " << role << " " << cp.i << "," << cp.j << " " << to_string(cp.classification) << "\n";
  }
  try {
    summary << "# slope=" << detail::format_double(critical_slope(cps, *torus)) << "\n";
  } catch (const AmbiguousCriticalSet& ex) {
    summary << "# slope=unavailable (" << ex.what() << ")\n";
  }

  try {
    if (args.out.empty()) {
      out << csv.str() << summary.str();
    } else {
      write_file_atomically(args.out, csv.str());
      if (!args.quiet) out << summary.str();
    }
    if (!args.solution_out.empty()) {
      auto file = SolutionFile::from_field(g, "green", G);
      file.parameters = {{"pole", g.id(torus->origin())},
                         {"torus",
                          {{"n", torus->spec().n},
                           {"periods",
                            {torus->spec().period1[0], torus->spec().period1[1], torus->spec().period2[0],
                             torus->spec().period2[1]}}}}};
      file.report = {{"status", "solved"}, {"residual_sup", residual}};
      write_file_atomically(args.solution_out, file.dump());
    }
  } catch (const Error& ex) {
    err << "torus-green: " << ex.what() << "\n";
    return kInputError;
  }
  return kOk;
}

inline int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const auto file = SolutionFile::load(args.solution);
    std::optional<WeightedGraph> graph;
    if (!args.graph.empty()) {
      graph.emplace(load_graph(args.graph));
    } else if (file.parameters.contains("torus")) {
      const auto& t = file.parameters["torus"];
      const auto p = t.at("periods").get<std::vector<long long>>();
      if (p.size() != 4) throw InvalidArgument("torus periods need four integers");
      TorusSpec spec{t.at("n").get<long long>(), {p[0], p[1]}, {p[2], p[3]}};
      graph.emplace(TorusGraph(spec).graph());
    } else {
      throw InvalidArgument("--graph is required for this solution file");
    }
    if (graph_hash(*graph) != file.graph_hash) {
      err << "verify: graph hash mismatch (" << graph_hash(*graph) << " vs " << file.graph_hash << ")\n";
      return kNoSolution;
    }
    if (!file.field) {
      err << "verify: solution file carries no field (status "
          << file.report.value("status", std::string("unknown")) << ")\n";
      return kNoSolution;
    }
    const double stored = file.report.at("residual_sup").get<double>();
    const double recomputed = recompute_residual(*graph, file);
    const bool ok = std::abs(recomputed - stored) <= args.tol;
    out << "verify: " << (ok ? "ok" : "MISMATCH") << " equation=" << file.equation
        << " stored_residual=" << detail::format_double(stored)
        << " recomputed_residual=" << detail::format_double(recomputed) << "\n";
    return ok ? kOk : kNoSolution;
  } catch (const Error& ex) {
    err << "verify: " << ex.what() << "\n";
    return kInputError;
  } catch (const nlohmann::json::exception& ex) {
    err << "verify: malformed solution file: " << ex.what() << "\n";
    return kInputError;
  }
}

/// Parses argv and dispatches to a subcommand.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Mean field equation solvers on finite weighted graphs", "graphmfe"};
  app.require_subcommand(1);

  auto add_common = [](CLI::App* sub, CommonArgs& c) {
    sub->add_option("--graph", c.graph, "graph JSON file")->required();
    sub->add_option("--tol", c.tol, "residual tolerance");
    sub->add_option("--max-iters", c.max_iters, "iteration budget");
    sub->add_option("--out", c.out, "output file (default: standard output)");
    sub->add_flag("--quiet", c.quiet, "suppress the summary on standard error");
  };

  SolveDiracArgs dirac;
  auto* sd = app.add_subcommand("solve-dirac", "solve  Δu + e^u = ρ δ_pole");
  add_common(sd, dirac.common);
  sd->add_option("--rho", dirac.rho, "source strength ρ > 0")->required();
  sd->add_option("--pole", dirac.pole, "pole vertex id")->required();

  SolveVortexArgs vortex;
  auto* sv = app.add_subcommand("solve-vortex", "solve  Δu = λ e^u (e^u − 1) + 4π Σ δ_p");
  add_common(sv, vortex.common);
  sv->add_option("--lambda", vortex.lambda, "coupling λ > 0")->required();
  sv->add_option("--vortex", vortex.vortices, "vortex vertex id (repeatable or comma separated)")
      ->required()
      ->delimiter(',');
  sv->add_option("--K", vortex.K, "screening constant (default 2λ)");
  sv->add_option("--floor", vortex.floor, "divergence floor below −‖u0‖∞");

  LambdaCArgs lc;
  auto* sl = app.add_subcommand("lambda-c", "bracket the critical coupling λ_c");
  add_common(sl, lc.common);
  sl->add_option("--vortex", lc.vortices, "vortex vertex id (repeatable or comma separated)")
      ->required()
      ->delimiter(',');
  sl->add_option("--width", lc.width, "bracket width (default 1e-3 · 16πM/Vol)");
  sl->add_option("--upper-guess", lc.upper_guess, "first upper λ (default 2 · 16πM/Vol)");
  sl->add_option("--k-factor", lc.k_factor, "K = k_factor · λ, at least 2");

  TorusGreenArgs torus;
  auto* st = app.add_subcommand("torus-green", "Green's function and critical points on a discrete torus");
  st->add_option("--n", torus.n, "lattice points per unit length");
  st->add_option("--preset", torus.preset, "torus preset (tau-half-plus-i)");
  st->add_option("--periods", torus.periods, "period vectors a,b,c,d")->delimiter(',')->expected(4);
  st->add_option("--tol", torus.tol, "critical point tolerance");
  st->add_option("--out", torus.out, "CSV output file (default: standard output)");
  st->add_option("--solution-out", torus.solution_out, "also write the Green's function as a solution file");
  st->add_flag("--quiet", torus.quiet, "suppress the summary when writing to a file");

  VerifyArgs verify;
  auto* sr = app.add_subcommand("verify", "recompute the residual stored in a solution file");
  sr->add_option("--solution", verify.solution, "solution file")->required();
  sr->add_option("--graph", verify.graph, "graph JSON file (torus solutions rebuild their graph)");
  sr->add_option("--tol", verify.tol, "allowed difference between stored and recomputed residual");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "graphmfe: " << e.what() << "\n";
    return kInputError;
  }

  if (*sd) return cmd_solve_dirac(dirac, out, err);
  if (*sv) return cmd_solve_vortex(vortex, out, err);
  if (*sl) return cmd_lambda_c(lc, out, err);
  if (*st) {
    if (torus.n <= 0 && torus.periods.empty()) {
      err << "torus-green: --n is required\n";
      return kInputError;
    }
    return cmd_torus_green(torus, out, err);
  }
  return cmd_verify(verify, out, err);
}

}  // namespace graphmfe::cli
