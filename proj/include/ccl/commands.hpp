#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "ccl/cone_invariants.hpp"
#include "ccl/io.hpp"

namespace ccl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitHypothesis = 3;
inline constexpr int kExitInvariant = 4;

struct CommandOptions {
  std::uint64_t seed = 1;
  std::optional<double> tol;
  std::filesystem::path base_dir;  // relative paths in the config resolve here
};

/// Artifacts in memory plus the exit status they imply. Nothing touches the
/// filesystem until the command has finished.
struct CommandResult {
  int exit_code = kExitOk;
  std::string message;
  std::vector<std::pair<std::string, std::string>> artifacts;
  io::json summary = io::json::object();

  void add(const std::string& name, std::string bytes) { artifacts.emplace_back(name, std::move(bytes)); }
  void add_json(const std::string& name, const io::json& j) { add(name, j.dump(2) + "\n"); }
  void fail(int code, std::string why) {
    exit_code = std::max(exit_code, code);
    if (!message.empty()) message += "; ";
    message += why;
  }
};

/// Random trigonometric field with `modes` terms and integer wave numbers in {0, 1, 2}.
inline FieldSpec random_field(int n, Rng& rng, int modes, double amp) {
  FieldSpec f;
  for (int m = 0; m < modes; ++m) {
    FieldSpec::Mode md;
    md.amp = amp * rng.normal();
    for (int a = 0; a < n; ++a) {
      md.k.push_back(static_cast<double>(rng.index(3)));
      md.phase.push_back(rng.uniform(0, 2 * std::numbers::pi));
    }
    f.modes.push_back(md);
  }
  return f;
}

namespace commands {

using io::get;
using io::get_or;
using io::json;

inline std::string csv_quote(const std::string& s) {
  std::string o = "\"";
  for (char c : s) o += c == '"' ? std::string("\"\"") : std::string(1, c);
  return o + "\"";
}

inline std::string to_string(ConeType t) { return t == ConeType::Type1 ? "type1" : "type2"; }

inline json invariants_json(const ConeInvariants& v) {
  return {{"cone_id", v.cone_id},         {"n", v.n},
          {"kappa", v.kappa},             {"varrho", v.varrho},
          {"theta_lower", v.theta_lower}, {"theta_estimate", v.theta_estimate},
          {"type", to_string(v.type)},    {"rigidity", v.rigidity},
          {"checks_passed", v.checks_passed}, {"failures", v.failures}};
}

inline json certificate_json(const EllipticityCertificate& c) {
  return {{"kind", c.kind == EllipticityCertificate::Kind::Partial ? "partial" : "full"},
          {"passed", c.passed},
          {"theta", c.theta},
          {"theta_bound", c.theta_bound},
          {"kappa_used", c.kappa_used},
          {"samples", c.samples},
          {"violations", c.violations},
          {"worst_margin", c.worst_margin},
          {"margin_floor", c.margin_floor},
          {"worst_case", c.worst_case},
          {"failure", c.failure}};
}

inline json admissibility_json(const AdmissibilityReport& r) {
  return {{"class", to_string(r.cls)},
          {"worst_margin", r.worst_margin},
          {"worst_node", r.worst_node},
          {"worst_eigenvalues", r.worst_eigenvalues},
          {"interior_nodes", r.interior_nodes},
          {"nodes", r.nodes}};
}

// ---- cone-report --------------------------------------------------------------

inline std::vector<ConeSpec> battery_from_json(const json& cfg) {
  if (!cfg.contains("battery")) throw ConfigError("cone-report: missing \"battery\"");
  const auto& b = cfg["battery"];
  std::vector<ConeSpec> cones;
  if (b.is_string()) {
    if (b != "builtin") throw ConfigError("cone-report: battery must be \"builtin\" or an array of cones");
    for (const auto& it : builtin_cone_battery()) cones.push_back(it.cone);
  } else if (b.is_array()) {
    for (const auto& c : b) cones.push_back(io::cone_from_json(c));
  } else {
    throw ConfigError("cone-report: battery must be \"builtin\" or an array of cones");
  }
  if (cones.empty()) throw ConfigError("cone-report: empty battery");
  return cones;
}

inline CommandResult cone_report(const json& cfg, const CommandOptions& opt) {
  const auto cones = battery_from_json(cfg);
  InvariantOptions io_opt;
  io_opt.seed = opt.seed;
  io_opt.theta_budget = get_or<std::size_t>(cfg, "theta_budget", io_opt.theta_budget, "cone-report");
  io_opt.rigidity_samples = get_or<std::size_t>(cfg, "rigidity_samples", io_opt.rigidity_samples, "cone-report");
  io_opt.check_tol = opt.tol.value_or(get_or<double>(cfg, "check_tol", io_opt.check_tol, "cone-report"));

  CommandResult res;
  json rows = json::array();
  std::string csv = "cone_id,n,kappa,varrho,theta_lower,type,rigidity,checks_passed\n";
  std::size_t failed = 0;
  for (const auto& c : cones) {
    const auto inv = invariant_report(c, io_opt);
    rows.push_back(invariants_json(inv));
    csv += csv_quote(inv.cone_id) + "," + std::to_string(inv.n) + "," + std::to_string(inv.kappa) + "," + io::fmt(inv.varrho) +
           "," + io::fmt(inv.theta_lower) + "," + to_string(inv.type) + "," + (inv.rigidity ? "1" : "0") + "," +
           (inv.checks_passed ? "1" : "0") + "\n";
    if (!inv.checks_passed) ++failed;
  }
  res.add("cones.csv", csv);
  res.add_json("cones.json", {{"schema", io::kSchema}, {"seed", opt.seed}, {"cones", rows}});
  res.summary = {{"cones", cones.size()}, {"failed", failed}};
  if (failed) res.fail(kExitInvariant, std::to_string(failed) + " cones fail the invariant cross-checks");
  return res;
}

// ---- ellipticity ----------------------------------------------------------------

inline CommandResult ellipticity(const json& cfg, const CommandOptions& opt) {
  if (!cfg.contains("function")) throw ConfigError("ellipticity: missing \"function\"");
  const auto f = io::function_from_json(cfg["function"]);
  const auto mode = get_or<std::string>(cfg, "mode", "both", "ellipticity");
  if (mode != "partial" && mode != "full" && mode != "both") throw ConfigError("ellipticity: mode must be partial, full or both");
  const auto samples = get_or<std::size_t>(cfg, "samples", 10000, "ellipticity");
  if (samples == 0) throw ConfigError("ellipticity: samples must be positive");

  CommandResult res;
  json out = {{"schema", io::kSchema}, {"seed", opt.seed}, {"function", io::function_to_json(f)}};
  if (mode != "full") {
    double theta;
    if (cfg.contains("theta")) {
      theta = get<double>(cfg, "theta", "ellipticity");
    } else {
      theta = compute_theta(f.domain, get_or<std::size_t>(cfg, "theta_budget", 4000, "ellipticity"), opt.seed).lower;
    }
    const auto cert = certify_partial_ellipticity(f, theta, samples, opt.seed);
    out["partial"] = certificate_json(cert);
    if (!cert.passed) res.fail(kExitInvariant, "partial ellipticity: " + cert.failure);
  }
  if (mode != "partial") {
    const auto rhos = get<std::vector<double>>(cfg, "rho", "ellipticity");
    if (rhos.empty()) throw ConfigError("ellipticity: \"rho\" must list at least one value");
    json full = json::array();
    std::string csv = "rho,theta,passed,violations\n";
    for (double rho : rhos) {
      const auto op = io::config_guard("ellipticity", [&] { return make_transformed(f, rho); });
      const auto cert = io::config_guard("ellipticity", [&] { return certify_full_ellipticity(op, samples, opt.seed); });
      auto j = certificate_json(cert);
      j["rho"] = rho;
      j["tilde_type"] = to_string(cone_type(op.tilde_domain));
      full.push_back(j);
      csv += io::fmt(rho) + "," + io::fmt(cert.theta) + "," + (cert.passed ? "1" : "0") + "," + std::to_string(cert.violations) + "\n";
      if (!cert.passed) res.fail(kExitInvariant, "full ellipticity at rho=" + io::fmt(rho) + ": " + cert.failure);
    }
    out["full"] = full;
    res.add("full_ellipticity.csv", csv);
  }
  if (get_or<std::size_t>(cfg, "concavity_pairs", 0, "ellipticity") > 0) {
    const auto rep = certify_concavity(f, get<std::size_t>(cfg, "concavity_pairs", "ellipticity"), opt.seed);
    out["concavity"] = {{"passed", rep.passed}, {"pairs", rep.pairs_tested}, {"violations", rep.violations}, {"worst_gap", rep.worst_gap}};
    if (!rep.passed) res.fail(kExitInvariant, "concavity check failed");
  }
  res.add_json("certificate.json", out);
  res.summary = {{"passed", res.exit_code == kExitOk}};
  return res;
}

// ---- verify-identities ----------------------------------------------------------

inline double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

inline CommandResult verify_identities(const json& cfg, const CommandOptions& opt) {
  if (!cfg.contains("manifold")) throw ConfigError("verify-identities: missing \"manifold\"");
  const auto M = io::manifold_from_json(cfg["manifold"]);
  if (M.kind == ModelManifold::Kind::RadialBall) throw ConfigError("verify-identities needs a grid chart, not a radial ball");
  const double tau = get_or<double>(cfg, "tau", 3.0, "verify-identities");
  const double alpha = get_or<double>(cfg, "alpha", 1.0, "verify-identities");
  const double tol = opt.tol.value_or(get_or<double>(cfg, "tol", 1e-12, "verify-identities"));
  const auto k = io::config_guard("verify-identities", [&] { return ReductionConstants::make(M.n, tau, alpha); });
  const auto matrices = get_or<std::size_t>(cfg, "random_matrices", 1000, "verify-identities");

  Rng rng(opt.seed);
  const FieldSpec uf = cfg.contains("u") ? io::field_from_json(cfg["u"], M.n) : random_field(M.n, rng, 3, 0.2);
  const FieldSpec wf = cfg.contains("w") ? io::field_from_json(cfg["w"], M.n) : random_field(M.n, rng, 3, 0.2);

  // algebraic identity on random symmetric matrices
  double check1 = 0.0, gspec = 0.0;
  for (std::size_t s = 0; s < matrices; ++s) {
    Eigen::MatrixXd S(M.n, M.n);
    for (int i = 0; i < M.n; ++i)
      for (int j = 0; j < M.n; ++j) S(i, j) = rng.normal();
    S = (0.5 * (S + S.transpose())).eval();
    const auto [lhs, rhs] = check_identity_sides(S, tau, alpha);
    check1 = std::max(check1, max_abs(lhs - rhs) / (1.0 + max_abs(lhs)));
    const auto r = schouten_algebra(S);
    for (int i = 0; i < M.n; ++i)
      gspec = std::max(gspec, std::abs(r.g_eigs[i] - (M.n - 2) * (S.trace() - r.s_eigs[i])) / (1.0 + max_abs(S)));
  }

  // operator identities on the chart
  const auto b = base_geometry(M);
  const auto u = ConformalFactor::from_field(M.grid, uf);
  const auto w = ConformalFactor::from_field(M.grid, wf);
  const auto Vu = v_operator(M, u, k);
  const auto At = conformal_modified_schouten(M, u, tau, alpha);
  std::vector<double> add(b.size()), scale(b.size());
  parallel_for(b.size(), [&](std::size_t i) {
    const Eigen::MatrixXd A = k.scale * modified_schouten(b.ric[i], b.scalar[i], b.g[i], tau, alpha);
    ScalarJet sum{u.jets[i].v + w.jets[i].v, u.jets[i].d + w.jets[i].d, u.jets[i].dd + w.jets[i].dd};
    const Eigen::MatrixXd lhs = v_operator_at(b.g[i], b.ginv[i], b.gamma[i], A, sum, k);
    const Eigen::MatrixXd rhs = v_additivity_rhs(b.g[i], b.ginv[i], b.gamma[i], A, u.jets[i], w.jets[i], k);
    add[i] = max_abs(lhs - rhs) / (1.0 + max_abs(lhs));
    scale[i] = max_abs(Vu.data[i] - k.scale * At.data[i]) / (1.0 + max_abs(Vu.data[i]));
  });
  const double additivity = *std::max_element(add.begin(), add.end());
  const double scaling = *std::max_element(scale.begin(), scale.end());

  CommandResult res;
  json checks = {{"check_identity", {{"residual", check1}, {"samples", matrices}}},
                 {"einstein_spectrum", {{"residual", gspec}, {"samples", matrices}}},
                 {"v_additivity", {{"residual", additivity}, {"nodes", b.size()}}},
                 {"v_scaling", {{"residual", scaling}, {"nodes", b.size()}}}};
  for (auto it = checks.begin(); it != checks.end(); ++it) {
    const bool ok = it.value()["residual"].get<double>() <= tol;
    it.value()["passed"] = ok;
    if (!ok) res.fail(kExitInvariant, it.key() + " residual above " + io::fmt(tol));
  }
  res.add_json("identities.json", {{"schema", io::kSchema},
                                   {"seed", opt.seed},
                                   {"tau", tau},
                                   {"alpha", alpha},
                                   {"tol", tol},
                                   {"u", io::field_to_json(uf)},
                                   {"w", io::field_to_json(wf)},
                                   {"checks", checks}});
  const auto grid = io::tensor_grid(M.grid, At.data);
  res.add("A_conformal.cclg", io::encode_grid(grid));
  std::vector<std::string> names;
  for (int a = 0; a < M.n; ++a)
    for (int c = a; c < M.n; ++c) names.push_back("A" + std::to_string(a) + std::to_string(c));
  res.add("A_conformal_slice.csv", io::csv_slice(grid, names));
  res.summary = checks;
  return res;
}

// ---- construct --------------------------------------------------------------------

inline CommandResult construct(const json& cfg, const CommandOptions& opt) {
  if (!cfg.contains("manifold") || !cfg.contains("cone") || !cfg.contains("v"))
    throw ConfigError("construct: needs \"manifold\", \"cone\" and \"v\"");
  const auto M = io::manifold_from_json(cfg["manifold"]);
  const auto cone = io::cone_from_json(cfg["cone"]);
  const double tau = get<double>(cfg, "tau", "construct");
  const double alpha = get_or<double>(cfg, "alpha", 1.0, "construct");
  const double N_max = get_or<double>(cfg, "N_max", 1024.0, "construct");
  const auto v = io::field_from_json(cfg["v"], M.n);
  const bool verify = get_or<bool>(cfg, "verify", true, "construct");
  const auto r = io::config_guard("construct", [&] { return construct_admissible(M, cone, tau, alpha, v, N_max); });

  CommandResult res;
  json out = {{"schema", io::kSchema},
              {"seed", opt.seed},
              {"success", r.success},
              {"hypotheses_met", r.hypotheses_met},
              {"hypothesis_notes", r.hypothesis_notes},
              {"N", r.N},
              {"tried", r.tried},
              {"min_grad_v", r.min_grad_v},
              {"max_v", r.max_v},
              {"base", admissibility_json(r.base_report)},
              {"final", admissibility_json(r.final_report)}};
  if (!r.hypotheses_met) res.fail(kExitHypothesis, "construction hypotheses unmet");
  if (!r.success) res.fail(kExitHypothesis, "no admissible e^{N v} up to N_max");
  if (r.success && verify) {
    const double N = r.N;
    const auto direct = verify_conformal_metric(
        M, [&](const Eigen::VectorXd& x) { return std::exp(N * v.value(x)); }, tau, alpha, cone);
    out["direct_verification"] = admissibility_json(direct);
    if (direct.cls != Admissibility::Admissible)
      res.fail(kExitInvariant, "direct differentiation of e^{2 ubar} g is " + to_string(direct.cls));
  }
  res.add_json("construction.json", out);
  io::GridData g{M.grid, 1, r.ubar.values()};
  res.add("ubar.cclg", io::encode_grid(g));
  res.add("ubar_slice.csv", io::csv_slice(g, {"ubar"}));
  io::GridData mg{M.grid, 1, r.final_report.margins};
  res.add("margins_slice.csv", io::csv_slice(mg, {"margin"}));
  res.summary = {{"success", r.success}, {"N", r.N}, {"hypotheses_met", r.hypotheses_met}};
  return res;
}

// ---- solve ------------------------------------------------------------------------

inline json solve_report_json(const SolveReport& r) {
  return {{"converged", r.converged},       {"iterations", r.iterations},
          {"failure", r.failure},           {"note", r.note},
          {"residual_history", r.residual_history}, {"step_norms", r.step_norms},
          {"theta_floor", r.theta_floor},   {"floor_node", r.floor_node},
          {"floor_index", r.floor_index},   {"damping", r.damping},
          {"linear_iterations", r.linear_iterations}, {"linear_solver", r.linear_solver},
          {"min_margin", r.min_margin}};
}

inline CommandResult solve(const json& cfg, const CommandOptions& opt) {
  auto pc = io::problem_from_json(cfg, opt.base_dir);
  if (opt.tol) {
    pc.solve.tol = *opt.tol;
    pc.radial_options.tol = *opt.tol;
  }
  CommandResult res;
  json out = {{"schema", io::kSchema},
              {"seed", opt.seed},
              {"function", io::function_to_json(pc.problem.f)},
              {"tau", pc.problem.tau},
              {"alpha", pc.problem.alpha},
              {"c", pc.problem.c},
              {"varrho", pc.problem.k.varrho}};
  const auto& M = pc.problem.manifold;
  if (pc.radial) {
    const auto r = io::config_guard("solve", [&] { return solve_radial_blowup(pc.problem, pc.radial_options); });
    json stages = json::array();
    for (const auto& st : r.stages) {
      auto j = solve_report_json(st.solve);
      j["eps"] = st.eps;
      j["boundary_value"] = st.boundary_value;
      j["chebyshev_nodes"] = st.u.size();
      stages.push_back(j);
    }
    double err = 0.0;
    if (r.converged)
      for (std::size_t i = 0; i < r.r.size(); ++i)
        if (r.r[i] <= 0.9) err = std::max(err, std::abs(r.profiles.back()[i] - hyperbolic_profile(r.r[i])));
    out["radial"] = {{"converged", r.converged},
                     {"monotone", r.monotone},
                     {"failure", r.failure},
                     {"note", r.note},
                     {"monotonicity_gap", r.monotonicity_gap},
                     {"interior_change", r.interior_change},
                     {"hyperbolic_deviation_r_le_0_9", err},
                     {"stages", stages}};
    std::string csv = "r,hyperbolic";
    for (const auto& st : r.stages) csv += ",eps_" + (std::ostringstream() << st.eps).str();
    csv += "\n";
    for (std::size_t i = 0; i < r.r.size(); ++i) {
      csv += io::fmt(r.r[i]) + "," + io::fmt(r.r[i] < 1.0 ? hyperbolic_profile(r.r[i]) : 0.0);
      for (const auto& p : r.profiles) csv += "," + (std::isnan(p[i]) ? std::string() : io::fmt(p[i]));
      csv += "\n";
    }
    res.add("profiles.csv", csv);
    if (!r.converged) res.fail(kExitInvariant, "radial continuation failed: " + r.failure);
    if (!r.monotone) res.fail(kExitInvariant, "profiles are not monotone in eps");
    res.summary = {{"converged", r.converged}, {"monotone", r.monotone}, {"hyperbolic_deviation", err}};
  } else {
    SolveReport r;
    try {
      r = solve_closed(pc.problem, pc.u0, pc.solve);
    } catch (const DomainError& e) {
      throw HypothesisViolation(std::string("initial guess is not admissible: ") + e.what());
    }
    out["solve"] = solve_report_json(r);
    std::optional<double> err;
    if (pc.exact) {
      const auto ustar = sample_values(M.grid, pc.exact);
      double e = 0.0;
      for (std::size_t i = 0; i < ustar.size(); ++i) e = std::max(e, std::abs(r.u[i] - ustar[i]));
      err = e;
      out["recovery_error"] = e;
    }
    std::string csv = "iter,residual,step_norm,theta_floor,damping\n";
    for (std::size_t i = 0; i < r.residual_history.size(); ++i) {
      csv += std::to_string(i) + "," + io::fmt(r.residual_history[i]) + ",";
      csv += (i > 0 && i - 1 < r.step_norms.size() ? io::fmt(r.step_norms[i - 1]) : std::string()) + ",";
      csv += (i < r.theta_floor.size() ? io::fmt(r.theta_floor[i]) : std::string()) + ",";
      csv += (i > 0 && i - 1 < r.damping.size() ? io::fmt(r.damping[i - 1]) : std::string()) + "\n";
    }
    res.add("history.csv", csv);
    io::GridData g{M.grid, 1, r.u};
    res.add("u.cclg", io::encode_grid(g));
    res.add("u_slice.csv", io::csv_slice(g, {"u"}));
    if (!r.converged) res.fail(kExitInvariant, "Newton did not converge: " + r.failure);
    if (err && cfg.contains("recovery_tol") && *err > get<double>(cfg, "recovery_tol", "solve"))
      res.fail(kExitInvariant, "recovery error " + io::fmt(*err) + " above recovery_tol");
    res.summary = {{"converged", r.converged}, {"iterations", r.iterations}};
    if (err) res.summary["recovery_error"] = *err;
  }
  res.add_json("report.json", out);
  return res;
}

}  // namespace commands

using CommandFn = std::function<CommandResult(const io::json&, const CommandOptions&)>;

/// Runs one command and maps library errors to exit statuses.
inline CommandResult run_command(const CommandFn& fn, const io::json& cfg, const CommandOptions& opt) {
  try {
    io::require_schema(cfg);
    return fn(cfg, opt);
  } catch (const ConfigError& e) {
    return {kExitConfig, e.what(), {}, {}};
  } catch (const PreconditionError& e) {
    return {kExitConfig, e.what(), {}, {}};
  } catch (const HypothesisViolation& e) {
    return {kExitHypothesis, e.what(), {}, {}};
  } catch (const DomainError& e) {
    return {kExitHypothesis, e.what(), {}, {}};
  } catch (const InvariantViolation& e) {
    return {kExitInvariant, e.what(), {}, {}};
  }
}

/// Writes a result's artifacts and manifest. Failed configs write nothing.
inline std::string write_result(const CommandResult& r, const std::string& command, const io::json& cfg,
                                const std::filesystem::path& out, const CommandOptions& opt, double wall_seconds) {
  if (r.exit_code == kExitConfig) return {};
  io::ArtifactWriter w(out);
  for (const auto& [name, bytes] : r.artifacts) w.write(name, bytes);
  if (r.artifacts.empty()) w.write("status.json", io::json{{"message", r.message}}.dump(2) + "\n");
  w.write_manifest(command, io::hex64(io::fnv1a(cfg.dump())), opt.seed, wall_seconds,
                   {{"exit_code", r.exit_code}, {"message", r.message}, {"summary", r.summary}});
  return w.combined_hash();
}

inline std::optional<CommandFn> find_command(const std::string& name) {
  if (name == "cone-report") return CommandFn(commands::cone_report);
  if (name == "ellipticity") return CommandFn(commands::ellipticity);
  if (name == "verify-identities") return CommandFn(commands::verify_identities);
  if (name == "construct") return CommandFn(commands::construct);
  if (name == "solve") return CommandFn(commands::solve);
  return std::nullopt;
}

}  // namespace ccl
