#pragma once

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ccl/solver.hpp"

namespace ccl::io {

using json = nlohmann::ordered_json;

inline constexpr const char* kSchema = "ccl/1";
inline constexpr const char* kVersion = "0.1.0";

// ---- hashing ------------------------------------------------------------------

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

// ---- JSON access --------------------------------------------------------------

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline json load_json(const std::filesystem::path& p) { return parse_json(read_text(p), p.string()); }

inline void require_object(const json& j, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
}

inline void require_schema(const json& j) {
  require_object(j, "config");
  if (!j.contains("schema")) throw ConfigError("missing \"schema\" field (expected \"" + std::string(kSchema) + "\")");
  if (j["schema"] != kSchema) throw ConfigError("unsupported schema " + j["schema"].dump());
}

template <class T>
T get(const json& j, const std::string& key, const std::string& what) {
  if (!j.contains(key)) throw ConfigError(what + ": missing \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(what + ": field \"" + key + "\" has the wrong type");
  }
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& what) {
  return j.contains(key) ? get<T>(j, key, what) : fallback;
}

// Library preconditions raised while building objects from a config are config errors.
template <class Fn>
auto config_guard(const std::string& what, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const PreconditionError& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

// ---- cones, functions, fields, manifolds -------------------------------------

inline ConeSpec cone_from_json(const json& j) {
  require_object(j, "cone");
  const auto kind = get<std::string>(j, "kind", "cone");
  return config_guard("cone", [&] {
    if (kind == "garding") return ConeSpec::garding(get<int>(j, "n", "cone"), get<int>(j, "k", "cone"));
    if (kind == "pk") return ConeSpec::sum_cone(get<int>(j, "n", "cone"), get<int>(j, "k", "cone"));
    if (kind == "halfspace") return ConeSpec::half_space(get<int>(j, "n", "cone"), get<double>(j, "rho", "cone"));
    if (kind == "transform") {
      if (!j.contains("base")) throw ConfigError("transform cone needs \"base\"");
      return transform_cone(cone_from_json(j["base"]), get<double>(j, "rho", "cone"));
    }
    if (kind == "projection") {
      if (!j.contains("base")) throw ConfigError("projection cone needs \"base\"");
      return project_cone(cone_from_json(j["base"]), get<int>(j, "target_dim", "cone"));
    }
    throw ConfigError("unknown cone kind \"" + kind + "\"");
  });
}

inline json cone_to_json(const ConeSpec& c) {
  json j;
  switch (c.kind) {
    case ConeSpec::Kind::Garding: j = {{"kind", "garding"}, {"n", c.n}, {"k", c.k}}; break;
    case ConeSpec::Kind::SumCone: j = {{"kind", "pk"}, {"n", c.n}, {"k", c.k}}; break;
    case ConeSpec::Kind::HalfSpace: j = {{"kind", "halfspace"}, {"n", c.n}, {"rho", c.rho}}; break;
    case ConeSpec::Kind::Transform: j = {{"kind", "transform"}, {"n", c.n}, {"rho", c.rho}, {"base", cone_to_json(*c.base)}}; break;
    case ConeSpec::Kind::Projection:
      j = {{"kind", "projection"}, {"n", c.n}, {"target_dim", c.n}, {"base", cone_to_json(*c.base)}};
      break;
  }
  return j;
}

inline FunctionSpec function_from_json(const json& j, const ConeSpec* fallback_cone = nullptr) {
  require_object(j, "function");
  const auto family = get<std::string>(j, "family", "function");
  if (!j.contains("cone") && !fallback_cone) throw ConfigError("function: missing \"cone\"");
  const ConeSpec cone = j.contains("cone") ? cone_from_json(j["cone"]) : *fallback_cone;
  return config_guard("function", [&] {
    if (family == "sigma_k_root") return FunctionSpec::sigma_k_root(cone, get<int>(j, "k", "function"));
    if (family == "sigma_quotient_root")
      return FunctionSpec::sigma_quotient_root(cone, get<int>(j, "k", "function"), get<int>(j, "l", "function"));
    if (family == "sigma1") return FunctionSpec::linear(cone);
    throw ConfigError("unknown function family \"" + family + "\"");
  });
}

inline json function_to_json(const FunctionSpec& f) {
  json j;
  switch (f.family) {
    case FunctionSpec::Family::SigmaKRoot: j = {{"family", "sigma_k_root"}, {"k", f.k}}; break;
    case FunctionSpec::Family::SigmaQuotientRoot: j = {{"family", "sigma_quotient_root"}, {"k", f.k}, {"l", f.l}}; break;
    case FunctionSpec::Family::Linear: j = {{"family", "sigma1"}}; break;
  }
  j["cone"] = cone_to_json(f.domain);
  return j;
}

/// {"constant": c, "linear": [..], "modes": [{"amp": a, "k": [..], "phase": [..]}]}
inline FieldSpec field_from_json(const json& j, int n) {
  if (j.is_number()) return FieldSpec::constant_field(j.get<double>());
  require_object(j, "field");
  FieldSpec f;
  f.constant = get_or<double>(j, "constant", 0.0, "field");
  f.linear = get_or<std::vector<double>>(j, "linear", {}, "field");
  if (static_cast<int>(f.linear.size()) > n) throw ConfigError("field: \"linear\" longer than the dimension");
  if (j.contains("modes")) {
    if (!j["modes"].is_array()) throw ConfigError("field: \"modes\" must be an array");
    for (const auto& m : j["modes"]) {
      require_object(m, "field mode");
      FieldSpec::Mode md;
      md.amp = get<double>(m, "amp", "field mode");
      md.k = get<std::vector<double>>(m, "k", "field mode");
      md.phase = get_or<std::vector<double>>(m, "phase", std::vector<double>(md.k.size(), 0.0), "field mode");
      if (static_cast<int>(md.k.size()) != n || md.phase.size() != md.k.size())
        throw ConfigError("field mode: \"k\" and \"phase\" need one entry per axis");
      f.modes.push_back(std::move(md));
    }
  }
  return f;
}

inline json field_to_json(const FieldSpec& f) {
  json modes = json::array();
  for (const auto& m : f.modes) modes.push_back({{"amp", m.amp}, {"k", m.k}, {"phase", m.phase}});
  return {{"constant", f.constant}, {"linear", f.linear}, {"modes", modes}};
}

/// Node count per axis: an int, or an array whose entries must agree.
inline int grid_nodes(const json& j, int n) {
  if (!j.contains("grid")) throw ConfigError("manifold: missing \"grid\"");
  const auto& g = j["grid"];
  if (g.is_number_integer()) return g.get<int>();
  if (!g.is_array() || g.empty()) throw ConfigError("manifold: \"grid\" must be an int or an array of ints");
  std::vector<int> d;
  try {
    d = g.get<std::vector<int>>();
  } catch (const json::exception&) {
    throw ConfigError("manifold: \"grid\" entries must be ints");
  }
  for (int v : d)
    if (v != d[0]) throw ConfigError("manifold: only uniform grids are supported");
  if (d.size() != 1 && static_cast<int>(d.size()) != n) throw ConfigError("manifold: \"grid\" needs 1 or n entries");
  return d[0];
}

inline ModelManifold manifold_from_json(const json& j) {
  require_object(j, "manifold");
  const auto kind = get<std::string>(j, "kind", "manifold");
  const int n = get<int>(j, "n", "manifold");
  if (n < 3) throw ConfigError("manifold: dimension must be >= 3");
  const int N = grid_nodes(j, n);
  return config_guard("manifold", [&] {
    if (kind == "flat_torus") return ModelManifold::flat_torus(n, N);
    if (kind == "sphere_chart") return ModelManifold::sphere_chart(n, N, get_or<double>(j, "radius", 1.0, "manifold"));
    if (kind == "hyperbolic_chart") return ModelManifold::hyperbolic_chart(n, N);
    if (kind == "conformal_torus") {
      if (!j.contains("phi")) throw ConfigError("conformal_torus needs \"phi\"");
      return ModelManifold::conformal_torus(n, N, field_from_json(j["phi"], n));
    }
    if (kind == "warped_torus") {
      if (!j.contains("phis") || !j["phis"].is_array()) throw ConfigError("warped_torus needs a \"phis\" array");
      std::vector<FieldSpec> phis;
      for (const auto& p : j["phis"]) phis.push_back(field_from_json(p, n));
      return ModelManifold::warped_torus(n, N, phis);
    }
    if (kind == "radial_ball") return ModelManifold::radial_ball(n, N);
    if (kind == "slab") return ModelManifold::slab(n, N);
    throw ConfigError("unknown manifold kind \"" + kind + "\"");
  });
}

// ---- problems -----------------------------------------------------------------

/// Closed-form u* used for manufactured data and initial guesses.
inline JetFn solution_from_json(const json& j, int n) {
  require_object(j, "solution");
  const auto kind = get<std::string>(j, "kind", "solution");
  if (kind == "torus_trial") return torus_trial_solution(n);
  if (kind == "slab_trial") return slab_trial_solution(n, get_or<double>(j, "amp", 0.05, "solution"));
  if (kind == "field") {
    if (!j.contains("field")) throw ConfigError("solution: missing \"field\"");
    return field_jet(field_from_json(j["field"], n));
  }
  if (kind == "exp_field") {
    if (!j.contains("field")) throw ConfigError("solution: missing \"field\"");
    return exp_field_jet(field_from_json(j["field"], n), get<double>(j, "N", "solution"));
  }
  throw ConfigError("unknown solution kind \"" + kind + "\"");
}

struct ProblemConfig {
  ProblemSpec problem;
  bool radial = false;
  JetFn exact;                 // u* when the data is manufactured
  std::vector<double> u0;      // closed problems
  SolveOptions solve;
  RadialOptions radial_options;
};

// ---- binary grid format ---------------------------------------------------------
//
// "CCLG" u32 version, u32 ndim, i32 dims[ndim], f64 lo[ndim], f64 h[ndim],
// u8 periodic[ndim], u32 components, then f64 data row-major over nodes with
// components innermost. Little-endian.

struct GridData {
  Grid grid;
  std::size_t components = 1;
  std::vector<double> data;
};

namespace detail {
template <class T>
void put(std::string& out, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.append(b, sizeof(T));
}
template <class T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ConfigError("grid file truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}
}  // namespace detail

inline std::string encode_grid(const GridData& g) {
  if (g.data.size() != g.grid.size() * g.components) throw PreconditionError("grid data size mismatch");
  std::string out = "CCLG";
  detail::put<std::uint32_t>(out, 1);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(g.grid.ndim()));
  for (int d : g.grid.dims) detail::put<std::int32_t>(out, d);
  for (double v : g.grid.lo) detail::put<double>(out, v);
  for (double v : g.grid.h) detail::put<double>(out, v);
  for (bool p : g.grid.periodic) detail::put<std::uint8_t>(out, p ? 1 : 0);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(g.components));
  for (double v : g.data) detail::put<double>(out, v);
  return out;
}

inline GridData decode_grid(const std::string& in) {
  if (in.size() < 4 || in.compare(0, 4, "CCLG") != 0) throw ConfigError("not a CCLG grid file");
  std::size_t pos = 4;
  if (detail::take<std::uint32_t>(in, pos) != 1) throw ConfigError("unsupported CCLG version");
  const auto nd = detail::take<std::uint32_t>(in, pos);
  if (nd == 0 || nd > 16) throw ConfigError("CCLG: bad dimension count");
  GridData g;
  for (std::uint32_t a = 0; a < nd; ++a) g.grid.dims.push_back(detail::take<std::int32_t>(in, pos));
  for (std::uint32_t a = 0; a < nd; ++a) g.grid.lo.push_back(detail::take<double>(in, pos));
  for (std::uint32_t a = 0; a < nd; ++a) g.grid.h.push_back(detail::take<double>(in, pos));
  for (std::uint32_t a = 0; a < nd; ++a) g.grid.periodic.push_back(detail::take<std::uint8_t>(in, pos) != 0);
  config_guard("CCLG header", [&] { g.grid.validate(); });
  g.components = detail::take<std::uint32_t>(in, pos);
  const std::size_t count = g.grid.size() * g.components;
  if (in.size() - pos != count * sizeof(double)) throw ConfigError("CCLG: payload size does not match the header");
  g.data.resize(count);
  std::memcpy(g.data.data(), in.data() + pos, count * sizeof(double));
  return g;
}

/// Symmetric tensor field as n(n+1)/2 upper-triangle components per node.
inline GridData tensor_grid(const Grid& grid, const std::vector<Eigen::MatrixXd>& T) {
  const int n = T.empty() ? 0 : static_cast<int>(T[0].rows());
  GridData g{grid, static_cast<std::size_t>(n * (n + 1) / 2), {}};
  g.data.reserve(T.size() * g.components);
  for (const auto& m : T)
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b) g.data.push_back(m(a, b));
  return g;
}

inline std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

/// Plane through axes 0 and 1 (or the single axis) with other indices at the middle node.
inline std::string csv_slice(const GridData& g, const std::vector<std::string>& names) {
  std::ostringstream s;
  const int nd = g.grid.ndim();
  s << "i,x";
  if (nd > 1) s << ",j,y";
  for (std::size_t c = 0; c < g.components; ++c) s << "," << (c < names.size() ? names[c] : "c" + std::to_string(c));
  s << "\n";
  std::vector<int> m(static_cast<std::size_t>(nd));
  for (int a = 2; a < nd; ++a) m[static_cast<std::size_t>(a)] = g.grid.dims[static_cast<std::size_t>(a)] / 2;
  const int nj = nd > 1 ? g.grid.dims[1] : 1;
  for (int i = 0; i < g.grid.dims[0]; ++i) {
    for (int j = 0; j < nj; ++j) {
      m[0] = i;
      if (nd > 1) m[1] = j;
      const auto x = g.grid.coord(m);
      const std::size_t idx = g.grid.ravel(m);
      s << i << "," << fmt(x[0]);
      if (nd > 1) s << "," << j << "," << fmt(x[1]);
      for (std::size_t c = 0; c < g.components; ++c) s << "," << fmt(g.data[idx * g.components + c]);
      s << "\n";
    }
  }
  return s.str();
}

inline ProblemConfig problem_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
  require_object(j, "problem");
  if (!j.contains("manifold")) throw ConfigError("problem: missing \"manifold\"");
  if (!j.contains("function")) throw ConfigError("problem: missing \"function\"");
  const auto M = manifold_from_json(j["manifold"]);
  std::optional<ConeSpec> cone;
  if (j.contains("cone")) cone = cone_from_json(j["cone"]);
  const auto f = function_from_json(j["function"], cone ? &*cone : nullptr);
  const double tau = get<double>(j, "tau", "problem");
  const double alpha = get_or<double>(j, "alpha", 1.0, "problem");
  if (alpha != 1.0 && alpha != -1.0) throw ConfigError("problem: alpha must be +1 or -1");

  ProblemConfig pc;
  pc.radial = M.kind == ModelManifold::Kind::RadialBall;
  if (!j.contains("psi")) throw ConfigError("problem: missing \"psi\"");
  const auto& ps = j["psi"];
  require_object(ps, "psi");
  const auto pkind = get<std::string>(ps, "kind", "psi");
  std::vector<double> psi;
  if (pkind == "constant") {
    psi.assign(M.grid.size(), get<double>(ps, "value", "psi"));
  } else if (pkind == "hyperbolic") {
    // lambda(-g~^{-1} A) = (1/2, ..., 1/2) for the hyperbolic metric
    auto P0 = config_guard("problem", [&] { return ProblemSpec::make(M, f, tau, alpha, std::vector<double>(M.grid.size(), 1.0)); });
    const std::vector<double> ones(static_cast<std::size_t>(M.n), 1.0);
    const double v = 0.5 * tilde_eval_grad(P0.op, ones).value / P0.c * get_or<double>(ps, "scale", 1.0, "psi");
    psi.assign(M.grid.size(), v);
  } else if (pkind == "manufactured") {
    if (pc.radial) throw ConfigError("psi: manufactured data is for closed problems");
    if (!ps.contains("solution")) throw ConfigError("psi: missing \"solution\"");
    pc.exact = solution_from_json(ps["solution"], M.n);
    const auto mode = get_or<std::string>(ps, "mode", "discrete", "psi");
    if (mode != "discrete" && mode != "analytic") throw ConfigError("psi: mode must be \"discrete\" or \"analytic\"");
    try {
      psi = manufactured_psi(M, f, tau, alpha, pc.exact, mode == "analytic");
    } catch (const PreconditionError& e) {
      throw ConfigError(std::string("psi: ") + e.what());
    }
  } else if (pkind == "grid_file") {
    auto path = std::filesystem::path(get<std::string>(ps, "path", "psi"));
    if (path.is_relative()) path = base_dir / path;
    const auto g = decode_grid(read_text(path));
    if (g.components != 1 || g.grid.dims != M.grid.dims) throw ConfigError("psi grid file does not match the manifold grid");
    psi = g.data;
  } else {
    throw ConfigError("unknown psi kind \"" + pkind + "\"");
  }
  pc.problem = config_guard("problem", [&] { return ProblemSpec::make(M, f, tau, alpha, std::move(psi)); });

  if (j.contains("solver")) {
    const auto& s = j["solver"];
    require_object(s, "solver");
    pc.solve.tol = get_or<double>(s, "tol", pc.solve.tol, "solver");
    pc.solve.max_iter = get_or<int>(s, "max_iter", pc.solve.max_iter, "solver");
    pc.solve.theta_bound = get_or<double>(s, "theta_bound", pc.solve.theta_bound, "solver");
    pc.radial_options.eps_schedule = get_or<std::vector<double>>(s, "eps_schedule", pc.radial_options.eps_schedule, "solver");
    pc.radial_options.tol = get_or<double>(s, "radial_tol", pc.radial_options.tol, "solver");
    pc.radial_options.boundary_shift = get_or<double>(s, "boundary_shift", 0.0, "solver");
    if (!(pc.solve.tol > 0.0) || pc.solve.max_iter < 0) throw ConfigError("solver: tol must be > 0 and max_iter >= 0");
  }

  if (!pc.radial) {
    if (!j.contains("initial")) throw ConfigError("problem: closed solves need an \"initial\" guess");
    const auto& ini = j["initial"];
    require_object(ini, "initial");
    const auto ik = get<std::string>(ini, "kind", "initial");
    if (ik == "constant") {
      pc.u0.assign(M.grid.size(), get<double>(ini, "value", "initial"));
    } else if (ik == "grid_file") {
      auto path = std::filesystem::path(get<std::string>(ini, "path", "initial"));
      if (path.is_relative()) path = base_dir / path;
      const auto g = decode_grid(read_text(path));
      if (g.components != 1 || g.grid.dims != M.grid.dims) throw ConfigError("initial grid file does not match the manifold grid");
      pc.u0 = g.data;
    } else {
      pc.u0 = sample_values(M.grid, solution_from_json(ini, M.n));
    }
    // inward bow along the closed axis, keeping boundary values
    const double bow = get_or<double>(ini, "bow", 0.0, "initial");
    if (bow != 0.0) {
      if (M.grid.periodic[0]) throw ConfigError("initial: \"bow\" needs a non-periodic first axis");
      for (std::size_t i = 0; i < pc.u0.size(); ++i) {
        const double x = M.grid.coord(i)[0];
        pc.u0[i] -= bow * x * (1.0 - x);
      }
    }
  }
  return pc;
}

// ---- artifacts ------------------------------------------------------------------

/// Serializes artifact writes into one directory and records their hashes.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& bytes) {
    if (!created_) {
      std::error_code ec;
      std::filesystem::create_directories(dir_, ec);
      if (ec) throw ConfigError("cannot create output directory " + dir_.string() + ": " + ec.message());
      created_ = true;
    }
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + (dir_ / name).string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    hashes_[name] = hex64(fnv1a(bytes));
  }
  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  const std::map<std::string, std::string>& hashes() const { return hashes_; }

  /// Hash over all artifact names and hashes, excluding the manifest itself.
  std::string combined_hash() const {
    std::uint64_t h = fnv1a("");
    for (const auto& [k, v] : hashes_) h = fnv1a(k + "=" + v + "\n", h);
    return hex64(h);
  }

  void write_manifest(const std::string& command, const std::string& input_hash, std::uint64_t seed, double wall_seconds,
                      const json& extra = json::object()) {
    json m;
    m["schema"] = kSchema;
    m["command"] = command;
    m["version"] = kVersion;
    m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
    m["input_hash"] = input_hash;
    m["seed"] = seed;
    m["wall_seconds"] = wall_seconds;
    m["artifacts"] = hashes_;
    m["artifacts_hash"] = combined_hash();
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
    const auto text = m.dump(2) + "\n";
    std::ofstream out(dir_ / "manifest.json", std::ios::binary);
    if (!out) throw ConfigError("cannot write manifest");
    out << text;
  }

 private:
  std::filesystem::path dir_;
  bool created_ = false;
  std::map<std::string, std::string> hashes_;
};

}  // namespace ccl::io
