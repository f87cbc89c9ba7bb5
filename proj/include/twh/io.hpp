#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "twh/homology.hpp"
#include "twh/model.hpp"
#include "twh/orbits.hpp"
#include "twh/stationary.hpp"
#include "twh/util.hpp"
#include "twh/version.hpp"

namespace twh {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// polynomial expressions in u: numbers, u, + - * ^, parentheses, implicit
// multiplication as in (u-0.3)*(1-u^2). Parsed into coefficient vectors.

namespace expr {

using Poly = std::vector<double>;

inline Poly add(const Poly& a, const Poly& b) {
  Poly r(std::max(a.size(), b.size()), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) r[i] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) r[i] += b[i];
  return r;
}
inline Poly negate(Poly a) {
  for (auto& c : a) c = -c;
  return a;
}
inline Poly mul(const Poly& a, const Poly& b) {
  if (a.empty() || b.empty()) return {};
  Poly r(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  Poly parse() {
    Poly p = expression();
    skip_ws();
    if (pos_ != s_.size()) throw ConfigError("expression: trailing input at '" + rest() + "'");
    return p;
  }

 private:
  std::string s_;
  std::size_t pos_ = 0;

  std::string rest() const { return s_.substr(pos_, 8); }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool peek(char c) {
    skip_ws();
    return pos_ < s_.size() && s_[pos_] == c;
  }
  bool accept(char c) {
    if (peek(c)) {
      ++pos_;
      return true;
    }
    return false;
  }

  Poly expression() {
    Poly p = accept('-') ? negate(term()) : term();
    for (;;) {
      if (accept('+'))
        p = add(p, term());
      else if (accept('-'))
        p = add(p, negate(term()));
      else
        return p;
    }
  }

  bool starts_factor() {
    skip_ws();
    if (pos_ >= s_.size()) return false;
    char c = s_[pos_];
    return c == '(' || c == 'u' || std::isdigit(static_cast<unsigned char>(c)) || c == '.';
  }

  Poly term() {
    Poly p = factor();
    for (;;) {
      if (accept('*')) {
        p = mul(p, factor());
      } else if (starts_factor()) {
        p = mul(p, factor());  // implicit multiplication
      } else {
        return p;
      }
    }
  }

  Poly factor() {
    Poly base = primary();
    if (accept('^')) {
      skip_ws();
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (start == pos_) throw ConfigError("expression: integer exponent expected");
      int e = std::stoi(s_.substr(start, pos_ - start));
      Poly r = {1.0};
      for (int i = 0; i < e; ++i) r = mul(r, base);
      return r;
    }
    return base;
  }

  Poly primary() {
    skip_ws();
    if (accept('(')) {
      Poly p = expression();
      if (!accept(')')) throw ConfigError("expression: missing ')'");
      return p;
    }
    if (pos_ < s_.size() && s_[pos_] == 'u') {
      ++pos_;
      return {0.0, 1.0};
    }
    std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
            s_[pos_] == 'e' || s_[pos_] == 'E' ||
            ((s_[pos_] == '+' || s_[pos_] == '-') && pos_ > start &&
             (s_[pos_ - 1] == 'e' || s_[pos_ - 1] == 'E'))))
      ++pos_;
    if (start == pos_) throw ConfigError("expression: unexpected character at '" + rest() + "'");
    return {std::stod(s_.substr(start, pos_ - start))};
  }
};

inline Poly parse(const std::string& text) { return Parser(text).parse(); }

}  // namespace expr

// ---------------------------------------------------------------------------
// config schema

namespace detail {

inline void require_keys(const json& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, val] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_required(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": key '" + key + "' has the wrong type");
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": key '" + key + "' has the wrong type");
  }
}

}  // namespace detail

inline SpatialProblem problem_from_json(const json& j) {
  detail::require_keys(j, {"schema_version", "domain", "nonlinearity", "wave_speed"}, "problem");
  int version = detail::get_required<int>(j, "schema_version", "problem");
  if (version != 1) throw ConfigError("problem: unsupported schema_version");

  SpatialProblem prob;
  const json& dom = j.at("domain");
  detail::require_keys(dom, {"kind", "a", "b", "length", "n", "boundary"}, "problem.domain");
  std::string kind = detail::get_required<std::string>(dom, "kind", "problem.domain");
  if (kind == "point") {
    prob.domain.kind = DomainKind::Point;
    prob.domain.n = 0;
  } else if (kind == "interval") {
    prob.domain.kind = DomainKind::Interval;
    prob.domain.a = detail::get_required<double>(dom, "a", "problem.domain");
    prob.domain.b = detail::get_required<double>(dom, "b", "problem.domain");
    prob.domain.n = detail::get_required<int>(dom, "n", "problem.domain");
  } else if (kind == "circle") {
    prob.domain.kind = DomainKind::Circle;
    prob.domain.length = detail::get_required<double>(dom, "length", "problem.domain");
    prob.domain.n = detail::get_required<int>(dom, "n", "problem.domain");
  } else {
    throw ConfigError("problem.domain: kind must be point, interval, or circle");
  }
  if (kind != "point") {
    std::string bc = detail::get_or<std::string>(dom, "boundary",
                                                 kind == "circle" ? "periodic" : "dirichlet",
                                                 "problem.domain");
    if (bc == "dirichlet") prob.domain.boundary = Boundary::Dirichlet;
    else if (bc == "neumann") prob.domain.boundary = Boundary::Neumann;
    else if (bc == "periodic") prob.domain.boundary = Boundary::Periodic;
    else throw ConfigError("problem.domain: unknown boundary '" + bc + "'");
  }

  const json& nl = j.at("nonlinearity");
  detail::require_keys(nl, {"family", "p", "alpha", "h_coeffs", "h_expression", "poly_coeffs",
                            "expression"},
                       "problem.nonlinearity");
  std::string family = detail::get_required<std::string>(nl, "family", "problem.nonlinearity");
  if (family == "odd_minus") prob.nonlinearity.family = Family::OddMinus;
  else if (family == "odd_plus") prob.nonlinearity.family = Family::OddPlus;
  else if (family == "even_minus") prob.nonlinearity.family = Family::EvenMinus;
  else if (family == "even_plus") prob.nonlinearity.family = Family::EvenPlus;
  else if (family == "custom") prob.nonlinearity.family = Family::Custom;
  else throw ConfigError("problem.nonlinearity: unknown family '" + family + "'");

  prob.nonlinearity.p = detail::get_or<double>(nl, "p", 3.0, "problem.nonlinearity");
  double alpha = detail::get_or<double>(nl, "alpha", 1.0, "problem.nonlinearity");
  if (!(alpha > 0.0)) throw ConfigError("problem.nonlinearity: alpha must be positive");
  if (alpha != 1.0) prob.nonlinearity.alpha = [alpha](double) { return alpha; };

  if (prob.nonlinearity.family == Family::Custom) {
    if (nl.contains("poly_coeffs"))
      prob.nonlinearity.poly_coeffs =
          detail::get_required<std::vector<double>>(nl, "poly_coeffs", "problem.nonlinearity");
    else if (nl.contains("expression"))
      prob.nonlinearity.poly_coeffs =
          expr::parse(detail::get_required<std::string>(nl, "expression", "problem.nonlinearity"));
    else
      throw ConfigError("problem.nonlinearity: custom family needs poly_coeffs or expression");
  } else {
    if (nl.contains("h_coeffs"))
      prob.nonlinearity.h_coeffs =
          detail::get_required<std::vector<double>>(nl, "h_coeffs", "problem.nonlinearity");
    else if (nl.contains("h_expression"))
      prob.nonlinearity.h_coeffs = expr::parse(
          detail::get_required<std::string>(nl, "h_expression", "problem.nonlinearity"));
  }

  prob.wave_speed = detail::get_required<double>(j, "wave_speed", "problem");
  prob.build();
  return prob;
}

struct Tolerances {
  double newton = 1e-10;
  double ode_abs = 1e-9;
  double ode_rel = 1e-9;
  double bvp = 1e-9;

  void scale(double factor) {
    newton *= factor;
    ode_abs *= factor;
    ode_rel *= factor;
    bvp *= factor;
  }
};

struct HomotopyConfig {
  std::string kind;  // "wave_speed", "alpha", "linear_f"
  double c_from = 0.0, c_to = 0.0;
  double alpha_from = 1.0, alpha_to = 1.0;
  double ell = 4.0;
  json f_to;  // nonlinearity block for linear_f
};

// Experiment configuration: problem reference plus per-stage knobs.
struct ExperimentConfig {
  json raw;
  SpatialProblem problem;
  json problem_json;
  Tolerances tol;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  int galerkin_modes = 16;
  bool allow_uncertified = false;
  IsolatingSet isolating_set;
  double validation_range = 10.0;
  int validation_samples = 801;
  SearchStrategy strategy;
  int orbit_multistarts = 6;
  double orbit_T = 0.0;
  std::optional<HomotopyConfig> homotopy;
};

inline ExperimentConfig load_config(const fs::path& path, double tol_scale = 1.0,
                                    std::optional<std::uint64_t> seed_override = {},
                                    unsigned threads = 1) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  detail::require_keys(j,
                       {"schema_version", "problem", "problem_file", "tolerances", "seed",
                        "galerkin_modes", "allow_uncertified", "isolating_set", "validation",
                        "strategy", "search", "homotopy"},
                       "config");
  int version = detail::get_required<int>(j, "schema_version", "config");
  if (version != 1) throw ConfigError("config: unsupported schema_version");

  ExperimentConfig cfg;
  cfg.raw = j;
  cfg.threads = threads;

  if (j.contains("problem_file")) {
    fs::path pf = j.at("problem_file").get<std::string>();
    if (pf.is_relative()) pf = path.parent_path() / pf;
    std::ifstream pin(pf);
    if (!pin) throw ConfigError("cannot open problem file " + pf.string());
    try {
      cfg.problem_json = json::parse(pin);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("problem file is not valid JSON: ") + e.what());
    }
  } else if (j.contains("problem")) {
    cfg.problem_json = j.at("problem");
  } else {
    throw ConfigError("config: needs either 'problem' or 'problem_file'");
  }
  cfg.problem = problem_from_json(cfg.problem_json);

  if (j.contains("tolerances")) {
    const json& t = j.at("tolerances");
    detail::require_keys(t, {"newton", "ode_abs", "ode_rel", "bvp"}, "config.tolerances");
    cfg.tol.newton = detail::get_or<double>(t, "newton", cfg.tol.newton, "config.tolerances");
    cfg.tol.ode_abs = detail::get_or<double>(t, "ode_abs", cfg.tol.ode_abs, "config.tolerances");
    cfg.tol.ode_rel = detail::get_or<double>(t, "ode_rel", cfg.tol.ode_rel, "config.tolerances");
    cfg.tol.bvp = detail::get_or<double>(t, "bvp", cfg.tol.bvp, "config.tolerances");
  }
  cfg.tol.scale(tol_scale);

  cfg.seed = detail::get_or<std::uint64_t>(j, "seed", 1, "config");
  if (seed_override) cfg.seed = *seed_override;
  cfg.galerkin_modes = detail::get_or<int>(j, "galerkin_modes", 16, "config");
  cfg.allow_uncertified = detail::get_or<bool>(j, "allow_uncertified", false, "config");

  if (j.contains("isolating_set")) {
    const json& s = j.at("isolating_set");
    detail::require_keys(s, {"kind", "level"}, "config.isolating_set");
    std::string kind = detail::get_required<std::string>(s, "kind", "config.isolating_set");
    if (kind == "whole") {
      cfg.isolating_set.kind = IsolatingSet::Kind::WholeSpace;
    } else if (kind == "sublevel") {
      cfg.isolating_set.kind = IsolatingSet::Kind::EnergySublevel;
      cfg.isolating_set.level =
          detail::get_required<double>(s, "level", "config.isolating_set");
    } else {
      throw ConfigError("config.isolating_set: kind must be whole or sublevel");
    }
  }

  if (j.contains("validation")) {
    const json& v = j.at("validation");
    detail::require_keys(v, {"u_range", "samples"}, "config.validation");
    cfg.validation_range = detail::get_or<double>(v, "u_range", 10.0, "config.validation");
    cfg.validation_samples = detail::get_or<int>(v, "samples", 801, "config.validation");
  }

  cfg.strategy.seed = cfg.seed;
  cfg.strategy.threads = threads;
  if (j.contains("strategy")) {
    const json& s = j.at("strategy");
    detail::require_keys(s, {"modes", "amplitudes", "random_count", "random_amplitude", "deflation"},
                         "config.strategy");
    cfg.strategy.modes = detail::get_or<int>(s, "modes", cfg.strategy.modes, "config.strategy");
    cfg.strategy.mode_amplitudes = detail::get_or<std::vector<double>>(
        s, "amplitudes", cfg.strategy.mode_amplitudes, "config.strategy");
    cfg.strategy.random_count =
        detail::get_or<int>(s, "random_count", cfg.strategy.random_count, "config.strategy");
    cfg.strategy.random_amplitude = detail::get_or<double>(
        s, "random_amplitude", cfg.strategy.random_amplitude, "config.strategy");
    cfg.strategy.deflation =
        detail::get_or<bool>(s, "deflation", cfg.strategy.deflation, "config.strategy");
  }

  if (j.contains("search")) {
    const json& s = j.at("search");
    detail::require_keys(s, {"multistarts", "T"}, "config.search");
    cfg.orbit_multistarts = detail::get_or<int>(s, "multistarts", 6, "config.search");
    cfg.orbit_T = detail::get_or<double>(s, "T", 0.0, "config.search");
  }

  if (j.contains("homotopy")) {
    const json& h = j.at("homotopy");
    detail::require_keys(h, {"kind", "c_from", "c_to", "alpha_from", "alpha_to", "ell", "f_to"},
                         "config.homotopy");
    HomotopyConfig hc;
    hc.kind = detail::get_required<std::string>(h, "kind", "config.homotopy");
    hc.c_from = detail::get_or<double>(h, "c_from", cfg.problem.wave_speed, "config.homotopy");
    hc.c_to = detail::get_or<double>(h, "c_to", cfg.problem.wave_speed, "config.homotopy");
    hc.alpha_from = detail::get_or<double>(h, "alpha_from", 1.0, "config.homotopy");
    hc.alpha_to = detail::get_or<double>(h, "alpha_to", 1.0, "config.homotopy");
    hc.ell = detail::get_or<double>(h, "ell", 4.0, "config.homotopy");
    if (h.contains("f_to")) hc.f_to = h.at("f_to");
    if (hc.kind != "wave_speed" && hc.kind != "alpha" && hc.kind != "linear_f")
      throw ConfigError("config.homotopy: kind must be wave_speed, alpha, or linear_f");
    cfg.homotopy = hc;
  }

  return cfg;
}

inline HomotopyPath homotopy_from_config(const ExperimentConfig& cfg) {
  if (!cfg.homotopy) throw ConfigError("config has no homotopy block");
  const auto& hc = *cfg.homotopy;
  HomotopyPath path;
  path.base = cfg.problem;
  path.ell = hc.ell;
  if (hc.kind == "wave_speed") {
    path.kind = HomotopyPath::Kind::WaveSpeed;
    path.c_from = hc.c_from;
    path.c_to = hc.c_to;
    path.base.wave_speed = hc.c_from;
    path.base.build();
  } else if (hc.kind == "alpha") {
    path.kind = HomotopyPath::Kind::AlphaScale;
    path.alpha_from = hc.alpha_from;
    path.alpha_to = hc.alpha_to;
  } else {
    path.kind = HomotopyPath::Kind::LinearF;
    json pj;
    pj["schema_version"] = 1;
    pj["domain"] = cfg.problem_json.at("domain");
    pj["nonlinearity"] = hc.f_to;
    pj["wave_speed"] = cfg.problem.wave_speed;
    path.f_to = problem_from_json(pj).nonlinearity;
  }
  return path;
}

// ---------------------------------------------------------------------------
// number formatting: shortest round-trip representation, deterministic

inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// result files

inline void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NumericError("cannot write " + path.string());
  out << text;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PipelineOrderError("missing prerequisite file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json stationary_to_json(const std::vector<StationaryPoint>& points,
                               const HypothesisReport& hyp, bool bound_ok, double volume) {
  json out;
  out["schema_version"] = 1;
  out["artifact_version"] = kVersion;
  out["count"] = points.size();
  out["volume"] = volume;
  out["energy_bound_ok"] = bound_ok;
  json pts = json::array();
  for (const auto& p : points) {
    json q;
    q["id"] = p.id;
    q["morse_index"] = p.morse_index;
    q["hyperbolic"] = p.hyperbolic;
    q["spectral_gap"] = p.spectral_gap;
    q["energy"] = p.energy;
    q["residual_norm"] = p.residual_norm;
    q["z"] = std::vector<double>(p.z.data(), p.z.data() + p.z.size());
    pts.push_back(q);
  }
  out["points"] = pts;
  json h;
  h["f1_pass"] = hyp.f1_pass;
  h["C_f"] = hyp.C_f;
  h["p"] = hyp.p_used;
  h["f2_pass"] = hyp.f2_pass;
  h["f2_variant"] = hyp.f2_variant_even ? "f2'" : "f2";
  h["theta"] = hyp.theta;
  h["C_f_prime"] = hyp.C_f_prime;
  h["f3_pass"] = hyp.f3_pass;
  h["f3_liminf"] = hyp.f3_liminf;
  h["u_range"] = {hyp.u_min, hyp.u_max};
  h["samples"] = hyp.samples;
  out["hypotheses"] = h;
  return out;
}

inline std::vector<StationaryPoint> stationary_from_json(const json& j, const SpatialProblem& prob) {
  std::vector<StationaryPoint> points;
  for (const auto& q : j.at("points")) {
    StationaryPoint p;
    p.id = q.at("id").get<std::string>();
    p.morse_index = q.at("morse_index").get<int>();
    p.hyperbolic = q.at("hyperbolic").get<bool>();
    p.spectral_gap = q.at("spectral_gap").get<double>();
    p.energy = q.at("energy").get<double>();
    p.residual_norm = q.at("residual_norm").get<double>();
    auto z = q.at("z").get<std::vector<double>>();
    p.z = Eigen::Map<const Vector>(z.data(), z.size());
    if (p.z.size() != prob.dim())
      throw ConfigError("stationary result does not match the problem grid");
    points.push_back(p);
  }
  return points;
}

inline std::string profiles_csv(const std::vector<StationaryPoint>& points,
                                const SpatialProblem& prob) {
  std::ostringstream out;
  out << "id,x,z\n";
  for (const auto& p : points)
    for (int i = 0; i < p.z.size(); ++i)
      out << p.id << "," << format_double(prob.lap().nodes[i]) << "," << format_double(p.z[i])
          << "\n";
  return out.str();
}

// trajectory CSV: full grid columns, possibly row-thinned for bulk
inline std::string trajectory_csv(const Trajectory& traj, const FlowSystem& sys,
                                  std::size_t max_rows = 2000) {
  std::ostringstream out;
  int n = sys.problem().dim();
  out << "t";
  for (int i = 1; i <= n; ++i) out << ",u" << i;
  for (int i = 1; i <= n; ++i) out << ",v" << i;
  out << ",E\n";
  std::size_t stride = std::max<std::size_t>(1, traj.size() / max_rows);
  for (std::size_t k = 0; k < traj.size(); k += stride) {
    out << format_double(traj.t[k]);
    Vector u = sys.u_grid(traj.y[k]);
    Vector v = sys.v_grid(traj.y[k]);
    for (int i = 0; i < n; ++i) out << "," << format_double(u[i]);
    for (int i = 0; i < n; ++i) out << "," << format_double(v[i]);
    out << "," << format_double(traj.E[k]) << "\n";
  }
  return out.str();
}

// binary cache: full-resolution mode states for re-analysis
inline std::string trajectory_cache_bytes(const Trajectory& traj) {
  std::string out;
  out.append("TWHTRJ01", 8);
  std::uint64_t rows = traj.size();
  std::uint64_t dim = rows ? static_cast<std::uint64_t>(traj.y[0].size()) : 0;
  out.append(reinterpret_cast<const char*>(&rows), 8);
  out.append(reinterpret_cast<const char*>(&dim), 8);
  for (std::size_t k = 0; k < rows; ++k) {
    out.append(reinterpret_cast<const char*>(&traj.t[k]), 8);
    out.append(reinterpret_cast<const char*>(traj.y[k].data()), 8 * dim);
    out.append(reinterpret_cast<const char*>(&traj.E[k]), 8);
  }
  return out;
}

inline Trajectory read_trajectory_cache(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PipelineOrderError("missing trajectory cache " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (std::string(magic, 8) != "TWHTRJ01")
    throw ConfigError("trajectory cache " + path.string() + " has an unknown version tag");
  std::uint64_t rows = 0, dim = 0;
  in.read(reinterpret_cast<char*>(&rows), 8);
  in.read(reinterpret_cast<char*>(&dim), 8);
  Trajectory traj;
  for (std::uint64_t k = 0; k < rows; ++k) {
    double t, e;
    Vector y(dim);
    in.read(reinterpret_cast<char*>(&t), 8);
    in.read(reinterpret_cast<char*>(y.data()), 8 * dim);
    in.read(reinterpret_cast<char*>(&e), 8);
    if (!in) throw ConfigError("trajectory cache " + path.string() + " is truncated");
    traj.t.push_back(t);
    traj.y.push_back(y);
    traj.E.push_back(e);
  }
  return traj;
}

inline json orbits_to_json(const OrbitSearchReport& report, const OrbitCount& counts) {
  json out;
  out["schema_version"] = 1;
  out["artifact_version"] = kVersion;
  out["certified"] = report.certified() && counts.certified;
  out["undecided"] = report.undecided;
  out["misses"] = report.misses;
  out["transversality_warning"] = report.transversality_warning;
  json orbs = json::array();
  for (const auto& o : report.orbits) {
    json q;
    q["id"] = o.id;
    q["source"] = o.source_id;
    q["target"] = o.target_id;
    q["relative_index"] = o.relative_index;
    q["energy_drop"] = o.energy_drop;
    q["gamma_minus"] = o.gamma_minus;
    q["gamma_plus"] = o.gamma_plus;
    q["predicted_gamma_minus"] = o.predicted_gamma_minus;
    q["predicted_gamma_plus"] = o.predicted_gamma_plus;
    q["certified"] = o.certified;
    q["trajectory_csv"] = "traj_" + o.id + ".csv";
    q["trajectory_cache"] = "traj_" + o.id + ".bin";
    if (!o.notes.empty()) q["notes"] = o.notes;
    orbs.push_back(q);
  }
  out["orbits"] = orbs;
  json cj;
  cj["certified"] = counts.certified;
  cj["set"] = counts.set.kind == IsolatingSet::Kind::WholeSpace
                  ? json{{"kind", "whole"}}
                  : json{{"kind", "sublevel"}, {"level", counts.set.level}};
  json pairs = json::array();
  for (const auto& pc : counts.pairs) {
    json q;
    q["source"] = pc.source;
    q["target"] = pc.target;
    q["raw"] = pc.raw;
    q["mod2"] = pc.mod2;
    q["orbits"] = pc.orbit_ids;
    pairs.push_back(q);
  }
  cj["pairs"] = pairs;
  out["counts"] = cj;
  return out;
}

inline std::string connection_matrix_csv(const OrbitCount& counts,
                                         const std::vector<StationaryPoint>& points) {
  std::ostringstream out;
  out << "i(X,Y)";
  for (const auto& q : points) out << "," << q.id;
  out << "\n";
  for (const auto& p : points) {
    out << p.id;
    for (const auto& q : points) out << "," << counts.mod2(p.id, q.id);
    out << "\n";
  }
  return out.str();
}

inline json homology_to_json(const ChainComplex& cx, const HomologyResult& h,
                             const DSquaredReport& d2, std::optional<int> expected,
                             const ForcingReport& forcing, bool direct_sum_ok) {
  json out;
  out["schema_version"] = 1;
  out["artifact_version"] = kVersion;
  out["certified"] = cx.certified;
  json grades = json::object();
  for (const auto& [k, ids] : cx.grades) grades[std::to_string(k)] = ids;
  out["grades"] = grades;
  json bounds = json::object();
  for (const auto& [k, d] : cx.boundaries) {
    json rows = json::array();
    for (std::size_t i = 0; i < d.rows(); ++i) {
      std::vector<int> row(d.cols());
      for (std::size_t j = 0; j < d.cols(); ++j) row[j] = d.get(i, j) ? 1 : 0;
      rows.push_back(row);
    }
    bounds[std::to_string(k)] = rows;
  }
  out["boundaries"] = bounds;
  out["d_squared_ok"] = d2.ok;
  if (!d2.ok) {
    out["d_squared_witness"] = {{"grade", d2.failing_grade},
                                {"from", d2.generator_from},
                                {"to", d2.generator_to}};
  }
  json ranks = json::object();
  for (const auto& [k, r] : h.rank) ranks[std::to_string(k)] = r;
  out["ranks"] = ranks;
  out["total_rank"] = h.total_rank;
  json reps = json::object();
  for (const auto& [k, rlist] : h.representatives) reps[std::to_string(k)] = rlist;
  out["representatives"] = reps;
  if (expected) {
    out["expected_total_rank"] = *expected;
    out["matches_expected"] = (*expected == h.total_rank);
  }
  out["direct_sum_ok"] = direct_sum_ok;
  json fj;
  fj["k_guaranteed"] = forcing.k_guaranteed;
  fj["waves_found"] = forcing.waves_found;
  fj["consistent"] = forcing.consistent;
  fj["vacuous"] = forcing.vacuous;
  fj["endpoints"] = forcing.endpoints;
  fj["uncovered"] = forcing.uncovered;
  fj["allowed_exceptions"] = forcing.allowed_exceptions;
  out["forcing"] = fj;
  return out;
}

inline std::string homology_summary_text(const json& hj) {
  std::ostringstream out;
  if (!hj.at("certified").get<bool>())
    out << "*** UNCERTIFIED: orbit counts carry unresolved warnings ***\n";
  out << "travelling-wave homology over Z2\n";
  out << "grades:\n";
  for (const auto& [k, ids] : hj.at("grades").items()) {
    out << "  grade " << k << ": ";
    for (const auto& id : ids) out << id.get<std::string>() << " ";
    out << "\n";
  }
  out << "ranks:";
  for (const auto& [k, r] : hj.at("ranks").items()) out << " H_" << k << "=" << r.dump();
  out << "\ntotal rank: " << hj.at("total_rank").dump() << "\n";
  out << "d^2 = 0: " << (hj.at("d_squared_ok").get<bool>() ? "verified" : "FAILED") << "\n";
  if (hj.contains("matches_expected"))
    out << "family prediction: " << (hj.at("matches_expected").get<bool>() ? "matched" : "MISMATCH")
        << "\n";
  out << "direct sum check: " << (hj.at("direct_sum_ok").get<bool>() ? "passed" : "FAILED") << "\n";
  const auto& f = hj.at("forcing");
  if (f.at("vacuous").get<bool>()) {
    out << "forcing: vacuous (too few hyperbolic generators)\n";
  } else {
    out << "forcing: >= " << f.at("k_guaranteed").dump() << " waves guaranteed, "
        << f.at("waves_found").dump() << " found, "
        << (f.at("consistent").get<bool>() ? "consistent" : "INCONSISTENT") << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// run manifest

class RunManifest {
 public:
  RunManifest(fs::path dir, std::string config_hash) : dir_(std::move(dir)) {
    path_ = dir_ / "manifest.json";
    if (fs::exists(path_)) {
      try {
        data_ = json::parse(read_text(path_));
      } catch (...) {
        data_ = json::object();
      }
    }
    data_["schema_version"] = 1;
    data_["artifact_version"] = kVersion;
    data_["config_hash"] = config_hash;
    if (!data_.contains("stages")) data_["stages"] = json::object();
    if (!data_.contains("files")) data_["files"] = json::object();
  }

  // Register a result file: content hash goes into the inventory.
  void add_file(const fs::path& rel, const std::string& content) {
    data_["files"][rel.string()] = fnv1a_hex(content);
  }

  void add_stage(const std::string& name, double duration_ms, bool certified) {
    data_["stages"][name] = {{"duration_ms", duration_ms}, {"certified", certified}};
  }

  void write() { write_text(path_, data_.dump(2) + "\n"); }

  const json& data() const { return data_; }

 private:
  fs::path dir_, path_;
  json data_;
};

// write + register in one step
inline void emit(RunManifest& manifest, const fs::path& dir, const std::string& rel,
                 const std::string& content) {
  write_text(dir / rel, content);
  manifest.add_file(rel, content);
}

}  // namespace twh
