#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "twh/bvp.hpp"
#include "twh/flow.hpp"
#include "twh/model.hpp"
#include "twh/stationary.hpp"

namespace twh {

// A connecting orbit between two rest points, sampled in forward time.
struct HeteroclinicOrbit {
  std::string id;
  std::string source_id, target_id;
  Trajectory trajectory;
  int relative_index = 0;
  double gamma_minus = 0.0, gamma_plus = 0.0;            // fitted tail rates
  double predicted_gamma_minus = 0.0, predicted_gamma_plus = 0.0;
  double energy_drop = 0.0;
  bool certified = true;
  std::string notes;
};

struct OrbitSearchReport {
  std::vector<HeteroclinicOrbit> orbits;
  int undecided = 0;            // trajectories that neither converged nor escaped
  int misses = 0;               // collocation runs that failed to converge
  bool transversality_warning = false;
  bool certified() const { return undecided == 0 && misses == 0 && !transversality_warning; }
};

struct IsolatingSet {
  enum class Kind { WholeSpace, EnergySublevel };
  Kind kind = Kind::WholeSpace;
  double level = 0.0;

  bool admits_energy(double e) const {
    return kind == Kind::WholeSpace || e <= level;
  }
};

struct PairCount {
  std::string source, target;
  int raw = 0;
  int mod2 = 0;
  std::vector<std::string> orbit_ids;
};

struct OrbitCount {
  std::vector<PairCount> pairs;
  IsolatingSet set;
  bool certified = true;

  int mod2(const std::string& s, const std::string& t) const {
    for (const auto& p : pairs)
      if (p.source == s && p.target == t) return p.mod2;
    return 0;
  }
};

namespace detail {

// Symmetric Hausdorff distance between two sampled curves in phase space;
// orbits equal up to time shift trace the same point set.
inline double hausdorff_distance(const std::vector<Vector>& A, const std::vector<Vector>& B,
                                 std::size_t cap = 600) {
  auto thin = [&](const std::vector<Vector>& S) {
    std::vector<const Vector*> out;
    std::size_t stride = std::max<std::size_t>(1, S.size() / cap);
    for (std::size_t i = 0; i < S.size(); i += stride) out.push_back(&S[i]);
    out.push_back(&S.back());
    return out;
  };
  auto a = thin(A), b = thin(B);
  double worst = 0.0;
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto* p : a) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto* q : b) best = std::min(best, (*p - *q).norm());
      worst = std::max(worst, best);
    }
    std::swap(a, b);
  }
  return worst;
}

inline Trajectory reversed(const Trajectory& traj) {
  Trajectory out;
  out.atol = traj.atol;
  out.rtol = traj.rtol;
  out.scheme = traj.scheme;
  for (std::size_t k = traj.size(); k-- > 0;) {
    out.t.push_back(traj.t[k]);
    out.y.push_back(traj.y[k]);
    out.E.push_back(traj.E[k]);
  }
  return out;
}

// Least-squares slope of log||U(t) - Z|| over the samples whose distance lies
// in [lo, hi]; returns the decay rate (positive for approach).
inline std::optional<double> fit_tail_rate(const Trajectory& traj, const Vector& rest, bool at_end,
                                           double lo, double hi, int min_samples) {
  std::vector<double> ts, ls;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    double d = (traj.y[k] - rest).norm();
    if (d >= lo && d <= hi) {
      ts.push_back(traj.t[k]);
      ls.push_back(std::log(d));
    }
  }
  if (static_cast<int>(ts.size()) < min_samples) return std::nullopt;
  double n = double(ts.size());
  double st = 0, sl = 0, stt = 0, stl = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    st += ts[i];
    sl += ls[i];
    stt += ts[i] * ts[i];
    stl += ts[i] * ls[i];
  }
  double denom = n * stt - st * st;
  if (std::abs(denom) < 1e-30) return std::nullopt;
  double slope = (n * stl - st * sl) / denom;
  // approach at the orbit end has negative slope; departure at the start positive
  return at_end ? -slope : slope;
}

}  // namespace detail

struct TailFitOptions {
  double lo = 1e-5;
  double hi = 1e-2;
  int min_samples = 20;
};

// Fitted and predicted tail decay rates for an orbit. gamma_plus is the decay
// onto the target, gamma_minus the (backward) decay onto the source.
inline void tail_rate(const FlowSystem& sys, HeteroclinicOrbit& orbit, const Vector& y_source,
                      const Vector& y_target, const TailFitOptions& opt = {}) {
  auto gp = detail::fit_tail_rate(orbit.trajectory, y_target, true, opt.lo, opt.hi, opt.min_samples);
  auto gm = detail::fit_tail_rate(orbit.trajectory, y_source, false, opt.lo, opt.hi, opt.min_samples);
  if (!gp || !gm) throw NumericError("tail_rate: tail has too few samples inside the fit window");
  orbit.gamma_plus = *gp;
  orbit.gamma_minus = *gm;

  auto spec_t = rest_point_spectrum(sys, y_target);
  double pred_p = std::numeric_limits<double>::infinity();
  for (const auto& lam : spec_t.dense)
    if (lam.real() < 0.0) pred_p = std::min(pred_p, -lam.real());
  auto spec_s = rest_point_spectrum(sys, y_source);
  double pred_m = std::numeric_limits<double>::infinity();
  for (const auto& lam : spec_s.dense)
    if (lam.real() > 0.0) pred_m = std::min(pred_m, lam.real());
  orbit.predicted_gamma_plus = pred_p;
  orbit.predicted_gamma_minus = pred_m;
}

struct PlanarSearchOptions {
  double offset = 1e-6;          // eigenvector offset from the saddle
  double t_max = 1e3;
  double basin_tol = 1e-5;
  double settle_tol = 1e-7;
  IntegratorOptions integrator;  // escape_radius auto-scaled if <= 0
};

// Heteroclinic search on the planar (point-domain) system: integrate the
// one-dimensional invariant-manifold branches of every saddle and classify
// their limits against the rest-point list.
inline OrbitSearchReport find_heteroclinics_planar(const SpatialProblem& prob,
                                                   const std::vector<StationaryPoint>& points,
                                                   const PlanarSearchOptions& opt = {}) {
  if (prob.domain.kind != DomainKind::Point)
    throw ConfigError("find_heteroclinics_planar: point domain only");
  for (const auto& p : points)
    if (!p.hyperbolic)
      throw NonHyperbolicError("find_heteroclinics_planar: non-hyperbolic rest point " + p.id);

  FlowSystem sys(prob);
  OrbitSearchReport report;

  std::vector<Vector> rest_states;
  double scale = 1.0;
  for (const auto& p : points) {
    Vector y(2);
    y << p.z[0], 0.0;
    rest_states.push_back(y);
    scale = std::max(scale, std::abs(p.z[0]));
  }

  IntegratorOptions iopt = opt.integrator;
  if (iopt.escape_radius <= 0.0) iopt.escape_radius = 60.0;
  iopt.escape_radius = std::max(iopt.escape_radius, 20.0 * scale);
  iopt.rest_points = &rest_states;
  iopt.settle_tol = opt.settle_tol;

  auto classify = [&](const Vector& y) -> int {
    int best = -1;
    double bd = opt.basin_tol;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double d = (y - rest_states[i]).norm();
      if (d < bd) {
        bd = d;
        best = static_cast<int>(i);
      }
    }
    return best;
  };

  std::vector<HeteroclinicOrbit> found;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& saddle = points[i];
    auto split = invariant_splitting(sys, rest_states[i]);
    // branch integration only makes sense for one-dimensional manifolds
    if (split.stable.cols() == 1) {
      for (double sgn : {+1.0, -1.0}) {
        Vector y0 = rest_states[i] + sgn * opt.offset * split.stable.col(0).normalized();
        auto traj = integrate(sys, y0, 0.0, -opt.t_max, iopt);
        if (traj.escaped) continue;
        int hit = traj.settled ? classify(traj.y.back()) : -1;
        if (hit < 0) {
          ++report.undecided;
          continue;
        }
        if (hit == static_cast<int>(i)) continue;  // homoclinic loops are not counted
        HeteroclinicOrbit orb;
        orb.source_id = points[hit].id;
        orb.target_id = saddle.id;
        orb.trajectory = detail::reversed(traj);
        orb.relative_index = points[hit].morse_index - saddle.morse_index;
        orb.energy_drop = points[hit].energy - saddle.energy;
        found.push_back(std::move(orb));
      }
    }
    if (split.unstable.cols() == 1) {
      for (double sgn : {+1.0, -1.0}) {
        Vector y0 = rest_states[i] + sgn * opt.offset * split.unstable.col(0).normalized();
        auto traj = integrate(sys, y0, 0.0, opt.t_max, iopt);
        if (traj.escaped) continue;
        int hit = traj.settled ? classify(traj.y.back()) : -1;
        if (hit < 0) {
          ++report.undecided;
          continue;
        }
        if (hit == static_cast<int>(i)) continue;
        HeteroclinicOrbit orb;
        orb.source_id = saddle.id;
        orb.target_id = points[hit].id;
        orb.trajectory = traj;
        orb.relative_index = saddle.morse_index - points[hit].morse_index;
        orb.energy_drop = saddle.energy - points[hit].energy;
        found.push_back(std::move(orb));
      }
    }
  }

  // dedup modulo time shift
  std::vector<HeteroclinicOrbit> unique;
  for (auto& orb : found) {
    bool dup = false;
    for (const auto& u : unique) {
      if (u.source_id == orb.source_id && u.target_id == orb.target_id &&
          detail::hausdorff_distance(u.trajectory.y, orb.trajectory.y) < 1e-4 * scale)
        dup = true;
    }
    if (!dup) unique.push_back(std::move(orb));
  }

  // invariants: accepted orbits decrease energy and never gain index
  std::map<std::string, Vector> rest_by_id;
  for (std::size_t i = 0; i < points.size(); ++i) rest_by_id[points[i].id] = rest_states[i];
  for (auto& orb : unique) {
    if (orb.energy_drop <= 0.0)
      throw NumericError("planar orbit with non-positive energy drop accepted");
    if (orb.relative_index < 1) {
      report.transversality_warning = true;
      orb.certified = false;
      orb.notes = "nonconstant orbit of relative index < 1 (degenerate configuration)";
    }
    tail_rate(sys, orb, rest_by_id[orb.source_id], rest_by_id[orb.target_id]);
  }

  std::sort(unique.begin(), unique.end(), [](const HeteroclinicOrbit& a, const HeteroclinicOrbit& b) {
    if (a.source_id != b.source_id) return a.source_id < b.source_id;
    if (a.target_id != b.target_id) return a.target_id < b.target_id;
    return a.trajectory.y.front()[0] < b.trajectory.y.front()[0];
  });
  for (std::size_t k = 0; k < unique.size(); ++k) unique[k].id = "O" + std::to_string(k);
  report.orbits = std::move(unique);
  return report;
}

struct GalerkinSearchOptions {
  double T = 0.0;                 // 0: choose from predicted tail rates
  int segments = 0;               // 0: choose from the stiffest exponent
  double bvp_tol = 1e-9;
  int multistarts = 6;
  double guess_tau = 2.0;
  double perturbation = 0.2;
  std::uint64_t seed = 12345;
  double integrator_tol = 1e-10;
  unsigned threads = 1;
  double dedup_tol = 1e-4;
};

namespace detail {

inline double max_unstable_rate(const FlowSystem& sys, const std::vector<Vector>& rests) {
  double worst = 1.0;
  for (const auto& y : rests) {
    auto spec = rest_point_spectrum(sys, y);
    for (const auto& lam : spec.dense) worst = std::max(worst, std::abs(lam.real()));
  }
  return worst;
}

inline double min_tail_rate(const FlowSystem& sys, const Vector& y_minus, const Vector& y_plus) {
  auto sm = rest_point_spectrum(sys, y_minus);
  auto sp = rest_point_spectrum(sys, y_plus);
  double gm = std::numeric_limits<double>::infinity();
  for (const auto& lam : sm.dense)
    if (lam.real() > 0.0) gm = std::min(gm, lam.real());
  double gp = std::numeric_limits<double>::infinity();
  for (const auto& lam : sp.dense)
    if (lam.real() < 0.0) gp = std::min(gp, -lam.real());
  return std::min(gm, gp);
}

// Assemble the orbit trajectory by re-integrating each shooting segment.
inline Trajectory assemble_trajectory(const FlowSystem& sys, const ShootingResult& sol,
                                      double tol) {
  Trajectory traj;
  for (std::size_t k = 0; k + 1 < sol.nodes.size(); ++k) {
    IntegratorOptions opt;
    opt.atol = opt.rtol = tol;
    opt.max_step = 0.05;
    opt.escape_radius = 1e6;
    auto piece = integrate(sys, sol.nodes[k], sol.knots[k], sol.knots[k + 1], opt);
    std::size_t start = traj.size() ? 1 : 0;
    for (std::size_t j = start; j < piece.size(); ++j) {
      traj.t.push_back(piece.t[j]);
      traj.y.push_back(piece.y[j]);
      traj.E.push_back(piece.E[j]);
    }
  }
  return traj;
}

}  // namespace detail

// Connecting orbits of the Galerkin system between index-difference-1 pairs,
// located by multiple shooting with projection boundary conditions and
// re-verified by segment re-integration at tighter tolerance.
inline OrbitSearchReport find_heteroclinics_galerkin(
    const SpatialProblem& prob, const std::vector<StationaryPoint>& points,
    const std::vector<std::pair<std::size_t, std::size_t>>& pair_list, int galerkin_modes,
    const GalerkinSearchOptions& opt = {}) {
  FlowSystem sys(prob, galerkin_modes);
  const int n = sys.dim();
  const int N = sys.modes();
  OrbitSearchReport report;

  std::vector<Vector> rest_states;
  for (const auto& p : points) rest_states.push_back(flow_rest_point(sys, p.z));

  std::vector<HeteroclinicOrbit> found;
  for (auto [is, it] : pair_list) {
    const auto& src = points[is];
    const auto& tgt = points[it];
    if (src.morse_index - tgt.morse_index != 1)
      throw ConfigError("find_heteroclinics_galerkin: pair (" + src.id + "," + tgt.id +
                        ") is not an index-1 pair");
    const Vector& Zm = rest_states[is];
    const Vector& Zp = rest_states[it];

    double gamma = detail::min_tail_rate(sys, Zm, Zp);
    double T = opt.T > 0.0 ? opt.T : std::min(120.0, std::ceil(18.5 / gamma) + 4.0);
    double lam_max = detail::max_unstable_rate(sys, {Zm, Zp});
    int segments = opt.segments > 0
                       ? opt.segments
                       : std::max(16, static_cast<int>(std::ceil(2.0 * T / std::min(0.75, 6.0 / lam_max))));
    segments += segments % 2;  // keep the phase anchor knot at t = 0

    auto split_m = invariant_splitting(sys, Zm);
    auto split_p = invariant_splitting(sys, Zp);

    ShootingProblem bvp;
    bvp.rhs = [&sys](double, const Vector& y) { return sys.rhs(y); };
    bvp.jac = [&sys](double, const Vector& y) { return sys.jacobian(y); };
    bvp.t0 = -T;
    bvp.t1 = T;
    bvp.dim = n;
    bvp.BL = orthogonal_complement_rows(split_m.unstable);
    bvp.bl = bvp.BL * Zm;
    bvp.BR = orthogonal_complement_rows(split_p.stable);
    bvp.br = bvp.BR * Zp;
    // anchor the time shift where the energy passes its midpoint level
    bvp.has_phase = true;
    double e_mid = 0.5 * (sys.energy_of(Zm) + sys.energy_of(Zp));
    bvp.phase_fn = [&sys, e_mid](const Vector& y) { return sys.energy_of(y) - e_mid; };
    bvp.phase_grad = [&sys](const Vector& y) { return sys.energy_gradient(y); };

    ShootingOptions sopt;
    sopt.segments = segments;
    sopt.tol = opt.bvp_tol;
    sopt.integrator_atol = sopt.integrator_rtol = opt.integrator_tol;
    sopt.max_step = 0.1;

    std::mt19937_64 rng(opt.seed + 977 * is + 31 * it);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);

    std::vector<HeteroclinicOrbit> pair_orbits;
    for (int ms = 0; ms < opt.multistarts; ++ms) {
      // smoothed step between the rest states, plus mode perturbations after
      // the first start
      double tau = opt.guess_tau * (1.0 + 0.5 * (ms % 3));
      std::vector<Vector> guess(segments + 1);
      for (int k = 0; k <= segments; ++k) {
        double t = -T + 2.0 * T * k / segments;
        double s = 0.5 * (1.0 + std::tanh(t / tau));
        double sd = 0.5 / (tau * std::cosh(t / tau) * std::cosh(t / tau));
        Vector y = Zm + s * (Zp - Zm);
        y.tail(N) += sd * (Zp - Zm).head(N);
        if (ms > 0) {
          double bump = std::exp(-t * t / (2.0 * tau * tau));
          for (int m = 0; m < std::min(3, N); ++m)
            y[m] += opt.perturbation * unif(rng) * bump;
        }
        guess[k] = y;
      }

      auto sol = solve_shooting(bvp, guess, sopt);
      if (sol.near_singular) report.transversality_warning = true;
      if (!sol.converged) {
        ++report.misses;
        continue;
      }

      // endpoint containment in the linear tail regime
      if ((sol.nodes.front() - Zm).norm() > 1e-4 || (sol.nodes.back() - Zp).norm() > 1e-4) {
        ++report.misses;
        continue;
      }

      // re-verification: re-integrate segments at tighter tolerance
      bool verified = true;
      for (int k = 0; k < segments && verified; k += std::max(1, segments / 12)) {
        auto seg = detail::propagate_with_stm(bvp.rhs, bvp.jac, sol.knots[k], sol.knots[k + 1],
                                              sol.nodes[k], opt.integrator_tol * 0.1,
                                              opt.integrator_tol * 0.1, 0.1, false);
        if (!seg.ok || (seg.y - sol.nodes[k + 1]).norm() > 1e3 * opt.bvp_tol * (1.0 + seg.y.norm()))
          verified = false;
      }
      if (!verified) {
        ++report.misses;
        continue;
      }

      HeteroclinicOrbit orb;
      orb.source_id = src.id;
      orb.target_id = tgt.id;
      orb.relative_index = 1;
      orb.energy_drop = src.energy - tgt.energy;
      orb.trajectory = detail::assemble_trajectory(sys, sol, opt.integrator_tol);
      bool dup = false;
      for (const auto& u : pair_orbits)
        if (detail::hausdorff_distance(u.trajectory.y, orb.trajectory.y) < opt.dedup_tol) dup = true;
      if (!dup) {
        tail_rate(sys, orb, Zm, Zp);
        pair_orbits.push_back(std::move(orb));
      }
    }
    for (auto& orb : pair_orbits) found.push_back(std::move(orb));
  }

  std::sort(found.begin(), found.end(), [](const HeteroclinicOrbit& a, const HeteroclinicOrbit& b) {
    if (a.source_id != b.source_id) return a.source_id < b.source_id;
    if (a.target_id != b.target_id) return a.target_id < b.target_id;
    double ma = a.trajectory.y[a.trajectory.size() / 2][0];
    double mb = b.trajectory.y[b.trajectory.size() / 2][0];
    return ma < mb;
  });
  for (std::size_t k = 0; k < found.size(); ++k) found[k].id = "O" + std::to_string(k);
  report.orbits = std::move(found);
  return report;
}

// Count index-1 orbits mod 2 inside the isolating set. For energy sublevels
// the monotonicity shortcut applies: an orbit is contained exactly when its
// source energy clears the level.
inline OrbitCount count_mod2(const std::vector<HeteroclinicOrbit>& orbits,
                             const std::vector<StationaryPoint>& points, const IsolatingSet& set,
                             bool searches_certified = true) {
  if (set.kind == IsolatingSet::Kind::EnergySublevel) {
    for (const auto& p : points)
      if (std::abs(p.energy - set.level) < 1e-6)
        throw NumericError("count_mod2: level within tolerance of a stationary energy (non-regular)");
  }

  std::map<std::string, const StationaryPoint*> by_id;
  for (const auto& p : points) by_id[p.id] = &p;

  std::map<std::pair<std::string, std::string>, PairCount> pairs;
  for (const auto& p : points) {
    if (!set.admits_energy(p.energy)) continue;
    for (const auto& q : points) {
      if (!set.admits_energy(q.energy)) continue;
      if (p.morse_index - q.morse_index == 1) {
        PairCount pc;
        pc.source = p.id;
        pc.target = q.id;
        pairs[{p.id, q.id}] = pc;
      }
    }
  }

  bool all_certified = searches_certified;
  for (const auto& orb : orbits) {
    auto key = std::make_pair(orb.source_id, orb.target_id);
    auto it = pairs.find(key);
    if (it == pairs.end()) continue;
    const auto* src = by_id.at(orb.source_id);
    if (!set.admits_energy(src->energy)) continue;
    it->second.raw += 1;
    it->second.orbit_ids.push_back(orb.id);
    if (!orb.certified) all_certified = false;
  }

  OrbitCount out;
  out.set = set;
  for (auto& [key, pc] : pairs) {
    pc.mod2 = pc.raw % 2;
    out.pairs.push_back(pc);
  }
  out.certified = all_certified;
  return out;
}

// Nonautonomous index-0 connections along a homotopy path, counted mod 2.
// The boundary projections come from the autonomous endpoint linearizations;
// there is no time-shift quotient.
struct NonautonomousCountResult {
  int raw = 0;
  int mod2 = 0;
  bool certified = true;
  std::vector<std::vector<Vector>> solutions;  // node lists of distinct solutions
};

inline NonautonomousCountResult find_nonautonomous_connections(
    const HomotopyPath& path, const SpatialProblem& prob_minus, const SpatialProblem& prob_plus,
    const StationaryPoint& X0, const StationaryPoint& X1, int galerkin_modes,
    const GalerkinSearchOptions& opt = {}) {
  if (X0.morse_index != X1.morse_index)
    throw ConfigError("find_nonautonomous_connections: endpoint indices must agree");

  FlowSystem sys_m(prob_minus, galerkin_modes);
  FlowSystem sys_p(prob_plus, galerkin_modes);
  const int n = sys_m.dim();
  const int N = sys_m.modes();

  Vector Zm = flow_rest_point(sys_m, X0.z);
  Vector Zp = flow_rest_point(sys_p, X1.z);

  double gamma = std::min(detail::min_tail_rate(sys_m, Zm, Zm), detail::min_tail_rate(sys_p, Zp, Zp));
  double T = opt.T > 0.0 ? opt.T : path.ell + std::min(80.0, std::ceil(18.5 / gamma) + 2.0);
  double lam_max =
      std::max(detail::max_unstable_rate(sys_m, {Zm}), detail::max_unstable_rate(sys_p, {Zp}));
  int segments = opt.segments > 0
                     ? opt.segments
                     : std::max(16, static_cast<int>(std::ceil(2.0 * T / std::min(0.75, 6.0 / lam_max))));
  segments += segments % 2;

  // time-dependent right-hand side through the path
  const auto& L = prob_minus.lap();
  Matrix basis = L.eigenvectors.leftCols(N);
  Vector lam = L.eigenvalues.head(N);
  auto rhs = [&](double t, const Vector& y) {
    Vector a = y.head(N), b = y.tail(N);
    Vector u = basis * a;
    Vector fv(L.dim);
    for (int i = 0; i < L.dim; ++i) fv[i] = path.f(t, L.nodes[i], u[i]);
    Vector dy(2 * N);
    dy.head(N) = b;
    dy.tail(N) = -(lam.array() * a.array()).matrix() - basis.transpose() * fv + path.c(t) * b;
    return dy;
  };
  auto jac = [&](double t, const Vector& y) {
    Vector a = y.head(N);
    Vector u = basis * a;
    Vector dv(L.dim);
    for (int i = 0; i < L.dim; ++i) dv[i] = path.fu(t, L.nodes[i], u[i]);
    Matrix S = basis.transpose() * dv.asDiagonal() * basis;
    for (int k = 0; k < N; ++k) S(k, k) += lam[k];
    Matrix J = Matrix::Zero(2 * N, 2 * N);
    J.topRightCorner(N, N) = Matrix::Identity(N, N);
    J.bottomLeftCorner(N, N) = -0.5 * (S + S.transpose());
    J.bottomRightCorner(N, N) = path.c(t) * Matrix::Identity(N, N);
    return J;
  };

  auto split_m = invariant_splitting(sys_m, Zm);
  auto split_p = invariant_splitting(sys_p, Zp);

  ShootingProblem bvp;
  bvp.rhs = rhs;
  bvp.jac = jac;
  bvp.t0 = -T;
  bvp.t1 = T;
  bvp.dim = n;
  bvp.BL = orthogonal_complement_rows(split_m.unstable);
  bvp.bl = bvp.BL * Zm;
  bvp.BR = orthogonal_complement_rows(split_p.stable);
  bvp.br = bvp.BR * Zp;
  bvp.has_phase = false;

  ShootingOptions sopt;
  sopt.segments = segments;
  sopt.tol = opt.bvp_tol;
  sopt.integrator_atol = sopt.integrator_rtol = opt.integrator_tol;
  sopt.max_step = 0.1;

  std::mt19937_64 rng(opt.seed + 7);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);

  NonautonomousCountResult res;
  for (int ms = 0; ms < opt.multistarts; ++ms) {
    double tau = std::max(1.0, path.ell / 2.0) * (1.0 + 0.5 * (ms % 3));
    std::vector<Vector> guess(segments + 1);
    for (int k = 0; k <= segments; ++k) {
      double t = -T + 2.0 * T * k / segments;
      double s = 0.5 * (1.0 + std::tanh(t / tau));
      double sd = 0.5 / (tau * std::cosh(t / tau) * std::cosh(t / tau));
      Vector y = Zm + s * (Zp - Zm);
      y.tail(N) += sd * (Zp - Zm).head(N);
      if (ms > 0) {
        double bump = std::exp(-t * t / (2.0 * tau * tau));
        for (int m = 0; m < std::min(3, N); ++m) y[m] += opt.perturbation * unif(rng) * bump;
      }
      guess[k] = y;
    }
    auto sol = solve_shooting(bvp, guess, sopt);
    if (sol.near_singular) res.certified = false;
    if (!sol.converged) continue;
    bool dup = false;
    for (const auto& known : res.solutions) {
      double d = 0.0;
      for (std::size_t k = 0; k < known.size(); ++k)
        d = std::max(d, (known[k] - sol.nodes[k]).norm());
      if (d < opt.dedup_tol) dup = true;
    }
    if (!dup) res.solutions.push_back(sol.nodes);
  }
  res.raw = static_cast<int>(res.solutions.size());
  res.mod2 = res.raw % 2;
  return res;
}

}  // namespace twh
