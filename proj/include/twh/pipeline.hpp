#pragma once

#include <chrono>
#include <filesystem>

#include "twh/io.hpp"

namespace twh {

namespace detail {
class StageTimer {
 public:
  StageTimer() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    auto d = std::chrono::steady_clock::now() - start_;
    return std::chrono::duration<double, std::milli>(d).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};
}  // namespace detail

inline std::string config_hash(const ExperimentConfig& cfg) { return fnv1a_hex(cfg.raw.dump()); }

// stationary stage: hypothesis validation, rest-point search, certificates.
inline int cmd_stationary(const ExperimentConfig& cfg, const fs::path& out) {
  detail::StageTimer timer;
  RunManifest manifest(out, config_hash(cfg));

  NewtonOptions nopt;
  nopt.tol = cfg.tol.newton;
  auto hyp = validate_hypotheses(cfg.problem, cfg.validation_range, cfg.validation_samples);
  auto points = find_all(cfg.problem, cfg.strategy, nopt);
  bool bound_ok = energy_bound_check(points, hyp.C_f_prime, cfg.problem.volume());

  json sj = stationary_to_json(points, hyp, bound_ok, cfg.problem.volume());
  emit(manifest, out, "stationary.json", sj.dump(2) + "\n");
  emit(manifest, out, "stationary_profiles.csv", profiles_csv(points, cfg.problem));
  manifest.add_stage("stationary", timer.ms(), true);
  manifest.write();
  return 0;
}

// orbit stage: heteroclinic search, counts, per-orbit diagnostics.
inline int cmd_orbits(const ExperimentConfig& cfg, const fs::path& out) {
  detail::StageTimer timer;
  RunManifest manifest(out, config_hash(cfg));

  json sj = json::parse(read_text(out / "stationary.json"));
  auto points = stationary_from_json(sj, cfg.problem);

  OrbitSearchReport report;
  int modes = cfg.problem.domain.kind == DomainKind::Point ? 0 : cfg.galerkin_modes;
  FlowSystem sys(cfg.problem, modes);

  if (cfg.problem.domain.kind == DomainKind::Point) {
    PlanarSearchOptions popt;
    popt.integrator.atol = cfg.tol.ode_abs;
    popt.integrator.rtol = cfg.tol.ode_rel;
    if (points.size() > 1) report = find_heteroclinics_planar(cfg.problem, points);
  } else {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < points.size(); ++i)
      for (std::size_t j = 0; j < points.size(); ++j)
        if (points[i].hyperbolic && points[j].hyperbolic &&
            points[i].morse_index - points[j].morse_index == 1)
          pairs.push_back({i, j});
    GalerkinSearchOptions gopt;
    gopt.multistarts = cfg.orbit_multistarts;
    gopt.T = cfg.orbit_T;
    gopt.bvp_tol = cfg.tol.bvp * 100.0;
    gopt.integrator_tol = cfg.tol.ode_abs;
    gopt.seed = cfg.seed;
    gopt.threads = cfg.threads;
    if (!pairs.empty())
      report = find_heteroclinics_galerkin(cfg.problem, points, pairs, cfg.galerkin_modes, gopt);
  }

  auto counts = count_mod2(report.orbits, points, cfg.isolating_set, report.certified());

  json oj = orbits_to_json(report, counts);
  // per-orbit structural diagnostics: spectral flow and the Lyapunov identity
  for (std::size_t k = 0; k < report.orbits.size(); ++k) {
    const auto& orb = report.orbits[k];
    auto sf = spectral_flow(sys, orb.trajectory);
    double lyap = energy_rate_check(sys, orb.trajectory);
    oj["orbits"][k]["spectral_flow"] = sf.net;
    oj["orbits"][k]["spectral_flow_raw"] = sf.raw;
    oj["orbits"][k]["spectral_flow_convention"] = sf.convention;
    oj["orbits"][k]["index_identity_ok"] = (sf.net == orb.relative_index);
    oj["orbits"][k]["lyapunov_deviation"] = lyap;
    emit(manifest, out, "traj_" + orb.id + ".csv", trajectory_csv(orb.trajectory, sys));
    emit(manifest, out, "traj_" + orb.id + ".bin", trajectory_cache_bytes(orb.trajectory));
  }
  emit(manifest, out, "orbits.json", oj.dump(2) + "\n");
  emit(manifest, out, "connection_matrix.csv", connection_matrix_csv(counts, points));
  manifest.add_stage("orbits", timer.ms(), report.certified() && counts.certified);
  manifest.write();
  return 0;
}

// homology stage: chain complex, d^2, ranks, direct sum, forcing.
inline int cmd_homology(const ExperimentConfig& cfg, const fs::path& out) {
  detail::StageTimer timer;
  RunManifest manifest(out, config_hash(cfg));

  json sj = json::parse(read_text(out / "stationary.json"));
  json oj = json::parse(read_text(out / "orbits.json"));
  auto points = stationary_from_json(sj, cfg.problem);

  OrbitCount counts;
  counts.certified = oj.at("counts").at("certified").get<bool>();
  const json& set_j = oj.at("counts").at("set");
  if (set_j.at("kind").get<std::string>() == "sublevel") {
    counts.set.kind = IsolatingSet::Kind::EnergySublevel;
    counts.set.level = set_j.at("level").get<double>();
  }
  for (const auto& pj : oj.at("counts").at("pairs")) {
    PairCount pc;
    pc.source = pj.at("source").get<std::string>();
    pc.target = pj.at("target").get<std::string>();
    pc.raw = pj.at("raw").get<int>();
    pc.mod2 = pj.at("mod2").get<int>();
    counts.pairs.push_back(pc);
  }
  std::vector<HeteroclinicOrbit> orbit_stubs;
  for (const auto& q : oj.at("orbits")) {
    HeteroclinicOrbit o;
    o.id = q.at("id").get<std::string>();
    o.source_id = q.at("source").get<std::string>();
    o.target_id = q.at("target").get<std::string>();
    o.relative_index = q.at("relative_index").get<int>();
    orbit_stubs.push_back(o);
  }

  auto cx = build_complex(points, counts, counts.set, cfg.allow_uncertified);
  auto d2 = check_d_squared(cx);
  auto h = compute_homology(cx);
  auto comp = connection_components(cx, counts);
  bool ds_ok = direct_sum_check(cx, counts, comp);
  auto expected = expected_homology(family_class(cfg.problem.nonlinearity));
  auto forcing = forcing_analysis(points, orbit_stubs, family_class(cfg.problem.nonlinearity));

  json hj = homology_to_json(cx, h, d2, expected, forcing, ds_ok);
  emit(manifest, out, "homology.json", hj.dump(2) + "\n");
  emit(manifest, out, "homology_summary.txt", homology_summary_text(hj));
  manifest.add_stage("homology", timer.ms(), cx.certified && d2.ok);
  manifest.write();

  if (!d2.ok)
    throw CertificationError("homology: d^2 != 0, witness " + d2.generator_from + " -> " +
                             d2.generator_to);
  if (!ds_ok) throw CertificationError("homology: direct-sum verification failed");
  return 0;
}

// continuation stage: validate the homotopy, compute both endpoint complexes,
// count nonautonomous index-0 connections, verify the chain map identity and
// the induced isomorphism.
inline int cmd_continue(const ExperimentConfig& cfg, const fs::path& out) {
  detail::StageTimer timer;
  RunManifest manifest(out, config_hash(cfg));

  auto path = homotopy_from_config(cfg);
  auto path_report = validate_homotopy(path, 41);

  auto prob_m = path.endpoint_minus();
  auto prob_p = path.endpoint_plus();

  NewtonOptions nopt;
  nopt.tol = cfg.tol.newton;

  auto run_endpoint = [&](const SpatialProblem& prob) {
    auto points = find_all(prob, cfg.strategy, nopt);
    OrbitSearchReport report;
    if (prob.domain.kind == DomainKind::Point) {
      if (points.size() > 1) report = find_heteroclinics_planar(prob, points);
    } else {
      std::vector<std::pair<std::size_t, std::size_t>> pairs;
      for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = 0; j < points.size(); ++j)
          if (points[i].morse_index - points[j].morse_index == 1) pairs.push_back({i, j});
      GalerkinSearchOptions gopt;
      gopt.multistarts = cfg.orbit_multistarts;
      gopt.seed = cfg.seed;
      if (!pairs.empty())
        report = find_heteroclinics_galerkin(prob, points, pairs, cfg.galerkin_modes, gopt);
    }
    auto counts = count_mod2(report.orbits, points, cfg.isolating_set, report.certified());
    auto cx = build_complex(points, counts, cfg.isolating_set, cfg.allow_uncertified);
    return std::make_tuple(points, counts, cx);
  };

  auto [pts_m, counts_m, cx_m] = run_endpoint(prob_m);
  auto [pts_p, counts_p, cx_p] = run_endpoint(prob_p);

  // psi matrices from nonautonomous index-0 connections per grade
  int modes = cfg.problem.domain.kind == DomainKind::Point ? 0 : cfg.galerkin_modes;
  GalerkinSearchOptions gopt;
  gopt.multistarts = cfg.orbit_multistarts;
  gopt.seed = cfg.seed;
  ContinuationData data;
  json psi_json = json::object();
  for (const auto& [k, ids_m] : cx_m.grades) {
    std::size_t np = cx_p.generators(k);
    GF2Matrix psi(np, ids_m.size());
    if (np > 0) {
      const auto& ids_p = cx_p.grades.at(k);
      for (std::size_t col = 0; col < ids_m.size(); ++col) {
        const StationaryPoint* X0 = nullptr;
        for (const auto& p : pts_m)
          if (p.id == ids_m[col]) X0 = &p;
        for (std::size_t row = 0; row < np; ++row) {
          const StationaryPoint* X1 = nullptr;
          for (const auto& p : pts_p)
            if (p.id == ids_p[row]) X1 = &p;
          auto res = find_nonautonomous_connections(path, prob_m, prob_p, *X0, *X1, modes, gopt);
          if (!res.certified) data.certified = false;
          if (res.mod2 % 2 == 1) psi.set(row, col, true);
        }
      }
    }
    data.psi[k] = psi;
    json rows = json::array();
    for (std::size_t i = 0; i < psi.rows(); ++i) {
      std::vector<int> row(psi.cols());
      for (std::size_t j = 0; j < psi.cols(); ++j) row[j] = psi.get(i, j) ? 1 : 0;
      rows.push_back(row);
    }
    psi_json[std::to_string(k)] = rows;
  }

  auto rep = continuation_check(cx_m, cx_p, data);

  json cj;
  cj["schema_version"] = 1;
  cj["artifact_version"] = kVersion;
  cj["homotopy"] = {{"kind", cfg.homotopy->kind},
                    {"ell", path.ell},
                    {"Theta", path_report.Theta},
                    {"epsilon", path_report.epsilon},
                    {"inf_c", path_report.inf_c}};
  json rm = json::object(), rp = json::object();
  for (const auto& [k, r] : rep.rank_minus) rm[std::to_string(k)] = r;
  for (const auto& [k, r] : rep.rank_plus) rp[std::to_string(k)] = r;
  cj["rank_minus"] = rm;
  cj["rank_plus"] = rp;
  cj["psi"] = psi_json;
  cj["chain_map_ok"] = rep.chain_map_ok;
  cj["isomorphism"] = rep.isomorphism;
  cj["certified"] = data.certified;
  if (!rep.failure.empty()) cj["failure"] = rep.failure;
  cj["verdict"] = (rep.chain_map_ok && rep.isomorphism) ? "isomorphism verified"
                                                        : "continuation FAILED";
  emit(manifest, out, "continuation.json", cj.dump(2) + "\n");
  manifest.add_stage("continue", timer.ms(), rep.chain_map_ok && rep.isomorphism);
  manifest.write();

  if (!rep.chain_map_ok || !rep.isomorphism)
    throw CertificationError("continuation: " + rep.failure);
  return 0;
}

// hypothesis validation stage
inline int cmd_validate(const ExperimentConfig& cfg, const fs::path& out) {
  detail::StageTimer timer;
  RunManifest manifest(out, config_hash(cfg));

  auto rep = validate_hypotheses(cfg.problem, cfg.validation_range, cfg.validation_samples);
  json vj;
  vj["schema_version"] = 1;
  vj["artifact_version"] = kVersion;
  vj["hypotheses"] = stationary_to_json({}, rep, true, cfg.problem.volume())["hypotheses"];
  bool need_f3 = cfg.problem.domain.boundary == Boundary::Neumann ||
                 cfg.problem.domain.boundary == Boundary::Periodic;
  vj["required_pass"] = rep.all_pass(need_f3);
  if (cfg.homotopy) {
    auto path = homotopy_from_config(cfg);
    auto hrep = validate_homotopy(path, 41);
    vj["homotopy"] = {{"constant_outside", hrep.constant_outside},
                      {"Theta", hrep.Theta},
                      {"C_f_dprime", hrep.C_f_dprime},
                      {"inf_c", hrep.inf_c},
                      {"sup_alpha_dev", hrep.sup_alpha_dev},
                      {"sup_alpha_rate", hrep.sup_alpha_rate},
                      {"sup_h_ratio", hrep.sup_h_ratio},
                      {"epsilon", hrep.epsilon},
                      {"pass", hrep.pass}};
  }
  emit(manifest, out, "validation.json", vj.dump(2) + "\n");
  manifest.add_stage("validate", timer.ms(), rep.all_pass(need_f3));
  manifest.write();
  return 0;
}

// report stage: plot-ready CSV extracts from the run directory.
inline int cmd_report(const ExperimentConfig& cfg, const fs::path& out) {
  detail::StageTimer timer;
  RunManifest manifest(out, config_hash(cfg));

  json oj = json::parse(read_text(out / "orbits.json"));
  int modes = cfg.problem.domain.kind == DomainKind::Point ? 0 : cfg.galerkin_modes;
  FlowSystem sys(cfg.problem, modes);

  for (const auto& q : oj.at("orbits")) {
    std::string id = q.at("id").get<std::string>();
    auto traj = read_trajectory_cache(out / ("traj_" + id + ".bin"));

    std::ostringstream energy_csv;
    energy_csv << "t,E\n";
    for (std::size_t k = 0; k < traj.size(); ++k)
      energy_csv << format_double(traj.t[k]) << "," << format_double(traj.E[k]) << "\n";
    emit(manifest, out, "report/energy_" + id + ".csv", energy_csv.str());

    std::ostringstream phase_csv;
    phase_csv << "t,u,v\n";
    for (std::size_t k = 0; k < traj.size(); ++k) {
      // leading mode as the phase-portrait projection
      phase_csv << format_double(traj.t[k]) << "," << format_double(traj.y[k][0]) << ","
                << format_double(traj.y[k][sys.modes()]) << "\n";
    }
    emit(manifest, out, "report/phase_" + id + ".csv", phase_csv.str());

    std::ostringstream cross_csv;
    cross_csv << "t";
    for (int m = 1; m <= sys.modes(); ++m) cross_csv << ",eig" << m;
    cross_csv << "\n";
    std::size_t stride = std::max<std::size_t>(1, traj.size() / 2000);
    for (std::size_t k = 0; k < traj.size(); k += stride) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(sys.symmetric_operator(traj.y[k].head(sys.modes())));
      cross_csv << format_double(traj.t[k]);
      for (int m = 0; m < sys.modes(); ++m) cross_csv << "," << format_double(es.eigenvalues()[m]);
      cross_csv << "\n";
    }
    emit(manifest, out, "report/crossings_" + id + ".csv", cross_csv.str());
  }
  manifest.add_stage("report", timer.ms(), true);
  manifest.write();
  return 0;
}

}  // namespace twh
