#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <map>
#include <set>

#include "support.hpp"
#include "twh/orbits.hpp"

using namespace twh;
using Catch::Approx;

namespace {

// Brute-force oracle for planar connection structure: sweep departure angles
// on a small circle around each index-1 rest point, classify the escape side,
// and refine each sign change by angle bisection. The trajectory at the
// boundary shadows a connecting orbit into a saddle.
std::set<std::pair<std::string, std::string>> oracle_connections(
    const SpatialProblem& prob, const std::vector<StationaryPoint>& points) {
  FlowSystem sys(prob);
  std::set<std::pair<std::string, std::string>> connections;

  std::vector<Vector> rest_states;
  for (const auto& p : points) {
    Vector y(2);
    y << p.z[0], 0.0;
    rest_states.push_back(y);
  }

  IntegratorOptions iopt;
  iopt.atol = iopt.rtol = 1e-8;
  iopt.escape_radius = 40.0;
  iopt.max_step = 0.05;

  auto run = [&](const Vector& y0) { return integrate(sys, y0, 0.0, 400.0, iopt); };
  auto escape_side = [&](const Trajectory& traj) -> int {
    if (!traj.escaped) return 0;
    return traj.y.back()[0] > 0.0 ? 1 : -1;
  };

  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].morse_index != 1) continue;  // sweep around sources only
    const double r = 1e-4;
    const int K = 64;
    std::vector<int> side(K + 1);
    for (int k = 0; k <= K; ++k) {
      double th = 2.0 * M_PI * k / K;
      Vector y0 = rest_states[i];
      y0[0] += r * std::cos(th);
      y0[1] += r * std::sin(th);
      side[k] = escape_side(run(y0));
    }
    for (int k = 0; k < K; ++k) {
      if (side[k] == side[k + 1] || side[k] == 0 || side[k + 1] == 0) continue;
      double lo = 2.0 * M_PI * k / K, hi = 2.0 * M_PI * (k + 1) / K;
      int lo_side = side[k];
      for (int it = 0; it < 50; ++it) {
        double mid = 0.5 * (lo + hi);
        Vector y0 = rest_states[i];
        y0[0] += r * std::cos(mid);
        y0[1] += r * std::sin(mid);
        int s = escape_side(run(y0));
        if (s == lo_side)
          lo = mid;
        else
          hi = mid;
      }
      // closest bounded approach to a saddle along the refined trajectory
      Vector y0 = rest_states[i];
      y0[0] += r * std::cos(0.5 * (lo + hi));
      y0[1] += r * std::sin(0.5 * (lo + hi));
      auto traj = run(y0);
      for (std::size_t j = 0; j < points.size(); ++j) {
        if (j == i) continue;
        double best = 1e9;
        for (const auto& y : traj.y) best = std::min(best, (y - rest_states[j]).norm());
        if (best < 1e-3) connections.insert({points[i].id, points[j].id});
      }
    }
  }
  return connections;
}

}  // namespace

TEST_CASE("nagumo planar search finds exactly the two index-1 heteroclinics") {
  auto prob = testing::nagumo_point();
  auto points = find_all(prob);
  auto report = find_heteroclinics_planar(prob, points);

  REQUIRE(report.orbits.size() == 2);
  REQUIRE(report.undecided == 0);
  REQUIRE(report.certified());

  // source is the middle rest value a = 0.3 (id sorted by energy: S2)
  std::map<std::string, double> zval;
  for (const auto& p : points) zval[p.id] = p.z[0];
  std::set<double> targets;
  for (const auto& orb : report.orbits) {
    REQUIRE(zval[orb.source_id] == Approx(0.3).margin(1e-9));
    REQUIRE(orb.relative_index == 1);
    REQUIRE(orb.energy_drop > 0.0);
    targets.insert(zval[orb.target_id]);
  }
  REQUIRE(targets == std::set<double>({-1.0, 1.0}));
}

TEST_CASE("single rest point means no heteroclinics") {
  auto prob = testing::odd_minus_point(0.1);
  auto points = find_all(prob);
  auto report = find_heteroclinics_planar(prob, points);
  REQUIRE(report.orbits.empty());
}

TEST_CASE("no saddle-saddle connection between -1 and 1 is accepted") {
  auto prob = testing::nagumo_point();
  auto points = find_all(prob);
  auto report = find_heteroclinics_planar(prob, points);
  for (const auto& orb : report.orbits) {
    bool saddle_saddle = std::abs(orb.energy_drop - 0.4) < 1e-6;  // E(-0.05) - E(-0.45)
    REQUIRE_FALSE(saddle_saddle);
  }
}

TEST_CASE("planar connection matrix agrees with the angle-sweep oracle") {
  auto prob = testing::nagumo_point();
  auto points = find_all(prob);
  auto report = find_heteroclinics_planar(prob, points);
  std::set<std::pair<std::string, std::string>> from_branches;
  for (const auto& orb : report.orbits) from_branches.insert({orb.source_id, orb.target_id});
  auto from_sweep = oracle_connections(prob, points);
  REQUIRE(from_branches == from_sweep);
}

TEST_CASE("orbits are invariant under halving the eigenvector offset") {
  auto prob = testing::nagumo_point();
  auto points = find_all(prob);
  PlanarSearchOptions a;
  a.offset = 1e-6;
  PlanarSearchOptions b;
  b.offset = 5e-7;
  auto ra = find_heteroclinics_planar(prob, points, a);
  auto rb = find_heteroclinics_planar(prob, points, b);
  REQUIRE(ra.orbits.size() == rb.orbits.size());
  for (std::size_t k = 0; k < ra.orbits.size(); ++k) {
    REQUIRE(ra.orbits[k].source_id == rb.orbits[k].source_id);
    REQUIRE(ra.orbits[k].target_id == rb.orbits[k].target_id);
  }
}

TEST_CASE("tail rates match the saddle and source eigenvalues") {
  auto prob = testing::nagumo_point();
  auto points = find_all(prob);
  auto report = find_heteroclinics_planar(prob, points);
  std::map<std::string, double> zval;
  for (const auto& p : points) zval[p.id] = p.z[0];

  for (const auto& orb : report.orbits) {
    double target = zval[orb.target_id];
    double expected = target > 0.0 ? (std::sqrt(6.6) - 1.0) / 2.0    // 0.7845 at z=1
                                   : (std::sqrt(11.4) - 1.0) / 2.0;  // 1.1882 at z=-1
    REQUIRE(orb.predicted_gamma_plus == Approx(expected).margin(1e-6));
    REQUIRE(std::abs(orb.gamma_plus - expected) < 0.1 * expected);
    // departure from the spiral source at rate c/2
    REQUIRE(orb.predicted_gamma_minus == Approx(0.5).margin(1e-9));
    REQUIRE(std::abs(orb.gamma_minus - 0.5) < 0.05);
  }
}

TEST_CASE("energy decreases strictly along accepted orbits") {
  auto prob = testing::nagumo_point();
  auto points = find_all(prob);
  auto report = find_heteroclinics_planar(prob, points);
  for (const auto& orb : report.orbits) {
    const auto& traj = orb.trajectory;
    for (std::size_t k = 1; k < traj.size(); ++k) {
      REQUIRE(traj.E[k] <= traj.E[k - 1] + 1e-10);
      double v = traj.y[k][1];
      if (std::abs(v) > 1e-5) REQUIRE(traj.E[k] < traj.E[k - 1]);
    }
    // energy bookkeeping closes
    double drop = traj.E.front() - traj.E.back();
    REQUIRE(drop == Approx(orb.energy_drop).margin(1e-4));
  }
}

TEST_CASE("count_mod2 on the nagumo system") {
  auto prob = testing::nagumo_point();
  auto points = find_all(prob);
  auto report = find_heteroclinics_planar(prob, points);

  std::string a_id, one_id, minus_id;
  for (const auto& p : points) {
    if (std::abs(p.z[0] - 0.3) < 1e-6) a_id = p.id;
    if (std::abs(p.z[0] - 1.0) < 1e-6) one_id = p.id;
    if (std::abs(p.z[0] + 1.0) < 1e-6) minus_id = p.id;
  }

  IsolatingSet whole;
  auto count = count_mod2(report.orbits, points, whole, report.certified());
  REQUIRE(count.mod2(a_id, one_id) == 1);
  REQUIRE(count.mod2(a_id, minus_id) == 1);
  REQUIRE(count.certified);

  // sublevel {E <= 0} excludes the generator a (E = 0.0443)
  IsolatingSet sub;
  sub.kind = IsolatingSet::Kind::EnergySublevel;
  sub.level = 0.0;
  auto count2 = count_mod2(report.orbits, points, sub, report.certified());
  REQUIRE(count2.mod2(a_id, one_id) == 0);
  REQUIRE(count2.mod2(a_id, minus_id) == 0);

  // empty orbit set: all counts zero
  auto count3 = count_mod2({}, points, whole, true);
  for (const auto& pc : count3.pairs) REQUIRE(pc.mod2 == 0);
}

TEST_CASE("count_mod2 rejects non-regular energy levels") {
  auto prob = testing::nagumo_point();
  auto points = find_all(prob);
  IsolatingSet sub;
  sub.kind = IsolatingSet::Kind::EnergySublevel;
  sub.level = -0.05;  // the energy of the rest point at z=1
  REQUIRE_THROWS_AS(count_mod2({}, points, sub, true), NumericError);
}

TEST_CASE("galerkin search: chafee-infante lambda=2 connects 0 to both states") {
  auto prob = testing::chafee_infante(2.0, 64);
  auto points = find_all(prob);
  REQUIRE(points.size() == 3);

  std::size_t i0 = 0, ip = 0, im = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].morse_index == 1) i0 = i;
    else if (points[i].z.sum() > 0) ip = i;
    else im = i;
  }

  GalerkinSearchOptions opt;
  opt.multistarts = 3;
  auto report = find_heteroclinics_galerkin(prob, points, {{i0, ip}, {i0, im}}, 8, opt);
  REQUIRE(report.orbits.size() >= 2);

  std::set<std::string> targets;
  for (const auto& orb : report.orbits) {
    REQUIRE(orb.source_id == points[i0].id);
    REQUIRE(orb.relative_index == 1);
    REQUIRE(orb.energy_drop > 0.0);
    targets.insert(orb.target_id);
  }
  REQUIRE(targets.count(points[ip].id) == 1);
  REQUIRE(targets.count(points[im].id) == 1);

  // oracle checks independent of the collocation solve: departure from 0
  // along its weak unstable eigenplane, approach to the target inside its
  // stable eigenspace, and forward integration (a different scheme than the
  // solver's internal propagator) shadowing each orbit over a stretch around
  // the anchor
  FlowSystem sys(prob, 8);
  Vector y0 = flow_rest_point(sys, points[i0].z);
  Eigen::SelfAdjointEigenSolver<Matrix> es(sys.symmetric_operator(y0.head(8)));
  // mu > 0 only for mode 1: its (psi,0),(0,psi) plane is the weak pair
  Matrix plane = Matrix::Zero(16, 2);
  plane.col(0).head(8) = es.eigenvectors().col(7);
  plane.col(1).tail(8) = es.eigenvectors().col(7);
  Eigen::HouseholderQR<Matrix> qr(plane);
  Matrix Q = Matrix(qr.householderQ()).leftCols(2);

  std::map<std::string, Vector> rest_of;
  rest_of[points[ip].id] = flow_rest_point(sys, points[ip].z);
  rest_of[points[im].id] = flow_rest_point(sys, points[im].z);

  for (const auto& orb : report.orbits) {
    // departure: the first deviation past 1e-4 lies in the weak eigenplane
    Vector dev;
    for (std::size_t k = 0; k < orb.trajectory.size(); ++k) {
      double d = (orb.trajectory.y[k] - y0).norm();
      if (d > 1e-4) {
        dev = orb.trajectory.y[k] - y0;
        break;
      }
    }
    REQUIRE(dev.size() == 16);
    Vector residual = dev - Q * (Q.transpose() * dev);
    REQUIRE(residual.norm() < 1e-2 * dev.norm());

    // approach: the last deviation above 1e-4 lies in the stable eigenspace
    const Vector& zt = rest_of.at(orb.target_id);
    auto split_t = invariant_splitting(sys, zt);
    Eigen::HouseholderQR<Matrix> qrt(split_t.stable);
    Matrix Qt = Matrix(qrt.householderQ()).leftCols(split_t.stable.cols());
    Vector dev_t;
    for (std::size_t k = orb.trajectory.size(); k-- > 0;) {
      double d = (orb.trajectory.y[k] - zt).norm();
      if (d > 1e-4) {
        dev_t = orb.trajectory.y[k] - zt;
        break;
      }
    }
    REQUIRE(dev_t.size() == 16);
    Vector residual_t = dev_t - Qt * (Qt.transpose() * dev_t);
    REQUIRE(residual_t.norm() < 1e-2 * dev_t.norm());

    // cross-scheme shadowing over a window around the energy anchor
    std::size_t mid = 0;
    for (std::size_t k = 0; k < orb.trajectory.size(); ++k)
      if (std::abs(orb.trajectory.t[k]) < std::abs(orb.trajectory.t[mid])) mid = k;
    std::size_t start = mid;
    while (start > 0 && orb.trajectory.t[mid] - orb.trajectory.t[start] < 1.0) --start;
    IntegratorOptions iopt;
    iopt.atol = iopt.rtol = 1e-12;
    iopt.escape_radius = 100.0;
    auto shadow = integrate(sys, orb.trajectory.y[start], orb.trajectory.t[start],
                            orb.trajectory.t[start] + 2.0, iopt);
    auto dist_to_polyline = [&](const Vector& p) {
      double best = 1e9;
      for (std::size_t j = 0; j + 1 < orb.trajectory.size(); ++j) {
        const Vector& a = orb.trajectory.y[j];
        const Vector& b = orb.trajectory.y[j + 1];
        Vector ab = b - a;
        double denom = ab.squaredNorm();
        double s = denom > 0 ? std::clamp((p - a).dot(ab) / denom, 0.0, 1.0) : 0.0;
        best = std::min(best, (p - (a + s * ab)).norm());
      }
      return best;
    };
    double worst = 0.0;
    for (std::size_t k = 0; k < shadow.size(); k += 7)
      worst = std::max(worst, dist_to_polyline(shadow.y[k]));
    REQUIRE(worst < 5e-4);
  }
}

TEST_CASE("galerkin search rejects pairs of equal index") {
  auto prob = testing::chafee_infante(2.0, 64);
  auto points = find_all(prob);
  std::size_t ip = 0, im = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].morse_index == 0) {
      if (points[i].z.sum() > 0) ip = i;
      else im = i;
    }
  }
  REQUIRE_THROWS_AS(find_heteroclinics_galerkin(prob, points, {{ip, im}}, 8), ConfigError);
}

TEST_CASE("galerkin orbit is robust under doubling T") {
  auto prob = testing::chafee_infante(2.0, 64);
  auto points = find_all(prob);
  std::size_t i0 = 0, ip = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].morse_index == 1) i0 = i;
    else if (points[i].z.sum() > 0) ip = i;
  }
  GalerkinSearchOptions a;
  a.multistarts = 1;
  a.T = 40.0;
  GalerkinSearchOptions b;
  b.multistarts = 1;
  b.T = 80.0;
  auto ra = find_heteroclinics_galerkin(prob, points, {{i0, ip}}, 8, a);
  auto rb = find_heteroclinics_galerkin(prob, points, {{i0, ip}}, 8, b);
  REQUIRE(ra.orbits.size() == 1);
  REQUIRE(rb.orbits.size() == 1);

  // compare mid-profiles at the phase anchor t = 0
  auto mid_state = [](const HeteroclinicOrbit& orb) {
    double best = 1e9;
    Vector state;
    for (std::size_t k = 0; k < orb.trajectory.size(); ++k) {
      if (std::abs(orb.trajectory.t[k]) < best) {
        best = std::abs(orb.trajectory.t[k]);
        state = orb.trajectory.y[k];
      }
    }
    return state;
  };
  REQUIRE((mid_state(ra.orbits[0]) - mid_state(rb.orbits[0])).norm() < 1e-6);
}

TEST_CASE("nonautonomous constant path: identity counts") {
  auto prob = testing::nagumo_point();
  auto points = find_all(prob);
  HomotopyPath path;
  path.kind = HomotopyPath::Kind::WaveSpeed;
  path.base = prob;
  path.c_from = 1.0;
  path.c_to = 1.0;
  path.ell = 2.0;

  auto pm = path.endpoint_minus();
  auto pp = path.endpoint_plus();
  GalerkinSearchOptions opt;
  opt.multistarts = 3;

  // X0 = X1 = (1,0): the constant orbit is the unique solution
  const StationaryPoint* one = nullptr;
  const StationaryPoint* minus = nullptr;
  for (const auto& p : points) {
    if (std::abs(p.z[0] - 1.0) < 1e-8) one = &p;
    if (std::abs(p.z[0] + 1.0) < 1e-8) minus = &p;
  }
  auto res = find_nonautonomous_connections(path, pm, pp, *one, *one, 0, opt);
  REQUIRE(res.mod2 == 1);
  auto res2 = find_nonautonomous_connections(path, pm, pp, *one, *minus, 0, opt);
  REQUIRE(res2.mod2 == 0);
}

TEST_CASE("nonautonomous c-homotopy 0.5 -> 2.0 continues the rest points") {
  auto prob = testing::nagumo_point(0.3, 0.5);
  auto points = find_all(prob);
  HomotopyPath path;
  path.kind = HomotopyPath::Kind::WaveSpeed;
  path.base = prob;
  path.c_from = 0.5;
  path.c_to = 2.0;
  path.ell = 2.0;

  auto pm = path.endpoint_minus();
  auto pp = path.endpoint_plus();
  auto points_p = find_all(pp);

  const StationaryPoint *one_m = nullptr, *one_p = nullptr, *minus_p = nullptr;
  for (const auto& p : points)
    if (std::abs(p.z[0] - 1.0) < 1e-8) one_m = &p;
  for (const auto& p : points_p) {
    if (std::abs(p.z[0] - 1.0) < 1e-8) one_p = &p;
    if (std::abs(p.z[0] + 1.0) < 1e-8) minus_p = &p;
  }

  GalerkinSearchOptions opt;
  opt.multistarts = 3;
  auto res = find_nonautonomous_connections(path, pm, pp, *one_m, *one_p, 0, opt);
  REQUIRE(res.mod2 == 1);
  auto res2 = find_nonautonomous_connections(path, pm, pp, *one_m, *minus_p, 0, opt);
  REQUIRE(res2.mod2 == 0);
}
