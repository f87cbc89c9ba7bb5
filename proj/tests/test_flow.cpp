#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "support.hpp"
#include "twh/flow.hpp"

using namespace twh;
using Catch::Approx;

namespace {

Vector planar_state(double u, double v) {
  Vector y(2);
  y << u, v;
  return y;
}

}  // namespace

TEST_CASE("vector field vanishes at rest points") {
  auto prob = testing::nagumo_point();
  FlowSystem sys(prob);
  for (double z : {-1.0, 0.3, 1.0})
    REQUIRE(vector_field(sys, planar_state(z, 0.0)).norm() < 1e-14);
}

TEST_CASE("vector field on the point domain matches the hand formula") {
  auto prob = testing::nagumo_point();  // f(0) = -0.3, c = 1
  FlowSystem sys(prob);
  Vector dy = vector_field(sys, planar_state(0.0, 1.0));
  REQUIRE(dy[0] == Approx(1.0));
  REQUIRE(dy[1] == Approx(1.3));  // c*v - f(u) = 1 + 0.3
}

TEST_CASE("vector field acts diagonally on laplacian eigenvectors when f = 0") {
  SpatialProblem p;
  p.domain.kind = DomainKind::Interval;
  p.domain.boundary = Boundary::Dirichlet;
  p.domain.a = 0.0;
  p.domain.b = M_PI;
  p.domain.n = 48;
  p.nonlinearity.family = Family::Custom;
  p.nonlinearity.poly_coeffs = {0.0};
  p.wave_speed = 1.0;
  p.build();
  FlowSystem sys(p, 8);
  Vector y = Vector::Zero(16);
  y[0] = 1.0;  // first mode, v = 0
  Vector dy = vector_field(sys, y);
  REQUIRE(dy.head(8).norm() == Approx(0.0).margin(1e-14));
  Vector expected = Vector::Zero(8);
  expected[0] = -p.lap().eigenvalues[0];
  REQUIRE((dy.tail(8) - expected).norm() < 1e-12);
}

TEST_CASE("rest point spectrum: nagumo saddle at z = 1") {
  auto prob = testing::nagumo_point();
  FlowSystem sys(prob);
  Vector y = planar_state(1.0, 0.0);
  auto spec = rest_point_spectrum(sys, y);
  // (c +- sqrt(c^2 - 4 mu))/2 with mu = -1.4
  double root = std::sqrt(6.6);
  REQUIRE(spec.dense.size() == 2);
  REQUIRE(spec.dense[0].real() == Approx((1.0 - root) / 2.0).margin(1e-9));
  REQUIRE(spec.dense[1].real() == Approx((1.0 + root) / 2.0).margin(1e-9));
  REQUIRE(spec.dense[0].imag() == Approx(0.0).margin(1e-12));
  REQUIRE(spec.unstable_dimension == 1);  // saddle
  REQUIRE(spec.max_mismatch < 1e-8);
}

TEST_CASE("rest point spectrum: nagumo source at z = a is a spiral") {
  auto prob = testing::nagumo_point();
  FlowSystem sys(prob);
  auto spec = rest_point_spectrum(sys, planar_state(0.3, 0.0));
  REQUIRE(spec.dense[0].real() == Approx(0.5).margin(1e-10));
  REQUIRE(spec.dense[1].real() == Approx(0.5).margin(1e-10));
  REQUIRE(std::abs(spec.dense[0].imag()) > 0.1);
  REQUIRE(spec.unstable_dimension == 2);  // spiral source
}

TEST_CASE("degenerate rest point with f_u = 0 and f = 0 has eigenvalues {c, 0}") {
  SpatialProblem p;
  p.domain.kind = DomainKind::Point;
  p.nonlinearity.family = Family::Custom;
  p.nonlinearity.poly_coeffs = {0.0};
  p.wave_speed = 1.0;
  p.build();
  FlowSystem sys(p);
  auto spec = rest_point_spectrum(sys, planar_state(0.0, 0.0));
  REQUIRE(spec.dense[0].real() == Approx(0.0).margin(1e-12));
  REQUIRE(spec.dense[1].real() == Approx(1.0).margin(1e-12));
  // flagged non-hyperbolic by the stationary module
  auto [hyp, gap] = hyperbolicity_check(p, Vector::Zero(1));
  REQUIRE_FALSE(hyp);
}

TEST_CASE("dense spectrum matches the per-mode closed form on galerkin systems") {
  auto prob = testing::chafee_infante(2.0);
  FlowSystem sys(prob, 8);
  auto pts = find_all(prob);
  for (const auto& sp : pts) {
    Vector y = flow_rest_point(sys, sp.z);
    auto spec = rest_point_spectrum(sys, y);
    REQUIRE(spec.max_mismatch < 1e-8);
    // unstable dimension identity: N + m
    REQUIRE(spec.unstable_dimension == sys.modes() + sp.morse_index);
  }
}

TEST_CASE("integration from a rest point stays put") {
  auto prob = testing::nagumo_point();
  FlowSystem sys(prob);
  auto traj = integrate(sys, planar_state(1.0, 0.0), 0.0, 5.0);
  for (const auto& y : traj.y) REQUIRE((y - planar_state(1.0, 0.0)).norm() < 1e-8);
}

TEST_CASE("perturbing the source spirals outward with strictly decreasing energy") {
  auto prob = testing::nagumo_point();
  FlowSystem sys(prob);
  Vector y0 = planar_state(0.3 + 1e-6, 0.0);
  auto traj = integrate(sys, y0, 0.0, 25.0);
  REQUIRE((traj.y.back() - planar_state(0.3, 0.0)).norm() > 1e-3);
  for (std::size_t k = 1; k < traj.size(); ++k) {
    double v = traj.y[k][1];
    if (std::abs(v) > 1e-8) REQUIRE(traj.E[k] < traj.E[k - 1] + 1e-12);
  }
}

TEST_CASE("backward integration from the saddle stable direction reaches the source basin") {
  auto prob = testing::nagumo_point();
  FlowSystem sys(prob);
  auto split = invariant_splitting(sys, planar_state(1.0, 0.0));
  REQUIRE(split.stable.cols() == 1);
  Vector y0 = planar_state(1.0, 0.0) - 1e-6 * split.stable.col(0).normalized();
  std::vector<Vector> rest = {planar_state(0.3, 0.0)};
  IntegratorOptions opt;
  opt.rest_points = &rest;
  opt.settle_tol = 1e-6;
  auto traj = integrate(sys, y0, 0.0, -80.0, opt);
  REQUIRE(traj.settled);
  REQUIRE((traj.y.back() - rest[0]).norm() < 1e-5);
}

TEST_CASE("time reversibility over short spans") {
  auto prob = testing::nagumo_point();
  FlowSystem sys(prob);
  Vector y0 = planar_state(0.5, 0.2);
  auto fwd = integrate(sys, y0, 0.0, 1.0);
  auto bwd = integrate(sys, fwd.y.back(), 1.0, 0.0);
  REQUIRE((bwd.y.back() - y0).norm() < 1e3 * 1e-9);
}

TEST_CASE("escape is a terminal event, not an exception") {
  auto prob = testing::nagumo_point();
  FlowSystem sys(prob);
  IntegratorOptions opt;
  opt.escape_radius = 10.0;
  auto traj = integrate(sys, planar_state(3.0, 3.0), 0.0, 50.0, opt);
  REQUIRE(traj.escaped);
}

TEST_CASE("energy rate identity: constant trajectory has zero deviation") {
  auto prob = testing::nagumo_point();
  FlowSystem sys(prob);
  auto traj = integrate(sys, planar_state(-1.0, 0.0), 0.0, 3.0);
  REQUIRE(energy_rate_check(sys, traj) < 1e-12);
}

TEST_CASE("energy rate identity along a real orbit, refining with step size") {
  auto prob = testing::nagumo_point();
  FlowSystem sys(prob);
  auto split = invariant_splitting(sys, planar_state(1.0, 0.0));
  Vector y0 = planar_state(1.0, 0.0) - 1e-4 * split.stable.col(0).normalized();

  double prev = std::numeric_limits<double>::infinity();
  for (double step : {1.6e-2, 4e-3, 1e-3}) {
    IntegratorOptions opt;
    opt.max_step = step;
    // refine the local error tolerance together with the sampling step, so
    // the difference quotient is not dominated by integrator noise
    opt.atol = opt.rtol = 1e-9 * (step / 1.6e-2) * (step / 1.6e-2);
    auto traj = integrate(sys, y0, 0.0, -30.0, opt);
    // reverse into forward time order for the difference quotient
    Trajectory fwd;
    for (std::size_t k = traj.size(); k-- > 0;) {
      fwd.t.push_back(traj.t[k]);
      fwd.y.push_back(traj.y[k]);
      fwd.E.push_back(traj.E[k]);
    }
    double dev = energy_rate_check(sys, fwd);
    REQUIRE(dev < 1e-4);
    REQUIRE(dev < prev * 1.05);
    prev = dev;
  }
}

TEST_CASE("energy rate check needs at least three samples") {
  auto prob = testing::nagumo_point();
  FlowSystem sys(prob);
  Trajectory short_traj;
  short_traj.t = {0.0, 0.1};
  short_traj.y = {planar_state(0, 0), planar_state(0, 0)};
  short_traj.E = {0.0, 0.0};
  REQUIRE_THROWS_AS(energy_rate_check(sys, short_traj), ConfigError);
}

TEST_CASE("spectral flow of a constant trajectory is zero") {
  auto prob = testing::nagumo_point();
  FlowSystem sys(prob);
  auto traj = integrate(sys, planar_state(1.0, 0.0), 0.0, 3.0);
  auto sf = spectral_flow(sys, traj);
  REQUIRE(sf.net == 0);
  REQUIRE(sf.raw == 0);
}

TEST_CASE("spectral flow along the nagumo a -> 1 orbit equals 1") {
  auto prob = testing::nagumo_point();
  FlowSystem sys(prob);
  auto split = invariant_splitting(sys, planar_state(1.0, 0.0));
  Vector y0 = planar_state(1.0, 0.0) - 1e-6 * split.stable.col(0).normalized();
  std::vector<Vector> rest = {planar_state(0.3, 0.0)};
  IntegratorOptions opt;
  opt.rest_points = &rest;
  opt.settle_tol = 1e-7;
  auto bwd = integrate(sys, y0, 0.0, -100.0, opt);
  REQUIRE(bwd.settled);
  Trajectory fwd;
  for (std::size_t k = bwd.size(); k-- > 0;) {
    fwd.t.push_back(bwd.t[k]);
    fwd.y.push_back(bwd.y[k]);
    fwd.E.push_back(bwd.E[k]);
  }
  auto sf = spectral_flow(sys, fwd);
  REQUIRE(sf.net == 1);  // m(a) - m(1) = 1
  REQUIRE(sf.net_paper_sign == -1);
}

TEST_CASE("flow rest points coincide with stationary points in galerkin coordinates") {
  auto prob = testing::chafee_infante(2.0);
  FlowSystem sys(prob, 12);
  auto pts = find_all(prob);
  for (const auto& sp : pts) {
    Vector y = flow_rest_point(sys, sp.z);
    Vector u = sys.u_grid(y);
    REQUIRE(prob.l2_norm(Vector(u - sp.z)) < 1e-5);
    REQUIRE(sys.rhs(y).norm() < 1e-9);
  }
}
