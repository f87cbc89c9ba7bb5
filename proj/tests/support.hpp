#pragma once

// Shared fixtures for the test suites: the concrete problem instances used
// throughout (planar Nagumo, Chafee-Infante intervals, family instances).

#include "twh/model.hpp"

namespace twh::testing {

// f(u) = (u - a)(1 - u^2) on the point domain. Roots {-1, a, 1}.
inline SpatialProblem nagumo_point(double a = 0.3, double c = 1.0) {
  SpatialProblem p;
  p.domain.kind = DomainKind::Point;
  p.domain.n = 0;
  p.nonlinearity.family = Family::Custom;
  p.nonlinearity.p = 3.0;
  // (u-a)(1-u^2) = -a + u + a u^2 - u^3
  p.nonlinearity.poly_coeffs = {-a, 1.0, a, -1.0};
  p.wave_speed = c;
  p.build();
  return p;
}

// f(u) = -u^3 - eps u on the point domain; single root 0.
inline SpatialProblem odd_minus_point(double eps = 0.1, double c = 1.0) {
  SpatialProblem p;
  p.domain.kind = DomainKind::Point;
  p.nonlinearity.family = Family::OddMinus;
  p.nonlinearity.p = 3.0;
  p.nonlinearity.h_coeffs = {0.0, -eps};
  p.wave_speed = c;
  p.build();
  return p;
}

// Chafee-Infante f(u) = lambda (u - u^3) on (0,pi), Dirichlet.
inline SpatialProblem chafee_infante(double lambda, int n = 64, double c = 1.0) {
  SpatialProblem p;
  p.domain.kind = DomainKind::Interval;
  p.domain.boundary = Boundary::Dirichlet;
  p.domain.a = 0.0;
  p.domain.b = M_PI;
  p.domain.n = n;
  p.nonlinearity.family = Family::Custom;
  p.nonlinearity.p = 3.0;
  p.nonlinearity.poly_coeffs = {0.0, lambda, 0.0, -lambda};
  p.wave_speed = c;
  p.build();
  return p;
}

// f(u) = |u|^2 + 1 with Neumann data: no stationary solutions.
inline SpatialProblem even_plus_neumann(int n = 48, double c = 1.0) {
  SpatialProblem p;
  p.domain.kind = DomainKind::Interval;
  p.domain.boundary = Boundary::Neumann;
  p.domain.a = 0.0;
  p.domain.b = M_PI;
  p.domain.n = n;
  p.nonlinearity.family = Family::EvenPlus;
  p.nonlinearity.p = 2.0;
  p.nonlinearity.h_coeffs = {1.0};
  p.wave_speed = c;
  p.build();
  return p;
}

}  // namespace twh::testing
