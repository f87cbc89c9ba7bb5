#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <functional>
#include <vector>

#include "twh/flow.hpp"
#include "twh/util.hpp"

namespace twh {

// Two-point connecting-orbit problem on [t0, t1] with projection boundary
// conditions BL y(t0) = bl and BR y(t1) = br, plus an optional scalar phase
// row pinning the time shift of autonomous orbits. Solved by multiple
// shooting: unknowns are the segment nodes, the Newton system is sparse
// block bidiagonal with boundary and phase borders.
struct ShootingProblem {
  std::function<Vector(double, const Vector&)> rhs;
  std::function<Matrix(double, const Vector&)> jac;
  double t0 = 0.0, t1 = 1.0;
  int dim = 0;
  Matrix BL;  // r_l x dim
  Vector bl;
  Matrix BR;  // r_r x dim
  Vector br;
  // Optional scalar phase condition on the middle node. A monotone functional
  // (the energy, for gradient-like flows) crosses its target level once, so
  // the anchored point on the orbit is unique.
  bool has_phase = false;
  std::function<double(const Vector&)> phase_fn;
  std::function<Vector(const Vector&)> phase_grad;
};

struct ShootingOptions {
  int segments = 40;
  double tol = 1e-9;
  int max_iters = 30;
  double integrator_atol = 1e-10;
  double integrator_rtol = 1e-10;
  double max_step = 0.1;
};

struct ShootingResult {
  bool converged = false;
  bool near_singular = false;
  double residual_norm = 0.0;
  std::vector<double> knots;    // segment start times (M+1 entries)
  std::vector<Vector> nodes;    // states at the knots
  int iterations = 0;
};

namespace detail {

// Propagate y' = F(t,y) over [ta, tb] together with the state transition
// matrix (variational equation M' = J M). Segment lengths in the shooting
// mesh are fitted to the largest |Re lambda|, so the segments are non-stiff
// and an explicit embedded pair is the right tool: Dormand-Prince 5(4) with
// error control on the state.
struct SegmentResult {
  Vector y;
  Matrix stm;
  bool ok = false;
};

inline SegmentResult propagate_with_stm(const std::function<Vector(double, const Vector&)>& rhs,
                                        const std::function<Matrix(double, const Vector&)>& jac,
                                        double ta, double tb, const Vector& y0, double atol,
                                        double rtol, double max_step, bool want_stm) {
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                      a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                      b6 = 11.0 / 84;
  static const double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640,
                      e5 = -92097.0 / 339200, e6 = 187.0 / 2100, e7 = 1.0 / 40;

  const int n = static_cast<int>(y0.size());
  SegmentResult out;
  out.y = y0;
  out.stm = Matrix::Identity(n, n);

  double span = tb - ta;
  if (span <= 0.0) throw ConfigError("propagate_with_stm: needs tb > ta");
  double t = ta;
  double h = std::min(max_step, span / 4.0);

  Matrix K1m, K2m, K3m, K4m, K5m, K6m;
  int guard = 0;
  while (t < tb - 1e-13 * (1.0 + std::abs(tb))) {
    if (++guard > 2'000'000) throw NumericError("propagate_with_stm: step budget exhausted");
    h = std::min(h, tb - t);

    auto eval = [&](double tc, const Vector& yc, Vector& k, Matrix* km, const Matrix& mc) {
      k = rhs(tc, yc);
      if (!k.allFinite()) return false;
      if (want_stm && km) *km = jac(tc, yc) * mc;
      return true;
    };

    Vector k1, k2, k3, k4, k5, k6, k7;
    bool ok = true;
    ok = ok && eval(t, out.y, k1, &K1m, out.stm);
    Matrix M2, M3, M4, M5, M6;
    Vector y2 = out.y + h * a21 * k1;
    if (want_stm) M2 = out.stm + h * a21 * K1m;
    ok = ok && eval(t + c2 * h, y2, k2, &K2m, M2);
    Vector y3 = out.y + h * (a31 * k1 + a32 * k2);
    if (want_stm) M3 = out.stm + h * (a31 * K1m + a32 * K2m);
    ok = ok && eval(t + c3 * h, y3, k3, &K3m, M3);
    Vector y4 = out.y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    if (want_stm) M4 = out.stm + h * (a41 * K1m + a42 * K2m + a43 * K3m);
    ok = ok && eval(t + c4 * h, y4, k4, &K4m, M4);
    Vector y5 = out.y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    if (want_stm) M5 = out.stm + h * (a51 * K1m + a52 * K2m + a53 * K3m + a54 * K4m);
    ok = ok && eval(t + c5 * h, y5, k5, &K5m, M5);
    Vector y6 = out.y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    if (want_stm) M6 = out.stm + h * (a61 * K1m + a62 * K2m + a63 * K3m + a64 * K4m + a65 * K5m);
    ok = ok && eval(t + h, y6, k6, &K6m, M6);
    if (!ok) {
      h *= 0.25;
      if (h < 1e-13) return out;
      continue;
    }

    Vector y_next = out.y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    k7 = rhs(t + h, y_next);
    if (!k7.allFinite()) {
      h *= 0.25;
      if (h < 1e-13) return out;
      continue;
    }
    Vector y_hat = out.y + h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    Vector err = y_next - y_hat;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      double sc = atol + rtol * std::max(std::abs(out.y[i]), std::abs(y_next[i]));
      double e = err[i] / sc;
      s += e * e;
    }
    double wrms = std::sqrt(s / n);
    if (wrms > 1.0) {
      h *= std::max(0.1, 0.9 * std::pow(wrms, -0.2));
      if (h < 1e-13) return out;
      continue;
    }

    if (want_stm)
      out.stm += h * (b1 * K1m + b3 * K3m + b4 * K4m + b5 * K5m + b6 * K6m);
    out.y = y_next;
    t += h;
    double grow = wrms > 1e-14 ? 0.9 * std::pow(wrms, -0.2) : 5.0;
    h = std::min(max_step, h * std::min(5.0, std::max(0.1, grow)));
  }
  out.ok = true;
  return out;
}

}  // namespace detail

inline ShootingResult solve_shooting(const ShootingProblem& bvp, const std::vector<Vector>& guess,
                                     const ShootingOptions& opt) {
  const int M = opt.segments;
  const int n = bvp.dim;
  if (static_cast<int>(guess.size()) != M + 1)
    throw ConfigError("solve_shooting: guess must have segments+1 nodes");
  const int rl = static_cast<int>(bvp.BL.rows());
  const int rr = static_cast<int>(bvp.BR.rows());
  const int total = (M + 1) * n;
  if (rl + rr + (bvp.has_phase ? 1 : 0) + M * n != total)
    throw ConfigError("solve_shooting: boundary conditions do not square the system");

  ShootingResult res;
  res.knots.resize(M + 1);
  for (int k = 0; k <= M; ++k)
    res.knots[k] = bvp.t0 + (bvp.t1 - bvp.t0) * double(k) / double(M);
  res.nodes = guess;
  const int mid = M / 2;

  auto residual = [&](const std::vector<Vector>& nodes, std::vector<Matrix>* stms,
                      Vector& R) -> bool {
    R.resize(total);
    int row = 0;
    R.segment(row, rl) = bvp.BL * nodes[0] - bvp.bl;
    row += rl;
    for (int k = 0; k < M; ++k) {
      auto seg = detail::propagate_with_stm(bvp.rhs, bvp.jac, res.knots[k], res.knots[k + 1],
                                            nodes[k], opt.integrator_atol, opt.integrator_rtol,
                                            opt.max_step, stms != nullptr);
      if (!seg.ok) return false;
      R.segment(row, n) = nodes[k + 1] - seg.y;
      if (stms) (*stms)[k] = seg.stm;
      row += n;
    }
    R.segment(row, rr) = bvp.BR * nodes[M] - bvp.br;
    row += rr;
    if (bvp.has_phase) {
      R[row] = bvp.phase_fn(nodes[mid]);
      ++row;
    }
    return true;
  };

  Vector R(total);
  std::vector<Matrix> stms(M);
  for (int it = 0; it < opt.max_iters; ++it) {
    if (!residual(res.nodes, &stms, R)) return res;
    res.residual_norm = R.norm();
    res.iterations = it;
    if (R.lpNorm<Eigen::Infinity>() <= opt.tol) {
      res.converged = true;
      return res;
    }

    // sparse Newton matrix
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(M) * n * n * 2 + (rl + rr + 1) * n);
    int row = 0;
    for (int i = 0; i < rl; ++i)
      for (int j = 0; j < n; ++j)
        if (bvp.BL(i, j) != 0.0) trip.emplace_back(row + i, j, bvp.BL(i, j));
    row += rl;
    for (int k = 0; k < M; ++k) {
      for (int i = 0; i < n; ++i) {
        trip.emplace_back(row + i, (k + 1) * n + i, 1.0);
        for (int j = 0; j < n; ++j) {
          double v = -stms[k](i, j);
          if (v != 0.0) trip.emplace_back(row + i, k * n + j, v);
        }
      }
      row += n;
    }
    for (int i = 0; i < rr; ++i)
      for (int j = 0; j < n; ++j)
        if (bvp.BR(i, j) != 0.0) trip.emplace_back(row + i, M * n + j, bvp.BR(i, j));
    row += rr;
    if (bvp.has_phase) {
      Vector pg = bvp.phase_grad(res.nodes[mid]);
      for (int j = 0; j < n; ++j)
        if (pg[j] != 0.0) trip.emplace_back(row, mid * n + j, pg[j]);
      ++row;
    }

    Eigen::SparseMatrix<double> A(total, total);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) {
      res.near_singular = true;
      return res;
    }
    Vector delta = lu.solve(-R);
    if (!delta.allFinite()) {
      res.near_singular = true;
      return res;
    }
    if (delta.norm() > 1e10 * (R.norm() + 1e-14)) res.near_singular = true;

    // damped update on the residual norm
    double base = R.norm();
    double lambda = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 8; ++ls) {
      std::vector<Vector> trial = res.nodes;
      for (int k = 0; k <= M; ++k) trial[k] += lambda * delta.segment(k * n, n);
      Vector Rt(total);
      if (residual(trial, nullptr, Rt) && Rt.norm() < (1.0 - 1e-4 * lambda) * base) {
        res.nodes = trial;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) {
      // full step as a last resort; Newton sometimes needs to pass a ridge
      for (int k = 0; k <= M; ++k) res.nodes[k] += delta.segment(k * n, n);
    }
  }
  if (residual(res.nodes, nullptr, R)) {
    res.residual_norm = R.norm();
    res.converged = R.lpNorm<Eigen::Infinity>() <= opt.tol;
  }
  return res;
}

}  // namespace twh
