#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "twh/model.hpp"
#include "twh/stationary.hpp"

namespace twh {

// Travelling-wave flow U' = -A(U) with A(u,v) = (-v, Lap u + f(x,u) - c v).
// On Point domains this is the planar ODE; on intervals/circles the state is
// either the full grid or a Galerkin truncation onto the leading Laplacian
// eigenmodes. In Galerkin coordinates a (u = Phi a) the linear part is
// diagonal, which keeps the per-mode spectrum formulas exact.
class FlowSystem {
 public:
  FlowSystem() = default;
  FlowSystem(const SpatialProblem& prob, int galerkin_modes = 0) : prob_(&prob) {
    const auto& L = prob.lap();
    if (galerkin_modes > 0 && galerkin_modes < L.dim) {
      N_ = galerkin_modes;
      galerkin_ = true;
    } else {
      N_ = L.dim;
      galerkin_ = false;
    }
    basis_ = L.eigenvectors.leftCols(N_);
    lam_ = L.eigenvalues.head(N_);
  }

  const SpatialProblem& problem() const { return *prob_; }
  bool galerkin() const { return galerkin_; }
  int modes() const { return N_; }
  int dim() const { return 2 * N_; }

  // Grid <-> mode coordinates. For full-grid systems the basis is the
  // complete eigenvector matrix, so these are exact changes of basis.
  Vector to_modes(const Vector& grid) const { return basis_.transpose() * grid; }
  Vector to_grid(const Vector& modes) const { return basis_ * modes; }

  Vector state_from_grid(const Vector& u, const Vector& v) const {
    Vector y(2 * N_);
    y.head(N_) = to_modes(u);
    y.tail(N_) = to_modes(v);
    return y;
  }
  Vector u_grid(const Vector& y) const { return to_grid(y.head(N_)); }
  Vector v_grid(const Vector& y) const { return to_grid(y.tail(N_)); }

  // Phase-space norm: L2(Omega) on both components.
  double norm(const Vector& y) const {
    double h = prob_->lap().weights[0];
    return std::sqrt(h * y.squaredNorm());
  }

  double energy_of(const Vector& y) const { return energy(*prob_, u_grid(y), v_grid(y)); }

  // Gradient of the energy in mode coordinates.
  Vector energy_gradient(const Vector& y) const {
    double h = prob_->lap().weights[0];
    Vector a = y.head(N_), b = y.tail(N_);
    Vector fproj = basis_.transpose() * prob_->f_vec(to_grid(a));
    Vector g(2 * N_);
    g.head(N_) = -h * ((lam_.array() * a.array()).matrix() + fproj);
    g.tail(N_) = -h * b;
    return g;
  }

  Vector rhs(const Vector& y, double c) const {
    Vector a = y.head(N_), b = y.tail(N_);
    Vector u = to_grid(a);
    Vector fproj = basis_.transpose() * prob_->f_vec(u);
    Vector dy(2 * N_);
    dy.head(N_) = b;
    dy.tail(N_) = -(lam_.array() * a.array()).matrix() - fproj + c * b;
    return dy;
  }
  Vector rhs(const Vector& y) const { return rhs(y, prob_->wave_speed); }

  // Projected symmetric operator Lap + f_u(., u) in mode coordinates.
  Matrix symmetric_operator(const Vector& a) const {
    Vector u = to_grid(a);
    Vector d = prob_->fu_vec(u);
    Matrix S = (basis_.transpose() * d.asDiagonal() * basis_);
    for (int k = 0; k < N_; ++k) S(k, k) += lam_[k];
    return 0.5 * (S + S.transpose());
  }

  Matrix jacobian(const Vector& y, double c) const {
    Matrix J = Matrix::Zero(2 * N_, 2 * N_);
    J.topRightCorner(N_, N_) = Matrix::Identity(N_, N_);
    J.bottomLeftCorner(N_, N_) = -symmetric_operator(y.head(N_));
    J.bottomRightCorner(N_, N_) = c * Matrix::Identity(N_, N_);
    return J;
  }
  Matrix jacobian(const Vector& y) const { return jacobian(y, prob_->wave_speed); }

 private:
  const SpatialProblem* prob_ = nullptr;
  Matrix basis_;
  Vector lam_;
  int N_ = 0;
  bool galerkin_ = false;
};

inline Vector vector_field(const FlowSystem& sys, const Vector& y) {
  if (y.size() != sys.dim()) throw ConfigError("vector_field: dimension mismatch");
  Vector dy = sys.rhs(y);
  if (!dy.allFinite()) throw NumericError("vector_field: non-finite value");
  return dy;
}

// Rest point of the flow in mode coordinates, refined so that rhs = 0 holds
// to tolerance inside the (possibly truncated) system.
inline Vector flow_rest_point(const FlowSystem& sys, const Vector& z_grid, double tol = 1e-11) {
  Vector a = sys.to_modes(z_grid);
  for (int it = 0; it < 50; ++it) {
    Vector y(2 * sys.modes());
    y.head(sys.modes()) = a;
    y.tail(sys.modes()).setZero();
    Vector r = sys.rhs(y).tail(sys.modes());
    if (r.norm() <= tol) break;
    Matrix S = sys.symmetric_operator(a);
    Vector step = S.partialPivLu().solve(r);
    if (!step.allFinite()) throw DivergenceError("flow_rest_point: Newton step failed");
    a += step;
  }
  Vector y(2 * sys.modes());
  y.head(sys.modes()) = a;
  y.tail(sys.modes()).setZero();
  return y;
}

struct RestPointSpectrum {
  std::vector<std::complex<double>> dense;        // eigenvalues of the flow Jacobian
  std::vector<std::complex<double>> closed_form;  // (c -+ sqrt(c^2-4 mu_n))/2 per mode
  Vector mu;                                      // eigenvalues of Lap + f_u at the rest point
  int unstable_dimension = 0;
  double max_mismatch = 0.0;
};

// Spectrum of the linearized flow at a rest point. Each symmetric-operator
// eigenvalue mu contributes the pair (c +- sqrt(c^2 - 4 mu))/2; the dense
// 2N x 2N eigenvalues must agree with this closed form.
inline RestPointSpectrum rest_point_spectrum(const FlowSystem& sys, const Vector& y_rest,
                                             double tol = 1e-8) {
  RestPointSpectrum out;
  double c = sys.problem().wave_speed;
  Matrix S = sys.symmetric_operator(y_rest.head(sys.modes()));
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  out.mu = es.eigenvalues();

  for (int k = 0; k < out.mu.size(); ++k) {
    std::complex<double> disc(c * c - 4.0 * out.mu[k], 0.0);
    std::complex<double> root = std::sqrt(disc);
    out.closed_form.push_back((c - root) / 2.0);
    out.closed_form.push_back((c + root) / 2.0);
  }

  Matrix J = sys.jacobian(y_rest);
  Eigen::EigenSolver<Matrix> ds(J);
  if (ds.info() != Eigen::Success) throw NumericError("rest_point_spectrum: dense solve failed");
  for (int k = 0; k < J.rows(); ++k) out.dense.push_back(ds.eigenvalues()[k]);

  auto key = [](const std::complex<double>& z) {
    return std::make_pair(z.real(), z.imag());
  };
  auto cmp = [&](const std::complex<double>& a, const std::complex<double>& b) {
    return key(a) < key(b);
  };
  std::sort(out.dense.begin(), out.dense.end(), cmp);
  std::sort(out.closed_form.begin(), out.closed_form.end(), cmp);

  double scale = 1.0;
  for (const auto& z : out.closed_form) scale = std::max(scale, std::abs(z));
  for (std::size_t k = 0; k < out.dense.size(); ++k)
    out.max_mismatch =
        std::max(out.max_mismatch, std::abs(out.dense[k] - out.closed_form[k]) / scale);
  if (out.max_mismatch > tol)
    throw NumericError("rest_point_spectrum: dense and closed-form spectra disagree");

  for (const auto& z : out.dense)
    if (z.real() > 0.0) ++out.unstable_dimension;
  return out;
}

// Real bases of the stable/unstable invariant subspaces at a rest point,
// assembled mode by mode from the symmetric eigenproblem. A mode with mu < 0
// splits into one stable and one unstable direction; a mode with mu > 0 has
// its whole (psi,0),(0,psi) plane unstable.
struct InvariantSplitting {
  Matrix unstable;  // dim x n_u
  Matrix stable;    // dim x n_s
};

inline InvariantSplitting invariant_splitting(const FlowSystem& sys, const Vector& y_rest) {
  int N = sys.modes();
  double c = sys.problem().wave_speed;
  Matrix S = sys.symmetric_operator(y_rest.head(N));
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  Vector mu = es.eigenvalues();
  Matrix psi = es.eigenvectors();

  std::vector<Vector> stab, unstab;
  for (int k = 0; k < N; ++k) {
    if (mu[k] < 0.0) {
      double root = std::sqrt(c * c - 4.0 * mu[k]);
      double lam_plus = 0.5 * (c + root);
      double lam_minus = 0.5 * (c - root);
      Vector vu(2 * N), vs(2 * N);
      vu.head(N) = psi.col(k);
      vu.tail(N) = lam_plus * psi.col(k);
      vs.head(N) = psi.col(k);
      vs.tail(N) = lam_minus * psi.col(k);
      unstab.push_back(vu);
      stab.push_back(vs);
    } else {
      Vector e1 = Vector::Zero(2 * N), e2 = Vector::Zero(2 * N);
      e1.head(N) = psi.col(k);
      e2.tail(N) = psi.col(k);
      unstab.push_back(e1);
      unstab.push_back(e2);
    }
  }
  InvariantSplitting out;
  out.unstable = Matrix::Zero(2 * N, unstab.size());
  for (std::size_t j = 0; j < unstab.size(); ++j) out.unstable.col(j) = unstab[j];
  out.stable = Matrix::Zero(2 * N, stab.size());
  for (std::size_t j = 0; j < stab.size(); ++j) out.stable.col(j) = stab[j];
  return out;
}

// Rows spanning the orthogonal complement of the column space of V.
inline Matrix orthogonal_complement_rows(const Matrix& V) {
  int dim = static_cast<int>(V.rows());
  Eigen::HouseholderQR<Matrix> qr(V);
  Matrix Q = qr.householderQ();
  return Q.rightCols(dim - V.cols()).transpose();
}

struct Trajectory {
  std::vector<double> t;
  std::vector<Vector> y;
  std::vector<double> E;
  std::string scheme = "tr-bdf2";
  double atol = 1e-9, rtol = 1e-9;
  bool escaped = false;
  bool settled = false;   // entered and stayed in a rest-point basin
  std::string notes;

  std::size_t size() const { return t.size(); }
};

struct IntegratorOptions {
  double atol = 1e-9;
  double rtol = 1e-9;
  double max_step = 0.05;
  double min_step = 1e-12;
  double escape_radius = 60.0;
  std::size_t max_samples = 4'000'000;
  // Optional settle detection against a list of rest points.
  const std::vector<Vector>* rest_points = nullptr;
  double settle_tol = 1e-8;
};

namespace detail {

// One TR-BDF2 step (ESDIRK, gamma = 2 - sqrt(2)) with embedded third-order
// error weights. Returns false if the stage Newton iterations fail.
template <typename Rhs, typename Jac>
bool trbdf2_step(const Rhs& rhs, const Jac& jac, double t, const Vector& y, double h,
                 Vector& y_out, double& err_wrms, double atol, double rtol) {
  static const double gamma = 2.0 - std::sqrt(2.0);
  static const double d = gamma / 2.0;
  static const double w = std::sqrt(2.0) / 4.0;
  // embedded weights (third order)
  static const double bh2 = 1.0 / (6.0 * gamma * (1.0 - gamma));
  static const double bh3 = 0.5 - gamma * bh2;
  static const double bh1 = 1.0 - bh2 - bh3;

  const int n = static_cast<int>(y.size());
  Vector f1 = rhs(t, y);
  if (!f1.allFinite()) return false;

  Matrix M = Matrix::Identity(n, n) - h * d * jac(t, y);
  Eigen::PartialPivLU<Matrix> lu(M);

  auto stage = [&](double tc, const Vector& rhs_fixed, Vector& ys, Vector& fs) {
    // Solve ys = rhs_fixed + h*d*f(tc, ys) by simplified Newton.
    for (int it = 0; it < 12; ++it) {
      fs = rhs(tc, ys);
      if (!fs.allFinite()) return false;
      Vector g = ys - rhs_fixed - h * d * fs;
      double gn = g.norm();
      if (gn <= 1e-13 * (1.0 + ys.norm())) return true;
      Vector dy = lu.solve(g);
      ys -= dy;
      if (dy.norm() <= 1e-13 * (1.0 + ys.norm())) {
        fs = rhs(tc, ys);
        return fs.allFinite();
      }
    }
    // accept if the final residual is small
    Vector g = ys - rhs_fixed - h * d * fs;
    return g.norm() <= 1e-10 * (1.0 + ys.norm());
  };

  // TR stage at t + gamma h
  Vector y2 = y + gamma * h * f1;  // predictor
  Vector f2(n);
  if (!stage(t + gamma * h, y + h * d * f1, y2, f2)) return false;

  // BDF2-equivalent stage at t + h
  Vector y3 = y2 + (1.0 - gamma) * h * f2;  // predictor
  Vector f3(n);
  if (!stage(t + h, y + h * w * (f1 + f2), y3, f3)) return false;

  y_out = y + h * (w * f1 + w * f2 + d * f3);
  Vector err = h * ((w - bh1) * f1 + (w - bh2) * f2 + (d - bh3) * f3);

  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(y_out[i]));
    double e = err[i] / sc;
    s += e * e;
  }
  err_wrms = std::sqrt(s / n);
  return true;
}

}  // namespace detail

// Adaptive implicit integration of y' = F(t,y) from t0 to t1 (t1 < t0 works
// and integrates backwards). Records every accepted knot.
template <typename Rhs, typename Jac>
Trajectory integrate_generic(const Rhs& rhs, const Jac& jac,
                             const std::function<double(const Vector&)>& energy_of, double t0,
                             double t1, const Vector& y0, const IntegratorOptions& opt) {
  if (!y0.allFinite()) throw NumericError("integrate: non-finite initial state");
  Trajectory traj;
  traj.atol = opt.atol;
  traj.rtol = opt.rtol;

  double dir = t1 >= t0 ? 1.0 : -1.0;
  double span = std::abs(t1 - t0);
  double h = std::min(opt.max_step, span / 16.0 + 1e-30);
  double t = t0;
  Vector y = y0;

  auto signed_rhs = [&](double tt, const Vector& yy) -> Vector {
    return dir * rhs(t0 + dir * (tt - t0), yy);
  };
  // For backward runs integrate z(s) = y(t0 - (s - t0)) forward in s.
  auto signed_jac = [&](double tt, const Vector& yy) -> Matrix {
    return dir * jac(t0 + dir * (tt - t0), yy);
  };

  traj.t.push_back(t0);
  traj.y.push_back(y);
  traj.E.push_back(energy_of(y));

  double s_end = t0 + span;
  double s = t0;
  int settle_run = 0;
  while (s < s_end - 1e-14 * (1.0 + std::abs(s_end))) {
    h = std::min(h, s_end - s);
    Vector y_next;
    double err = 0.0;
    bool ok = detail::trbdf2_step(signed_rhs, signed_jac, s, y, h, y_next, err, opt.atol, opt.rtol);
    if (!ok || err > 1.0) {
      h *= ok ? std::max(0.2, 0.9 * std::pow(err, -1.0 / 3.0)) : 0.25;
      if (h < opt.min_step)
        throw NumericError("integrate: step size underflow (stiffness failure)");
      continue;
    }
    s += h;
    y = y_next;
    t = t0 + dir * (s - t0);
    traj.t.push_back(t);
    traj.y.push_back(y);
    traj.E.push_back(energy_of(y));
    if (traj.size() > opt.max_samples) throw NumericError("integrate: sample budget exhausted");

    double grow = err > 1e-14 ? 0.9 * std::pow(err, -1.0 / 3.0) : 5.0;
    h = std::min(opt.max_step, h * std::min(5.0, std::max(0.2, grow)));

    if (y.norm() > opt.escape_radius) {
      traj.escaped = true;
      traj.notes = "escape radius exceeded";
      break;
    }
    if (opt.rest_points) {
      bool near_rest = false;
      for (const auto& rp : *opt.rest_points)
        if ((y - rp).norm() < opt.settle_tol) near_rest = true;
      settle_run = near_rest ? settle_run + 1 : 0;
      if (settle_run > 8) {
        traj.settled = true;
        break;
      }
    }
  }
  return traj;
}

inline Trajectory integrate(const FlowSystem& sys, const Vector& y0, double t0, double t1,
                            const IntegratorOptions& opt = {}) {
  auto rhs = [&](double, const Vector& y) { return sys.rhs(y); };
  auto jac = [&](double, const Vector& y) { return sys.jacobian(y); };
  std::function<double(const Vector&)> en = [&](const Vector& y) { return sys.energy_of(y); };
  return integrate_generic(rhs, jac, en, t0, t1, y0, opt);
}

// Max deviation of the Lyapunov identity dE/dt = -c ||v||^2 along a sampled
// trajectory, using the nonuniform centered difference for dE/dt.
inline double energy_rate_check(const FlowSystem& sys, const Trajectory& traj) {
  if (traj.size() < 3) throw ConfigError("energy_rate_check: need at least 3 samples");
  double c = sys.problem().wave_speed;
  double h_weight = sys.problem().lap().weights[0];
  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < traj.size(); ++k) {
    double h0 = traj.t[k] - traj.t[k - 1];
    double h1 = traj.t[k + 1] - traj.t[k];
    if (h0 <= 0.0 || h1 <= 0.0) continue;
    double dE = -h1 / (h0 * (h0 + h1)) * traj.E[k - 1] + (h1 - h0) / (h0 * h1) * traj.E[k] +
                h0 / (h1 * (h0 + h1)) * traj.E[k + 1];
    const Vector& y = traj.y[k];
    double v2 = h_weight * y.tail(y.size() / 2).squaredNorm();
    worst = std::max(worst, std::abs(dE + c * v2));
  }
  return worst;
}

struct SpectralFlowResult {
  int net = 0;             // signed crossings, + when an eigenvalue leaves the positive axis
  int raw = 0;             // unsigned crossing count
  int net_paper_sign = 0;  // opposite orientation, kept for reference
  std::vector<double> crossing_times;
  bool tangential_warning = false;
  std::string convention = "downward_positive";
};

// Net count of eigenvalue crossings of Lap + f_u(., u(t)) through zero along
// a trajectory. Crossings are localized by bisection between knots; the sign
// convention is pinned so that the net count equals m(z_-) - m(z_+).
inline SpectralFlowResult spectral_flow(const FlowSystem& sys, const Trajectory& traj,
                                        double zero_band = -1.0) {
  if (traj.size() < 2) throw ConfigError("spectral_flow: trajectory too short");
  if (zero_band < 0.0) zero_band = hyperbolicity_threshold(sys.problem());

  auto count_positive = [&](const Vector& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sys.symmetric_operator(a));
    int m = 0;
    for (int i = 0; i < es.eigenvalues().size(); ++i)
      if (es.eigenvalues()[i] > 0.0) ++m;
    return m;
  };
  auto min_abs_eig = [&](const Vector& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sys.symmetric_operator(a));
    return es.eigenvalues().array().abs().minCoeff();
  };

  SpectralFlowResult out;
  int linger = 0;
  int m_prev = count_positive(traj.y.front().head(sys.modes()));
  for (std::size_t k = 1; k < traj.size(); ++k) {
    int m_here = count_positive(traj.y[k].head(sys.modes()));
    if (m_here != m_prev) {
      // bisect on the segment for the crossing time; states interpolate
      // linearly, which is enough to localize the knot-scale crossing
      double lo = traj.t[k - 1], hi = traj.t[k];
      Vector alo = traj.y[k - 1].head(sys.modes()), ahi = traj.y[k].head(sys.modes());
      int mlo = m_prev;
      for (int it = 0; it < 40 && hi - lo > 1e-10 * (1.0 + std::abs(hi)); ++it) {
        Vector amid = 0.5 * (alo + ahi);
        int mmid = count_positive(amid);
        if (mmid != mlo) {
          ahi = amid;
          hi = 0.5 * (lo + hi);
        } else {
          alo = amid;
          lo = 0.5 * (lo + hi);
          mlo = mmid;
        }
      }
      int delta = m_here - m_prev;
      out.net += -delta;  // eigenvalue moving + -> - counts +1
      out.raw += std::abs(delta);
      out.crossing_times.push_back(0.5 * (lo + hi));
    }
    if (min_abs_eig(traj.y[k].head(sys.modes())) < zero_band) {
      if (++linger > 5) out.tangential_warning = true;
    } else {
      linger = 0;
    }
    m_prev = m_here;
  }
  out.net_paper_sign = -out.net;
  return out;
}

}  // namespace twh
