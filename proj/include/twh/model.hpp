#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "twh/util.hpp"

namespace twh {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class DomainKind { Point, Interval, Circle };
enum class Boundary { Dirichlet, Neumann, Periodic };
enum class Family { OddMinus, OddPlus, EvenMinus, EvenPlus, Custom };

inline std::string to_string(DomainKind k) {
  switch (k) {
    case DomainKind::Point: return "point";
    case DomainKind::Interval: return "interval";
    case DomainKind::Circle: return "circle";
  }
  return "?";
}
inline std::string to_string(Boundary b) {
  switch (b) {
    case Boundary::Dirichlet: return "dirichlet";
    case Boundary::Neumann: return "neumann";
    case Boundary::Periodic: return "periodic";
  }
  return "?";
}
inline std::string to_string(Family f) {
  switch (f) {
    case Family::OddMinus: return "odd_minus";
    case Family::OddPlus: return "odd_plus";
    case Family::EvenMinus: return "even_minus";
    case Family::EvenPlus: return "even_plus";
    case Family::Custom: return "custom";
  }
  return "?";
}

// Cross-section Omega together with its boundary condition and grid size.
struct Domain {
  DomainKind kind = DomainKind::Point;
  Boundary boundary = Boundary::Dirichlet;
  double a = 0.0, b = 1.0;   // interval endpoints
  double length = 1.0;       // circle circumference
  int n = 0;                 // grid size, 0 for Point

  double volume() const {
    switch (kind) {
      case DomainKind::Point: return 1.0;
      case DomainKind::Interval: return b - a;
      case DomainKind::Circle: return length;
    }
    return 1.0;
  }

  void validate() const {
    if (kind == DomainKind::Point) return;
    if (n < 2) throw ConfigError("domain: grid size n must be >= 2");
    if (kind == DomainKind::Interval) {
      if (!(a < b)) throw ConfigError("domain: interval requires a < b");
      if (boundary == Boundary::Periodic)
        throw ConfigError("domain: periodic boundary requires a circle");
    }
    if (kind == DomainKind::Circle) {
      if (!(length > 0.0)) throw ConfigError("domain: circle requires length > 0");
      if (boundary != Boundary::Periodic)
        throw ConfigError("domain: circle supports periodic boundary only");
    }
  }
};

// Second-difference Laplacian with the boundary condition folded into the
// stencil, plus its full eigendecomposition and quadrature weights.
//
// Interval grids are cell-centered, x_i = a + (i+1/2)h with h = (b-a)/n, so
// the weights are uniformly h and sum to Vol(Omega) exactly. Dirichlet uses an
// odd mirror ghost (u(-1) = -u(0)), Neumann an even mirror (u(-1) = u(0)).
struct DiscreteLaplacian {
  Matrix matrix;          // dim x dim, symmetric
  Vector eigenvalues;     // sorted descending
  Matrix eigenvectors;    // orthonormal columns, matching eigenvalue order
  Vector weights;         // quadrature weights for integrals over Omega
  Vector nodes;           // grid coordinates
  int dim = 0;
  double h = 0.0;

  double volume() const { return weights.sum(); }
};

inline DiscreteLaplacian build_laplacian(const Domain& dom) {
  dom.validate();
  DiscreteLaplacian L;
  if (dom.kind == DomainKind::Point) {
    L.dim = 1;
    L.matrix = Matrix::Zero(1, 1);
    L.eigenvalues = Vector::Zero(1);
    L.eigenvectors = Matrix::Identity(1, 1);
    L.weights = Vector::Ones(1);
    L.nodes = Vector::Zero(1);
    L.h = 0.0;
    return L;
  }

  int n = dom.n;
  L.dim = n;
  L.matrix = Matrix::Zero(n, n);
  L.nodes = Vector::Zero(n);

  if (dom.kind == DomainKind::Interval) {
    double h = (dom.b - dom.a) / n;
    L.h = h;
    double ih2 = 1.0 / (h * h);
    for (int i = 0; i < n; ++i) {
      L.nodes[i] = dom.a + (i + 0.5) * h;
      L.matrix(i, i) = -2.0 * ih2;
      if (i > 0) L.matrix(i, i - 1) = ih2;
      if (i + 1 < n) L.matrix(i, i + 1) = ih2;
    }
    if (dom.boundary == Boundary::Dirichlet) {
      L.matrix(0, 0) = -3.0 * ih2;
      L.matrix(n - 1, n - 1) = -3.0 * ih2;
    } else {  // Neumann
      L.matrix(0, 0) = -1.0 * ih2;
      L.matrix(n - 1, n - 1) = -1.0 * ih2;
    }
    L.weights = Vector::Constant(n, h);
  } else {  // Circle, periodic
    double h = dom.length / n;
    L.h = h;
    double ih2 = 1.0 / (h * h);
    for (int i = 0; i < n; ++i) {
      L.nodes[i] = i * h;
      L.matrix(i, i) = -2.0 * ih2;
      L.matrix(i, (i + 1) % n) = ih2;
      L.matrix(i, (i + n - 1) % n) = ih2;
    }
    L.weights = Vector::Constant(n, h);
  }

  Eigen::SelfAdjointEigenSolver<Matrix> es(L.matrix);
  if (es.info() != Eigen::Success) throw NumericError("laplacian eigendecomposition failed");
  // Descending eigenvalue order.
  L.eigenvalues = es.eigenvalues().reverse();
  L.eigenvectors = es.eigenvectors().rowwise().reverse();
  return L;
}

// Nonlinearity f(x,u) = sigma * alpha(x) * g_p(u) + h(x,u), where g_p is
// |u|^{p-1}u for the odd families and |u|^p for the even ones. The lower
// order term h is a polynomial in u by default; Custom instances supply f
// directly, either as a polynomial or as callbacks.
struct Nonlinearity {
  Family family = Family::Custom;
  double p = 3.0;
  std::function<double(double)> alpha;        // defaults to 1
  std::vector<double> h_coeffs;               // h(x,u) = sum_k c_k u^k
  std::vector<double> poly_coeffs;            // Custom: f(u) = sum_k c_k u^k

  // Custom callbacks (used when poly_coeffs is empty).
  std::function<double(double, double)> f_fn;    // f(x,u)
  std::function<double(double, double)> fu_fn;   // optional df/du
  std::function<double(double, double)> F_fn;    // optional primitive

  double alpha_at(double x) const { return alpha ? alpha(x) : 1.0; }

  bool is_family() const { return family != Family::Custom; }

  double f(double x, double u) const {
    require_finite(u, "nonlinearity argument");
    switch (family) {
      case Family::OddMinus:
      case Family::OddPlus: {
        double s = family == Family::OddMinus ? -1.0 : 1.0;
        return s * alpha_at(x) * std::pow(std::abs(u), p - 1.0) * u + poly_eval(h_coeffs, u);
      }
      case Family::EvenMinus:
      case Family::EvenPlus: {
        double s = family == Family::EvenMinus ? -1.0 : 1.0;
        return s * alpha_at(x) * std::pow(std::abs(u), p) + poly_eval(h_coeffs, u);
      }
      case Family::Custom:
        if (!poly_coeffs.empty()) return poly_eval(poly_coeffs, u);
        if (f_fn) return f_fn(x, u);
        throw ConfigError("custom nonlinearity lacks both poly_coeffs and callback");
    }
    return 0.0;
  }

  double fu(double x, double u) const {
    require_finite(u, "nonlinearity argument");
    switch (family) {
      case Family::OddMinus:
      case Family::OddPlus: {
        double s = family == Family::OddMinus ? -1.0 : 1.0;
        return s * alpha_at(x) * p * std::pow(std::abs(u), p - 1.0) +
               poly_eval(poly_derivative(h_coeffs), u);
      }
      case Family::EvenMinus:
      case Family::EvenPlus: {
        double s = family == Family::EvenMinus ? -1.0 : 1.0;
        double sgn = u > 0 ? 1.0 : (u < 0 ? -1.0 : 0.0);
        return s * alpha_at(x) * p * std::pow(std::abs(u), p - 1.0) * sgn +
               poly_eval(poly_derivative(h_coeffs), u);
      }
      case Family::Custom:
        if (!poly_coeffs.empty()) return poly_eval(poly_derivative(poly_coeffs), u);
        if (fu_fn) return fu_fn(x, u);
        // centered difference fallback
        {
          double d = 1e-6 * (1.0 + std::abs(u));
          return (f(x, u + d) - f(x, u - d)) / (2.0 * d);
        }
    }
    return 0.0;
  }

  // Primitive F(x,u) = int_0^u f(x,s) ds; F(x,0) = 0 by construction.
  double F(double x, double u) const {
    require_finite(u, "nonlinearity argument");
    switch (family) {
      case Family::OddMinus:
      case Family::OddPlus: {
        double s = family == Family::OddMinus ? -1.0 : 1.0;
        return s * alpha_at(x) * std::pow(std::abs(u), p + 1.0) / (p + 1.0) +
               poly_eval(poly_antiderivative(h_coeffs), u);
      }
      case Family::EvenMinus:
      case Family::EvenPlus: {
        double s = family == Family::EvenMinus ? -1.0 : 1.0;
        double sgn = u >= 0 ? 1.0 : -1.0;
        return s * alpha_at(x) * sgn * std::pow(std::abs(u), p + 1.0) / (p + 1.0) +
               poly_eval(poly_antiderivative(h_coeffs), u);
      }
      case Family::Custom:
        if (!poly_coeffs.empty()) return poly_eval(poly_antiderivative(poly_coeffs), u);
        if (F_fn) return F_fn(x, u);
        return integrate_adaptive([&](double s) { return f(x, s); }, 0.0, u, 1e-10);
    }
    return 0.0;
  }
};

// Family classification of a custom polynomial nonlinearity by its leading
// term: integer powers make |u|^{p-1}u (odd p) and |u|^p (even p) literal
// polynomials, so the class is read off the top coefficient.
inline Family family_class(const Nonlinearity& nl) {
  if (nl.family != Family::Custom) return nl.family;
  const auto& c = nl.poly_coeffs;
  int deg = -1;
  for (int k = static_cast<int>(c.size()) - 1; k >= 0; --k)
    if (c[k] != 0.0) {
      deg = k;
      break;
    }
  if (deg < 2) return Family::Custom;
  double lead = c[deg];
  if (deg % 2 == 1) return lead < 0 ? Family::OddMinus : Family::OddPlus;
  return lead < 0 ? Family::EvenMinus : Family::EvenPlus;
}

// Full problem instance: cross-section, nonlinearity, wave speed.
struct SpatialProblem {
  Domain domain;
  Nonlinearity nonlinearity;
  double wave_speed = 1.0;

  std::shared_ptr<const DiscreteLaplacian> laplacian;

  void build() {
    domain.validate();
    if (!(wave_speed > 0.0)) throw ConfigError("wave_speed must be > 0");
    if (nonlinearity.is_family()) {
      if (!(nonlinearity.p > 1.0)) throw ConfigError("nonlinearity: p must exceed 1");
    }
    laplacian = std::make_shared<DiscreteLaplacian>(build_laplacian(domain));
  }

  int dim() const { return laplacian ? laplacian->dim : 0; }
  double volume() const { return domain.volume(); }
  const DiscreteLaplacian& lap() const {
    if (!laplacian) throw ConfigError("problem not built");
    return *laplacian;
  }

  double f(double x, double u) const { return nonlinearity.f(x, u); }
  double fu(double x, double u) const { return nonlinearity.fu(x, u); }
  double F(double x, double u) const { return nonlinearity.F(x, u); }

  Vector f_vec(const Vector& u) const {
    const auto& L = lap();
    Vector r(L.dim);
    for (int i = 0; i < L.dim; ++i) r[i] = f(L.nodes[i], u[i]);
    return r;
  }
  Vector fu_vec(const Vector& u) const {
    const auto& L = lap();
    Vector r(L.dim);
    for (int i = 0; i < L.dim; ++i) r[i] = fu(L.nodes[i], u[i]);
    return r;
  }

  // L2(Omega) inner product and norm via the quadrature weights.
  double inner(const Vector& u, const Vector& v) const {
    return (lap().weights.array() * u.array() * v.array()).sum();
  }
  double l2_norm(const Vector& u) const { return std::sqrt(std::max(0.0, inner(u, u))); }
};

// E(u,v) = int_Omega -1/2 v^2 + 1/2 |grad u|^2 - F(x,u) dx. The gradient term
// is evaluated through the summation-by-parts identity int |grad u|^2 =
// -int u (Lap u), which is exact for the discrete operator.
inline double energy(const SpatialProblem& prob, const Vector& u, const Vector& v) {
  const auto& L = prob.lap();
  if (u.size() != L.dim || v.size() != L.dim)
    throw ConfigError("energy: state dimensions do not match grid");
  double kinetic = 0.0, potential = 0.0;
  for (int i = 0; i < L.dim; ++i) {
    kinetic += L.weights[i] * (-0.5 * v[i] * v[i]);
    potential -= L.weights[i] * prob.F(L.nodes[i], u[i]);
  }
  double grad = 0.0;
  if (prob.domain.kind != DomainKind::Point) {
    Vector Lu = L.matrix * u;
    grad = -0.5 * (L.weights.array() * u.array() * Lu.array()).sum();
  }
  double e = kinetic + grad + potential;
  require_finite(e, "energy");
  return e;
}

// Hypothesis checking over a sampled (x,u) grid. The report records the grid
// so that failures are reproducible; it is a necessary check, not a proof.
struct HypothesisReport {
  bool f1_pass = false;
  double C_f = 0.0;
  double p_used = 0.0;

  bool f2_pass = false;
  bool f2_variant_even = false;  // false: (f2), true: (f2')
  double theta = 0.0;
  double C_f_prime = 0.0;

  bool f3_pass = false;
  double f3_liminf = 0.0;

  double u_min = 0.0, u_max = 0.0;
  int samples = 0;

  bool all_pass(bool need_f3) const { return f1_pass && f2_pass && (!need_f3 || f3_pass); }
};

namespace detail {

// C_f'(theta) on |u| <= range, i.e. max(0, |F| - theta/2 * f * w(u)) with
// w = u for (f2) and w = |u| for (f2').
inline double fit_cf_prime(const SpatialProblem& prob, double theta, bool even_variant,
                           double range, int samples) {
  const auto& L = prob.lap();
  double worst = 0.0;
  for (int j = 0; j < samples; ++j) {
    double u = -range + 2.0 * range * j / (samples - 1);
    for (int i = 0; i < L.dim; ++i) {
      double x = L.nodes[i];
      double w = even_variant ? std::abs(u) : u;
      double g = std::abs(prob.F(x, u)) - 0.5 * theta * prob.f(x, u) * w;
      worst = std::max(worst, g);
    }
  }
  return worst;
}

// A theta is admissible when the fitted constant stops growing as the grid
// range doubles; inadmissible thetas give C_f' growing like range^{p+1}.
inline bool theta_admissible(const SpatialProblem& prob, double theta, bool even_variant,
                             double range, int samples, double* c_out) {
  double c_half = fit_cf_prime(prob, theta, even_variant, 0.5 * range, samples);
  double c_full = fit_cf_prime(prob, theta, even_variant, range, samples);
  if (c_out) *c_out = c_full;
  return c_full <= 1.1 * c_half + 1e-9;
}

}  // namespace detail

inline HypothesisReport validate_hypotheses(const SpatialProblem& prob, double u_range,
                                            int sample_count) {
  if (sample_count < 8) throw ConfigError("validate_hypotheses: empty or degenerate grid");
  if (!(u_range > 0.0)) throw ConfigError("validate_hypotheses: u_range must be positive");

  HypothesisReport rep;
  rep.u_min = -u_range;
  rep.u_max = u_range;
  rep.samples = sample_count;

  const auto& L = prob.lap();
  const auto& nl = prob.nonlinearity;
  double p = nl.is_family() ? nl.p : (nl.poly_coeffs.empty() ? 3.0 : double(nl.poly_coeffs.size() - 1));
  rep.p_used = p;

  // (f1): C_f = max |f| / (1 + |u|^p).
  double cf = 0.0;
  for (int j = 0; j < sample_count; ++j) {
    double u = -u_range + 2.0 * u_range * j / (sample_count - 1);
    for (int i = 0; i < L.dim; ++i)
      cf = std::max(cf, std::abs(prob.f(L.nodes[i], u)) / (1.0 + std::pow(std::abs(u), p)));
  }
  rep.C_f = cf;
  rep.f1_pass = std::isfinite(cf);

  // (f2)/(f2'): theta selection. Families take the sign dictated by sigma and
  // a fixed multiple of the threshold 2/(p+1); Custom scans candidates.
  bool even_variant = nl.family == Family::EvenMinus || nl.family == Family::EvenPlus;
  rep.f2_variant_even = even_variant;
  if (nl.is_family()) {
    double magnitude = std::min(0.95, 1.2 * 2.0 / (p + 1.0));
    bool plus = nl.family == Family::OddPlus || nl.family == Family::EvenPlus;
    double theta = plus ? magnitude : -magnitude;
    double c = 0.0;
    if (detail::theta_admissible(prob, theta, even_variant, u_range, sample_count, &c)) {
      rep.f2_pass = true;
      rep.theta = theta;
      rep.C_f_prime = c;
    }
  } else {
    for (int k = 19; k >= 1 && !rep.f2_pass; --k) {
      for (double sign : {-1.0, 1.0}) {
        double theta = sign * k / 20.0;
        double c = 0.0;
        if (detail::theta_admissible(prob, theta, false, u_range, sample_count, &c)) {
          rep.f2_pass = true;
          rep.theta = theta;
          rep.C_f_prime = c;
          break;
        }
        if (detail::theta_admissible(prob, theta, true, u_range, sample_count, &c)) {
          rep.f2_pass = true;
          rep.f2_variant_even = true;
          rep.theta = theta;
          rep.C_f_prime = c;
          break;
        }
      }
    }
  }

  // (f3): liminf proxy min_{|u| in [max(1, R/2), R]} inf_x |f/u|. The window
  // moves outward with the range, so a zero of f in the tail keeps failing
  // once the range satisfies the domination precondition. A sign change of f
  // between adjacent window samples pins a zero between them.
  double lo = std::max(1.0, 0.5 * u_range);
  double liminf = std::numeric_limits<double>::infinity();
  for (int i = 0; i < L.dim; ++i) {
    double x = L.nodes[i];
    double prev_u = 0.0, prev_f = 0.0;
    bool have_prev = false;
    for (int j = 0; j < sample_count; ++j) {
      double u = -u_range + 2.0 * u_range * j / (sample_count - 1);
      if (std::abs(u) < lo) {
        have_prev = false;
        continue;
      }
      double fv = prob.f(x, u);
      liminf = std::min(liminf, std::abs(fv / u));
      if (have_prev && prev_u * u > 0.0 && ((prev_f < 0.0 && fv > 0.0) || (prev_f > 0.0 && fv < 0.0)))
        liminf = 0.0;
      prev_u = u;
      prev_f = fv;
      have_prev = true;
    }
  }
  rep.f3_liminf = std::isfinite(liminf) ? liminf : 0.0;
  rep.f3_pass = rep.f3_liminf > 1e-6;

  return rep;
}

// Homotopy (f_t, c_t) between two problem instances, constant outside
// [-ell, ell]. Supported shapes: wave-speed ramps, alpha scalings of a fixed
// f, and linear interpolation between two nonlinearities.
struct HomotopyPath {
  enum class Kind { WaveSpeed, AlphaScale, LinearF };
  Kind kind = Kind::WaveSpeed;
  SpatialProblem base;        // endpoint at t = -infinity
  double ell = 4.0;

  double c_from = 1.0, c_to = 1.0;
  double alpha_from = 1.0, alpha_to = 1.0;
  Nonlinearity f_to;          // LinearF target

  // switch profile s(t): exactly 0 for t <= -ell, exactly 1 for t >= ell
  double s(double t) const { return smooth_step((t + ell) / (2.0 * ell)); }
  double s_dot(double t) const { return smooth_step_derivative((t + ell) / (2.0 * ell)) / (2.0 * ell); }

  double c(double t) const {
    if (kind == Kind::WaveSpeed) return c_from + (c_to - c_from) * s(t);
    return base.wave_speed;
  }
  double alpha(double t) const { return alpha_from + (alpha_to - alpha_from) * s(t); }

  double f(double t, double x, double u) const {
    switch (kind) {
      case Kind::WaveSpeed: return base.f(x, u);
      case Kind::AlphaScale: return alpha(t) * base.f(x, u);
      case Kind::LinearF: return (1.0 - s(t)) * base.f(x, u) + s(t) * f_to.f(x, u);
    }
    return 0.0;
  }
  double fu(double t, double x, double u) const {
    switch (kind) {
      case Kind::WaveSpeed: return base.fu(x, u);
      case Kind::AlphaScale: return alpha(t) * base.fu(x, u);
      case Kind::LinearF: return (1.0 - s(t)) * base.fu(x, u) + s(t) * f_to.fu(x, u);
    }
    return 0.0;
  }
  double F(double t, double x, double u) const {
    switch (kind) {
      case Kind::WaveSpeed: return base.F(x, u);
      case Kind::AlphaScale: return alpha(t) * base.F(x, u);
      case Kind::LinearF: return (1.0 - s(t)) * base.F(x, u) + s(t) * f_to.F(x, u);
    }
    return 0.0;
  }
  double dtF(double t, double x, double u) const {
    switch (kind) {
      case Kind::WaveSpeed: return 0.0;
      case Kind::AlphaScale: return (alpha_to - alpha_from) * s_dot(t) * base.F(x, u);
      case Kind::LinearF: return s_dot(t) * (f_to.F(x, u) - base.F(x, u));
    }
    return 0.0;
  }

  // Endpoint problems. Both share the base grid.
  SpatialProblem endpoint_minus() const {
    SpatialProblem p = base;
    if (kind == Kind::WaveSpeed) p.wave_speed = c_from;
    if (kind == Kind::AlphaScale && alpha_from != 1.0) scale_alpha(p, alpha_from);
    p.build();
    return p;
  }
  SpatialProblem endpoint_plus() const {
    SpatialProblem p = base;
    switch (kind) {
      case Kind::WaveSpeed: p.wave_speed = c_to; break;
      case Kind::AlphaScale: scale_alpha(p, alpha_to); break;
      case Kind::LinearF: p.nonlinearity = f_to; break;
    }
    p.build();
    return p;
  }

 private:
  static void scale_alpha(SpatialProblem& p, double a) {
    Nonlinearity scaled;
    Nonlinearity inner = p.nonlinearity;
    scaled.family = Family::Custom;
    scaled.p = inner.p;
    scaled.f_fn = [inner, a](double x, double u) { return a * inner.f(x, u); };
    scaled.fu_fn = [inner, a](double x, double u) { return a * inner.fu(x, u); };
    scaled.F_fn = [inner, a](double x, double u) { return a * inner.F(x, u); };
    p.nonlinearity = scaled;
  }
};

struct HomotopyReport {
  bool constant_outside = false;    // (n2)
  double Theta = 0.0;               // (n3) fit of |dF/dt| / (1 + |F|)
  double C_f_dprime = 0.0;
  double inf_c = 0.0;
  // epsilon-perturbation quantities
  double sup_alpha_dev = 0.0;       // sup |1 - alpha_t|
  double sup_alpha_rate = 0.0;      // sup |d alpha_t / dt|
  double sup_h_ratio = 0.0;         // sup |h_t| / (1 + |f_*|)
  double epsilon = 0.0;
  bool pass = false;
};

inline HomotopyReport validate_homotopy(const HomotopyPath& path, int sample_count) {
  if (sample_count < 8) throw ConfigError("validate_homotopy: empty grid");
  HomotopyReport rep;

  const auto& L = path.base.lap();
  double range = 10.0;
  double tspan = 3.0 * path.ell;

  // (n2): exact constancy outside [-ell, ell].
  rep.constant_outside = true;
  for (double t : {-tspan, -1.5 * path.ell, 1.5 * path.ell, tspan}) {
    double tref = t < 0 ? -path.ell : path.ell;
    for (int j = 0; j < 16; ++j) {
      double u = -range + 2.0 * range * j / 15.0;
      for (int i = 0; i < L.dim; ++i) {
        double x = L.nodes[i];
        if (std::abs(path.f(t, x, u) - path.f(tref, x, u)) > 0.0) rep.constant_outside = false;
      }
    }
    if (std::abs(path.c(t) - path.c(tref)) > 0.0) rep.constant_outside = false;
  }
  if (!rep.constant_outside)
    throw ValidationError("homotopy endpoints are not constant outside [-ell, ell]");

  // (n1): inf c(t) > 0, plus (n3) fit over the (t, x, u) grid.
  double inf_c = std::numeric_limits<double>::infinity();
  double K = 0.0;
  double sup_adev = 0.0, sup_arate = 0.0, sup_hratio = 0.0;
  for (int k = 0; k < sample_count; ++k) {
    double t = -tspan + 2.0 * tspan * k / (sample_count - 1);
    inf_c = std::min(inf_c, path.c(t));
    sup_adev = std::max(sup_adev, std::abs(1.0 - path.alpha(t)));
    sup_arate = std::max(sup_arate, std::abs((path.alpha_to - path.alpha_from) * path.s_dot(t)));
    for (int j = 0; j < sample_count; ++j) {
      double u = -range + 2.0 * range * j / (sample_count - 1);
      for (int i = 0; i < L.dim; ++i) {
        double x = L.nodes[i];
        double dF = path.dtF(t, x, u);
        double Fv = path.F(t, x, u);
        K = std::max(K, std::abs(dF) / (1.0 + std::abs(Fv)));
        double fstar = path.base.f(x, u);
        double ht = path.f(t, x, u) - path.alpha(t) * fstar;
        sup_hratio = std::max(sup_hratio, std::abs(ht) / (1.0 + std::abs(fstar)));
      }
    }
  }
  rep.inf_c = inf_c;
  rep.Theta = K;
  rep.C_f_dprime = K;
  rep.sup_alpha_dev = sup_adev;
  rep.sup_alpha_rate = sup_arate;
  rep.sup_h_ratio = sup_hratio;
  rep.epsilon = std::max({sup_adev, sup_arate, sup_hratio});
  rep.pass = rep.constant_outside && inf_c > 0.0;
  return rep;
}

}  // namespace twh
