#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "twh/model.hpp"

namespace twh {

// Discrete solution of Lap z + f(x,z) = 0 with certificates.
struct StationaryPoint {
  std::string id;
  Vector z;
  double residual_norm = 0.0;
  int morse_index = -1;
  bool hyperbolic = false;
  double spectral_gap = 0.0;
  double energy = 0.0;
};

struct NewtonOptions {
  double tol = 1e-10;
  int max_iters = 60;
  double singular_rcond = 1e-12;
};

// Threshold below which an eigenvalue of Lap + f_u counts as numerically
// zero. Discretization perturbs eigenvalues at O(h^2).
inline double hyperbolicity_threshold(const SpatialProblem& prob, double newton_tol = 1e-10) {
  double h = prob.lap().h;
  return 10.0 * (h * h + newton_tol);
}

inline Vector stationary_residual(const SpatialProblem& prob, const Vector& z) {
  return prob.lap().matrix * z + prob.f_vec(z);
}

inline Matrix stationary_jacobian(const SpatialProblem& prob, const Vector& z) {
  Matrix J = prob.lap().matrix;
  Vector d = prob.fu_vec(z);
  for (int i = 0; i < J.rows(); ++i) J(i, i) += d[i];
  return J;
}

// Symmetric linearization spectrum at z, eigenvalues descending.
inline Vector linearization_spectrum(const SpatialProblem& prob, const Vector& z) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(stationary_jacobian(prob, z));
  if (es.info() != Eigen::Success) throw NumericError("linearization eigensolver failed");
  return es.eigenvalues().reverse();
}

inline std::pair<bool, double> hyperbolicity_check(const SpatialProblem& prob, const Vector& z,
                                                   double threshold = -1.0) {
  if (threshold < 0.0) threshold = hyperbolicity_threshold(prob);
  Vector ev = linearization_spectrum(prob, z);
  double gap = ev.array().abs().minCoeff();
  return {gap > threshold, gap};
}

// Count of eigenvalues of Lap + f_u(.,z) strictly above the zero band.
inline int morse_index(const SpatialProblem& prob, const Vector& z, double threshold = -1.0) {
  if (threshold < 0.0) threshold = hyperbolicity_threshold(prob);
  Vector ev = linearization_spectrum(prob, z);
  int m = 0;
  for (int i = 0; i < ev.size(); ++i) {
    if (std::abs(ev[i]) <= threshold)
      throw NonHyperbolicError("morse_index: eigenvalue inside the zero band, index undefined");
    if (ev[i] > threshold) ++m;
  }
  return m;
}

namespace detail {

// Damped Newton on R(z), optionally deflated against known roots: the
// deflated residual is R(z) / prod_j ||z - z_j||. Returns true on
// convergence of the undeflated residual.
inline bool newton_solve(const SpatialProblem& prob, Vector& z, const NewtonOptions& opt,
                         const std::vector<Vector>* deflate = nullptr) {
  const int n = static_cast<int>(z.size());
  // Residual alone is not enough near degenerate roots (the residual ball can
  // be wide); require the Newton step to have settled as well.
  double last_step = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opt.max_iters; ++it) {
    Vector r = stationary_residual(prob, z);
    double rn = r.norm();
    if (!std::isfinite(rn)) return false;
    double scale = 1.0 + z.norm();
    if (rn <= 1e-15 * scale) return true;
    if (rn <= opt.tol && last_step <= 1e-9 * scale) return true;

    Matrix J = stationary_jacobian(prob, z);
    Vector g = r;
    if (deflate && !deflate->empty()) {
      double m = 1.0;
      Vector grad_log = Vector::Zero(n);
      for (const auto& zj : *deflate) {
        Vector d = z - zj;
        double nd = std::max(d.norm(), 1e-13);
        m /= nd;
        grad_log -= d / (nd * nd);
      }
      // G = m R, dG = m J + m R grad_log^T
      g = m * r;
      J = m * J + g * grad_log.transpose();
    }

    Eigen::FullPivLU<Matrix> lu(J);
    lu.setThreshold(opt.singular_rcond);
    if (!lu.isInvertible())
      throw SingularJacobianError("newton: singular Jacobian at iterate");
    Vector step = lu.solve(-g);
    if (!step.allFinite()) return false;

    // Armijo backtracking on the (deflated) residual norm.
    double gn = g.norm();
    double lambda = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      Vector zt = z + lambda * step;
      Vector rt = stationary_residual(prob, zt);
      double rtn = rt.norm();
      if (deflate && !deflate->empty()) {
        double m = 1.0;
        for (const auto& zj : *deflate) m /= std::max((zt - zj).norm(), 1e-13);
        rtn *= m;
      }
      if (std::isfinite(rtn) && rtn <= (1.0 - 1e-4 * lambda) * gn) {
        z = zt;
        last_step = lambda * step.norm();
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) return rn <= opt.tol;
  }
  return stationary_residual(prob, z).norm() <= opt.tol;
}

}  // namespace detail

// Populate certificates for a converged root.
inline StationaryPoint certify_point(const SpatialProblem& prob, const Vector& z,
                                     const NewtonOptions& opt) {
  StationaryPoint sp;
  sp.z = z;
  sp.residual_norm = stationary_residual(prob, z).norm();
  auto [hyp, gap] = hyperbolicity_check(prob, z, hyperbolicity_threshold(prob, opt.tol));
  sp.hyperbolic = hyp;
  sp.spectral_gap = gap;
  if (hyp) {
    Vector ev = linearization_spectrum(prob, z);
    double thr = hyperbolicity_threshold(prob, opt.tol);
    int m = 0;
    for (int i = 0; i < ev.size(); ++i)
      if (ev[i] > thr) ++m;
    sp.morse_index = m;
  }
  Vector v0 = Vector::Zero(z.size());
  sp.energy = energy(prob, z, v0);
  return sp;
}

inline StationaryPoint solve_newton(const SpatialProblem& prob, Vector guess,
                                    const NewtonOptions& opt = {}) {
  if (guess.size() != prob.dim())
    throw ConfigError("solve_newton: guess does not match grid size");
  if (!detail::newton_solve(prob, guess, opt))
    throw DivergenceError("solve_newton: no convergence within max_iters");
  return certify_point(prob, guess, opt);
}

struct SearchStrategy {
  std::vector<double> mode_amplitudes = {0.25, 0.5, 1.0, 2.0};
  int modes = 4;               // seed along the first few Laplacian modes
  int random_count = 16;       // extra random multistarts
  double random_amplitude = 2.0;
  bool deflation = true;
  int max_deflations_per_seed = 8;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

// Multistart Newton with deflation. Deterministic for a fixed strategy:
// results are deduplicated in L2, then sorted by energy and lexicographic
// profile before ids are assigned.
inline std::vector<StationaryPoint> find_all(const SpatialProblem& prob,
                                             const SearchStrategy& strat = {},
                                             const NewtonOptions& opt = {}) {
  const int n = prob.dim();
  const auto& L = prob.lap();

  std::vector<Vector> seeds;
  seeds.push_back(Vector::Zero(n));
  int modes = std::min(strat.modes, n);
  for (int k = 0; k < modes; ++k) {
    // Mode shapes scaled to unit amplitude; eigenvector columns are
    // Euclidean-normalized, so undo the 1/sqrt(h) factor.
    Vector mode = L.eigenvectors.col(k);
    double scale = mode.array().abs().maxCoeff();
    if (scale > 0) mode /= scale;
    for (double amp : strat.mode_amplitudes) {
      seeds.push_back(amp * mode);
      seeds.push_back(-amp * mode);
    }
  }
  std::mt19937_64 rng(strat.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int r = 0; r < strat.random_count; ++r) {
    Vector s(n);
    for (int i = 0; i < n; ++i) s[i] = strat.random_amplitude * unif(rng);
    seeds.push_back(s);
  }

  double vol = prob.volume();
  double dedup_tol = 1e-6 * std::sqrt(vol);
  double cluster_radius = 1e-3 * std::sqrt(vol);

  std::vector<Vector> roots;
  // Duplicate if within the dedup radius, or if two nearby candidates are
  // joined by a midpoint that is itself a solution (degenerate root balls).
  // The smaller-residual representative wins.
  auto is_known = [&](const Vector& z) {
    for (auto& r : roots) {
      double d = prob.l2_norm(Vector(z - r));
      if (d < dedup_tol) return true;
      if (d < cluster_radius) {
        Vector mid = 0.5 * (z + r);
        if (stationary_residual(prob, mid).norm() <= opt.tol) {
          if (stationary_residual(prob, z).norm() < stationary_residual(prob, r).norm()) r = z;
          return true;
        }
      }
    }
    return false;
  };

  for (const auto& seed : seeds) {
    Vector z = seed;
    bool ok = false;
    try {
      ok = detail::newton_solve(prob, z, opt);
    } catch (const SingularJacobianError&) {
      ok = false;
    }
    if (ok && !is_known(z)) roots.push_back(z);

    if (strat.deflation) {
      for (int d = 0; d < strat.max_deflations_per_seed; ++d) {
        Vector zd = seed;
        bool okd = false;
        try {
          okd = detail::newton_solve(prob, zd, opt, &roots);
        } catch (const SingularJacobianError&) {
          okd = false;
        }
        if (!okd) break;
        if (stationary_residual(prob, zd).norm() > opt.tol) break;
        if (is_known(zd)) break;
        roots.push_back(zd);
      }
    }
  }

  std::vector<StationaryPoint> pts;
  pts.reserve(roots.size());
  for (const auto& r : roots) pts.push_back(certify_point(prob, r, opt));

  std::sort(pts.begin(), pts.end(), [](const StationaryPoint& a, const StationaryPoint& b) {
    if (a.energy != b.energy) return a.energy < b.energy;
    for (int i = 0; i < a.z.size(); ++i)
      if (a.z[i] != b.z[i]) return a.z[i] < b.z[i];
    return false;
  });
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i].id = "S" + std::to_string(i);
  return pts;
}

// Lemma-style lower bound: every rest point energy stays above
// -C_f' * Vol(Omega), up to numeric slack.
inline bool energy_bound_check(const std::vector<StationaryPoint>& points, double C_f_prime,
                               double volume) {
  double bound = -C_f_prime * volume;
  double slack = 1e-6 * (1.0 + std::abs(bound));
  for (const auto& p : points)
    if (p.energy < bound - slack) return false;
  return true;
}

}  // namespace twh
