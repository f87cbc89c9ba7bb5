#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "twh/gf2.hpp"
#include "twh/model.hpp"
#include "twh/orbits.hpp"
#include "twh/stationary.hpp"

namespace twh {

// Z2 chain complex generated by hyperbolic rest points graded by Morse index,
// with boundary entries i(X,Y) from the orbit counts.
struct ChainComplex {
  std::map<int, std::vector<std::string>> grades;   // grade -> ordered generator ids
  std::map<int, GF2Matrix> boundaries;              // grade k -> |C_{k-1}| x |C_k|
  IsolatingSet set;
  bool certified = true;

  int min_grade() const { return grades.empty() ? 0 : grades.begin()->first; }
  int max_grade() const { return grades.empty() ? -1 : grades.rbegin()->first; }
  std::size_t generators(int k) const {
    auto it = grades.find(k);
    return it == grades.end() ? 0 : it->second.size();
  }
  std::size_t total_generators() const {
    std::size_t n = 0;
    for (const auto& [k, g] : grades) n += g.size();
    return n;
  }
};

struct HomologyResult {
  std::map<int, int> rank;   // grade -> rank of ker/im
  int total_rank = 0;
  bool certified = true;
  // basis representatives: per grade, generator-combinations spanning the
  // homology (columns over the grade's generator list)
  std::map<int, std::vector<std::vector<std::string>>> representatives;

  int rank_at(int k) const {
    auto it = rank.find(k);
    return it == rank.end() ? 0 : it->second;
  }
};

inline ChainComplex build_complex(const std::vector<StationaryPoint>& points,
                                  const OrbitCount& counts, const IsolatingSet& set,
                                  bool allow_uncertified = false) {
  for (const auto& p : points) {
    if (!set.admits_energy(p.energy)) continue;
    if (!p.hyperbolic)
      throw NonHyperbolicError("build_complex: generator " + p.id + " is not hyperbolic");
  }
  if (!counts.certified && !allow_uncertified)
    throw CertificationError("build_complex: orbit counts are uncertified");

  ChainComplex cx;
  cx.set = set;
  cx.certified = counts.certified;
  for (const auto& p : points) {
    if (!set.admits_energy(p.energy)) continue;
    cx.grades[p.morse_index].push_back(p.id);
  }
  for (auto& [k, ids] : cx.grades) std::sort(ids.begin(), ids.end());

  for (const auto& [k, ids] : cx.grades) {
    auto below = cx.grades.find(k - 1);
    std::size_t rows = below == cx.grades.end() ? 0 : below->second.size();
    GF2Matrix d(rows, ids.size());
    if (rows > 0) {
      for (std::size_t col = 0; col < ids.size(); ++col)
        for (std::size_t row = 0; row < rows; ++row)
          if (counts.mod2(ids[col], below->second[row]) % 2 == 1) d.set(row, col, true);
    }
    cx.boundaries[k] = d;
  }
  return cx;
}

struct DSquaredReport {
  bool ok = true;
  int failing_grade = 0;
  std::string generator_from, generator_to;  // witness pair when it fails
};

inline DSquaredReport check_d_squared(const ChainComplex& cx) {
  DSquaredReport rep;
  for (const auto& [k, dk] : cx.boundaries) {
    auto up = cx.boundaries.find(k + 1);
    if (up == cx.boundaries.end()) continue;
    if (dk.cols() == 0 || up->second.cols() == 0) continue;
    if (dk.rows() == 0) continue;
    GF2Matrix prod = dk.multiply(up->second);
    if (!prod.is_zero()) {
      rep.ok = false;
      rep.failing_grade = k + 1;
      for (std::size_t j = 0; j < prod.cols() && rep.generator_from.empty(); ++j)
        for (std::size_t i = 0; i < prod.rows(); ++i)
          if (prod.get(i, j)) {
            rep.generator_from = cx.grades.at(k + 1)[j];
            rep.generator_to = cx.grades.at(k - 1)[i];
            break;
          }
      return rep;
    }
  }
  return rep;
}

inline HomologyResult compute_homology(const ChainComplex& cx) {
  HomologyResult out;
  out.certified = cx.certified;
  for (const auto& [k, ids] : cx.grades) {
    std::size_t n_k = ids.size();
    const GF2Matrix& dk = cx.boundaries.at(k);
    std::size_t rank_dk = (dk.rows() == 0 || dk.cols() == 0) ? 0 : dk.rank();
    std::size_t rank_up = 0;
    auto up = cx.boundaries.find(k + 1);
    if (up != cx.boundaries.end() && up->second.rows() > 0 && up->second.cols() > 0)
      rank_up = up->second.rank();
    int r = static_cast<int>(n_k - rank_dk - rank_up);
    out.rank[k] = r;
    out.total_rank += r;

    if (r > 0) {
      // representatives: kernel basis vectors independent modulo the image
      GF2Matrix kernel = (dk.rows() == 0 || dk.cols() == 0)
                             ? GF2Matrix::identity(n_k)
                             : dk.kernel_basis();
      // stack image columns then greedily extend by kernel vectors
      std::size_t img_cols = 0;
      GF2Matrix img(0, 0);
      if (up != cx.boundaries.end()) {
        img = up->second;
        img_cols = img.cols();
      }
      std::vector<std::vector<bool>> chosen;
      GF2Matrix span_check(n_k, img_cols + kernel.cols());
      for (std::size_t j = 0; j < img_cols; ++j)
        for (std::size_t i = 0; i < n_k; ++i) span_check.set(i, j, img.get(i, j));
      std::size_t used = img_cols;
      std::size_t base_rank = img_cols == 0 ? 0 : img.rank();
      for (std::size_t j = 0; j < kernel.cols() && chosen.size() < static_cast<std::size_t>(r);
           ++j) {
        for (std::size_t i = 0; i < n_k; ++i) span_check.set(i, used, kernel.get(i, j));
        GF2Matrix trial(n_k, used + 1);
        for (std::size_t jj = 0; jj <= used; ++jj)
          for (std::size_t i = 0; i < n_k; ++i) trial.set(i, jj, span_check.get(i, jj));
        // transpose rank = column rank
        GF2Matrix tt(trial.cols(), trial.rows());
        for (std::size_t i = 0; i < trial.rows(); ++i)
          for (std::size_t jj = 0; jj < trial.cols(); ++jj) tt.set(jj, i, trial.get(i, jj));
        if (tt.rank() == base_rank + chosen.size() + 1) {
          std::vector<bool> v(n_k);
          for (std::size_t i = 0; i < n_k; ++i) v[i] = kernel.get(i, j);
          chosen.push_back(v);
          ++used;
        }
      }
      std::vector<std::vector<std::string>> reps;
      for (const auto& v : chosen) {
        std::vector<std::string> combo;
        for (std::size_t i = 0; i < n_k; ++i)
          if (v[i]) combo.push_back(ids[i]);
        reps.push_back(combo);
      }
      out.representatives[k] = reps;
    }
  }
  return out;
}

// Partition check for the direct-sum property: no counted orbit may join
// different parts, and homology ranks must add per grade.
inline bool direct_sum_check(const ChainComplex& cx, const OrbitCount& counts,
                             const std::map<std::string, int>& part_of) {
  for (const auto& pc : counts.pairs) {
    if (pc.mod2 == 0) continue;
    auto a = part_of.find(pc.source), b = part_of.find(pc.target);
    if (a == part_of.end() || b == part_of.end()) continue;
    if (a->second != b->second)
      throw ValidationError("direct_sum_check: counted orbit " + pc.source + " -> " + pc.target +
                            " crosses the partition");
  }

  std::set<int> parts;
  for (const auto& [id, p] : part_of) parts.insert(p);

  auto total = compute_homology(cx);
  std::map<int, int> sum_rank;
  for (int part : parts) {
    ChainComplex sub;
    sub.set = cx.set;
    sub.certified = cx.certified;
    for (const auto& [k, ids] : cx.grades) {
      std::vector<std::string> keep;
      for (const auto& id : ids)
        if (part_of.count(id) && part_of.at(id) == part) keep.push_back(id);
      if (!keep.empty()) sub.grades[k] = keep;
    }
    for (const auto& [k, ids] : sub.grades) {
      auto below = sub.grades.find(k - 1);
      std::size_t rows = below == sub.grades.end() ? 0 : below->second.size();
      GF2Matrix d(rows, ids.size());
      if (rows > 0) {
        // entries inherited from the full boundary
        const auto& full_cols = cx.grades.at(k);
        const auto& full_rows = cx.grades.at(k - 1);
        const GF2Matrix& dk = cx.boundaries.at(k);
        for (std::size_t col = 0; col < ids.size(); ++col) {
          auto fc = std::find(full_cols.begin(), full_cols.end(), ids[col]) - full_cols.begin();
          for (std::size_t row = 0; row < rows; ++row) {
            auto fr = std::find(full_rows.begin(), full_rows.end(), below->second[row]) -
                      full_rows.begin();
            d.set(row, col, dk.get(fr, fc));
          }
        }
      }
      sub.boundaries[k] = d;
    }
    auto h = compute_homology(sub);
    for (const auto& [k, r] : h.rank) sum_rank[k] += r;
  }

  for (const auto& [k, r] : total.rank)
    if (r != (sum_rank.count(k) ? sum_rank.at(k) : 0)) return false;
  for (const auto& [k, r] : sum_rank)
    if (r != total.rank_at(k)) return false;
  return true;
}

// Connected components of the counted-connection graph; the canonical
// partition for the direct-sum property.
inline std::map<std::string, int> connection_components(const ChainComplex& cx,
                                                        const OrbitCount& counts) {
  std::map<std::string, int> comp;
  std::vector<std::string> all;
  for (const auto& [k, ids] : cx.grades)
    for (const auto& id : ids) all.push_back(id);
  for (const auto& id : all) comp[id] = -1;

  int next = 0;
  for (const auto& seed : all) {
    if (comp[seed] >= 0) continue;
    std::vector<std::string> stack = {seed};
    comp[seed] = next;
    while (!stack.empty()) {
      std::string u = stack.back();
      stack.pop_back();
      for (const auto& pc : counts.pairs) {
        if (pc.mod2 == 0) continue;
        std::string other;
        if (pc.source == u) other = pc.target;
        else if (pc.target == u) other = pc.source;
        else continue;
        if (comp.count(other) && comp[other] < 0) {
          comp[other] = next;
          stack.push_back(other);
        }
      }
    }
    ++next;
  }
  return comp;
}

// psi matrices of a continuation map: for each grade, a |C_k(plus)| x
// |C_k(minus)| matrix of mod-2 nonautonomous connection counts.
struct ContinuationData {
  std::map<int, GF2Matrix> psi;
  bool certified = true;
};

struct ContinuationReport {
  bool chain_map_ok = true;
  bool isomorphism = true;
  std::string failure;
  std::map<int, int> rank_minus, rank_plus;
  // induced map on homology per grade, as a matrix over basis representatives
  std::map<int, GF2Matrix> induced;
};

namespace detail {

// Express vector v (over the generators of grade k) in homology coordinates:
// solve [image basis | representative combos] x = v; the representative
// coefficients are the homology coordinates. Returns false if v is not a
// cycle representative combination.
inline bool homology_coordinates(const ChainComplex& cx, const HomologyResult& h, int k,
                                 const std::vector<bool>& v, std::vector<bool>& coords) {
  const auto& ids = cx.grades.at(k);
  std::size_t n = ids.size();
  auto up = cx.boundaries.find(k + 1);
  std::size_t img_cols = (up != cx.boundaries.end()) ? up->second.cols() : 0;
  std::size_t reps = h.representatives.count(k) ? h.representatives.at(k).size() : 0;

  GF2Matrix A(n, img_cols + reps);
  for (std::size_t j = 0; j < img_cols; ++j)
    for (std::size_t i = 0; i < n; ++i) A.set(i, j, up->second.get(i, j));
  for (std::size_t j = 0; j < reps; ++j) {
    for (const auto& gen : h.representatives.at(k)[j]) {
      auto pos = std::find(ids.begin(), ids.end(), gen) - ids.begin();
      A.set(pos, img_cols + j, true);
    }
  }
  std::vector<bool> x;
  if (!A.solve(v, x)) return false;
  coords.assign(reps, false);
  for (std::size_t j = 0; j < reps; ++j) coords[j] = x[img_cols + j];
  return true;
}

}  // namespace detail

// Verify the chain-map identity d(plus) psi = psi d(minus) over GF(2) and
// that the induced map on homology is an isomorphism in every grade.
inline ContinuationReport continuation_check(const ChainComplex& cx_minus,
                                             const ChainComplex& cx_plus,
                                             const ContinuationData& data) {
  ContinuationReport rep;
  auto h_minus = compute_homology(cx_minus);
  auto h_plus = compute_homology(cx_plus);
  rep.rank_minus = h_minus.rank;
  rep.rank_plus = h_plus.rank;

  // chain map identity per grade
  std::set<int> grades;
  for (const auto& [k, ids] : cx_minus.grades) grades.insert(k);
  for (const auto& [k, ids] : cx_plus.grades) grades.insert(k);
  for (int k : grades) {
    std::size_t nm = cx_minus.generators(k), np = cx_plus.generators(k);
    std::size_t nm1 = cx_minus.generators(k - 1), np1 = cx_plus.generators(k - 1);
    GF2Matrix psi_k = data.psi.count(k) ? data.psi.at(k) : GF2Matrix(np, nm);
    GF2Matrix psi_k1 = data.psi.count(k - 1) ? data.psi.at(k - 1) : GF2Matrix(np1, nm1);
    GF2Matrix dm = cx_minus.boundaries.count(k) ? cx_minus.boundaries.at(k) : GF2Matrix(nm1, nm);
    GF2Matrix dp = cx_plus.boundaries.count(k) ? cx_plus.boundaries.at(k) : GF2Matrix(np1, np);
    if (np1 == 0 || nm == 0) continue;
    GF2Matrix lhs = dp.multiply(psi_k);
    GF2Matrix rhs = psi_k1.multiply(dm);
    if (!(lhs == rhs)) {
      rep.chain_map_ok = false;
      rep.failure = "chain-map identity fails at grade " + std::to_string(k);
      return rep;
    }
  }

  // induced map on homology
  for (const auto& [k, r] : h_minus.rank) {
    if (r != h_plus.rank_at(k)) {
      rep.isomorphism = false;
      rep.failure = "rank mismatch at grade " + std::to_string(k);
      return rep;
    }
    if (r == 0) continue;
    const auto& ids_m = cx_minus.grades.at(k);
    const auto& ids_p = cx_plus.grades.at(k);
    const GF2Matrix& psi_k = data.psi.at(k);
    GF2Matrix induced(r, r);
    for (int j = 0; j < r; ++j) {
      // image of the j-th representative under psi
      std::vector<bool> v(ids_p.size(), false);
      for (const auto& gen : h_minus.representatives.at(k)[j]) {
        auto pos = std::find(ids_m.begin(), ids_m.end(), gen) - ids_m.begin();
        for (std::size_t i = 0; i < ids_p.size(); ++i)
          if (psi_k.get(i, pos)) v[i] = !v[i];
      }
      std::vector<bool> coords;
      if (!detail::homology_coordinates(cx_plus, h_plus, k, v, coords)) {
        rep.isomorphism = false;
        rep.failure = "psi image of a cycle is not a cycle at grade " + std::to_string(k);
        return rep;
      }
      for (int i = 0; i < r; ++i) induced.set(i, j, coords[i]);
    }
    if (induced.rank() != static_cast<std::size_t>(r)) {
      rep.isomorphism = false;
      rep.failure = "induced map not invertible at grade " + std::to_string(k);
      return rep;
    }
    rep.induced[k] = induced;
  }
  for (const auto& [k, r] : h_plus.rank)
    if (r != 0 && h_minus.rank_at(k) != r) {
      rep.isomorphism = false;
      rep.failure = "rank mismatch at grade " + std::to_string(k);
      return rep;
    }
  return rep;
}

// Predicted rank pattern per nonlinearity family: rank 1 in a single grade
// for odd-minus, zero homology for the other families, no prediction for
// custom nonlinearities.
inline std::optional<int> expected_homology(Family family) {
  switch (family) {
    case Family::OddMinus: return 1;
    case Family::OddPlus:
    case Family::EvenMinus:
    case Family::EvenPlus: return 0;
    case Family::Custom: return std::nullopt;
  }
  return std::nullopt;
}

// Forced-existence bookkeeping: with enough hyperbolic generators the
// connection data must attach waves to all but at most one generator
// (odd-minus) or to every generator (other families).
struct ForcingReport {
  int k_guaranteed = 0;           // number of waves the theory forces
  int waves_found = 0;
  std::vector<std::string> endpoints;     // generators that are an endpoint
  std::vector<std::string> uncovered;     // generators with no attached orbit
  int allowed_exceptions = 0;
  bool consistent = true;
  bool vacuous = false;
};

inline ForcingReport forcing_analysis(const std::vector<StationaryPoint>& points,
                                      const std::vector<HeteroclinicOrbit>& orbits,
                                      Family family) {
  ForcingReport rep;
  int hyperbolic = 0;
  for (const auto& p : points)
    if (p.hyperbolic) ++hyperbolic;

  if (family == Family::OddMinus || family == Family::Custom) {
    rep.k_guaranteed = hyperbolic / 2;
    rep.allowed_exceptions = 1;
  } else {
    rep.k_guaranteed = (hyperbolic + 1) / 2;
    rep.allowed_exceptions = 0;
  }
  if (rep.k_guaranteed == 0) {
    rep.vacuous = true;
    return rep;
  }

  std::set<std::string> covered;
  for (const auto& orb : orbits) {
    covered.insert(orb.source_id);
    covered.insert(orb.target_id);
  }
  rep.waves_found = static_cast<int>(orbits.size());
  for (const auto& p : points) {
    if (!p.hyperbolic) continue;
    if (covered.count(p.id))
      rep.endpoints.push_back(p.id);
    else
      rep.uncovered.push_back(p.id);
  }
  rep.consistent = rep.waves_found >= rep.k_guaranteed &&
                   static_cast<int>(rep.uncovered.size()) <= rep.allowed_exceptions;
  return rep;
}

}  // namespace twh
