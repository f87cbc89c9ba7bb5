#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "support.hpp"
#include "twh/homology.hpp"

using namespace twh;
using Catch::Approx;

namespace {

// Full planar pipeline for the bistable point problem.
struct NagumoPipeline {
  SpatialProblem prob;
  std::vector<StationaryPoint> points;
  OrbitSearchReport search;
  OrbitCount counts;
  ChainComplex complex;

  explicit NagumoPipeline(double c = 1.0) {
    prob = testing::nagumo_point(0.3, c);
    points = find_all(prob);
    search = find_heteroclinics_planar(prob, points);
    counts = count_mod2(search.orbits, points, IsolatingSet{}, search.certified());
    complex = build_complex(points, counts, IsolatingSet{});
  }
};

// Synthetic complex helper: ids per grade and explicit boundary entries.
ChainComplex synthetic(const std::map<int, std::vector<std::string>>& grades,
                       const std::map<int, std::vector<std::pair<std::string, std::string>>>& d) {
  ChainComplex cx;
  cx.grades = grades;
  for (const auto& [k, ids] : cx.grades) {
    auto below = cx.grades.find(k - 1);
    std::size_t rows = below == cx.grades.end() ? 0 : below->second.size();
    GF2Matrix m(rows, ids.size());
    if (d.count(k)) {
      for (const auto& [from, to] : d.at(k)) {
        auto col = std::find(ids.begin(), ids.end(), from) - ids.begin();
        auto row = std::find(below->second.begin(), below->second.end(), to) -
                   below->second.begin();
        m.set(row, col, true);
      }
    }
    cx.boundaries[k] = m;
  }
  return cx;
}

}  // namespace

TEST_CASE("nagumo chain complex has the expected shape") {
  NagumoPipeline pipe;
  REQUIRE(pipe.complex.generators(1) == 1);
  REQUIRE(pipe.complex.generators(0) == 2);
  // d1(a) = (1) + (-1)
  const GF2Matrix& d1 = pipe.complex.boundaries.at(1);
  REQUIRE(d1.rows() == 2);
  REQUIRE(d1.cols() == 1);
  REQUIRE(d1.get(0, 0));
  REQUIRE(d1.get(1, 0));
}

TEST_CASE("d squared vanishes on the nagumo complex") {
  NagumoPipeline pipe;
  REQUIRE(check_d_squared(pipe.complex).ok);
}

TEST_CASE("nagumo homology: total rank one in grade zero") {
  NagumoPipeline pipe;
  auto h = compute_homology(pipe.complex);
  REQUIRE(h.rank_at(0) == 1);
  REQUIRE(h.rank_at(1) == 0);
  REQUIRE(h.total_rank == 1);
}

TEST_CASE("single generator without orbits has rank one") {
  auto prob = testing::odd_minus_point(0.1);
  auto points = find_all(prob);
  auto counts = count_mod2({}, points, IsolatingSet{}, true);
  auto cx = build_complex(points, counts, IsolatingSet{});
  REQUIRE(check_d_squared(cx).ok);
  auto h = compute_homology(cx);
  REQUIRE(h.total_rank == 1);
  REQUIRE(h.rank_at(0) == 1);
}

TEST_CASE("empty stationary set yields the zero homology") {
  auto prob = testing::even_plus_neumann();
  auto points = find_all(prob);
  REQUIRE(points.empty());
  auto counts = count_mod2({}, points, IsolatingSet{}, true);
  auto cx = build_complex(points, counts, IsolatingSet{});
  auto h = compute_homology(cx);
  REQUIRE(h.total_rank == 0);
}

TEST_CASE("uncertified counts are refused unless forced") {
  NagumoPipeline pipe;
  auto counts = pipe.counts;
  counts.certified = false;
  REQUIRE_THROWS_AS(build_complex(pipe.points, counts, IsolatingSet{}), CertificationError);
  auto cx = build_complex(pipe.points, counts, IsolatingSet{}, true);
  REQUIRE_FALSE(cx.certified);
  REQUIRE_FALSE(compute_homology(cx).certified);
}

TEST_CASE("five-generator cascade closes and has total rank one") {
  // the lambda=5 connection pattern: 0 (grade 2) -> both z2 (grade 1) -> both z1
  auto cx = synthetic({{0, {"p", "q"}}, {1, {"x", "y"}}, {2, {"o"}}},
                      {{2, {{"o", "x"}, {"o", "y"}}},
                       {1, {{"x", "p"}, {"x", "q"}, {"y", "p"}, {"y", "q"}}}});
  REQUIRE(check_d_squared(cx).ok);
  auto h = compute_homology(cx);
  REQUIRE(h.total_rank == 1);
  REQUIRE(h.rank_at(0) == 1);
  REQUIRE(h.rank_at(1) == 0);
  REQUIRE(h.rank_at(2) == 0);
}

TEST_CASE("a broken complex is caught with a witness pair") {
  // o -> x only: d1 d2 (o) = p + q != 0
  auto cx = synthetic({{0, {"p", "q"}}, {1, {"x"}}, {2, {"o"}}},
                      {{2, {{"o", "x"}}}, {1, {{"x", "p"}, {"x", "q"}}}});
  auto rep = check_d_squared(cx);
  REQUIRE_FALSE(rep.ok);
  REQUIRE(rep.failing_grade == 2);
  REQUIRE(rep.generator_from == "o");
}

TEST_CASE("single nonzero grade complexes are always closed") {
  auto cx = synthetic({{3, {"a", "b", "c"}}}, {});
  REQUIRE(check_d_squared(cx).ok);
  auto h = compute_homology(cx);
  REQUIRE(h.rank_at(3) == 3);
}

TEST_CASE("homology ranks are invariant under generator reordering and grade shifts") {
  auto base = synthetic({{0, {"p", "q"}}, {1, {"x", "y"}}, {2, {"o"}}},
                        {{2, {{"o", "x"}, {"o", "y"}}},
                         {1, {{"x", "p"}, {"x", "q"}, {"y", "p"}, {"y", "q"}}}});
  auto h0 = compute_homology(base);

  auto reordered = synthetic({{0, {"q", "p"}}, {1, {"y", "x"}}, {2, {"o"}}},
                             {{2, {{"o", "x"}, {"o", "y"}}},
                              {1, {{"x", "p"}, {"x", "q"}, {"y", "p"}, {"y", "q"}}}});
  auto h1 = compute_homology(reordered);
  REQUIRE(h0.rank == h1.rank);

  auto shifted = synthetic({{5, {"p", "q"}}, {6, {"x", "y"}}, {7, {"o"}}},
                           {{7, {{"o", "x"}, {"o", "y"}}},
                            {6, {{"x", "p"}, {"x", "q"}, {"y", "p"}, {"y", "q"}}}});
  auto h2 = compute_homology(shifted);
  REQUIRE(h2.rank_at(5) == h0.rank_at(0));
  REQUIRE(h2.rank_at(6) == h0.rank_at(1));
  REQUIRE(h2.rank_at(7) == h0.rank_at(2));
  REQUIRE(h2.total_rank == h0.total_rank);
}

TEST_CASE("direct sum: two disjoint copies add ranks per grade") {
  // two nagumo-shaped islands with no cross connections
  auto cx = synthetic({{0, {"m1", "p1", "m2", "p2"}}, {1, {"a1", "a2"}}},
                      {{1, {{"a1", "m1"}, {"a1", "p1"}, {"a2", "m2"}, {"a2", "p2"}}}});
  OrbitCount counts;
  for (auto [s, t] : std::vector<std::pair<std::string, std::string>>{
           {"a1", "m1"}, {"a1", "p1"}, {"a2", "m2"}, {"a2", "p2"}}) {
    PairCount pc;
    pc.source = s;
    pc.target = t;
    pc.raw = pc.mod2 = 1;
    counts.pairs.push_back(pc);
  }
  std::map<std::string, int> part = {{"m1", 0}, {"p1", 0}, {"a1", 0},
                                     {"m2", 1}, {"p2", 1}, {"a2", 1}};
  REQUIRE(direct_sum_check(cx, counts, part));
}

TEST_CASE("direct sum rejects partitions crossed by counted orbits") {
  NagumoPipeline pipe;
  // split the saddle targets apart from the source: orbits cross
  std::map<std::string, int> part;
  for (const auto& p : pipe.points) part[p.id] = (p.morse_index == 1) ? 0 : 1;
  REQUIRE_THROWS_AS(direct_sum_check(pipe.complex, pipe.counts, part), ValidationError);
}

TEST_CASE("direct sum with zero boundary accepts any partition") {
  auto cx = synthetic({{0, {"u", "v"}}}, {});
  OrbitCount counts;
  std::map<std::string, int> part = {{"u", 0}, {"v", 1}};
  REQUIRE(direct_sum_check(cx, counts, part));
}

TEST_CASE("connection components partition passes on the nagumo complex") {
  NagumoPipeline pipe;
  auto comp = connection_components(pipe.complex, pipe.counts);
  REQUIRE(direct_sum_check(pipe.complex, pipe.counts, comp));
}

TEST_CASE("continuation: identity psi passes the chain-map and iso checks") {
  NagumoPipeline pipe;
  ContinuationData data;
  for (const auto& [k, ids] : pipe.complex.grades) data.psi[k] = GF2Matrix::identity(ids.size());
  auto rep = continuation_check(pipe.complex, pipe.complex, data);
  REQUIRE(rep.chain_map_ok);
  REQUIRE(rep.isomorphism);
}

TEST_CASE("continuation: a rank-breaking psi is rejected") {
  NagumoPipeline pipe;
  ContinuationData data;
  for (const auto& [k, ids] : pipe.complex.grades) data.psi[k] = GF2Matrix(ids.size(), ids.size());
  auto rep = continuation_check(pipe.complex, pipe.complex, data);
  // zero psi trivially satisfies the chain identity but kills homology
  REQUIRE(rep.chain_map_ok);
  REQUIRE_FALSE(rep.isomorphism);
}

TEST_CASE("expected homology pattern per family") {
  REQUIRE(expected_homology(Family::OddMinus) == 1);
  REQUIRE(expected_homology(Family::OddPlus) == 0);
  REQUIRE(expected_homology(Family::EvenMinus) == 0);
  REQUIRE(expected_homology(Family::EvenPlus) == 0);
  REQUIRE_FALSE(expected_homology(Family::Custom).has_value());
}

TEST_CASE("family classification of custom polynomials") {
  auto prob = testing::nagumo_point();
  REQUIRE(family_class(prob.nonlinearity) == Family::OddMinus);
  Nonlinearity up3;
  up3.family = Family::Custom;
  up3.poly_coeffs = {0.0, 0.5, 0.0, 1.0};
  REQUIRE(family_class(up3) == Family::OddPlus);
  Nonlinearity even;
  even.family = Family::Custom;
  even.poly_coeffs = {1.0, 0.0, 1.0};
  REQUIRE(family_class(even) == Family::EvenPlus);
}

TEST_CASE("forcing analysis on the nagumo system") {
  NagumoPipeline pipe;
  auto rep = forcing_analysis(pipe.points, pipe.search.orbits, family_class(pipe.prob.nonlinearity));
  REQUIRE(rep.k_guaranteed == 1);  // 3 hyperbolic points, 2k <= 3
  REQUIRE(rep.waves_found == 2);
  REQUIRE(rep.consistent);
  REQUIRE(rep.endpoints.size() == 3);  // every generator touches an orbit
  REQUIRE(rep.uncovered.empty());
}

TEST_CASE("forcing analysis is vacuous for a single generator") {
  auto prob = testing::odd_minus_point(0.1);
  auto points = find_all(prob);
  auto rep = forcing_analysis(points, {}, Family::OddMinus);
  REQUIRE(rep.vacuous);
}
