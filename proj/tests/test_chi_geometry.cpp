#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "surgtri/chi_geometry.hpp"

using namespace surgtri;
using namespace surgtri::chi;

namespace {

PerturbationCurve staircase() { return build_staircase(0.1, 0.01, 0.2, 3); }

ModuliCurve polyline(std::vector<CharPoint> pts) {
  ModuliCurve m;
  m.segments.push_back(std::move(pts));
  return m;
}

int count_of(const TriangleDecomposition& d, bool y1, int k = 0) {
  for (const auto& c : d.counts)
    if (c.label.y1 == y1 && (y1 || c.label.k == k)) return c.staircase_count;
  return -1;
}

}  // namespace

TEST_CASE("canonical representatives on the cylinder") {
  auto eq = [](CharPoint a, CharPoint b) { return a.u == doctest::Approx(b.u) && a.v == doctest::Approx(b.v); };
  CHECK(eq(canonicalize({3, 2.5}), {3, 0.5}));
  CHECK(eq(canonicalize({0, -1}), {0, -1}));
  CHECK(eq(canonicalize({1, 1}), {1, -1}));
  CHECK(cylinder_distance({0, 0.95}, {0, -0.95}) == doctest::Approx(0.1));
  CHECK(theta_distance({1, 1}) == doctest::Approx(0.0));
  CHECK(theta_distance({-1, 0}) == doctest::Approx(1.0));
}

TEST_CASE("line intersections seen by a vertical probe on u = 0") {
  // samples 0.9 -> -0.7 are joined through v = 1 (shortest lift)
  const auto m = polyline({{0, -0.5}, {0, 0.3}, {0, 0.9}, {0, -0.7}});
  const auto y = intersections(m, SurgeryLine::L_Y());
  REQUIRE(y.size() == 1);
  CHECK(same_point(y[0].p, {0, 0}));
  const auto y1 = intersections(m, SurgeryLine::L_Y1());
  REQUIRE(y1.size() == 1);
  CHECK(same_point(y1[0].p, {0, 1}));
}

TEST_CASE("staircase shape") {
  const auto pc = staircase();
  // one period of margin past the last climb: value is 0 mod 2 at u = 5
  const double r = std::fmod(pc.value(5.0), 2.0);
  CHECK(std::min(std::abs(r), 2.0 - std::abs(r)) < 0.01);
  // each climb adds 2 on top of the slope-1 drift
  CHECK(pc.value(2.1) - pc.value(1.9) - 0.2 == doctest::Approx(2.0).epsilon(0.01));
  CHECK(pc.slope(0.7) >= 1.0);
  CHECK(pc.min_theta_distance() >= pc.theta_margin());
  CHECK(pc.climb_of(4.05).value() == 2);
  CHECK_FALSE(pc.climb_of(3.0).has_value());
}

TEST_CASE("infeasible staircase parameters are named") {
  CHECK_THROWS_AS(build_staircase(0.1, -1.0, 0.2, 3), InfeasibleError);
  CHECK_THROWS_AS(build_staircase(0.1, 0.01, 0.2, -1), InfeasibleError);
}

TEST_CASE("a horizontal segment through a climb meets the staircase once") {
  const auto pc = staircase();
  const auto m = polyline({{3.5, 0.3}, {4.5, 0.3}});
  const auto pts = intersections(m, pc);
  REQUIRE(pts.size() == 1);
  CHECK(pts[0].p.u == doctest::Approx(4.0).epsilon(0.03));
  CHECK(pts[0].p.v == doctest::Approx(0.3));
  CHECK(spinc_of(pts[0].p, pc).k == 2);
  const auto d = decompose_triangle(m, pc);
  CHECK(d.total == 1);
  CHECK(count_of(d, false, 2) == 1);
  CHECK(count_of(d, true) == 0);
}

TEST_CASE("decomposition examples") {
  const auto pc = staircase();
  SUBCASE("slope-0.7 segment crossing u = eta") {
    const auto d = decompose_triangle(polyline({{-0.5, 0.2}, {0.5, 0.9}}), pc);
    CHECK(count_of(d, false, 0) == 1);
    CHECK(count_of(d, true) == 0);
    CHECK(d.total == 1);
  }
  SUBCASE("horizontal segment through the k = 1 climb") {
    const auto d = decompose_triangle(polyline({{1.5, 0.3}, {2.5, 0.3}}), pc);
    CHECK(count_of(d, false, 1) == 1);
    CHECK(d.total == 1);
  }
  SUBCASE("empty curve") {
    const auto d = decompose_triangle(ModuliCurve{}, pc);
    CHECK(d.total == 0);
    for (const auto& c : d.counts) CHECK(c.staircase_count == 0);
  }
}

TEST_CASE("counts equal line intersections for seeded curves") {
  const auto pc = staircase();
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    CAPTURE(seed);
    const auto m = random_moduli_curve(seed, pc);
    const auto d = decompose_triangle(m, pc);
    int sum = 0;
    for (const auto& c : d.counts) {
      CHECK(c.staircase_count == c.line_count);
      sum += c.staircase_count;
    }
    CHECK(sum == d.total);
    CHECK(int(intersections(m, pc).size()) == d.total);
    CHECK(d.assignments.size() == std::size_t(d.total));
  }
}

TEST_CASE("seeded curves are reproducible") {
  const auto pc = staircase();
  const auto a = random_moduli_curve(7, pc), b = random_moduli_curve(7, pc);
  REQUIRE(a.segments.size() == b.segments.size());
  for (std::size_t i = 0; i < a.segments.size(); ++i) {
    REQUIRE(a.segments[i].size() == b.segments[i].size());
    for (std::size_t j = 0; j < a.segments[i].size(); ++j) {
      CHECK(a.segments[i][j].u == b.segments[i][j].u);
      CHECK(a.segments[i][j].v == b.segments[i][j].v);
    }
  }
}

TEST_CASE("spin^c index of staircase points") {
  const auto pc = staircase();
  CHECK(spinc_of({4.02, 0.3}, pc).k == 2);
  CHECK(spinc_of({0.11, -0.7}, pc).k == 0);
  CHECK_THROWS_AS(spinc_of({1.0, 0.0}, pc), PreconditionError);
}

TEST_CASE("eps threshold lies on the ladder and admits the default eps") {
  const auto pc = staircase();
  const auto m = random_moduli_curve(3, pc);
  const auto thr = eps_threshold(m, 0.1, 0.2, 3);
  REQUIRE(thr.has_value());
  CHECK(*thr <= 0.2);
  CHECK(*thr > 0.0);
  const double j = std::log2(0.2 / *thr);
  CHECK(j == doctest::Approx(std::round(j)));
}

TEST_CASE("curves near a singular point violate preconditions") {
  const auto pc = staircase();
  CHECK_THROWS_AS(check_moduli_preconditions(polyline({{0.8, 0.9}, {1.2, 1.1}}), pc), PreconditionError);
}
