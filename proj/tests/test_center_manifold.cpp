#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "surgtri/center_manifold.hpp"

using namespace surgtri;
using namespace surgtri::cm;
using C = std::complex<double>;
using V = Vec3c<double>;

namespace {

V vec(C a, C b, C c) { return V{a, b, c}; }

double dist(const V& a, const V& b) { return (a - b).norm(); }

}  // namespace

TEST_CASE("vector field at fixed points and on the decaying family") {
  CHECK(vector_field(vec(1, 0, 0)).norm() == 0.0);
  CHECK(vector_field(vec(0, 1, 0)).norm() == 0.0);
  const double r2 = std::sqrt(2.0);
  CHECK(dist(vector_field(vec(-2, r2, r2)), vec(2, -r2, -r2)) < 1e-15);
}

TEST_CASE("vector field matches a hand-expanded real form") {
  // z = x + i y componentwise; compare with the expanded products
  const V z = vec({0.3, -1.1}, {0.7, 0.2}, {-0.4, 0.9});
  const auto d = vector_field(z);
  const double x1 = 0.3, y1 = -1.1, x2 = 0.7, y2 = 0.2, x3 = -0.4, y3 = 0.9;
  CHECK(d(0).real() == doctest::Approx(x2 * x3 + y2 * y3).epsilon(1e-14));
  CHECK(d(0).imag() == doctest::Approx(x2 * y3 - y2 * x3).epsilon(1e-14));
  CHECK(d(1).real() == doctest::Approx((x1 * x3 + y1 * y3) / 2).epsilon(1e-14));
  CHECK(d(2).imag() == doctest::Approx((x1 * y2 + y1 * x2) / 2).epsilon(1e-14));
}

TEST_CASE("conserved quantities are constant along the field (derivative oracle)") {
  // d/dh c(z + h F(z)) at h = 0 by central differences
  const V z = vec({0.5, 0.1}, {-0.3, 0.8}, {0.6, -0.2});
  const V F = vector_field(z);
  const double h = 1e-6;
  const auto cp = conserved(V(z + h * F)).as_array(), cm_ = conserved(V(z - h * F)).as_array();
  for (int i = 0; i < 3; ++i) CHECK(std::abs(cp[std::size_t(i)] - cm_[std::size_t(i)]) / (2 * h) < 1e-8);
}

TEST_CASE("classification examples") {
  const double r2 = std::sqrt(2.0);
  CHECK(classify(vec(r2, 1, 1)).kind == StableClass::on_stable_cone);
  const auto g = classify(vec(2, 1, 1));
  CHECK(g.kind == StableClass::on_stable_general);
  CHECK(g.a_inf_sq == doctest::Approx(2.0));
  CHECK(classify(vec(1, 1, 0)).kind == StableClass::off_stable);
  CHECK(std::string(to_string(StableClass::off_stable)) == "off_stable");
}

TEST_CASE("gauge rotation examples and invariance of the triple") {
  const double pi = kPi;
  CHECK(dist(gauge_rotate(vec(1, 1, 1), pi), vec(1, -1, -1)) < 1e-15);
  CHECK(dist(gauge_rotate(vec(1, 0, 0), 0.37), vec(1, 0, 0)) == 0.0);
  CHECK(dist(gauge_rotate(vec(0, C(0, 1), 1), pi / 2), vec(0, -1, C(0, 1))) < 1e-15);
  const V z = vec({0.2, 0.4}, {1.0, -0.5}, {0.3, 0.3});
  const auto a = conserved(z).as_array(), b = conserved(gauge_rotate(z, 1.234)).as_array();
  for (int i = 0; i < 3; ++i) CHECK(a[std::size_t(i)] == doctest::Approx(b[std::size_t(i)]).epsilon(1e-14));
}

TEST_CASE("fixed point trajectory has zero drift") {
  const auto tr = integrate(CMState<double>{vec(1, 0, 0), 0.0}, 10.0);
  CHECK(tr.drift() == 0.0);
  CHECK(dist(tr.samples.back().x, vec(1, 0, 0)) == 0.0);
}

TEST_CASE("exact decaying family is reproduced by the integrator") {
  for (double phi : {0.0, 0.7, 2.5}) {
    CHECK(exact_family_residual(1.0, phi) < 1e-14);
    CHECK(exact_family_residual(37.0, phi) < 1e-15);
    const auto ts = geometric_times(1.0, 100.0, 50);
    const auto tr = integrate(CMState<double>{exact_decaying(1.0, phi), 1.0}, 100.0, {}, ts, false);
    double worst = 0;
    for (const auto& s : tr.samples) worst = std::max(worst, dist(s.x, exact_decaying(s.s, phi)) / exact_decaying(s.s, phi).norm());
    CHECK(worst < 1e-9);
    CHECK(fit_decay_exponent(tr.samples) == doctest::Approx(-1.0).epsilon(1e-3));
  }
}

TEST_CASE("(sqrt2 i, 1, i): forward blow-up at sqrt2, backward drift below 1e-8") {
  // On the stable cone but not on the forward-decaying branch: the forward flow
  // leaves every bounded set at s = sqrt2, so the drift check runs backward.
  const V z0 = vec(C(0, std::sqrt(2.0)), 1, C(0, 1));
  CHECK_THROWS_AS(integrate(CMState<double>{z0, 0.0}, 5.0), DivergenceError<V>);
  const auto tr = integrate(CMState<double>{z0, 0.0}, -5.0);
  CHECK(tr.drift() < 1e-8);
  StepControl tight;
  tight.rtol /= 2;
  tight.atol /= 2;
  const auto tr2 = integrate(CMState<double>{z0, 0.0}, -5.0, tight);
  CHECK(dist(tr.samples.back().x, tr2.samples.back().x) < 1e-8);
}

TEST_CASE("equivariance: integrate commutes with the gauge action") {
  const V z0 = vec({0.3, 0.1}, {0.2, -0.4}, {0.5, 0.2});
  const double ang = 0.9;
  const auto a = integrate(CMState<double>{gauge_rotate(z0, ang), 0.0}, 3.0).samples.back().x;
  const auto b = gauge_rotate(integrate(CMState<double>{z0, 0.0}, 3.0).samples.back().x, ang);
  CHECK(dist(a, b) < 1e-9);
  CHECK(classify(z0).kind == classify(gauge_rotate(z0, ang)).kind);
}

TEST_CASE("stable cone point decays backward at rate 1/|s|") {
  // (sqrt2, 1, 1) at s = 0 is the decaying family with phi = pi shifted by sqrt2;
  // backward in s it tends to the origin.
  const double r2 = std::sqrt(2.0);
  const double eps = 0.1;
  const V z0 = eps * vec(r2, 1, 1);
  std::vector<double> ts;
  for (double t : geometric_times(1e2, 1e5, 60)) ts.push_back(-t);
  const auto tr = integrate(CMState<double>{z0, 0.0}, -1e5, {}, ts, false);
  const std::vector<Sample<V>> tail(tr.samples.begin() + 1, tr.samples.end());
  const double slope = fit_decay_exponent(tail);
  CHECK(slope >= -1.1);
  CHECK(slope <= -0.9);
  // oracle: the same point is the phi = pi family member at s = -sqrt2 / eps
  for (const auto& smp : tail)
    CHECK(dist(smp.x, exact_decaying(smp.s - r2 / eps, kPi)) < 1e-9 * smp.x.norm() + 1e-12);
}

TEST_CASE("forward blow-up is reported with the last state") {
  const double r2 = std::sqrt(2.0);
  CHECK_THROWS_AS(integrate(CMState<double>{vec(r2, 1, 1), 0.0}, 10.0), DivergenceError<V>);
  try {
    integrate(CMState<double>{vec(r2, 1, 1), 0.0}, 10.0);
  } catch (const DivergenceError<V>& e) {
    CHECK(e.last_s > 1.3);
    CHECK(e.last_s < r2);  // exact blow-up time
  }
}

TEST_CASE("decay fit rejects non-decaying data") {
  const auto tr = integrate(CMState<double>{vec(1, 0, 0), 1.0}, 1000.0, {}, geometric_times(1.0, 1000.0, 20), false);
  CHECK_THROWS_AS(fit_decay_exponent(tr.samples), CertificateError);
}
