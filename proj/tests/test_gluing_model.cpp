#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "surgtri/gluing_model.hpp"

using namespace surgtri;
using namespace surgtri::glue;

TEST_CASE("unperturbed neck: small values are (tL - tR + j pi) / (2r)") {
  NeckModel m;
  m.kappa = 0.0;
  m.r = 2.0;
  const auto ex = unperturbed_small_values(m);
  REQUIRE(ex.size() == 2);
  CHECK(ex[0] == doctest::Approx(0.3));
  CHECK(ex[1] == doctest::Approx((kPi - 1.2) / 4));
  const auto got = glued_small_eigs(m);
  REQUIRE(got.count == 2);
  CHECK(got.values[0] == doctest::Approx(0.3).epsilon(1e-5));
  CHECK(got.values[1] == doctest::Approx(0.485398163).epsilon(1e-5));
}

TEST_CASE("inertia count agrees with a dense eigensolve") {
  NeckModel m;
  m.r = 3.0;
  const int elements = 120;
  const auto p = assemble_neck(m, elements);
  const auto dense = dense_singular_values(m, elements);
  for (double t : {0.01, 0.05, 0.2, 0.5}) {
    int n = 0;
    for (double s : dense) n += s * s < t;
    CHECK(count_below(p, t) == n);
  }
}

TEST_CASE("perturbed neck: two small values decaying like 1/r") {
  NeckModel m;
  std::vector<double> rs{5, 10, 20, 40}, smallest;
  for (double r : rs) {
    m.r = r;
    const auto e = glued_small_eigs(m);
    CHECK(e.count == m.dim_ker_q());
    for (double v : e.values) CHECK(v >= std::pow(r, -1.5));
    smallest.push_back(e.values.front());
  }
  const double slope = fit_loglog(rs, smallest);
  CHECK(slope >= -1.15);
  CHECK(slope <= -0.85);
}

TEST_CASE("log-log fit of an exact power law") {
  CHECK(fit_loglog({1, 2, 4, 8}, {3, 1.5, 0.75, 0.375}) == doctest::Approx(-1.0));
}

TEST_CASE("cut-off profile") {
  CHECK(cutoff(-1.0) == 1.0);
  CHECK(cutoff(1.0) == 0.0);
  CHECK(cutoff(0.0) == doctest::Approx(0.5));
  for (double s = -1; s <= 1; s += 0.01) CHECK(std::abs(cutoff_derivative(s)) <= 1.0);
  const double h = 1e-6;
  CHECK(cutoff_derivative(0.3) == doctest::Approx((cutoff(0.3 + h) - cutoff(0.3 - h)) / (2 * h)).epsilon(1e-6));
}

TEST_CASE("pre-gluing error") {
  PreGlueProfile p;
  const auto zero = pre_glue(p, [](double) { return 0.0; }, 1.0);
  CHECK(zero.sup_error == 0.0);
  CHECK(zero.certified);
  const auto e10 = pre_glue(p, [](double t) { return std::exp(-t); }, 1.0);
  CHECK(e10.sup_error <= std::exp(-8.0));
  CHECK(e10.certified);
  p.r = 20;
  const auto e20 = pre_glue(p, [](double t) { return std::exp(-t); }, 1.0);
  CHECK(std::log(e20.sup_error) - std::log(e10.sup_error) == doctest::Approx(-10.0).epsilon(1e-3));
}

TEST_CASE("contraction: zero error term gives the zero solution") {
  ContractionProblem p;
  const auto inst = make_contraction_instance(4, p);
  const auto c = contract_solve(inst);
  CHECK(c.fixed_point.norm() == 0.0);
  CHECK(c.in_ball);
}

TEST_CASE("contraction: scalar quadratic has the closed-form fixed point") {
  ContractionProblem p;
  p.state_dim = 1;
  p.sigma_norm = 1e-3;
  const double lam = p.lambda_gap, C = p.C_quad, sig = p.sigma_norm;
  const auto c = contract_solve(
      p, [&](const Eigen::VectorXd& x) { return Eigen::VectorXd((C * x.array().square()).matrix()); },
      Eigen::VectorXd::Constant(1, sig), [&](const Eigen::VectorXd& y) { return Eigen::VectorXd(y / lam); });
  // x = -(C x^2 + sigma) / lambda
  const double exact = (-lam + std::sqrt(lam * lam - 4 * C * sig)) / (2 * C);
  CHECK(c.fixed_point(0) == doctest::Approx(exact).epsilon(1e-12));
  CHECK(c.measured_factor <= c.factor_bound);
  CHECK(c.factor_bound == doctest::Approx(0.8));
  CHECK(c.in_ball);
}

TEST_CASE("contraction: seeded instances converge inside the ball") {
  ContractionProblem p;
  p.sigma_norm = 1e-3;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const auto inst = make_contraction_instance(s, p);
    const auto c = contract_solve(inst);
    CHECK(c.in_ball);
    CHECK(c.residual < 1e-12);
    CHECK(c.measured_factor <= c.factor_bound);
  }
}

TEST_CASE("contraction: violated hypotheses are named") {
  ContractionProblem p;
  p.eps_ball = 0.06;
  REQUIRE(violated_inequality(p).has_value());
  CHECK(*violated_inequality(p) == "eps_ball < lambda_gap/(2*C_quad)");
  try {
    contract_solve(make_contraction_instance(1, p));
    FAIL("expected InadmissibleError");
  } catch (const InadmissibleError& e) {
    CHECK(e.inequality == "eps_ball < lambda_gap/(2*C_quad)");
  }
  ContractionProblem q;
  q.sigma_norm = 0.01;
  CHECK(*violated_inequality(q) == "sigma_norm <= C_quad*eps_ball^2");
}
