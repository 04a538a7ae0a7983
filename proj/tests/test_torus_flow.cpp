#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "surgtri/torus_flow.hpp"

using namespace surgtri;
using namespace surgtri::torus;
using C = std::complex<double>;
using State = TorusFieldState<double>;

TEST_CASE("f vanishes when either spinor vanishes") {
  auto x = random_state<double>(11, 2, 0.3, -0.2, 0.5, 0.2);
  auto y = x;
  y.beta.setZero();
  CHECK(eval_f(y) == 0.0);
  y = x;
  y.alpha.setZero();
  CHECK(eval_f(y) == 0.0);
  auto z = x;
  z.alpha.setZero();
  z.beta.setZero();
  const auto g = grad_f(z);
  CHECK(g.a.norm() == 0.0);
  CHECK(g.alpha.norm() == 0.0);
  CHECK(g.beta.norm() == 0.0);
  CHECK(std::abs(g.g0) == 0.0);
}

TEST_CASE("single mode: f = -Re(conj(alpha) i conj(lambda) beta)") {
  auto x = State::zero(1, 0.4, 0.1);
  const int p = x.box().index(1, -1);
  const C al(0.3, 0.7), be(-0.5, 0.2);
  x.alpha(p) = al;
  x.beta(p) = be;
  const C lam = multiplier(0.4, 0.1, 1, -1);
  const double expect = -std::real(std::conj(al) * C(0, 1) * std::conj(lam) * be);
  CHECK(eval_f(x) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("convolution operator agrees with the dense matrix") {
  const auto x = random_state<double>(5, 2, 0.7, 0.1, 1.0, 0.4);
  const auto D = dense_dbar(x);
  CHECK((D * x.alpha - apply_dbar(x, x.alpha)).norm() < 1e-13);
  CHECK((D.adjoint() * x.beta - apply_dbar_star(x, x.beta)).norm() < 1e-13);
  const C I(0, 1);
  const double f_dense = -std::real(x.alpha.dot(I * (D.adjoint() * x.beta)));
  CHECK(eval_f(x) == doctest::Approx(f_dense).epsilon(1e-13));
}

TEST_CASE("gradient matches central differences") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto x = random_state<double>(seed, 3, 0.2, 0.9, 0.7, 0.3);
    CHECK(gradient_fd_error(x, seed + 100) < 1e-6);
  }
}

TEST_CASE("Hessian gap at the flat connections") {
  CHECK(hessian_spectrum(1.0, 1.0, 8).gap == doctest::Approx(0.0));
  CHECK(hessian_spectrum(0.0, 0.0, 8).gap == doctest::Approx(kPi / 2 * std::sqrt(2.0)).epsilon(1e-14));
  for (double u : {0.3, 1.7}) {
    for (double v : {-0.4, 0.95}) {
      const double g = hessian_spectrum(u, v, 4).gap;
      CHECK(hessian_spectrum(u, v, 8).gap == g);
      CHECK(hessian_spectrum(u + 2, v - 2, 4).gap == doctest::Approx(g).epsilon(1e-13));
    }
  }
  CHECK_THROWS_AS(hessian_spectrum(0.0, 0.0, 0), PreconditionError);
}

TEST_CASE("flat state with vanishing spinors is a fixed point") {
  const auto x = State::zero(2, 0.5, 0.5);
  const auto tr = flow(x, 1.0);
  CHECK(tr.states.back().u == 0.5);
  CHECK(tr.states.back().v == 0.5);
  CHECK(tr.states.back().alpha.norm() == 0.0);
}

TEST_CASE("downward flow: energy identity and monotone f") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto x = random_state<double>(seed, 2, 0.3, 0.4, 0.1, 0.1);
    const auto tr = flow(x, 0.2);
    CHECK(energy_identity_error(tr.diag) < 1e-6);
    CHECK(monotonicity_violation(tr.diag) <= 1e-12);
  }
}

TEST_CASE("linearized decay rate equals the gap") {
  for (auto [u, v] : {std::pair{0.0, 0.0}, std::pair{0.5, -0.3}}) {
    const auto r = decay_run(3, u, v);
    CHECK(r.rate == doctest::Approx(r.gap).epsilon(0.02));
    CHECK(loj_check(r.diag, r.gap).holds);
  }
}

TEST_CASE("finite-length check is skipped at a degenerate holonomy") {
  const auto x = random_state<double>(2, 2, 1.0, 1.0, 0.1, 0.0);
  const auto tr = flow(x, 0.1);
  const auto rep = loj_check(tr.diag, hessian_spectrum(1.0, 1.0, 2).gap);
  CHECK_FALSE(rep.applicable);
  CHECK(rep.reason.find("skipped") == 0);
}

TEST_CASE("pack and unpack round trip") {
  const auto x = random_state<double>(9, 2, 0.25, -0.75, 1.0, 1.0);
  const auto y = unpack<double>(pack(x), 2);
  CHECK((y.a - x.a).norm() == 0.0);
  CHECK((y.alpha - x.alpha).norm() == 0.0);
  CHECK((y.beta - x.beta).norm() == 0.0);
  CHECK(y.u == x.u);
  CHECK(y.v == x.v);
}
