#include <doctest.h>

#include <random>

#include <stickybm/errors.hpp>
#include <stickybm/lp.hpp>
#include <stickybm/model.hpp>

#include "fixtures.hpp"

using namespace stickybm;
using namespace stickybm::testing;

TEST_CASE("validate_model flags") {
  const auto r2 = validate_model(m2());
  CHECK(r2.spd_ok);
  CHECK(r2.stable);
  CHECK(r2.completely_s_ok);
  CHECK(r2.skew_symmetric);
  CHECK(r2.usable());

  auto up = m2();
  up.mu = vec2(1.0, 1.0);
  const auto ru = validate_model(up);
  CHECK_FALSE(ru.stable);
  CHECK_FALSE(ru.usable());

  const auto r3 = validate_model(m3());
  CHECK(r3.stable);
  CHECK(r3.m_matrix);
  CHECK_FALSE(r3.skew_symmetric);
}

TEST_CASE("validate_model records an asymmetric sigma instead of throwing") {
  auto s = m2();
  s.sigma(0, 1) = 0.3;
  const auto r = validate_model(s);
  CHECK_FALSE(r.spd_ok);
  CHECK_FALSE(r.messages.empty());
}

TEST_CASE("dimension mismatch is a configuration error") {
  auto s = m2();
  s.mu = vec1(-1.0);
  CHECK_THROWS_AS(validate_model(s), ConfigError);
  auto n = m2();
  n.stickiness = vec2(-1.0, 0.0);
  CHECK_THROWS_AS(validate_model(n), ConfigError);
}

TEST_CASE("is_completely_s examples") {
  for (int d = 1; d <= 6; ++d) CHECK(is_completely_s(Matrix::Identity(d, d)));
  CHECK_FALSE(is_completely_s(mat2(1.0, -2.0, -2.0, 1.0)));
  CHECK(is_completely_s(mat2(1.0, 0.0, -0.3, 1.0)));
  CHECK_THROWS_AS(is_completely_s(Matrix::Identity(17, 17)), UnsupportedDimensionError);
}

TEST_CASE("is_completely_s is invariant under symmetric permutation") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> off(-0.9, 0.9);
  for (int trial = 0; trial < 40; ++trial) {
    Matrix r(3, 3);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) r(i, j) = i == j ? 1.0 : off(gen);
    }
    Eigen::PermutationMatrix<3> p;
    p.setIdentity();
    std::shuffle(p.indices().data(), p.indices().data() + 3, gen);
    const Matrix permuted = p * r * p.transpose();
    CHECK(is_completely_s(r) == is_completely_s(permuted));
  }
}

TEST_CASE("game value of small matrices") {
  CHECK(lp::game_value(Matrix::Identity(2, 2)) == doctest::Approx(0.5));
  CHECK(lp::game_value(mat2(1.0, -2.0, -2.0, 1.0)) < 0.0);
}

TEST_CASE("levy_exponent") {
  CHECK(levy_exponent(m2(), Vector::Zero(2)) == 0.0);
  CHECK(levy_exponent(m1(), vec1(-1.0)) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(levy_exponent(m3(), vec2(-1.0, -1.0)) == doctest::Approx(4.5).epsilon(1e-15));

  std::mt19937_64 gen(11);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto s = m3();
  for (int trial = 0; trial < 20; ++trial) {
    const Vector th = vec2(n(gen), n(gen));
    const double a = n(gen);
    const double lin = th.dot(s.mu);
    const double quad = 0.5 * th.dot(s.sigma * th);
    CHECK(levy_exponent(s, a * th) == doctest::Approx(a * lin + a * a * quad).epsilon(1e-12));
  }
}

TEST_CASE("skew symmetry examples") {
  const auto i = check_skew_symmetry(m2());
  CHECK(i.holds);
  CHECK(i.residual == 0.0);
  const auto n = check_skew_symmetry(m3());
  CHECK_FALSE(n.holds);
  CHECK(n.residual == doctest::Approx(1.3).epsilon(1e-12));
  const auto k = check_skew_symmetry(skew());
  CHECK(k.holds);
  CHECK(k.residual < 1e-15);

  auto degenerate = m2();
  degenerate.refl(0, 0) = 0.0;
  CHECK_THROWS_AS(check_skew_symmetry(degenerate), PreconditionError);
}

TEST_CASE("skew symmetry outcome survives diagonal rescaling") {
  Matrix dscale = Matrix::Zero(2, 2);
  dscale(0, 0) = 2.0;
  dscale(1, 1) = 0.5;
  for (const auto& base : {m2(), m3(), skew()}) {
    auto scaled = base;
    scaled.sigma = dscale * base.sigma * dscale;
    scaled.refl = dscale * base.refl * dscale;
    CHECK(check_skew_symmetry(base).holds == check_skew_symmetry(scaled).holds);
  }
}

TEST_CASE("decomposability") {
  const std::vector<int> k{0}, l{1};
  for (auto form : {CrossBlockForm::kLiteral, CrossBlockForm::kCorrected}) {
    const auto id = check_decomposability(m2(), k, l, form);
    CHECK(id.holds);
    CHECK(id.block_residual == 0.0);
    CHECK(id.cross_residual == 0.0);
  }
  const auto c = check_decomposability(m3(), k, l, CrossBlockForm::kCorrected);
  CHECK_FALSE(c.holds);
  CHECK(c.cross_residual == doctest::Approx(1.3).epsilon(1e-12));

  Matrix sigma = Matrix::Identity(4, 4);
  sigma(0, 1) = sigma(1, 0) = 0.25;
  sigma(2, 3) = sigma(3, 2) = 0.1;
  Matrix refl = Matrix::Identity(4, 4);
  refl(0, 1) = 0.5;
  refl(2, 3) = 0.2;
  const auto blocks = make_spec(sigma, Vector::Constant(4, -1.0), refl, Vector::Ones(4));
  const std::vector<int> kb{0, 1}, lb{2, 3};
  CHECK(check_decomposability(blocks, kb, lb, CrossBlockForm::kCorrected).holds);

  const std::vector<int> overlap{0, 1};
  CHECK_THROWS_AS(check_decomposability(m2(), overlap, l, CrossBlockForm::kLiteral), ConfigError);
  const std::vector<int> empty;
  CHECK_THROWS_AS(check_decomposability(m2(), k, empty, CrossBlockForm::kLiteral), ConfigError);
}

TEST_CASE("expected local times") {
  CHECK(expected_local_times(m1()).expected(0) == doctest::Approx(0.5).epsilon(1e-14));
  const auto two = expected_local_times(m2());
  CHECK(two.expected(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(two.expected(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  const auto zero = expected_local_times(m2(0.0));
  CHECK(zero.expected(0) == 1.0);
  CHECK(zero.expected(1) == 1.0);
  CHECK(zero.nonnegative);

  // u = 0 gives the reflected-process rates -R^{-1} mu = (1, 2.3)
  const auto three = expected_local_times(m3(0.0));
  CHECK(three.expected(0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(three.expected(1) == doctest::Approx(2.3).epsilon(1e-14));

  for (const auto& s : {m1(), m2(), m3(), skew(), m3(0.3)}) {
    const auto sol = expected_local_times(s);
    const Matrix a = s.mu * s.stickiness.transpose() - s.refl;
    CHECK((a * sol.expected - s.mu).cwiseAbs().maxCoeff() < 1e-10);
  }

  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> neg(-3.0, -0.1);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector mu = vec2(neg(gen), neg(gen));
    auto s = make_spec(Matrix::Identity(2, 2), mu, Matrix::Identity(2, 2), Vector::Zero(2));
    const Vector l = expected_local_times(s).expected;
    CHECK(l(0) == -mu(0));
    CHECK(l(1) == -mu(1));
  }

  // mu u' - R singular: mu = (1, 0), u = (1, 0), R = I gives [[0,0],[0,-1]]
  auto singular = make_spec(Matrix::Identity(2, 2), vec2(1.0, 0.0), Matrix::Identity(2, 2),
                            vec2(1.0, 0.0));
  CHECK_THROWS_AS(expected_local_times(singular), SingularSystemError);
}

TEST_CASE("product form marginals") {
  const auto one = product_form_marginals(m1());
  CHECK(one.rates(0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(one.marginals[0].atom_mass == doctest::Approx(0.5).epsilon(1e-14));

  const auto two = product_form_marginals(m2());
  for (int i = 0; i < 2; ++i) {
    CHECK(two.rates(i) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(two.marginals[i].atom_mass == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(two.marginals[i].tail_mass == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  }
  CHECK(two.interior_mass == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  auto srbm = m1(0.0);
  srbm.mu = vec1(-1.5);
  srbm.sigma(0, 0) = 2.0;
  const auto z = product_form_marginals(srbm);
  CHECK(z.marginals[0].atom_mass == 0.0);
  CHECK(z.rates(0) == doctest::Approx(1.5).epsilon(1e-14));

  for (const auto& s : {m1(), m2(), skew(), skew(0.0), skew(2.5)}) {
    const auto f = product_form_marginals(s);
    CHECK(f.bar_residual < 1e-9);
    for (const auto& m : f.marginals) {
      CHECK(m.atom_mass >= 0.0);
      CHECK(m.atom_mass <= 1.0);
      CHECK(std::abs(m.atom_mass + m.tail_mass - 1.0) < 1e-12);
    }
  }

  CHECK_THROWS_AS(product_form_marginals(m3()), PreconditionError);
}

TEST_CASE("product form mgf matches the one-dimensional closed form") {
  const auto s = m1();
  const auto f = product_form_marginals(s);
  for (double th : {0.0, -0.5, -1.0, -3.0}) {
    // Phi(theta) = l (u - r / (mu + sigma^2 theta / 2)), l = 1 / (u + 1 / |mu|)
    const double l = 1.0 / (1.0 + 1.0);
    const double closed = l * (1.0 - 1.0 / (-1.0 + 0.5 * th));
    const auto m = product_form_mgf(s, f, vec1(th));
    CHECK(m.phi == doctest::Approx(closed).epsilon(1e-14));
  }
  CHECK_THROWS_AS(product_form_mgf(s, f, vec1(2.5)), DomainError);
}
