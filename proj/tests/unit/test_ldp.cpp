#include <doctest.h>

#include <cmath>

#include <stickybm/errors.hpp>
#include <stickybm/ldp.hpp>

#include "fixtures.hpp"

using namespace stickybm;
using namespace stickybm::testing;

TEST_CASE("action") {
  const auto s = m1();
  PathVariable drift{1.0, 4, Matrix::Constant(4, 1, -1.0)};
  CHECK(action(s, drift) == 0.0);

  PathVariable one{1.0, 1, Matrix::Constant(1, 1, 1.0)};
  CHECK(action(s, one) == doctest::Approx(2.0).epsilon(1e-15));

  const auto t = m3();
  PathVariable p{2.0, 3, Matrix(3, 2)};
  p.velocity << 0.5, 1.0, -0.2, 0.3, 1.5, -1.0;
  PathVariable q = p;
  for (int k = 0; k < 3; ++k) {
    q.velocity.row(k) = t.mu.transpose() + 2.0 * (p.velocity.row(k) - t.mu.transpose());
  }
  CHECK(action(t, q) == doctest::Approx(4.0 * action(t, p)).epsilon(1e-13));
}

TEST_CASE("skorokhod image stays in the orthant") {
  const auto s = m3();
  PathVariable p{1.0, 4, Matrix(4, 2)};
  p.velocity << -1.0, 2.0, 1.0, -3.0, 0.5, 0.5, -2.0, -2.0;
  const Matrix img = skorokhod_image(s, p);
  CHECK(img.rows() == 5);
  CHECK((img.array() >= -1e-12).all());
  CHECK(img.row(0).norm() == 0.0);
}

TEST_CASE("straight line bound") {
  CHECK(straight_line_bound(m1(), vec1(0.0)) == 0.0);
  CHECK(straight_line_bound(m1(), vec1(1.0)) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(straight_line_bound(m2(), vec2(1.0, 1.0)) == doctest::Approx(4.0).epsilon(1e-14));
  const auto path = straight_line_path(m2(), vec2(1.0, 1.0), 32);
  CHECK(path.tau == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(action(m2(), path) == doctest::Approx(4.0).epsilon(1e-13));
  const Matrix img = skorokhod_image(m2(), path);
  CHECK((img.row(32).transpose() - vec2(1.0, 1.0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rate function oracles") {
  CHECK(rate_function(m1(), vec1(0.0)).value == 0.0);

  const auto one = rate_function(m1(), vec1(1.0));
  CHECK(one.value == doctest::Approx(2.0).epsilon(0.02));
  CHECK(one.value <= one.bound + 1e-6);
  CHECK(one.terminal_error < terminal_tolerance(vec1(1.0)));

  const auto diag = rate_function(m2(), vec2(1.0, 1.0));
  CHECK(diag.value == doctest::Approx(4.0).epsilon(0.05));
  CHECK(diag.value <= diag.bound + 1e-6);
  CHECK(diag.image.rows() == diag.path.segments + 1);
}

TEST_CASE("rate function along the face matches the marginal decay rate") {
  for (double t : {1.0, 2.0}) {
    const auto r = rate_function(m2(), vec2(t, 0.0));
    CHECK(r.value / t == doctest::Approx(2.0).epsilon(0.15));
    CHECK(r.value <= r.bound + 1e-6);
    CHECK(r.value > 0.0);
  }
}

TEST_CASE("rate function is monotone along rays and reproducible") {
  RateOptions opts;
  opts.seed = 3;
  const auto s = m3();
  const auto a = rate_function(s, vec2(0.5, 0.5), opts);
  const auto b = rate_function(s, vec2(1.0, 1.0), opts);
  CHECK(a.value > 0.0);
  CHECK(b.value >= a.value);
  CHECK(b.value <= b.bound + 1e-6);
  const auto again = rate_function(s, vec2(1.0, 1.0), opts);
  CHECK(again.value == b.value);
  CHECK(again.best_restart == b.best_restart);
}

TEST_CASE("rate function preconditions") {
  CHECK_THROWS_AS(rate_function(m2(), vec2(-1.0, 1.0)), PreconditionError);
  auto unstable = m2();
  unstable.mu = vec2(1.0, 1.0);
  CHECK_THROWS_AS(rate_function(unstable, vec2(1.0, 1.0)), PreconditionError);
}
