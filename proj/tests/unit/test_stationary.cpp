#include <doctest.h>

#include <cmath>
#include <random>

#include <stickybm/errors.hpp>
#include <stickybm/pipeline.hpp>
#include <stickybm/stationary.hpp>

#include "fixtures.hpp"

using namespace stickybm;
using namespace stickybm::testing;

namespace {

const std::vector<ReplicaOutput>& runs(int which) {
  static const auto make = [](const ModelSpec& s, std::uint64_t seed) {
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.horizon = 2000.0;
    cfg.seed = seed;
    cfg.replicas = 4;
    return run_replicas(s, cfg);
  };
  static const std::vector<ReplicaOutput> one = make(m1(), 31);
  static const std::vector<ReplicaOutput> two = make(m2(), 32);
  return which == 1 ? one : two;
}

std::vector<BoundaryMeasures> boundaries(const std::vector<ReplicaOutput>& r) {
  std::vector<BoundaryMeasures> out;
  for (const auto& x : r) out.push_back(x.boundary);
  return out;
}

}  // namespace

TEST_CASE("empirical law basics") {
  const EmpiricalDist point(2, {1.5, 0.5, 1.5, 0.5, 1.5, 0.5}, {1.0, 2.0, 1.0}, {});
  CHECK(point.size() == 3);
  double total = 0.0;
  for (double w : point.weights()) total += w;
  CHECK(std::abs(total - 1.0) < 1e-12);
  CHECK(point.survival_ge(0, 1.5) == doctest::Approx(1.0));
  CHECK(point.survival_gt(0, 1.5) == 0.0);
  CHECK(point.quantile(1, 0.3) == 0.5);
  CHECK(point.atom_estimates()(0) == 0.0);

  const EmpiricalDist mixed(1, {0.0, 0.0, 1.0, 3.0}, {1.0, 1.0, 1.0, 1.0}, {});
  CHECK(mixed.atom_estimates()(0) == doctest::Approx(0.5));
  CHECK(mixed.survival_gt(0, 0.5) == doctest::Approx(0.5));
  CHECK(mixed.quantile(0, 0.5) == 0.0);
  CHECK(mixed.quantile(0, 0.75) == 1.0);
  const double z[] = {1.0};
  CHECK(mixed.joint_survival_ge(z) == doctest::Approx(0.5));
  for (const auto& table : mixed.survival_tables()) {
    for (std::size_t k = 1; k < table.survival.size(); ++k) {
      CHECK(table.survival[k] <= table.survival[k - 1]);
    }
  }
}

TEST_CASE("constant sticky path gives a point mass") {
  StickyPath p;
  p.d = 1;
  p.sticky_dt = 0.1;
  for (int n = 0; n < 50; ++n) {
    p.sticky_times.push_back(0.1 * n);
    p.z.push_back(2.0);
    p.t_of.push_back(0.1 * n);
    p.local_time_at_T.push_back(0.0);
    p.segment.push_back(kDriftSegment);
  }
  const std::vector<StickyPath> paths{p};
  const auto dist = estimate_stationary(paths, 1.0);
  CHECK(dist.size() == 40);
  CHECK(dist.survival_ge(0, 2.0) == doctest::Approx(1.0));
  CHECK(dist.survival_gt(0, 2.0) == 0.0);
  CHECK_THROWS_AS(estimate_stationary(paths, 100.0), DataStarvedError);
}

TEST_CASE("one-dimensional sticky law") {
  const auto dist = estimate_stationary(runs(1));
  CHECK(dist.replica_count() == 4);
  CHECK(dist.atom_estimates()(0) == doctest::Approx(0.5).epsilon(0.05));
  const auto tail = condition_above(dist, 0, 0.0);
  CHECK(tail.survival_gt(0, 0.5) == doctest::Approx(std::exp(-1.0)).epsilon(0.08));

  const auto bm = boundaries(runs(1));
  const auto mgf = empirical_mgf(dist, bm, {vec1(0.0), vec1(-1.0)});
  CHECK(mgf.points[0].phi == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mgf.points[0].phi_face(0) == doctest::Approx(mgf.v_masses(0)).epsilon(1e-12));
  CHECK(mgf.points[0].phi0 == doctest::Approx(mgf.v0_mass).epsilon(1e-12));
  CHECK(mgf.points[1].phi == doctest::Approx(5.0 / 6.0).epsilon(0.015));
  CHECK(mgf.points[1].phi_se > 0.0);

  const auto report = mass_identity_check(m1(), mgf.v0_mass, mgf.v_masses);
  CHECK(report.expected_v(0) == doctest::Approx(0.5));
  CHECK(report.rel_error_v(0) < 0.04);
  CHECK(std::abs(report.clock_identity_residual) < 1e-6);
}

TEST_CASE("M2 marginal survival and masses") {
  const auto dist = estimate_stationary(runs(2));
  for (int i = 0; i < 2; ++i) {
    for (double z : {1.0, 2.0}) {
      CHECK(dist.survival_ge(i, z) == doctest::Approx(2.0 / 3.0 * std::exp(-2.0 * z)).epsilon(0.15));
    }
  }
  const auto pooled = pool_boundary_masses(boundaries(runs(2)));
  const auto report = mass_identity_check(m2(), pooled.v0_mass, pooled.v_masses);
  CHECK(report.rel_error_v(0) < 0.06);
  CHECK(report.rel_error_v(1) < 0.06);
  CHECK(report.rel_error_v0 < 0.06);
}

TEST_CASE("mgf monotone along rays and in the domain") {
  const auto dist = estimate_stationary(runs(2));
  const auto bm = boundaries(runs(2));
  std::vector<Vector> grid;
  for (double t : {0.0, 0.25, 0.5, 1.0, 2.0, 4.0}) grid.push_back(vec2(-t, -0.5 * t));
  const auto mgf = empirical_mgf(dist, bm, grid);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    CHECK(mgf.points[k].phi <= mgf.points[k - 1].phi);
    CHECK(mgf.points[k].phi0 <= mgf.points[k - 1].phi0);
  }
  for (const auto& p : mgf.points) {
    CHECK(p.phi > 0.0);
    CHECK(p.phi <= 1.0 + 1e-12);
    CHECK(p.phi0 <= mgf.v0_mass + 1e-12);
    for (int i = 0; i < 2; ++i) CHECK(p.phi_face(i) <= mgf.v_masses(i) + 1e-12);
  }
  CHECK_THROWS_AS(empirical_mgf(dist, bm, {vec2(0.1, -1.0)}), DomainError);
}

TEST_CASE("bar residual") {
  const auto f1 = product_form_marginals(m1());
  const auto exact = closed_form_mgf(m1(), f1, {vec1(0.0), vec1(-1.0)});
  const auto r1 = bar_residual(m1(), exact, BarMode::kSticky);
  CHECK(r1.records[0].lhs == 0.0);
  CHECK(r1.records[0].rhs == 0.0);
  CHECK(r1.records[1].lhs == doctest::Approx(-1.25).epsilon(1e-15));
  CHECK(r1.records[1].rhs == doctest::Approx(-1.25).epsilon(1e-15));
  CHECK(r1.max_abs_resid < 1e-15);
  CHECK(bar_residual(m1(), exact, BarMode::kSrbm).max_abs_resid < 1e-15);

  for (const auto& s : {skew(), skew(0.0), skew(3.0)}) {
    const auto f = product_form_marginals(s);
    const auto m = closed_form_mgf(s, f, {vec2(-0.5, -0.5), vec2(-1.0, -2.0), vec2(-0.2, -1.5)});
    CHECK(bar_residual(s, m, BarMode::kSticky).max_rel_resid < 1e-12);
    CHECK(bar_residual(s, m, BarMode::kSrbm).max_rel_resid < 1e-12);
  }

  const auto dist = estimate_stationary(runs(2));
  const auto bm = boundaries(runs(2));
  std::vector<Vector> grid{vec2(0.0, 0.0)};
  for (double a : {-0.5, -1.0, -2.0}) {
    for (double b : {-0.5, -1.0, -2.0}) grid.push_back(vec2(a, b));
  }
  const auto mgf = empirical_mgf(dist, bm, grid);
  const auto sticky = bar_residual(m2(), mgf, BarMode::kSticky);
  CHECK(sticky.records[0].lhs == 0.0);
  CHECK(sticky.records[0].rhs == 0.0);
  CHECK(sticky.max_rel_resid < 0.05);
  CHECK(bar_residual(m2(), mgf, BarMode::kSrbm).max_rel_resid < 0.05);

  MgfEstimate empty;
  empty.d = 2;
  empty.points.push_back(MgfPoint{vec2(-1.0, -1.0)});
  CHECK_THROWS_AS(bar_residual(m2(), empty, BarMode::kSticky), PreconditionError);
}

TEST_CASE("u = 0 mass identity compares against the reflected-process rates") {
  const auto r = mass_identity_check(m3(0.0), 1.0, vec2(1.0, 2.3));
  CHECK(r.expected_v0 == 1.0);
  CHECK(r.rel_error_v(0) < 1e-12);
  CHECK(r.rel_error_v(1) < 1e-12);
}

TEST_CASE("decomposition of the law into interior and face parts") {
  const auto dist = estimate_stationary(runs(2));
  const auto bm = boundaries(runs(2));
  for (double b : {0.25, 0.5, 1.0, 2.0}) {
    const auto c = decomposition_check(dist, bm, m2().stickiness, vec2(b, b));
    CHECK(c.consistent);
    CHECK(c.pi_mass > 0.0);
  }
}

TEST_CASE("pooling is independent of replica order") {
  auto bm = boundaries(runs(2));
  const auto forward = pool_boundary_masses(bm);
  std::reverse(bm.begin(), bm.end());
  const auto backward = pool_boundary_masses(bm);
  CHECK(std::abs(forward.v0_mass - backward.v0_mass) < 1e-12);
  CHECK(std::abs(forward.v_masses(0) - backward.v_masses(0)) < 1e-12);

  auto reps = runs(2);
  const auto a = estimate_stationary(reps);
  std::reverse(reps.begin(), reps.end());
  const auto b = estimate_stationary(reps);
  CHECK(std::abs(a.atom_estimates()(0) - b.atom_estimates()(0)) < 1e-12);
  CHECK(std::abs(a.survival_ge(1, 1.0) - b.survival_ge(1, 1.0)) < 1e-12);
}
