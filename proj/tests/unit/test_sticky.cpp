#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include <stickybm/errors.hpp>
#include <stickybm/pipeline.hpp>
#include <stickybm/stationary.hpp>
#include <stickybm/sticky.hpp>

#include "fixtures.hpp"

using namespace stickybm;
using namespace stickybm::testing;

namespace {

SrbmPath toy_path(int d, std::vector<double> times, std::vector<double> local) {
  SrbmPath p;
  p.d = d;
  p.dt = times[1] - times[0];
  p.times = std::move(times);
  p.local_time = std::move(local);
  p.z.assign(p.local_time.size(), 0.0);
  p.noise.assign(p.local_time.size(), 0.0);
  return p;
}

SimConfig short_run(double horizon, std::uint64_t seed) {
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.horizon = horizon;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("clock_forward examples") {
  const auto one = toy_path(1, {0.0, 0.5, 1.0}, {0.0, 0.1, 0.2});
  const auto tc = clock_forward(one, vec1(1.0));
  CHECK(tc.clock.back() == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(clock_inverse(tc, 1.2) == 1.0);

  const auto two = toy_path(2, {0.0, 1.0}, {0.0, 0.0, 0.1, 0.2});
  CHECK(clock_forward(two, vec2(2.0, 3.0)).clock.back() == doctest::Approx(1.8).epsilon(1e-15));

  const auto zero = clock_forward(one, vec1(0.0));
  for (std::size_t k = 0; k < zero.grid.size(); ++k) CHECK(zero.clock[k] == zero.grid[k]);
  CHECK(clock_inverse(zero, 0.3) == doctest::Approx(0.3).epsilon(1e-15));

  CHECK_THROWS_AS(clock_inverse(tc, 1.5), RangeError);
  CHECK_THROWS_AS(clock_inverse(tc, -0.1), RangeError);
}

TEST_CASE("clock round trip on grid points and dominance") {
  const auto s = m2();
  const auto path = simulate_srbm(s, short_run(20.0, 4));
  const auto tc = clock_forward(path, s.stickiness);
  CHECK(tc.clock.front() == 0.0);
  for (std::size_t k = 1; k < tc.clock.size(); ++k) {
    CHECK(tc.clock[k] > tc.clock[k - 1]);
    CHECK(tc.clock[k] >= tc.grid[k]);
  }
  std::mt19937_64 gen(1);
  std::uniform_int_distribution<std::size_t> pick(0, path.size() - 1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = pick(gen);
    CHECK(clock_inverse(tc, tc.clock[k]) == tc.grid[k]);
  }
  for (double q = 0.0; q < tc.horizon(); q += 0.37) CHECK(clock_inverse(tc, q) <= q);
}

TEST_CASE("sticky path invariants") {
  const auto s = m2();
  const auto path = simulate_srbm(s, short_run(30.0, 6));
  const auto sp = build_sticky_path(path, s.stickiness, 0.05);
  REQUIRE(sp.size() > 100);
  double t_one = -1.0;
  for (std::size_t n = 0; n < sp.size(); ++n) {
    const double sn = sp.sticky_times[n];
    if (std::abs(sn - 1.0) < 1e-9) t_one = sp.t_of[n];
    CHECK(sp.t_of[n] <= sn + 1e-12);
    double weighted = 0.0;
    for (int i = 0; i < 2; ++i) {
      weighted += s.stickiness(i) * sp.local_time_at(n)[i];
      CHECK(sp.z_at(n)[i] >= 0.0);
    }
    CHECK(std::abs(sp.t_of[n] - (sn - weighted)) <= 2.0 * path.dt);
  }
  CHECK(t_one > 0.0);
  CHECK(t_one <= 1.0);
  CHECK_THROWS_AS(build_sticky_path(path, s.stickiness, 0.05, 1e6), RangeError);
}

TEST_CASE("u = 0 collapses the sticky path onto the resampled path bit for bit") {
  const auto s = m3(0.0);
  const auto path = simulate_srbm(s, short_run(25.0, 12));
  const auto sticky = build_sticky_path(path, s.stickiness, 0.05);
  const auto plain = resample_path(path, 0.05);
  CHECK(sticky.sticky_times == plain.sticky_times);
  CHECK(sticky.t_of == plain.t_of);
  CHECK(sticky.z == plain.z);
  CHECK(sticky.local_time_at_T == plain.local_time_at_T);
}

TEST_CASE("one-dimensional sticky atom") {
  SimConfig cfg = short_run(2e3, 77);
  cfg.burn_in = 100.0;
  const auto out = run_replica(m1(), cfg, 0);
  double atom = 0.0;
  for (double z : out.samples) atom += z < kDefaultAtomEpsilon ? 1.0 : 0.0;
  atom /= static_cast<double>(out.sample_count());
  CHECK(atom == doctest::Approx(0.5).epsilon(0.06));
  CHECK(out.boundary.v_masses(0) == doctest::Approx(0.5).epsilon(0.06));
}

TEST_CASE("boundary measures: clock identity and face support") {
  for (const auto& s : {m1(), m2(), m3(), m3(0.4)}) {
    const auto path = simulate_srbm(s, short_run(40.0, 3));
    const auto tc = clock_forward(path, s.stickiness);
    const auto bm = accumulate_boundary_measures(path, tc, BoundaryWindow{4.0}, 0.05);
    double identity = bm.v0_mass;
    for (int i = 0; i < s.d; ++i) identity += s.stickiness(i) * bm.v_masses(i);
    CHECK(std::abs(identity - 1.0) < 1e-6);
    for (int i = 0; i < s.d; ++i) {
      const auto& f = bm.faces[i];
      for (std::size_t n = 0; n < f.weights.size(); ++n) CHECK(f.states[n * s.d + i] < 1e-8);
    }
  }
  const auto path = simulate_srbm(m2(), short_run(5.0, 3));
  const auto tc = clock_forward(path, m2().stickiness);
  CHECK_THROWS_AS(accumulate_boundary_measures(path, tc, BoundaryWindow{2.0, 2.0}, 0.05),
                  ConfigError);
  CHECK_THROWS_AS(accumulate_boundary_measures(path, tc, BoundaryWindow{1.0, 1e6}, 0.05),
                  ConfigError);
}

TEST_CASE("boundary masses of M2") {
  SimConfig cfg = short_run(2e3, 21);
  const auto out = run_replica(m2(), cfg, 0);
  CHECK(out.boundary.v0_mass == doctest::Approx(1.0 / 3.0).epsilon(0.1));
  CHECK(out.boundary.v_masses(0) == doctest::Approx(1.0 / 3.0).epsilon(0.1));
  CHECK(out.boundary.v_masses(1) == doctest::Approx(1.0 / 3.0).epsilon(0.1));
}

TEST_CASE("streaming pipeline matches the batch path") {
  const auto s = m3();
  SimConfig cfg = short_run(30.0, 5);
  const auto path = simulate_srbm(s, cfg, 1);
  const auto sticky = build_sticky_path(path, s.stickiness, cfg.sticky_dt);
  const auto tc = clock_forward(path, s.stickiness);
  const auto batch = accumulate_boundary_measures(path, tc, BoundaryWindow{cfg.effective_burn_in()},
                                                  cfg.sticky_dt);
  const auto stream = run_replica(s, cfg, 1);

  std::vector<double> kept;
  for (std::size_t n = 0; n < sticky.size(); ++n) {
    if (sticky.sticky_times[n] < cfg.effective_burn_in()) continue;
    kept.insert(kept.end(), sticky.z_at(n).begin(), sticky.z_at(n).end());
  }
  CHECK(kept == stream.samples);
  CHECK(stream.sticky_horizon == tc.horizon());
  CHECK(stream.boundary.v0_mass == batch.v0_mass);
  CHECK(stream.boundary.v_masses(0) == batch.v_masses(0));
  CHECK(stream.boundary.v_masses(1) == batch.v_masses(1));
  CHECK(stream.boundary.v0_states == batch.v0_states);
}

TEST_CASE("replica results do not depend on scheduling") {
  const auto s = m2();
  SimConfig cfg = short_run(10.0, 8);
  cfg.replicas = 4;
  RunOptions serial;
  serial.threads = 1;
  RunOptions wide;
  wide.threads = 4;
  const auto a = run_replicas(s, cfg, serial);
  const auto b = run_replicas(s, cfg, wide);
  REQUIRE(a.size() == 4);
  for (int r = 0; r < 4; ++r) {
    CHECK(a[r].replica == r);
    CHECK(a[r].samples == b[r].samples);
    CHECK(a[r].boundary.v0_mass == b[r].boundary.v0_mass);
  }
  const auto alone = run_replica(s, cfg, 2);
  CHECK(alone.samples == a[2].samples);
  CHECK(a[0].samples != a[1].samples);
}

TEST_CASE("sticky csv header") {
  const auto path = simulate_srbm(m2(), short_run(1.0, 1));
  const auto sp = build_sticky_path(path, m2().stickiness, 0.1);
  std::ostringstream os;
  write_sticky_csv(sp, os);
  CHECK(os.str().rfind("s,T,z_1,z_2\n", 0) == 0);
}
