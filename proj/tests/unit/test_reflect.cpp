#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include <stickybm/errors.hpp>
#include <stickybm/pipeline.hpp>
#include <stickybm/reflect.hpp>

#include "fixtures.hpp"

using namespace stickybm;
using namespace stickybm::testing;

TEST_CASE("skorokhod_step examples") {
  auto a = skorokhod_step(vec1(1.0), vec1(0.5), Matrix::Identity(1, 1));
  CHECK(a.z_next(0) == 1.5);
  CHECK(a.push(0) == 0.0);

  auto b = skorokhod_step(vec1(0.0), vec1(-0.3), Matrix::Identity(1, 1));
  CHECK(b.z_next(0) == doctest::Approx(0.0));
  CHECK(b.push(0) == doctest::Approx(0.3).epsilon(1e-14));

  auto c = skorokhod_step(vec2(0.0, 0.0), vec2(-1.0, 0.0), mat2(1.0, 0.0, -0.5, 1.0));
  CHECK(c.push(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.push(1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(c.z_next(0)) < 1e-12);
  CHECK(std::abs(c.z_next(1)) < 1e-12);
}

TEST_CASE("skorokhod_step satisfies the complementarity problem on random input") {
  std::mt19937_64 gen(17);
  std::normal_distribution<double> n(0.0, 1.0);
  std::exponential_distribution<double> e(2.0);
  const Matrix refl = mat2(1.0, -0.4, -0.3, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    Vector z = vec2(trial % 3 == 0 ? 0.0 : e(gen), trial % 5 == 0 ? 0.0 : e(gen));
    Vector dx = vec2(n(gen), n(gen));
    const auto r = skorokhod_step(z, dx, refl);
    CHECK((r.z_next.array() >= -1e-12).all());
    CHECK((r.push.array() >= -1e-15).all());
    CHECK(r.z_next.dot(r.push) <= 1e-12 * (1.0 + dx.norm()));
    CHECK((r.z_next - (z + dx + refl * r.push)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("solver falls back to enumeration for a non M-matrix") {
  // completely-S but Gauss-Seidel diverges on the full active set
  Matrix refl(2, 2);
  refl << 1.0, 3.0, 0.0, 1.0;
  const auto r = skorokhod_step(vec2(0.0, 0.0), vec2(-1.0, -1.0), refl);
  CHECK((r.z_next.array() >= -1e-12).all());
  CHECK((r.push.array() >= 0.0).all());
  CHECK(r.z_next.dot(r.push) <= 1e-12 * 3.0);
}

TEST_CASE("simulate_srbm reconstruction and determinism") {
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.horizon = 50.0;
  cfg.seed = 99;
  const auto s = m3(0.0);
  const auto a = simulate_srbm(s, cfg, 2);
  const auto b = simulate_srbm(s, cfg, 2);
  CHECK(a.z == b.z);
  CHECK(a.local_time == b.local_time);
  CHECK(a.size() == 50001);
  CHECK(reconstruction_residual(a, s.refl) < 1e-8);
  CHECK(a.audit.violations == 0);
  CHECK(a.audit.min_state >= -1e-12);

  const auto other = simulate_srbm(s, cfg, 3);
  CHECK(other.z != a.z);

  for (std::size_t k = 1; k < a.size(); ++k) {
    for (int i = 0; i < 2; ++i) {
      const double dl = a.local_time_at(k)[i] - a.local_time_at(k - 1)[i];
      CHECK(dl >= -1e-15);
      if (dl > 1e-12) CHECK(a.z_at(k)[i] < 1e-8);
    }
  }
}

TEST_CASE("increments have mean mu dt and covariance sigma dt") {
  const auto s = m3(0.0);
  NoiseSource noise(s, 0.01, make_stream(4, StreamDomain::kSimulation, 0));
  const int n = 200000;
  Vector mean = Vector::Zero(2);
  Matrix cov = Matrix::Zero(2, 2);
  std::vector<double> dx(2);
  for (int k = 0; k < n; ++k) {
    noise.next(dx);
    const Vector v = vec2(dx[0], dx[1]);
    mean += v;
    cov += v * v.transpose();
  }
  mean /= n;
  cov = cov / n - mean * mean.transpose();
  CHECK(mean(0) == doctest::Approx(-0.01).epsilon(0.05));
  CHECK(mean(1) == doctest::Approx(-0.02).epsilon(0.05));
  CHECK(cov(0, 0) == doctest::Approx(0.01).epsilon(0.02));
  CHECK(cov(0, 1) == doctest::Approx(0.005).epsilon(0.03));
  CHECK(cov(1, 1) == doctest::Approx(0.01).epsilon(0.02));
}

TEST_CASE("noise disabled gives the deterministic drift path") {
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.horizon = 3.0;
  cfg.noise_enabled = false;
  cfg.z0 = vec2(1.0, 0.5);
  const auto s = m2(0.0);
  const auto p = simulate_srbm(s, cfg);
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double t = p.times[k];
    for (int i = 0; i < 2; ++i) {
      const double free = cfg.z0(i) - t;
      CHECK(p.z_at(k)[i] == doctest::Approx(std::max(free, 0.0)).epsilon(1e-9).scale(1.0));
      if (free > 1e-9) CHECK(p.local_time_at(k)[i] == 0.0);
    }
  }
  CHECK(p.local_time_at(p.size() - 1)[1] == doctest::Approx(2.5).epsilon(1e-9));
}

TEST_CASE("one-dimensional reflected path: mean and local-time drift") {
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.horizon = 1e4;
  cfg.seed = 2024;
  cfg.burn_in = 0.0;
  const auto out = run_replica(m1(0.0), cfg, 0);
  double mean = 0.0;
  for (double z : out.samples) mean += z;
  mean /= static_cast<double>(out.samples.size());
  CHECK(mean == doctest::Approx(0.5).epsilon(0.04));
  CHECK(out.boundary.v_masses(0) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(out.audit.violations == 0);
}

TEST_CASE("path perturbation stays bounded for M-matrix models") {
  const auto s = m3(0.0);
  SimConfig cfg;
  cfg.dt = 1e-3;
  const int n = 20000;
  std::vector<double> inc(2 * n);
  NoiseSource noise(s, cfg.dt, make_stream(8, StreamDomain::kSynthetic, 0));
  for (int k = 0; k < n; ++k) noise.next(std::span<double>(inc.data() + 2 * k, 2));
  const auto base = reflect_increments(s.refl, Vector::Zero(2), inc, cfg.dt);
  std::vector<double> ratios;
  for (double delta : {1e-4, 1e-6}) {
    auto bumped = inc;
    bumped[2 * 100] += delta;
    const auto p = reflect_increments(s.refl, Vector::Zero(2), bumped, cfg.dt);
    double sup = 0.0;
    for (std::size_t k = 0; k < p.z.size(); ++k) sup = std::max(sup, std::abs(p.z[k] - base.z[k]));
    ratios.push_back(sup / delta);
  }
  CHECK(std::isfinite(ratios[0]));
  CHECK(ratios[0] < 10.0);
  CHECK(ratios[1] < 10.0);
  CHECK(ratios[0] == doctest::Approx(ratios[1]).epsilon(0.05));
}

TEST_CASE("sim config validation names the field") {
  SimConfig cfg;
  cfg.dt = -1.0;
  try {
    cfg.validate(1);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("sim.dt") != std::string::npos);
  }
  SimConfig z;
  z.z0 = vec2(1.0, -1.0);
  CHECK_THROWS_AS(z.validate(2), ConfigError);
}

TEST_CASE("path csv has the documented columns") {
  SimConfig cfg;
  cfg.horizon = 0.01;
  const auto p = simulate_srbm(m2(), cfg);
  std::ostringstream os;
  write_path_csv(p, os, 5);
  const std::string text = os.str();
  CHECK(text.rfind("t,z_1,z_2,L_1,L_2\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}
