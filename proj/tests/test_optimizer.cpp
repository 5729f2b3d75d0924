#include "rfoc/optimizer.hpp"

#include "helpers.hpp"
#include "quadratic.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace rfoc;
using namespace rfoc::test;
using Catch::Approx;


TEST_CASE("default parameters") {
  const auto p = default_params();
  CHECK(p.sigma1 == 0.03);
  CHECK(p.sigma2 == 0.25);
  CHECK(p.sigma3 == 0.7);
  CHECK(p.maxit_newton == 5);
  CHECK(p.maxit_cg == 50);
  CHECK(p.tol_newton == 1e-9);
  CHECK(p.tol_cg == 1e-6);
  CHECK(p.rho0 == 1.0);
  CHECK(p.rho_max == 2.0);
  CHECK(p.q == 2.0);
  CHECK((0 < p.sigma1 && p.sigma1 < p.sigma2 && p.sigma2 < p.sigma3 && p.sigma3 < 1));
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("parameter validation") {
  auto p = default_params();
  p.q = 1.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = default_params();
  p.sigma2 = 0.8;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = default_params();
  p.rho0 = 3.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = default_params();
  p.tol_cg = 0.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("boundary step lands on the sphere") {
  std::mt19937_64 rng(1);
  auto g = TimeGrid::make(20, 10, 0.1);
  for (int t = 0; t < 50; ++t) {
    ControlWaveform s = random_control(g, rng, 0.1);
    ControlWaveform p = random_control(g, rng);
    const double rho = 1.0;
    const double tau = boundary_step(s, p, rho);
    CHECK(tau >= 0.0);
    CHECK(control_norm(combine(s, tau, p)) == Approx(rho).epsilon(1e-12));
  }
}

TEST_CASE("cg on the identity solves in one step") {
  ControlWaveform g(3, 1.0);
  g.set(0, {1, -2});
  g.set(2, {0.5, 3});
  auto id = [](const ControlWaveform &h) { return h; };
  CgResult r = steihaug_cg(g, id, 1e6, 1e-6, 50, 1e-14);
  CHECK(r.status == CgStatus::Converged);
  CHECK(r.iterations == 1);
  for (int m = 0; m < 3; ++m) {
    CHECK(r.step[m].x == Approx(-g[m].x));
    CHECK(r.step[m].y == Approx(-g[m].y));
  }
}

TEST_CASE("cg scales the first step to the boundary") {
  ControlWaveform g(4, 1.0);
  g.set(0, {6, 0});
  g.set(3, {0, 8});
  REQUIRE(control_norm(g) == 10.0);
  auto id = [](const ControlWaveform &h) { return h; };
  CgResult r = steihaug_cg(g, id, 1.0, 1e-6, 50, 1e-14);
  CHECK(r.status == CgStatus::Boundary);
  CHECK(control_norm(r.step) == Approx(1.0).epsilon(1e-12));
  for (int m = 0; m < 4; ++m) {
    CHECK(r.step[m].x == Approx(-g[m].x / 10).margin(1e-15));
    CHECK(r.step[m].y == Approx(-g[m].y / 10).margin(1e-15));
  }
}

TEST_CASE("negative curvature exits on the boundary") {
  ControlWaveform g(1, 1.0);
  g.set(0, {0.0, 1.0});
  for (double rho : {0.1, 1.0, 7.0}) {
    CgResult r = steihaug_cg(g, diagonal({2.0, -1.0}), rho, 1e-6, 50, 1e-14);
    CHECK(r.status == CgStatus::NegativeCurvature);
    CHECK(control_norm(r.step) == Approx(rho).epsilon(1e-10));
  }
  // mixed directions: the negative direction is found after the first step
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(0.5, 2.0);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> diag(20);
    for (auto &v : diag)
      v = d(rng);
    diag[7] = -d(rng);
    ControlWaveform gg = random_control(TimeGrid::make(11, 10, 1.0), rng);
    CgResult r = steihaug_cg(gg, diagonal(diag), 0.5, 1e-10, 50, 1e-14);
    CHECK(r.status != CgStatus::Converged);
    CHECK(control_norm(r.step) == Approx(0.5).epsilon(1e-10));
  }
}

TEST_CASE("cg step norms stay inside the radius and converged means small residual") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 30; ++t) {
    Quadratic f = make_quadratic(rng, 15, 0.2);
    ControlWaveform zero(15, 0.2);
    const ControlWaveform g = f.gradient(zero);
    const double rho = std::uniform_real_distribution<double>(0.05, 5.0)(rng);
    CgResult r = steihaug_cg(g, [&](const ControlWaveform &h) { return f.apply(h); }, rho, 1e-8,
                             50, 1e-14);
    CHECK(control_norm(r.step) <= rho * (1 + 1e-12));
    if (r.status == CgStatus::Converged) {
      const ControlWaveform res = combine(f.apply(r.step), 1.0, g);
      CHECK(control_norm(res) <= 1e-8 * r.initial_residual * (1 + 1e-6));
    } else {
      CHECK(control_norm(r.step) == Approx(rho).epsilon(1e-10));
    }
  }
}

TEST_CASE("stationary start takes no iterations") {
  ControlWaveform zero(10, 0.1);
  Quadratic flat({std::vector<ControlSample>(10, {1.0, 1.0})}, zero);
  auto r = trust_region_newton(flat, zero, default_params());
  CHECK(r.log.newton_iterations() == 0);
  CHECK(r.diagnostic.empty());
}

TEST_CASE("convex quadratic is solved by one newton step with a large radius") {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 10; ++t) {
    Quadratic f = make_quadratic(rng, 25, 0.05);
    auto p = default_params();
    p.rho0 = 1e6;
    p.rho_max = 1e6;
    p.maxit_newton = 1;
    ControlWaveform u0(25, 0.05);
    auto r = trust_region_newton(f, u0, p);
    REQUIRE(r.log.newton_iterations() == 1);
    CHECK(r.log.records[0].accepted);
    CHECK(r.log.records[0].cg_status == CgStatus::Converged);
    const ControlWaveform star = f.minimizer();
    const ControlWaveform err = combine(r.control, -1.0, star);
    // residual of the CG solve bounds the error through the smallest eigenvalue
    CHECK(control_norm(err) <= p.tol_cg * control_norm(f.gradient(u0)) / 0.5 * (1 + 1e-6));
  }
}

TEST_CASE("small radius gives boundary steps until the radius has grown") {
  std::mt19937_64 rng(11);
  Quadratic f = make_quadratic(rng, 25, 0.05);
  auto p = default_params();
  p.rho0 = 1e-3;
  p.rho_max = 1e3;
  p.maxit_newton = 40;
  ControlWaveform u0(25, 0.05);
  auto r = trust_region_newton(f, u0, p);
  REQUIRE(r.log.newton_iterations() >= 2);
  bool interior_seen = false;
  double last_radius = 0.0;
  for (const auto &rec : r.log.records) {
    if (rec.cg_status == CgStatus::Converged) {
      interior_seen = true;
      continue;
    }
    if (interior_seen)
      continue;
    CHECK(rec.cg_status == CgStatus::Boundary);
    CHECK(rec.step_norm == Approx(rec.radius_before).epsilon(1e-10));
    CHECK(rec.accepted);
    // exact model: every boundary step doubles the radius
    CHECK(rec.radius_after == Approx(2.0 * rec.radius_before));
    CHECK(rec.radius_before > last_radius);
    last_radius = rec.radius_before;
  }
  CHECK(interior_seen);
  const ControlWaveform err = combine(r.control, -1.0, f.minimizer());
  CHECK(control_norm(err) <= 1e-6 * control_norm(f.minimizer()));
}

TEST_CASE("accepted iterates decrease the cost and steps respect the radius") {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 5; ++t) {
    Quadratic f = make_quadratic(rng, 12, 0.3, -1.0);  // possibly indefinite
    auto p = default_params();
    p.maxit_newton = 15;
    ControlWaveform u0 = random_control(TimeGrid::make(13, 12, 0.3), rng, 0.1);
    std::vector<IterationRecord> seen;
    auto r = trust_region_newton(f, u0, p, [&](const IterationRecord &rec) { seen.push_back(rec); });
    CHECK(seen.size() == r.log.records.size());
    double prev = f.value(u0);
    for (const auto &rec : r.log.records) {
      CHECK(rec.step_norm <= rec.radius_before * (1 + 1e-12));
      CHECK(rec.cost <= prev);
      if (rec.accepted) {
        CHECK(rec.actual_decrease > 0.0);
        CHECK(rec.actual_decrease > p.sigma1 * rec.predicted_decrease);
      }
      prev = rec.cost;
    }
    CHECK(r.log.final_cost <= f.value(u0));
  }
}
