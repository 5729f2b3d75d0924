#include "rfoc/objective.hpp"
#include "rfoc/pipeline.hpp"

#include "helpers.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace rfoc;
using namespace rfoc::test;
using Catch::Approx;

namespace {

struct Fixture {
  RunConfig config;
  BlochSystem sys;
  TargetProfile target;

  explicit Fixture(bool relaxation = false)
      : config(small_config(relaxation)), sys(config.system()),
        target(small_target(config, sys.space)) {}

  BlochObjective objective(DerivativeConvention c = DerivativeConvention::Consistent) const {
    return BlochObjective(sys, target, config.alpha, {}, c);
  }
};

double max_rel(const ControlWaveform &a, const ControlWaveform &b) {
  double err = 0.0, ref = 0.0;
  for (int m = 0; m < a.size(); ++m) {
    err = std::max({err, std::abs(a[m].x - b[m].x), std::abs(a[m].y - b[m].y)});
    ref = std::max({ref, std::abs(b[m].x), std::abs(b[m].y)});
  }
  return err / ref;
}

} // namespace

TEST_CASE("inner product examples") {
  ControlWaveform a(4, 0.5);
  for (auto &s : a.mutable_samples())
    s = {1.0, 1.0};
  CHECK(inner_product(a, a) == 4.0);
  CHECK(inner_product(ControlWaveform(4, 0.5), a) == 0.0);
  CHECK(control_norm(a) == 2.0);
  CHECK_THROWS_AS(inner_product(a, ControlWaveform(3, 0.5)), ValidationError);

  std::mt19937_64 rng(2);
  auto g = TimeGrid::make(40, 30, 1e-3);
  for (int t = 0; t < 50; ++t) {
    auto x = random_control(g, rng);
    auto y = random_control(g, rng);
    CHECK(std::abs(inner_product(x, y)) <= control_norm(x) * control_norm(y) * (1 + 1e-15));
  }
}

TEST_CASE("cost examples") {
  Fixture f;
  const auto eq = equilibrium(f.sys.space.size());
  TargetProfile rest{eq, {}};
  BlochObjective flat(f.sys, rest, f.config.alpha);
  CHECK(flat.value(ControlWaveform::zeros(f.sys.time)) == 0.0);

  // (0,1,0) on the slice: every in-slice point contributes dz/2 * 2
  const TargetProfile raw = build_target(f.config.slices, f.sys.space);
  BlochObjective sharp(f.sys, raw, f.config.alpha);
  const auto mask = slice_mask(raw, f.sys.space);
  const double in = static_cast<double>(std::count(mask.begin(), mask.end(), true));
  CHECK(sharp.value(ControlWaveform::zeros(f.sys.time)) ==
        Approx(in * f.sys.space.spacing()).epsilon(1e-14));
  CHECK(in * f.sys.space.spacing() == Approx(f.config.slices.width).epsilon(0.6));
}

TEST_CASE("cost equals an independent re-evaluation") {
  Fixture f(true);
  std::mt19937_64 rng(4);
  const ControlWaveform u = random_control(f.sys.time, rng);
  auto obj = f.objective();
  const auto mt = forward_solve(f.sys, u, equilibrium(f.sys.space.size())).terminal();
  double fid = 0.0;
  for (std::size_t i = 0; i < mt.size(); ++i) {
    const Vec3 r = mt[i] - f.target.values[i];
    fid += 0.5 * f.sys.space.spacing() * dot(r, r);
  }
  double reg = 0.0;
  for (const auto &s : u.samples())
    reg += 0.5 * f.config.alpha * f.sys.time.dt() * (s.x * s.x + s.y * s.y);
  CHECK(obj.value(u) == Approx(fid + reg).epsilon(1e-14));
}

TEST_CASE("gradient vanishes at an exact fit") {
  Fixture f;
  TargetProfile rest{equilibrium(f.sys.space.size()), {}};
  BlochObjective obj(f.sys, rest, f.config.alpha);
  const auto g = obj.gradient(ControlWaveform::zeros(f.sys.time));
  for (const auto &s : g.samples()) {
    CHECK(s.x == 0.0);
    CHECK(s.y == 0.0);
  }
}

TEST_CASE("gradient matches central differences of the cost") {
  for (bool relaxation : {false, true}) {
    Fixture f(relaxation);
    std::mt19937_64 rng(6);
    const ControlWaveform u = random_control(f.sys.time, rng);
    auto obj = f.objective();
    const ControlWaveform g = obj.gradient(u);
    const double eps = 1e-5;
    double err = 0.0, ref = 0.0;
    for (int m = 0; m < u.size(); ++m)
      for (int k = 0; k < 2; ++k) {
        ControlWaveform p = u, q = u;
        (k ? p.mutable_samples()[m].y : p.mutable_samples()[m].x) += eps;
        (k ? q.mutable_samples()[m].y : q.mutable_samples()[m].x) -= eps;
        const double fd = (obj.value(p) - obj.value(q)) / (2 * eps);
        const double exact = f.sys.time.dt() * (k ? g[m].y : g[m].x);
        err = std::max(err, std::abs(fd - exact));
        ref = std::max(ref, std::abs(exact));
      }
    CHECK(err / ref <= 1e-6);
  }
}

TEST_CASE("directional difference error decays quadratically") {
  Fixture f(true);
  std::mt19937_64 rng(8);
  const ControlWaveform u = random_control(f.sys.time, rng);
  const ControlWaveform h = random_control(f.sys.time, rng);
  auto obj = f.objective();
  const double exact = inner_product(obj.gradient(u), h);
  auto defect = [&](double eps) {
    return std::abs((obj.value(combine(u, eps, h)) - obj.value(combine(u, -eps, h))) / (2 * eps) -
                    exact);
  };
  const double e1 = defect(1e-2);
  const double e2 = defect(1e-3);
  // ratio of 100 for an eps^2 error
  CHECK(e1 / e2 == Approx(100.0).epsilon(0.05));
  CHECK(defect(1e-4) < 1e-6 * std::abs(exact));
}

TEST_CASE("hessian action matches differences of the gradient and is symmetric") {
  for (bool relaxation : {false, true}) {
    Fixture f(relaxation);
    std::mt19937_64 rng(10);
    const ControlWaveform u = random_control(f.sys.time, rng);
    auto obj = f.objective();
    const double eps = 1e-5;
    for (int t = 0; t < 3; ++t) {
      const ControlWaveform h = random_control(f.sys.time, rng);
      const ControlWaveform hh = obj.hessian_action(u, h);
      const ControlWaveform gp = obj.gradient(combine(u, eps, h));
      const ControlWaveform gm = obj.gradient(combine(u, -eps, h));
      CHECK(max_rel(scaled(0.5 / eps, combine(gp, -1.0, gm)), hh) <= 1e-5);
    }
    const ControlWaveform h1 = random_control(f.sys.time, rng);
    const ControlWaveform h2 = random_control(f.sys.time, rng);
    const double a = inner_product(h1, obj.hessian_action(u, h2));
    const double b = inner_product(h2, obj.hessian_action(u, h1));
    CHECK(std::abs(a - b) <= 1e-8 * std::max(std::abs(a), std::abs(b)));

    const ControlWaveform zero = obj.hessian_action(u, ControlWaveform::zeros(f.sys.time));
    for (const auto &s : zero.samples())
      CHECK((s.x == 0.0 && s.y == 0.0));
  }
}

TEST_CASE("cost decreases along the negative gradient") {
  Fixture f(true);
  std::mt19937_64 rng(12);
  const ControlWaveform u = random_control(f.sys.time, rng);
  auto obj = f.objective();
  const ControlWaveform g = obj.gradient(u);
  const double tau = 1e-6 / control_norm(g);
  CHECK(obj.value(combine(u, -tau, g)) < obj.value(u));
}

TEST_CASE("one forward and one adjoint solve per iterate, two per hessian action") {
  Fixture f;
  std::mt19937_64 rng(14);
  const ControlWaveform u = random_control(f.sys.time, rng);
  const ControlWaveform h = random_control(f.sys.time, rng);
  auto obj = f.objective();
  obj.value(u);
  obj.gradient(u);
  obj.hessian_action(u, h);
  CHECK(obj.counters().forward == 1);
  CHECK(obj.counters().adjoint == 1);
  CHECK(obj.counters().linearized_forward == 1);
  CHECK(obj.counters().linearized_adjoint == 1);
  obj.hessian_action(u, h);
  CHECK(obj.counters().forward == 1);
  CHECK(obj.counters().adjoint == 1);
  CHECK(obj.counters().linearized_forward == 2);
  CHECK(obj.counters().linearized_adjoint == 2);

  // a trial point does not evict the current iterate
  obj.value(combine(u, 0.1, h));
  obj.gradient(u);
  CHECK(obj.counters().forward == 2);
  CHECK(obj.counters().adjoint == 1);
}

TEST_CASE("gradient is identical for any worker count") {
  Fixture f(true);
  std::mt19937_64 rng(16);
  const ControlWaveform u = random_control(f.sys.time, rng);
  const ControlWaveform h = random_control(f.sys.time, rng);
  auto one = f.objective();
  auto many = f.objective();
  many.set_workers(3);
  CHECK(one.value(u) == many.value(u));
  const auto g1 = one.gradient(u), g3 = many.gradient(u);
  const auto h1 = one.hessian_action(u, h), h3 = many.hessian_action(u, h);
  for (int m = 0; m < u.size(); ++m) {
    REQUIRE(g1[m] == g3[m]);
    REQUIRE(h1[m] == h3[m]);
  }
}

TEST_CASE("the flipped generator sign fails the derivative check") {
  RunConfig c = small_config();
  const auto good = check_derivatives(c);
  CHECK(good.passes(c.check_tolerance));
  const auto bad = check_derivatives(c, DerivativeConvention::FlippedSign);
  CHECK_FALSE(bad.passes(c.check_tolerance));
  CHECK(bad.gradient_error > 0.1);
}

TEST_CASE("normalized cost units rescale the si objective") {
  Fixture f(true);
  const CostUnits units{3e-3, 25e-3};
  BlochObjective norm(f.sys, f.target, f.config.alpha, {}, DerivativeConvention::Consistent, units);
  BlochObjective si(f.sys, f.target, f.config.alpha * units.length / units.time);
  std::mt19937_64 rng(18);
  const ControlWaveform u_si = random_control(f.sys.time, rng);
  const ControlWaveform h_si = random_control(f.sys.time, rng);
  ControlWaveform u = u_si, h = h_si;
  u.set_weight(f.sys.time.dt() / units.time);
  h.set_weight(u.weight());
  REQUIRE(norm.zero_control().weight() == u.weight());

  CHECK(norm.value(u) == Approx(si.value(u_si) / units.length).epsilon(1e-13));
  const auto gn = norm.gradient(u), gs = si.gradient(u_si);
  const auto hn = norm.hessian_action(u, h), hs = si.hessian_action(u_si, h_si);
  const double k = units.time / units.length;
  for (int m = 0; m < u.size(); ++m) {
    CHECK(gn[m].x == Approx(k * gs[m].x).epsilon(1e-12));
    CHECK(gn[m].y == Approx(k * gs[m].y).epsilon(1e-12));
    CHECK(hn[m].x == Approx(k * hs[m].x).epsilon(1e-12));
    CHECK(hn[m].y == Approx(k * hs[m].y).epsilon(1e-12));
  }
  CHECK_THROWS_AS(norm.value(u_si), ValidationError);

  RunConfig c = small_config();
  CHECK(check_derivatives(c).passes(1e-6));
  c.normalized_cost = false;
  CHECK(check_derivatives(c).passes(1e-6));
}
