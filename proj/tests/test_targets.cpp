#include "rfoc/targets.hpp"

#include "helpers.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <numeric>

using namespace rfoc;
using namespace rfoc::test;
using Catch::Approx;

namespace {

const SpaceGrid kGrid = SpaceGrid::make(0.5, 5001);

Vec3 value_at(const TargetProfile &p, double z) {
  const int i = static_cast<int>(std::lround((z + kGrid.half_width()) / kGrid.spacing()));
  return p.values[i];
}

} // namespace

TEST_CASE("single slice target values") {
  SliceSpec s;
  auto p = build_single_slice_target(s, kGrid);
  CHECK(max_abs_diff(value_at(p, 0.0), {0, 1, 0}) < 1e-15);
  CHECK(value_at(p, 10e-3) == Vec3{0, 0, 1});
  REQUIRE(p.slices.size() == 1);

  s.flip = 1e-12;
  auto flat = build_single_slice_target(s, kGrid);
  for (const auto &v : flat.values)
    CHECK(max_abs_diff(v, {0, 0, 1}) < 1e-11);
}

TEST_CASE("sms target layout") {
  SliceSpec s;
  s.count = 6;
  auto p = build_sms_target(s, kGrid);
  REQUIRE(p.slices.size() == 6);
  const double expect[] = {-62.5e-3, -37.5e-3, -12.5e-3, 12.5e-3, 37.5e-3, 62.5e-3};
  for (int k = 0; k < 6; ++k) {
    CHECK(p.slices[k].center == Approx(expect[k]).margin(1e-15));
    CHECK(max_abs_diff(value_at(p, expect[k]), {0, 1, 0}) < 1e-15);
  }
  CHECK(value_at(p, 0.0) == Vec3{0, 0, 1});
  CHECK(value_at(p, 25e-3) == Vec3{0, 0, 1});

  SliceSpec one;
  auto a = build_sms_target(one, kGrid);
  auto b = build_single_slice_target(one, kGrid);
  CHECK(a.values == b.values);
}

TEST_CASE("caipirinha patterns") {
  SliceSpec s;
  s.count = 5;
  s.flip = 0.7;
  auto [plain, odd] = build_caipirinha_pair(s, kGrid);
  const auto c5 = slice_centers(s);
  CHECK(max_abs_diff(value_at(plain, c5[1]), {0, std::sin(0.7), std::cos(0.7)}) < 1e-15);
  CHECK(max_abs_diff(value_at(odd, c5[0]), {0, std::sin(0.7), std::cos(0.7)}) < 1e-15);
  CHECK(max_abs_diff(value_at(odd, c5[1]), {0, -std::sin(0.7), std::cos(0.7)}) < 1e-15);

  s.count = 6;
  auto [plain6, even] = build_caipirinha_pair(s, kGrid);
  const auto c6 = slice_centers(s);
  CHECK(max_abs_diff(value_at(even, c6[0]), {std::sin(0.7), 0, std::cos(0.7)}) < 1e-15);
  CHECK(max_abs_diff(value_at(even, c6[1]), {-std::sin(0.7), 0, std::cos(0.7)}) < 1e-15);

  s.count = 2;
  s.flip = 1e-12;
  auto [x, y] = build_caipirinha_pair(s, kGrid);
  for (std::size_t i = 0; i < x.values.size(); ++i) {
    CHECK(max_abs_diff(x.values[i], {0, 0, 1}) < 1e-11);
    CHECK(max_abs_diff(y.values[i], {0, 0, 1}) < 1e-11);
  }

  s.count = 1;
  CHECK_THROWS_AS(build_caipirinha_pair(s, kGrid), ValidationError);
}

TEST_CASE("slice spec validation") {
  SliceSpec s;
  s.count = 0;
  CHECK_THROWS_AS(build_sms_target(s, kGrid), ValidationError);
  s = {};
  s.count = 3;
  s.separation = 4e-3;
  CHECK_THROWS_AS(build_sms_target(s, kGrid), ValidationError);
  s = {};
  s.count = 60;
  CHECK_THROWS_AS(build_sms_target(s, kGrid), ValidationError);
  s = {};
  s.flip = 4.0;
  CHECK_THROWS_AS(build_sms_target(s, kGrid), ValidationError);
}

TEST_CASE("gaussian kernel and filter") {
  const auto w = gaussian_kernel(1.6e-3, 2e-4);
  CHECK(std::accumulate(w.begin(), w.end(), 0.0) == Approx(1.0).epsilon(1e-14));
  CHECK(w.size() % 2 == 1);
  // half maximum at fwhm/2 = 4 samples from the center
  const std::size_t c = w.size() / 2;
  CHECK(w[c + 4] / w[c] == Approx(0.5).epsilon(1e-12));

  SliceSpec s;
  s.width = 20e-3;
  auto raw = build_single_slice_target(s, kGrid);
  auto f = gaussian_filter(raw, 1.6e-3, kGrid);
  CHECK(max_abs_diff(value_at(f, 0.0), {0, 1, 0}) < 1e-6);
  // smoothed edge takes intermediate values
  CHECK(value_at(f, 10e-3).y > 0.3);
  CHECK(value_at(f, 10e-3).y < 0.7);
  for (const auto &v : f.values)
    CHECK(norm(v) <= 1.0 + 1e-12);

  TargetProfile rest{equilibrium(kGrid.size()), {}};
  auto g = gaussian_filter(rest, 1.6e-3, kGrid);
  for (const auto &v : g.values)
    CHECK(max_abs_diff(v, {0, 0, 1}) < 1e-15);

  SliceSpec six;
  six.count = 6;
  auto sms = gaussian_filter(build_sms_target(six, kGrid), 1.6e-3, kGrid);
  for (const auto &v : sms.values)
    CHECK(norm(v) <= 1.0 + 1e-12);
  CHECK_THROWS_AS(gaussian_kernel(0.0, 1e-4), ValidationError);
}

TEST_CASE("slice mask marks the rectangular bands") {
  SliceSpec s;
  s.count = 2;
  auto p = build_sms_target(s, kGrid);
  auto m = slice_mask(p, kGrid);
  // 5 mm at 0.2 mm spacing with open edges: 25 points per slice
  CHECK(std::count(m.begin(), m.end(), true) == 50);
}

TEST_CASE("gradient waveform for the single slice timing") {
  auto tg = TimeGrid::make(697, 512, 5e-6);
  GradientSpec spec{GradientSpec::amplitude_for(2350.0, 5e-3, 2.675222e8), 180.0};
  auto g = build_gradient_waveform(spec, tg);
  CHECK(g.size() == 697);
  CHECK(g.size() * tg.dt() == Approx(3.485e-3));
  CHECK(g.max_slew(tg.dt()) <= 180.0 * (1 + 1e-9));
  CHECK(g.on_interval(256) == Approx(spec.amplitude));

  // gradient area after the pulse center vanishes
  double area = 0.0;
  for (int m = 257; m <= 697; ++m)
    area += g.on_interval(m);
  CHECK(std::abs(area) < 1e-12 * spec.amplitude * 697);
  CHECK(g.on_interval(697) == Approx(0.0).margin(spec.amplitude));

  auto zero = build_gradient_waveform(GradientSpec{0.0, 180.0}, tg);
  for (double v : zero.samples)
    CHECK(v == 0.0);
}

TEST_CASE("gradient waveform rejects infeasible slew") {
  auto tg = TimeGrid::make(20, 16, 5e-6);
  CHECK_THROWS_AS(build_gradient_waveform(GradientSpec{0.05, 180.0}, tg), ValidationError);
}

TEST_CASE("sms modulation at the pulse center") {
  const std::vector<double> c2 = {-12.5e-3, 12.5e-3};
  CHECK(sms_modulation(1.0, 1.0, c2, 2.675e8, 2.76e-3) == 2.0);
  CHECK(sms_modulation(1.0, 1.0, c2, 2.675e8, 2.76e-3, 20e-6) == 2.0);
}

TEST_CASE("conventional pulse calibration") {
  RunConfig c;
  apply_preset(c, "sms");
  c.workers = 1;
  c.points = 1001;
  c.half_width = 0.1;

  c.slices.count = 1;
  const BlochSystem s1 = c.system();
  const ControlWaveform one = build_conventional_sms_pulse(c.slices, s1, c.plateau_amplitude());
  const double flip = simulated_flip(s1, one, 0.0);
  CHECK(std::abs(flip - std::numbers::pi / 2) <= 0.5 * std::numbers::pi / 180);

  c.slices.count = 6;
  const BlochSystem s6 = c.system();
  const ControlWaveform six = build_conventional_sms_pulse(c.slices, s6, c.plateau_amplitude());
  CHECK(std::abs(simulated_flip(s6, six, 12.5e-3) - std::numbers::pi / 2) < 1e-6);
  double p1 = 0.0, p6 = 0.0;
  for (const auto &s : one.samples())
    p1 = std::max(p1, std::abs(s.x));
  for (const auto &s : six.samples())
    p6 = std::max(p6, std::abs(s.x));
  CHECK(p6 / p1 == Approx(6.0).epsilon(0.05));
  for (const auto &s : six.samples())
    CHECK(s.y == 0.0);
}
