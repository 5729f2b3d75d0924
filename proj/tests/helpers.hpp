#pragma once

#include "rfoc/config.hpp"
#include "rfoc/objective.hpp"
#include "rfoc/targets.hpp"

#include <random>

namespace rfoc::test {

inline RunConfig small_config(bool relaxation = false) {
  RunConfig c;
  apply_preset(c, "small");
  c.relaxation = relaxation;
  c.workers = 1;
  return c;
}

inline BlochSystem small_system(bool relaxation = false) { return small_config(relaxation).system(); }

inline ControlWaveform random_control(const TimeGrid &grid, std::mt19937_64 &rng, double scale = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  ControlWaveform u = ControlWaveform::zeros(grid);
  for (auto &s : u.mutable_samples())
    s = {d(rng), d(rng)};
  return u;
}

inline TargetProfile small_target(const RunConfig &c, const SpaceGrid &grid) {
  return gaussian_filter(build_target(c.slices, grid), 8e-3, grid);
}

inline double max_abs_diff(const Vec3 &a, const Vec3 &b) {
  return std::max({std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.z - b.z)});
}

} // namespace rfoc::test
