#include "rfoc/targets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace rfoc {

void SliceSpec::validate(const SpaceGrid &grid) const {
  if (count < 1)
    throw ValidationError("slices: count must be at least 1");
  if (!(width > 0.0))
    throw ValidationError("slices: width must be positive");
  if (!(flip > 0.0 && flip <= std::numbers::pi))
    throw ValidationError("slices: flip angle must lie in (0, pi]");
  if (count > 1 && !(separation >= width))
    throw ValidationError("slices: overlapping slices (separation smaller than width)");
  const auto centers = slice_centers(*this);
  if (std::abs(centers.front()) + 0.5 * width > grid.half_width())
    throw ValidationError("slices: slice pattern does not fit inside the spatial domain");
}

std::vector<double> slice_centers(const SliceSpec &spec) {
  std::vector<double> c(static_cast<std::size_t>(spec.count));
  for (int k = 0; k < spec.count; ++k)
    c[k] = (k - 0.5 * (spec.count - 1)) * spec.separation;
  return c;
}

namespace {

Vec3 in_slice_value(double flip, PhaseTag phase, int sign) {
  const double s = std::sin(flip), c = std::cos(flip);
  switch (phase) {
  case PhaseTag::Uniform:
    return {0.0, s, c};
  case PhaseTag::AlternatingPi:
    return {0.0, sign * s, c};
  case PhaseTag::QuadratureShift:
    return {sign * s, 0.0, c};
  }
  return {0.0, s, c};
}

TargetProfile banded_profile(const SliceSpec &spec, const SpaceGrid &grid,
                             const std::vector<double> &centers, PhaseTag phase) {
  TargetProfile out;
  for (std::size_t k = 0; k < centers.size(); ++k) {
    // First slice (index 1) positive, alternating from there.
    const int sign = (k % 2 == 0) ? 1 : -1;
    out.slices.push_back({centers[k], spec.width, phase, phase == PhaseTag::Uniform ? 1 : sign});
  }
  out.values.assign(static_cast<std::size_t>(grid.size()), Vec3{0.0, 0.0, 1.0});
  for (int i = 0; i < grid.size(); ++i) {
    const double z = grid.position(i);
    for (const auto &band : out.slices)
      if (std::abs(z - band.center) < 0.5 * band.width) {
        out.values[i] = in_slice_value(spec.flip, band.phase, band.sign);
        break;
      }
  }
  return out;
}

} // namespace

TargetProfile build_single_slice_target(const SliceSpec &spec, const SpaceGrid &grid) {
  SliceSpec single = spec;
  single.count = 1;
  single.validate(grid);
  return banded_profile(single, grid, {0.0}, PhaseTag::Uniform);
}

TargetProfile build_sms_target(const SliceSpec &spec, const SpaceGrid &grid) {
  spec.validate(grid);
  return banded_profile(spec, grid, slice_centers(spec), PhaseTag::Uniform);
}

std::pair<TargetProfile, TargetProfile> build_caipirinha_pair(const SliceSpec &spec,
                                                              const SpaceGrid &grid) {
  if (spec.count < 2)
    throw ValidationError("CAIPIRINHA pattern needs at least two slices");
  spec.validate(grid);
  const auto centers = slice_centers(spec);
  const PhaseTag shifted = spec.count % 2 == 1 ? PhaseTag::AlternatingPi : PhaseTag::QuadratureShift;
  return {banded_profile(spec, grid, centers, PhaseTag::Uniform),
          banded_profile(spec, grid, centers, shifted)};
}

TargetProfile build_target(const SliceSpec &spec, const SpaceGrid &grid) {
  spec.validate(grid);
  return banded_profile(spec, grid, slice_centers(spec), spec.phase);
}

std::vector<double> gaussian_kernel(double fwhm, double spacing) {
  if (!(fwhm > 0.0))
    throw ValidationError("gaussian filter: fwhm must be positive");
  const double sigma = fwhm / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
  const int half = static_cast<int>(std::floor(4.0 * sigma / spacing));
  std::vector<double> w(static_cast<std::size_t>(2 * half + 1));
  double total = 0.0;
  for (int k = -half; k <= half; ++k) {
    const double d = k * spacing;
    w[k + half] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += w[k + half];
  }
  for (double &v : w)
    v /= total;
  return w;
}

TargetProfile gaussian_filter(const TargetProfile &profile, double fwhm, const SpaceGrid &grid) {
  if (profile.size() != grid.size())
    throw ValidationError("gaussian filter: profile does not match the grid");
  const auto w = gaussian_kernel(fwhm, grid.spacing());
  const int half = static_cast<int>(w.size() / 2);
  const Vec3 outside{0.0, 0.0, 1.0};
  TargetProfile out = profile;
  for (int i = 0; i < grid.size(); ++i) {
    Vec3 acc;
    for (int k = -half; k <= half; ++k) {
      const int j = i + k;
      const Vec3 &v = (j < 0 || j >= grid.size()) ? outside : profile.values[j];
      acc = acc + w[k + half] * v;
    }
    out.values[i] = acc;
  }
  return out;
}

std::vector<bool> slice_mask(const TargetProfile &profile, const SpaceGrid &grid) {
  std::vector<bool> mask(static_cast<std::size_t>(grid.size()), false);
  for (int i = 0; i < grid.size(); ++i) {
    const double z = grid.position(i);
    for (const auto &band : profile.slices)
      if (std::abs(z - band.center) < 0.5 * band.width) {
        mask[i] = true;
        break;
      }
  }
  return mask;
}

double GradientSpec::amplitude_for(double bandwidth, double width, double gamma) {
  return bandwidth / (gamma / (2.0 * std::numbers::pi) * width);
}

namespace {

// Ramp samples at interval midpoints, rising from 0 to `level` over n steps.
double ramp_sample(double level, int j, int n) { return level * (j + 0.5) / n; }

} // namespace

GradientWaveform build_gradient_waveform(const GradientSpec &spec, const TimeGrid &grid) {
  const int n = grid.steps();
  const int nu = grid.control_steps();
  const double dt = grid.dt();
  GradientWaveform g;
  g.samples.assign(static_cast<std::size_t>(n), 0.0);
  if (!(spec.max_slew > 0.0))
    throw ValidationError("gradient: max slew must be positive");
  if (spec.amplitude == 0.0)
    return g;

  const double level = spec.amplitude;
  const int ramp =
      std::max(1, static_cast<int>(std::ceil(std::abs(level) / (spec.max_slew * dt) - 1e-9)));
  if (ramp >= nu)
    throw ValidationError("gradient: ramp does not fit inside the RF window at the slew limit");
  const int rephase_steps = n - nu - ramp;
  if (rephase_steps < 2)
    throw ValidationError("gradient: no room for the rephasing lobe");

  for (int j = 0; j < ramp; ++j)
    g.samples[j] = ramp_sample(level, j, ramp);
  for (int j = ramp; j < nu; ++j)
    g.samples[j] = level;
  for (int j = 0; j < ramp; ++j)
    g.samples[nu + j] = ramp_sample(level, ramp - 1 - j, ramp);

  // Area (in units of dt) after T_u/2 that the lobe has to cancel; the
  // ramp-up sits before the center so this is not half the selective area.
  double needed = (nu % 2) ? 0.5 * g.samples[nu / 2] : 0.0;
  for (int j = (nu + 1) / 2; j < nu + ramp; ++j)
    needed += g.samples[j];

  // Smallest whole-step ramp for which the lobe amplitude respects the slew.
  for (int r = 1; 2 * r <= rephase_steps; ++r) {
    const double a = needed / (rephase_steps - r);
    if (std::abs(a) <= spec.max_slew * r * dt * (1.0 + 1e-12)) {
      const int first = nu + ramp;
      for (int j = 0; j < rephase_steps; ++j) {
        double v = -a;
        if (j < r)
          v = -ramp_sample(a, j, r);
        else if (j >= rephase_steps - r)
          v = -ramp_sample(a, rephase_steps - 1 - j, r);
        g.samples[first + j] = v;
      }
      return g;
    }
  }
  throw ValidationError("gradient: rephasing lobe is infeasible at the slew limit");
}

double sms_modulation(double t, double center_time, const std::vector<double> &centers,
                      double gamma, double amplitude, double dt) {
  double s = 0.0;
  for (double c : centers) {
    double w = gamma * amplitude * c;
    // the trapezoidal step precesses at 2 atan(w dt / 2) / dt, not w
    if (dt > 0.0)
      w = 2.0 * std::atan(0.5 * w * dt) / dt;
    s += std::cos(w * (t - center_time));
  }
  return s;
}

double simulated_flip(const BlochSystem &sys, const ControlWaveform &u, double z) {
  const double m0 = sys.relax.m0_eq;
  const Vec3 m = simulate_point(sys, u, z, {0.0, 0.0, m0});
  return std::acos(std::clamp(m.z / m0, -1.0, 1.0));
}

ControlWaveform build_conventional_sms_pulse(const SliceSpec &spec, const BlochSystem &sys,
                                             double plateau_amplitude,
                                             const SincPulseOptions &options) {
  spec.validate(sys.space);
  const TimeGrid &tg = sys.time;
  const double tu = tg.control_duration();
  const double center = 0.5 * tu;
  const double bandwidth = sys.consts.gamma / (2.0 * std::numbers::pi) * plateau_amplitude * spec.width;
  const auto centers = slice_centers(spec);

  std::vector<double> shape(static_cast<std::size_t>(tg.control_steps()));
  double base_area = 0.0;
  for (int m = 1; m <= tg.control_steps(); ++m) {
    const double t = tg.midpoint(m) - center;
    const double x = bandwidth * t;
    const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
    const double window =
        options.hamming + (1.0 - options.hamming) * std::cos(2.0 * std::numbers::pi * t / tu);
    base_area += sinc * window * tg.dt();
    shape[m - 1] =
        sinc * window * sms_modulation(tg.midpoint(m), center, centers, sys.consts.gamma,
                                       plateau_amplitude, tg.dt());
  }
  if (!(base_area > 0.0))
    throw NumericalError("conventional pulse: sinc base pulse has no positive area");

  auto pulse = [&](double amp) {
    std::vector<ControlSample> s(shape.size());
    for (std::size_t k = 0; k < shape.size(); ++k)
      s[k] = {amp * shape[k], 0.0};
    return ControlWaveform(std::move(s), tg.dt());
  };

  // Innermost slice center, preferring positive z on ties.
  double z_cal = centers.back();
  for (double c : centers)
    if (std::abs(c) < std::abs(z_cal))
      z_cal = c;

  // Half the small-tip estimate as the lower end of the bracket.
  double lo = 0.0;
  double hi = 0.5 * spec.flip / (sys.consts.control_gain() * base_area);
  int doublings = 0;
  while (simulated_flip(sys, pulse(hi), z_cal) < spec.flip) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 40)
      throw NumericalError("conventional pulse: flip angle could not be bracketed");
  }
  for (int it = 0; it < 200 && hi - lo > options.bisection_tol * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (simulated_flip(sys, pulse(mid), z_cal) < spec.flip)
      lo = mid;
    else
      hi = mid;
  }
  return pulse(0.5 * (lo + hi));
}

} // namespace rfoc
