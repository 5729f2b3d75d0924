#include "rfoc/core.hpp"

#include <algorithm>
#include <cmath>

namespace rfoc {

double norm(Vec3 a) { return std::sqrt(dot(a, a)); }

Mat3 Mat3::transposed() const {
  Mat3 t;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      t(r, c) = (*this)(c, r);
  return t;
}

TimeGrid TimeGrid::make(int steps, int control_steps, double dt) {
  if (!(control_steps > 0 && control_steps < steps))
    throw ValidationError("time grid: need 0 < control_steps < steps, got control_steps=" +
                          std::to_string(control_steps) + ", steps=" + std::to_string(steps));
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw ValidationError("time grid: dt must be positive");
  TimeGrid g;
  g.steps_ = steps;
  g.control_steps_ = control_steps;
  g.dt_ = dt;
  return g;
}

SpaceGrid SpaceGrid::make(double half_width, int points) {
  if (points < 2)
    throw ValidationError("space grid: need at least 2 points, got " + std::to_string(points));
  if (!(half_width > 0.0) || !std::isfinite(half_width))
    throw ValidationError("space grid: half width must be positive");
  SpaceGrid g;
  g.half_width_ = half_width;
  g.points_ = points;
  return g;
}

std::vector<double> SpaceGrid::positions() const {
  std::vector<double> z(points_);
  for (int i = 0; i < points_; ++i)
    z[i] = position(i);
  return z;
}

void PhysicalConstants::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw ValidationError("gamma must be positive");
  if (!(b1_scale > 0.0) || !std::isfinite(b1_scale))
    throw ValidationError("b1_scale must be positive");
}

Relaxation Relaxation::from_times(double t1, double t2, double m0) {
  if (!(t1 > 0.0) || !(t2 > 0.0))
    throw ValidationError("relaxation times must be positive");
  return {1.0 / t1, 1.0 / t2, m0, true};
}

void Relaxation::validate() const {
  if (!(inv_t1 >= 0.0) || !(inv_t2 >= 0.0) || !std::isfinite(inv_t1) || !std::isfinite(inv_t2))
    throw ValidationError("relaxation rates must be finite and nonnegative");
  if (!std::isfinite(m0_eq))
    throw ValidationError("equilibrium magnetization must be finite");
}

ControlWaveform::ControlWaveform(int control_steps, double dt)
    : samples_(static_cast<std::size_t>(std::max(control_steps, 0))), dt_(dt), weight_(dt) {}

ControlWaveform::ControlWaveform(std::vector<ControlSample> samples, double dt)
    : samples_(std::move(samples)), dt_(dt), weight_(dt) {}

std::uint64_t ControlWaveform::next_revision() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

bool ControlWaveform::all_finite() const {
  return std::all_of(samples_.begin(), samples_.end(), [](const ControlSample &s) {
    return std::isfinite(s.x) && std::isfinite(s.y);
  });
}

double GradientWaveform::max_slew(double dt) const {
  double slew = samples.empty() ? 0.0 : std::abs(samples.front()) / dt;
  for (std::size_t k = 1; k < samples.size(); ++k)
    slew = std::max(slew, std::abs(samples[k] - samples[k - 1]) / dt);
  if (!samples.empty())
    slew = std::max(slew, std::abs(samples.back()) / dt);
  return slew;
}

std::vector<Vec3> Trajectory::terminal() const {
  std::vector<Vec3> out(points_);
  for (int i = 0; i < points_; ++i)
    out[i] = at(i, steps_);
  return out;
}

bool Trajectory::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](const Vec3 &v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
  });
}

std::vector<Vec3> equilibrium(int points, double m0) {
  return std::vector<Vec3>(static_cast<std::size_t>(points), Vec3{0.0, 0.0, m0});
}

Mat3 bloch_matrix(ControlSample u, double z, const PhysicalConstants &consts,
                  const Relaxation &relax, double gradient) {
  const double precession = consts.gamma * gradient * z;
  const double gain = consts.control_gain();
  const double r2 = relax.effective_inv_t2();
  Mat3 a;
  a(0, 0) = -r2;
  a(0, 1) = precession;
  a(0, 2) = gain * u.y;
  a(1, 0) = -precession;
  a(1, 1) = -r2;
  a(1, 2) = gain * u.x;
  a(2, 0) = -gain * u.y;
  a(2, 1) = -gain * u.x;
  a(2, 2) = -relax.effective_inv_t1();
  return a;
}

Mat3 control_generator_x() {
  Mat3 a;
  a(1, 2) = 1.0;
  a(2, 1) = -1.0;
  return a;
}

Mat3 control_generator_y() {
  Mat3 a;
  a(0, 2) = 1.0;
  a(2, 0) = -1.0;
  return a;
}

Mat3 control_perturbation(ControlSample h, const PhysicalConstants &consts) {
  const double gain = consts.control_gain();
  Mat3 a;
  a(0, 2) = gain * h.y;
  a(1, 2) = gain * h.x;
  a(2, 0) = -gain * h.y;
  a(2, 1) = -gain * h.x;
  return a;
}

} // namespace rfoc
