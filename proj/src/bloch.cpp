#include "rfoc/bloch.hpp"

#include "rfoc/parallel.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace rfoc {

void BlochSystem::validate() const {
  consts.validate();
  relax.validate();
  if (gradient.size() != time.steps())
    throw ValidationError("gradient waveform has " + std::to_string(gradient.size()) +
                          " samples, time grid has " + std::to_string(time.steps()) + " steps");
  for (double g : gradient.samples)
    if (!std::isfinite(g))
      throw ValidationError("gradient waveform contains non-finite samples");
  if (workers < 1)
    throw ValidationError("worker count must be at least 1");
}

void BlochSystem::check_control(const ControlWaveform &u, const char *what) const {
  if (u.size() != time.control_steps())
    throw ValidationError(std::string(what) + " has " + std::to_string(u.size()) +
                          " samples, expected " + std::to_string(time.control_steps()));
  if (u.dt() != time.dt())
    throw ValidationError(std::string(what) + " step length does not match the time grid");
}

Vec3 cn_step_solve(const Mat3 &a, double dt, Vec3 rhs) {
  const double half = 0.5 * dt;
  double m[3][4];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c)
      m[r][c] = (r == c ? 1.0 : 0.0) - half * a(r, c);
    m[r][3] = rhs[r];
  }

  double det = 1.0;
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(m[r][col]) > std::abs(m[pivot][col]))
        pivot = r;
    if (pivot != col)
      for (int c = 0; c < 4; ++c)
        std::swap(m[col][c], m[pivot][c]);
    det *= m[col][col];
    if (std::abs(det) < 1e-300)
      throw NumericalError("Crank-Nicolson step matrix is singular");
    for (int r = col + 1; r < 3; ++r) {
      const double f = m[r][col] / m[col][col];
      for (int c = col; c < 4; ++c)
        m[r][c] -= f * m[col][c];
    }
  }

  Vec3 x;
  for (int r = 2; r >= 0; --r) {
    double s = m[r][3];
    for (int c = r + 1; c < 3; ++c)
      s -= m[r][c] * x[c];
    x[r] = s / m[r][r];
  }
  return x;
}

namespace {

// x + dt/2 * A x
Vec3 half_step(const Mat3 &a, double dt, Vec3 x) { return x + (0.5 * dt) * (a * x); }

Mat3 system_matrix(const BlochSystem &sys, const ControlWaveform &u, int m, double z) {
  return bloch_matrix(u.on_interval(m), z, sys.consts, sys.relax, sys.gradient.on_interval(m));
}

} // namespace

void forward_point(const BlochSystem &sys, const ControlWaveform &u, double z, Vec3 m0,
                   std::span<Vec3> out) {
  const int n = sys.time.steps();
  const double dt = sys.time.dt();
  const Vec3 drive = dt * sys.relax.drive();
  out[0] = m0;
  for (int m = 1; m <= n; ++m) {
    const Mat3 a = system_matrix(sys, u, m, z);
    out[m] = cn_step_solve(a, dt, half_step(a, dt, out[m - 1]) + drive);
  }
}

void adjoint_point(const BlochSystem &sys, const ControlWaveform &u, double z, Vec3 residual,
                   std::span<Vec3> out) {
  const int n = sys.time.steps();
  const double dt = sys.time.dt();
  out[0] = Vec3{};
  Mat3 at = system_matrix(sys, u, n, z).transposed();
  out[n] = cn_step_solve(at, dt, residual);
  for (int m = n - 1; m >= 1; --m) {
    const Vec3 rhs = half_step(at, dt, out[m + 1]);
    at = system_matrix(sys, u, m, z).transposed();
    out[m] = cn_step_solve(at, dt, rhs);
  }
}

void linearized_forward_point(const BlochSystem &sys, const ControlWaveform &u,
                              const ControlWaveform &h, double z, std::span<const Vec3> state,
                              std::span<Vec3> out) {
  const int n = sys.time.steps();
  const int nu = sys.time.control_steps();
  const double dt = sys.time.dt();
  out[0] = Vec3{};
  for (int m = 1; m <= n; ++m) {
    const Mat3 a = system_matrix(sys, u, m, z);
    Vec3 rhs = half_step(a, dt, out[m - 1]);
    if (m <= nu) {
      const Vec3 mbar = 0.5 * (state[m] + state[m - 1]);
      rhs = rhs + dt * (control_perturbation(h.on_interval(m), sys.consts) * mbar);
    }
    out[m] = cn_step_solve(a, dt, rhs);
  }
}

void linearized_adjoint_point(const BlochSystem &sys, const ControlWaveform &u,
                              const ControlWaveform &h, double z, std::span<const Vec3> adjoint,
                              Vec3 dm_terminal, std::span<Vec3> out) {
  const int n = sys.time.steps();
  const int nu = sys.time.control_steps();
  const double dt = sys.time.dt();
  auto source = [&](int m) {
    if (m > nu)
      return Vec3{};
    return (0.5 * dt) *
           (control_perturbation(h.on_interval(m), sys.consts).transposed() * adjoint[m]);
  };

  out[0] = Vec3{};
  Mat3 at = system_matrix(sys, u, n, z).transposed();
  Vec3 next_source = source(n);
  out[n] = cn_step_solve(at, dt, dm_terminal + next_source);
  for (int m = n - 1; m >= 1; --m) {
    const Vec3 this_source = source(m);
    const Vec3 rhs = half_step(at, dt, out[m + 1]) + this_source + next_source;
    at = system_matrix(sys, u, m, z).transposed();
    out[m] = cn_step_solve(at, dt, rhs);
    next_source = this_source;
  }
}

Trajectory forward_solve(const BlochSystem &sys, const ControlWaveform &u,
                         std::span<const Vec3> initial) {
  sys.check_control(u, "control");
  if (static_cast<int>(initial.size()) != sys.space.size())
    throw ValidationError("initial magnetization does not match the space grid");
  Trajectory traj(TrajectoryKind::State, sys.time.steps(), sys.space.size());
  for_each_block(sys.space.size(), sys.workers, [&](int, int first, int last) {
    for (int i = first; i < last; ++i)
      forward_point(sys, u, sys.space.position(i), initial[i], traj.point(i));
  });
  return traj;
}

Trajectory adjoint_solve(const BlochSystem &sys, const ControlWaveform &u,
                         std::span<const Vec3> terminal_residual) {
  sys.check_control(u, "control");
  if (static_cast<int>(terminal_residual.size()) != sys.space.size())
    throw ValidationError("terminal residual does not match the space grid");
  Trajectory traj(TrajectoryKind::Adjoint, sys.time.steps(), sys.space.size());
  for_each_block(sys.space.size(), sys.workers, [&](int, int first, int last) {
    for (int i = first; i < last; ++i)
      adjoint_point(sys, u, sys.space.position(i), terminal_residual[i], traj.point(i));
  });
  return traj;
}

Trajectory linearized_forward(const BlochSystem &sys, const ControlWaveform &u,
                              const ControlWaveform &h, const Trajectory &state) {
  sys.check_control(u, "control");
  sys.check_control(h, "direction");
  if (state.steps() != sys.time.steps() || state.points() != sys.space.size())
    throw ValidationError("state trajectory does not match the grids");
  Trajectory traj(TrajectoryKind::LinearizedState, sys.time.steps(), sys.space.size());
  for_each_block(sys.space.size(), sys.workers, [&](int, int first, int last) {
    for (int i = first; i < last; ++i)
      linearized_forward_point(sys, u, h, sys.space.position(i), state.point(i), traj.point(i));
  });
  return traj;
}

Trajectory linearized_adjoint(const BlochSystem &sys, const ControlWaveform &u,
                              const ControlWaveform &h, const Trajectory &adjoint,
                              std::span<const Vec3> dm_terminal) {
  sys.check_control(u, "control");
  sys.check_control(h, "direction");
  if (adjoint.steps() != sys.time.steps() || adjoint.points() != sys.space.size())
    throw ValidationError("adjoint trajectory does not match the grids");
  if (static_cast<int>(dm_terminal.size()) != sys.space.size())
    throw ValidationError("terminal linearized state does not match the space grid");
  Trajectory traj(TrajectoryKind::LinearizedAdjoint, sys.time.steps(), sys.space.size());
  for_each_block(sys.space.size(), sys.workers, [&](int, int first, int last) {
    for (int i = first; i < last; ++i)
      linearized_adjoint_point(sys, u, h, sys.space.position(i), adjoint.point(i),
                               dm_terminal[i], traj.point(i));
  });
  return traj;
}

Vec3 simulate_point(const BlochSystem &sys, const ControlWaveform &u, double z, Vec3 m0) {
  sys.check_control(u, "control");
  std::vector<Vec3> buffer(static_cast<std::size_t>(sys.time.steps() + 1));
  forward_point(sys, u, z, m0, buffer);
  return buffer.back();
}

} // namespace rfoc
