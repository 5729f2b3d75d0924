#pragma once

// Crank-Nicolson integrators for the Bloch state equation, its adjoint, and
// their linearizations with respect to the control. Every spatial point is an
// independent 3-dimensional ODE; the *_point kernels integrate one point and
// the trajectory-level solvers run them block-parallel over the space grid.
//
// With E_m = I - dt/2 A(u_m) and F_m = I + dt/2 A(u_m):
//   state       E_m M_m = F_m M_{m-1} + dt b,                      M_0 given
//   adjoint     E_N^T P_N = M_N - M_d,  E_m^T P_m = F_{m+1}^T P_{m+1}
//   lin. state  E_m dM_m = F_m dM_{m-1} + dt A'(h_m) Mbar_m,         dM_0 = 0
//   lin. adjoint
//     E_N^T dP_N = dM_N + dt/2 A'(h_N)^T P_N
//     E_m^T dP_m = F_{m+1}^T dP_{m+1} + dt/2 A'(h_m)^T P_m + dt/2 A'(h_{m+1})^T P_{m+1}
// where Mbar_m = (M_m + M_{m-1}) / 2. Controls and directions are zero on
// intervals beyond N_u.

#include "rfoc/core.hpp"

#include <span>

namespace rfoc {

struct BlochSystem {
  TimeGrid time;
  SpaceGrid space;
  PhysicalConstants consts;
  Relaxation relax;
  GradientWaveform gradient;
  int workers = 1;

  void validate() const;
  void check_control(const ControlWaveform &u, const char *what) const;
};

/// Solves [I - dt/2 A] x = rhs by Gaussian elimination with partial pivoting.
Vec3 cn_step_solve(const Mat3 &a, double dt, Vec3 rhs);

void forward_point(const BlochSystem &sys, const ControlWaveform &u, double z, Vec3 m0,
                   std::span<Vec3> out);
void adjoint_point(const BlochSystem &sys, const ControlWaveform &u, double z, Vec3 residual,
                   std::span<Vec3> out);
void linearized_forward_point(const BlochSystem &sys, const ControlWaveform &u,
                              const ControlWaveform &h, double z, std::span<const Vec3> state,
                              std::span<Vec3> out);
void linearized_adjoint_point(const BlochSystem &sys, const ControlWaveform &u,
                              const ControlWaveform &h, double z, std::span<const Vec3> adjoint,
                              Vec3 dm_terminal, std::span<Vec3> out);

Trajectory forward_solve(const BlochSystem &sys, const ControlWaveform &u,
                         std::span<const Vec3> initial);
Trajectory adjoint_solve(const BlochSystem &sys, const ControlWaveform &u,
                         std::span<const Vec3> terminal_residual);
Trajectory linearized_forward(const BlochSystem &sys, const ControlWaveform &u,
                              const ControlWaveform &h, const Trajectory &state);
Trajectory linearized_adjoint(const BlochSystem &sys, const ControlWaveform &u,
                              const ControlWaveform &h, const Trajectory &adjoint,
                              std::span<const Vec3> dm_terminal);

/// Terminal magnetization of a single point; used for flip-angle calibration.
Vec3 simulate_point(const BlochSystem &sys, const ControlWaveform &u, double z, Vec3 m0);

} // namespace rfoc
