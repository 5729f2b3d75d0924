#pragma once

// Discrete cost functional with adjoint gradient and Hessian action.
//
//   J(u) = 1/2 sum_i dz' |M_{N,i} - M_d(z_i)|^2 + alpha/2 sum_{m<=N_u} dt' |u_m|^2
//
// with dz' = dz / L and dt' = dt / T for reference units L and T (both 1 for
// SI; the pulse duration and the domain half width for normalized units).
// Gradient and Hessian action are taken with respect to the scaled inner
// product <a, b> = sum_m dt' (a_x b_x + a_y b_y):
//
//   g_m      = alpha u_m + s (T/L) sum_i dz (P_m^T D_k Mbar_m)_{k=x,y}
//   [H h]_m  = alpha h_m + s (T/L) sum_i dz (dP_m^T D_k Mbar_m + P_m^T D_k dMbar_m)_{k=x,y}
//
// with s = gamma B1 and D_k = dA/du_k / s applied exactly once. Note that
// P^T D_x Mbar = P_y Mbar_z - P_z Mbar_y; the opposite sign (P^T A_1 Mbar with
// A_1 = -D_x) does not reproduce the finite-difference derivative.

#include "rfoc/bloch.hpp"
#include "rfoc/core.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace rfoc {

/// Waveform with the grid and weight of `shape` and the given samples.
ControlWaveform like(const ControlWaveform &shape, std::vector<ControlSample> samples);
double inner_product(const ControlWaveform &a, const ControlWaveform &b);
double control_norm(const ControlWaveform &a);
/// a + s * b
ControlWaveform combine(const ControlWaveform &a, double s, const ControlWaveform &b);
ControlWaveform scaled(double s, const ControlWaveform &a);

/// Matrix-free interface consumed by the trust-region optimizer.
class SmoothObjective {
public:
  virtual ~SmoothObjective() = default;
  virtual double value(const ControlWaveform &u) = 0;
  virtual ControlWaveform gradient(const ControlWaveform &u) = 0;
  virtual ControlWaveform hessian_action(const ControlWaveform &u, const ControlWaveform &h) = 0;
};

struct SolveCounters {
  int forward = 0;
  int adjoint = 0;
  int linearized_forward = 0;
  int linearized_adjoint = 0;
};

/// Sign applied to the control generators in gradient and Hessian action.
/// FlippedSign exists only so the derivative check can be shown to fail.
enum class DerivativeConvention { Consistent, FlippedSign };

/// Reference time T [s] and length L [m] of the cost functional.
struct CostUnits {
  double time = 1.0;
  double length = 1.0;
};

class BlochObjective final : public SmoothObjective {
public:
  BlochObjective(BlochSystem system, TargetProfile target, double alpha,
                 std::vector<Vec3> initial = {},
                 DerivativeConvention convention = DerivativeConvention::Consistent,
                 CostUnits units = {});

  /// u = 0 with the quadrature weight dt / T the objective expects.
  ControlWaveform zero_control() const;

  double value(const ControlWaveform &u) override;
  ControlWaveform gradient(const ControlWaveform &u) override;
  ControlWaveform hessian_action(const ControlWaveform &u, const ControlWaveform &h) override;

  /// Cached forward trajectory for u.
  const Trajectory &state(const ControlWaveform &u);
  /// Cached adjoint trajectory for u.
  const Trajectory &adjoint(const ControlWaveform &u);

  const BlochSystem &system() const { return sys_; }
  const TargetProfile &target() const { return target_; }
  double alpha() const { return alpha_; }
  const SolveCounters &counters() const { return counters_; }
  void set_workers(int workers) { sys_.workers = workers; }

private:
  struct CachedTrajectory {
    std::uint64_t revision = 0;
    Trajectory trajectory;
  };

  double fidelity(const Trajectory &state) const;
  double control_cost(const ControlWaveform &u) const;
  double generator_sign() const;
  void check_weight(const ControlWaveform &u) const;

  BlochSystem sys_;
  TargetProfile target_;
  double alpha_;
  std::vector<Vec3> initial_;
  DerivativeConvention convention_;
  CostUnits units_;
  SolveCounters counters_;
  // Two state slots so that evaluating a rejected trial point does not evict
  // the trajectories of the current iterate.
  std::array<std::optional<CachedTrajectory>, 2> states_;
  std::optional<CachedTrajectory> adjoint_;
  int next_state_slot_ = 0;
};

} // namespace rfoc
