#pragma once

// Matrix-free trust-region CG-Newton method (Steihaug). All norms and inner
// products are the dt-scaled ones of the control space.

#include "rfoc/core.hpp"
#include "rfoc/objective.hpp"

#include <functional>
#include <string>
#include <vector>

namespace rfoc {

struct TrustRegionParams {
  double tol_newton = 1e-9;
  int maxit_newton = 5;
  double tol_cg = 1e-6;
  int maxit_cg = 50;
  double rho0 = 1.0;
  double rho_max = 2.0;
  double q = 2.0;
  double sigma1 = 0.03;
  double sigma2 = 0.25;
  double sigma3 = 0.7;
  /// Round-off guard for the curvature and decrease tests, relative to
  /// max(1, |J(u_k)|).
  double epsilon_rel = 1e-12;

  void validate() const;
};

TrustRegionParams default_params();

enum class CgStatus { Converged, Boundary, NegativeCurvature, MaxIterations };

std::string to_string(CgStatus status);

struct CgResult {
  ControlWaveform step;
  /// H applied to the step, accumulated from the CG recurrences.
  ControlWaveform hessian_step;
  CgStatus status = CgStatus::Converged;
  int iterations = 0;
  double initial_residual = 0.0;
  double final_residual = 0.0;
};

using HessianOperator = std::function<ControlWaveform(const ControlWaveform &)>;

/// Largest tau >= 0 with ||step + tau * direction|| <= radius.
double boundary_step(const ControlWaveform &step, const ControlWaveform &direction, double radius);

/// Approximately solves H d = -g inside the ball ||d|| <= rho. A direction
/// with <p, Hp> < epsilon <p, p> counts as negative curvature.
CgResult steihaug_cg(const ControlWaveform &gradient, const HessianOperator &hessian, double rho,
                     double tol_cg, int maxit_cg, double epsilon);

struct IterationRecord {
  int iteration = 0;
  double gradient_norm = 0.0;
  double cost = 0.0;
  int cg_iterations = 0;
  CgStatus cg_status = CgStatus::Converged;
  double actual_decrease = 0.0;
  double predicted_decrease = 0.0;
  double radius_before = 0.0;
  double radius_after = 0.0;
  double step_norm = 0.0;
  bool accepted = false;
};

struct IterationLog {
  std::vector<IterationRecord> records;
  double final_cost = 0.0;
  double final_gradient_norm = 0.0;
  bool gradient_current = false;

  int newton_iterations() const { return static_cast<int>(records.size()); }
  int total_cg_iterations() const;
  int accepted_steps() const;
};

struct OptimizationResult {
  ControlWaveform control;
  IterationLog log;
  /// Set when no step was accepted although iterations were taken.
  std::string diagnostic;
};

using IterationObserver = std::function<void(const IterationRecord &)>;

OptimizationResult trust_region_newton(SmoothObjective &objective, const ControlWaveform &u0,
                                       const TrustRegionParams &params,
                                       const IterationObserver &observer = {});

} // namespace rfoc
