#pragma once

// Orchestration of the design, simulate, compare and check-derivatives
// workflows on top of the library modules.

#include "rfoc/config.hpp"
#include "rfoc/metrics.hpp"
#include "rfoc/objective.hpp"
#include "rfoc/optimizer.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace rfoc {

enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitNumerical = 3, kExitIo = 4 };

struct DesignProblem {
  BlochSystem system;
  /// Unfiltered rectangular profile; reference for RMSE and MAE.
  TargetProfile ideal;
  /// Profile handed to the optimizer (Gaussian-filtered unless fwhm = 0).
  TargetProfile target;
};

DesignProblem make_problem(const RunConfig &config);

struct DesignResult {
  ControlWaveform control;
  std::vector<Vec3> terminal;
  DesignReport report;
  IterationLog log;
  SolveCounters counters;
  std::string diagnostic;
};

/// Optimal-control design from u = 0.
DesignResult design_pulse(const RunConfig &config, const IterationObserver &observer = {});

/// Simulates a given pulse on the configured problem and fills its report.
DesignResult simulate_pulse(const RunConfig &config, const ControlWaveform &control);

/// Calibrated superposed-sinc reference pulse for the configured slices.
ControlWaveform conventional_pulse(const RunConfig &config);

struct DerivativeCheck {
  double gradient_error = 0.0;
  double hessian_error = 0.0;
  double symmetry_defect = 0.0;
  double gradient_norm = 0.0;

  bool passes(double tolerance) const {
    return gradient_error <= tolerance && hessian_error <= tolerance && symmetry_defect <= tolerance;
  }
};

/// Finite-difference validation of gradient and Hessian action at a random
/// control with entries in [-1, 1] (or at `control` when given).
///   gradient_error  max_m |fd_m - <g, e_m>| / max_m |<g, e_m>|
///   hessian_error   max over directions of ||Hh - fd||_inf / ||Hh||_inf
///   symmetry_defect |<h1, H h2> - <h2, H h1>| / max(|<h1, H h2>|, |<h2, H h1>|)
DerivativeCheck check_derivatives(const RunConfig &config,
                                  DerivativeConvention convention = DerivativeConvention::Consistent,
                                  const ControlWaveform *control = nullptr);

std::string format_report(const DesignReport &report);
std::string format_iteration_log(const IterationLog &log);

/// Writers used by the CLI. Each returns an ExitCode.
int run_design(const RunConfig &config, const std::filesystem::path &out, std::ostream &log);
int run_simulate(const RunConfig &config, const std::filesystem::path *pulse,
                 const std::filesystem::path &out, std::ostream &log);
int run_compare(const RunConfig &config, const std::filesystem::path &out, std::ostream &log);
int run_check_derivatives(const RunConfig &config, std::ostream &log,
                          DerivativeConvention convention = DerivativeConvention::Consistent);

} // namespace rfoc
