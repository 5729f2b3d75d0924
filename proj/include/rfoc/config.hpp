#pragma once

// Run configuration: flat "dotted.key = value" documents with SI unit
// suffixes (ms, us, mm, uT, mT/m, kHz, deg, ...). Entries are separated by
// newlines or top-level commas; '#' starts a comment; lists use brackets.

#include "rfoc/bloch.hpp"
#include "rfoc/core.hpp"
#include "rfoc/objective.hpp"
#include "rfoc/optimizer.hpp"
#include "rfoc/targets.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace rfoc {

enum class TargetKind { Sms, CaipirinhaShifted };

struct RunConfig {
  std::string preset = "single-slice";

  int steps = 697;
  int control_steps = 512;
  double dt = 5e-6;
  double half_width = 0.5;
  int points = 5001;

  PhysicalConstants consts;
  bool relaxation = false;
  double t1 = 1.0;
  double t2 = 0.1;
  double m0 = 1.0;

  SliceSpec slices;
  TargetKind target = TargetKind::Sms;
  double filter_fwhm = 1.6e-3;  // 0 disables filtering

  double bandwidth = 2350.0;        // Hz
  double gradient_amplitude = 0.0;  // T/m; 0 derives it from bandwidth and slice width
  double max_slew = 180.0;          // T/m/s

  double alpha = 1e-4;
  /// Cost measured with time in units of the pulse duration and length in
  /// units of the half width a; false uses seconds and metres.
  bool normalized_cost = true;
  TrustRegionParams optimizer;
  int workers = 0;  // 0 = all hardware threads

  std::vector<int> compare_counts{1, 2, 3, 4, 5, 6};
  std::vector<double> compare_alphas;

  std::uint64_t check_seed = 1;
  double check_step = 1e-5;
  double check_tolerance = 1e-5;

  TimeGrid time_grid() const;
  SpaceGrid space_grid() const;
  Relaxation relax() const;
  double plateau_amplitude() const;
  GradientSpec gradient_spec() const;
  CostUnits cost_units() const;
  BlochSystem system() const;
  int worker_count() const;

  void validate() const;
};

/// Applies a named preset: "single-slice", "sms" or "small".
void apply_preset(RunConfig &config, std::string_view name);

/// Parses a config document on top of `base`. A `preset` key is applied before
/// every other key regardless of its position.
RunConfig parse_config(std::string_view text, RunConfig base = {});

/// Every key with its unit dimension, default and description.
std::string config_documentation();

/// Reads a number with an optional unit suffix, for example "25mm" or
/// "2.35 kHz", returning the value in SI units. `dimension` is one of
/// "length", "time", "frequency", "field", "gradient", "slew", "angle",
/// "rate" or "" (dimensionless).
double parse_quantity(std::string_view text, std::string_view dimension);

} // namespace rfoc
