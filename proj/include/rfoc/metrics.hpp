#pragma once

#include "rfoc/core.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rfoc {

/// Quality and power figures of one pulse. Energies are in (1 uT)^2 * ms,
/// peaks in uT.
struct DesignReport {
  double cost = 0.0;
  double rmse = 0.0;
  double rmse_fwhm = 0.0;
  double mae_in = 0.0;
  double mae_out = 0.0;
  double b1_energy = 0.0;
  double b1_peak = 0.0;
  int newton_iters = 0;
  int total_cg_steps = 0;
  double wall_seconds = 0.0;
};

double rmse(std::span<const Vec3> terminal, const TargetProfile &reference);

/// RMSE of M_xy against a rectangular pattern whose edges sit at the half
/// maximum crossings of the achieved profile around each ideal slice. Falls
/// back to the nominal edges for a slice without a crossing.
double rmse_fwhm_matched(std::span<const double> mxy, const TargetProfile &ideal,
                         const SpaceGrid &grid);

/// sqrt(Mx^2 + My^2) per point.
std::vector<double> transverse_magnitude(std::span<const Vec3> terminal);

/// Mean |M_xy - ideal_xy| over in-slice and out-of-slice points.
std::pair<double, double> mae_split(std::span<const double> mxy, const TargetProfile &ideal,
                                    const std::vector<bool> &mask);

/// sum_m dt (B1 u_x,m)^2 in (1 uT)^2 * ms.
double b1_energy(const ControlWaveform &u, const PhysicalConstants &consts);
/// max_m |B1 u_x,m| in uT.
double b1_peak(const ControlWaveform &u, const PhysicalConstants &consts);

/// Fills the profile and power metrics of a report from a simulated result.
DesignReport evaluate_design(const ControlWaveform &u, std::span<const Vec3> terminal,
                             const TargetProfile &ideal, const TargetProfile &rmse_reference,
                             const SpaceGrid &grid, const PhysicalConstants &consts);

struct ComparisonTable {
  std::string text;
  std::string records;
  int rows = 0;
  int metric_columns = 0;
};

/// Aligned table of the reports. Labels of the form "group:row" (for example
/// "conv:6" and "oc:6") are pivoted into one row per row key with one column
/// per group for energy, peak, mae_in and mae_out. Other labels give one row
/// each with the two RMSE figures added.
ComparisonTable render_comparison(const std::vector<std::pair<std::string, DesignReport>> &reports);

} // namespace rfoc
