#pragma once

// Delimited text files for pulses and simulated profiles. Numbers are written
// with 17 significant digits so that reading a file back is exact.

#include "rfoc/core.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace rfoc {

struct PulseFile {
  TimeGrid grid;
  ControlWaveform control;
  GradientWaveform gradient;
  double b1_scale = 1e-6;
};

/// Rows "t[s] u_x u_y G_z[T/m]", one per time step (t is the end of the
/// interval); '#' header lines carry the grid.
void write_pulse_file(const std::filesystem::path &path, const TimeGrid &grid,
                      const ControlWaveform &u, const GradientWaveform &g, double b1_scale);
PulseFile read_pulse_file(const std::filesystem::path &path);

struct ProfileRow {
  double z = 0.0;
  Vec3 m;
  double mxy = 0.0;
};

/// Rows "z[m] Mx My Mz Mxy".
void write_profile_file(const std::filesystem::path &path, const SpaceGrid &grid,
                        std::span<const Vec3> terminal);
std::vector<ProfileRow> read_profile_file(const std::filesystem::path &path);

/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path &path, const std::string &contents);
std::string read_file(const std::filesystem::path &path);

} // namespace rfoc
