#pragma once

// Desired slice profiles, target smoothing, the slice-select gradient and the
// conventional superposed-sinc multi-slice reference pulse.

#include "rfoc/bloch.hpp"
#include "rfoc/core.hpp"

#include <utility>
#include <vector>

namespace rfoc {

struct SliceSpec {
  int count = 1;
  double width = 5e-3;        // m
  double separation = 25e-3;  // m, center to center
  double flip = 1.5707963267948966;  // rad
  PhaseTag phase = PhaseTag::Uniform;

  void validate(const SpaceGrid &grid) const;
};

/// Centers of `count` equidistant slices, symmetric about z = 0, ordered from
/// negative to positive z.
std::vector<double> slice_centers(const SliceSpec &spec);

TargetProfile build_single_slice_target(const SliceSpec &spec, const SpaceGrid &grid);
TargetProfile build_sms_target(const SliceSpec &spec, const SpaceGrid &grid);
/// Uniform-phase profile plus its CAIPIRINHA partner: alternating sign of M_y
/// for odd slice counts, alternating sign of M_x for even counts.
std::pair<TargetProfile, TargetProfile> build_caipirinha_pair(const SliceSpec &spec,
                                                              const SpaceGrid &grid);
/// Profile for spec.phase (uniform or one of the shifted patterns).
TargetProfile build_target(const SliceSpec &spec, const SpaceGrid &grid);

/// Normalized Gaussian kernel with the given FWHM, truncated at +-4 sigma.
std::vector<double> gaussian_kernel(double fwhm, double spacing);

/// Componentwise convolution with gaussian_kernel; points outside the grid
/// are taken to be at equilibrium (0, 0, 1).
TargetProfile gaussian_filter(const TargetProfile &profile, double fwhm, const SpaceGrid &grid);

/// In-slice flags of the ideal rectangular pattern.
std::vector<bool> slice_mask(const TargetProfile &profile, const SpaceGrid &grid);

struct GradientSpec {
  double amplitude = 0.0;  // T/m, selective plateau
  double max_slew = 180.0; // T/m/s

  /// Plateau amplitude that makes an RF bandwidth (Hz) excite `width` metres.
  static double amplitude_for(double bandwidth, double width, double gamma);
};

/// Piecewise-constant trapezoid: ramp-up from t = 0, plateau through T_u,
/// ramp-down, then a negative rephasing trapezoid filling (.., T] so that the
/// gradient area from T_u/2 to T vanishes. Ramps use the fewest whole steps
/// allowed by the slew limit.
GradientWaveform build_gradient_waveform(const GradientSpec &spec, const TimeGrid &grid);

struct SincPulseOptions {
  double hamming = 0.54;  // 0.54 + 0.46 cos(...)
  double bisection_tol = 1e-12;
};

/// Superposition modulation sum_k cos(w_k (t - T_u/2)) with w_k = gamma G c_k.
/// With dt > 0, w_k is replaced by the precession rate the trapezoidal step
/// actually produces at c_k, so the slices land on their centers in simulation.
double sms_modulation(double t, double center_time, const std::vector<double> &centers,
                      double gamma, double amplitude, double dt = 0.0);

/// Hamming-apodized sinc on [0, T_u] with bandwidth gamma/(2 pi) G width,
/// modulated by sms_modulation and scaled by bisection until the Bloch
/// simulated flip at the innermost slice center equals spec.flip.
ControlWaveform build_conventional_sms_pulse(const SliceSpec &spec, const BlochSystem &sys,
                                             double plateau_amplitude,
                                             const SincPulseOptions &options = {});

/// Flip angle acos(M_z / M0) at z after applying u from equilibrium.
double simulated_flip(const BlochSystem &sys, const ControlWaveform &u, double z);

} // namespace rfoc
