#pragma once

// Grids, physical constants, waveforms and trajectories shared by the
// solvers, the objective and the optimizer.

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rfoc {

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  double &operator[](int k) { return k == 0 ? x : (k == 1 ? y : z); }
  double operator[](int k) const { return k == 0 ? x : (k == 1 ? y : z); }

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3 &, const Vec3 &) = default;
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
double norm(Vec3 a);

// Row-major 3x3.
struct Mat3 {
  std::array<double, 9> a{};

  double &operator()(int r, int c) { return a[3 * r + c]; }
  double operator()(int r, int c) const { return a[3 * r + c]; }

  static Mat3 identity() {
    Mat3 m;
    m(0, 0) = m(1, 1) = m(2, 2) = 1.0;
    return m;
  }
  Mat3 transposed() const;
  friend Vec3 operator*(const Mat3 &m, Vec3 v) {
    return {m(0, 0) * v.x + m(0, 1) * v.y + m(0, 2) * v.z,
            m(1, 0) * v.x + m(1, 1) * v.y + m(1, 2) * v.z,
            m(2, 0) * v.x + m(2, 1) * v.y + m(2, 2) * v.z};
  }
  friend bool operator==(const Mat3 &, const Mat3 &) = default;
};

/// Uniform time grid 0 = t_0 < ... < t_N = T; the control lives on the first
/// N_u intervals, T_u = t_{N_u} < T.
class TimeGrid {
public:
  static TimeGrid make(int steps, int control_steps, double dt);

  int steps() const { return steps_; }
  int control_steps() const { return control_steps_; }
  double dt() const { return dt_; }
  double duration() const { return steps_ * dt_; }
  double control_duration() const { return control_steps_ * dt_; }
  /// Midpoint of interval m (1-based, (t_{m-1}, t_m]).
  double midpoint(int m) const { return (m - 0.5) * dt_; }

  friend bool operator==(const TimeGrid &, const TimeGrid &) = default;

private:
  int steps_ = 0;
  int control_steps_ = 0;
  double dt_ = 0.0;
};

/// Equidistant points z_0 = -a, ..., z_{Z-1} = a.
class SpaceGrid {
public:
  static SpaceGrid make(double half_width, int points);

  double half_width() const { return half_width_; }
  int size() const { return points_; }
  double spacing() const { return 2.0 * half_width_ / (points_ - 1); }
  double position(int i) const {
    return -half_width_ + (2.0 * half_width_) * i / (points_ - 1);
  }
  std::vector<double> positions() const;

  friend bool operator==(const SpaceGrid &, const SpaceGrid &) = default;

private:
  double half_width_ = 0.0;
  int points_ = 0;
};

struct PhysicalConstants {
  double gamma = 2.675222e8;  // rad/s/T, proton
  double b1_scale = 1e-6;     // tesla per control unit

  void validate() const;
  /// gamma * B1, the factor multiplying the control in the Bloch matrix.
  double control_gain() const { return gamma * b1_scale; }
};

struct Relaxation {
  double inv_t1 = 0.0;  // 1/s
  double inv_t2 = 0.0;  // 1/s
  double m0_eq = 1.0;
  bool enabled = false;

  static Relaxation disabled() { return {}; }
  static Relaxation from_times(double t1, double t2, double m0 = 1.0);

  void validate() const;
  double effective_inv_t1() const { return enabled ? inv_t1 : 0.0; }
  double effective_inv_t2() const { return enabled ? inv_t2 : 0.0; }
  /// Constant drive b = (0, 0, M0/T1); exactly zero when disabled.
  Vec3 drive() const { return {0.0, 0.0, m0_eq * effective_inv_t1()}; }
};

struct ControlSample {
  double x = 0.0, y = 0.0;
  friend bool operator==(const ControlSample &, const ControlSample &) = default;
};

/// Piecewise-constant RF control on the first N_u intervals of a TimeGrid.
/// Directions and gradients share this type. Every mutable access bumps the
/// revision, which keys the trajectory caches of the objective.
class ControlWaveform {
public:
  ControlWaveform() = default;
  ControlWaveform(int control_steps, double dt);
  ControlWaveform(std::vector<ControlSample> samples, double dt);
  static ControlWaveform zeros(const TimeGrid &grid) {
    return ControlWaveform(grid.control_steps(), grid.dt());
  }

  int size() const { return static_cast<int>(samples_.size()); }
  double dt() const { return dt_; }
  /// Quadrature weight of the inner product: dt, or dt / T when time is
  /// measured in units of the pulse duration T.
  double weight() const { return weight_; }
  void set_weight(double w) { weight_ = w; }
  std::uint64_t revision() const { return revision_; }

  std::span<const ControlSample> samples() const { return samples_; }
  std::span<ControlSample> mutable_samples() {
    touch();
    return samples_;
  }
  const ControlSample &operator[](int m) const { return samples_[m]; }
  /// Sample of interval m (1-based); zero beyond N_u.
  ControlSample on_interval(int m) const {
    return m <= size() ? samples_[m - 1] : ControlSample{};
  }
  void set(int m, ControlSample s) {
    touch();
    samples_[m] = s;
  }

  bool all_finite() const;
  bool same_shape(const ControlWaveform &other) const {
    return size() == other.size() && dt_ == other.dt_ && weight_ == other.weight_;
  }

private:
  void touch() { revision_ = next_revision(); }
  static std::uint64_t next_revision();

  std::vector<ControlSample> samples_;
  double dt_ = 0.0;
  double weight_ = 0.0;
  std::uint64_t revision_ = next_revision();
};

/// Slice-select gradient G_z in T/m, one value per time interval.
struct GradientWaveform {
  std::vector<double> samples;

  int size() const { return static_cast<int>(samples.size()); }
  double on_interval(int m) const { return samples[m - 1]; }
  double max_slew(double dt) const;
};

enum class TrajectoryKind { State, Adjoint, LinearizedState, LinearizedAdjoint };

/// Values at t_0..t_N for every spatial point, stored point-major so that the
/// time series of one point is contiguous. Adjoint-type trajectories leave
/// index 0 unused.
class Trajectory {
public:
  Trajectory() = default;
  Trajectory(TrajectoryKind kind, int steps, int points)
      : kind_(kind), steps_(steps), points_(points),
        data_(static_cast<std::size_t>(steps + 1) * points) {}

  TrajectoryKind kind() const { return kind_; }
  int steps() const { return steps_; }
  int points() const { return points_; }

  Vec3 &at(int i, int m) { return data_[index(i, m)]; }
  const Vec3 &at(int i, int m) const { return data_[index(i, m)]; }
  std::span<Vec3> point(int i) {
    return {data_.data() + index(i, 0), static_cast<std::size_t>(steps_ + 1)};
  }
  std::span<const Vec3> point(int i) const {
    return {data_.data() + index(i, 0), static_cast<std::size_t>(steps_ + 1)};
  }
  std::vector<Vec3> terminal() const;
  bool all_finite() const;

private:
  std::size_t index(int i, int m) const {
    return static_cast<std::size_t>(i) * (steps_ + 1) + m;
  }

  TrajectoryKind kind_ = TrajectoryKind::State;
  int steps_ = 0;
  int points_ = 0;
  std::vector<Vec3> data_;
};

enum class PhaseTag { Uniform, AlternatingPi, QuadratureShift };

struct SliceBand {
  double center = 0.0;
  double width = 0.0;
  PhaseTag phase = PhaseTag::Uniform;
  int sign = 1;
};

/// Desired terminal magnetization M_d(z_i).
struct TargetProfile {
  std::vector<Vec3> values;
  std::vector<SliceBand> slices;

  int size() const { return static_cast<int>(values.size()); }
};

/// Equilibrium magnetization (0, 0, m0) at every point.
std::vector<Vec3> equilibrium(int points, double m0 = 1.0);

/// Bloch matrix A(u; z) in the rotating frame:
///   [ -1/T2       gGz z     g uy B1 ]
///   [ -gGz z      -1/T2     g ux B1 ]
///   [ -g uy B1    -g ux B1  -1/T1   ]
Mat3 bloch_matrix(ControlSample u, double z, const PhysicalConstants &consts,
                  const Relaxation &relax, double gradient);

/// Derivatives of A with respect to u_x and u_y, without the gamma*B1 factor.
Mat3 control_generator_x();
Mat3 control_generator_y();

/// A'(h) = gamma B1 (h_x dA/du_x + h_y dA/du_y).
Mat3 control_perturbation(ControlSample h, const PhysicalConstants &consts);

} // namespace rfoc
