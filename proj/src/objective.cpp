#include "rfoc/objective.hpp"

#include "rfoc/parallel.hpp"

#include <cmath>
#include <utility>

namespace rfoc {

namespace {

void require_same_shape(const ControlWaveform &a, const ControlWaveform &b) {
  if (!a.same_shape(b))
    throw ValidationError("control waveforms live on different grids");
}

// Per-block partial sums of the two control components over m = 1..N_u,
// reduced in block order.
class BlockSums {
public:
  BlockSums(int blocks, int control_steps)
      : control_steps_(control_steps),
        sums_(static_cast<std::size_t>(blocks) * control_steps) {}

  ControlSample *block(int b) { return sums_.data() + static_cast<std::size_t>(b) * control_steps_; }

  std::vector<ControlSample> reduce() const {
    std::vector<ControlSample> out(control_steps_);
    const std::size_t blocks = sums_.size() / std::max(control_steps_, 1);
    for (std::size_t b = 0; b < blocks; ++b)
      for (int m = 0; m < control_steps_; ++m) {
        out[m].x += sums_[b * control_steps_ + m].x;
        out[m].y += sums_[b * control_steps_ + m].y;
      }
    return out;
  }

private:
  int control_steps_;
  std::vector<ControlSample> sums_;
};

} // namespace

ControlWaveform like(const ControlWaveform &shape, std::vector<ControlSample> samples) {
  ControlWaveform out(std::move(samples), shape.dt());
  out.set_weight(shape.weight());
  return out;
}

double inner_product(const ControlWaveform &a, const ControlWaveform &b) {
  require_same_shape(a, b);
  double s = 0.0;
  for (int m = 0; m < a.size(); ++m)
    s += a[m].x * b[m].x + a[m].y * b[m].y;
  return a.weight() * s;
}

double control_norm(const ControlWaveform &a) { return std::sqrt(inner_product(a, a)); }

ControlWaveform combine(const ControlWaveform &a, double s, const ControlWaveform &b) {
  require_same_shape(a, b);
  std::vector<ControlSample> out(a.size());
  for (int m = 0; m < a.size(); ++m)
    out[m] = {a[m].x + s * b[m].x, a[m].y + s * b[m].y};
  return like(a, std::move(out));
}

ControlWaveform scaled(double s, const ControlWaveform &a) {
  std::vector<ControlSample> out(a.size());
  for (int m = 0; m < a.size(); ++m)
    out[m] = {s * a[m].x, s * a[m].y};
  return like(a, std::move(out));
}

BlochObjective::BlochObjective(BlochSystem system, TargetProfile target, double alpha,
                               std::vector<Vec3> initial, DerivativeConvention convention,
                               CostUnits units)
    : sys_(std::move(system)), target_(std::move(target)), alpha_(alpha),
      initial_(std::move(initial)), convention_(convention), units_(units) {
  sys_.validate();
  if (!(units_.time > 0.0) || !(units_.length > 0.0))
    throw ValidationError("cost units must be positive");
  if (!(alpha_ > 0.0) || !std::isfinite(alpha_))
    throw ValidationError("alpha must be positive");
  if (target_.size() != sys_.space.size())
    throw ValidationError("target profile does not match the space grid");
  if (initial_.empty())
    initial_ = equilibrium(sys_.space.size(), sys_.relax.m0_eq);
  if (static_cast<int>(initial_.size()) != sys_.space.size())
    throw ValidationError("initial magnetization does not match the space grid");
}

double BlochObjective::generator_sign() const {
  return convention_ == DerivativeConvention::Consistent ? 1.0 : -1.0;
}

const Trajectory &BlochObjective::state(const ControlWaveform &u) {
  for (auto &slot : states_)
    if (slot && slot->revision == u.revision())
      return slot->trajectory;
  auto &slot = states_[next_state_slot_];
  next_state_slot_ = 1 - next_state_slot_;
  slot.reset();
  Trajectory traj = forward_solve(sys_, u, initial_);
  ++counters_.forward;
  slot = CachedTrajectory{u.revision(), std::move(traj)};
  return slot->trajectory;
}

const Trajectory &BlochObjective::adjoint(const ControlWaveform &u) {
  if (adjoint_ && adjoint_->revision == u.revision())
    return adjoint_->trajectory;
  const Trajectory &m = state(u);
  std::vector<Vec3> residual(sys_.space.size());
  for (int i = 0; i < sys_.space.size(); ++i)
    residual[i] = m.at(i, m.steps()) - target_.values[i];
  adjoint_.reset();
  Trajectory traj = adjoint_solve(sys_, u, residual);
  ++counters_.adjoint;
  adjoint_ = CachedTrajectory{u.revision(), std::move(traj)};
  return adjoint_->trajectory;
}

double BlochObjective::fidelity(const Trajectory &m) const {
  double s = 0.0;
  for (int i = 0; i < m.points(); ++i) {
    const Vec3 r = m.at(i, m.steps()) - target_.values[i];
    s += dot(r, r);
  }
  return 0.5 * sys_.space.spacing() / units_.length * s;
}

ControlWaveform BlochObjective::zero_control() const {
  ControlWaveform u = ControlWaveform::zeros(sys_.time);
  u.set_weight(sys_.time.dt() / units_.time);
  return u;
}

void BlochObjective::check_weight(const ControlWaveform &u) const {
  if (u.weight() != sys_.time.dt() / units_.time)
    throw ValidationError("control quadrature weight does not match the cost units");
}

double BlochObjective::control_cost(const ControlWaveform &u) const {
  return 0.5 * alpha_ * inner_product(u, u);
}

double BlochObjective::value(const ControlWaveform &u) {
  sys_.check_control(u, "control");
  check_weight(u);
  return fidelity(state(u)) + control_cost(u);
}

ControlWaveform BlochObjective::gradient(const ControlWaveform &u) {
  sys_.check_control(u, "control");
  check_weight(u);
  const Trajectory &m = state(u);
  const Trajectory &p = adjoint(u);
  const int nu = sys_.time.control_steps();
  const int points = sys_.space.size();
  BlockSums sums(block_count(points), nu);

  for_each_block(points, sys_.workers, [&](int b, int first, int last) {
    ControlSample *acc = sums.block(b);
    for (int i = first; i < last; ++i) {
      auto mi = m.point(i);
      auto pi = p.point(i);
      for (int k = 1; k <= nu; ++k) {
        const Vec3 mbar = 0.5 * (mi[k] + mi[k - 1]);
        const Vec3 &pk = pi[k];
        // P^T D_x Mbar and P^T D_y Mbar
        acc[k - 1].x += pk.y * mbar.z - pk.z * mbar.y;
        acc[k - 1].y += pk.x * mbar.z - pk.z * mbar.x;
      }
    }
  });

  const double factor = generator_sign() * sys_.consts.control_gain() * sys_.space.spacing() *
                        units_.time / units_.length;
  std::vector<ControlSample> g = sums.reduce();
  for (int k = 0; k < nu; ++k) {
    g[k].x = alpha_ * u[k].x + factor * g[k].x;
    g[k].y = alpha_ * u[k].y + factor * g[k].y;
  }
  return like(u, std::move(g));
}

ControlWaveform BlochObjective::hessian_action(const ControlWaveform &u, const ControlWaveform &h) {
  sys_.check_control(u, "control");
  sys_.check_control(h, "direction");
  check_weight(u);
  check_weight(h);
  const Trajectory &m = state(u);
  const Trajectory &p = adjoint(u);
  const int n = sys_.time.steps();
  const int nu = sys_.time.control_steps();
  const int points = sys_.space.size();
  BlockSums sums(block_count(points), nu);

  for_each_block(points, sys_.workers, [&](int b, int first, int last) {
    std::vector<Vec3> dm(static_cast<std::size_t>(n + 1));
    std::vector<Vec3> dp(static_cast<std::size_t>(n + 1));
    ControlSample *acc = sums.block(b);
    for (int i = first; i < last; ++i) {
      const double z = sys_.space.position(i);
      auto mi = m.point(i);
      auto pi = p.point(i);
      linearized_forward_point(sys_, u, h, z, mi, dm);
      linearized_adjoint_point(sys_, u, h, z, pi, dm[n], dp);
      for (int k = 1; k <= nu; ++k) {
        const Vec3 mbar = 0.5 * (mi[k] + mi[k - 1]);
        const Vec3 dmbar = 0.5 * (dm[k] + dm[k - 1]);
        const Vec3 &pk = pi[k];
        const Vec3 &dpk = dp[k];
        acc[k - 1].x += (dpk.y * mbar.z - dpk.z * mbar.y) + (pk.y * dmbar.z - pk.z * dmbar.y);
        acc[k - 1].y += (dpk.x * mbar.z - dpk.z * mbar.x) + (pk.x * dmbar.z - pk.z * dmbar.x);
      }
    }
  });
  ++counters_.linearized_forward;
  ++counters_.linearized_adjoint;

  const double factor = generator_sign() * sys_.consts.control_gain() * sys_.space.spacing() *
                        units_.time / units_.length;
  std::vector<ControlSample> hh = sums.reduce();
  for (int k = 0; k < nu; ++k) {
    hh[k].x = alpha_ * h[k].x + factor * hh[k].x;
    hh[k].y = alpha_ * h[k].y + factor * hh[k].y;
  }
  return like(u, std::move(hh));
}

} // namespace rfoc
