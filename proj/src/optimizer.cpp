#include "rfoc/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace rfoc {

void TrustRegionParams::validate() const {
  if (!(q > 1.0))
    throw ValidationError("trust region: q must exceed 1");
  if (!(0.0 < sigma1 && sigma1 < sigma2 && sigma2 < sigma3 && sigma3 < 1.0))
    throw ValidationError("trust region: need 0 < sigma1 < sigma2 < sigma3 < 1");
  if (!(rho0 > 0.0) || !(rho0 <= rho_max))
    throw ValidationError("trust region: need 0 < rho0 <= rho_max");
  if (!(tol_newton > 0.0) || !(tol_cg > 0.0) || !(epsilon_rel > 0.0))
    throw ValidationError("trust region: tolerances must be positive");
  if (maxit_newton < 0 || maxit_cg < 1)
    throw ValidationError("trust region: iteration limits must be positive");
}

TrustRegionParams default_params() { return TrustRegionParams{}; }

std::string to_string(CgStatus status) {
  switch (status) {
  case CgStatus::Converged:
    return "converged";
  case CgStatus::Boundary:
    return "boundary";
  case CgStatus::NegativeCurvature:
    return "negative_curvature";
  case CgStatus::MaxIterations:
    return "maxit";
  }
  return "unknown";
}

int IterationLog::total_cg_iterations() const {
  int total = 0;
  for (const auto &r : records)
    total += r.cg_iterations;
  return total;
}

int IterationLog::accepted_steps() const {
  return static_cast<int>(
      std::count_if(records.begin(), records.end(), [](const auto &r) { return r.accepted; }));
}

double boundary_step(const ControlWaveform &step, const ControlWaveform &direction, double radius) {
  // ||s + tau p||^2 = rho^2  <=>  pp tau^2 + 2 sp tau + (ss - rho^2) = 0
  const double pp = inner_product(direction, direction);
  const double sp = inner_product(step, direction);
  const double ss = inner_product(step, step);
  if (pp == 0.0)
    return 0.0;
  const double c = ss - radius * radius;
  const double disc = std::sqrt(std::max(sp * sp - pp * c, 0.0));
  // Cancellation-free positive root.
  if (sp >= 0.0)
    return disc + sp > 0.0 ? -c / (sp + disc) : 0.0;
  return (disc - sp) / pp;
}

CgResult steihaug_cg(const ControlWaveform &gradient, const HessianOperator &hessian, double rho,
                     double tol_cg, int maxit_cg, double epsilon) {
  CgResult out;
  out.step = scaled(0.0, gradient);
  out.hessian_step = out.step;
  ControlWaveform r = scaled(-1.0, gradient);
  ControlWaveform p = r;
  double rr = inner_product(r, r);
  out.initial_residual = std::sqrt(rr);
  const double stop = tol_cg * out.initial_residual;

  auto finish_on_boundary = [&](const ControlWaveform &hp, CgStatus status) {
    const double tau = boundary_step(out.step, p, rho);
    out.step = combine(out.step, tau, p);
    out.hessian_step = combine(out.hessian_step, tau, hp);
    out.status = status;
    out.final_residual = std::sqrt(rr);
    return out;
  };

  while (std::sqrt(rr) > stop && out.iterations < maxit_cg) {
    const ControlWaveform hp = hessian(p);
    ++out.iterations;
    // epsilon is relative to |p|^2 so that a short direction late in the
    // solve is not mistaken for negative curvature
    const double curvature = inner_product(p, hp);
    if (curvature < epsilon * inner_product(p, p))
      return finish_on_boundary(hp, CgStatus::NegativeCurvature);

    const double alpha = rr / curvature;
    const ControlWaveform trial = combine(out.step, alpha, p);
    if (control_norm(trial) >= rho)
      return finish_on_boundary(hp, CgStatus::Boundary);

    out.step = trial;
    out.hessian_step = combine(out.hessian_step, alpha, hp);
    r = combine(r, -alpha, hp);
    const double rr_next = inner_product(r, r);
    p = combine(r, rr_next / rr, p);
    rr = rr_next;
  }

  out.final_residual = std::sqrt(rr);
  out.status = std::sqrt(rr) <= stop ? CgStatus::Converged : CgStatus::MaxIterations;
  return out;
}

OptimizationResult trust_region_newton(SmoothObjective &objective, const ControlWaveform &u0,
                                       const TrustRegionParams &params,
                                       const IterationObserver &observer) {
  params.validate();
  OptimizationResult result;
  ControlWaveform u = u0;
  double cost = objective.value(u);
  ControlWaveform g = objective.gradient(u);
  double gnorm = control_norm(g);
  bool gradient_current = true;
  double rho = params.rho0;

  for (int k = 0; k < params.maxit_newton; ++k) {
    if (!gradient_current) {
      g = objective.gradient(u);
      gnorm = control_norm(g);
      gradient_current = true;
    }
    if (!(gnorm > params.tol_newton))
      break;

    const double eps = params.epsilon_rel * std::max(1.0, std::abs(cost));
    const CgResult cg = steihaug_cg(
        g, [&](const ControlWaveform &h) { return objective.hessian_action(u, h); }, rho,
        params.tol_cg, params.maxit_cg, eps);

    ControlWaveform trial = combine(u, 1.0, cg.step);
    const double trial_cost = objective.value(trial);
    const double actual = cost - trial_cost;
    const double predicted =
        -0.5 * inner_product(cg.step, cg.hessian_step) - inner_product(cg.step, g);

    IterationRecord rec;
    rec.iteration = k;
    rec.gradient_norm = gnorm;
    rec.cost = cost;
    rec.cg_iterations = cg.iterations;
    rec.cg_status = cg.status;
    rec.actual_decrease = actual;
    rec.predicted_decrease = predicted;
    rec.radius_before = rho;
    rec.step_norm = control_norm(cg.step);
    rec.accepted = actual > eps && actual > params.sigma1 * predicted;

    if (actual > eps && std::abs(actual / predicted - 1.0) <= 1.0 - params.sigma3)
      rho = std::min(params.q * rho, params.rho_max);
    else if (actual <= eps)
      rho /= params.q;
    else if (actual < params.sigma2 * predicted)
      rho /= params.q;
    rec.radius_after = rho;

    if (rec.accepted) {
      u = std::move(trial);
      cost = trial_cost;
      gradient_current = false;
    }
    result.log.records.push_back(rec);
    if (observer)
      observer(rec);
  }

  result.log.final_cost = cost;
  result.log.gradient_current = gradient_current;
  result.log.final_gradient_norm = gradient_current ? gnorm : std::nan("");
  if (!result.log.records.empty() && result.log.accepted_steps() == 0)
    result.diagnostic = "no trust-region step was accepted; returning the initial control";
  result.control = std::move(u);
  return result;
}

} // namespace rfoc
