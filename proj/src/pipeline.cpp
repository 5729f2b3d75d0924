#include "rfoc/pipeline.hpp"

#include "rfoc/io.hpp"
#include "rfoc/targets.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <ostream>
#include <random>

namespace rfoc {

namespace fs = std::filesystem;

DesignProblem make_problem(const RunConfig &config) {
  config.validate();
  DesignProblem p{config.system(), {}, {}};
  if (config.target == TargetKind::CaipirinhaShifted)
    p.ideal = build_caipirinha_pair(config.slices, p.system.space).second;
  else
    p.ideal = build_sms_target(config.slices, p.system.space);
  p.target = config.filter_fwhm > 0.0 ? gaussian_filter(p.ideal, config.filter_fwhm, p.system.space)
                                      : p.ideal;
  return p;
}

namespace {

DesignResult finish(const DesignProblem &problem, ControlWaveform control, double cost) {
  DesignResult r;
  const Trajectory traj = forward_solve(problem.system, control, equilibrium(problem.system.space.size(),
                                                                            problem.system.relax.m0_eq));
  r.terminal = traj.terminal();
  r.report = evaluate_design(control, r.terminal, problem.ideal, problem.target, problem.system.space,
                             problem.system.consts);
  r.report.cost = cost;
  r.control = std::move(control);
  return r;
}

BlochObjective make_objective(const DesignProblem &problem, const RunConfig &config,
                              DerivativeConvention convention = DerivativeConvention::Consistent) {
  return BlochObjective(problem.system, problem.target, config.alpha, {}, convention,
                        config.cost_units());
}

// Same samples with the quadrature weight the objective expects.
ControlWaveform reweighted(const BlochObjective &objective, const ControlWaveform &u) {
  ControlWaveform out = u;
  out.set_weight(objective.zero_control().weight());
  return out;
}

} // namespace

DesignResult design_pulse(const RunConfig &config, const IterationObserver &observer) {
  const auto start = std::chrono::steady_clock::now();
  DesignProblem problem = make_problem(config);
  BlochObjective objective = make_objective(problem, config);
  OptimizationResult opt =
      trust_region_newton(objective, objective.zero_control(), config.optimizer, observer);

  DesignResult r;
  const Trajectory &state = objective.state(opt.control);
  r.terminal = state.terminal();
  r.report = evaluate_design(opt.control, r.terminal, problem.ideal, problem.target,
                             problem.system.space, problem.system.consts);
  r.report.cost = opt.log.final_cost;
  r.report.newton_iters = opt.log.newton_iterations();
  r.report.total_cg_steps = opt.log.total_cg_iterations();
  r.counters = objective.counters();
  r.control = std::move(opt.control);
  r.log = std::move(opt.log);
  r.diagnostic = std::move(opt.diagnostic);
  r.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

DesignResult simulate_pulse(const RunConfig &config, const ControlWaveform &control) {
  DesignProblem problem = make_problem(config);
  problem.system.check_control(control, "pulse");
  BlochObjective objective = make_objective(problem, config);
  const double cost = objective.value(reweighted(objective, control));
  return finish(problem, control, cost);
}

ControlWaveform conventional_pulse(const RunConfig &config) {
  config.validate();
  return build_conventional_sms_pulse(config.slices, config.system(), config.plateau_amplitude());
}

DerivativeCheck check_derivatives(const RunConfig &config, DerivativeConvention convention,
                                  const ControlWaveform *control) {
  DesignProblem problem = make_problem(config);
  BlochObjective objective = make_objective(problem, config, convention);
  const double eps = config.check_step;

  std::mt19937_64 rng(config.check_seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto random_control = [&] {
    ControlWaveform w = objective.zero_control();
    for (auto &s : w.mutable_samples())
      s = {unit(rng), unit(rng)};
    return w;
  };
  const ControlWaveform u = control ? reweighted(objective, *control) : random_control();

  DerivativeCheck out;
  const ControlWaveform g = objective.gradient(u);
  out.gradient_norm = control_norm(g);

  // Gradient against central differences of the cost, one component at a time.
  double max_err = 0.0, max_ref = 0.0;
  for (int m = 0; m < u.size(); ++m)
    for (int k = 0; k < 2; ++k) {
      ControlWaveform plus = u, minus = u;
      auto ps = plus.mutable_samples();
      auto ms = minus.mutable_samples();
      (k == 0 ? ps[m].x : ps[m].y) += eps;
      (k == 0 ? ms[m].x : ms[m].y) -= eps;
      const double fd = (objective.value(plus) - objective.value(minus)) / (2.0 * eps);
      const double exact = u.weight() * (k == 0 ? g[m].x : g[m].y);
      max_err = std::max(max_err, std::abs(fd - exact));
      max_ref = std::max(max_ref, std::abs(exact));
    }
  out.gradient_error = max_ref > 0.0 ? max_err / max_ref : max_err;

  // Hessian action against central differences of the gradient.
  const ControlWaveform h1 = random_control();
  const ControlWaveform h2 = random_control();
  for (const ControlWaveform *h : {&h1, &h2}) {
    const ControlWaveform hh = objective.hessian_action(u, *h);
    const ControlWaveform gp = objective.gradient(combine(u, eps, *h));
    const ControlWaveform gm = objective.gradient(combine(u, -eps, *h));
    double err = 0.0, ref = 0.0;
    for (int m = 0; m < u.size(); ++m) {
      const double fx = (gp[m].x - gm[m].x) / (2.0 * eps);
      const double fy = (gp[m].y - gm[m].y) / (2.0 * eps);
      err = std::max({err, std::abs(fx - hh[m].x), std::abs(fy - hh[m].y)});
      ref = std::max({ref, std::abs(hh[m].x), std::abs(hh[m].y)});
    }
    out.hessian_error = std::max(out.hessian_error, ref > 0.0 ? err / ref : err);
  }

  const double a = inner_product(h1, objective.hessian_action(u, h2));
  const double b = inner_product(h2, objective.hessian_action(u, h1));
  const double scale = std::max(std::abs(a), std::abs(b));
  out.symmetry_defect = scale > 0.0 ? std::abs(a - b) / scale : 0.0;
  return out;
}

std::string format_report(const DesignReport &r) {
  std::string s;
  s += "# rfoc design report\n";
  s += "# energy unit: (1 uT)^2 * ms; peak unit: uT\n";
  s += "# rmse: magnetization vs the optimization target; rmse_fwhm: M_xy vs a rectangle at the achieved half maximum\n";
  s += fmt::format("cost = {:.17g}\n", r.cost);
  s += fmt::format("rmse = {:.17g}\n", r.rmse);
  s += fmt::format("rmse_fwhm = {:.17g}\n", r.rmse_fwhm);
  s += fmt::format("mae_in = {:.17g}\n", r.mae_in);
  s += fmt::format("mae_out = {:.17g}\n", r.mae_out);
  s += fmt::format("b1_energy = {:.17g}\n", r.b1_energy);
  s += fmt::format("b1_peak = {:.17g}\n", r.b1_peak);
  s += fmt::format("newton_iters = {}\n", r.newton_iters);
  s += fmt::format("total_cg_steps = {}\n", r.total_cg_steps);
  return s;
}

std::string format_iteration_log(const IterationLog &log) {
  std::string s = "# iter\tgrad_norm\tcost\tcg_iters\tcg_status\tactual_decrease\tpredicted_decrease\t"
                  "radius_before\tradius_after\tstep_norm\taccepted\n";
  for (const auto &r : log.records)
    s += fmt::format("{}\t{:.17g}\t{:.17g}\t{}\t{}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\t{}\n",
                     r.iteration, r.gradient_norm, r.cost, r.cg_iterations, to_string(r.cg_status),
                     r.actual_decrease, r.predicted_decrease, r.radius_before, r.radius_after,
                     r.step_norm, r.accepted ? 1 : 0);
  return s;
}

namespace {

void prepare_output(const fs::path &out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out))
    throw IoError("cannot create output directory '" + out.string() + "'");
}

void write_metadata(const fs::path &out, const std::string &what, double seconds, int workers) {
  const std::time_t now = std::time(nullptr);
  char stamp[64] = {};
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  write_file_atomic(out / "metadata.txt",
                    fmt::format("run = {}\nfinished = {}\nwall_seconds = {:.3f}\nworkers = {}\n",
                                what, stamp, seconds, workers));
}

void write_design_artifacts(const fs::path &dir, const std::string &stem, const RunConfig &config,
                            const BlochSystem &sys, const DesignResult &r) {
  write_pulse_file(dir / (stem + "pulse.txt"), sys.time, r.control, sys.gradient,
                   config.consts.b1_scale);
  write_profile_file(dir / (stem + "profile.txt"), sys.space, r.terminal);
  write_file_atomic(dir / (stem + "report.txt"), format_report(r.report));
}

} // namespace

int run_design(const RunConfig &config, const fs::path &out, std::ostream &log) {
  prepare_output(out);
  const BlochSystem sys = config.system();
  const DesignResult r = design_pulse(config, [&](const IterationRecord &rec) {
    log << fmt::format("newton {:>2}  |g| {:.4e}  J {:.6e}  cg {:>2} ({})  rho {:.3g} -> {:.3g}  {}\n",
                       rec.iteration, rec.gradient_norm, rec.cost, rec.cg_iterations,
                       to_string(rec.cg_status), rec.radius_before, rec.radius_after,
                       rec.accepted ? "accepted" : "rejected");
  });
  if (!r.diagnostic.empty())
    log << "warning: " << r.diagnostic << '\n';
  write_design_artifacts(out, "", config, sys, r);
  write_file_atomic(out / "iterations.txt", format_iteration_log(r.log));
  write_metadata(out, "design", r.report.wall_seconds, sys.workers);
  log << format_report(r.report);
  return kExitOk;
}

int run_simulate(const RunConfig &config, const fs::path *pulse, const fs::path &out,
                 std::ostream &log) {
  prepare_output(out);
  const auto start = std::chrono::steady_clock::now();
  const BlochSystem sys = config.system();
  ControlWaveform control;
  if (pulse) {
    PulseFile f = read_pulse_file(*pulse);
    if (!(f.grid == sys.time))
      throw ValidationError("pulse file grid does not match the configured time grid");
    control = std::move(f.control);
  } else {
    control = conventional_pulse(config);
  }
  DesignResult r = simulate_pulse(config, control);
  write_design_artifacts(out, "", config, sys, r);
  write_metadata(out, "simulate",
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(),
                 sys.workers);
  log << format_report(r.report);
  return kExitOk;
}

int run_compare(const RunConfig &config, const fs::path &out, std::ostream &log) {
  prepare_output(out);
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::pair<std::string, DesignReport>> reports;

  if (config.compare_alphas.empty()) {
    for (int count : config.compare_counts) {
      RunConfig c = config;
      c.slices.count = count;
      const BlochSystem sys = c.system();
      log << fmt::format("slices {}: conventional\n", count);
      const DesignResult conv = simulate_pulse(c, conventional_pulse(c));
      write_design_artifacts(out, fmt::format("conv_{}_", count), c, sys, conv);
      log << fmt::format("slices {}: optimal control\n", count);
      const DesignResult oc = design_pulse(c);
      write_design_artifacts(out, fmt::format("oc_{}_", count), c, sys, oc);
      reports.emplace_back(fmt::format("conv:{}", count), conv.report);
      reports.emplace_back(fmt::format("oc:{}", count), oc.report);
    }
  } else {
    for (double alpha : config.compare_alphas) {
      RunConfig c = config;
      c.alpha = alpha;
      log << fmt::format("alpha {:g}\n", alpha);
      const DesignResult oc = design_pulse(c);
      write_design_artifacts(out, fmt::format("oc_alpha_{:g}_", alpha), c, c.system(), oc);
      reports.emplace_back(fmt::format("alpha={:g}", alpha), oc.report);
    }
  }

  const ComparisonTable table = render_comparison(reports);
  write_file_atomic(out / "comparison.txt", table.text);
  write_file_atomic(out / "comparison.tsv", table.records);
  write_metadata(out, "compare",
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(),
                 config.worker_count());
  log << table.text;
  return kExitOk;
}

int run_check_derivatives(const RunConfig &config, std::ostream &log,
                          DerivativeConvention convention) {
  const DerivativeCheck c = check_derivatives(config, convention);
  log << fmt::format("gradient_norm = {:.6e}\n", c.gradient_norm);
  log << fmt::format("gradient_vs_fd = {:.3e}\n", c.gradient_error);
  log << fmt::format("hessian_vs_fd = {:.3e}\n", c.hessian_error);
  log << fmt::format("hessian_symmetry = {:.3e}\n", c.symmetry_defect);
  const bool ok = c.passes(config.check_tolerance);
  log << (ok ? "derivative check passed\n" : "derivative check FAILED\n");
  return ok ? kExitOk : kExitNumerical;
}

} // namespace rfoc
