// rfoc: command-line front end for pulse design, simulation and comparison.

#include "rfoc/config.hpp"
#include "rfoc/io.hpp"
#include "rfoc/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

struct Common {
  std::string config;
  std::string out = "rfoc-out";
  int workers = -1;
  bool verbose = false;
};

void add_common(CLI::App *cmd, Common &c, bool with_out = true) {
  cmd->add_option("--config", c.config, "config file (key = value lines)");
  if (with_out)
    cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--workers", c.workers, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--verbose", c.verbose, "progress on stderr");
}

rfoc::RunConfig load(const Common &c) {
  rfoc::RunConfig cfg;
  if (!c.config.empty())
    cfg = rfoc::parse_config(rfoc::read_file(c.config));
  if (c.workers >= 0)
    cfg.workers = c.workers;
  cfg.validate();
  return cfg;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"RF pulse design by optimal control of the Bloch equation"};
  app.require_subcommand(0, 1);
  bool list_keys = false;
  app.add_flag("--list-keys", list_keys, "print every config key with its default and exit");

  Common design_opts, sim_opts, cmp_opts, chk_opts;
  auto *design = app.add_subcommand("design", "optimize a pulse from zero");
  add_common(design, design_opts);

  auto *simulate = app.add_subcommand("simulate", "simulate a pulse file or the conventional pulse");
  add_common(simulate, sim_opts);
  std::string pulse_path;
  bool conventional = false;
  auto *pulse_opt = simulate->add_option("--pulse", pulse_path, "pulse file written by design");
  auto *conv_opt = simulate->add_flag("--conventional", conventional, "use the superposed-sinc pulse");
  pulse_opt->excludes(conv_opt);

  auto *compare = app.add_subcommand("compare", "conventional vs optimized over slice counts or alphas");
  add_common(compare, cmp_opts);

  auto *check = app.add_subcommand("check-derivatives", "finite-difference check of gradient and Hessian");
  add_common(check, chk_opts, false);
  bool flip_sign = false;
  check->add_flag("--flip-sign", flip_sign)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : rfoc::kExitValidation;
  }

  if (list_keys) {
    std::cout << rfoc::config_documentation();
    return rfoc::kExitOk;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return rfoc::kExitValidation;
  }

  std::ostringstream sink;
  try {
    if (design->parsed()) {
      const auto cfg = load(design_opts);
      return rfoc::run_design(cfg, design_opts.out, design_opts.verbose ? std::cerr : sink);
    }
    if (simulate->parsed()) {
      if (pulse_path.empty() && !conventional)
        throw rfoc::ValidationError("simulate needs --pulse FILE or --conventional");
      const auto cfg = load(sim_opts);
      const std::filesystem::path p = pulse_path;
      return rfoc::run_simulate(cfg, pulse_path.empty() ? nullptr : &p, sim_opts.out,
                                sim_opts.verbose ? std::cerr : sink);
    }
    if (compare->parsed()) {
      const auto cfg = load(cmp_opts);
      return rfoc::run_compare(cfg, cmp_opts.out, cmp_opts.verbose ? std::cerr : sink);
    }
    if (check->parsed()) {
      const auto cfg = load(chk_opts);
      return rfoc::run_check_derivatives(cfg, std::cout,
                                         flip_sign ? rfoc::DerivativeConvention::FlippedSign
                                                   : rfoc::DerivativeConvention::Consistent);
    }
  } catch (const rfoc::ValidationError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return rfoc::kExitValidation;
  } catch (const rfoc::NumericalError &e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return rfoc::kExitNumerical;
  } catch (const rfoc::IoError &e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return rfoc::kExitIo;
  }
  return rfoc::kExitOk;
}
