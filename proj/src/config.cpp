#include "rfoc/config.hpp"

#include "rfoc/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>

namespace rfoc {

TimeGrid RunConfig::time_grid() const { return TimeGrid::make(steps, control_steps, dt); }

SpaceGrid RunConfig::space_grid() const { return SpaceGrid::make(half_width, points); }

Relaxation RunConfig::relax() const {
  if (!relaxation)
    return Relaxation{0.0, 0.0, m0, false};
  return Relaxation::from_times(t1, t2, m0);
}

double RunConfig::plateau_amplitude() const {
  if (gradient_amplitude != 0.0)
    return gradient_amplitude;
  return GradientSpec::amplitude_for(bandwidth, slices.width, consts.gamma);
}

GradientSpec RunConfig::gradient_spec() const { return {plateau_amplitude(), max_slew}; }

CostUnits RunConfig::cost_units() const {
  if (!normalized_cost)
    return {};
  return {steps * dt, half_width};
}

int RunConfig::worker_count() const { return workers > 0 ? workers : default_workers(); }

BlochSystem RunConfig::system() const {
  BlochSystem sys{time_grid(), space_grid(), consts, relax(), {}, worker_count()};
  sys.gradient = build_gradient_waveform(gradient_spec(), sys.time);
  sys.validate();
  return sys;
}

void RunConfig::validate() const {
  const TimeGrid tg = time_grid();
  const SpaceGrid sg = space_grid();
  consts.validate();
  relax().validate();
  slices.validate(sg);
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw ValidationError("alpha must be positive");
  if (filter_fwhm < 0.0)
    throw ValidationError("target.fwhm must be nonnegative");
  if (!(bandwidth > 0.0) && gradient_amplitude == 0.0)
    throw ValidationError("gradient.bandwidth must be positive");
  if (target == TargetKind::CaipirinhaShifted && slices.count < 2)
    throw ValidationError("target = caipirinha needs at least two slices");
  optimizer.validate();
  if (workers < 0)
    throw ValidationError("workers must be nonnegative");
  for (double a : compare_alphas)
    if (!(a > 0.0))
      throw ValidationError("compare.alphas entries must be positive");
  for (int c : compare_counts)
    if (c < 1)
      throw ValidationError("compare.counts entries must be positive");
  if (!(check_step > 0.0) || !(check_tolerance > 0.0))
    throw ValidationError("check.step and check.tolerance must be positive");
  build_gradient_waveform(gradient_spec(), tg);
}

void apply_preset(RunConfig &c, std::string_view name) {
  if (name == "single-slice") {
    c.preset = "single-slice";
    c.steps = 697;
    c.control_steps = 512;
    c.dt = 5e-6;
    c.half_width = 0.5;
    c.points = 5001;
    c.bandwidth = 2350.0;
    c.slices.count = 1;
  } else if (name == "sms") {
    // Same number of steps on a four times longer time scale; the bandwidth
    // shrinks accordingly so that the time-bandwidth product is unchanged.
    c.preset = "sms";
    c.steps = 697;
    c.control_steps = 512;
    c.dt = 20e-6;
    c.half_width = 0.5;
    c.points = 5001;
    c.bandwidth = 2350.0 / 4.0;
    c.slices.count = 6;
    c.slices.separation = 25e-3;
  } else if (name == "small") {
    c.preset = "small";
    c.steps = 60;
    c.control_steps = 48;
    c.dt = 50e-6;
    c.half_width = 25e-3;
    c.points = 21;
    c.bandwidth = 500.0;
    c.slices.count = 1;
  } else {
    throw ValidationError("unknown preset '" + std::string(name) + "'");
  }
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

struct Unit {
  std::string_view suffix;
  std::string_view dimension;
  double factor;
};

constexpr Unit kUnits[] = {
    {"m", "length", 1.0},         {"cm", "length", 1e-2},       {"mm", "length", 1e-3},
    {"um", "length", 1e-6},       {"s", "time", 1.0},           {"ms", "time", 1e-3},
    {"us", "time", 1e-6},         {"Hz", "frequency", 1.0},     {"kHz", "frequency", 1e3},
    {"MHz", "frequency", 1e6},    {"T", "field", 1.0},          {"mT", "field", 1e-3},
    {"uT", "field", 1e-6},        {"T/m", "gradient", 1.0},     {"mT/m", "gradient", 1e-3},
    {"T/m/s", "slew", 1.0},       {"rad", "angle", 1.0},        {"deg", "angle", std::numbers::pi / 180.0},
    {"1/s", "rate", 1.0},
};

double parse_number(std::string_view text) {
  text = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
    throw ValidationError("not a number: '" + std::string(text) + "'");
  return v;
}

long long parse_integer(std::string_view text) {
  text = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ValidationError("not an integer: '" + std::string(text) + "'");
  return v;
}

bool parse_bool(std::string_view text) {
  text = trim(text);
  if (text == "true" || text == "on" || text == "yes" || text == "1")
    return true;
  if (text == "false" || text == "off" || text == "no" || text == "0")
    return false;
  throw ValidationError("not a boolean: '" + std::string(text) + "'");
}

std::vector<std::string_view> parse_list(std::string_view text) {
  text = trim(text);
  if (text.size() < 2 || text.front() != '[' || text.back() != ']')
    throw ValidationError("lists are written as [a, b, ...]");
  text = text.substr(1, text.size() - 2);
  std::vector<std::string_view> items;
  while (!trim(text).empty()) {
    const auto comma = text.find(',');
    items.push_back(trim(text.substr(0, comma)));
    if (comma == std::string_view::npos)
      break;
    text.remove_prefix(comma + 1);
  }
  return items;
}

struct Key {
  std::string_view name;
  std::string_view dimension;
  std::string_view description;
  std::function<void(RunConfig &, std::string_view)> set;
  std::function<std::string(const RunConfig &)> show;
};

std::string show_double(double v) { return fmt::format("{:g}", v); }

std::string show_list(const auto &values) {
  std::string s = "[";
  for (std::size_t k = 0; k < values.size(); ++k)
    s += (k ? ", " : "") + fmt::format("{:g}", static_cast<double>(values[k]));
  return s + "]";
}

const std::vector<Key> &keys() {
  using C = RunConfig;
  auto quantity = [](double C::*field, std::string_view dim) {
    return [field, dim](C &c, std::string_view v) { c.*field = parse_quantity(v, dim); };
  };
  auto integer = [](int C::*field) {
    return [field](C &c, std::string_view v) { c.*field = static_cast<int>(parse_integer(v)); };
  };
  static const std::vector<Key> table = {
      {"preset", "", "single-slice | sms | small; applied before all other keys",
       [](C &c, std::string_view v) { apply_preset(c, trim(v)); }, [](const C &c) { return c.preset; }},
      {"time.steps", "", "number of time steps N on [0, T]", integer(&C::steps),
       [](const C &c) { return std::to_string(c.steps); }},
      {"time.control_steps", "", "number of control steps N_u on [0, T_u]",
       integer(&C::control_steps), [](const C &c) { return std::to_string(c.control_steps); }},
      {"time.dt", "time", "time step", quantity(&C::dt, "time"),
       [](const C &c) { return show_double(c.dt) + " s"; }},
      {"space.half_width", "length", "half width a of the spatial domain [-a, a]",
       quantity(&C::half_width, "length"), [](const C &c) { return show_double(c.half_width) + " m"; }},
      {"space.points", "", "number of spatial points Z", integer(&C::points),
       [](const C &c) { return std::to_string(c.points); }},
      {"physics.gamma", "", "gyromagnetic ratio in rad/s/T",
       [](C &c, std::string_view v) { c.consts.gamma = parse_number(v); },
       [](const C &c) { return show_double(c.consts.gamma); }},
      {"physics.b1_scale", "field", "B1 amplitude of one control unit",
       [](C &c, std::string_view v) { c.consts.b1_scale = parse_quantity(v, "field"); },
       [](const C &c) { return show_double(c.consts.b1_scale) + " T"; }},
      {"relaxation.enabled", "", "include T1/T2 relaxation",
       [](C &c, std::string_view v) { c.relaxation = parse_bool(v); },
       [](const C &c) { return std::string(c.relaxation ? "true" : "false"); }},
      {"relaxation.t1", "time", "longitudinal relaxation time", quantity(&C::t1, "time"),
       [](const C &c) { return show_double(c.t1) + " s"; }},
      {"relaxation.t2", "time", "transverse relaxation time", quantity(&C::t2, "time"),
       [](const C &c) { return show_double(c.t2) + " s"; }},
      {"relaxation.m0", "", "equilibrium magnetization", quantity(&C::m0, ""),
       [](const C &c) { return show_double(c.m0); }},
      {"slices.count", "", "number of simultaneously excited slices",
       [](C &c, std::string_view v) { c.slices.count = static_cast<int>(parse_integer(v)); },
       [](const C &c) { return std::to_string(c.slices.count); }},
      {"slices.width", "length", "slice thickness",
       [](C &c, std::string_view v) { c.slices.width = parse_quantity(v, "length"); },
       [](const C &c) { return show_double(c.slices.width) + " m"; }},
      {"slices.separation", "length", "center-to-center slice distance",
       [](C &c, std::string_view v) { c.slices.separation = parse_quantity(v, "length"); },
       [](const C &c) { return show_double(c.slices.separation) + " m"; }},
      {"slices.flip", "angle", "flip angle",
       [](C &c, std::string_view v) { c.slices.flip = parse_quantity(v, "angle"); },
       [](const C &c) { return show_double(c.slices.flip * 180.0 / std::numbers::pi) + " deg"; }},
      {"target.kind", "", "sms | caipirinha (phase-shifted partner profile)",
       [](C &c, std::string_view v) {
         v = trim(v);
         if (v == "sms")
           c.target = TargetKind::Sms;
         else if (v == "caipirinha")
           c.target = TargetKind::CaipirinhaShifted;
         else
           throw ValidationError("target.kind must be sms or caipirinha");
       },
       [](const C &c) {
         return std::string(c.target == TargetKind::Sms ? "sms" : "caipirinha");
       }},
      {"target.fwhm", "length", "FWHM of the Gaussian target filter (0 disables)",
       quantity(&C::filter_fwhm, "length"), [](const C &c) { return show_double(c.filter_fwhm) + " m"; }},
      {"gradient.bandwidth", "frequency", "RF bandwidth defining the plateau amplitude",
       quantity(&C::bandwidth, "frequency"), [](const C &c) { return show_double(c.bandwidth) + " Hz"; }},
      {"gradient.amplitude", "gradient", "explicit plateau amplitude (0 derives it from the bandwidth)",
       quantity(&C::gradient_amplitude, "gradient"),
       [](const C &c) { return show_double(c.gradient_amplitude) + " T/m"; }},
      {"gradient.max_slew", "slew", "maximal slew rate", quantity(&C::max_slew, "slew"),
       [](const C &c) { return show_double(c.max_slew) + " T/m/s"; }},
      {"alpha", "", "control cost weight", quantity(&C::alpha, ""),
       [](const C &c) { return show_double(c.alpha); }},
      {"cost.units", "", "normalized (time in units of T, length in units of a) | si",
       [](C &c, std::string_view v) {
         v = trim(v);
         if (v == "normalized")
           c.normalized_cost = true;
         else if (v == "si")
           c.normalized_cost = false;
         else
           throw ValidationError("cost.units must be normalized or si");
       },
       [](const C &c) { return std::string(c.normalized_cost ? "normalized" : "si"); }},
      {"optimizer.tol_newton", "", "gradient norm tolerance",
       [](C &c, std::string_view v) { c.optimizer.tol_newton = parse_number(v); },
       [](const C &c) { return show_double(c.optimizer.tol_newton); }},
      {"optimizer.maxit_newton", "", "maximal Newton iterations",
       [](C &c, std::string_view v) { c.optimizer.maxit_newton = static_cast<int>(parse_integer(v)); },
       [](const C &c) { return std::to_string(c.optimizer.maxit_newton); }},
      {"optimizer.tol_cg", "", "relative CG residual tolerance",
       [](C &c, std::string_view v) { c.optimizer.tol_cg = parse_number(v); },
       [](const C &c) { return show_double(c.optimizer.tol_cg); }},
      {"optimizer.maxit_cg", "", "maximal CG iterations per Newton step",
       [](C &c, std::string_view v) { c.optimizer.maxit_cg = static_cast<int>(parse_integer(v)); },
       [](const C &c) { return std::to_string(c.optimizer.maxit_cg); }},
      {"optimizer.rho0", "", "initial trust-region radius",
       [](C &c, std::string_view v) { c.optimizer.rho0 = parse_number(v); },
       [](const C &c) { return show_double(c.optimizer.rho0); }},
      {"optimizer.rho_max", "", "maximal trust-region radius",
       [](C &c, std::string_view v) { c.optimizer.rho_max = parse_number(v); },
       [](const C &c) { return show_double(c.optimizer.rho_max); }},
      {"optimizer.q", "", "radius scaling factor",
       [](C &c, std::string_view v) { c.optimizer.q = parse_number(v); },
       [](const C &c) { return show_double(c.optimizer.q); }},
      {"optimizer.sigma1", "", "acceptance threshold",
       [](C &c, std::string_view v) { c.optimizer.sigma1 = parse_number(v); },
       [](const C &c) { return show_double(c.optimizer.sigma1); }},
      {"optimizer.sigma2", "", "radius decrease threshold",
       [](C &c, std::string_view v) { c.optimizer.sigma2 = parse_number(v); },
       [](const C &c) { return show_double(c.optimizer.sigma2); }},
      {"optimizer.sigma3", "", "radius increase threshold",
       [](C &c, std::string_view v) { c.optimizer.sigma3 = parse_number(v); },
       [](const C &c) { return show_double(c.optimizer.sigma3); }},
      {"optimizer.epsilon", "", "round-off guard relative to max(1, |J|)",
       [](C &c, std::string_view v) { c.optimizer.epsilon_rel = parse_number(v); },
       [](const C &c) { return show_double(c.optimizer.epsilon_rel); }},
      {"workers", "", "worker threads (0 = all hardware threads)", integer(&C::workers),
       [](const C &c) { return std::to_string(c.workers); }},
      {"compare.counts", "", "slice counts for the compare run",
       [](C &c, std::string_view v) {
         c.compare_counts.clear();
         for (auto item : parse_list(v))
           c.compare_counts.push_back(static_cast<int>(parse_integer(item)));
       },
       [](const C &c) { return show_list(c.compare_counts); }},
      {"compare.alphas", "", "alpha sweep for the compare run (empty: slice-count comparison)",
       [](C &c, std::string_view v) {
         c.compare_alphas.clear();
         for (auto item : parse_list(v))
           c.compare_alphas.push_back(parse_number(item));
       },
       [](const C &c) { return show_list(c.compare_alphas); }},
      {"check.seed", "", "seed of the random control used by check-derivatives",
       [](C &c, std::string_view v) { c.check_seed = static_cast<std::uint64_t>(parse_integer(v)); },
       [](const C &c) { return std::to_string(c.check_seed); }},
      {"check.step", "", "central finite-difference step",
       [](C &c, std::string_view v) { c.check_step = parse_number(v); },
       [](const C &c) { return show_double(c.check_step); }},
      {"check.tolerance", "", "maximal accepted relative derivative error",
       [](C &c, std::string_view v) { c.check_tolerance = parse_number(v); },
       [](const C &c) { return show_double(c.check_tolerance); }},
  };
  return table;
}

const Key *find_key(std::string_view name) {
  for (const auto &k : keys())
    if (k.name == name)
      return &k;
  return nullptr;
}

struct Entry {
  int line;
  std::string_view key;
  std::string_view value;
};

// Splits at newlines and at commas outside brackets; drops comments.
std::vector<Entry> split_entries(std::string_view text) {
  std::vector<Entry> entries;
  int line = 1;
  std::size_t start = 0;
  int depth = 0;
  bool comment = false;
  auto flush = [&](std::size_t end) {
    std::string_view piece = trim(text.substr(start, end - start));
    const auto hash = piece.find('#');
    if (hash != std::string_view::npos)
      piece = trim(piece.substr(0, hash));
    if (!piece.empty()) {
      const auto eq = piece.find('=');
      if (eq == std::string_view::npos)
        throw ValidationError(fmt::format("line {}: expected 'key = value', got '{}'", line, piece));
      entries.push_back({line, trim(piece.substr(0, eq)), trim(piece.substr(eq + 1))});
    }
  };
  for (std::size_t k = 0; k <= text.size(); ++k) {
    const char ch = k < text.size() ? text[k] : '\n';
    if (ch == '#')
      comment = true;
    if (!comment && ch == '[')
      ++depth;
    if (!comment && ch == ']')
      --depth;
    if (ch == '\n' || (!comment && ch == ',' && depth == 0)) {
      flush(k);
      start = k + 1;
      if (ch == '\n') {
        ++line;
        comment = false;
        depth = 0;
      }
    }
  }
  return entries;
}

} // namespace

double parse_quantity(std::string_view text, std::string_view dimension) {
  text = trim(text);
  std::size_t split = text.size();
  while (split > 0 && (std::isalpha(static_cast<unsigned char>(text[split - 1])) ||
                       text[split - 1] == '/' ||
                       (text[split - 1] == '1' && split < text.size() && text[split] == '/')))
    --split;
  const std::string_view number = trim(text.substr(0, split));
  const std::string_view suffix = trim(text.substr(split));
  const double value = parse_number(number);
  if (suffix.empty())
    return value;
  for (const auto &u : kUnits)
    if (u.suffix == suffix) {
      if (u.dimension != dimension)
        throw ValidationError("unit '" + std::string(suffix) + "' is not a " +
                              (dimension.empty() ? std::string("dimensionless") : std::string(dimension)) +
                              " unit");
      return value * u.factor;
    }
  throw ValidationError("unknown unit '" + std::string(suffix) + "'");
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  const auto entries = split_entries(text);
  for (const auto &e : entries)
    if (e.key == "preset") {
      try {
        apply_preset(base, e.value);
      } catch (const ValidationError &err) {
        throw ValidationError(fmt::format("line {}: key 'preset': {}", e.line, err.what()));
      }
    }
  for (const auto &e : entries) {
    if (e.key == "preset")
      continue;
    const Key *key = find_key(e.key);
    if (!key)
      throw ValidationError(fmt::format("line {}: unknown key '{}'", e.line, e.key));
    try {
      key->set(base, e.value);
    } catch (const ValidationError &err) {
      throw ValidationError(fmt::format("line {}: key '{}': {}", e.line, e.key, err.what()));
    }
  }
  base.validate();
  return base;
}

std::string config_documentation() {
  const RunConfig defaults;
  std::string out = "# key = default    # description\n";
  for (const auto &k : keys())
    out += fmt::format("{} = {}    # {}{}\n", k.name, k.show(defaults), k.description,
                       k.dimension.empty() ? "" : fmt::format(" [{}]", k.dimension));
  return out;
}

} // namespace rfoc
