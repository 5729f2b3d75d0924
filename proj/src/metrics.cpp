#include "rfoc/metrics.hpp"

#include "rfoc/targets.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>

namespace rfoc {

namespace {

constexpr double kMicroTesla = 1e-6;
constexpr double kMilliSecond = 1e-3;

} // namespace

double rmse(std::span<const Vec3> terminal, const TargetProfile &reference) {
  if (terminal.size() != reference.values.size() || terminal.empty())
    throw ValidationError("rmse: profile sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < terminal.size(); ++i) {
    const Vec3 r = terminal[i] - reference.values[i];
    s += dot(r, r);
  }
  return std::sqrt(s / static_cast<double>(terminal.size()));
}

std::vector<double> transverse_magnitude(std::span<const Vec3> terminal) {
  std::vector<double> out(terminal.size());
  for (std::size_t i = 0; i < terminal.size(); ++i)
    out[i] = std::hypot(terminal[i].x, terminal[i].y);
  return out;
}

std::pair<double, double> mae_split(std::span<const double> mxy, const TargetProfile &ideal,
                                    const std::vector<bool> &mask) {
  if (mxy.size() != ideal.values.size() || mask.size() != mxy.size())
    throw ValidationError("mae: profile sizes differ");
  double in = 0.0, out = 0.0;
  std::size_t n_in = 0, n_out = 0;
  for (std::size_t i = 0; i < mxy.size(); ++i) {
    const double err = std::abs(mxy[i] - std::hypot(ideal.values[i].x, ideal.values[i].y));
    if (mask[i]) {
      in += err;
      ++n_in;
    } else {
      out += err;
      ++n_out;
    }
  }
  if (n_in == 0 || n_out == 0)
    throw ValidationError("mae: slice mask must contain in-slice and out-of-slice points");
  return {in / n_in, out / n_out};
}

namespace {

double mae_split_one_sided(std::span<const double> mxy, const TargetProfile &ideal) {
  double s = 0.0;
  for (std::size_t i = 0; i < mxy.size(); ++i)
    s += std::abs(mxy[i] - std::hypot(ideal.values[i].x, ideal.values[i].y));
  return s / static_cast<double>(mxy.size());
}

} // namespace

double b1_energy(const ControlWaveform &u, const PhysicalConstants &consts) {
  const double scale = consts.b1_scale / kMicroTesla;
  double s = 0.0;
  for (const auto &v : u.samples())
    s += (scale * v.x) * (scale * v.x);
  return s * u.dt() / kMilliSecond;
}

double b1_peak(const ControlWaveform &u, const PhysicalConstants &consts) {
  double peak = 0.0;
  for (const auto &v : u.samples())
    peak = std::max(peak, std::abs(v.x));
  return peak * consts.b1_scale / kMicroTesla;
}

double rmse_fwhm_matched(std::span<const double> mxy, const TargetProfile &ideal,
                         const SpaceGrid &grid) {
  const int z = grid.size();
  if (static_cast<int>(mxy.size()) != z || static_cast<int>(ideal.size()) != z)
    throw ValidationError("rmse: profile does not match the space grid");
  if (ideal.slices.empty())
    throw ValidationError("rmse: ideal profile has no slices");
  const double h = grid.spacing();
  auto index_of = [&](double pos) {
    return std::clamp(static_cast<int>(std::lround((pos + grid.half_width()) / h)), 0, z - 1);
  };

  std::vector<std::pair<double, double>> edges;
  for (const SliceBand &band : ideal.slices) {
    double lo = band.center - 0.5 * band.width;
    double hi = band.center + 0.5 * band.width;
    const int c = index_of(band.center);
    double peak = 0.0;
    for (int i = index_of(lo); i <= index_of(hi); ++i)
      peak = std::max(peak, mxy[i]);
    const double half = 0.5 * peak;
    if (peak > 0.0 && mxy[c] >= half) {
      int l = c, r = c;
      while (l > 0 && mxy[l - 1] >= half)
        --l;
      while (r < z - 1 && mxy[r + 1] >= half)
        ++r;
      // linear interpolation of the crossing between neighbours
      if (l > 0)
        lo = grid.position(l - 1) + (half - mxy[l - 1]) / (mxy[l] - mxy[l - 1]) * h;
      if (r < z - 1)
        hi = grid.position(r) + (mxy[r] - half) / (mxy[r] - mxy[r + 1]) * h;
    }
    edges.emplace_back(lo, hi);
  }

  double sum = 0.0;
  for (int i = 0; i < z; ++i) {
    const double p = grid.position(i);
    bool inside = false;
    for (const auto &[lo, hi] : edges)
      inside = inside || (p >= lo && p <= hi);
    const double d = mxy[i] - (inside ? 1.0 : 0.0);
    sum += d * d;
  }
  return std::sqrt(sum / z);
}

DesignReport evaluate_design(const ControlWaveform &u, std::span<const Vec3> terminal,
                             const TargetProfile &ideal, const TargetProfile &rmse_reference,
                             const SpaceGrid &grid, const PhysicalConstants &consts) {
  DesignReport r;
  r.rmse = rmse(terminal, rmse_reference);
  const auto mxy = transverse_magnitude(terminal);
  r.rmse_fwhm = rmse_fwhm_matched(mxy, ideal, grid);
  const auto mask = slice_mask(ideal, grid);
  const auto n_in = std::count(mask.begin(), mask.end(), true);
  // a grid too coarse to resolve any slice leaves one side empty; report 0 there
  if (n_in > 0 && n_in < static_cast<long>(mask.size()))
    std::tie(r.mae_in, r.mae_out) = mae_split(mxy, ideal, mask);
  else if (n_in == 0)
    r.mae_out = mae_split_one_sided(mxy, ideal);
  else
    r.mae_in = mae_split_one_sided(mxy, ideal);
  r.b1_energy = b1_energy(u, consts);
  r.b1_peak = b1_peak(u, consts);
  return r;
}

namespace {

struct Metric {
  const char *name;
  double DesignReport::*field;
  const char *format;
};

// Grouped tables use the first four; per-label tables add the errors.
constexpr Metric kMetrics[] = {
    {"energy[uT^2ms]", &DesignReport::b1_energy, "{:.1f}"},
    {"peak[uT]", &DesignReport::b1_peak, "{:.2f}"},
    {"mae_in", &DesignReport::mae_in, "{:.3f}"},
    {"mae_out", &DesignReport::mae_out, "{:.4f}"},
    {"rmse", &DesignReport::rmse, "{:.3e}"},
    {"rmse_fwhm", &DesignReport::rmse_fwhm, "{:.3e}"},
};
constexpr std::size_t kGroupedMetrics = 4;

std::string format_metric(const Metric &m, double v) {
  return fmt::format(fmt::runtime(m.format), v);
}

std::string render_grid(const std::vector<std::vector<std::string>> &cells) {
  std::vector<std::size_t> widths;
  for (const auto &row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) {
      widths.resize(std::max(widths.size(), row.size()), 0);
      widths[c] = std::max(widths[c], row[c].size());
    }
  std::string out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      if (c > 0)
        out += "  ";
      out += fmt::format("{:>{}}", cells[r][c], widths[c]);
    }
    out += '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : widths)
        total += w + 2;
      out += std::string(total > 2 ? total - 2 : 0, '-') + '\n';
    }
  }
  return out;
}

} // namespace

ComparisonTable render_comparison(const std::vector<std::pair<std::string, DesignReport>> &reports) {
  if (reports.empty())
    throw ValidationError("comparison: no reports");
  for (const auto &[label, _] : reports)
    if (label.empty())
      throw ValidationError("comparison: empty label");

  ComparisonTable table;
  table.records = "# label\tcost\trmse\trmse_fwhm\tmae_in\tmae_out\tb1_energy_uT2ms\tb1_peak_uT\tnewton_iters\t"
                  "cg_steps\n";
  for (const auto &[label, r] : reports)
    table.records += fmt::format("{}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\t{}\t{}\n",
                                 label, r.cost, r.rmse, r.rmse_fwhm, r.mae_in, r.mae_out, r.b1_energy, r.b1_peak,
                                 r.newton_iters, r.total_cg_steps);

  const bool pivot = std::all_of(reports.begin(), reports.end(), [](const auto &e) {
    return e.first.find(':') != std::string::npos;
  });

  std::vector<std::vector<std::string>> cells;
  if (!pivot) {
    std::vector<std::string> header{"label"};
    for (const auto &m : kMetrics)
      header.emplace_back(m.name);
    header.emplace_back("newton");
    header.emplace_back("cg");
    cells.push_back(header);
    for (const auto &[label, r] : reports) {
      std::vector<std::string> row{label};
      for (const auto &m : kMetrics)
        row.push_back(format_metric(m, r.*m.field));
      row.push_back(std::to_string(r.newton_iters));
      row.push_back(std::to_string(r.total_cg_steps));
      cells.push_back(std::move(row));
    }
    table.rows = static_cast<int>(reports.size());
    table.metric_columns = static_cast<int>(std::size(kMetrics));
    table.text = render_grid(cells);
    return table;
  }

  // Row keys and groups in first-appearance order.
  std::vector<std::string> rows, groups;
  std::map<std::pair<std::string, std::string>, const DesignReport *> lookup;
  for (const auto &[label, r] : reports) {
    const auto colon = label.find(':');
    std::string group = label.substr(0, colon), key = label.substr(colon + 1);
    if (std::find(rows.begin(), rows.end(), key) == rows.end())
      rows.push_back(key);
    if (std::find(groups.begin(), groups.end(), group) == groups.end())
      groups.push_back(group);
    lookup[{group, key}] = &r;
  }

  const std::span<const Metric> grouped(kMetrics, kGroupedMetrics);
  std::vector<std::string> header{""};
  for (const auto &m : grouped)
    for (const auto &g : groups)
      header.push_back(fmt::format("{} {}", m.name, g));
  cells.push_back(header);
  for (const auto &key : rows) {
    std::vector<std::string> row{key};
    for (const auto &m : grouped)
      for (const auto &g : groups) {
        auto it = lookup.find({g, key});
        row.push_back(it == lookup.end() ? "-" : format_metric(m, it->second->*m.field));
      }
    cells.push_back(std::move(row));
  }
  table.rows = static_cast<int>(rows.size());
  table.metric_columns = static_cast<int>(kGroupedMetrics * groups.size());
  table.text = render_grid(cells);
  return table;
}

} // namespace rfoc
