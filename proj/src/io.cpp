#include "rfoc/io.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

namespace rfoc {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path &path, const std::string &contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out)
      throw IoError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "'");
  }
}

std::string read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::vector<double> parse_row(const std::string &line, std::size_t expected, int line_no) {
  std::vector<double> values;
  const char *p = line.data();
  const char *end = p + line.size();
  while (p < end) {
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r'))
      ++p;
    if (p == end)
      break;
    double v = 0.0;
    const auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc())
      throw ValidationError(fmt::format("line {}: malformed number", line_no));
    values.push_back(v);
    p = next;
  }
  if (values.size() != expected)
    throw ValidationError(fmt::format("line {}: expected {} columns, found {}", line_no, expected,
                                      values.size()));
  return values;
}

struct TextTable {
  std::map<std::string, std::string> header;
  std::vector<std::pair<int, std::vector<double>>> rows;
};

TextTable read_table(const fs::path &path, std::size_t columns) {
  std::istringstream in(read_file(path));
  TextTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty())
      continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) {
        auto key = line.substr(1, eq - 1);
        auto value = line.substr(eq + 1);
        key.erase(0, key.find_first_not_of(' '));
        key.erase(key.find_last_not_of(' ') + 1);
        value.erase(0, value.find_first_not_of(' '));
        table.header[key] = value;
      }
      continue;
    }
    table.rows.emplace_back(line_no, parse_row(line, columns, line_no));
  }
  return table;
}

double header_number(const TextTable &t, const std::string &key) {
  auto it = t.header.find(key);
  if (it == t.header.end())
    throw ValidationError("missing header field '" + key + "'");
  double v = 0.0;
  const auto &s = it->second;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc())
    throw ValidationError("malformed header field '" + key + "'");
  return v;
}

} // namespace

void write_pulse_file(const fs::path &path, const TimeGrid &grid, const ControlWaveform &u,
                      const GradientWaveform &g, double b1_scale) {
  if (u.size() != grid.control_steps() || g.size() != grid.steps())
    throw ValidationError("pulse file: waveforms do not match the time grid");
  std::string out;
  out += "# rfoc pulse\n";
  out += fmt::format("# steps = {}\n", grid.steps());
  out += fmt::format("# control_steps = {}\n", grid.control_steps());
  out += fmt::format("# dt = {:.17g}\n", grid.dt());
  out += fmt::format("# b1_scale = {:.17g}\n", b1_scale);
  out += "# units: t in s (end of interval), u_x/u_y in multiples of b1_scale tesla, G_z in T/m\n";
  out += "# columns: t u_x u_y G_z\n";
  for (int m = 1; m <= grid.steps(); ++m) {
    const ControlSample s = u.on_interval(m);
    out += fmt::format("{:.17g} {:.17g} {:.17g} {:.17g}\n", m * grid.dt(), s.x, s.y,
                       g.on_interval(m));
  }
  write_file_atomic(path, out);
}

PulseFile read_pulse_file(const fs::path &path) {
  const TextTable t = read_table(path, 4);
  const int steps = static_cast<int>(header_number(t, "steps"));
  const int control_steps = static_cast<int>(header_number(t, "control_steps"));
  PulseFile f{TimeGrid::make(steps, control_steps, header_number(t, "dt")), {}, {},
              header_number(t, "b1_scale")};
  if (static_cast<int>(t.rows.size()) != steps)
    throw ValidationError(fmt::format("pulse file: header declares {} rows, found {}{}", steps,
                                      t.rows.size(),
                                      t.rows.empty() ? std::string()
                                                     : fmt::format(" (last row at line {})",
                                                                   t.rows.back().first)));
  std::vector<ControlSample> u(static_cast<std::size_t>(control_steps));
  f.gradient.samples.resize(static_cast<std::size_t>(steps));
  for (int m = 0; m < steps; ++m) {
    const auto &row = t.rows[m].second;
    if (m < control_steps)
      u[m] = {row[1], row[2]};
    else if (row[1] != 0.0 || row[2] != 0.0)
      throw ValidationError(fmt::format("line {}: nonzero control after the control window",
                                        t.rows[m].first));
    f.gradient.samples[m] = row[3];
  }
  f.control = ControlWaveform(std::move(u), f.grid.dt());
  return f;
}

void write_profile_file(const fs::path &path, const SpaceGrid &grid,
                        std::span<const Vec3> terminal) {
  if (static_cast<int>(terminal.size()) != grid.size())
    throw ValidationError("profile file: magnetization does not match the space grid");
  std::string out;
  out += "# rfoc profile\n";
  out += fmt::format("# points = {}\n", grid.size());
  out += fmt::format("# half_width = {:.17g}\n", grid.half_width());
  out += "# columns: z Mx My Mz Mxy (z in m, magnetization relative to M0)\n";
  for (int i = 0; i < grid.size(); ++i) {
    const Vec3 &m = terminal[i];
    out += fmt::format("{:.17g} {:.17g} {:.17g} {:.17g} {:.17g}\n", grid.position(i), m.x, m.y,
                       m.z, std::hypot(m.x, m.y));
  }
  write_file_atomic(path, out);
}

std::vector<ProfileRow> read_profile_file(const fs::path &path) {
  const TextTable t = read_table(path, 5);
  const int points = static_cast<int>(header_number(t, "points"));
  if (static_cast<int>(t.rows.size()) != points)
    throw ValidationError(
        fmt::format("profile file: header declares {} rows, found {}", points, t.rows.size()));
  std::vector<ProfileRow> rows;
  rows.reserve(t.rows.size());
  for (const auto &[line, r] : t.rows)
    rows.push_back({r[0], {r[1], r[2], r[3]}, r[4]});
  return rows;
}

} // namespace rfoc
