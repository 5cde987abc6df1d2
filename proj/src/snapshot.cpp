#include "ffqw/snapshot.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <system_error>
#include <vector>

namespace ffqw {

namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorCode::io, "malformed snapshot: " + what);
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    parts.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

void write_header(std::ostream& out, std::string_view kind, const HeaderFields& fields) {
  out << "# ffqw " << kind << " v" << kSnapshotVersion << '\n';
  for (const auto& [k, v] : fields) out << "# " << k << '=' << v << '\n';
}

struct Parsed {
  std::string kind;
  HeaderFields fields;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

Parsed parse_stream(std::istream& in) {
  Parsed p;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ffqw ", 0) != 0) malformed("missing '# ffqw <kind> v<N>' line");
  {
    std::istringstream first(line.substr(7));
    std::string version;
    first >> p.kind >> version;
    if (version != "v" + std::to_string(kSnapshotVersion)) {
      throw Error(ErrorCode::checkpoint_mismatch,
                  "snapshot version '" + version + "' is not v" + std::to_string(kSnapshotVersion));
    }
  }
  bool have_columns = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos || line.size() < 3) continue;
      p.fields[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    std::vector<std::string> cells;
    for (std::string_view c : split_commas(line)) cells.emplace_back(c);
    if (!have_columns) {
      p.columns = std::move(cells);
      have_columns = true;
    } else {
      if (cells.size() != p.columns.size()) malformed("row has " + std::to_string(cells.size()) + " cells");
      p.rows.push_back(std::move(cells));
    }
  }
  if (!have_columns) malformed("missing column header");
  return p;
}

void expect_columns(const Parsed& p, const std::vector<std::string>& cols) {
  if (p.columns != cols) malformed("unexpected columns for kind '" + p.kind + "'");
}

const std::string& field(const Parsed& p, const std::string& key) {
  const auto it = p.fields.find(key);
  if (it == p.fields.end()) malformed("missing header field '" + key + "'");
  return it->second;
}

void check_contiguous(const std::vector<Site>& sites) {
  for (std::size_t i = 1; i < sites.size(); ++i) {
    if (sites[i] != sites[i - 1] + 1) malformed("sites are not contiguous");
  }
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorCode::io, "cannot parse real number '" + std::string(text) + "'");
  }
  return value;
}

std::int64_t parse_int(std::string_view text) {
  std::int64_t value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorCode::io, "cannot parse integer '" + std::string(text) + "'");
  }
  return value;
}

void write_walker_snapshot(std::ostream& out, const WalkerState& state, const HeaderFields& extra) {
  HeaderFields fields = extra;
  fields["t"] = std::to_string(state.step_count());
  fields["truncated_mass"] = format_double(state.truncated_mass());
  write_header(out, "walker", fields);
  out << "site,re_a,im_a,re_b,im_b\n";
  for (Site j = state.window_lo(); j <= state.window_hi(); ++j) {
    const Amplitude a = state.a(j), b = state.b(j);
    out << j << ',' << format_double(a.real()) << ',' << format_double(a.imag()) << ','
        << format_double(b.real()) << ',' << format_double(b.imag()) << '\n';
  }
}

WalkerState read_walker_snapshot(std::istream& in, HeaderFields* header) {
  const Parsed p = parse_stream(in);
  if (p.kind != "walker") malformed("expected a walker snapshot, got '" + p.kind + "'");
  expect_columns(p, {"site", "re_a", "im_a", "re_b", "im_b"});
  if (p.rows.empty()) malformed("walker snapshot has no sites");
  std::vector<Site> sites;
  std::vector<Amplitude> amps;
  for (const auto& r : p.rows) {
    sites.push_back(parse_int(r[0]));
    amps.emplace_back(parse_double(r[1]), parse_double(r[2]));
    amps.emplace_back(parse_double(r[3]), parse_double(r[4]));
  }
  check_contiguous(sites);
  if (header) *header = p.fields;
  return WalkerState(sites.front(), std::move(amps), static_cast<std::uint64_t>(parse_int(field(p, "t"))),
                     parse_double(field(p, "truncated_mass")));
}

void write_markov_snapshot(std::ostream& out, const MarkovState& state, const HeaderFields& extra) {
  HeaderFields fields = extra;
  fields["t"] = std::to_string(state.step_count());
  fields["truncated_mass"] = format_double(state.truncated_mass());
  write_header(out, "markov", fields);
  out << "site,L,R\n";
  for (Site j = state.window_lo(); j <= state.window_hi(); ++j) {
    out << j << ',' << format_double(state.left(j)) << ',' << format_double(state.right(j)) << '\n';
  }
}

MarkovState read_markov_snapshot(std::istream& in, HeaderFields* header) {
  const Parsed p = parse_stream(in);
  if (p.kind != "markov") malformed("expected a markov snapshot, got '" + p.kind + "'");
  expect_columns(p, {"site", "L", "R"});
  if (p.rows.empty()) malformed("markov snapshot has no sites");
  std::vector<Site> sites;
  std::vector<double> occ;
  for (const auto& r : p.rows) {
    sites.push_back(parse_int(r[0]));
    occ.push_back(parse_double(r[1]));
    occ.push_back(parse_double(r[2]));
  }
  check_contiguous(sites);
  if (header) *header = p.fields;
  return MarkovState(sites.front(), std::move(occ), static_cast<std::uint64_t>(parse_int(field(p, "t"))),
                     parse_double(field(p, "truncated_mass")));
}

void write_grid_snapshot(std::ostream& out, const PMEGrid& grid, const HeaderFields& extra) {
  HeaderFields fields = extra;
  fields["time"] = format_double(grid.time);
  fields["m"] = grid.m ? format_double(*grid.m) : "none";
  fields["dx"] = format_double(grid.dx);
  fields["dt"] = format_double(grid.dt);
  fields["x_lo"] = format_double(grid.x_lo);
  fields["x_hi"] = format_double(grid.x_hi);
  fields["equation"] = grid.kind == PdeKind::porous_medium ? "pme" : "nlpde";
  fields["coefficient"] = format_double(grid.coefficient);
  fields["stability_factor"] = format_double(grid.stability_factor);
  fields["initial_mass"] = format_double(grid.initial_mass);
  write_header(out, "grid", fields);
  out << "x,rho\n";
  for (std::size_t i = 0; i < grid.n_cells; ++i) {
    out << format_double(grid.cell_center(i)) << ',' << format_double(grid.rho[i]) << '\n';
  }
}

PMEGrid read_grid_snapshot(std::istream& in, HeaderFields* header) {
  const Parsed p = parse_stream(in);
  if (p.kind != "grid") malformed("expected a grid snapshot, got '" + p.kind + "'");
  expect_columns(p, {"x", "rho"});
  PMEGrid g;
  g.x_lo = parse_double(field(p, "x_lo"));
  g.x_hi = parse_double(field(p, "x_hi"));
  g.dx = parse_double(field(p, "dx"));
  g.dt = parse_double(field(p, "dt"));
  g.time = parse_double(field(p, "time"));
  g.coefficient = parse_double(field(p, "coefficient"));
  g.stability_factor = parse_double(field(p, "stability_factor"));
  g.initial_mass = parse_double(field(p, "initial_mass"));
  const std::string& m = field(p, "m");
  if (m != "none") g.m = parse_double(m);
  const std::string& eq = field(p, "equation");
  if (eq == "pme") {
    g.kind = PdeKind::porous_medium;
  } else if (eq == "nlpde") {
    g.kind = PdeKind::lattice_density;
  } else {
    malformed("unknown equation '" + eq + "'");
  }
  g.n_cells = p.rows.size();
  g.rho.reserve(g.n_cells);
  for (const auto& r : p.rows) g.rho.push_back(parse_double(r[1]));
  if (header) *header = p.fields;
  return g;
}

void write_distribution(std::ostream& out, const Distribution& dist, const HeaderFields& extra) {
  write_header(out, "distribution", extra);
  out << "site,probability\n";
  for (std::size_t i = 0; i < dist.size(); ++i) {
    out << dist.origin() + static_cast<Site>(i) << ',' << format_double(dist.masses()[i]) << '\n';
  }
}

Distribution read_distribution(std::istream& in, HeaderFields* header) {
  const std::string kind = peek_snapshot_kind(in);
  if (kind == "walker") return probability_distribution(read_walker_snapshot(in, header));
  if (kind == "markov") return markov_distribution(read_markov_snapshot(in, header));
  const Parsed p = parse_stream(in);
  if (p.kind != "distribution") malformed("expected a distribution, got '" + p.kind + "'");
  expect_columns(p, {"site", "probability"});
  if (p.rows.empty()) malformed("distribution has no sites");
  std::vector<Site> sites;
  std::vector<double> masses;
  for (const auto& r : p.rows) {
    sites.push_back(parse_int(r[0]));
    masses.push_back(parse_double(r[1]));
  }
  check_contiguous(sites);
  if (header) *header = p.fields;
  return Distribution(sites.front(), std::move(masses));
}

std::string peek_snapshot_kind(std::istream& in) {
  const auto pos = in.tellg();
  std::string line;
  std::getline(in, line);
  in.clear();
  in.seekg(pos);
  if (line.rfind("# ffqw ", 0) != 0) return {};
  std::istringstream s(line.substr(7));
  std::string kind;
  s >> kind;
  return kind;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::io, "cannot open " + tmp.string() + " for writing");
    f << contents;
    f.flush();
    if (!f) throw Error(ErrorCode::io, "write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::io, "cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace ffqw
