#include "ffqw/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <numbers>
#include <sstream>

#include "ffqw/markov.hpp"
#include "ffqw/snapshot.hpp"

namespace ffqw {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Model model) noexcept {
  switch (model) {
    case Model::feed_forward: return "feed_forward";
    case Model::homogeneous: return "homogeneous";
    case Model::markov: return "markov";
    case Model::pme: return "pme";
    case Model::nlpde: return "nlpde";
  }
  return "unknown";
}

Model parse_model(std::string_view name) {
  for (Model m : {Model::feed_forward, Model::homogeneous, Model::markov, Model::pme, Model::nlpde}) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::configuration, "unknown model '" + std::string(name) + "'");
}

std::string_view to_string(InitialCondition::Kind kind) noexcept {
  switch (kind) {
    case InitialCondition::Kind::paper_default: return "paper_default";
    case InitialCondition::Kind::single_site: return "single_site";
    case InitialCondition::Kind::beta_gamma: return "beta_gamma";
    case InitialCondition::Kind::file: return "file";
  }
  return "unknown";
}

InitialCondition::Kind parse_initial_kind(std::string_view name) {
  using K = InitialCondition::Kind;
  for (K k : {K::paper_default, K::single_site, K::beta_gamma, K::file}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::configuration, "unknown initial condition '" + std::string(name) + "'");
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::configuration, msg); };
  if (steps < 1) fail("steps must be at least 1");
  if (!(epsilon_trunc > 0.0 && epsilon_trunc < 1e-6)) fail("epsilon_trunc must lie in (0, 1e-6)");
  if (per_decade < 1) fail("per_decade must be positive");
  if (measure_from < 1) fail("measure_from must be positive");
  if (smoothing_window < 1 || smoothing_window % 2 == 0) fail("smoothing window must be a positive odd integer");
  if (checkpoint_every < 1) fail("checkpoint_every must be positive");
  if (!std::isfinite(theta)) fail("theta must be finite");
  if (q_fixed && !(*q_fixed < 1.0 || std::abs(*q_fixed - 1.0) < kGaussianLimitTolerance)) {
    fail("q_fixed must be below one");
  }
  if (initial.kind == InitialCondition::Kind::beta_gamma &&
      !(initial.beta >= 0.0 && initial.beta <= 1.0 && initial.gamma >= 0.0 && initial.gamma <= 1.0)) {
    fail("beta and gamma must lie in [0, 1]");
  }
  if (initial.kind == InitialCondition::Kind::file && initial.path.empty()) fail("initial file path is empty");
  if (model == Model::pme && !(m >= 1.0 && m < 3.0)) fail("porous-medium exponent m must lie in [1, 3)");
  if ((model == Model::pme || model == Model::nlpde) && !(sigma0 > 0.0 && dx > 0.0)) {
    fail("sigma0 and dx must be positive");
  }
}

namespace {

json config_json_object(const RunConfig& c) {
  json j;
  j["model"] = to_string(c.model);
  j["steps"] = c.steps;
  j["theta"] = c.theta;
  j["initial"] = {{"kind", to_string(c.initial.kind)},
                  {"beta", c.initial.beta},
                  {"gamma", c.initial.gamma},
                  {"path", c.initial.path.string()}};
  j["epsilon_trunc"] = c.epsilon_trunc;
  j["per_decade"] = c.per_decade;
  j["measure_from"] = c.measure_from;
  j["smoothing_window"] = c.smoothing_window;
  j["q_fixed"] = c.q_fixed ? json(*c.q_fixed) : json(nullptr);
  j["checkpoint_every"] = c.checkpoint_every;
  j["snapshots"] = c.snapshots;
  j["m"] = c.m;
  j["sigma0"] = c.sigma0;
  j["dx"] = c.dx;
  return j;
}

// Everything that determines the produced data except the run length.
std::string fingerprint(const RunConfig& c) {
  json j = config_json_object(c);
  j.erase("steps");
  return j.dump();
}

}  // namespace

std::string config_to_json(const RunConfig& config) { return config_json_object(config).dump(2); }

void apply_config_json(RunConfig& c, const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::configuration, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::configuration, "config must be a JSON object");
  try {
    if (j.contains("model")) c.model = parse_model(j["model"].get<std::string>());
    if (j.contains("steps")) c.steps = j["steps"].get<std::uint64_t>();
    if (j.contains("theta")) c.theta = j["theta"].get<double>();
    if (j.contains("initial")) {
      const json& in = j["initial"];
      if (in.is_string()) {
        c.initial.kind = parse_initial_kind(in.get<std::string>());
      } else {
        if (in.contains("kind")) c.initial.kind = parse_initial_kind(in["kind"].get<std::string>());
        if (in.contains("beta")) c.initial.beta = in["beta"].get<double>();
        if (in.contains("gamma")) c.initial.gamma = in["gamma"].get<double>();
        if (in.contains("path")) c.initial.path = in["path"].get<std::string>();
      }
    }
    if (j.contains("epsilon_trunc")) c.epsilon_trunc = j["epsilon_trunc"].get<double>();
    if (j.contains("per_decade")) c.per_decade = j["per_decade"].get<int>();
    if (j.contains("measure_from")) c.measure_from = j["measure_from"].get<std::uint64_t>();
    if (j.contains("smoothing_window")) c.smoothing_window = j["smoothing_window"].get<int>();
    if (j.contains("q_fixed")) {
      c.q_fixed = j["q_fixed"].is_null() ? std::nullopt : std::optional<double>(j["q_fixed"].get<double>());
    }
    if (j.contains("checkpoint_every")) c.checkpoint_every = j["checkpoint_every"].get<std::uint64_t>();
    if (j.contains("snapshots")) c.snapshots = j["snapshots"].get<bool>();
    if (j.contains("m")) c.m = j["m"].get<double>();
    if (j.contains("sigma0")) c.sigma0 = j["sigma0"].get<double>();
    if (j.contains("dx")) c.dx = j["dx"].get<double>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::configuration, std::string("bad config value: ") + e.what());
  }
}

std::vector<std::uint64_t> measurement_schedule(std::uint64_t steps, int per_decade, std::uint64_t from) {
  std::vector<std::uint64_t> out;
  const int k0 = static_cast<int>(std::floor(per_decade * std::log10(static_cast<double>(from)))) - 1;
  for (int k = std::max(k0, 0);; ++k) {
    const auto t = static_cast<std::uint64_t>(std::llround(std::pow(10.0, static_cast<double>(k) / per_decade)));
    if (t > steps) break;
    if (t >= from && (out.empty() || out.back() != t)) out.push_back(t);
  }
  if (out.empty() || out.back() != steps) out.push_back(steps);
  return out;
}

WalkerState make_walker_initial(const InitialCondition& initial) {
  switch (initial.kind) {
    case InitialCondition::Kind::paper_default: return paper_initial_state();
    case InitialCondition::Kind::single_site:
      return single_site_state(Amplitude(1.0 / std::numbers::sqrt2, 0.0), Amplitude(0.0, 1.0 / std::numbers::sqrt2));
    case InitialCondition::Kind::beta_gamma: return beta_gamma_state(initial.beta, initial.gamma);
    case InitialCondition::Kind::file: {
      std::istringstream s(read_file(initial.path));
      return read_walker_snapshot(s);
    }
  }
  throw Error(ErrorCode::configuration, "unhandled initial condition");
}

namespace {

MarkovState make_markov_initial(const InitialCondition& initial) {
  switch (initial.kind) {
    case InitialCondition::Kind::paper_default: return markov_paper_initial_state();
    case InitialCondition::Kind::file: {
      std::istringstream s(read_file(initial.path));
      if (peek_snapshot_kind(s) == "markov") return read_markov_snapshot(s);
      return markov_from_walker(read_walker_snapshot(s));
    }
    default: return markov_from_walker(make_walker_initial(initial));
  }
}

void apply_fit(MeasurementRow& row, const Distribution& smoothed, std::optional<double> q_fixed) {
  try {
    row.fit = fit_q_gaussian(smoothed, q_fixed);
    row.fit_status = "ok";
  } catch (const FitFailure& e) {
    row.fit = e.best_so_far();
    row.fit_status = std::string(to_string(e.code()));
  } catch (const Error& e) {
    row.fit.reset();
    row.fit_status = std::string(to_string(e.code()));
  }
}

// One evolving model behind a uniform stepping/measuring surface.
class Engine {
 public:
  virtual ~Engine() = default;
  virtual std::uint64_t t() const = 0;
  virtual void step() = 0;
  virtual MeasurementRow measure(const RunConfig& config) const = 0;
  virtual void write_state(std::ostream& out, const HeaderFields& fields) const = 0;
  virtual void restore(std::istream& in, HeaderFields* fields) = 0;
  virtual std::string_view snapshot_kind() const = 0;
  virtual Distribution distribution() const = 0;
  virtual double truncated_mass() const = 0;
};

MeasurementRow lattice_row(std::uint64_t t, const Distribution& dist, double truncated) {
  MeasurementRow row;
  row.t = t;
  row.time = static_cast<double>(t);
  row.window_lo = dist.origin();
  row.window_hi = dist.last_site();
  row.truncated_mass = truncated;
  row.total_probability = dist.total();
  row.std_dev = dist.std_dev();
  row.max_density = dist.peak();
  return row;
}

class WalkerEngine final : public Engine {
 public:
  WalkerEngine(WalkerState initial, const RunConfig& config)
      : cur_(std::move(initial)), homogeneous_(config.model == Model::homogeneous),
        coin_{config.theta}, eps_(config.epsilon_trunc) {}

  std::uint64_t t() const override { return cur_.step_count(); }

  void step() override {
    if (homogeneous_) {
      homogeneous_step_into(cur_, next_, coin_);
      trim_window(next_, eps_);
    } else {
      feed_forward_step_into(cur_, next_, eps_);
    }
    std::swap(cur_, next_);
  }

  MeasurementRow measure(const RunConfig& config) const override {
    const Distribution dist = probability_distribution(cur_);
    MeasurementRow row = lattice_row(t(), dist, cur_.truncated_mass());
    if (homogeneous_) {
      // Ballistic two-peaked profile: report the Gaussian-equivalent width
      // from the second moment instead of a shape fit.
      QGaussianFit f;
      f.q = 1.0;
      f.sigma_q = std::numbers::sqrt2 * row.std_dev;
      f.center = dist.mean();
      f.amplitude = dist.total() / (std::sqrt(std::numbers::pi) * std::max(f.sigma_q, 1e-300));
      f.q_fixed = true;
      row.fit = f;
      row.fit_status = "moments";
    } else {
      apply_fit(row, running_average(dist, config.smoothing_window), config.q_fixed);
    }
    return row;
  }

  void write_state(std::ostream& out, const HeaderFields& fields) const override {
    write_walker_snapshot(out, cur_, fields);
  }
  void restore(std::istream& in, HeaderFields* fields) override { cur_ = read_walker_snapshot(in, fields); }
  std::string_view snapshot_kind() const override { return "walker"; }
  Distribution distribution() const override { return probability_distribution(cur_); }
  double truncated_mass() const override { return cur_.truncated_mass(); }

 private:
  WalkerState cur_;
  WalkerState next_;
  bool homogeneous_;
  CoinAngle coin_;
  double eps_;
};

class MarkovEngine final : public Engine {
 public:
  MarkovEngine(MarkovState initial, const RunConfig& config)
      : cur_(std::move(initial)), eps_(config.epsilon_trunc) {}

  std::uint64_t t() const override { return cur_.step_count(); }
  void step() override {
    markov_step_into(cur_, next_, eps_);
    std::swap(cur_, next_);
  }
  MeasurementRow measure(const RunConfig& config) const override {
    const Distribution dist = markov_distribution(cur_);
    MeasurementRow row = lattice_row(t(), dist, cur_.truncated_mass());
    apply_fit(row, running_average(dist, config.smoothing_window), config.q_fixed);
    return row;
  }
  void write_state(std::ostream& out, const HeaderFields& fields) const override {
    write_markov_snapshot(out, cur_, fields);
  }
  void restore(std::istream& in, HeaderFields* fields) override { cur_ = read_markov_snapshot(in, fields); }
  std::string_view snapshot_kind() const override { return "markov"; }
  Distribution distribution() const override { return markov_distribution(cur_); }
  double truncated_mass() const override { return cur_.truncated_mass(); }

 private:
  MarkovState cur_;
  MarkovState next_;
  double eps_;
};

class PdeEngine final : public Engine {
 public:
  explicit PdeEngine(const RunConfig& config) : steps_taken_(0) {
    const double q = config.model == Model::pme ? 2.0 - config.m : 0.0;
    // Size the domain to four times the support expected at the last step.
    const bool heat = config.model == Model::pme && config.m == 1.0;
    PMEGrid probe = heat ? gaussian_profile(config.sigma0, 0.0, {-config.sigma0 * 8, config.sigma0 * 8, 64})
                         : barenblatt_profile(q, config.sigma0, 0.0, {-config.sigma0 * 4, config.sigma0 * 4, 64});
    const double cells_per_unit = 1.0 / config.dx;
    probe.dx = config.dx;
    probe.rho.assign(1, heat ? 1.0 / (std::sqrt(std::numbers::pi) * config.sigma0)
                             : 1.0 / q_gaussian_normalization(q, config.sigma0));
    const double dt = stable_dt(probe);
    const double t0 = probe.time;
    const double t_end = t0 + dt * static_cast<double>(config.steps);
    const double m = config.model == Model::pme ? config.m : 2.0;
    const double growth = std::pow(t_end / t0, 1.0 / (m + 1.0));
    const double support = heat ? 4.0 * config.sigma0 * growth : config.sigma0 * growth / std::sqrt(1.0 - q);
    const double half = 4.0 * support;
    const auto cells = static_cast<std::size_t>(std::ceil(2.0 * half * cells_per_unit));
    const GridSpec spec{-half, half, std::max<std::size_t>(cells, 3)};
    grid_ = heat ? gaussian_profile(config.sigma0, 0.0, spec) : barenblatt_profile(q, config.sigma0, 0.0, spec);
    if (config.model == Model::nlpde) grid_ = lattice_density_grid(grid_);
  }

  std::uint64_t t() const override { return steps_taken_; }
  void step() override {
    if (grid_.kind == PdeKind::porous_medium) {
      pme_step_in_place(grid_, scratch_);
    } else {
      nlpde_step_in_place(grid_, scratch_);
    }
    ++steps_taken_;
  }
  MeasurementRow measure(const RunConfig& config) const override {
    MeasurementRow row;
    row.t = steps_taken_;
    row.time = grid_.time;
    row.window_lo = 0;
    row.window_hi = static_cast<std::int64_t>(grid_.n_cells) - 1;
    row.total_probability = grid_.mass();
    row.max_density = grid_.max_density();
    const std::vector<double> x = grid_.cell_centers();
    double mean = 0.0, w = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      mean += x[i] * grid_.rho[i];
      w += grid_.rho[i];
    }
    mean /= w;
    double var = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) var += (x[i] - mean) * (x[i] - mean) * grid_.rho[i];
    row.std_dev = std::sqrt(var / w);
    std::optional<double> q = config.q_fixed;
    if (!q && grid_.m) q = 2.0 - *grid_.m;
    try {
      row.fit = fit_q_gaussian(x, grid_.rho, q);
    } catch (const FitFailure& e) {
      row.fit = e.best_so_far();
      row.fit_status = std::string(to_string(e.code()));
    } catch (const Error& e) {
      row.fit_status = std::string(to_string(e.code()));
    }
    return row;
  }
  void write_state(std::ostream& out, const HeaderFields& fields) const override {
    HeaderFields f = fields;
    f["t"] = std::to_string(steps_taken_);
    write_grid_snapshot(out, grid_, f);
  }
  void restore(std::istream& in, HeaderFields* fields) override {
    HeaderFields f;
    grid_ = read_grid_snapshot(in, &f);
    steps_taken_ = static_cast<std::uint64_t>(parse_int(f.at("t")));
    if (fields) *fields = f;
  }
  std::string_view snapshot_kind() const override { return "grid"; }
  Distribution distribution() const override {
    // Cell masses on a unit-spaced index; used only for the final dump.
    std::vector<double> masses(grid_.rho);
    for (double& v : masses) v *= grid_.dx;
    return Distribution(0, std::move(masses));
  }
  double truncated_mass() const override { return 0.0; }
  const PMEGrid& grid() const { return grid_; }

 private:
  PMEGrid grid_;
  std::vector<double> scratch_;
  std::uint64_t steps_taken_;
};

std::unique_ptr<Engine> make_engine(const RunConfig& config) {
  switch (config.model) {
    case Model::feed_forward:
    case Model::homogeneous: return std::make_unique<WalkerEngine>(make_walker_initial(config.initial), config);
    case Model::markov: return std::make_unique<MarkovEngine>(make_markov_initial(config.initial), config);
    case Model::pme:
    case Model::nlpde: return std::make_unique<PdeEngine>(config);
  }
  throw Error(ErrorCode::configuration, "unhandled model");
}

constexpr const char* kSeriesHeader =
    "t,time,window_lo,window_hi,truncated_mass,total_probability,std_dev,max_density,q,sigma_q,amplitude,"
    "center,residual_rms,fit_status";

std::string format_row(const MeasurementRow& r) {
  std::ostringstream s;
  s << r.t << ',' << format_double(r.time) << ',' << r.window_lo << ',' << r.window_hi << ','
    << format_double(r.truncated_mass) << ',' << format_double(r.total_probability) << ','
    << format_double(r.std_dev) << ',' << format_double(r.max_density) << ',';
  if (r.fit) {
    s << format_double(r.fit->q) << ',' << format_double(r.fit->sigma_q) << ',' << format_double(r.fit->amplitude)
      << ',' << format_double(r.fit->center) << ',' << format_double(r.fit->residual_rms);
  } else {
    s << ",,,,";
  }
  s << ',' << r.fit_status;
  return s.str();
}

MeasurementRow parse_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream s(line);
  while (std::getline(s, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  if (cells.size() != 14) throw Error(ErrorCode::io, "malformed series row: " + line);
  MeasurementRow r;
  r.t = static_cast<std::uint64_t>(parse_int(cells[0]));
  r.time = parse_double(cells[1]);
  r.window_lo = parse_int(cells[2]);
  r.window_hi = parse_int(cells[3]);
  r.truncated_mass = parse_double(cells[4]);
  r.total_probability = parse_double(cells[5]);
  r.std_dev = parse_double(cells[6]);
  r.max_density = parse_double(cells[7]);
  if (!cells[8].empty()) {
    QGaussianFit f;
    f.q = parse_double(cells[8]);
    f.sigma_q = parse_double(cells[9]);
    f.amplitude = parse_double(cells[10]);
    f.center = parse_double(cells[11]);
    f.residual_rms = parse_double(cells[12]);
    r.fit = f;
  }
  r.fit_status = cells[13];
  return r;
}

std::string distribution_text(const Distribution& d, std::uint64_t t) {
  std::ostringstream s;
  write_distribution(s, d, {{"t", std::to_string(t)}});
  return s.str();
}

void write_manifest(const fs::path& dir, const RunConfig& config, std::string_view status,
                    const RunArtifacts& art, const std::string& error_message) {
  json j;
  j["tool"] = "ffqw";
  j["version"] = kVersion;
  j["status"] = status;
  j["config"] = json::parse(config_to_json(config));
  j["final"] = {{"t", art.final_t},
                {"total_probability", art.final_distribution.total()},
                {"truncated_mass", art.final_truncated_mass},
                {"ledger", art.final_distribution.total() + art.final_truncated_mass}};
  j["measurements"] = art.rows.size();
  json files = json::array();
  for (const fs::path& f : art.files) files.push_back(f.generic_string());
  j["files"] = files;
  if (!error_message.empty()) j["error"] = error_message;
  write_file_atomic(dir / "manifest.json", j.dump(2) + "\n");
}

void add_file(RunArtifacts& art, const fs::path& name) {
  if (std::find(art.files.begin(), art.files.end(), name) == art.files.end()) art.files.push_back(name);
}

}  // namespace

RunArtifacts run_evolution(const RunConfig& config) {
  config.validate();
  const fs::path dir = config.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create output directory " + dir.string() + ": " + ec.message());
  if (config.snapshots) fs::create_directories(dir / "snapshots", ec);

  const std::vector<std::uint64_t> schedule = measurement_schedule(config.steps, config.per_decade, config.measure_from);
  std::unique_ptr<Engine> engine = make_engine(config);
  RunArtifacts art;
  const fs::path series_path = dir / "series.csv";
  const fs::path checkpoint_path = dir / "checkpoint.csv";
  const std::string fp = fingerprint(config);

  if (config.resume) {
    if (!fs::exists(checkpoint_path)) throw Error(ErrorCode::checkpoint_mismatch, "no checkpoint to resume from");
    std::istringstream ck(read_file(checkpoint_path));
    if (const std::string kind = peek_snapshot_kind(ck); kind != engine->snapshot_kind()) {
      throw Error(ErrorCode::checkpoint_mismatch, "checkpoint holds a '" + kind + "' state, this model needs '" +
                                                      std::string(engine->snapshot_kind()) + "'");
    }
    HeaderFields fields;
    engine->restore(ck, &fields);
    if (fields["config"] != fp || fields["model"] != to_string(config.model)) {
      throw Error(ErrorCode::checkpoint_mismatch, "checkpoint was written by a different configuration");
    }
    if (fields["ffqw_version"] != kVersion) {
      throw Error(ErrorCode::checkpoint_mismatch, "checkpoint was written by ffqw " + fields["ffqw_version"]);
    }
    if (engine->t() > config.steps) throw Error(ErrorCode::checkpoint_mismatch, "checkpoint is past the requested steps");
    // Keep the measurements taken up to the checkpoint and drop the rest.
    std::istringstream old(fs::exists(series_path) ? read_file(series_path) : std::string());
    std::string line, kept = std::string(kSeriesHeader) + "\n";
    std::getline(old, line);
    while (std::getline(old, line)) {
      if (line.empty()) continue;
      MeasurementRow row = parse_row(line);
      if (row.t > engine->t()) break;
      kept += line + "\n";
      art.rows.push_back(std::move(row));
    }
    write_file_atomic(series_path, kept);
    add_file(art, "checkpoint.csv");
    if (config.snapshots) {
      for (const MeasurementRow& r : art.rows) add_file(art, fs::path("snapshots") / ("distribution_t" + std::to_string(r.t) + ".csv"));
    }
  } else {
    write_file_atomic(series_path, std::string(kSeriesHeader) + "\n");
  }
  add_file(art, "series.csv");

  std::ofstream series(series_path, std::ios::app | std::ios::binary);
  if (!series) throw Error(ErrorCode::io, "cannot open " + series_path.string());

  auto next_measure = std::upper_bound(schedule.begin(), schedule.end(), engine->t());
  try {
    while (engine->t() < config.steps) {
      engine->step();
      const std::uint64_t t = engine->t();
      if (next_measure != schedule.end() && *next_measure == t) {
        ++next_measure;
        MeasurementRow row = engine->measure(config);
        series << format_row(row) << '\n';
        series.flush();
        if (!series) throw Error(ErrorCode::io, "write to " + series_path.string() + " failed");
        if (config.snapshots) {
          const fs::path name = fs::path("snapshots") / ("distribution_t" + std::to_string(t) + ".csv");
          write_file_atomic(dir / name, distribution_text(engine->distribution(), t));
          add_file(art, name);
        }
        art.rows.push_back(std::move(row));
      }
      if (t % config.checkpoint_every == 0) {
        std::ostringstream ck;
        engine->write_state(ck, {{"config", fp},
                                 {"model", std::string(to_string(config.model))},
                                 {"ffqw_version", std::string(kVersion)}});
        write_file_atomic(checkpoint_path, ck.str());
        add_file(art, "checkpoint.csv");
      }
      if (config.halt_after && t >= *config.halt_after && t < config.steps) {
        art.halted = true;
        break;
      }
    }

    art.final_t = engine->t();
    art.final_distribution = engine->distribution();
    art.final_truncated_mass = engine->truncated_mass();
    if (!art.halted) {
      std::ostringstream st;
      engine->write_state(st, {});
      write_file_atomic(dir / "final_state.csv", st.str());
      add_file(art, "final_state.csv");
      write_file_atomic(dir / "final_distribution.csv", distribution_text(art.final_distribution, art.final_t));
      add_file(art, "final_distribution.csv");
    }
    std::sort(art.files.begin(), art.files.end());
    write_manifest(dir, config, art.halted ? "halted" : "complete", art, "");
  } catch (const Error& e) {
    if (e.code() == ErrorCode::io) {
      try {
        std::sort(art.files.begin(), art.files.end());
        write_manifest(dir, config, "aborted", art, e.what());
      } catch (const Error&) {
        // The manifest itself could not be written; the original error wins.
      }
    }
    throw;
  }

  if (config.model != Model::pme && config.model != Model::nlpde) {
    art.series.q_used = config.q_fixed.value_or(std::nan(""));
    if (config.model == Model::homogeneous) art.series.q_used = 1.0;
    for (const MeasurementRow& r : art.rows) {
      if (r.fit && r.fit_status != "fit_failure" && r.fit->sigma_q > 0.0) art.series.samples.push_back({r.t, r.fit->sigma_q});
    }
  }
  return art;
}

}  // namespace ffqw
