// Command-line driver: ffqw <walk|markov|pme|fit|spectrum|sweep|validate-pme> [flags]

#include <CLI11.hpp>
#include <cmath>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "ffqw/harness.hpp"
#include "ffqw/snapshot.hpp"

namespace {

using nlohmann::json;
using namespace ffqw;

json fit_json(const QGaussianFit& f) {
  return {{"q", f.q},
          {"sigma_q", f.sigma_q},
          {"amplitude", f.amplitude},
          {"center", f.center},
          {"residual_rms", f.residual_rms},
          {"q_fixed", f.q_fixed}};
}

struct RunFlags {
  std::string config_path;
  RunConfig config;  // flag storage
  std::string model, initial, initial_file, output_dir;
  double q_fixed = 0.5;
  std::uint64_t halt_after = 0;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> overrides;

  template <typename T>
  void field(CLI::App* app, const std::string& name, T RunConfig::*member, const std::string& help) {
    overrides.emplace_back(app->add_option(name, config.*member, help),
                           [this, member](RunConfig& r) { r.*member = config.*member; });
  }

  void attach(CLI::App* app, bool lattice) {
    app->add_option("--config", config_path, "JSON config file; flags override its keys");
    field(app, "--steps", &RunConfig::steps, "number of steps");
    if (lattice) {
      overrides.emplace_back(app->add_option("--initial", initial, "paper_default | single_site | beta_gamma | file"),
                             [this](RunConfig& r) { r.initial.kind = parse_initial_kind(initial); });
      overrides.emplace_back(app->add_option("--beta", config.initial.beta, "beta of the beta_gamma initial state"),
                             [this](RunConfig& r) {
                               r.initial.beta = config.initial.beta;
                               r.initial.kind = InitialCondition::Kind::beta_gamma;
                             });
      overrides.emplace_back(app->add_option("--gamma", config.initial.gamma, "gamma of the beta_gamma initial state"),
                             [this](RunConfig& r) {
                               r.initial.gamma = config.initial.gamma;
                               r.initial.kind = InitialCondition::Kind::beta_gamma;
                             });
      overrides.emplace_back(app->add_option("--initial-file", initial_file, "snapshot to start from"),
                             [this](RunConfig& r) {
                               r.initial.kind = InitialCondition::Kind::file;
                               r.initial.path = initial_file;
                             });
      field(app, "--epsilon-trunc", &RunConfig::epsilon_trunc, "edge truncation threshold");
      field(app, "--window", &RunConfig::smoothing_window, "running-average window before fitting (odd)");
    } else {
      field(app, "--m", &RunConfig::m, "porous-medium exponent");
      field(app, "--sigma0", &RunConfig::sigma0, "initial width");
      field(app, "--dx", &RunConfig::dx, "grid spacing");
    }
    overrides.emplace_back(app->add_option("--q-fixed", q_fixed, "fix q in every fit"),
                           [this](RunConfig& r) { r.q_fixed = q_fixed; });
    field(app, "--per-decade", &RunConfig::per_decade, "measurements per decade of t");
    field(app, "--measure-from", &RunConfig::measure_from, "first measured step");
    field(app, "--checkpoint-every", &RunConfig::checkpoint_every, "checkpoint interval in steps");
    overrides.emplace_back(app->add_flag("--snapshots", config.snapshots, "write a distribution at every measurement"),
                           [this](RunConfig& r) { r.snapshots = config.snapshots; });
    overrides.emplace_back(app->add_option("--output,-o", output_dir, "output directory"),
                           [this](RunConfig& r) { r.output_dir = output_dir; });
    overrides.emplace_back(app->add_flag("--resume", config.resume, "continue from the checkpoint in the output directory"),
                           [this](RunConfig& r) { r.resume = config.resume; });
    overrides.emplace_back(app->add_option("--halt-after", halt_after, "stop after this many steps"),
                           [this](RunConfig& r) { r.halt_after = halt_after; });
  }

  // Loads the config file, then re-applies every flag given on the command line.
  RunConfig resolve(Model default_model) const {
    RunConfig r;
    r.model = default_model;
    if (!config_path.empty()) apply_config_json(r, read_file(config_path));
    if (!model.empty()) r.model = parse_model(model);
    for (const auto& [opt, apply] : overrides) {
      if (opt->count() > 0) apply(r);
    }
    return r;
  }
};

json run_summary(const RunConfig& config, const RunArtifacts& art) {
  json j;
  j["model"] = to_string(config.model);
  j["status"] = art.halted ? "halted" : "complete";
  j["output_dir"] = config.output_dir.string();
  j["t"] = art.final_t;
  j["total_probability"] = art.final_distribution.total();
  j["truncated_mass"] = art.final_truncated_mass;
  j["measurements"] = art.rows.size();
  if (!art.rows.empty()) {
    const MeasurementRow& last = art.rows.back();
    j["std_dev"] = last.std_dev;
    if (last.fit) j["fit"] = fit_json(*last.fit);
    j["fit_status"] = last.fit_status;
  }
  if (art.series.samples.size() >= 5) {
    try {
      const ExponentEstimate e = estimate_exponent(art.series, art.series.samples.front().t, art.series.samples.back().t);
      j["exponent"] = {{"value", e.exponent}, {"standard_error", e.standard_error}, {"samples", e.samples}};
    } catch (const Error&) {
    }
  }
  return j;
}

Distribution load_distribution(const std::string& path) {
  std::istringstream s(read_file(path));
  return read_distribution(s);
}

int emit_error(std::string_view code, const std::string& message) {
  json j = {{"error", {{"code", code}, {"message", message}}}};
  std::cerr << j.dump() << std::endl;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feed-forward quantum walk simulator and analysis toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  RunFlags walk_flags, markov_flags, pme_flags;
  double theta = RunConfig{}.theta;

  auto* walk = app.add_subcommand("walk", "evolve the feed-forward or homogeneous walk");
  walk->add_option("--model", walk_flags.model, "feed_forward | homogeneous")
      ->check(CLI::IsMember({"feed_forward", "homogeneous"}));
  walk->add_option("--theta", theta, "coin angle of the homogeneous walk");
  walk_flags.attach(walk, true);

  auto* markov = app.add_subcommand("markov", "evolve the associated Markov model");
  markov_flags.attach(markov, true);

  auto* pme = app.add_subcommand("pme", "evolve the porous-medium or lattice density equation");
  pme->add_option("--equation", pme_flags.model, "pme | nlpde")->check(CLI::IsMember({"pme", "nlpde"}));
  pme_flags.attach(pme, false);

  std::string input;
  std::optional<double> fit_q;
  int fit_window = 11;
  auto* fit = app.add_subcommand("fit", "fit a q-Gaussian to a distribution or snapshot file");
  fit->add_option("input", input, "distribution, walker or markov file")->required();
  fit->add_option("--q-fixed", fit_q, "fix q");
  fit->add_option("--window", fit_window, "running-average window (odd)");

  double spectrum_q = 0.5;
  int spectrum_window = 11;
  std::string spectrum_out;
  auto* spectrum = app.add_subcommand("spectrum", "power spectrum of the residual against a q-Gaussian fit");
  spectrum->add_option("input", input, "distribution, walker or markov file")->required();
  spectrum->add_option("--q-fixed", spectrum_q, "q of the reference fit");
  spectrum->add_option("--window", spectrum_window, "running-average window used for the reference fit");
  spectrum->add_option("--table,-o", spectrum_out, "write frequency,power rows to this file");

  SweepConfig sweep_config;
  std::string sweep_out = "sweep.csv";
  auto* sweep = app.add_subcommand("sweep", "q over a grid of (beta, gamma) initial states");
  sweep->add_option("--resolution", sweep_config.resolution, "grid points per axis");
  sweep->add_option("--steps-a", sweep_config.steps_a, "first measurement time");
  sweep->add_option("--steps-b", sweep_config.steps_b, "second measurement time");
  sweep->add_option("--window", sweep_config.smoothing_window, "running-average window (odd)");
  sweep->add_option("--epsilon-trunc", sweep_config.epsilon_trunc, "edge truncation threshold");
  sweep->add_option("--workers", sweep_config.workers,
                    std::string("worker threads (default: $") + kWorkersEnv + " or all cores)");
  sweep->add_option("--output,-o", sweep_out, "CSV output file");

  PmeValidationConfig pme_config;
  auto* validate = app.add_subcommand("validate-pme", "check Barenblatt self-similarity of the continuum solvers");
  validate->add_option("--m", pme_config.m, "porous-medium exponent in [1, 3)");
  validate->add_option("--decades", pme_config.decades, "time span in decades");
  validate->add_option("--sigma0", pme_config.sigma0, "initial width");
  validate->add_option("--dx", pme_config.dx, "grid spacing");
  validate->add_option("--per-decade", pme_config.per_decade, "measurements per decade");
  validate->add_option("--peak", pme_config.comparison_peak, "peak density of the lattice-equation comparison");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return emit_error("usage", e.what());
  }

  try {
    if (*walk || *markov || *pme) {
      RunFlags& flags = *walk ? walk_flags : *markov ? markov_flags : pme_flags;
      RunConfig config = flags.resolve(*walk ? Model::feed_forward : *markov ? Model::markov : Model::pme);
      if (*walk && walk->count("--theta")) config.theta = theta;
      const RunArtifacts art = run_evolution(config);
      std::cout << run_summary(config, art).dump(2) << std::endl;
    } else if (*fit) {
      const Distribution dist = load_distribution(input);
      const QGaussianFit f = fit_q_gaussian(running_average(dist, fit_window), fit_q);
      json j = fit_json(f);
      j["window"] = fit_window;
      j["support_half_width"] = std::isfinite(f.support_half_width()) ? json(f.support_half_width()) : json(nullptr);
      std::cout << j.dump(2) << std::endl;
    } else if (*spectrum) {
      const Distribution dist = load_distribution(input);
      const QGaussianFit f = fit_q_gaussian(running_average(dist, spectrum_window), spectrum_q);
      const SpectrumResult s = residual_spectrum(dist, f);
      if (!spectrum_out.empty()) {
        std::ostringstream table;
        table << "frequency,power\n";
        for (std::size_t k = 0; k < s.frequencies.size(); ++k) {
          table << format_double(s.frequencies[k]) << ',' << format_double(s.power[k]) << '\n';
        }
        write_file_atomic(spectrum_out, table.str());
      }
      json j = {{"fit", fit_json(f)},
                {"slope", s.slope_loglog},
                {"slope_stderr", s.slope_stderr},
                {"band", {s.band_lo, s.band_hi}},
                {"support_sites", s.support_sites},
                {"fft_length", s.fft_length}};
      std::cout << j.dump(2) << std::endl;
    } else if (*sweep) {
      const SweepResult r = run_sweep(sweep_config);
      write_file_atomic(sweep_out, sweep_to_csv(r));
      std::size_t localized = 0, failed = 0;
      for (const SweepPoint& p : r.points) {
        localized += p.localized;
        failed += !p.localized && !p.fit_ok;
      }
      const auto median = r.median_q();
      json j = {{"points", r.points.size()},
                {"fitted", r.fitted_q().size()},
                {"localized", localized},
                {"failed", failed},
                {"median_q", median ? json(*median) : json(nullptr)},
                {"output", sweep_out}};
      std::cout << j.dump(2) << std::endl;
    } else if (*validate) {
      const PmeValidationReport r = run_pme_validation(pme_config);
      json rows = json::array();
      for (const auto& row : r.rows) rows.push_back({{"time", row.time}, {"sigma_q", row.sigma_q}, {"mass", row.mass}});
      json cmp = json::array();
      for (const auto& c : r.comparison) {
        cmp.push_back({{"time", c.time},
                       {"l1", c.l1},
                       {"l1_relative", c.l1_relative},
                       {"lattice_max_density", c.lattice_max_density},
                       {"lattice_mass_drift", c.lattice_mass_drift}});
      }
      json j = {{"m", r.m},
                {"q", r.q},
                {"expected_exponent", r.expected_exponent},
                {"exponent", r.exponent.exponent},
                {"exponent_stderr", r.exponent.standard_error},
                {"mass_drift", r.mass_drift},
                {"rows", rows},
                {"comparison", cmp},
                {"max_l1_relative", r.max_l1_relative}};
      if (r.free_fit_final) j["free_fit_final"] = fit_json(*r.free_fit_final);
      std::cout << j.dump(2) << std::endl;
    }
  } catch (const Error& e) {
    return emit_error(to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    return emit_error("internal", e.what());
  }
  return 0;
}
