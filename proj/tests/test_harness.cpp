#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <sstream>

#include "ffqw/harness.hpp"
#include "ffqw/snapshot.hpp"
#include "oracles.hpp"

using namespace ffqw;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ffqw_harness_" + name);
  fs::remove_all(p);
  return p;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::numeric;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::istringstream s(read_file(p));
  std::vector<std::string> out;
  for (std::string line; std::getline(s, line);) out.push_back(line);
  return out;
}

// Runs straight through, and again with a halt plus resume, comparing every
// data file byte for byte.
void check_resume_identity(RunConfig config, std::uint64_t halt, const std::string& tag) {
  config.output_dir = scratch_dir(tag + "_straight");
  run_evolution(config);

  RunConfig part = config;
  part.output_dir = scratch_dir(tag + "_resumed");
  part.halt_after = halt;
  const RunArtifacts halted = run_evolution(part);
  REQUIRE(halted.halted);
  CHECK(nlohmann::json::parse(read_file(part.output_dir / "manifest.json"))["status"] == "halted");
  part.halt_after.reset();
  part.resume = true;
  const RunArtifacts resumed = run_evolution(part);
  CHECK_FALSE(resumed.halted);

  for (const char* name : {"series.csv", "final_state.csv", "final_distribution.csv", "checkpoint.csv", "manifest.json"}) {
    INFO(tag << ": " << name);
    CHECK(read_file(config.output_dir / name) == read_file(part.output_dir / name));
  }
  if (config.snapshots) {
    for (const auto& entry : fs::directory_iterator(config.output_dir / "snapshots")) {
      INFO(entry.path().filename().string());
      CHECK(read_file(entry.path()) == read_file(part.output_dir / "snapshots" / entry.path().filename()));
    }
  }
}

}  // namespace

TEST_CASE("measurement schedule") {
  const auto s = measurement_schedule(1000, 8, 100);
  CHECK(s == std::vector<std::uint64_t>{100, 133, 178, 237, 316, 422, 562, 750, 1000});
  CHECK(measurement_schedule(1000000, 8, 10000).size() == 17);
  CHECK(measurement_schedule(5, 8, 100) == std::vector<std::uint64_t>{5});
  // Dense schedules collapse duplicate integers.
  const auto d = measurement_schedule(100, 100, 1);
  for (std::size_t i = 1; i < d.size(); ++i) CHECK(d[i] > d[i - 1]);
  CHECK(d.front() == 1);
  CHECK(d.back() == 100);
}

TEST_CASE("config JSON round trip and overrides") {
  RunConfig c;
  c.model = Model::markov;
  c.steps = 1234;
  c.initial.kind = InitialCondition::Kind::beta_gamma;
  c.initial.beta = 0.25;
  c.initial.gamma = 0.75;
  c.q_fixed = 0.0;
  c.epsilon_trunc = 1e-24;
  RunConfig back;
  apply_config_json(back, config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(back.model == Model::markov);
  CHECK(back.q_fixed == 0.0);

  RunConfig partial;
  apply_config_json(partial, R"({"steps": 50, "initial": "single_site", "q_fixed": null})");
  CHECK(partial.steps == 50);
  CHECK(partial.initial.kind == InitialCondition::Kind::single_site);
  CHECK(partial.model == Model::feed_forward);
  CHECK_FALSE(partial.q_fixed);

  CHECK(code_of([&] { apply_config_json(partial, "{"); }) == ErrorCode::configuration);
  CHECK(code_of([&] { apply_config_json(partial, "[1]"); }) == ErrorCode::configuration);
  CHECK(code_of([&] { apply_config_json(partial, R"({"steps": "many"})"); }) == ErrorCode::configuration);
  CHECK(code_of([&] { apply_config_json(partial, R"({"model": "levy"})"); }) == ErrorCode::configuration);
}

TEST_CASE("config validation") {
  auto invalid = [](auto mutate) {
    RunConfig c;
    mutate(c);
    return code_of([&] { c.validate(); }) == ErrorCode::configuration;
  };
  CHECK(invalid([](RunConfig& c) { c.steps = 0; }));
  CHECK(invalid([](RunConfig& c) { c.epsilon_trunc = 1e-3; }));
  CHECK(invalid([](RunConfig& c) { c.epsilon_trunc = 0.0; }));
  CHECK(invalid([](RunConfig& c) { c.smoothing_window = 4; }));
  CHECK(invalid([](RunConfig& c) {
    c.initial.kind = InitialCondition::Kind::beta_gamma;
    c.initial.beta = 1.5;
  }));
  CHECK(invalid([](RunConfig& c) {
    c.model = Model::pme;
    c.m = 3.0;
  }));
  CHECK(invalid([](RunConfig& c) { c.q_fixed = 1.5; }));
  RunConfig ok;
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("single-site state does not spread") {
  RunConfig c;
  c.initial.kind = InitialCondition::Kind::single_site;
  c.steps = 100;
  c.per_decade = 100;
  c.measure_from = 1;
  c.snapshots = true;
  c.output_dir = scratch_dir("single_site");
  const RunArtifacts art = run_evolution(c);
  const std::string reference = read_file(c.output_dir / "snapshots" / "distribution_t2.csv");
  const std::string ref_body = reference.substr(reference.find("site,"));
  int even = 0;
  for (const MeasurementRow& r : art.rows) {
    CHECK(std::abs(r.ledger() - 1.0) < 1e-12);
    if (r.t % 2) continue;
    ++even;
    const std::string text = read_file(c.output_dir / "snapshots" / ("distribution_t" + std::to_string(r.t) + ".csv"));
    CHECK(text.substr(text.find("site,")) == ref_body);
    CHECK(r.std_dev == art.rows[1].std_dev);
    // Two occupied sites cannot support a shape fit.
    CHECK(r.fit_status == "insufficient_data");
  }
  CHECK(even > 10);
}

TEST_CASE("series and manifest contents") {
  RunConfig c;
  c.steps = 3000;
  c.q_fixed = 0.5;
  c.checkpoint_every = 1000;
  c.output_dir = scratch_dir("contents");
  const RunArtifacts art = run_evolution(c);
  const auto lines = lines_of(c.output_dir / "series.csv");
  REQUIRE(lines.size() == art.rows.size() + 1);
  CHECK(lines[0].rfind("t,time,window_lo,window_hi,truncated_mass", 0) == 0);
  for (const MeasurementRow& r : art.rows) {
    CHECK(std::abs(r.ledger() - 1.0) < 1e-9);
    REQUIRE(r.fit);
    CHECK(r.fit->q == 0.5);
    CHECK(r.fit_status == "ok");
  }
  CHECK(art.series.samples.size() == art.rows.size());
  const auto m = nlohmann::json::parse(read_file(c.output_dir / "manifest.json"));
  CHECK(m["status"] == "complete");
  CHECK(m["final"]["t"] == 3000);
  CHECK(std::abs(m["final"]["ledger"].get<double>() - 1.0) < 1e-9);
  CHECK(m["config"]["q_fixed"] == 0.5);
  for (const auto& f : m["files"]) CHECK(fs::exists(c.output_dir / f.get<std::string>()));

  // Identical configuration, identical bytes.
  RunConfig again = c;
  again.output_dir = scratch_dir("contents_again");
  run_evolution(again);
  for (const char* name : {"series.csv", "final_state.csv", "manifest.json"}) {
    CHECK(read_file(c.output_dir / name) == read_file(again.output_dir / name));
  }
}

TEST_CASE("resume reproduces an uninterrupted run byte for byte") {
  RunConfig ff;
  ff.steps = 5000;
  ff.checkpoint_every = 1000;
  ff.q_fixed = 0.5;
  ff.snapshots = true;
  // Halting between checkpoints rewinds to the last one.
  check_resume_identity(ff, 2500, "feed_forward");
  check_resume_identity(ff, 3000, "feed_forward_on_checkpoint");

  RunConfig mk;
  mk.model = Model::markov;
  mk.steps = 4000;
  mk.checkpoint_every = 700;
  check_resume_identity(mk, 1500, "markov");

  RunConfig pme;
  pme.model = Model::pme;
  pme.steps = 3000;
  pme.checkpoint_every = 500;
  pme.sigma0 = 20.0;
  check_resume_identity(pme, 1200, "pme");

  RunConfig nl = pme;
  nl.model = Model::nlpde;
  check_resume_identity(nl, 1200, "nlpde");
}

TEST_CASE("resume refuses foreign checkpoints") {
  RunConfig c;
  c.steps = 2000;
  c.checkpoint_every = 500;
  c.halt_after = 1000;
  c.output_dir = scratch_dir("mismatch");
  run_evolution(c);

  RunConfig other = c;
  other.halt_after.reset();
  other.resume = true;
  other.epsilon_trunc = 1e-24;
  CHECK(code_of([&] { run_evolution(other); }) == ErrorCode::checkpoint_mismatch);
  other.epsilon_trunc = c.epsilon_trunc;
  other.model = Model::markov;
  CHECK(code_of([&] { run_evolution(other); }) == ErrorCode::checkpoint_mismatch);

  // A checkpoint from another release.
  other.model = c.model;
  const fs::path ck = c.output_dir / "checkpoint.csv";
  std::string text = read_file(ck);
  const std::string tag = "ffqw_version=" + std::string(kVersion);
  text.replace(text.find(tag), tag.size(), "ffqw_version=0.9.0");
  write_file_atomic(ck, text);
  CHECK(code_of([&] { run_evolution(other); }) == ErrorCode::checkpoint_mismatch);

  RunConfig none = c;
  none.resume = true;
  none.output_dir = scratch_dir("no_checkpoint");
  CHECK(code_of([&] { run_evolution(none); }) == ErrorCode::checkpoint_mismatch);
}

TEST_CASE("write failure leaves an aborted manifest") {
  RunConfig c;
  c.steps = 500;
  c.snapshots = true;
  c.output_dir = scratch_dir("aborted");
  fs::create_directories(c.output_dir);
  // A plain file where the snapshot directory should be.
  std::ofstream(c.output_dir / "snapshots") << "x";
  CHECK(code_of([&] { run_evolution(c); }) == ErrorCode::io);
  const auto m = nlohmann::json::parse(read_file(c.output_dir / "manifest.json"));
  CHECK(m["status"] == "aborted");
  CHECK(m["error"].get<std::string>().find("snapshots") != std::string::npos);
}

TEST_CASE("homogeneous run is ballistic") {
  RunConfig c;
  c.model = Model::homogeneous;
  c.steps = 3000;
  c.output_dir = scratch_dir("homogeneous");
  const RunArtifacts art = run_evolution(c);
  CHECK(art.rows.back().fit_status == "moments");
  const ExponentEstimate e = estimate_exponent(art.series, 100, 3000);
  CHECK(std::abs(e.exponent - 1.0) < 0.02);
}

TEST_CASE("continuum runs track the self-similar width") {
  RunConfig c;
  c.model = Model::pme;
  c.m = 2.0;
  c.sigma0 = 20.0;
  c.steps = 20000;
  c.measure_from = 1000;
  c.output_dir = scratch_dir("pme_run");
  const RunArtifacts art = run_evolution(c);
  std::vector<double> t, s;
  for (const MeasurementRow& r : art.rows) {
    REQUIRE(r.fit);
    CHECK(std::abs(r.total_probability - 1.0) < 1e-9);
    CHECK(r.fit->q == 0.0);
    t.push_back(r.time);
    s.push_back(r.fit->sigma_q);
  }
  // σ³ is affine in time for m = 2.
  const BarenblattProfile p0 = BarenblattProfile::make(0.0, 20.0, 0.0);
  const double t0 = p0.self_similar_time();
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(s[i] == doctest::Approx(p0.at_time(t[i]).sigma_q).epsilon(0.01));
  }
  CHECK(t.back() > 1.2 * t0);
}

TEST_CASE("sweep plumbing") {
  SweepConfig c;
  c.resolution = 2;
  c.steps_a = 300;
  c.steps_b = 3000;
  c.workers = 1;
  const SweepResult r = run_sweep(c);
  CHECK(r.points.size() == 4);
  for (int b = 0; b < 2; ++b) {
    for (int g = 0; g < 2; ++g) {
      const SweepPoint& p = r.at(b, g);
      CHECK(p.beta == b);
      CHECK(p.gamma == g);
      CHECK_FALSE(p.status.empty());
      if (p.localized) CHECK_FALSE(p.q_estimate);
    }
  }
  CHECK_THROWS_AS(r.at(2, 0), Error);
  const std::string csv = sweep_to_csv(r);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

  SweepConfig bad = c;
  bad.resolution = 1;
  CHECK(code_of([&] { run_sweep(bad); }) == ErrorCode::configuration);
  bad = c;
  bad.steps_b = bad.steps_a;
  CHECK(code_of([&] { run_sweep(bad); }) == ErrorCode::configuration);
}

TEST_CASE("trivial initial states are flagged as localized") {
  SweepConfig c;
  c.resolution = 3;
  c.steps_a = 300;
  c.steps_b = 3000;
  // β = 0.5 with γ = 0 or 1: b alone on site 0, a alone on site 1.
  for (auto [b, g] : {std::pair{1, 0}, std::pair{1, 2}}) {
    const SweepPoint p = run_sweep_point(c, b, g);
    CHECK(p.localized);
    CHECK_FALSE(p.fit_ok);
    CHECK_FALSE(p.q_estimate);
    CHECK(p.std_at_t1 == p.std_at_t2);
  }
  const SweepPoint spreading = run_sweep_point(c, 0, 1);
  CHECK_FALSE(spreading.localized);
  CHECK(spreading.std_at_t2 > 2.0 * spreading.std_at_t1);
}

TEST_CASE("sweep results do not depend on the worker count") {
  SweepConfig c;
  c.resolution = 3;
  c.steps_a = 200;
  c.steps_b = 2000;
  c.workers = 1;
  const std::string serial = sweep_to_csv(run_sweep(c));
  c.workers = 3;
  CHECK(sweep_to_csv(run_sweep(c)) == serial);
  c.workers = 0;
  ::setenv(kWorkersEnv, "2", 1);
  CHECK(resolve_workers(0) == 2);
  CHECK(sweep_to_csv(run_sweep(c)) == serial);
  ::setenv(kWorkersEnv, "0", 1);
  CHECK(code_of([] { (void)resolve_workers(0); }) == ErrorCode::configuration);
  ::unsetenv(kWorkersEnv);
  CHECK(resolve_workers(5) == 5);
  CHECK(resolve_workers(0) >= 1);
}

TEST_CASE("command-line driver") {
  const fs::path dir = scratch_dir("cli");
  fs::create_directories(dir);
  const std::string cli = FFQW_CLI_PATH;
  auto run = [&](const std::string& args, const std::string& tag) {
    const std::string cmd = "'" + cli + "' " + args + " > '" + (dir / (tag + ".out")).string() + "' 2> '" +
                            (dir / (tag + ".err")).string() + "'";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };

  // Config file with a flag override.
  write_file_atomic(dir / "config.json", R"({"model": "markov", "steps": 400, "q_fixed": 0.0})");
  CHECK(run("markov --config '" + (dir / "config.json").string() + "' --steps 600 -o '" + (dir / "m").string() + "'",
            "markov") == 0);
  const auto summary = nlohmann::json::parse(read_file(dir / "markov.out"));
  CHECK(summary["t"] == 600);
  CHECK(summary["model"] == "markov");
  CHECK(nlohmann::json::parse(read_file(dir / "m" / "manifest.json"))["config"]["q_fixed"] == 0.0);

  CHECK(run("fit '" + (dir / "m" / "final_distribution.csv").string() + "' --q-fixed 0", "fit") == 0);
  CHECK(nlohmann::json::parse(read_file(dir / "fit.out"))["q"] == 0.0);

  CHECK(run("walk --steps 0 -o '" + (dir / "w").string() + "'", "bad") == 1);
  const auto err = nlohmann::json::parse(read_file(dir / "bad.err"));
  CHECK(err["error"]["code"] == "configuration");

  CHECK(run("walk --no-such-flag", "usage") != 0);
  CHECK(nlohmann::json::parse(read_file(dir / "usage.err"))["error"]["code"] == "usage");

  CHECK(run("fit '" + (dir / "missing.csv").string() + "'", "io") == 1);
  CHECK(nlohmann::json::parse(read_file(dir / "io.err"))["error"]["code"] == "io");
}
