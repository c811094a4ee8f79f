// wavebench: synthesize speed fields, generate and smooth trajectories,
// estimate emissions and run the gap-budget benchmark.

#include <atomic>
#include <chrono>
#include <csignal>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wavebench/benchmark.hpp"
#include "wavebench/config.hpp"
#include "wavebench/emissions.hpp"
#include "wavebench/smoother.hpp"
#include "wavebench/speed_field.hpp"
#include "wavebench/trajectory.hpp"
#include "wavebench/units.hpp"

namespace fs = std::filesystem;
using namespace wavebench;

namespace {

constexpr int kExitData = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInterrupted = 130;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::atomic<bool> g_interrupted{false};

extern "C" void OnSigint(int) { g_interrupted.store(true); }

std::string UtcNow() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void RequireFile(const std::string& path) {
  if (!fs::is_regular_file(path)) throw std::runtime_error("cannot read '" + path + "'");
}

void EnsureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create directory '" + dir.string() + "'");
}

BenchmarkConfig LoadConfigOrDefault(const std::string& path) {
  if (path.empty()) return {};
  RequireFile(path);
  return LoadConfig(path);
}

// ---- synth ----

struct SynthArgs {
  WaveScenario scenario;
  double duration = 0.0;
  double length = 0.0;
  std::string out;
};

int RunSynth(const SynthArgs& a) {
  const SpeedField f = SynthesizeField(a.scenario, a.duration, a.length);
  SaveField(f, a.out);
  std::cout << "wrote " << a.out << " (" << f.n_t() << " x " << f.n_x() << " nodes)\n";
  return 0;
}

// ---- trajectories ----

struct TrajectoriesArgs {
  std::string field;
  double interval = 4.0;
  double step = kDefaultIntegrationStep;
  std::string out_dir;
  std::string ingest_unit = "m/s";
};

int RunTrajectories(const TrajectoriesArgs& a) {
  RequireFile(a.field);
  if (!(a.interval > 0.0)) throw UsageError("--interval must be positive");
  const SpeedField f = LoadField(a.field, units::ParseUnit(a.ingest_unit));
  EnsureDir(a.out_dir);
  std::size_t written = 0, degenerate = 0;
  for (const Seed& s : SeedSchedule(f, a.interval)) {
    Trajectory t;
    try {
      t = Resample1Hz(IntegrateTrajectory(f, s.t, s.x, a.step));
    } catch (const DegenerateTrajectory&) {
      ++degenerate;
      continue;
    }
    t.lane = f.lane();
    char name[64];
    std::snprintf(name, sizeof name, "traj_%06zu.csv", written);
    SaveTrajectory(t, fs::path(a.out_dir) / name);
    ++written;
  }
  std::cout << written << " trajectories written";
  if (degenerate) std::cout << " (" << degenerate << " degenerate skipped)";
  std::cout << "\n";
  return 0;
}

// ---- smooth ----

struct SmoothArgs {
  std::string input;
  double lambda = kDefaultLambda;
  std::optional<double> gap_mi, gap_m;
  std::string out;
  std::string config;
};

int RunSmooth(const SmoothArgs& a) {
  if (a.gap_mi.has_value() == a.gap_m.has_value()) throw UsageError("give exactly one of --gap-mi or --gap-m");
  RequireFile(a.input);
  const BenchmarkConfig cfg = LoadConfigOrDefault(a.config);
  const double gap = a.gap_m ? *a.gap_m : units::MilesToMeters(*a.gap_mi);
  if (!(gap >= 0.0)) throw UsageError("gap must be >= 0");
  if (!(a.lambda >= 0.0)) throw UsageError("--lambda must be >= 0");
  const Trajectory ref = LoadTrajectory(a.input);

  const SmoothResult r = SmoothDetailed(ref, a.lambda, gap, cfg.solver);
  if (r.reference.corrected()) {
    std::cerr << "note: reference moved backwards; preprocessing raised positions by up to "
              << io::FormatDouble(r.reference.max_correction) << " m\n";
  }
  const SmoothingProblem problem = BuildProblem(r.reference, a.lambda, gap);
  nlohmann::json stats;
  stats["status"] = ToString(r.solution.status);
  stats["iterations"] = r.solution.iterations;
  stats["objective"] = r.solution.objective;
  stats["reference_objective"] = r.reference_objective;
  stats["polished"] = r.solution.polished;
  stats["primal_residual"] = r.solution.primal_residual;
  stats["dual_residual"] = r.solution.dual_residual;
  stats["max_constraint_violation_m"] = MaxConstraintViolation(problem, r.solution.x);
  stats["lambda"] = a.lambda;
  stats["gap_m"] = gap;
  stats["preprocessing"] = {{"corrected", r.reference.corrected()}, {"max_correction_m", r.reference.max_correction}};
  std::cout << stats.dump(2) << "\n";
  if (r.solution.status != SolveStatus::kOptimal) {
    std::cerr << "error: solver did not reach a certified optimum; no output written\n";
    return kExitData;
  }
  SaveTrajectory(r.benchmark, a.out);
  return 0;
}

// ---- emit ----

struct EmitArgs {
  std::string input;
  std::string rates;
  std::string config;
  std::string out;
};

nlohmann::json EmissionJson(const EmissionResult& e, const Trajectory& t) {
  nlohmann::json j;
  nlohmann::json totals = nlohmann::json::object();
  for (Pollutant p : kPollutants) totals[std::string(Name(p))] = e.total(p);
  j["totals_g"] = totals;
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [mode, n] : e.opmode_histogram) hist[std::to_string(mode)] = n;
  j["opmode_histogram"] = hist;
  j["sample_count"] = e.sample_count;
  j["duration_s"] = t.duration();
  return j;
}

int RunEmit(const EmitArgs& a) {
  RequireFile(a.input);
  RequireFile(a.rates);
  const BenchmarkConfig cfg = LoadConfigOrDefault(a.config);
  const Trajectory t = LoadTrajectory(a.input);
  const OpModeRateTable table = LoadRateTable(a.rates);
  table.RequireComplete();
  const EmissionResult e = EstimateEmissions(t, cfg.vsp, table, cfg.thresholds);
  nlohmann::json j = EmissionJson(e, t);
  j["rate_table_metadata"] = table.metadata();
  const std::string text = j.dump(2) + "\n";
  if (a.out.empty()) std::cout << text;
  else io::WriteFileAtomic(a.out, text);
  return 0;
}

// ---- benchmark ----

struct BenchmarkArgs {
  std::string manifest;
  std::string config;
  std::string rates;
  std::string out_dir;
  unsigned jobs = 1;
  std::optional<double> lambda;
  std::vector<double> gap_mi;
  std::optional<double> speed_filter_mph;
  std::optional<double> interval;
  bool timestamp = true;
};

int RunBenchmark(const BenchmarkArgs& a) {
  // Validate everything up front.
  RequireFile(a.manifest);
  BenchmarkConfig cfg = LoadConfigOrDefault(a.config);
  if (a.lambda) cfg.lambda = *a.lambda;
  if (!a.gap_mi.empty()) {
    cfg.gap_budgets.clear();
    for (double g : a.gap_mi) cfg.gap_budgets.push_back(units::MilesToMeters(g));
  }
  if (a.speed_filter_mph) cfg.speed_filter = units::MphToMps(*a.speed_filter_mph);
  if (a.interval) cfg.seed_interval = *a.interval;
  cfg.Validate();

  OpModeRateTable table = SyntheticRateTable();
  if (!a.rates.empty()) {
    RequireFile(a.rates);
    table = LoadRateTable(a.rates);
  }
  table.RequireComplete();

  const fs::path manifest_dir = fs::path(a.manifest).parent_path();
  const auto entries = ParseManifest(io::ReadFile(a.manifest));
  if (entries.empty()) throw FormatError("manifest lists no fields");
  std::vector<SpeedField> fields;
  for (const auto& e : entries) {
    fs::path p = e.field_path;
    if (p.is_relative()) p = manifest_dir / p;
    RequireFile(p.string());
    try {
      fields.push_back(LoadField(p).WithLabels(e.lane, e.date));
    } catch (const FormatError& err) {
      throw FormatError(p.string() + ": " + err.what());
    }
  }
  EnsureDir(a.out_dir);

  std::signal(SIGINT, OnSigint);
  std::vector<DayResult> days;
  for (std::size_t i = 0; i < fields.size() && !g_interrupted.load(); ++i) {
    std::cerr << "[" << i + 1 << "/" << fields.size() << "] " << entries[i].date << " lane " << entries[i].lane
              << "\n";
    days.push_back(RunDay(fields[i], cfg, table, a.jobs, &g_interrupted));
  }
  const bool interrupted = g_interrupted.load() || days.size() < fields.size() ||
                           std::any_of(days.begin(), days.end(), [](const DayResult& d) { return !d.complete; });

  nlohmann::json report = BuildReport(days, cfg, table);
  if (interrupted) report["complete"] = false;
  if (a.timestamp) report["generated_at"] = UtcNow();
  const std::string suffix = interrupted ? ".incomplete" : "";
  io::WriteFileAtomic(fs::path(a.out_dir) / ("report" + suffix + ".json"), report.dump(2) + "\n");
  io::WriteFileAtomic(fs::path(a.out_dir) / ("trajectories" + suffix + ".csv"), FormatTrajectoryCsv(days));
  if (interrupted) {
    std::cerr << "interrupted; partial results written with the .incomplete suffix\n";
    return kExitInterrupted;
  }
  std::size_t eligible = 0;
  for (const auto& d : days) eligible += d.eligible();
  std::cout << days.size() << " day(s), " << eligible << " eligible trajectories\n";
  return 0;
}

// ---- report ----

struct ReportArgs {
  std::string input;
  std::string out_dir;
};

std::string Cell(const nlohmann::json& v) {
  if (v.is_null()) return "";
  if (v.is_number_float()) return io::FormatDouble(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

int RunReport(const ReportArgs& a) {
  RequireFile(a.input);
  nlohmann::json r;
  try {
    r = nlohmann::json::parse(io::ReadFile(a.input));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report is not valid JSON: ") + e.what());
  }
  for (const char* key : {"days", "tradeoff", "hexbin", "config"}) {
    if (!r.contains(key)) throw FormatError(std::string("report has no '") + key + "' entry");
  }
  EnsureDir(a.out_dir);
  const std::vector<std::string> pollutants{"CO2", "CO", "HC", "NOx"};

  std::string lanes = "date,lane,seeds,degenerate,filtered,eligible\n";
  std::string quant = "date,lane,gap_m,pollutant,count,mean";
  const auto& levels = r["config"]["quantiles"];
  for (const auto& q : levels) quant += ",q" + Cell(q);
  quant += ",day_total_reduction\n";
  for (const auto& d : r["days"]) {
    lanes += Cell(d["date"]) + "," + Cell(d["lane"]) + "," + Cell(d["seeds"]) + "," + Cell(d["degenerate"]) + "," +
             Cell(d["filtered"]) + "," + Cell(d["eligible"]) + "\n";
    for (const auto& b : d["budgets"]) {
      for (const auto& p : pollutants) {
        const auto& jp = b["reduction"][p];
        quant += Cell(d["date"]) + "," + Cell(d["lane"]) + "," + Cell(b["gap_m"]) + "," + p + "," + Cell(jp["count"]) +
                 "," + Cell(jp["mean"]);
        for (const auto& q : levels) quant += "," + Cell(jp["quantiles"][Cell(q)]);
        quant += "," + Cell(jp["day_total_reduction"]) + "\n";
      }
    }
  }

  std::string trade = "lane,gap_m,count";
  for (const auto& p : pollutants) trade += "," + p;
  trade += "\n";
  for (const auto& c : r["tradeoff"]) {
    for (const auto& pt : c["points"]) {
      trade += Cell(c["lane"]) + "," + Cell(pt["gap_m"]) + "," + Cell(pt["count"]);
      for (const auto& p : pollutants) trade += "," + Cell(pt["mean_reduction"][p]);
      trade += "\n";
    }
  }

  std::string hex = "gap_m,mean_speed_lo_mps,speed_std_lo_mps,count,mean_co2_reduction\n";
  for (const auto& h : r["hexbin"]) {
    for (const auto& c : h["cells"]) {
      hex += Cell(h["gap_m"]) + "," + Cell(c["mean_speed_lo_mps"]) + "," + Cell(c["speed_std_lo_mps"]) + "," +
             Cell(c["count"]) + "," + Cell(c["mean_co2_reduction"]) + "\n";
    }
  }
  const fs::path dir = a.out_dir;
  io::WriteFileAtomic(dir / "lanes.csv", lanes);
  io::WriteFileAtomic(dir / "quantiles.csv", quant);
  io::WriteFileAtomic(dir / "tradeoff.csv", trade);
  io::WriteFileAtomic(dir / "hexbin.csv", hex);
  std::cout << "wrote lanes.csv, quantiles.csv, tradeoff.csv, hexbin.csv to " << a.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gap-constrained smoothing benchmark for traffic wave emissions"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Synthesize a speed field with travelling waves");
  c_synth->add_option("--waves", synth.scenario.wave_count, "Number of waves")->required()->check(CLI::NonNegativeNumber);
  c_synth->add_option("--amplitude", synth.scenario.wave_amplitude, "Wave depth, m/s")->default_val(0.0);
  c_synth->add_option("--base", synth.scenario.base_speed, "Free-flow speed, m/s")->required();
  c_synth->add_option("--duration", synth.duration, "Window length, s")->required();
  c_synth->add_option("--length", synth.length, "Road length, m")->required();
  c_synth->add_option("--seed", synth.scenario.seed, "Random seed")->default_val(0);
  c_synth->add_option("--width-t", synth.scenario.wave_width_t, "Wave lifetime, s")->default_val(1800.0);
  c_synth->add_option("--width-x", synth.scenario.wave_width_x, "Wave thickness, m")->default_val(300.0);
  c_synth->add_option("--propagation", synth.scenario.wave_propagation_speed, "Wave speed, m/s (negative = upstream)")
      ->default_val(-4.5);
  c_synth->add_option("--noise", synth.scenario.free_flow_noise, "Per-cell noise std, m/s")->default_val(0.0);
  c_synth->add_option("--lane", synth.scenario.lane, "Lane label")->default_val(1);
  c_synth->add_option("--date", synth.scenario.date_label, "Date label");
  c_synth->add_option("-o,--output", synth.out, "Output field file")->required();

  TrajectoriesArgs traj;
  auto* c_traj = app.add_subcommand("trajectories", "Integrate virtual trajectories through a field");
  c_traj->add_option("field", traj.field, "Speed field file")->required();
  c_traj->add_option("--interval", traj.interval, "Seed interval, s")->default_val(4.0);
  c_traj->add_option("--step", traj.step, "Integration step, s")->default_val(kDefaultIntegrationStep);
  c_traj->add_option("--ingest-unit", traj.ingest_unit, "Unit of the field's speed values (m/s, mph, km/h)")
      ->default_val("m/s");
  c_traj->add_option("-o,--out-dir", traj.out_dir, "Output directory")->required();

  SmoothArgs smooth;
  auto* c_smooth = app.add_subcommand("smooth", "Compute the benchmark trajectory for one reference");
  c_smooth->add_option("trajectory", smooth.input, "Reference trajectory file")->required();
  c_smooth->add_option("--lambda", smooth.lambda, "Jerk weight")->default_val(kDefaultLambda);
  c_smooth->add_option("--gap-mi", smooth.gap_mi, "Maximum gap, miles");
  c_smooth->add_option("--gap-m", smooth.gap_m, "Maximum gap, meters");
  c_smooth->add_option("--config", smooth.config, "Config file ([solver] section)");
  c_smooth->add_option("-o,--output", smooth.out, "Benchmark trajectory file")->required();

  EmitArgs emit;
  auto* c_emit = app.add_subcommand("emit", "Estimate emissions of a 1 Hz trajectory");
  c_emit->add_option("trajectory", emit.input, "Trajectory file")->required();
  c_emit->add_option("--rates", emit.rates, "Rate table CSV")->required();
  c_emit->add_option("--config", emit.config, "Config file ([vsp], [opmode])");
  c_emit->add_option("-o,--output", emit.out, "Write JSON here instead of standard output");

  BenchmarkArgs bench;
  auto* c_bench = app.add_subcommand("benchmark", "Run the gap-budget sweep over a manifest of fields");
  c_bench->add_option("manifest", bench.manifest, "Manifest CSV: field,lane,date")->required();
  c_bench->add_option("--config", bench.config, "Config file");
  c_bench->add_option("--rates", bench.rates, "Rate table CSV (default: built-in synthetic table)");
  c_bench->add_option("--jobs", bench.jobs, "Worker threads")->default_val(1u)->check(CLI::PositiveNumber);
  c_bench->add_option("--lambda", bench.lambda, "Override jerk weight");
  c_bench->add_option("--gap-mi", bench.gap_mi, "Override gap budgets, miles")->delimiter(',');
  c_bench->add_option("--speed-filter-mph", bench.speed_filter_mph, "Override the mean-speed filter, mph");
  c_bench->add_option("--interval", bench.interval, "Override the seed interval, s");
  c_bench->add_flag("!--no-timestamp", bench.timestamp, "Omit generated_at from the report");
  c_bench->add_option("-o,--out-dir", bench.out_dir, "Output directory")->required();

  ReportArgs rep;
  auto* c_rep = app.add_subcommand("report", "Write plot-ready CSV tables from a report JSON");
  c_rep->add_option("report", rep.input, "report.json")->required();
  c_rep->add_option("-o,--out-dir", rep.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (c_synth->parsed()) return RunSynth(synth);
    if (c_traj->parsed()) return RunTrajectories(traj);
    if (c_smooth->parsed()) return RunSmooth(smooth);
    if (c_emit->parsed()) return RunEmit(emit);
    if (c_bench->parsed()) return RunBenchmark(bench);
    if (c_rep->parsed()) return RunReport(rep);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
