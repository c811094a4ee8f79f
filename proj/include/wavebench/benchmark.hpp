#pragma once

// Per-day benchmark runs and the aggregations over them.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "wavebench/emissions.hpp"
#include "wavebench/errors.hpp"
#include "wavebench/io.hpp"
#include "wavebench/smoother.hpp"
#include "wavebench/speed_field.hpp"
#include "wavebench/trajectory.hpp"
#include "wavebench/units.hpp"

namespace wavebench {

struct BenchmarkConfig {
  double lambda = kDefaultLambda;
  std::vector<double> gap_budgets{units::MilesToMeters(0.01), units::MilesToMeters(0.02),
                                  units::MilesToMeters(0.05), units::MilesToMeters(0.1),
                                  units::MilesToMeters(0.2),  units::MilesToMeters(0.5)};
  double speed_filter = units::MphToMps(50.0);  // eligible if mean speed is below
  double seed_interval = 4.0;
  double integration_step = kDefaultIntegrationStep;
  std::vector<double> quantiles{0.05, 0.25, 0.75, 0.95};
  double hexbin_mean_speed_width = 2.0;  // m/s
  double hexbin_speed_std_width = 1.0;   // m/s
  SolverSettings solver;
  VspParams vsp;
  OpModeThresholds thresholds;

  void Validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
    if (gap_budgets.empty()) throw ConfigError("at least one gap budget is required");
    for (std::size_t i = 0; i < gap_budgets.size(); ++i) {
      if (!(gap_budgets[i] >= 0.0) || !std::isfinite(gap_budgets[i])) throw ConfigError("gap budgets must be >= 0");
      if (i > 0 && !(gap_budgets[i] > gap_budgets[i - 1])) throw ConfigError("gap budgets must be strictly increasing");
    }
    if (!(speed_filter > 0.0)) throw ConfigError("speed filter must be positive");
    if (!(seed_interval > 0.0)) throw ConfigError("seed interval must be positive");
    if (!(integration_step > 0.0) || integration_step > 1.0) throw ConfigError("integration step must lie in (0, 1] s");
    for (std::size_t i = 0; i < quantiles.size(); ++i) {
      if (!(quantiles[i] > 0.0 && quantiles[i] < 1.0)) throw ConfigError("quantiles must lie in (0, 1)");
      if (i > 0 && !(quantiles[i] > quantiles[i - 1])) throw ConfigError("quantiles must be sorted");
    }
    if (!(hexbin_mean_speed_width > 0.0) || !(hexbin_speed_std_width > 0.0)) {
      throw ConfigError("hexbin widths must be positive");
    }
    if (solver.max_iterations < 1) throw ConfigError("solver max_iterations must be >= 1");
    vsp.Validate();
  }
};

using PollutantValues = std::array<double, kPollutants.size()>;
using PollutantReductions = std::array<std::optional<double>, kPollutants.size()>;

struct BudgetOutcome {
  double gap = 0.0;  // meters
  SolveStatus status = SolveStatus::kMaxIterations;
  int iterations = 0;
  double objective = 0.0;
  PollutantValues benchmark_g{};
  PollutantReductions reduction{};

  bool ok() const { return status == SolveStatus::kOptimal; }
};

struct TrajectoryRecord {
  double seed_time = 0.0;
  std::size_t samples = 0;  // velocity samples
  double mean_speed = 0.0;
  double speed_std = 0.0;
  bool corrected = false;
  double reference_objective = 0.0;
  PollutantValues empirical_g{};
  std::vector<BudgetOutcome> budgets;  // same order as the config
};

struct DayResult {
  std::string date;
  int lane = 1;
  std::size_t seeds = 0;
  std::size_t degenerate = 0;
  std::size_t filtered = 0;
  std::vector<TrajectoryRecord> records;  // eligible trajectories in seed order
  bool complete = true;

  std::size_t eligible() const { return records.size(); }
};

namespace detail {

enum class SeedOutcome { kPending, kDegenerate, kFiltered, kEligible };

inline SeedOutcome ProcessSeed(const SpeedField& field, const Seed& seed, const BenchmarkConfig& cfg,
                               const OpModeRateTable& table, TrajectoryRecord& rec) {
  Trajectory empirical;
  try {
    empirical = Resample1Hz(IntegrateTrajectory(field, seed.t, seed.x, cfg.integration_step));
    if (empirical.intervals() < kMinIntervals) return SeedOutcome::kDegenerate;
  } catch (const DegenerateTrajectory&) {
    return SeedOutcome::kDegenerate;
  }
  const Trajectory reference = PreprocessReference(empirical);
  const Kinematics kin = ComputeKinematics(reference);
  if (!(kin.mean_speed < cfg.speed_filter)) return SeedOutcome::kFiltered;

  rec.seed_time = seed.t;
  rec.samples = kin.velocities.size();
  rec.mean_speed = kin.mean_speed;
  rec.speed_std = kin.speed_std;
  rec.corrected = reference.corrected();
  const EmissionResult emp = EstimateEmissions(reference, cfg.vsp, table, cfg.thresholds);
  rec.empirical_g = emp.totals_g;

  std::vector<double> warm;
  for (double gap : cfg.gap_budgets) {
    const SmoothingProblem problem = BuildProblem(reference, cfg.lambda, gap);
    rec.reference_objective = ObjectiveValue(problem, problem.x_ref);
    QpSolution sol = warm.empty() ? Solve(problem, cfg.solver)
                                  : Solve(problem, cfg.solver, std::span<const double>(warm));
    BudgetOutcome out;
    out.gap = gap;
    out.status = sol.status;
    out.iterations = sol.iterations;
    out.objective = sol.objective;
    if (sol.status == SolveStatus::kOptimal) {
      Trajectory bench = reference;
      bench.positions = sol.x;
      bench.source = TrajectorySource::kBenchmark;
      bench.gap_budget = gap;
      const EmissionResult b = EstimateEmissions(bench, cfg.vsp, table, cfg.thresholds);
      out.benchmark_g = b.totals_g;
      out.reduction = EmissionDelta(emp, b);
      warm = std::move(sol.x);
    }
    rec.budgets.push_back(std::move(out));
  }
  return SeedOutcome::kEligible;
}

}  // namespace detail

/// Seeds, integrates, filters and smooths every trajectory of one field.
/// Work is spread over `jobs` threads; results are ordered by seed time
/// whatever the thread count. Setting `*cancel` stops early and marks the
/// result incomplete.
inline DayResult RunDay(const SpeedField& field, const BenchmarkConfig& cfg, const OpModeRateTable& table,
                        unsigned jobs = 1, const std::atomic<bool>* cancel = nullptr) {
  cfg.Validate();
  table.RequireComplete();
  const std::vector<Seed> seeds = SeedSchedule(field, cfg.seed_interval);
  std::vector<detail::SeedOutcome> outcome(seeds.size(), detail::SeedOutcome::kPending);
  std::vector<TrajectoryRecord> records(seeds.size());

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      if ((cancel && cancel->load()) || failed.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= seeds.size()) return;
      try {
        outcome[i] = detail::ProcessSeed(field, seeds[i], cfg, table, records[i]);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, seeds.size()))));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  DayResult day;
  day.date = field.date_label();
  day.lane = field.lane();
  day.seeds = seeds.size();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    switch (outcome[i]) {
      case detail::SeedOutcome::kPending: day.complete = false; break;
      case detail::SeedOutcome::kDegenerate: ++day.degenerate; break;
      case detail::SeedOutcome::kFiltered: ++day.filtered; break;
      case detail::SeedOutcome::kEligible: day.records.push_back(std::move(records[i])); break;
    }
  }
  return day;
}

struct Bands {
  double mean = 0.0;
  std::vector<double> quantiles;  // one per configured level
  std::size_t count = 0;
};

/// Linear-interpolation quantiles (h = (n - 1) p) plus the mean.
inline Bands AggregateQuantiles(std::vector<double> values, const std::vector<double>& levels) {
  Bands b;
  b.count = values.size();
  if (values.empty()) {
    b.quantiles.assign(levels.size(), std::nan(""));
    b.mean = std::nan("");
    return b;
  }
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  b.mean = sum / static_cast<double>(values.size());
  for (double p : levels) {
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    b.quantiles.push_back(values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]));
  }
  return b;
}

/// Reductions of one pollutant at one budget over the successful solves.
inline std::vector<double> Reductions(const std::vector<TrajectoryRecord>& records, std::size_t budget, Pollutant p) {
  std::vector<double> out;
  for (const auto& r : records) {
    const BudgetOutcome& b = r.budgets.at(budget);
    const auto& red = b.reduction[static_cast<std::size_t>(p)];
    if (b.ok() && red) out.push_back(*red);
  }
  return out;
}

struct TradeoffPoint {
  double gap = 0.0;
  std::size_t count = 0;
  PollutantReductions mean_reduction{};
};

struct TradeoffCurve {
  int lane = 1;
  std::vector<TradeoffPoint> points;  // ascending gap
};

/// Mean reduction per lane and budget, pooled over days and weighted by
/// trajectory.
inline std::vector<TradeoffCurve> SweepTradeoff(const std::vector<DayResult>& days, const std::vector<double>& gaps) {
  std::map<int, std::vector<const TrajectoryRecord*>> by_lane;
  for (const auto& d : days) {
    for (const auto& r : d.records) by_lane[d.lane].push_back(&r);
  }
  std::vector<TradeoffCurve> curves;
  for (const auto& [lane, recs] : by_lane) {
    TradeoffCurve c;
    c.lane = lane;
    for (std::size_t g = 0; g < gaps.size(); ++g) {
      TradeoffPoint pt;
      pt.gap = gaps[g];
      for (Pollutant p : kPollutants) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const TrajectoryRecord* r : recs) {
          const BudgetOutcome& b = r->budgets.at(g);
          const auto& red = b.reduction[static_cast<std::size_t>(p)];
          if (b.ok() && red) sum += *red, ++n;
        }
        if (n > 0) pt.mean_reduction[static_cast<std::size_t>(p)] = sum / static_cast<double>(n);
        if (p == Pollutant::kCO2) pt.count = n;
      }
      c.points.push_back(pt);
    }
    curves.push_back(std::move(c));
  }
  return curves;
}

struct HexbinCell {
  long mean_bin = 0;  // floor(mean_speed / width)
  long std_bin = 0;   // floor(speed_std / width)
  std::size_t count = 0;
  double mean_reduction = 0.0;  // CO2, percent

  double mean_speed_lo(double w) const { return static_cast<double>(mean_bin) * w; }
  double speed_std_lo(double w) const { return static_cast<double>(std_bin) * w; }
};

/// Rectangular (mean speed, speed std) bins of CO2 reduction at one budget.
/// A value on a bin edge belongs to the upper bin.
inline std::vector<HexbinCell> HexbinReduction(const std::vector<const TrajectoryRecord*>& records, std::size_t budget,
                                               double mean_width, double std_width) {
  std::map<std::pair<long, long>, std::pair<std::size_t, double>> cells;
  for (const TrajectoryRecord* r : records) {
    const BudgetOutcome& b = r->budgets.at(budget);
    const auto& red = b.reduction[static_cast<std::size_t>(Pollutant::kCO2)];
    if (!b.ok() || !red) continue;
    const auto key = std::make_pair(static_cast<long>(std::floor(r->mean_speed / mean_width)),
                                    static_cast<long>(std::floor(r->speed_std / std_width)));
    auto& [n, sum] = cells[key];
    ++n;
    sum += *red;
  }
  std::vector<HexbinCell> out;
  for (const auto& [key, v] : cells) {
    out.push_back({key.first, key.second, v.first, v.second / static_cast<double>(v.first)});
  }
  return out;
}

inline std::vector<const TrajectoryRecord*> AllRecords(const std::vector<DayResult>& days) {
  std::vector<const TrajectoryRecord*> out;
  for (const auto& d : days) {
    for (const auto& r : d.records) out.push_back(&r);
  }
  return out;
}

// ---- report output ----

inline nlohmann::json OptionalJson(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json PollutantJson(const PollutantReductions& r) {
  nlohmann::json j = nlohmann::json::object();
  for (Pollutant p : kPollutants) j[std::string(Name(p))] = OptionalJson(r[static_cast<std::size_t>(p)]);
  return j;
}

inline nlohmann::json PollutantJson(const PollutantValues& r) {
  nlohmann::json j = nlohmann::json::object();
  for (Pollutant p : kPollutants) j[std::string(Name(p))] = r[static_cast<std::size_t>(p)];
  return j;
}

inline nlohmann::json ConfigJson(const BenchmarkConfig& c) {
  nlohmann::json j;
  j["lambda"] = c.lambda;
  j["gap_budgets_m"] = c.gap_budgets;
  nlohmann::json mi = nlohmann::json::array();
  for (double g : c.gap_budgets) mi.push_back(units::MetersToMiles(g));
  j["gap_budgets_mi"] = mi;
  j["speed_filter_mps"] = c.speed_filter;
  j["seed_interval_s"] = c.seed_interval;
  j["integration_step_s"] = c.integration_step;
  j["quantiles"] = c.quantiles;
  j["hexbin_mean_speed_width_mps"] = c.hexbin_mean_speed_width;
  j["hexbin_speed_std_width_mps"] = c.hexbin_speed_std_width;
  j["solver"] = {{"rho", c.solver.rho},
                 {"sigma", c.solver.sigma},
                 {"alpha", c.solver.alpha},
                 {"eps_abs", c.solver.eps_abs},
                 {"eps_rel", c.solver.eps_rel},
                 {"max_iterations", c.solver.max_iterations},
                 {"adaptive_rho", c.solver.adaptive_rho},
                 {"polish", c.solver.polish}};
  j["vsp"] = {{"A", c.vsp.A},
              {"B", c.vsp.B},
              {"C", c.vsp.C},
              {"source_mass", c.vsp.source_mass},
              {"fixed_mass", c.vsp.fixed_mass},
              {"g", c.vsp.g},
              {"grade", c.vsp.grade}};
  j["opmode"] = {{"braking_instant_mph_s", c.thresholds.braking_instant_mph_s},
                 {"braking_sustained_mph_s", c.thresholds.braking_sustained_mph_s},
                 {"idle_speed_mph", c.thresholds.idle_speed_mph}};
  return j;
}

inline nlohmann::json BandsJson(const Bands& b, const std::vector<double>& levels) {
  nlohmann::json j;
  j["count"] = b.count;
  j["mean"] = b.count ? nlohmann::json(b.mean) : nlohmann::json(nullptr);
  nlohmann::json q = nlohmann::json::object();
  for (std::size_t i = 0; i < levels.size(); ++i) {
    q[io::FormatDouble(levels[i])] = b.count ? nlohmann::json(b.quantiles[i]) : nlohmann::json(nullptr);
  }
  j["quantiles"] = q;
  return j;
}

/// Everything except the timestamp is a function of the inputs.
inline nlohmann::json BuildReport(const std::vector<DayResult>& days, const BenchmarkConfig& cfg,
                                  const OpModeRateTable& table) {
  nlohmann::json report;
  report["complete"] = std::all_of(days.begin(), days.end(), [](const DayResult& d) { return d.complete; });
  report["config"] = ConfigJson(cfg);
  report["rate_table_metadata"] = table.metadata();

  nlohmann::json jdays = nlohmann::json::array();
  for (const DayResult& d : days) {
    nlohmann::json jd;
    jd["date"] = d.date;
    jd["lane"] = d.lane;
    jd["complete"] = d.complete;
    jd["seeds"] = d.seeds;
    jd["degenerate"] = d.degenerate;
    jd["filtered"] = d.filtered;
    jd["eligible"] = d.eligible();
    nlohmann::json jb = nlohmann::json::array();
    for (std::size_t g = 0; g < cfg.gap_budgets.size(); ++g) {
      nlohmann::json e;
      e["gap_m"] = cfg.gap_budgets[g];
      e["gap_mi"] = units::MetersToMiles(cfg.gap_budgets[g]);
      std::size_t processed = 0;
      std::map<std::string, std::size_t> skipped;
      PollutantValues emp_sum{}, bench_sum{};
      for (const auto& r : d.records) {
        const BudgetOutcome& b = r.budgets[g];
        if (!b.ok()) {
          ++skipped[ToString(b.status)];
          continue;
        }
        ++processed;
        for (std::size_t p = 0; p < kPollutants.size(); ++p) {
          emp_sum[p] += r.empirical_g[p];
          bench_sum[p] += b.benchmark_g[p];
        }
      }
      e["processed"] = processed;
      e["skipped"] = d.eligible() - processed;
      e["skipped_reasons"] = skipped;
      nlohmann::json per_pollutant = nlohmann::json::object();
      for (Pollutant p : kPollutants) {
        const std::size_t pi = static_cast<std::size_t>(p);
        nlohmann::json jp = BandsJson(AggregateQuantiles(Reductions(d.records, g, p), cfg.quantiles), cfg.quantiles);
        jp["empirical_total_g"] = emp_sum[pi];
        jp["benchmark_total_g"] = bench_sum[pi];
        jp["day_total_reduction"] =
            emp_sum[pi] > 0.0 ? nlohmann::json(100.0 * (emp_sum[pi] - bench_sum[pi]) / emp_sum[pi]) : nlohmann::json(nullptr);
        per_pollutant[std::string(Name(p))] = jp;
      }
      e["reduction"] = per_pollutant;
      jb.push_back(e);
    }
    jd["budgets"] = jb;
    jdays.push_back(jd);
  }
  report["days"] = jdays;

  nlohmann::json jcurves = nlohmann::json::array();
  for (const TradeoffCurve& c : SweepTradeoff(days, cfg.gap_budgets)) {
    nlohmann::json jc;
    jc["lane"] = c.lane;
    nlohmann::json pts = nlohmann::json::array();
    for (const TradeoffPoint& pt : c.points) {
      pts.push_back({{"gap_m", pt.gap}, {"count", pt.count}, {"mean_reduction", PollutantJson(pt.mean_reduction)}});
    }
    jc["points"] = pts;
    jcurves.push_back(jc);
  }
  report["tradeoff"] = jcurves;

  const auto all = AllRecords(days);
  nlohmann::json jhex = nlohmann::json::array();
  for (std::size_t g = 0; g < cfg.gap_budgets.size(); ++g) {
    nlohmann::json cells = nlohmann::json::array();
    for (const HexbinCell& c : HexbinReduction(all, g, cfg.hexbin_mean_speed_width, cfg.hexbin_speed_std_width)) {
      cells.push_back({{"mean_speed_lo_mps", c.mean_speed_lo(cfg.hexbin_mean_speed_width)},
                       {"speed_std_lo_mps", c.speed_std_lo(cfg.hexbin_speed_std_width)},
                       {"count", c.count},
                       {"mean_co2_reduction", c.mean_reduction}});
    }
    jhex.push_back({{"gap_m", cfg.gap_budgets[g]}, {"cells", cells}});
  }
  report["hexbin"] = jhex;
  return report;
}

inline std::string CsvHeader() {
  std::string h = "day,lane,seed_time,mean_speed,speed_std,gap_budget,status";
  for (Pollutant p : kPollutants) h += ",empirical_" + std::string(Name(p)) + "_g";
  for (Pollutant p : kPollutants) h += ",benchmark_" + std::string(Name(p)) + "_g";
  for (Pollutant p : kPollutants) h += ",reduction_" + std::string(Name(p)) + "_pct";
  return h + "\n";
}

/// One row per (trajectory, budget); speeds in m/s, gap in meters.
inline std::string FormatTrajectoryCsv(const std::vector<DayResult>& days) {
  std::string out = CsvHeader();
  for (const DayResult& d : days) {
    for (const TrajectoryRecord& r : d.records) {
      for (const BudgetOutcome& b : r.budgets) {
        out += d.date + "," + std::to_string(d.lane) + "," + io::FormatDouble(r.seed_time) + "," +
               io::FormatDouble(r.mean_speed) + "," + io::FormatDouble(r.speed_std) + "," + io::FormatDouble(b.gap) +
               "," + ToString(b.status);
        for (double v : r.empirical_g) out += "," + io::FormatDouble(v);
        for (std::size_t p = 0; p < kPollutants.size(); ++p) out += "," + (b.ok() ? io::FormatDouble(b.benchmark_g[p]) : "");
        for (const auto& red : b.reduction) out += "," + (b.ok() && red ? io::FormatDouble(*red) : "");
        out += "\n";
      }
    }
  }
  return out;
}

struct ManifestEntry {
  std::string field_path;
  int lane = 1;
  std::string date;
};

/// Lines of `field_path,lane,date`; '#' comments and blank lines skipped.
/// An optional header row starting with "field" is ignored.
inline std::vector<ManifestEntry> ParseManifest(std::string_view text) {
  std::vector<ManifestEntry> out;
  std::size_t line_no = 0;
  for (std::string_view rest = text; !rest.empty();) {
    const auto nl = rest.find('\n');
    std::string_view line = io::Trim(rest.substr(0, nl));
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto cells = io::Split(line, ',');
    if (cells.size() != 3) throw FormatError("manifest rows need field,lane,date", line_no);
    if (out.empty() && io::Trim(cells[0]) == "field") continue;
    const auto lane = io::ParseInt(cells[1]);
    if (!lane) throw FormatError("bad lane '" + std::string(io::Trim(cells[1])) + "'", line_no, 2);
    out.push_back({std::string(io::Trim(cells[0])), static_cast<int>(*lane), std::string(io::Trim(cells[2]))});
  }
  return out;
}

}  // namespace wavebench
