#pragma once

// Operating-mode emission model: vehicle specific power, speed/VSP binning
// into operating modes (plus braking and idling), and per-pollutant
// integration of g/hr rates over 1 Hz samples.
//
// Rate table CSV:
//   #regClassID=20            (optional metadata lines)
//   pollutant,opModeID,rate_g_per_hr
//   CO2,0,1500
//   ...

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wavebench/errors.hpp"
#include "wavebench/io.hpp"
#include "wavebench/trajectory.hpp"
#include "wavebench/units.hpp"

namespace wavebench {

enum class Pollutant { kCO2 = 0, kCO = 1, kHC = 2, kNOx = 3 };

inline constexpr std::array<Pollutant, 4> kPollutants{Pollutant::kCO2, Pollutant::kCO, Pollutant::kHC,
                                                      Pollutant::kNOx};

inline std::string_view Name(Pollutant p) {
  switch (p) {
    case Pollutant::kCO2: return "CO2";
    case Pollutant::kCO: return "CO";
    case Pollutant::kHC: return "HC";
    case Pollutant::kNOx: return "NOx";
  }
  return "?";
}

inline std::optional<Pollutant> ParsePollutant(std::string_view name) {
  for (Pollutant p : kPollutants) {
    if (Name(p) == name) return p;
  }
  return std::nullopt;
}

inline constexpr std::array<int, 23> kOpModeIds{0,  1,  11, 12, 13, 14, 15, 16, 21, 22, 23, 24,
                                                25, 27, 28, 29, 30, 33, 35, 37, 38, 39, 40};

inline constexpr int kBrakingMode = 0;
inline constexpr int kIdleMode = 1;

inline std::optional<std::size_t> OpModeIndex(int id) {
  for (std::size_t i = 0; i < kOpModeIds.size(); ++i) {
    if (kOpModeIds[i] == id) return i;
  }
  return std::nullopt;
}

/// Road-load and mass parameters. Defaults are light-duty passenger car
/// road-load coefficients, not calibrated values.
struct VspParams {
  double A = 0.156461;       // kW s/m
  double B = 0.00200193;     // kW s^2/m^2
  double C = 0.000492646;    // kW s^3/m^3
  double source_mass = 1.4788;  // tonnes
  double fixed_mass = 1.4788;   // tonnes
  double g = 9.8;               // m/s^2
  double grade = 0.0;           // radians

  void Validate() const {
    if (!(fixed_mass > 0.0)) throw ConfigError("vsp: fixed mass must be positive");
    if (!(A >= 0.0 && B >= 0.0 && C >= 0.0)) throw ConfigError("vsp: road load coefficients must be >= 0");
    if (!std::isfinite(source_mass) || !std::isfinite(g) || !std::isfinite(grade)) {
      throw ConfigError("vsp: parameters must be finite");
    }
  }
};

/// kW/tonne
inline double Vsp(double v, double a, const VspParams& p) {
  return (p.A * v + p.B * v * v + p.C * v * v * v + p.source_mass * (a + p.g * std::sin(p.grade)) * v) /
         p.fixed_mass;
}

/// Braking and idling thresholds, in mph and mph/s.
struct OpModeThresholds {
  double braking_instant_mph_s = -2.0;    // a <= this
  double braking_sustained_mph_s = -1.0;  // a, a_prev, a_prev2 all < this
  double idle_speed_mph = 1.0;            // v < this
};

/// Total over v >= 0: braking, then idling, then the speed-band / VSP grid.
/// Bin edges are left-closed, right-open.
inline int ClassifyOpMode(double v, double a, std::optional<double> a_prev, std::optional<double> a_prev2,
                          double vsp, const OpModeThresholds& th = {}) {
  const double a_mph = units::Convert(a, units::Unit::kMeterPerSecond2, units::Unit::kMphPerSecond);
  if (a_mph <= th.braking_instant_mph_s) return kBrakingMode;
  if (a_prev && a_prev2) {
    const double p1 = units::Convert(*a_prev, units::Unit::kMeterPerSecond2, units::Unit::kMphPerSecond);
    const double p2 = units::Convert(*a_prev2, units::Unit::kMeterPerSecond2, units::Unit::kMphPerSecond);
    if (a_mph < th.braking_sustained_mph_s && p1 < th.braking_sustained_mph_s &&
        p2 < th.braking_sustained_mph_s) {
      return kBrakingMode;
    }
  }
  const double v_mph = units::MpsToMph(v);
  if (v_mph < th.idle_speed_mph) return kIdleMode;

  if (v_mph < 25.0) {
    if (vsp < 0.0) return 11;
    if (vsp < 3.0) return 12;
    if (vsp < 6.0) return 13;
    if (vsp < 9.0) return 14;
    if (vsp < 12.0) return 15;
    return 16;
  }
  if (v_mph < 50.0) {
    if (vsp < 0.0) return 21;
    if (vsp < 3.0) return 22;
    if (vsp < 6.0) return 23;
    if (vsp < 9.0) return 24;
    if (vsp < 12.0) return 25;
    if (vsp < 18.0) return 27;
    if (vsp < 24.0) return 28;
    if (vsp < 30.0) return 29;
    return 30;
  }
  if (vsp < 6.0) return 33;
  if (vsp < 12.0) return 35;
  if (vsp < 18.0) return 37;
  if (vsp < 24.0) return 38;
  if (vsp < 30.0) return 39;
  return 40;
}

class OpModeRateTable {
 public:
  OpModeRateTable() {
    for (auto& row : rates_) row.fill(std::nullopt);
  }

  void Set(Pollutant p, int opmode, double rate_g_per_hr) {
    const auto idx = OpModeIndex(opmode);
    if (!idx) throw RejectedInput("unknown operating mode " + std::to_string(opmode));
    if (!(rate_g_per_hr >= 0.0) || !std::isfinite(rate_g_per_hr)) throw RejectedInput("rates must be finite and >= 0");
    rates_[static_cast<std::size_t>(p)][*idx] = rate_g_per_hr;
  }

  bool Has(Pollutant p, int opmode) const {
    const auto idx = OpModeIndex(opmode);
    return idx && rates_[static_cast<std::size_t>(p)][*idx].has_value();
  }

  /// g/hr; throws ConfigError when the key is missing.
  double Rate(Pollutant p, int opmode) const {
    const auto idx = OpModeIndex(opmode);
    if (!idx || !rates_[static_cast<std::size_t>(p)][*idx]) {
      throw ConfigError("rate table has no entry for " + std::string(Name(p)) + "/" + std::to_string(opmode));
    }
    return *rates_[static_cast<std::size_t>(p)][*idx];
  }

  std::vector<std::string> MissingKeys() const {
    std::vector<std::string> missing;
    for (Pollutant p : kPollutants) {
      for (int id : kOpModeIds) {
        if (!Has(p, id)) missing.push_back(std::string(Name(p)) + "/" + std::to_string(id));
      }
    }
    return missing;
  }

  void RequireComplete() const {
    const auto missing = MissingKeys();
    if (missing.empty()) return;
    std::string msg = "rate table incomplete; missing";
    for (const auto& k : missing) msg += " " + k;
    throw ConfigError(msg);
  }

  std::map<std::string, std::string>& metadata() { return metadata_; }
  const std::map<std::string, std::string>& metadata() const { return metadata_; }

 private:
  std::array<std::array<std::optional<double>, kOpModeIds.size()>, kPollutants.size()> rates_;
  std::map<std::string, std::string> metadata_;
};

inline OpModeRateTable ParseRateTable(std::string_view text) {
  OpModeRateTable table;
  bool header_seen = false;
  std::size_t line_no = 0;
  for (std::string_view rest = text; !rest.empty();) {
    const auto nl = rest.find('\n');
    std::string_view line = io::Trim(rest.substr(0, nl));
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto eq = line.find('=');
      if (eq != std::string_view::npos) {
        table.metadata()[std::string(io::Trim(line.substr(1, eq - 1)))] = std::string(io::Trim(line.substr(eq + 1)));
      }
      continue;
    }
    const auto cells = io::Split(line, ',');
    if (cells.size() != 3) throw FormatError("expected 3 columns", line_no);
    if (!header_seen) {
      if (io::Trim(cells[0]) != "pollutant" || io::Trim(cells[1]) != "opModeID" ||
          io::Trim(cells[2]) != "rate_g_per_hr") {
        throw FormatError("missing header row 'pollutant,opModeID,rate_g_per_hr'", line_no);
      }
      header_seen = true;
      continue;
    }
    const auto pollutant = ParsePollutant(io::Trim(cells[0]));
    if (!pollutant) throw FormatError("unknown pollutant '" + std::string(io::Trim(cells[0])) + "'", line_no, 1);
    const auto id = io::ParseInt(cells[1]);
    if (!id || !OpModeIndex(static_cast<int>(*id))) {
      throw FormatError("unknown opModeID '" + std::string(io::Trim(cells[1])) + "'", line_no, 2);
    }
    const auto rate = io::ParseDouble(cells[2]);
    if (!rate || !std::isfinite(*rate) || *rate < 0.0) throw FormatError("rate must be a number >= 0", line_no, 3);
    if (table.Has(*pollutant, static_cast<int>(*id))) throw FormatError("duplicate rate entry", line_no);
    table.Set(*pollutant, static_cast<int>(*id), *rate);
  }
  if (!header_seen) throw FormatError("rate table has no header row");
  return table;
}

inline OpModeRateTable LoadRateTable(const std::filesystem::path& path) { return ParseRateTable(io::ReadFile(path)); }

/// Made-up but physically ordered rates (higher VSP bin -> higher rate
/// within each speed band). For tests and demos only.
inline OpModeRateTable SyntheticRateTable() {
  // columns follow kOpModeIds
  static constexpr std::array<std::array<double, 23>, 4> kRates{{
      {1500, 1600, 2200, 3400, 4900, 6300, 7600, 10200, 2600, 4300, 5900, 7400,
       8800, 11000, 14500, 18000, 22000, 5200, 8800, 12000, 15500, 19000, 23000},
      {2.0, 1.5, 2.5, 4.0, 6.0, 9.0, 13.0, 25.0, 3.0, 5.0, 7.0, 10.0,
       14.0, 22.0, 35.0, 55.0, 90.0, 6.0, 12.0, 24.0, 40.0, 65.0, 100.0},
      {0.05, 0.04, 0.06, 0.08, 0.11, 0.15, 0.2, 0.35, 0.07, 0.1, 0.13, 0.17,
       0.22, 0.32, 0.45, 0.6, 0.8, 0.12, 0.2, 0.3, 0.45, 0.6, 0.85},
      {0.05, 0.03, 0.06, 0.1, 0.16, 0.24, 0.34, 0.6, 0.08, 0.14, 0.21, 0.3,
       0.4, 0.6, 0.9, 1.3, 1.8, 0.2, 0.38, 0.65, 1.0, 1.4, 1.9},
  }};
  OpModeRateTable t;
  for (Pollutant p : kPollutants) {
    for (std::size_t i = 0; i < kOpModeIds.size(); ++i) t.Set(p, kOpModeIds[i], kRates[static_cast<std::size_t>(p)][i]);
  }
  t.metadata()["source"] = "synthetic";
  t.metadata()["regClassID"] = "20";
  t.metadata()["shortModYrGroupID"] = "40";
  t.metadata()["ageGroupID"] = "405";
  t.metadata()["fuelType"] = "gasoline";
  return t;
}

inline std::string FormatRateTable(const OpModeRateTable& table) {
  std::string out;
  for (const auto& [k, v] : table.metadata()) out += "#" + k + "=" + v + "\n";
  out += "pollutant,opModeID,rate_g_per_hr\n";
  for (Pollutant p : kPollutants) {
    for (int id : kOpModeIds) {
      if (table.Has(p, id)) out += std::string(Name(p)) + "," + std::to_string(id) + "," + io::FormatDouble(table.Rate(p, id)) + "\n";
    }
  }
  return out;
}

struct EmissionResult {
  std::array<double, 4> totals_g{};
  std::map<int, std::size_t> opmode_histogram;
  std::size_t sample_count = 0;

  double total(Pollutant p) const { return totals_g[static_cast<std::size_t>(p)]; }
};

/// Sums rate(opmode_k) * dt over the N velocity samples of a 1 Hz
/// trajectory. Sample k uses v_k and a_min(k, N-2); the sustained-braking
/// rule looks back at the accelerations of the two previous samples.
inline EmissionResult EstimateEmissions(const Trajectory& traj, const VspParams& params,
                                        const OpModeRateTable& table, const OpModeThresholds& th = {}) {
  if (std::abs(traj.dt - 1.0) > 1e-9) throw RejectedInput("emission estimation needs a 1 Hz trajectory");
  table.RequireComplete();
  params.Validate();
  const Kinematics kin = ComputeKinematics(traj);
  const std::size_t n = kin.velocities.size();
  const std::size_t last_a = kin.accelerations.size() - 1;
  auto accel_of = [&](std::size_t k) { return kin.accelerations[std::min(k, last_a)]; };
  const double hours = units::SecondsToHours(traj.dt);

  EmissionResult result;
  result.sample_count = n;
  for (std::size_t k = 0; k < n; ++k) {
    const double v = std::max(0.0, kin.velocities[k]);
    const double a = accel_of(k);
    const std::optional<double> a_prev = k >= 1 ? std::optional<double>(accel_of(k - 1)) : std::nullopt;
    const std::optional<double> a_prev2 = k >= 2 ? std::optional<double>(accel_of(k - 2)) : std::nullopt;
    const int mode = ClassifyOpMode(v, a, a_prev, a_prev2, Vsp(v, a, params), th);
    ++result.opmode_histogram[mode];
    for (Pollutant p : kPollutants) result.totals_g[static_cast<std::size_t>(p)] += table.Rate(p, mode) * hours;
  }
  return result;
}

/// 100 (empirical - benchmark) / empirical per pollutant; nullopt where the
/// empirical total is zero.
inline std::array<std::optional<double>, 4> EmissionDelta(const EmissionResult& empirical,
                                                          const EmissionResult& benchmark) {
  std::array<std::optional<double>, 4> out;
  for (Pollutant p : kPollutants) {
    const double e = empirical.total(p);
    if (e == 0.0) continue;
    out[static_cast<std::size_t>(p)] = 100.0 * (e - benchmark.total(p)) / e;
  }
  return out;
}

}  // namespace wavebench
