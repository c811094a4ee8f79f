#pragma once

// Virtual vehicle trajectories: integration of dx/dt = v(t, x) through a
// speed field, 1 Hz resampling, discrete kinematics and the text format.
//
// Trajectory file layout:
//   #dt=1
//   #t_start=120
//   #lane=1
//   #source=empirical
//   #gap_budget_m=160.9344      (benchmark trajectories only)
//   <one position in meters per line>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "wavebench/errors.hpp"
#include "wavebench/io.hpp"
#include "wavebench/speed_field.hpp"

namespace wavebench {

enum class TrajectorySource { kEmpirical, kBenchmark };

inline std::string ToString(TrajectorySource s) {
  return s == TrajectorySource::kEmpirical ? "empirical" : "benchmark";
}

struct Trajectory {
  double t_start = 0.0;
  double dt = 1.0;
  std::vector<double> positions;  // x_0 .. x_N, meters
  int lane = 1;
  TrajectorySource source = TrajectorySource::kEmpirical;
  std::optional<double> gap_budget;  // meters, benchmark only
  double max_correction = 0.0;       // largest running-max fix applied, meters

  /// Number of intervals N.
  std::size_t intervals() const { return positions.empty() ? 0 : positions.size() - 1; }
  double duration() const { return static_cast<double>(intervals()) * dt; }
  double t_end() const { return t_start + duration(); }
  bool corrected() const { return max_correction > 0.01; }
};

struct Kinematics {
  std::vector<double> velocities;     // v_0 .. v_{N-1}
  std::vector<double> accelerations;  // a_0 .. a_{N-2}
  double mean_speed = 0.0;
  double speed_std = 0.0;
};

inline constexpr double kDefaultIntegrationStep = 0.1;
inline constexpr std::size_t kMinIntervals = 3;

/// Fixed-step RK4 through the field. Stops before any stage would leave the
/// inset extent or the time window; the partial step is dropped.
inline Trajectory IntegrateTrajectory(const SpeedField& field, double t_seed, double x_seed,
                                      double step = kDefaultIntegrationStep,
                                      const CubicKernel& kernel = kCatmullRom) {
  if (!(step > 0.0) || !std::isfinite(step)) throw RejectedInput("integration step must be positive");
  if (!field.InInset(t_seed, x_seed)) {
    const Extent et = field.InsetTime();
    throw DomainError("seed (" + io::FormatDouble(t_seed) + " s, " + io::FormatDouble(x_seed) +
                          " m) outside inset extent",
                      et.lo, et.hi);
  }
  const double t_end = field.InsetTime().hi;
  const Extent space = field.InsetSpace();
  auto v = [&](double t, double x) { return SampleSpeed(field, t, x, kernel); };

  Trajectory traj;
  traj.t_start = t_seed;
  traj.dt = step;
  traj.lane = field.lane();
  traj.positions.push_back(x_seed);

  double x = x_seed;
  for (std::size_t k = 0;; ++k) {
    const double t = t_seed + static_cast<double>(k) * step;
    const double t_next = t_seed + static_cast<double>(k + 1) * step;
    if (t_next > t_end + 1e-9) break;
    const double k1 = v(t, x);
    const double x2 = x + 0.5 * step * k1;
    if (x2 > space.hi) break;
    const double k2 = v(t + 0.5 * step, x2);
    const double x3 = x + 0.5 * step * k2;
    if (x3 > space.hi) break;
    const double k3 = v(t + 0.5 * step, x3);
    const double x4 = x + step * k3;
    if (x4 > space.hi) break;
    const double k4 = v(std::min(t_next, t_end), x4);
    const double x_next = x + step * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
    if (x_next > space.hi) break;
    x = x_next;
    traj.positions.push_back(x);
  }
  if (traj.intervals() < kMinIntervals) {
    throw DegenerateTrajectory("trajectory from seed t=" + io::FormatDouble(t_seed) + " s has only " +
                               std::to_string(traj.intervals()) + " steps");
  }
  return traj;
}

struct Seed {
  double t;
  double x;
};

/// Seeds at the upstream edge of the inset extent every `interval` seconds,
/// as long as at least `min_duration` seconds of the window remain.
inline std::vector<Seed> SeedSchedule(const SpeedField& field, double interval, double min_duration = 3.0) {
  if (!(interval > 0.0)) throw RejectedInput("seed interval must be positive");
  const Extent et = field.InsetTime();
  const double x = field.InsetSpace().lo;
  std::vector<Seed> seeds;
  for (std::size_t k = 0;; ++k) {
    const double t = et.lo + static_cast<double>(k) * interval;
    if (t + min_duration > et.hi + 1e-9) break;
    seeds.push_back({t, x});
  }
  return seeds;
}

/// Linear position interpolation onto whole seconds from t_start; a trailing
/// partial second is dropped.
inline Trajectory Resample1Hz(const Trajectory& traj) {
  constexpr double kSnap = 1e-6;
  if (!(traj.dt > 0.0) || traj.dt > 1.0 + 1e-12) throw RejectedInput("resampling needs dt <= 1 s");
  if (traj.positions.empty() || traj.duration() < 3.0 - 1e-9) {
    throw DegenerateTrajectory("trajectory shorter than 3 s cannot be resampled");
  }
  if (traj.dt == 1.0) return traj;

  Trajectory out = traj;
  out.dt = 1.0;
  out.positions.clear();
  const std::size_t last = traj.positions.size() - 1;
  const auto seconds = static_cast<std::size_t>(std::floor(traj.duration() + 1e-9));
  for (std::size_t k = 0; k <= seconds; ++k) {
    const double r = static_cast<double>(k) / traj.dt;
    const double nearest = std::round(r);
    if (std::abs(r - nearest) < kSnap) {
      out.positions.push_back(traj.positions[std::min(static_cast<std::size_t>(nearest), last)]);
      continue;
    }
    const auto i = std::min(static_cast<std::size_t>(std::floor(r)), last - 1);
    const double frac = r - static_cast<double>(i);
    out.positions.push_back(traj.positions[i] + frac * (traj.positions[i + 1] - traj.positions[i]));
  }
  return out;
}

inline Kinematics ComputeKinematics(const Trajectory& traj) {
  const std::size_t n = traj.intervals();
  if (n < kMinIntervals) throw DegenerateTrajectory("kinematics needs N >= 3");
  const auto& x = traj.positions;
  const double dt = traj.dt;
  Kinematics k;
  k.velocities.resize(n);
  k.accelerations.resize(n - 1);
  for (std::size_t i = 0; i < n; ++i) k.velocities[i] = (x[i + 1] - x[i]) / dt;
  for (std::size_t i = 0; i + 1 < n; ++i) k.accelerations[i] = (x[i + 2] - 2.0 * x[i + 1] + x[i]) / (dt * dt);
  k.mean_speed = (x[n] - x[0]) / (static_cast<double>(n) * dt);
  double mean_v = 0.0;
  for (double v : k.velocities) mean_v += v;
  mean_v /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : k.velocities) ss += (v - mean_v) * (v - mean_v);
  k.speed_std = std::sqrt(ss / static_cast<double>(n));
  return k;
}

/// Replaces positions by their running maximum so the reference never reverses.
inline Trajectory PreprocessReference(const Trajectory& traj) {
  Trajectory out = traj;
  double running = -std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (double& x : out.positions) {
    if (x < running) {
      worst = std::max(worst, running - x);
      x = running;
    } else {
      running = x;
    }
  }
  out.max_correction = std::max(traj.max_correction, worst);
  return out;
}

inline std::string FormatTrajectory(const Trajectory& traj) {
  std::string out;
  out += "#dt=" + io::FormatDouble(traj.dt) + "\n";
  out += "#t_start=" + io::FormatDouble(traj.t_start) + "\n";
  out += "#lane=" + std::to_string(traj.lane) + "\n";
  out += "#source=" + ToString(traj.source) + "\n";
  if (traj.gap_budget) out += "#gap_budget_m=" + io::FormatDouble(*traj.gap_budget) + "\n";
  for (double x : traj.positions) out += io::FormatDouble(x) + "\n";
  return out;
}

inline Trajectory ParseTrajectory(std::string_view text) {
  Trajectory traj;
  std::size_t line_no = 0;
  for (std::string_view rest = text; !rest.empty();) {
    const auto nl = rest.find('\n');
    std::string_view line = io::Trim(rest.substr(0, nl));
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    if (line.front() == '#') {
      // Accepts one key per line or "#a=1,#b=2" on a single line.
      for (std::string_view item : io::Split(line, ',')) {
        item = io::Trim(item);
        if (!item.empty() && item.front() == '#') item.remove_prefix(1);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) continue;
        const auto key = io::Trim(item.substr(0, eq));
        const auto val = io::Trim(item.substr(eq + 1));
        auto number = [&]() {
          auto v = io::ParseDouble(val);
          if (!v) throw FormatError("bad header value for '" + std::string(key) + "'", line_no);
          return *v;
        };
        if (key == "dt") traj.dt = number();
        else if (key == "t_start") traj.t_start = number();
        else if (key == "lane") traj.lane = static_cast<int>(number());
        else if (key == "gap_budget_m") traj.gap_budget = number();
        else if (key == "source") {
          if (val == "empirical") traj.source = TrajectorySource::kEmpirical;
          else if (val == "benchmark") traj.source = TrajectorySource::kBenchmark;
          else throw FormatError("unknown source '" + std::string(val) + "'", line_no);
        } else {
          throw FormatError("unknown header key '" + std::string(key) + "'", line_no);
        }
      }
      continue;
    }
    auto v = io::ParseDouble(line);
    if (!v || !std::isfinite(*v)) throw FormatError("bad position '" + std::string(line) + "'", line_no, 1);
    traj.positions.push_back(*v);
  }
  if (!(traj.dt > 0.0)) throw FormatError("dt must be positive");
  return traj;
}

inline Trajectory LoadTrajectory(const std::filesystem::path& path) { return ParseTrajectory(io::ReadFile(path)); }

inline void SaveTrajectory(const Trajectory& traj, const std::filesystem::path& path) {
  io::WriteFileAtomic(path, FormatTrajectory(traj));
}

}  // namespace wavebench
