#pragma once

// Gridded mean speed field v(t, x) with bicubic sampling, a synthetic
// stop-and-go wave generator, and the text grid format.
//
// Grid file layout:
//   #dt_grid_s=4
//   #dx_grid_m=32.18688
//   #t0_s=0
//   #x0_m=0
//   #lane=1
//   #date=2024-06-18
//   <n_x comma-separated speeds>   (one line per time index, n_t lines)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wavebench/errors.hpp"
#include "wavebench/io.hpp"
#include "wavebench/units.hpp"

namespace wavebench {

inline constexpr double kDefaultGridDt = 4.0;
inline constexpr double kDefaultGridDx = units::MilesToMeters(0.02);

/// Keys cubic convolution kernel; a = -0.5 is Catmull-Rom.
struct CubicKernel {
  double a = -0.5;

  constexpr double operator()(double x) const {
    const double ax = x < 0 ? -x : x;
    if (ax <= 1.0) return ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0;
    if (ax < 2.0) return ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a;
    return 0.0;
  }
};

inline constexpr CubicKernel kCatmullRom{-0.5};

struct Extent {
  double lo;
  double hi;

  bool Contains(double v) const { return v >= lo && v <= hi; }
};

class SpeedField {
 public:
  SpeedField(double t0, double dt_grid, double x0, double dx_grid, std::size_t n_t,
             std::size_t n_x, std::vector<double> values, int lane = 1,
             std::string date_label = {})
      : t0_(t0),
        dt_(dt_grid),
        x0_(x0),
        dx_(dx_grid),
        n_t_(n_t),
        n_x_(n_x),
        values_(std::move(values)),
        lane_(lane),
        date_(std::move(date_label)) {
    if (!(dt_ > 0.0) || !(dx_ > 0.0) || !std::isfinite(dt_) || !std::isfinite(dx_)) {
      throw RejectedInput("grid spacing must be positive and finite");
    }
    if (!std::isfinite(t0_) || !std::isfinite(x0_)) throw RejectedInput("grid origin must be finite");
    if (n_t_ < 4 || n_x_ < 4) throw RejectedInput("speed field needs at least 4x4 nodes");
    if (values_.size() != n_t_ * n_x_) throw RejectedInput("speed field value count does not match extent");
    for (std::size_t k = 0; k < values_.size(); ++k) {
      if (!std::isfinite(values_[k]) || values_[k] < 0.0) {
        throw FormatError("speed must be finite and non-negative", k / n_x_ + 1, k % n_x_ + 1);
      }
    }
  }

  double t0() const { return t0_; }
  double dt_grid() const { return dt_; }
  double x0() const { return x0_; }
  double dx_grid() const { return dx_; }
  std::size_t n_t() const { return n_t_; }
  std::size_t n_x() const { return n_x_; }
  int lane() const { return lane_; }
  const std::string& date_label() const { return date_; }
  std::span<const double> values() const { return values_; }

  double at(std::size_t ti, std::size_t xi) const { return values_[ti * n_x_ + xi]; }

  double TimeAt(std::size_t ti) const { return t0_ + static_cast<double>(ti) * dt_; }
  double PositionAt(std::size_t xi) const { return x0_ + static_cast<double>(xi) * dx_; }

  /// Region where the full 4x4 stencil is available.
  Extent InsetTime() const { return {TimeAt(1), TimeAt(n_t_ - 2)}; }
  Extent InsetSpace() const { return {PositionAt(1), PositionAt(n_x_ - 2)}; }

  bool InInset(double t, double x) const {
    return InsetTime().Contains(t) && InsetSpace().Contains(x);
  }

  SpeedField WithLabels(int lane, std::string date_label) const {
    SpeedField copy = *this;
    copy.lane_ = lane;
    copy.date_ = std::move(date_label);
    return copy;
  }

 private:
  double t0_, dt_, x0_, dx_;
  std::size_t n_t_, n_x_;
  std::vector<double> values_;
  int lane_;
  std::string date_;
};

namespace detail {

// Maps a coordinate to (cell index, fraction); index clamped so the query on
// the last inset node resolves with fraction 0.
inline std::pair<std::size_t, double> Locate(double u, std::size_t n) {
  const double last = static_cast<double>(n - 2);
  u = std::clamp(u, 1.0, last);
  if (std::abs(u - std::round(u)) < 1e-10) u = std::round(u);  // node coordinates that lost an ulp
  auto i = static_cast<std::size_t>(std::floor(u));
  double s = u - static_cast<double>(i);
  if (i >= n - 2) {
    i = n - 2;
    s = 0.0;
  }
  return {i, s};
}

// Interpolates p1 + sum w_k (p_k - p1): exact on constants and at s == 0.
inline double Blend(const double (&p)[4], double s, const CubicKernel& kernel) {
  if (s == 0.0) return p[1];
  const double w0 = kernel(s + 1.0);
  const double w2 = kernel(1.0 - s);
  const double w3 = kernel(2.0 - s);
  return p[1] + w0 * (p[0] - p[1]) + w2 * (p[2] - p[1]) + w3 * (p[3] - p[1]);
}

}  // namespace detail

/// Bicubic sample of the field at (t, x), clamped below at zero. The query
/// must lie inside the one-cell inset extent.
inline double SampleSpeed(const SpeedField& field, double t, double x,
                          const CubicKernel& kernel = kCatmullRom) {
  constexpr double kSlack = 1e-9;  // grid units; absorbs t0 + k*dt rounding
  const double u = (t - field.t0()) / field.dt_grid();
  const double w = (x - field.x0()) / field.dx_grid();
  const double u_hi = static_cast<double>(field.n_t() - 2);
  const double w_hi = static_cast<double>(field.n_x() - 2);
  if (!(u >= 1.0 - kSlack && u <= u_hi + kSlack)) {
    const Extent e = field.InsetTime();
    throw DomainError("time " + io::FormatDouble(t) + " s outside [" + io::FormatDouble(e.lo) +
                          ", " + io::FormatDouble(e.hi) + "]",
                      e.lo, e.hi);
  }
  if (!(w >= 1.0 - kSlack && w <= w_hi + kSlack)) {
    const Extent e = field.InsetSpace();
    throw DomainError("position " + io::FormatDouble(x) + " m outside [" + io::FormatDouble(e.lo) +
                          ", " + io::FormatDouble(e.hi) + "]",
                      e.lo, e.hi);
  }
  const auto [ti, st] = detail::Locate(u, field.n_t());
  const auto [xi, sx] = detail::Locate(w, field.n_x());
  const std::size_t x_last = field.n_x() - 1;
  const std::size_t t_last = field.n_t() - 1;

  double rows[4];
  for (int r = 0; r < 4; ++r) {
    const std::size_t row = std::min(ti + static_cast<std::size_t>(r) - 1, t_last);
    const double p[4] = {field.at(row, xi - 1), field.at(row, xi), field.at(row, std::min(xi + 1, x_last)),
                         field.at(row, std::min(xi + 2, x_last))};
    rows[r] = detail::Blend(p, sx, kernel);
  }
  return std::max(0.0, detail::Blend(rows, st, kernel));
}

struct WaveScenario {
  double base_speed = 25.0;        // m/s
  int wave_count = 0;
  double wave_amplitude = 0.0;     // m/s, depth of each dip
  double wave_width_t = 1800.0;    // s, lifetime along the wave line
  double wave_width_x = 300.0;     // m, thickness across the wave line
  double wave_propagation_speed = -4.5;  // m/s, negative = upstream
  double free_flow_noise = 0.0;    // m/s, Gaussian std per cell
  std::uint64_t seed = 0;
  int lane = 1;
  std::string date_label;
};

/// Generates base_speed minus Gaussian dips travelling along
/// x = x_c + c (t - t_c). The grid is padded by one cell on each side so the
/// inset (usable) window is [0, duration] x [0, length].
inline SpeedField SynthesizeField(const WaveScenario& s, double duration, double length,
                                  double dt_grid = kDefaultGridDt, double dx_grid = kDefaultGridDx) {
  if (!(duration > 0.0) || !(length > 0.0)) throw RejectedInput("extent must be positive");
  if (!(dt_grid > 0.0) || !(dx_grid > 0.0)) throw RejectedInput("grid spacing must be positive");
  if (!std::isfinite(s.base_speed) || s.base_speed < 0.0) throw RejectedInput("base_speed must be >= 0");
  if (s.wave_count < 0) throw RejectedInput("wave_count must be >= 0");
  if (!(s.wave_amplitude >= 0.0 && s.wave_amplitude <= s.base_speed)) {
    throw RejectedInput("wave_amplitude must lie in [0, base_speed]");
  }
  if (s.wave_count > 0 && !(s.wave_width_t > 0.0 && s.wave_width_x > 0.0)) {
    throw RejectedInput("wave widths must be positive");
  }
  if (!std::isfinite(s.wave_propagation_speed)) throw RejectedInput("propagation speed must be finite");
  if (!(s.free_flow_noise >= 0.0)) throw RejectedInput("free_flow_noise must be >= 0");

  const auto inner_t = static_cast<std::size_t>(std::ceil(duration / dt_grid - 1e-9)) + 1;
  const auto inner_x = static_cast<std::size_t>(std::ceil(length / dx_grid - 1e-9)) + 1;
  const std::size_t n_t = inner_t + 2;
  const std::size_t n_x = inner_x + 2;
  const double t0 = -dt_grid;
  const double x0 = -dx_grid;

  std::mt19937_64 rng(s.seed);
  struct Wave {
    double t_c, x_c;
  };
  std::vector<Wave> waves;
  std::uniform_int_distribution<std::size_t> pick_t(0, inner_t - 1);
  std::uniform_int_distribution<std::size_t> pick_x(0, inner_x - 1);
  for (int k = 0; k < s.wave_count; ++k) {
    const double tc = static_cast<double>(pick_t(rng)) * dt_grid;
    const double xc = static_cast<double>(pick_x(rng)) * dx_grid;
    waves.push_back({tc, xc});
  }

  std::vector<double> values(n_t * n_x, s.base_speed);
  for (std::size_t i = 0; i < n_t; ++i) {
    const double t = t0 + static_cast<double>(i) * dt_grid;
    for (std::size_t j = 0; j < n_x; ++j) {
      const double x = x0 + static_cast<double>(j) * dx_grid;
      double v = s.base_speed;
      for (const Wave& w : waves) {
        const double along = (t - w.t_c) / s.wave_width_t;
        const double across = (x - (w.x_c + s.wave_propagation_speed * (t - w.t_c))) / s.wave_width_x;
        v -= s.wave_amplitude * std::exp(-0.5 * (along * along + across * across));
      }
      values[i * n_x + j] = v;
    }
  }
  if (s.free_flow_noise > 0.0) {
    std::normal_distribution<double> noise(0.0, s.free_flow_noise);
    for (double& v : values) v += noise(rng);
  }
  for (double& v : values) v = std::max(0.0, v);

  return SpeedField(t0, dt_grid, x0, dx_grid, n_t, n_x, std::move(values), s.lane, s.date_label);
}

/// Parses grid text. ingest_unit converts the speed values to m/s.
inline SpeedField ParseField(std::string_view text, units::Unit ingest_unit = units::Unit::kMeterPerSecond) {
  double dt = kDefaultGridDt, dx = kDefaultGridDx, t0 = 0.0, x0 = 0.0;
  int lane = 1;
  std::string date;
  std::vector<double> values;
  std::size_t n_x = 0, n_t = 0, line_no = 0;

  for (std::string_view rest = text; !rest.empty();) {
    const auto nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    ++line_no;
    line = io::Trim(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) continue;  // plain comment
      const auto key = io::Trim(line.substr(1, eq - 1));
      const auto val = io::Trim(line.substr(eq + 1));
      auto number = [&]() {
        auto v = io::ParseDouble(val);
        if (!v) throw FormatError("bad header value for '" + std::string(key) + "'", line_no);
        return *v;
      };
      if (key == "dt_grid_s") dt = number();
      else if (key == "dx_grid_m") dx = number();
      else if (key == "t0_s") t0 = number();
      else if (key == "x0_m") x0 = number();
      else if (key == "lane") {
        auto v = io::ParseInt(val);
        if (!v) throw FormatError("bad lane value", line_no);
        lane = static_cast<int>(*v);
      } else if (key == "date") date = std::string(val);
      else throw FormatError("unknown header key '" + std::string(key) + "'", line_no);
      continue;
    }
    const auto cells = io::Split(line, ',');
    if (n_x == 0) n_x = cells.size();
    if (cells.size() != n_x) {
      throw FormatError("non-rectangular data: expected " + std::to_string(n_x) + " columns, got " +
                            std::to_string(cells.size()),
                        line_no);
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      auto v = io::ParseDouble(cells[c]);
      if (!v) throw FormatError("unparseable speed '" + std::string(io::Trim(cells[c])) + "'", line_no, c + 1);
      if (!std::isfinite(*v) || *v < 0.0) {
        throw FormatError("negative or non-finite speed " + std::string(io::Trim(cells[c])), line_no, c + 1);
      }
      values.push_back(units::Convert(*v, ingest_unit, units::Unit::kMeterPerSecond));
    }
    ++n_t;
  }
  if (n_t < 4 || n_x < 4) {
    throw FormatError("grid must have at least 4x4 cells, got " + std::to_string(n_t) + "x" + std::to_string(n_x));
  }
  if (!(dt > 0.0) || !(dx > 0.0)) throw FormatError("grid spacing must be positive");
  return SpeedField(t0, dt, x0, dx, n_t, n_x, std::move(values), lane, std::move(date));
}

inline SpeedField LoadField(const std::filesystem::path& path,
                            units::Unit ingest_unit = units::Unit::kMeterPerSecond) {
  return ParseField(io::ReadFile(path), ingest_unit);
}

/// Canonical text form; ParseField(FormatField(f)) reproduces f exactly.
inline std::string FormatField(const SpeedField& field) {
  std::string out;
  out += "#dt_grid_s=" + io::FormatDouble(field.dt_grid()) + "\n";
  out += "#dx_grid_m=" + io::FormatDouble(field.dx_grid()) + "\n";
  out += "#t0_s=" + io::FormatDouble(field.t0()) + "\n";
  out += "#x0_m=" + io::FormatDouble(field.x0()) + "\n";
  out += "#lane=" + std::to_string(field.lane()) + "\n";
  out += "#date=" + field.date_label() + "\n";
  for (std::size_t i = 0; i < field.n_t(); ++i) {
    for (std::size_t j = 0; j < field.n_x(); ++j) {
      if (j) out += ',';
      out += io::FormatDouble(field.at(i, j));
    }
    out += '\n';
  }
  return out;
}

inline void SaveField(const SpeedField& field, const std::filesystem::path& path) {
  io::WriteFileAtomic(path, FormatField(field));
}

}  // namespace wavebench
