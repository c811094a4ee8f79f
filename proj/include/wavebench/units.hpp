#pragma once

// Physical unit canon. Everything inside the library is SI (m, s, m/s, m/s^2);
// human units only appear at I/O boundaries and in the operating-mode binning.

#include <array>
#include <string>
#include <string_view>

#include "wavebench/errors.hpp"

namespace wavebench::units {

inline constexpr double kMeterPerMile = 1609.344;
inline constexpr double kSecondsPerHour = 3600.0;
inline constexpr double kMeterPerSecondPerMph = kMeterPerMile / kSecondsPerHour;  // 0.44704
inline constexpr double kMeterPerKilometer = 1000.0;

enum class Dimension { kLength, kTime, kSpeed, kAcceleration };

enum class Unit {
  kMeter,
  kKilometer,
  kMile,
  kSecond,
  kHour,
  kMeterPerSecond,
  kMph,
  kKilometerPerHour,
  kMeterPerSecond2,
  kMphPerSecond,
};

struct UnitInfo {
  Unit unit;
  Dimension dimension;
  double to_si;  // multiply a value in this unit to get SI
  std::string_view name;
};

inline constexpr std::array<UnitInfo, 10> kUnits{{
    {Unit::kMeter, Dimension::kLength, 1.0, "m"},
    {Unit::kKilometer, Dimension::kLength, kMeterPerKilometer, "km"},
    {Unit::kMile, Dimension::kLength, kMeterPerMile, "mi"},
    {Unit::kSecond, Dimension::kTime, 1.0, "s"},
    {Unit::kHour, Dimension::kTime, kSecondsPerHour, "h"},
    {Unit::kMeterPerSecond, Dimension::kSpeed, 1.0, "m/s"},
    {Unit::kMph, Dimension::kSpeed, kMeterPerSecondPerMph, "mph"},
    {Unit::kKilometerPerHour, Dimension::kSpeed, kMeterPerKilometer / kSecondsPerHour, "km/h"},
    {Unit::kMeterPerSecond2, Dimension::kAcceleration, 1.0, "m/s^2"},
    {Unit::kMphPerSecond, Dimension::kAcceleration, kMeterPerSecondPerMph, "mph/s"},
}};

constexpr const UnitInfo& Info(Unit unit) {
  for (const auto& info : kUnits) {
    if (info.unit == unit) return info;
  }
  return kUnits[0];  // unreachable for valid enumerators
}

/// Factor-based conversion between two units of the same dimension.
inline double Convert(double value, Unit from, Unit to) {
  const UnitInfo& a = Info(from);
  const UnitInfo& b = Info(to);
  if (a.dimension != b.dimension) {
    throw RejectedInput("cannot convert " + std::string(a.name) + " to " + std::string(b.name) +
                        ": dimension mismatch");
  }
  if (from == to) return value;
  if (b.to_si == 1.0) return value * a.to_si;
  if (a.to_si == 1.0) return value / b.to_si;
  // Extended precision keeps non-SI pairs to a single rounding.
  return static_cast<double>(static_cast<long double>(value) * a.to_si / b.to_si);
}

inline Unit ParseUnit(std::string_view name) {
  for (const auto& info : kUnits) {
    if (info.name == name) return info.unit;
  }
  if (name == "mps") return Unit::kMeterPerSecond;
  if (name == "mile" || name == "miles") return Unit::kMile;
  if (name == "meter" || name == "meters") return Unit::kMeter;
  throw RejectedInput("unknown unit '" + std::string(name) + "'");
}

// Shorthands used at I/O boundaries.
constexpr double MilesToMeters(double miles) { return miles * kMeterPerMile; }
constexpr double MetersToMiles(double meters) { return meters / kMeterPerMile; }
constexpr double MphToMps(double mph) { return mph * kMeterPerSecondPerMph; }
constexpr double MpsToMph(double mps) { return mps / kMeterPerSecondPerMph; }
constexpr double SecondsToHours(double seconds) { return seconds / kSecondsPerHour; }

}  // namespace wavebench::units
