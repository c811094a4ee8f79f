#pragma once

// INI-style configuration: [benchmark], [solver], [vsp] and [opmode]
// sections of key = value lines. Human units (miles, mph) where the key
// says so; everything is converted on load.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "wavebench/benchmark.hpp"
#include "wavebench/errors.hpp"
#include "wavebench/io.hpp"
#include "wavebench/units.hpp"

namespace wavebench {

namespace detail {

inline std::vector<double> ParseList(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (std::string_view cell : io::Split(text, ',')) {
    auto v = io::ParseDouble(cell);
    if (!v) throw ConfigError("config: bad number '" + std::string(io::Trim(cell)) + "' in " + key);
    out.push_back(*v);
  }
  return out;
}

class SectionReader {
 public:
  SectionReader(const boost::property_tree::ptree& root, std::string name) : name_(std::move(name)) {
    if (auto child = root.get_child_optional(name_)) tree_ = &*child;
  }

  void RejectUnknown() const {
    if (!tree_) return;
    for (const auto& [key, value] : *tree_) {
      if (!used_.count(key)) throw ConfigError("config: unknown key '" + key + "' in [" + name_ + "]");
    }
  }

  void Number(const std::string& key, double& target) {
    if (auto s = Raw(key)) {
      auto v = io::ParseDouble(*s);
      if (!v) throw ConfigError("config: [" + name_ + "] " + key + " is not a number: '" + *s + "'");
      target = *v;
    }
  }

  void Integer(const std::string& key, int& target) {
    if (auto s = Raw(key)) {
      auto v = io::ParseInt(*s);
      if (!v) throw ConfigError("config: [" + name_ + "] " + key + " is not an integer: '" + *s + "'");
      target = static_cast<int>(*v);
    }
  }

  void Bool(const std::string& key, bool& target) {
    if (auto s = Raw(key)) {
      if (*s == "true" || *s == "1") target = true;
      else if (*s == "false" || *s == "0") target = false;
      else throw ConfigError("config: [" + name_ + "] " + key + " must be true or false");
    }
  }

  std::optional<std::string> Raw(const std::string& key) {
    used_.insert(key);
    if (!tree_) return std::nullopt;
    auto v = tree_->get_optional<std::string>(boost::property_tree::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return std::string(io::Trim(*v));
  }

 private:
  std::string name_;
  const boost::property_tree::ptree* tree_ = nullptr;
  std::set<std::string> used_;
};

}  // namespace detail

/// Overlays the file's values on `base`. Unknown sections or keys are errors.
inline BenchmarkConfig ParseConfig(const std::string& text, BenchmarkConfig base = {}) {
  boost::property_tree::ptree root;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, root);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config: " + std::string(e.message()) + " at line " + std::to_string(e.line()));
  }
  for (const auto& [name, section] : root) {
    if (name != "benchmark" && name != "solver" && name != "vsp" && name != "opmode") {
      throw ConfigError("config: unknown section [" + name + "]");
    }
    if (section.empty() && !section.data().empty()) throw ConfigError("config: key '" + name + "' outside a section");
  }

  BenchmarkConfig c = std::move(base);
  {
    detail::SectionReader r(root, "benchmark");
    r.Number("lambda", c.lambda);
    if (auto s = r.Raw("gap_budgets_mi")) {
      c.gap_budgets.clear();
      for (double mi : detail::ParseList("gap_budgets_mi", *s)) c.gap_budgets.push_back(units::MilesToMeters(mi));
    }
    if (auto s = r.Raw("gap_budgets_m")) c.gap_budgets = detail::ParseList("gap_budgets_m", *s);
    if (r.Raw("speed_filter_mph")) {
      double mph = 0.0;
      r.Number("speed_filter_mph", mph);
      c.speed_filter = units::MphToMps(mph);
    }
    r.Number("seed_interval_s", c.seed_interval);
    r.Number("integration_step_s", c.integration_step);
    if (auto s = r.Raw("quantiles")) c.quantiles = detail::ParseList("quantiles", *s);
    r.Number("hexbin_mean_speed_width_mps", c.hexbin_mean_speed_width);
    r.Number("hexbin_speed_std_width_mps", c.hexbin_speed_std_width);
    r.RejectUnknown();
  }
  {
    detail::SectionReader r(root, "solver");
    r.Number("rho", c.solver.rho);
    r.Number("sigma", c.solver.sigma);
    r.Number("alpha", c.solver.alpha);
    r.Number("eps_abs", c.solver.eps_abs);
    r.Number("eps_rel", c.solver.eps_rel);
    r.Integer("max_iterations", c.solver.max_iterations);
    r.Bool("adaptive_rho", c.solver.adaptive_rho);
    r.Bool("polish", c.solver.polish);
    r.RejectUnknown();
  }
  {
    detail::SectionReader r(root, "vsp");
    r.Number("A", c.vsp.A);
    r.Number("B", c.vsp.B);
    r.Number("C", c.vsp.C);
    r.Number("source_mass", c.vsp.source_mass);
    r.Number("fixed_mass", c.vsp.fixed_mass);
    r.Number("g", c.vsp.g);
    r.Number("grade", c.vsp.grade);
    r.RejectUnknown();
  }
  {
    detail::SectionReader r(root, "opmode");
    r.Number("braking_instant_mph_s", c.thresholds.braking_instant_mph_s);
    r.Number("braking_sustained_mph_s", c.thresholds.braking_sustained_mph_s);
    r.Number("idle_speed_mph", c.thresholds.idle_speed_mph);
    r.RejectUnknown();
  }
  c.Validate();
  return c;
}

inline BenchmarkConfig LoadConfig(const std::filesystem::path& path, BenchmarkConfig base = {}) {
  return ParseConfig(io::ReadFile(path), std::move(base));
}

}  // namespace wavebench
