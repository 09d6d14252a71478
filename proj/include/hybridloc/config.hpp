#pragma once

#include "errors.hpp"
#include "pipeline.hpp"
#include "sim.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace hybridloc
{

// Everything one run needs: the simulated scenario and the estimator setup.
struct AppConfig
{
  Scenario scenario;
  PipelineConfig pipeline;
};

// 6 x 6 m room with anchors in the corners.
inline AnchorSet default_anchors()
{
  return AnchorSet({{0, {0.0, 0.0}}, {1, {6.0, 0.0}}, {2, {6.0, 6.0}}, {3, {0.0, 6.0}}});
}

inline AppConfig default_config()
{
  AppConfig cfg;
  cfg.scenario.anchors = default_anchors();
  cfg.scenario.waypoints = polygon_waypoints({3.0, 3.0}, 2.0, 5, 1);
  cfg.pipeline.anchors = cfg.scenario.anchors;
  cfg.pipeline.process.dt = 1.0 / cfg.scenario.loc_rate;
  cfg.pipeline.tdoa_sigma = std::sqrt(2.0) * cfg.scenario.toa_sigma * kSpeedOfLight;
  return cfg;
}

namespace detail
{

namespace pt = boost::property_tree;

inline std::vector<double> parse_numbers(const std::string& text, const std::string& key)
{
  std::string cleaned = text;
  for (char& c : cleaned)
    if (c == ',' || c == ';' || c == '\t')
      c = ' ';
  std::istringstream ss(cleaned);
  std::vector<double> out;
  std::string tok;
  while (ss >> tok)
  {
    std::size_t used = 0;
    double v = 0.0;
    try
    {
      v = std::stod(tok, &used);
    }
    catch (const std::exception&)
    {
      used = 0;
    }
    if (used != tok.size() || !std::isfinite(v))
      throw ConfigError(key + ": not a number '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

class Section
{
public:
  Section(const pt::ptree& tree, std::string name, std::set<std::string> known)
      : name_(std::move(name)), known_(std::move(known))
  {
    if (const auto child = tree.get_child_optional(name_))
    {
      node_ = &*child;
      for (const auto& [key, _] : *node_)
        if (!known_.empty() && !known_.count(key))
          throw ConfigError("[" + name_ + "] unknown key '" + key + "'");
    }
  }

  bool present() const { return node_ != nullptr; }
  const pt::ptree* node() const { return node_; }

  std::optional<std::string> raw(const std::string& key) const
  {
    if (!node_)
      return std::nullopt;
    if (auto v = node_->get_optional<std::string>(key))
      return *v;
    return std::nullopt;
  }

  void number(const std::string& key, double& out) const
  {
    if (auto v = raw(key))
    {
      const auto nums = parse_numbers(*v, qualified(key));
      if (nums.size() != 1)
        throw ConfigError(qualified(key) + ": expected one number");
      out = nums.front();
    }
  }

  template <class Int>
  void integer(const std::string& key, Int& out) const
  {
    double v = static_cast<double>(out);
    number(key, v);
    if (v != std::floor(v))
      throw ConfigError(qualified(key) + ": expected an integer");
    out = static_cast<Int>(v);
  }

  void boolean(const std::string& key, bool& out) const
  {
    if (auto v = raw(key))
    {
      if (*v == "true" || *v == "1" || *v == "yes" || *v == "on")
        out = true;
      else if (*v == "false" || *v == "0" || *v == "no" || *v == "off")
        out = false;
      else
        throw ConfigError(qualified(key) + ": expected true/false");
    }
  }

  std::string qualified(const std::string& key) const { return "[" + name_ + "] " + key; }

private:
  std::string name_;
  std::set<std::string> known_;
  const pt::ptree* node_ = nullptr;
};

inline std::vector<Vec2> parse_points(const std::string& text, const std::string& key)
{
  const auto nums = parse_numbers(text, key);
  if (nums.size() % 2 != 0)
    throw ConfigError(key + ": expected x y pairs");
  std::vector<Vec2> pts;
  for (std::size_t k = 0; k < nums.size(); k += 2)
    pts.emplace_back(nums[k], nums[k + 1]);
  return pts;
}

} // namespace detail

// Flat INI-style configuration:
//
//   [anchors]    <id> = x y
//   [scenario]   pentagon geometry or explicit waypoints, speeds, noise, seed
//   [gait]       step detector and heading settings
//   [filter]     process/measurement noise and gating
//   [estimators] ls/ekf/fused = true|false
//
// Missing keys keep their defaults; unknown keys are rejected.
inline AppConfig parse_config(std::istream& in, const std::string& name = "config")
{
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try
  {
    pt::read_ini(in, tree);
  }
  catch (const pt::ini_parser_error& e)
  {
    throw ConfigError(name + ":" + std::to_string(e.line()) + ": " + e.message());
  }

  for (const auto& [section, _] : tree)
    if (section != "anchors" && section != "scenario" && section != "gait" && section != "filter" &&
        section != "estimators")
      throw ConfigError(name + ": unknown section [" + section + "]");

  AppConfig cfg = default_config();
  Scenario& sc = cfg.scenario;
  PipelineConfig& pc = cfg.pipeline;

  const detail::Section anchors(tree, "anchors", {});
  if (anchors.present())
  {
    std::vector<Anchor> list;
    for (const auto& [key, value] : *anchors.node())
    {
      int id = 0;
      try
      {
        std::size_t used = 0;
        id = std::stoi(key, &used);
        if (used != key.size())
          throw std::invalid_argument(key);
      }
      catch (const std::exception&)
      {
        throw ConfigError("[anchors] key '" + key + "' is not an integer id");
      }
      const auto pts = detail::parse_points(value.data(), "[anchors] " + key);
      if (pts.size() != 1)
        throw ConfigError("[anchors] " + key + ": expected 'x y'");
      list.push_back({id, pts.front()});
    }
    try
    {
      sc.anchors = AnchorSet(std::move(list));
    }
    catch (const InvalidGeometry& e)
    {
      throw ConfigError(std::string("[anchors] ") + e.what());
    }
  }

  const detail::Section scn(tree, "scenario",
                            {"waypoints", "center", "radius", "sides", "laps", "dwell", "walk_speed", "loc_rate",
                             "step_freq", "toa_sigma_ns", "nlos_delay_ns", "shadow_half_angle_deg", "turn_duration",
                             "accel_amplitude", "accel_noise", "seed"});
  {
    double cx = 3.0, cy = 3.0, radius = 2.0;
    int sides = 5, laps = 1;
    if (auto c = scn.raw("center"))
    {
      const auto p = detail::parse_points(*c, scn.qualified("center"));
      if (p.size() != 1)
        throw ConfigError(scn.qualified("center") + ": expected 'x y'");
      cx = p.front().x();
      cy = p.front().y();
    }
    scn.number("radius", radius);
    scn.integer("sides", sides);
    scn.integer("laps", laps);
    if (sides < 3 || laps < 1 || !(radius > 0.0))
      throw ConfigError("[scenario] polygon needs sides >= 3, laps >= 1, radius > 0");
    sc.waypoints = polygon_waypoints({cx, cy}, radius, sides, laps);
    if (auto w = scn.raw("waypoints"))
      sc.waypoints = detail::parse_points(*w, scn.qualified("waypoints"));

    if (auto d = scn.raw("dwell"))
    {
      // "index:seconds index:seconds"
      std::string text = *d;
      for (char& ch : text)
        if (ch == ':')
          ch = ' ';
      const auto nums = detail::parse_numbers(text, scn.qualified("dwell"));
      if (nums.size() % 2 != 0)
        throw ConfigError(scn.qualified("dwell") + ": expected index:seconds entries");
      for (std::size_t k = 0; k < nums.size(); k += 2)
      {
        if (nums[k] < 0 || nums[k] != std::floor(nums[k]) || nums[k + 1] < 0)
          throw ConfigError(scn.qualified("dwell") + ": bad entry");
        sc.dwell[static_cast<std::size_t>(nums[k])] = nums[k + 1];
      }
    }

    scn.number("walk_speed", sc.walk_speed);
    scn.number("loc_rate", sc.loc_rate);
    sc.accel_rate = 5.0 * sc.loc_rate;
    scn.number("step_freq", sc.step_freq);
    double toa_ns = sc.toa_sigma * 1e9, nlos_ns = sc.nlos_delay * 1e9;
    scn.number("toa_sigma_ns", toa_ns);
    scn.number("nlos_delay_ns", nlos_ns);
    if (nlos_ns < 0.0 || nlos_ns > 10.0)
      throw ConfigError("[scenario] nlos_delay_ns must lie in [0, 10]");
    sc.toa_sigma = toa_ns * 1e-9;
    sc.nlos_delay = nlos_ns * 1e-9;
    double half_deg = sc.shadow_half_angle * 180.0 / std::numbers::pi;
    scn.number("shadow_half_angle_deg", half_deg);
    sc.shadow_half_angle = half_deg * std::numbers::pi / 180.0;
    scn.number("turn_duration", sc.turn_duration);
    scn.number("accel_amplitude", sc.accel_amplitude);
    scn.number("accel_noise", sc.accel_noise);
    scn.integer("seed", sc.seed);
  }

  const detail::Section gait(tree, "gait", {"window", "threshold", "min_peak", "stop_timeout", "heading_points", "source"});
  gait.integer("window", pc.gait.window);
  gait.number("threshold", pc.gait.threshold);
  gait.number("min_peak", pc.gait.min_peak);
  gait.number("stop_timeout", pc.gait.stop_timeout);
  gait.integer("heading_points", pc.gait.heading_points);
  if (auto src = gait.raw("source"))
  {
    if (*src == "ls")
      pc.gait_source = GaitSource::ls;
    else if (*src == "fused")
      pc.gait_source = GaitSource::fused;
    else
      throw ConfigError(gait.qualified("source") + ": expected ls or fused");
  }
  if (pc.gait.window < 1 || pc.gait.window % 2 == 0)
    throw ConfigError("[gait] window must be odd and >= 1");
  if (pc.gait.min_peak < pc.gait.threshold)
    throw ConfigError("[gait] min_peak must not be below threshold");
  if (pc.gait.heading_points < 2)
    throw ConfigError("[gait] heading_points must be >= 2");

  const detail::Section filt(tree, "filter",
                            {"q1", "q2", "stop_decay", "gate", "tdoa_sigma_m", "reference_anchor", "init_pos_var",
                             "init_vel_var", "reacquire_after", "step_velocity"});
  filt.number("q1", pc.process.q1);
  if (auto q2 = filt.raw("q2"))
  {
    const auto d = detail::parse_numbers(*q2, filt.qualified("q2"));
    if (d.size() != 4)
      throw ConfigError(filt.qualified("q2") + ": expected 4 diagonal entries");
    pc.process.q2 = Vec4(d[0], d[1], d[2], d[3]).asDiagonal();
  }
  filt.number("stop_decay", pc.process.stop_decay);
  filt.number("gate", pc.update.gate);
  pc.tdoa_sigma = std::sqrt(2.0) * sc.toa_sigma * kSpeedOfLight;
  filt.number("tdoa_sigma_m", pc.tdoa_sigma);
  filt.integer("reference_anchor", sc.reference_anchor);
  filt.number("init_pos_var", pc.init_pos_var);
  filt.number("init_vel_var", pc.init_vel_var);
  filt.integer("reacquire_after", pc.reacquire_after);
  filt.boolean("step_velocity", pc.process.step_velocity);
  if (pc.reacquire_after < 0)
    throw ConfigError("[filter] reacquire_after must be >= 0");
  if (!(pc.tdoa_sigma > 0.0))
    throw ConfigError("[filter] tdoa_sigma_m must be > 0 (set it explicitly when toa_sigma_ns is 0)");

  const detail::Section est(tree, "estimators", {"ls", "ekf", "fused"});
  if (est.present())
  {
    bool ls = true, ekf = true, fused = true;
    est.boolean("ls", ls);
    est.boolean("ekf", ekf);
    est.boolean("fused", fused);
    pc.estimators.clear();
    if (ls)
      pc.estimators.push_back(EstimatorKind::ls);
    if (ekf)
      pc.estimators.push_back(EstimatorKind::ekf);
    if (fused)
      pc.estimators.push_back(EstimatorKind::fused);
    if (pc.estimators.empty())
      throw ConfigError("[estimators] all estimators disabled");
  }

  pc.anchors = sc.anchors;
  pc.process.dt = 1.0 / sc.loc_rate;
  try
  {
    sc.validate();
    pc.process.validate();
  }
  catch (const Error& e)
  {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline AppConfig load_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config file " + path);
  return parse_config(in, path);
}

} // namespace hybridloc
