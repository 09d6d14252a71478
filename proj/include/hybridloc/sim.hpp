#pragma once

#include "errors.hpp"
#include "gait.hpp"
#include "geomodel.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <vector>

namespace hybridloc
{

struct Scenario
{
  AnchorSet anchors;
  std::vector<Vec2> waypoints;
  std::map<std::size_t, double> dwell; // waypoint index -> seconds stopped there
  double walk_speed = 1.2;             // m/s
  double loc_rate = 10.0;              // Hz
  double accel_rate = 50.0;            // Hz, five samples per fix
  double step_freq = 2.0;              // Hz
  double toa_sigma = 0.3e-9;           // s
  double nlos_delay = 3e-9;            // s, added to TOAs of shadowed anchors
  double shadow_half_angle = std::numbers::pi / 3.0;
  double turn_duration = 0.5;          // s, facing blends between segments
  double accel_amplitude = 3.0;        // m/s^2
  double accel_noise = 0.3;            // m/s^2
  int reference_anchor = -1;           // -1: lowest id
  std::uint64_t seed = 1;

  double step_length() const { return walk_speed / step_freq; }

  int reference_id() const { return reference_anchor >= 0 ? reference_anchor : anchors.ids().front(); }

  void validate() const
  {
    if (waypoints.size() < 2)
      throw DegenerateWaypoints("trajectory needs at least 2 waypoints");
    for (std::size_t i = 1; i < waypoints.size(); ++i)
      if ((waypoints[i] - waypoints[i - 1]).norm() <= 1e-9)
        throw DegenerateWaypoints("waypoints " + std::to_string(i - 1) + " and " + std::to_string(i) + " coincide");
    if (!(walk_speed > 0.0) || !(loc_rate > 0.0) || !(step_freq > 0.0))
      throw ConfigError("walk_speed, loc_rate and step_freq must be > 0");
    if (std::abs(accel_rate - 5.0 * loc_rate) > 1e-9 * loc_rate)
      throw ConfigError("accel_rate must equal 5 x loc_rate");
    if (!(toa_sigma >= 0.0) || !(nlos_delay >= 0.0))
      throw ConfigError("toa_sigma and nlos_delay must be >= 0");
    if (!anchors.contains(reference_id()))
      throw UnknownReference("reference anchor " + std::to_string(reference_id()) + " is not in the anchor set");
  }
};

struct TruthPoint
{
  double t = 0.0;
  Vec2 pos = Vec2::Zero();
  Vec2 vel = Vec2::Zero();
  double facing = 0.0; // rad from +Y
  bool stopped = false;
};

// Independent RNG stream for (seed, stream id).
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream)
{
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

enum class RngStream : std::uint64_t
{
  tdoa = 1,
  accel = 2,
};

inline double bearing_from_y(const Vec2& v) { return std::atan2(v.x(), v.y()); }

namespace detail
{

struct Leg
{
  Vec2 from, to;
  double t_depart; // leaves `from`
  double t_arrive; // reaches `to`
  double facing;
};

struct Path
{
  std::vector<Leg> legs;
  std::vector<double> dwell_end; // per waypoint: time the person leaves it
  double duration = 0.0;
};

inline Path build_path(const Scenario& sc)
{
  Path path;
  double t = 0.0;
  const auto dwell_at = [&](std::size_t i) {
    const auto it = sc.dwell.find(i);
    return it == sc.dwell.end() ? 0.0 : it->second;
  };
  t += dwell_at(0);
  path.dwell_end.push_back(t);
  for (std::size_t i = 1; i < sc.waypoints.size(); ++i)
  {
    const Vec2 d = sc.waypoints[i] - sc.waypoints[i - 1];
    const double len = d.norm();
    if (len <= 1e-9)
      throw DegenerateWaypoints("waypoints " + std::to_string(i - 1) + " and " + std::to_string(i) + " coincide");
    const double arrive = t + len / sc.walk_speed;
    path.legs.push_back({sc.waypoints[i - 1], sc.waypoints[i], t, arrive, bearing_from_y(d)});
    t = arrive + dwell_at(i);
    path.dwell_end.push_back(t);
  }
  path.duration = t;
  return path;
}

// Shortest-way blend from a to b.
inline double blend_angle(double a, double b, double w) { return wrap_angle(a + w * wrap_angle(b - a)); }

inline TruthPoint sample_path(const Path& path, double t, double speed, double turn_duration)
{
  TruthPoint p;
  p.t = t;
  const auto& legs = path.legs;

  // Locate the leg or the dwell interval containing t.
  std::size_t k = 0;
  while (k + 1 < legs.size() && t >= path.dwell_end[k + 1])
    ++k;
  const Leg& leg = legs[k];
  if (t < leg.t_depart)
  {
    p.pos = leg.from;
    p.stopped = true;
  }
  else if (t < leg.t_arrive)
  {
    const double w = (t - leg.t_depart) / (leg.t_arrive - leg.t_depart);
    p.pos = leg.from + w * (leg.to - leg.from);
    p.vel = (leg.to - leg.from).normalized() * speed;
  }
  else
  {
    p.pos = leg.to;
    p.stopped = t > leg.t_arrive || k + 1 == legs.size();
  }

  // Facing: segment bearing, blended across each turn. The turn is centered
  // in the stay at a waypoint (or on the arrival when there is no stay).
  p.facing = leg.facing;
  const double half = 0.5 * turn_duration;
  if (k > 0)
  {
    const double center = 0.5 * (legs[k - 1].t_arrive + leg.t_depart);
    if (t < center + half)
      p.facing = blend_angle(legs[k - 1].facing, leg.facing, std::clamp((t - (center - half)) / turn_duration, 0.0, 1.0));
  }
  if (k + 1 < legs.size())
  {
    const double center = 0.5 * (leg.t_arrive + legs[k + 1].t_depart);
    if (t > center - half)
      p.facing = blend_angle(leg.facing, legs[k + 1].facing, std::clamp((t - (center - half)) / turn_duration, 0.0, 1.0));
  }
  return p;
}

} // namespace detail

// Piecewise-linear constant-speed walk through the waypoints sampled at loc_rate.
inline std::vector<TruthPoint> gen_trajectory(const Scenario& sc)
{
  sc.validate();
  const detail::Path path = detail::build_path(sc);
  const auto count = static_cast<std::size_t>(std::floor(path.duration * sc.loc_rate + 1e-9)) + 1;
  std::vector<TruthPoint> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k)
    out.push_back(detail::sample_path(path, static_cast<double>(k) / sc.loc_rate, sc.walk_speed, sc.turn_duration));
  return out;
}

// True when the anchor lies inside the rear cone blocked by the body.
inline bool is_shadowed(const TruthPoint& truth, const Vec2& anchor, double half_angle)
{
  const Vec2 to_anchor = anchor - truth.pos;
  const double d = to_anchor.norm();
  if (d <= 0.0)
    return false;
  const Vec2 back(-std::sin(truth.facing), -std::cos(truth.facing));
  const double c = std::clamp(to_anchor.dot(back) / d, -1.0, 1.0);
  return std::acos(c) < half_angle;
}

// One epoch of star-pair TDOAs with Gaussian TOA noise and NLOS delay.
template <class Rng>
TdoaSet synth_tdoa(const TruthPoint& truth, const Scenario& sc, Rng& rng)
{
  std::normal_distribution<double> noise(0.0, 1.0);
  std::map<int, double> range; // TOA expressed in meters
  for (const auto& a : sc.anchors.anchors())
  {
    double r = (truth.pos - a.position).norm();
    if (sc.toa_sigma > 0.0)
      r += kSpeedOfLight * sc.toa_sigma * noise(rng);
    if (sc.nlos_delay > 0.0 && is_shadowed(truth, a.position, sc.shadow_half_angle))
      r += kSpeedOfLight * sc.nlos_delay;
    range[a.id] = r;
  }
  TdoaSet set;
  set.epoch = truth.t;
  const double sigma = std::sqrt(2.0) * kSpeedOfLight * sc.toa_sigma;
  for (const auto& p : pairs_from_reference(sc.anchors.ids(), sc.reference_id()))
    set.entries.push_back({p, range[p.anchor_i] - range[p.anchor_j], sigma});
  return set;
}

// Accelerometer stream: gravity plus a sinusoid at the step frequency while
// walking, gravity alone while stopped; magnitude carried on the z axis.
template <class Rng>
std::vector<AccelSample> synth_accel(std::span<const TruthPoint> truth, const Scenario& sc, Rng& rng)
{
  std::vector<AccelSample> out;
  if (truth.empty())
    return out;
  std::normal_distribution<double> noise(0.0, 1.0);
  const double t_end = truth.back().t;
  const auto count = static_cast<std::size_t>(std::floor(t_end * sc.accel_rate + 1e-9)) + 1;
  out.reserve(count);
  std::size_t k = 0;
  for (std::size_t n = 0; n < count; ++n)
  {
    const double t = static_cast<double>(n) / sc.accel_rate;
    while (k + 1 < truth.size() && truth[k + 1].t <= t + 1e-12)
      ++k;
    double mag = kGravity;
    if (!truth[k].stopped)
      mag += sc.accel_amplitude * std::sin(2.0 * std::numbers::pi * sc.step_freq * t);
    if (sc.accel_noise > 0.0)
      mag += sc.accel_noise * noise(rng);
    out.push_back({t, 0.0, 0.0, mag});
  }
  return out;
}

// Measurement streams of one simulated walk.
struct MeasurementLog
{
  std::vector<TdoaSet> epochs;
  std::vector<AccelSample> accel;
};

struct SimulationRun
{
  std::vector<TruthPoint> truth;
  MeasurementLog log;
};

inline SimulationRun simulate(const Scenario& sc)
{
  SimulationRun run;
  run.truth = gen_trajectory(sc);
  auto tdoa_rng = make_rng(sc.seed, static_cast<std::uint64_t>(RngStream::tdoa));
  auto accel_rng = make_rng(sc.seed, static_cast<std::uint64_t>(RngStream::accel));
  run.log.epochs.reserve(run.truth.size());
  for (const auto& p : run.truth)
    run.log.epochs.push_back(synth_tdoa(p, sc, tdoa_rng));
  run.log.accel = synth_accel(std::span<const TruthPoint>(run.truth), sc, accel_rng);
  return run;
}

// Regular polygon inscribed in a circle; the first vertex is repeated at the
// end `laps` times round.
inline std::vector<Vec2> polygon_waypoints(const Vec2& center, double radius, int sides, int laps = 1,
                                           double start_angle = std::numbers::pi / 2.0)
{
  std::vector<Vec2> pts;
  for (int lap = 0; lap < laps; ++lap)
    for (int k = 0; k < sides; ++k)
    {
      const double a = start_angle - 2.0 * std::numbers::pi * k / sides;
      pts.push_back(center + radius * Vec2(std::cos(a), std::sin(a)));
    }
  pts.push_back(pts.front());
  return pts;
}

} // namespace hybridloc
