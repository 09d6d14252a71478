#pragma once

#include "errors.hpp"
#include "state.hpp"

#include <cmath>
#include <cstddef>
#include <deque>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hybridloc
{

constexpr double kGravity = 9.81;

struct AccelSample
{
  double t = 0.0;
  double ax = 0.0, ay = 0.0, az = 0.0;
};

struct TimedValue
{
  double t = 0.0;
  double value = 0.0;
};

struct TimedPosition
{
  double t = 0.0;
  Vec2 pos = Vec2::Zero();
};

struct StepEvent
{
  double t_start = 0.0; // first sample above the start threshold
  double t_end = 0.0;   // first valley after the peak
  double peak_value = 0.0;
};

// Input for the step-analysis prediction. theta is measured from +Y towards +X,
// so the walking direction is [sin(theta), cos(theta)].
struct GaitEstimate
{
  bool moving = false;
  std::optional<double> f_s; // Hz
  std::optional<double> L_s; // m
  double theta = 0.0;        // rad, (-pi, pi]
};

struct GaitConfig
{
  int window = 5;              // moving-average length, samples (odd)
  double threshold = 10.5;     // step start threshold, m/s^2
  double min_peak = 11.5;      // peak floor, m/s^2
  double stop_timeout = 0.8;   // s without a completed step => stopped
  std::size_t heading_points = 5;
};

// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a)
{
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi)
    a += two_pi;
  else if (a > std::numbers::pi)
    a -= two_pi;
  return a;
}

inline std::vector<TimedValue> resultant(std::span<const AccelSample> samples)
{
  if (samples.empty())
    throw EmptyStream("acceleration stream is empty");
  std::vector<TimedValue> out;
  out.reserve(samples.size());
  for (const auto& s : samples)
    out.push_back({s.t, std::sqrt(s.ax * s.ax + s.ay * s.ay + s.az * s.az)});
  return out;
}

// Centered moving average. Near the edges the window is truncated to the
// samples that exist, so output length equals input length.
inline std::vector<double> smooth(std::span<const double> values, int window)
{
  if (window < 1 || window % 2 == 0)
    throw BadWindow("moving-average window must be odd and >= 1, got " + std::to_string(window));
  const auto n = static_cast<std::ptrdiff_t>(values.size());
  const std::ptrdiff_t half = window / 2;
  std::vector<double> out(values.size());
  for (std::ptrdiff_t i = 0; i < n; ++i)
  {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - half);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, i + half);
    double sum = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k)
      sum += values[static_cast<std::size_t>(k)];
    out[static_cast<std::size_t>(i)] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

inline std::vector<TimedValue> smooth(std::span<const TimedValue> series, int window)
{
  std::vector<double> v;
  v.reserve(series.size());
  for (const auto& s : series)
    v.push_back(s.value);
  const auto sm = smooth(std::span<const double>(v), window);
  std::vector<TimedValue> out(series.size());
  for (std::size_t k = 0; k < series.size(); ++k)
    out[k] = {series[k].t, sm[k]};
  return out;
}

// Peak/valley step detector over a smoothed resultant.
//
// A step is a local maximum >= min_peak. Its start is the most recent sample
// that crossed `threshold` upwards before the peak; its end is the first local
// minimum after the peak once the signal is back below `threshold`. Events
// whose valley is not yet observable (needs one sample after it) are left for
// a later call. Events never overlap.
inline std::vector<StepEvent> detect_steps(std::span<const TimedValue> s, double threshold, double min_peak)
{
  std::vector<StepEvent> events;
  const std::size_t n = s.size();
  if (n < 3)
    return events;

  auto is_max = [&](std::size_t i) { return s[i].value > s[i - 1].value && s[i].value >= s[i + 1].value; };
  auto is_min = [&](std::size_t i) { return s[i].value < s[i - 1].value && s[i].value <= s[i + 1].value; };

  std::size_t floor_idx = 0; // samples before this belong to an earlier step
  std::size_t i = 1;
  while (i + 1 < n)
  {
    if (!(is_max(i) && s[i].value >= min_peak && s[i].value > threshold))
    {
      ++i;
      continue;
    }

    std::optional<std::size_t> valley;
    for (std::size_t j = i + 1; j + 1 < n; ++j)
      if (s[j].value < threshold && is_min(j))
      {
        valley = j;
        break;
      }
    if (!valley)
      break;

    std::optional<std::size_t> start;
    for (std::size_t k = i; k > floor_idx; --k)
      if (s[k].value > threshold && s[k - 1].value <= threshold)
      {
        start = k;
        break;
      }
    // A stream that opens mid-step has no crossing; its first sample starts the step.
    if (!start && floor_idx == 0 && s[0].value > threshold)
      start = 0;

    if (start)
      events.push_back({s[*start].t, s[*valley].t, s[i].value});
    floor_idx = *valley;
    i = *valley + 1;
  }
  return events;
}

namespace detail
{

inline Vec2 interpolate(std::span<const TimedPosition> positions, double t)
{
  for (std::size_t k = 1; k < positions.size(); ++k)
  {
    const auto& a = positions[k - 1];
    const auto& b = positions[k];
    if (t <= b.t)
    {
      const double span = b.t - a.t;
      const double w = span > 0.0 ? (t - a.t) / span : 1.0;
      return a.pos + w * (b.pos - a.pos);
    }
  }
  return positions.back().pos;
}

} // namespace detail

struct StepParams
{
  double f_s = 0.0;
  double L_s = 0.0;
};

// Frequency from the latest step's duration; length from the position
// history linearly interpolated at the step's start and end.
inline StepParams step_params(std::span<const StepEvent> events, std::span<const TimedPosition> positions)
{
  if (events.empty())
    throw InsufficientHistory("no completed step");
  const StepEvent& e = events.back();
  if (!(e.t_end > e.t_start))
    throw InsufficientHistory("step has non-positive duration");
  if (positions.empty() || positions.front().t > e.t_start || positions.back().t < e.t_end)
    throw InsufficientHistory("position history does not cover the latest step");
  const Vec2 p0 = detail::interpolate(positions, e.t_start);
  const Vec2 p1 = detail::interpolate(positions, e.t_end);
  return {1.0 / (e.t_end - e.t_start), (p1 - p0).norm()};
}

// Total-least-squares line through the points; returns the angle of its
// direction from +Y, oriented along the first->last displacement.
inline double heading(std::span<const Vec2> points)
{
  if (points.size() < 2)
    throw DegenerateSet("heading needs at least 2 positions");
  Vec2 mean = Vec2::Zero();
  for (const auto& p : points)
    mean += p;
  mean /= static_cast<double>(points.size());

  double sxx = 0.0, syy = 0.0, sxy = 0.0, spread = 0.0;
  for (const auto& p : points)
  {
    const Vec2 d = p - mean;
    sxx += d.x() * d.x();
    syy += d.y() * d.y();
    sxy += d.x() * d.y();
    spread = std::max(spread, d.norm());
  }
  if (spread <= 1e-9)
    throw DegenerateSet("all positions coincide");

  // Principal axis angle, counter-clockwise from +X.
  const double axis = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  Vec2 dir(std::cos(axis), std::sin(axis));
  if (dir.dot(points.back() - points.front()) < 0.0)
    dir = -dir;
  return wrap_angle(std::atan2(dir.x(), dir.y()));
}

inline bool motion_state(std::span<const StepEvent> events, double now, double stop_timeout)
{
  if (events.empty())
    return false;
  return (now - events.back().t_end) < stop_timeout;
}

// Streaming step analysis: fed raw accelerometer samples and the tag's own
// position fixes, it reports a GaitEstimate on demand. Single writer.
class GaitTracker
{
public:
  explicit GaitTracker(GaitConfig cfg = {}) : cfg_(cfg)
  {
    if (cfg_.window < 1 || cfg_.window % 2 == 0)
      throw BadWindow("moving-average window must be odd and >= 1, got " + std::to_string(cfg_.window));
  }

  const GaitConfig& config() const { return cfg_; }

  void push_accel(const AccelSample& s)
  {
    if (!raw_.empty() && !(s.t > raw_.back().t))
      throw InvalidMeasurement("acceleration timestamps must be strictly increasing");
    raw_.push_back({s.t, std::sqrt(s.ax * s.ax + s.ay * s.ay + s.az * s.az)});
    finalize_smoothed();
    scan();
  }

  void push_fix(const TimedPosition& p)
  {
    fixes_.push_back(p);
    while (fixes_.size() > kMaxFixes)
      fixes_.pop_front();
  }

  std::span<const StepEvent> events() const { return events_; }

  // Nothing to report until the first step has been seen. A moving estimate
  // also needs step parameters and a heading; until both exist there is none.
  std::optional<GaitEstimate> estimate(double now) const
  {
    if (events_.empty())
      return std::nullopt;

    GaitEstimate g;
    g.moving = motion_state(events_, now, cfg_.stop_timeout);
    const auto partial = [&]() -> std::optional<GaitEstimate> {
      if (g.moving)
        return std::nullopt;
      return g;
    };
    if (!last_params_ || fixes_.size() < 2)
      return partial();

    const std::size_t n = std::min(cfg_.heading_points, fixes_.size());
    std::vector<Vec2> recent;
    recent.reserve(n);
    for (std::size_t k = fixes_.size() - n; k < fixes_.size(); ++k)
      recent.push_back(fixes_[k].pos);
    try
    {
      g.theta = heading(recent);
    }
    catch (const DegenerateSet&)
    {
      return partial();
    }
    g.f_s = last_params_->f_s;
    g.L_s = last_params_->L_s;
    return g;
  }

  // Re-derives step frequency/length for the newest step the fix history covers.
  void refresh_step_params()
  {
    if (events_.empty() || fixes_.empty())
      return;
    const std::vector<TimedPosition> hist(fixes_.begin(), fixes_.end());
    for (std::size_t k = events_.size(); k-- > params_from_;)
    {
      if (events_[k].t_end > hist.back().t)
        continue;
      try
      {
        last_params_ = step_params(std::span<const StepEvent>(events_.data(), k + 1), hist);
        params_from_ = k + 1;
      }
      catch (const InsufficientHistory&)
      {
      }
      return;
    }
  }

private:
  static constexpr std::size_t kMaxFixes = 64;
  static constexpr std::size_t kMaxPending = 500;

  void finalize_smoothed()
  {
    const std::size_t half = static_cast<std::size_t>(cfg_.window / 2);
    // A smoothed value is final once `half` newer raw samples exist.
    while (next_smooth_ + half < raw_.size() + raw_offset_)
    {
      const std::size_t idx = next_smooth_ - raw_offset_;
      const std::size_t lo = idx >= half ? idx - half : 0;
      const std::size_t hi = idx + half;
      double sum = 0.0;
      for (std::size_t k = lo; k <= hi; ++k)
        sum += raw_[k].value;
      smoothed_.push_back({raw_[idx].t, sum / static_cast<double>(hi - lo + 1)});
      ++next_smooth_;
    }
    // Keep only what future windows still need.
    while (raw_.size() > static_cast<std::size_t>(cfg_.window) && next_smooth_ - raw_offset_ > half)
    {
      raw_.pop_front();
      ++raw_offset_;
    }
  }

  void scan()
  {
    if (smoothed_.size() < 3)
      return;
    const std::vector<TimedValue> buf(smoothed_.begin(), smoothed_.end());
    const auto found = detect_steps(buf, cfg_.threshold, cfg_.min_peak);
    if (!found.empty())
    {
      events_.insert(events_.end(), found.begin(), found.end());
      // Restart the scan at the last valley.
      while (!smoothed_.empty() && smoothed_.front().t < found.back().t_end)
        smoothed_.pop_front();
    }
    else if (smoothed_.size() > kMaxPending)
    {
      while (smoothed_.size() > kMaxPending / 2 || (!smoothed_.empty() && smoothed_.front().value > cfg_.threshold))
        smoothed_.pop_front();
    }
  }

  GaitConfig cfg_;
  std::deque<TimedValue> raw_;
  std::size_t raw_offset_ = 0;
  std::size_t next_smooth_ = 0;
  std::deque<TimedValue> smoothed_;
  std::vector<StepEvent> events_;
  std::deque<TimedPosition> fixes_;
  std::optional<StepParams> last_params_;
  std::size_t params_from_ = 0;
};

} // namespace hybridloc
