#pragma once

#include "errors.hpp"
#include "sim.hpp"
#include "state.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hybridloc
{

enum FixFlags : std::uint32_t
{
  kFlagNone = 0,
  kFlagGated = 1u << 0,      // every TDOA of the epoch was rejected
  kFlagColdStart = 1u << 1,  // filter seeded or running without the step branch
  kFlagFallback = 1u << 2,   // LS failed or fusion fell back to one branch
};

struct Fix
{
  double t = 0.0;
  Vec2 pos = Vec2::Zero();
  std::uint32_t flags = kFlagNone;

  friend bool operator==(const Fix& a, const Fix& b)
  {
    return a.t == b.t && a.pos == b.pos && a.flags == b.flags;
  }
};

struct Track
{
  std::string estimator;
  std::vector<Fix> fixes;
};

struct CdfPoint
{
  double error = 0.0;
  double fraction = 0.0;
};

struct ErrorReport
{
  std::vector<double> errors; // per matched fix, track order
  std::vector<CdfPoint> cdf;
  double max_error = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double mean = 0.0;
};

// Percentile with the "lower" convention: element floor(q * (n - 1)) of the
// sorted sample.
inline double percentile_lower(std::span<const double> sorted, double q)
{
  if (sorted.empty())
    throw NoOverlap("percentile of an empty sample");
  q = std::clamp(q, 0.0, 1.0);
  const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(sorted.size() - 1) + 1e-12));
  return sorted[std::min(idx, sorted.size() - 1)];
}

inline std::vector<CdfPoint> empirical_cdf(std::span<const double> sorted)
{
  std::vector<CdfPoint> cdf;
  cdf.reserve(sorted.size());
  const auto n = static_cast<double>(sorted.size());
  for (std::size_t k = 0; k < sorted.size(); ++k)
    cdf.push_back({sorted[k], static_cast<double>(k + 1) / n});
  return cdf;
}

inline ErrorReport report_from_errors(std::vector<double> errors)
{
  if (errors.empty())
    throw NoOverlap("no errors to summarize");
  ErrorReport rep;
  rep.errors = errors;
  std::sort(errors.begin(), errors.end());
  rep.cdf = empirical_cdf(errors);
  rep.max_error = errors.back();
  rep.p50 = percentile_lower(errors, 0.5);
  rep.p90 = percentile_lower(errors, 0.9);
  double sum = 0.0;
  for (double e : errors)
    sum += e;
  rep.mean = sum / static_cast<double>(errors.size());
  return rep;
}

// Joins each fix to the nearest truth sample within dt/2 and summarizes the
// Euclidean position error.
inline ErrorReport error_report(const Track& track, std::span<const TruthPoint> truth, double dt)
{
  std::vector<double> errors;
  errors.reserve(track.fixes.size());
  const double tol = 0.5 * dt + 1e-9;
  for (const auto& f : track.fixes)
  {
    const auto it = std::lower_bound(truth.begin(), truth.end(), f.t,
                                     [](const TruthPoint& p, double t) { return p.t < t; });
    const TruthPoint* best = nullptr;
    if (it != truth.end())
      best = &*it;
    if (it != truth.begin() && (best == nullptr || std::abs(std::prev(it)->t - f.t) < std::abs(best->t - f.t)))
      best = &*std::prev(it);
    if (best != nullptr && std::abs(best->t - f.t) <= tol)
      errors.push_back((f.pos - best->pos).norm());
  }
  if (errors.empty())
    throw NoOverlap("track '" + track.estimator + "' shares no timestamps with the truth");
  return report_from_errors(std::move(errors));
}

} // namespace hybridloc
