#pragma once

#include "errors.hpp"
#include "state.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace hybridloc
{

constexpr double kSpeedOfLight = 299792458.0;

// Anchor-to-anchor coincidence threshold for the measurement function.
constexpr double kMinAnchorDistance = 1e-9;

inline double ns_to_meters(double ns) { return ns * 1e-9 * kSpeedOfLight; }
inline double meters_to_ns(double m) { return m / kSpeedOfLight * 1e9; }

struct Anchor
{
  int id = 0;
  Vec2 position = Vec2::Zero();
};

// Fixed, synchronized anchors. Ids are unique; at least three for a 2D fix.
class AnchorSet
{
public:
  AnchorSet() = default;

  explicit AnchorSet(std::vector<Anchor> anchors) : anchors_(std::move(anchors))
  {
    if (anchors_.size() < 3)
      throw InvalidGeometry("anchor set needs at least 3 anchors, got " + std::to_string(anchors_.size()));
    std::sort(anchors_.begin(), anchors_.end(), [](const Anchor& a, const Anchor& b) { return a.id < b.id; });
    for (std::size_t k = 1; k < anchors_.size(); ++k)
      if (anchors_[k].id == anchors_[k - 1].id)
        throw InvalidGeometry("duplicate anchor id " + std::to_string(anchors_[k].id));
    for (const auto& a : anchors_)
      if (!a.position.allFinite())
        throw InvalidGeometry("anchor " + std::to_string(a.id) + " has non-finite position");
  }

  std::span<const Anchor> anchors() const { return anchors_; }
  std::size_t size() const { return anchors_.size(); }

  bool contains(int id) const
  {
    return std::any_of(anchors_.begin(), anchors_.end(), [id](const Anchor& a) { return a.id == id; });
  }

  const Anchor& at(int id) const
  {
    for (const auto& a : anchors_)
      if (a.id == id)
        return a;
    throw InvalidGeometry("unknown anchor id " + std::to_string(id));
  }

  std::vector<int> ids() const
  {
    std::vector<int> out;
    out.reserve(anchors_.size());
    for (const auto& a : anchors_)
      out.push_back(a.id);
    return out;
  }

  Vec2 centroid() const
  {
    Vec2 c = Vec2::Zero();
    for (const auto& a : anchors_)
      c += a.position;
    return c / static_cast<double>(anchors_.size());
  }

  // Axis-aligned bounding box as {min, max}.
  std::pair<Vec2, Vec2> bounds() const
  {
    Vec2 lo = anchors_.front().position, hi = lo;
    for (const auto& a : anchors_)
    {
      lo = lo.cwiseMin(a.position);
      hi = hi.cwiseMax(a.position);
    }
    return {lo, hi};
  }

private:
  std::vector<Anchor> anchors_;
};

// Range difference ||p - a_i|| - ||p - a_j||.
struct TdoaPair
{
  int anchor_i = 0;
  int anchor_j = 0;

  friend bool operator==(const TdoaPair&, const TdoaPair&) = default;
};

struct TdoaEntry
{
  TdoaPair pair;
  double value = 0.0; // meters
  double sigma = 0.0; // meters
};

// One epoch of range-difference measurements, R = diag(sigma^2).
struct TdoaSet
{
  double epoch = 0.0;
  std::vector<TdoaEntry> entries;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }

  std::vector<TdoaPair> pairs() const
  {
    std::vector<TdoaPair> out;
    out.reserve(entries.size());
    for (const auto& e : entries)
      out.push_back(e.pair);
    return out;
  }

  Eigen::VectorXd values() const
  {
    Eigen::VectorXd z(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k)
      z(static_cast<Eigen::Index>(k)) = entries[k].value;
    return z;
  }

  Eigen::VectorXd variances() const
  {
    Eigen::VectorXd r(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k)
      r(static_cast<Eigen::Index>(k)) = entries[k].sigma * entries[k].sigma;
    return r;
  }
};

inline void validate_pair(const TdoaPair& p, const AnchorSet& anchors)
{
  if (p.anchor_i == p.anchor_j)
    throw InvalidMeasurement("TDOA pair uses anchor " + std::to_string(p.anchor_i) + " twice");
  if (!anchors.contains(p.anchor_i) || !anchors.contains(p.anchor_j))
    throw InvalidMeasurement("TDOA pair (" + std::to_string(p.anchor_i) + "," + std::to_string(p.anchor_j) +
                             ") references an unknown anchor");
}

// True when the entry is finite and within the baseline length plus 5 sigma.
inline bool is_physical(const TdoaEntry& e, const AnchorSet& anchors)
{
  if (!std::isfinite(e.value) || !std::isfinite(e.sigma) || e.sigma < 0.0)
    return false;
  const double baseline = (anchors.at(e.pair.anchor_i).position - anchors.at(e.pair.anchor_j).position).norm();
  return std::abs(e.value) <= baseline + 5.0 * e.sigma;
}

inline void validate(const TdoaSet& set, const AnchorSet& anchors)
{
  for (const auto& e : set.entries)
  {
    validate_pair(e.pair, anchors);
    if (!is_physical(e, anchors))
      throw InvalidMeasurement("TDOA value " + std::to_string(e.value) + " m for pair (" +
                               std::to_string(e.pair.anchor_i) + "," + std::to_string(e.pair.anchor_j) +
                               ") exceeds the anchor baseline");
  }
}

// Star topology: every non-reference anchor paired against the reference.
inline std::vector<TdoaPair> pairs_from_reference(std::vector<int> anchor_ids, int reference_id)
{
  if (anchor_ids.size() < 2)
    throw UnknownReference("need at least 2 anchor ids to form pairs");
  if (std::find(anchor_ids.begin(), anchor_ids.end(), reference_id) == anchor_ids.end())
    throw UnknownReference("reference anchor " + std::to_string(reference_id) + " is not in the anchor set");
  std::sort(anchor_ids.begin(), anchor_ids.end());
  anchor_ids.erase(std::unique(anchor_ids.begin(), anchor_ids.end()), anchor_ids.end());
  std::vector<TdoaPair> pairs;
  for (int id : anchor_ids)
    if (id != reference_id)
      pairs.push_back({id, reference_id});
  return pairs;
}

// The anchors plus the pairs measured in one epoch (h_k and H_k live here).
class MeasurementModel
{
public:
  MeasurementModel(AnchorSet anchors, std::vector<TdoaPair> pairs, double c = kSpeedOfLight)
      : anchors_(std::move(anchors)), pairs_(std::move(pairs)), c_(c)
  {
    if (pairs_.empty())
      throw InvalidMeasurement("measurement model needs at least one TDOA pair");
    for (const auto& p : pairs_)
      validate_pair(p, anchors_);
  }

  const AnchorSet& anchors() const { return anchors_; }
  std::span<const TdoaPair> pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  double propagation_speed() const { return c_; }

  MeasurementModel with_pairs(std::vector<TdoaPair> pairs) const { return {anchors_, std::move(pairs), c_}; }

private:
  AnchorSet anchors_;
  std::vector<TdoaPair> pairs_;
  double c_;
};

namespace detail
{

inline double distance_checked(const Vec2& pos, const Anchor& a)
{
  const double d = (pos - a.position).norm();
  if (!(d > kMinAnchorDistance))
    throw CoincidentAnchor("tag position coincides with anchor " + std::to_string(a.id));
  return d;
}

} // namespace detail

inline Eigen::VectorXd tdoa_predict(const Vec2& pos, const MeasurementModel& model)
{
  Eigen::VectorXd h(model.size());
  Eigen::Index row = 0;
  for (const auto& p : model.pairs())
  {
    const double di = detail::distance_checked(pos, model.anchors().at(p.anchor_i));
    const double dj = detail::distance_checked(pos, model.anchors().at(p.anchor_j));
    h(row++) = di - dj;
  }
  return h;
}

inline Eigen::VectorXd tdoa_predict(const StateEstimate& state, const MeasurementModel& model)
{
  return tdoa_predict(state.position(), model);
}

// n_pairs x 4; the velocity columns are identically zero.
inline Eigen::MatrixXd tdoa_jacobian(const Vec2& pos, const MeasurementModel& model)
{
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(model.size()), 4);
  Eigen::Index row = 0;
  for (const auto& p : model.pairs())
  {
    const Anchor& ai = model.anchors().at(p.anchor_i);
    const Anchor& aj = model.anchors().at(p.anchor_j);
    const double di = detail::distance_checked(pos, ai);
    const double dj = detail::distance_checked(pos, aj);
    H.block<1, 2>(row, 0) = ((pos - ai.position) / di - (pos - aj.position) / dj).transpose();
    ++row;
  }
  return H;
}

inline Eigen::MatrixXd tdoa_jacobian(const StateEstimate& state, const MeasurementModel& model)
{
  return tdoa_jacobian(state.position(), model);
}

} // namespace hybridloc
