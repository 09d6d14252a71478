#pragma once

#include "errors.hpp"
#include "gait.hpp"
#include "geomodel.hpp"
#include "state.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace hybridloc
{

// Time-update parameters shared by both prediction branches.
struct ProcessModel
{
  double dt = 0.1;          // refresh period, s
  double q1 = 0.5;          // DWNA intensity for the motion branch
  Mat4 q2 = Vec4(0.01, 0.01, 0.04, 0.04).asDiagonal(); // additive covariance of the step branch
  double stop_decay = 0.0;  // velocity retention when stopped, [0, 1]
  // When set, the step branch also replaces the velocity with the gait
  // velocity instead of carrying the previous one. Without it the motion
  // branch keeps the pre-turn velocity for about a second after each corner.
  bool step_velocity = true;

  void validate() const
  {
    if (!(dt > 0.0))
      throw ConfigError("process model dt must be > 0");
    if (!(q1 > 0.0))
      throw ConfigError("process model q1 must be > 0");
    if (!(stop_decay >= 0.0 && stop_decay <= 1.0))
      throw ConfigError("stop_decay must lie in [0, 1]");
    if (!is_psd(q2))
      throw ConfigError("q2 must be positive semi-definite");
  }

  // Constant-velocity transition.
  Mat4 transition() const
  {
    Mat4 F = Mat4::Identity();
    F(0, 2) = dt;
    F(1, 3) = dt;
    return F;
  }

  // Transition used once the person has stopped.
  Mat4 stopped_transition() const
  {
    Mat4 F = Mat4::Identity();
    F(2, 2) = stop_decay;
    F(3, 3) = stop_decay;
    return F;
  }

  // Discrete white noise acceleration covariance.
  Mat4 motion_noise() const
  {
    const double dt2 = dt * dt;
    const double dt3 = dt2 * dt;
    const double dt4 = dt3 * dt;
    Mat4 Q = Mat4::Zero();
    Q(0, 0) = Q(1, 1) = dt4 / 4.0;
    Q(0, 2) = Q(2, 0) = Q(1, 3) = Q(3, 1) = dt3 / 2.0;
    Q(2, 2) = Q(3, 3) = dt2;
    return q1 * Q;
  }
};

struct Prediction
{
  Vec4 x = Vec4::Zero();
  Mat4 P = Mat4::Identity();
};

struct FusedPrediction
{
  Prediction motion;
  Prediction step;
  Prediction fused;
  Mat4 K_step = Mat4::Zero();
};

struct UpdateConfig
{
  // Innovation gate in standard deviations; <= 0 or infinity disables gating.
  double gate = 3.0;
};

struct UpdateResult
{
  StateEstimate state;
  std::vector<bool> gated; // per input entry
  std::size_t used = 0;
  bool all_gated = false;
};

namespace detail
{

inline Mat4 symmetrize(const Mat4& P) { return 0.5 * (P + P.transpose()); }

} // namespace detail

inline Prediction predict_motion(const StateEstimate& state, const ProcessModel& model)
{
  const Mat4 F = model.transition();
  return {F * state.x, detail::symmetrize(F * state.P * F.transpose() + model.motion_noise())};
}

// Step-analysis branch: dead-reckons one refresh period along the estimated
// heading while walking, applies the stopped dynamics otherwise.
inline Prediction predict_step(const StateEstimate& state, const GaitEstimate& gait, const ProcessModel& model)
{
  if (gait.moving)
  {
    if (!gait.f_s || !gait.L_s)
      throw MissingGait("moving gait estimate lacks step frequency or length");
    const double speed = *gait.f_s * *gait.L_s;
    const Vec2 dir(std::sin(gait.theta), std::cos(gait.theta));
    Vec4 x = state.x;
    x.head<2>() += dir * (speed * model.dt);
    if (model.step_velocity)
      x.tail<2>() = dir * speed;
    return {x, detail::symmetrize(state.P + model.q2)};
  }
  const Mat4 F2 = model.stopped_transition();
  return {F2 * state.x, detail::symmetrize(F2 * state.P * F2.transpose() + model.q2)};
}

// Kalman-style combination of the two predictions.
inline FusedPrediction fuse_predictions(const Prediction& motion, const Prediction& step)
{
  const Mat4 S = motion.P + step.P;
  const Eigen::JacobiSVD<Mat4> svd(S);
  const auto sv = svd.singularValues();
  if (!S.allFinite() || !(sv(3) > 0.0) || sv(0) / sv(3) >= 1e12)
    throw SingularFusion("P1 + P2 is not invertible");

  FusedPrediction out;
  out.motion = motion;
  out.step = step;
  out.K_step = S.transpose().partialPivLu().solve(motion.P.transpose()).transpose();
  out.fused.x = motion.x + out.K_step * (step.x - motion.x);
  out.fused.P = detail::symmetrize((Mat4::Identity() - out.K_step) * motion.P);
  return out;
}

// EKF measurement update with per-entry innovation gating. Gated entries are
// dropped and the update is recomputed on the rest.
inline UpdateResult update_tdoa(const Prediction& prior, const TdoaSet& tdoas, const AnchorSet& anchors,
                                const UpdateConfig& cfg = {})
{
  if (tdoas.empty())
    throw NotEnoughMeasurements("TDOA update needs at least one measurement");

  UpdateResult out;
  out.state = StateEstimate(prior.x, prior.P);
  out.gated.assign(tdoas.size(), false);

  const MeasurementModel full(anchors, tdoas.pairs());
  const Vec2 pos = prior.x.head<2>();
  const Eigen::VectorXd h = tdoa_predict(pos, full);
  const Eigen::MatrixXd H = tdoa_jacobian(pos, full);
  const Eigen::VectorXd z = tdoas.values();
  const Eigen::VectorXd r = tdoas.variances();

  std::vector<Eigen::Index> keep;
  const bool gating = cfg.gate > 0.0 && std::isfinite(cfg.gate);
  for (Eigen::Index k = 0; k < z.size(); ++k)
  {
    if (gating)
    {
      const double s = (H.row(k) * prior.P * H.row(k).transpose())(0, 0) + r(k);
      if (std::abs(z(k) - h(k)) > cfg.gate * std::sqrt(s))
      {
        out.gated[static_cast<std::size_t>(k)] = true;
        continue;
      }
    }
    keep.push_back(k);
  }
  out.used = keep.size();
  if (keep.empty())
  {
    out.all_gated = true;
    return out;
  }

  const auto m = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd Hk(m, 4);
  Eigen::VectorXd innov(m);
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index k = 0; k < m; ++k)
  {
    Hk.row(k) = H.row(keep[static_cast<std::size_t>(k)]);
    innov(k) = z(keep[static_cast<std::size_t>(k)]) - h(keep[static_cast<std::size_t>(k)]);
    R(k, k) = r(keep[static_cast<std::size_t>(k)]);
  }

  const Eigen::MatrixXd S = Hk * prior.P * Hk.transpose() + R;
  const Eigen::MatrixXd PHt = prior.P * Hk.transpose();
  const Eigen::MatrixXd K = S.ldlt().solve(PHt.transpose()).transpose();
  out.state.x = prior.x + K * innov;
  // Joseph form; equals (I - K H) P for the optimal gain.
  const Mat4 IKH = Mat4::Identity() - K * Hk;
  out.state.P = detail::symmetrize(IKH * prior.P * IKH.transpose() + K * R * K.transpose());
  return out;
}

struct FilterModels
{
  AnchorSet anchors;
  ProcessModel process;
  UpdateConfig update;
};

struct StepOutcome
{
  StateEstimate state;
  bool all_gated = false;
  std::size_t gated = 0;     // entries rejected by the gate
  bool cold_start = false;   // step branch not used
  bool fusion_fallback = false;
};

// Baseline: motion prediction followed by the TDOA update.
inline StepOutcome ekf_step(const StateEstimate& state, const TdoaSet& tdoas, const FilterModels& models)
{
  const Prediction pred = predict_motion(state, models.process);
  const UpdateResult upd = update_tdoa(pred, tdoas, models.anchors, models.update);
  StepOutcome out;
  out.state = upd.state;
  out.all_gated = upd.all_gated;
  out.gated = tdoas.size() - upd.used;
  return out;
}

// Dual-prediction filter: motion and step branches fused, then the TDOA
// update. Without a gait estimate the step branch is skipped.
inline StepOutcome fused_ekf_step(const StateEstimate& state, const std::optional<GaitEstimate>& gait,
                                  const TdoaSet& tdoas, const FilterModels& models)
{
  const Prediction motion = predict_motion(state, models.process);
  Prediction prior = motion;
  StepOutcome out;
  out.cold_start = !gait.has_value();
  if (gait)
  {
    try
    {
      prior = fuse_predictions(motion, predict_step(state, *gait, models.process)).fused;
    }
    catch (const SingularFusion&)
    {
      out.fusion_fallback = true;
    }
  }
  const UpdateResult upd = update_tdoa(prior, tdoas, models.anchors, models.update);
  out.state = upd.state;
  out.all_gated = upd.all_gated;
  out.gated = tdoas.size() - upd.used;
  return out;
}

struct LsOptions
{
  double tolerance = 1e-6; // stop when the step is shorter than this, m
  int max_iterations = 50;
  double divergence_scale = 10.0; // of the anchor bounding box
};

struct LsFix
{
  Vec2 pos = Vec2::Zero();
  bool converged = false;
  int iterations = 0;
};

// Weighted Gauss-Newton on sum((z - h(p))^2 / sigma^2).
inline LsFix ls_locate(const TdoaSet& tdoas, const AnchorSet& anchors, const Vec2& initial_guess,
                       const LsOptions& opts = {})
{
  if (tdoas.size() < 2)
    throw NotEnoughMeasurements("least squares needs at least 2 TDOA entries, got " +
                                std::to_string(tdoas.size()));
  const MeasurementModel model(anchors, tdoas.pairs());
  const Eigen::VectorXd z = tdoas.values();
  Eigen::VectorXd w = tdoas.variances();
  for (Eigen::Index k = 0; k < w.size(); ++k)
    w(k) = w(k) > 0.0 ? 1.0 / w(k) : 1.0;

  const auto [lo, hi] = anchors.bounds();
  const Vec2 center = 0.5 * (lo + hi);
  const Vec2 half = (0.5 * (hi - lo)).cwiseMax(Vec2::Constant(1.0)) * opts.divergence_scale;
  auto outside = [&](const Vec2& p) { return ((p - center).cwiseAbs() - half).maxCoeff() > 0.0; };

  LsFix fix;
  fix.pos = initial_guess;
  if (!initial_guess.allFinite() || outside(initial_guess))
    throw Diverged("initial guess lies outside the search region");

  for (int it = 0; it < opts.max_iterations; ++it)
  {
    const Eigen::VectorXd res = z - tdoa_predict(fix.pos, model);
    const Eigen::MatrixXd J = tdoa_jacobian(fix.pos, model).leftCols<2>();
    const Eigen::Matrix2d JtWJ = J.transpose() * w.asDiagonal() * J;
    const Vec2 JtWr = J.transpose() * w.asDiagonal() * res;
    const Vec2 step = JtWJ.ldlt().solve(JtWr);
    if (!step.allFinite())
      throw Diverged("normal equations are singular");
    fix.pos += step;
    fix.iterations = it + 1;
    if (outside(fix.pos))
      throw Diverged("iterate left the search region");
    if (step.norm() < opts.tolerance)
    {
      fix.converged = true;
      break;
    }
  }
  return fix;
}

// Seed state for both Kalman filters.
inline StateEstimate initial_state(const Vec2& pos, double pos_var = 1.0, double vel_var = 0.25)
{
  return StateEstimate::at(pos, Vec2::Zero(), Vec4(pos_var, pos_var, vel_var, vel_var).asDiagonal());
}

} // namespace hybridloc
