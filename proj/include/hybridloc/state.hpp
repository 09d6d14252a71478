#pragma once

#include <Eigen/Dense>

namespace hybridloc
{

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

// Planar tag state [x y vx vy] with its covariance (SI units).
struct StateEstimate
{
  Vec4 x = Vec4::Zero();
  Mat4 P = Mat4::Identity();

  StateEstimate() = default;
  StateEstimate(const Vec4& state, const Mat4& cov) : x(state), P(cov) {}

  Vec2 position() const { return x.head<2>(); }
  Vec2 velocity() const { return x.tail<2>(); }

  static StateEstimate at(const Vec2& pos, const Vec2& vel = Vec2::Zero(),
                          const Mat4& cov = Mat4::Identity())
  {
    Vec4 s;
    s << pos, vel;
    return {s, cov};
  }
};

// Smallest eigenvalue of the symmetric part of P.
inline double min_eigenvalue(const Mat4& P)
{
  const Mat4 sym = 0.5 * (P + P.transpose());
  return Eigen::SelfAdjointEigenSolver<Mat4>(sym, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

inline bool is_psd(const Mat4& P, double tol = 1e-9)
{
  return P.allFinite() && min_eigenvalue(P) >= -tol;
}

} // namespace hybridloc
