#include <hybridloc/gait.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace hybridloc;

namespace
{

constexpr double kPi = std::numbers::pi;

std::vector<TimedValue> sinusoid(double freq, double duration, double rate = 50.0, double amp = 3.0)
{
  std::vector<TimedValue> out;
  const auto n = static_cast<int>(std::floor(duration * rate + 1e-9));
  for (int k = 0; k < n; ++k)
  {
    const double t = k / rate;
    out.push_back({t, kGravity + amp * std::sin(2.0 * kPi * freq * t)});
  }
  return out;
}

std::vector<Vec2> line(const Vec2& from, const Vec2& step, int n)
{
  std::vector<Vec2> pts;
  for (int k = 0; k < n; ++k)
    pts.push_back(from + k * step);
  return pts;
}

} // namespace

TEST(Resultant, PythagoreanExamples)
{
  const std::vector<AccelSample> s{{0.0, 0.0, 0.0, 9.81}, {0.1, 3.0, 4.0, 0.0}, {0.2, 1.0, 2.0, 2.0}};
  const auto r = resultant(s);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_DOUBLE_EQ(r[0].value, 9.81);
  EXPECT_DOUBLE_EQ(r[1].value, 5.0);
  EXPECT_DOUBLE_EQ(r[2].value, 3.0);
  EXPECT_DOUBLE_EQ(r[2].t, 0.2);
}

TEST(Resultant, EmptyStreamThrows)
{
  EXPECT_THROW(resultant(std::span<const AccelSample>{}), EmptyStream);
}

TEST(Smooth, WindowOneIsIdentity)
{
  const std::vector<double> v{1.0, -2.0, 5.5, 0.25};
  EXPECT_EQ(smooth(v, 1), v);
}

TEST(Smooth, ConstantStaysConstant)
{
  const std::vector<double> v(17, 4.2);
  for (int w : {1, 3, 5, 9, 21})
    for (double x : smooth(v, w))
      EXPECT_NEAR(x, 4.2, 1e-12);
}

TEST(Smooth, EdgeTruncatedExample)
{
  const std::vector<double> v{0, 3, 0, 3, 0};
  const auto s = smooth(v, 3);
  const std::vector<double> expected{1.5, 1.0, 2.0, 1.0, 1.5};
  ASSERT_EQ(s.size(), expected.size());
  for (std::size_t k = 0; k < s.size(); ++k)
    EXPECT_NEAR(s[k], expected[k], 1e-12);
}

TEST(Smooth, BadWindowThrows)
{
  const std::vector<double> v{1, 2, 3};
  EXPECT_THROW(smooth(v, 0), BadWindow);
  EXPECT_THROW(smooth(v, 4), BadWindow);
  EXPECT_THROW(smooth(v, -3), BadWindow);
}

// Interior windows are full, so the mean over a periodic signal whose edges
// are padded by whole periods is preserved.
TEST(Smooth, PreservesMeanOfInteriorWindows)
{
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int w : {3, 5, 7})
  {
    const int half = w / 2;
    std::vector<double> core(40);
    for (double& x : core)
      x = u(rng);
    // Cyclic padding: the full windows over the core see each sample w times.
    std::vector<double> padded;
    padded.insert(padded.end(), core.end() - half, core.end());
    padded.insert(padded.end(), core.begin(), core.end());
    padded.insert(padded.end(), core.begin(), core.begin() + half);
    const auto s = smooth(padded, w);
    double mean_core = 0.0, mean_s = 0.0;
    for (std::size_t k = 0; k < core.size(); ++k)
    {
      mean_core += core[k];
      mean_s += s[k + static_cast<std::size_t>(half)];
    }
    EXPECT_NEAR(mean_s / core.size(), mean_core / core.size(), 1e-12);
  }
}

TEST(DetectSteps, ConstantSignalHasNoSteps)
{
  std::vector<TimedValue> s;
  for (int k = 0; k < 200; ++k)
    s.push_back({k * 0.02, kGravity});
  EXPECT_TRUE(detect_steps(s, 10.8, 12.0).empty());
}

TEST(DetectSteps, FiveStepSequence)
{
  const auto s = sinusoid(2.0, 2.5);
  const auto ev = detect_steps(s, 10.8, 12.0);
  ASSERT_EQ(ev.size(), 5u);
  for (std::size_t k = 0; k < ev.size(); ++k)
  {
    EXPECT_LT(ev[k].t_start, ev[k].t_end);
    EXPECT_GT(ev[k].peak_value, 10.8);
    EXPECT_NEAR(ev[k].peak_value, kGravity + 3.0, 0.05);
    // Valleys of the sinusoid sit at (k + 3/4) / f.
    EXPECT_NEAR(ev[k].t_end, (k + 0.75) / 2.0, 0.011);
    if (k > 0)
      EXPECT_GE(ev[k].t_start, ev[k - 1].t_end);
  }
}

TEST(DetectSteps, PeakBelowFloorIgnored)
{
  std::vector<TimedValue> s;
  for (int k = 0; k < 50; ++k)
  {
    const double t = k * 0.02;
    s.push_back({t, kGravity + 1.19 * std::exp(-std::pow((t - 0.5) / 0.1, 2))});
  }
  double peak = 0.0;
  for (const auto& v : s)
    peak = std::max(peak, v.value);
  ASSERT_NEAR(peak, 11.0, 1e-9);
  EXPECT_TRUE(detect_steps(s, 10.5, 12.0).empty());
}

// Analytic oracle: maxima of 9.81 + 3 sin(2 pi f t) are at (k + 1/4)/f and the
// following valleys at (k + 3/4)/f. A step is reportable once its valley has a
// later sample.
TEST(DetectSteps, CountMatchesAnalyticExtrema)
{
  const double rate = 50.0, duration = 2.5;
  for (double f = 1.0; f <= 3.0 + 1e-9; f += 0.25)
  {
    const auto s = sinusoid(f, duration, rate);
    const double t_last = s.back().t;
    int expected = 0;
    for (int k = 0;; ++k)
    {
      const double valley = (k + 0.75) / f;
      if (valley + 1.0 / rate > t_last + 1e-9)
        break;
      ++expected;
    }
    EXPECT_EQ(static_cast<int>(detect_steps(s, 10.8, 12.0).size()), expected) << "f = " << f;
  }
}

TEST(StepParams, UniformMotion)
{
  const std::vector<StepEvent> ev{{0.0, 0.5, 12.0}};
  std::vector<TimedPosition> pos;
  for (int k = 0; k <= 10; ++k)
    pos.push_back({k * 0.1, {0.0, 1.4 * k * 0.1}});
  const auto p = step_params(ev, pos);
  EXPECT_NEAR(p.f_s, 2.0, 1e-12);
  EXPECT_NEAR(p.L_s, 0.7, 1e-12);
}

TEST(StepParams, StationaryGivesZeroLength)
{
  const std::vector<StepEvent> ev{{0.1, 0.4, 12.0}};
  const std::vector<TimedPosition> pos{{0.0, {1.0, 2.0}}, {0.5, {1.0, 2.0}}};
  EXPECT_DOUBLE_EQ(step_params(ev, pos).L_s, 0.0);
}

TEST(StepParams, DistanceFormulaExample)
{
  const std::vector<StepEvent> ev{{1.0, 1.45, 12.0}};
  const std::vector<TimedPosition> pos{{1.0, {0.0, 0.0}}, {1.45, {0.3, 0.6}}};
  const auto p = step_params(ev, pos);
  EXPECT_NEAR(p.f_s, 1.0 / 0.45, 1e-12);
  EXPECT_NEAR(p.L_s, std::sqrt(0.45), 1e-12);
}

TEST(StepParams, InterpolatesBetweenFixes)
{
  const std::vector<StepEvent> ev{{0.05, 0.25, 12.0}};
  const std::vector<TimedPosition> pos{{0.0, {0.0, 0.0}}, {0.1, {1.0, 0.0}}, {0.2, {1.0, 1.0}}, {0.3, {1.0, 2.0}}};
  // (0.5, 0) -> (1, 1.5)
  EXPECT_NEAR(step_params(ev, pos).L_s, std::hypot(0.5, 1.5), 1e-12);
}

TEST(StepParams, FrequencyTimesDurationIsOne)
{
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.05, 1.5);
  for (int k = 0; k < 100; ++k)
  {
    const double t0 = u(rng), d = u(rng);
    const std::vector<StepEvent> ev{{t0, t0 + d, 12.0}};
    const std::vector<TimedPosition> pos{{0.0, {0.0, 0.0}}, {4.0, {1.0, 1.0}}};
    EXPECT_NEAR(step_params(ev, pos).f_s * (ev[0].t_end - ev[0].t_start), 1.0, 1e-12);
  }
}

TEST(StepParams, InsufficientHistoryThrows)
{
  const std::vector<TimedPosition> pos{{0.0, {0.0, 0.0}}, {0.3, {0.0, 0.3}}};
  EXPECT_THROW(step_params(std::span<const StepEvent>{}, pos), InsufficientHistory);
  const std::vector<StepEvent> ev{{0.1, 0.5, 12.0}};
  EXPECT_THROW(step_params(ev, pos), InsufficientHistory);
}

TEST(Heading, AxisAndDiagonalCases)
{
  EXPECT_NEAR(heading(line({1.0, 1.0}, {0.0, 0.1}, 5)), 0.0, 1e-9);
  EXPECT_NEAR(heading(line({1.0, 1.0}, {0.1, 0.0}, 5)), kPi / 2.0, 1e-9);
  EXPECT_NEAR(heading(line({1.0, 1.0}, {0.1, 0.1}, 5)), kPi / 4.0, 1e-9);
  EXPECT_NEAR(heading(line({1.0, 1.0}, {-0.1, 0.0}, 5)), -kPi / 2.0, 1e-9);
  EXPECT_NEAR(std::abs(heading(line({1.0, 1.0}, {0.0, -0.1}, 5))), kPi, 1e-9);
}

TEST(Heading, DegenerateSetThrows)
{
  EXPECT_THROW(heading(std::vector<Vec2>(4, Vec2(2.0, 3.0))), DegenerateSet);
  EXPECT_THROW(heading(std::vector<Vec2>{Vec2(0.0, 0.0)}), DegenerateSet);
}

TEST(Heading, SignFollowsDisplacement)
{
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 0.02);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  for (int k = 0; k < 50; ++k)
  {
    const double a = ang(rng);
    std::vector<Vec2> pts;
    for (int j = 0; j < 6; ++j)
      pts.push_back(Vec2(std::sin(a), std::cos(a)) * (0.2 * j) + Vec2(n(rng), n(rng)));
    const double th = heading(pts);
    const Vec2 dir(std::sin(th), std::cos(th));
    EXPECT_GE(dir.dot(pts.back() - pts.front()), 0.0);
    std::vector<Vec2> rev(pts.rbegin(), pts.rend());
    EXPECT_NEAR(std::abs(wrap_angle(heading(rev) - th)), kPi, 1e-9);
  }
}

// Rotating the points counter-clockwise by phi lowers the from-Y angle by phi.
TEST(Heading, RotationEquivariantAndTranslationInvariant)
{
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  for (int k = 0; k < 50; ++k)
  {
    std::vector<Vec2> pts;
    const Vec2 dir(u(rng), u(rng));
    for (int j = 0; j < 5; ++j)
      pts.push_back(dir * j + Vec2(u(rng), u(rng)) * 0.1);
    const double base = heading(pts);
    const double phi = ang(rng);
    const Eigen::Rotation2Dd R(phi);
    std::vector<Vec2> rotated, shifted;
    const Vec2 shift(u(rng), u(rng));
    for (const auto& p : pts)
    {
      rotated.push_back(R * p);
      shifted.push_back(p + shift);
    }
    EXPECT_NEAR(wrap_angle(heading(rotated) - wrap_angle(base - phi)), 0.0, 1e-9);
    EXPECT_NEAR(wrap_angle(heading(shifted) - base), 0.0, 1e-9);
  }
}

TEST(MotionState, DecidedRule)
{
  EXPECT_FALSE(motion_state({}, 5.0, 0.8));
  const std::vector<StepEvent> ev{{1.0, 1.3, 12.0}};
  EXPECT_TRUE(motion_state(ev, 1.5, 0.8));
  EXPECT_FALSE(motion_state(ev, 2.3, 0.8));
}

TEST(WrapAngle, Range)
{
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_NEAR(wrap_angle(-kPi), kPi, 1e-15);
  EXPECT_NEAR(wrap_angle(3.0 * kPi / 2.0), -kPi / 2.0, 1e-12);
  EXPECT_NEAR(wrap_angle(-5.0 * kPi / 2.0), -kPi / 2.0, 1e-12);
}

TEST(GaitTracker, StreamingMatchesBatchDetection)
{
  GaitConfig cfg;
  GaitTracker tr(cfg);
  std::vector<AccelSample> samples;
  for (int k = 0; k < 250; ++k)
  {
    const double t = k * 0.02;
    samples.push_back({t, 0.0, 0.0, kGravity + 3.0 * std::sin(2.0 * kPi * 2.0 * t)});
    tr.push_accel(samples.back());
  }
  const auto batch = detect_steps(smooth(resultant(samples), cfg.window), cfg.threshold, cfg.min_peak);
  ASSERT_EQ(tr.events().size(), batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k)
  {
    EXPECT_DOUBLE_EQ(tr.events()[k].t_start, batch[k].t_start);
    EXPECT_DOUBLE_EQ(tr.events()[k].t_end, batch[k].t_end);
  }
}

TEST(GaitTracker, EstimateFromStepsAndFixes)
{
  GaitTracker tr;
  EXPECT_FALSE(tr.estimate(0.0).has_value());
  for (int k = 0; k < 100; ++k)
  {
    const double t = k * 0.02;
    tr.push_accel({t, 0.0, 0.0, kGravity + 3.0 * std::sin(2.0 * kPi * 2.0 * t)});
    if (k % 5 == 0)
      tr.push_fix({t, {0.0, 1.2 * t}});
  }
  // A moving estimate needs step parameters first.
  EXPECT_FALSE(tr.estimate(1.98).has_value());
  tr.refresh_step_params();
  const auto g = tr.estimate(1.98);
  ASSERT_TRUE(g.has_value());
  EXPECT_TRUE(g->moving);
  ASSERT_TRUE(g->f_s && g->L_s);
  EXPECT_NEAR(*g->f_s * *g->L_s, 1.2, 1e-9);
  EXPECT_NEAR(g->theta, 0.0, 1e-9);
  EXPECT_FALSE(tr.estimate(10.0)->moving);
}

TEST(GaitTracker, RejectsNonIncreasingTime)
{
  GaitTracker tr;
  tr.push_accel({0.1, 0, 0, 9.81});
  EXPECT_THROW(tr.push_accel({0.1, 0, 0, 9.81}), InvalidMeasurement);
  EXPECT_THROW(GaitTracker(GaitConfig{4}), BadWindow);
}
