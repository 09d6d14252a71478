#include <hybridloc/hybridloc.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace hybridloc;
namespace fs = std::filesystem;

namespace
{

std::vector<TruthPoint> line_truth(std::size_t n)
{
  std::vector<TruthPoint> truth(n);
  for (std::size_t k = 0; k < n; ++k)
  {
    truth[k].t = 0.1 * static_cast<double>(k);
    truth[k].pos = {0.1 * static_cast<double>(k), 1.0};
  }
  return truth;
}

Track track_from(const std::vector<TruthPoint>& truth, const Vec2& offset = Vec2::Zero())
{
  Track tr{"test", {}};
  for (const auto& p : truth)
    tr.fixes.push_back({p.t, p.pos + offset, kFlagNone});
  return tr;
}

AppConfig parse(const std::string& text)
{
  std::istringstream in(text);
  return parse_config(in, "test.ini");
}

fs::path scratch(const std::string& name)
{
  const fs::path p = fs::temp_directory_path() / ("hybridloc_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args)
{
  const std::string cmd = std::string(HYBRIDLOC_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST(Percentile, LowerConvention)
{
  const std::vector<double> e{0.1, 0.2, 0.3, 0.4};
  EXPECT_EQ(percentile_lower(e, 0.5), 0.2);
  EXPECT_EQ(percentile_lower(e, 0.9), 0.3);
  EXPECT_EQ(percentile_lower(e, 1.0), 0.4);
  EXPECT_EQ(percentile_lower(e, 0.0), 0.1);
  EXPECT_THROW(percentile_lower(std::vector<double>{}, 0.5), NoOverlap);
}

TEST(ErrorReport, HandSortedExample)
{
  const ErrorReport r = report_from_errors({0.4, 0.1, 0.3, 0.2});
  EXPECT_EQ(r.p50, 0.2);
  EXPECT_EQ(r.max_error, 0.4);
  ASSERT_EQ(r.cdf.size(), 4u);
  EXPECT_EQ(r.cdf[0].error, 0.1);
  EXPECT_EQ(r.cdf[0].fraction, 0.25);
  EXPECT_EQ(r.errors, (std::vector<double>{0.4, 0.1, 0.3, 0.2}));
  EXPECT_NEAR(r.mean, 0.25, 1e-15);
}

TEST(ErrorReport, TrackEqualToTruth)
{
  const auto truth = line_truth(20);
  const ErrorReport r = error_report(track_from(truth), truth, 0.1);
  EXPECT_EQ(r.errors.size(), 20u);
  EXPECT_EQ(r.max_error, 0.0);
  EXPECT_EQ(r.p90, 0.0);
}

TEST(ErrorReport, SingleOffsetFix)
{
  const auto truth = line_truth(5);
  Track tr{"one", {{0.2, truth[2].pos + Vec2(0.3, 0.4), kFlagNone}}};
  const ErrorReport r = error_report(tr, truth, 0.1);
  ASSERT_EQ(r.cdf.size(), 1u);
  EXPECT_NEAR(r.cdf[0].error, 0.5, 1e-12);
  EXPECT_EQ(r.cdf[0].fraction, 1.0);
  EXPECT_NEAR(r.p50, 0.5, 1e-12);
}

TEST(ErrorReport, NearestJoinWithinHalfPeriod)
{
  const auto truth = line_truth(5);
  // 0.24 s is nearest to truth[2], 0.26 s to truth[3].
  Track tr{"j", {{0.24, truth[2].pos, kFlagNone}, {0.26, truth[3].pos, kFlagNone}}};
  EXPECT_EQ(error_report(tr, truth, 0.1).max_error, 0.0);
  Track far{"far", {{5.0, {0.0, 0.0}, kFlagNone}}};
  EXPECT_THROW(error_report(far, truth, 0.1), NoOverlap);
}

TEST(ErrorReport, CdfMonotoneEndingAtOne)
{
  std::mt19937_64 rng(8);
  std::exponential_distribution<double> ex(3.0);
  for (int trial = 0; trial < 50; ++trial)
  {
    std::vector<double> e(1 + trial * 7);
    for (auto& v : e)
      v = ex(rng);
    const ErrorReport r = report_from_errors(e);
    for (std::size_t k = 1; k < r.cdf.size(); ++k)
    {
      EXPECT_GE(r.cdf[k].error, r.cdf[k - 1].error);
      EXPECT_GT(r.cdf[k].fraction, r.cdf[k - 1].fraction);
    }
    EXPECT_EQ(r.cdf.back().fraction, 1.0);
    EXPECT_EQ(r.cdf.back().error, r.max_error);
  }
}

TEST(EstimatorList, Parsing)
{
  EXPECT_EQ(parse_estimator_list("fused, ls,fused"), (std::vector<EstimatorKind>{EstimatorKind::fused, EstimatorKind::ls}));
  EXPECT_THROW(parse_estimator_list("kalman"), ConfigError);
  EXPECT_THROW(parse_estimator_list(" , "), ConfigError);
}

TEST(Pipeline, ThreeTracksOfEqualLength)
{
  const AppConfig cfg = default_config();
  const SimulationRun sim = simulate(cfg.scenario);
  const PipelineResult res = run_pipeline(sim.log, cfg.pipeline);
  ASSERT_EQ(res.tracks.size(), 3u);
  EXPECT_EQ(res.tracks[0].estimator, "ls");
  EXPECT_EQ(res.tracks[1].estimator, "ekf");
  EXPECT_EQ(res.tracks[2].estimator, "fused");
  for (const auto& tr : res.tracks)
  {
    ASSERT_EQ(tr.fixes.size(), sim.log.epochs.size()) << tr.estimator;
    for (std::size_t k = 0; k < tr.fixes.size(); ++k)
      EXPECT_EQ(tr.fixes[k].t, sim.log.epochs[k].epoch);
  }
  EXPECT_TRUE(res.tracks[2].fixes.front().flags & kFlagColdStart);
  EXPECT_FALSE(res.steps.empty());
}

TEST(Pipeline, SeedDeterminism)
{
  const AppConfig cfg = default_config();
  const auto a = run_pipeline(simulate(cfg.scenario).log, cfg.pipeline);
  const auto b = run_pipeline(simulate(cfg.scenario).log, cfg.pipeline);
  for (std::size_t t = 0; t < a.tracks.size(); ++t)
    EXPECT_EQ(a.tracks[t].fixes, b.tracks[t].fixes);
  const auto serial = run_batch(cfg.scenario, cfg.pipeline, 1, 3, false);
  const auto parallel = run_batch(cfg.scenario, cfg.pipeline, 1, 3, true);
  for (std::size_t r = 0; r < 3; ++r)
    for (const auto& [name, rep] : serial[r].reports)
      EXPECT_EQ(rep.errors, parallel[r].reports.at(name).errors) << name;
}

TEST(Pipeline, ReplayMatchesInMemoryRun)
{
  AppConfig cfg = default_config();
  cfg.scenario.seed = 17;
  const SimulationRun sim = simulate(cfg.scenario);
  std::stringstream epochs, accel, truth;
  io::write_epochs(epochs, sim.log.epochs);
  io::write_accel(accel, sim.log.accel);
  io::write_truth(truth, sim.truth);
  MeasurementLog replay{io::read_epochs(epochs), io::read_accel(accel)};
  const auto truth_back = io::read_truth(truth);
  ASSERT_EQ(truth_back.size(), sim.truth.size());
  EXPECT_EQ(truth_back.back().pos, sim.truth.back().pos);

  const auto a = run_pipeline(sim.log, cfg.pipeline);
  const auto b = run_pipeline(replay, cfg.pipeline);
  for (std::size_t t = 0; t < a.tracks.size(); ++t)
    EXPECT_EQ(a.tracks[t].fixes, b.tracks[t].fixes) << a.tracks[t].estimator;

  std::stringstream track;
  io::write_track(track, a.tracks[2]);
  EXPECT_EQ(io::read_track(track, "fused").fixes, a.tracks[2].fixes);
}

TEST(Io, SchemaErrorsCarryLineNumbers)
{
  std::istringstream bad_header("t,x,y\n0,1,2\n");
  EXPECT_THROW(io::read_epochs(bad_header), SchemaError);
  std::istringstream bad_value("t,pair_i,pair_j,tdoa_m\n0,1,0,0.5\n0.1,1,0,abc\n");
  try
  {
    io::read_epochs(bad_value);
    FAIL() << "expected SchemaError";
  }
  catch (const SchemaError& e)
  {
    EXPECT_EQ(e.line(), 3u);
  }
  std::istringstream bad_flag("t,x,y,flags\n0,1,2,bogus\n");
  EXPECT_THROW(io::read_track(bad_flag, "x"), SchemaError);
}

TEST(Config, DefaultsMatchScenario)
{
  const AppConfig cfg = parse("");
  EXPECT_EQ(cfg.scenario.anchors.size(), 4u);
  EXPECT_EQ(cfg.scenario.waypoints.size(), 6u);
  EXPECT_DOUBLE_EQ(cfg.scenario.toa_sigma, 0.3e-9);
  EXPECT_DOUBLE_EQ(cfg.scenario.nlos_delay, 3e-9);
  EXPECT_EQ(cfg.pipeline.process.dt, 0.1);
  EXPECT_EQ(cfg.pipeline.update.gate, 3.0);
  EXPECT_EQ(cfg.pipeline.estimators.size(), 3u);
  EXPECT_NEAR(cfg.pipeline.tdoa_sigma, std::sqrt(2.0) * 0.0899377, 1e-6);
}

TEST(Config, ParsesSections)
{
  const AppConfig cfg = parse("[anchors]\n0 = 0 0\n1 = 8 0\n2 = 8 8\n3 = 0 8\n"
                              "[scenario]\nnlos_delay_ns = 0\nseed = 9\nwaypoints = 1 1; 2 2; 3 1\ndwell = 1:2.5\n"
                              "[gait]\nsource = fused\nheading_points = 7\n"
                              "[filter]\nq2 = 1 1 2 2\nreacquire_after = 0\nstep_velocity = false\ngate = 0\n"
                              "[estimators]\nls = false\n");
  EXPECT_EQ(cfg.pipeline.anchors.at(2).position, Vec2(8, 8));
  EXPECT_EQ(cfg.scenario.nlos_delay, 0.0);
  EXPECT_EQ(cfg.scenario.seed, 9u);
  EXPECT_EQ(cfg.scenario.waypoints.size(), 3u);
  EXPECT_EQ(cfg.scenario.dwell.at(1), 2.5);
  EXPECT_EQ(cfg.pipeline.gait_source, GaitSource::fused);
  EXPECT_EQ(cfg.pipeline.gait.heading_points, 7u);
  EXPECT_EQ(cfg.pipeline.process.q2.diagonal(), Vec4(1, 1, 2, 2));
  EXPECT_EQ(cfg.pipeline.reacquire_after, 0);
  EXPECT_FALSE(cfg.pipeline.process.step_velocity);
  EXPECT_EQ(cfg.pipeline.update.gate, 0.0);
  EXPECT_EQ(cfg.pipeline.estimators, (std::vector<EstimatorKind>{EstimatorKind::ekf, EstimatorKind::fused}));
}

TEST(Config, RejectsBadInput)
{
  EXPECT_THROW(parse("[nope]\na = 1\n"), ConfigError);
  EXPECT_THROW(parse("[filter]\nfoo = 1\n"), ConfigError);
  EXPECT_THROW(parse("[filter]\nq1 = abc\n"), ConfigError);
  EXPECT_THROW(parse("[filter]\nq2 = 1 2 3\n"), ConfigError);
  EXPECT_THROW(parse("[filter]\nreacquire_after = -1\n"), ConfigError);
  EXPECT_THROW(parse("[gait]\nwindow = 4\n"), ConfigError);
  EXPECT_THROW(parse("[gait]\nsource = imu\n"), ConfigError);
  EXPECT_THROW(parse("[scenario]\nnlos_delay_ns = 12\n"), ConfigError);
  EXPECT_THROW(parse("[scenario]\nwaypoints = 1 1; 1 1\n"), ConfigError);
  EXPECT_THROW(parse("[anchors]\n0 = 0 0\n1 = 1 0\n"), ConfigError);
  EXPECT_THROW(parse("[estimators]\nls = false\nekf = false\nfused = false\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/hybridloc.ini"), ConfigError);
}

TEST(Cli, EndToEndAndExitCodes)
{
  const fs::path dir = scratch("cli");
  const std::string out = " --out " + dir.string();
  EXPECT_EQ(run_cli("simulate --seed 3" + out), 0);
  EXPECT_TRUE(fs::exists(dir / "epochs.csv"));
  EXPECT_TRUE(fs::exists(dir / "accel.csv"));
  EXPECT_TRUE(fs::exists(dir / "truth.csv"));
  EXPECT_EQ(run_cli("localize --steps" + out), 0);
  EXPECT_TRUE(fs::exists(dir / "track_fused.csv"));
  EXPECT_TRUE(fs::exists(dir / "steps.csv"));
  EXPECT_EQ(run_cli("evaluate" + out), 0);
  EXPECT_TRUE(fs::exists(dir / "report_ekf.csv"));
  EXPECT_TRUE(fs::exists(dir / "cdf_ls.csv"));

  // CLI replay equals the library run for the same seed.
  AppConfig cfg = default_config();
  cfg.scenario.seed = 3;
  const auto res = run_pipeline(simulate(cfg.scenario).log, cfg.pipeline);
  EXPECT_EQ(io::load_track((dir / "track_fused.csv").string(), "fused").fixes, res.tracks[2].fixes);

  EXPECT_EQ(run_cli("localize --estimators kalman" + out), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  const fs::path ini = dir / "bad.ini";
  std::ofstream(ini) << "[filter]\nq1 = -1\n";
  EXPECT_EQ(run_cli("simulate --config " + ini.string() + out), 2);

  std::ofstream(dir / "epochs.csv") << "t,pair_i,pair_j,tdoa_m\n0,1,0,zzz\n";
  EXPECT_EQ(run_cli("localize" + out), 3);
  fs::remove_all(dir);
}

TEST(Cli, ShippedConfigLoads)
{
  const fs::path ini = fs::path(HYBRIDLOC_SOURCE_DIR) / "config" / "pentagon.ini";
  ASSERT_TRUE(fs::exists(ini));
  const AppConfig cfg = load_config(ini.string());
  const AppConfig def = default_config();
  EXPECT_EQ(cfg.scenario.waypoints, def.scenario.waypoints);
  EXPECT_EQ(cfg.pipeline.process.q2, def.pipeline.process.q2);
  EXPECT_DOUBLE_EQ(cfg.pipeline.tdoa_sigma, def.pipeline.tdoa_sigma);
  EXPECT_DOUBLE_EQ(cfg.scenario.shadow_half_angle, def.scenario.shadow_half_angle);
  EXPECT_EQ(cfg.pipeline.gait.threshold, def.pipeline.gait.threshold);
  EXPECT_EQ(cfg.pipeline.estimators, def.pipeline.estimators);
}
