#pragma once

#include "errors.hpp"
#include "estimators.hpp"
#include "eval.hpp"
#include "gait.hpp"
#include "sim.hpp"

#include <cmath>
#include <cstdint>
#include <future>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace hybridloc
{

enum class EstimatorKind
{
  ls,
  ekf,
  fused,
};

inline std::string_view to_string(EstimatorKind k)
{
  switch (k)
  {
  case EstimatorKind::ls:
    return "ls";
  case EstimatorKind::ekf:
    return "ekf";
  case EstimatorKind::fused:
    return "fused";
  }
  return "?";
}

inline EstimatorKind parse_estimator(std::string_view name)
{
  if (name == "ls")
    return EstimatorKind::ls;
  if (name == "ekf")
    return EstimatorKind::ekf;
  if (name == "fused")
    return EstimatorKind::fused;
  throw ConfigError("unknown estimator '" + std::string(name) + "' (expected ls, ekf or fused)");
}

// "ls,ekf,fused" -> list, order preserved, duplicates removed.
inline std::vector<EstimatorKind> parse_estimator_list(std::string_view list)
{
  std::vector<EstimatorKind> out;
  std::size_t pos = 0;
  while (pos <= list.size())
  {
    const std::size_t comma = std::min(list.find(',', pos), list.size());
    std::string_view item = list.substr(pos, comma - pos);
    while (!item.empty() && item.front() == ' ')
      item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ')
      item.remove_suffix(1);
    if (!item.empty())
    {
      const auto k = parse_estimator(item);
      if (std::find(out.begin(), out.end(), k) == out.end())
        out.push_back(k);
    }
    pos = comma + 1;
  }
  if (out.empty())
    throw ConfigError("no estimators selected");
  return out;
}

// Which fixes feed the heading and step-length history of the gait tracker.
enum class GaitSource
{
  ls,
  fused,
};

struct PipelineConfig
{
  AnchorSet anchors;
  ProcessModel process;
  UpdateConfig update;
  GaitConfig gait;
  LsOptions ls;
  double tdoa_sigma = std::sqrt(2.0) * 0.3e-9 * kSpeedOfLight; // m, per entry
  double init_pos_var = 1.0;
  double init_vel_var = 0.25;
  // After this many consecutive epochs with at least one gated entry the
  // next update runs without the gate so a filter that drifted away can
  // re-acquire. 0 disables.
  int reacquire_after = 2;
  GaitSource gait_source = GaitSource::ls;
  std::vector<EstimatorKind> estimators{EstimatorKind::ls, EstimatorKind::ekf, EstimatorKind::fused};
};

struct PipelineResult
{
  std::vector<Track> tracks;
  std::vector<StepEvent> steps; // seen by the fused estimator
};

namespace detail
{

// Keeps entries that reference known anchors and are physically possible;
// sigma comes from configuration.
inline TdoaSet prepare_epoch(const TdoaSet& in, const PipelineConfig& cfg)
{
  TdoaSet out;
  out.epoch = in.epoch;
  for (auto e : in.entries)
  {
    e.sigma = cfg.tdoa_sigma;
    if (e.pair.anchor_i == e.pair.anchor_j || !cfg.anchors.contains(e.pair.anchor_i) ||
        !cfg.anchors.contains(e.pair.anchor_j) || !is_physical(e, cfg.anchors))
      continue;
    out.entries.push_back(e);
  }
  return out;
}

class LsRunner
{
public:
  explicit LsRunner(const PipelineConfig& cfg) : cfg_(cfg), last_(cfg.anchors.centroid()) {}

  // Returns the fix and whether it is a fallback (repeated previous position).
  std::pair<Vec2, bool> locate(const TdoaSet& epoch)
  {
    if (epoch.size() >= 2)
    {
      for (const Vec2& guess : {last_, cfg_.anchors.centroid()})
      {
        try
        {
          const LsFix fix = ls_locate(epoch, cfg_.anchors, guess, cfg_.ls);
          last_ = fix.pos;
          have_ = true;
          return {fix.pos, false};
        }
        catch (const Diverged&)
        {
        }
        catch (const CoincidentAnchor&)
        {
        }
      }
    }
    return {last_, true};
  }

  bool has_fix() const { return have_; }

private:
  const PipelineConfig& cfg_;
  Vec2 last_;
  bool have_ = false;
};

} // namespace detail

// Runs every selected estimator over the same measurement stream; one fix
// per epoch per estimator.
inline PipelineResult run_pipeline(const MeasurementLog& log, const PipelineConfig& cfg)
{
  cfg.process.validate();
  if (cfg.estimators.empty())
    throw ConfigError("no estimators selected");

  const FilterModels models{cfg.anchors, cfg.process, cfg.update};
  const FilterModels ungated{cfg.anchors, cfg.process, UpdateConfig{0.0}};
  auto wants = [&](EstimatorKind k) { return std::find(cfg.estimators.begin(), cfg.estimators.end(), k) != cfg.estimators.end(); };

  std::map<EstimatorKind, Track> tracks;
  for (auto k : cfg.estimators)
    tracks[k].estimator = std::string(to_string(k));

  detail::LsRunner ls(cfg);
  std::optional<StateEstimate> ekf, fused;
  std::map<EstimatorKind, int> gated_run;
  GaitTracker gait(cfg.gait);
  std::size_t next_accel = 0;

  for (const auto& raw : log.epochs)
  {
    const TdoaSet epoch = detail::prepare_epoch(raw, cfg);
    const double now = epoch.epoch;

    // The LS fix also seeds both filters.
    const auto [ls_pos, ls_fallback] = ls.locate(epoch);
    if (wants(EstimatorKind::ls))
      tracks[EstimatorKind::ls].fixes.push_back({now, ls_pos, ls_fallback ? kFlagFallback : kFlagNone});

    while (next_accel < log.accel.size() && log.accel[next_accel].t <= now)
      gait.push_accel(log.accel[next_accel++]);

    auto run_filter = [&](std::optional<StateEstimate>& filt, EstimatorKind kind) {
      Fix fix{now, Vec2::Zero(), kFlagNone};
      if (!filt)
      {
        if (!ls.has_fix())
          return std::optional<Fix>{};
        filt = initial_state(ls_pos, cfg.init_pos_var, cfg.init_vel_var);
        fix.flags |= kFlagColdStart;
      }
      else if (epoch.empty())
      {
        const Prediction p = predict_motion(*filt, cfg.process);
        filt = StateEstimate(p.x, p.P);
        fix.flags |= kFlagGated;
      }
      else
      {
        int& run = gated_run[kind];
        const bool reacquire = cfg.reacquire_after > 0 && run >= cfg.reacquire_after;
        const FilterModels& m = reacquire ? ungated : models;
        StepOutcome step;
        if (kind == EstimatorKind::fused)
        {
          gait.refresh_step_params();
          step = fused_ekf_step(*filt, gait.estimate(now), epoch, m);
        }
        else
          step = ekf_step(*filt, epoch, m);
        filt = step.state;
        run = step.gated > 0 && !reacquire ? run + 1 : 0;
        if (step.all_gated)
          fix.flags |= kFlagGated;
        if (step.cold_start)
          fix.flags |= kFlagColdStart;
        if (step.fusion_fallback)
          fix.flags |= kFlagFallback;
      }
      fix.pos = filt->position();
      return std::optional<Fix>{fix};
    };

    if (wants(EstimatorKind::ekf))
      if (auto f = run_filter(ekf, EstimatorKind::ekf))
        tracks[EstimatorKind::ekf].fixes.push_back(*f);
    if (wants(EstimatorKind::fused))
      if (auto f = run_filter(fused, EstimatorKind::fused))
      {
        tracks[EstimatorKind::fused].fixes.push_back(*f);
        if (cfg.gait_source == GaitSource::fused)
          gait.push_fix({now, f->pos});
      }
    if (cfg.gait_source == GaitSource::ls && ls.has_fix() && !ls_fallback)
      gait.push_fix({now, ls_pos});
  }

  PipelineResult out;
  for (auto k : cfg.estimators)
    out.tracks.push_back(std::move(tracks[k]));
  out.steps.assign(gait.events().begin(), gait.events().end());
  return out;
}

struct RunSummary
{
  std::uint64_t seed = 0;
  std::map<std::string, ErrorReport> reports; // by estimator name
};

// Simulates and localizes one seed.
inline RunSummary run_seed(Scenario sc, const PipelineConfig& cfg, std::uint64_t seed)
{
  sc.seed = seed;
  const SimulationRun sim = simulate(sc);
  const PipelineResult res = run_pipeline(sim.log, cfg);
  RunSummary s;
  s.seed = seed;
  for (const auto& tr : res.tracks)
    s.reports[tr.estimator] = error_report(tr, sim.truth, 1.0 / sc.loc_rate);
  return s;
}

// Monte-Carlo batch over consecutive seeds; runs are independent.
inline std::vector<RunSummary> run_batch(const Scenario& sc, const PipelineConfig& cfg, std::uint64_t first_seed,
                                         std::size_t runs, bool parallel = true)
{
  std::vector<RunSummary> out(runs);
  if (!parallel)
  {
    for (std::size_t r = 0; r < runs; ++r)
      out[r] = run_seed(sc, cfg, first_seed + r);
    return out;
  }
  std::vector<std::future<RunSummary>> jobs;
  jobs.reserve(runs);
  for (std::size_t r = 0; r < runs; ++r)
    jobs.push_back(std::async(std::launch::async, run_seed, sc, std::cref(cfg), first_seed + r));
  for (std::size_t r = 0; r < runs; ++r)
    out[r] = jobs[r].get();
  return out;
}

struct BatchStats
{
  double mean_max = 0.0;
  double mean_p90 = 0.0;
  double mean_p50 = 0.0;
  double pooled_p90 = 0.0;
};

inline BatchStats batch_stats(std::span<const RunSummary> runs, const std::string& estimator)
{
  BatchStats s;
  std::vector<double> pooled;
  for (const auto& r : runs)
  {
    const ErrorReport& rep = r.reports.at(estimator);
    s.mean_max += rep.max_error;
    s.mean_p90 += rep.p90;
    s.mean_p50 += rep.p50;
    pooled.insert(pooled.end(), rep.errors.begin(), rep.errors.end());
  }
  const auto n = static_cast<double>(runs.size());
  s.mean_max /= n;
  s.mean_p90 /= n;
  s.mean_p50 /= n;
  std::sort(pooled.begin(), pooled.end());
  s.pooled_p90 = percentile_lower(pooled, 0.9);
  return s;
}

} // namespace hybridloc
