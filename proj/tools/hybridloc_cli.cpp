// Command-line front end: simulate, localize, evaluate, demo.

#include <hybridloc/hybridloc.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace hybridloc;

namespace
{

constexpr int kExitConfig = 2;
constexpr int kExitSchema = 3;

struct Options
{
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string estimators;
  std::string out = "out";
  std::string in;
  bool steps = false;
  std::size_t runs = 20;
};

AppConfig resolve(const Options& o)
{
  AppConfig cfg = o.config.empty() ? default_config() : load_config(o.config);
  if (o.seed)
    cfg.scenario.seed = *o.seed;
  if (!o.estimators.empty())
    cfg.pipeline.estimators = parse_estimator_list(o.estimators);
  return cfg;
}

fs::path prepare_out(const std::string& dir)
{
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

fs::path input_dir(const Options& o) { return fs::path(o.in.empty() ? o.out : o.in); }

void write_run(const fs::path& out, const SimulationRun& sim)
{
  io::save((out / "epochs.csv").string(), sim.log.epochs,
           [](std::ostream& s, const auto& v) { io::write_epochs(s, v); });
  io::save((out / "accel.csv").string(), sim.log.accel,
           [](std::ostream& s, const auto& v) { io::write_accel(s, v); });
  io::save((out / "truth.csv").string(), sim.truth, [](std::ostream& s, const auto& v) { io::write_truth(s, v); });
}

void write_tracks(const fs::path& out, const PipelineResult& res, bool steps)
{
  for (const auto& tr : res.tracks)
    io::save((out / ("track_" + tr.estimator + ".csv")).string(), tr,
             [](std::ostream& s, const Track& t) { io::write_track(s, t); });
  if (steps)
    io::save((out / "steps.csv").string(), res.steps,
             [](std::ostream& s, const auto& v) { io::write_steps(s, v); });
}

void print_reports(const std::vector<std::pair<std::string, ErrorReport>>& reports)
{
  std::cout << std::left << std::setw(10) << "estimator" << std::right << std::setw(10) << "p50[m]"
            << std::setw(10) << "p90[m]" << std::setw(10) << "max[m]" << '\n';
  std::cout << std::fixed << std::setprecision(3);
  for (const auto& [name, rep] : reports)
    std::cout << std::left << std::setw(10) << name << std::right << std::setw(10) << rep.p50 << std::setw(10)
              << rep.p90 << std::setw(10) << rep.max_error << '\n';
  std::cout.unsetf(std::ios::floatfield);
}

std::vector<std::pair<std::string, ErrorReport>> evaluate_tracks(const fs::path& out, const std::vector<Track>& tracks,
                                                                 const std::vector<TruthPoint>& truth, double dt)
{
  std::vector<std::pair<std::string, ErrorReport>> reports;
  for (const auto& tr : tracks)
  {
    ErrorReport rep = error_report(tr, truth, dt);
    io::save((out / ("report_" + tr.estimator + ".csv")).string(), rep,
             [](std::ostream& s, const ErrorReport& r) { io::write_report(s, r); });
    io::save((out / ("cdf_" + tr.estimator + ".csv")).string(), rep,
             [](std::ostream& s, const ErrorReport& r) { io::write_cdf(s, r); });
    reports.emplace_back(tr.estimator, std::move(rep));
  }
  return reports;
}

int cmd_simulate(const Options& o)
{
  const AppConfig cfg = resolve(o);
  const fs::path out = prepare_out(o.out);
  const SimulationRun sim = simulate(cfg.scenario);
  write_run(out, sim);
  std::cout << "wrote " << sim.log.epochs.size() << " epochs, " << sim.log.accel.size() << " accel samples to "
            << out.string() << '\n';
  return 0;
}

int cmd_localize(const Options& o)
{
  const AppConfig cfg = resolve(o);
  const fs::path in = input_dir(o);
  MeasurementLog log;
  log.epochs = io::load_epochs((in / "epochs.csv").string());
  const fs::path accel = in / "accel.csv";
  if (fs::exists(accel))
    log.accel = io::load_accel(accel.string());
  const fs::path out = prepare_out(o.out);
  const PipelineResult res = run_pipeline(log, cfg.pipeline);
  write_tracks(out, res, o.steps);
  std::cout << "localized " << log.epochs.size() << " epochs with " << res.tracks.size() << " estimator(s)\n";
  return 0;
}

int cmd_evaluate(const Options& o)
{
  const AppConfig cfg = resolve(o);
  const fs::path in = input_dir(o);
  const auto truth = io::load_truth((in / "truth.csv").string());
  std::vector<Track> tracks;
  for (auto k : cfg.pipeline.estimators)
  {
    const std::string name(to_string(k));
    const fs::path p = in / ("track_" + name + ".csv");
    if (!fs::exists(p))
    {
      if (o.estimators.empty())
        continue;
      throw SchemaError(p.string(), 0, "track file not found");
    }
    tracks.push_back(io::load_track(p.string(), name));
  }
  if (tracks.empty())
    throw SchemaError(in.string(), 0, "no track_<estimator>.csv files found");
  const fs::path out = prepare_out(o.out);
  print_reports(evaluate_tracks(out, tracks, truth, cfg.pipeline.process.dt));
  return 0;
}

int cmd_demo(const Options& o)
{
  const AppConfig cfg = resolve(o);
  const fs::path out = prepare_out(o.out);

  const SimulationRun sim = simulate(cfg.scenario);
  write_run(out, sim);
  const PipelineResult res = run_pipeline(sim.log, cfg.pipeline);
  write_tracks(out, res, true);
  std::cout << "seed " << cfg.scenario.seed << ":\n";
  print_reports(evaluate_tracks(out, res.tracks, sim.truth, cfg.pipeline.process.dt));

  if (o.runs > 1)
  {
    const auto batch = run_batch(cfg.scenario, cfg.pipeline, cfg.scenario.seed, o.runs);
    std::cout << "\n" << o.runs << "-seed batch (mean of per-run statistics):\n";
    std::cout << std::left << std::setw(10) << "estimator" << std::right << std::setw(10) << "p50[m]"
              << std::setw(10) << "p90[m]" << std::setw(10) << "max[m]" << '\n';
    std::cout << std::fixed << std::setprecision(3);
    for (auto k : cfg.pipeline.estimators)
    {
      const std::string name(to_string(k));
      const BatchStats s = batch_stats(batch, name);
      std::cout << std::left << std::setw(10) << name << std::right << std::setw(10) << s.mean_p50 << std::setw(10)
                << s.mean_p90 << std::setw(10) << s.mean_max << '\n';
    }
  }
  return 0;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"UWB TDOA localization with accelerometer step analysis"};
  app.require_subcommand(1);

  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "configuration file (INI)")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "simulation seed");
    sub->add_option("--estimators", o.estimators, "comma-separated subset of ls,ekf,fused");
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
  };

  auto* simulate = app.add_subcommand("simulate", "generate measurement logs and ground truth");
  add_common(simulate);
  auto* localize = app.add_subcommand("localize", "run estimators over epochs.csv/accel.csv");
  add_common(localize);
  localize->add_option("--in", o.in, "directory holding the logs (default: --out)");
  localize->add_flag("--steps", o.steps, "also write the detected steps to steps.csv");
  auto* evaluate = app.add_subcommand("evaluate", "compare track_*.csv with truth.csv");
  add_common(evaluate);
  evaluate->add_option("--in", o.in, "directory holding truth and tracks (default: --out)");
  auto* demo = app.add_subcommand("demo", "simulate, localize and evaluate the pentagon walk");
  add_common(demo);
  demo->add_option("--runs", o.runs, "seeds in the Monte-Carlo summary")->capture_default_str();

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError& e)
  {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try
  {
    if (*simulate)
      return cmd_simulate(o);
    if (*localize)
      return cmd_localize(o);
    if (*evaluate)
      return cmd_evaluate(o);
    return cmd_demo(o);
  }
  catch (const ConfigError& e)
  {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  catch (const SchemaError& e)
  {
    std::cerr << "schema error: " << e.what() << '\n';
    return kExitSchema;
  }
  catch (const std::exception& e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
