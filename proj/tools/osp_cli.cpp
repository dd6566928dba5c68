// osp: train, predict, evaluate, synthesize and bench from the command line.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "osp/data_io.hpp"
#include "osp/errors.hpp"
#include "osp/eval.hpp"
#include "osp/inference.hpp"
#include "osp/training.hpp"

namespace {

constexpr std::uint64_t kDefaultSeed = 20200531;

enum Exit : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct Common {
  std::string schema = "generic";
  double rate_hz = 0.0;
  std::uint64_t seed = kDefaultSeed;
};

struct Protocol {
  double obs_seconds = 3.0;
  double horizon_seconds = 5.0;
  int samples = 100;
};

osp::LoadOptions load_options(const Common& c) { return {osp::parse_schema(c.schema), c.rate_hz}; }

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--schema", c.schema, "Track file layout: generic, ind or dut")->capture_default_str();
  cmd->add_option("--rate", c.rate_hz, "Native frame rate override in Hz");
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
}

void add_protocol(CLI::App* cmd, Protocol& p) {
  cmd->add_option("--obs-seconds", p.obs_seconds, "Observation window")->capture_default_str()->check(
      CLI::PositiveNumber);
  cmd->add_option("--horizon-seconds", p.horizon_seconds, "Prediction horizon")->capture_default_str()->check(
      CLI::PositiveNumber);
  cmd->add_option("--samples", p.samples, "Trajectory samples per prediction")->capture_default_str()->check(
      CLI::PositiveNumber);
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// --- train ---

struct TrainArgs {
  Common common;
  std::string data;
  std::string out;
  std::string report;
  int restarts = 5;
  int max_iters = 50;
};

int cmd_train(const TrainArgs& a) {
  const osp::Scene scene = osp::load_scene(a.data, load_options(a.common));
  osp::TrainingConfig cfg;
  cfg.seed = a.common.seed;
  cfg.restarts = a.restarts;
  cfg.max_iters = a.max_iters;
  const osp::FitResult fit = osp::fit(scene, cfg);

  osp::ModelFile model;
  model.params = fit.params;
  model.provenance.dataset = std::filesystem::path(a.data).filename().string();
  model.provenance.seed = a.common.seed;
  model.provenance.report_digest = osp::report_digest(fit.report);
  osp::save_model(model, a.out);
  osp::write_file(a.report.empty() ? a.out + ".report.json" : a.report, osp::fit_report_json(fit.report));

  for (const auto& w : fit.report.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "final_loss=" << num(fit.report.final_loss) << " iterations=" << fit.report.iterations
            << " converged=" << (fit.report.converged ? "yes" : "no") << " records=" << fit.report.records
            << " sigma_v=" << num(fit.params.sigma_v) << '\n';
  return kOk;
}

// --- predict ---

struct PredictArgs {
  Common common;
  Protocol protocol;
  std::string model;
  std::string scene;
  std::string out;
  std::string av_trajectory;
  std::string predictor = "osp";
  int pedestrian = -1;
  int at = -1;
};

std::size_t pick_pedestrian(const osp::Scene& scene, int id, int at) {
  if (scene.pedestrians.empty()) throw osp::DataError("scene has no pedestrian tracks");
  if (id < 0) return 0;
  std::optional<std::size_t> found;
  for (std::size_t i = 0; i < scene.pedestrians.size(); ++i) {
    const auto& tr = scene.pedestrians[i];
    if (tr.id != id) continue;
    if (!found || (at >= tr.first_t() && at <= tr.last_t())) found = i;
  }
  if (!found) throw osp::DataError("no pedestrian track with id " + std::to_string(id));
  return *found;
}

int cmd_predict(const PredictArgs& a) {
  const osp::Scene scene = osp::load_scene(a.scene, load_options(a.common));
  const std::size_t ped = pick_pedestrian(scene, a.pedestrian, a.at);
  const int t_now = a.at >= 0 ? a.at : scene.pedestrians[ped].last_t();

  osp::EvalProtocol protocol;
  protocol.obs_seconds = a.protocol.obs_seconds;
  protocol.horizon_seconds = a.protocol.horizon_seconds;
  protocol.samples = a.protocol.samples;
  const osp::VehicleTimeline timeline(scene.vehicles);
  osp::PredictionRequest req = osp::request_at(scene, timeline, ped, t_now, protocol, a.common.seed);
  for (auto& v : req.vehicles) v.future.clear();

  if (!a.av_trajectory.empty()) {
    const osp::Scene av = osp::load_scene(a.av_trajectory, load_options(a.common));
    req.mode = osp::VehicleMode::kKnownTrajectory;
    bool matched = false;
    for (auto& v : req.vehicles) {
      for (const auto& tr : av.vehicles) {
        if (tr.id != v.id || !tr.covers(t_now + 1)) continue;
        for (int t = t_now + 1; t <= tr.last_t() && t <= t_now + req.horizon; ++t) v.future.push_back(tr.at(t));
        matched = true;
      }
    }
    if (!matched) throw osp::DataError("--av-trajectory has no vehicle present in the scene after the current time");
  }

  osp::PredictionSet pred;
  if (a.predictor == "cv") {
    req.validate(scene.dt);
    pred = osp::predict_cv(req, scene.dt);
  } else {
    if (a.model.empty()) throw osp::ContractViolation("--model is required for the osp predictor");
    const osp::ModelFile model = osp::load_model(a.model);
    pred = osp::predict(req, model.params);
  }

  std::ostringstream out;
  out << "sample,weight,step,t_seconds,x_m,y_m\n";
  for (std::size_t j = 0; j < pred.samples.size(); ++j) {
    const auto& s = pred.samples[j];
    for (std::size_t k = 0; k < s.positions.size(); ++k) {
      out << j << ',' << num(s.weight) << ',' << k + 1 << ',' << num(static_cast<double>(k + 1) * scene.dt) << ','
          << num(s.positions[k].x()) << ',' << num(s.positions[k].y()) << '\n';
    }
  }
  for (std::size_t k = 0; k < pred.mean_track.size(); ++k) {
    out << "mean,1," << k + 1 << ',' << num(static_cast<double>(k + 1) * scene.dt) << ','
        << num(pred.mean_track[k].x()) << ',' << num(pred.mean_track[k].y()) << '\n';
  }
  osp::write_file(a.out, out.str());
  std::cout << "pedestrian=" << scene.pedestrians[ped].id << " t=" << t_now << " samples=" << pred.samples.size()
            << " ess=" << num(pred.ess) << '\n';
  return kOk;
}

// --- evaluate ---

struct EvaluateArgs {
  Common common;
  Protocol protocol;
  std::string model;
  std::string data;
  std::string out_dir;
  std::string predictors;
  double stride_seconds = 1.0;
  bool single_moving_vehicle = false;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const osp::Scene scene = osp::load_scene(a.data, load_options(a.common));
  std::vector<std::string> names = split(a.predictors.empty() ? (a.model.empty() ? "cv" : "osp,cv") : a.predictors, ',');
  std::optional<osp::ModelFile> model;
  for (const auto& n : names) {
    if (n != "osp" && n != "osp-av" && n != "cv") throw osp::ContractViolation("unknown predictor '" + n + "'");
    if (n != "cv" && !model) {
      if (a.model.empty()) throw osp::ContractViolation("--model is required for predictor " + n);
      model = osp::load_model(a.model);
    }
  }

  std::filesystem::create_directories(a.out_dir);
  std::vector<osp::MetricTable> tables;
  for (const auto& n : names) {
    osp::EvalProtocol protocol;
    protocol.obs_seconds = a.protocol.obs_seconds;
    protocol.horizon_seconds = a.protocol.horizon_seconds;
    protocol.samples = a.protocol.samples;
    protocol.stride_seconds = a.stride_seconds;
    protocol.seed = a.common.seed;
    protocol.single_moving_vehicle = a.single_moving_vehicle;
    protocol.mode = n == "osp-av" ? osp::VehicleMode::kKnownTrajectory : osp::VehicleMode::kExtrapolate;
    const double dt = scene.dt;
    osp::Predictor predictor;
    if (n == "cv") {
      predictor = [dt](const osp::PredictionRequest& r) { return osp::predict_cv(r, dt); };
    } else {
      const osp::ModelParams params = model->params;
      predictor = [params](const osp::PredictionRequest& r) { return osp::predict(r, params); };
    }
    const osp::MetricTable table = osp::evaluate(scene, predictor, protocol);
    std::ostringstream csv;
    osp::write_metric_csv(csv, table);
    const std::string base = (std::filesystem::path(a.out_dir) / n).string();
    osp::write_file(base + "_metrics.csv", csv.str());
    osp::write_file(base + "_metrics.json", osp::metric_json(table));
    tables.push_back(table);
  }

  std::ostringstream cmp;
  cmp << "t_seconds";
  for (const auto& n : names) cmp << ',' << n << "_ade_m," << n << "_rmse_m";
  cmp << ",n\n";
  for (std::size_t r = 0; r < tables.front().rows.size(); ++r) {
    cmp << num(tables.front().rows[r].t_seconds);
    for (const auto& t : tables) cmp << ',' << num(t.rows[r].ade_m) << ',' << num(t.rows[r].rmse_m);
    cmp << ',' << tables.front().rows[r].n << '\n';
  }
  osp::write_file((std::filesystem::path(a.out_dir) / "comparison.csv").string(), cmp.str());
  std::cout << cmp.str();
  return kOk;
}

// --- synthesize ---

struct SynthesizeArgs {
  Common common;
  std::string out;
  std::string latent;
  std::string model;
  std::string scenario = "crossing";
  int n = 100;
  int steps = 120;
  double veh_accel_lo = 0.0;
  double veh_accel_hi = 0.0;
};

int cmd_synthesize(const SynthesizeArgs& a) {
  osp::ScenarioSpec spec;
  if (a.scenario == "crossing") {
    spec.kind = osp::ScenarioKind::kCrossing;
  } else if (a.scenario == "free") {
    spec.kind = osp::ScenarioKind::kFree;
  } else {
    throw osp::ContractViolation("unknown scenario '" + a.scenario + "' (expected crossing or free)");
  }
  spec.steps = a.steps;
  spec.frame_gap = std::max(spec.frame_gap, a.steps + spec.vehicle_tail + 30);
  spec.veh_accel_lo = a.veh_accel_lo;
  spec.veh_accel_hi = a.veh_accel_hi;
  const osp::ModelParams truth = a.model.empty() ? osp::synthetic_truth() : osp::load_model(a.model).params;
  const osp::SyntheticData data = osp::synthesize(spec, truth, a.n, a.common.seed);
  osp::save_tracks(a.out, data.scene);
  if (!a.latent.empty()) {
    std::ostringstream out;
    osp::write_latent(out, data);
    osp::write_file(a.latent, out.str());
  }
  std::cout << "pedestrians=" << data.scene.pedestrians.size() << " vehicles=" << data.scene.vehicles.size() << '\n';
  return kOk;
}

// --- bench ---

struct BenchArgs {
  Common common;
  Protocol protocol;
  std::string model;
  std::string out;
  int vehicles = 3;
  int reps = 100;
};

int cmd_bench(const BenchArgs& a) {
  const osp::ModelParams params = a.model.empty() ? osp::synthetic_truth() : osp::load_model(a.model).params;
  osp::PredictionRequest req = osp::benchmark_scenario(a.vehicles, params.scene.dt);
  req.n_samples = a.protocol.samples;
  req.horizon = static_cast<int>(std::lround(a.protocol.horizon_seconds / params.scene.dt));
  req.seed = a.common.seed;
  const osp::BenchResult res =
      osp::bench([&params](const osp::PredictionRequest& r) { return osp::predict(r, params); }, req, a.reps);
  std::ostringstream out;
  out << "{\n  \"mean_ms\": " << num(res.mean_ms) << ",\n  \"p95_ms\": " << num(res.p95_ms)
      << ",\n  \"repetitions\": " << res.repetitions << ",\n  \"vehicles\": " << a.vehicles << "\n}\n";
  if (!a.out.empty()) osp::write_file(a.out, out.str());
  std::cout << "mean_ms=" << num(res.mean_ms) << " p95_ms=" << num(res.p95_ms) << " reps=" << res.repetitions << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pedestrian trajectory prediction around vehicles"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Learn model parameters from a track file");
  add_common(c_train, train.common);
  c_train->add_option("--data", train.data, "Track file")->required()->check(CLI::ExistingFile);
  c_train->add_option("--out", train.out, "Model file to write")->required();
  c_train->add_option("--report", train.report, "Fit report path (default: <out>.report.json)");
  c_train->add_option("--restarts", train.restarts, "Random restarts")->capture_default_str();
  c_train->add_option("--max-iters", train.max_iters, "Coordinate descent iterations")->capture_default_str();

  PredictArgs predict;
  auto* c_predict = app.add_subcommand("predict", "Sample future trajectories for one pedestrian");
  add_common(c_predict, predict.common);
  add_protocol(c_predict, predict.protocol);
  c_predict->add_option("--model", predict.model, "Model file")->check(CLI::ExistingFile);
  c_predict->add_option("--scene", predict.scene, "Track file with the observed scene")->required()->check(
      CLI::ExistingFile);
  c_predict->add_option("--out", predict.out, "Prediction CSV to write")->required();
  c_predict->add_option("--pedestrian", predict.pedestrian, "Pedestrian track id (default: first)");
  c_predict->add_option("--at", predict.at, "Current timestep on the 10 Hz grid (default: last observation)");
  c_predict->add_option("--av-trajectory", predict.av_trajectory,
                        "Track file with planned vehicle trajectories covering the horizon")
      ->check(CLI::ExistingFile);
  c_predict->add_option("--predictor", predict.predictor, "osp or cv")->capture_default_str();

  EvaluateArgs evaluate;
  auto* c_eval = app.add_subcommand("evaluate", "ADE/RMSE tables over sliding windows");
  add_common(c_eval, evaluate.common);
  add_protocol(c_eval, evaluate.protocol);
  c_eval->add_option("--model", evaluate.model, "Model file")->check(CLI::ExistingFile);
  c_eval->add_option("--data", evaluate.data, "Track file")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--out-dir", evaluate.out_dir, "Directory for metric tables")->required();
  c_eval->add_option("--predictors", evaluate.predictors,
                     "Comma-separated list of osp, osp-av, cv (default: osp,cv with a model, else cv)");
  c_eval->add_option("--stride-seconds", evaluate.stride_seconds, "Window stride")->capture_default_str();
  c_eval->add_flag("--single-moving-vehicle", evaluate.single_moving_vehicle,
                   "Score only windows with exactly one moving vehicle recorded through the horizon");

  SynthesizeArgs synth;
  auto* c_synth = app.add_subcommand("synthesize", "Sample a synthetic track file from the model");
  add_common(c_synth, synth.common);
  c_synth->add_option("--out", synth.out, "Track file to write")->required();
  c_synth->add_option("--latent", synth.latent, "Also write true states and decisions here");
  c_synth->add_option("--model", synth.model, "Ground-truth model (default: built-in)")->check(CLI::ExistingFile);
  c_synth->add_option("--scenario", synth.scenario, "crossing or free")->capture_default_str();
  c_synth->add_option("-n,--count", synth.n, "Number of pedestrians")->capture_default_str();
  c_synth->add_option("--steps", synth.steps, "Timesteps per pedestrian")->capture_default_str();
  c_synth->add_option("--veh-accel-min", synth.veh_accel_lo, "Vehicle acceleration range, m/s^2");
  c_synth->add_option("--veh-accel-max", synth.veh_accel_hi, "Vehicle acceleration range, m/s^2");

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Time end-to-end predictions");
  add_common(c_bench, bench.common);
  add_protocol(c_bench, bench.protocol);
  c_bench->add_option("--model", bench.model, "Model file (default: built-in parameters)")->check(
      CLI::ExistingFile);
  c_bench->add_option("--vehicles", bench.vehicles, "Vehicles in the scenario")->capture_default_str();
  c_bench->add_option("--reps", bench.reps, "Timed repetitions")->capture_default_str()->check(
      CLI::PositiveNumber);
  c_bench->add_option("--out", bench.out, "Timing report (JSON)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (c_train->parsed()) return cmd_train(train);
    if (c_predict->parsed()) return cmd_predict(predict);
    if (c_eval->parsed()) return cmd_evaluate(evaluate);
    if (c_synth->parsed()) return cmd_synthesize(synth);
    if (c_bench->parsed()) return cmd_bench(bench);
  } catch (const osp::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const osp::ContractViolation& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
