#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "osp/inference.hpp"
#include "osp/scene.hpp"

namespace osp {

/// Expected Euclidean error at `step` steps ahead (1-based) under the sample
/// weights. Throws DataError when the step is outside the prediction.
double ade(std::span<const Vec2> truth, const PredictionSet& prediction, int step);
/// Expected squared Euclidean error at `step`.
double expected_sq_error(std::span<const Vec2> truth, const PredictionSet& prediction, int step);
double rmse(std::span<const Vec2> truth, const PredictionSet& prediction, int step);

struct MetricRow {
  double t_seconds = 0.0;
  double ade_m = 0.0;
  double rmse_m = 0.0;
  std::size_t n = 0;
};

struct MetricTable {
  std::vector<MetricRow> rows;
  std::size_t n_pedestrians = 0;  // evaluated windows
};

struct EvalProtocol {
  double obs_seconds = 3.0;
  double horizon_seconds = 5.0;
  double stride_seconds = 1.0;
  int samples = 100;
  std::uint64_t seed = 20200531;
  VehicleMode mode = VehicleMode::kExtrapolate;
  /// Keep only windows with exactly one moving vehicle whose recorded track,
  /// like every other vehicle present, covers the whole horizon.
  bool single_moving_vehicle = false;
};

struct EvalWindow {
  std::size_t ped = 0;  // index into Scene::pedestrians
  int t_now = 0;        // last observed timestep
};

/// Windows with a full observation history and a full future, every
/// `stride_seconds` along each pedestrian track.
std::vector<EvalWindow> evaluation_windows(const Scene& scene, const EvalProtocol& protocol);

/// Request for pedestrian `ped` at timestep `t_now` using up to
/// `obs_seconds` of history. Vehicles present at `t_now` get their recorded
/// history over the same window and their recorded future up to the horizon.
PredictionRequest request_at(const Scene& scene, const VehicleTimeline& timeline, std::size_t ped, int t_now,
                             const EvalProtocol& protocol, std::uint64_t seed);

/// Request for one window. Vehicle futures are attached from the recording
/// (read only in known-trajectory mode).
PredictionRequest make_request(const Scene& scene, const VehicleTimeline& timeline, const EvalWindow& window,
                               const EvalProtocol& protocol, std::uint64_t seed);

using Predictor = std::function<PredictionSet(const PredictionRequest&)>;

/// Throws DataError when no window qualifies. Windows run in parallel; sums
/// are reduced in window order.
MetricTable evaluate(const Scene& scene, const Predictor& predictor, const EvalProtocol& protocol);

struct BenchResult {
  double mean_ms = 0.0;
  double p95_ms = 0.0;
  int repetitions = 0;
};

/// Times `predictor` end to end after one warm-up call.
BenchResult bench(const Predictor& predictor, const PredictionRequest& request, int repetitions);

/// Pedestrian walking toward a road with `n_vehicles` approaching vehicles;
/// 3 s of history, 100 samples, 5 s horizon.
PredictionRequest benchmark_scenario(int n_vehicles, double dt = 0.1);

}  // namespace osp
