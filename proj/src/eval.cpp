#include "osp/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "osp/errors.hpp"
#include "osp/random.hpp"

namespace osp {

namespace {

void check_step(std::span<const Vec2> truth, const PredictionSet& prediction, int step) {
  if (prediction.samples.empty()) throw DataError("empty prediction");
  const auto horizon = static_cast<int>(prediction.samples.front().positions.size());
  if (step < 1 || step > horizon || step > static_cast<int>(truth.size())) {
    throw DataError("step " + std::to_string(step) + " outside the prediction horizon");
  }
}

long steps_of(double seconds, double dt) { return std::lround(seconds / dt); }

}  // namespace

double ade(std::span<const Vec2> truth, const PredictionSet& prediction, int step) {
  check_step(truth, prediction, step);
  const auto k = static_cast<std::size_t>(step - 1);
  double s = 0.0;
  for (const auto& sample : prediction.samples) s += sample.weight * (truth[k] - sample.positions[k]).norm();
  return s;
}

double expected_sq_error(std::span<const Vec2> truth, const PredictionSet& prediction, int step) {
  check_step(truth, prediction, step);
  const auto k = static_cast<std::size_t>(step - 1);
  double s = 0.0;
  for (const auto& sample : prediction.samples) {
    s += sample.weight * (truth[k] - sample.positions[k]).squaredNorm();
  }
  return s;
}

double rmse(std::span<const Vec2> truth, const PredictionSet& prediction, int step) {
  return std::sqrt(expected_sq_error(truth, prediction, step));
}

std::vector<EvalWindow> evaluation_windows(const Scene& scene, const EvalProtocol& protocol) {
  const long n_obs = steps_of(protocol.obs_seconds, scene.dt);
  const long n_fut = steps_of(protocol.horizon_seconds, scene.dt);
  const long stride = std::max<long>(steps_of(protocol.stride_seconds, scene.dt), 1);
  const VehicleTimeline timeline(scene.vehicles);

  std::vector<EvalWindow> out;
  for (std::size_t i = 0; i < scene.pedestrians.size(); ++i) {
    const auto& tr = scene.pedestrians[i];
    const auto len = static_cast<long>(tr.size());
    for (long k = n_obs - 1; k + n_fut < len; k += stride) {
      const int t_now = tr.obs[static_cast<std::size_t>(k)].t;
      if (protocol.single_moving_vehicle) {
        int moving = 0;
        bool covered = true;
        for (std::size_t v : timeline.tracks_at(t_now)) {
          const auto& veh = scene.vehicles[v];
          moving += veh.at(t_now).stationary() ? 0 : 1;
          covered = covered && veh.last_t() >= t_now + n_fut;
        }
        if (moving != 1 || !covered) continue;
      }
      out.push_back({i, t_now});
    }
  }
  return out;
}

PredictionRequest request_at(const Scene& scene, const VehicleTimeline& timeline, std::size_t ped, int t_now,
                             const EvalProtocol& protocol, std::uint64_t seed) {
  if (ped >= scene.pedestrians.size()) throw ContractViolation("pedestrian index out of range");
  const auto& tr = scene.pedestrians[ped];
  if (t_now < tr.first_t() || t_now > tr.last_t()) throw DataError("requested time is outside the pedestrian track");
  const long n_obs = steps_of(protocol.obs_seconds, scene.dt);
  const long n_fut = steps_of(protocol.horizon_seconds, scene.dt);
  const long k = t_now - tr.first_t();
  const long first = std::max<long>(k - n_obs + 1, 0);

  PredictionRequest req;
  req.observations.assign(tr.obs.begin() + first, tr.obs.begin() + k + 1);
  req.horizon = static_cast<int>(n_fut);
  req.n_samples = protocol.samples;
  req.mode = protocol.mode;
  req.seed = seed;
  const int t_first = req.observations.front().t;
  for (std::size_t v : timeline.tracks_at(t_now)) {
    const auto& veh = scene.vehicles[v];
    VehicleInput in;
    in.id = veh.id;
    for (int t = std::max(t_first, veh.t0); t <= t_now; ++t) in.history.push_back(veh.at(t));
    for (int t = t_now + 1; t <= std::min(veh.last_t(), t_now + static_cast<int>(n_fut)); ++t) {
      in.future.push_back(veh.at(t));
    }
    req.vehicles.push_back(std::move(in));
  }
  return req;
}

PredictionRequest make_request(const Scene& scene, const VehicleTimeline& timeline, const EvalWindow& window,
                               const EvalProtocol& protocol, std::uint64_t seed) {
  return request_at(scene, timeline, window.ped, window.t_now, protocol, seed);
}

MetricTable evaluate(const Scene& scene, const Predictor& predictor, const EvalProtocol& protocol) {
  const auto windows = evaluation_windows(scene, protocol);
  if (windows.empty()) throw DataError("no evaluation window has the required history and future");
  const VehicleTimeline timeline(scene.vehicles);
  const long n_fut = steps_of(protocol.horizon_seconds, scene.dt);
  const int n_rows = static_cast<int>(std::floor(protocol.horizon_seconds + 1e-9));

  struct WindowScore {
    std::vector<double> dist;
    std::vector<double> sq;
  };
  std::vector<WindowScore> scores(windows.size());

  const auto n = static_cast<long>(windows.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long w = 0; w < n; ++w) {
    const auto& win = windows[static_cast<std::size_t>(w)];
    const PredictionRequest req =
        make_request(scene, timeline, win, protocol, mix64(protocol.seed ^ mix64(static_cast<std::uint64_t>(w))));
    const PredictionSet pred = predictor(req);
    const auto& tr = scene.pedestrians[win.ped];
    const long k = win.t_now - tr.first_t();
    std::vector<Vec2> truth;
    for (long s = 1; s <= n_fut; ++s) truth.push_back(tr.obs[static_cast<std::size_t>(k + s)].pos_hat);
    auto& sc = scores[static_cast<std::size_t>(w)];
    for (int row = 1; row <= n_rows; ++row) {
      const int step = static_cast<int>(steps_of(row, scene.dt));
      sc.dist.push_back(ade(truth, pred, step));
      sc.sq.push_back(expected_sq_error(truth, pred, step));
    }
  }

  MetricTable table;
  table.n_pedestrians = windows.size();
  for (int row = 0; row < n_rows; ++row) {
    double dist = 0.0;
    double sq = 0.0;
    for (const auto& sc : scores) {
      dist += sc.dist[static_cast<std::size_t>(row)];
      sq += sc.sq[static_cast<std::size_t>(row)];
    }
    const auto count = static_cast<double>(windows.size());
    table.rows.push_back({static_cast<double>(row + 1), dist / count, std::sqrt(sq / count), windows.size()});
  }
  return table;
}

BenchResult bench(const Predictor& predictor, const PredictionRequest& request, int repetitions) {
  if (repetitions < 1) throw ContractViolation("bench needs at least one repetition");
  (void)predictor(request);  // warm-up
  std::vector<double> ms;
  ms.reserve(static_cast<std::size_t>(repetitions));
  for (int r = 0; r < repetitions; ++r) {
    const auto start = std::chrono::steady_clock::now();
    const PredictionSet out = predictor(request);
    const auto stop = std::chrono::steady_clock::now();
    if (out.samples.empty()) throw NumericalError("predictor returned no samples");
    ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
  }
  BenchResult res;
  res.repetitions = repetitions;
  double total = 0.0;
  for (double v : ms) total += v;
  res.mean_ms = total / static_cast<double>(ms.size());
  std::sort(ms.begin(), ms.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(ms.size())));
  res.p95_ms = ms[std::max<std::size_t>(rank, 1) - 1];
  return res;
}

PredictionRequest benchmark_scenario(int n_vehicles, double dt) {
  PredictionRequest req;
  const int n_obs = static_cast<int>(std::lround(3.0 / dt));
  const Vec2 start(0.0, -9.0);
  const Vec2 vel(0.1, 1.3);
  for (int j = 0; j < n_obs; ++j) {
    req.observations.push_back({j, start + static_cast<double>(j) * dt * vel});
  }
  for (int i = 0; i < n_vehicles; ++i) {
    VehicleInput v;
    v.id = i + 1;
    // Vehicles on parallel lanes, all heading toward the crossing point.
    const double lane = -1.5 * static_cast<double>(i);
    const double speed = 5.0 + static_cast<double>(i);
    const Vec2 vvel(speed, 0.0);
    const Vec2 now(-25.0 - 5.0 * static_cast<double>(i), lane);
    for (int j = 0; j < n_obs; ++j) {
      v.history.push_back({now - static_cast<double>(n_obs - 1 - j) * dt * vvel, vvel});
    }
    req.vehicles.push_back(std::move(v));
  }
  return req;
}

}  // namespace osp
