#include <benchmark/benchmark.h>

#include "osp/data_io.hpp"
#include "osp/eval.hpp"
#include "osp/inference.hpp"
#include "osp/training.hpp"

namespace {

struct RolloutFixture {
  osp::ModelParams params = osp::synthetic_truth();
  osp::PredictionRequest req = osp::benchmark_scenario(3);
  osp::StateHypotheses hyp;
  std::vector<std::vector<osp::VehicleState>> schedule;

  explicit RolloutFixture(int samples) {
    req.n_samples = samples;
    std::vector<std::vector<osp::VehicleState>> window(req.observations.size());
    for (const auto& v : req.vehicles) {
      for (std::size_t j = 0; j < window.size(); ++j) window[j].push_back(v.history[j]);
    }
    hyp = osp::posterior_state(req.observations, window, params, samples, req.seed);
    schedule = osp::vehicle_schedule(req, params.scene.dt);
  }
};

void BM_RolloutSerial(benchmark::State& state) {
  const RolloutFixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(osp::rollout_serial(f.hyp, f.schedule, f.params, f.req.horizon, f.req.seed));
  }
}

void BM_RolloutParallel(benchmark::State& state) {
  const RolloutFixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(osp::rollout(f.hyp, f.schedule, f.params, f.req.horizon, f.req.seed));
  }
}

std::vector<osp::InteractionRecord> training_records(const osp::ModelParams& params) {
  const osp::SyntheticData data = osp::synthesize(osp::ScenarioSpec{}, params, 200, 1);
  return osp::build_training_set(data.scene, params, osp::TrainingConfig{}).records;
}

void BM_UpdateQSerial(benchmark::State& state) {
  const osp::ModelParams params = osp::synthetic_truth();
  const auto records = training_records(params);
  for (auto _ : state) benchmark::DoNotOptimize(osp::update_q_serial(records, params));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(records.size()));
}

void BM_UpdateQParallel(benchmark::State& state) {
  const osp::ModelParams params = osp::synthetic_truth();
  const auto records = training_records(params);
  for (auto _ : state) benchmark::DoNotOptimize(osp::update_q(records, params));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(records.size()));
}

}  // namespace

BENCHMARK(BM_RolloutSerial)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RolloutParallel)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_UpdateQSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_UpdateQParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
