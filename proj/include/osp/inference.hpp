#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "osp/interaction.hpp"
#include "osp/scene.hpp"

namespace osp {

enum class VehicleMode { kExtrapolate, kKnownTrajectory };

/// One vehicle as seen by the predictor. `history.back()` is the state at the
/// current (last observed) step. `future` holds the states of the following
/// steps and is only read in known-trajectory mode.
struct VehicleInput {
  int id = 0;
  std::vector<VehicleState> history;
  std::vector<VehicleState> future;
};

struct PredictionRequest {
  std::vector<PedestrianObservation> observations;  // contiguous, oldest first
  std::vector<VehicleInput> vehicles;
  int horizon = 50;     // steps
  int n_samples = 100;
  VehicleMode mode = VehicleMode::kExtrapolate;
  std::uint64_t seed = 20200531;
  double vel_window = 2.0;  // s, moving average used to gate the window

  /// Throws DataError/ContractViolation; needs >= 1 s of observations.
  void validate(double dt) const;
};

struct PredictionSample {
  std::vector<Vec2> positions;  // horizon entries, first is one step ahead
  std::vector<LatentDecision> decisions;
  double weight = 0.0;
};

struct PredictionSet {
  std::vector<PredictionSample> samples;
  std::vector<Vec2> mean_track;
  double ess = 0.0;  // 1 / sum w^2
};

struct StateHypotheses {
  std::vector<PedestrianState> states;
  std::vector<double> weights;  // normalized
  double ess = 0.0;
};

/// Importance sampler for the current state. Hypotheses are drawn from the
/// interaction-free filter posterior (position observations restricted to
/// steps without candidate vehicles, plus the latest one) and weighted by the
/// interaction-model likelihood of the displacements at the remaining steps.
/// `window_vehicles[j]` are the vehicles present at observation j.
StateHypotheses posterior_state(std::span<const PedestrianObservation> observations,
                                std::span<const std::vector<VehicleState>> window_vehicles,
                                const ModelParams& params, int n_samples, std::uint64_t seed,
                                double vel_window = 2.0);

/// Constant-velocity extrapolation: entry s-1 of each sequence is the state s
/// steps after the last history entry.
std::vector<std::vector<VehicleState>> extrapolate_vehicles(std::span<const VehicleInput> vehicles,
                                                            int horizon, double dt);

/// Vehicles present at rollout steps 0..horizon-1 (step 0 is the current step).
/// Throws DataError in known-trajectory mode when a supplied future does not
/// cover the horizon.
std::vector<std::vector<VehicleState>> vehicle_schedule(const PredictionRequest& req, double dt);

/// Rolls every hypothesis forward through the generative model. Sample j uses
/// its own random stream, so the OpenMP and serial versions agree exactly.
PredictionSet rollout(const StateHypotheses& hyp, std::span<const std::vector<VehicleState>> schedule,
                      const ModelParams& params, int horizon, std::uint64_t seed);
PredictionSet rollout_serial(const StateHypotheses& hyp, std::span<const std::vector<VehicleState>> schedule,
                             const ModelParams& params, int horizon, std::uint64_t seed);

PredictionSet predict(const PredictionRequest& req, const ModelParams& params);
PredictionSet predict_serial(const PredictionRequest& req, const ModelParams& params);

/// Least-squares line through the observation window, extrapolated.
PedestrianState fit_constant_velocity(std::span<const PedestrianObservation> observations, double dt);
PredictionSet predict_cv(const PredictionRequest& req, double dt);

/// Weighted mean position per step.
std::vector<Vec2> weighted_mean_track(const std::vector<PredictionSample>& samples);

}  // namespace osp
