#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "osp/piecewise.hpp"
#include "osp/random.hpp"
#include "osp/scene.hpp"

namespace osp {

/// Time to closest approach and the separation reached then, assuming both
/// agents hold their current (desired) velocities.
struct RiskFeatures {
  double tau = 0.0;   // s
  double dmin = 0.0;  // m
};

enum class Yield : std::uint8_t { kYield = 0, kContinue = 1 };

/// Latent (r_t, q_t). `attended` indexes the vehicle list handed to the
/// transition and is empty when no vehicle is a candidate.
struct LatentDecision {
  std::optional<std::size_t> attended;
  Yield q = Yield::kContinue;
};

struct ModelParams {
  GridFunction1D influence = GridFunction1D::zeros(7, 6.0);
  GridFunction2D risk_fn = GridFunction2D::zeros(5, 0.0, 1.6);
  double sigma_v = 0.1;   // m/s, desired-velocity innovation std per axis
  double sigma_x = 0.05;  // m, observation noise std per axis
  SceneConfig scene{};

  void validate() const;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

inline constexpr double kMinFeatureValue = 1e-3;  // floor before log10, s or m

/// Throws ContractViolation when the relative velocity vanishes. A negative
/// closest-approach time (agents already separating) is clamped to 0, so
/// `dmin` is always the minimum separation over future time.
RiskFeatures risk_features(const PedestrianState& ped, const VehicleState& veh);

double risk(const ModelParams& params, const RiskFeatures& feats);

/// Overflow-safe logistic function.
double sigmoid(double x);

/// Softmax of the risks of the candidate vehicles, in the order of `candidates`.
std::vector<double> attention_dist(const ModelParams& params, const PedestrianState& ped,
                                   std::span<const VehicleState> vehicles,
                                   std::span<const std::size_t> candidates);

/// Probability that the pedestrian yields to `veh`.
double yield_prob(const ModelParams& params, const PedestrianState& ped, const VehicleState& veh);

/// Next true position. Continuing moves at the desired velocity; yielding
/// scales it by the influence at the lateral offset from the attended vehicle.
Vec2 step(const ModelParams& params, const PedestrianState& ped, const LatentDecision& decision,
          std::span<const VehicleState> vehicles);

struct Transition {
  PedestrianState next;
  LatentDecision decision;
};

/// Draws (r, q), moves the pedestrian and diffuses the desired velocity.
Transition sample_transition(const ModelParams& params, const PedestrianState& ped,
                             std::span<const VehicleState> vehicles, Rng& rng);

}  // namespace osp
