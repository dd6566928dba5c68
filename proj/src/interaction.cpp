#include "osp/interaction.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "osp/errors.hpp"

namespace osp {

void ModelParams::validate() const {
  if (!(sigma_v > 0.0) || !(sigma_x > 0.0)) {
    throw ContractViolation("ModelParams: sigma_v and sigma_x must be positive");
  }
  scene.validate();
}

RiskFeatures risk_features(const PedestrianState& ped, const VehicleState& veh) {
  const Vec2 rel_pos = ped.pos - veh.pos;
  const Vec2 rel_vel = veh.vel - ped.des_vel;
  const double speed2 = rel_vel.squaredNorm();
  if (!(speed2 > 1e-12)) throw ContractViolation("risk features undefined at zero relative velocity");
  RiskFeatures f;
  f.tau = std::max(rel_pos.dot(rel_vel) / speed2, 0.0);
  // Separation at time tau; same as sqrt(|rel_pos|^2 - tau^2 |rel_vel|^2)
  // without the cancellation.
  f.dmin = (rel_pos - f.tau * rel_vel).norm();
  return f;
}

double risk(const ModelParams& params, const RiskFeatures& feats) {
  return params.risk_fn(std::log10(std::max(feats.tau, kMinFeatureValue)),
                        std::log10(std::max(feats.dmin, kMinFeatureValue)));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> attention_dist(const ModelParams& params, const PedestrianState& ped,
                                   std::span<const VehicleState> vehicles,
                                   std::span<const std::size_t> candidates) {
  if (candidates.empty()) throw ContractViolation("attention over an empty candidate set");
  std::vector<double> p(candidates.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    p[k] = risk(params, risk_features(ped, vehicles[candidates[k]]));
  }
  const double top = *std::max_element(p.begin(), p.end());
  double total = 0.0;
  for (double& v : p) total += (v = std::exp(v - top));
  for (double& v : p) v /= total;
  return p;
}

double yield_prob(const ModelParams& params, const PedestrianState& ped, const VehicleState& veh) {
  return sigmoid(risk(params, risk_features(ped, veh)));
}

Vec2 step(const ModelParams& params, const PedestrianState& ped, const LatentDecision& decision,
          std::span<const VehicleState> vehicles) {
  const double dt = params.scene.dt;
  if (decision.q == Yield::kContinue) return ped.pos + ped.des_vel * dt;
  if (!decision.attended || *decision.attended >= vehicles.size()) {
    throw ContractViolation("yield decision without an attended vehicle");
  }
  const FrameCoords f =
      to_vehicle_frame(ped, vehicles[*decision.attended], params.scene.stationary_speed);
  return ped.pos + params.influence(f.lat) * ped.des_vel * dt;
}

Transition sample_transition(const ModelParams& params, const PedestrianState& ped,
                             std::span<const VehicleState> vehicles, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Transition out;
  const auto candidates = candidate_set(ped, vehicles, params.scene);
  if (!candidates.empty()) {
    std::size_t pick = 0;
    if (candidates.size() > 1) {
      const auto attn = attention_dist(params, ped, vehicles, candidates);
      const double u = unit(rng);
      double acc = 0.0;
      pick = candidates.size() - 1;
      for (std::size_t k = 0; k < attn.size(); ++k) {
        acc += attn[k];
        if (u < acc) {
          pick = k;
          break;
        }
      }
    }
    out.decision.attended = candidates[pick];
    const double p_yield = yield_prob(params, ped, vehicles[candidates[pick]]);
    out.decision.q = unit(rng) < p_yield ? Yield::kYield : Yield::kContinue;
  }
  out.next.pos = step(params, ped, out.decision, vehicles);
  out.next.des_vel = ped.des_vel;
  if (params.sigma_v > 0.0) {
    std::normal_distribution<double> innovation(0.0, params.sigma_v);
    const double dx = innovation(rng);
    const double dy = innovation(rng);
    out.next.des_vel += Vec2(dx, dy);
  }
  return out;
}

}  // namespace osp
