#include "osp/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "osp/errors.hpp"

namespace osp {

void SceneConfig::validate() const {
  if (!(half_length > 0.0) || !(u_max > 0.0) || !(dt > 0.0) || !(stationary_speed > 0.0)) {
    throw ContractViolation("SceneConfig: all lengths, dt and the stationary threshold must be positive");
  }
}

FrameCoords to_vehicle_frame(const PedestrianState& ped, const VehicleState& veh,
                             double stationary_speed) {
  const double speed = veh.vel.norm();
  if (!(speed >= stationary_speed)) {
    throw FrameUndefined("vehicle is stationary; heading undefined");
  }
  const Vec2 heading = veh.vel / speed;
  const Vec2 rel = ped.pos - veh.pos;

  FrameCoords f;
  f.lon = rel.dot(heading);
  const Vec2 perp = rel - f.lon * heading;
  f.lat = perp.norm();
  if (f.lat > 1e-12 * std::max(1.0, rel.norm())) {
    f.lat_axis = perp / f.lat;
  } else {
    f.lat = 0.0;
    f.lat_axis = Vec2(-heading.y(), heading.x());
  }
  return f;
}

std::vector<std::size_t> candidate_set(const PedestrianState& ped,
                                       std::span<const VehicleState> vehicles,
                                       const SceneConfig& cfg) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    if (vehicles[i].stationary(cfg.stationary_speed)) continue;
    const FrameCoords f = to_vehicle_frame(ped, vehicles[i], cfg.stationary_speed);
    if (f.lon >= -cfg.half_length && f.lat <= cfg.u_max && ped.des_vel.dot(f.lat_axis) < 0.0) {
      out.push_back(i);
    }
  }
  return out;
}

void PedestrianTrack::validate() const {
  for (std::size_t k = 0; k < obs.size(); ++k) {
    if (!obs[k].pos_hat.allFinite()) {
      throw DataError("pedestrian track " + std::to_string(id) + ": non-finite position at t=" +
                      std::to_string(obs[k].t));
    }
    if (k > 0 && obs[k].t != obs[k - 1].t + 1) {
      throw DataError("pedestrian track " + std::to_string(id) + ": timesteps not contiguous at t=" +
                      std::to_string(obs[k].t));
    }
  }
}

VehicleTimeline::VehicleTimeline(std::span<const VehicleTrack> tracks) : tracks_(tracks) {
  if (tracks.empty()) return;
  int lo = std::numeric_limits<int>::max();
  int hi = std::numeric_limits<int>::min();
  for (const auto& v : tracks) {
    if (v.states.empty()) continue;
    lo = std::min(lo, v.t0);
    hi = std::max(hi, v.last_t());
  }
  if (lo > hi) return;
  t_min_ = lo;
  present_.resize(static_cast<std::size_t>(hi - lo + 1));
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const auto& v = tracks[i];
    for (int t = v.t0; t <= v.last_t(); ++t) present_[static_cast<std::size_t>(t - lo)].push_back(i);
  }
}

std::span<const std::size_t> VehicleTimeline::tracks_at(int t) const {
  const long k = static_cast<long>(t) - t_min_;
  if (k < 0 || k >= static_cast<long>(present_.size())) return {};
  return present_[static_cast<std::size_t>(k)];
}

std::vector<VehicleState> VehicleTimeline::states_at(int t) const {
  std::vector<VehicleState> out;
  for (std::size_t i : tracks_at(t)) out.push_back(tracks_[i].at(t));
  return out;
}

}  // namespace osp
