#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <vector>

namespace osp {

using Vec2 = Eigen::Vector2d;

inline constexpr double kStationarySpeed = 0.1;      // m/s
inline constexpr double kMaxPedestrianSpeed = 5.0;   // m/s

struct PedestrianObservation {
  int t = 0;  // timestep index
  Vec2 pos_hat = Vec2::Zero();
};

/// Latent pedestrian state s_t: true position and desired velocity.
struct PedestrianState {
  Vec2 pos = Vec2::Zero();
  Vec2 des_vel = Vec2::Zero();

  bool plausible(double speed_cap = kMaxPedestrianSpeed) const {
    return pos.allFinite() && des_vel.allFinite() && des_vel.norm() < speed_cap;
  }
};

struct VehicleState {
  Vec2 pos = Vec2::Zero();
  Vec2 vel = Vec2::Zero();

  bool stationary(double threshold = kStationarySpeed) const { return vel.norm() < threshold; }
};

/// Pedestrian position in a vehicle's reference frame. `lat_axis` points from
/// the vehicle's path line toward the pedestrian, so `lat` is never negative.
struct FrameCoords {
  double lon = 0.0;
  double lat = 0.0;
  Vec2 lat_axis = Vec2::UnitY();
};

struct SceneConfig {
  double half_length = 2.0;  // l
  double u_max = 6.0;
  double dt = 0.1;
  double stationary_speed = kStationarySpeed;

  void validate() const;
  friend bool operator==(const SceneConfig&, const SceneConfig&) = default;
};

/// Throws FrameUndefined for a stationary vehicle. A pedestrian exactly on the
/// path line gets the left normal of the heading as lateral axis.
FrameCoords to_vehicle_frame(const PedestrianState& ped, const VehicleState& veh,
                             double stationary_speed = kStationarySpeed);

/// Indices of vehicles the pedestrian may attend to: in front (lon >= -l),
/// laterally close (lat <= u_max) and approached (des_vel . z < 0).
/// Stationary vehicles never qualify.
std::vector<std::size_t> candidate_set(const PedestrianState& ped,
                                       std::span<const VehicleState> vehicles,
                                       const SceneConfig& cfg);

// ---------------------------------------------------------------------------
// Tracks and scenes on a shared timestep grid of spacing dt.

struct PedestrianTrack {
  int id = 0;
  int segment = 0;  // > 0 when a source track was split at a frame gap
  std::vector<PedestrianObservation> obs;

  std::size_t size() const { return obs.size(); }
  int first_t() const { return obs.front().t; }
  int last_t() const { return obs.back().t; }
  /// Throws DataError unless timesteps are contiguous and positions finite.
  void validate() const;
};

struct VehicleTrack {
  int id = 0;
  int segment = 0;
  int t0 = 0;
  std::vector<VehicleState> states;

  int last_t() const { return t0 + static_cast<int>(states.size()) - 1; }
  bool covers(int t) const { return t >= t0 && t <= last_t(); }
  const VehicleState& at(int t) const { return states[static_cast<std::size_t>(t - t0)]; }
};

struct Scene {
  double dt = 0.1;
  std::vector<PedestrianTrack> pedestrians;
  std::vector<VehicleTrack> vehicles;
};

/// Per-timestep lookup of which vehicle tracks are present.
class VehicleTimeline {
 public:
  VehicleTimeline() = default;
  explicit VehicleTimeline(std::span<const VehicleTrack> tracks);

  /// Indices into the track list of vehicles present at t.
  std::span<const std::size_t> tracks_at(int t) const;
  std::vector<VehicleState> states_at(int t) const;

 private:
  std::span<const VehicleTrack> tracks_;
  int t_min_ = 0;
  std::vector<std::vector<std::size_t>> present_;
};

}  // namespace osp
