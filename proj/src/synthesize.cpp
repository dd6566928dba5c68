#include <cmath>
#include <numbers>

#include "osp/data_io.hpp"
#include "osp/errors.hpp"
#include "osp/random.hpp"

namespace osp {

namespace {

struct ScriptedVehicle {
  Vec2 start;
  Vec2 dir;
  double speed;
  double accel;

  VehicleState at(double t) const {
    // Deceleration stops the vehicle instead of reversing it.
    double s = speed + accel * t;
    double dist = speed * t + 0.5 * accel * t * t;
    if (s < 0.0) {
      const double t_stop = -speed / accel;
      s = 0.0;
      dist = speed * t_stop + 0.5 * accel * t_stop * t_stop;
    }
    return {start + dist * dir, s * dir};
  }
};

}  // namespace

ModelParams synthetic_truth() {
  ModelParams p;
  p.influence = GridFunction1D({0.0, 0.0, 0.0, 0.05, 0.1, 0.2, 0.3}, 6.0);
  std::vector<double> w(25);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      w[i * 5 + j] = 10.0 - 3.2 * static_cast<double>(i) - 3.2 * static_cast<double>(j);
    }
  }
  p.risk_fn = GridFunction2D(std::move(w), 0.0, 0.0, 1.6, 5);
  p.sigma_v = 0.02;
  return p;
}

SyntheticData synthesize(const ScenarioSpec& spec, const ModelParams& truth, int n, std::uint64_t seed) {
  truth.validate();
  if (n < 0 || spec.steps < 1 || spec.frame_gap <= spec.steps + spec.vehicle_tail || spec.n_vehicles < 0) {
    throw ContractViolation("invalid scenario spec");
  }
  const double dt = truth.scene.dt;
  SyntheticData out;
  out.scene.dt = dt;

  for (int i = 0; i < n; ++i) {
    Rng rng = stream(seed, static_cast<std::uint64_t>(i));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    const int t_base = i * spec.frame_gap;
    const int ped_id = i * 10 + 1;
    const double side = unit(rng) < 0.5 ? -1.0 : 1.0;
    const double cross_x = between(-3.0, 3.0);
    const double heading = -side * std::numbers::pi / 2.0 + between(-0.15, 0.15);
    const double speed = between(spec.ped_speed_lo, spec.ped_speed_hi);

    PedestrianState state;
    state.pos = Vec2(cross_x, side * between(spec.lateral_lo, spec.lateral_hi));
    state.des_vel = speed * Vec2(std::cos(heading), std::sin(heading));

    std::vector<ScriptedVehicle> scripted;
    if (spec.kind == ScenarioKind::kCrossing) {
      for (int k = 0; k < spec.n_vehicles; ++k) {
        const double dir = unit(rng) < 0.5 ? -1.0 : 1.0;
        const double v = between(spec.veh_speed_lo, spec.veh_speed_hi);
        const double arrival = between(spec.arrival_lo, spec.arrival_hi);
        const double accel = between(spec.veh_accel_lo, spec.veh_accel_hi);
        const double lane = -side * 3.5 * static_cast<double>(k);
        const Vec2 start(cross_x - dir * v * arrival, lane);
        scripted.push_back({start, Vec2(dir, 0.0), v, accel});
      }
    }

    const int n_veh_steps = spec.steps + 1 + spec.vehicle_tail;
    for (std::size_t k = 0; k < scripted.size(); ++k) {
      VehicleTrack tr;
      tr.id = ped_id + 1 + static_cast<int>(k);
      tr.t0 = t_base;
      for (int j = 0; j < n_veh_steps; ++j) tr.states.push_back(scripted[k].at(static_cast<double>(j) * dt));
      out.scene.vehicles.push_back(std::move(tr));
    }

    PedestrianTrack ped;
    ped.id = ped_id;
    std::vector<VehicleState> now(scripted.size());
    for (int j = 0; j <= spec.steps; ++j) {
      const double nx = normal(rng);
      const double ny = normal(rng);
      ped.obs.push_back({t_base + j, state.pos + truth.sigma_x * Vec2(nx, ny)});
      if (j == spec.steps) break;
      for (std::size_t k = 0; k < scripted.size(); ++k) now[k] = scripted[k].at(static_cast<double>(j) * dt);
      const Transition tr = sample_transition(truth, state, now, rng);
      LatentStep log;
      log.ped_id = ped_id;
      log.t = t_base + j;
      log.state = state;
      log.decision = tr.decision;
      if (tr.decision.attended) {
        log.attended_id = ped_id + 1 + static_cast<int>(*tr.decision.attended);
        log.features = risk_features(state, now[*tr.decision.attended]);
      }
      out.latent.push_back(log);
      state = tr.next;
    }
    out.scene.pedestrians.push_back(std::move(ped));
  }
  return out;
}

}  // namespace osp
