#include "osp/inference.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "osp/errors.hpp"
#include "osp/random.hpp"
#include "osp/smoothing.hpp"
#include "osp/training.hpp"

namespace osp {

namespace {

// Streams 2j (rollout) and 2j+1 (hypothesis draw) belong to sample j.
Rng rollout_stream(std::uint64_t seed, std::size_t j) { return stream(seed, 2 * j); }
Rng hypothesis_stream(std::uint64_t seed, std::size_t j) { return stream(seed, 2 * j + 1); }

double log_sum_exp(std::span<const double> xs) {
  const double top = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(top)) return top;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - top);
  return top + std::log(s);
}

// Log-likelihood, up to a shared constant, of one window displacement d under
// the interaction mixture. Without candidates the step is free motion.
double displacement_log_lik(const ModelParams& params, const PedestrianState& ped, const Vec2& d,
                            std::span<const VehicleState> vehicles) {
  const double two_var = 4.0 * params.sigma_x * params.sigma_x;  // 2 * (2 sigma_x^2)
  const Vec2 free_step = ped.des_vel * params.scene.dt;
  const double free_sq = (d - free_step).squaredNorm();
  const auto cands = candidate_set(ped, vehicles, params.scene);
  if (cands.empty()) return -free_sq / two_var;
  const auto attention = attention_dist(params, ped, vehicles, cands);

  std::vector<double> terms;
  terms.reserve(2 * cands.size());
  for (std::size_t k = 0; k < cands.size(); ++k) {
    const VehicleState& veh = vehicles[cands[k]];
    const double p_yield = yield_prob(params, ped, veh);
    const double lat = to_vehicle_frame(ped, veh, params.scene.stationary_speed).lat;
    const double yield_sq = (d - params.influence(lat) * free_step).squaredNorm();
    const double log_attn = std::log(attention[k]);
    terms.push_back(log_attn + std::log1p(-p_yield) - free_sq / two_var);
    terms.push_back(log_attn + std::log(p_yield) - yield_sq / two_var);
  }
  return log_sum_exp(terms);
}

PredictionSet rollout_impl(const StateHypotheses& hyp, std::span<const std::vector<VehicleState>> schedule,
                           const ModelParams& params, int horizon, std::uint64_t seed, bool parallel) {
  if (horizon < 1) throw ContractViolation("horizon must be at least one step");
  if (schedule.size() < static_cast<std::size_t>(horizon)) {
    throw ContractViolation("vehicle schedule shorter than the horizon");
  }
  const auto n = static_cast<long>(hyp.states.size());
  PredictionSet set;
  set.samples.resize(hyp.states.size());

  const auto run_one = [&](long j) {
    auto& sample = set.samples[static_cast<std::size_t>(j)];
    Rng rng = rollout_stream(seed, static_cast<std::size_t>(j));
    sample.positions.resize(static_cast<std::size_t>(horizon));
    sample.decisions.resize(static_cast<std::size_t>(horizon));
    sample.weight = hyp.weights[static_cast<std::size_t>(j)];
    PedestrianState state = hyp.states[static_cast<std::size_t>(j)];
    for (int s = 0; s < horizon; ++s) {
      const Transition tr = sample_transition(params, state, schedule[static_cast<std::size_t>(s)], rng);
      sample.positions[static_cast<std::size_t>(s)] = tr.next.pos;
      sample.decisions[static_cast<std::size_t>(s)] = tr.decision;
      state = tr.next;
    }
  };

  if (parallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (long j = 0; j < n; ++j) run_one(j);
  } else {
    for (long j = 0; j < n; ++j) run_one(j);
  }
  set.mean_track = weighted_mean_track(set.samples);
  set.ess = hyp.ess;
  return set;
}

std::vector<std::vector<VehicleState>> window_vehicles(const PredictionRequest& req) {
  const std::size_t n = req.observations.size();
  std::vector<std::vector<VehicleState>> out(n);
  for (const auto& v : req.vehicles) {
    const std::size_t h = v.history.size();
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t back = n - 1 - j;  // steps before the current one
      if (back < h) out[j].push_back(v.history[h - 1 - back]);
    }
  }
  return out;
}

PredictionSet predict_impl(const PredictionRequest& req, const ModelParams& params, bool parallel) {
  req.validate(params.scene.dt);
  const auto window = window_vehicles(req);
  const StateHypotheses hyp =
      posterior_state(req.observations, window, params, req.n_samples, req.seed, req.vel_window);
  const auto schedule = vehicle_schedule(req, params.scene.dt);
  return rollout_impl(hyp, schedule, params, req.horizon, req.seed, parallel);
}

}  // namespace

void PredictionRequest::validate(double dt) const {
  if (horizon < 1) throw ContractViolation("horizon must be at least one step");
  if (n_samples < 1) throw ContractViolation("need at least one sample");
  const auto min_obs = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(1.0 / dt)));
  if (observations.size() < min_obs) {
    throw DataError("prediction needs at least 1 s of observations (" + std::to_string(min_obs) + " steps)");
  }
  for (std::size_t j = 1; j < observations.size(); ++j) {
    if (observations[j].t != observations[j - 1].t + 1) throw DataError("observation window is not contiguous");
  }
  for (const auto& v : vehicles) {
    if (v.history.empty()) throw ContractViolation("vehicle " + std::to_string(v.id) + " has no history");
  }
}

StateHypotheses posterior_state(std::span<const PedestrianObservation> observations,
                                std::span<const std::vector<VehicleState>> window_vehicles,
                                const ModelParams& params, int n_samples, std::uint64_t seed,
                                double vel_window) {
  const std::size_t n = observations.size();
  if (n < 2) throw DataError("posterior needs at least two observations");
  if (window_vehicles.size() != n) throw ContractViolation("one vehicle list per observation expected");
  if (n_samples < 1) throw ContractViolation("need at least one sample");
  const double dt = params.scene.dt;

  const auto ma = moving_average_velocity(observations, dt, vel_window);
  std::vector<bool> in_q(n);
  for (std::size_t j = 0; j < n; ++j) {
    in_q[j] = candidate_set({observations[j].pos_hat, ma[j]}, window_vehicles[j], params.scene).empty();
  }
  ObservationPlan plan = ObservationPlan::from_free_steps(in_q);
  plan.observed[n - 1] = 1;
  const LinearGaussianModel model{params.sigma_v, params.sigma_x, dt};
  const auto filtered = kalman_filter(observations, plan, default_prior(observations, params.sigma_x, dt), model);
  const AxisMean mean = filtered.mean.back();
  AxisCov cov = filtered.cov.back();
  Eigen::LLT<AxisCov> llt(cov);
  for (double jitter = 1e-12; llt.info() != Eigen::Success && jitter < 1.0; jitter *= 10.0) {
    llt.compute(cov + jitter * AxisCov::Identity());
  }
  if (llt.info() != Eigen::Success) throw NumericalError("filter covariance is not positive definite");
  const AxisCov chol = llt.matrixL();

  StateHypotheses hyp;
  const auto count = static_cast<std::size_t>(n_samples);
  hyp.states.resize(count);
  std::vector<double> log_w(count, 0.0);
  for (std::size_t j = 0; j < count; ++j) {
    Rng rng = hypothesis_stream(seed, j);
    std::normal_distribution<double> normal(0.0, 1.0);
    AxisMean z;
    for (int a = 0; a < 2; ++a) {
      for (int r = 0; r < 2; ++r) z(r, a) = normal(rng);
    }
    const AxisMean draw = mean + chol * z;
    hyp.states[j].pos = draw.row(0).transpose();
    hyp.states[j].des_vel = draw.row(1).transpose();
    for (std::size_t t = 0; t + 1 < n; ++t) {
      if (in_q[t]) continue;
      const PedestrianState ped{observations[t].pos_hat, hyp.states[j].des_vel};
      log_w[j] += displacement_log_lik(params, ped, observations[t + 1].pos_hat - observations[t].pos_hat,
                                       window_vehicles[t]);
    }
  }
  const double norm = log_sum_exp(log_w);
  hyp.weights.resize(count);
  double sum_sq = 0.0;
  for (std::size_t j = 0; j < count; ++j) {
    hyp.weights[j] = std::exp(log_w[j] - norm);
    sum_sq += hyp.weights[j] * hyp.weights[j];
  }
  hyp.ess = 1.0 / sum_sq;
  return hyp;
}

std::vector<std::vector<VehicleState>> extrapolate_vehicles(std::span<const VehicleInput> vehicles, int horizon,
                                                            double dt) {
  std::vector<std::vector<VehicleState>> out;
  out.reserve(vehicles.size());
  for (const auto& v : vehicles) {
    if (v.history.empty()) throw ContractViolation("vehicle " + std::to_string(v.id) + " has no history");
    const VehicleState& last = v.history.back();
    std::vector<VehicleState> seq(static_cast<std::size_t>(std::max(horizon, 0)));
    for (int s = 1; s <= horizon; ++s) {
      seq[static_cast<std::size_t>(s - 1)] = {last.pos + static_cast<double>(s) * dt * last.vel, last.vel};
    }
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<std::vector<VehicleState>> vehicle_schedule(const PredictionRequest& req, double dt) {
  const auto horizon = static_cast<std::size_t>(req.horizon);
  const bool known = req.mode == VehicleMode::kKnownTrajectory;
  std::vector<std::vector<VehicleState>> schedule(horizon);
  std::vector<VehicleInput> to_extrapolate;
  for (const auto& v : req.vehicles) {
    if (known && !v.future.empty()) {
      if (v.future.size() < horizon) {
        throw DataError("vehicle " + std::to_string(v.id) + ": known trajectory covers " +
                        std::to_string(v.future.size()) + " steps but the horizon needs " + std::to_string(horizon));
      }
      schedule[0].push_back(v.history.back());
      for (std::size_t s = 1; s < horizon; ++s) schedule[s].push_back(v.future[s - 1]);
    } else {
      to_extrapolate.push_back(v);
    }
  }
  const auto extrapolated = extrapolate_vehicles(to_extrapolate, req.horizon, dt);
  for (std::size_t i = 0; i < to_extrapolate.size(); ++i) {
    schedule[0].push_back(to_extrapolate[i].history.back());
    for (std::size_t s = 1; s < horizon; ++s) schedule[s].push_back(extrapolated[i][s - 1]);
  }
  return schedule;
}

PredictionSet rollout(const StateHypotheses& hyp, std::span<const std::vector<VehicleState>> schedule,
                      const ModelParams& params, int horizon, std::uint64_t seed) {
  return rollout_impl(hyp, schedule, params, horizon, seed, true);
}

PredictionSet rollout_serial(const StateHypotheses& hyp, std::span<const std::vector<VehicleState>> schedule,
                             const ModelParams& params, int horizon, std::uint64_t seed) {
  return rollout_impl(hyp, schedule, params, horizon, seed, false);
}

PredictionSet predict(const PredictionRequest& req, const ModelParams& params) {
  return predict_impl(req, params, true);
}

PredictionSet predict_serial(const PredictionRequest& req, const ModelParams& params) {
  return predict_impl(req, params, false);
}

PedestrianState fit_constant_velocity(std::span<const PedestrianObservation> observations, double dt) {
  const std::size_t n = observations.size();
  if (n < 2) throw DataError("constant-velocity fit needs at least two observations");
  double t_mean = 0.0;
  Vec2 x_mean = Vec2::Zero();
  for (std::size_t j = 0; j < n; ++j) {
    t_mean += static_cast<double>(j) * dt;
    x_mean += observations[j].pos_hat;
  }
  t_mean /= static_cast<double>(n);
  x_mean /= static_cast<double>(n);
  double stt = 0.0;
  Vec2 stx = Vec2::Zero();
  for (std::size_t j = 0; j < n; ++j) {
    const double dtj = static_cast<double>(j) * dt - t_mean;
    stt += dtj * dtj;
    stx += dtj * (observations[j].pos_hat - x_mean);
  }
  PedestrianState s;
  s.des_vel = stx / stt;
  s.pos = x_mean + (static_cast<double>(n - 1) * dt - t_mean) * s.des_vel;
  return s;
}

PredictionSet predict_cv(const PredictionRequest& req, double dt) {
  if (req.horizon < 1) throw ContractViolation("horizon must be at least one step");
  const PedestrianState s = fit_constant_velocity(req.observations, dt);
  PredictionSample sample;
  sample.weight = 1.0;
  sample.positions.resize(static_cast<std::size_t>(req.horizon));
  sample.decisions.resize(static_cast<std::size_t>(req.horizon));
  for (int k = 1; k <= req.horizon; ++k) {
    sample.positions[static_cast<std::size_t>(k - 1)] = s.pos + static_cast<double>(k) * dt * s.des_vel;
  }
  PredictionSet set;
  set.samples.push_back(std::move(sample));
  set.mean_track = weighted_mean_track(set.samples);
  set.ess = 1.0;
  return set;
}

std::vector<Vec2> weighted_mean_track(const std::vector<PredictionSample>& samples) {
  if (samples.empty()) return {};
  std::vector<Vec2> mean(samples.front().positions.size(), Vec2::Zero());
  for (const auto& s : samples) {
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += s.weight * s.positions[k];
  }
  return mean;
}

}  // namespace osp
