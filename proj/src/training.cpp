#include "osp/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "osp/errors.hpp"
#include "osp/random.hpp"
#include "osp/solvers.hpp"

namespace osp {

namespace {

double residual_weight(const ModelParams& params) {
  const double dt = params.scene.dt;
  return dt * dt / (2.0 * params.sigma_x * params.sigma_x);
}

double penalty(const ModelParams& params, const TrainingConfig& cfg) {
  double u2 = 0.0;
  for (double w : params.influence.weights()) u2 += w * w;
  double b2 = params.risk_fn.bias() * params.risk_fn.bias();
  for (double w : params.risk_fn.weights()) b2 += w * w;
  return cfg.alpha_u * u2 + cfg.alpha_beta * b2;
}

double log10_feature(double x) { return std::log10(std::max(x, kMinFeatureValue)); }

}  // namespace

void TrainingConfig::validate() const {
  if (!(alpha_u > 0.0) || !(alpha_beta > 0.0)) throw ContractViolation("prior strengths must be positive");
  if (!(tol > 0.0)) throw ContractViolation("tolerance must be positive");
  if (max_iters < 1 || restarts < 1) throw ContractViolation("max_iters and restarts must be >= 1");
  if (!(vel_window > 0.0)) throw ContractViolation("velocity window must be positive");
}

std::vector<Vec2> moving_average_velocity(std::span<const PedestrianObservation> obs, double dt,
                                          double window) {
  const std::size_t n = obs.size();
  if (n < 2) throw DataError("velocity estimate needs at least two observations");
  std::vector<Vec2> diff(n - 1);
  for (std::size_t s = 0; s + 1 < n; ++s) diff[s] = (obs[s + 1].pos_hat - obs[s].pos_hat) / dt;

  // prefix sums make each window O(1)
  std::vector<Vec2> prefix(n, Vec2::Zero());
  for (std::size_t s = 0; s + 1 < n; ++s) prefix[s + 1] = prefix[s] + diff[s];

  const long half = std::max<long>(std::lround(window / (2.0 * dt)), 1);
  std::vector<Vec2> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const long lo = std::max<long>(static_cast<long>(k) - half, 0);
    const long hi = std::min<long>(static_cast<long>(k) + half - 1, static_cast<long>(n) - 2);
    out[k] = (prefix[static_cast<std::size_t>(hi + 1)] - prefix[static_cast<std::size_t>(lo)]) /
             static_cast<double>(hi - lo + 1);
  }
  return out;
}

TrainingSet build_training_set(const Scene& scene, const ModelParams& params, const TrainingConfig& cfg) {
  params.scene.validate();
  const VehicleTimeline timeline(scene.vehicles);
  const std::size_t n_ped = scene.pedestrians.size();

  TrainingSet set;
  set.in_q.resize(n_ped);
  set.included.assign(n_ped, 0);
  std::vector<std::vector<InteractionRecord>> per_track(n_ped);
  std::vector<char> ambiguous(n_ped, 0);

#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t i = 0; i < n_ped; ++i) {
    const auto& track = scene.pedestrians[i];
    if (track.size() < 4) continue;
    const auto vel = moving_average_velocity(track.obs, params.scene.dt, cfg.vel_window);
    std::vector<bool> in_q(track.size(), false);
    std::vector<InteractionRecord> recs;
    for (std::size_t k = 0; k < track.size(); ++k) {
      const int t = track.obs[k].t;
      const PedestrianState ped{track.obs[k].pos_hat, vel[k]};
      const auto vehicles = timeline.states_at(t);
      const auto cands = candidate_set(ped, vehicles, params.scene);
      if (cands.size() > 1) {
        ambiguous[i] = 1;
        break;
      }
      if (cands.empty()) {
        in_q[k] = true;
        continue;
      }
      if (k + 1 >= track.size()) continue;
      InteractionRecord rec;
      rec.track = i;
      rec.step = k;
      rec.ped = ped;
      rec.vehicle = vehicles[cands.front()];
      rec.lat = to_vehicle_frame(ped, rec.vehicle, params.scene.stationary_speed).lat;
      rec.displacement = track.obs[k + 1].pos_hat - track.obs[k].pos_hat;
      if (!ped.plausible() || (rec.vehicle.vel - ped.des_vel).squaredNorm() <= 1e-12) continue;
      rec.feats = risk_features(ped, rec.vehicle);
      recs.push_back(rec);
    }
    if (ambiguous[i]) continue;
    set.in_q[i] = std::move(in_q);
    per_track[i] = std::move(recs);
  }

  for (std::size_t i = 0; i < n_ped; ++i) {
    if (scene.pedestrians[i].size() < 4) {
      ++set.too_short;
    } else if (ambiguous[i]) {
      set.excluded.push_back(scene.pedestrians[i].id);
    } else {
      set.included[i] = 1;
      set.records.insert(set.records.end(), per_track[i].begin(), per_track[i].end());
    }
  }
  if (set.records.empty()) throw TrainingInfeasible("no usable single-vehicle interaction steps");
  return set;
}

void attach_smoothed_velocities(TrainingSet& set, std::span<const SmoothedTrack> smoothed,
                                const ModelParams& params) {
  std::vector<InteractionRecord> kept;
  kept.reserve(set.records.size());
  for (auto rec : set.records) {
    const auto& states = smoothed[rec.track].states;
    if (rec.step >= states.size()) throw ContractViolation("smoothed track shorter than its records");
    rec.ped.des_vel = states[rec.step].des_vel;
    if (!rec.ped.plausible() || (rec.vehicle.vel - rec.ped.des_vel).squaredNorm() <= 1e-12) continue;
    rec.feats = risk_features(rec.ped, rec.vehicle);
    rec.lat = to_vehicle_frame(rec.ped, rec.vehicle, params.scene.stationary_speed).lat;
    kept.push_back(rec);
  }
  set.records = std::move(kept);
}

GridFunction1D fit_u(std::span<const InteractionRecord> records, const ModelParams& params, double alpha_u,
                     bool* no_data) {
  const auto& grid = params.influence;
  const auto n = static_cast<Eigen::Index>(grid.size());
  const double c = residual_weight(params);
  const double dt = params.scene.dt;

  Eigen::MatrixXd hess = 2.0 * alpha_u * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd lin = Eigen::VectorXd::Zero(n);
  std::size_t used = 0;
  for (const auto& rec : records) {
    if (rec.q != Yield::kYield) continue;
    ++used;
    const Basis1D b = grid.basis(rec.lat);
    const double vv = rec.ped.des_vel.squaredNorm();
    const double vd = rec.ped.des_vel.dot(rec.displacement) / dt;
    for (int a = 0; a < 2; ++a) {
      const auto ia = static_cast<Eigen::Index>(b.node[a]);
      lin[ia] += 2.0 * c * vd * b.coef[a];
      for (int k = 0; k < 2; ++k) {
        hess(ia, static_cast<Eigen::Index>(b.node[k])) += 2.0 * c * vv * b.coef[a] * b.coef[k];
      }
    }
  }
  if (no_data) *no_data = used == 0;
  if (used == 0) return GridFunction1D::zeros(grid.size(), grid.u_max());

  const Eigen::VectorXd start = Eigen::Map<const Eigen::VectorXd>(grid.weights().data(), n);
  const BoxQpResult qp = solve_box_qp(hess, lin, -1.0, 1.0, start);
  if (!qp.converged) throw NumericalError("influence subproblem did not converge");
  return GridFunction1D(std::vector<double>(qp.x.data(), qp.x.data() + n), grid.u_max());
}

GridFunction2D fit_beta(std::span<const InteractionRecord> records, const ModelParams& params,
                        double alpha_beta) {
  const auto& grid = params.risk_fn;
  const std::size_t n_w = grid.weights().size();
  LogisticProblem problem;
  problem.dim = n_w + 1;
  problem.alpha = alpha_beta;
  problem.rows.reserve(records.size());
  problem.labels.reserve(records.size());
  for (const auto& rec : records) {
    const Basis2D b = grid.basis(log10_feature(rec.feats.tau), log10_feature(rec.feats.dmin));
    SparseRow row;
    row.nnz = 5;
    for (std::size_t k = 0; k < 4; ++k) {
      row.idx[k] = b.node[k];
      row.val[k] = b.coef[k];
    }
    row.idx[4] = n_w;
    row.val[4] = 1.0;
    problem.rows.push_back(row);
    problem.labels.push_back(rec.q == Yield::kYield ? 1.0 : 0.0);
  }
  Eigen::VectorXd start(static_cast<Eigen::Index>(n_w + 1));
  for (std::size_t k = 0; k < n_w; ++k) start[static_cast<Eigen::Index>(k)] = grid.weights()[k];
  start[static_cast<Eigen::Index>(n_w)] = grid.bias();

  const LogisticResult res = solve_logistic(problem, start);
  if (!res.beta.allFinite()) throw NumericalError("risk subproblem diverged");
  std::vector<double> w(res.beta.data(), res.beta.data() + n_w);
  return GridFunction2D(std::move(w), res.beta[static_cast<Eigen::Index>(n_w)], grid.lo(), grid.hi(), grid.n_b());
}

double record_loss(const InteractionRecord& rec, Yield q, const ModelParams& params) {
  const double fraction = q == Yield::kContinue ? 1.0 : params.influence(rec.lat);
  const Vec2 resid = fraction * rec.ped.des_vel - rec.displacement / params.scene.dt;
  const double r = risk(params, rec.feats);
  // -log p(q=0) = softplus(-risk), -log p(q=1) = softplus(risk)
  const double choice = q == Yield::kYield ? softplus(-r) : softplus(r);
  return residual_weight(params) * resid.squaredNorm() + choice;
}

std::vector<Yield> update_q_serial(std::span<const InteractionRecord> records, const ModelParams& params) {
  std::vector<Yield> q(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    q[i] = record_loss(records[i], Yield::kYield, params) < record_loss(records[i], Yield::kContinue, params)
               ? Yield::kYield
               : Yield::kContinue;
  }
  return q;
}

std::vector<Yield> update_q(std::span<const InteractionRecord> records, const ModelParams& params) {
  std::vector<Yield> q(records.size());
  const auto n = static_cast<long>(records.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    const auto& rec = records[static_cast<std::size_t>(i)];
    q[static_cast<std::size_t>(i)] =
        record_loss(rec, Yield::kYield, params) < record_loss(rec, Yield::kContinue, params) ? Yield::kYield
                                                                                              : Yield::kContinue;
  }
  return q;
}

double total_loss(std::span<const InteractionRecord> records, const ModelParams& params,
                  const TrainingConfig& cfg) {
  // Serial in record order so the value does not depend on thread count.
  double s = 0.0;
  for (const auto& rec : records) s += record_loss(rec, rec.q, params);
  return s + penalty(params, cfg);
}

FitResult run_bcd(std::vector<InteractionRecord> records, const ModelParams& base, const TrainingConfig& cfg,
                  std::uint64_t restart_index) {
  Rng rng = stream(cfg.seed, restart_index);
  std::bernoulli_distribution coin(0.5);
  for (auto& rec : records) rec.q = coin(rng) ? Yield::kYield : Yield::kContinue;

  FitResult out;
  out.params = base;
  out.params.influence = GridFunction1D::zeros(base.influence.size(), base.influence.u_max());
  out.params.risk_fn = GridFunction2D::zeros(base.risk_fn.n_b(), base.risk_fn.lo(), base.risk_fn.hi());
  FitReport& rep = out.report;

  double prev = total_loss(records, out.params, cfg);
  rep.block_trace.push_back(prev);
  bool no_yield = false;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    rep.iterations = it;
    out.params.influence = fit_u(records, out.params, cfg.alpha_u, &no_yield);
    rep.block_trace.push_back(total_loss(records, out.params, cfg));
    out.params.risk_fn = fit_beta(records, out.params, cfg.alpha_beta);
    rep.block_trace.push_back(total_loss(records, out.params, cfg));

    const auto q = update_q(records, out.params);
    bool changed = false;
    for (std::size_t i = 0; i < records.size(); ++i) {
      changed |= records[i].q != q[i];
      records[i].q = q[i];
    }
    const double loss = total_loss(records, out.params, cfg);
    rep.block_trace.push_back(loss);
    rep.loss_trace.push_back(loss);
    const double improvement = prev - loss;
    prev = loss;
    if (!changed || improvement < cfg.tol * std::max(1.0, std::abs(prev))) {
      rep.converged = true;
      break;
    }
  }
  if (no_yield) rep.warnings.push_back("no yielding records; influence left at prior mean");
  rep.final_loss = prev;
  rep.records = records.size();
  std::size_t yields = 0;
  for (const auto& rec : records) yields += rec.q == Yield::kYield;
  rep.yield_fraction = records.empty() ? 0.0 : static_cast<double>(yields) / static_cast<double>(records.size());
  rep.best_restart = static_cast<int>(restart_index);
  out.records = std::move(records);
  return out;
}

FitResult fit(const Scene& scene, const TrainingConfig& cfg, const ModelParams& base) {
  cfg.validate();
  if (scene.pedestrians.empty()) throw TrainingInfeasible("dataset has no pedestrian tracks");
  ModelParams params = base;
  params.scene.dt = scene.dt;

  TrainingSet set = build_training_set(scene, params, cfg);

  std::vector<PedestrianTrack> used;
  std::vector<std::vector<bool>> used_q;
  for (std::size_t i = 0; i < scene.pedestrians.size(); ++i) {
    if (!set.included[i]) continue;
    used.push_back(scene.pedestrians[i]);
    used_q.push_back(set.in_q[i]);
  }
  const SigmaVEstimate sv = estimate_sigma_v(used, used_q, params.sigma_x, params.scene.dt);
  params.sigma_v = sv.sigma_v;

  std::vector<SmoothedTrack> smoothed(scene.pedestrians.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t i = 0; i < scene.pedestrians.size(); ++i) {
    if (!set.included[i]) continue;
    smoothed[i] = smooth(scene.pedestrians[i], set.in_q[i], params.sigma_v, params.sigma_x, params.scene.dt);
  }
  attach_smoothed_velocities(set, smoothed, params);
  if (set.records.empty()) throw TrainingInfeasible("no interaction steps left after smoothing");

  FitResult best;
  double best_loss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.restarts; ++r) {
    FitResult cand = run_bcd(set.records, params, cfg, static_cast<std::uint64_t>(r));
    if (cand.report.final_loss < best_loss) {
      best_loss = cand.report.final_loss;
      best = std::move(cand);
    }
  }
  FitReport& rep = best.report;
  rep.excluded_pedestrians = set.excluded.size();
  rep.short_pedestrians = set.too_short;
  rep.sigma_v = sv.sigma_v;
  rep.sigma_v_iterations = sv.iterations;
  rep.sigma_v_converged = sv.converged;
  if (!sv.converged) rep.warnings.push_back("sigma_v EM hit the iteration cap");
  return best;
}

}  // namespace osp
