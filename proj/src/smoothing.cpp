#include "osp/smoothing.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "osp/errors.hpp"

namespace osp {

namespace {

Eigen::Matrix2d transition(double dt) {
  Eigen::Matrix2d f;
  f << 1.0, dt, 0.0, 1.0;
  return f;
}

AxisCov symmetrized(const AxisCov& p) { return 0.5 * (p + p.transpose()); }

struct PreparedTrack {
  std::span<const PedestrianObservation> obs;
  ObservationPlan plan;
  StatePrior prior;
};

// E-step statistic: expected sum of squared velocity innovations over both axes.
double expected_innovation_sq(const SmootherResult& s) {
  double total = 0.0;
  for (std::size_t t = 1; t < s.mean.size(); ++t) {
    const double var = s.cov[t](1, 1) + s.cov[t - 1](1, 1) - 2.0 * s.lag_cov[t](1, 1);
    for (int a = 0; a < 2; ++a) {
      const double d = s.mean[t](1, a) - s.mean[t - 1](1, a);
      total += d * d + var;
    }
  }
  return total;
}

std::vector<PreparedTrack> prepare(std::span<const PedestrianTrack> tracks,
                                   std::span<const std::vector<bool>> in_q, double sigma_x, double dt) {
  if (tracks.size() != in_q.size()) throw ContractViolation("one free-step mask per track expected");
  std::vector<PreparedTrack> out;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const auto& tr = tracks[i];
    if (tr.size() < 4) continue;
    if (in_q[i].size() != tr.size()) throw ContractViolation("free-step mask length mismatch");
    PreparedTrack p{tr.obs, ObservationPlan::from_free_steps(in_q[i]), default_prior(tr.obs, sigma_x, dt)};
    if (std::none_of(p.plan.observed.begin(), p.plan.observed.end(), [](char c) { return c != 0; })) {
      continue;  // no information about sigma_v
    }
    out.push_back(std::move(p));
  }
  return out;
}

double pooled_nll_prepared(const std::vector<PreparedTrack>& prepared, const LinearGaussianModel& model) {
  std::vector<double> part(prepared.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    part[i] = kalman_filter(prepared[i].obs, prepared[i].plan, prepared[i].prior, model).nll;
  }
  double total = 0.0;
  for (double v : part) total += v;
  return total;
}

double em_update(const std::vector<PreparedTrack>& prepared, const LinearGaussianModel& model) {
  std::vector<double> part(prepared.size());
  double count = 0.0;
  for (const auto& p : prepared) count += 2.0 * static_cast<double>(p.obs.size() - 1);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    const auto f = kalman_filter(prepared[i].obs, prepared[i].plan, prepared[i].prior, model);
    part[i] = expected_innovation_sq(rts_smoother(f, model));
  }
  double total = 0.0;
  for (double v : part) total += v;
  return total / count;
}

}  // namespace

ObservationPlan ObservationPlan::all(std::size_t n) {
  ObservationPlan p;
  p.observed.assign(n, 1);
  p.cut_before.assign(n, 0);
  return p;
}

ObservationPlan ObservationPlan::from_free_steps(const std::vector<bool>& in_q) {
  const std::size_t n = in_q.size();
  ObservationPlan p;
  p.observed.assign(n, 0);
  p.cut_before.assign(n, 0);
  for (std::size_t t = 0; t < n; ++t) {
    p.observed[t] = in_q[t] || (t + 1 < n && in_q[t + 1]);
    p.cut_before[t] = t > 0 && !in_q[t];
  }
  return p;
}

StatePrior default_prior(std::span<const PedestrianObservation> obs, double sigma_x, double dt) {
  if (obs.size() < 2) throw DataError("prior needs at least two observations");
  const auto lag = std::min<std::size_t>(std::max<long>(std::lround(0.5 / dt), 1), obs.size() - 1);
  const Vec2 vel = (obs[lag].pos_hat - obs[0].pos_hat) / (static_cast<double>(lag) * dt);
  StatePrior prior;
  prior.mean.row(0) = obs[0].pos_hat.transpose();
  prior.mean.row(1) = vel.transpose();
  prior.cov << sigma_x * sigma_x, 0.0, 0.0, 1.0;
  return prior;
}

FilterResult kalman_filter(std::span<const PedestrianObservation> obs, const ObservationPlan& plan,
                           const StatePrior& prior, const LinearGaussianModel& model) {
  const std::size_t n = obs.size();
  if (plan.size() != n) throw ContractViolation("observation plan length mismatch");
  const Eigen::Matrix2d f = transition(model.dt);
  const double r = model.sigma_x * model.sigma_x;
  const double q_vel = model.sigma_v * model.sigma_v;

  FilterResult out;
  out.pred_mean.resize(n);
  out.pred_cov.resize(n);
  out.mean.resize(n);
  out.cov.resize(n);

  AxisMean m = prior.mean;
  AxisCov p = prior.cov;
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) {
      m = f * out.mean[t - 1];
      p = f * out.cov[t - 1] * f.transpose();
      p(1, 1) += q_vel;
      if (plan.cut_before[t]) p(0, 0) += model.cut_variance;
    }
    out.pred_mean[t] = m;
    out.pred_cov[t] = p;
    if (plan.observed[t]) {
      const double s = p(0, 0) + r;
      const Eigen::Vector2d gain = p.col(0) / s;
      const Eigen::RowVector2d innov = obs[t].pos_hat.transpose() - m.row(0);
      // Two independent axes with the same innovation variance.
      out.nll += std::log(2.0 * std::numbers::pi * s) + innov.squaredNorm() / (2.0 * s);
      m += gain * innov;
      Eigen::Matrix2d a = Eigen::Matrix2d::Identity();
      a(0, 0) -= gain(0);
      a(1, 0) -= gain(1);
      p = a * p * a.transpose() + r * gain * gain.transpose();
    }
    out.mean[t] = m;
    out.cov[t] = symmetrized(p);
  }
  return out;
}

SmootherResult rts_smoother(const FilterResult& filtered, const LinearGaussianModel& model) {
  const std::size_t n = filtered.mean.size();
  const Eigen::Matrix2d f = transition(model.dt);
  SmootherResult s;
  s.mean.resize(n);
  s.cov.resize(n);
  s.lag_cov.assign(n, AxisCov::Zero());
  if (n == 0) return s;
  s.mean[n - 1] = filtered.mean[n - 1];
  s.cov[n - 1] = filtered.cov[n - 1];
  for (std::size_t k = n - 1; k-- > 0;) {
    const Eigen::Matrix2d gain = filtered.cov[k] * f.transpose() * filtered.pred_cov[k + 1].inverse();
    s.mean[k] = filtered.mean[k] + gain * (s.mean[k + 1] - filtered.pred_mean[k + 1]);
    s.cov[k] = symmetrized(filtered.cov[k] +
                           gain * (s.cov[k + 1] - filtered.pred_cov[k + 1]) * gain.transpose());
    s.lag_cov[k + 1] = s.cov[k + 1] * gain.transpose();
  }
  return s;
}

SmoothedTrack smooth(const PedestrianTrack& track, const std::vector<bool>& in_q, double sigma_v,
                     double sigma_x, double dt) {
  if (track.size() < 4) {
    throw DataError("track " + std::to_string(track.id) + " too short to smooth (" +
                    std::to_string(track.size()) + " steps)");
  }
  if (in_q.size() != track.size()) throw ContractViolation("free-step mask length mismatch");
  const LinearGaussianModel model{sigma_v, sigma_x, dt};
  const ObservationPlan plan = ObservationPlan::from_free_steps(in_q);
  const auto filtered = kalman_filter(track.obs, plan, default_prior(track.obs, sigma_x, dt), model);
  const auto s = rts_smoother(filtered, model);

  SmoothedTrack out;
  out.sigma_v_hat = sigma_v;
  out.prior_only = std::none_of(plan.observed.begin(), plan.observed.end(), [](char c) { return c != 0; });
  out.states.resize(track.size());
  for (std::size_t t = 0; t < track.size(); ++t) {
    out.states[t].pos = s.mean[t].row(0).transpose();
    out.states[t].des_vel = s.mean[t].row(1).transpose();
  }
  out.axis_cov = s.cov;
  return out;
}

double pooled_nll(std::span<const PedestrianTrack> tracks, std::span<const std::vector<bool>> in_q,
                  double sigma_v, double sigma_x, double dt) {
  return pooled_nll_prepared(prepare(tracks, in_q, sigma_x, dt), LinearGaussianModel{sigma_v, sigma_x, dt});
}

SigmaVEstimate estimate_sigma_v(std::span<const PedestrianTrack> tracks,
                                std::span<const std::vector<bool>> in_q, double sigma_x, double dt,
                                const EmOptions& options) {
  const auto prepared = prepare(tracks, in_q, sigma_x, dt);
  if (prepared.empty()) throw DataError("no interaction-free observations to estimate sigma_v from");

  const double floor2 = options.min_sigma_v * options.min_sigma_v;
  const auto nll_at = [&](double s2) {
    return pooled_nll_prepared(prepared, LinearGaussianModel{std::sqrt(s2), sigma_x, dt});
  };

  SigmaVEstimate est;
  double s2 = options.initial_sigma_v * options.initial_sigma_v;
  double nll = nll_at(s2);
  est.nll_trace.push_back(nll);
  for (int it = 1; it <= options.max_iters; ++it) {
    est.iterations = it;
    double best = std::max(em_update(prepared, LinearGaussianModel{std::sqrt(s2), sigma_x, dt}), floor2);
    double best_nll = nll_at(best);
    // EM is slow when the information about each innovation is weak; stretch
    // the step geometrically while the likelihood keeps improving.
    const double log_ratio = std::log(best / s2);
    if (std::abs(log_ratio) > 1e-12) {
      for (double stretch = 2.0; stretch <= 1 << 20; stretch *= 2.0) {
        const double cand = std::clamp(s2 * std::exp(stretch * log_ratio), floor2, 1e4);
        const double cand_nll = nll_at(cand);
        if (!(cand_nll < best_nll)) break;
        best = cand;
        best_nll = cand_nll;
        if (cand == floor2) break;
      }
    }
    const double rel = std::abs(best - s2) / s2;
    s2 = best;
    nll = best_nll;
    est.nll_trace.push_back(nll);
    if (rel < options.rel_tol || s2 <= floor2) {
      est.converged = true;
      break;
    }
  }
  est.sigma_v = std::sqrt(s2);
  return est;
}

}  // namespace osp
