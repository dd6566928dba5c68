#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

#include "osp/scene.hpp"

namespace osp {

/// Per-axis linear-Gaussian pedestrian model:
///   x_t = x_{t-1} + v_{t-1} dt (+ cut noise),  v_t = v_{t-1} + w_t,  xhat_t = x_t + e_t
/// with w ~ N(0, sigma_v^2), e ~ N(0, sigma_x^2). Both axes share the same
/// covariance, so state means are stored as a 2x2 matrix whose column a holds
/// (position, velocity) along axis a.
using AxisMean = Eigen::Matrix2d;
using AxisCov = Eigen::Matrix2d;

/// Position variance (m^2) injected on transitions that enter an interaction
/// step. It decouples the latent position chain across steps whose motion the
/// interaction-free model cannot explain, while the velocity walk continues.
inline constexpr double kCutVariance = 1e4;

struct LinearGaussianModel {
  double sigma_v = 0.1;
  double sigma_x = 0.05;
  double dt = 0.1;
  double cut_variance = kCutVariance;
};

/// Which steps feed a position observation to the filter, and which
/// transitions cut the position chain.
struct ObservationPlan {
  std::vector<char> observed;
  std::vector<char> cut_before;

  std::size_t size() const { return observed.size(); }
  /// Every step observed, nothing cut.
  static ObservationPlan all(std::size_t n);
  /// Steps in the interaction-free set Q are observed. Entering a step outside
  /// Q cuts the chain; the last step before a return to Q is observed to
  /// re-anchor the position.
  static ObservationPlan from_free_steps(const std::vector<bool>& in_q);
};

struct StatePrior {
  AxisMean mean = AxisMean::Zero();
  AxisCov cov = AxisCov::Identity();
};

/// Position at the first observation (std sigma_x); velocity from the first
/// 0.5 s finite difference (std 1 m/s).
StatePrior default_prior(std::span<const PedestrianObservation> obs, double sigma_x, double dt);

struct FilterResult {
  std::vector<AxisMean> pred_mean;
  std::vector<AxisCov> pred_cov;
  std::vector<AxisMean> mean;
  std::vector<AxisCov> cov;
  double nll = 0.0;  // -log p(observations), both axes
};

FilterResult kalman_filter(std::span<const PedestrianObservation> obs, const ObservationPlan& plan,
                           const StatePrior& prior, const LinearGaussianModel& model);

struct SmootherResult {
  std::vector<AxisMean> mean;
  std::vector<AxisCov> cov;
  /// lag_cov[t] = Cov(s_t, s_{t-1} | all data) for t >= 1; lag_cov[0] unused.
  std::vector<AxisCov> lag_cov;
};

SmootherResult rts_smoother(const FilterResult& filtered, const LinearGaussianModel& model);

struct SmoothedTrack {
  std::vector<PedestrianState> states;
  std::vector<AxisCov> axis_cov;
  double sigma_v_hat = 0.0;
  bool prior_only = false;  // Q was empty; states are prior propagation
};

/// Throws DataError for tracks shorter than 4 steps. `in_q` is indexed by
/// position in the track.
SmoothedTrack smooth(const PedestrianTrack& track, const std::vector<bool>& in_q, double sigma_v,
                     double sigma_x, double dt);

struct EmOptions {
  double initial_sigma_v = 0.1;
  double rel_tol = 1e-4;  // on sigma_v^2
  int max_iters = 100;
  double min_sigma_v = 1e-6;
};

struct SigmaVEstimate {
  double sigma_v = 0.0;
  int iterations = 0;
  bool converged = false;      // false: iteration cap hit, last iterate returned
  std::vector<double> nll_trace;  // pooled NLL at each iterate, starting value first
};

/// Maximum-likelihood sigma_v pooled over tracks by EM on the smoother. Each
/// EM step is followed by a step-lengthening search along the EM direction
/// in log sigma_v^2 that is accepted only if the NLL drops.
SigmaVEstimate estimate_sigma_v(std::span<const PedestrianTrack> tracks,
                                std::span<const std::vector<bool>> in_q, double sigma_x, double dt,
                                const EmOptions& options = {});

/// Pooled negative log likelihood of the interaction-free model.
double pooled_nll(std::span<const PedestrianTrack> tracks, std::span<const std::vector<bool>> in_q,
                  double sigma_v, double sigma_x, double dt);

}  // namespace osp
