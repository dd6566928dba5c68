#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "osp/interaction.hpp"
#include "osp/scene.hpp"
#include "osp/smoothing.hpp"

namespace osp {

inline constexpr std::uint64_t kDefaultSeed = 20200531;

struct TrainingConfig {
  double alpha_u = 1.0 / 400.0;
  double alpha_beta = 1.0 / 100.0;
  int max_iters = 50;
  double tol = 1e-6;  // relative to the loss magnitude
  double vel_window = 2.0;  // s, centered moving average for candidate gating
  std::uint64_t seed = kDefaultSeed;
  int restarts = 5;

  void validate() const;
};

/// One timestep with exactly one candidate vehicle: a term of the
/// interaction part of the pseudo-likelihood.
struct InteractionRecord {
  std::size_t track = 0;  // index into Scene::pedestrians
  std::size_t step = 0;   // position within that track
  PedestrianState ped;    // observed position, estimated desired velocity
  VehicleState vehicle;
  double lat = 0.0;
  RiskFeatures feats;
  Vec2 displacement = Vec2::Zero();  // xhat_{t+1} - x_t
  Yield q = Yield::kContinue;
};

struct TrainingSet {
  std::vector<InteractionRecord> records;
  /// Per pedestrian (scene order): membership of each step in Q. Empty for
  /// pedestrians that are not used.
  std::vector<std::vector<bool>> in_q;
  std::vector<char> included;
  std::vector<int> excluded;  // ids of pedestrians with an ambiguous candidate set
  std::size_t too_short = 0;  // pedestrians with fewer than 4 observations
};

/// Centered moving average of one-step finite differences, truncated at the
/// track ends.
std::vector<Vec2> moving_average_velocity(std::span<const PedestrianObservation> obs, double dt,
                                          double window);

/// Gates candidates with observed positions and moving-average velocities,
/// drops every pedestrian that ever has two or more candidates, and splits
/// the rest into Q and interaction records. Throws TrainingInfeasible when no
/// record remains.
TrainingSet build_training_set(const Scene& scene, const ModelParams& params, const TrainingConfig& cfg);

/// Replaces the record velocities by smoothed desired velocities and
/// recomputes the risk features. Records that become degenerate are dropped.
void attach_smoothed_velocities(TrainingSet& set, std::span<const SmoothedTrack> smoothed,
                                const ModelParams& params);

/// Box-constrained least squares for the influence weights over yielding
/// records. Returns zeros (and sets `*no_data`) when no record yields.
GridFunction1D fit_u(std::span<const InteractionRecord> records, const ModelParams& params, double alpha_u,
                     bool* no_data = nullptr);

/// Penalized logistic regression of the yield indicator on the risk grid basis.
GridFunction2D fit_beta(std::span<const InteractionRecord> records, const ModelParams& params,
                        double alpha_beta);

/// Loss of one record under a given yield choice: displacement residual plus
/// the negative log probability of the choice.
double record_loss(const InteractionRecord& rec, Yield q, const ModelParams& params);

/// Per-record minimizer of record_loss; ties go to kContinue.
std::vector<Yield> update_q(std::span<const InteractionRecord> records, const ModelParams& params);
std::vector<Yield> update_q_serial(std::span<const InteractionRecord> records, const ModelParams& params);

/// Full pseudo-likelihood loss including both penalties.
double total_loss(std::span<const InteractionRecord> records, const ModelParams& params,
                  const TrainingConfig& cfg);

struct FitReport {
  double final_loss = 0.0;
  std::vector<double> loss_trace;   // after each full iteration
  std::vector<double> block_trace;  // after every block update, in order
  int iterations = 0;
  bool converged = false;
  int best_restart = 0;
  std::size_t excluded_pedestrians = 0;
  std::size_t short_pedestrians = 0;
  std::size_t records = 0;
  double yield_fraction = 0.0;
  double sigma_v = 0.0;
  int sigma_v_iterations = 0;
  bool sigma_v_converged = false;
  std::vector<std::string> warnings;
};

struct FitResult {
  ModelParams params;
  FitReport report;
  std::vector<InteractionRecord> records;  // with final q assignments
};

/// Block coordinate descent over (u, beta) and the yield assignments from a
/// fixed starting assignment.
FitResult run_bcd(std::vector<InteractionRecord> records, const ModelParams& base, const TrainingConfig& cfg,
                  std::uint64_t restart_index);

/// Whole training pipeline: training set, sigma_v by EM, smoothing, then
/// block coordinate descent with restarts (lowest final loss kept).
FitResult fit(const Scene& scene, const TrainingConfig& cfg, const ModelParams& base = {});

}  // namespace osp
