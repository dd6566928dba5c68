#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "osp/eval.hpp"
#include "osp/interaction.hpp"
#include "osp/scene.hpp"
#include "osp/training.hpp"

namespace osp {

enum class AgentClass : std::uint8_t { kPedestrian, kVehicle, kOther };

struct RawRow {
  int track_id = 0;
  AgentClass cls = AgentClass::kOther;
  long frame = 0;
  Vec2 pos = Vec2::Zero();
  std::optional<Vec2> vel;
  std::size_t line = 0;  // 1-based line in the source file
};

struct RawTrackTable {
  double rate_hz = 10.0;
  std::vector<RawRow> rows;
  std::size_t input_rows = 0;  // data rows read, excluding the header
  std::size_t dropped = 0;     // rows with an unknown class

  std::size_t count(AgentClass cls) const;
};

/// Column layouts. `generic` is `track_id,class,frame,x_m,y_m[,vx_mps,vy_mps]`
/// with classes pedestrian, vehicle and other. `ind` reads tracks.csv and
/// joins classes from the tracksMeta.csv next to it. `dut` reads
/// id/frame/label/x/y(/vx/vy) columns, accepting the `_est` suffixed names.
enum class Schema : std::uint8_t { kGeneric, kInd, kDut };

Schema parse_schema(const std::string& name);

struct LoadOptions {
  Schema schema = Schema::kGeneric;
  /// Native frame rate; 0 uses the schema default (generic 10 Hz, ind the
  /// recording metadata or 25 Hz, dut 23.98 Hz).
  double rate_hz = 0.0;
};

/// Throws DataError for unreadable files, missing columns, malformed rows
/// (with line number) and duplicated (track_id, frame) pairs.
RawTrackTable load_tracks(const std::string& path, const LoadOptions& options = {});
RawTrackTable parse_tracks(std::istream& in, const LoadOptions& options = {});

/// Linear interpolation onto a uniform grid at `target_hz`. Tracks are split
/// into segments at frame gaps. Vehicle velocities are interpolated when the
/// table has them and taken by central differences otherwise. Throws
/// DataError when the native rate is below the target.
Scene resample(const RawTrackTable& table, double target_hz = 10.0);

Scene load_scene(const std::string& path, const LoadOptions& options = {});

/// Generic-schema CSV at the scene's rate, vehicles with velocities.
void write_tracks(std::ostream& out, const Scene& scene);
void save_tracks(const std::string& path, const Scene& scene);

// ---------------------------------------------------------------------------
// Synthetic scenes drawn from the generative model.

enum class ScenarioKind : std::uint8_t { kCrossing, kFree };

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::kCrossing;
  int steps = 120;          // transitions per pedestrian
  int frame_gap = 200;      // timestep offset between consecutive scenarios
  int vehicle_tail = 50;    // extra recorded vehicle steps after the pedestrian ends
  int n_vehicles = 1;
  double lateral_lo = 8.0;  // m, initial distance from the road
  double lateral_hi = 11.0;
  double ped_speed_lo = 1.0;  // m/s
  double ped_speed_hi = 1.6;
  double veh_speed_lo = 3.0;
  double veh_speed_hi = 7.0;
  double arrival_lo = 2.0;  // s, vehicle arrival at the crossing point
  double arrival_hi = 10.0;
  double veh_accel_lo = 0.0;  // m/s^2, constant along-track acceleration
  double veh_accel_hi = 0.0;
};

struct LatentStep {
  int ped_id = 0;
  int t = 0;
  PedestrianState state;  // true state at t
  LatentDecision decision;
  std::optional<int> attended_id;  // vehicle track id
  std::optional<RiskFeatures> features;  // against the attended vehicle
};

struct SyntheticData {
  Scene scene;
  std::vector<LatentStep> latent;
};

/// Ground truth used by `synthesize` when no model is given: yielding
/// pedestrians slow sharply within a few metres of the road, and the yield
/// logit falls with both time to and distance at closest approach.
ModelParams synthetic_truth();

/// `n` independent scenarios, each in its own time slot. Scenario i uses
/// random stream (seed, i), so outputs are reproducible bit for bit.
SyntheticData synthesize(const ScenarioSpec& spec, const ModelParams& truth, int n, std::uint64_t seed);

void write_latent(std::ostream& out, const SyntheticData& data);

// ---------------------------------------------------------------------------
// Model files.

inline constexpr int kModelFormatVersion = 1;

struct ModelProvenance {
  std::string dataset;
  std::uint64_t seed = 0;
  std::string report_digest;

  friend bool operator==(const ModelProvenance&, const ModelProvenance&) = default;
};

struct ModelFile {
  ModelParams params;
  ModelProvenance provenance;

  friend bool operator==(const ModelFile&, const ModelFile&) = default;
};

std::string model_to_json(const ModelFile& model);
/// Throws DataError on malformed content and VersionError on a missing or
/// unsupported format_version.
ModelFile model_from_json(const std::string& text);
void save_model(const ModelFile& model, const std::string& path);
ModelFile load_model(const std::string& path);

std::string fit_report_json(const FitReport& report);
/// 64-bit FNV-1a of the report JSON, as 16 hex digits.
std::string report_digest(const FitReport& report);

/// Columns t_seconds,ade_m,rmse_m,n.
void write_metric_csv(std::ostream& out, const MetricTable& table);
std::string metric_json(const MetricTable& table);

std::string read_file(const std::string& path);
/// Writes through a temporary file and renames it into place.
void write_file(const std::string& path, const std::string& content);

}  // namespace osp
