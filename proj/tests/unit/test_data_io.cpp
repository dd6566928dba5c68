#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "osp/data_io.hpp"
#include "osp/errors.hpp"

using namespace osp;

namespace {

RawTrackTable parse(const std::string& text, Schema schema = Schema::kGeneric, double rate = 0.0) {
  std::istringstream in(text);
  return parse_tracks(in, {schema, rate});
}

std::string message_of(const std::string& text) {
  try {
    parse(text);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("osp_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE("data_io") {
  TEST_CASE("well-formed generic file") {
    const auto t = parse(
        "track_id,class,frame,x_m,y_m\n"
        "1,pedestrian,0,0.0,1.0\n"
        "1,pedestrian,1,0.1,1.0\n"
        "2,vehicle,0,-5.0,0.0\n");
    CHECK(t.rows.size() == 3);
    CHECK(t.count(AgentClass::kPedestrian) == 2);
    CHECK(t.count(AgentClass::kVehicle) == 1);
    CHECK(t.rate_hz == 10.0);
  }

  TEST_CASE("duplicates, malformed rows and missing columns") {
    const std::string dup = message_of(
        "track_id,class,frame,x_m,y_m\n"
        "4,pedestrian,7,0,0\n"
        "4,pedestrian,7,1,0\n");
    CHECK(dup.find("duplicate") != std::string::npos);
    CHECK(dup.find("track_id=4") != std::string::npos);
    CHECK(dup.find("frame=7") != std::string::npos);

    const std::string bad = message_of(
        "track_id,class,frame,x_m,y_m\n"
        "1,pedestrian,0,0,0\n"
        "1,pedestrian,1,abc,0\n");
    CHECK(bad.find("line 3") != std::string::npos);

    const std::string missing = message_of("track_id,class,frame,x_m\n1,pedestrian,0,0\n");
    CHECK(missing.find("schema error") != std::string::npos);
  }

  TEST_CASE("vehicle-only files and dropped classes") {
    const auto t = parse(
        "track_id,class,frame,x_m,y_m,vx_mps,vy_mps\n"
        "2,vehicle,0,0,0,1,0\n"
        "2,vehicle,1,0.1,0,1,0\n"
        "3,tram,0,5,5,,\n");
    CHECK(t.count(AgentClass::kPedestrian) == 0);
    CHECK(t.rows.size() + t.dropped == t.input_rows);
    CHECK(t.dropped == 1);
    const Scene s = resample(t, 10.0);
    CHECK(s.pedestrians.empty());
    CHECK(s.vehicles.size() == 1);
  }

  TEST_CASE("resampling a 25 Hz line to 10 Hz") {
    std::ostringstream text;
    text << "track_id,class,frame,x_m,y_m\n";
    for (int f = 0; f < 250; ++f) text << "1,pedestrian," << f << ',' << 1.0 + 1.3 * f / 25.0 << ',' << -0.4 * f / 25.0 << '\n';
    const Scene s = resample(parse(text.str(), Schema::kGeneric, 25.0), 10.0);
    REQUIRE(s.pedestrians.size() == 1);
    const auto& tr = s.pedestrians[0];
    CHECK(tr.size() == 100);
    for (const auto& o : tr.obs) {
      const double t = o.t * 0.1;
      CHECK(std::abs(o.pos_hat.x() - (1.0 + 1.3 * t)) < 1e-9);
      CHECK(std::abs(o.pos_hat.y() + 0.4 * t) < 1e-9);
    }
  }

  TEST_CASE("10 Hz input is unchanged, gaps split tracks, upsampling is refused") {
    const std::string text =
        "track_id,class,frame,x_m,y_m\n"
        "1,pedestrian,0,0.5,1\n1,pedestrian,1,0.6,1\n1,pedestrian,2,0.7,1.2\n"
        "1,pedestrian,6,1.0,1\n1,pedestrian,7,1.1,1\n";
    const Scene s = resample(parse(text), 10.0);
    REQUIRE(s.pedestrians.size() == 2);
    CHECK(s.pedestrians[0].obs[2].pos_hat == Vec2(0.7, 1.2));
    CHECK(s.pedestrians[0].obs[2].t == 2);
    CHECK(s.pedestrians[1].obs[0].t == 6);
    CHECK(s.pedestrians[1].segment != s.pedestrians[0].segment);
    CHECK_THROWS_AS(resample(parse(text, Schema::kGeneric, 5.0), 10.0), DataError);
  }

  TEST_CASE("vehicle velocities by central differences") {
    const Scene s = resample(parse(
        "track_id,class,frame,x_m,y_m\n"
        "2,vehicle,0,0,0\n2,vehicle,1,0.5,0\n2,vehicle,2,1.0,0\n2,vehicle,3,1.5,0.1\n"));
    REQUIRE(s.vehicles.size() == 1);
    CHECK(s.vehicles[0].states[1].vel.x() == doctest::Approx(5.0));
    CHECK(s.vehicles[0].states[0].vel.x() == doctest::Approx(5.0));
  }

  TEST_CASE("preset schemas") {
    const auto dir = scratch_dir("ind");
    write_file((dir / "00_tracksMeta.csv").string(), "trackId,class\n1,pedestrian\n2,car\n3,bicycle\n");
    write_file((dir / "00_recordingMeta.csv").string(), "id,frameRate\n0,25\n");
    std::string tracks = "trackId,frame,xCenter,yCenter,xVelocity,yVelocity\n";
    for (int f = 0; f < 5; ++f) {
      tracks += "1," + std::to_string(f) + ",0,0,0,0\n2," + std::to_string(f) + ",1,1,1,0\n3," + std::to_string(f) + ",2,2,0,0\n";
    }
    write_file((dir / "00_tracks.csv").string(), tracks);
    const auto t = load_tracks((dir / "00_tracks.csv").string(), {Schema::kInd, 0.0});
    CHECK(t.rate_hz == 25.0);
    CHECK(t.count(AgentClass::kPedestrian) == 5);
    CHECK(t.count(AgentClass::kVehicle) == 5);
    CHECK(t.count(AgentClass::kOther) == 5);

    const auto d = parse("id,frame,label,x_est,y_est\n1,0,ped,0,0\n2,0,veh,4,4\n", Schema::kDut);
    CHECK(d.count(AgentClass::kPedestrian) == 1);
    CHECK(d.count(AgentClass::kVehicle) == 1);
    CHECK(std::abs(d.rate_hz - 23.98) < 1e-12);
    CHECK(parse_schema("ind") == Schema::kInd);
    CHECK_THROWS_AS(parse_schema("xyz"), ContractViolation);
  }

  TEST_CASE("track files round-trip") {
    const auto data = synthesize(ScenarioSpec{}, synthetic_truth(), 3, 5);
    std::ostringstream a;
    write_tracks(a, data.scene);
    std::istringstream in(a.str());
    const Scene back = resample(parse_tracks(in), 10.0);
    std::ostringstream b;
    write_tracks(b, back);
    CHECK(a.str() == b.str());
  }

  TEST_CASE("model files round-trip exactly") {
    ModelFile m;
    m.params = synthetic_truth();
    m.params.influence = GridFunction1D({0.1 / 3.0, -1.0, 1.0, 2e-17, 0.3, 0.7, -0.123456789012345678}, 6.0);
    m.params.sigma_v = 0.0734567890123;
    m.provenance = {"tracks.csv", 99, "0123456789abcdef"};
    const std::string text = model_to_json(m);
    const ModelFile back = model_from_json(text);
    CHECK(back == m);
    CHECK(model_to_json(back) == text);

    const auto dir = scratch_dir("model");
    const auto path = (dir / "m.json").string();
    save_model(m, path);
    const std::string first = read_file(path);
    save_model(load_model(path), path);
    CHECK(read_file(path) == first);
  }

  TEST_CASE("corrupted and unversioned model files") {
    ModelFile m;
    const std::string text = model_to_json(m);
    CHECK_THROWS_AS(model_from_json(text.substr(0, text.size() / 2)), DataError);
    std::string unversioned = text;
    unversioned.replace(unversioned.find("\"format_version\""), 16, "\"format_versionX\"");
    CHECK_THROWS_AS(model_from_json(unversioned), VersionError);
    std::string future = text;
    future.replace(future.find("\"format_version\": 1"), 19, "\"format_version\": 7");
    CHECK_THROWS_AS(model_from_json(future), VersionError);
    std::string invalid = text;
    invalid.replace(invalid.find("\"sigma_v\""), 9, "\"sigma_q\"");
    CHECK_THROWS_AS(model_from_json(invalid), DataError);
  }

  TEST_CASE("synthesis is reproducible and honours forced regimes") {
    ScenarioSpec spec;
    const auto a = synthesize(spec, synthetic_truth(), 5, 77);
    const auto b = synthesize(spec, synthetic_truth(), 5, 77);
    std::ostringstream sa, sb;
    write_tracks(sa, a.scene);
    write_tracks(sb, b.scene);
    CHECK(sa.str() == sb.str());
    std::ostringstream la, lb;
    write_latent(la, a);
    write_latent(lb, b);
    CHECK(la.str() == lb.str());

    // no vehicles and no diffusion: true states on a straight line
    ScenarioSpec free = spec;
    free.kind = ScenarioKind::kFree;
    ModelParams still = synthetic_truth();
    still.sigma_v = 1e-300;
    const auto f = synthesize(free, still, 3, 1);
    CHECK(f.scene.vehicles.empty());
    for (std::size_t k = 2; k < f.latent.size(); ++k) {
      if (f.latent[k].ped_id != f.latent[k - 2].ped_id) continue;
      const Vec2 d1 = f.latent[k - 1].state.pos - f.latent[k - 2].state.pos;
      const Vec2 d2 = f.latent[k].state.pos - f.latent[k - 1].state.pos;
      CHECK((d1 - d2).norm() < 1e-12);
    }

    // certain yielding with a full stop
    ModelParams stop = synthetic_truth();
    stop.influence = GridFunction1D::zeros();
    stop.risk_fn = GridFunction2D(std::vector<double>(25, 0.0), 800.0, 0.0, 1.6, 5);
    const auto y = synthesize(spec, stop, 4, 3);
    int attended = 0;
    for (std::size_t k = 0; k + 1 < y.latent.size(); ++k) {
      if (!y.latent[k].attended_id || y.latent[k + 1].ped_id != y.latent[k].ped_id) continue;
      ++attended;
      CHECK(y.latent[k].decision.q == Yield::kYield);
      CHECK(y.latent[k + 1].state.pos == y.latent[k].state.pos);
    }
    CHECK(attended > 0);
  }

  TEST_CASE("metric tables") {
    MetricTable t;
    t.rows = {{1.0, 0.25, 0.5, 3}};
    std::ostringstream out;
    write_metric_csv(out, t);
    CHECK(out.str() == "t_seconds,ade_m,rmse_m,n\n1.000000,0.250000,0.500000,3\n");
  }
}
