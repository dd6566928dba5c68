#include <doctest.h>

#include <json.hpp>

#include "cli_runner.hpp"
#include "osp/data_io.hpp"

using namespace osp;

namespace {

/// A small crossing dataset and a model trained on it, shared by the tests below.
struct Fixture {
  std::filesystem::path dir;
  Fixture() : dir(cli::scratch("fixture")) {
    REQUIRE(cli::run(dir, "synthesize --out data.csv -n 40 --seed 3").code == 0);
    REQUIRE(cli::run(dir, "train --data data.csv --out model.json --restarts 2").code == 0);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit with 1") {
    const auto dir = cli::scratch("usage");
    CHECK(cli::run(dir, "").code == 1);
    CHECK(cli::run(dir, "frobnicate").code == 1);
    CHECK(cli::run(dir, "train --data missing.csv --out m.json").code == 1);
    CHECK(cli::run(dir, "--help").code == 0);
  }

  TEST_CASE("data errors exit with 2") {
    const auto dir = cli::scratch("data");
    write_file((dir / "bad.csv").string(), "track_id,class,frame,x_m,y_m\n1,pedestrian,0,zero,0\n");
    const auto r = cli::run(dir, "train --data bad.csv --out m.json");
    CHECK(r.code == 2);
    CHECK(r.err.find("line 2") != std::string::npos);
  }

  TEST_CASE("empty dataset is training-infeasible") {
    const auto dir = cli::scratch("empty");
    write_file((dir / "empty.csv").string(), "track_id,class,frame,x_m,y_m\n");
    const auto r = cli::run(dir, "train --data empty.csv --out m.json");
    CHECK(r.code != 0);
    CHECK(r.err.find("training-infeasible") != std::string::npos);
    CHECK(!std::filesystem::exists(dir / "m.json"));
  }

  TEST_CASE("training writes a model and a non-increasing trace") {
    const auto& f = fixture();
    CHECK(std::filesystem::exists(f.dir / "model.json"));
    const auto report = nlohmann::json::parse(cli::slurp(f.dir / "model.json.report.json"));
    const auto trace = report.at("loss_trace").get<std::vector<double>>();
    REQUIRE(!trace.empty());
    for (std::size_t k = 1; k < trace.size(); ++k) CHECK(trace[k] <= trace[k - 1]);
    const ModelFile m = load_model((f.dir / "model.json").string());
    CHECK(m.provenance.seed == kDefaultSeed);
    CHECK(m.provenance.dataset == "data.csv");
  }

  TEST_CASE("single-sample prediction has weight one") {
    const auto& f = fixture();
    const auto r = cli::run(f.dir, "predict --model model.json --scene data.csv --pedestrian 1 --at 60 --samples 1 --out p1.csv");
    REQUIRE(r.code == 0);
    const std::string csv = cli::slurp(f.dir / "p1.csv");
    CHECK(csv.rfind("sample,weight,step,t_seconds,x_m,y_m\n", 0) == 0);
    // header + 50 sample rows + 50 mean rows
    CHECK(count_lines(csv) == 101);
    CHECK(csv.find("\n0,1,1,") != std::string::npos);
  }

  TEST_CASE("known-trajectory prediction needs the full horizon") {
    const auto& f = fixture();
    // planned trajectory for vehicle 2 ending 4 s after the current step
    const Scene scene = load_scene((f.dir / "data.csv").string());
    Scene av;
    av.dt = scene.dt;
    for (const auto& v : scene.vehicles) {
      if (v.id != 2) continue;
      VehicleTrack cut = v;
      const int keep = 60 + 40 - v.t0 + 1;
      cut.states.resize(static_cast<std::size_t>(std::min<int>(keep, static_cast<int>(v.states.size()))));
      av.vehicles.push_back(cut);
    }
    REQUIRE(av.vehicles.size() == 1);
    save_tracks((f.dir / "av4.csv").string(), av);
    auto r = cli::run(f.dir, "predict --model model.json --scene data.csv --pedestrian 1 --at 60 --av-trajectory av4.csv --out pav.csv");
    CHECK(r.code == 2);
    CHECK(r.err.find("covers") != std::string::npos);
    r = cli::run(f.dir, "predict --model model.json --scene data.csv --pedestrian 1 --at 60 --av-trajectory av4.csv --horizon-seconds 4 --out pav.csv");
    CHECK(r.code == 0);
  }

  TEST_CASE("baseline evaluation needs no model") {
    const auto& f = fixture();
    const auto r = cli::run(f.dir, "evaluate --data data.csv --out-dir cv_only");
    REQUIRE(r.code == 0);
    const std::string csv = cli::slurp(f.dir / "cv_only" / "cv_metrics.csv");
    CHECK(count_lines(csv) == 6);
    CHECK(!std::filesystem::exists(f.dir / "cv_only" / "osp_metrics.csv"));
  }

  TEST_CASE("OSP and OSP-AV columns side by side") {
    const auto& f = fixture();
    const auto r = cli::run(f.dir, "evaluate --model model.json --data data.csv --out-dir av --predictors osp,osp-av --single-moving-vehicle --samples 20");
    REQUIRE(r.code == 0);
    const std::string cmp = cli::slurp(f.dir / "av" / "comparison.csv");
    CHECK(cmp.rfind("t_seconds,osp_ade_m,osp_rmse_m,osp-av_ade_m,osp-av_rmse_m,n\n", 0) == 0);
    CHECK(count_lines(cmp) == 6);
  }

  TEST_CASE("bench reports two statistics") {
    const auto& f = fixture();
    const auto r = cli::run(f.dir, "bench --model model.json --reps 100 --out bench.json");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("mean_ms=") != std::string::npos);
    CHECK(r.out.find("p95_ms=") != std::string::npos);
    const std::string json = cli::slurp(f.dir / "bench.json");
    CHECK(json.find("\"mean_ms\"") != std::string::npos);
    CHECK(json.find("\"p95_ms\"") != std::string::npos);
  }

  TEST_CASE("inputs are left untouched") {
    const auto& f = fixture();
    const std::string before = cli::slurp(f.dir / "data.csv");
    const std::string model = cli::slurp(f.dir / "model.json");
    REQUIRE(cli::run(f.dir, "evaluate --model model.json --data data.csv --out-dir untouched --samples 10").code == 0);
    CHECK(cli::slurp(f.dir / "data.csv") == before);
    CHECK(cli::slurp(f.dir / "model.json") == model);
  }
}
