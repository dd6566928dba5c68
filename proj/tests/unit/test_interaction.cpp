#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles/brute_force.hpp"
#include "osp/errors.hpp"
#include "osp/interaction.hpp"

using namespace osp;

namespace {

ModelParams params_with_bias(double bias) {
  ModelParams p;
  p.risk_fn = GridFunction2D(std::vector<double>(25, 0.0), bias, 0.0, 1.6, 5);
  return p;
}

}  // namespace

TEST_SUITE("interaction") {
  TEST_CASE("risk feature examples") {
    const auto a = risk_features({Vec2(0, 0), Vec2(0, 0)}, {Vec2(10, 0), Vec2(-1, 0)});
    CHECK(a.tau == doctest::Approx(10.0));
    CHECK(a.dmin == doctest::Approx(0.0));

    const auto b = risk_features({Vec2(0, 3), Vec2(0, -1)}, {Vec2(-10, 0), Vec2(1, 0)});
    CHECK(b.tau == doctest::Approx(6.5));
    CHECK(b.dmin == doctest::Approx(std::sqrt(24.5)));

    const auto c = risk_features({Vec2(7, -2), Vec2(0, -1)}, {Vec2(-3, -5), Vec2(1, 0)});
    CHECK(c.tau == doctest::Approx(b.tau));
    CHECK(c.dmin == doctest::Approx(b.dmin));

    CHECK_THROWS_AS(risk_features({Vec2(0, 0), Vec2(1, 0)}, {Vec2(5, 0), Vec2(1, 0)}), ContractViolation);
  }

  TEST_CASE("closest approach matches dense sampling") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-15.0, 15.0);
    std::uniform_real_distribution<double> s(-3.0, 3.0);
    for (int i = 0; i < 300; ++i) {
      const PedestrianState ped{Vec2(u(rng), u(rng)), Vec2(s(rng), s(rng))};
      const VehicleState veh{Vec2(u(rng), u(rng)), Vec2(3 * s(rng), 3 * s(rng))};
      const auto f = risk_features(ped, veh);
      const Vec2 rel_pos = ped.pos - veh.pos;
      const Vec2 rel_vel = ped.des_vel - veh.vel;
      CHECK(f.tau >= 0.0);
      CHECK(f.dmin >= 0.0);
      if (f.tau > 0.0) {
        CHECK(std::abs(f.tau * rel_vel.squaredNorm() + rel_pos.dot(rel_vel)) < 1e-9 * (1.0 + rel_pos.norm() * rel_vel.norm()));
      }
      // refine the brute-force minimum around the sampled optimum
      const double t_max = f.tau + 20.0;
      auto coarse = oracle::sampled_closest_approach(rel_pos, rel_vel, t_max, 1e-3);
      const double lo = std::max(0.0, coarse.second - 2e-3);
      const auto fine = oracle::sampled_closest_approach(rel_pos + lo * rel_vel, rel_vel, 4e-3, 1e-7);
      CHECK(std::abs(f.dmin - fine.first) < 1e-6);
    }
  }

  TEST_CASE("risk lookup") {
    CHECK(risk(ModelParams{}, {3.0, 2.0}) == 0.0);
    std::vector<double> w(25, 0.0);
    w[0] = 0.7;   // lower corner
    w[24] = -2.0;  // upper corner
    ModelParams p;
    p.risk_fn = GridFunction2D(w, 0.1, 0.0, 1.6, 5);
    CHECK(risk(p, {1.0, 1.0}) == doctest::Approx(0.8));
    CHECK(risk(p, {100.0, 1000.0}) == doctest::Approx(-1.9));
    CHECK(risk(p, {100.0, 1000.0}) == doctest::Approx(risk(p, {std::pow(10.0, 1.6), std::pow(10.0, 1.6)})));
    // dmin = 0 is floored, then clipped to the grid
    CHECK(std::isfinite(risk(p, {1.0, 0.0})));
  }

  TEST_CASE("attention and yield probability") {
    const PedestrianState ped{Vec2(0, 3), Vec2(0, -1)};
    std::vector<VehicleState> veh{{Vec2(-10, 0), Vec2(1, 0)}, {Vec2(10, 0), Vec2(-1, 0)}};
    const ModelParams zero;
    const std::vector<std::size_t> one{0};
    CHECK(attention_dist(zero, ped, veh, one)[0] == doctest::Approx(1.0));
    const std::vector<std::size_t> both{0, 1};
    const auto p = attention_dist(zero, ped, veh, both);
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));
    CHECK_THROWS_AS(attention_dist(zero, ped, veh, std::vector<std::size_t>{}), ContractViolation);

    // risks (ln 2, 0): the first vehicle sits at the lower grid corner
    veh = {{Vec2(-1, 0), Vec2(1, 0)}, {Vec2(-1000, 100), Vec2(1, 0)}};
    const PedestrianState still{Vec2(0, 0.5), Vec2(0, 0)};
    std::vector<double> w(25, 0.0);
    w[0] = std::log(2.0);
    ModelParams p2;
    p2.risk_fn = GridFunction2D(w, 0.0, 0.0, 1.6, 5);
    CHECK(risk(p2, risk_features(still, veh[0])) == doctest::Approx(std::log(2.0)));
    CHECK(risk(p2, risk_features(still, veh[1])) == doctest::Approx(0.0));
    const auto q = attention_dist(p2, still, veh, both);
    CHECK(q[0] == doctest::Approx(2.0 / 3.0));
    CHECK(q[1] == doctest::Approx(1.0 / 3.0));

    // shift invariance
    ModelParams p3 = p2;
    p3.risk_fn = GridFunction2D(w, 4.0, 0.0, 1.6, 5);
    const auto q3 = attention_dist(p3, still, veh, both);
    CHECK(q3[0] == doctest::Approx(q[0]).epsilon(1e-12));

    CHECK(yield_prob(zero, ped, veh[0]) == doctest::Approx(0.5));
    CHECK(yield_prob(params_with_bias(std::log(3.0)), ped, veh[0]) == doctest::Approx(0.75));
    CHECK(yield_prob(params_with_bias(-800.0), ped, veh[0]) == 0.0);
    CHECK(yield_prob(params_with_bias(800.0), ped, veh[0]) == 1.0);
  }

  TEST_CASE("step examples") {
    ModelParams p;
    const PedestrianState ped{Vec2(0, 0), Vec2(1.2, 0)};
    const std::vector<VehicleState> veh{{Vec2(-10, -2), Vec2(1, 0)}};
    const Vec2 cont = step(p, ped, {std::nullopt, Yield::kContinue}, {});
    CHECK(cont.x() == doctest::Approx(0.12));
    CHECK(cont.y() == doctest::Approx(0.0));

    p.influence = GridFunction1D(std::vector<double>(7, 0.5), 6.0);
    const Vec2 half = step(p, ped, {0, Yield::kYield}, veh);
    CHECK(half.x() == doctest::Approx(0.06));

    p.influence = GridFunction1D::zeros();
    const Vec2 stop = step(p, ped, {0, Yield::kYield}, veh);
    CHECK(stop == ped.pos);

    CHECK_THROWS_AS(step(p, ped, {std::nullopt, Yield::kYield}, veh), ContractViolation);

    // continuing ignores the vehicles entirely
    const std::vector<VehicleState> other{{Vec2(3, 3), Vec2(-4, 1)}};
    CHECK(step(p, ped, {0, Yield::kContinue}, veh) == step(p, ped, {0, Yield::kContinue}, other));
  }

  TEST_CASE("transition without vehicles and zero diffusion is deterministic") {
    ModelParams p;
    p.sigma_v = 0.0;
    Rng rng(1);
    const PedestrianState ped{Vec2(1, 2), Vec2(0.3, -1.1)};
    const auto tr = sample_transition(p, ped, {}, rng);
    CHECK(tr.decision.q == Yield::kContinue);
    CHECK(!tr.decision.attended.has_value());
    CHECK(tr.next.pos.isApprox(ped.pos + 0.1 * ped.des_vel));
    CHECK(tr.next.des_vel == ped.des_vel);
  }

  TEST_CASE("Monte Carlo yield frequency and innovation spread") {
    ModelParams p;
    std::vector<double> w(25, 0.0);
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 5; ++j) w[i * 5 + j] = 1.5 - 0.8 * static_cast<double>(i) - 0.4 * static_cast<double>(j);
    }
    p.risk_fn = GridFunction2D(w, 0.2, 0.0, 1.6, 5);
    p.influence = GridFunction1D(std::vector<double>(7, 0.3), 6.0);
    p.sigma_v = 0.1;
    const PedestrianState ped{Vec2(0, 3), Vec2(0, -1)};
    const std::vector<VehicleState> veh{{Vec2(-12, 0), Vec2(4, 0)}};
    const double p_yield = yield_prob(p, ped, veh[0]);
    REQUIRE(p_yield > 0.05);
    REQUIRE(p_yield < 0.95);

    Rng rng = stream(99, 0);
    const int n = 100000;
    int yields = 0;
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto tr = sample_transition(p, ped, veh, rng);
      REQUIRE(tr.decision.attended.has_value());
      yields += tr.decision.q == Yield::kYield;
      const Vec2 w_inn = tr.next.des_vel - ped.des_vel;
      s2 += w_inn.squaredNorm();
    }
    const double freq = static_cast<double>(yields) / n;
    const double se = std::sqrt(p_yield * (1.0 - p_yield) / n);
    CHECK(std::abs(freq - p_yield) < 3.0 * se);
    const double sd = std::sqrt(s2 / (2.0 * n));
    CHECK(std::abs(sd - p.sigma_v) / p.sigma_v < 0.02);
  }
}
