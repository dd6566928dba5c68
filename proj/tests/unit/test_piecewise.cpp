#include <doctest.h>

#include <random>

#include "osp/piecewise.hpp"

using namespace osp;

TEST_SUITE("piecewise") {
  TEST_CASE("one-dimensional examples") {
    const GridFunction1D ones(std::vector<double>(7, 1.0), 6.0);
    for (double lat : {-7.0, -1.3, 0.0, 0.4, 2.0, 5.99, 6.0, 12.0}) CHECK(ones(lat) == doctest::Approx(1.0));

    const GridFunction1D ramp({0, 1, 1, 1, 1, 1, 1}, 6.0);
    CHECK(ramp(0.5) == doctest::Approx(0.5));

    const GridFunction1D w({0.1, -0.3, 0.7, 0.2, -0.9, 0.5, 0.4}, 6.0);
    CHECK(w(-2.0) == w(2.0));
    CHECK(w(-3.7) == w(3.7));
    CHECK(w(100.0) == doctest::Approx(0.4));
  }

  TEST_CASE("one-dimensional basis") {
    const GridFunction1D g = GridFunction1D::zeros(7, 6.0);
    const Basis1D at_node = g.basis(3.0);
    double total = 0.0;
    for (int k = 0; k < 2; ++k) {
      if (at_node.coef[k] != 0.0) {
        CHECK(at_node.node[k] == 3);
        CHECK(at_node.coef[k] == 1.0);
      }
      total += at_node.coef[k];
    }
    CHECK(total == 1.0);

    const Basis1D half = g.basis(0.5);
    CHECK(half.node[0] == 0);
    CHECK(half.node[1] == 1);
    CHECK(half.coef[0] == doctest::Approx(0.5));
    CHECK(half.coef[1] == doctest::Approx(0.5));
  }

  TEST_CASE("two-dimensional examples") {
    const GridFunction2D zero = GridFunction2D::zeros();
    CHECK(zero(0.3, 1.1) == 0.0);
    CHECK(zero.param_count() == 26);

    std::vector<double> w(25);
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = 0.1 * static_cast<double>(k) - 1.0;
    const GridFunction2D f(w, 0.25, 0.0, 1.6, 5);
    CHECK(f(0.4 * 2, 0.4 * 3) == doctest::Approx(w[2 * 5 + 3] + 0.25));
    const double center = 0.25 * (w[f.index(1, 2)] + w[f.index(2, 2)] + w[f.index(1, 3)] + w[f.index(2, 3)]);
    CHECK(f(0.6, 1.0) == doctest::Approx(center + 0.25));
    // clipping
    CHECK(f(5.0, -3.0) == doctest::Approx(w[f.index(4, 0)] + 0.25));
  }

  TEST_CASE("partition of unity, dot-product identity, continuity") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> q(-2.0, 8.0);
    std::vector<double> w1(7), w2(25);
    for (auto& x : w1) x = u(rng);
    for (auto& x : w2) x = u(rng);
    const GridFunction1D f1(w1, 6.0);
    const GridFunction2D f2(w2, 0.3, 0.0, 1.6, 5);
    for (int i = 0; i < 2000; ++i) {
      const double lat = q(rng);
      const Basis1D b = f1.basis(lat);
      double s = 0.0, dot = 0.0;
      for (int k = 0; k < 2; ++k) {
        CHECK(b.coef[k] >= 0.0);
        CHECK(b.coef[k] <= 1.0);
        s += b.coef[k];
        dot += b.coef[k] * w1[b.node[k]];
      }
      CHECK(std::abs(s - 1.0) < 1e-12);
      CHECK(std::abs(dot - f1(lat)) < 1e-12);

      const double a = q(rng) / 4.0, c = q(rng) / 4.0;
      const Basis2D b2 = f2.basis(a, c);
      double s2 = 0.0, dot2 = f2.bias();
      for (int k = 0; k < 4; ++k) {
        CHECK(b2.coef[k] >= 0.0);
        s2 += b2.coef[k];
        dot2 += b2.coef[k] * w2[b2.node[k]];
      }
      CHECK(std::abs(s2 - 1.0) < 1e-12);
      CHECK(std::abs(dot2 - f2(a, c)) < 1e-12);
    }
    for (std::size_t i = 0; i < 7; ++i) {
      const double x = f1.node(i);
      CHECK(std::abs(f1(x + 1e-9) - f1(x)) < 1e-6);
      CHECK(std::abs(f1(x - 1e-9) - f1(x)) < 1e-6);
    }
  }

  TEST_CASE("evaluation is linear in the weights") {
    const GridFunction2D a({1, 2, 3, 4}, 0.5, 0.0, 1.0, 2);
    const GridFunction2D b({-1, 0, 2, 1}, -0.2, 0.0, 1.0, 2);
    const GridFunction2D sum({0, 2, 5, 5}, 0.3, 0.0, 1.0, 2);
    CHECK(sum(0.3, 0.8) == doctest::Approx(a(0.3, 0.8) + b(0.3, 0.8)));
  }
}
