#include <doctest.h>

#include <cmath>
#include <random>

#include "harmalign/error.hpp"
#include "harmalign/filters.hpp"
#include "support.hpp"

using namespace harmalign;

namespace {

double oracle_weight(double a, double b, int l, int first = 0) {
  double s = 0.0;
  for (int xi = first; xi <= l; ++xi) s += oracle::window(a, xi, l) * oracle::window(b, xi, l);
  return s;
}

double weight(double a, double b, int l, WindowSet set = WindowSet::all) {
  return bandlimiting_weights(VectorXd::Constant(1, a), VectorXd::Constant(1, b), l, set)(0, 0);
}

}  // namespace

TEST_SUITE("filters") {
  TEST_CASE("window peaks at its centre and vanishes at the support edges") {
    for (int l : {1, 2, 8, 64}) {
      for (int xi = 0; xi <= l; ++xi) {
        CHECK(itersine_window(static_cast<double>(xi) / l, xi, l) == doctest::Approx(1.0));
        CHECK(itersine_window(static_cast<double>(xi + 1) / l, xi, l) == 0.0);
        CHECK(itersine_window(static_cast<double>(xi - 1) / l, xi, l) == 0.0);
        CHECK(itersine_window((xi + 0.5) / l, xi, l) ==
              doctest::Approx(std::sqrt(2.0) / 2).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("window matches its definition and stays in [0, 1]") {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(-0.5, 1.5);
    for (int i = 0; i < 2000; ++i) {
      const double lambda = u(gen);
      for (int xi = 0; xi <= 8; ++xi) {
        const double w = itersine_window(lambda, xi, 8);
        CHECK(w >= 0.0);
        CHECK(w <= 1.0);
        CHECK(std::abs(w - oracle::window(lambda, xi, 8)) <= 1e-15);
      }
    }
  }

  TEST_CASE("weights: equal eigenvalues give 1, far ones give exactly 0") {
    for (int l : {2, 4, 8}) {
      for (double lambda : {0.0, 0.03, 0.5, 0.77, 1.0}) {
        CHECK(weight(lambda, lambda, l) == doctest::Approx(1.0).epsilon(1e-12));
      }
      CHECK(weight(0.0, 2.0 / l, l) == 0.0);
      CHECK(weight(0.9, 0.9 - 2.0 / l - 1e-9, l) == 0.0);
    }
  }

  TEST_CASE("weights for l = 2 at 0.5 and 0.75 by direct evaluation") {
    const double expected = oracle_weight(0.5, 0.75, 2);
    CHECK(expected == doctest::Approx(std::sqrt(2.0) / 2).epsilon(1e-12));
    CHECK(weight(0.5, 0.75, 2) == doctest::Approx(expected).epsilon(1e-14));
  }

  TEST_CASE("weight matrix matches the scalar oracle for both window sets") {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    VectorXd lx(30), ly(17);
    for (Index i = 0; i < 30; ++i) lx(i) = u(gen);
    for (Index i = 0; i < 17; ++i) ly(i) = u(gen);
    const MatrixXd all = bandlimiting_weights(lx, ly, 8);
    const MatrixXd skip = bandlimiting_weights(lx, ly, 8, WindowSet::skip_lowest);
    for (Index i = 0; i < 30; ++i) {
      for (Index j = 0; j < 17; ++j) {
        CHECK(std::abs(all(i, j) - oracle_weight(lx(i), ly(j), 8)) <= 1e-14);
        CHECK(std::abs(skip(i, j) - oracle_weight(lx(i), ly(j), 8, 1)) <= 1e-14);
        CHECK(all(i, j) >= 0.0);
        CHECK(all(i, j) <= 1.0 + 1e-12);
      }
    }
  }

  TEST_CASE("weights are exactly symmetric under argument swap") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    VectorXd lx(40), ly(25);
    for (Index i = 0; i < 40; ++i) lx(i) = u(gen);
    for (Index i = 0; i < 25; ++i) ly(i) = u(gen);
    for (WindowSet set : {WindowSet::all, WindowSet::skip_lowest}) {
      CHECK(bandlimiting_weights(lx, ly, 8, set) ==
            MatrixXd(bandlimiting_weights(ly, lx, 8, set).transpose()));
    }
  }

  TEST_CASE("skipping the lowest window removes weight near zero") {
    CHECK(weight(0.0, 0.0, 8, WindowSet::skip_lowest) == 0.0);
    CHECK(weight(1.0 / 8, 1.0 / 8, 8, WindowSet::skip_lowest) == doctest::Approx(1.0));
    CHECK(weight(0.6, 0.6, 8, WindowSet::skip_lowest) == doctest::Approx(1.0));
    CHECK(window_energy(0.05, 8, WindowSet::skip_lowest) < 1.0);
  }

  TEST_CASE("squared partition of unity on [0, 1]") {
    for (int l : {1, 3, 8}) {
      for (int i = 0; i <= 1000; ++i) {
        CHECK(std::abs(window_energy(i / 1000.0, l) - 1.0) <= 1e-12);
      }
    }
  }

  TEST_CASE("eigenvalues outside [0, 1] self-truncate") {
    CHECK(window_energy(-1.0 / 8, 8) == 0.0);
    CHECK(window_energy(1.0 + 1.0 / 8, 8) == 0.0);
    CHECK(window_energy(-0.05, 8) > 0.0);
  }

  TEST_CASE("support shrinks as the band count grows") {
    // 2/l2 <= delta < 2/l1 with l1 = 4, l2 = 8.
    const double delta = 0.3;
    for (double a : {0.0, 0.2, 0.55}) {
      CHECK(weight(a, a + delta, 8) == 0.0);
      CHECK(std::isfinite(weight(a, a + delta, 4)));
    }
    CHECK(weight(0.2, 0.45, 4) > 0.0);
  }

  TEST_CASE("band count must be positive") {
    CHECK_THROWS_AS(bandlimiting_weights(VectorXd::Zero(2), VectorXd::Zero(2), 0), Error);
    CHECK_THROWS_AS(window_energy(0.5, -1), Error);
  }
}
