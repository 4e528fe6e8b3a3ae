#include <catch_amalgamated.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <vector>

#include "pdmp/cell_model.hpp"
#include "pdmp/stats.hpp"

using namespace pdmp;

TEST_CASE("truncated normal transition density", "[cell][transition]") {
  const auto model = make_cell_model();
  const auto& q = model.transitions;
  CHECK(q.density({1.0}, {0.5}) == Catch::Approx(5.843685672568167).epsilon(1e-13));
  CHECK(q.density({1.0}, {0.65}) == 0.0);
  CHECK(q.density({1.0}, {0.6}) == 0.0);
  CHECK(q.density({2.0}, {1.0}) == Catch::Approx(q.density({1.0}, {0.5})).epsilon(1e-15));
  // Window clipped at the left end of E when x/2 < sigma.
  CHECK(q.support({0.1}).lower()[0] == 0.0);
  CHECK(q.support({0.1}).upper()[0] == Catch::Approx(0.15));
}

TEST_CASE("transition density integrates to one", "[cell][transition]") {
  const auto model = make_cell_model();
  Philox4x32 rng(11);
  for (int i = 0; i < 100; ++i) {
    const double x = 3.0 * uniform01(rng);
    const Box<1> w = model.transitions.support({x});
    auto f = [&](double y) { return model.transitions.density({x}, {y}); };
    const double mass = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        f, w.lower()[0], w.upper()[0], 15, 1e-14);
    REQUIRE(mass == Catch::Approx(1.0).margin(1e-10));
  }
}

TEST_CASE("transition draws follow the truncated normal", "[cell][transition]") {
  const auto model = make_cell_model();
  Philox4x32 rng(12);
  std::vector<double> draws(1000000);
  for (auto& d : draws) d = model.transitions.draw(Point<1>{1.0}, rng)[0];
  const double ks = stats::ks_statistic(draws, [&](double y) { return model.transitions.cdf({1.0}, y); });
  CHECK(stats::ks_pvalue(ks, draws.size()) > 0.001);
  for (double d : draws) REQUIRE((d > 0.4 && d < 0.6));
}

TEST_CASE("jump law survival, density and inverse", "[cell][jumps]") {
  const auto model = make_cell_model();
  const auto& g = model.jumps;
  CHECK(g.density({2.0}, 1.0) == Catch::Approx(0.18393972058572117).epsilon(1e-14));
  CHECK(g.survival({1.0}, 1.0) == Catch::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(g.survival({1.0}, 0.0) == 1.0);
  Philox4x32 rng(13);
  for (int i = 0; i < 1000; ++i) {
    const double z = 0.05 + 2.9 * uniform01(rng);
    const double t = 0.01 + 3.0 * uniform01(rng);
    const double u = g.survival({z}, t);
    // Relative error in u is amplified by z / |ln u| on the way back to t.
    if (u > 1e-300 && u < 1.0) {
      const double cond = z / std::fabs(std::log(u));
      REQUIRE(g.inverse_survival({z}, u) == Catch::Approx(t).epsilon(1e-13 * std::max(1.0, cond)));
    }
    const double h = 1e-6 * t;
    const double fd = -(g.survival({z}, t + h) - g.survival({z}, t - h)) / (2 * h);
    REQUIRE(g.density({z}, t) == Catch::Approx(fd).epsilon(1e-5).margin(1e-9));
  }
}

TEST_CASE("flow and Jacobian", "[cell][flow]") {
  const auto model = make_cell_model();
  CHECK(model.flow.apply({1.0}, 1.0)[0] == Catch::Approx(std::exp(0.9)).epsilon(1e-15));
  CHECK(model.flow.jacobian({1.0}, 1.0) == Catch::Approx(2.45960311115695).epsilon(1e-13));
  CHECK(model.flow.exit_time({1.0}) == Catch::Approx(1.2206803207423442).epsilon(1e-15));
  CHECK(std::isinf(model.flow.reverse_exit_time({1.0})));
}

TEST_CASE("parameter validation", "[cell]") {
  CHECK_THROWS(make_cell_model(CellModelParams{0.0, 0.1}));
  CHECK_THROWS(make_cell_model(CellModelParams{0.9, -0.1}));
}
