#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "pdmp/cell_model.hpp"
#include "pdmp/core.hpp"
#include "pdmp/reference.hpp"

using namespace pdmp;

namespace {

// Trapezoid of z -> r(y, z) over [a, b].
double r_mass(const CellModel& model, double y, double a, double b, int points) {
  double sum = 0.0;
  double prev = 0.0;
  for (int i = 0; i <= points; ++i) {
    const double z = a + (b - a) * i / points;
    const double v = (z > 0.0 && z < 3.0) ? r_density(model, Point<1>{y}, Point<1>{z}).value : 0.0;
    if (i) sum += 0.5 * (b - a) / points * (prev + v);
    prev = v;
  }
  return sum;
}

}  // namespace

TEST_CASE("r vanishes below the transition window", "[reference]") {
  const auto model = make_cell_model();
  for (double z : {0.05, 0.2, 0.39, 0.4}) {
    CHECK(r_density(model, Point<1>{1.0}, Point<1>{z}).value == 0.0);
  }
  CHECK(r_density(model, Point<1>{1.0}, Point<1>{1.0}).value > 0.0);
}

TEST_CASE("r matches a one-step Monte Carlo histogram", "[reference]") {
  const auto model = make_cell_model();
  const Point<1> y{1.0};
  Philox4x32 rng(31);
  const int draws = 400000;
  const std::vector<double> edges{0.4, 0.6, 0.8, 1.0, 1.3, 1.7, 2.2, 3.0};
  std::vector<int> counts(edges.size() - 1, 0);
  int forced = 0;
  for (int i = 0; i < draws; ++i) {
    const Point<1> z = model.transitions.draw(y, rng);
    const auto step = sample_interjump<1>(model.jumps, z, model.flow.exit_time(z), rng);
    if (step.forced) {
      ++forced;
      continue;
    }
    const double pre = model.flow.apply(z, step.interval)[0];
    for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
      if (pre >= edges[b] && pre < edges[b + 1]) ++counts[b];
    }
  }
  for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
    const double expected = r_mass(model, 1.0, edges[b], edges[b + 1], 200);
    const double observed = double(counts[b]) / draws;
    const double se = std::sqrt(expected * (1 - expected) / draws);
    CHECK(std::fabs(observed - expected) <= 4 * se + 1e-4);
  }
  const double fm = forced_mass(model, y);
  CHECK(std::fabs(double(forced) / draws - fm) <= 4 * std::sqrt(fm * (1 - fm) / draws));
}

TEST_CASE("tighter tolerances move r by less than the reported error", "[reference]") {
  const auto model = make_cell_model();
  QuadratureSpec loose;
  QuadratureSpec tight;
  tight.abs_tolerance = loose.abs_tolerance / 2;
  tight.rel_tolerance = loose.rel_tolerance / 2;
  for (double z : {0.5, 0.9, 1.7, 2.8}) {
    const auto a = r_density(model, Point<1>{1.0}, Point<1>{z}, loose);
    const auto b = r_density(model, Point<1>{1.0}, Point<1>{z}, tight);
    CHECK(std::fabs(a.value - b.value) <= a.error + b.error + 1e-12);
  }
}

TEST_CASE("horizon change is covered by the tail bound", "[reference]") {
  const auto model = make_cell_model();
  QuadratureSpec short_h;
  short_h.horizon = 20.0;
  QuadratureSpec long_h;
  long_h.horizon = 40.0;
  for (double z : {0.5, 1.2, 2.5}) {
    const auto a = r_density(model, Point<1>{2.0}, Point<1>{z}, short_h);
    const auto b = r_density(model, Point<1>{2.0}, Point<1>{z}, long_h);
    CHECK(a.horizon == 20.0);
    CHECK(std::fabs(a.value - b.value) <= a.tail_bound + a.error + b.error + 1e-12);
  }
}

TEST_CASE("continuous and forced parts add to one", "[reference]") {
  const auto model = make_cell_model();
  for (double y : {0.5, 1.0, 2.0, 3.0}) {
    const double m = r_mass(model, y, 0.0, 3.0, 3000);
    CHECK(std::fabs(m + forced_mass(model, Point<1>{y}) - 1.0) <= 2e-2);
  }
}

TEST_CASE("p_ergodic averages r over pre-jump points", "[reference]") {
  const auto model = make_cell_model();
  Trajectory<1> one{{1.0}, {JumpRecord<1>{1, 1.0, 1.0, {2.0}, {1.0}, false}}, 0, 0};
  CHECK(p_ergodic(model, one, Point<1>{1.0}) == r_density(model, Point<1>{2.0}, Point<1>{1.0}).value);

  auto traj = simulate(model, Point<1>{1.0}, 40, 8);
  const double a = p_ergodic(model, traj, Point<1>{1.0});
  std::reverse(traj.records.begin(), traj.records.end());
  CHECK(p_ergodic(model, traj, Point<1>{1.0}) == Catch::Approx(a).epsilon(1e-14));
  traj.records.clear();
  CHECK_THROWS(p_ergodic(model, traj, Point<1>{1.0}));
}

TEST_CASE("asymptotic variance formula", "[reference]") {
  const double q = 5.843685672568167;
  // Unit initial bandwidth gives q^2 tau^2 / (p (1 + alpha d)).
  CHECK(clt_variance(q, 1.0, 0.6, 0.5, 1.0, 1) == Catch::Approx(q * q * 0.6 / 1.5).epsilon(1e-15));
  CHECK(clt_variance(q, 2.0, 0.6, 0.5, 1.0, 1) == Catch::Approx(q * q * 0.6 / 3.0).epsilon(1e-15));
  // sum_j v_j^-d = v1^-d sum_j j^{alpha d}, so the variance scales as v1^-d.
  CHECK(clt_variance(q, 1.0, 0.6, 0.5, 0.1, 1) == Catch::Approx(10 * q * q * 0.6 / 1.5).epsilon(1e-14));
  CHECK(clt_variance(q, 1.0, 0.6, 0.25, 0.5, 2) == Catch::Approx(4 * q * q * 0.6 / 1.5).epsilon(1e-14));
  CHECK_THROWS(clt_variance(q, 0.0, 0.6, 0.5, 1.0, 1));
  CHECK_THROWS(clt_variance(q, 1.0, 0.6, 0.5, 0.0, 1));
}
