#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pdmp/cell_model.hpp"
#include "pdmp/core.hpp"
#include "pdmp/estimator.hpp"
#include "pdmp/experiment.hpp"

using namespace pdmp;

namespace {

const Box<1> kE({0.0}, {3.0});

EstimatorState<1> fresh(double v1 = 0.1, double alpha = 0.125, double w1 = 0.1, double beta = 0.1) {
  return EstimatorState<1>(kE, KernelFn<1>::epanechnikov(), BandwidthSchedule(v1, alpha), BandwidthSchedule(w1, beta));
}

JumpRecord<1> record(std::size_t j, double pre, double post) { return JumpRecord<1>{j, double(j), 1.0, {pre}, {post}, false}; }

// From-scratch sums in extended precision; shares nothing with the
// streaming path beyond the kernel formula itself.
struct BatchSums {
  long double numerator = 0;
  long double denominator = 0;
};

BatchSums batch(const std::vector<JumpRecord<1>>& recs, double x, double y, double v1, double alpha, double w1,
                double beta) {
  auto epan = [](long double u) { return std::fabs(u) < 1 ? 0.75L * (1 - u * u) : 0.0L; };
  BatchSums s;
  for (std::size_t j = 1; j <= recs.size(); ++j) {
    const long double v = v1 * std::pow((long double)j, -(long double)alpha);
    const long double w = w1 * std::pow((long double)j, -(long double)beta);
    const auto& r = recs[j - 1];
    s.denominator += epan((r.pre[0] - x) / v) / v;
    s.numerator += epan((r.pre[0] - x) / w) * epan((r.post[0] - y) / w) / (w * w);
  }
  return s;
}

// Constant flow, unit jump rate, uniform resets on (4, 6) inside E = (0, 10):
// no pre-jump location ever comes near the boundary.
struct Still {
  Point<1> apply(const Point<1>& x, double) const { return x; }
  double jacobian(const Point<1>&, double) const { return 1.0; }
};
struct UnitRate {
  double survival(const Point<1>&, double t) const { return t == kNever ? 0.0 : std::exp(-t); }
  double density(const Point<1>&, double t) const { return std::exp(-t); }
  double inverse_survival(const Point<1>&, double u) const { return -std::log(u); }
};
struct UniformReset {
  double density(const Point<1>&, const Point<1>& y) const { return (y[0] > 4 && y[0] < 6) ? 0.5 : 0.0; }
  template <class Engine>
  Point<1> draw(const Point<1>&, Engine& rng) const { return {4.0 + 2.0 * uniform01(rng)}; }
};

}  // namespace

TEST_CASE("registration", "[estimator][register]") {
  auto est = fresh();
  est.register_pair({1.0}, {0.5});
  CHECK(est.records() == 0);
  CHECK(est.pair_count() == 1);
  CHECK(est.location_count() == 1);
  CHECK_THROWS_AS(est.register_pair({3.5}, {0.5}), std::invalid_argument);
  CHECK_THROWS_AS(est.register_pair({1.0}, {0.0}), std::invalid_argument);
  est.update(record(1, 1.0, 0.5));
  CHECK_THROWS_AS(est.register_pair({2.0}, {1.0}), std::logic_error);
}

TEST_CASE("support-condition warning near the boundary", "[estimator][register]") {
  auto est = fresh();
  est.register_pair({1.0}, {0.5});
  CHECK(est.warnings().empty());
  est.register_marginal({2.95});
  CHECK(est.warnings().size() == 1);
}

TEST_CASE("curves share one denominator per x", "[estimator][register]") {
  const auto grid_vals = linspace(0.35, 0.65, 512);
  std::vector<Point<1>> grid;
  for (double y : grid_vals) grid.push_back({y});
  auto shared = fresh();
  shared.register_curve({1.0}, grid);
  CHECK(shared.location_count() == 1);
  CHECK(shared.pair_count() == 512);

  const auto traj = simulate(make_cell_model(), Point<1>{1.0}, 3000, 5);
  for (const auto& r : traj.records) shared.update(r);
  const auto curve = shared.q_hat_curve({1.0}, grid);

  // Unshared computation: one independent state per grid point.
  for (std::size_t i = 0; i < grid.size(); i += 51) {
    auto single = fresh();
    single.register_pair({1.0}, grid[i]);
    for (const auto& r : traj.records) single.update(r);
    CHECK(single.q_hat({1.0}, grid[i]) == curve[i]);
    CHECK(single.denominator_sum({1.0}) == shared.denominator_sum({1.0}));
  }
  const std::vector<Point<1>> one{grid[100]};
  CHECK(shared.q_hat_curve({1.0}, one)[0] == shared.q_hat({1.0}, grid[100]));
  CHECK(shared.q_hat_curve({1.0}, std::span<const Point<1>>{}).empty());
}

TEST_CASE("single-record increments", "[estimator][update]") {
  auto est = fresh(0.1, 0.125, 0.1, 0.1);
  est.register_pair({1.0}, {0.5});
  est.update(record(1, 1.0, 0.5));
  CHECK(est.denominator_sum({1.0}) == Catch::Approx(7.5).epsilon(1e-15));
  CHECK(est.numerator_sum({1.0}, {0.5}) == Catch::Approx(56.25).epsilon(1e-15));
  CHECK_THROWS_AS(est.p_hat({1.0}), std::logic_error);
  est.update(record(2, 2.0, 1.0));  // far from the target
  CHECK(est.h_hat({1.0}, {0.5}) == Catch::Approx(56.25).epsilon(1e-15));
  CHECK(est.p_hat({1.0}) == Catch::Approx(7.5).epsilon(1e-15));
}

TEST_CASE("two-term p_hat expansion", "[estimator][p_hat]") {
  auto est = fresh(0.1, 0.125, 0.1, 0.1);
  est.register_marginal({1.0});
  const double v2 = 0.1 * std::pow(2.0, -0.125);
  est.update(record(1, 1.0, 0.5));
  est.update(record(2, 1.0 + 0.05 * v2, 0.5));
  // (1/1) [K(0)/v1 + K(0.05)/v2] = 7.5 + 0.748125 / 0.0917004...
  CHECK(est.p_hat({1.0}) == Catch::Approx(15.658360975001958).epsilon(1e-13));
}

TEST_CASE("records outside every support leave accumulators bit-identical", "[estimator][update]") {
  auto est = fresh();
  est.register_pair({1.0}, {0.5});
  est.register_pair({2.0}, {1.0});
  const auto traj = simulate(make_cell_model(), Point<1>{1.0}, 500, 9);
  for (const auto& r : traj.records) est.update(r);
  const double d1 = est.denominator_sum({1.0});
  const double n1 = est.numerator_sum({1.0}, {0.5});
  const double d2 = est.denominator_sum({2.0});
  const double n2 = est.numerator_sum({2.0}, {1.0});
  est.update(record(501, 1.5, 0.75));  // exactly delta * max(v1, w1) away from 1 and 2... in pre
  est.update(record(502, 2.6, 1.3));
  CHECK(est.denominator_sum({1.0}) == d1);
  CHECK(est.numerator_sum({1.0}, {0.5}) == n1);
  CHECK(est.denominator_sum({2.0}) == d2);
  CHECK(est.numerator_sum({2.0}, {1.0}) == n2);
  CHECK(est.records() == 502);
}

TEST_CASE("updates must arrive in order", "[estimator][update]") {
  auto est = fresh();
  est.register_pair({1.0}, {0.5});
  CHECK_THROWS_AS(est.update(record(2, 1.0, 0.5)), std::invalid_argument);
  est.update(record(1, 1.0, 0.5));
  CHECK_THROWS_AS(est.update(record(1, 1.0, 0.5)), std::invalid_argument);
}

TEST_CASE("q_hat reads and zero denominators", "[estimator][q_hat]") {
  auto est = fresh();
  est.register_pair({1.0}, {0.5});
  est.register_pair({2.0}, {1.0});
  CHECK_THROWS_AS(est.q_hat({1.0}, {0.5}), ZeroDenominator);
  est.update(record(1, 1.0, 0.8));  // denominator > 0, numerator 0
  CHECK(est.q_hat({1.0}, {0.5}) == 0.0);
  CHECK_THROWS_AS(est.q_hat({2.0}, {1.0}), ZeroDenominator);
  CHECK_THROWS_AS(est.q_hat({1.5}, {0.5}), std::invalid_argument);
  CHECK_THROWS_AS(est.q_hat({1.0}, {0.6}), std::invalid_argument);
  est.update(record(2, 2.5, 1.0));
  CHECK(est.p_hat({2.0}) == 0.0);
  CHECK(est.h_hat({2.0}, {1.0}) == 0.0);
}

TEST_CASE("q_ratio is scale free", "[estimator][q_hat]") {
  Philox4x32 rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double num = 100 * uniform01(rng);
    const double den = 100 * uniform01(rng);
    const double c = std::exp(20 * uniform01(rng) - 10);
    REQUIRE(q_ratio(c * num, c * den) == Catch::Approx(q_ratio(num, den)).epsilon(1e-15));
  }
  CHECK_THROWS_AS(q_ratio(1.0, 0.0), ZeroDenominator);
}

TEST_CASE("streaming equals the from-scratch sums", "[estimator][batch]") {
  const auto model = make_cell_model();
  const auto traj = simulate(model, Point<1>{1.0}, 10000, 21);
  auto est = fresh();
  est.register_pair({1.0}, {0.5});
  est.register_pair({2.0}, {1.0});
  std::vector<JumpRecord<1>> seen;
  for (const auto& r : traj.records) {
    est.update(r);
    seen.push_back(r);
    if (seen.size() % 2500 == 0) {
      for (auto [x, y] : {std::pair{1.0, 0.5}, std::pair{2.0, 1.0}}) {
        const auto ref = batch(seen, x, y, 0.1, 0.125, 0.1, 0.1);
        CHECK(std::fabs(est.denominator_sum({x}) - (double)ref.denominator) <= 1e-12 * (double)ref.denominator);
        CHECK(std::fabs(est.numerator_sum({x}, {y}) - (double)ref.numerator) <= 1e-12 * (double)ref.numerator);
      }
    }
  }
}

TEST_CASE("p_hat integrates to (n+1)/n away from the boundary", "[estimator][p_hat]") {
  using Model = PdmpModel<1, Still, UnitRate, UniformReset>;
  const Model model{Box<1>({0.0}, {10.0}), Still{}, UnitRate{}, UniformReset{}};
  const auto traj = simulate(model, Point<1>{5.0}, 400, 3);
  EstimatorState<1> est(model.space, KernelFn<1>::epanechnikov(), BandwidthSchedule(0.2, 0.2),
                        BandwidthSchedule(0.2, 0.1));
  const auto xs = linspace(3.5, 6.5, 6001);
  std::vector<Point<1>> grid;
  for (double x : xs) grid.push_back({x});
  est.register_marginal_grid(grid);
  for (const auto& r : traj.records) est.update(r);
  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    integral += 0.5 * (xs[i + 1] - xs[i]) * (est.p_hat(grid[i]) + est.p_hat(grid[i + 1]));
  }
  const double n = static_cast<double>(est.n());
  CHECK(std::fabs(integral - (n + 1) / n) <= 1e-3);
}
