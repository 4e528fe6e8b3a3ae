#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/erf.hpp>

#include "pdmp/core.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/geometry.hpp"
#include "pdmp/random.hpp"

namespace pdmp {

inline double standard_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double standard_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal quantile needs p in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

/// Growth-fragmentation cell size model on E = (0, 3).
struct CellModelParams {
  double tau_flow = 0.9;
  double sigma = 0.1;

  static constexpr double upper = 3.0;

  void validate() const {
    if (!(tau_flow > 0.0)) throw ConfigError("tau_flow must be positive");
    if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
    if (!(2.0 * sigma < upper)) throw ConfigError("sigma must satisfy 2 sigma < 3");
  }
};

/// Exponential growth x e^{tau t}.
class CellFlow {
 public:
  explicit CellFlow(double rate) : rate_(rate) {}

  Point<1> apply(const Point<1>& x, double t) const { return {x[0] * std::exp(rate_ * t)}; }
  double jacobian(const Point<1>&, double t) const { return std::exp(rate_ * t); }
  double exit_time(const Point<1>& x) const { return std::log(CellModelParams::upper / x[0]) / rate_; }
  // Backward orbits decay towards 0 without reaching it.
  double reverse_exit_time(const Point<1>&) const { return -kNever; }

  double rate() const { return rate_; }

 private:
  double rate_;
};

/// Weibull inter-division times with shape 1/x and unit scale:
/// G(x, t) = exp(-t^{1/x}).
class CellJumpLaw {
 public:
  double survival(const Point<1>& z, double t) const {
    if (t <= 0.0) return 1.0;
    if (t == kNever) return 0.0;
    return std::exp(-std::pow(t, 1.0 / z[0]));
  }

  // Evaluated in log space so that t^{(1-x)/x} overflow never meets exp(-inf).
  double density(const Point<1>& z, double t) const {
    const double x = z[0];
    if (t < 0.0 || t == kNever) return 0.0;
    if (t == 0.0) {
      if (x > 1.0) return std::numeric_limits<double>::infinity();
      return x == 1.0 ? 1.0 : 0.0;
    }
    const double log_t = std::log(t);
    const double log_f = (1.0 - x) / x * log_t - std::exp(log_t / x) - std::log(x);
    return std::exp(log_f);
  }

  double inverse_survival(const Point<1>& z, double u) const { return std::pow(-std::log(u), z[0]); }
};

/// Gaussian N(x/2, sigma^2) truncated to (x/2 - sigma, x/2 + sigma) inside E.
class CellTransitionLaw {
 public:
  explicit CellTransitionLaw(double sigma) : sigma_(sigma) {}

  Box<1> support(const Point<1>& x) const {
    const double mean = 0.5 * x[0];
    return Box<1>({std::max(mean - sigma_, 0.0)}, {std::min(mean + sigma_, CellModelParams::upper)});
  }

  /// Gaussian mass of the truncation window, in standard units.
  double window_mass(const Point<1>& x) const {
    const auto [a, b] = standard_window(x);
    return standard_normal_cdf(b) - standard_normal_cdf(a);
  }

  double density(const Point<1>& x, const Point<1>& y) const {
    const Box<1> window = support(x);
    if (!window.contains(y)) return 0.0;
    const double z = (y[0] - 0.5 * x[0]) / sigma_;
    return standard_normal_pdf(z) / (sigma_ * window_mass(x));
  }

  double density_bound(const Point<1>& x) const {
    return standard_normal_pdf(0.0) / (sigma_ * window_mass(x));
  }

  double cdf(const Point<1>& x, double y) const {
    const Box<1> window = support(x);
    if (y <= window.lower()[0]) return 0.0;
    if (y >= window.upper()[0]) return 1.0;
    const auto [a, b] = standard_window(x);
    const double lo = standard_normal_cdf(a);
    return (standard_normal_cdf((y - 0.5 * x[0]) / sigma_) - lo) / (standard_normal_cdf(b) - lo);
  }

  /// Inverse-CDF draw; a result on the window edge (or equal to x) is redrawn.
  template <class Engine>
  Point<1> draw(const Point<1>& x, Engine& rng) const {
    const Box<1> window = support(x);
    const auto [a, b] = standard_window(x);
    const double lo = standard_normal_cdf(a);
    const double hi = standard_normal_cdf(b);
    for (int attempt = 0; attempt < kMaxDraws; ++attempt) {
      const double p = lo + uniform01(rng) * (hi - lo);
      const Point<1> y{0.5 * x[0] + sigma_ * standard_normal_quantile(p)};
      if (window.contains(y) && y != x) return y;
    }
    throw ModelError("cell transition: could not draw inside the truncation window");
  }

  double sigma() const { return sigma_; }

 private:
  static constexpr int kMaxDraws = 1000000;

  std::pair<double, double> standard_window(const Point<1>& x) const {
    const Box<1> window = support(x);
    const double mean = 0.5 * x[0];
    return {(window.lower()[0] - mean) / sigma_, (window.upper()[0] - mean) / sigma_};
  }

  double sigma_;
};

using CellModel = PdmpModel<1, CellFlow, CellJumpLaw, CellTransitionLaw>;

inline CellModel make_cell_model(const CellModelParams& params = {}) {
  params.validate();
  return CellModel{Box<1>({0.0}, {CellModelParams::upper}), CellFlow(params.tau_flow), CellJumpLaw{},
                   CellTransitionLaw(params.sigma)};
}

}  // namespace pdmp
