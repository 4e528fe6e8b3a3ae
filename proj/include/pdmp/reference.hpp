#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "pdmp/compensated_sum.hpp"
#include "pdmp/core.hpp"
#include "pdmp/io.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/geometry.hpp"

namespace pdmp {

struct QuadratureSpec {
  double abs_tolerance = 1e-10;
  double rel_tolerance = 1e-9;
  std::size_t max_refinements = 15;
  // Upper limit used in place of an infinite reverse exit time.
  double horizon = 40.0;
  // Grid used to locate the edges of the integrand's support.
  std::size_t scan_points = 1024;

  void validate() const {
    if (!(abs_tolerance > 0.0) || !(rel_tolerance > 0.0)) {
      throw std::invalid_argument("quadrature tolerances must be positive");
    }
    if (!(horizon > 0.0)) throw std::invalid_argument("quadrature horizon must be positive");
    if (scan_points < 2) throw std::invalid_argument("quadrature needs at least 2 scan points");
  }
};

struct QuadratureValue {
  double value = 0.0;
  double error = 0.0;
  // Bound on the integral beyond the horizon (0 when nothing was truncated).
  double tail_bound = 0.0;
  double horizon = 0.0;
};

namespace detail {

struct PieceResult {
  double value = 0.0;
  double error = 0.0;
};

template <class F>
PieceResult integrate_piece(const F& f, double a, double b, const QuadratureSpec& quad) {
  if (!(b > a)) return {};
  // Slivers left between two nearby edges: one-point rule, whole value as error.
  if (b - a <= 1e-12 * std::max(1.0, std::fabs(b))) {
    const double value = (b - a) * f(0.5 * (a + b));
    return {value, std::fabs(value)};
  }
  boost::math::quadrature::tanh_sinh<double> integrator(quad.max_refinements);
  double error = 0.0;
  double l1 = 0.0;
  // The level-difference estimate lags the true error; aim below the acceptance level.
  const double target = std::max(quad.rel_tolerance * 1e-3, 1e-14);
  const double value = integrator.integrate(f, a, b, target, &error, &l1);
  if (!(error <= quad.abs_tolerance || error <= quad.rel_tolerance * l1 * 10.0)) {
    throw QuadratureError("quadrature did not converge on [" + io::format_double(a) + ", " +
                          io::format_double(b) + "]: error estimate " + io::format_double(error) +
                          ", L1 " + io::format_double(l1));
  }
  return {value, error};
}

/// Integrates f over [0, length] on the pieces where `active` holds; the
/// edges between active and inactive stretches are located by bisection
/// from a uniform scan, so tanh-sinh only ever sees smooth pieces.
template <class F, class Active>
PieceResult integrate_on_support(const F& f, const Active& active, double length,
                                 const QuadratureSpec& quad) {
  std::vector<double> edges{0.0};
  bool prev = active(0.0);
  double prev_s = 0.0;
  for (std::size_t k = 1; k <= quad.scan_points; ++k) {
    const double s = length * static_cast<double>(k) / static_cast<double>(quad.scan_points);
    const bool now = active(s);
    if (now != prev) {
      double lo = prev_s;
      double hi = s;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, length); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (active(mid) == prev) lo = mid; else hi = mid;
      }
      edges.push_back(0.5 * (lo + hi));
    }
    prev = now;
    prev_s = s;
  }
  edges.push_back(length);

  PieceResult total;
  CompensatedSum sum;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double a = edges[i];
    const double b = edges[i + 1];
    if (!(b > a) || !active(0.5 * (a + b))) continue;
    const PieceResult piece = integrate_piece(f, a, b, quad);
    sum += piece.value;
    total.error += piece.error;
  }
  total.value = sum.value();
  return total;
}

}  // namespace detail

/// Density r(y, z) of the next pre-jump location z given the previous
/// pre-jump location y, integrating q(y, Phi_z(-s)) f(Phi_z(-s), s) DPhi_z(-s)
/// over the backward orbit of z. An infinite reverse exit time is cut at
/// `quad.horizon`, and a bound on the discarded tail is reported.
template <class Model>
QuadratureValue r_density(const Model& model, const Point<Model::dimension>& y,
                          const Point<Model::dimension>& z, const QuadratureSpec& quad = {}) {
  constexpr std::size_t D = Model::dimension;
  quad.validate();
  if (!model.space.contains_closure(y)) throw std::invalid_argument("r_density: y must lie in the closed state space");
  if (!model.space.contains(z)) throw std::invalid_argument("r_density: z must lie in the open state space");

  const double back = -reverse_exit_time(model.flow, model.space, z);
  const bool truncated = !(back <= quad.horizon);
  const double length = truncated ? quad.horizon : back;

  auto origin = [&](double s) { return model.flow.apply(z, -s); };
  auto integrand = [&](double s) {
    const Point<D> xi = origin(s);
    if (!model.space.contains(xi)) return 0.0;
    const double qv = model.transitions.density(y, xi);
    if (qv == 0.0) return 0.0;
    return qv * model.jumps.density(xi, s) * model.flow.jacobian(z, -s);
  };

  auto active = [&](double s) {
    const Point<D> xi = origin(s);
    if constexpr (HasSupport<typename Model::transition_law_type, D>) {
      return model.space.contains(xi) && model.transitions.support(y).contains(xi);
    } else {
      return integrand(s) > 0.0;
    }
  };

  const detail::PieceResult main = detail::integrate_on_support(integrand, active, length, quad);
  QuadratureValue out{main.value, main.error, 0.0, length};

  if (truncated) {
    auto bound = [&](double s) {
      const Point<D> xi = origin(s);
      if (!model.space.contains(xi)) return 0.0;
      double qmax;
      if constexpr (HasDensityBound<typename Model::transition_law_type, D>) {
        qmax = model.transitions.density_bound(y);
      } else {
        qmax = model.transitions.density(y, xi);
      }
      return qmax * model.jumps.density(xi, s) * model.flow.jacobian(z, -s);
    };
    auto anywhere = [&](double s) { return model.space.contains(origin(s)); };
    const double h = quad.horizon;
    auto shifted = [&](double s) { return bound(h + s); };
    auto shifted_active = [&](double s) { return anywhere(h + s); };
    out.tail_bound = detail::integrate_on_support(shifted, shifted_active, 3.0 * h, quad).value;
  }
  return out;
}

/// Probability that the jump after a pre-jump location y is forced:
/// E[G(Z, t+(Z))] with Z ~ Q(y, .). One-dimensional models only.
template <class Model>
  requires(Model::dimension == 1 && HasSupport<typename Model::transition_law_type, 1>)
double forced_mass(const Model& model, const Point<1>& y, const QuadratureSpec& quad = {}) {
  const Box<1> window = model.transitions.support(y);
  const double a = std::max(window.lower()[0], model.space.lower()[0]);
  const double b = std::min(window.upper()[0], model.space.upper()[0]);
  auto g = [&](double z) {
    const Point<1> p{z};
    if (!model.space.contains(p)) return 0.0;
    return model.transitions.density(y, p) *
           model.jumps.survival(p, exit_time(model.flow, model.space, p));
  };
  return detail::integrate_piece(g, a, b, quad).value;
}

/// Ergodic-average plug-in for p(x) = int pi(dy) r(y, x): the mean of
/// r(Z_j^-, x) over the trajectory's pre-jump chain.
template <class Model>
double p_ergodic(const Model& model, const Trajectory<Model::dimension>& traj,
                 const Point<Model::dimension>& x, const QuadratureSpec& quad = {}) {
  if (traj.records.empty()) throw std::invalid_argument("p_ergodic: empty trajectory");
  if (!model.space.contains(x)) throw std::invalid_argument("p_ergodic: x must lie in the open state space");
  CompensatedSum sum;
  for (const auto& rec : traj.records) sum += r_density(model, rec.pre, x, quad).value;
  return sum.value() / static_cast<double>(traj.records.size());
}

/// Asymptotic variance q^2 tau^2 / (p (1 + alpha d) v1^d) of the error
/// rescaled by n^{(1 - alpha d)/2}, for bandwidths v_j = v1 j^-alpha.
inline double clt_variance(double q_val, double p_val, double tau2, double alpha, double v1, std::size_t d) {
  if (!(p_val > 0.0)) throw std::invalid_argument("clt_variance: p must be positive");
  if (!(v1 > 0.0)) throw std::invalid_argument("clt_variance: v1 must be positive");
  const double dd = static_cast<double>(d);
  return q_val * q_val * tau2 / (p_val * (1.0 + alpha * dd) * std::pow(v1, dd));
}

}  // namespace pdmp
