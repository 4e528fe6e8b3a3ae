#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "pdmp/errors.hpp"
#include "pdmp/geometry.hpp"

namespace pdmp {

enum class KernelKind { epanechnikov, uniform, triangular, quartic, custom };

/// Integral of g over [-radius, radius], split at 0 so kinks there are nodes.
inline double integrate_symmetric(const std::function<double(double)>& g, double radius) {
  using boost::math::quadrature::gauss_kronrod;
  double err = 0.0;
  const double left = gauss_kronrod<double, 61>::integrate(g, -radius, 0.0, 15, 1e-14, &err);
  const double right = gauss_kronrod<double, 61>::integrate(g, 0.0, radius, 15, 1e-14, &err);
  return left + right;
}

/// Compactly supported, bounded, unit-mass kernel on R^D.
///
/// For D > 1 the kernel is the coordinate product of a 1-d base kernel, so
/// K vanishes as soon as one |u_i| reaches the base radius and the support
/// lies in the Euclidean ball of radius delta * sqrt(D).
template <std::size_t D>
class KernelFn {
 public:
  /// Built-in kernel by name. Gaussian (and anything unknown) is rejected:
  /// the estimators need a bounded support.
  static KernelFn named(std::string_view name) {
    if (name == "epanechnikov") return KernelFn(KernelKind::epanechnikov, std::string(name), 1.0, 0.75, 0.6);
    if (name == "uniform") return KernelFn(KernelKind::uniform, std::string(name), 1.0, 0.5, 0.5);
    if (name == "triangular") return KernelFn(KernelKind::triangular, std::string(name), 1.0, 1.0, 2.0 / 3.0);
    if (name == "quartic") return KernelFn(KernelKind::quartic, std::string(name), 1.0, 15.0 / 16.0, 5.0 / 7.0);
    if (name == "gaussian") {
      throw ConfigError("kernel 'gaussian' has unbounded support; use a compactly supported kernel");
    }
    throw ConfigError("unknown kernel '" + std::string(name) + "'");
  }

  static KernelFn epanechnikov() { return named("epanechnikov"); }

  /// User kernel from a 1-d base supported in (-radius, radius). Its mass
  /// must be 1 to within 1e-8; sup-norm and tau^2 come from quadrature.
  static KernelFn custom(std::function<double(double)> base, double radius, std::string name = "custom") {
    if (!(radius > 0.0)) throw std::invalid_argument("kernel radius must be positive");
    auto clipped = [base, radius](double u) { return std::fabs(u) < radius ? base(u) : 0.0; };
    const double mass = integrate_symmetric(clipped, radius);
    if (std::fabs(mass - 1.0) > 1e-8) {
      throw std::invalid_argument("kernel must integrate to 1 (got " + std::to_string(mass) + ")");
    }
    const double tau2 = integrate_symmetric([&](double u) { return clipped(u) * clipped(u); }, radius);
    double sup = 0.0;
    constexpr int kProbe = 20001;
    for (int i = 0; i < kProbe; ++i) {
      const double u = -radius + 2.0 * radius * i / (kProbe - 1);
      const double k = clipped(u);
      if (k < 0.0) throw std::invalid_argument("kernel must be nonnegative");
      sup = std::max(sup, k);
    }
    KernelFn out(KernelKind::custom, std::move(name), radius, sup, tau2);
    out.custom_ = std::move(clipped);
    return out;
  }

  /// 1-d base kernel K_1(u).
  double base(double u) const {
    const double a = std::fabs(u);
    if (a >= radius_) return 0.0;
    switch (kind_) {
      case KernelKind::epanechnikov: return 0.75 * (1.0 - u * u);
      case KernelKind::uniform: return 0.5;
      case KernelKind::triangular: return 1.0 - a;
      case KernelKind::quartic: {
        const double t = 1.0 - u * u;
        return (15.0 / 16.0) * t * t;
      }
      case KernelKind::custom: return custom_(u);
    }
    return 0.0;
  }

  double operator()(const Point<D>& u) const {
    double k = 1.0;
    for (std::size_t i = 0; i < D; ++i) {
      k *= base(u[i]);
      if (k == 0.0) return 0.0;
    }
    return k;
  }

  /// Radius delta of the Euclidean ball containing supp K.
  double support_radius() const {
    if constexpr (D == 1) {
      return radius_;
    } else {
      return radius_ * std::sqrt(static_cast<double>(D));
    }
  }
  double base_radius() const { return radius_; }
  double sup_norm() const { return std::pow(base_sup_, static_cast<double>(D)); }
  /// tau^2 = integral of K^2 over R^D.
  double tau2() const { return std::pow(base_tau2_, static_cast<double>(D)); }
  KernelKind kind() const { return kind_; }
  const std::string& name() const { return name_; }

 private:
  KernelFn(KernelKind kind, std::string name, double radius, double sup, double tau2)
      : kind_(kind), name_(std::move(name)), radius_(radius), base_sup_(sup), base_tau2_(tau2) {}

  KernelKind kind_;
  std::string name_;
  double radius_;
  double base_sup_;
  double base_tau2_;
  std::function<double(double)> custom_;
};

/// Power-law bandwidths c1 * j^(-exponent), j >= 1.
class BandwidthSchedule {
 public:
  BandwidthSchedule(double initial, double exponent) : initial_(initial), exponent_(exponent) {
    if (!(initial > 0.0) || !(exponent > 0.0)) {
      throw std::invalid_argument("bandwidth schedule needs a positive initial value and exponent");
    }
  }

  double operator()(std::size_t j) const {
    if (j == 0) throw std::invalid_argument("bandwidth index starts at 1");
    return initial_ * std::pow(static_cast<double>(j), -exponent_);
  }

  double initial() const { return initial_; }
  double exponent() const { return exponent_; }

 private:
  double initial_;
  double exponent_;
};

}  // namespace pdmp
