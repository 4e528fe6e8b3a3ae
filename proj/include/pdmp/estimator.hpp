#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdmp/compensated_sum.hpp"
#include "pdmp/core.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/geometry.hpp"
#include "pdmp/kernel.hpp"

namespace pdmp {

/// q_hat as the raw ratio of the two kernel sums; the 1/n factors cancel.
inline double q_ratio(double numerator, double denominator) {
  if (denominator == 0.0) {
    throw ZeroDenominator("no pre-jump location observed near x yet");
  }
  return numerator / denominator;
}

/// Recursive kernel estimators of p (pre-jump invariant density),
/// h = p q and q = h / p at targets fixed before the first record.
///
/// After m records the sums run over j = 1..m and reads divide by
/// n = m - 1, matching the n + 1 terms of the recursive formulas. The
/// denominator depends on x only, so every y registered under the same x
/// shares one denominator accumulator.
template <std::size_t D>
class EstimatorState {
 public:
  EstimatorState(Box<D> space, KernelFn<D> kernel, BandwidthSchedule v, BandwidthSchedule w)
      : space_(std::move(space)), kernel_(std::move(kernel)), v_(v), w_(w) {}

  void register_pair(const Point<D>& x, const Point<D>& y) {
    Node& node = node_for(x);
    check_point(y, "y");
    if (!node.column_index.contains(y)) {
      node.column_index.emplace(y, node.columns.size());
      node.columns.push_back(Column{y, {}});
    }
  }

  void register_marginal(const Point<D>& x) { node_for(x); }

  void register_curve(const Point<D>& x, std::span<const Point<D>> ys) {
    for (const auto& y : ys) register_pair(x, y);
    if (ys.empty()) node_for(x);
  }

  void register_marginal_grid(std::span<const Point<D>> xs) {
    for (const auto& x : xs) node_for(x);
  }

  /// Adds record j = m + 1 to every accumulator.
  void update(const JumpRecord<D>& rec) {
    if (rec.index != records_ + 1) {
      throw std::invalid_argument("estimator update out of order: expected record " +
                                  std::to_string(records_ + 1) + ", got " +
                                  std::to_string(rec.index));
    }
    const std::size_t j = rec.index;
    const double vj = v_(j);
    const double wj = w_(j);
    const double dim = static_cast<double>(D);
    const double v_scale = std::pow(vj, -dim);
    const double w_scale = std::pow(wj, -2.0 * dim);
    // Supports shrink with j, so the j = 1 balls bound every later one.
    const double v_reach = kernel_.support_radius() * v_.initial();
    const double w_reach = kernel_.support_radius() * w_.initial();

    for (Node& node : nodes_) {
      const double gap = distance(rec.pre, node.x);
      if (gap < v_reach) {
        const double k = kernel_((rec.pre - node.x) / vj);
        if (k != 0.0) node.denominator += v_scale * k;
      }
      if (gap < w_reach && !node.columns.empty()) {
        const double kx = kernel_((rec.pre - node.x) / wj);
        if (kx == 0.0) continue;
        for (Column& col : node.columns) {
          const double ky = kernel_((rec.post - col.y) / wj);
          if (ky != 0.0) col.numerator += w_scale * kx * ky;
        }
      }
    }
    ++records_;
  }

  /// Records consumed (m).
  std::size_t records() const { return records_; }
  /// Observed jump count n = m - 1 used for normalization.
  std::size_t n() const { return records_ == 0 ? 0 : records_ - 1; }

  double denominator_sum(const Point<D>& x) const { return find_node(x).denominator.value(); }
  double numerator_sum(const Point<D>& x, const Point<D>& y) const {
    return find_column(find_node(x), y).numerator.value();
  }

  double p_hat(const Point<D>& x) const {
    require_two_records();
    return denominator_sum(x) / static_cast<double>(n());
  }

  double h_hat(const Point<D>& x, const Point<D>& y) const {
    require_two_records();
    return numerator_sum(x, y) / static_cast<double>(n());
  }

  double q_hat(const Point<D>& x, const Point<D>& y) const {
    const Node& node = find_node(x);
    return q_ratio(find_column(node, y).numerator.value(), node.denominator.value());
  }

  std::vector<double> q_hat_curve(const Point<D>& x, std::span<const Point<D>> ys) const {
    const Node& node = find_node(x);
    std::vector<double> out;
    out.reserve(ys.size());
    if (ys.empty()) return out;
    const double den = node.denominator.value();
    for (const auto& y : ys) out.push_back(q_ratio(find_column(node, y).numerator.value(), den));
    return out;
  }

  /// Distinct x locations (each with one shared denominator).
  std::size_t location_count() const { return nodes_.size(); }
  std::size_t pair_count() const {
    std::size_t total = 0;
    for (const auto& node : nodes_) total += node.columns.size();
    return total;
  }

  /// Support-condition and boundary warnings raised at registration.
  const std::vector<std::string>& warnings() const { return warnings_; }

  const KernelFn<D>& kernel() const { return kernel_; }
  const BandwidthSchedule& v_schedule() const { return v_; }
  const BandwidthSchedule& w_schedule() const { return w_; }
  const Box<D>& space() const { return space_; }

 private:
  struct Column {
    Point<D> y;
    CompensatedSum numerator;
  };
  struct Node {
    Point<D> x;
    CompensatedSum denominator;
    std::vector<Column> columns;
    std::map<Point<D>, std::size_t> column_index;
  };

  void check_point(const Point<D>& p, const char* what) const {
    if (!space_.contains(p)) {
      throw std::invalid_argument(std::string("target coordinate ") + what +
                                  " lies outside the open state space");
    }
  }

  Node& node_for(const Point<D>& x) {
    if (records_ != 0) {
      throw std::logic_error("targets must be registered before the first update");
    }
    check_point(x, "x");
    if (auto it = node_index_.find(x); it != node_index_.end()) return nodes_[it->second];
    const double reach = std::max(v_.initial(), w_.initial()) * kernel_.support_radius();
    const double room = space_.distance_to_boundary(x);
    if (!(reach < room)) {
      std::ostringstream msg;
      msg << "target x=" << x[0] << (D > 1 ? ",..." : "") << ": max(v1,w1)*delta = " << reach
          << " is not below dist(x, boundary) = " << room
          << "; consistency guarantees do not apply";
      warnings_.push_back(msg.str());
    }
    node_index_.emplace(x, nodes_.size());
    nodes_.push_back(Node{x, {}, {}, {}});
    return nodes_.back();
  }

  const Node& find_node(const Point<D>& x) const {
    auto it = node_index_.find(x);
    if (it == node_index_.end()) throw std::invalid_argument("x is not a registered target");
    return nodes_[it->second];
  }

  static const Column& find_column(const Node& node, const Point<D>& y) {
    auto it = node.column_index.find(y);
    if (it == node.column_index.end()) throw std::invalid_argument("(x, y) is not a registered target");
    return node.columns[it->second];
  }

  void require_two_records() const {
    if (records_ < 2) throw std::logic_error("p_hat/h_hat need at least two records (n >= 1)");
  }

  Box<D> space_;
  KernelFn<D> kernel_;
  BandwidthSchedule v_;
  BandwidthSchedule w_;
  std::vector<Node> nodes_;
  std::map<Point<D>, std::size_t> node_index_;
  std::size_t records_ = 0;
  std::vector<std::string> warnings_;
};

}  // namespace pdmp
