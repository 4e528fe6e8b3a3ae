#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdmp/errors.hpp"
#include "pdmp/geometry.hpp"
#include "pdmp/random.hpp"

namespace pdmp {

/// Sentinel for "the flow never reaches the boundary".
inline constexpr double kNever = std::numeric_limits<double>::infinity();

// Deterministic motion. `apply(x, t)` is Phi_x(t) and must satisfy the
// semigroup law; `jacobian(x, t)` is |det d Phi_x(t) / dx|.
template <class F, std::size_t D>
concept FlowSpec = requires(const F& f, const Point<D>& x, double t) {
  { f.apply(x, t) } -> std::convertible_to<Point<D>>;
  { f.jacobian(x, t) } -> std::convertible_to<double>;
};

template <class F, std::size_t D>
concept HasExitTime = requires(const F& f, const Point<D>& x) {
  { f.exit_time(x) } -> std::convertible_to<double>;
};

template <class F, std::size_t D>
concept HasReverseExitTime = requires(const F& f, const Point<D>& x) {
  { f.reverse_exit_time(x) } -> std::convertible_to<double>;
};

// Law of the inter-jump time along the flow from z, ignoring the boundary:
// survival G(z, t), density f(z, t) = -dG/dt, and the inverse of t -> G(z, t).
template <class J, std::size_t D>
concept JumpLaw = requires(const J& j, const Point<D>& z, double t) {
  { j.survival(z, t) } -> std::convertible_to<double>;
  { j.density(z, t) } -> std::convertible_to<double>;
  { j.inverse_survival(z, t) } -> std::convertible_to<double>;
};

template <class Q, std::size_t D>
concept TransitionLaw = requires(const Q& q, const Point<D>& x, Philox4x32& rng) {
  { q.density(x, x) } -> std::convertible_to<double>;
  { q.draw(x, rng) } -> std::convertible_to<Point<D>>;
};

/// Optional: the box outside of which q(x, .) vanishes.
template <class Q, std::size_t D>
concept HasSupport = requires(const Q& q, const Point<D>& x) {
  { q.support(x) } -> std::convertible_to<Box<D>>;
};

/// Optional: an upper bound on y -> q(x, y).
template <class Q, std::size_t D>
concept HasDensityBound = requires(const Q& q, const Point<D>& x) {
  { q.density_bound(x) } -> std::convertible_to<double>;
};

template <std::size_t D, FlowSpec<D> Flow, JumpLaw<D> Jumps, TransitionLaw<D> Transitions>
struct PdmpModel {
  static constexpr std::size_t dimension = D;
  using flow_type = Flow;
  using jump_law_type = Jumps;
  using transition_law_type = Transitions;

  Box<D> space;
  Flow flow;
  Jumps jumps;
  Transitions transitions;
};

template <std::size_t D>
struct JumpRecord {
  std::size_t index = 0;  // 1-based
  double time = 0.0;      // T_n
  double interval = 0.0;  // S_n
  Point<D> pre{};         // Z_n^-
  Point<D> post{};        // Z_n
  bool forced = false;

  bool operator==(const JumpRecord&) const = default;
};

template <std::size_t D>
struct Trajectory {
  Point<D> x0{};
  std::vector<JumpRecord<D>> records;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  bool operator==(const Trajectory&) const = default;
};

struct InterJump {
  double interval;
  bool forced;
};

namespace detail {

inline constexpr double kExitBracketStart = 1e-6;
inline constexpr double kExitBracketCap = 1e6;
inline constexpr double kExitBisectionTol = 1e-12;

// First t in (0, cap] (times `direction`) at which the flow leaves the open box.
template <std::size_t D, class Flow>
double first_exit(const Flow& flow, const Box<D>& space, const Point<D>& x, double direction) {
  double inside = 0.0;
  double probe = kExitBracketStart;
  while (space.contains(flow.apply(x, direction * probe))) {
    inside = probe;
    if (probe >= kExitBracketCap) return kNever;
    probe = std::min(2.0 * probe, kExitBracketCap);
  }
  double outside = probe;
  while (outside - inside > kExitBisectionTol) {
    const double mid = 0.5 * (inside + outside);
    if (mid <= inside || mid >= outside) break;
    if (space.contains(flow.apply(x, direction * mid))) {
      inside = mid;
    } else {
      outside = mid;
    }
  }
  return outside;
}

}  // namespace detail

/// t+(x): first positive time at which the flow from x hits the boundary.
template <std::size_t D, FlowSpec<D> Flow>
double exit_time(const Flow& flow, const Box<D>& space, const Point<D>& x) {
  if (!space.contains(x)) {
    throw std::invalid_argument("exit_time: starting point must lie in the open state space");
  }
  if constexpr (HasExitTime<Flow, D>) {
    return flow.exit_time(x);
  } else {
    return detail::first_exit(flow, space, x, 1.0);
  }
}

/// t-(x) <= 0: exit time of the reverse flow, or -kNever if it never exits.
template <std::size_t D, FlowSpec<D> Flow>
double reverse_exit_time(const Flow& flow, const Box<D>& space, const Point<D>& x) {
  if (!space.contains(x)) {
    throw std::invalid_argument("reverse_exit_time: point must lie in the open state space");
  }
  if constexpr (HasReverseExitTime<Flow, D>) {
    return flow.reverse_exit_time(x);
  } else {
    return -detail::first_exit(flow, space, x, -1.0);
  }
}

/// Draws S from the mixed law: density f on [0, t_plus) plus an atom of mass
/// G(z, t_plus) at t_plus. One uniform is consumed; the atom is tested first
/// so that the same uniform feeds G^-1 on the continuous branch.
template <std::size_t D, JumpLaw<D> Jumps, class Engine>
InterJump sample_interjump(const Jumps& jumps, const Point<D>& z, double t_plus, Engine& rng) {
  const double atom = jumps.survival(z, t_plus);
  if (!std::isfinite(atom) || atom < 0.0 || atom > 1.0) {
    throw ModelError("sample_interjump: survival at the exit time is not a probability");
  }
  const double u = uniform01(rng);
  if (u < atom) {
    if (t_plus == kNever) {
      throw ModelError("sample_interjump: no jump ever occurs (positive survival at infinity)");
    }
    return {t_plus, true};
  }
  double s = jumps.inverse_survival(z, u);
  if (!(s >= 0.0) || std::isnan(s)) {
    throw ModelError("sample_interjump: inverse survival returned an invalid time");
  }
  if (!(s < t_plus)) s = std::nextafter(t_plus, 0.0);
  if (s == 0.0) s = std::numeric_limits<double>::denorm_min();
  return {s, false};
}

/// Streaming simulator: each call to `next()` produces the following jump.
template <class Model, class Engine = Philox4x32>
class Simulator {
 public:
  static constexpr std::size_t D = Model::dimension;

  Simulator(const Model& model, const Point<D>& x0, Engine rng)
      : model_(&model), rng_(std::move(rng)), position_(x0) {
    if (!model.space.contains(x0)) {
      throw std::invalid_argument("simulate: initial point must lie in the open state space");
    }
  }

  JumpRecord<D> next() {
    const Model& m = *model_;
    const double t_plus = exit_time(m.flow, m.space, position_);
    auto [s, forced] = sample_interjump<D>(m.jumps, position_, t_plus, rng_);

    Point<D> pre = m.flow.apply(position_, s);
    if (!forced && (!m.space.contains(pre) || m.space.on_boundary(pre))) {
      // Rounding put a random jump on the face: record it as the forced one.
      if (!m.space.on_boundary(pre) || t_plus == kNever) {
        throw ModelError("simulate: flow left the state space before the exit time");
      }
      forced = true;
      s = t_plus;
      pre = m.flow.apply(position_, s);
    }
    if (forced) {
      if (!m.space.on_boundary(pre)) {
        throw ModelError("simulate: flow is not on the boundary at its exit time");
      }
      pre = m.space.snap_to_boundary(pre);
    }

    const Point<D> post = m.transitions.draw(pre, rng_);
    if (!m.space.contains(post)) {
      throw ModelError("simulate: post-jump location " + describe(post) +
                       " lies outside the state space");
    }

    time_ += s;
    ++count_;
    position_ = post;
    return JumpRecord<D>{count_, time_, s, pre, post, forced};
  }

  const Point<D>& position() const { return position_; }
  std::size_t jumps() const { return count_; }

 private:
  static std::string describe(const Point<D>& p) {
    std::string out = "(";
    for (std::size_t i = 0; i < D; ++i) {
      if (i) out += ", ";
      out += std::to_string(p[i]);
    }
    return out + ")";
  }

  const Model* model_;
  Engine rng_;
  Point<D> position_;
  double time_ = 0.0;
  std::size_t count_ = 0;
};

/// Simulates `n_jumps` jumps from x0 using stream (seed, stream).
template <class Model>
Trajectory<Model::dimension> simulate(const Model& model, const Point<Model::dimension>& x0,
                                      std::size_t n_jumps, std::uint64_t seed,
                                      std::uint64_t stream = 0) {
  if (n_jumps == 0) throw std::invalid_argument("simulate: n_jumps must be at least 1");
  Simulator<Model> sim(model, x0, Philox4x32(seed, stream));
  Trajectory<Model::dimension> traj{x0, {}, seed, stream};
  traj.records.reserve(n_jumps);
  for (std::size_t i = 0; i < n_jumps; ++i) traj.records.push_back(sim.next());
  return traj;
}

}  // namespace pdmp
