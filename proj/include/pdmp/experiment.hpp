#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pdmp/cell_model.hpp"
#include "pdmp/core.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/estimator.hpp"
#include "pdmp/io.hpp"
#include "pdmp/kernel.hpp"
#include "pdmp/reference.hpp"
#include "pdmp/stats.hpp"

namespace pdmp {

struct Target {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Target&) const = default;
};

/// Everything a replicated study of the cell model needs. Defaults are the
/// reference parameter set: Epanechnikov kernel, v1 = w1 = 0.1,
/// alpha = 0.125, beta = 0.1, targets (1, 0.5) and (2, 1).
struct ExperimentConfig {
  CellModelParams model{};
  double x0 = 1.0;
  std::vector<Target> targets{{1.0, 0.5}, {2.0, 1.0}};
  std::vector<std::size_t> n_list{5000, 10000, 20000, 50000};
  std::size_t replicates = 100;
  std::string kernel = "epanechnikov";
  double v1 = 0.1;
  double alpha = 0.125;
  double w1 = 0.1;
  double beta = 0.1;
  std::uint64_t seed = 0;
  std::string output = "out";

  // Single-trajectory commands and the CLT study.
  std::size_t n = 50000;
  double x = 1.0;
  double y = 0.5;

  std::vector<double> sweep_alphas{0.125, 0.25, 0.5};
  std::vector<double> sweep_betas{0.1};
  std::size_t sweep_n = 10000;

  double pi_lo = 0.1;
  double pi_hi = 2.9;
  std::size_t pi_points = 57;

  std::size_t curve_points = 512;
  double curve_halfwidth = 0.15;

  void validate() const {
    model.validate();
    const Box<1> space({0.0}, {CellModelParams::upper});
    if (!space.contains({x0})) throw ConfigError("x0 must lie in (0, 3)");
    if (replicates == 0) throw ConfigError("replicates must be at least 1");
    if (n_list.empty()) throw ConfigError("n_list must not be empty");
    for (std::size_t i = 0; i < n_list.size(); ++i) {
      if (n_list[i] == 0) throw ConfigError("n_list entries must be positive");
      if (i > 0 && n_list[i] <= n_list[i - 1]) throw ConfigError("n_list must be strictly ascending");
    }
    if (n == 0 || sweep_n == 0) throw ConfigError("jump counts must be positive");
    for (const auto& t : targets) {
      if (!space.contains({t.x}) || !space.contains({t.y})) throw ConfigError("targets must lie in (0, 3)");
    }
    if (!space.contains({x}) || !space.contains({y})) throw ConfigError("x and y must lie in (0, 3)");
    (void)KernelFn<1>::named(kernel);
    for (double v : {v1, alpha, w1, beta}) {
      if (!(v > 0.0)) throw ConfigError("v1, alpha, w1 and beta must be positive");
    }
    for (double a : sweep_alphas) {
      if (!(a > 0.0)) throw ConfigError("sweep alphas must be positive");
    }
    for (double b : sweep_betas) {
      if (!(b > 0.0)) throw ConfigError("sweep betas must be positive");
    }
    if (!(pi_lo < pi_hi) || !space.contains({pi_lo}) || !space.contains({pi_hi})) {
      throw ConfigError("pi grid must be an increasing range inside (0, 3)");
    }
    if (pi_points == 0) throw ConfigError("pi_points must be positive");
    if (!(curve_halfwidth > 0.0)) throw ConfigError("curve_halfwidth must be positive");
  }
};

/// Warnings (never errors) for bandwidth exponents outside the ranges
/// where consistency (alpha d < 1, 8 beta d < 1) and asymptotic normality
/// (1/(2+d) < alpha < 1/d, 2(1 - alpha d) < 4 beta < min(1/(2d), alpha - 1/(2d)))
/// are guaranteed.
inline std::vector<std::string> bandwidth_warnings(double alpha, double beta, std::size_t d, bool want_clt) {
  std::vector<std::string> out;
  const double dd = static_cast<double>(d);
  auto tag = [&] { return "alpha=" + io::format_double(alpha) + ", beta=" + io::format_double(beta) + ": "; };
  if (!(alpha * dd < 1.0)) out.push_back(tag() + "alpha d < 1 fails; consistency is not guaranteed");
  if (!(8.0 * beta * dd < 1.0)) out.push_back(tag() + "8 beta d < 1 fails; consistency is not guaranteed");
  if (want_clt) {
    const bool alpha_ok = 1.0 / (2.0 + dd) < alpha && alpha < 1.0 / dd;
    const double four_beta = 4.0 * beta;
    const bool beta_ok = 2.0 * (1.0 - alpha * dd) < four_beta &&
                         four_beta < std::min(1.0 / (2.0 * dd), alpha - 1.0 / (2.0 * dd));
    if (!alpha_ok) out.push_back(tag() + "1/(2+d) < alpha < 1/d fails; the CLT is not guaranteed");
    if (!beta_ok) out.push_back(tag() + "2(1 - alpha d) < 4 beta < min(1/(2d), alpha - 1/(2d)) fails; the CLT is not guaranteed");
  }
  return out;
}

struct ReplicateRow {
  std::size_t replicate = 0;
  std::uint64_t stream = 0;
  std::size_t n = 0;
  double x = 0.0;
  double y = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double q_hat = std::nan("");
  double p_hat = std::nan("");
  double h_hat = std::nan("");
  double q_true = std::nan("");
  double rel_error = std::nan("");
  std::string status = "ok";

  bool ok() const { return status == "ok"; }
};

using ReplicateTable = std::vector<ReplicateRow>;

/// Worker count: PDMP_THREADS if set, otherwise the hardware concurrency.
inline std::size_t worker_count() {
  if (const char* env = std::getenv("PDMP_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Results must
/// be written to slots keyed by i; the first exception is rethrown.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                         std::size_t workers = worker_count()) {
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count && !failed; i = next++) {
          try {
            fn(i);
          } catch (...) {
            if (!failed.exchange(true)) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

namespace detail {

struct Arm {
  double alpha;
  double beta;
};

inline EstimatorState<1> make_estimator(const ExperimentConfig& cfg, const Arm& arm) {
  return EstimatorState<1>(Box<1>({0.0}, {CellModelParams::upper}), KernelFn<1>::named(cfg.kernel),
                           BandwidthSchedule(cfg.v1, arm.alpha), BandwidthSchedule(cfg.w1, arm.beta));
}

/// One replicate: a single trajectory feeds one estimator per arm, read at
/// every n in `n_list` (after n + 1 records). Rows come out ordered by
/// n, then arm, then target.
inline std::vector<ReplicateRow> replicate_rows(const ExperimentConfig& cfg, const CellModel& model,
                                                std::size_t replicate, std::span<const Arm> arms,
                                                std::span<const std::size_t> n_list,
                                                std::span<const Target> targets) {
  std::vector<ReplicateRow> rows;
  rows.reserve(n_list.size() * arms.size() * targets.size());
  auto blank = [&](std::size_t n, const Arm& arm, const Target& t) {
    ReplicateRow row;
    row.replicate = replicate;
    row.stream = replicate;
    row.n = n;
    row.x = t.x;
    row.y = t.y;
    row.alpha = arm.alpha;
    row.beta = arm.beta;
    row.q_true = model.transitions.density({t.x}, {t.y});
    return row;
  };

  std::vector<EstimatorState<1>> states;
  states.reserve(arms.size());
  for (const auto& arm : arms) {
    states.push_back(make_estimator(cfg, arm));
    for (const auto& t : targets) states.back().register_pair({t.x}, {t.y});
  }

  std::size_t next_snapshot = 0;
  try {
    Simulator<CellModel> sim(model, {cfg.x0}, Philox4x32(cfg.seed, replicate));
    const std::size_t total = n_list.empty() ? 0 : n_list.back() + 1;
    for (std::size_t m = 1; m <= total; ++m) {
      const JumpRecord<1> rec = sim.next();
      for (auto& st : states) st.update(rec);
      while (next_snapshot < n_list.size() && n_list[next_snapshot] + 1 == m) {
        const std::size_t n = n_list[next_snapshot];
        for (std::size_t a = 0; a < arms.size(); ++a) {
          for (const auto& t : targets) {
            ReplicateRow row = blank(n, arms[a], t);
            const auto& st = states[a];
            row.p_hat = st.p_hat({t.x});
            row.h_hat = st.h_hat({t.x}, {t.y});
            try {
              row.q_hat = st.q_hat({t.x}, {t.y});
              row.rel_error = row.q_true > 0.0 ? std::fabs(row.q_hat - row.q_true) / row.q_true : std::nan("");
            } catch (const ZeroDenominator&) {
              row.status = "zero_denominator";
            }
            rows.push_back(std::move(row));
          }
        }
        ++next_snapshot;
      }
    }
  } catch (const std::exception& e) {
    for (; next_snapshot < n_list.size(); ++next_snapshot) {
      for (const auto& arm : arms) {
        for (const auto& t : targets) {
          ReplicateRow row = blank(n_list[next_snapshot], arm, t);
          row.status = std::string("error: ") + e.what();
          rows.push_back(std::move(row));
        }
      }
    }
  }
  return rows;
}

inline ReplicateTable run_arms(const ExperimentConfig& cfg, std::span<const Arm> arms,
                               std::span<const std::size_t> n_list, std::span<const Target> targets,
                               std::span<const std::size_t> replicate_ids) {
  const CellModel model = make_cell_model(cfg.model);
  std::vector<std::vector<ReplicateRow>> per(replicate_ids.size());
  parallel_for(replicate_ids.size(), [&](std::size_t i) {
    per[i] = replicate_rows(cfg, model, replicate_ids[i], arms, n_list, targets);
  });
  ReplicateTable table;
  for (auto& rows : per) {
    for (auto& row : rows) table.push_back(std::move(row));
  }
  return table;
}

inline std::vector<std::size_t> all_replicates(std::size_t count) {
  std::vector<std::size_t> ids(count);
  for (std::size_t i = 0; i < count; ++i) ids[i] = i;
  return ids;
}

}  // namespace detail

/// Replicate r simulates with stream (seed, r) up to max(n_list) jumps and
/// reads every target at each n. Rows are ordered by replicate id, so the
/// table does not depend on scheduling.
inline ReplicateTable run_replicates(const ExperimentConfig& cfg) {
  cfg.validate();
  const detail::Arm arm{cfg.alpha, cfg.beta};
  const auto ids = detail::all_replicates(cfg.replicates);
  return detail::run_arms(cfg, std::span(&arm, 1), cfg.n_list, cfg.targets, ids);
}

/// Same as run_replicates but for an explicit list of replicate ids, in the
/// given order.
inline ReplicateTable run_replicates(const ExperimentConfig& cfg, std::span<const std::size_t> replicate_ids) {
  cfg.validate();
  const detail::Arm arm{cfg.alpha, cfg.beta};
  return detail::run_arms(cfg, std::span(&arm, 1), cfg.n_list, cfg.targets, replicate_ids);
}

/// Cross product of alphas x betas at n = cfg.sweep_n. Every arm sees the
/// same trajectories (stream (seed, r) for replicate r).
inline ReplicateTable bandwidth_sweep(const ExperimentConfig& cfg, std::span<const double> alphas,
                                      std::span<const double> betas) {
  cfg.validate();
  std::vector<detail::Arm> arms;
  for (double a : alphas) {
    for (double b : betas) arms.push_back({a, b});
  }
  if (arms.empty()) return {};
  const std::size_t n_list[] = {cfg.sweep_n};
  const auto ids = detail::all_replicates(cfg.replicates);
  return detail::run_arms(cfg, arms, n_list, cfg.targets, ids);
}

struct Summary {
  std::size_t successes = 0;
  std::size_t failures = 0;
  double median_q_hat = std::nan("");
  double q1 = std::nan("");
  double q3 = std::nan("");
  double iqr = std::nan("");
  double median_rel_error = std::nan("");
};

/// Boxplot statistics over successful rows matching (n, target, alpha, beta).
inline Summary summarize(const ReplicateTable& table, std::size_t n, const Target& target, double alpha,
                         double beta) {
  Summary s;
  std::vector<double> q;
  std::vector<double> rel;
  for (const auto& row : table) {
    if (row.n != n || row.x != target.x || row.y != target.y || row.alpha != alpha || row.beta != beta) continue;
    if (!row.ok()) {
      ++s.failures;
      continue;
    }
    ++s.successes;
    q.push_back(row.q_hat);
    rel.push_back(row.rel_error);
  }
  if (!q.empty()) {
    s.median_q_hat = stats::median(q);
    s.q1 = stats::quantile(q, 0.25);
    s.q3 = stats::quantile(q, 0.75);
    s.iqr = s.q3 - s.q1;
    s.median_rel_error = stats::median(rel);
  }
  return s;
}

/// n^{(1 - alpha d)/2} (q_hat - q) / sqrt(clt_variance(q, p, tau2, alpha, v1, d)).
inline std::vector<double> standardize_errors(std::span<const double> q_hats, double q_true, double p_estimate,
                                              double tau2, double alpha, double v1, std::size_t d, std::size_t n) {
  const double scale = std::pow(static_cast<double>(n), (1.0 - alpha * static_cast<double>(d)) / 2.0);
  const double sd = std::sqrt(clt_variance(q_true, p_estimate, tau2, alpha, v1, d));
  std::vector<double> out;
  out.reserve(q_hats.size());
  for (double q : q_hats) out.push_back(scale * (q - q_true) / sd);
  return out;
}

struct CltResult {
  Target target;
  std::size_t n = 0;
  double q_true = 0.0;
  double p_estimate = 0.0;
  double variance = 0.0;
  std::vector<std::size_t> replicate_ids;  // successful replicates
  std::vector<double> q_hats;
  std::vector<double> standardized;
  std::size_t failures = 0;
  double ks_statistic = std::nan("");
  double ks_pvalue = std::nan("");
  double sample_variance = std::nan("");
  std::vector<std::string> warnings;
};

/// Standardized errors of q_hat(target) at n = cfg.n over cfg.replicates
/// replicates. p(x) in the variance comes from the ergodic-average oracle
/// on a separate pilot trajectory (stream id = cfg.replicates).
inline CltResult clt_study(const ExperimentConfig& cfg, const Target& target, const QuadratureSpec& quad = {}) {
  cfg.validate();
  CltResult out;
  out.target = target;
  out.n = cfg.n;
  out.warnings = bandwidth_warnings(cfg.alpha, cfg.beta, 1, true);
  const CellModel model = make_cell_model(cfg.model);
  out.q_true = model.transitions.density({target.x}, {target.y});

  const detail::Arm arm{cfg.alpha, cfg.beta};
  const std::size_t n_list[] = {cfg.n};
  const Target targets[] = {target};
  const auto ids = detail::all_replicates(cfg.replicates);
  const ReplicateTable table = detail::run_arms(cfg, std::span(&arm, 1), n_list, targets, ids);
  for (const auto& row : table) {
    if (row.ok()) {
      out.replicate_ids.push_back(row.replicate);
      out.q_hats.push_back(row.q_hat);
    } else {
      ++out.failures;
    }
  }

  const auto pilot = simulate(model, Point<1>{cfg.x0}, cfg.n + 1, cfg.seed, cfg.replicates);
  out.p_estimate = p_ergodic(model, pilot, {target.x}, quad);
  const double tau2 = KernelFn<1>::named(cfg.kernel).tau2();
  out.variance = clt_variance(out.q_true, out.p_estimate, tau2, cfg.alpha, cfg.v1, 1);
  out.standardized = standardize_errors(out.q_hats, out.q_true, out.p_estimate, tau2, cfg.alpha, cfg.v1, 1, cfg.n);
  if (!out.standardized.empty()) {
    out.ks_statistic = stats::ks_statistic(out.standardized, standard_normal_cdf);
    out.ks_pvalue = stats::ks_pvalue(out.ks_statistic, out.standardized.size());
  }
  if (out.standardized.size() >= 2) out.sample_variance = stats::variance(out.standardized);
  return out;
}

struct PiResult {
  std::size_t n = 0;
  std::vector<double> grid;
  std::vector<double> p_hat;
  // Interior pre-jump density per bin (count / (n * width)), bins centred
  // on the grid points.
  std::vector<double> histogram;
  std::vector<double> bin_edges;
  double boundary_frequency = 0.0;
  std::size_t interior_count = 0;
};

inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> out;
  if (count == 0) return out;
  if (count == 1) return {lo};
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  return out;
}

/// p_hat over `grid` plus the empirical law of (Z_j^-) from one trajectory
/// of cfg.n jumps (stream 0).
inline PiResult pi_study(const ExperimentConfig& cfg, std::span<const double> grid) {
  cfg.validate();
  if (grid.empty()) throw std::invalid_argument("pi_study: empty grid");
  if (!std::is_sorted(grid.begin(), grid.end())) throw std::invalid_argument("pi_study: grid must be ascending");
  const CellModel model = make_cell_model(cfg.model);
  auto est = detail::make_estimator(cfg, {cfg.alpha, cfg.beta});
  std::vector<Point<1>> xs;
  for (double g : grid) xs.push_back({g});
  est.register_marginal_grid(xs);

  PiResult out;
  out.n = cfg.n;
  out.grid.assign(grid.begin(), grid.end());
  if (grid.size() == 1) {
    out.bin_edges = {grid[0] - 0.5 * cfg.v1, grid[0] + 0.5 * cfg.v1};
  } else {
    out.bin_edges.push_back(grid[0] - 0.5 * (grid[1] - grid[0]));
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) out.bin_edges.push_back(0.5 * (grid[i] + grid[i + 1]));
    out.bin_edges.push_back(grid.back() + 0.5 * (grid.back() - grid[grid.size() - 2]));
  }
  std::vector<std::size_t> counts(grid.size(), 0);

  Simulator<CellModel> sim(model, {cfg.x0}, Philox4x32(cfg.seed, 0));
  std::size_t forced = 0;
  const std::size_t total = cfg.n + 1;
  for (std::size_t m = 1; m <= total; ++m) {
    const auto rec = sim.next();
    est.update(rec);
    if (rec.forced) {
      ++forced;
      continue;
    }
    ++out.interior_count;
    const double z = rec.pre[0];
    const auto it = std::upper_bound(out.bin_edges.begin(), out.bin_edges.end(), z);
    if (it == out.bin_edges.begin() || it == out.bin_edges.end()) continue;
    ++counts[static_cast<std::size_t>(it - out.bin_edges.begin()) - 1];
  }
  out.boundary_frequency = static_cast<double>(forced) / static_cast<double>(total);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out.p_hat.push_back(est.p_hat({grid[i]}));
    const double width = out.bin_edges[i + 1] - out.bin_edges[i];
    out.histogram.push_back(static_cast<double>(counts[i]) / (static_cast<double>(cfg.n) * width));
  }
  return out;
}

/// q_hat(x, .) on `ys` from replicate 0 after cfg.n_list.back() jumps;
/// NaN where the denominator is still zero.
inline std::vector<double> curve_study(const ExperimentConfig& cfg, double x, std::span<const double> ys) {
  cfg.validate();
  const CellModel model = make_cell_model(cfg.model);
  auto est = detail::make_estimator(cfg, {cfg.alpha, cfg.beta});
  std::vector<Point<1>> grid;
  for (double y : ys) grid.push_back({y});
  est.register_curve({x}, grid);
  Simulator<CellModel> sim(model, {cfg.x0}, Philox4x32(cfg.seed, 0));
  for (std::size_t m = 1; m <= cfg.n_list.back() + 1; ++m) est.update(sim.next());
  try {
    return est.q_hat_curve({x}, grid);
  } catch (const ZeroDenominator&) {
    return std::vector<double>(ys.size(), std::nan(""));
  }
}

/// Default curve grid for x: curve_points points across x/2 +- curve_halfwidth,
/// clipped to the interior of E.
inline std::vector<double> curve_grid(const ExperimentConfig& cfg, double x) {
  const double eps = 1e-9;
  const double lo = std::max(0.5 * x - cfg.curve_halfwidth, eps);
  const double hi = std::min(0.5 * x + cfg.curve_halfwidth, CellModelParams::upper - eps);
  return linspace(lo, hi, cfg.curve_points);
}

inline std::string replicates_csv(const ReplicateTable& table) {
  using io::format_double;
  std::string out = "replicate,stream,n,x,y,alpha,beta,q_hat,p_hat,h_hat,q_true,rel_error,status\n";
  for (const auto& r : table) {
    out += std::to_string(r.replicate) + ',' + std::to_string(r.stream) + ',' + std::to_string(r.n) + ',' +
           format_double(r.x) + ',' + format_double(r.y) + ',' + format_double(r.alpha) + ',' +
           format_double(r.beta) + ',' + format_double(r.q_hat) + ',' + format_double(r.p_hat) + ',' +
           format_double(r.h_hat) + ',' + format_double(r.q_true) + ',' + format_double(r.rel_error) + ',' +
           r.status + '\n';
  }
  return out;
}

inline std::string clt_csv(const CltResult& r) {
  using io::format_double;
  std::string out = "# x=" + format_double(r.target.x) + " y=" + format_double(r.target.y) +
                    " n=" + std::to_string(r.n) + " q=" + format_double(r.q_true) +
                    " p_estimate=" + format_double(r.p_estimate) + " variance=" + format_double(r.variance) +
                    " failures=" + std::to_string(r.failures) + " ks=" + format_double(r.ks_statistic) +
                    " ks_pvalue=" + format_double(r.ks_pvalue) +
                    " sample_variance=" + format_double(r.sample_variance) + "\n";
  out += "replicate,q_hat,standardized\n";
  for (std::size_t i = 0; i < r.standardized.size(); ++i) {
    out += std::to_string(r.replicate_ids[i]) + ',' + format_double(r.q_hats[i]) + ',' +
           format_double(r.standardized[i]) + '\n';
  }
  return out;
}

inline std::string pi_csv(const PiResult& r) {
  using io::format_double;
  std::string out = "# n=" + std::to_string(r.n) + " boundary_frequency=" + format_double(r.boundary_frequency) +
                    " interior_count=" + std::to_string(r.interior_count) + "\n";
  out += "x,p_hat,histogram,bin_lo,bin_hi\n";
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    out += format_double(r.grid[i]) + ',' + format_double(r.p_hat[i]) + ',' + format_double(r.histogram[i]) + ',' +
           format_double(r.bin_edges[i]) + ',' + format_double(r.bin_edges[i + 1]) + '\n';
  }
  return out;
}

}  // namespace pdmp
