#pragma once

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pdmp/cell_model.hpp"
#include "pdmp/config.hpp"
#include "pdmp/core.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/estimator.hpp"
#include "pdmp/experiment.hpp"
#include "pdmp/io.hpp"

namespace pdmp::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kRuntimeError = 2 };

namespace detail {

struct Flags {
  std::string config_path;
  std::vector<std::string> sets;
  std::map<std::string, std::string> mirrored;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  std::optional<std::size_t> n;
  std::optional<double> x;
  std::optional<double> y;
  std::string trajectory;
};

inline void add_common(CLI::App* sub, Flags& f, bool with_trajectory) {
  sub->add_option("--config", f.config_path, "INI config file (a manifest works too)");
  sub->add_option("--set", f.sets, "Override, key=value (repeatable)");
  sub->add_option("--seed", f.seed, "Master seed (drawn from entropy when absent)");
  sub->add_option("-o,--output", f.output, "Output directory");
  sub->add_option("--n", f.n, "Jump count for single-trajectory commands");
  sub->add_option("--x", f.x, "Target x");
  sub->add_option("--y", f.y, "Target y");
  if (with_trajectory) sub->add_option("--trajectory", f.trajectory, "Estimate from a saved trajectory CSV");
  for (const auto& key : config::schema()) {
    const std::string name = key.full();
    sub->add_option_function<std::string>(
           "--" + name, [&f, name](const std::string& v) { f.mirrored[name] = v; }, "Config key " + name)
        ->group("Config keys");
  }
}

inline config::RunConfig resolve(const std::string& command, const Flags& f) {
  std::vector<std::string> overrides = f.sets;
  for (const auto& [k, v] : f.mirrored) overrides.push_back(k + "=" + v);
  if (f.seed) overrides.push_back("experiment.seed=" + std::to_string(*f.seed));
  if (f.output) overrides.push_back("experiment.output=" + *f.output);
  if (f.n) overrides.push_back("experiment.n=" + std::to_string(*f.n));
  if (f.x) overrides.push_back("experiment.x=" + io::format_double(*f.x));
  if (f.y) overrides.push_back("experiment.y=" + io::format_double(*f.y));

  std::string text;
  if (!f.config_path.empty()) {
    try {
      text = io::read_file(f.config_path);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  config::RunConfig rc = config::parse_config(text, overrides);
  rc.command = command;
  if (!f.config_path.empty()) rc.source = f.config_path;
  if (!rc.seed_given) {
    std::random_device rd;
    rc.experiment.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
  return rc;
}

inline void emit_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << "\n";
}

inline std::filesystem::path out_dir(const config::RunConfig& rc) { return rc.experiment.output; }

inline void write_manifest(const config::RunConfig& rc, const std::vector<std::string>& notes) {
  io::write_atomic(out_dir(rc) / "manifest", config::manifest(rc, notes));
}

inline int cmd_simulate(const config::RunConfig& rc, std::ostream& out) {
  const auto& cfg = rc.experiment;
  const CellModel model = make_cell_model(cfg.model);
  const auto traj = simulate(model, Point<1>{cfg.x0}, cfg.n, cfg.seed);
  io::write_atomic(out_dir(rc) / "trajectory.csv", io::trajectory_csv(traj));
  write_manifest(rc, {});
  out << "wrote " << traj.records.size() << " jumps to " << (out_dir(rc) / "trajectory.csv").string() << "\n";
  return kOk;
}

inline int cmd_estimate(const config::RunConfig& rc, const Flags& f, std::ostream& out, std::ostream& err) {
  const auto& cfg = rc.experiment;
  const CellModel model = make_cell_model(cfg.model);
  EstimatorState<1> est(model.space, KernelFn<1>::named(cfg.kernel), BandwidthSchedule(cfg.v1, cfg.alpha),
                        BandwidthSchedule(cfg.w1, cfg.beta));
  est.register_pair({cfg.x}, {cfg.y});
  emit_warnings(est.warnings(), err);
  emit_warnings(bandwidth_warnings(cfg.alpha, cfg.beta, 1, false), err);

  if (!f.trajectory.empty()) {
    const auto traj = io::parse_trajectory_csv<1>(io::read_file(f.trajectory));
    for (const auto& rec : traj.records) est.update(rec);
  } else {
    Simulator<CellModel> sim(model, {cfg.x0}, Philox4x32(cfg.seed, 0));
    for (std::size_t m = 0; m < cfg.n + 1; ++m) est.update(sim.next());
  }
  const io::EstimateRow row{cfg.x, cfg.y, est.q_hat({cfg.x}, {cfg.y}), est.p_hat({cfg.x}),
                            est.h_hat({cfg.x}, {cfg.y}), est.n()};
  const std::string csv = io::estimates_csv(std::span(&row, 1));
  if (f.output) {
    io::write_atomic(out_dir(rc) / "estimate.csv", csv);
    write_manifest(rc, {});
  } else {
    out << csv;
    if (!rc.seed_given) err << "# seed=" << cfg.seed << "\n";
  }
  return kOk;
}

inline int cmd_replicate(const config::RunConfig& rc, std::ostream& out, std::ostream& err) {
  const auto& cfg = rc.experiment;
  const auto warnings = bandwidth_warnings(cfg.alpha, cfg.beta, 1, false);
  emit_warnings(warnings, err);
  const ReplicateTable table = run_replicates(cfg);
  io::write_atomic(out_dir(rc) / "replicates.csv", replicates_csv(table));
  if (cfg.curve_points > 0) {
    std::set<double> xs;
    for (const auto& t : cfg.targets) xs.insert(t.x);
    for (double x : xs) {
      const auto ys = curve_grid(cfg, x);
      const auto qs = curve_study(cfg, x, ys);
      io::write_atomic(out_dir(rc) / ("curve_" + io::format_double(x) + ".csv"),
                       io::curve_csv(x, cfg.n_list.back(), ys, qs));
    }
  }
  write_manifest(rc, warnings);
  out << "n,x,y,successes,failures,median_q_hat,iqr,median_rel_error\n";
  for (std::size_t n : cfg.n_list) {
    for (const auto& t : cfg.targets) {
      const Summary s = summarize(table, n, t, cfg.alpha, cfg.beta);
      out << n << ',' << io::format_double(t.x) << ',' << io::format_double(t.y) << ',' << s.successes << ','
          << s.failures << ',' << io::format_double(s.median_q_hat) << ',' << io::format_double(s.iqr) << ','
          << io::format_double(s.median_rel_error) << "\n";
    }
  }
  return kOk;
}

inline int cmd_sweep(const config::RunConfig& rc, std::ostream& out, std::ostream& err) {
  const auto& cfg = rc.experiment;
  std::vector<std::string> warnings;
  for (double a : cfg.sweep_alphas) {
    for (double b : cfg.sweep_betas) {
      for (auto& w : bandwidth_warnings(a, b, 1, false)) warnings.push_back(std::move(w));
    }
  }
  emit_warnings(warnings, err);
  const ReplicateTable table = bandwidth_sweep(cfg, cfg.sweep_alphas, cfg.sweep_betas);
  io::write_atomic(out_dir(rc) / "replicates.csv", replicates_csv(table));
  write_manifest(rc, warnings);
  out << "alpha,beta,x,y,successes,median_q_hat,iqr\n";
  for (double a : cfg.sweep_alphas) {
    for (double b : cfg.sweep_betas) {
      for (const auto& t : cfg.targets) {
        const Summary s = summarize(table, cfg.sweep_n, t, a, b);
        out << io::format_double(a) << ',' << io::format_double(b) << ',' << io::format_double(t.x) << ','
            << io::format_double(t.y) << ',' << s.successes << ',' << io::format_double(s.median_q_hat) << ','
            << io::format_double(s.iqr) << "\n";
      }
    }
  }
  return kOk;
}

inline int cmd_clt(const config::RunConfig& rc, std::ostream& out, std::ostream& err) {
  const auto& cfg = rc.experiment;
  const CltResult r = clt_study(cfg, {cfg.x, cfg.y});
  emit_warnings(r.warnings, err);
  io::write_atomic(out_dir(rc) / "clt.csv", clt_csv(r));
  write_manifest(rc, r.warnings);
  out << "replicates=" << r.standardized.size() << " failures=" << r.failures
      << " p_estimate=" << io::format_double(r.p_estimate) << " ks=" << io::format_double(r.ks_statistic)
      << " ks_pvalue=" << io::format_double(r.ks_pvalue)
      << " sample_variance=" << io::format_double(r.sample_variance) << "\n";
  return kOk;
}

inline int cmd_pi(const config::RunConfig& rc, std::ostream& out) {
  const auto& cfg = rc.experiment;
  const auto grid = linspace(cfg.pi_lo, cfg.pi_hi, cfg.pi_points);
  const PiResult r = pi_study(cfg, grid);
  io::write_atomic(out_dir(rc) / "pi.csv", pi_csv(r));
  write_manifest(rc, {});
  out << "grid_points=" << r.grid.size() << " boundary_frequency=" << io::format_double(r.boundary_frequency)
      << "\n";
  return kOk;
}

}  // namespace detail

/// Entry point shared by the `pdmp` binary and the tests.
/// Exit codes: 0 success, 1 usage or config error, 2 runtime failure.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulation and recursive transition-density estimation for PDMPs", "pdmp"};
  app.require_subcommand(1);
  detail::Flags flags;
  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"simulate", "Simulate one trajectory and write trajectory.csv"},
      {"estimate", "Estimate q(x, y), p(x), h(x, y) from one trajectory"},
      {"replicate", "Replicated study over n_list and targets"},
      {"sweep", "Bandwidth exponent sweep at fixed n"},
      {"clt", "Standardized-error study for the central limit theorem"},
      {"pi", "Invariant pre-jump density estimate and histogram"},
  };
  std::map<std::string, CLI::App*> commands;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    detail::add_common(sub, flags, std::string(s.name) == "estimate");
    commands[s.name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kConfigError;
  }

  std::string command;
  for (const auto& [name, sub] : commands) {
    if (sub->parsed()) command = name;
  }

  config::RunConfig rc;
  try {
    rc = detail::resolve(command, flags);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (command == "simulate") return detail::cmd_simulate(rc, out);
    if (command == "estimate") return detail::cmd_estimate(rc, flags, out, err);
    if (command == "replicate") return detail::cmd_replicate(rc, out, err);
    if (command == "sweep") return detail::cmd_sweep(rc, out, err);
    if (command == "clt") return detail::cmd_clt(rc, out, err);
    if (command == "pi") return detail::cmd_pi(rc, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  err << app.help();
  return kConfigError;
}

}  // namespace pdmp::cli
