#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pdmp/errors.hpp"
#include "pdmp/experiment.hpp"
#include "pdmp/io.hpp"

namespace pdmp::config {

struct RunConfig {
  std::string command;
  ExperimentConfig experiment;
  bool seed_given = false;
  std::optional<std::string> source;
  std::vector<std::string> overrides;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string unquote(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    return io::parse_double(v);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
  }
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "' expects a nonnegative integer, got '" + v + "'");
  }
  return out;
}

inline std::vector<std::string> list_items(const std::string& v) {
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  for (auto part : io::split(v, ',')) out.push_back(trim(part));
  return out;
}

inline std::string join_doubles(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + io::format_double(xs[i]);
  return out;
}

struct Key {
  std::string section;
  std::string name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;

  std::string full() const { return section + "." + name; }
};

inline Key real(std::string section, std::string name, double ExperimentConfig::*field) {
  const std::string full = section + "." + name;
  return {std::move(section), std::move(name),
          [field, full](ExperimentConfig& c, const std::string& v) { c.*field = to_double(full, v); },
          [field](const ExperimentConfig& c) { return io::format_double(c.*field); }};
}

template <class Int>
Key integer(std::string section, std::string name, Int ExperimentConfig::*field) {
  const std::string full = section + "." + name;
  return {std::move(section), std::move(name),
          [field, full](ExperimentConfig& c, const std::string& v) { c.*field = static_cast<Int>(to_u64(full, v)); },
          [field](const ExperimentConfig& c) { return std::to_string(c.*field); }};
}

inline Key real_list(std::string section, std::string name, std::vector<double> ExperimentConfig::*field) {
  const std::string full = section + "." + name;
  return {std::move(section), std::move(name),
          [field, full](ExperimentConfig& c, const std::string& v) {
            std::vector<double> xs;
            for (const auto& item : list_items(v)) xs.push_back(to_double(full, item));
            c.*field = std::move(xs);
          },
          [field](const ExperimentConfig& c) { return "\"" + join_doubles(c.*field) + "\""; }};
}

}  // namespace detail

/// The documented key schema, in manifest order.
inline const std::vector<detail::Key>& schema() {
  using detail::integer;
  using detail::Key;
  using detail::real;
  using detail::real_list;
  using EC = ExperimentConfig;
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    k.push_back({"model", "model",
                 [](EC&, const std::string& v) {
                   if (v != "cell") throw ConfigError("unknown model '" + v + "' (only \"cell\" is available)");
                 },
                 [](const EC&) { return std::string("\"cell\""); }});
    k.push_back({"model", "tau_flow", [](EC& c, const std::string& v) { c.model.tau_flow = detail::to_double("model.tau_flow", v); },
                 [](const EC& c) { return io::format_double(c.model.tau_flow); }});
    k.push_back({"model", "sigma", [](EC& c, const std::string& v) { c.model.sigma = detail::to_double("model.sigma", v); },
                 [](const EC& c) { return io::format_double(c.model.sigma); }});
    k.push_back(real("model", "x0", &EC::x0));
    k.push_back({"kernel", "kernel",
                 [](EC& c, const std::string& v) {
                   (void)KernelFn<1>::named(v);
                   c.kernel = v;
                 },
                 [](const EC& c) { return "\"" + c.kernel + "\""; }});
    k.push_back(real("bandwidths", "v1", &EC::v1));
    k.push_back(real("bandwidths", "alpha", &EC::alpha));
    k.push_back(real("bandwidths", "w1", &EC::w1));
    k.push_back(real("bandwidths", "beta", &EC::beta));
    k.push_back(integer("experiment", "replicates", &EC::replicates));
    k.push_back({"experiment", "n_list",
                 [](EC& c, const std::string& v) {
                   std::vector<std::size_t> ns;
                   for (const auto& item : detail::list_items(v)) ns.push_back(detail::to_u64("experiment.n_list", item));
                   c.n_list = std::move(ns);
                 },
                 [](const EC& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.n_list.size(); ++i) out += (i ? "," : "") + std::to_string(c.n_list[i]);
                   return "\"" + out + "\"";
                 }});
    k.push_back({"experiment", "targets",
                 [](EC& c, const std::string& v) {
                   std::vector<Target> ts;
                   for (const auto& item : detail::list_items(v)) {
                     const auto colon = item.find(':');
                     if (colon == std::string::npos) {
                       throw ConfigError("experiment.targets expects x:y pairs, got '" + item + "'");
                     }
                     ts.push_back({detail::to_double("experiment.targets", detail::trim(item.substr(0, colon))),
                                   detail::to_double("experiment.targets", detail::trim(item.substr(colon + 1)))});
                   }
                   c.targets = std::move(ts);
                 },
                 [](const EC& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.targets.size(); ++i) {
                     out += (i ? "," : "") + io::format_double(c.targets[i].x) + ":" + io::format_double(c.targets[i].y);
                   }
                   return "\"" + out + "\"";
                 }});
    k.push_back(integer("experiment", "seed", &EC::seed));
    k.push_back({"experiment", "output", [](EC& c, const std::string& v) { c.output = v; },
                 [](const EC& c) { return "\"" + c.output + "\""; }});
    k.push_back(integer("experiment", "n", &EC::n));
    k.push_back(real("experiment", "x", &EC::x));
    k.push_back(real("experiment", "y", &EC::y));
    k.push_back(real_list("experiment", "sweep_alphas", &EC::sweep_alphas));
    k.push_back(real_list("experiment", "sweep_betas", &EC::sweep_betas));
    k.push_back(integer("experiment", "sweep_n", &EC::sweep_n));
    k.push_back(real("experiment", "pi_lo", &EC::pi_lo));
    k.push_back(real("experiment", "pi_hi", &EC::pi_hi));
    k.push_back(integer("experiment", "pi_points", &EC::pi_points));
    k.push_back(integer("experiment", "curve_points", &EC::curve_points));
    k.push_back(real("experiment", "curve_halfwidth", &EC::curve_halfwidth));
    return k;
  }();
  return keys;
}

/// Resolves "section.key" or a bare key that is unique across sections.
inline const detail::Key& find_key(const std::string& name) {
  const auto& keys = schema();
  const auto dot = name.find('.');
  if (dot != std::string::npos) {
    for (const auto& k : keys) {
      if (k.full() == name) return k;
    }
    throw ConfigError("unknown key '" + name + "'");
  }
  const detail::Key* found = nullptr;
  for (const auto& k : keys) {
    if (k.name != name) continue;
    if (found) throw ConfigError("key '" + name + "' is ambiguous; qualify it with its section");
    found = &k;
  }
  if (!found) throw ConfigError("unknown key '" + name + "'");
  return *found;
}

inline void apply_setting(RunConfig& rc, const std::string& key, const std::string& value) {
  const detail::Key& k = find_key(key);
  k.set(rc.experiment, detail::unquote(detail::trim(value)));
  if (k.full() == "experiment.seed") rc.seed_given = true;
}

/// Parses a flat INI document ([model], [kernel], [bandwidths], [experiment]
/// sections of `key = value` lines; `#` and `;` start comment lines), fills
/// unspecified keys with defaults, then applies `key=value` overrides.
inline RunConfig parse_config(std::string_view text, const std::vector<std::string>& overrides = {}) {
  RunConfig rc;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string line = detail::trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
      bool known = false;
      for (const auto& k : schema()) known = known || k.section == section;
      if (!known) throw ConfigError("line " + std::to_string(line_no) + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = std::string(std::string_view(line).substr(eq + 1));
    apply_setting(rc, section.empty() || key.find('.') != std::string::npos ? key : section + "." + key, value);
  }
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + ov + "' is not key=value");
    apply_setting(rc, detail::trim(std::string_view(ov).substr(0, eq)), ov.substr(eq + 1));
    rc.overrides.push_back(ov);
  }
  rc.experiment.validate();
  return rc;
}

/// Full configuration as a document parse_config reads back unchanged.
inline std::string manifest(const RunConfig& rc, const std::vector<std::string>& notes = {}) {
  std::string out = "# pdmp manifest\n";
  if (!rc.command.empty()) out += "# command=" + rc.command + "\n";
  out += "# seed=" + std::to_string(rc.experiment.seed) + "\n";
  for (const auto& note : notes) out += "# " + note + "\n";
  std::string section;
  for (const auto& k : schema()) {
    if (k.section != section) {
      section = k.section;
      out += "\n[" + section + "]\n";
    }
    out += k.name + " = " + k.get(rc.experiment) + "\n";
  }
  return out;
}

}  // namespace pdmp::config
