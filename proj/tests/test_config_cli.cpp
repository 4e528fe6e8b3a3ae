#include <catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "pdmp/cli.hpp"
#include "pdmp/config.hpp"

using namespace pdmp;

namespace {

int run_cli(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "pdmp");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pdmp_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("defaults and overrides", "[config]") {
  const auto rc = config::parse_config("");
  CHECK(rc.experiment.alpha == 0.125);
  CHECK(rc.experiment.kernel == "epanechnikov");
  const auto rc2 = config::parse_config("[bandwidths]\nalpha = 0.25\n", {"alpha=0.5"});
  CHECK(rc2.experiment.alpha == 0.5);
  const auto rc3 = config::parse_config("", {"experiment.targets=1:0.5", "n_list=10,20"});
  REQUIRE(rc3.experiment.targets.size() == 1);
  CHECK(rc3.experiment.n_list == std::vector<std::size_t>{10, 20});
}

TEST_CASE("configuration errors", "[config]") {
  CHECK_THROWS_AS(config::parse_config("", {"kernel=gaussian"}), ConfigError);
  CHECK_THROWS_AS(config::parse_config("", {"nonsense=1"}), ConfigError);
  CHECK_THROWS_AS(config::parse_config("", {"replicates=0"}), ConfigError);
  CHECK_THROWS_AS(config::parse_config("[nowhere]\n"), ConfigError);
  CHECK_THROWS_AS(config::parse_config("[bandwidths]\nalpha = abc\n"), ConfigError);
}

TEST_CASE("manifest reads back to the same manifest", "[config]") {
  const auto rc = config::parse_config("", {"alpha=0.25", "seed=99", "targets=1:0.5,2.5:1.25"});
  const std::string m1 = config::manifest(rc);
  const std::string m2 = config::manifest(config::parse_config(m1));
  CHECK(m1 == m2);
}

TEST_CASE("simulate writes a trajectory and a manifest", "[cli]") {
  const auto dir = scratch("simulate");
  CHECK(run_cli({"simulate", "--n", "10", "--seed", "3", "-o", dir.string()}) == 0);
  const auto traj = io::parse_trajectory_csv<1>(io::read_file(dir / "trajectory.csv"));
  CHECK(traj.records.size() == 10);
  CHECK(traj.seed == 3);
  REQUIRE(std::filesystem::exists(dir / "manifest"));

  // Feeding the manifest back reproduces the run byte for byte.
  const auto again = scratch("simulate_again");
  CHECK(run_cli({"simulate", "--config", (dir / "manifest").string(), "-o", again.string()}) == 0);
  CHECK(io::read_file(dir / "trajectory.csv") == io::read_file(again / "trajectory.csv"));
}

TEST_CASE("estimate reads a saved trajectory", "[cli]") {
  const auto dir = scratch("estimate");
  REQUIRE(run_cli({"simulate", "--n", "300", "--seed", "4", "-o", dir.string()}) == 0);
  std::string text;
  CHECK(run_cli({"estimate", "--trajectory", (dir / "trajectory.csv").string(), "--x", "1", "--y", "0.5"}, &text) ==
        0);
  CHECK(text.rfind("x,y,q_hat,p_hat,h_hat,n\n", 0) == 0);
}

TEST_CASE("exit codes", "[cli]") {
  CHECK(run_cli({"bogus"}) == 1);
  CHECK(run_cli({"simulate", "--set", "kernel=gaussian", "-o", scratch("bad").string()}) == 1);
  CHECK(run_cli({"simulate", "--set", "unknown=1", "-o", scratch("bad2").string()}) == 1);
  CHECK(run_cli({"estimate", "--trajectory", "/nonexistent/file.csv"}) == 2);
}
