#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ustat/error.hpp"
#include "ustat/experiment.hpp"

using namespace ustat;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ustat-test-" + name);
  fs::remove_all(dir);
  return dir;
}

Json spectra_config() {
  return Json::parse(R"({
    "seed": 3,
    "kernel": {"dim": 2, "psi": {"kind": "polynomial", "coefficients": [1, 2, 1]}},
    "chain": {"type": "sphere_walk", "dim": 2,
              "radial": {"name": "beta_affine", "alpha": 5, "beta": 1, "shift": 2, "scale": 4}},
    "sizes": [40, 80], "replications": 3})");
}

Json calibrate_config() {
  return Json::parse(R"({
    "seed": 4, "f0": {"type": "gaussian", "mu": 0, "sigma2": 2.78}, "n": 30,
    "calibration": {"reps": 300, "u_grid_size": 10}})");
}

Json power_config() {
  return Json::parse(R"({
    "seed": 5, "n": 30, "calibration": {"reps": 400, "u_grid_size": 50}, "power_reps": 200,
    "source": {"chain": {"type": "ar1", "theta": 0.8}},
    "alternatives": [{"type": "gaussian", "mu": 2, "sigma2": 1.5}, {"type": "gaussian", "mu": 0, "sigma2": 2.78}],
    "baselines": {"ks": true, "chi2": {"interval": [-5, 5], "bins": 10}, "null_reps": 200},
    "null_level": true, "plot_points": 50})");
}

Json online_config() {
  return Json::parse(R"({
    "seed": 6, "chain": {"type": "ar1", "theta": 0.8}, "n": 60, "loss": "sigmoid",
    "params": {"c": 0.2, "rho": 0.1}, "replications": 2, "true_risk_reps": 2000})");
}

// Every file except the manifest (which records wall time) must match.
void check_same_outputs(const RunResult& a, const fs::path& da, const RunResult& b, const fs::path& db) {
  REQUIRE(a.artifacts.size() == b.artifacts.size());
  for (std::size_t i = 0; i < a.artifacts.size(); ++i) {
    CHECK(a.artifacts[i].file == b.artifacts[i].file);
    CHECK(a.artifacts[i].fnv1a64 == b.artifacts[i].fnv1a64);
    CHECK(slurp(da / a.artifacts[i].file) == slurp(db / b.artifacts[i].file));
  }
}

void check_worker_independence(const std::string& command, const Json& config) {
  const auto d1 = scratch(command + "-w1");
  const auto r1 = run_experiment(command, config, RunOptions{d1.string(), 1});
  CHECK_FALSE(r1.artifacts.empty());
  for (std::size_t w : {4u, 8u}) {
    const auto dw = scratch(command + "-w" + std::to_string(w));
    const auto rw = run_experiment(command, config, RunOptions{dw.string(), w});
    check_same_outputs(r1, d1, rw, dw);
  }
  CHECK(fs::exists(d1 / "manifest.json"));
}

}  // namespace

TEST_CASE("outputs are identical across worker counts") {
  SUBCASE("spectra") { check_worker_independence("spectra", spectra_config()); }
  SUBCASE("gof-calibrate") { check_worker_independence("gof-calibrate", calibrate_config()); }
  SUBCASE("gof-power") { check_worker_independence("gof-power", power_config()); }
  SUBCASE("online-run") { check_worker_independence("online-run", online_config()); }
}

TEST_CASE("CSV outputs carry a format line") {
  const auto dir = scratch("format");
  const auto r = run_experiment("gof-power", power_config(), RunOptions{dir.string(), 1});
  for (const auto& a : r.artifacts) {
    if (a.file.ends_with(".csv")) CHECK(slurp(dir / a.file).rfind("# ", 0) == 0);
    CHECK(a.bytes == slurp(dir / a.file).size());
    CHECK(a.fnv1a64 == fnv1a64_hex(slurp(dir / a.file)));
  }
  const auto manifest = Json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["format"] == kManifestFormat);
  CHECK(manifest["command"] == "gof-power");
}

TEST_CASE("a manifest reproduces its artifacts") {
  const auto d1 = scratch("rerun-a");
  const auto d2 = scratch("rerun-b");
  const auto r1 = run_experiment("online-run", online_config(), RunOptions{d1.string(), 2});
  const auto manifest = Json::parse(slurp(d1 / "manifest.json"));
  const auto r2 = rerun_manifest(manifest, RunOptions{d2.string(), 1});
  check_same_outputs(r1, d1, r2, d2);
}

TEST_CASE("config validation happens before sampling") {
  auto cfg = calibrate_config();
  cfg["calibration"]["models"] = Json::array();
  const auto dir = scratch("invalid");
  try {
    run_experiment("gof-calibrate", cfg, RunOptions{dir.string(), 1});
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
  }
  CHECK_FALSE(fs::exists(dir / "calibration_table.txt"));

  auto typo = calibrate_config();
  typo["aplha"] = 0.1;
  CHECK_THROWS_AS(run_experiment("gof-calibrate", typo, RunOptions{dir.string(), 1}), Error);
  CHECK_THROWS_AS(run_experiment("no-such-command", calibrate_config(), RunOptions{dir.string(), 1}), Error);
}

TEST_CASE("overrides") {
  Json cfg = calibrate_config();
  apply_override(cfg, "calibration.reps=2000");
  CHECK(cfg["calibration"]["reps"] == 2000);
  apply_override(cfg, "f0.type=truncated_gaussian");
  CHECK(cfg["f0"]["type"] == "truncated_gaussian");
  apply_override(cfg, "calibration.models=[[1,2]]");
  CHECK(cfg["calibration"]["models"].size() == 1);
  apply_override(cfg, "new.nested.key=1.5");
  CHECK(cfg["new"]["nested"]["key"] == 1.5);
  CHECK_THROWS_AS(apply_override(cfg, "missing-equals"), Error);
  CHECK_THROWS_AS(apply_override(cfg, "=3"), Error);
}

TEST_CASE("FNV-1a hashes") {
  CHECK(fnv1a64_hex("") == "cbf29ce484222325");
  CHECK(fnv1a64_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a64_hex("foobar") == "85944171f73967e8");
}
