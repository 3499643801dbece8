// Command-line driver over the C API.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ustat/ustat.h"

namespace {

struct Common {
  std::string config_path;
  std::string out_dir = ".";
  std::size_t workers = 0;
  bool workers_set = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::vector<std::string> overrides;
};

int report(int status) {
  if (status != USTAT_OK) {
    std::cerr << "ustat: " << ustat_status_name(status) << ": " << ustat_last_error() << '\n';
  }
  return status;
}

bool read_file(const std::string& path, std::string& text) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream s;
  s << in.rdbuf();
  text = s.str();
  return true;
}

std::size_t effective_workers(const Common& c) {
  if (c.workers_set) return c.workers;
  if (const char* env = std::getenv("USTAT_WORKERS")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0') return static_cast<std::size_t>(v);
    std::cerr << "ustat: ignoring malformed USTAT_WORKERS='" << env << "'\n";
  }
  return 0;
}

// Applies --seed and --set on top of the config text.
int build_config(const Common& c, const std::vector<std::string>& extra, std::string& config) {
  if (!read_file(c.config_path, config)) {
    std::cerr << "ustat: cannot read config '" << c.config_path << "'\n";
    return USTAT_ERR_IO;
  }
  std::vector<std::string> assignments = extra;
  if (c.seed_set) assignments.push_back("seed=" + std::to_string(c.seed));
  assignments.insert(assignments.end(), c.overrides.begin(), c.overrides.end());
  for (const auto& a : assignments) {
    char* updated = nullptr;
    const int status = ustat_apply_override(config.c_str(), a.c_str(), &updated);
    if (status != USTAT_OK) return report(status);
    config = updated;
    ustat_string_free(updated);
  }
  return USTAT_OK;
}

int run_command(const char* command, const Common& c, const std::vector<std::string>& extra = {}) {
  std::string config;
  if (const int status = build_config(c, extra, config); status != USTAT_OK) return status;
  char* summary = nullptr;
  const int status = ustat_run(command, config.c_str(), c.out_dir.c_str(), effective_workers(c), &summary);
  if (status != USTAT_OK) return report(status);
  std::cout << summary << '\n';
  ustat_string_free(summary);
  return USTAT_OK;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app->add_option("-o,--out", c.out_dir, "output directory")->capture_default_str();
  app->add_option_function<std::size_t>(
         "-w,--workers",
         [&c](std::size_t w) {
           c.workers = w;
           c.workers_set = true;
         },
         "worker threads, 0 = all cores (default: $USTAT_WORKERS or 0)");
  app->add_option_function<std::uint64_t>(
      "-s,--seed",
      [&c](std::uint64_t s) {
        c.seed = s;
        c.seed_set = true;
      },
      "master seed, overrides the config's seed");
  app->add_option("--set", c.overrides, "override a config value, e.g. --set calibration.reps=2000");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Markov-chain U-statistics experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ustat_version()));

  Common common;
  std::string table_path;
  int status = USTAT_OK;

  auto* spectra = app.add_subcommand("spectra", "kernel operator spectrum estimates from a sphere walk");
  add_common(spectra, common);
  spectra->callback([&] { status = run_command("spectra", common); });

  auto* gof = app.add_subcommand("gof", "goodness-of-fit test for the invariant density");
  gof->require_subcommand(1);
  auto* calibrate = gof->add_subcommand("calibrate", "Monte Carlo calibration table under f0");
  add_common(calibrate, common);
  calibrate->callback([&] { status = run_command("gof-calibrate", common); });
  auto* power = gof->add_subcommand("power", "rejection rates against a chain or iid source");
  add_common(power, common);
  power->add_option("-t,--table", table_path, "use a saved calibration table instead of calibrating")
      ->check(CLI::ExistingFile);
  power->callback([&] {
    std::vector<std::string> extra;
    if (!table_path.empty()) extra.push_back("table=" + table_path);
    status = run_command("gof-power", common, extra);
  });

  auto* online = app.add_subcommand("online", "online-to-batch pairwise learning");
  online->require_subcommand(1);
  auto* online_run = online->add_subcommand("run", "learner trace, risks and hypothesis selection");
  add_common(online_run, common);
  online_run->callback([&] { status = run_command("online-run", common); });

  std::string manifest_path;
  std::string rerun_out = ".";
  auto* rerun = app.add_subcommand("rerun", "reproduce the artifacts recorded in a manifest");
  rerun->add_option("manifest", manifest_path, "manifest.json from an earlier run")
      ->required()
      ->check(CLI::ExistingFile);
  rerun->add_option("-o,--out", rerun_out, "output directory")->capture_default_str();
  rerun->add_option_function<std::size_t>(
      "-w,--workers",
      [&common](std::size_t w) {
        common.workers = w;
        common.workers_set = true;
      },
      "worker threads, 0 = all cores");
  rerun->callback([&] {
    std::string text;
    if (!read_file(manifest_path, text)) {
      status = USTAT_ERR_IO;
      std::cerr << "ustat: cannot read manifest '" << manifest_path << "'\n";
      return;
    }
    char* summary = nullptr;
    status = report(ustat_rerun(text.c_str(), rerun_out.c_str(), effective_workers(common), &summary));
    if (summary) {
      std::cout << summary << '\n';
      ustat_string_free(summary);
    }
  });

  std::uint64_t selftest_seed = 20240601;
  auto* selftest = app.add_subcommand("selftest", "oracle equivalence suites");
  selftest->add_option("-s,--seed", selftest_seed, "seed for the random instances")->capture_default_str();
  selftest->callback([&] {
    char* text = nullptr;
    int passed = 0;
    status = report(ustat_selftest(selftest_seed, &text, &passed));
    if (text) {
      std::cout << text;
      ustat_string_free(text);
    }
    if (status == USTAT_OK && !passed) status = 1;
  });

  CLI11_PARSE(app, argc, argv);
  return status;
}
