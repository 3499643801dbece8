#ifndef USTAT_EXPERIMENT_HPP_
#define USTAT_EXPERIMENT_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ustat/config.hpp"

namespace ustat {

inline constexpr const char* kManifestFormat = "ustat-manifest v1";
inline constexpr const char* kSeedRule =
    "replication i of phase p uses splitmix64(splitmix64(splitmix64(seed) ^ fnv1a64(p)) + i * "
    "0xd1b54a32d192ed03) to seed xoshiro256++";

/// Commands accepted by run_experiment.
inline constexpr std::string_view kCommands[] = {"spectra", "gof-calibrate", "gof-power", "online-run"};

struct RunOptions {
  std::string out_dir = ".";
  std::size_t workers = 1;  // 0 = one per hardware thread
};

struct Artifact {
  std::string file;  // relative to out_dir
  std::string fnv1a64;
  std::size_t bytes = 0;
};

struct RunResult {
  std::vector<Artifact> artifacts;
  Json summary;  // command-specific headline numbers and warnings
};

/// Validates `config` completely, runs the command, and writes its CSV and
/// plot-data files plus manifest.json into options.out_dir. Output bytes do
/// not depend on options.workers.
RunResult run_experiment(const std::string& command, const Json& config, const RunOptions& options);

/// Re-runs the command recorded in a manifest written by run_experiment.
RunResult rerun_manifest(const Json& manifest, const RunOptions& options);

/// 64-bit FNV-1a of a byte string, as 16 lowercase hex digits.
std::string fnv1a64_hex(std::string_view bytes);

/// Applies "a.b.c=value" overrides; value is parsed as JSON, or taken as a
/// string when it is not valid JSON.
void apply_override(Json& config, const std::string& assignment);

}  // namespace ustat

#endif  // USTAT_EXPERIMENT_HPP_
