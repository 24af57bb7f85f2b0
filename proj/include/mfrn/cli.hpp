#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mfrn/core.hpp"

namespace mfrn::cli {

enum ExitCode : int {
  kSuccess = 0,
  kFailure = 1,
  kInvalidConfig = 2,
  kDivergence = 3,
};

struct RunOptions {
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> activation;
  int threads = 1;
};

struct PhaseTiming {
  std::string phase;
  double seconds;
};

/// Written to manifest.csv before any solver output. Wall-clock timings go to timings.csv so the
/// remaining artifacts of a rerun are byte-identical.
struct RunManifest {
  std::string scenario;
  RunConfig config;
  std::filesystem::path out_dir;
  std::string config_hash;
  std::vector<PhaseTiming> timings;
};

/// Git blob hash (SHA-1 over "blob <size>\0" + content), lowercase hex.
std::string content_hash(const std::string& content);

/// MFRN_THREADS if set to a positive integer, else 1.
int threads_from_env();

void write_manifest(const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& dir);

/// Executes the scenario end to end. Diagnostics go to `err`, progress to `log`.
int run(const RunOptions& opts, std::ostream& log, std::ostream& err);

/// Aligns cost and e_k histories and final controls of two runs in one CSV with columns
/// series, index, t, a, b, delta.
int compare(const std::filesystem::path& dir_a, const std::filesystem::path& dir_b,
            const std::filesystem::path& out, std::ostream& err);

}  // namespace mfrn::cli
