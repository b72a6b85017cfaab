#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "topopt/bench.hpp"
#include "topopt/operator.hpp"
#include "topopt/precision.hpp"

namespace topopt::cli {

struct RunConfig {
  std::string command;  // solve, simp, kappa, bf16-study, bench, export
  std::string preset;   // required by every command except bench matvec and export --snapshot
  double scale = 0.2;
  Variant variant = Variant::fused;
  std::optional<Precision> precision;  // unset: each command's own default
  int iters = 0;                       // SIMP iterations; 0 runs the whole schedule
  int cg_cap = 1000;
  int high_cap = 5000;
  double tol = 1e-5;
  std::uint64_t seed = 42;
  unsigned threads = 0;
  std::filesystem::path out = "out";
  bool serial = false;
  double density = 0.5;
  double penalty = 3.0;
  std::vector<double> scales;     // kappa and bf16-study refinement levels
  std::vector<double> penalties;  // kappa
  // bench
  std::string kind = "matvec";  // matvec, repeat, determinism, highcap
  std::vector<std::size_t> n_elem;
  IndexPattern pattern = IndexPattern::structured;
  int repeats = 0;
  int runs = 0;  // study size; 0 picks the study default
  // export
  std::filesystem::path snapshot;
  bool slices = true;

  [[nodiscard]] ScatterMode scatter() const noexcept {
    return serial ? ScatterMode::serial : ScatterMode::parallel_atomic;
  }
};

struct ParseOutcome {
  std::optional<RunConfig> config;  // empty when the process should exit
  int exit_code = 0;
  std::string message;  // help text or error
};

/// Flags override a --config file, which overrides defaults.
ParseOutcome parse_command_line(int argc, const char* const* argv);

/// Rejects combinations the selected command cannot run. Throws
/// std::invalid_argument.
void validate(const RunConfig& config);

/// <command>_<preset>_<precision>_<variant> under config.out; deterministic.
std::filesystem::path artifact_stem(const RunConfig& config);

/// Runs a validated config. Returns the process exit status; artifacts go
/// under config.out and progress lines to log.
int dispatch(const RunConfig& config, std::ostream& log);

int run(int argc, const char* const* argv);

}  // namespace topopt::cli
