#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "topopt/mesh.hpp"
#include "topopt/operator.hpp"
#include "topopt/precision.hpp"
#include "topopt/simp.hpp"

namespace topopt {

/// max(100, min(2000, floor(5e7 / n_elem))).
int adaptive_repeats(std::size_t n_elem);

enum class IndexPattern { structured, seeded_random };

std::string_view to_string(IndexPattern p) noexcept;
IndexPattern parse_index_pattern(std::string_view name);

/// Cantilever-proportioned grid (4k x 2k x k) with roughly n_elem elements.
StructuredMesh synthetic_mesh(std::size_t n_elem);

/// Structured edof table, optionally with every DOF renumbered by a seeded
/// random permutation (same 24-per-row structure, no locality).
DofMap synthetic_dof_map(const StructuredMesh& mesh, IndexPattern pattern, std::uint64_t seed);

struct MicrobenchConfig {
  std::size_t n_elem = 8000;
  Precision precision = Precision::fp32;
  IndexPattern pattern = IndexPattern::structured;
  int repeats = 0;  // 0 = adaptive_repeats(n_elem)
  int warmup = 5;
  std::uint64_t seed = 42;
  ScatterMode scatter = ScatterMode::serial;
  unsigned threads = 0;
};

struct TimingStats {
  double mean_us = 0.0;
  double std_us = 0.0;
};

struct MatvecTiming {
  std::size_t n_elem = 0;
  std::size_t n_dof = 0;
  Precision precision = Precision::fp32;
  IndexPattern pattern = IndexPattern::structured;
  int repeats = 0;
  TimingStats three_stage;
  TimingStats fused;
  TimingStats fp64_three_stage;  // baseline for speedup_vs_fp64_3stage
  // Stage times measured inside one three-stage pass.
  double gather_us = 0.0;
  double gemm_us = 0.0;
  double scatter_us = 0.0;
  // Stage times measured with each stage looped on its own.
  double gather_alone_us = 0.0;
  double gemm_alone_us = 0.0;
  double scatter_alone_us = 0.0;
  /// Sum of separately timed stages; a lower bound on the full pipeline.
  [[nodiscard]] double stage_sum_us() const noexcept {
    return gather_alone_us + gemm_alone_us + scatter_alone_us;
  }
  double speedup = 0.0;       // three_stage / fused
  double max_rel_diff = 0.0;  // fused vs three-stage, checked before timing
};

/// Times three-stage (with per-stage splits) and fused on identical inputs.
/// Both outputs are checked against an untimed reference first and again
/// after timing; a mismatch throws std::runtime_error.
MatvecTiming run_matvec_bench(const MicrobenchConfig& config);

/// One CSV row per (variant, precision): n_elem, variant, precision,
/// mean_us, std_us, speedup_vs_fp64_3stage.
std::string matvec_csv(const std::vector<MatvecTiming>& rows);

struct StudyRecord {
  int run = 0;
  double wall_s = 0.0;
  double compliance = 0.0;
  long long cg_iters = 0;
  int cg_cap = 0;
};

struct StudyAggregates {
  double wall_mean = 0.0;
  double wall_std = 0.0;
  double wall_cv_pct = 0.0;
  double compliance_mean = 0.0;
  double compliance_std = 0.0;
  double c_min = 0.0;
  double c_max = 0.0;
  double c_ref = 0.0;          // FP64 reference (determinism) or canonical cap (high-cap)
  double spread_rel = 0.0;     // (c_max - c_min) / c_ref
  double max_delta_ref = 0.0;  // max |c - c_ref| / c_ref
  double threshold = 0.0;      // high-cap acceptance threshold
  bool passed = true;
};

enum class StudyKind { repeat, determinism, highcap };

std::string_view to_string(StudyKind k) noexcept;
StudyKind parse_study_kind(std::string_view name);

struct StudyReport {
  StudyKind kind = StudyKind::repeat;
  std::string preset;
  std::vector<StudyRecord> records;
  StudyAggregates agg;
};

/// Recomputes every aggregate from the records (c_ref and threshold are
/// inputs and are kept).
StudyAggregates aggregate(StudyKind kind, const std::vector<StudyRecord>& records, double c_ref,
                          double threshold);

/// N full SIMP runs with identical settings.
StudyReport run_repeat_study(const ProblemPreset& preset, const SimpConfig& config, int n = 5);

struct DeterminismConfig {
  int n = 10;
  double density = 0.5;
  double penalty = 3.0;
  ScatterMode scatter = ScatterMode::parallel_atomic;
  unsigned threads = 4;
  Precision precision = Precision::fp32;
  CgConfig cg{1e-5, 1000, false};
  double threshold = 1e-4;  // on (c_max - c_min) / c_ref
};

/// N cold-start fused solves at uniform density, compared with an FP64
/// reference solve.
StudyReport run_determinism_study(const ProblemPreset& preset,
                                  const DeterminismConfig& config = {});

inline constexpr double kHighCapThreshold = 5e-4;

/// Paired SIMP runs at two CG caps; records[0] is the canonical cap.
StudyReport run_highcap_validation(const ProblemPreset& preset, const SimpConfig& config,
                                   int canonical_cap = 1000, int high_cap = 5000);

/// Aggregates as "# key=value" lines, then a record table. Floats use 9
/// significant digits.
std::string study_csv(const StudyReport& report);
StudyReport parse_study_csv(std::string_view text);
std::string study_json(const StudyReport& report);

/// "%.9g".
std::string format_g9(double v);

}  // namespace topopt
