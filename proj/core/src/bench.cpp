#include "topopt/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "topopt/solver.hpp"

namespace topopt {

int adaptive_repeats(std::size_t n_elem) {
  if (n_elem == 0) throw std::invalid_argument("adaptive_repeats: n_elem must be positive");
  const auto r = static_cast<long long>(50'000'000ULL / n_elem);
  return static_cast<int>(std::max(100LL, std::min(2000LL, r)));
}

std::string_view to_string(IndexPattern p) noexcept {
  return p == IndexPattern::structured ? "structured" : "seeded_random";
}

IndexPattern parse_index_pattern(std::string_view name) {
  if (name == "structured") return IndexPattern::structured;
  if (name == "seeded_random" || name == "random") return IndexPattern::seeded_random;
  throw std::invalid_argument("unknown index pattern '" + std::string(name) + "'");
}

StructuredMesh synthetic_mesh(std::size_t n_elem) {
  if (n_elem == 0) throw std::invalid_argument("synthetic_mesh: n_elem must be positive");
  const int k = std::max(1, static_cast<int>(std::lround(std::cbrt(double(n_elem) / 8.0))));
  return build_mesh(4 * k, 2 * k, k);
}

DofMap synthetic_dof_map(const StructuredMesh& mesh, IndexPattern pattern, std::uint64_t seed) {
  auto map = build_dof_map(mesh);
  if (pattern == IndexPattern::seeded_random) {
    std::vector<std::uint32_t> perm(map.n_dof);
    std::iota(perm.begin(), perm.end(), 0u);
    std::mt19937_64 gen(seed);
    std::shuffle(perm.begin(), perm.end(), gen);
    for (auto& d : map.edof) d = perm[d];
  }
  return map;
}

namespace {

using Clock = std::chrono::steady_clock;

double micros(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::micro>(b - a).count();
}

TimingStats stats(const std::vector<double>& samples) {
  TimingStats s;
  if (samples.empty()) return s;
  s.mean_us = std::accumulate(samples.begin(), samples.end(), 0.0) / double(samples.size());
  if (samples.size() > 1) {
    double ss = 0.0;
    for (double x : samples) ss += (x - s.mean_us) * (x - s.mean_us);
    s.std_us = std::sqrt(ss / double(samples.size() - 1));
  }
  return s;
}

template <typename Fn>
TimingStats time_loop(int warmup, int repeats, Fn&& fn) {
  for (int i = 0; i < warmup; ++i) fn();
  std::vector<double> samples;
  samples.reserve(repeats);
  for (int i = 0; i < repeats; ++i) {
    const auto a = Clock::now();
    fn();
    samples.push_back(micros(a, Clock::now()));
  }
  return stats(samples);
}

template <typename T>
double rel_diff(const std::vector<T>& a, const std::vector<T>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    num += d * d;
    den += double(b[i]) * double(b[i]);
  }
  return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
}

template <typename T>
void bench_precision(const MatFreeOperator& op, const MicrobenchConfig& cfg, int repeats,
                     const std::vector<double>& input, MatvecTiming& out) {
  const std::vector<T> v(input.begin(), input.end());
  const std::size_t n = v.size();
  std::vector<T> ref3(n), reff(n), w(n);
  op.matvec_three_stage<T>(v, ref3);
  op.matvec_fused<T>(v, reff);
  out.max_rel_diff = rel_diff(reff, ref3);
  const double tol = std::is_same_v<T, double> ? 1e-12 : 1e-5;
  if (!(out.max_rel_diff <= tol)) {
    throw std::runtime_error("matvec bench: fused and three-stage disagree (" +
                             std::to_string(out.max_rel_diff) + " relative)");
  }

  out.three_stage = time_loop(cfg.warmup, repeats, [&] { op.matvec_three_stage<T>(v, w); });
  const bool serial = cfg.scatter == ScatterMode::serial;
  if (serial && w != ref3)
    throw std::runtime_error("matvec bench: timed three-stage output changed");
  out.fused = time_loop(cfg.warmup, repeats, [&] { op.matvec_fused<T>(v, w); });
  if (serial && w != reff) throw std::runtime_error("matvec bench: timed fused output changed");

  StageBuffers<T> buf;
  std::vector<double> g, p, s;
  for (int i = 0; i < cfg.warmup + repeats; ++i) {
    const auto t0 = Clock::now();
    op.gather<T>(v, buf);
    const auto t1 = Clock::now();
    op.element_products<T>(buf);
    const auto t2 = Clock::now();
    op.scatter<T>(buf, w);
    const auto t3 = Clock::now();
    if (i < cfg.warmup) continue;
    g.push_back(micros(t0, t1));
    p.push_back(micros(t1, t2));
    s.push_back(micros(t2, t3));
  }
  out.gather_us = stats(g).mean_us;
  out.gemm_us = stats(p).mean_us;
  out.scatter_us = stats(s).mean_us;
  out.gather_alone_us = time_loop(cfg.warmup, repeats, [&] { op.gather<T>(v, buf); }).mean_us;
  out.gemm_alone_us = time_loop(cfg.warmup, repeats, [&] { op.element_products<T>(buf); }).mean_us;
  out.scatter_alone_us = time_loop(cfg.warmup, repeats, [&] { op.scatter<T>(buf, w); }).mean_us;
}

}  // namespace

MatvecTiming run_matvec_bench(const MicrobenchConfig& cfg) {
  const auto mesh = synthetic_mesh(cfg.n_elem);
  const auto dofs = std::make_shared<const DofMap>(synthetic_dof_map(mesh, cfg.pattern, cfg.seed));
  const auto ke = compute_unit_ke();
  const std::vector<double> rho(dofs->n_elem, 0.5);
  const SimpParams simp{};

  MatvecTiming out;
  out.n_elem = dofs->n_elem;
  out.n_dof = dofs->n_dof;
  out.precision = cfg.precision;
  out.pattern = cfg.pattern;
  out.repeats = cfg.repeats > 0 ? cfg.repeats : adaptive_repeats(dofs->n_elem);
  if (cfg.warmup < 0) throw std::invalid_argument("matvec bench: warmup must be >= 0");

  std::mt19937_64 gen(cfg.seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> input(dofs->n_dof);
  for (auto& x : input) x = dist(gen);

  OperatorOptions opts{cfg.precision, Variant::fused, cfg.scatter, cfg.threads};
  const MatFreeOperator op(dofs, ke, rho, simp, {}, opts);
  if (cfg.precision == Precision::fp64) {
    bench_precision<double>(op, cfg, out.repeats, input, out);
    out.fp64_three_stage = out.three_stage;
  } else {
    bench_precision<float>(op, cfg, out.repeats, input, out);
    opts.precision = Precision::fp64;
    const MatFreeOperator op64(dofs, ke, rho, simp, {}, opts);
    const std::vector<double> v(input);
    std::vector<double> w(v.size());
    out.fp64_three_stage =
        time_loop(cfg.warmup, out.repeats, [&] { op64.matvec_three_stage<double>(v, w); });
  }
  out.speedup = out.three_stage.mean_us / out.fused.mean_us;
  return out;
}

std::string format_g9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string matvec_csv(const std::vector<MatvecTiming>& rows) {
  std::ostringstream os;
  os << "n_elem,variant,precision,mean_us,std_us,speedup_vs_fp64_3stage\n";
  for (const auto& r : rows) {
    const double base = r.fp64_three_stage.mean_us;
    for (const auto& [variant, t] :
         {std::pair{Variant::three_stage, r.three_stage}, std::pair{Variant::fused, r.fused}}) {
      os << r.n_elem << ',' << to_string(variant) << ',' << to_string(r.precision) << ','
         << format_g9(t.mean_us) << ',' << format_g9(t.std_us) << ',' << format_g9(base / t.mean_us)
         << '\n';
    }
  }
  return os.str();
}

std::string_view to_string(StudyKind k) noexcept {
  switch (k) {
    case StudyKind::repeat:
      return "repeat";
    case StudyKind::determinism:
      return "determinism";
    case StudyKind::highcap:
      return "highcap";
  }
  return "unknown";
}

StudyKind parse_study_kind(std::string_view name) {
  if (name == "repeat") return StudyKind::repeat;
  if (name == "determinism") return StudyKind::determinism;
  if (name == "highcap") return StudyKind::highcap;
  throw std::invalid_argument("unknown study kind '" + std::string(name) + "'");
}

StudyAggregates aggregate(StudyKind kind, const std::vector<StudyRecord>& records, double c_ref,
                          double threshold) {
  StudyAggregates a;
  a.c_ref = c_ref;
  a.threshold = threshold;
  if (records.empty()) return a;
  const double n = double(records.size());
  double ws = 0.0, cs = 0.0;
  a.c_min = records.front().compliance;
  a.c_max = records.front().compliance;
  for (const auto& r : records) {
    ws += r.wall_s;
    cs += r.compliance;
    a.c_min = std::min(a.c_min, r.compliance);
    a.c_max = std::max(a.c_max, r.compliance);
  }
  a.wall_mean = ws / n;
  a.compliance_mean = cs / n;
  if (records.size() > 1) {
    double wv = 0.0, cv = 0.0;
    for (const auto& r : records) {
      wv += (r.wall_s - a.wall_mean) * (r.wall_s - a.wall_mean);
      cv += (r.compliance - a.compliance_mean) * (r.compliance - a.compliance_mean);
    }
    a.wall_std = std::sqrt(wv / (n - 1.0));
    a.compliance_std = std::sqrt(cv / (n - 1.0));
  }
  a.wall_cv_pct = a.wall_mean > 0.0 ? 100.0 * a.wall_std / a.wall_mean : 0.0;
  if (c_ref != 0.0) {
    a.spread_rel = (a.c_max - a.c_min) / std::abs(c_ref);
    for (const auto& r : records) {
      a.max_delta_ref = std::max(a.max_delta_ref, std::abs(r.compliance - c_ref) / std::abs(c_ref));
    }
  }
  a.passed = kind == StudyKind::repeat || threshold <= 0.0 || a.spread_rel <= threshold;
  if (!std::isfinite(a.spread_rel)) a.passed = false;
  for (const auto& r : records) {
    if (!std::isfinite(r.compliance)) a.passed = false;
  }
  return a;
}

namespace {

double selected_or_nan(const SimpHistory& h) {
  return h.selected ? h.selected->compliance : std::nan("");
}

}  // namespace

StudyReport run_repeat_study(const ProblemPreset& preset, const SimpConfig& config, int n) {
  if (n < 1) throw std::invalid_argument("run_repeat_study: n must be >= 1");
  StudyReport rep;
  rep.kind = StudyKind::repeat;
  rep.preset = std::string(preset.name());
  for (int i = 0; i < n; ++i) {
    const auto h = run_simp(preset, config);
    rep.records.push_back({i, h.wall_s, selected_or_nan(h), h.total_cg_iters, config.cg.max_iter});
  }
  rep.agg = aggregate(rep.kind, rep.records, 0.0, 0.0);
  return rep;
}

StudyReport run_determinism_study(const ProblemPreset& preset, const DeterminismConfig& config) {
  if (config.n < 1) throw std::invalid_argument("run_determinism_study: n must be >= 1");
  const auto dofs = std::make_shared<const DofMap>(build_dof_map(preset.mesh));
  const auto ke = compute_unit_ke(0.3, preset.mesh.hx, preset.mesh.hy, preset.mesh.hz);
  const std::vector<double> rho(dofs->n_elem, config.density);
  const SimpParams simp{config.penalty, 1e-9};
  const auto& f = preset.bcs.load;

  const MatFreeOperator ref_op(dofs, ke, rho, simp, preset.bcs.fixed,
                               {Precision::fp64, Variant::fused, ScatterMode::serial, 1});
  const auto ref = pcg(ref_op, f, ref_op.jacobi_diagonal(), config.cg);

  StudyReport rep;
  rep.kind = StudyKind::determinism;
  rep.preset = std::string(preset.name());
  const MatFreeOperator op(dofs, ke, rho, simp, preset.bcs.fixed,
                           {config.precision, Variant::fused, config.scatter, config.threads});
  const auto diag = op.jacobi_diagonal();
  for (int i = 0; i < config.n; ++i) {
    const auto sol = pcg(op, f, diag, config.cg);
    rep.records.push_back({i, sol.report.wall_time, sol.report.compliance, sol.report.iterations,
                           config.cg.max_iter});
  }
  rep.agg = aggregate(rep.kind, rep.records, ref.report.compliance, config.threshold);
  return rep;
}

StudyReport run_highcap_validation(const ProblemPreset& preset, const SimpConfig& config,
                                   int canonical_cap, int high_cap) {
  StudyReport rep;
  rep.kind = StudyKind::highcap;
  rep.preset = std::string(preset.name());
  int run = 0;
  for (int cap : {canonical_cap, high_cap}) {
    SimpConfig c = config;
    c.cg.max_iter = cap;
    const auto h = run_simp(preset, c);
    rep.records.push_back({run++, h.wall_s, selected_or_nan(h), h.total_cg_iters, cap});
  }
  rep.agg = aggregate(rep.kind, rep.records, rep.records.front().compliance, kHighCapThreshold);
  return rep;
}

namespace {

struct AggField {
  const char* key;
  double StudyAggregates::* member;
};

constexpr AggField kAggFields[] = {
    {"wall_mean", &StudyAggregates::wall_mean},
    {"wall_std", &StudyAggregates::wall_std},
    {"wall_cv_pct", &StudyAggregates::wall_cv_pct},
    {"compliance_mean", &StudyAggregates::compliance_mean},
    {"compliance_std", &StudyAggregates::compliance_std},
    {"c_min", &StudyAggregates::c_min},
    {"c_max", &StudyAggregates::c_max},
    {"c_ref", &StudyAggregates::c_ref},
    {"spread_rel", &StudyAggregates::spread_rel},
    {"max_delta_ref", &StudyAggregates::max_delta_ref},
    {"threshold", &StudyAggregates::threshold},
};

}  // namespace

std::string study_csv(const StudyReport& report) {
  std::ostringstream os;
  os << "# kind=" << to_string(report.kind) << '\n';
  os << "# preset=" << report.preset << '\n';
  for (const auto& f : kAggFields)
    os << "# " << f.key << '=' << format_g9(report.agg.*f.member) << '\n';
  os << "# passed=" << (report.agg.passed ? 1 : 0) << '\n';
  os << "run,wall_s,compliance,cg_iters,cg_cap\n";
  for (const auto& r : report.records) {
    os << r.run << ',' << format_g9(r.wall_s) << ',' << format_g9(r.compliance) << ',' << r.cg_iters
       << ',' << r.cg_cap << '\n';
  }
  return os.str();
}

StudyReport parse_study_csv(std::string_view text) {
  StudyReport rep;
  std::istringstream is{std::string(text)};
  std::string line;
  bool header_seen = false;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2);
      const std::string val = line.substr(eq + 1);
      if (key == "kind") {
        rep.kind = parse_study_kind(val);
      } else if (key == "preset") {
        rep.preset = val;
      } else if (key == "passed") {
        rep.agg.passed = val == "1";
      } else {
        for (const auto& f : kAggFields) {
          if (key == f.key) rep.agg.*f.member = std::stod(val);
        }
      }
      continue;
    }
    if (!header_seen) {
      if (line != "run,wall_s,compliance,cg_iters,cg_cap") {
        throw std::invalid_argument("parse_study_csv: unexpected header at line " +
                                    std::to_string(line_no));
      }
      header_seen = true;
      continue;
    }
    std::istringstream ls(line);
    std::string cell[5];
    for (auto& c : cell) {
      if (!std::getline(ls, c, ',')) {
        throw std::invalid_argument("parse_study_csv: short row at line " +
                                    std::to_string(line_no));
      }
    }
    rep.records.push_back({std::stoi(cell[0]), std::stod(cell[1]), std::stod(cell[2]),
                           std::stoll(cell[3]), std::stoi(cell[4])});
  }
  if (!header_seen) throw std::invalid_argument("parse_study_csv: missing record header");
  return rep;
}

std::string study_json(const StudyReport& report) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(report.kind);
  j["preset"] = report.preset;
  auto& agg = j["aggregates"];
  for (const auto& f : kAggFields) agg[f.key] = std::stod(format_g9(report.agg.*f.member));
  agg["passed"] = report.agg.passed;
  auto& recs = j["records"] = nlohmann::ordered_json::array();
  for (const auto& r : report.records) {
    recs.push_back({{"run", r.run},
                    {"wall_s", std::stod(format_g9(r.wall_s))},
                    {"compliance", std::stod(format_g9(r.compliance))},
                    {"cg_iters", r.cg_iters},
                    {"cg_cap", r.cg_cap}});
  }
  return j.dump(2) + "\n";
}

}  // namespace topopt
