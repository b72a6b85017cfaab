#include "cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <iostream>
#include <memory>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "topopt/conditioning.hpp"
#include "topopt/element.hpp"
#include "topopt/io.hpp"
#include "topopt/mesh.hpp"
#include "topopt/simp.hpp"
#include "topopt/solver.hpp"

namespace topopt::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kCommands[] = {"solve", "simp", "kappa", "bf16-study", "bench", "export"};

bool needs_preset(const RunConfig& c) {
  if (c.command == "export") return c.snapshot.empty();
  if (c.command == "bench") return c.kind != "matvec";
  return true;
}

struct Setup {
  ProblemPreset preset;
  std::shared_ptr<const DofMap> dofs;
  UnitStiffness ke;
};

Setup setup(const std::string& name, double scale) {
  Setup s{make_preset(name, scale), nullptr, {}};
  s.dofs = std::make_shared<const DofMap>(build_dof_map(s.preset.mesh));
  s.ke = compute_unit_ke(0.3, s.preset.mesh.hx, s.preset.mesh.hy, s.preset.mesh.hz);
  return s;
}

std::string dims_string(const StructuredMesh& m) {
  return std::to_string(m.nelx) + "x" + std::to_string(m.nely) + "x" + std::to_string(m.nelz);
}

CgConfig cg_config(const RunConfig& c) {
  CgConfig cg;
  cg.rel_tol = c.tol;
  cg.max_iter = c.cg_cap;
  return cg;
}

SimpConfig simp_config(const RunConfig& c, Precision fallback) {
  SimpConfig s;
  s.op = {c.precision.value_or(fallback), c.variant, c.scatter(), c.threads};
  s.cg.rel_tol = c.tol;
  s.cg.max_iter = c.cg_cap;
  s.max_iterations = c.iters;
  return s;
}

fs::path with_suffix(const fs::path& stem, const std::string& suffix) {
  fs::path p = stem;
  p += suffix;
  return p;
}

void wrote(std::ostream& log, const fs::path& p) { log << "wrote " << p.string() << '\n'; }

int cmd_solve(const RunConfig& c, std::ostream& log) {
  const auto s = setup(c.preset, c.scale);
  const std::vector<double> rho(s.dofs->n_elem, c.density);
  const Precision precision = c.precision.value_or(Precision::fp64);
  const MatFreeOperator op(s.dofs, s.ke, rho, SimpParams{c.penalty, 1e-9}, s.preset.bcs.fixed,
                           {precision, c.variant, c.scatter(), c.threads});
  const auto cg = cg_config(c);
  const auto sol = precision == Precision::bf16
                       ? solve_bf16_plain(op, s.preset.bcs.load, cg)
                       : pcg(op, s.preset.bcs.load, op.jacobi_diagonal(), cg);
  const auto& r = sol.report;
  log << "solve " << c.preset << ' ' << dims_string(s.preset.mesh) << ' ' << to_string(precision)
      << ' ' << to_string(c.variant) << ": " << to_string(r.termination) << " after "
      << r.iterations << " iterations, residual " << format_g9(r.verified_rel_residual)
      << " (FP64), compliance " << format_g9(r.compliance) << '\n';
  const auto stem = artifact_stem(c);
  write_text_file(with_suffix(stem, "_report.json"), solve_report_json(r));
  wrote(log, with_suffix(stem, "_report.json"));
  write_text_file(with_suffix(stem, "_residuals.csv"), residual_history_csv(r));
  wrote(log, with_suffix(stem, "_residuals.csv"));
  return 0;
}

int cmd_simp(const RunConfig& c, std::ostream& log) {
  const auto preset = make_preset(c.preset, c.scale);
  const auto cfg = simp_config(c, Precision::fp64);
  const auto h = run_simp(preset, cfg, [&](const SimpRecord& r) {
    log << "iter " << r.iter << " c=" << format_g9(r.compliance) << " cg=" << r.cg_iters
        << " g=" << format_g9(r.grayness) << " p=" << r.penalty << " beta=" << r.beta
        << (r.restarted ? " restarted" : "") << '\n';
  });
  const auto stem = artifact_stem(c);
  write_text_file(with_suffix(stem, "_history.csv"), simp_history_csv(h));
  wrote(log, with_suffix(stem, "_history.csv"));
  write_text_file(with_suffix(stem, "_summary.json"), simp_summary_json(h));
  wrote(log, with_suffix(stem, "_summary.json"));
  if (!h.selected) {
    std::cerr << "error: no iterate met the selection rule; no density snapshot written\n";
    return 3;
  }
  const DensityField field{{preset.mesh.nelx, preset.mesh.nely, preset.mesh.nelz},
                           h.selected->rho_phys};
  wrote(log, write_density_binary(with_suffix(stem, "_selected"), field));
  log << "selected iter " << h.selected->iter << " c=" << format_g9(h.selected->compliance)
      << " g=" << format_g9(h.selected->grayness) << " restarts=" << h.restart_count << '\n';
  return 0;
}

int cmd_kappa(const RunConfig& c, std::ostream& log) {
  const auto scales = c.scales.empty() ? std::vector<double>{c.scale} : c.scales;
  const auto penalties = c.penalties.empty() ? std::vector<double>{c.penalty} : c.penalties;
  KappaConfig kc;
  kc.power_seed = c.seed;
  std::vector<KappaRow> rows;
  for (double scale : scales) {
    const auto s = setup(c.preset, scale);
    const std::vector<double> rho(s.dofs->n_elem, c.density);
    for (double p : penalties) {
      const MatFreeOperator op(s.dofs, s.ke, rho, SimpParams{p, 1e-9}, s.preset.bcs.fixed,
                               {Precision::fp64, Variant::fused, ScatterMode::serial, 1});
      rows.push_back({s.dofs->n_elem, p, estimate_kappa(op, kc)});
      const auto& r = rows.back().report;
      log << dims_string(s.preset.mesh) << " p=" << p << " kappa=" << format_g9(r.kappa)
          << " eps*kappa=" << format_g9(r.eps_kappa) << (r.capped ? " (power capped)" : "") << '\n';
    }
  }
  const auto stem = artifact_stem(c);
  write_text_file(with_suffix(stem, ".csv"), kappa_csv(rows));
  wrote(log, with_suffix(stem, ".csv"));
  write_text_file(with_suffix(stem, ".json"), kappa_json(rows));
  wrote(log, with_suffix(stem, ".json"));
  return 0;
}

int cmd_bf16_study(const RunConfig& c, std::ostream& log) {
  const auto scales = c.scales.empty() ? std::vector<double>{c.scale} : c.scales;
  std::ostringstream csv;
  csv << "n_elem,solver,wall_ms,cg_iters,compliance,delta_c,termination\n";
  json rows = json::array();
  for (double scale : scales) {
    const auto s = setup(c.preset, scale);
    const std::vector<double> rho(s.dofs->n_elem, c.density);
    auto make = [&](Precision p) {
      return MatFreeOperator(s.dofs, s.ke, rho, SimpParams{c.penalty, 1e-9}, s.preset.bcs.fixed,
                             {p, c.variant, c.scatter(), c.threads});
    };
    const auto op32 = make(Precision::fp32);
    const auto op16 = make(Precision::bf16);
    const auto& f = s.preset.bcs.load;
    const auto cg = cg_config(c);
    std::vector<std::pair<std::string, SolveReport>> results;
    results.emplace_back("fp32-reference", pcg(op32, f, op32.jacobi_diagonal(), cg).report);
    results.emplace_back("bf16-plain", solve_bf16_plain(op16, f, cg).report);
    for (double inner : {1e-3, 1e-5}) {
      IrConfig ir;
      ir.rel_tol = c.tol;
      ir.inner_tol = inner;
      ir.inner_max_iter = c.cg_cap;
      std::ostringstream name;
      name << "bf16-ir-" << inner;
      results.emplace_back(name.str(), iterative_refinement(op32, op16, f, ir).report);
    }
    const double c_ref = results.front().second.compliance;
    for (const auto& [name, r] : results) {
      const double delta = name == "fp32-reference" ? 0.0 : std::abs(c_ref - r.compliance) / c_ref;
      csv << s.dofs->n_elem << ',' << name << ',' << format_g9(1e3 * r.wall_time) << ','
          << r.iterations << ',' << format_g9(r.compliance) << ',' << format_g9(delta) << ','
          << to_string(r.termination) << '\n';
      json row{{"n_elem", s.dofs->n_elem},
               {"solver", name},
               {"wall_ms", std::stod(format_g9(1e3 * r.wall_time))},
               {"cg_iters", r.iterations},
               {"compliance", std::stod(format_g9(r.compliance))},
               {"delta_c", std::stod(format_g9(delta))},
               {"termination", to_string(r.termination)}};
      if (r.outer_iterations > 0) row["outer_iterations"] = r.outer_iterations;
      rows.push_back(std::move(row));
      log << dims_string(s.preset.mesh) << ' ' << name << ": c=" << format_g9(r.compliance)
          << " delta_c=" << format_g9(delta) << " iters=" << r.iterations << ' '
          << to_string(r.termination) << '\n';
    }
  }
  const auto stem = artifact_stem(c);
  write_text_file(with_suffix(stem, ".csv"), csv.str());
  wrote(log, with_suffix(stem, ".csv"));
  write_text_file(with_suffix(stem, ".json"), rows.dump(2) + "\n");
  wrote(log, with_suffix(stem, ".json"));
  return 0;
}

std::string stage_csv(const std::vector<MatvecTiming>& rows) {
  std::ostringstream os;
  os << "n_elem,precision,pattern,repeats,gather_us,gemm_us,scatter_us,gather_alone_us,"
        "gemm_alone_us,scatter_alone_us,stage_sum_lower_bound_us,three_stage_us,fused_us,"
        "speedup,max_rel_diff\n";
  for (const auto& r : rows) {
    os << r.n_elem << ',' << to_string(r.precision) << ',' << to_string(r.pattern) << ','
       << r.repeats << ',' << format_g9(r.gather_us) << ',' << format_g9(r.gemm_us) << ','
       << format_g9(r.scatter_us) << ',' << format_g9(r.gather_alone_us) << ','
       << format_g9(r.gemm_alone_us) << ',' << format_g9(r.scatter_alone_us) << ','
       << format_g9(r.stage_sum_us()) << ',' << format_g9(r.three_stage.mean_us) << ','
       << format_g9(r.fused.mean_us) << ',' << format_g9(r.speedup) << ','
       << format_g9(r.max_rel_diff) << '\n';
  }
  return os.str();
}

int write_study(const RunConfig& c, const StudyReport& rep, std::ostream& log) {
  const auto stem = artifact_stem(c);
  write_text_file(with_suffix(stem, ".csv"), study_csv(rep));
  wrote(log, with_suffix(stem, ".csv"));
  write_text_file(with_suffix(stem, ".json"), study_json(rep));
  wrote(log, with_suffix(stem, ".json"));
  return rep.agg.passed ? 0 : 4;
}

int cmd_bench(const RunConfig& c, std::ostream& log) {
  if (c.kind == "matvec") {
    const auto sizes = c.n_elem.empty() ? std::vector<std::size_t>{8000} : c.n_elem;
    std::vector<Precision> precisions{Precision::fp64, Precision::fp32, Precision::bf16};
    if (c.precision) precisions = {*c.precision};
    std::vector<MatvecTiming> rows;
    for (std::size_t n : sizes) {
      for (Precision p : precisions) {
        MicrobenchConfig mc;
        mc.n_elem = n;
        mc.precision = p;
        mc.pattern = c.pattern;
        mc.repeats = c.repeats;
        mc.seed = c.seed;
        mc.scatter = c.scatter();
        mc.threads = c.threads;
        rows.push_back(run_matvec_bench(mc));
        const auto& r = rows.back();
        log << "matvec n_elem=" << r.n_elem << ' ' << to_string(p) << " three-stage "
            << format_g9(r.three_stage.mean_us) << " us, fused " << format_g9(r.fused.mean_us)
            << " us, speedup " << format_g9(r.speedup) << '\n';
      }
    }
    const auto stem = artifact_stem(c);
    write_text_file(with_suffix(stem, ".csv"), matvec_csv(rows));
    wrote(log, with_suffix(stem, ".csv"));
    write_text_file(with_suffix(stem, "_stages.csv"), stage_csv(rows));
    wrote(log, with_suffix(stem, "_stages.csv"));
    return 0;
  }
  const auto preset = make_preset(c.preset, c.scale);
  StudyReport rep;
  switch (parse_study_kind(c.kind)) {
    case StudyKind::repeat:
      rep = run_repeat_study(preset, simp_config(c, Precision::fp64), c.runs > 0 ? c.runs : 5);
      break;
    case StudyKind::determinism: {
      DeterminismConfig dc;
      if (c.runs > 0) dc.n = c.runs;
      dc.density = c.density;
      dc.penalty = c.penalty;
      dc.scatter = c.scatter();
      if (c.threads > 0) dc.threads = c.threads;
      dc.precision = c.precision.value_or(Precision::fp32);
      dc.cg = cg_config(c);
      dc.cg.record_history = false;
      rep = run_determinism_study(preset, dc);
      break;
    }
    case StudyKind::highcap:
      rep = run_highcap_validation(preset, simp_config(c, Precision::fp32), c.cg_cap, c.high_cap);
      break;
  }
  log << to_string(rep.kind) << ' ' << rep.preset << ": " << rep.records.size()
      << " runs, compliance mean " << format_g9(rep.agg.compliance_mean) << ", spread "
      << format_g9(rep.agg.spread_rel) << ", wall CV " << format_g9(rep.agg.wall_cv_pct) << "%"
      << (rep.agg.passed ? "" : " [threshold exceeded]") << '\n';
  return write_study(c, rep, log);
}

int cmd_export(const RunConfig& c, std::ostream& log) {
  fs::path snapshot = c.snapshot;
  if (snapshot.empty()) {
    RunConfig simp = c;
    simp.command = "simp";
    snapshot = with_suffix(artifact_stem(simp), "_selected.bin");
  }
  if (!fs::exists(snapshot)) {
    std::cerr << "error: density snapshot " << snapshot.string()
              << " not found; run the simp command first or pass --snapshot\n";
    return 3;
  }
  const auto field = read_density_binary(snapshot);
  const fs::path stem = c.out / ("export_" + snapshot.stem().string());
  wrote(log, write_density_binary(stem, field));
  write_density_vtk(with_suffix(stem, ".vtk"), field);
  wrote(log, with_suffix(stem, ".vtk"));
  if (c.slices) {
    for (const auto& p : write_mid_plane_slices(stem, field)) wrote(log, p);
  }
  log << "grid " << field.dims[0] << 'x' << field.dims[1] << 'x' << field.dims[2]
      << " mean density " << format_g9(mean(field.values)) << " grayness "
      << format_g9(grayness(field.values)) << '\n';
  return 0;
}

}  // namespace

ParseOutcome parse_command_line(int argc, const char* const* argv) {
  CLI::App app{"Matrix-free SIMP topology optimization on structured hexahedral grids", "topopt"};
  app.set_config("--config", "", "Flat key=value file; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.fallthrough();
  app.require_subcommand(1, 1);

  RunConfig c;
  std::string variant = "fused";
  std::string precision;
  std::string pattern = "structured";
  std::string out = c.out.string();
  std::string snapshot;
  bool no_slices = false;

  app.add_option("--preset", c.preset, "cantilever, mbb, bridge or torsion");
  app.add_option("--scale", c.scale, "Multiplier on the reference grid")->capture_default_str();
  app.add_option("--variant", variant, "three-stage or fused")->capture_default_str();
  app.add_option("--precision", precision, "fp64, fp32 or bf16");
  app.add_option("--iters", c.iters, "SIMP iterations (0 = full schedule)")->capture_default_str();
  app.add_option("--cg-cap", c.cg_cap, "CG iteration cap per solve")->capture_default_str();
  app.add_option("--high-cap", c.high_cap, "Second CG cap for bench --kind highcap")
      ->capture_default_str();
  app.add_option("--tol", c.tol, "Relative residual tolerance")->capture_default_str();
  app.add_option("--seed", c.seed, "Seed for random vectors and index patterns")
      ->capture_default_str();
  app.add_option("--threads", c.threads, "Scatter threads (0 = hardware)")->capture_default_str();
  app.add_option("--out", out, "Output directory")->capture_default_str();
  app.add_flag("--serial", c.serial, "Deterministic serial scatter");
  app.add_option("--density", c.density, "Uniform density for single solves")
      ->capture_default_str();
  app.add_option("--penalty", c.penalty, "SIMP penalty for single solves")->capture_default_str();
  app.add_option("--scales", c.scales, "Comma-separated grid scales")->delimiter(',');
  app.add_option("--penalties", c.penalties, "Comma-separated penalties for kappa")->delimiter(',');
  app.add_option("--kind", c.kind, "bench kind: matvec, repeat, determinism or highcap")
      ->capture_default_str();
  app.add_option("--n-elem", c.n_elem, "Comma-separated synthetic sizes for bench matvec")
      ->delimiter(',');
  app.add_option("--pattern", pattern, "structured or seeded_random")->capture_default_str();
  app.add_option("--repeats", c.repeats, "Timed repeats (0 = adaptive)")->capture_default_str();
  app.add_option("--runs", c.runs, "Runs per study (0 = study default)")->capture_default_str();
  app.add_option("--snapshot", snapshot, "Density snapshot (.bin) for export");
  app.add_flag("--no-slices", no_slices, "Skip mid-plane slice text files on export");

  app.add_subcommand("solve", "Single equilibrium solve at uniform density");
  app.add_subcommand("simp", "Full SIMP run with continuation");
  app.add_subcommand("kappa", "Condition-number estimates at uniform density");
  app.add_subcommand("bf16-study", "FP32 reference, plain BF16 and BF16 refinement solves");
  app.add_subcommand("bench", "Matvec microbenchmark or a repeat/determinism/high-cap study");
  app.add_subcommand("export", "Write a density snapshot as binary, VTK and slices");

  ParseOutcome outcome;
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    outcome.message = app.help();
    return outcome;
  } catch (const CLI::CallForAllHelp&) {
    outcome.message = app.help("", CLI::AppFormatMode::All);
    return outcome;
  } catch (const CLI::ParseError& e) {
    outcome.exit_code = e.get_exit_code() != 0 ? e.get_exit_code() : 2;
    outcome.message = std::string("error: ") + e.what() + "\nRun with --help for usage.\n";
    return outcome;
  }

  c.command = app.get_subcommands().front()->get_name();
  try {
    c.variant = parse_variant(variant);
    if (!precision.empty()) c.precision = parse_precision(precision);
    c.pattern = parse_index_pattern(pattern);
  } catch (const std::invalid_argument& e) {
    outcome.exit_code = 2;
    outcome.message = std::string("error: ") + e.what() + "\n";
    return outcome;
  }
  c.out = out;
  c.snapshot = snapshot;
  c.slices = !no_slices;
  outcome.config = std::move(c);
  return outcome;
}

void validate(const RunConfig& c) {
  bool known = false;
  for (const char* name : kCommands) known = known || c.command == name;
  if (!known) throw std::invalid_argument("unknown command '" + c.command + "'");
  if (needs_preset(c) && c.preset.empty()) {
    throw std::invalid_argument(c.command +
                                " requires --preset (cantilever, mbb, bridge, torsion)");
  }
  if (!c.preset.empty()) parse_preset(c.preset);
  if (!(c.scale > 0.0)) throw std::invalid_argument("--scale must be positive");
  for (double s : c.scales) {
    if (!(s > 0.0)) throw std::invalid_argument("--scales entries must be positive");
  }
  if (c.cg_cap < 1 || c.high_cap < 1) throw std::invalid_argument("CG caps must be >= 1");
  if (!(c.tol > 0.0 && c.tol < 1.0)) throw std::invalid_argument("--tol must lie in (0, 1)");
  if (!(c.density > 0.0 && c.density <= 1.0)) {
    throw std::invalid_argument("--density must lie in (0, 1]");
  }
  if (!(c.penalty >= 1.0)) throw std::invalid_argument("--penalty must be >= 1");
  for (double p : c.penalties) {
    if (!(p >= 1.0)) throw std::invalid_argument("--penalties entries must be >= 1");
  }
  if (c.iters < 0 || c.repeats < 0 || c.runs < 0) {
    throw std::invalid_argument("--iters, --repeats and --runs must be >= 0");
  }
  if (c.command == "bench") {
    if (c.kind != "matvec") parse_study_kind(c.kind);
    for (std::size_t n : c.n_elem) {
      if (n < 1) throw std::invalid_argument("--n-elem entries must be >= 1");
    }
  }
  if (c.command == "simp" && c.precision == Precision::bf16) {
    throw std::invalid_argument("simp does not run in bf16; use fp64 or fp32");
  }
}

fs::path artifact_stem(const RunConfig& c) {
  std::string name = c.command;
  if (c.command == "bench") {
    name += "_" + c.kind;
    if (c.kind != "matvec") name += "_" + c.preset;
    return c.out / name;
  }
  name += "_" + c.preset;
  if (c.command == "solve" || c.command == "simp") {
    name += "_" + std::string(to_string(c.precision.value_or(Precision::fp64))) + "_" +
            std::string(to_string(c.variant));
  }
  return c.out / name;
}

int dispatch(const RunConfig& c, std::ostream& log) {
  if (c.command == "solve") return cmd_solve(c, log);
  if (c.command == "simp") return cmd_simp(c, log);
  if (c.command == "kappa") return cmd_kappa(c, log);
  if (c.command == "bf16-study") return cmd_bf16_study(c, log);
  if (c.command == "bench") return cmd_bench(c, log);
  if (c.command == "export") return cmd_export(c, log);
  throw std::invalid_argument("unknown command '" + c.command + "'");
}

int run(int argc, const char* const* argv) {
  const auto parsed = parse_command_line(argc, argv);
  if (!parsed.config) {
    (parsed.exit_code == 0 ? std::cout : std::cerr) << parsed.message;
    return parsed.exit_code;
  }
  try {
    validate(*parsed.config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\nRun with --help for usage.\n";
    return 2;
  }
  try {
    return dispatch(*parsed.config, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace topopt::cli
