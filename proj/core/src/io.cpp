#include "topopt/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

#include "topopt/bench.hpp"

namespace topopt {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

double g9(double v) { return std::stod(format_g9(v)); }

std::size_t field_size(const DensityField& f) {
  for (int d : f.dims) {
    if (d < 1) throw std::invalid_argument("density field: dimensions must be positive");
  }
  const auto n = static_cast<std::size_t>(f.dims[0]) * f.dims[1] * f.dims[2];
  if (f.values.size() != n) {
    throw std::invalid_argument("density field: " + std::to_string(f.values.size()) +
                                " values for " + std::to_string(n) + " cells");
  }
  return n;
}

}  // namespace

std::string solve_report_json(const SolveReport& r) {
  json j;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["termination"] = to_string(r.termination);
  j["final_rel_residual"] = g9(r.final_rel_residual);
  j["verified_rel_residual"] = g9(r.verified_rel_residual);
  j["failed_verifications"] = r.failed_verifications;
  j["compliance"] = g9(r.compliance);
  j["wall_time_s"] = g9(r.wall_time);
  j["precision"] = to_string(r.precision);
  if (!r.outer_trace.empty()) {
    j["outer_iterations"] = r.outer_iterations;
    auto& tr = j["outer_trace"] = json::array();
    for (const auto& s : r.outer_trace) {
      tr.push_back({{"outer", s.outer},
                    {"rel_residual", g9(s.rel_residual)},
                    {"inner_iterations", s.inner_iterations}});
    }
  }
  return j.dump(2) + "\n";
}

std::string residual_history_csv(const SolveReport& r) {
  std::ostringstream os;
  os << "iteration,rel_residual\n";
  for (std::size_t i = 0; i < r.residual_history.size(); ++i) {
    os << i << ',' << format_g9(r.residual_history[i]) << '\n';
  }
  return os.str();
}

std::string simp_history_csv(const SimpHistory& h) {
  std::ostringstream os;
  os << "iter,compliance,cg_iters,grayness,p,beta,rmin,wall_s,restarted\n";
  for (const auto& r : h.records) {
    os << r.iter << ',' << format_g9(r.compliance) << ',' << r.cg_iters << ','
       << format_g9(r.grayness) << ',' << format_g9(r.penalty) << ',' << format_g9(r.beta) << ','
       << format_g9(r.rmin) << ',' << format_g9(r.wall_s) << ',' << (r.restarted ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string simp_summary_json(const SimpHistory& h) {
  json j;
  j["preset"] = h.preset;
  j["precision"] = to_string(h.precision);
  j["variant"] = to_string(h.variant);
  j["cg_cap"] = h.cg_cap;
  j["volume_fraction"] = h.volume_fraction;
  j["iterations"] = h.records.size();
  j["total_cg_iters"] = h.total_cg_iters;
  j["restart_count"] = h.restart_count;
  j["wall_s"] = g9(h.wall_s);
  if (!h.records.empty()) j["final_compliance"] = g9(h.records.back().compliance);
  if (h.selected) {
    j["selected"] = {{"iter", h.selected->iter},
                     {"compliance", g9(h.selected->compliance)},
                     {"grayness", g9(h.selected->grayness)},
                     {"p", h.selected->penalty}};
  } else {
    j["selected"] = nullptr;
  }
  return j.dump(2) + "\n";
}

std::string kappa_csv(std::span<const KappaRow> rows) {
  std::ostringstream os;
  os << "n_elem,p,lambda_max,lambda_min,kappa,eps_kappa,power_steps,capped\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    os << row.n_elem << ',' << format_g9(row.penalty) << ',' << format_g9(r.lambda_max) << ','
       << format_g9(r.lambda_min) << ',' << format_g9(r.kappa) << ',' << format_g9(r.eps_kappa)
       << ',' << r.power_steps << ',' << (r.capped ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string kappa_json(std::span<const KappaRow> rows) {
  json arr = json::array();
  for (const auto& row : rows) {
    const auto& r = row.report;
    arr.push_back({{"n_elem", row.n_elem},
                   {"p", row.penalty},
                   {"lambda_max", g9(r.lambda_max)},
                   {"lambda_min", g9(r.lambda_min)},
                   {"kappa", g9(r.kappa)},
                   {"eps_kappa", g9(r.eps_kappa)},
                   {"threshold_exceeded", r.threshold_exceeded},
                   {"power_steps", r.power_steps},
                   {"inverse_steps", r.inverse_steps},
                   {"capped", r.capped}});
  }
  return arr.dump(2) + "\n";
}

fs::path write_density_binary(const fs::path& stem, const DensityField& field) {
  const std::size_t n = field_size(field);
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  fs::path bin = stem;
  bin += ".bin";
  fs::path meta = stem;
  meta += ".json";
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + bin.string() + " for writing");
  for (std::size_t i = 0; i < n; ++i) {
    auto bits = std::bit_cast<std::uint64_t>(field.values[i]);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char bytes[8];
    std::memcpy(bytes, &bits, 8);
    out.write(bytes, 8);
  }
  if (!out) throw std::runtime_error("write failed: " + bin.string());
  json j;
  j["dims"] = field.dims;
  j["order"] = "x-fastest";
  j["dtype"] = "float64-le";
  j["file"] = bin.filename().string();
  write_text_file(meta, j.dump(2) + "\n");
  return bin;
}

DensityField read_density_binary(const fs::path& bin_path) {
  fs::path meta = bin_path;
  meta.replace_extension(".json");
  const auto j = json::parse(read_text_file(meta));
  if (j.at("dtype") != "float64-le" || j.at("order") != "x-fastest") {
    throw std::runtime_error("unsupported density sidecar in " + meta.string());
  }
  DensityField f;
  f.dims = j.at("dims").get<std::array<int, 3>>();
  const auto n = static_cast<std::size_t>(f.dims[0]) * f.dims[1] * f.dims[2];
  std::ifstream in(bin_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + bin_path.string());
  f.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    char bytes[8];
    if (!in.read(bytes, 8)) {
      throw std::runtime_error(bin_path.string() + " is shorter than its sidecar dims");
    }
    std::uint64_t bits;
    std::memcpy(&bits, bytes, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    f.values[i] = std::bit_cast<double>(bits);
  }
  return f;
}

void write_density_vtk(const fs::path& path, const DensityField& field, std::string_view name) {
  const std::size_t n = field_size(field);
  std::ostringstream os;
  os << "# vtk DataFile Version 3.0\n"
     << "density field\n"
     << "ASCII\n"
     << "DATASET STRUCTURED_POINTS\n"
     << "DIMENSIONS " << field.dims[0] + 1 << ' ' << field.dims[1] + 1 << ' ' << field.dims[2] + 1
     << '\n'
     << "ORIGIN 0 0 0\n"
     << "SPACING 1 1 1\n"
     << "CELL_DATA " << n << '\n'
     << "SCALARS " << name << " double 1\n"
     << "LOOKUP_TABLE default\n";
  char buf[40];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", field.values[i]);
    os << buf;
  }
  write_text_file(path, os.str());
}

std::string mid_plane_slice(const DensityField& field, int axis) {
  field_size(field);
  if (axis < 0 || axis > 2) throw std::invalid_argument("mid_plane_slice: axis must be 0, 1 or 2");
  const auto [nx, ny, nz] = field.dims;
  auto at = [&](int i, int j, int k) {
    return field.values[static_cast<std::size_t>(i) +
                        static_cast<std::size_t>(nx) * (j + static_cast<std::size_t>(ny) * k)];
  };
  // rows run along the second in-plane axis, columns along the first
  const int a = axis == 0 ? 1 : 0;
  const int b = axis == 2 ? 1 : 2;
  const int mid = field.dims[axis] / 2;
  std::ostringstream os;
  char buf[32];
  for (int r = field.dims[b] - 1; r >= 0; --r) {
    for (int c = 0; c < field.dims[a]; ++c) {
      int idx[3];
      idx[axis] = mid;
      idx[a] = c;
      idx[b] = r;
      std::snprintf(buf, sizeof(buf), "%s%.4f", c ? " " : "", at(idx[0], idx[1], idx[2]));
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

std::vector<fs::path> write_mid_plane_slices(const fs::path& stem, const DensityField& field) {
  std::vector<fs::path> paths;
  const char* names[] = {"x", "y", "z"};
  for (int axis = 0; axis < 3; ++axis) {
    fs::path p = stem;
    p += std::string("_slice_") + names[axis] + ".txt";
    write_text_file(p, mid_plane_slice(field, axis));
    paths.push_back(p);
  }
  return paths;
}

void write_text_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace topopt
