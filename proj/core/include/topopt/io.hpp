#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "topopt/conditioning.hpp"
#include "topopt/simp.hpp"
#include "topopt/solver.hpp"

namespace topopt {

std::string solve_report_json(const SolveReport& report);
/// iteration,rel_residual
std::string residual_history_csv(const SolveReport& report);

/// iter,compliance,cg_iters,grayness,p,beta,rmin,wall_s,restarted
std::string simp_history_csv(const SimpHistory& history);
std::string simp_summary_json(const SimpHistory& history);

/// n_elem,p,lambda_max,lambda_min,kappa,eps_kappa,power_steps,capped
std::string kappa_csv(std::span<const KappaRow> rows);
std::string kappa_json(std::span<const KappaRow> rows);

/// Element-centred scalar field on an nx x ny x nz grid, x-fastest.
struct DensityField {
  std::array<int, 3> dims{0, 0, 0};
  std::vector<double> values;
};

/// Writes <stem>.bin (float64, little-endian, x-fastest) and <stem>.json
/// (dims, order, dtype). Returns the .bin path.
std::filesystem::path write_density_binary(const std::filesystem::path& stem,
                                           const DensityField& field);
/// Reads a .bin written above together with its sidecar.
DensityField read_density_binary(const std::filesystem::path& bin_path);

/// Legacy ASCII VTK structured points with the field as cell data.
void write_density_vtk(const std::filesystem::path& path, const DensityField& field,
                       std::string_view name = "density");

/// Mid-plane slice normal to axis (0 = x, 1 = y, 2 = z), one text row per
/// line of the slice.
std::string mid_plane_slice(const DensityField& field, int axis);

/// Writes <stem>_slice_{x,y,z}.txt. Returns the paths.
std::vector<std::filesystem::path> write_mid_plane_slices(const std::filesystem::path& stem,
                                                          const DensityField& field);

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace topopt
