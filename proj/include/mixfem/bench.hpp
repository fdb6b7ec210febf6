#pragma once

/// @file bench.hpp
/// @brief Cook's membrane and perforated plate benchmarks: meshes, runs and reports.

#include "mixfem/solver.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mixfem {

enum class Benchmark { cook, plate };

Benchmark parse_benchmark(const std::string& name);
std::string benchmark_name(Benchmark b);

/// @brief n x n structured mesh of the tapered membrane (4 or 8 nodes per element).
Mesh mesh_cook(int n, int nodes_per_element);

/// @brief Quarter of the perforated plate with n_r radial and n_c circumferential elements.
Mesh mesh_plate(int n_r, int n_c, int nodes_per_element);

/// @brief Geometric radial grading ratio used by mesh_plate.
double plate_grading_ratio(int n_r, int n_c);

MaterialParams cook_material();
MaterialParams plate_material();

/// @brief Mesh, loads, supports and reporting DOFs of a benchmark.
Problem make_problem(Benchmark b, int n1, int n2, int nodes_per_element,
                     const MaterialParams& material);

struct BenchmarkSpec {
  Benchmark benchmark = Benchmark::cook;
  int n1 = 4;  ///< n for cook, n_r for plate
  int n2 = 0;  ///< n_c for plate
  std::string element = "Q4";
  int increments = 0;  ///< 0 selects 20 (cook) or 40 (plate)
  std::optional<MaterialParams> material;
  bool hr_relaxed = false;
  std::string cm_solver = "return_map";
  double tol = 1e-8;
  std::string out_dir;  ///< empty: no files written
};

/// @brief Parses "n" or "nr x nc" (also "nrxnc").
void parse_refinement(const std::string& text, Benchmark b, int& n1, int& n2);
std::string refinement_label(const BenchmarkSpec& spec);

struct BenchmarkRun {
  BenchmarkSpec spec;
  MaterialParams material;
  std::vector<AnalysisRecord> records;
  std::string failure;  ///< empty on success
  bool completed = false;
  double qoi = 0.0;  ///< tip displacement (cook) or reaction (plate) at the last increment
};

/// @brief Runs the analysis and, when out_dir is set, writes history.csv, fields.csv and manifest.json.
BenchmarkRun run_benchmark(const BenchmarkSpec& spec);

struct ConvergenceRow {
  std::string refinement;
  double qoi = 0.0;
  std::optional<double> rel_delta;  ///< relative to the finest run
};

/// @brief Table over refinements (coarse to fine); throws MissingRun for incomplete runs.
std::vector<ConvergenceRow> convergence_report(const std::vector<BenchmarkRun>& runs);

void write_convergence_csv(const std::string& path, const std::vector<ConvergenceRow>& rows);

/// @brief Scientific notation with 12 significant digits.
std::string format_number(double v);

} // namespace mixfem
