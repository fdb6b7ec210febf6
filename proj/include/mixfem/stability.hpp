#pragma once

/// @file stability.hpp
/// @brief Kernel and rank checks plus the generalized-eigenvalue inf-sup test.

#include "mixfem/solver.hpp"

#include <string>
#include <vector>

namespace mixfem {

/// @brief T = int (u.v + ell^2 grad u : grad v) over the mesh, all DOFs.
SpMat assemble_vnorm(const Mesh& mesh, double ell);

/// @brief Largest distance between two nodes.
double mesh_diameter(const Mesh& mesh);

/// @brief Largest element diagonal.
double mesh_size(const Mesh& mesh);

/// @brief Numerical rank with tolerance rel_tol times the largest singular value.
int numerical_rank(const Mat& A, double rel_tol = 1e-10);

struct KernelReport {
  std::string formulation;
  int n_u = 0;
  int n_rigid = 3;
  int n_sigma = 0;
  int n_eps = 0;
  int n_enh = 0;
  int rank_C = 0;
  int rank_G_Ct = 0;  ///< rank of [G; C^T] stacked (HW)
  int rank_Gt = 0;
  bool counts_ok = true;
  bool rank_ok = true;
  bool vacuous = false;
  std::string note;
};

KernelReport kernel_check(const ElementFormulation& form, const Coords& coords,
                          const MaterialParams& mat);

struct EigenResult {
  double lambda_min = 0.0;
  double floor = 0.0;  ///< numerical zero: 1e-10 ||K|| / ||T||
  bool at_zero = false;
  int dofs = 0;
};

/// @brief Smallest eigenvalue of K v = lambda T v on the DOFs in `dofs`.
EigenResult smallest_eigenvalue(const SpMat& K, const SpMat& T, const std::vector<int>& dofs);

/// @brief Minimum Rayleigh quotient found by descent from random unit starts.
double sampled_infsup(const SpMat& K, const SpMat& T, const std::vector<int>& dofs, int samples,
                      unsigned seed = 12345);

struct StabilityRow {
  double mesh_h = 0.0;
  int refinement = 0;
  double lambda_min = 0.0;
  int rank_C = 0;
  bool at_zero = false;
  std::string flag;
};

struct StabilityReport {
  std::string formulation;
  std::vector<StabilityRow> rows;
  bool unstable = false;  ///< lambda_min decays by more than 10x over the sequence
};

/// @brief Elastic condensed stiffness of the problem at virgin state, all DOFs.
SpMat elastic_stiffness(const Problem& problem, const std::string& element);

/// @brief Which DOFs are removed before the eigenvalue solve.
enum class Supports {
  problem,  ///< the Dirichlet DOFs of the problem
  rigid     ///< three DOFs that only suppress the rigid-body modes
};

Supports parse_supports(const std::string& name);

/// @brief Free DOFs of the problem under the chosen supports.
std::vector<int> stability_dofs(const Problem& problem, Supports supports);

/// @brief Inf-sup test on a sequence of problems.
StabilityReport infsup_test(const std::vector<Problem>& problems, const std::vector<int>& refinements,
                            const std::string& element, Supports supports = Supports::problem);

void write_stability_csv(const std::string& path, const StabilityReport& report);

} // namespace mixfem
