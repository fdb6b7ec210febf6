#pragma once

/// @file solver.hpp
/// @brief Incremental-iterative Newton driver with sparse assembly.

#include "mixfem/elements.hpp"

#include <Eigen/Sparse>

#include <map>
#include <string>
#include <vector>

namespace mixfem {

using SpMat = Eigen::SparseMatrix<double>;

struct Mesh {
  Coords nodes;
  std::vector<std::vector<int>> elements;
  std::map<std::string, std::vector<int>> node_sets;

  int num_nodes() const { return static_cast<int>(nodes.rows()); }
  int num_dofs() const { return 2 * num_nodes(); }
  Coords element_coords(int e) const;
  std::vector<int> element_dofs(int e) const;
};

/// @brief Prescribed DOF value at load factor 1.
struct Dirichlet {
  int dof;
  double value;
};

enum class ControlMode { load, displacement };

/// @brief Mesh, material and boundary data of one analysis.
struct Problem {
  Mesh mesh;
  MaterialParams material;
  std::vector<Dirichlet> dirichlet;
  Vec load;  ///< nodal load vector at load factor 1
  ControlMode control = ControlMode::load;
  int control_dof = -1;            ///< DOF reported as control displacement
  int qoi_dof = -1;                ///< DOF reported as quantity of interest
  std::vector<int> reaction_dofs;  ///< constrained DOFs summed into the reaction
};

struct AnalysisConfig {
  std::string element = "Q4";
  int increments = 20;
  double tol = 1e-8;
  int max_global_iter = 25;
  int max_bisections = 4;
  int max_line_search = 6;  ///< halvings of a Newton step that does not reduce the residual
  bool hr_relaxed = false;
  std::string cm_solver = "return_map";  ///< return_map, interior_point or sqp
};

struct AnalysisRecord {
  int step = 0;
  double load_factor = 0.0;
  double control_disp = 0.0;
  double reaction = 0.0;
  double qoi_disp = 0.0;
  int global_iters = 0;
  double yield_max = 0.0;           ///< max site yield value / sigma_y0 after commit
  double complementarity_max = 0.0;
  std::vector<double> residuals;    ///< relative residual per iteration of the last sub-step
};

struct Assembly {
  Vec residual;  ///< internal minus external forces, all DOFs
  SpMat K;
  std::vector<ElementResult> elements;
  double r_sigma = 0.0;  ///< largest scaled element stress residual
};

/// @brief Resolved element formulation for a configuration.
ElementFormulation formulation_for(const AnalysisConfig& config);

class Analysis {
public:
  Analysis(Problem problem, AnalysisConfig config);

  /// @brief Element loop at displacement u and load factor lambda.
  Assembly assemble(const Vec& u, double lambda, const std::vector<ElementHistory>& hist,
                    const std::vector<Vec>* beta_iter = nullptr) const;

  /// @brief Advances to lambda_target with bisection; throws GlobalNoConvergence.
  AnalysisRecord solve_increment(double lambda_target, int step);

  /// @brief All increments; stops at the first unrecoverable failure.
  std::vector<AnalysisRecord> run();

  const Problem& problem() const { return problem_; }
  const ElementFormulation& formulation() const { return form_; }
  const std::vector<ElementOperators>& operators() const { return ops_; }
  const std::vector<ElementHistory>& histories() const { return hist_; }
  const std::vector<ElementResult>& last_results() const { return last_; }
  const Vec& displacements() const { return u_; }
  const Vec& residual() const { return residual_; }
  double load_factor() const { return lambda_; }
  const std::vector<int>& free_dofs() const { return free_; }
  const std::vector<int>& fixed_dofs() const { return fixed_; }
  const std::string& failure() const { return failure_; }

private:
  bool try_step(double lambda_target, AnalysisRecord& rec);
  AnalysisRecord make_record(int step, int iters) const;

  Problem problem_;
  AnalysisConfig config_;
  ElementFormulation form_;
  std::vector<ElementOperators> ops_;
  std::vector<ElementHistory> hist_;
  std::vector<ElementResult> last_;
  std::vector<int> free_, fixed_;
  Vec prescribed_;  ///< prescribed values at load factor 1, all DOFs
  Vec u_;
  Vec du_last_;  ///< last converged displacement increment
  double dlambda_last_ = 0.0;
  Vec residual_;  ///< converged residual; support forces on the constrained DOFs
  double lambda_ = 0.0;
  std::string failure_;
  std::string last_error_;
};

/// @brief Reduces a full sparse matrix to the rows and columns listed in idx.
SpMat restrict_matrix(const SpMat& K, const std::vector<int>& idx);

} // namespace mixfem
