#pragma once

/// @file elements.hpp
/// @brief Element formulations and their state-determination algorithms.

#include "mixfem/interpolation.hpp"
#include "mixfem/material.hpp"

#include <string>
#include <vector>

namespace mixfem {

enum class Algorithm {
  displacement,
  hw_identical,
  enhanced_strain,
  cm_return_map,
  cm_interior_point,
  cm_sqp,
  hellinger_reissner,
  hr_relaxed,
  hw_nodal_force
};

enum class StressKind { none, pian_sumihara, pian_sumihara_constant, airy };
enum class StrainKind { none, identical, piecewise };
enum class MultiplierKind { pointwise, piecewise };

struct ElementTolerances {
  double rel = 1e-10;      ///< residual relative to sigma_y0 times element area
  double cm_rel = 1e-12;   ///< tighter target for the CM element programs
  int max_iter = 30;
  int max_sweeps = 20;
};

struct IpOptions {
  bool simplified = true;  ///< zero barrier with clamping
  double eps_lambda = 1e-12;
  double eps_s = 1e-9;
  double theta = 0.95;
  double eta = 0.5;
  int max_iter = 200;
};

struct SqpOptions {
  bool lagrangian_hessian = true;
  int max_iter = 200;
};

struct ElementFormulation {
  std::string tag;
  int nodes = 4;
  int quad_order = 2;
  StressKind stress = StressKind::none;
  int airy_degree = 2;
  std::vector<AiryMode> airy_extra;
  StrainKind strain = StrainKind::none;
  int subdomains_per_side = 3;
  bool enhanced = false;
  MultiplierKind multiplier = MultiplierKind::pointwise;
  int multiplier_per_side = 1;
  Algorithm algorithm = Algorithm::displacement;
  ElementTolerances tol;
  IpOptions ip;
  SqpOptions sqp;
};

/// @brief Q4, Q8, HW-Q8-D, ES-Q4, CM-Q4, HR-Q4 plus the auxiliary tags
/// HW-Q4-I (identical strain), HR-Q4-3 (constant stress only), CM-Q4-IP, CM-Q4-SQP, HR-Q4-R.
ElementFormulation formulation_from_tag(const std::string& tag);

/// @brief The six formulations compared in the benchmarks.
std::vector<std::string> benchmark_element_tags();

struct RigidBodyFilter {
  Mat Pi_bar;  ///< N_u x N_u projector
  Mat Pi;      ///< (N_u - 3) x N_u
  Mat V;       ///< N_u x (N_u - 3)
};

RigidBodyFilter rigid_body_filter(const Coords& coords);

struct ElementOperators {
  Coords coords;
  int n_u = 0;
  int n_sigma = 0;
  double area = 0.0;
  StressBasis stress;
  std::vector<IntegrationPoint> qp;
  std::vector<Mat> B;   ///< per qp, 3 x n_u
  std::vector<Mat> S;   ///< per qp, 3 x n_sigma
  std::vector<Mat> Et;  ///< per qp, 3 x n_enh
  Mat C;                ///< n_sigma x n_u
  Mat G;                ///< n_eps x n_sigma
  Mat Gt;               ///< n_enh x n_sigma
  Mat He;               ///< n_sigma x n_sigma
  StrainBasis strain;
  MultiplierBasis multipliers;
  std::vector<Mat> S_mult;   ///< stress basis at multiplier points, flattened over sites
  std::vector<int> mult_site;  ///< owning site of each flattened multiplier point
  std::vector<double> mult_weight;
  RigidBodyFilter filter;
  Mat CV;
};

ElementOperators build_operators(const ElementFormulation& form, const Coords& coords,
                                 const MaterialParams& mat);

struct ElementHistory {
  std::vector<MaterialPointState> sites;
  Vec beta;
  Vec enhanced;
  Vec q_lambda;
};

ElementHistory initial_history(const ElementFormulation& form, const ElementOperators& ops);

/// @brief Discrete plastic strain parameters int S^T ep dOmega of a CM history.
Vec plastic_strain_parameters(const ElementOperators& ops, const ElementHistory& hist);

struct ElementResult {
  Vec q_int;
  Mat K;
  ElementHistory trial;
  Vec beta;
  Vec multipliers;  ///< per multiplier or material site
  std::vector<Vec3> site_stress;
  std::vector<Vec2> site_x;
  int iterations = 0;
  int active = 0;
  double yield_max = 0.0;          ///< max site yield value / sigma_y0
  double complementarity_max = 0.0;  ///< max |dl * yield| / sigma_y0
  Vec r_sigma;                     ///< remaining stress residual (relaxed HR)
};

ElementResult displacement_element_state(const Vec& u_e, const ElementHistory& hist,
                                         const ElementOperators& ops, const MaterialParams& mat,
                                         const ElementFormulation& form);
ElementResult hw_identical_state(const Vec& u_e, const ElementHistory& hist,
                                 const ElementOperators& ops, const MaterialParams& mat,
                                 const ElementFormulation& form);
ElementResult es_state(const Vec& u_e, const ElementHistory& hist, const ElementOperators& ops,
                       const MaterialParams& mat, const ElementFormulation& form);
ElementResult cm_state_return_map(const Vec& u_e, const ElementHistory& hist,
                                  const ElementOperators& ops, const MaterialParams& mat,
                                  const ElementFormulation& form);
ElementResult cm_state_ip(const Vec& u_e, const ElementHistory& hist,
                          const ElementOperators& ops, const MaterialParams& mat,
                          const ElementFormulation& form);
ElementResult cm_state_sqp(const Vec& u_e, const ElementHistory& hist,
                           const ElementOperators& ops, const MaterialParams& mat,
                           const ElementFormulation& form);
ElementResult hr_state(const Vec& u_e, const ElementHistory& hist, const ElementOperators& ops,
                       const MaterialParams& mat, const ElementFormulation& form);
/// @brief One linearized stress update from beta_iter; r_sigma holds the remaining residual.
ElementResult hr_state_relaxed(const Vec& u_e, const ElementHistory& hist, const Vec& beta_iter,
                               const ElementOperators& ops, const MaterialParams& mat,
                               const ElementFormulation& form);
ElementResult hw_nodal_force_state(const Vec& u_e, const ElementHistory& hist,
                                   const ElementOperators& ops, const MaterialParams& mat,
                                   const ElementFormulation& form);

/// @brief Dispatch on form.algorithm; beta_iter is used by the relaxed HR variant only.
ElementResult element_state(const ElementFormulation& form, const ElementOperators& ops,
                            const MaterialParams& mat, const Vec& u_e,
                            const ElementHistory& hist, const Vec* beta_iter = nullptr);

/// @brief Dense QP: min 1/2 x'Gx + a'x subject to N'x >= b (dual active set).
struct QpResult {
  Vec x;
  Vec u;  ///< multipliers, one per constraint
  std::vector<int> active;
  int iterations = 0;
};
QpResult solve_qp_dual(const Mat& G, const Vec& a, const Mat& N, const Vec& b);

} // namespace mixfem
