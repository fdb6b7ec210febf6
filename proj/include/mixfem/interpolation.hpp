#pragma once

/// @file interpolation.hpp
/// @brief Element shape functions and stress, strain, enhanced and multiplier bases.

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace mixfem {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Coords = Eigen::Matrix<double, Eigen::Dynamic, 2>;

struct ParentPoint {
  double xi = 0.0;
  double eta = 0.0;
};

struct ShapeEval {
  Vec N;
  Mat dN_dxi;  ///< n x 2, columns d/dxi, d/deta
  Mat2 J;      ///< J(i, j) = d x_j / d xi_i
  double det_J = 0.0;
  Mat dN_dx;   ///< n x 2
  Vec2 x;      ///< physical point
};

/// @brief Quadrature point on the parent square.
struct QuadRule {
  std::vector<ParentPoint> points;
  std::vector<double> weights;
};

/// @brief Tensor-product Gauss rule with n points per direction (1 to 3).
QuadRule gauss_rule(int n);

/// @brief Gauss rule restricted to the parent sub-square [x0,x1] x [y0,y1].
QuadRule gauss_rule(int n, double x0, double x1, double y0, double y1);

ShapeEval shape_q4(const Coords& coords, const ParentPoint& p);
ShapeEval shape_q8(const Coords& coords, const ParentPoint& p);
/// @brief Dispatches on the node count (4 or 8).
ShapeEval shape_eval(const Coords& coords, const ParentPoint& p);

Mat b_matrix(const ShapeEval& shape);

/// @brief Coefficients a1..a3, b1..b3 of the bilinear Q4 Jacobian.
struct Q4Coefficients {
  double a1, a2, a3, b1, b2, b3;
};
Q4Coefficients q4_coefficients(const Coords& coords);

/// @brief Element-local Cartesian frame used by polynomial stress bases.
struct Frame {
  Vec2 origin = Vec2::Zero();
  Mat2 axes = Mat2::Identity();  ///< columns are the local x and y axes
  double scale = 1.0;            ///< length used to nondimensionalize coordinates
};

/// @brief Origin at the node centroid, x axis along the principal scatter direction.
Frame local_frame(const Coords& coords);

/// @brief Where a basis is evaluated: parent and physical coordinates of one point.
struct EvalPoint {
  ParentPoint parent;
  Vec2 x;
};

struct StressBasis {
  int modes = 0;
  bool self_equilibrated = false;
  Frame frame;
  std::function<Mat(const EvalPoint&)> eval;        ///< 3 x modes
  std::function<Mat(const EvalPoint&)> divergence;  ///< 2 x modes, empty if unknown
};

/// @brief Five-mode assumed stress of Pian and Sumihara.
StressBasis pian_sumihara_basis(const Coords& coords);

/// @brief First `modes` columns of another basis.
StressBasis truncate_basis(const StressBasis& basis, int modes);

/// @brief Nine-mode complete linear basis in parent coordinates (1, xi, eta per component).
StressBasis complete_linear_basis();

/// @brief One Airy polynomial family member: family 0..3 of degree k.
struct AiryMode {
  int degree;
  int family;
};

/// @brief Complete self-equilibrated basis up to degree n plus optional extra modes.
StressBasis airy_basis(int max_degree, const Frame& frame,
                       const std::vector<AiryMode>& extra = {});

/// @brief Auxiliary incompatible displacement scalar: value gradient in the parent square.
struct AuxField {
  std::function<Vec2(const ParentPoint&)> parent_gradient;
};

/// @brief Wilson-type fields (1 - xi^2) and (1 - eta^2).
std::vector<AuxField> wilson_fields();

/// @brief Keeps the stress modes work-orthogonal to the auxiliary strains.
StressBasis pian_filter(const StressBasis& basis, const std::vector<AuxField>& aux,
                        const Coords& coords, int quad_order = 3);

/// @brief Constraint matrix of the Pian filter (rows: aux strains, cols: modes).
Mat pian_constraint_matrix(const StressBasis& basis, const std::vector<AuxField>& aux,
                           const Coords& coords, int quad_order = 3);

/// @brief Four-parameter enhanced strain in the physical frame (3 x 4).
Mat enhanced_basis_q4(const Coords& coords, const ParentPoint& p);

/// @brief Integration point in the physical element.
struct IntegrationPoint {
  ParentPoint parent;
  Vec2 x;
  double weight = 0.0;  ///< parent weight times det J
};

std::vector<IntegrationPoint> integration_points(const Coords& coords, const QuadRule& rule);

struct Subdomain {
  double area = 0.0;
  Mat S_bar;  ///< 3 x N_sigma average of the stress basis
  std::vector<IntegrationPoint> points;
};

struct StrainBasis {
  enum class Kind { identical, piecewise_constant };
  Kind kind = Kind::identical;
  int modes = 0;
  std::vector<Subdomain> subdomains;
};

StrainBasis identical_strain_basis(const StressBasis& stress);

/// @brief Regular m x m split of the parent square; N_d = m^2.
StrainBasis subdomain_partition(const Coords& coords, int m, const StressBasis& stress,
                                int quad_order = 2);

struct MultiplierSite {
  double weight = 0.0;  ///< parent quadrature weight or subdomain area
  std::vector<IntegrationPoint> points;
  double area() const;
};

struct MultiplierBasis {
  enum class Kind { gauss_pointwise, piecewise_constant };
  Kind kind = Kind::gauss_pointwise;
  std::vector<MultiplierSite> sites;
};

MultiplierBasis multiplier_pointwise(const Coords& coords, const QuadRule& rule);
MultiplierBasis multiplier_piecewise(const Coords& coords, int m, int quad_order = 2);

double element_area(const Coords& coords);

} // namespace mixfem
