#pragma once

/// @file material.hpp
/// @brief Von Mises plasticity with linear isotropic and kinematic hardening.
///
/// Voigt convention everywhere: stress (s_x, s_y, t_xy), strain (e_x, e_y, g_xy)
/// with engineering shear g_xy = 2 e_xy. Out-of-plane plastic strain is
/// -(ep_x + ep_y) and is never stored.

#include <Eigen/Dense>
#include <cmath>

namespace mixfem {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class PlaneAssumption { plane_stress, plane_strain };

struct MaterialParams {
  double E = 70.0;
  double nu = 1.0 / 3.0;
  double sigma_y0 = 0.243;
  double k_i = 0.2;
  double k_k = 0.0;
  PlaneAssumption plane = PlaneAssumption::plane_stress;
  double c = std::sqrt(2.0 / 3.0);

  /// @brief Throws InvalidParams when a field is out of range.
  void validate() const;
  double shear_modulus() const { return E / (2.0 * (1.0 + nu)); }
  double lame_lambda() const { return E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)); }
  /// @brief Combined hardening slope k_k + c^2 k_i of the consistency equation.
  double hardening_slope() const { return k_k + c * c * k_i; }
};

struct MaterialPointState {
  Vec3 plastic_strain = Vec3::Zero();
  double alpha_i = 0.0;
  Vec3 alpha_k = Vec3::Zero();
};

struct UpdateResult {
  Vec3 stress;
  MaterialPointState state;
  double dlambda = 0.0;
  Mat3 tangent;
  double energy = 0.0;
  int iterations = 0;
};

struct InverseResult {
  Vec3 strain;
  MaterialPointState state;
  double dlambda = 0.0;
  Mat3 compliance;
  double energy = 0.0;  ///< incremental potential at the returned strain
  int iterations = 0;
};

struct MaterialTolerances {
  double residual = 1e-12;  ///< local residual, relative to sigma_y0
  int max_iter = 50;
  double tie = 1e-14;       ///< trial yield ties take the elastic branch
};

Mat3 elastic_tensor(const MaterialParams& p);
Mat3 elastic_compliance(const MaterialParams& p);

/// @brief Out-of-plane stress implied by the plane assumption and the state.
double out_of_plane_stress(const Vec3& sigma, const MaterialPointState& state,
                           const MaterialParams& p);

double yield_value(const Vec3& sigma, const MaterialPointState& state,
                   const MaterialParams& p);

/// @brief Gradient of yield_value with respect to the in-plane stress (plane stress).
Vec3 yield_gradient(const Vec3& sigma, const MaterialPointState& state,
                    const MaterialParams& p);

/// @brief Hessian of yield_value with respect to the in-plane stress (plane stress).
Mat3 yield_hessian(const Vec3& sigma, const MaterialPointState& state,
                   const MaterialParams& p);

/// @brief Strain-driven backward Euler update.
UpdateResult state_update(const Vec3& strain, const MaterialPointState& prior,
                          const MaterialParams& p,
                          const MaterialTolerances& tol = {});

/// @brief Stress-driven update; needs hardening.
InverseResult inverse_state_update(const Vec3& stress, const MaterialPointState& prior,
                                   const MaterialParams& p,
                                   const MaterialTolerances& tol = {});

/// @brief Support function of the elastic domain; +inf when inadmissible.
double dissipation_increment(const Vec3& dplastic_strain, double dalpha_i,
                             const MaterialParams& p);

/// @brief Tensor norm of an isochoric plastic strain given in Voigt form.
double plastic_strain_norm(const Vec3& ep);

/// @brief State after a plastic increment dl along the flow direction at sigma.
MaterialPointState advance_state(const MaterialPointState& prior, const Vec3& sigma,
                                 double dl, const MaterialParams& p);

} // namespace mixfem
