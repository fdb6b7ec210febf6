#pragma once

// Independent oracles and fixtures shared by the unit tests and the acceptance binary.

#include "mixfem/bench.hpp"
#include "mixfem/elements.hpp"
#include "mixfem/material.hpp"
#include "mixfem/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using mixfem::Mat;
using mixfem::Mat3;
using mixfem::MaterialParams;
using mixfem::MaterialPointState;
using mixfem::Vec;
using mixfem::Vec3;

// Tensor inner product of two isochoric in-plane Voigt strains (zz = -(xx + yy)).
inline double iso_dot(const Vec3& a, const Vec3& b) {
  return a(0) * b(0) + a(1) * b(1) + (a(0) + a(1)) * (b(0) + b(1)) + 0.5 * a(2) * b(2);
}

inline double iso_norm(const Vec3& a) { return std::sqrt(iso_dot(a, a)); }

// Hooke's law in 3D with the out-of-plane strain fixed by the plane assumption.
// e_zz_plastic is the out-of-plane plastic strain.
struct Elastic {
  double energy;
  Vec3 stress;
};

inline Elastic hooke(const Vec3& ee, double ezz_plastic, const MaterialParams& p) {
  const double G = p.E / (2.0 * (1.0 + p.nu));
  const double L = p.E * p.nu / ((1.0 + p.nu) * (1.0 - 2.0 * p.nu));
  double ezz = -ezz_plastic;
  if (p.plane == mixfem::PlaneAssumption::plane_stress) ezz = -L * (ee(0) + ee(1)) / (L + 2.0 * G);
  const double tr = ee(0) + ee(1) + ezz;
  Elastic r;
  r.energy = 0.5 * L * tr * tr + G * (ee(0) * ee(0) + ee(1) * ee(1) + ezz * ezz + 0.5 * ee(2) * ee(2));
  r.stress = Vec3(L * tr + 2.0 * G * ee(0), L * tr + 2.0 * G * ee(1), G * ee(2));
  return r;
}

struct EnergyMinimum {
  Vec3 stress;
  Vec3 dplastic;
  double dalpha_i = 0.0;
  double energy = 0.0;
};

// Brute-force minimizer of the incremental energy over the plastic strain increment d.
// The isotropic increment is eliminated at its admissible lower bound c |d|.
// d = r n with |n| = 1: for fixed n the energy is quadratic in r (coefficients from three
// samples), and n is searched on the sphere by a global grid plus local grid refinement.
inline EnergyMinimum minimize_incremental_energy(const Vec3& strain, const MaterialPointState& prior,
                                                 const MaterialParams& p) {
  auto f = [&](const Vec3& d) {
    const Vec3 ep = prior.plastic_strain + d;
    const double r = iso_norm(d);
    const double ai = prior.alpha_i + p.c * r;
    const Vec3 ak = prior.alpha_k + d;
    return hooke(strain - ep, -(ep(0) + ep(1)), p).energy + 0.5 * p.k_i * ai * ai +
           0.5 * p.k_k * iso_dot(ak, ak) + p.sigma_y0 * p.c * r;
  };

  // orthonormal basis of the isochoric subspace in the tensor inner product
  std::array<Vec3, 3> basis{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < i; ++j) basis[i] -= iso_dot(basis[i], basis[j]) * basis[j];
    basis[i] /= iso_norm(basis[i]);
  }
  const Vec3 trial = strain - prior.plastic_strain;
  const double scale = std::max(iso_norm(trial), p.sigma_y0 / p.E);
  const double f0 = f(Vec3::Zero());

  // best radius and value along direction n
  auto along = [&](const Vec3& n, double& r_best) {
    const double f1 = f(scale * n), f2 = f(2.0 * scale * n);
    const double a = 0.5 * (f2 - 2.0 * f1 + f0), b = f1 - f0 - a;
    const double t = a > 0.0 ? std::max(0.0, -b / (2.0 * a)) : 0.0;
    r_best = t * scale;
    return t > 0.0 ? f(r_best * n) : f0;
  };
  auto direction = [&](double th, double ph) {
    return Vec3(std::sin(th) * std::cos(ph) * basis[0] + std::sin(th) * std::sin(ph) * basis[1] +
                std::cos(th) * basis[2]);
  };

  Vec3 n_best = basis[0];
  double r_best = 0.0, v_best = f0;
  const int nt = 90, np = 180;
  for (int i = 0; i <= nt; ++i)
    for (int j = 0; j < np; ++j) {
      const Vec3 n = direction(M_PI * i / nt, 2.0 * M_PI * j / np);
      double r = 0.0;
      const double v = along(n, r);
      if (v < v_best) {
        v_best = v;
        r_best = r;
        n_best = n;
      }
    }

  if (r_best > 0.0) {
    // local refinement in the tangent plane of n_best; recentre without shrinking on the edge
    double h = 2.0 * M_PI / np;
    const int m = 5;
    for (int level = 0; level < 400 && h > 1e-15; ++level) {
      Vec3 t1 = basis[0] - iso_dot(basis[0], n_best) * n_best;
      if (iso_norm(t1) < 0.5) t1 = basis[1] - iso_dot(basis[1], n_best) * n_best;
      t1 /= iso_norm(t1);
      Vec3 t2 = basis[2] - iso_dot(basis[2], n_best) * n_best - iso_dot(basis[2], t1) * t1;
      if (iso_norm(t2) < 0.5) {
        t2 = basis[1] - iso_dot(basis[1], n_best) * n_best - iso_dot(basis[1], t1) * t1;
        if (iso_norm(t2) < 0.5) t2 = basis[0] - iso_dot(basis[0], n_best) * n_best - iso_dot(basis[0], t1) * t1;
      }
      t2 /= iso_norm(t2);
      int bi = 0, bj = 0;
      Vec3 n_new = n_best;
      for (int i = -m; i <= m; ++i)
        for (int j = -m; j <= m; ++j) {
          if (i == 0 && j == 0) continue;
          Vec3 n = n_best + i * h * t1 + j * h * t2;
          n /= iso_norm(n);
          double r = 0.0;
          const double v = along(n, r);
          if (v < v_best) {
            v_best = v;
            r_best = r;
            n_new = n;
            bi = i;
            bj = j;
          }
        }
      n_best = n_new;
      if (std::abs(bi) < m && std::abs(bj) < m) h *= 0.5;
    }
  }

  EnergyMinimum out;
  out.dplastic = r_best * n_best;
  out.dalpha_i = p.c * r_best;
  out.energy = v_best;
  const Vec3 ep = prior.plastic_strain + out.dplastic;
  out.stress = hooke(strain - ep, -(ep(0) + ep(1)), p).stress;
  return out;
}

// Committed state after a random plastic pre-strain, then a random second strain.
struct MaterialCase {
  Vec3 strain;
  MaterialPointState prior;
};

inline MaterialCase random_material_case(std::mt19937& rng, const MaterialParams& m) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const double ey = m.sigma_y0 / m.E;
  const Vec3 e1 = 4.0 * ey * Vec3(U(rng), U(rng), U(rng));
  MaterialCase c;
  c.prior = mixfem::state_update(e1, {}, m).state;
  Vec3 dir(U(rng), U(rng), U(rng));
  dir.normalize();
  c.strain = e1 + ey * (0.2 + 1.8 * std::abs(U(rng))) * dir;
  return c;
}

// Von Mises yield value from the principal values of the 3D shifted stress.
inline double yield_by_principal_stresses(const Vec3& sigma, double szz, const MaterialPointState& s,
                                          const MaterialParams& p) {
  Eigen::Matrix3d T;
  T << sigma(0), sigma(2), 0.0, sigma(2), sigma(1), 0.0, 0.0, 0.0, szz;
  const Eigen::Vector3d pr = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(T).eigenvalues();
  const double mean = pr.sum() / 3.0;
  const double q = std::sqrt((pr.array() - mean).square().sum());
  return q - p.c * (p.sigma_y0 + p.k_i * s.alpha_i);
}

// Central differences of a vector map.
inline Mat central_jacobian(const std::function<Vec(const Vec&)>& map, const Vec& x, double h) {
  const Vec f0 = map(x);
  Mat J(f0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vec xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    J.col(j) = (map(xp) - map(xm)) / (2.0 * h);
  }
  return J;
}

inline double rel_diff(const Mat& a, const Mat& b) {
  const double s = std::max(a.norm(), b.norm());
  return s == 0.0 ? 0.0 : (a - b).norm() / s;
}

// Distorted quadrilateral used by the element fixtures.
inline mixfem::Coords distorted_element(int nodes) {
  mixfem::Coords c(nodes, 2);
  c.topRows(4) << 0.0, 0.0, 2.2, 0.3, 2.5, 2.1, 0.2, 1.8;
  if (nodes == 8)
    for (int k = 0; k < 4; ++k) c.row(4 + k) = 0.5 * (c.row(k) + c.row((k + 1) % 4));
  return c;
}

// Distorted 2x2 patch on [0, 2]^2 with an off-centre interior node and straight edges.
inline mixfem::Mesh distorted_patch(int nodes_per_element) {
  mixfem::Mesh m;
  const std::array<std::array<double, 2>, 9> corner{{{0.0, 0.0},
                                                     {1.1, 0.0},
                                                     {2.0, 0.0},
                                                     {0.0, 0.9},
                                                     {1.25, 0.8},
                                                     {2.0, 1.15},
                                                     {0.0, 2.0},
                                                     {0.85, 2.0},
                                                     {2.0, 2.0}}};
  std::vector<std::array<double, 2>> xy(corner.begin(), corner.end());
  auto node = [&](double x, double y) {
    for (std::size_t i = 0; i < xy.size(); ++i)
      if (std::abs(xy[i][0] - x) < 1e-14 && std::abs(xy[i][1] - y) < 1e-14) return static_cast<int>(i);
    xy.push_back({x, y});
    return static_cast<int>(xy.size() - 1);
  };
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i) {
      const int a = 3 * j + i;
      std::vector<int> conn{a, a + 1, a + 4, a + 3};
      if (nodes_per_element == 8)
        for (int k = 0; k < 4; ++k) {
          const auto& p = xy[conn[k]];
          const auto& q = xy[conn[(k + 1) % 4]];
          conn.push_back(node(0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])));
        }
      m.elements.push_back(conn);
    }
  m.nodes.resize(static_cast<Eigen::Index>(xy.size()), 2);
  for (std::size_t i = 0; i < xy.size(); ++i) m.nodes.row(static_cast<Eigen::Index>(i)) << xy[i][0], xy[i][1];
  std::vector<int> boundary;
  for (int i = 0; i < m.num_nodes(); ++i) {
    const double x = m.nodes(i, 0), y = m.nodes(i, 1);
    if (x < 1e-12 || y < 1e-12 || x > 2.0 - 1e-12 || y > 2.0 - 1e-12) boundary.push_back(i);
  }
  m.node_sets["boundary"] = boundary;
  return m;
}

// Patch problem with u = A x prescribed on the boundary (one increment reaches it).
inline mixfem::Problem patch_problem(int nodes_per_element, const Eigen::Matrix2d& A,
                                     const MaterialParams& mat) {
  mixfem::Problem p;
  p.mesh = distorted_patch(nodes_per_element);
  p.material = mat;
  p.load = Vec::Zero(p.mesh.num_dofs());
  p.control = mixfem::ControlMode::displacement;
  for (int n : p.mesh.node_sets.at("boundary")) {
    const Eigen::Vector2d u = A * p.mesh.nodes.row(n).transpose();
    p.dirichlet.push_back({2 * n, u(0)});
    p.dirichlet.push_back({2 * n + 1, u(1)});
  }
  p.control_dof = p.dirichlet.front().dof;
  p.qoi_dof = p.control_dof;
  return p;
}

} // namespace oracle
