#include "mixfem/stability.hpp"

#include "mixfem/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>

namespace mixfem {

SpMat assemble_vnorm(const Mesh& mesh, double ell) {
  std::vector<Eigen::Triplet<double>> trip;
  for (int e = 0; e < static_cast<int>(mesh.elements.size()); ++e) {
    const Coords c = mesh.element_coords(e);
    const int nn = static_cast<int>(c.rows());
    const QuadRule rule = gauss_rule(nn == 8 ? 3 : 2);
    Mat Te = Mat::Zero(nn, nn);
    for (std::size_t g = 0; g < rule.points.size(); ++g) {
      const ShapeEval s = shape_eval(c, rule.points[g]);
      if (!(s.det_J > 0.0)) throw DegenerateElement("non-positive Jacobian in element " + std::to_string(e));
      const double w = rule.weights[g] * s.det_J;
      Te += w * (s.N * s.N.transpose() + ell * ell * s.dN_dx * s.dN_dx.transpose());
    }
    const std::vector<int> dofs = mesh.element_dofs(e);
    for (int a = 0; a < nn; ++a)
      for (int b = 0; b < nn; ++b)
        for (int k = 0; k < 2; ++k) trip.emplace_back(dofs[2 * a + k], dofs[2 * b + k], Te(a, b));
  }
  SpMat T(mesh.num_dofs(), mesh.num_dofs());
  T.setFromTriplets(trip.begin(), trip.end());
  return T;
}

double mesh_diameter(const Mesh& mesh) {
  double d = 0.0;
  for (int i = 0; i < mesh.num_nodes(); ++i)
    for (int j = i + 1; j < mesh.num_nodes(); ++j)
      d = std::max(d, (mesh.nodes.row(i) - mesh.nodes.row(j)).norm());
  return d;
}

double mesh_size(const Mesh& mesh) {
  double h = 0.0;
  for (const std::vector<int>& conn : mesh.elements) {
    h = std::max(h, (mesh.nodes.row(conn[0]) - mesh.nodes.row(conn[2])).norm());
    h = std::max(h, (mesh.nodes.row(conn[1]) - mesh.nodes.row(conn[3])).norm());
  }
  return h;
}

int numerical_rank(const Mat& A, double rel_tol) {
  if (A.size() == 0) return 0;
  const Eigen::JacobiSVD<Mat> svd(A);
  const Vec& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  return static_cast<int>((s.array() > rel_tol * s(0)).count());
}

KernelReport kernel_check(const ElementFormulation& form, const Coords& coords,
                          const MaterialParams& mat) {
  const ElementOperators ops = build_operators(form, coords, mat);
  KernelReport r;
  r.formulation = form.tag;
  r.n_u = ops.n_u;
  r.n_sigma = ops.n_sigma;
  r.n_eps = static_cast<int>(ops.G.rows());
  r.n_enh = static_cast<int>(ops.Gt.rows());
  r.rank_C = numerical_rank(ops.C);
  const int quotient = r.n_u - r.n_rigid;
  if (form.stress == StressKind::none || form.enhanced) {
    r.vacuous = true;
    if (form.enhanced && r.n_enh > 0) r.rank_Gt = numerical_rank(ops.Gt);
    r.note = form.enhanced ? "stress eliminated; solvability condition is immaterial"
                           : "displacement formulation; no mixed condition";
    return r;
  }
  if (form.strain != StrainKind::none) {
    Mat stacked(r.n_eps + r.n_u, r.n_sigma);
    stacked << ops.G, ops.C.transpose();
    r.rank_G_Ct = numerical_rank(stacked);
    r.counts_ok = quotient <= r.n_sigma && r.n_sigma <= r.n_eps + quotient;
    r.rank_ok = r.rank_C == quotient && r.rank_G_Ct == r.n_sigma;
  } else {
    r.counts_ok = quotient <= r.n_sigma;
    r.rank_ok = r.rank_C == quotient;
  }
  if (!r.counts_ok) r.note = "count condition violated";
  else if (!r.rank_ok) r.note = "rank condition violated";
  else r.note = "pass";
  return r;
}

namespace {

Mat dense_restrict(const SpMat& A, const std::vector<int>& dofs) {
  Mat D = Mat(restrict_matrix(A, dofs));
  return 0.5 * (D + D.transpose());
}

} // namespace

EigenResult smallest_eigenvalue(const SpMat& K, const SpMat& T, const std::vector<int>& dofs) {
  const Mat Kd = dense_restrict(K, dofs), Td = dense_restrict(T, dofs);
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(Kd, Td, Eigen::EigenvaluesOnly);
  if (ges.info() != Eigen::Success) throw EigensolverFailure("generalized eigensolver failed");
  Eigen::SelfAdjointEigenSolver<Mat> ek(Kd, Eigen::EigenvaluesOnly), et(Td, Eigen::EigenvaluesOnly);
  if (ek.info() != Eigen::Success || et.info() != Eigen::Success)
    throw EigensolverFailure("norm estimation failed");
  const double nK = ek.eigenvalues().cwiseAbs().maxCoeff();
  const double nT = et.eigenvalues().cwiseAbs().maxCoeff();
  EigenResult r;
  r.dofs = static_cast<int>(dofs.size());
  r.lambda_min = ges.eigenvalues()(0);
  r.floor = 1e-10 * nK / nT;
  r.at_zero = std::abs(r.lambda_min) <= r.floor;
  return r;
}

double sampled_infsup(const SpMat& K, const SpMat& T, const std::vector<int>& dofs, int samples,
                      unsigned seed) {
  const Mat Kd = dense_restrict(K, dofs), Td = dense_restrict(T, dofs);
  const Eigen::LLT<Mat> Tllt(Td);
  if (Tllt.info() != Eigen::Success) throw EigensolverFailure("T is not positive definite");
  const Eigen::Index n = Kd.rows();
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss;
  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = gauss(rng);
    v /= std::sqrt(v.dot(Td * v));
    Vec prev = Vec::Zero(n);
    double rho = v.dot(Kd * v);
    // Rayleigh-Ritz descent on span{v, preconditioned gradient, previous step}
    for (int it = 0; it < 400; ++it) {
      const Vec g = Tllt.solve(Kd * v - rho * (Td * v));
      Mat Z(n, prev.squaredNorm() > 0.0 ? 3 : 2);
      Z.col(0) = v;
      Z.col(1) = g;
      if (Z.cols() == 3) Z.col(2) = prev;
      const Eigen::HouseholderQR<Mat> qr(Z);
      const Mat Q = qr.householderQ() * Mat::Identity(n, Z.cols());
      const Mat Kr = Q.transpose() * Kd * Q, Tr = Q.transpose() * Td * Q;
      Eigen::GeneralizedSelfAdjointEigenSolver<Mat> small(0.5 * (Kr + Kr.transpose()),
                                                          0.5 * (Tr + Tr.transpose()));
      if (small.info() != Eigen::Success) break;
      Vec w = Q * small.eigenvectors().col(0);
      w /= std::sqrt(w.dot(Td * w));
      const double rho_new = w.dot(Kd * w);
      prev = w - v * v.dot(Td * w);
      v = w;
      const bool done = std::abs(rho - rho_new) <= 1e-12 * std::abs(rho_new);
      rho = rho_new;
      if (done) break;
    }
    best = std::min(best, rho);
  }
  return best;
}

SpMat elastic_stiffness(const Problem& problem, const std::string& element) {
  AnalysisConfig cfg;
  cfg.element = element;
  const Analysis a(problem, cfg);
  return a.assemble(Vec::Zero(problem.mesh.num_dofs()), 0.0, a.histories()).K;
}

Supports parse_supports(const std::string& name) {
  if (name == "problem") return Supports::problem;
  if (name == "rigid") return Supports::rigid;
  throw ConfigError("unknown supports '" + name + "'");
}

std::vector<int> stability_dofs(const Problem& problem, Supports supports) {
  const Mesh& mesh = problem.mesh;
  std::vector<bool> fixed(static_cast<std::size_t>(mesh.num_dofs()), false);
  if (supports == Supports::problem) {
    for (const Dirichlet& d : problem.dirichlet) fixed[d.dof] = true;
  } else {
    // pin the lowest-left node and one component of the node farthest from it
    int a = 0;
    for (int i = 1; i < mesh.num_nodes(); ++i)
      if (mesh.nodes(i, 0) < mesh.nodes(a, 0) ||
          (mesh.nodes(i, 0) == mesh.nodes(a, 0) && mesh.nodes(i, 1) < mesh.nodes(a, 1)))
        a = i;
    int b = a;
    for (int i = 0; i < mesh.num_nodes(); ++i)
      if ((mesh.nodes.row(i) - mesh.nodes.row(a)).norm() > (mesh.nodes.row(b) - mesh.nodes.row(a)).norm()) b = i;
    const double dx = std::abs(mesh.nodes(b, 0) - mesh.nodes(a, 0));
    const double dy = std::abs(mesh.nodes(b, 1) - mesh.nodes(a, 1));
    fixed[2 * a] = fixed[2 * a + 1] = true;
    fixed[2 * b + (dx > dy ? 1 : 0)] = true;
  }
  std::vector<int> dofs;
  for (int i = 0; i < mesh.num_dofs(); ++i)
    if (!fixed[i]) dofs.push_back(i);
  return dofs;
}

StabilityReport infsup_test(const std::vector<Problem>& problems, const std::vector<int>& refinements,
                            const std::string& element, Supports supports) {
  StabilityReport rep;
  rep.formulation = element;
  const ElementFormulation form = formulation_from_tag(element);
  for (std::size_t k = 0; k < problems.size(); ++k) {
    const Problem& p = problems[k];
    const std::vector<int> dofs = stability_dofs(p, supports);
    const SpMat K = elastic_stiffness(p, element);
    const SpMat T = assemble_vnorm(p.mesh, mesh_diameter(p.mesh));
    const EigenResult eig = smallest_eigenvalue(K, T, dofs);
    StabilityRow row;
    row.mesh_h = mesh_size(p.mesh);
    row.refinement = k < refinements.size() ? refinements[k] : static_cast<int>(k);
    row.lambda_min = eig.lambda_min;
    row.at_zero = eig.at_zero;
    row.rank_C = numerical_rank(build_operators(form, p.mesh.element_coords(0), p.material).C);
    row.flag = eig.at_zero ? "zero" : "ok";
    rep.rows.push_back(row);
  }
  bool decreasing = rep.rows.size() > 1;
  for (std::size_t k = 1; k < rep.rows.size(); ++k)
    decreasing = decreasing && rep.rows[k].lambda_min < rep.rows[k - 1].lambda_min;
  const bool decay = decreasing && rep.rows.back().lambda_min < 0.1 * rep.rows.front().lambda_min;
  const bool any_zero = std::any_of(rep.rows.begin(), rep.rows.end(),
                                    [](const StabilityRow& r) { return r.at_zero; });
  rep.unstable = decay || any_zero;
  if (decay)
    for (StabilityRow& r : rep.rows)
      if (r.flag == "ok") r.flag = "decay";
  return rep;
}

void write_stability_csv(const std::string& path, const StabilityReport& report) {
  std::ofstream out(path);
  out << "mesh_h,lambda_min,rank_C,flag\n";
  char buf[64];
  for (const StabilityRow& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%.11e,%.11e", r.mesh_h, r.lambda_min);
    out << buf << ',' << r.rank_C << ',' << r.flag << '\n';
  }
}

} // namespace mixfem
