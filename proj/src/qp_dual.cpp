#include "mixfem/elements.hpp"
#include "mixfem/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mixfem {

namespace {

/// Primal direction z = H* n and dual direction r = N* n for the active columns NA.
void directions(const Eigen::LLT<Mat>& G, const Mat& NA, const Vec& n, Vec& z, Vec& r) {
  const Vec Gn = G.solve(n);
  if (NA.cols() == 0) {
    z = Gn;
    r.resize(0);
    return;
  }
  const Mat GN = G.solve(NA);
  const Mat M = NA.transpose() * GN;
  r = M.ldlt().solve(GN.transpose() * n);
  z = Gn - GN * r;
}

} // namespace

QpResult solve_qp_dual(const Mat& G, const Vec& a, const Mat& N, const Vec& b) {
  const int m = static_cast<int>(N.cols());
  Eigen::LLT<Mat> chol(G);
  if (chol.info() != Eigen::Success) throw Error("QP Hessian is not positive definite");

  QpResult res;
  res.x = -chol.solve(a);
  res.u = Vec::Zero(m);
  std::vector<int>& A = res.active;
  std::vector<double> uA;
  const double feas = 1e-14 * (1.0 + b.cwiseAbs().maxCoeff()) * (1.0 + N.cwiseAbs().maxCoeff());

  auto active_matrix = [&]() {
    Mat NA(N.rows(), static_cast<Eigen::Index>(A.size()));
    for (std::size_t k = 0; k < A.size(); ++k) NA.col(k) = N.col(A[k]);
    return NA;
  };

  const int max_iter = 50 * (m + 1);
  for (int it = 0; it < max_iter; ++it) {
    int p = -1;
    double worst = -feas;
    for (int j = 0; j < m; ++j) {
      if (std::find(A.begin(), A.end(), j) != A.end()) continue;
      const double s = N.col(j).dot(res.x) - b(j);
      if (s < worst) {
        worst = s;
        p = j;
      }
    }
    if (p < 0) {
      for (std::size_t k = 0; k < A.size(); ++k) res.u(A[k]) = uA[k];
      res.iterations = it;
      return res;
    }
    double up = 0.0;
    for (;;) {
      ++res.iterations;
      if (res.iterations > max_iter) throw NoConvergence("dual active-set QP", res.iterations, worst);
      Vec z, r;
      directions(chol, active_matrix(), N.col(p), z, r);
      double t1 = std::numeric_limits<double>::infinity();
      int l = -1;
      for (int k = 0; k < r.size(); ++k)
        if (r(k) > 0.0 && uA[k] / r(k) < t1) {
          t1 = uA[k] / r(k);
          l = k;
        }
      const double zn = z.dot(N.col(p));
      const double sp = N.col(p).dot(res.x) - b(p);
      const double t2 = zn > 1e-14 * z.norm() * N.col(p).norm() && z.norm() > 0.0
                            ? -sp / zn
                            : std::numeric_limits<double>::infinity();
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) throw Error("QP is infeasible");
      if (std::isfinite(t2)) res.x += t * z;
      for (int k = 0; k < r.size(); ++k) uA[k] -= t * r(k);
      up += t;
      if (t == t2) {
        A.push_back(p);
        uA.push_back(up);
        break;
      }
      A.erase(A.begin() + l);
      uA.erase(uA.begin() + l);
    }
  }
  throw NoConvergence("dual active-set QP", max_iter, 0.0);
}

} // namespace mixfem
