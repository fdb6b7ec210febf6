#include "element_common.hpp"
#include "mixfem/errors.hpp"

#include <algorithm>
#include <limits>
#include <set>

namespace mixfem {

using detail::symmetrize;

namespace {

/// Element problem of the complementary mixed formulation with per-site hardening.
/// Site d carries g_d(beta, dl) = sum_q W_q phi_q(S_q beta) - h a_d dl_d <= 0.
struct CmProblem {
  const ElementOperators& ops;
  const MaterialParams& mat;
  const ElementHistory& hist;
  int ns = 0;
  int nd = 0;
  double h = 0.0;
  Vec a;
  Eigen::LDLT<Mat> He;
  Vec beta_tr;
  double sc_s = 0.0;  ///< strain-area scale of the compatibility residual
  Vec sc_y;           ///< stress-area scale of each site constraint

  CmProblem(const ElementOperators& o, const MaterialParams& m, const ElementHistory& hi,
            const Vec& u_e)
      : ops(o), mat(m), hist(hi) {
    ns = ops.n_sigma;
    nd = static_cast<int>(ops.multipliers.sites.size());
    h = mat.hardening_slope();
    a = Vec::Zero(nd);
    for (std::size_t q = 0; q < ops.S_mult.size(); ++q) a(ops.mult_site[q]) += ops.mult_weight[q];
    He.compute(ops.He);
    beta_tr = He.solve(ops.C * u_e - plastic_strain_parameters(ops, hist));
    sc_s = mat.sigma_y0 / mat.E * ops.area;
    sc_y = mat.sigma_y0 * a;
  }

  /// Yield part g0, flow operator F (ns x nd) and optionally the weighted Hessians.
  void eval(const Vec& beta, Vec& g0, Mat& F, std::vector<Mat>* hess) const {
    g0 = Vec::Zero(nd);
    F = Mat::Zero(ns, nd);
    if (hess) hess->assign(nd, Mat::Zero(ns, ns));
    for (std::size_t q = 0; q < ops.S_mult.size(); ++q) {
      const int d = ops.mult_site[q];
      const double W = ops.mult_weight[q];
      const Mat& S = ops.S_mult[q];
      const Vec3 sig = S * beta;
      const MaterialPointState& st = hist.sites[q];
      g0(d) += W * yield_value(sig, st, mat);
      F.col(d) += W * S.transpose() * yield_gradient(sig, st, mat);
      if (hess) (*hess)[d] += W * S.transpose() * yield_hessian(sig, st, mat) * S;
    }
  }

  Mat hep(const Vec& dl, const std::vector<Mat>& hess) const {
    Mat H = ops.He;
    for (int d = 0; d < nd; ++d)
      if (dl(d) != 0.0) H += dl(d) * hess[d];
    return H;
  }

  /// Consistent stiffness for the active set A at (beta, dl).
  Mat stiffness(const Vec& beta, const Vec& dl, const std::vector<int>& A) const {
    if (A.empty()) return symmetrize(ops.C.transpose() * He.solve(ops.C));
    Vec g0;
    Mat F;
    std::vector<Mat> hess;
    eval(beta, g0, F, &hess);
    const int na = static_cast<int>(A.size());
    Mat M = Mat::Zero(ns + na, ns + na);
    M.topLeftCorner(ns, ns) = hep(dl, hess);
    for (int k = 0; k < na; ++k) {
      M.block(0, ns + k, ns, 1) = F.col(A[k]);
      M.block(ns + k, 0, 1, ns) = F.col(A[k]).transpose();
      M(ns + k, ns + k) = -h * a(A[k]);
    }
    Mat rhs = Mat::Zero(ns + na, ops.n_u);
    rhs.topRows(ns) = ops.C;
    const Mat X = M.partialPivLu().solve(rhs);
    return symmetrize(ops.C.transpose() * X.topRows(ns));
  }

  ElementResult finish(const Vec& beta, Vec dl, const std::vector<int>& A, int iterations) const {
    ElementResult r;
    r.beta = beta;
    r.iterations = iterations;
    r.active = static_cast<int>(A.size());
    r.q_int = ops.C.transpose() * beta;
    r.K = stiffness(beta, dl, A);
    r.trial = hist;
    r.trial.beta = beta;
    std::size_t q = 0;
    for (const MultiplierSite& site : ops.multipliers.sites)
      for (const IntegrationPoint& pt : site.points) {
        const Vec3 sig = ops.S_mult[q] * beta;
        r.trial.sites[q] = advance_state(hist.sites[q], sig, dl(ops.mult_site[q]), mat);
        r.site_stress.push_back(sig);
        r.site_x.push_back(pt.x);
        ++q;
      }
    Vec g0;
    Mat F;
    eval(beta, g0, F, nullptr);
    detail::start_kkt(r);
    for (int d = 0; d < nd; ++d) {
      const double yield = (g0(d) - h * a(d) * dl(d)) / a(d);
      detail::record_kkt(r, yield, dl(d), mat);
    }
    r.multipliers = dl;
    return r;
  }

  double yield_tol() const { return 1e-12; }
};

bool same_set(const std::vector<int>& x, const std::vector<int>& y) { return x == y; }

} // namespace

ElementResult cm_state_return_map(const Vec& u_e, const ElementHistory& hist,
                                  const ElementOperators& ops, const MaterialParams& mat,
                                  const ElementFormulation& form) {
  const CmProblem P(ops, mat, hist, u_e);
  const double tol = form.tol.cm_rel;
  Vec g0;
  Mat F;
  P.eval(P.beta_tr, g0, F, nullptr);

  std::vector<int> A;
  for (int d = 0; d < P.nd; ++d)
    if (g0(d) > P.yield_tol() * P.sc_y(d)) A.push_back(d);
  if (A.empty()) return P.finish(P.beta_tr, Vec::Zero(P.nd), A, 0);

  Vec beta = P.beta_tr;
  Vec dl = Vec::Zero(P.nd);
  std::vector<std::vector<int>> seen{A};
  bool union_tried = false;
  int total = 0;
  int drops = 0;
  bool moved = false;
  for (int sweep = 0; sweep < form.tol.max_sweeps; ++sweep) {
    const int na = static_cast<int>(A.size());
    bool dropped = false;
    for (int d = 0; d < P.nd; ++d)
      if (std::find(A.begin(), A.end(), d) == A.end()) dl(d) = 0.0;

    auto residual = [&](const Vec& b, const Vec& l, Vec& rs, Vec& ry, Mat* J) {
      Vec g;
      Mat Fm;
      std::vector<Mat> hess;
      P.eval(b, g, Fm, J ? &hess : nullptr);
      rs = ops.He * (b - P.beta_tr);
      ry.resize(na);
      for (int k = 0; k < na; ++k) {
        rs += l(A[k]) * Fm.col(A[k]);
        ry(k) = g(A[k]) - P.h * P.a(A[k]) * l(A[k]);
      }
      if (J) {
        J->setZero(P.ns + na, P.ns + na);
        J->topLeftCorner(P.ns, P.ns) = P.hep(l, hess);
        for (int k = 0; k < na; ++k) {
          J->block(0, P.ns + k, P.ns, 1) = Fm.col(A[k]);
          J->block(P.ns + k, 0, 1, P.ns) = Fm.col(A[k]).transpose();
          (*J)(P.ns + k, P.ns + k) = -P.h * P.a(A[k]);
        }
      }
    };
    auto merit = [&](const Vec& rs, const Vec& ry) {
      double m = (rs / P.sc_s).squaredNorm();
      for (int k = 0; k < na; ++k) m += std::pow(ry(k) / P.sc_y(A[k]), 2);
      return m;
    };
    auto converged = [&](const Vec& rs, const Vec& ry, double slack) {
      if (rs.norm() > slack * tol * P.sc_s) return false;
      for (int k = 0; k < na; ++k)
        if (std::abs(ry(k)) > slack * tol * P.sc_y(A[k])) return false;
      return true;
    };

    Vec rs, ry;
    Mat J;
    residual(beta, dl, rs, ry, &J);
    int it = 0;
    while (!converged(rs, ry, 1.0)) {
      if (it >= form.tol.max_iter)
        throw NoConvergence("element return mapping", it, std::sqrt(merit(rs, ry)));
      Vec rhs(P.ns + na);
      rhs << rs, ry;
      const Vec step = -J.partialPivLu().solve(rhs);
      // blocking step: an active multiplier reaching zero leaves the set
      double t_block = 1.0;
      int block = -1;
      for (int k = 0; k < na; ++k) {
        const double sk = step(P.ns + k);
        if (sk < 0.0 && dl(A[k]) + sk < 0.0 && -dl(A[k]) / sk < t_block) {
          t_block = -dl(A[k]) / sk;
          block = k;
        }
      }
      if (block >= 0 && drops < 4 * P.nd) {
        beta += t_block * step.head(P.ns);
        for (int k = 0; k < na; ++k) dl(A[k]) = std::max(0.0, dl(A[k]) + t_block * step(P.ns + k));
        dl(A[block]) = 0.0;
        A.erase(A.begin() + block);
        ++drops;
        dropped = true;
        moved = true;
        break;
      }
      const double m0 = merit(rs, ry);
      double t = 1.0;
      Vec b1, l1, rs1, ry1;
      for (int ls = 0; ls < 30; ++ls) {
        b1 = beta + t * step.head(P.ns);
        l1 = dl;
        for (int k = 0; k < na; ++k) l1(A[k]) += t * step(P.ns + k);
        residual(b1, l1, rs1, ry1, nullptr);
        if (merit(rs1, ry1) <= (1.0 - 1e-4 * t) * m0) break;
        t *= 0.5;
      }
      const bool stalled = t * step.head(P.ns).norm() <= 1e-15 * (beta.norm() + 1e-300);
      beta = b1;
      dl = l1;
      residual(beta, dl, rs, ry, &J);
      ++it;
      if (stalled && converged(rs, ry, 1e3)) break;
    }
    total += it;
    if (dropped) {
      --sweep;
      if (A.empty()) {
        beta = P.beta_tr;
        dl.setZero();
      }
      if (!A.empty()) continue;
    }

    Vec g;
    P.eval(beta, g, F, nullptr);
    std::vector<int> next;
    bool ok = true;
    for (int d = 0; d < P.nd; ++d) {
      const bool in = std::find(A.begin(), A.end(), d) != A.end();
      if (in) {
        if (dl(d) > 0.0) next.push_back(d);
        else ok = false;
      } else if (g(d) > P.yield_tol() * P.sc_y(d)) {
        next.push_back(d);
        ok = false;
      }
    }
    if (ok) return P.finish(beta, dl, A, total);
    // a blocking drop since the last update means the iterate moved on
    if (moved) seen.assign(1, A);
    moved = false;
    if (std::find_if(seen.begin(), seen.end(), [&](const auto& s) { return same_set(s, next); }) !=
        seen.end()) {
      if (union_tried) throw ActiveSetCycling("element return mapping active set cycles");
      union_tried = true;
      std::set<int> un(A.begin(), A.end());
      un.insert(next.begin(), next.end());
      next.assign(un.begin(), un.end());
    }
    seen.push_back(next);
    A = next;
    if (A.empty()) return P.finish(P.beta_tr, Vec::Zero(P.nd), A, total);
  }
  throw ActiveSetCycling("element return mapping exceeded the active-set sweeps");
}

ElementResult cm_state_ip(const Vec& u_e, const ElementHistory& hist, const ElementOperators& ops,
                          const MaterialParams& mat, const ElementFormulation& form) {
  const CmProblem P(ops, mat, hist, u_e);
  const IpOptions& opt = form.ip;
  const double tol = form.tol.cm_rel;
  const double eps_l = opt.eps_lambda * mat.sigma_y0 / mat.E;
  const Vec eps_s = opt.eps_s * P.sc_y;

  Vec g0;
  Mat F;
  std::vector<Mat> hess;
  P.eval(P.beta_tr, g0, F, nullptr);
  if ((g0.array() <= P.yield_tol() * P.sc_y.array()).all())
    return P.finish(P.beta_tr, Vec::Zero(P.nd), {}, 0);

  Vec beta = P.beta_tr;
  Vec dl = Vec::Constant(P.nd, eps_l);
  Vec s = (-g0).cwiseMax(eps_s);
  double mu = opt.simplified ? 0.0 : opt.eta * s.dot(dl) / P.nd;
  bool stalled = false;
  int it = 0;
  for (;; ++it) {
    P.eval(beta, g0, F, &hess);
    const Vec g = g0 - P.h * P.a.cwiseProduct(dl);
    const Vec rs = ops.He * (beta - P.beta_tr) + F * dl;
    auto kkt = [&](double slack) {
      if (rs.norm() > slack * tol * P.sc_s) return false;
      for (int d = 0; d < P.nd; ++d) {
        const bool inactive = dl(d) <= 10.0 * eps_l && g(d) <= slack * tol * P.sc_y(d);
        const bool active = std::abs(g(d)) <= slack * tol * P.sc_y(d) && dl(d) >= 0.0;
        if (!inactive && !active) return false;
      }
      return true;
    };
    const bool small_mu = mu <= tol * eps_l * P.sc_y.minCoeff();
    if (kkt(1.0) && small_mu) break;
    // clamped multipliers leave a residual floor near the tolerance
    if ((stalled || it >= opt.max_iter / 2) && kkt(1e3) && small_mu) break;
    if (it >= opt.max_iter) throw NoConvergence("interior point", it, rs.norm() / P.sc_s);

    Mat M = Mat::Zero(P.ns + P.nd, P.ns + P.nd);
    M.topLeftCorner(P.ns, P.ns) = P.hep(dl, hess);
    M.topRightCorner(P.ns, P.nd) = F;
    M.bottomLeftCorner(P.nd, P.ns) = F.transpose();
    Vec rhs(P.ns + P.nd);
    rhs.head(P.ns) = -rs;
    for (int d = 0; d < P.nd; ++d) {
      M(P.ns + d, P.ns + d) = -(P.h * P.a(d) + s(d) / dl(d));
      rhs(P.ns + d) = -(g(d) + mu / dl(d));
    }
    const Vec step = M.partialPivLu().solve(rhs);
    const Vec db = step.head(P.ns);
    const Vec ddl = step.tail(P.nd);
    Vec ds(P.nd);
    for (int d = 0; d < P.nd; ++d) ds(d) = (mu - s(d) * dl(d) - s(d) * ddl(d)) / dl(d);

    stalled = db.norm() <= 1e-14 * beta.norm();
    if (opt.simplified) {
      beta += db;
      dl = (dl + ddl).cwiseMax(eps_l);
      s = (s + ds).cwiseMax(eps_s);
    } else {
      double omega = 1.0;
      for (int d = 0; d < P.nd; ++d) {
        if (ddl(d) < 0.0) omega = std::min(omega, -dl(d) / ddl(d));
        if (ds(d) < 0.0) omega = std::min(omega, -s(d) / ds(d));
      }
      const double t = omega < 1.0 ? opt.theta * omega : 1.0;
      beta += t * db;
      dl += t * ddl;
      s += t * ds;
      mu = opt.eta * s.dot(dl) / P.nd;
    }
  }

  std::vector<int> A;
  for (int d = 0; d < P.nd; ++d) {
    if (dl(d) <= 10.0 * eps_l) dl(d) = 0.0;
    else A.push_back(d);
  }
  return P.finish(beta, dl, A, it);
}

ElementResult cm_state_sqp(const Vec& u_e, const ElementHistory& hist,
                           const ElementOperators& ops, const MaterialParams& mat,
                           const ElementFormulation& form) {
  const CmProblem P(ops, mat, hist, u_e);
  const double tol = form.tol.cm_rel;
  Vec g0;
  Mat F;
  std::vector<Mat> hess;
  P.eval(P.beta_tr, g0, F, nullptr);
  if ((g0.array() <= P.yield_tol() * P.sc_y.array()).all())
    return P.finish(P.beta_tr, Vec::Zero(P.nd), {}, 0);

  // Unknowns z = (beta, kappa) with kappa = h dl; without hardening kappa is absent.
  const bool hard = P.h > 0.0;
  const int nz = P.ns + (hard ? P.nd : 0);
  Vec z = Vec::Zero(nz);
  z.head(P.ns) = P.beta_tr;
  Vec u = Vec::Zero(P.nd);

  auto objective = [&](const Vec& x) {
    const Vec db = x.head(P.ns) - P.beta_tr;
    double f = 0.5 * db.dot(ops.He * db);
    if (hard)
      for (int d = 0; d < P.nd; ++d) f += P.a(d) * x(P.ns + d) * x(P.ns + d) / (2.0 * P.h);
    return f;
  };
  auto constraints = [&](const Vec& x, Vec& c, Mat* Fm, std::vector<Mat>* H) {
    Mat Fl;
    P.eval(x.head(P.ns), c, Fl, H);
    if (hard) c -= P.a.cwiseProduct(x.tail(P.nd));
    if (Fm) *Fm = Fl;
  };
  auto merit = [&](const Vec& x, double rho) {
    Vec c;
    constraints(x, c, nullptr, nullptr);
    return objective(x) + rho * c.cwiseMax(0.0).sum();
  };

  int it = 0;
  double rho = 0.0;
  for (;; ++it) {
    Vec c;
    constraints(z, c, &F, &hess);
    Vec grad(nz);
    grad.head(P.ns) = ops.He * (z.head(P.ns) - P.beta_tr);
    if (hard) grad.tail(P.nd) = P.a.cwiseProduct(z.tail(P.nd)) / P.h;

    Vec rs = grad.head(P.ns) + F * u;
    bool done = rs.norm() <= tol * P.sc_s;
    for (int d = 0; d < P.nd && done; ++d) {
      const double dl = u(d);
      if (hard && std::abs(P.a(d) * z(P.ns + d) / P.h - P.a(d) * dl) > tol * P.sc_s) done = false;
      if (c(d) > tol * P.sc_y(d)) done = false;
      if (dl > 0.0 && std::abs(c(d)) > tol * P.sc_y(d)) done = false;
    }
    if (done && it > 0) break;
    if (it >= form.sqp.max_iter) throw NoConvergence("SQP", it, rs.norm() / P.sc_s);

    Mat B = Mat::Zero(nz, nz);
    B.topLeftCorner(P.ns, P.ns) = form.sqp.lagrangian_hessian ? P.hep(u, hess) : ops.He;
    if (hard)
      for (int d = 0; d < P.nd; ++d) B(P.ns + d, P.ns + d) = P.a(d) / P.h;
    // Linearized constraints c + J dz <= 0 in the form -J dz >= c.
    Mat N = Mat::Zero(nz, P.nd);
    N.topRows(P.ns) = -F;
    if (hard)
      for (int d = 0; d < P.nd; ++d) N(P.ns + d, d) = P.a(d);
    const QpResult qp = solve_qp_dual(B, grad, N, c);
    const Vec dz = qp.x;

    rho = std::max(rho, 2.0 * qp.u.maxCoeff() + 1e-300);
    const double D = grad.dot(dz) - rho * c.cwiseMax(0.0).sum();
    const double m0 = merit(z, rho);
    double t = 1.0;
    for (int ls = 0; ls < 40; ++ls) {
      if (merit(z + t * dz, rho) <= m0 + 1e-4 * t * std::min(D, 0.0)) break;
      t *= 0.5;
    }
    z += t * dz;
    u = (1.0 - t) * u + t * qp.u;
    if (dz.head(P.ns).norm() * t <= 1e-15 * z.head(P.ns).norm()) {
      constraints(z, c, &F, nullptr);
      if ((c.array() <= 1e3 * tol * P.sc_y.array()).all()) break;
    }
  }

  Vec dl = Vec::Zero(P.nd);
  std::vector<int> A;
  for (int d = 0; d < P.nd; ++d)
    if (u(d) > 0.0) {
      dl(d) = hard ? z(P.ns + d) / P.h : u(d);
      A.push_back(d);
    }
  return P.finish(z.head(P.ns), dl, A, it);
}

} // namespace mixfem
