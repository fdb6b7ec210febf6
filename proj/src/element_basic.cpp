#include "element_common.hpp"
#include "mixfem/errors.hpp"

#include <limits>

namespace mixfem {

using detail::record_kkt;
using detail::start_kkt;
using detail::symmetrize;

ElementResult displacement_element_state(const Vec& u_e, const ElementHistory& hist,
                                         const ElementOperators& ops, const MaterialParams& mat,
                                         const ElementFormulation&) {
  ElementResult r;
  r.q_int = Vec::Zero(ops.n_u);
  r.K = Mat::Zero(ops.n_u, ops.n_u);
  r.trial = hist;
  r.multipliers = Vec::Zero(static_cast<Eigen::Index>(ops.qp.size()));
  start_kkt(r);
  for (std::size_t g = 0; g < ops.qp.size(); ++g) {
    const UpdateResult up = state_update(ops.B[g] * u_e, hist.sites[g], mat);
    const double w = ops.qp[g].weight;
    r.q_int += w * ops.B[g].transpose() * up.stress;
    r.K += w * ops.B[g].transpose() * up.tangent * ops.B[g];
    r.trial.sites[g] = up.state;
    r.multipliers(g) = up.dlambda;
    r.site_stress.push_back(up.stress);
    r.site_x.push_back(ops.qp[g].x);
    r.iterations = std::max(r.iterations, up.iterations);
    r.active += up.dlambda > 0.0;
    record_kkt(r, yield_value(up.stress, up.state, mat), up.dlambda, mat);
  }
  r.K = symmetrize(r.K);
  return r;
}

ElementResult hw_identical_state(const Vec& u_e, const ElementHistory& hist,
                                 const ElementOperators& ops, const MaterialParams& mat,
                                 const ElementFormulation&) {
  Eigen::LDLT<Mat> G(ops.G);
  if (G.info() != Eigen::Success || !(G.vectorD().cwiseAbs().minCoeff() >
                                      1e-12 * G.vectorD().cwiseAbs().maxCoeff()))
    throw SingularG("strain-stress operator is singular");
  const Vec e = G.solve(ops.C * u_e);

  ElementResult r;
  r.trial = hist;
  r.multipliers = Vec::Zero(static_cast<Eigen::Index>(ops.qp.size()));
  start_kkt(r);
  Vec s = Vec::Zero(ops.n_sigma);
  Mat Hs = Mat::Zero(ops.n_sigma, ops.n_sigma);
  for (std::size_t g = 0; g < ops.qp.size(); ++g) {
    const UpdateResult up = state_update(ops.S[g] * e, hist.sites[g], mat);
    const double w = ops.qp[g].weight;
    s += w * ops.S[g].transpose() * up.stress;
    Hs += w * ops.S[g].transpose() * up.tangent * ops.S[g];
    r.trial.sites[g] = up.state;
    r.multipliers(g) = up.dlambda;
    r.site_stress.push_back(up.stress);
    r.site_x.push_back(ops.qp[g].x);
    r.iterations = std::max(r.iterations, up.iterations);
    r.active += up.dlambda > 0.0;
    record_kkt(r, yield_value(up.stress, up.state, mat), up.dlambda, mat);
  }
  r.beta = G.solve(s);
  r.trial.beta = r.beta;
  r.q_int = ops.C.transpose() * r.beta;
  const Mat GinvC = G.solve(ops.C);
  r.K = symmetrize(GinvC.transpose() * Hs * GinvC);
  return r;
}

ElementResult es_state(const Vec& u_e, const ElementHistory& hist, const ElementOperators& ops,
                       const MaterialParams& mat, const ElementFormulation& form) {
  const int ne = static_cast<int>(ops.Gt.rows());
  const double scale = mat.sigma_y0 * ops.area;
  Vec a = hist.enhanced.size() == ne ? hist.enhanced : Vec::Zero(ne);

  std::vector<UpdateResult> ups(ops.qp.size());
  auto evaluate = [&](const Vec& alpha, Vec& res, Mat& Kee) {
    res = Vec::Zero(ne);
    Kee = Mat::Zero(ne, ne);
    double energy = 0.0;
    for (std::size_t g = 0; g < ops.qp.size(); ++g) {
      ups[g] = state_update(ops.B[g] * u_e + ops.Et[g] * alpha, hist.sites[g], mat);
      const double w = ops.qp[g].weight;
      res += w * ops.Et[g].transpose() * ups[g].stress;
      Kee += w * ops.Et[g].transpose() * ups[g].tangent * ops.Et[g];
      energy += w * ups[g].energy;
    }
    return energy;
  };

  Vec res, res_try;
  Mat Kee, Kee_try;
  double energy = evaluate(a, res, Kee);
  int it = 0;
  while (res.norm() > form.tol.rel * scale) {
    if (it >= form.tol.max_iter) throw NoConvergence("enhanced strain element", it, res.norm() / scale);
    Eigen::LDLT<Mat> f(symmetrize(Kee));
    if (f.info() != Eigen::Success || !(f.vectorD().minCoeff() > 0.0))
      throw SingularEnhancedStiffness("enhanced strain stiffness is not positive definite");
    const Vec step = -f.solve(res);
    const double slope = res.dot(step);
    // Armijo backtracking on the convex element energy
    double t = 1.0;
    Vec a_try = a + step;
    double e_try = evaluate(a_try, res_try, Kee_try);
    for (int k = 0; k < 30 && e_try > energy + 1e-4 * t * slope &&
                    res_try.norm() > form.tol.rel * scale;
         ++k) {
      t *= 0.5;
      a_try = a + t * step;
      e_try = evaluate(a_try, res_try, Kee_try);
    }
    a = a_try;
    res = res_try;
    Kee = Kee_try;
    energy = e_try;
    ++it;
  }

  ElementResult r;
  r.trial = hist;
  r.trial.enhanced = a;
  r.iterations = it;
  r.q_int = Vec::Zero(ops.n_u);
  r.multipliers = Vec::Zero(static_cast<Eigen::Index>(ops.qp.size()));
  start_kkt(r);
  Mat Ku = Mat::Zero(ops.n_u, ops.n_u);
  Mat Keu = Mat::Zero(ne, ops.n_u);
  Mat M = Mat::Zero(ops.n_sigma, ops.n_sigma);
  Vec ms = Vec::Zero(ops.n_sigma);
  for (std::size_t g = 0; g < ops.qp.size(); ++g) {
    const double w = ops.qp[g].weight;
    r.q_int += w * ops.B[g].transpose() * ups[g].stress;
    Ku += w * ops.B[g].transpose() * ups[g].tangent * ops.B[g];
    Keu += w * ops.Et[g].transpose() * ups[g].tangent * ops.B[g];
    M += w * ops.S[g].transpose() * ops.S[g];
    ms += w * ops.S[g].transpose() * ups[g].stress;
    r.trial.sites[g] = ups[g].state;
    r.multipliers(g) = ups[g].dlambda;
    r.site_stress.push_back(ups[g].stress);
    r.site_x.push_back(ops.qp[g].x);
    r.active += ups[g].dlambda > 0.0;
    record_kkt(r, yield_value(ups[g].stress, ups[g].state, mat), ups[g].dlambda, mat);
  }
  Eigen::LDLT<Mat> f(symmetrize(Kee));
  if (f.info() != Eigen::Success || !(f.vectorD().minCoeff() > 0.0))
    throw SingularEnhancedStiffness("enhanced strain stiffness is not positive definite");
  r.K = symmetrize(Ku - Keu.transpose() * f.solve(Keu));
  r.beta = M.ldlt().solve(ms);
  r.trial.beta = r.beta;
  return r;
}

} // namespace mixfem
