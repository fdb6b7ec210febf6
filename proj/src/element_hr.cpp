#include "element_common.hpp"
#include "mixfem/errors.hpp"

namespace mixfem {

using detail::symmetrize;

namespace {

/// Stress-driven evaluation of the element compatibility residual.
struct HrEval {
  Vec R;      ///< C u - sum w S^T eps(S beta)
  Mat H;      ///< elastoplastic compliance
  double phi = 0.0;  ///< complementary potential, filled on request
  std::vector<InverseResult> sites;
};

HrEval hr_eval(const Vec& u_e, const Vec& beta, const ElementHistory& hist,
               const ElementOperators& ops, const MaterialParams& mat, bool with_phi = false) {
  HrEval ev;
  ev.R = ops.C * u_e;
  if (with_phi) ev.phi = -beta.dot(ev.R);
  ev.H = Mat::Zero(ops.n_sigma, ops.n_sigma);
  ev.sites.reserve(ops.qp.size());
  for (std::size_t g = 0; g < ops.qp.size(); ++g) {
    ev.sites.push_back(inverse_state_update(ops.S[g] * beta, hist.sites[g], mat));
    const double w = ops.qp[g].weight;
    ev.R -= w * ops.S[g].transpose() * ev.sites.back().strain;
    ev.H += w * ops.S[g].transpose() * ev.sites.back().compliance * ops.S[g];
    if (with_phi) {
      // Legendre transform of the incremental energy at the returned strain
      const Vec3 sig = ops.S[g] * beta;
      const Vec3& eps = ev.sites.back().strain;
      ev.phi += w * (sig.dot(eps) - state_update(eps, hist.sites[g], mat).energy);
    }
  }
  ev.H = symmetrize(ev.H);
  return ev;
}

Eigen::LDLT<Mat> factor(const Mat& H) {
  Eigen::LDLT<Mat> f(H);
  if (f.info() != Eigen::Success || !(f.vectorD().minCoeff() > 0.0))
    throw NoConvergence("Hellinger-Reissner compliance is not positive definite", 0, 0.0);
  return f;
}

ElementResult hr_result(const Vec& beta, const HrEval& ev, const Eigen::LDLT<Mat>& Hf,
                        const ElementHistory& hist, const ElementOperators& ops,
                        const MaterialParams& mat) {
  ElementResult r;
  r.beta = beta;
  r.trial = hist;
  r.trial.beta = beta;
  r.K = symmetrize(ops.C.transpose() * Hf.solve(ops.C));
  r.multipliers = Vec::Zero(static_cast<Eigen::Index>(ops.qp.size()));
  detail::start_kkt(r);
  for (std::size_t g = 0; g < ops.qp.size(); ++g) {
    const Vec3 sig = ops.S[g] * beta;
    r.trial.sites[g] = ev.sites[g].state;
    r.multipliers(g) = ev.sites[g].dlambda;
    r.site_stress.push_back(sig);
    r.site_x.push_back(ops.qp[g].x);
    r.active += ev.sites[g].dlambda > 0.0;
    detail::record_kkt(r, yield_value(sig, ev.sites[g].state, mat), ev.sites[g].dlambda, mat);
  }
  return r;
}

} // namespace

ElementResult hr_state(const Vec& u_e, const ElementHistory& hist, const ElementOperators& ops,
                       const MaterialParams& mat, const ElementFormulation& form) {
  if (mat.k_i <= 0.0 && mat.k_k <= 0.0)
    throw PerfectPlasticityUnsupported("Hellinger-Reissner elements need hardening");
  const double scale = mat.sigma_y0 / mat.E * ops.area;
  Vec beta = hist.beta.size() == ops.n_sigma ? hist.beta : Vec::Zero(ops.n_sigma);
  HrEval ev = hr_eval(u_e, beta, hist, ops, mat, true);
  int it = 0;
  while (ev.R.norm() > form.tol.rel * scale) {
    if (it >= form.tol.max_iter) throw NoConvergence("Hellinger-Reissner element", it, ev.R.norm() / scale);
    const Vec step = factor(ev.H).solve(ev.R);
    const double slope = -ev.R.dot(step);
    // Armijo backtracking on the convex complementary potential
    double t = 1.0;
    HrEval trial = hr_eval(u_e, beta + step, hist, ops, mat, true);
    for (int ls = 0; ls < 40 && trial.phi > ev.phi + 1e-4 * t * slope &&
                     trial.R.norm() > form.tol.rel * scale;
         ++ls) {
      t *= 0.5;
      trial = hr_eval(u_e, beta + t * step, hist, ops, mat, true);
    }
    ev = std::move(trial);
    beta += t * step;
    ++it;
  }
  ElementResult r = hr_result(beta, ev, factor(ev.H), hist, ops, mat);
  r.q_int = ops.C.transpose() * beta;
  r.iterations = it;
  r.r_sigma = Vec::Zero(ops.n_sigma);
  return r;
}

ElementResult hr_state_relaxed(const Vec& u_e, const ElementHistory& hist, const Vec& beta_iter,
                               const ElementOperators& ops, const MaterialParams& mat,
                               const ElementFormulation&) {
  if (mat.k_i <= 0.0 && mat.k_k <= 0.0)
    throw PerfectPlasticityUnsupported("Hellinger-Reissner elements need hardening");
  const HrEval ev0 = hr_eval(u_e, beta_iter, hist, ops, mat);
  const Vec beta = beta_iter + factor(ev0.H).solve(ev0.R);
  const HrEval ev = hr_eval(u_e, beta, hist, ops, mat);
  const Eigen::LDLT<Mat> Hf = factor(ev.H);
  ElementResult r = hr_result(beta, ev, Hf, hist, ops, mat);
  r.q_int = ops.C.transpose() * (beta + Hf.solve(ev.R));
  r.r_sigma = ev.R;
  r.iterations = 1;
  return r;
}

} // namespace mixfem
