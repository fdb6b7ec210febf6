#include "element_common.hpp"
#include "mixfem/errors.hpp"

namespace mixfem {

using detail::symmetrize;

ElementResult hw_nodal_force_state(const Vec& u_e, const ElementHistory& hist,
                                   const ElementOperators& ops, const MaterialParams& mat,
                                   const ElementFormulation& form) {
  if (mat.k_i <= 0.0 && mat.k_k <= 0.0)
    throw PerfectPlasticityUnsupported("nodal-force algorithm needs hardening");
  const int nl = ops.n_u - 3;
  const Eigen::PartialPivLU<Mat> CV(ops.CV);
  if (!(CV.rcond() > 1e-12))
    throw SingularCV("the deformational compatibility matrix is singular");
  const std::vector<Subdomain>& sub = ops.strain.subdomains;

  const Vec lambda_s = ops.filter.Pi * u_e;
  const double scale = mat.sigma_y0 / mat.E * std::sqrt(ops.area);
  Vec q = hist.q_lambda.size() == nl ? hist.q_lambda : Vec::Zero(nl);

  std::vector<InverseResult> inv(sub.size());
  Vec beta, lambda;
  Mat H;
  // returns the convex potential whose gradient in q is lambda - lambda_s
  auto evaluate = [&](const Vec& ql) {
    beta = CV.transpose().solve(ql);
    Vec e = Vec::Zero(ops.n_sigma);
    H = Mat::Zero(ops.n_sigma, ops.n_sigma);
    double phi = -ql.dot(lambda_s);
    for (std::size_t d = 0; d < sub.size(); ++d) {
      const Vec3 sig = sub[d].S_bar * beta;
      inv[d] = inverse_state_update(sig, hist.sites[d], mat);
      e += sub[d].area * sub[d].S_bar.transpose() * inv[d].strain;
      H += sub[d].area * sub[d].S_bar.transpose() * inv[d].compliance * sub[d].S_bar;
      phi += sub[d].area *
             (sig.dot(inv[d].strain) - inv[d].energy);
    }
    lambda = CV.solve(e);
    return phi;
  };
  auto tangent = [&]() {
    return Mat(symmetrize(ops.CV.transpose() * H.ldlt().solve(ops.CV)));
  };

  double phi = evaluate(q);
  int it = 0;
  while ((lambda - lambda_s).norm() > form.tol.rel * scale) {
    if (it >= form.tol.max_iter)
      throw NoConvergence("nodal-force element", it, (lambda - lambda_s).norm() / scale);
    const Vec grad = lambda - lambda_s;
    const Vec step = -tangent() * grad;
    const double slope = grad.dot(step);
    // below roundoff of phi the decrease test is replaced by a gradient decrease
    auto accept = [&](double t, double phi_t) {
      if (phi_t <= phi + 1e-4 * t * slope) return true;
      if ((lambda - lambda_s).norm() <= form.tol.rel * scale) return true;
      return -t * slope <= 1e-10 * std::abs(phi) && (lambda - lambda_s).norm() < grad.norm();
    };
    double t = 1.0;
    double phi_t = evaluate(q + step);
    for (int ls = 0; ls < 40 && !accept(t, phi_t); ++ls) {
      t *= 0.5;
      phi_t = evaluate(q + t * step);
    }
    q += t * step;
    phi = phi_t;
    ++it;
  }

  ElementResult r;
  r.iterations = it;
  r.beta = beta;
  r.trial = hist;
  r.trial.beta = beta;
  r.trial.q_lambda = q;
  r.q_int = ops.filter.V * q;
  r.K = symmetrize(ops.filter.V * tangent() * ops.filter.Pi);
  r.multipliers = Vec::Zero(static_cast<Eigen::Index>(sub.size()));
  detail::start_kkt(r);
  for (std::size_t d = 0; d < sub.size(); ++d) {
    const Vec3 sig = sub[d].S_bar * beta;
    r.trial.sites[d] = inv[d].state;
    r.multipliers(d) = inv[d].dlambda;
    r.site_stress.push_back(sig);
    Vec2 xc = Vec2::Zero();
    double wsum = 0.0;
    for (const IntegrationPoint& p : sub[d].points) {
      xc += p.weight * p.x;
      wsum += p.weight;
    }
    r.site_x.push_back(xc / wsum);
    r.active += inv[d].dlambda > 0.0;
    detail::record_kkt(r, yield_value(sig, inv[d].state, mat), inv[d].dlambda, mat);
  }
  return r;
}

} // namespace mixfem
