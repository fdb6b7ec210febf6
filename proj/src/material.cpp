#include "mixfem/material.hpp"

#include "mixfem/errors.hpp"

#include <limits>

namespace mixfem {

namespace {

// Full-space work in 4-component Voigt arrays ordered (xx, yy, zz, xy),
// stresses with tensor shear and strains with engineering shear.
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

constexpr int kInPlane[3] = {0, 1, 3};

const Vec4 kWeight(1.0, 1.0, 1.0, 2.0);

Vec4 embed(const Vec3& v, double zz) { return Vec4(v(0), v(1), zz, v(2)); }

Vec3 restrict3(const Vec4& v) { return Vec3(v(0), v(1), v(3)); }

Mat3 restrict3(const Mat4& m) {
  Mat3 r;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) r(a, b) = m(kInPlane[a], kInPlane[b]);
  return r;
}

// Static condensation of the zz row and column.
Mat3 condense(const Mat4& m) {
  Mat3 r;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      r(a, b) = m(kInPlane[a], kInPlane[b]) - m(kInPlane[a], 2) * m(2, kInPlane[b]) / m(2, 2);
  return r;
}

Mat4 dev_projector() {
  Mat4 P = Mat4::Identity();
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) P(a, b) -= 1.0 / 3.0;
  return P;
}

Vec4 deviator(const Vec4& s) {
  const double m = (s(0) + s(1) + s(2)) / 3.0;
  return Vec4(s(0) - m, s(1) - m, s(2) - m, s(3));
}

double wnorm(const Vec4& v) { return std::sqrt(v.dot(kWeight.cwiseProduct(v))); }

Mat4 elastic4(const MaterialParams& p) {
  const double G = p.shear_modulus();
  const double L = p.lame_lambda();
  Mat4 C = Mat4::Zero();
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) C(a, b) = L;
    C(a, a) += 2.0 * G;
  }
  C(3, 3) = G;
  return C;
}

Mat4 compliance4(const MaterialParams& p) {
  Mat4 D = Mat4::Zero();
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) D(a, b) = -p.nu / p.E;
    D(a, a) = 1.0 / p.E;
  }
  D(3, 3) = 1.0 / p.shear_modulus();
  return D;
}

Vec4 plastic4(const Vec3& ep) { return embed(ep, -(ep(0) + ep(1))); }

Vec4 backstress4(const MaterialPointState& s, const MaterialParams& p) {
  const Vec3& a = s.alpha_k;
  return p.k_k * Vec4(a(0), a(1), -(a(0) + a(1)), 0.5 * a(2));
}

double yield_radius(const MaterialPointState& s, const MaterialParams& p) {
  return p.c * (p.sigma_y0 + p.k_i * s.alpha_i);
}

double tensor_norm2(const Vec3& ep) {
  const double zz = -(ep(0) + ep(1));
  return ep(0) * ep(0) + ep(1) * ep(1) + zz * zz + 0.5 * ep(2) * ep(2);
}

struct Direct4 {
  Vec4 stress;
  Mat4 tangent;
  double dlambda = 0.0;
  Vec4 flow = Vec4::Zero();  // unit relative deviator, tensor shear
};

Direct4 direct4(const Vec4& e, const MaterialPointState& prior, const MaterialParams& p,
                double tie) {
  const Mat4 C = elastic4(p);
  const Vec4 s_tr = C * (e - plastic4(prior.plastic_strain));
  const Vec4 xi = deviator(s_tr) - backstress4(prior, p);
  const double nxi = wnorm(xi);
  const double f = nxi - yield_radius(prior, p);
  Direct4 out;
  if (f <= tie * p.sigma_y0) {
    out.stress = s_tr;
    out.tangent = C;
    return out;
  }
  const double G = p.shear_modulus();
  const double denom = 2.0 * G + p.hardening_slope();
  const Vec4 n = xi / nxi;
  const Vec4 wn = kWeight.cwiseProduct(n);
  out.dlambda = f / denom;
  out.flow = n;
  out.stress = s_tr - 2.0 * G * out.dlambda * n;
  const Mat4 A = dev_projector() * C;
  const Mat4 dn = (Mat4::Identity() - n * wn.transpose()) / nxi;
  out.tangent = C - 2.0 * G * (n * wn.transpose() / denom + out.dlambda * dn) * A;
  out.tangent = 0.5 * (out.tangent + out.tangent.transpose()).eval();
  return out;
}

struct Inverse4 {
  Vec4 strain;
  Mat4 compliance;
  double dlambda = 0.0;
  Vec4 flow = Vec4::Zero();
};

Inverse4 inverse4(const Vec4& s, const MaterialPointState& prior, const MaterialParams& p,
                  double tie) {
  const Mat4 D = compliance4(p);
  Inverse4 out;
  out.strain = D * s + plastic4(prior.plastic_strain);
  out.compliance = D;
  const Vec4 xi = deviator(s) - backstress4(prior, p);
  const double nxi = wnorm(xi);
  const double f = nxi - yield_radius(prior, p);
  if (f <= tie * p.sigma_y0) return out;
  const double h = p.hardening_slope();
  if (h <= 0.0) throw PerfectPlasticityUnsupported();
  const Vec4 n = xi / nxi;
  const Vec4 wn = kWeight.cwiseProduct(n);
  out.dlambda = f / h;
  out.flow = n;
  out.strain += out.dlambda * wn;
  const Mat4 WP = kWeight.asDiagonal() * dev_projector();
  out.compliance += wn * wn.transpose() / h + out.dlambda / nxi * (WP - wn * wn.transpose());
  out.compliance = 0.5 * (out.compliance + out.compliance.transpose()).eval();
  return out;
}

MaterialPointState advance4(const MaterialPointState& prior, const Vec4& flow, double dl,
                            const MaterialParams& p) {
  MaterialPointState s = prior;
  if (dl == 0.0) return s;
  const Vec4 dep = dl * kWeight.cwiseProduct(flow);
  s.plastic_strain += restrict3(dep);
  s.alpha_i += p.c * dl;
  s.alpha_k += restrict3(dep);
  return s;
}

double energy(const Vec4& stress, const Vec4& e, const MaterialPointState& s, double dl,
              const MaterialParams& p) {
  const double elastic = 0.5 * stress.dot(e - plastic4(s.plastic_strain));
  const double hard = 0.5 * p.k_i * s.alpha_i * s.alpha_i +
                      0.5 * p.k_k * tensor_norm2(s.alpha_k);
  return elastic + hard + p.c * p.sigma_y0 * dl;
}

} // namespace

void MaterialParams::validate() const {
  if (!(E > 0.0)) throw InvalidParams("E must be positive");
  if (!(nu > -1.0 && nu < 0.5)) throw InvalidParams("nu must lie in (-1, 0.5)");
  if (!(sigma_y0 > 0.0)) throw InvalidParams("sigma_y0 must be positive");
  if (!(k_i >= 0.0) || !(k_k >= 0.0)) throw InvalidParams("hardening moduli must be non-negative");
  if (!(c > 0.0)) throw InvalidParams("c must be positive");
}

Mat3 elastic_tensor(const MaterialParams& p) {
  if (p.plane == PlaneAssumption::plane_strain) return restrict3(elastic4(p));
  const double f = p.E / (1.0 - p.nu * p.nu);
  Mat3 C;
  C << f, f * p.nu, 0.0, f * p.nu, f, 0.0, 0.0, 0.0, f * (1.0 - p.nu) / 2.0;
  return C;
}

Mat3 elastic_compliance(const MaterialParams& p) {
  if (p.plane == PlaneAssumption::plane_stress) return restrict3(compliance4(p));
  return elastic_tensor(p).inverse();
}

double out_of_plane_stress(const Vec3& sigma, const MaterialPointState& state,
                           const MaterialParams& p) {
  if (p.plane == PlaneAssumption::plane_stress) return 0.0;
  const double G = p.shear_modulus();
  const double L = p.lame_lambda();
  const double ezz = state.plastic_strain(0) + state.plastic_strain(1);
  const double tr = (sigma(0) + sigma(1) + 2.0 * G * ezz) / (2.0 * L + 2.0 * G);
  return L * tr + 2.0 * G * ezz;
}

double yield_value(const Vec3& sigma, const MaterialPointState& state,
                   const MaterialParams& p) {
  const Vec4 s = embed(sigma, out_of_plane_stress(sigma, state, p));
  return wnorm(deviator(s) - backstress4(state, p)) - yield_radius(state, p);
}

Vec3 yield_gradient(const Vec3& sigma, const MaterialPointState& state,
                    const MaterialParams& p) {
  const Vec4 xi = deviator(embed(sigma, 0.0)) - backstress4(state, p);
  const double nxi = wnorm(xi);
  if (nxi == 0.0) return Vec3::Zero();
  return restrict3(Vec4(kWeight.cwiseProduct(xi) / nxi));
}

Mat3 yield_hessian(const Vec3& sigma, const MaterialPointState& state,
                   const MaterialParams& p) {
  const Vec4 xi = deviator(embed(sigma, 0.0)) - backstress4(state, p);
  const double nxi = wnorm(xi);
  if (nxi == 0.0) return Mat3::Zero();
  const Vec4 wn = kWeight.cwiseProduct(xi) / nxi;
  const Mat4 WP = kWeight.asDiagonal() * dev_projector();
  return restrict3(Mat4((WP - wn * wn.transpose()) / nxi));
}

UpdateResult state_update(const Vec3& strain, const MaterialPointState& prior,
                          const MaterialParams& p, const MaterialTolerances& tol) {
  UpdateResult out;
  Vec4 e = embed(strain, 0.0);
  Direct4 d;
  if (p.plane == PlaneAssumption::plane_strain) {
    d = direct4(e, prior, p, tol.tie);
    out.tangent = restrict3(d.tangent);
  } else {
    // Out-of-plane strain from the elastic plane-stress guess, then Newton on s_zz = 0.
    const Vec4 ep = plastic4(prior.plastic_strain);
    const double L = p.lame_lambda();
    const double G = p.shear_modulus();
    e(2) = ep(2) - L / (L + 2.0 * G) * ((e(0) - ep(0)) + (e(1) - ep(1)));
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    const double target = tol.residual * p.sigma_y0;
    int it = 0;
    for (;; ++it) {
      d = direct4(e, prior, p, tol.tie);
      const double r = d.stress(2);
      if (std::abs(r) <= target) break;
      if (it >= tol.max_iter) throw NoConvergence("state_update", it, r);
      if (r > 0.0) hi = std::min(hi, e(2));
      else lo = std::max(lo, e(2));
      double next = e(2) - r / d.tangent(2, 2);
      if (!(next > lo && next < hi) && std::isfinite(lo) && std::isfinite(hi))
        next = 0.5 * (lo + hi);
      if (next == e(2)) break;
      e(2) = next;
    }
    out.iterations = it;
    out.tangent = condense(d.tangent);
  }
  out.stress = restrict3(d.stress);
  out.dlambda = d.dlambda;
  out.state = advance4(prior, d.flow, d.dlambda, p);
  out.energy = energy(d.stress, e, out.state, d.dlambda, p);
  return out;
}

InverseResult inverse_state_update(const Vec3& stress, const MaterialPointState& prior,
                                   const MaterialParams& p, const MaterialTolerances& tol) {
  if (p.hardening_slope() <= 0.0) throw PerfectPlasticityUnsupported();
  InverseResult out;
  Vec4 s = embed(stress, 0.0);
  Inverse4 d;
  if (p.plane == PlaneAssumption::plane_stress) {
    d = inverse4(s, prior, p, tol.tie);
    out.compliance = restrict3(d.compliance);
  } else {
    // Newton on the out-of-plane stress until the out-of-plane strain vanishes.
    s(2) = out_of_plane_stress(stress, prior, p);
    const double target = tol.residual * p.sigma_y0 / p.E;
    int it = 0;
    for (;; ++it) {
      d = inverse4(s, prior, p, tol.tie);
      const double r = d.strain(2);
      if (std::abs(r) <= target) break;
      if (it >= tol.max_iter) throw NoConvergence("inverse_state_update", it, r);
      const double next = s(2) - r / d.compliance(2, 2);
      if (next == s(2)) break;
      s(2) = next;
    }
    out.iterations = it;
    out.compliance = condense(d.compliance);
  }
  out.strain = restrict3(d.strain);
  out.dlambda = d.dlambda;
  out.state = advance4(prior, d.flow, d.dlambda, p);
  out.energy = energy(s, d.strain, out.state, d.dlambda, p);
  return out;
}

double dissipation_increment(const Vec3& dplastic_strain, double dalpha_i,
                             const MaterialParams& p) {
  const double norm = plastic_strain_norm(dplastic_strain);
  if (norm == 0.0 && dalpha_i == 0.0) return 0.0;
  if (dalpha_i < p.c * norm * (1.0 - 1e-12) || dalpha_i < 0.0) return std::numeric_limits<double>::infinity();
  return p.sigma_y0 * dalpha_i;
}

double plastic_strain_norm(const Vec3& ep) { return std::sqrt(tensor_norm2(ep)); }

MaterialPointState advance_state(const MaterialPointState& prior, const Vec3& sigma,
                                 double dl, const MaterialParams& p) {
  const Vec4 xi = deviator(embed(sigma, out_of_plane_stress(sigma, prior, p))) -
                  backstress4(prior, p);
  const double nxi = wnorm(xi);
  if (dl == 0.0 || nxi == 0.0) return prior;
  return advance4(prior, xi / nxi, dl, p);
}

} // namespace mixfem
