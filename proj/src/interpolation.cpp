#include "mixfem/interpolation.hpp"

#include "mixfem/errors.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace mixfem {

namespace {

void gauss_1d(int n, std::vector<double>& x, std::vector<double>& w) {
  switch (n) {
  case 1:
    x = {0.0};
    w = {2.0};
    break;
  case 2: {
    const double a = 1.0 / std::sqrt(3.0);
    x = {-a, a};
    w = {1.0, 1.0};
    break;
  }
  case 3: {
    const double a = std::sqrt(0.6);
    x = {-a, 0.0, a};
    w = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    break;
  }
  case 4: {
    const double a = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(1.2));
    const double b = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(1.2));
    const double wa = (18.0 + std::sqrt(30.0)) / 36.0;
    const double wb = (18.0 - std::sqrt(30.0)) / 36.0;
    x = {-b, -a, a, b};
    w = {wb, wa, wa, wb};
    break;
  }
  default:
    throw Error("gauss rule supports 1 to 4 points per direction");
  }
}

ShapeEval finish(const Coords& coords, const ParentPoint& p, Vec N, Mat dN) {
  ShapeEval s;
  s.N = std::move(N);
  s.dN_dxi = std::move(dN);
  s.J = s.dN_dxi.transpose() * coords;
  s.det_J = s.J.determinant();
  if (!(s.det_J > 0.0))
    throw DegenerateElement("non-positive Jacobian at (" + std::to_string(p.xi) + ", " +
                            std::to_string(p.eta) + ")");
  s.dN_dx = s.dN_dxi * s.J.inverse().transpose();
  s.x = coords.transpose() * s.N;
  return s;
}

// Polynomial in local nondimensional coordinates: sum of c X^a Y^b.
struct Term {
  double c;
  int a, b;
};
using Poly = std::vector<Term>;

double eval_poly(const Poly& q, double X, double Y) {
  double v = 0.0;
  for (const Term& t : q) v += t.c * std::pow(X, t.a) * std::pow(Y, t.b);
  return v;
}

Poly d_dx(const Poly& q) {
  Poly r;
  for (const Term& t : q)
    if (t.a > 0) r.push_back({t.c * t.a, t.a - 1, t.b});
  return r;
}

Poly d_dy(const Poly& q) {
  Poly r;
  for (const Term& t : q)
    if (t.b > 0) r.push_back({t.c * t.b, t.a, t.b - 1});
  return r;
}

struct AiryPoly {
  Poly sx, sy, txy;
};

AiryPoly airy_homogeneous(int comp) {
  AiryPoly m;
  (comp == 0 ? m.sx : comp == 1 ? m.sy : m.txy).push_back({1.0, 0, 0});
  return m;
}

AiryPoly airy_family(int k, int family) {
  AiryPoly m;
  const double kd = k;
  switch (family) {
  case 0:
    m.sx = {{1.0, 0, k}};
    break;
  case 1:
    m.sy = {{1.0, k, 0}};
    break;
  case 2:
    m.sy = {{kd, k - 1, 1}};
    m.txy = {{-1.0, k, 0}};
    break;
  case 3:
    m.sx = {{kd, 1, k - 1}};
    m.txy = {{-1.0, 0, k}};
    break;
  default:
    throw Error("Airy family index must lie in 0..3");
  }
  return m;
}

// Voigt stress from local to global components.
Vec3 rotate_stress(const Mat2& R, double sx, double sy, double txy) {
  Mat2 s;
  s << sx, txy, txy, sy;
  const Mat2 g = R * s * R.transpose();
  return Vec3(g(0, 0), g(1, 1), g(0, 1));
}

} // namespace

QuadRule gauss_rule(int n) { return gauss_rule(n, -1.0, 1.0, -1.0, 1.0); }

QuadRule gauss_rule(int n, double x0, double x1, double y0, double y1) {
  std::vector<double> x, w;
  gauss_1d(n, x, w);
  const double hx = 0.5 * (x1 - x0), hy = 0.5 * (y1 - y0);
  const double mx = 0.5 * (x1 + x0), my = 0.5 * (y1 + y0);
  QuadRule r;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      r.points.push_back({mx + hx * x[i], my + hy * x[j]});
      r.weights.push_back(w[i] * w[j] * hx * hy);
    }
  return r;
}

ShapeEval shape_q4(const Coords& coords, const ParentPoint& p) {
  if (coords.rows() != 4) throw DegenerateElement("Q4 needs 4 nodes");
  const double xi = p.xi, eta = p.eta;
  const double sx[4] = {-1.0, 1.0, 1.0, -1.0};
  const double sy[4] = {-1.0, -1.0, 1.0, 1.0};
  Vec N(4);
  Mat dN(4, 2);
  for (int i = 0; i < 4; ++i) {
    N(i) = 0.25 * (1.0 + sx[i] * xi) * (1.0 + sy[i] * eta);
    dN(i, 0) = 0.25 * sx[i] * (1.0 + sy[i] * eta);
    dN(i, 1) = 0.25 * sy[i] * (1.0 + sx[i] * xi);
  }
  return finish(coords, p, std::move(N), std::move(dN));
}

ShapeEval shape_q8(const Coords& coords, const ParentPoint& p) {
  if (coords.rows() != 8) throw DegenerateElement("Q8 needs 8 nodes");
  const double xi = p.xi, eta = p.eta;
  const double sx[4] = {-1.0, 1.0, 1.0, -1.0};
  const double sy[4] = {-1.0, -1.0, 1.0, 1.0};
  Vec N(8);
  Mat dN(8, 2);
  for (int i = 0; i < 4; ++i) {
    const double a = 1.0 + sx[i] * xi, b = 1.0 + sy[i] * eta;
    const double g = -1.0 + sx[i] * xi + sy[i] * eta;
    N(i) = 0.25 * a * b * g;
    dN(i, 0) = 0.25 * sx[i] * b * (g + a);
    dN(i, 1) = 0.25 * sy[i] * a * (g + b);
  }
  N(4) = 0.5 * (1.0 - xi * xi) * (1.0 - eta);
  dN(4, 0) = -xi * (1.0 - eta);
  dN(4, 1) = -0.5 * (1.0 - xi * xi);
  N(5) = 0.5 * (1.0 + xi) * (1.0 - eta * eta);
  dN(5, 0) = 0.5 * (1.0 - eta * eta);
  dN(5, 1) = -(1.0 + xi) * eta;
  N(6) = 0.5 * (1.0 - xi * xi) * (1.0 + eta);
  dN(6, 0) = -xi * (1.0 + eta);
  dN(6, 1) = 0.5 * (1.0 - xi * xi);
  N(7) = 0.5 * (1.0 - xi) * (1.0 - eta * eta);
  dN(7, 0) = -0.5 * (1.0 - eta * eta);
  dN(7, 1) = -(1.0 - xi) * eta;
  return finish(coords, p, std::move(N), std::move(dN));
}

ShapeEval shape_eval(const Coords& coords, const ParentPoint& p) {
  return coords.rows() == 8 ? shape_q8(coords, p) : shape_q4(coords, p);
}

Mat b_matrix(const ShapeEval& shape) {
  const int n = static_cast<int>(shape.N.size());
  Mat B = Mat::Zero(3, 2 * n);
  for (int i = 0; i < n; ++i) {
    B(0, 2 * i) = shape.dN_dx(i, 0);
    B(1, 2 * i + 1) = shape.dN_dx(i, 1);
    B(2, 2 * i) = shape.dN_dx(i, 1);
    B(2, 2 * i + 1) = shape.dN_dx(i, 0);
  }
  return B;
}

Q4Coefficients q4_coefficients(const Coords& c) {
  const auto x = c.col(0), y = c.col(1);
  return {0.25 * (-x(0) + x(1) + x(2) - x(3)), 0.25 * (x(0) - x(1) + x(2) - x(3)),
          0.25 * (-x(0) - x(1) + x(2) + x(3)), 0.25 * (-y(0) + y(1) + y(2) - y(3)),
          0.25 * (y(0) - y(1) + y(2) - y(3)),  0.25 * (-y(0) - y(1) + y(2) + y(3))};
}

Frame local_frame(const Coords& coords) {
  Frame f;
  const int n = static_cast<int>(coords.rows());
  f.origin = coords.colwise().mean().transpose();
  Mat2 cov = Mat2::Zero();
  for (int i = 0; i < n; ++i) {
    const Vec2 d = coords.row(i).transpose() - f.origin;
    cov += d * d.transpose();
  }
  cov /= n;
  Eigen::SelfAdjointEigenSolver<Mat2> es(cov);
  const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(1);
  Vec2 e1;
  if (hi - lo > 1e-8 * hi) {
    e1 = es.eigenvectors().col(1);
  } else {
    e1 = (coords.row(1) + coords.row(2) - coords.row(0) - coords.row(3)).transpose();
    e1.normalize();
  }
  f.axes.col(0) = e1;
  f.axes.col(1) = Vec2(-e1(1), e1(0));
  f.scale = std::sqrt(lo + hi);
  return f;
}

StressBasis pian_sumihara_basis(const Coords& coords) {
  const Q4Coefficients k = q4_coefficients(coords);
  if (std::abs(k.a1 * k.b3 - k.a3 * k.b1) <= 0.0)
    throw DegenerateElement("degenerate Q4 geometry");
  StressBasis b;
  b.modes = 5;
  b.eval = [k](const EvalPoint& q) {
    const double xi = q.parent.xi, eta = q.parent.eta;
    Mat S = Mat::Zero(3, 5);
    S(0, 0) = S(1, 1) = S(2, 2) = 1.0;
    S(0, 3) = k.a1 * k.a1 * eta;
    S(1, 3) = k.b1 * k.b1 * eta;
    S(2, 3) = k.a1 * k.b1 * eta;
    S(0, 4) = k.a3 * k.a3 * xi;
    S(1, 4) = k.b3 * k.b3 * xi;
    S(2, 4) = k.a3 * k.b3 * xi;
    return S;
  };
  return b;
}

StressBasis truncate_basis(const StressBasis& basis, int modes) {
  StressBasis b = basis;
  b.modes = modes;
  auto ev = basis.eval;
  b.eval = [ev, modes](const EvalPoint& q) { return Mat(ev(q).leftCols(modes)); };
  if (basis.divergence) {
    auto dv = basis.divergence;
    b.divergence = [dv, modes](const EvalPoint& q) { return Mat(dv(q).leftCols(modes)); };
  }
  return b;
}

StressBasis complete_linear_basis() {
  StressBasis b;
  b.modes = 9;
  b.eval = [](const EvalPoint& q) {
    Mat S = Mat::Zero(3, 9);
    for (int c = 0; c < 3; ++c) {
      S(c, 3 * c) = 1.0;
      S(c, 3 * c + 1) = q.parent.xi;
      S(c, 3 * c + 2) = q.parent.eta;
    }
    return S;
  };
  return b;
}

StressBasis airy_basis(int max_degree, const Frame& frame, const std::vector<AiryMode>& extra) {
  std::vector<AiryPoly> modes;
  for (int c = 0; c < 3; ++c) modes.push_back(airy_homogeneous(c));
  for (int k = 1; k <= max_degree; ++k)
    for (int f = 0; f < 4; ++f) modes.push_back(airy_family(k, f));
  for (const AiryMode& m : extra) modes.push_back(airy_family(m.degree, m.family));

  StressBasis b;
  b.modes = static_cast<int>(modes.size());
  b.self_equilibrated = true;
  b.frame = frame;
  b.eval = [modes, frame](const EvalPoint& q) {
    const Vec2 X = frame.axes.transpose() * (q.x - frame.origin) / frame.scale;
    Mat S(3, modes.size());
    for (std::size_t j = 0; j < modes.size(); ++j)
      S.col(j) = rotate_stress(frame.axes, eval_poly(modes[j].sx, X(0), X(1)),
                               eval_poly(modes[j].sy, X(0), X(1)),
                               eval_poly(modes[j].txy, X(0), X(1)));
    return S;
  };
  b.divergence = [modes, frame](const EvalPoint& q) {
    const Vec2 X = frame.axes.transpose() * (q.x - frame.origin) / frame.scale;
    Mat D(2, modes.size());
    for (std::size_t j = 0; j < modes.size(); ++j) {
      const AiryPoly& m = modes[j];
      const Vec2 local(eval_poly(d_dx(m.sx), X(0), X(1)) + eval_poly(d_dy(m.txy), X(0), X(1)),
                       eval_poly(d_dx(m.txy), X(0), X(1)) + eval_poly(d_dy(m.sy), X(0), X(1)));
      D.col(j) = frame.axes * local / frame.scale;
    }
    return D;
  };
  return b;
}

std::vector<AuxField> wilson_fields() {
  return {AuxField{[](const ParentPoint& p) { return Vec2(-2.0 * p.xi, 0.0); }},
          AuxField{[](const ParentPoint& p) { return Vec2(0.0, -2.0 * p.eta); }}};
}

Mat pian_constraint_matrix(const StressBasis& basis, const std::vector<AuxField>& aux,
                           const Coords& coords, int quad_order) {
  const ShapeEval s0 = shape_eval(coords, {0.0, 0.0});
  const Mat2 J0inv = s0.J.inverse();
  const QuadRule rule = gauss_rule(quad_order);
  Mat Q = Mat::Zero(2 * aux.size(), basis.modes);
  for (std::size_t g = 0; g < rule.points.size(); ++g) {
    const ShapeEval s = shape_eval(coords, rule.points[g]);
    const Mat S = basis.eval({rule.points[g], s.x});
    // Strains scaled by j0/j so that each auxiliary strain has zero element mean.
    const double w = rule.weights[g] * s0.det_J;
    for (std::size_t a = 0; a < aux.size(); ++a) {
      const Vec2 gx = J0inv * aux[a].parent_gradient(rule.points[g]);
      const Vec3 ex(gx(0), 0.0, gx(1));
      const Vec3 ey(0.0, gx(1), gx(0));
      Q.row(2 * a) += w * ex.transpose() * S;
      Q.row(2 * a + 1) += w * ey.transpose() * S;
    }
  }
  return Q;
}

StressBasis pian_filter(const StressBasis& basis, const std::vector<AuxField>& aux,
                        const Coords& coords, int quad_order) {
  if (aux.empty()) return basis;
  const int n = basis.modes;
  const Mat Q = pian_constraint_matrix(basis, aux, coords, quad_order);

  // Parameters reproducing the three constant stress states.
  const QuadRule probe = gauss_rule(3);
  Mat A(3 * probe.points.size(), n);
  for (std::size_t g = 0; g < probe.points.size(); ++g) {
    const ShapeEval s = shape_eval(coords, probe.points[g]);
    A.middleRows(3 * g, 3) = basis.eval({probe.points[g], s.x});
  }
  Mat rhs = Mat::Zero(A.rows(), 3);
  for (std::size_t g = 0; g < probe.points.size(); ++g) rhs.middleRows(3 * g, 3).setIdentity();
  Eigen::JacobiSVD<Mat> svdA(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Mat Zc = svdA.solve(rhs);
  if ((A * Zc - rhs).norm() > 1e-10 * rhs.norm())
    throw RankDeficientFilter("basis does not contain the constant stress states");
  const double qscale = std::max(Q.norm(), 1e-300);
  if ((Q * Zc).norm() > 1e-10 * qscale * Zc.norm())
    throw RankDeficientFilter("auxiliary strains are not orthogonal to constant stresses");

  Eigen::JacobiSVD<Mat> svdQ(Q, Eigen::ComputeFullV);
  const auto& sv = svdQ.singularValues();
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-10 * sv(0)) ++rank;
  const Mat K = svdQ.matrixV().rightCols(n - rank);
  if (n - rank < 3) throw RankDeficientFilter("filtered space lost the constant modes");

  // Kernel complement of the constant states.
  const Mat Kc = K - Zc * (Zc.completeOrthogonalDecomposition().solve(K));
  Eigen::JacobiSVD<Mat> svdK(Kc, Eigen::ComputeThinU);
  Mat Z(n, n - rank);
  Z.leftCols(3) = Zc;
  Z.rightCols(n - rank - 3) = svdK.matrixU().leftCols(n - rank - 3);

  StressBasis b = basis;
  b.modes = n - rank;
  auto ev = basis.eval;
  b.eval = [ev, Z](const EvalPoint& q) { return Mat(ev(q) * Z); };
  if (basis.divergence) {
    auto dv = basis.divergence;
    b.divergence = [dv, Z](const EvalPoint& q) { return Mat(dv(q) * Z); };
  }
  return b;
}

Mat enhanced_basis_q4(const Coords& coords, const ParentPoint& p) {
  const ShapeEval s0 = shape_q4(coords, {0.0, 0.0});
  const ShapeEval s = shape_q4(coords, p);
  // F0 = dx/dxi at the centre; covariant parent strains are pushed forward by F0^-T (.) F0^-1.
  const Mat2 Finv = s0.J.transpose().inverse();
  Mat parent = Mat::Zero(3, 4);
  parent(0, 0) = p.xi;
  parent(1, 1) = p.eta;
  parent(2, 2) = p.xi;
  parent(2, 3) = p.eta;
  Mat E(3, 4);
  for (int j = 0; j < 4; ++j) {
    Mat2 e;
    e << parent(0, j), 0.5 * parent(2, j), 0.5 * parent(2, j), parent(1, j);
    const Mat2 ph = Finv.transpose() * e * Finv;
    E.col(j) = Vec3(ph(0, 0), ph(1, 1), 2.0 * ph(0, 1));
  }
  return (s0.det_J / s.det_J) * E;
}

std::vector<IntegrationPoint> integration_points(const Coords& coords, const QuadRule& rule) {
  std::vector<IntegrationPoint> pts;
  pts.reserve(rule.points.size());
  for (std::size_t g = 0; g < rule.points.size(); ++g) {
    const ShapeEval s = shape_eval(coords, rule.points[g]);
    pts.push_back({rule.points[g], s.x, rule.weights[g] * s.det_J});
  }
  return pts;
}

StrainBasis identical_strain_basis(const StressBasis& stress) {
  StrainBasis b;
  b.kind = StrainBasis::Kind::identical;
  b.modes = stress.modes;
  return b;
}

StrainBasis subdomain_partition(const Coords& coords, int m, const StressBasis& stress,
                                int quad_order) {
  StrainBasis b;
  b.kind = StrainBasis::Kind::piecewise_constant;
  b.modes = 3 * m * m;
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) {
      const QuadRule r = gauss_rule(quad_order, -1.0 + 2.0 * i / m, -1.0 + 2.0 * (i + 1) / m,
                                    -1.0 + 2.0 * j / m, -1.0 + 2.0 * (j + 1) / m);
      Subdomain d;
      d.points = integration_points(coords, r);
      d.S_bar = Mat::Zero(3, stress.modes);
      for (const IntegrationPoint& q : d.points) {
        d.area += q.weight;
        d.S_bar += q.weight * stress.eval({q.parent, q.x});
      }
      d.S_bar /= d.area;
      b.subdomains.push_back(std::move(d));
    }
  return b;
}

double MultiplierSite::area() const {
  double a = 0.0;
  for (const IntegrationPoint& q : points) a += q.weight;
  return a;
}

MultiplierBasis multiplier_pointwise(const Coords& coords, const QuadRule& rule) {
  MultiplierBasis b;
  b.kind = MultiplierBasis::Kind::gauss_pointwise;
  const auto pts = integration_points(coords, rule);
  for (std::size_t g = 0; g < pts.size(); ++g) b.sites.push_back({rule.weights[g], {pts[g]}});
  return b;
}

MultiplierBasis multiplier_piecewise(const Coords& coords, int m, int quad_order) {
  MultiplierBasis b;
  b.kind = MultiplierBasis::Kind::piecewise_constant;
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) {
      const QuadRule r = gauss_rule(quad_order, -1.0 + 2.0 * i / m, -1.0 + 2.0 * (i + 1) / m,
                                    -1.0 + 2.0 * j / m, -1.0 + 2.0 * (j + 1) / m);
      MultiplierSite s;
      s.points = integration_points(coords, r);
      s.weight = s.area();
      b.sites.push_back(std::move(s));
    }
  return b;
}

double element_area(const Coords& coords) {
  double a = 0.0;
  for (const IntegrationPoint& q : integration_points(coords, gauss_rule(3))) a += q.weight;
  return a;
}

} // namespace mixfem
