#include "mixfem/elements.hpp"

#include "mixfem/errors.hpp"

namespace mixfem {

ElementFormulation formulation_from_tag(const std::string& tag) {
  ElementFormulation f;
  f.tag = tag;
  if (tag == "Q4") {
    f.algorithm = Algorithm::displacement;
  } else if (tag == "Q8") {
    f.nodes = 8;
    f.quad_order = 3;
    f.algorithm = Algorithm::displacement;
  } else if (tag == "HW-Q8-D") {
    f.nodes = 8;
    f.quad_order = 3;
    f.stress = StressKind::airy;
    f.airy_degree = 2;
    f.airy_extra = {{3, 0}, {3, 1}};
    f.strain = StrainKind::piecewise;
    f.subdomains_per_side = 3;
    f.algorithm = Algorithm::hw_nodal_force;
  } else if (tag == "ES-Q4") {
    f.stress = StressKind::pian_sumihara;
    f.enhanced = true;
    f.algorithm = Algorithm::enhanced_strain;
  } else if (tag == "CM-Q4" || tag == "CM-Q4-IP" || tag == "CM-Q4-SQP") {
    f.stress = StressKind::pian_sumihara;
    f.multiplier = MultiplierKind::pointwise;
    f.algorithm = tag == "CM-Q4"      ? Algorithm::cm_return_map
                  : tag == "CM-Q4-IP" ? Algorithm::cm_interior_point
                                      : Algorithm::cm_sqp;
  } else if (tag == "HR-Q4" || tag == "HR-Q4-R") {
    f.stress = StressKind::pian_sumihara;
    f.algorithm = tag == "HR-Q4" ? Algorithm::hellinger_reissner : Algorithm::hr_relaxed;
  } else if (tag == "HR-Q4-3") {
    f.stress = StressKind::pian_sumihara_constant;
    f.algorithm = Algorithm::hellinger_reissner;
  } else if (tag == "HW-Q4-I") {
    f.stress = StressKind::pian_sumihara;
    f.strain = StrainKind::identical;
    f.algorithm = Algorithm::hw_identical;
  } else {
    throw ConfigError("unknown element tag '" + tag + "'");
  }
  return f;
}

std::vector<std::string> benchmark_element_tags() {
  return {"Q4", "Q8", "HW-Q8-D", "ES-Q4", "CM-Q4", "HR-Q4"};
}

RigidBodyFilter rigid_body_filter(const Coords& coords) {
  const int n = static_cast<int>(coords.rows());
  const Vec2 c = coords.colwise().mean().transpose();
  double span = 0.0;
  for (int i = 1; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const Vec2 a = coords.row(i) - coords.row(0), b = coords.row(j) - coords.row(0);
      span = std::max(span, std::abs(a(0) * b(1) - a(1) * b(0)));
    }
  const double size = (coords.rowwise() - c.transpose()).squaredNorm();
  if (n < 3 || !(span > 1e-12 * size)) throw CollinearNodes("rigid body filter needs non-collinear nodes");

  Mat R = Mat::Zero(2 * n, 3);
  for (int i = 0; i < n; ++i) {
    R(2 * i, 0) = 1.0;
    R(2 * i + 1, 1) = 1.0;
    R(2 * i, 2) = -(coords(i, 1) - c(1));
    R(2 * i + 1, 2) = coords(i, 0) - c(0);
  }
  RigidBodyFilter f;
  f.Pi_bar = Mat::Identity(2 * n, 2 * n) - R * (R.transpose() * R).ldlt().solve(R.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(f.Pi_bar);
  f.V = es.eigenvectors().rightCols(2 * n - 3);
  f.Pi = f.V.transpose();
  return f;
}

ElementOperators build_operators(const ElementFormulation& form, const Coords& coords,
                                 const MaterialParams& mat) {
  if (coords.rows() != form.nodes)
    throw DegenerateElement(form.tag + " needs " + std::to_string(form.nodes) + " nodes");
  ElementOperators ops;
  ops.coords = coords;
  ops.n_u = 2 * form.nodes;
  ops.area = element_area(coords);
  ops.qp = integration_points(coords, gauss_rule(form.quad_order));
  for (const IntegrationPoint& q : ops.qp) ops.B.push_back(b_matrix(shape_eval(coords, q.parent)));

  switch (form.stress) {
  case StressKind::none:
    break;
  case StressKind::pian_sumihara:
    ops.stress = pian_sumihara_basis(coords);
    break;
  case StressKind::pian_sumihara_constant:
    ops.stress = truncate_basis(pian_sumihara_basis(coords), 3);
    break;
  case StressKind::airy:
    ops.stress = airy_basis(form.airy_degree, local_frame(coords), form.airy_extra);
    break;
  }
  ops.n_sigma = ops.stress.modes;
  if (ops.n_sigma == 0) return ops;

  const Mat D = elastic_compliance(mat);
  ops.C = Mat::Zero(ops.n_sigma, ops.n_u);
  ops.He = Mat::Zero(ops.n_sigma, ops.n_sigma);
  for (std::size_t g = 0; g < ops.qp.size(); ++g) {
    ops.S.push_back(ops.stress.eval({ops.qp[g].parent, ops.qp[g].x}));
    ops.C += ops.qp[g].weight * ops.S[g].transpose() * ops.B[g];
    ops.He += ops.qp[g].weight * ops.S[g].transpose() * D * ops.S[g];
  }

  if (form.strain == StrainKind::identical) {
    ops.strain = identical_strain_basis(ops.stress);
    ops.G = Mat::Zero(ops.n_sigma, ops.n_sigma);
    for (std::size_t g = 0; g < ops.qp.size(); ++g)
      ops.G += ops.qp[g].weight * ops.S[g].transpose() * ops.S[g];
  } else if (form.strain == StrainKind::piecewise) {
    ops.strain = subdomain_partition(coords, form.subdomains_per_side, ops.stress, 3);
    const int nd = static_cast<int>(ops.strain.subdomains.size());
    ops.G = Mat::Zero(3 * nd, ops.n_sigma);
    for (int d = 0; d < nd; ++d)
      ops.G.middleRows(3 * d, 3) = ops.strain.subdomains[d].area * ops.strain.subdomains[d].S_bar;
    // C on the subdomain points, the rule that defines the averages
    ops.C.setZero();
    for (const Subdomain& d : ops.strain.subdomains)
      for (const IntegrationPoint& q : d.points)
        ops.C += q.weight * ops.stress.eval({q.parent, q.x}).transpose() * b_matrix(shape_eval(coords, q.parent));
  }

  if (form.enhanced) {
    ops.Gt = Mat::Zero(4, ops.n_sigma);
    for (std::size_t g = 0; g < ops.qp.size(); ++g) {
      ops.Et.push_back(enhanced_basis_q4(coords, ops.qp[g].parent));
      ops.Gt += ops.qp[g].weight * ops.Et[g].transpose() * ops.S[g];
    }
  }

  const bool cm = form.algorithm == Algorithm::cm_return_map ||
                  form.algorithm == Algorithm::cm_interior_point ||
                  form.algorithm == Algorithm::cm_sqp;
  if (cm) {
    ops.multipliers = form.multiplier == MultiplierKind::pointwise
                          ? multiplier_pointwise(coords, gauss_rule(form.quad_order))
                          : multiplier_piecewise(coords, form.multiplier_per_side);
    ops.He.setZero();
    for (std::size_t s = 0; s < ops.multipliers.sites.size(); ++s)
      for (const IntegrationPoint& q : ops.multipliers.sites[s].points) {
        ops.S_mult.push_back(ops.stress.eval({q.parent, q.x}));
        ops.mult_site.push_back(static_cast<int>(s));
        ops.mult_weight.push_back(q.weight);
        ops.He += q.weight * ops.S_mult.back().transpose() * D * ops.S_mult.back();
      }
  }

  if (form.algorithm == Algorithm::hw_nodal_force) {
    ops.filter = rigid_body_filter(coords);
    ops.CV = ops.C * ops.filter.V;
  }
  return ops;
}

ElementHistory initial_history(const ElementFormulation& form, const ElementOperators& ops) {
  ElementHistory h;
  std::size_t sites = ops.qp.size();
  if (form.algorithm == Algorithm::hw_nodal_force) sites = ops.strain.subdomains.size();
  if (!ops.S_mult.empty()) sites = ops.S_mult.size();
  h.sites.assign(sites, MaterialPointState{});
  h.beta = Vec::Zero(ops.n_sigma);
  if (form.enhanced) h.enhanced = Vec::Zero(4);
  if (form.algorithm == Algorithm::hw_nodal_force) h.q_lambda = Vec::Zero(ops.n_u - 3);
  return h;
}

Vec plastic_strain_parameters(const ElementOperators& ops, const ElementHistory& hist) {
  Vec ep = Vec::Zero(ops.n_sigma);
  for (std::size_t q = 0; q < ops.S_mult.size(); ++q)
    ep += ops.mult_weight[q] * ops.S_mult[q].transpose() * hist.sites[q].plastic_strain;
  return ep;
}

ElementResult element_state(const ElementFormulation& form, const ElementOperators& ops,
                            const MaterialParams& mat, const Vec& u_e,
                            const ElementHistory& hist, const Vec* beta_iter) {
  switch (form.algorithm) {
  case Algorithm::displacement:
    return displacement_element_state(u_e, hist, ops, mat, form);
  case Algorithm::hw_identical:
    return hw_identical_state(u_e, hist, ops, mat, form);
  case Algorithm::enhanced_strain:
    return es_state(u_e, hist, ops, mat, form);
  case Algorithm::cm_return_map:
    return cm_state_return_map(u_e, hist, ops, mat, form);
  case Algorithm::cm_interior_point:
    return cm_state_ip(u_e, hist, ops, mat, form);
  case Algorithm::cm_sqp:
    return cm_state_sqp(u_e, hist, ops, mat, form);
  case Algorithm::hellinger_reissner:
    return hr_state(u_e, hist, ops, mat, form);
  case Algorithm::hr_relaxed:
    return hr_state_relaxed(u_e, hist, beta_iter ? *beta_iter : hist.beta, ops, mat, form);
  case Algorithm::hw_nodal_force:
    return hw_nodal_force_state(u_e, hist, ops, mat, form);
  }
  throw Error("unknown algorithm");
}

} // namespace mixfem
