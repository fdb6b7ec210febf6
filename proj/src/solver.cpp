#include "mixfem/solver.hpp"

#include "mixfem/errors.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mixfem {

Coords Mesh::element_coords(int e) const {
  const std::vector<int>& conn = elements[e];
  Coords c(static_cast<Eigen::Index>(conn.size()), 2);
  for (std::size_t i = 0; i < conn.size(); ++i) c.row(i) = nodes.row(conn[i]);
  return c;
}

std::vector<int> Mesh::element_dofs(int e) const {
  std::vector<int> dofs;
  for (int n : elements[e]) {
    dofs.push_back(2 * n);
    dofs.push_back(2 * n + 1);
  }
  return dofs;
}

ElementFormulation formulation_for(const AnalysisConfig& config) {
  ElementFormulation f = formulation_from_tag(config.element);
  if (config.hr_relaxed && f.algorithm == Algorithm::hellinger_reissner)
    f.algorithm = Algorithm::hr_relaxed;
  const bool cm = f.algorithm == Algorithm::cm_return_map ||
                  f.algorithm == Algorithm::cm_interior_point || f.algorithm == Algorithm::cm_sqp;
  if (cm) {
    if (config.cm_solver == "return_map") f.algorithm = Algorithm::cm_return_map;
    else if (config.cm_solver == "interior_point") f.algorithm = Algorithm::cm_interior_point;
    else if (config.cm_solver == "sqp") f.algorithm = Algorithm::cm_sqp;
    else throw ConfigError("unknown CM solver '" + config.cm_solver + "'");
  }
  return f;
}

SpMat restrict_matrix(const SpMat& K, const std::vector<int>& idx) {
  std::vector<int> map(static_cast<std::size_t>(K.rows()), -1);
  for (std::size_t i = 0; i < idx.size(); ++i) map[idx[i]] = static_cast<int>(i);
  std::vector<Eigen::Triplet<double>> trip;
  for (int k = 0; k < K.outerSize(); ++k)
    for (SpMat::InnerIterator it(K, k); it; ++it) {
      const int i = map[it.row()], j = map[it.col()];
      if (i >= 0 && j >= 0) trip.emplace_back(i, j, it.value());
    }
  SpMat R(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(idx.size()));
  R.setFromTriplets(trip.begin(), trip.end());
  return R;
}

Analysis::Analysis(Problem problem, AnalysisConfig config)
    : problem_(std::move(problem)), config_(std::move(config)) {
  if (config_.increments < 1) throw ConfigError("increments must be at least 1");
  problem_.material.validate();
  form_ = formulation_for(config_);
  const Mesh& mesh = problem_.mesh;
  const int ndof = mesh.num_dofs();
  if (problem_.load.size() == 0) problem_.load = Vec::Zero(ndof);
  if (problem_.load.size() != ndof) throw ConfigError("load vector size does not match the mesh");

  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    ops_.push_back(build_operators(form_, mesh.element_coords(static_cast<int>(e)), problem_.material));
    hist_.push_back(initial_history(form_, ops_.back()));
  }
  prescribed_ = Vec::Zero(ndof);
  std::vector<bool> is_fixed(static_cast<std::size_t>(ndof), false);
  for (const Dirichlet& d : problem_.dirichlet) {
    is_fixed[d.dof] = true;
    prescribed_(d.dof) = d.value;
  }
  for (int i = 0; i < ndof; ++i) (is_fixed[i] ? fixed_ : free_).push_back(i);
  u_ = Vec::Zero(ndof);
}

Assembly Analysis::assemble(const Vec& u, double lambda, const std::vector<ElementHistory>& hist,
                            const std::vector<Vec>* beta_iter) const {
  const Mesh& mesh = problem_.mesh;
  Assembly a;
  a.residual = -lambda * problem_.load;
  std::vector<Eigen::Triplet<double>> trip;
  a.elements.reserve(mesh.elements.size());
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const std::vector<int> dofs = mesh.element_dofs(static_cast<int>(e));
    Vec ue(static_cast<Eigen::Index>(dofs.size()));
    for (std::size_t i = 0; i < dofs.size(); ++i) ue(i) = u(dofs[i]);
    ElementResult r;
    try {
      r = element_state(form_, ops_[e], problem_.material, ue, hist[e],
                        beta_iter ? &(*beta_iter)[e] : nullptr);
    } catch (const Error& err) {
      throw GlobalNoConvergence("element " + std::to_string(e) + ": " + err.what());
    }
    for (std::size_t i = 0; i < dofs.size(); ++i) {
      a.residual(dofs[i]) += r.q_int(i);
      for (std::size_t j = 0; j < dofs.size(); ++j) trip.emplace_back(dofs[i], dofs[j], r.K(i, j));
    }
    if (r.r_sigma.size() > 0) {
      const double sc = problem_.material.sigma_y0 / problem_.material.E * ops_[e].area;
      a.r_sigma = std::max(a.r_sigma, r.r_sigma.norm() / sc);
    }
    a.elements.push_back(std::move(r));
  }
  a.K.resize(mesh.num_dofs(), mesh.num_dofs());
  a.K.setFromTriplets(trip.begin(), trip.end());
  return a;
}

bool Analysis::try_step(double lambda_target, AnalysisRecord& rec) {
  const bool relaxed = form_.algorithm == Algorithm::hr_relaxed;
  Vec u = u_;
  std::vector<Vec> beta;
  if (relaxed)
    for (const ElementHistory& h : hist_) beta.push_back(h.beta);

  auto solve_free = [&](const SpMat& K, const Vec& rhs_full, Vec& du_f) {
    const SpMat Kff = restrict_matrix(K, free_);
    Eigen::SimplicialLDLT<SpMat> ldlt(Kff);
    if (ldlt.info() != Eigen::Success) {
      last_error_ = "singular global tangent";
      return false;
    }
    Vec rf(static_cast<Eigen::Index>(free_.size()));
    for (std::size_t i = 0; i < free_.size(); ++i) rf(i) = rhs_full(free_[i]);
    du_f = ldlt.solve(rf);
    return ldlt.info() == Eigen::Success && du_f.allFinite();
  };

  rec.residuals.clear();
  last_error_.clear();
  try {
    Vec du_f;
    int iters = 0;
    Assembly a;
    if (dlambda_last_ > 0.0 && !relaxed) {
      // secant predictor: the last converged increment, scaled to the new step
      u += (lambda_target - lambda_) / dlambda_last_ * du_last_;
      for (int d : fixed_) u(d) = lambda_target * prescribed_(d);
    } else {
      a = assemble(u, lambda_target, hist_, relaxed ? &beta : nullptr);
      Vec du_c = Vec::Zero(u.size());
      for (int d : fixed_) du_c(d) = (lambda_target - lambda_) * prescribed_(d);
      if (!solve_free(a.K, -(a.residual + a.K * du_c), du_f)) return false;
      for (int d : fixed_) u(d) = lambda_target * prescribed_(d);
      for (std::size_t i = 0; i < free_.size(); ++i) u(free_[i]) += du_f(i);
      iters = 1;
      if (relaxed)
        for (std::size_t e = 0; e < beta.size(); ++e) beta[e] = a.elements[e].trial.beta;
    }
    a = assemble(u, lambda_target, hist_, relaxed ? &beta : nullptr);
    double rc = 0.0, ff = 0.0;
    for (int d : free_) ff += std::pow(lambda_target * problem_.load(d), 2);
    for (int d : fixed_) rc += a.residual(d) * a.residual(d);
    double r_ref = std::max(std::sqrt(ff), std::sqrt(rc));
    if (!(r_ref > 0.0)) r_ref = 1.0;
    auto measure = [&](const Assembly& x) {
      double sum = 0.0;
      for (int d : free_) sum += x.residual(d) * x.residual(d);
      return std::sqrt(sum) / r_ref;
    };
    double rel = measure(a);

    for (;;) {
      if (!std::isfinite(rel)) {
        last_error_ = "non-finite residual";
        return false;
      }
      rec.residuals.push_back(rel);
      if (rel <= config_.tol && (!relaxed || a.r_sigma <= config_.tol)) {
        hist_.clear();
        for (const ElementResult& r : a.elements) hist_.push_back(r.trial);
        du_last_ = u - u_;
        dlambda_last_ = lambda_target - lambda_;
        u_ = u;
        residual_ = a.residual;
        lambda_ = lambda_target;
        last_ = std::move(a.elements);
        rec.global_iters += iters;
        for (const ElementResult& r : last_) {
          rec.yield_max = std::max(rec.yield_max, r.yield_max);
          rec.complementarity_max = std::max(rec.complementarity_max, r.complementarity_max);
        }
        return true;
      }
      if (iters >= config_.max_global_iter) {
        last_error_ = "iteration cap reached";
        return false;
      }
      if (!solve_free(a.K, -a.residual, du_f)) return false;
      ++iters;
      Vec du = Vec::Zero(u.size());
      for (std::size_t i = 0; i < free_.size(); ++i) du(free_[i]) = du_f(i);

      if (relaxed) {
        for (std::size_t e = 0; e < beta.size(); ++e) beta[e] = a.elements[e].trial.beta;
        u += du;
        a = assemble(u, lambda_target, hist_, &beta);
        rel = measure(a);
        continue;
      }
      // backtracking on the residual norm; the full step is kept whenever it reduces it
      double t = 1.0, best_rel = std::numeric_limits<double>::infinity(), best_t = 0.0;
      Assembly best;
      for (int ls = 0; ls <= config_.max_line_search; ++ls, t *= 0.5) {
        try {
          Assembly trial = assemble(u + t * du, lambda_target, hist_);
          const double r = measure(trial);
          if (r < best_rel) {
            best_rel = r;
            best_t = t;
            best = std::move(trial);
          }
          if (r <= (1.0 - 1e-4 * t) * rel) break;
        } catch (const GlobalNoConvergence&) {
          if (ls == config_.max_line_search && best_t == 0.0) throw;
        }
      }
      u += best_t * du;
      a = std::move(best);
      rel = best_rel;
    }
  } catch (const Error& e) {
    last_error_ = e.what();
    return false;
  }
}

AnalysisRecord Analysis::solve_increment(double lambda_target, int step) {
  AnalysisRecord rec;
  rec.yield_max = -std::numeric_limits<double>::infinity();
  struct Frame {
    double target;
    int level;
  };
  std::vector<Frame> stack{{lambda_target, 0}};
  while (!stack.empty()) {
    const Frame f = stack.back();
    if (try_step(f.target, rec)) {
      stack.pop_back();
      continue;
    }
    if (f.level >= config_.max_bisections) {
      std::string log;
      for (double r : rec.residuals) log += " " + std::to_string(r);
      throw GlobalNoConvergence("increment " + std::to_string(step) + " failed at load factor " +
                                std::to_string(f.target) + " (" + last_error_ + "); residuals:" + log);
    }
    stack.push_back({0.5 * (lambda_ + f.target), f.level + 1});
  }
  AnalysisRecord out = make_record(step, rec.global_iters);
  out.yield_max = rec.yield_max;
  out.complementarity_max = rec.complementarity_max;
  out.residuals = rec.residuals;
  return out;
}

AnalysisRecord Analysis::make_record(int step, int iters) const {
  AnalysisRecord r;
  r.step = step;
  r.load_factor = lambda_;
  r.global_iters = iters;
  if (problem_.control_dof >= 0) r.control_disp = u_(problem_.control_dof);
  if (problem_.qoi_dof >= 0) r.qoi_disp = u_(problem_.qoi_dof);
  if (!problem_.reaction_dofs.empty()) {
    for (int d : problem_.reaction_dofs) r.reaction += residual_(d);
  }
  return r;
}

std::vector<AnalysisRecord> Analysis::run() {
  std::vector<AnalysisRecord> records;
  failure_.clear();
  for (int k = 1; k <= config_.increments; ++k) {
    try {
      records.push_back(solve_increment(static_cast<double>(k) / config_.increments, k));
    } catch (const GlobalNoConvergence& e) {
      failure_ = e.what();
      break;
    }
  }
  return records;
}

} // namespace mixfem
