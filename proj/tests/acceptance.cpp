// Acceptance checks 1-8: one PASS/FAIL line per criterion, tolerances pinned below.

#include "support.hpp"

#include "mixfem/stability.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

using namespace mixfem;

namespace {

constexpr double kMaterialOracleTol = 1e-6;
constexpr double kTangentTol = 1e-5;
constexpr double kPatchTol = 1e-10;
constexpr double kCrossSolverTol = 1e-8;
constexpr double kHwConvergenceTol = 0.01;
constexpr double kCookSeconds = 600.0;
constexpr double kPlateFineTol = 0.005;
constexpr double kPlateCoarseTol = 0.03;
constexpr double kPlateSeconds = 900.0;
constexpr double kStabilityRatio = 0.1;
constexpr double kYieldTol = 1e-9;
constexpr double kComplementarityTol = 1e-10;
constexpr int kTangentStates = 20;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

int failures = 0;

void report(int id, bool pass, const std::string& summary) {
  std::cout << "criterion " << id << ": " << (pass ? "PASS" : "FAIL") << "  " << summary << std::endl;
  failures += !pass;
}

bool criterion1() {
  const MaterialParams m = cook_material();
  std::mt19937 rng(101);
  double worst = 0.0;
  int plastic = 0;
  for (int k = 0; k < 200; ++k) {
    const oracle::MaterialCase c = oracle::random_material_case(rng, m);
    const UpdateResult r = state_update(c.strain, c.prior, m);
    const oracle::EnergyMinimum o = oracle::minimize_incremental_energy(c.strain, c.prior, m);
    worst = std::max(worst, (r.stress - o.stress).norm() / r.stress.norm());
    plastic += r.dlambda > 0.0;
  }
  const bool pass = worst <= kMaterialOracleTol && plastic > 0 && plastic < 200;
  report(1, pass, "material vs energy oracle: worst rel " + sci(worst) + ", " + std::to_string(plastic) +
                      "/200 plastic");
  return pass;
}

bool criterion2() {
  std::ostringstream detail;
  bool pass = true;
  {
    const MaterialParams m = cook_material();
    std::mt19937 rng(202);
    double worst = 0.0;
    int states = 0;
    while (states < kTangentStates) {
      const oracle::MaterialCase c = oracle::random_material_case(rng, m);
      const UpdateResult r = state_update(c.strain, c.prior, m);
      // central differences need the update to stay on one branch
      const double f_trial = yield_value(elastic_tensor(m) * (c.strain - c.prior.plastic_strain), c.prior, m);
      if (std::abs(f_trial) < 1e-3 * m.sigma_y0) continue;
      const auto map = [&](const Vec& e) { return Vec(state_update(Vec3(e), c.prior, m).stress); };
      worst = std::max(worst, oracle::rel_diff(r.tangent, oracle::central_jacobian(map, Vec(c.strain),
                                                                                   1e-7 * c.strain.norm())));
      ++states;
    }
    pass = pass && worst <= kTangentTol;
    detail << "material " << sci(worst);
  }
  for (const std::string& tag : benchmark_element_tags()) {
    const ElementFormulation f = formulation_from_tag(tag);
    const MaterialParams m = cook_material();
    const Coords c = oracle::distorted_element(f.nodes);
    const ElementOperators ops = build_operators(f, c, m);
    ElementHistory h = initial_history(f, ops);
    std::mt19937 rng(303);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    Vec u = Vec::Zero(ops.n_u);
    double worst = 0.0;
    int plastic = 0;
    for (int k = 0; k < kTangentStates; ++k) {
      for (int i = 0; i < ops.n_u; ++i) u(i) += 0.01 * U(rng);
      const ElementResult r = element_state(f, ops, m, u, h);
      const auto map = [&](const Vec& x) { return Vec(element_state(f, ops, m, x, h).q_int); };
      worst = std::max(worst, oracle::rel_diff(r.K, oracle::central_jacobian(map, u, 1e-7)));
      plastic += r.active > 0;
      h = r.trial;
    }
    pass = pass && worst <= kTangentTol && plastic > 0;
    detail << ", " << tag << " " << sci(worst) << " (" << plastic << " plastic)";
  }
  report(2, pass, "finite-difference tangents, worst rel: " + detail.str());
  return pass;
}

bool criterion3() {
  Eigen::Matrix2d A;
  A << 1e-3, 4e-4, -2e-4, -5e-4;
  const Vec3 eps(A(0, 0), A(1, 1), A(0, 1) + A(1, 0));
  const std::vector<std::string> tags{"Q4",       "Q8",        "HW-Q8-D", "ES-Q4",   "CM-Q4",  "HR-Q4",
                                      "CM-Q4-IP", "CM-Q4-SQP", "HR-Q4-3", "HW-Q4-I", "HR-Q4-R"};
  double worst = 0.0;
  bool complete = true;
  for (const std::string& tag : tags) {
    const ElementFormulation form = formulation_from_tag(tag);
    const Problem p = oracle::patch_problem(form.nodes, A, cook_material());
    AnalysisConfig cfg;
    cfg.element = tag == "HR-Q4-R" ? "HR-Q4" : tag;
    cfg.hr_relaxed = tag == "HR-Q4-R";
    cfg.increments = 1;
    cfg.tol = 1e-12;
    Analysis an(p, cfg);
    complete = complete && an.run().size() == 1;
    const Vec3 sigma = elastic_tensor(p.material) * eps;
    for (const ElementResult& r : an.last_results())
      for (const Vec3& s : r.site_stress) worst = std::max(worst, (s - sigma).norm() / sigma.norm());
  }
  const bool pass = complete && worst <= kPatchTol;
  report(3, pass, "distorted 2x2 patch, " + std::to_string(tags.size()) + " formulations: worst stress rel " +
                      sci(worst));
  return pass;
}

bool criterion4() {
  const ElementFormulation f = formulation_from_tag("CM-Q4");
  const MaterialParams m = cook_material();
  std::mt19937 rng(404);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  double worst = 0.0;
  int set_mismatch = 0, plastic = 0;
  for (int k = 0; k < 50; ++k) {
    Coords c(4, 2);
    c << 0, 0, 2 + 0.3 * U(rng), 0.3 * U(rng), 2 + 0.3 * U(rng), 2 + 0.3 * U(rng), 0.3 * U(rng),
        2 + 0.3 * U(rng);
    const ElementOperators ops = build_operators(f, c, m);
    Vec u(8);
    for (int i = 0; i < 8; ++i) u(i) = 0.02 * U(rng);
    const ElementHistory h = cm_state_return_map(u, initial_history(f, ops), ops, m, f).trial;
    for (int i = 0; i < 8; ++i) u(i) += 0.02 * U(rng);
    const ElementResult a = cm_state_return_map(u, h, ops, m, f);
    const ElementResult b = cm_state_ip(u, h, ops, m, f);
    const ElementResult s = cm_state_sqp(u, h, ops, m, f);
    worst = std::max({worst, (a.beta - b.beta).norm() / a.beta.norm(), (a.beta - s.beta).norm() / a.beta.norm()});
    for (Eigen::Index d = 0; d < a.multipliers.size(); ++d)
      set_mismatch += (a.multipliers(d) > 0.0) != (b.multipliers(d) > 0.0) ||
                      (a.multipliers(d) > 0.0) != (s.multipliers(d) > 0.0);
    plastic += a.active > 0;
  }
  const bool pass = worst <= kCrossSolverTol && set_mismatch == 0 && plastic > 0;
  report(4, pass, "CM return map / interior point / SQP on 50 states: worst beta rel " + sci(worst) + ", " +
                      std::to_string(set_mismatch) + " active-set mismatches, " + std::to_string(plastic) +
                      " plastic");
  return pass;
}

struct KktAudit {
  double yield = 0.0, complementarity = 0.0;
  int increments = 0;
  void add(const std::vector<AnalysisRecord>& recs) {
    for (const AnalysisRecord& r : recs) {
      yield = std::max(yield, r.yield_max);
      complementarity = std::max(complementarity, r.complementarity_max);
      ++increments;
    }
  }
};

bool criterion5(KktAudit& kkt) {
  const auto t0 = Clock::now();
  const std::vector<int> ns{4, 8, 16, 32};
  std::map<std::string, std::vector<double>> u;
  bool complete = true;
  for (const std::string& tag : benchmark_element_tags())
    for (int n : ns) {
      BenchmarkSpec s;
      s.benchmark = Benchmark::cook;
      s.n1 = n;
      s.element = tag;
      const BenchmarkRun run = run_benchmark(s);
      complete = complete && run.completed;
      kkt.add(run.records);
      u[tag].push_back(run.qoi);
    }
  const double elapsed = seconds_since(t0);

  bool monotone = true, q4_lowest = true;
  for (const auto& [tag, v] : u) {
    std::cout << "  cook " << tag;
    for (std::size_t k = 0; k < v.size(); ++k) std::cout << "  n=" << ns[k] << " " << format_number(v[k]);
    std::cout << '\n';
    for (std::size_t k = 1; k < v.size(); ++k) monotone = monotone && v[k] > v[k - 1];
    if (tag != "Q4" && tag != "Q8") q4_lowest = q4_lowest && u["Q4"][0] < v[0];
  }
  const std::vector<double>& hw = u["HW-Q8-D"];
  const double hw_delta = std::abs(hw[1] - hw[3]) / std::abs(hw[3]);
  const bool pass = complete && monotone && q4_lowest && hw_delta < kHwConvergenceTol && elapsed < kCookSeconds;
  report(5, pass, std::string("Cook: ") + (complete ? "all runs complete" : "incomplete runs") +
                      ", monotone " + (monotone ? "yes" : "no") + ", Q4 n=4 below mixed " +
                      (q4_lowest ? "yes" : "no") + ", HW-Q8-D |u(8)-u(32)|/|u(32)| " + sci(hw_delta) + ", " +
                      sci(elapsed) + " s");
  return pass;
}

bool criterion6(KktAudit& kkt) {
  const auto t0 = Clock::now();
  const std::vector<std::string> tags{"ES-Q4", "CM-Q4", "HR-Q4", "HW-Q8-D"};
  bool complete = true;
  std::map<int, double> spread;
  for (int fine : {0, 1}) {
    std::vector<double> reactions;
    for (const std::string& tag : tags) {
      BenchmarkSpec s;
      s.benchmark = Benchmark::plate;
      s.n1 = fine ? 19 : 6;
      s.n2 = fine ? 38 : 12;
      s.element = tag;
      const BenchmarkRun run = run_benchmark(s);
      complete = complete && run.completed;
      kkt.add(run.records);
      reactions.push_back(run.qoi);
      std::cout << "  plate " << refinement_label(s) << " " << tag << " reaction " << format_number(run.qoi) << '\n';
    }
    double worst = 0.0;
    for (std::size_t a = 0; a < reactions.size(); ++a)
      for (std::size_t b = a + 1; b < reactions.size(); ++b)
        worst = std::max(worst, std::abs(reactions[a] - reactions[b]) /
                                    std::max(std::abs(reactions[a]), std::abs(reactions[b])));
    spread[fine] = worst;
  }
  const double elapsed = seconds_since(t0);
  const bool pass = complete && spread[1] < kPlateFineTol && spread[0] < kPlateCoarseTol && elapsed < kPlateSeconds;
  report(6, pass, std::string("plate: ") + (complete ? "all runs complete" : "incomplete runs") +
                      ", pairwise spread 19x38 " + sci(spread[1]) + ", 6x12 " + sci(spread[0]) + ", " +
                      sci(elapsed) + " s");
  return pass;
}

bool criterion7() {
  std::vector<Problem> problems;
  for (int n : {2, 4, 8}) problems.push_back(make_problem(Benchmark::cook, n, 0, 4, cook_material()));
  const StabilityReport hr = infsup_test(problems, {2, 4, 8}, "HR-Q4", Supports::problem);
  const double ratio = hr.rows.back().lambda_min / hr.rows.front().lambda_min;
  // the deficient variant is tested with only the rigid-body modes suppressed
  const StabilityReport hr3 = infsup_test(problems, {2, 4, 8}, "HR-Q4-3", Supports::rigid);
  bool zero = true, rank3 = true;
  std::ostringstream lam;
  for (const StabilityRow& r : hr3.rows) {
    zero = zero && r.at_zero;
    rank3 = rank3 && r.rank_C == 3;
    lam << ' ' << sci(r.lambda_min);
  }
  const bool pass = ratio > kStabilityRatio && !hr.unstable && zero && rank3;
  report(7, pass, "inf-sup: HR-Q4 lambda1 n=8/n=2 " + sci(ratio) + "; HR-Q4-3 lambda1" + lam.str() +
                      (zero ? " (numerical zero)" : " (not zero)") + ", rank C " +
                      std::to_string(hr3.rows.front().rank_C) + " < 5");
  return pass;
}

bool criterion8(const KktAudit& kkt) {
  const bool pass = kkt.increments > 0 && kkt.yield <= kYieldTol && kkt.complementarity <= kComplementarityTol;
  report(8, pass, "KKT over " + std::to_string(kkt.increments) + " committed increments: max yield/sigma_y0 " +
                      sci(kkt.yield) + ", max complementarity " + sci(kkt.complementarity));
  return pass;
}

} // namespace

int main() {
  KktAudit kkt;
  const auto run = [](int id, auto&& f) {
    try {
      f();
    } catch (const std::exception& e) {
      report(id, false, std::string("exception: ") + e.what());
    }
  };
  run(1, criterion1);
  run(2, criterion2);
  run(3, criterion3);
  run(4, criterion4);
  run(5, [&] { criterion5(kkt); });
  run(6, [&] { criterion6(kkt); });
  run(7, criterion7);
  run(8, [&] { criterion8(kkt); });
  return failures == 0 ? 0 : 1;
}
