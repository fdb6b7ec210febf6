// Command-line driver for the benchmark runs, convergence sweeps and inf-sup tests.

#include "mixfem/bench.hpp"
#include "mixfem/errors.hpp"
#include "mixfem/stability.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>
#include <sstream>

namespace {

constexpr int kOk = 0, kSolverFailure = 2, kConfigError = 3;

struct Options {
  std::string benchmark = "cook";
  std::string element = "Q4";
  std::string refine = "4";
  std::string refine_list;
  int increments = 0;
  std::string out;
  bool hr_relaxed = false;
  std::string cm_solver = "return_map";
  double tol = 1e-8;
  std::optional<double> E, nu, sigma_y0, k_i, k_k;
  std::string plane;
  std::string supports = "problem";
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--benchmark", o.benchmark, "cook or plate")->check(CLI::IsMember({"cook", "plate"}));
  sub->add_option("--element", o.element, "Q4, Q8, HW-Q8-D, ES-Q4, CM-Q4, HR-Q4 (or an auxiliary tag)");
  sub->add_option("--out", o.out, "output directory or file");
}

void add_run_options(CLI::App* sub, Options& o) {
  sub->add_option("--increments", o.increments, "number of increments (0: benchmark default)");
  sub->add_flag("--hr-relaxed", o.hr_relaxed, "HR-Q4 with stress residual in the global loop");
  sub->add_option("--cm-solver", o.cm_solver, "return_map, interior_point or sqp")
      ->check(CLI::IsMember({"return_map", "interior_point", "sqp"}));
  sub->add_option("--tol", o.tol, "relative global residual tolerance");
  sub->add_option("--E", o.E, "Young's modulus");
  sub->add_option("--nu", o.nu, "Poisson's ratio");
  sub->add_option("--sigma-y0", o.sigma_y0, "initial yield stress");
  sub->add_option("--k-i", o.k_i, "isotropic hardening modulus");
  sub->add_option("--k-k", o.k_k, "kinematic hardening modulus");
  sub->add_option("--plane", o.plane, "plane_stress or plane_strain")
      ->check(CLI::IsMember({"plane_stress", "plane_strain"}));
}

mixfem::BenchmarkSpec make_spec(const Options& o, const std::string& refine) {
  mixfem::BenchmarkSpec s;
  s.benchmark = mixfem::parse_benchmark(o.benchmark);
  mixfem::parse_refinement(refine, s.benchmark, s.n1, s.n2);
  mixfem::formulation_from_tag(o.element);
  s.element = o.element;
  s.increments = o.increments;
  s.hr_relaxed = o.hr_relaxed;
  s.cm_solver = o.cm_solver;
  s.tol = o.tol;
  if (o.E || o.nu || o.sigma_y0 || o.k_i || o.k_k || !o.plane.empty()) {
    mixfem::MaterialParams m =
        s.benchmark == mixfem::Benchmark::cook ? mixfem::cook_material() : mixfem::plate_material();
    if (o.E) m.E = *o.E;
    if (o.nu) m.nu = *o.nu;
    if (o.sigma_y0) m.sigma_y0 = *o.sigma_y0;
    if (o.k_i) m.k_i = *o.k_i;
    if (o.k_k) m.k_k = *o.k_k;
    if (o.plane == "plane_strain") m.plane = mixfem::PlaneAssumption::plane_strain;
    if (o.plane == "plane_stress") m.plane = mixfem::PlaneAssumption::plane_stress;
    m.validate();
    s.material = m;
  }
  return s;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) items.push_back(item);
  if (items.empty()) throw mixfem::ConfigError("empty --refine-list");
  return items;
}

int cmd_run(const Options& o) {
  mixfem::BenchmarkSpec spec = make_spec(o, o.refine);
  spec.out_dir = o.out;
  const mixfem::BenchmarkRun run = mixfem::run_benchmark(spec);
  for (const mixfem::AnalysisRecord& r : run.records)
    std::cout << "step " << r.step << "  lambda " << mixfem::format_number(r.load_factor) << "  control "
              << mixfem::format_number(r.control_disp) << "  reaction " << mixfem::format_number(r.reaction)
              << "  iters " << r.global_iters << '\n';
  if (!run.completed) {
    std::cerr << "solver failure: " << run.failure << '\n';
    return kSolverFailure;
  }
  return kOk;
}

int cmd_converge(const Options& o) {
  std::vector<mixfem::BenchmarkRun> runs;
  for (const std::string& refine : split_list(o.refine_list)) {
    mixfem::BenchmarkSpec spec = make_spec(o, refine);
    if (!o.out.empty()) spec.out_dir = (std::filesystem::path(o.out) / mixfem::refinement_label(spec)).string();
    runs.push_back(mixfem::run_benchmark(spec));
    if (!runs.back().completed) {
      std::cerr << "solver failure at refinement " << refine << ": " << runs.back().failure << '\n';
      return kSolverFailure;
    }
  }
  const std::vector<mixfem::ConvergenceRow> rows = mixfem::convergence_report(runs);
  std::cout << "refine,qoi,rel_delta\n";
  for (const mixfem::ConvergenceRow& r : rows)
    std::cout << r.refinement << ',' << mixfem::format_number(r.qoi) << ','
              << (r.rel_delta ? mixfem::format_number(*r.rel_delta) : "") << '\n';
  if (!o.out.empty())
    mixfem::write_convergence_csv((std::filesystem::path(o.out) / "convergence.csv").string(), rows);
  return kOk;
}

int cmd_stability(const Options& o) {
  const mixfem::Benchmark b = mixfem::parse_benchmark(o.benchmark);
  const mixfem::ElementFormulation form = mixfem::formulation_from_tag(o.element);
  std::vector<mixfem::Problem> problems;
  std::vector<int> refs;
  for (const std::string& refine : split_list(o.refine_list)) {
    int n1 = 0, n2 = 0;
    mixfem::parse_refinement(refine, b, n1, n2);
    const mixfem::MaterialParams m =
        b == mixfem::Benchmark::cook ? mixfem::cook_material() : mixfem::plate_material();
    problems.push_back(mixfem::make_problem(b, n1, n2, form.nodes, m));
    refs.push_back(n1);
  }
  const mixfem::StabilityReport rep =
      mixfem::infsup_test(problems, refs, o.element, mixfem::parse_supports(o.supports));
  std::cout << "mesh_h,lambda_min,rank_C,flag\n";
  for (const mixfem::StabilityRow& r : rep.rows)
    std::cout << mixfem::format_number(r.mesh_h) << ',' << mixfem::format_number(r.lambda_min) << ','
              << r.rank_C << ',' << r.flag << '\n';
  std::cout << (rep.unstable ? "unstable" : "stable") << '\n';
  if (!o.out.empty()) mixfem::write_stability_csv(o.out, rep);
  return kOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed finite element plasticity workbench"};
  app.set_config("--config", "", "key-value configuration file; flags override it");
  app.require_subcommand(1);
  Options o;

  CLI::App* run = app.add_subcommand("run", "run one benchmark analysis");
  add_common(run, o);
  add_run_options(run, o);
  run->add_option("--refine", o.refine, "n for cook, nr x nc for plate");

  CLI::App* converge = app.add_subcommand("converge", "convergence table over refinements");
  add_common(converge, o);
  add_run_options(converge, o);
  converge->add_option("--refine-list", o.refine_list, "comma separated refinements")->required();

  CLI::App* stability = app.add_subcommand("stability", "inf-sup eigenvalue test over refinements");
  add_common(stability, o);
  stability->add_option("--refine-list", o.refine_list, "comma separated refinements")->required();
  stability->add_option("--supports", o.supports, "problem: Dirichlet DOFs removed; rigid: rigid modes only")
      ->check(CLI::IsMember({"problem", "rigid"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (run->parsed()) return cmd_run(o);
    if (converge->parsed()) return cmd_converge(o);
    return cmd_stability(o);
  } catch (const mixfem::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const mixfem::InvalidParams& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const mixfem::MissingRun& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const mixfem::Error& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  }
}
