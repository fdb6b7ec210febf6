#include "support.hpp"

#include "mixfem/errors.hpp"

#include <gtest/gtest.h>

#include "json.hpp"

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mixfem;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("mixfem_test_" + name);
  fs::remove_all(d);
  return d;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(MIXFEM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

double min_jacobian(const Mesh& m) {
  double jmin = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < m.elements.size(); ++e) {
    const Coords c = m.element_coords(static_cast<int>(e));
    for (const ParentPoint& p : gauss_rule(3).points) jmin = std::min(jmin, shape_eval(c, p).det_J);
  }
  return jmin;
}

} // namespace

TEST(CookMesh, Counts) {
  const Mesh q4 = mesh_cook(4, 4), q8 = mesh_cook(4, 8);
  EXPECT_EQ(q4.elements.size(), 16u);
  EXPECT_EQ(q4.num_nodes(), 25);
  EXPECT_EQ(q8.elements.size(), 16u);
  EXPECT_EQ(q8.num_nodes(), 65);
  EXPECT_EQ(q8.elements.front().size(), 8u);
}

TEST(CookMesh, PositiveJacobians) {
  for (int n : {4, 8, 16, 32})
    for (int npe : {4, 8}) EXPECT_GT(min_jacobian(mesh_cook(n, npe)), 0.0) << n << " " << npe;
}

TEST(CookMesh, PointAIsTopRightCorner) {
  const Mesh m = mesh_cook(4, 4);
  ASSERT_EQ(m.node_sets.at("A").size(), 1u);
  const int a = m.node_sets.at("A").front();
  EXPECT_NEAR(m.nodes(a, 0), 48.0, 1e-12);
  EXPECT_NEAR(m.nodes(a, 1), 60.0, 1e-12);
}

TEST(CookProblem, TractionResultantAndSupports) {
  const Problem p = make_problem(Benchmark::cook, 8, 0, 8, cook_material());
  double fy = 0.0, fx = 0.0;
  for (int i = 0; i < p.mesh.num_nodes(); ++i) {
    fx += p.load(2 * i);
    fy += p.load(2 * i + 1);
  }
  EXPECT_NEAR(fy, 1.8, 1e-12);
  EXPECT_NEAR(fx, 0.0, 1e-15);
  EXPECT_EQ(p.dirichlet.size(), 2 * p.mesh.node_sets.at("left").size());
  EXPECT_EQ(p.control, ControlMode::load);
}

TEST(PlateMesh, Counts) {
  EXPECT_EQ(mesh_plate(6, 12, 4).elements.size(), 72u);
  EXPECT_EQ(mesh_plate(19, 38, 4).elements.size(), 722u);
  EXPECT_EQ(mesh_plate(6, 12, 4).num_nodes(), 7 * 13);
}

TEST(PlateMesh, HoleNodesOnRadius) {
  for (int npe : {4, 8}) {
    const Mesh m = mesh_plate(6, 12, npe);
    const std::vector<int>& hole = m.node_sets.at("hole");
    EXPECT_EQ(hole.size(), npe == 4 ? 13u : 25u);
    for (int k : hole) EXPECT_NEAR(std::hypot(m.nodes(k, 0), m.nodes(k, 1)), 5.0, 1e-12);
  }
}

TEST(PlateMesh, PositiveJacobians) {
  for (int npe : {4, 8}) {
    EXPECT_GT(min_jacobian(mesh_plate(6, 12, npe)), 0.0);
    EXPECT_GT(min_jacobian(mesh_plate(19, 38, npe)), 0.0);
  }
}

TEST(PlateMesh, InnerRingIsNotElongated) {
  const Mesh m = mesh_plate(6, 12, 4);
  for (std::size_t e = 0; e < m.elements.size(); ++e) {
    const Coords c = m.element_coords(static_cast<int>(e));
    if (std::hypot(c(0, 0), c(0, 1)) > 5.0 + 1e-9) continue;
    const double a = (c.row(1) - c.row(0)).norm(), b = (c.row(3) - c.row(0)).norm();
    EXPECT_LE(std::max(a, b) / std::min(a, b), 3.0);
  }
}

TEST(Refinement, Parsing) {
  int a = 0, b = 0;
  parse_refinement("19x38", Benchmark::plate, a, b);
  EXPECT_EQ(a, 19);
  EXPECT_EQ(b, 38);
  parse_refinement(" 6 X 12 ", Benchmark::plate, a, b);
  EXPECT_EQ(a, 6);
  parse_refinement("16", Benchmark::cook, a, b);
  EXPECT_EQ(a, 16);
  EXPECT_THROW(parse_refinement("16", Benchmark::plate, a, b), ConfigError);
  EXPECT_THROW(parse_refinement("0", Benchmark::cook, a, b), ConfigError);
  EXPECT_THROW(parse_benchmark("beam"), ConfigError);
}

TEST(Format, TwelveSignificantDigits) {
  EXPECT_EQ(format_number(1.0), "1.00000000000e+00");
  EXPECT_EQ(format_number(-0.00123456789012345), "-1.23456789012e-03");
}

TEST(Materials, BenchmarkParameters) {
  const MaterialParams c = cook_material(), p = plate_material();
  EXPECT_EQ(c.E, 70.0);
  EXPECT_EQ(c.nu, 1.0 / 3.0);
  EXPECT_EQ(c.sigma_y0, 0.243);
  EXPECT_EQ(c.k_i, 0.2);
  EXPECT_EQ(c.plane, PlaneAssumption::plane_stress);
  EXPECT_EQ(p.nu, 0.2);
  EXPECT_EQ(p.plane, PlaneAssumption::plane_stress);
}

TEST(RunBenchmark, CookHistoryAndManifest) {
  BenchmarkSpec s;
  s.benchmark = Benchmark::cook;
  s.n1 = 4;
  s.element = "ES-Q4";
  s.out_dir = scratch("cook").string();
  const BenchmarkRun run = run_benchmark(s);
  ASSERT_TRUE(run.completed) << run.failure;
  const std::vector<std::string> h = lines(fs::path(s.out_dir) / "history.csv");
  ASSERT_EQ(h.size(), 21u);
  EXPECT_EQ(h[0], "step,load_factor,control_disp,reaction,qoi_disp,global_iters");
  EXPECT_EQ(h[20].substr(0, h[20].find(',', 3)), "20,1.00000000000e+00");
  EXPECT_EQ(run.records.back().load_factor, 1.0);

  const nlohmann::json j = nlohmann::json::parse(slurp(fs::path(s.out_dir) / "manifest.json"));
  EXPECT_EQ(j["element"], "ES-Q4");
  EXPECT_EQ(j["increments"], 20);
  EXPECT_EQ(j["material"]["E"], "70");
  EXPECT_EQ(j["material"]["sigma_y0"], "0.243");
  EXPECT_EQ(j["material"]["k_i"], "0.2");
  EXPECT_EQ(j["material"]["plane"], "plane_stress");
  EXPECT_EQ(j["completed"], true);

  const std::vector<std::string> f = lines(fs::path(s.out_dir) / "fields.csv");
  EXPECT_EQ(f[0], "element,site,x,y,sigma_xx,sigma_yy,sigma_xy,ep_xx,ep_yy,ep_xy,alpha_i");
  EXPECT_EQ(f.size(), 1u + 16u * 4u);
  fs::remove_all(s.out_dir);
}

TEST(RunBenchmark, PlateReachesPrescribedDisplacement) {
  BenchmarkSpec s;
  s.benchmark = Benchmark::plate;
  s.n1 = 6;
  s.n2 = 12;
  s.element = "HR-Q4";
  const BenchmarkRun run = run_benchmark(s);
  ASSERT_TRUE(run.completed) << run.failure;
  EXPECT_EQ(run.records.size(), 40u);
  EXPECT_NEAR(run.records.back().control_disp, 6.15, 1e-12);
  EXPECT_GT(run.qoi, 0.0);
  EXPECT_EQ(run.qoi, run.records.back().reaction);
}

TEST(RunBenchmark, RerunsAreByteIdentical) {
  BenchmarkSpec s;
  s.benchmark = Benchmark::cook;
  s.n1 = 2;
  s.element = "CM-Q4";
  s.out_dir = scratch("rerun_a").string();
  run_benchmark(s);
  const std::string a_hist = slurp(fs::path(s.out_dir) / "history.csv");
  const std::string a_fields = slurp(fs::path(s.out_dir) / "fields.csv");
  const std::string a_manifest = slurp(fs::path(s.out_dir) / "manifest.json");
  fs::remove_all(s.out_dir);
  s.out_dir = scratch("rerun_b").string();
  run_benchmark(s);
  EXPECT_EQ(slurp(fs::path(s.out_dir) / "history.csv"), a_hist);
  EXPECT_EQ(slurp(fs::path(s.out_dir) / "fields.csv"), a_fields);
  EXPECT_EQ(slurp(fs::path(s.out_dir) / "manifest.json"), a_manifest);
  fs::remove_all(s.out_dir);
}

TEST(Convergence, SingleRunHasNoDelta) {
  BenchmarkSpec s;
  s.n1 = 2;
  const std::vector<ConvergenceRow> rows = convergence_report({run_benchmark(s)});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_FALSE(rows[0].rel_delta.has_value());
}

TEST(Convergence, DeltasRelativeToFinest) {
  std::vector<BenchmarkRun> runs;
  for (int n : {4, 2}) {
    BenchmarkSpec s;
    s.n1 = n;
    s.element = "HR-Q4";
    runs.push_back(run_benchmark(s));
  }
  const std::vector<ConvergenceRow> rows = convergence_report(runs);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].refinement, "2");
  EXPECT_DOUBLE_EQ(*rows[0].rel_delta, (runs[1].qoi - runs[0].qoi) / std::abs(runs[0].qoi));
  EXPECT_FALSE(rows[1].rel_delta.has_value());
}

TEST(Convergence, IncompleteRunIsMissing) {
  BenchmarkRun r;
  r.completed = false;
  EXPECT_THROW(convergence_report({r}), MissingRun);
  EXPECT_THROW(convergence_report({}), MissingRun);
}

TEST(Cli, ExitCodes) {
  const fs::path out = scratch("cli");
  EXPECT_EQ(cli("run --benchmark cook --element Q4 --refine 2 --increments 2 --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "history.csv"));
  EXPECT_EQ(cli("run --benchmark cook --element Q9 --refine 2"), 3);
  EXPECT_EQ(cli("run --benchmark cook --element Q4 --refine 2 --nu 0.7"), 3);
  EXPECT_EQ(cli("run --benchmark plate --refine 6"), 3);
  EXPECT_EQ(cli("run --benchmark cook --element Q4 --refine 2 --tol 1e-30"), 2);
  EXPECT_EQ(cli("run --benchmark cook --element HW-Q8-D --refine 2 --k-i 0"), 2);
  EXPECT_EQ(cli("stability --benchmark cook --element HR-Q4 --refine-list 2,4"), 0);
  EXPECT_EQ(cli("stability --benchmark cook --element HR-Q4 --refine-list 2 --supports pinned"), 3);
  EXPECT_EQ(cli("converge --benchmark cook --element Q4 --refine-list 2,3 --increments 2 --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "convergence.csv"));
  fs::remove_all(out);
}

TEST(Cli, ConfigFileWithFlagOverride) {
  const fs::path out = scratch("config");
  fs::create_directories(out);
  {
    std::ofstream cfg(out / "run.toml");
    cfg << "[run]\nbenchmark = \"cook\"\nelement = \"HR-Q4\"\nrefine = \"2\"\nincrements = 3\nsigma-y0 = 0.3\n";
  }
  EXPECT_EQ(cli("--config " + (out / "run.toml").string() + " run --increments 2 --out " + (out / "r").string()), 0);
  const nlohmann::json j = nlohmann::json::parse(slurp(out / "r" / "manifest.json"));
  EXPECT_EQ(j["element"], "HR-Q4");
  EXPECT_EQ(j["increments"], 2);
  EXPECT_EQ(j["material"]["sigma_y0"], "0.3");
  fs::remove_all(out);
}
