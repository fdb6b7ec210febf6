#include "mixfem/bench.hpp"

#include "mixfem/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <regex>

namespace mixfem {

namespace {

constexpr double kCookW = 48.0, kCookHl = 44.0, kCookHr = 16.0, kCookF = 1.8;
constexpr double kPlateHalfW = 10.0, kPlateHalfH = 18.0, kPlateR = 5.0, kPlateUmax = 6.15;

Vec2 cook_map(double s, double t) {
  return {kCookW * s, kCookHl * s + t * (kCookHl + (kCookHr - kCookHl) * s)};
}

/// Builds Q4 or Q8 connectivity over an (n1+1) x (n2+1) logical grid from a point map.
template <class Map>
Mesh structured_mesh(int n1, int n2, int npe, Map&& point) {
  if (npe != 4 && npe != 8) throw ConfigError("nodes per element must be 4 or 8");
  std::vector<Vec2> pts;
  std::map<std::pair<int, int>, int> ids;  // keys in half-steps
  auto node = [&](int a, int b) {
    auto [it, inserted] = ids.try_emplace({a, b}, static_cast<int>(pts.size()));
    if (inserted) pts.push_back(point(0.5 * a, 0.5 * b));
    return it->second;
  };
  Mesh mesh;
  for (int j = 0; j < n2; ++j)
    for (int i = 0; i < n1; ++i) {
      const int a = 2 * i, b = 2 * j;
      std::vector<int> conn{node(a, b), node(a + 2, b), node(a + 2, b + 2), node(a, b + 2)};
      if (npe == 8) {
        conn.push_back(node(a + 1, b));
        conn.push_back(node(a + 2, b + 1));
        conn.push_back(node(a + 1, b + 2));
        conn.push_back(node(a, b + 1));
      }
      mesh.elements.push_back(std::move(conn));
    }
  mesh.nodes.resize(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t k = 0; k < pts.size(); ++k) mesh.nodes.row(k) = pts[k].transpose();
  return mesh;
}

void add_set(Mesh& mesh, const std::string& name, auto&& pred) {
  std::vector<int>& set = mesh.node_sets[name];
  for (int k = 0; k < mesh.num_nodes(); ++k)
    if (pred(mesh.nodes(k, 0), mesh.nodes(k, 1))) set.push_back(k);
}

int plate_right_segments(int n_c) {
  const double corner = std::atan2(kPlateHalfH, kPlateHalfW);
  const int n = static_cast<int>(std::lround(n_c * corner / (0.5 * std::numbers::pi)));
  return n_c < 2 ? n_c : std::clamp(n, 1, n_c - 1);
}

Vec2 plate_outer(double j, int n_c) {
  const int nr = plate_right_segments(n_c);
  if (j <= nr) return {kPlateHalfW, nr == 0 ? 0.0 : kPlateHalfH * j / nr};
  return {kPlateHalfW * (n_c - j) / (n_c - nr), kPlateHalfH};
}

double plate_rho(double i, int n_r, double r) {
  if (std::abs(r - 1.0) < 1e-12) return i / n_r;
  return (std::pow(r, i) - 1.0) / (std::pow(r, n_r) - 1.0);
}

double mean_ligament(int n_c) {
  double sum = 0.0;
  for (int j = 0; j <= n_c; ++j) {
    const double th = 0.5 * std::numbers::pi * j / n_c;
    sum += (plate_outer(j, n_c) - kPlateR * Vec2(std::cos(th), std::sin(th))).norm();
  }
  return sum / (n_c + 1);
}

// shortest text that reads back to the same double
std::string fmt_config(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

} // namespace

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.11e", v);
  return buf;
}

Benchmark parse_benchmark(const std::string& name) {
  if (name == "cook") return Benchmark::cook;
  if (name == "plate") return Benchmark::plate;
  throw ConfigError("unknown benchmark '" + name + "'");
}

std::string benchmark_name(Benchmark b) { return b == Benchmark::cook ? "cook" : "plate"; }

Mesh mesh_cook(int n, int npe) {
  if (n < 1) throw ConfigError("refinement must be at least 1");
  Mesh mesh = structured_mesh(n, n, npe, [n](double a, double b) { return cook_map(a / n, b / n); });
  add_set(mesh, "left", [](double x, double) { return std::abs(x) < 1e-9; });
  add_set(mesh, "right", [](double x, double) { return std::abs(x - kCookW) < 1e-9; });
  add_set(mesh, "A", [](double x, double y) {
    return std::abs(x - kCookW) < 1e-9 && std::abs(y - kCookHl - kCookHr) < 1e-9;
  });
  return mesh;
}

double plate_grading_ratio(int n_r, int n_c) {
  const double target = kPlateR * 0.5 * std::numbers::pi / n_c / mean_ligament(n_c);
  if (n_r <= 1 || 1.0 / n_r <= target) return 1.0;
  double lo = 1.0, hi = 2.0;
  while (plate_rho(1, n_r, hi) > target) hi *= 2.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (plate_rho(1, n_r, mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Mesh mesh_plate(int n_r, int n_c, int npe) {
  if (n_r < 1 || n_c < 1) throw ConfigError("refinement must be at least 1");
  const double r = plate_grading_ratio(n_r, n_c);
  auto point = [&](double i, double j) {
    const double th = 0.5 * std::numbers::pi * j / n_c;
    const Vec2 hole = kPlateR * Vec2(std::cos(th), std::sin(th));
    const double jl = std::floor(j), jh = std::ceil(j);
    const Vec2 outer = 0.5 * (plate_outer(jl, n_c) + plate_outer(jh, n_c));
    double rho;
    if (i == std::floor(i)) {
      rho = plate_rho(i, n_r, r);
    } else {
      rho = 0.5 * (plate_rho(std::floor(i), n_r, r) + plate_rho(std::ceil(i), n_r, r));
    }
    Vec2 p = hole + rho * (outer - hole);
    if (i == 0.0) p = hole;
    return p;
  };
  Mesh mesh = structured_mesh(n_r, n_c, npe, point);
  add_set(mesh, "hole", [](double x, double y) { return std::abs(std::hypot(x, y) - kPlateR) < 1e-9; });
  add_set(mesh, "sym_x", [](double x, double) { return std::abs(x) < 1e-9; });
  add_set(mesh, "sym_y", [](double, double y) { return std::abs(y) < 1e-9; });
  add_set(mesh, "top", [](double, double y) { return std::abs(y - kPlateHalfH) < 1e-9; });
  return mesh;
}

MaterialParams cook_material() {
  MaterialParams m;
  m.E = 70.0;
  m.nu = 1.0 / 3.0;
  m.sigma_y0 = 0.243;
  m.k_i = 0.2;
  m.plane = PlaneAssumption::plane_stress;
  return m;
}

MaterialParams plate_material() {
  MaterialParams m = cook_material();
  m.nu = 0.2;
  return m;
}

Problem make_problem(Benchmark b, int n1, int n2, int npe, const MaterialParams& material) {
  Problem p;
  p.material = material;
  if (b == Benchmark::cook) {
    p.mesh = mesh_cook(n1, npe);
    const Mesh& m = p.mesh;
    p.load = Vec::Zero(m.num_dofs());
    const double q = kCookF / kCookHr;
    for (int j = 0; j < n1; ++j) {
      // right-edge elements are the last column of the structured grid
      const std::vector<int>& conn = m.elements[static_cast<std::size_t>(j * n1 + n1 - 1)];
      const double L = (m.nodes.row(conn[2]) - m.nodes.row(conn[1])).norm();
      if (npe == 4) {
        p.load(2 * conn[1] + 1) += 0.5 * q * L;
        p.load(2 * conn[2] + 1) += 0.5 * q * L;
      } else {
        p.load(2 * conn[1] + 1) += q * L / 6.0;
        p.load(2 * conn[5] + 1) += 4.0 * q * L / 6.0;
        p.load(2 * conn[2] + 1) += q * L / 6.0;
      }
    }
    for (int k : m.node_sets.at("left")) {
      p.dirichlet.push_back({2 * k, 0.0});
      p.dirichlet.push_back({2 * k + 1, 0.0});
      p.reaction_dofs.push_back(2 * k + 1);
    }
    p.control = ControlMode::load;
    p.control_dof = 2 * m.node_sets.at("A").front() + 1;
    p.qoi_dof = p.control_dof;
  } else {
    if (n2 < 1) throw ConfigError("plate refinement needs n_r x n_c");
    p.mesh = mesh_plate(n1, n2, npe);
    const Mesh& m = p.mesh;
    p.load = Vec::Zero(m.num_dofs());
    for (int k : m.node_sets.at("sym_x")) p.dirichlet.push_back({2 * k, 0.0});
    for (int k : m.node_sets.at("sym_y")) p.dirichlet.push_back({2 * k + 1, 0.0});
    for (int k : m.node_sets.at("top")) {
      p.dirichlet.push_back({2 * k + 1, kPlateUmax});
      p.reaction_dofs.push_back(2 * k + 1);
    }
    p.control = ControlMode::displacement;
    const std::vector<int>& top = m.node_sets.at("top");
    p.control_dof = 2 * top.front() + 1;
    p.qoi_dof = p.control_dof;
  }
  return p;
}

void parse_refinement(const std::string& text, Benchmark b, int& n1, int& n2) {
  static const std::regex single(R"(\s*(\d+)\s*)");
  static const std::regex pair(R"(\s*(\d+)\s*[xX]\s*(\d+)\s*)");
  std::smatch m;
  if (b == Benchmark::cook && std::regex_match(text, m, single)) {
    n1 = std::stoi(m[1]);
    n2 = 0;
  } else if (b == Benchmark::plate && std::regex_match(text, m, pair)) {
    n1 = std::stoi(m[1]);
    n2 = std::stoi(m[2]);
  } else {
    throw ConfigError("bad refinement '" + text + "' for " + benchmark_name(b));
  }
  if (n1 < 1 || (b == Benchmark::plate && n2 < 1)) throw ConfigError("refinement must be at least 1");
}

std::string refinement_label(const BenchmarkSpec& spec) {
  if (spec.benchmark == Benchmark::cook) return std::to_string(spec.n1);
  return std::to_string(spec.n1) + "x" + std::to_string(spec.n2);
}

BenchmarkRun run_benchmark(const BenchmarkSpec& spec) {
  BenchmarkRun run;
  run.spec = spec;
  run.material = spec.material ? *spec.material
                               : (spec.benchmark == Benchmark::cook ? cook_material() : plate_material());
  const ElementFormulation form = formulation_from_tag(spec.element);
  Problem problem = make_problem(spec.benchmark, spec.n1, spec.n2, form.nodes, run.material);

  AnalysisConfig cfg;
  cfg.element = spec.element;
  cfg.increments = spec.increments > 0 ? spec.increments : (spec.benchmark == Benchmark::cook ? 20 : 40);
  cfg.tol = spec.tol;
  cfg.hr_relaxed = spec.hr_relaxed;
  cfg.cm_solver = spec.cm_solver;
  run.spec.increments = cfg.increments;

  Analysis analysis(std::move(problem), cfg);
  run.records = analysis.run();
  run.failure = analysis.failure();
  run.completed = run.failure.empty() && static_cast<int>(run.records.size()) == cfg.increments;
  if (!run.records.empty())
    run.qoi = spec.benchmark == Benchmark::cook ? run.records.back().qoi_disp : run.records.back().reaction;

  if (spec.out_dir.empty()) return run;
  namespace fs = std::filesystem;
  fs::create_directories(spec.out_dir);
  {
    std::ofstream out(fs::path(spec.out_dir) / "history.csv");
    out << "step,load_factor,control_disp,reaction,qoi_disp,global_iters\n";
    for (const AnalysisRecord& r : run.records)
      out << r.step << ',' << format_number(r.load_factor) << ',' << format_number(r.control_disp) << ','
          << format_number(r.reaction) << ',' << format_number(r.qoi_disp) << ',' << r.global_iters << '\n';
  }
  {
    std::ofstream out(fs::path(spec.out_dir) / "fields.csv");
    out << "element,site,x,y,sigma_xx,sigma_yy,sigma_xy,ep_xx,ep_yy,ep_xy,alpha_i\n";
    const std::vector<ElementResult>& res = analysis.last_results();
    const std::vector<ElementHistory>& hist = analysis.histories();
    for (std::size_t e = 0; e < res.size(); ++e) {
      const std::size_t n =
          std::min({res[e].site_stress.size(), res[e].site_x.size(), hist[e].sites.size()});
      for (std::size_t s = 0; s < n; ++s) {
        const Vec3& sg = res[e].site_stress[s];
        const MaterialPointState& st = hist[e].sites[s];
        out << e << ',' << s << ',' << format_number(res[e].site_x[s](0)) << ','
            << format_number(res[e].site_x[s](1));
        for (int k = 0; k < 3; ++k) out << ',' << format_number(sg(k));
        for (int k = 0; k < 3; ++k) out << ',' << format_number(st.plastic_strain(k));
        out << ',' << format_number(st.alpha_i) << '\n';
      }
    }
  }
  {
    nlohmann::ordered_json j;
    j["benchmark"] = benchmark_name(spec.benchmark);
    j["refine"] = refinement_label(spec);
    j["element"] = spec.element;
    j["increments"] = cfg.increments;
    j["tol"] = fmt_config(cfg.tol);
    j["hr_relaxed"] = cfg.hr_relaxed;
    j["cm_solver"] = cfg.cm_solver;
    j["material"] = {{"E", fmt_config(run.material.E)},
                     {"nu", fmt_config(run.material.nu)},
                     {"sigma_y0", fmt_config(run.material.sigma_y0)},
                     {"k_i", fmt_config(run.material.k_i)},
                     {"k_k", fmt_config(run.material.k_k)},
                     {"plane", run.material.plane == PlaneAssumption::plane_stress ? "plane_stress"
                                                                                    : "plane_strain"}};
    j["completed"] = run.completed;
    j["increments_done"] = run.records.size();
    j["failure"] = run.failure;
    std::ofstream out(fs::path(spec.out_dir) / "manifest.json");
    out << j.dump(2) << '\n';
  }
  return run;
}

std::vector<ConvergenceRow> convergence_report(const std::vector<BenchmarkRun>& runs) {
  if (runs.empty()) throw MissingRun("no runs given");
  for (const BenchmarkRun& r : runs) {
    if (!r.completed)
      throw MissingRun("run " + refinement_label(r.spec) + " did not complete: " + r.failure);
    if (r.spec.benchmark != runs.front().spec.benchmark)
      throw MissingRun("runs do not share a benchmark");
  }
  std::vector<const BenchmarkRun*> sorted;
  for (const BenchmarkRun& r : runs) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](const BenchmarkRun* a, const BenchmarkRun* b) {
    return std::pair(a->spec.n1, a->spec.n2) < std::pair(b->spec.n1, b->spec.n2);
  });
  const double ref = sorted.back()->qoi;
  std::vector<ConvergenceRow> rows;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    ConvergenceRow row{refinement_label(sorted[k]->spec), sorted[k]->qoi, std::nullopt};
    if (k + 1 < sorted.size() && ref != 0.0) row.rel_delta = (row.qoi - ref) / std::abs(ref);
    rows.push_back(row);
  }
  return rows;
}

void write_convergence_csv(const std::string& path, const std::vector<ConvergenceRow>& rows) {
  std::ofstream out(path);
  out << "refine,qoi,rel_delta\n";
  for (const ConvergenceRow& r : rows)
    out << r.refinement << ',' << format_number(r.qoi) << ','
        << (r.rel_delta ? format_number(*r.rel_delta) : std::string()) << '\n';
}

} // namespace mixfem
