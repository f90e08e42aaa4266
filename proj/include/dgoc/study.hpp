#pragma once

// Convergence studies, the DMP audit driver and the stationarity check, wired
// to a flat key=value configuration.

#include "dgoc/analysis.hpp"
#include "dgoc/assembly.hpp"
#include "dgoc/control.hpp"
#include "dgoc/lcp.hpp"
#include "dgoc/mesh.hpp"
#include "dgoc/problems.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace dgoc {

// --- parallel levels -------------------------------------------------------------

/// DGOC_THREADS, or 1 when unset or invalid.
inline int thread_budget() {
  const char* env = std::getenv("DGOC_THREADS");
  if (!env) return 1;
  try {
    return std::max(1, std::stoi(env));
  } catch (const std::exception&) {
    return 1;
  }
}

/// Runs f(0..n-1) on up to `threads` workers; the exception of each failed index is returned in place.
template <class F>
std::vector<std::exception_ptr> parallel_for(int n, int threads, F&& f) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int t = std::clamp(threads, 1, std::max(1, n));
  if (t == 1) {
    worker();
    return errors;
  }
  std::vector<std::jthread> pool;
  for (int i = 0; i < t; ++i) pool.emplace_back(worker);
  pool.clear();
  return errors;
}

// --- obstacle convergence ------------------------------------------------------------

struct ObstacleLevel {
  int n = 0;
  double h = 0.0;
  EnergyError energy;
  double l2 = 0.0;
  double l2_omega0 = 0.0;
  int iterations = 0;
  bool polished = false;
  LcpResiduals residuals;
  std::size_t active = 0;
  /// Max componentwise |min(u - g, A u - b)|.
  double complementarity = 0.0;
  double seconds = 0.0;
};

inline const Rectangle kInteriorSubdomain{0.25, 0.25, 0.75, 0.75};

inline ObstacleLevel obstacle_level(const ObstacleBenchmark& bm, int n, double eta, double tol, int max_iter) {
  const auto start = std::chrono::steady_clock::now();
  auto mesh = std::make_shared<const Mesh>(build_uniform_mesh(n, bm.domain));
  const AssembledSystem sys = make_system(mesh, eta);
  ObstacleProblem p{sys.sipg, assemble_load(*mesh, bm.load),
                    embed_conforming(interpolate_conforming(bm.obstacle, *mesh), *mesh).coefficients()};
  const ObstacleSolution sol = solve_pdas(p, tol, max_iter);
  const DGFunction uh(sol.u);
  ObstacleLevel lv;
  lv.n = n;
  lv.h = mesh->max_diameter();
  lv.energy = energy_error(bm.exact, uh, *mesh);
  lv.l2 = l2_error(bm.exact, uh, *mesh);
  const Mask omega0 = cells_in(*mesh, kInteriorSubdomain);
  lv.l2_omega0 = l2_error(bm.exact, uh, *mesh, &omega0);
  lv.iterations = sol.iterations;
  lv.polished = sol.polished;
  lv.residuals = sol.residuals;
  lv.active = sol.active_set.size();
  lv.complementarity = sol.residuals.complementarity;
  lv.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return lv;
}

inline RateTable obstacle_rate_table() {
  RateTable t;
  t.error_columns = {"err_energy", "err_h", "err_l2", "err_l2_omega0"};
  t.rate_columns = {{"eoc_energy", "err_energy"}, {"eoc_l2", "err_l2"}, {"eoc_l2_omega0", "err_l2_omega0"}};
  return t;
}

inline void add_obstacle_row(RateTable& t, const ObstacleLevel& lv) {
  t.add_row(lv.h, lv.n,
            {{"err_energy", lv.energy.triple_norm()},
             {"err_h", lv.energy.h_norm()},
             {"err_l2", lv.l2},
             {"err_l2_omega0", lv.l2_omega0}});
}

// --- control convergence ---------------------------------------------------------------

/// ||.||_h Gram on a fine nested mesh whose jump weights on fine edges lying on coarse
/// edges use the coarse edge length, so a prolongated coarse DG function sees its own
/// mesh-size weighting.
inline SparseOperator coarse_compatible_gram(const Mesh& fine, const Mesh& coarse) {
  CellLocator locator(coarse);
  std::vector<double> scale(fine.num_edges(), 1.0);
  for (Index ei = 0; ei < fine.num_edges(); ++ei) {
    const Edge& e = fine.edges()[ei];
    const Point mid = 0.5 * (fine.vertex(e.vertices[0]) + fine.vertex(e.vertices[1]));
    const Index k = locator.find(mid);
    if (k < 0) throw std::domain_error("coarse_compatible_gram: meshes are not nested");
    const Eigen::Vector3d l = coarse.barycentric(k, mid);
    Eigen::Index j;
    if (l.minCoeff(&j) > 1e-10) continue;
    const auto& c = coarse.cell(k);
    const double hc = (coarse.vertex(c[(j + 1) % 3]) - coarse.vertex(c[(j + 2) % 3])).norm();
    scale[ei] = e.length / hc;
  }
  return assemble_energy_gram(fine, &scale);
}

struct ControlLevel {
  int n = 0;
  double h = 0.0;
  double err_control = 0.0;
  double err_state = 0.0;
  int iterations = 0;
  double objective = 0.0;
  ResidualReport report;
  std::size_t strictly_active = 0;
  std::size_t biactive = 0;
  double seconds = 0.0;
};

struct ControlSettings {
  double eta = 10.0;
  double theta = 0.5;
  double tol = 1e-10;
  int max_iter = 2000;
  ControlOptions options;
};

inline ControlLevel control_level(const ControlBenchmark& bm, int n, const ControlSettings& s,
                                  const ReferenceSolution& ref) {
  const auto start = std::chrono::steady_clock::now();
  auto mesh = std::make_shared<const Mesh>(build_uniform_mesh(n, bm.domain));
  const ControlProblem cp = bm.make_problem(mesh, s.eta, s.options);
  const ControlResult res = solve_control_fixed_point(cp, Vector::Zero(cp.num_dofs()), s.theta, s.tol, s.max_iter);
  const Mesh& fine = *ref.mesh;
  const Vector dz = prolongate(DGFunction(res.point.z), *mesh, fine).coefficients() - ref.z;
  const Vector du = prolongate(DGFunction(res.point.u), *mesh, fine).coefficients() - ref.u;
  const SparseOperator mass = assemble_mass(fine);
  const SparseOperator gram = coarse_compatible_gram(fine, *mesh);
  ControlLevel lv;
  lv.n = n;
  lv.h = mesh->max_diameter();
  lv.err_control = std::sqrt(std::max(0.0, mass.bilinear(dz, dz)));
  lv.err_state = std::sqrt(std::max(0.0, gram.bilinear(du, du)));
  lv.iterations = res.point.iterations;
  lv.objective = res.point.objective;
  lv.report = res.report;
  lv.strictly_active = res.point.strictly_active_set.size();
  lv.biactive = res.point.biactive_set.size();
  lv.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return lv;
}

inline RateTable control_rate_table() {
  RateTable t;
  t.error_columns = {"err_control_l2", "err_state_h"};
  t.rate_columns = {{"eoc_control", "err_control_l2"}, {"eoc_state", "err_state_h"}};
  return t;
}

inline void add_control_row(RateTable& t, const ControlLevel& lv) {
  t.add_row(lv.h, lv.n, {{"err_control_l2", lv.err_control}, {"err_state_h", lv.err_state}});
}

// --- DMP audit driver -------------------------------------------------------------------

/// Unconstrained SIPG solve: f = 1 with homogeneous data ("poisson"), or f = 0 with
/// boundary data x^2 - y^2 imposed through the penalty terms ("harmonic").
inline DGFunction dmp_test_solution(const AssembledSystem& sys, const std::string& source) {
  const Mesh& mesh = *sys.mesh;
  Vector b;
  if (source == "poisson") {
    b = assemble_load(mesh, ScalarField::constant(1.0));
  } else if (source == "harmonic") {
    const ScalarField gd([](const Point& x) { return x.x() * x.x() - x.y() * x.y(); });
    b = assemble_dirichlet_load(mesh, gd, sys.eta);
  } else {
    throw std::invalid_argument("unknown DMP source '" + source + "' (expected poisson or harmonic)");
  }
  return DGFunction(SpdFactorization(sys.sipg->matrix()).solve(b));
}

// --- configuration ---------------------------------------------------------------------

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StudyConfig {
  std::string benchmark;  // tensor-obstacle | control; empty selects the command default
  std::vector<int> levels{8, 16, 32, 64};
  double eta = 10.0;
  double nu = 1e-2;
  Matching matching = Matching::global;
  double lcp_tol = 1e-11;
  int lcp_max_iter = 500;
  double control_tol = 1e-10;
  double theta = 0.5;
  int max_iter = 2000;
  double scale = kTensorDefaultScale;
  int n_ref = 0;  // 0: four times the finest level
  std::string out = "dgoc_out";
  std::string reference_dir;  // empty: <out>/reference
  std::string mesh;           // dmp-audit external mesh file
  std::string source = "poisson";

  void validate() const {
    if (levels.empty()) throw ConfigError("levels must not be empty");
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (levels[i] < 1) throw ConfigError("levels must be positive");
      if (i > 0 && levels[i] <= levels[i - 1]) throw ConfigError("levels must be strictly increasing");
    }
    for (const auto& [name, v] : {std::pair{"eta", eta}, std::pair{"nu", nu}, std::pair{"lcp_tol", lcp_tol},
                                  std::pair{"control_tol", control_tol}, std::pair{"scale", scale}})
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
    if (!(theta > 0.0 && theta <= 1.0)) throw ConfigError("theta must lie in (0, 1]");
    if (lcp_max_iter < 1 || max_iter < 1) throw ConfigError("iteration limits must be positive");
    if (n_ref < 0) throw ConfigError("n_ref must be non-negative");
    if (!benchmark.empty() && benchmark != "tensor-obstacle" && benchmark != "control")
      throw ConfigError("unknown benchmark '" + benchmark + "'");
    if (source != "poisson" && source != "harmonic") throw ConfigError("source must be poisson or harmonic");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["benchmark"] = benchmark;
    j["levels"] = levels;
    j["eta"] = eta;
    j["nu"] = nu;
    j["matching"] = to_string(matching);
    j["lcp_tol"] = lcp_tol;
    j["lcp_max_iter"] = lcp_max_iter;
    j["control_tol"] = control_tol;
    j["theta"] = theta;
    j["max_iter"] = max_iter;
    j["scale"] = scale;
    j["n_ref"] = n_ref;
    if (!mesh.empty()) j["mesh"] = mesh;
    j["source"] = source;
    return j;
  }
};

inline std::vector<int> parse_levels(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    std::size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(item, &pos);
    } catch (const std::exception&) {
      throw ConfigError("invalid level '" + item + "'");
    }
    if (pos != item.size()) throw ConfigError("invalid level '" + item + "'");
    out.push_back(v);
  }
  return out;
}

/// Applies one key=value setting.
inline void apply_setting(StudyConfig& c, const std::string& key, const std::string& value) {
  auto number = [&](const std::string& v) {
    std::size_t pos = 0;
    double d = 0.0;
    try {
      d = std::stod(v, &pos);
    } catch (const std::exception&) {
      throw ConfigError("invalid number for " + key + ": '" + v + "'");
    }
    if (pos != v.size()) throw ConfigError("invalid number for " + key + ": '" + v + "'");
    return d;
  };
  auto integer = [&](const std::string& v) {
    const double d = number(v);
    if (d != std::floor(d)) throw ConfigError("expected an integer for " + key);
    return static_cast<int>(d);
  };
  if (key == "benchmark") c.benchmark = value;
  else if (key == "levels") c.levels = parse_levels(value);
  else if (key == "eta") c.eta = number(value);
  else if (key == "nu") c.nu = number(value);
  else if (key == "matching") {
    try {
      c.matching = parse_matching(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "lcp_tol") c.lcp_tol = number(value);
  else if (key == "lcp_max_iter") c.lcp_max_iter = integer(value);
  else if (key == "control_tol") c.control_tol = number(value);
  else if (key == "theta") c.theta = number(value);
  else if (key == "max_iter") c.max_iter = integer(value);
  else if (key == "scale") c.scale = number(value);
  else if (key == "n_ref") c.n_ref = integer(value);
  else if (key == "out") c.out = value;
  else if (key == "reference_dir") c.reference_dir = value;
  else if (key == "mesh") c.mesh = value;
  else if (key == "source") c.source = value;
  else throw ConfigError("unknown config key '" + key + "'");
}

/// Flat key=value lines; '#' starts a comment.
inline void apply_config_text(StudyConfig& c, const std::string& text) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    apply_setting(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

inline void apply_config_file(StudyConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  apply_config_text(c, os.str());
}

// --- run ---------------------------------------------------------------------------------

enum class Command { obstacle_conv, control_conv, dmp_audit, stationarity_check };

inline Command parse_command(const std::string& s) {
  if (s == "obstacle-conv") return Command::obstacle_conv;
  if (s == "control-conv") return Command::control_conv;
  if (s == "dmp-audit") return Command::dmp_audit;
  if (s == "stationarity-check") return Command::stationarity_check;
  throw ConfigError("unknown command '" + s + "'");
}

inline const char* to_string(Command c) {
  switch (c) {
    case Command::obstacle_conv: return "obstacle-conv";
    case Command::control_conv: return "control-conv";
    case Command::dmp_audit: return "dmp-audit";
    case Command::stationarity_check: return "stationarity-check";
  }
  return "";
}

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitSolverFailure = 2;
inline constexpr int kExitConfigError = 3;

namespace detail {

inline void write_json(const std::filesystem::path& p, const nlohmann::ordered_json& j) {
  write_file(p, j.dump(2) + "\n");
}

inline std::string artifact_stem(Command cmd, const StudyConfig& c) {
  switch (cmd) {
    case Command::obstacle_conv: return "obstacle_conv";
    case Command::control_conv: return std::string("control_conv_") + to_string(c.matching);
    case Command::dmp_audit: return "dmp_audit";
    case Command::stationarity_check: return std::string("stationarity_") + to_string(c.matching);
  }
  return "out";
}

inline std::string table_csv(const RateTable& t) {
  std::ostringstream os;
  t.write_csv(os);
  return os.str();
}

inline ControlBenchmark configured_control_benchmark(const StudyConfig& c) {
  ControlBenchmark bm = control_benchmark(c.matching, c.levels.back());
  bm.nu = c.nu;
  if (c.nu != 1e-2) bm.id += "-nu" + std::to_string(c.nu);
  if (c.n_ref > 0) bm.schedule.n_ref = c.n_ref;
  bm.schedule.eta = c.eta;
  bm.schedule.theta = c.theta;
  bm.schedule.tol = c.control_tol;
  bm.schedule.max_iter = c.max_iter;
  return bm;
}

inline ControlSettings control_settings(const StudyConfig& c) {
  ControlSettings s;
  s.eta = c.eta;
  s.theta = c.theta;
  s.tol = c.control_tol;
  s.max_iter = c.max_iter;
  s.options.lcp_tol = c.lcp_tol;
  s.options.lcp_max_iter = c.lcp_max_iter;
  return s;
}

/// Checks the command/benchmark pairing and fills the default benchmark.
inline StudyConfig resolve(StudyConfig c, Command cmd) {
  c.validate();
  const std::string expected = cmd == Command::obstacle_conv ? "tensor-obstacle"
                               : cmd == Command::dmp_audit   ? c.benchmark
                                                             : "control";
  if (c.benchmark.empty()) c.benchmark = expected;
  if (cmd != Command::dmp_audit && c.benchmark != expected)
    throw ConfigError(std::string(to_string(cmd)) + " requires benchmark " + expected);
  if (cmd == Command::obstacle_conv)
    for (int n : c.levels)
      if (n % 8 != 0) throw ConfigError("obstacle-conv levels must be multiples of 8 so the contact set is resolved");
  if (cmd == Command::control_conv) {
    const int n_ref = c.n_ref > 0 ? c.n_ref : 4 * c.levels.back();
    for (int n : c.levels) {
      if (n_ref % n != 0 || n_ref <= n) throw ConfigError("n_ref must be a proper multiple of every level");
      if (c.matching == Matching::local && n % 4 != 0)
        throw ConfigError("local matching needs levels divisible by 4");
    }
  }
  return c;
}

}  // namespace detail

/// Runs one command and writes <out>/<stem>.json (plus .csv for rate studies).
/// Returns 0 on success, 2 on solver failure, 3 on invalid configuration.
inline int run(const StudyConfig& config, Command cmd, std::ostream& log) {
  StudyConfig c;
  try {
    c = detail::resolve(config, cmd);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  const std::filesystem::path out(c.out);
  try {
    std::filesystem::create_directories(out);
  } catch (const std::exception& e) {
    log << "config error: cannot create output directory " << c.out << ": " << e.what() << "\n";
    return kExitConfigError;
  }
  const std::string stem = detail::artifact_stem(cmd, c);
  nlohmann::ordered_json doc;
  doc["command"] = to_string(cmd);
  doc["config"] = c.to_json();

  auto fail = [&](const std::string& msg, const nlohmann::ordered_json& partial) {
    doc["status"] = "failed";
    doc["error"] = msg;
    doc["partial"] = partial;
    try {
      detail::write_json(out / (stem + ".json"), doc);
    } catch (const std::exception& e) {
      log << "could not write failure report: " << e.what() << "\n";
    }
    log << "failed: " << msg << "\n";
    return kExitSolverFailure;
  };

  const int threads = thread_budget();
  try {
    switch (cmd) {
      case Command::obstacle_conv: {
        const ObstacleBenchmark bm = tensor_obstacle_benchmark(c.scale);
        std::vector<std::optional<ObstacleLevel>> results(c.levels.size());
        const auto errors = parallel_for(static_cast<int>(c.levels.size()), threads, [&](int i) {
          results[i] = obstacle_level(bm, c.levels[i], c.eta, c.lcp_tol, c.lcp_max_iter);
        });
        RateTable t = obstacle_rate_table();
        t.metadata = {{"benchmark", c.benchmark}, {"description", bm.description}, {"eta", c.eta}};
        nlohmann::ordered_json solver = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < results.size(); ++i) {
          if (errors[i]) {
            t.compute_rates();
            try {
              std::rethrow_exception(errors[i]);
            } catch (const std::exception& e) {
              return fail("level n=" + std::to_string(c.levels[i]) + ": " + e.what(), t.to_json());
            }
          }
          const ObstacleLevel& lv = *results[i];
          add_obstacle_row(t, lv);
          solver.push_back({{"n", lv.n},
                            {"pdas_iterations", lv.iterations},
                            {"polished", lv.polished},
                            {"active_nodes", lv.active},
                            {"complementarity", lv.complementarity}});
          log << "obstacle n=" << lv.n << " err_energy=" << lv.energy.triple_norm() << " iterations=" << lv.iterations
              << " (" << lv.seconds << " s)\n";
        }
        t.compute_rates();
        write_file(out / (stem + ".csv"), detail::table_csv(t));
        doc["status"] = "ok";
        doc["table"] = t.to_json();
        doc["solver"] = solver;
        break;
      }
      case Command::control_conv: {
        const ControlBenchmark bm = detail::configured_control_benchmark(c);
        const std::filesystem::path ref_dir = c.reference_dir.empty() ? out / "reference" : std::filesystem::path(c.reference_dir);
        log << "reference n=" << bm.schedule.n_ref << " (" << ref_dir.string() << ")\n";
        const ReferenceSolution ref = obtain_reference(bm, ref_dir);
        const ControlSettings settings = detail::control_settings(c);
        std::vector<std::optional<ControlLevel>> results(c.levels.size());
        const auto errors = parallel_for(static_cast<int>(c.levels.size()), threads, [&](int i) {
          results[i] = control_level(bm, c.levels[i], settings, ref);
        });
        RateTable t = control_rate_table();
        t.metadata = {{"benchmark", bm.id},
                      {"eta", c.eta},
                      {"nu", c.nu},
                      {"matching", to_string(c.matching)},
                      {"reference", bm.schedule.to_json()},
                      {"reference_iterations", ref.iterations},
                      {"reference_objective", ref.objective},
                      {"reference_strictly_active", ref.strictly_active}};
        nlohmann::ordered_json solver = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < results.size(); ++i) {
          if (errors[i]) {
            t.compute_rates();
            try {
              std::rethrow_exception(errors[i]);
            } catch (const std::exception& e) {
              return fail("level n=" + std::to_string(c.levels[i]) + ": " + e.what(), t.to_json());
            }
          }
          const ControlLevel& lv = *results[i];
          add_control_row(t, lv);
          solver.push_back({{"n", lv.n},
                            {"iterations", lv.iterations},
                            {"objective", lv.objective},
                            {"strictly_active", lv.strictly_active},
                            {"biactive", lv.biactive},
                            {"residuals", lv.report.to_json()}});
          log << "control n=" << lv.n << " err_control=" << lv.err_control << " err_state=" << lv.err_state
              << " iterations=" << lv.iterations << " (" << lv.seconds << " s)\n";
        }
        t.compute_rates();
        write_file(out / (stem + ".csv"), detail::table_csv(t));
        doc["status"] = "ok";
        doc["table"] = t.to_json();
        doc["solver"] = solver;
        break;
      }
      case Command::dmp_audit: {
        std::shared_ptr<const Mesh> mesh;
        try {
          if (c.mesh.empty()) {
            mesh = std::make_shared<const Mesh>(build_uniform_mesh(c.levels.front()));
          } else {
            std::ifstream in(c.mesh);
            if (!in) throw std::runtime_error("cannot read mesh file " + c.mesh);
            mesh = std::make_shared<const Mesh>(read_mesh(in));
          }
        } catch (const std::exception& e) {
          log << "config error: " << e.what() << "\n";
          return kExitConfigError;
        }
        const AssembledSystem sys = make_system(mesh, c.eta);
        const DGFunction v = dmp_test_solution(sys, c.source);
        const DmpReport rep = dmp_audit(v, sys);
        doc["status"] = "ok";
        doc["mesh"] = {{"vertices", mesh->num_vertices()}, {"cells", mesh->num_cells()}};
        doc["report"] = rep.to_json();
        log << "dmp audit: " << rep.extrema.size() << " strict extrema, " << rep.violations.size() << " violations\n";
        break;
      }
      case Command::stationarity_check: {
        const ControlBenchmark bm = detail::configured_control_benchmark(c);
        const ControlProblem cp = bm.make_problem(c.levels.back(), c.eta, detail::control_settings(c).options);
        const ControlResult res =
            solve_control_fixed_point(cp, Vector::Zero(cp.num_dofs()), c.theta, c.control_tol, c.max_iter);
        const double structural = (res.point.z + res.point.p / cp.nu()).lpNorm<Eigen::Infinity>();
        doc["status"] = "ok";
        doc["n"] = c.levels.back();
        doc["iterations"] = res.point.iterations;
        doc["objective"] = res.point.objective;
        doc["strictly_active"] = res.point.strictly_active_set.size();
        doc["biactive"] = res.point.biactive_set.size();
        doc["control_identity"] = structural;
        doc["residuals"] = res.report.to_json();
        log << "stationarity n=" << c.levels.back() << " max residual=" << res.report.max() << "\n";
        break;
      }
    }
    detail::write_json(out / (stem + ".json"), doc);
  } catch (const ControlSolverError& e) {
    nlohmann::ordered_json partial = {{"objective_trace", e.objective_trace()}, {"oscillation", e.oscillation()}};
    return fail(e.what(), partial);
  } catch (const std::exception& e) {
    return fail(e.what(), nullptr);
  }
  return kExitSuccess;
}

}  // namespace dgoc
