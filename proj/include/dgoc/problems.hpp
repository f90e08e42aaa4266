#pragma once

// Benchmarks: a tensor-product obstacle problem with a closed-form solution, and
// the tracking-type control benchmark whose fine-mesh reference is persisted to disk.

#include "dgoc/analysis.hpp"
#include "dgoc/assembly.hpp"
#include "dgoc/control.hpp"
#include "dgoc/dgspace.hpp"
#include "dgoc/mesh.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

namespace dgoc {

// --- tensor obstacle benchmark ----------------------------------------------------

/// w on [0,1]: (t(3/8 - t))^2, then 0 on [3/8, 5/8], then ((t - 5/8)(1 - t))^2.
struct TensorProfile {
  static constexpr double a = 3.0 / 8.0;
  static constexpr double b = 5.0 / 8.0;

  /// Values of (w, w', w'').
  static Eigen::Vector3d eval(double t) {
    double q, dq;
    if (t <= a) {
      q = t * (a - t);
      dq = a - 2.0 * t;
    } else if (t >= b) {
      q = (t - b) * (1.0 - t);
      dq = (1.0 + b) - 2.0 * t;
    } else {
      return Eigen::Vector3d::Zero();
    }
    return {q * q, 2.0 * q * dq, 2.0 * dq * dq - 4.0 * q};
  }
  static double w(double t) { return eval(t)[0]; }
};

struct ObstacleBenchmark {
  Rectangle domain = kUnitSquare;
  ScalarField obstacle;
  ScalarField load;
  ScalarField exact;
  ScalarField multiplier;
  std::string description;
};

inline constexpr double kTensorDefaultScale = 65536.0 / 81.0;

inline ObstacleBenchmark tensor_obstacle_benchmark(double scale = kTensorDefaultScale) {
  if (!(scale > 0.0)) throw std::invalid_argument("tensor_obstacle_benchmark: scale must be positive");
  using P = TensorProfile;
  ObstacleBenchmark bm;
  bm.obstacle = ScalarField::constant(0.0);
  bm.exact = ScalarField([scale](const Point& x) { return scale * P::w(x.x()) * P::w(x.y()); });
  bm.exact.gradient = [scale](const Point& x) {
    const Eigen::Vector3d wx = P::eval(x.x()), wy = P::eval(x.y());
    return Point(scale * wx[1] * wy[0], scale * wx[0] * wy[1]);
  };
  bm.exact.hessian = [scale](const Point& x) {
    const Eigen::Vector3d wx = P::eval(x.x()), wy = P::eval(x.y());
    Eigen::Matrix2d h;
    h << wx[2] * wy[0], wx[1] * wy[1], wx[1] * wy[1], wx[0] * wy[2];
    return Eigen::Matrix2d(scale * h);
  };
  auto laplacian = [scale](const Point& x) {
    const Eigen::Vector3d wx = P::eval(x.x()), wy = P::eval(x.y());
    return scale * (wx[2] * wy[0] + wx[0] * wy[2]);
  };
  auto positive = [](const Point& x) { return P::w(x.x()) > 0.0 && P::w(x.y()) > 0.0; };
  bm.load = ScalarField([=](const Point& x) { return positive(x) ? -laplacian(x) : -1.0; });
  bm.multiplier = ScalarField([=](const Point& x) { return positive(x) ? 0.0 : 1.0; });
  std::ostringstream d;
  d << std::setprecision(17) << "tensor obstacle, u = s w(x) w(y), g = 0, s = " << scale;
  bm.description = d.str();
  return bm;
}

/// True when (x, y) lies in the exact contact set {w(x) = 0 or w(y) = 0}.
inline bool in_tensor_contact_set(const Point& x) { return TensorProfile::w(x.x()) == 0.0 || TensorProfile::w(x.y()) == 0.0; }

// --- control benchmark -----------------------------------------------------------

struct ReferenceSchedule {
  int n_ref = 256;
  double eta = 10.0;
  double theta = 0.5;
  double tol = 1e-10;
  int max_iter = 2000;
  std::string initial_guess = "zero";

  bool operator==(const ReferenceSchedule&) const = default;

  nlohmann::ordered_json to_json() const {
    return {{"n_ref", n_ref}, {"eta", eta},           {"theta", theta},
            {"tol", tol},     {"max_iter", max_iter}, {"initial_guess", initial_guess}};
  }
  static ReferenceSchedule from_json(const nlohmann::json& j) {
    ReferenceSchedule s;
    s.n_ref = j.at("n_ref").get<int>();
    s.eta = j.at("eta").get<double>();
    s.theta = j.at("theta").get<double>();
    s.tol = j.at("tol").get<double>();
    s.max_iter = j.at("max_iter").get<int>();
    s.initial_guess = j.at("initial_guess").get<std::string>();
    return s;
  }
};

struct ControlBenchmark {
  std::string id;
  Rectangle domain = kUnitSquare;
  ScalarField obstacle;
  ScalarField desired_state;
  double nu = 1e-2;
  Matching matching = Matching::global;
  Rectangle omega0{0.25, 0.25, 0.75, 0.75};
  ReferenceSchedule schedule;

  Mask omega0_cells(const Mesh& mesh) const { return cells_in(mesh, omega0); }

  ControlProblem make_problem(std::shared_ptr<const Mesh> mesh, double eta, ControlOptions options = {}) const {
    Mask region = matching == Matching::local ? omega0_cells(*mesh) : Mask{};
    return ControlProblem(make_system(std::move(mesh), eta), obstacle, desired_state, nu, matching, std::move(region),
                          options);
  }
  ControlProblem make_problem(int n, double eta, ControlOptions options = {}) const {
    return make_problem(std::make_shared<const Mesh>(build_uniform_mesh(n, domain)), eta, options);
  }
};

inline ControlBenchmark control_benchmark(Matching mode, int n_max = 64) {
  ControlBenchmark bm;
  bm.id = std::string("control-") + to_string(mode);
  bm.matching = mode;
  bm.obstacle = ScalarField([](const Point& x) {
    const double dx = x.x() - 0.5, dy = x.y() - 0.5;
    return 0.05 - dx * dx - dy * dy;
  });
  bm.obstacle.gradient = [](const Point& x) { return Point(-2.0 * (x.x() - 0.5), -2.0 * (x.y() - 0.5)); };
  bm.obstacle.hessian = [](const Point&) { return Eigen::Matrix2d(-2.0 * Eigen::Matrix2d::Identity()); };
  constexpr double pi = std::numbers::pi;
  bm.desired_state = ScalarField([](const Point& x) { return std::sin(pi * x.x()) * std::sin(pi * x.y()); });
  bm.desired_state.gradient = [](const Point& x) {
    return Point(pi * std::cos(pi * x.x()) * std::sin(pi * x.y()), pi * std::sin(pi * x.x()) * std::cos(pi * x.y()));
  };
  bm.desired_state.hessian = [](const Point& x) {
    const double sx = std::sin(pi * x.x()), cx = std::cos(pi * x.x()), sy = std::sin(pi * x.y()), cy = std::cos(pi * x.y());
    Eigen::Matrix2d h;
    h << -sx * sy, cx * cy, cx * cy, -sx * sy;
    return Eigen::Matrix2d(pi * pi * h);
  };
  bm.schedule.n_ref = 4 * n_max;
  return bm;
}

// --- reference persistence ---------------------------------------------------------

/// Hex SHA-1 of "blob <size>\0<content>", the object id git assigns to a file.
inline std::string git_blob_hash(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), content.data(), content.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md, &len) != 1)
    throw std::runtime_error("git_blob_hash: digest failed");
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(md[i]);
  return os.str();
}

inline std::string vector_to_csv(const Vector& v) {
  std::ostringstream os;
  os << std::setprecision(17) << "index,value\n";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << i << "," << v[i] << "\n";
  return os.str();
}

inline Vector vector_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "index,value") throw std::runtime_error("vector_from_csv: bad header");
  std::vector<double> values;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("vector_from_csv: malformed row");
    if (std::stoll(line.substr(0, comma)) != static_cast<long long>(values.size()))
      throw std::runtime_error("vector_from_csv: indices out of order");
    values.push_back(std::stod(line.substr(comma + 1)));
  }
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + p.string());
}

struct ReferenceSolution {
  std::string benchmark_id;
  Matching matching = Matching::global;
  double nu = 0.0;
  ReferenceSchedule schedule;
  std::shared_ptr<const Mesh> mesh;
  Vector z, u, p;
  int iterations = 0;
  double objective = 0.0;
  ResidualReport residuals;
  std::size_t strictly_active = 0;
  std::size_t biactive = 0;
};

inline std::string reference_stem(const std::string& id, const ReferenceSchedule& s) {
  return "reference_" + id + "_n" + std::to_string(s.n_ref);
}

inline ReferenceSolution compute_reference(const ControlBenchmark& bm) {
  const auto& s = bm.schedule;
  if (s.initial_guess != "zero") throw std::invalid_argument("compute_reference: only the zero initial guess is supported");
  auto mesh = std::make_shared<const Mesh>(build_uniform_mesh(s.n_ref, bm.domain));
  const ControlProblem cp = bm.make_problem(mesh, s.eta);
  const ControlResult res = solve_control_fixed_point(cp, Vector::Zero(cp.num_dofs()), s.theta, s.tol, s.max_iter);
  ReferenceSolution ref;
  ref.benchmark_id = bm.id;
  ref.matching = bm.matching;
  ref.nu = bm.nu;
  ref.schedule = s;
  ref.mesh = mesh;
  ref.z = res.point.z;
  ref.u = res.point.u;
  ref.p = res.point.p;
  ref.iterations = res.point.iterations;
  ref.objective = res.point.objective;
  ref.residuals = res.report;
  ref.strictly_active = res.point.strictly_active_set.size();
  ref.biactive = res.point.biactive_set.size();
  return ref;
}

inline void save_reference(const ReferenceSolution& ref, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string stem = reference_stem(ref.benchmark_id, ref.schedule);
  nlohmann::ordered_json files = nlohmann::ordered_json::object();
  for (const auto& [name, v] : {std::pair{"z", &ref.z}, std::pair{"u", &ref.u}, std::pair{"p", &ref.p}}) {
    const std::string csv = vector_to_csv(*v);
    const std::string file = stem + "_" + name + ".csv";
    write_file(dir / file, csv);
    files[name] = {{"file", file}, {"git_blob_sha1", git_blob_hash(csv)}};
  }
  nlohmann::ordered_json j;
  j["benchmark"] = ref.benchmark_id;
  j["matching"] = to_string(ref.matching);
  j["nu"] = ref.nu;
  j["schedule"] = ref.schedule.to_json();
  j["iterations"] = ref.iterations;
  j["objective"] = ref.objective;
  j["strictly_active"] = ref.strictly_active;
  j["biactive"] = ref.biactive;
  j["residuals"] = ref.residuals.to_json();
  j["files"] = files;
  write_file(dir / (stem + ".json"), j.dump(2) + "\n");
}

/// Loads a stored reference when its sidecar records the same benchmark and schedule
/// and every file hash matches; returns nullopt otherwise.
inline std::optional<ReferenceSolution> load_reference(const ControlBenchmark& bm, const std::filesystem::path& dir) {
  const std::string stem = reference_stem(bm.id, bm.schedule);
  const auto sidecar = dir / (stem + ".json");
  if (!std::filesystem::exists(sidecar)) return std::nullopt;
  try {
    const nlohmann::json j = nlohmann::json::parse(read_file(sidecar));
    if (j.at("benchmark") != bm.id || j.at("matching") != to_string(bm.matching) || j.at("nu").get<double>() != bm.nu ||
        !(ReferenceSchedule::from_json(j.at("schedule")) == bm.schedule))
      return std::nullopt;
    ReferenceSolution ref;
    ref.benchmark_id = bm.id;
    ref.matching = bm.matching;
    ref.nu = bm.nu;
    ref.schedule = bm.schedule;
    ref.iterations = j.at("iterations").get<int>();
    ref.objective = j.at("objective").get<double>();
    ref.strictly_active = j.at("strictly_active").get<std::size_t>();
    ref.biactive = j.at("biactive").get<std::size_t>();
    for (const auto& [name, target] : {std::pair{"z", &ref.z}, std::pair{"u", &ref.u}, std::pair{"p", &ref.p}}) {
      const auto& f = j.at("files").at(name);
      const std::string csv = read_file(dir / f.at("file").get<std::string>());
      if (git_blob_hash(csv) != f.at("git_blob_sha1").get<std::string>()) return std::nullopt;
      *target = vector_from_csv(csv);
    }
    const auto& r = j.at("residuals");
    ref.residuals.state_residual = r.at("state_residual");
    ref.residuals.adjoint_residual = r.at("adjoint_residual");
    ref.residuals.complementarity_residual = r.at("complementarity_residual");
    ref.residuals.sign_violation_lambda = r.at("sign_violation_lambda");
    ref.residuals.sign_violation_p = r.at("sign_violation_p");
    ref.residuals.gradient_residual = r.at("gradient_residual");
    ref.mesh = std::make_shared<const Mesh>(build_uniform_mesh(bm.schedule.n_ref, bm.domain));
    const Index n = ref.mesh->num_dofs();
    if (ref.z.size() != n || ref.u.size() != n || ref.p.size() != n) return std::nullopt;
    return ref;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

/// Cached reference: loaded when a matching one exists in `dir`, computed and stored otherwise.
inline ReferenceSolution obtain_reference(const ControlBenchmark& bm, const std::filesystem::path& dir) {
  if (auto ref = load_reference(bm, dir)) return *std::move(ref);
  ReferenceSolution ref = compute_reference(bm);
  save_reference(ref, dir);
  return ref;
}

}  // namespace dgoc
