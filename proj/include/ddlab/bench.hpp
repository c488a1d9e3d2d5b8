#pragma once

// Scenario runner: FE reference, NN and data-driven solves, relative L2
// errors, timing against the reference solve, and the size x noise matrix.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ddlab/dataset.hpp"
#include "ddlab/ddcm.hpp"
#include "ddlab/fem.hpp"
#include "ddlab/nn.hpp"
#include "ddlab/nn_train.hpp"

namespace ddlab {

enum class Problem { Cook, Punch };
enum class Method { FE, NNEnergy, NNStress, DD, DDiso, DDLC, DDLCiso };

inline std::string problem_name(Problem p) { return p == Problem::Cook ? "cook" : "punch"; }

inline Problem problem_from_name(std::string_view s) {
  if (s == "cook") return Problem::Cook;
  if (s == "punch") return Problem::Punch;
  throw InvalidConfig("unknown problem '" + std::string(s) + "'");
}

inline const std::vector<std::pair<Method, std::string>>& method_names() {
  static const std::vector<std::pair<Method, std::string>> names = {
      {Method::FE, "fe"},   {Method::NNEnergy, "nn_energy"}, {Method::NNStress, "nn_stress"},
      {Method::DD, "dd"},   {Method::DDiso, "ddiso"},        {Method::DDLC, "ddlc"},
      {Method::DDLCiso, "ddlciso"}};
  return names;
}

inline std::string method_name(Method m) {
  for (const auto& [k, v] : method_names())
    if (k == m) return v;
  return "?";
}

inline Method method_from_name(std::string_view s) {
  for (const auto& [k, v] : method_names())
    if (v == s) return k;
  throw InvalidConfig("unknown method '" + std::string(s) + "'");
}

inline bool is_nn(Method m) { return m == Method::NNEnergy || m == Method::NNStress; }
inline bool is_dd(Method m) { return m == Method::DD || m == Method::DDiso || m == Method::DDLC || m == Method::DDLCiso; }

inline DDVariant dd_variant(Method m) {
  switch (m) {
    case Method::DDiso: return DDVariant::DDiso;
    case Method::DDLC: return DDVariant::DDLC;
    case Method::DDLCiso: return DDVariant::DDLCiso;
    default: return DDVariant::DD;
  }
}

struct ScenarioConfig {
  Problem problem = Problem::Cook;
  std::string law = "ciarlet";  // reference law
  Method method = Method::FE;
  std::string dataset;           // path, required by nn_* and dd*
  std::string network;           // optional trained network for nn_*; skips training
  double noise = 0.0;            // multiplicative stress noise applied before subsampling
  std::size_t samples = 0;       // subsample size, 0 = every row
  std::string mesh = "modified";  // cook: "modified" or "source"
  int refinement = 0;            // > 0 overrides the default mesh resolution
  std::optional<double> load;    // N/mm; default depends on problem and law
  int load_steps = 4;
  std::uint64_t noise_seed = 1;
  std::uint64_t subsample_seed = 2;
  std::uint64_t train_seed = 3;
  TrainingConfig training{};
  DDConfig dd{};
  int timing_repeats = 1;  // median over repeated solves

  double load_value() const {
    if (load) return *load;
    if (problem == Problem::Cook) return law == "ciarlet" ? 20.0 : 0.2;
    return law == "ciarlet" ? 100.0 : 1.0;
  }

  void validate() const {
    law_from_name(law);
    if ((is_nn(method) || is_dd(method)) && dataset.empty() && network.empty())
      throw InvalidConfig(method_name(method) + " needs a dataset");
    if (!(noise >= 0.0)) throw InvalidConfig("noise must be >= 0");
    if (load_steps < 1 || timing_repeats < 1) throw InvalidConfig("load_steps and timing_repeats must be >= 1");
    if (problem == Problem::Cook && mesh != "modified" && mesh != "source")
      throw InvalidConfig("cook mesh must be 'modified' or 'source'");
  }
};

inline Mesh scenario_mesh(const ScenarioConfig& c) {
  if (c.problem == Problem::Punch) return c.refinement > 0 ? punch_mesh(c.refinement) : punch_mesh(PunchMeshOptions{});
  if (c.refinement > 0) return cook_mesh(c.refinement);
  return cook_mesh(c.mesh == "source" ? CookMeshOptions::source() : CookMeshOptions::modified());
}

inline BoundaryConditions scenario_bcs(const ScenarioConfig& c) {
  return c.problem == Problem::Cook ? cook_bcs(c.load_value()) : punch_bcs(c.load_value());
}

// ---------------------------------------------------------------------------
// errors

/// sqrt(sum_i w_i |f_i - r_i|^2 / sum_i w_i |r_i|^2); rows are points.
inline double relative_l2(const Eigen::MatrixXd& field, const Eigen::MatrixXd& ref, const std::vector<double>& w) {
  if (field.rows() != ref.rows() || field.cols() != ref.cols() || static_cast<std::size_t>(ref.rows()) != w.size())
    throw InvalidConfig("relative_l2: fields live on different discretisations");
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < ref.rows(); ++i) {
    num += w[static_cast<std::size_t>(i)] * (field.row(i) - ref.row(i)).squaredNorm();
    den += w[static_cast<std::size_t>(i)] * ref.row(i).squaredNorm();
  }
  if (!(den > 0.0)) throw ZeroReference("reference field has zero norm");
  return std::sqrt(num / den);
}

inline Eigen::MatrixXd nodal_matrix(const Vector& u) {
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>>(u.data(), u.size() / 2, 2);
}

inline Eigen::MatrixXd tensor_matrix(const std::vector<SymTensor2>& t) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.size()), 3);
  for (std::size_t i = 0; i < t.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = t[i].mandel().transpose();
  return m;
}

/// Nodal displacement table; its hash identifies a solution.
inline std::string displacement_csv(const Mesh& m, const Vector& u) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << "node,x,y,ux,uy\n" << std::setprecision(17);
  for (std::size_t n = 0; n < m.num_nodes(); ++n)
    os << n << ',' << m.nodes[n].x() << ',' << m.nodes[n].y() << ',' << u[2 * static_cast<Eigen::Index>(n)] << ','
       << u[2 * static_cast<Eigen::Index>(n) + 1] << '\n';
  return os.str();
}

inline std::string element_csv(const std::vector<SymTensor2>& E, const std::vector<SymTensor2>& S) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << "element,E11,E22,E12,S11,S22,S12\n" << std::setprecision(17);
  for (std::size_t e = 0; e < E.size(); ++e)
    os << e << ',' << E[e].a11 << ',' << E[e].a22 << ',' << E[e].a12 << ',' << S[e].a11 << ',' << S[e].a22 << ','
       << S[e].a12 << '\n';
  return os.str();
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string scenario_key(const ScenarioConfig& c) {
  std::ostringstream os;
  os << problem_name(c.problem) << '|' << c.law << '|' << c.dataset << '|' << fmt(c.noise) << '|' << c.samples << '|'
     << c.mesh << '|' << c.refinement << '|' << fmt(c.load_value()) << '|' << c.load_steps;
  return os.str();
}

struct ErrorReport {
  ScenarioConfig config;
  std::string status = "ok";  // ok | nonconverged | diverged | failed
  std::string message;
  double err_u = NAN, err_E = NAN, err_S = NAN;
  Point2 tip = Point2::Zero(), tip_ref = Point2::Zero();
  double tip_err = NAN;
  double seconds = 0.0, fe_seconds = 0.0, time_ratio = NAN;
  int iterations = 0;  // Newton or outer data-driven iterations
  std::string solution_hash, reference_hash;
  std::string key;  // scenario key; reports are comparable when keys agree

  Vector u;
  std::vector<SymTensor2> E, S;
  ConvergenceLog log;
  std::optional<TrainingReport> training;
};

/// FE solution with the analytic law; shared by every method of a scenario.
struct Reference {
  std::shared_ptr<const Discretization> disc;
  FESolution fe;
  double seconds = 0.0;
  std::string hash;
};

namespace detail {

template <class F>
double median_seconds(int repeats, F&& f) {
  std::vector<double> t;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

inline FESolution solve_with(const Discretization& disc, const AnalyticLaw& law, const BoundaryConditions& bcs, int steps) {
  return std::visit([&](const auto& l) { return newton_solve(disc, l, bcs, steps); }, law.variant());
}

}  // namespace detail

inline Reference make_reference(const ScenarioConfig& c) {
  Reference r;
  r.disc = std::make_shared<const Discretization>(scenario_mesh(c));
  const AnalyticLaw law = law_from_name(c.law);
  const BoundaryConditions bcs = scenario_bcs(c);
  r.seconds = detail::median_seconds(c.timing_repeats, [&] { r.fe = detail::solve_with(*r.disc, law, bcs, c.load_steps); });
  r.hash = fnv1a_hex(displacement_csv(r.disc->mesh(), r.fe.u));
  return r;
}

/// Dataset after the scenario's noise and subsampling.
inline DatasetFile scenario_dataset(const ScenarioConfig& c, const DatasetFile& source) {
  DatasetFile d = add_noise(source, c.noise, c.noise_seed);
  if (c.samples > 0 && c.samples != d.size()) d = subsample(d, c.samples, c.subsample_seed);
  return d;
}

inline TrainingConfig scenario_training(const ScenarioConfig& c) {
  TrainingConfig t = c.training;
  t.loss_kind = c.method == Method::NNEnergy ? LossKind::Energy : LossKind::Stress;
  t.seed = c.train_seed;
  return t;
}

/// Runs one method against a precomputed reference. `data` is the dataset
/// already passed through scenario_dataset(); unused for fe.
inline ErrorReport run_scenario(const ScenarioConfig& c, const Reference& ref, const DatasetFile* data,
                                const NetworkParams* trained = nullptr) {
  c.validate();
  ErrorReport rep;
  rep.config = c;
  rep.key = scenario_key(c);
  rep.fe_seconds = ref.seconds;
  rep.reference_hash = ref.hash;
  const Discretization& disc = *ref.disc;
  const BoundaryConditions bcs = scenario_bcs(c);
  const int tip = disc.mesh().node("tip");
  rep.tip_ref = nodal_displacement(ref.fe.u, tip);

  try {
    if (c.method == Method::FE) {
      const AnalyticLaw law = law_from_name(c.law);
      FESolution s;
      rep.seconds = detail::median_seconds(c.timing_repeats, [&] { s = detail::solve_with(disc, law, bcs, c.load_steps); });
      rep.u = s.u;
      rep.E = s.E;
      rep.S = s.S;
      rep.iterations = s.total_iterations;
    } else if (is_nn(c.method)) {
      NetworkParams p;
      if (trained) {
        p = *trained;
      } else if (!c.network.empty()) {
        p = load_network(c.network);
      } else {
        if (!data) throw InvalidConfig("nn methods need a dataset or a network");
        auto [best, report] = train(labeled_samples(*data), scenario_training(c));
        p = best;
        rep.training = std::move(report);
      }
      const NeuralLaw law{p};
      FESolution s;
      rep.seconds = detail::median_seconds(c.timing_repeats, [&] { s = newton_solve(disc, law, bcs, c.load_steps); });
      rep.u = s.u;
      rep.E = s.E;
      rep.S = s.S;
      rep.iterations = s.total_iterations;
    } else {
      if (!data) throw InvalidConfig("data-driven methods need a dataset");
      MaterialDatabase db;
      db.points = data->points;
      db.noise = data->header.noise;
      db.seed = data->header.seed;
      DDConfig cfg = c.dd;
      cfg.variant = dd_variant(c.method);
      cfg.load_steps = c.load_steps;
      DDResult r;
      rep.seconds = detail::median_seconds(c.timing_repeats, [&] { r = dd_solve(disc, bcs, db, cfg); });
      rep.status = status_name(r.status);
      rep.message = r.message;
      rep.iterations = r.outer_iterations;
      rep.log = r.log;
      rep.u = r.state.u;
      rep.E.resize(r.state.mech.size());
      rep.S.resize(r.state.mech.size());
      for (std::size_t e = 0; e < r.state.mech.size(); ++e) {
        rep.E[e] = r.state.mech[e].E;
        rep.S[e] = r.state.mech[e].S;
      }
    }
  } catch (const Error& e) {
    rep.status = "failed";
    rep.message = e.what();
    return rep;
  }

  rep.time_ratio = ref.seconds > 0.0 ? rep.seconds / ref.seconds : NAN;
  if (rep.u.size() == ref.fe.u.size() && rep.u.allFinite()) {
    rep.solution_hash = fnv1a_hex(displacement_csv(disc.mesh(), rep.u));
    rep.err_u = relative_l2(nodal_matrix(rep.u), nodal_matrix(ref.fe.u), disc.nodal_weights());
    rep.err_E = relative_l2(tensor_matrix(rep.E), tensor_matrix(ref.fe.E), disc.areas());
    rep.err_S = relative_l2(tensor_matrix(rep.S), tensor_matrix(ref.fe.S), disc.areas());
    rep.tip = nodal_displacement(rep.u, tip);
    rep.tip_err = (rep.tip - rep.tip_ref).norm() / rep.tip_ref.norm();
  } else if (rep.status == "ok") {
    rep.status = "diverged";
    rep.message = "non-finite solution";
  }
  return rep;
}

/// Loads the dataset named in the config and computes the reference itself.
inline ErrorReport run_scenario(const ScenarioConfig& c) {
  c.validate();
  const Reference ref = make_reference(c);
  std::optional<DatasetFile> data;
  if (!c.dataset.empty()) data = scenario_dataset(c, load_dataset(c.dataset));
  return run_scenario(c, ref, data ? &*data : nullptr);
}

/// Writes nodal and element field tables plus the reference fields.
inline void write_fields(const std::filesystem::path& dir, const ErrorReport& rep, const Reference& ref) {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& text) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw Error("cannot write " + (dir / name).string());
    os << text;
  };
  const Mesh& m = ref.disc->mesh();
  if (rep.u.size() == ref.fe.u.size()) {
    put("displacement.csv", displacement_csv(m, rep.u));
    put("elements.csv", element_csv(rep.E, rep.S));
  }
  put("reference_displacement.csv", displacement_csv(m, ref.fe.u));
  put("reference_elements.csv", element_csv(ref.fe.E, ref.fe.S));
  if (!rep.log.records.empty()) {
    std::ofstream os(dir / "convergence.csv", std::ios::binary);
    rep.log.write_csv(os);
  }
}


/// One-line summary as "key,value" rows.
inline std::string report_csv(const ErrorReport& r) {
  std::ostringstream os;
  os << "key,value\n";
  os << "scenario," << r.key << '\n';
  os << "problem," << problem_name(r.config.problem) << "\nlaw," << r.config.law << "\nmethod," << method_name(r.config.method)
     << "\nstatus," << r.status << "\nmessage," << '"' << r.message << '"' << "\nerr_u," << fmt(r.err_u) << "\nerr_E,"
     << fmt(r.err_E) << "\nerr_S," << fmt(r.err_S) << "\ntip_x," << fmt(r.tip.x()) << "\ntip_y," << fmt(r.tip.y())
     << "\ntip_ref_x," << fmt(r.tip_ref.x()) << "\ntip_ref_y," << fmt(r.tip_ref.y()) << "\ntip_err," << fmt(r.tip_err)
     << "\nseconds," << fmt(r.seconds) << "\nfe_seconds," << fmt(r.fe_seconds) << "\ntime_ratio," << fmt(r.time_ratio)
     << "\niterations," << r.iterations << "\nsolution_hash," << r.solution_hash << "\nreference_hash,"
     << r.reference_hash << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// comparison

struct ComparisonRow {
  std::string field;
  double dd = 0.0, nn = 0.0;
  double absolute = 0.0;  // dd - nn; negative means DD is better
  double relative = 0.0;  // (dd - nn) / dd
};


inline std::vector<ComparisonRow> compare(const ErrorReport& dd, const ErrorReport& nn) {
  const std::string a = dd.key.empty() ? scenario_key(dd.config) : dd.key;
  const std::string b = nn.key.empty() ? scenario_key(nn.config) : nn.key;
  if (a != b) throw KeyMismatch("reports belong to different scenarios: " + a + " vs " + b);
  std::vector<ComparisonRow> rows;
  auto add = [&](const char* f, double a, double b) {
    ComparisonRow r{f, a, b, a - b, 0.0};
    r.relative = a == b ? 0.0 : (a - b) / a;
    rows.push_back(r);
  };
  add("displacement", dd.err_u, nn.err_u);
  add("strain", dd.err_E, nn.err_E);
  add("stress", dd.err_S, nn.err_S);
  add("tip", dd.tip_err, nn.tip_err);
  return rows;
}

/// Parses the output of report_csv(); only the summary values are restored.
inline ErrorReport read_report_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "key,value") throw MalformedFile("report: missing 'key,value' header");
  std::map<std::string, std::string> kv;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = line.find(',');
    if (c == std::string::npos) throw MalformedFile("report line " + std::to_string(lineno) + ": no value");
    std::string v = line.substr(c + 1);
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
    kv[line.substr(0, c)] = v;
  }
  auto num = [&](const char* k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw MalformedFile(std::string("report lacks '") + k + "'");
    return std::strtod(it->second.c_str(), nullptr);
  };
  ErrorReport r;
  r.key = kv["scenario"];
  if (r.key.empty()) throw MalformedFile("report lacks 'scenario'");
  r.config.method = method_from_name(kv["method"]);
  r.status = kv["status"];
  r.message = kv["message"];
  r.err_u = num("err_u");
  r.err_E = num("err_E");
  r.err_S = num("err_S");
  r.tip_err = num("tip_err");
  r.tip = Point2(num("tip_x"), num("tip_y"));
  r.tip_ref = Point2(num("tip_ref_x"), num("tip_ref_y"));
  r.seconds = num("seconds");
  r.fe_seconds = num("fe_seconds");
  r.time_ratio = num("time_ratio");
  r.solution_hash = kv["solution_hash"];
  r.reference_hash = kv["reference_hash"];
  return r;
}

inline std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << "field,dd,nn,absolute,relative\n";
  for (const auto& r : rows)
    os << r.field << ',' << fmt(r.dd) << ',' << fmt(r.nn) << ',' << fmt(r.absolute) << ',' << fmt(r.relative) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// matrix

struct MatrixConfig {
  ScenarioConfig base;  // problem, law, mesh, load, solver settings
  std::vector<std::size_t> sizes = {100, 500, 1000, 2000, 0};
  std::vector<double> noise_levels = {0.0, 0.01, 0.05, 0.10};
  std::vector<Method> methods = {Method::DDLCiso, Method::NNStress};
  std::uint64_t seed = 0;
  int threads = 1;
};

struct MatrixRow {
  std::size_t samples = 0;
  double noise = 0.0;
  Method method = Method::FE;
  std::string status;
  double err_u = NAN, err_E = NAN, err_S = NAN, tip_err = NAN;
  int iterations = 0;
  std::string message;
  double seconds = 0.0;  // kept out of the master table so reruns compare equal
};

inline std::string matrix_header() { return "samples,noise,method,status,err_u,err_E,err_S,tip_err,iterations,message"; }

inline std::string matrix_line(const MatrixRow& r) {
  std::string msg = r.message;
  std::replace(msg.begin(), msg.end(), ',', ';');
  std::replace(msg.begin(), msg.end(), '\n', ' ');
  std::ostringstream os;
  os << r.samples << ',' << fmt(r.noise) << ',' << method_name(r.method) << ',' << r.status << ',' << fmt(r.err_u) << ','
     << fmt(r.err_E) << ',' << fmt(r.err_S) << ',' << fmt(r.tip_err) << ',' << r.iterations << ',' << msg;
  return os.str();
}

inline std::map<std::string, std::string> read_matrix_lines(const std::filesystem::path& csv) {
  std::map<std::string, std::string> done;
  std::ifstream is(csv);
  std::string line;
  if (!std::getline(is, line) || line != matrix_header()) return done;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string a, b, c;
    if (std::getline(ls, a, ',') && std::getline(ls, b, ',') && std::getline(ls, c, ','))
      done[a + ',' + b + ',' + c] = line;
  }
  return done;
}

/// Seeds derived per cell so that each cell is reproducible on its own.
inline std::uint64_t cell_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return detail::mix_seed(detail::mix_seed(base, a), b);
}

/// Runs every (size, noise, method) cell and writes `dir/matrix.csv`. Cells
/// already present in an existing table are kept, so an interrupted run
/// resumes. Returns the rows in grid order.
inline std::vector<MatrixRow> run_matrix(const MatrixConfig& mc, const DatasetFile& source, const std::filesystem::path& dir,
                                         const std::function<void(const MatrixRow&)>& progress = {}) {
  std::filesystem::create_directories(dir / "datasets");
  const std::filesystem::path csv = dir / "matrix.csv";
  const auto done = read_matrix_lines(csv);
  const Reference ref = make_reference(mc.base);

  struct Cell {
    std::size_t samples;
    double noise;
    Method method;
    std::size_t noise_index;
  };
  std::vector<Cell> cells;
  for (std::size_t s : mc.sizes)
    for (std::size_t ni = 0; ni < mc.noise_levels.size(); ++ni)
      for (Method m : mc.methods) cells.push_back({s, mc.noise_levels[ni], m, ni});

  // Noisy and subsampled datasets are generated once and persisted.
  std::map<std::pair<std::size_t, std::size_t>, DatasetFile> data;
  for (std::size_t s : mc.sizes)
    for (std::size_t ni = 0; ni < mc.noise_levels.size(); ++ni) {
      ScenarioConfig c = mc.base;
      c.noise = mc.noise_levels[ni];
      c.samples = s;
      c.noise_seed = cell_seed(mc.seed, 1, ni);
      c.subsample_seed = cell_seed(mc.seed, 2, s);
      DatasetFile d = scenario_dataset(c, source);
      save_dataset((dir / "datasets" / ("n" + std::to_string(s) + "_noise" + fmt(c.noise) + ".csv")).string(), d);
      data.emplace(std::make_pair(s, ni), std::move(d));
    }

  std::vector<std::optional<MatrixRow>> rows(cells.size());
  std::vector<std::string> cached(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::string key = std::to_string(cells[i].samples) + ',' + fmt(cells[i].noise) + ',' + method_name(cells[i].method);
    if (auto it = done.find(key); it != done.end()) cached[i] = it->second;
  }

  std::mutex io;
  std::ofstream out;
  {
    // Rewrite the table with the cached cells first; new cells are appended.
    std::ofstream tmp(csv, std::ios::binary);
    tmp << matrix_header() << '\n';
    for (const auto& l : cached)
      if (!l.empty()) tmp << l << '\n';
  }
  out.open(csv, std::ios::binary | std::ios::app);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      if (!cached[i].empty()) continue;
      const Cell& cell = cells[i];
      ScenarioConfig c = mc.base;
      c.method = cell.method;
      c.noise = cell.noise;
      c.samples = cell.samples;
      c.noise_seed = cell_seed(mc.seed, 1, cell.noise_index);
      c.subsample_seed = cell_seed(mc.seed, 2, cell.samples);
      c.train_seed = cell_seed(mc.seed, 3, i);
      if (c.dataset.empty()) c.dataset = "<matrix>";
      const ErrorReport r = run_scenario(c, ref, &data.at({cell.samples, cell.noise_index}));
      MatrixRow row{cell.samples, cell.noise, cell.method, r.status, r.err_u, r.err_E, r.err_S, r.tip_err,
                    r.iterations, r.message, r.seconds};
      std::lock_guard<std::mutex> lock(io);
      out << matrix_line(row) << '\n' << std::flush;
      rows[i] = row;
      if (progress) progress(row);
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::max(1, mc.threads); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  out.close();

  // Final table in grid order, independent of completion order.
  std::vector<MatrixRow> result;
  std::ofstream fin(csv, std::ios::binary);
  fin << matrix_header() << '\n';
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (rows[i]) {
      fin << matrix_line(*rows[i]) << '\n';
      result.push_back(*rows[i]);
    } else {
      fin << cached[i] << '\n';
      MatrixRow r;
      r.samples = cells[i].samples;
      r.noise = cells[i].noise;
      r.method = cells[i].method;
      std::istringstream ls(cached[i]);
      std::string tok;
      std::vector<std::string> f;
      while (std::getline(ls, tok, ',')) f.push_back(tok);
      if (f.size() >= 9) {
        r.status = f[3];
        r.err_u = std::stod(f[4]);
        r.err_E = std::stod(f[5]);
        r.err_S = std::stod(f[6]);
        r.tip_err = std::stod(f[7]);
        r.iterations = std::stoi(f[8]);
        if (f.size() > 9) r.message = f[9];
      }
      result.push_back(r);
    }
  }
  return result;
}

}  // namespace ddlab
