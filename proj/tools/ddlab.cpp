// Command-line front end: dataset pipeline, network training, single
// scenarios, the size x noise matrix and DD/NN comparisons. Every command
// writes into a run directory together with a manifest.json.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ddlab/bench.hpp"

using namespace ddlab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string file_hash(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw Error("cannot open " + p.string());
  std::ostringstream os;
  os << is.rdbuf();
  return fnv1a_hex(os.str());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error("cannot write " + p.string());
  os << text;
}

/// Collects inputs, seeds and outputs of one command.
class Manifest {
 public:
  Manifest(std::string command, fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
    j_["command"] = std::move(command);
    j_["inputs"] = json::array();
    j_["outputs"] = json::array();
    j_["seeds"] = json::object();
    j_["parameters"] = json::object();
  }
  fs::path path(const std::string& name) const { return dir_ / name; }
  void input(const std::string& p) {
    if (!p.empty()) j_["inputs"].push_back({{"path", p}, {"hash", file_hash(p)}});
  }
  void output(const fs::path& p) { j_["outputs"].push_back({{"path", p.lexically_relative(dir_).string()}, {"hash", file_hash(p)}}); }
  void seed(const std::string& k, std::uint64_t v) { j_["seeds"][k] = v; }
  json& parameters() { return j_["parameters"]; }
  void finish(const std::string& status) {
    j_["status"] = status;
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    j_["finished"] = buf;
    write_text(dir_ / "manifest.json", j_.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  json j_;
};

struct Common {
  std::string run_dir = "runs/latest";
};

void add_training_flags(CLI::App* a, TrainingConfig& t) {
  a->add_option("--restarts", t.restarts, "independent training runs")->capture_default_str();
  a->add_option("--max-epochs", t.max_epochs, "epoch cap per restart")->capture_default_str();
  a->add_option("--patience", t.patience, "early-stopping patience in epochs")->capture_default_str();
  a->add_option("--learning-rate", t.learning_rate, "Adam step size")->capture_default_str();
  a->add_option("--hidden", t.n_hidden, "hidden neurons")->capture_default_str();
  a->add_option("--train-threads", t.threads, "restarts trained concurrently")->capture_default_str();
}

void add_dd_flags(CLI::App* a, DDConfig& d) {
  a->add_option("--outer-tol", d.outer_tol, "distance-ratio tolerance")->capture_default_str();
  a->add_option("--outer-max", d.outer_max_iters, "outer iterations per load step")->capture_default_str();
  a->add_option("--inner-tol", d.inner_tol, "projection relative residual tolerance")->capture_default_str();
  a->add_option("--inner-max", d.inner_max_iters, "projection Newton iterations")->capture_default_str();
  a->add_option("--k", d.k_lce, "neighbours in the convex embedding")->capture_default_str();
  a->add_option("--orbits", d.n_orbits, "rotations per data point for isotropic variants")->capture_default_str();
  a->add_option("--rho-factor", d.lce_rho_factor, "unit-sum penalty relative to neighbour scale")->capture_default_str();
}

struct ScenarioFlags {
  ScenarioConfig cfg;
  std::string problem = "cook", method = "fe";
  double load = 0.0;
};

void add_scenario_flags(CLI::App* a, ScenarioFlags& f, bool with_method) {
  a->add_option("--problem", f.problem, "cook | punch")->capture_default_str();
  a->add_option("--law", f.cfg.law, "ciarlet | hn (reference law)")->capture_default_str();
  if (with_method)
    a->add_option("--method", f.method, "fe | nn_energy | nn_stress | dd | ddiso | ddlc | ddlciso")->capture_default_str();
  a->add_option("--dataset", f.cfg.dataset, "dataset file");
  a->add_option("--mesh", f.cfg.mesh, "cook mesh: modified | source")->capture_default_str();
  a->add_option("--refinement", f.cfg.refinement, "cells per direction, 0 = default mesh")->capture_default_str();
  a->add_option("--load", f.load, "load magnitude in N/mm, default per problem and law");
  a->add_option("--load-steps", f.cfg.load_steps, "equal load increments")->capture_default_str();
  a->add_option("--train-seed", f.cfg.train_seed, "training seed")->capture_default_str();
  a->add_option("--timing-repeats", f.cfg.timing_repeats, "solves per timing, median reported")->capture_default_str();
  add_training_flags(a, f.cfg.training);
  add_dd_flags(a, f.cfg.dd);
}

ScenarioConfig finish_scenario(const ScenarioFlags& f, const CLI::App* a) {
  ScenarioConfig c = f.cfg;
  c.problem = problem_from_name(f.problem);
  c.method = method_from_name(f.method);
  if (a->count("--load")) c.load = f.load;
  return c;
}

json scenario_json(const ScenarioConfig& c) {
  return {{"problem", problem_name(c.problem)},
          {"law", c.law},
          {"method", method_name(c.method)},
          {"dataset", c.dataset},
          {"network", c.network},
          {"noise", c.noise},
          {"samples", c.samples},
          {"mesh", c.mesh},
          {"refinement", c.refinement},
          {"load", c.load_value()},
          {"load_steps", c.load_steps},
          {"training",
           {{"restarts", c.training.restarts},
            {"max_epochs", c.training.max_epochs},
            {"patience", c.training.patience},
            {"learning_rate", c.training.learning_rate},
            {"n_hidden", c.training.n_hidden}}},
          {"dd",
           {{"outer_tol", c.dd.outer_tol},
            {"outer_max_iters", c.dd.outer_max_iters},
            {"inner_tol", c.dd.inner_tol},
            {"inner_max_iters", c.dd.inner_max_iters},
            {"k_lce", c.dd.k_lce},
            {"n_orbits", c.dd.n_orbits},
            {"lce_rho_factor", c.dd.lce_rho_factor}}}};
}

std::string training_csv(const TrainingReport& r) {
  std::ostringstream os;
  os << "restart,best_validation_loss,train_loss,epochs,best_epoch,diverged,selected\n";
  for (std::size_t i = 0; i < r.restarts.size(); ++i) {
    const RestartResult& x = r.restarts[i];
    os << i << ',' << fmt(x.best_validation_loss) << ',' << fmt(x.train_loss) << ',' << x.epochs << ',' << x.best_epoch
       << ',' << x.diverged << ',' << (static_cast<int>(i) == r.best_restart) << '\n';
  }
  return os.str();
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(tok);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-strain FE, neural-network and data-driven constitutive laboratory"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--run-dir", common.run_dir, "output directory")->capture_default_str();

  // generate-data
  auto* gen = app.add_subcommand("generate-data", "sample a reference Cook run into a dataset");
  std::string gen_law = "ciarlet", gen_out = "source.csv";
  SourceOptions gen_opt;
  gen->add_option("--law", gen_law, "ciarlet | hn")->capture_default_str();
  gen->add_option("--traction", gen_opt.traction, "Cook traction in N/mm")->capture_default_str();
  gen->add_option("--load-steps", gen_opt.load_steps, "load increments, each one sampled")->capture_default_str();
  gen->add_option("--out", gen_out, "file name inside the run directory")->capture_default_str();

  // add-noise
  auto* noise = app.add_subcommand("add-noise", "multiplicative Gaussian stress noise");
  std::string noise_in, noise_out = "noisy.csv";
  double noise_level = 0.0;
  std::uint64_t noise_seed = 1;
  noise->add_option("--input", noise_in, "dataset file")->required();
  noise->add_option("--level", noise_level, "relative standard deviation")->required();
  noise->add_option("--seed", noise_seed, "generator seed")->capture_default_str();
  noise->add_option("--out", noise_out, "file name inside the run directory")->capture_default_str();

  // subsample
  auto* sub = app.add_subcommand("subsample", "random subset without replacement");
  std::string sub_in, sub_out = "subset.csv";
  std::size_t sub_n = 0;
  std::uint64_t sub_seed = 2;
  sub->add_option("--input", sub_in, "dataset file")->required();
  sub->add_option("--n", sub_n, "rows to keep")->required();
  sub->add_option("--seed", sub_seed, "generator seed")->capture_default_str();
  sub->add_option("--out", sub_out, "file name inside the run directory")->capture_default_str();

  // train-nn
  auto* trn = app.add_subcommand("train-nn", "train the invariant network on a dataset");
  std::string trn_in, trn_loss = "stress", trn_out = "network.txt";
  TrainingConfig trn_cfg;
  trn->add_option("--input", trn_in, "dataset file")->required();
  trn->add_option("--loss", trn_loss, "stress | energy")->capture_default_str();
  trn->add_option("--seed", trn_cfg.seed, "training seed")->capture_default_str();
  trn->add_option("--out", trn_out, "file name inside the run directory")->capture_default_str();
  add_training_flags(trn, trn_cfg);

  // solve
  auto* solve = app.add_subcommand("solve", "run one scenario and report errors against the FE reference");
  ScenarioFlags solve_f;
  add_scenario_flags(solve, solve_f, true);
  solve->add_option("--network", solve_f.cfg.network, "trained network for nn methods; skips training");
  solve->add_option("--noise", solve_f.cfg.noise, "stress noise applied to the dataset")->capture_default_str();
  solve->add_option("--samples", solve_f.cfg.samples, "subsample size, 0 = all rows")->capture_default_str();
  solve->add_option("--noise-seed", solve_f.cfg.noise_seed, "noise seed")->capture_default_str();
  solve->add_option("--subsample-seed", solve_f.cfg.subsample_seed, "subsample seed")->capture_default_str();

  // run-matrix
  auto* mat = app.add_subcommand("run-matrix", "dataset size x noise level x method grid");
  ScenarioFlags mat_f;
  add_scenario_flags(mat, mat_f, false);
  std::string mat_sizes = "100,500,1000,2000,0", mat_noise = "0,0.01,0.05,0.1", mat_methods = "ddlciso,nn_stress";
  std::uint64_t mat_seed = 0;
  int mat_threads = 1;
  mat->add_option("--sizes", mat_sizes, "comma list, 0 = full dataset")->capture_default_str();
  mat->add_option("--noise-levels", mat_noise, "comma list")->capture_default_str();
  mat->add_option("--methods", mat_methods, "comma list")->capture_default_str();
  mat->add_option("--seed", mat_seed, "base seed for noise, subsets and training")->capture_default_str();
  mat->add_option("--threads", mat_threads, "cells run concurrently")->capture_default_str();

  // compare
  auto* cmp = app.add_subcommand("compare", "error differences of a DD and an NN report");
  std::string cmp_dd, cmp_nn, cmp_out = "comparison.csv";
  cmp->add_option("--dd", cmp_dd, "report.csv of the data-driven run")->required();
  cmp->add_option("--nn", cmp_nn, "report.csv of the network run")->required();
  cmp->add_option("--out", cmp_out, "file name inside the run directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  const fs::path dir = common.run_dir;
  try {
    if (*gen) {
      Manifest m("generate-data", dir);
      const DatasetFile d = generate_source(law_from_name(gen_law), gen_opt);
      const fs::path out = m.path(gen_out);
      save_dataset(out.string(), d);
      m.parameters() = {{"law", gen_law}, {"traction", gen_opt.traction}, {"load_steps", gen_opt.load_steps}, {"rows", d.size()}};
      m.output(out);
      m.finish("ok");
      std::cout << out.string() << ": " << d.size() << " rows\n";
    } else if (*noise) {
      Manifest m("add-noise", dir);
      m.input(noise_in);
      const DatasetFile d = add_noise(load_dataset(noise_in), noise_level, noise_seed);
      const fs::path out = m.path(noise_out);
      save_dataset(out.string(), d);
      m.seed("noise", noise_seed);
      m.parameters() = {{"level", noise_level}};
      m.output(out);
      m.finish("ok");
      std::cout << out.string() << ": noise " << d.header.noise << "\n";
    } else if (*sub) {
      Manifest m("subsample", dir);
      m.input(sub_in);
      const DatasetFile d = subsample(load_dataset(sub_in), sub_n, sub_seed);
      const fs::path out = m.path(sub_out);
      save_dataset(out.string(), d);
      m.seed("subsample", sub_seed);
      m.parameters() = {{"n", sub_n}};
      m.output(out);
      m.finish("ok");
      std::cout << out.string() << ": " << d.size() << " rows\n";
    } else if (*trn) {
      Manifest m("train-nn", dir);
      m.input(trn_in);
      if (trn_loss != "stress" && trn_loss != "energy") throw InvalidConfig("--loss must be stress or energy");
      trn_cfg.loss_kind = trn_loss == "energy" ? LossKind::Energy : LossKind::Stress;
      auto [p, report] = train(labeled_samples(load_dataset(trn_in)), trn_cfg);
      const fs::path out = m.path(trn_out), rep = m.path("training.csv");
      save_network(out.string(), p);
      write_text(rep, training_csv(report));
      m.seed("training", trn_cfg.seed);
      m.parameters() = {{"loss", trn_loss},
                        {"restarts", trn_cfg.restarts},
                        {"max_epochs", trn_cfg.max_epochs},
                        {"patience", trn_cfg.patience},
                        {"learning_rate", trn_cfg.learning_rate}};
      m.output(out);
      m.output(rep);
      m.finish("ok");
      std::cout << out.string() << ": best restart " << report.best_restart << ", validation loss "
                << report.restarts[static_cast<std::size_t>(report.best_restart)].best_validation_loss << "\n";
    } else if (*solve) {
      Manifest m("solve", dir);
      const ScenarioConfig c = finish_scenario(solve_f, solve);
      c.validate();
      m.input(c.dataset);
      m.input(c.network);
      m.seed("noise", c.noise_seed);
      m.seed("subsample", c.subsample_seed);
      m.seed("training", c.train_seed);
      m.parameters() = scenario_json(c);
      const Reference ref = make_reference(c);
      std::optional<DatasetFile> data;
      if (!c.dataset.empty()) data = scenario_dataset(c, load_dataset(c.dataset));
      const ErrorReport r = run_scenario(c, ref, data ? &*data : nullptr);
      write_fields(m.path("fields"), r, ref);
      write_text(m.path("report.csv"), report_csv(r));
      m.output(m.path("report.csv"));
      for (const auto& e : fs::directory_iterator(m.path("fields"))) m.output(e.path());
      if (r.training) {
        write_text(m.path("training.csv"), training_csv(*r.training));
        m.output(m.path("training.csv"));
      }
      m.finish(r.status);
      std::cout << method_name(c.method) << " " << r.status << "  err_u " << r.err_u << "  err_E " << r.err_E
                << "  err_S " << r.err_S << "  tip " << r.tip_err << "  time ratio " << r.time_ratio << "\n";
      if (!r.message.empty()) std::cout << r.message << "\n";
      return r.status == "failed" ? 2 : 0;
    } else if (*mat) {
      Manifest m("run-matrix", dir);
      MatrixConfig mc;
      mc.base = finish_scenario(mat_f, mat);
      if (mc.base.dataset.empty()) throw InvalidConfig("run-matrix needs --dataset");
      m.input(mc.base.dataset);
      mc.sizes.clear();
      for (const auto& s : split(mat_sizes)) mc.sizes.push_back(std::stoul(s));
      mc.noise_levels.clear();
      for (const auto& s : split(mat_noise)) mc.noise_levels.push_back(std::stod(s));
      mc.methods.clear();
      for (const auto& s : split(mat_methods)) mc.methods.push_back(method_from_name(s));
      mc.seed = mat_seed;
      mc.threads = mat_threads;
      m.seed("base", mat_seed);
      json p = scenario_json(mc.base);
      p["sizes"] = mc.sizes;
      p["noise_levels"] = mc.noise_levels;
      p["methods"] = split(mat_methods);
      m.parameters() = p;
      const DatasetFile source = load_dataset(mc.base.dataset);
      std::size_t failed = 0;
      const auto rows = run_matrix(mc, source, dir, [&](const MatrixRow& r) {
        std::cout << r.samples << " " << r.noise << " " << method_name(r.method) << " " << r.status << " err_u " << r.err_u
                  << "\n";
      });
      std::ofstream timing(m.path("timing.csv"), std::ios::binary);
      timing << "samples,noise,method,seconds\n";
      for (const auto& r : rows) {
        if (r.status == "failed") ++failed;
        timing << r.samples << ',' << fmt(r.noise) << ',' << method_name(r.method) << ',' << fmt(r.seconds) << '\n';
      }
      timing.close();
      m.output(m.path("matrix.csv"));
      m.output(m.path("timing.csv"));
      for (const auto& e : fs::directory_iterator(m.path("datasets"))) m.output(e.path());
      m.finish(failed ? "partial" : "ok");
      std::cout << rows.size() << " cells, " << failed << " failed\n";
      return failed ? 2 : 0;
    } else if (*cmp) {
      Manifest m("compare", dir);
      m.input(cmp_dd);
      m.input(cmp_nn);
      std::ifstream a(cmp_dd), b(cmp_nn);
      if (!a || !b) throw Error("cannot open report files");
      const auto rows = compare(read_report_csv(a), read_report_csv(b));
      write_text(m.path(cmp_out), comparison_csv(rows));
      m.output(m.path(cmp_out));
      m.finish("ok");
      std::cout << comparison_csv(rows);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
