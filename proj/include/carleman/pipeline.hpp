#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "carleman/basis.hpp"
#include "carleman/contraction.hpp"
#include "carleman/error.hpp"
#include "carleman/forward.hpp"
#include "carleman/grid.hpp"
#include "carleman/io.hpp"
#include "carleman/phantom.hpp"
#include "carleman/preprocess.hpp"
#include "carleman/reconstruct.hpp"

namespace carleman {

struct RunConfig {
  int n = 48;
  std::optional<int> n_data;  // forward grid; unset means 2n - 1
  int n_theta = 64;
  double k = 2.0 * std::numbers::pi;
  std::string phantom = "test1";
  double delta = 0.0;
  std::uint64_t seed = 0;
  std::optional<int> N = 12;  // unset means choose_cutoff
  int n_max = 30;             // search range of choose_cutoff
  CarlemanParams carleman;
  int P = 6;
  InitMode init_mode = InitMode::qr;
  std::string out = "out";
  bool dump_iterates = false;

  int data_grid() const { return n_data.value_or(2 * n - 1); }

  void validate() const {
    if (n < 5) throw ConfigError("n must be >= 5");
    if (data_grid() < n || (data_grid() - 1) % (n - 1) != 0)
      throw ConfigError("n_data must be n + m (n - 1) for an integer m >= 0");
    if (n_theta < 3) throw ConfigError("n_theta must be >= 3");
    if (!(k > 0.0) || !std::isfinite(k)) throw ConfigError("k must be positive");
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw ConfigError("delta must be non-negative");
    if (N && *N < 1) throw ConfigError("N must be >= 1 or \"auto\"");
    if (n_max < 2) throw ConfigError("n_max must be >= 2");
    if (P < 1) throw ConfigError("P must be >= 1");
    if (out.empty()) throw ConfigError("out must name a directory");
    phantom_inclusions(phantom);
    carleman.validate();
  }
};

/// Wave number used for each phantom in the full-scale setup.
inline double full_scale_wave_number(const std::string& phantom) {
  if (phantom == "test1") return 3.0 * std::numbers::pi;
  if (phantom == "test4") return 4.0 * std::numbers::pi;
  return 2.0 * std::numbers::pi;
}

inline RunConfig make_profile(const std::string& name) {
  RunConfig cfg;
  if (name == "desk") return cfg;
  if (name == "paper") {
    cfg.n = 64;
    cfg.n_theta = 150;
    cfg.N = 42;
    cfg.n_max = 50;
    cfg.P = 10;
    cfg.k = full_scale_wave_number(cfg.phantom);
    return cfg;
  }
  throw ConfigError("unknown profile '" + name + "' (expected desk or paper)");
}

inline nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["n"] = cfg.n;
  j["n_data"] = cfg.data_grid();
  j["n_theta"] = cfg.n_theta;
  j["k"] = cfg.k;
  j["phantom"] = cfg.phantom;
  j["delta"] = cfg.delta;
  j["seed"] = cfg.seed;
  j["N"] = cfg.N ? nlohmann::json(*cfg.N) : nlohmann::json("auto");
  j["n_max"] = cfg.n_max;
  j["x0"] = {cfg.carleman.x0.x(), cfg.carleman.x0.y()};
  j["beta"] = cfg.carleman.beta;
  j["lambda"] = cfg.carleman.lambda;
  j["epsilon"] = cfg.carleman.epsilon;
  j["normalize_radius"] = cfg.carleman.normalize_radius;
  j["neumann_weight"] = cfg.carleman.neumann_weight ? nlohmann::json(*cfg.carleman.neumann_weight) : nlohmann::json();
  j["P"] = cfg.P;
  j["init_mode"] = cfg.init_mode == InitMode::qr ? "qr" : "zero";
  j["out"] = cfg.out;
  j["dump_iterates"] = cfg.dump_iterates;
  return j;
}

/// Overlay a flat JSON object onto `cfg`. Unknown keys and wrong types are errors.
/// When `k` is absent under the full-scale profile it follows the phantom.
inline RunConfig apply_json(RunConfig cfg, const nlohmann::json& j, bool full_scale_profile = false) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known{"n", "n_data", "n_theta", "k", "phantom", "delta", "seed",
                                           "N", "n_max", "x0", "beta", "lambda", "epsilon",
                                           "normalize_radius", "neumann_weight", "P", "init_mode", "out",
                                           "dump_iterates"};
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  try {
    if (j.contains("n")) cfg.n = j.at("n").get<int>();
    if (j.contains("n_data")) {
      if (j.at("n_data").is_null()) cfg.n_data.reset();
      else cfg.n_data = j.at("n_data").get<int>();
    }
    if (j.contains("n_theta")) cfg.n_theta = j.at("n_theta").get<int>();
    if (j.contains("phantom")) cfg.phantom = j.at("phantom").get<std::string>();
    if (j.contains("k")) cfg.k = j.at("k").get<double>();
    else if (full_scale_profile) cfg.k = full_scale_wave_number(cfg.phantom);
    if (j.contains("delta")) cfg.delta = j.at("delta").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("N")) {
      const auto& v = j.at("N");
      if (v.is_string()) {
        if (v.get<std::string>() != "auto") throw ConfigError("N must be an integer or \"auto\"");
        cfg.N.reset();
      } else {
        cfg.N = v.get<int>();
      }
    }
    if (j.contains("n_max")) cfg.n_max = j.at("n_max").get<int>();
    if (j.contains("x0")) {
      const auto x0 = j.at("x0").get<std::vector<double>>();
      if (x0.size() != 2) throw ConfigError("x0 must have two components");
      cfg.carleman.x0 = {x0[0], x0[1]};
    }
    if (j.contains("beta")) cfg.carleman.beta = j.at("beta").get<double>();
    if (j.contains("lambda")) cfg.carleman.lambda = j.at("lambda").get<double>();
    if (j.contains("epsilon")) cfg.carleman.epsilon = j.at("epsilon").get<double>();
    if (j.contains("normalize_radius")) cfg.carleman.normalize_radius = j.at("normalize_radius").get<bool>();
    if (j.contains("neumann_weight")) {
      if (j.at("neumann_weight").is_null()) cfg.carleman.neumann_weight.reset();
      else cfg.carleman.neumann_weight = j.at("neumann_weight").get<double>();
    }
    if (j.contains("P")) cfg.P = j.at("P").get<int>();
    if (j.contains("init_mode")) {
      const auto mode = j.at("init_mode").get<std::string>();
      if (mode == "qr") cfg.init_mode = InitMode::qr;
      else if (mode == "zero") cfg.init_mode = InitMode::zero;
      else throw ConfigError("init_mode must be qr or zero");
    }
    if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
    if (j.contains("dump_iterates")) cfg.dump_iterates = j.at("dump_iterates").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path, const std::string& profile) {
  return apply_json(make_profile(profile), io::read_json(path), profile == "paper");
}

inline nlohmann::json to_json(const Metrics& m) {
  nlohmann::json incs = nlohmann::json::array();
  for (const auto& inc : m.inclusions)
    incs.push_back({{"name", inc.name},
                    {"true_value", inc.true_value},
                    {"max_in_truth", inc.max_in_truth},
                    {"rel_error_max", inc.rel_error_max},
                    {"peak_offset", inc.peak_offset}});
  return {{"max_in_truth", m.max_in_truth}, {"true_value", m.true_value}, {"rel_error_max", m.rel_error_max},
          {"l2_rel", m.l2_rel},             {"peak_offset", m.peak_offset}, {"inclusions", incs}};
}

inline nlohmann::json basis_report(const BasisSet& basis) {
  nlohmann::json coeffs = nlohmann::json::array();
  for (int n = 0; n < basis.N; ++n) {
    std::vector<double> row(basis.gs_coeffs.cols());
    for (Eigen::Index j = 0; j < basis.gs_coeffs.cols(); ++j) row[j] = basis.gs_coeffs(n, j);
    coeffs.push_back(row);
  }
  return {{"N", basis.N},
          {"gram_residual", basis.gram_residual},
          {"s_condition", basis.s_condition},
          {"s_min_singular", basis.s_min_singular},
          {"gs_coeffs", coeffs}};
}

/// Files written by one command. Unless committed, they are removed again when
/// the object is destroyed (a stage failed part way).
class ArtifactSet {
 public:
  explicit ArtifactSet(std::filesystem::path dir) : dir_(std::move(dir)) {}
  ArtifactSet(const ArtifactSet&) = delete;
  ArtifactSet& operator=(const ArtifactSet&) = delete;
  ~ArtifactSet() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& f : files_) std::filesystem::remove(dir_ / f, ec);
  }

  /// Registers a relative path and returns its absolute location.
  std::filesystem::path add(const std::string& relative) {
    files_.push_back(relative);
    return dir_ / relative;
  }
  nlohmann::json manifest() const {
    nlohmann::json m = nlohmann::json::object();
    for (const auto& f : files_) m[f] = io::sha256_file(dir_ / f);
    return m;
  }
  void commit() { committed_ = true; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
  bool committed_ = false;
};

/// Wall-clock per named stage, in seconds.
class StageTimer {
 public:
  template <typename F>
  auto run(const std::string& stage, F&& f) {
    const auto start = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      record(stage, start);
    } else {
      auto result = f();
      record(stage, start);
      return result;
    }
  }
  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [stage, seconds] : times_) j[stage] = seconds;
    return j;
  }

 private:
  void record(const std::string& stage, std::chrono::steady_clock::time_point start) {
    times_.emplace_back(stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  std::vector<std::pair<std::string, double>> times_;
};

inline std::filesystem::path dataset_dir(const RunConfig& cfg) { return std::filesystem::path(cfg.out) / "dataset"; }

// ---------------------------------------------------------------- commands

inline BoundaryDataset cmd_gen_data(const RunConfig& cfg) {
  cfg.validate();
  const AngularGrid angular(cfg.n_theta);
  BoundaryDataset data = generate_dataset(cfg.phantom, cfg.n, cfg.data_grid(), angular, cfg.k, cfg.delta, cfg.seed);
  const auto dir = dataset_dir(cfg);
  ArtifactSet files(dir);
  files.add(io::dataset_header_name);
  files.add("f.csv");
  files.add("g.csv");
  io::write_dataset(dir, data, angular);
  files.commit();
  return data;
}

inline void check_dataset(const RunConfig& cfg, const BoundaryDataset& data) {
  if (data.n != cfg.n) throw ConfigError("dataset grid n differs from config");
  if (data.n_theta != cfg.n_theta) throw ConfigError("dataset n_theta differs from config");
  if (std::abs(data.k - cfg.k) > 1e-12 * cfg.k) throw ConfigError("dataset k differs from config");
}

inline CutoffResult cmd_choose_n(const RunConfig& cfg, const std::filesystem::path& data_dir) {
  cfg.validate();
  const BoundaryDataset data = io::read_dataset(data_dir);
  check_dataset(cfg, data);
  const CutoffResult cut = choose_cutoff(data, AngularGrid(cfg.n_theta), cfg.n_max);
  ArtifactSet files(cfg.out);
  io::write_cutoff_curve(files.add("eN.csv"), cut.curve);
  files.commit();
  return cut;
}

struct ReconstructOutput {
  int N = 0;
  std::optional<CutoffResult> cutoff;
  ContractionRun run;
  Reconstruction recon;
  Metrics metrics;
  nlohmann::json summary;
};

inline ReconstructOutput cmd_reconstruct(const RunConfig& cfg, const std::filesystem::path& data_dir,
                                         StageTimer timer = {}) {
  cfg.validate();
  const std::filesystem::path out_dir(cfg.out);
  ArtifactSet files(out_dir);
  ReconstructOutput r;

  const BoundaryDataset data = timer.run("read-data", [&] { return io::read_dataset(data_dir); });
  check_dataset(cfg, data);
  const SpatialGrid grid(cfg.n);
  const AngularGrid angular(cfg.n_theta);

  if (cfg.N) {
    r.N = *cfg.N;
  } else {
    r.cutoff = timer.run("choose-n", [&] { return choose_cutoff(data, angular, cfg.n_max); });
    r.N = r.cutoff->selected;
    io::write_cutoff_curve(files.add("eN.csv"), r.cutoff->curve);
  }

  const BasisSet basis = timer.run("basis", [&] {
    BasisSet b = build_basis(r.N, angular);
    compute_coefficients(b, cfg.k);
    return b;
  });
  const FourierTraces traces = timer.run("preprocess", [&] {
    return compute_traces(compute_log_boundary(data, angular), data, basis, angular);
  });
  r.run = timer.run("contraction", [&] {
    return run_contraction(traces, basis, grid, cfg.carleman, cfg.P, cfg.init_mode, cfg.dump_iterates);
  });
  r.recon = timer.run("reconstruct", [&] { return reconstruct_c(r.run.result, basis, cfg.k, grid, angular); });
  const Phantom phantom = make_phantom(data.phantom, grid);
  r.metrics = score(r.recon.c, phantom, grid);

  timer.run("write", [&] {
    io::write_convergence(files.add("convergence.csv"), r.run.diffs);
    io::write_scalar_field(files.add("c_comp.csv"), grid, r.recon.c);
    io::write_scalar_field(files.add("c_true.csv"), grid, phantom.c);
    for (std::size_t p = 0; p < r.run.iterates.size(); ++p)
      for (int m = 0; m < r.N; ++m)
        io::write_complex_field(files.add("v_p" + std::to_string(p + 1) + "_m" + std::to_string(m + 1) + ".csv"),
                                grid, r.run.iterates[p].modes[m]);
    io::write_json(files.add("metrics.json"), to_json(r.metrics));
  });

  nlohmann::json& s = r.summary;
  s["config"] = to_json(cfg);
  s["dataset"] = {{"path", data_dir.string()},
                  {"phantom", data.phantom},
                  {"delta", data.delta},
                  {"seed", data.seed},
                  {"noise_applied", data.noise_applied}};
  s["basis"] = basis_report(basis);
  if (r.cutoff) s["cutoff"] = {{"selected", r.cutoff->selected}, {"curve", r.cutoff->curve}};
  s["convergence"] = {{"diffs", r.run.diffs},
                      {"rate_estimate", r.run.rate_estimate ? nlohmann::json(*r.run.rate_estimate) : nlohmann::json()},
                      {"warnings", r.run.warnings}};
  s["metrics"] = to_json(r.metrics);
  s["manifest"] = files.manifest();
  s["wall_clock_seconds"] = timer.to_json();
  io::write_json(out_dir / "summary.json", s);
  files.commit();
  return r;
}

inline ReconstructOutput cmd_full(const RunConfig& cfg) {
  StageTimer timer;
  timer.run("gen-data", [&] { cmd_gen_data(cfg); });
  return cmd_reconstruct(cfg, dataset_dir(cfg), std::move(timer));
}

/// Re-score an existing `c_comp.csv` in the output directory against the phantom.
inline Metrics cmd_metrics(const RunConfig& cfg) {
  cfg.validate();
  const SpatialGrid grid(cfg.n);
  const std::filesystem::path out_dir(cfg.out);
  const RealField c = io::read_scalar_field(out_dir / "c_comp.csv", grid);
  const Metrics m = score(c, make_phantom(cfg.phantom, grid), grid);
  ArtifactSet files(out_dir);
  io::write_json(files.add("metrics.json"), to_json(m));
  files.commit();
  return m;
}

}  // namespace carleman
