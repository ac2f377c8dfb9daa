#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <gtest/gtest.h>

#include "carleman/pipeline.hpp"

using namespace carleman;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("carleman_test_" + name);
  fs::remove_all(p);
  return p;
}

RunConfig small_config(const fs::path& out) {
  RunConfig cfg;
  cfg.n = 17;
  cfg.n_theta = 16;
  cfg.N = 3;
  cfg.P = 2;
  cfg.phantom = "test3";
  cfg.out = out.string();
  return cfg;
}

nlohmann::json without_timing(nlohmann::json j) {
  j.erase("wall_clock_seconds");
  return j;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(CARLEMAN_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ProfilesAndRoundTrip) {
  const RunConfig desk = make_profile("desk");
  EXPECT_EQ(desk.n, 48);
  EXPECT_EQ(desk.n_theta, 64);
  EXPECT_EQ(*desk.N, 12);
  EXPECT_EQ(desk.P, 6);
  EXPECT_DOUBLE_EQ(desk.k, 2.0 * std::numbers::pi);
  EXPECT_EQ(desk.data_grid(), 95);
  const RunConfig paper = make_profile("paper");
  EXPECT_EQ(paper.n, 64);
  EXPECT_EQ(paper.n_theta, 150);
  EXPECT_EQ(*paper.N, 42);
  EXPECT_EQ(paper.P, 10);
  EXPECT_DOUBLE_EQ(paper.carleman.x0.y(), -10.0);
  EXPECT_DOUBLE_EQ(paper.carleman.beta, 20.0);
  EXPECT_DOUBLE_EQ(paper.carleman.lambda, 6.0);
  EXPECT_DOUBLE_EQ(paper.carleman.epsilon, std::pow(10.0, -5.5));
  EXPECT_THROW(make_profile("huge"), ConfigError);

  RunConfig cfg = desk;
  cfg.N.reset();
  cfg.seed = 18446744073709551615ull;
  cfg.k = 0.1 + 1e-16;
  cfg.carleman.neumann_weight = 3.5;
  cfg.init_mode = InitMode::zero;
  const nlohmann::json j = to_json(cfg);
  const RunConfig back = apply_json(make_profile("desk"), nlohmann::json::parse(j.dump()));
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.seed, cfg.seed);
  EXPECT_EQ(back.k, cfg.k);
  EXPECT_FALSE(back.N.has_value());
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(apply_json(RunConfig{}, nlohmann::json{{"lamda", 6}}), ConfigError);
  EXPECT_THROW(apply_json(RunConfig{}, nlohmann::json{{"N", "many"}}), ConfigError);
  EXPECT_THROW(apply_json(RunConfig{}, nlohmann::json{{"n", "big"}}), ConfigError);
  EXPECT_THROW(apply_json(RunConfig{}, nlohmann::json::array()), ConfigError);
  EXPECT_THROW(apply_json(RunConfig{}, nlohmann::json{{"x0", {0.0, 0.5}}}).validate(), ConfigError);
  EXPECT_THROW(apply_json(RunConfig{}, nlohmann::json{{"n_data", 50}}).validate(), ConfigError);
  EXPECT_THROW(apply_json(RunConfig{}, nlohmann::json{{"phantom", "custom9"}}).validate(), ConfigError);
  EXPECT_THROW(apply_json(RunConfig{}, nlohmann::json{{"delta", -0.1}}).validate(), ConfigError);
  // the full-scale profile follows the phantom's wave number unless k is given
  EXPECT_DOUBLE_EQ(apply_json(make_profile("paper"), {{"phantom", "test4"}}, true).k, 4.0 * std::numbers::pi);
  EXPECT_DOUBLE_EQ(apply_json(make_profile("paper"), {{"phantom", "test4"}, {"k", 5.0}}, true).k, 5.0);
}

TEST(GenData, ByteIdenticalAcrossRuns) {
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  RunConfig cfg = small_config(a);
  cfg.delta = 0.1;
  cfg.seed = 77;
  cmd_gen_data(cfg);
  cfg.out = b.string();
  cmd_gen_data(cfg);
  for (const char* f : {"dataset.json", "f.csv", "g.csv"})
    EXPECT_EQ(io::read_text(a / "dataset" / f), io::read_text(b / "dataset" / f)) << f;
  const auto header = io::read_json(a / "dataset" / "dataset.json");
  EXPECT_EQ(header.at("delta").get<double>(), 0.1);
  EXPECT_EQ(header.at("seed").get<std::uint64_t>(), 77u);
  EXPECT_TRUE(header.at("noise_applied").get<bool>());
}

TEST(GenData, DatasetRoundTripsLosslessly) {
  const fs::path out = scratch("roundtrip");
  RunConfig cfg = small_config(out);
  cfg.delta = 0.05;
  const BoundaryDataset d = cmd_gen_data(cfg);
  const BoundaryDataset r = io::read_dataset(dataset_dir(cfg));
  EXPECT_TRUE(r.f == d.f);
  EXPECT_TRUE(r.g == d.g);
  EXPECT_EQ(r.n, d.n);
  EXPECT_EQ(r.n_data, 33);
  EXPECT_EQ(r.phantom, "test3");
  const std::string f = io::read_text(dataset_dir(cfg) / "f.csv");
  EXPECT_EQ(f.substr(0, f.find('\n')), "boundary_node_index,theta_index,re,im");
}

TEST(GenData, HomogeneousPhantomSamplesIncidentWave) {
  const fs::path out = scratch("homog");
  RunConfig cfg = small_config(out);
  cfg.phantom = "homogeneous";
  const BoundaryDataset d = cmd_gen_data(cfg);
  const SpatialGrid grid(cfg.n);
  const Eigen::MatrixXcd u = boundary_incident(grid, AngularGrid(cfg.n_theta), cfg.k);
  EXPECT_LE((d.f - u).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Reconstruct, ArtifactsManifestAndDeterminism) {
  const fs::path a = scratch("rec_a"), b = scratch("rec_b");
  RunConfig cfg = small_config(a);
  cfg.dump_iterates = true;
  const ReconstructOutput ra = cmd_full(cfg);
  for (const char* f : {"convergence.csv", "c_comp.csv", "c_true.csv", "metrics.json", "summary.json", "v_p2_m3.csv"})
    EXPECT_TRUE(fs::exists(a / f)) << f;
  const auto summary = io::read_json(a / "summary.json");
  for (const auto& [file, hash] : summary.at("manifest").items())
    EXPECT_EQ(io::sha256_file(a / file), hash.get<std::string>()) << file;
  EXPECT_EQ(summary.at("convergence").at("diffs").size(), 2u);
  EXPECT_EQ(io::read_text(a / "convergence.csv").substr(0, 7), "p,diff\n");

  cfg.out = b.string();
  cmd_full(cfg);
  auto sa = without_timing(io::read_json(a / "summary.json"));
  auto sb = without_timing(io::read_json(b / "summary.json"));
  sa["config"].erase("out");
  sb["config"].erase("out");
  sa["dataset"].erase("path");
  sb["dataset"].erase("path");
  EXPECT_EQ(sa, sb);

  // metrics command re-scores the written reconstruction
  cfg.out = a.string();
  const Metrics m = cmd_metrics(cfg);
  EXPECT_NEAR(m.l2_rel, ra.metrics.l2_rel, 1e-15);
}

TEST(Reconstruct, AutoCutoffOnBandLimitedData) {
  const int N0 = 4;
  const fs::path out = scratch("auto");
  RunConfig cfg = small_config(out);
  cfg.n = 9;
  cfg.n_theta = 400;
  cfg.N.reset();
  cfg.n_max = 10;
  cfg.P = 1;
  cfg.phantom = "homogeneous";
  BoundaryDataset d = cmd_gen_data(cfg);
  const AngularGrid angular(cfg.n_theta);
  const BasisSet basis = build_basis(N0, angular);
  for (Eigen::Index b = 0; b < d.f.rows(); ++b)
    for (int t = 0; t < angular.size(); ++t) {
      Complex s = 0.0;
      for (int m = 0; m < N0; ++m) s += Complex(1.0 + 0.1 * m, 0.2 * std::sin(b + m)) * basis.psi(m, t);
      d.f(b, t) = s;
    }
  io::write_dataset(dataset_dir(cfg), d, angular);
  EXPECT_EQ(cmd_choose_n(cfg, dataset_dir(cfg)).selected, N0);
  EXPECT_TRUE(fs::exists(out / "eN.csv"));
  const ReconstructOutput r = cmd_reconstruct(cfg, dataset_dir(cfg));
  EXPECT_EQ(r.N, N0);
  EXPECT_EQ(io::read_json(out / "summary.json").at("cutoff").at("selected").get<int>(), N0);
}

TEST(Reconstruct, AbortRemovesPartialArtifacts) {
  const fs::path out = scratch("abort");
  RunConfig cfg = small_config(out);
  cfg.N.reset();
  cfg.n_max = 6;
  BoundaryDataset d = cmd_gen_data(cfg);
  d.f(d.f.rows() - 2, 3) = 0.0;  // left side: the cut-off search succeeds, the logarithm fails
  io::write_dataset(dataset_dir(cfg), d, AngularGrid(cfg.n_theta));
  EXPECT_THROW(cmd_reconstruct(cfg, dataset_dir(cfg)), NumericalError);
  EXPECT_FALSE(fs::exists(out / "eN.csv"));
  EXPECT_FALSE(fs::exists(out / "summary.json"));
}

TEST(Reconstruct, DatasetMismatchIsConfigError) {
  const fs::path out = scratch("mismatch");
  RunConfig cfg = small_config(out);
  cmd_gen_data(cfg);
  cfg.n_theta = 20;
  EXPECT_THROW(cmd_reconstruct(cfg, dataset_dir(cfg)), ConfigError);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli");
  fs::create_directories(dir);
  const fs::path log = dir / "log.txt";
  {
    std::ofstream(dir / "ok.json") << R"({"n": 9, "n_theta": 8, "N": 2, "P": 1, "phantom": "test3"})";
    std::ofstream(dir / "bad.json") << R"({"n": 9, "unknown": 1})";
    std::ofstream(dir / "overflow.json")
        << R"({"n": 9, "n_theta": 8, "N": 2, "P": 1, "normalize_radius": true, "lambda": 400})";
  }
  const std::string out = " --out " + (dir / "run").string();
  EXPECT_EQ(run_cli("full --config " + (dir / "ok.json").string() + out + " --seed 4", log), 0);
  EXPECT_TRUE(fs::exists(dir / "run" / "summary.json"));
  EXPECT_EQ(run_cli("metrics --config " + (dir / "ok.json").string() + out, log), 0);
  EXPECT_EQ(run_cli("choose-n --config " + (dir / "ok.json").string() + out, log), 0);

  EXPECT_EQ(run_cli("gen-data --config " + (dir / "bad.json").string() + out, log), 2);
  EXPECT_NE(io::read_text(log).find("[config]"), std::string::npos);
  EXPECT_EQ(run_cli("gen-data --profile moon" + out, log), 2);
  EXPECT_EQ(run_cli("full --config " + (dir / "overflow.json").string() + out, log), 3);
  EXPECT_NE(io::read_text(log).find("[carleman-weight]"), std::string::npos);
}
