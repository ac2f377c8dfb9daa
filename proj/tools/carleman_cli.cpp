#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "carleman/pipeline.hpp"

namespace {

constexpr int exit_config = 2;
constexpr int exit_numerical = 3;

struct Options {
  std::string config;
  std::string out;
  std::string profile = "desk";
  std::optional<std::uint64_t> seed;
  std::string data;
};

carleman::RunConfig resolve(const Options& opt) {
  carleman::RunConfig cfg = opt.config.empty() ? carleman::make_profile(opt.profile)
                                               : carleman::load_config(opt.config, opt.profile);
  if (!opt.out.empty()) cfg.out = opt.out;
  if (opt.seed) cfg.seed = *opt.seed;
  cfg.validate();
  return cfg;
}

std::filesystem::path data_path(const Options& opt, const carleman::RunConfig& cfg) {
  return opt.data.empty() ? carleman::dataset_dir(cfg) : std::filesystem::path(opt.data);
}

void report(const carleman::ReconstructOutput& r) {
  std::cout << "N = " << r.N << '\n';
  for (std::size_t p = 0; p < r.run.diffs.size(); ++p)
    std::cout << "p = " << p + 1 << "  diff = " << r.run.diffs[p] << '\n';
  for (const auto& w : r.run.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << carleman::to_json(r.metrics).dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Carleman contraction reconstruction of a dielectric constant from boundary data"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  app.add_option("--config", opt.config, "flat JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", opt.out, "output directory");
  app.add_option("--profile", opt.profile, "default parameter set")->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--seed", opt.seed, "noise seed");

  auto* gen = app.add_subcommand("gen-data", "simulate boundary data into <out>/dataset");
  auto* choose = app.add_subcommand("choose-n", "select the cut-off N from the data, write eN.csv");
  auto* recon = app.add_subcommand("reconstruct", "run the inversion on an existing dataset");
  auto* full = app.add_subcommand("full", "gen-data followed by reconstruct");
  auto* metrics = app.add_subcommand("metrics", "re-score <out>/c_comp.csv against the phantom");
  for (auto* sub : {choose, recon})
    sub->add_option("--data", opt.data, "dataset directory (default <out>/dataset)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_config;
  }

  std::string stage = "config";
  try {
    const carleman::RunConfig cfg = resolve(opt);
    if (gen->parsed()) {
      stage = "gen-data";
      const auto data = carleman::cmd_gen_data(cfg);
      std::cout << "dataset written to " << carleman::dataset_dir(cfg).string() << " (" << data.f.rows()
                << " boundary nodes x " << data.n_theta << " angles)\n";
    } else if (choose->parsed()) {
      stage = "choose-n";
      const auto cut = carleman::cmd_choose_n(cfg, data_path(opt, cfg));
      std::cout << cut.selected << '\n';
    } else if (recon->parsed()) {
      stage = "reconstruct";
      report(carleman::cmd_reconstruct(cfg, data_path(opt, cfg)));
    } else if (full->parsed()) {
      stage = "full";
      report(carleman::cmd_full(cfg));
    } else if (metrics->parsed()) {
      stage = "metrics";
      std::cout << carleman::to_json(carleman::cmd_metrics(cfg)).dump(2) << '\n';
    }
  } catch (const carleman::ConfigError& e) {
    std::cerr << "[config] " << e.what() << '\n';
    return exit_config;
  } catch (const carleman::NumericalError& e) {
    std::cerr << "[" << e.stage() << "] " << e.what() << '\n';
    return exit_numerical;
  } catch (const std::exception& e) {
    std::cerr << "[" << stage << "] " << e.what() << '\n';
    return exit_numerical;
  }
  return 0;
}
