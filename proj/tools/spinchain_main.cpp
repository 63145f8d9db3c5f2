#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "spinchain/error.hpp"
#include "spinchain/experiments.hpp"

namespace ex = spinchain::experiments;

int main(int argc, char** argv) {
  CLI::App app{"spin-chain simulation campaigns"};
  app.require_subcommand(1);

  std::string config_path, results_dir, plot_kind;
  int replicas_override = 0;
  long long seed_override = -1;
  int threads = 0;

  auto* run_cmd = app.add_subcommand("run", "run a campaign from a config file");
  run_cmd->add_option("config", config_path, "campaign config (json)")->required();
  run_cmd->add_option("--replicas-override", replicas_override, "override the replica count");
  run_cmd->add_option("--seed", seed_override, "override the seed");
  run_cmd->add_option("--threads", threads, "worker threads (default SPINCHAIN_THREADS or 1)");

  auto* validate_cmd = app.add_subcommand("validate", "validate a config file");
  validate_cmd->add_option("config", config_path, "campaign config (json)")->required();

  auto* plot_cmd = app.add_subcommand("plotdata", "emit plot-ready data from results");
  plot_cmd->add_option("results", results_dir, "results directory")->required();
  plot_cmd->add_option("--kind", plot_kind, "GapVsBeta | FlipTimeVsBeta | VarianceVsTime")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed() || validate_cmd->parsed()) {
      ex::Config cfg;
      try {
        cfg = ex::load_config_file(config_path);
      } catch (const spinchain::Error& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return 2;
      }
      if (validate_cmd->parsed()) {
        std::cout << "ok: " << ex::kind_name(cfg.experiment) << " N=" << cfg.n_dim
                  << " L=" << cfg.length << " replicas=" << cfg.replicas << "\n";
        return 0;
      }
      if (replicas_override > 0) cfg.replicas = replicas_override;
      if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);
      if (threads > 0) cfg.threads = threads;
      return ex::run(cfg, std::cout);
    }
    if (plot_cmd->parsed()) {
      const auto files = ex::emit_plot_data(results_dir, ex::plot_kind_from_name(plot_kind));
      for (const auto& f : files) std::cout << f << "\n";
      return 0;
    }
  } catch (const spinchain::Error& e) {
    if (e.code() == spinchain::Errc::InvalidConfig) {
      std::cerr << "invalid config: " << e.what() << "\n";
      return 2;
    }
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
