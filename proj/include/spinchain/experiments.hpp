#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "spinchain/model.hpp"

namespace spinchain::experiments {

enum class Kind {
  FreeRelax,
  WindingMetastability,
  GapVsBeta,
  PathVerify,
  PoincareCheck,
  CenterOfMass,
  BottleneckScan,
};

const char* kind_name(Kind k);
Kind kind_from_name(const std::string& name);

struct Config {
  int schema_version = 1;
  Kind experiment = Kind::FreeRelax;
  int n_dim = 2;
  int length = 8;
  std::vector<double> beta_schedule;
  model::BoundaryCondition bc = model::BoundaryCondition::Free;
  int replicas = 1;
  double dt = 1e-3;
  double total_time = 1.0;
  uint64_t seed = 1;
  std::string output_dir;
  // optional knobs (defaults used when absent from the file)
  int record_stride = 100;
  double max_time = 0.0;        // winding flips; 0 derives from beta
  double delta = 0.3;           // bottleneck width
  long long samples = 200000;   // Monte-Carlo sample counts
  int start_winding = 1;        // winding campaign initial sector
  int oracle_grid = 0;          // GapVsBeta: add the grid oracle when > 0
  int path_configs = 100;       // PathVerify: configurations per family
  std::vector<int> path_lengths;  // PathVerify: chain lengths (default {length})
  int mcmc_burn_in = 200;
  int threads = 0;              // 0: SPINCHAIN_THREADS or 1
  double reweight_beta_max = 6.0;  // periodic sampling switches to MCMC above
};

// Parse and validate; throws InvalidConfig with the offending field named.
Config parse_config(const std::string& json_text);
Config load_config_file(const std::string& path);
std::string canonical_config_json(const Config& cfg);

// Runs the campaign; creates output_dir, writes per-replica files atomically,
// skips replica files that already exist, and finishes with aggregated
// outputs plus MANIFEST.json. Returns 0 on success.
int run(const Config& cfg, std::ostream& log);

enum class PlotKind { GapVsBeta, FlipTimeVsBeta, VarianceVsTime };
PlotKind plot_kind_from_name(const std::string& name);

// Emits whitespace-separated (x, y[, yerr]) files next to the results.
// Throws MissingResults when the inputs are absent.
std::vector<std::string> emit_plot_data(const std::string& results_dir, PlotKind kind);

// Replica-parallel helper: runs fn(0..n-1) on `threads` workers; results
// must not depend on scheduling.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

int default_thread_count();

}  // namespace spinchain::experiments
