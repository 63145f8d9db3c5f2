#include "spinchain/experiments.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "spinchain/dynamics.hpp"
#include "spinchain/observables.hpp"
#include "spinchain/paths.hpp"
#include "spinchain/sampling.hpp"
#include "spinchain/spectral.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace spinchain::experiments {

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::FreeRelax: return "FreeRelax";
    case Kind::WindingMetastability: return "WindingMetastability";
    case Kind::GapVsBeta: return "GapVsBeta";
    case Kind::PathVerify: return "PathVerify";
    case Kind::PoincareCheck: return "PoincareCheck";
    case Kind::CenterOfMass: return "CenterOfMass";
    case Kind::BottleneckScan: return "BottleneckScan";
  }
  return "?";
}

Kind kind_from_name(const std::string& name) {
  for (Kind k : {Kind::FreeRelax, Kind::WindingMetastability, Kind::GapVsBeta, Kind::PathVerify,
                 Kind::PoincareCheck, Kind::CenterOfMass, Kind::BottleneckScan})
    if (name == kind_name(k)) return k;
  throw Error(Errc::InvalidConfig, "experiment: unknown kind '" + name + "'");
}

PlotKind plot_kind_from_name(const std::string& name) {
  if (name == "GapVsBeta") return PlotKind::GapVsBeta;
  if (name == "FlipTimeVsBeta") return PlotKind::FlipTimeVsBeta;
  if (name == "VarianceVsTime") return PlotKind::VarianceVsTime;
  throw Error(Errc::InvalidConfig, "kind: unknown plot kind '" + name + "'");
}

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out, bool required) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception&) {
      throw Error(Errc::InvalidConfig, std::string(key) + ": wrong type");
    }
  } else if (required) {
    throw Error(Errc::InvalidConfig, std::string(key) + ": required field missing");
  }
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void atomic_write(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw Error(Errc::IoError, "cannot open " + tmp.string());
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
  }
  fs::rename(tmp, path);
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Numeric CSV with a header line.
struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

Csv read_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::MissingResults, "cannot read " + path.string());
  Csv csv;
  std::string line;
  if (std::getline(is, line)) {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) csv.header.push_back(cell);
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

std::string replica_dir(const Config& cfg, size_t beta_idx) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "b%02zu", beta_idx);
  return (fs::path(cfg.output_dir) / buf).string();
}

std::string replica_file(const std::string& dir, int replica) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05d.csv", replica);
  return (fs::path(dir) / buf).string();
}

uint64_t stream_id(size_t beta_idx, int replica) {
  return (static_cast<uint64_t>(beta_idx) << 32) | static_cast<uint64_t>(replica + 1);
}

void write_manifest(const Config& cfg, const std::string& canonical) {
  json m;
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(canonical)));
  m["config_hash"] = buf;
  m["seed"] = cfg.seed;
  m["experiment"] = kind_name(cfg.experiment);
  m["version"] = "spinchain 0.1.0";
  const auto now = std::chrono::system_clock::now();
  m["timestamp_unix"] = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  atomic_write(fs::path(cfg.output_dir) / "MANIFEST.json", m.dump(2) + "\n");
}

}  // namespace

Config parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("config: not valid json: ") + e.what());
  }
  Config cfg;
  read_field(j, "schema_version", cfg.schema_version, false);
  if (cfg.schema_version != 1)
    throw Error(Errc::InvalidConfig, "schema_version: unsupported version");
  std::string kind;
  read_field(j, "experiment", kind, true);
  cfg.experiment = kind_from_name(kind);
  read_field(j, "n_dim", cfg.n_dim, true);
  read_field(j, "length", cfg.length, true);
  if (!j.contains("beta_schedule")) throw Error(Errc::InvalidConfig, "beta_schedule: required field missing");
  read_field(j, "beta_schedule", cfg.beta_schedule, true);
  std::string bc = "free";
  read_field(j, "bc", bc, true);
  cfg.bc = model::bc_from_name(bc);
  read_field(j, "replicas", cfg.replicas, true);
  read_field(j, "dt", cfg.dt, false);
  read_field(j, "total_time", cfg.total_time, false);
  read_field(j, "seed", cfg.seed, true);
  read_field(j, "output_dir", cfg.output_dir, true);
  read_field(j, "record_stride", cfg.record_stride, false);
  read_field(j, "max_time", cfg.max_time, false);
  read_field(j, "delta", cfg.delta, false);
  read_field(j, "samples", cfg.samples, false);
  read_field(j, "start_winding", cfg.start_winding, false);
  read_field(j, "oracle_grid", cfg.oracle_grid, false);
  read_field(j, "path_configs", cfg.path_configs, false);
  read_field(j, "path_lengths", cfg.path_lengths, false);
  read_field(j, "mcmc_burn_in", cfg.mcmc_burn_in, false);
  read_field(j, "threads", cfg.threads, false);
  read_field(j, "reweight_beta_max", cfg.reweight_beta_max, false);

  // validation
  if (cfg.n_dim < 2 || cfg.n_dim > kMaxDim) throw Error(Errc::InvalidConfig, "n_dim: must be in [2, 8]");
  if (cfg.length < 2) throw Error(Errc::InvalidConfig, "length: must be >= 2");
  if (cfg.beta_schedule.empty()) throw Error(Errc::InvalidConfig, "beta_schedule: must be non-empty");
  for (double b : cfg.beta_schedule)
    if (!(b >= 0.0) || !std::isfinite(b))
      throw Error(Errc::InvalidConfig, "beta_schedule: entries must be >= 0");
  if (cfg.replicas < 1) throw Error(Errc::InvalidConfig, "replicas: must be >= 1");
  if (!(cfg.dt > 0.0)) throw Error(Errc::InvalidConfig, "dt: must be > 0");
  if (!(cfg.total_time >= 0.0)) throw Error(Errc::InvalidConfig, "total_time: must be >= 0");
  if (cfg.output_dir.empty()) throw Error(Errc::InvalidConfig, "output_dir: must be non-empty");
  if (cfg.record_stride < 1) throw Error(Errc::InvalidConfig, "record_stride: must be >= 1");
  if (cfg.delta <= 0.0 || cfg.delta >= 1.0) throw Error(Errc::InvalidConfig, "delta: must be in (0, 1)");
  if (cfg.samples < 100) throw Error(Errc::InvalidConfig, "samples: must be >= 100");
  if (cfg.path_configs < 1) throw Error(Errc::InvalidConfig, "path_configs: must be >= 1");
  if (cfg.threads < 0) throw Error(Errc::InvalidConfig, "threads: must be >= 0");

  // per-experiment requirements
  switch (cfg.experiment) {
    case Kind::WindingMetastability:
    case Kind::BottleneckScan:
    case Kind::CenterOfMass:
      if (cfg.n_dim != 2) throw Error(Errc::InvalidConfig, "n_dim: this experiment needs N = 2");
      break;
    case Kind::PathVerify:
      if (cfg.n_dim != 3) throw Error(Errc::InvalidConfig, "n_dim: path verification needs N = 3");
      break;
    default: break;
  }
  if (cfg.experiment == Kind::WindingMetastability &&
      cfg.bc != model::BoundaryCondition::Periodic)
    throw Error(Errc::InvalidConfig, "bc: winding campaigns need periodic boundary conditions");
  for (double b : cfg.beta_schedule)
    if (cfg.experiment != Kind::PoincareCheck && cfg.experiment != Kind::BottleneckScan && b <= 0.0)
      throw Error(Errc::InvalidConfig, "beta_schedule: entries must be > 0 for dynamics");
  if (cfg.path_lengths.empty()) cfg.path_lengths = {cfg.length};
  for (int l : cfg.path_lengths)
    if (l < 2) throw Error(Errc::InvalidConfig, "path_lengths: entries must be >= 2");
  return cfg;
}

Config load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::InvalidConfig, "config: cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string canonical_config_json(const Config& cfg) {
  json j;
  j["schema_version"] = cfg.schema_version;
  j["experiment"] = kind_name(cfg.experiment);
  j["n_dim"] = cfg.n_dim;
  j["length"] = cfg.length;
  j["beta_schedule"] = cfg.beta_schedule;
  j["bc"] = model::bc_name(cfg.bc);
  j["replicas"] = cfg.replicas;
  j["dt"] = cfg.dt;
  j["total_time"] = cfg.total_time;
  j["seed"] = cfg.seed;
  j["record_stride"] = cfg.record_stride;
  j["max_time"] = cfg.max_time;
  j["delta"] = cfg.delta;
  j["samples"] = cfg.samples;
  j["start_winding"] = cfg.start_winding;
  j["oracle_grid"] = cfg.oracle_grid;
  j["path_configs"] = cfg.path_configs;
  j["path_lengths"] = cfg.path_lengths;
  j["mcmc_burn_in"] = cfg.mcmc_burn_in;
  j["reweight_beta_max"] = cfg.reweight_beta_max;
  return j.dump();
}

int default_thread_count() {
  if (const char* env = std::getenv("SPINCHAIN_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int workers = std::min(threads, n);
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex err_mutex;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          fn(i);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lk(err_mutex);
          failed = true;
          if (first_error.empty()) first_error = e.what();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failed) throw Error(Errc::IoError, "replica worker failed: " + first_error);
}

// ---------------------------------------------------------------------------
// campaign runners

namespace {

int effective_threads(const Config& cfg) {
  return cfg.threads > 0 ? cfg.threads : default_thread_count();
}

sampling::PeriodicMethod periodic_method(const Config& cfg, double beta) {
  return beta <= cfg.reweight_beta_max ? sampling::PeriodicMethod::Reweight
                                       : sampling::PeriodicMethod::MCMC;
}

model::SpinChain stationary_start(const Config& cfg, double beta, Rng& rng) {
  if (cfg.bc == model::BoundaryCondition::Free)
    return sampling::sample_free_gibbs(cfg.n_dim, cfg.length, beta, rng);
  sampling::PeriodicOptions opts;
  opts.mcmc_burn_in_sweeps = cfg.mcmc_burn_in;
  return sampling::sample_periodic_gibbs(cfg.n_dim, cfg.length, beta, rng,
                                         sampling::PeriodicMethod::MCMC, opts)
      .chain;
}

std::string trajectory_csv(const dynamics::TrajectoryRecord& rec) {
  std::string out = "time";
  for (const auto& n : rec.names) out += "," + n;
  out += "\n";
  for (size_t k = 0; k < rec.times.size(); ++k) {
    out += fmt_double(rec.times[k]);
    for (const auto& col : rec.columns) out += "," + fmt_double(col[k]);
    out += "\n";
  }
  return out;
}

std::vector<dynamics::NamedObservable> standard_observables() {
  return {
      {"sbar_e1",
       [](const model::SpinChain& c) {
         double s = 0.0;
         for (int i = 0; i < c.length(); ++i) s += c.spin(i)[0];
         return s / c.length();
       }},
      {"s1_s2", [](const model::SpinChain& c) { return dot(c.spin(0), c.spin(1)); }},
      {"energy", [](const model::SpinChain& c) { return model::energy(c); }},
  };
}

// Trajectory campaign shared by FreeRelax and GapVsBeta.
void run_trajectories(const Config& cfg, size_t beta_idx, double beta, std::ostream& log) {
  const std::string dir = replica_dir(cfg, beta_idx);
  fs::create_directories(dir);
  parallel_for(cfg.replicas, effective_threads(cfg), [&](int r) {
    const std::string file = replica_file(dir, r);
    if (fs::exists(file)) return;  // resume
    Rng rng(cfg.seed, stream_id(beta_idx, r));
    const model::SpinChain start = stationary_start(cfg, beta, rng);
    dynamics::IntegratorConfig icfg;
    icfg.dt = cfg.dt;
    icfg.record_stride = cfg.record_stride;
    const auto result = dynamics::simulate(start, beta, icfg, cfg.total_time,
                                           standard_observables(), rng);
    atomic_write(file, trajectory_csv(result.record));
  });
  log << "beta " << beta << ": " << cfg.replicas << " trajectories in " << dir << "\n";
}

std::vector<std::vector<double>> load_series_column(const Config& cfg, size_t beta_idx,
                                                    const std::string& column,
                                                    double drop_fraction) {
  const std::string dir = replica_dir(cfg, beta_idx);
  std::vector<std::vector<double>> out;
  for (int r = 0; r < cfg.replicas; ++r) {
    const Csv csv = read_csv(replica_file(dir, r));
    size_t col = csv.header.size();
    for (size_t c = 0; c < csv.header.size(); ++c)
      if (csv.header[c] == column) col = c;
    if (col == csv.header.size()) throw Error(Errc::MissingResults, "column " + column + " absent");
    std::vector<double> series;
    const size_t skip = static_cast<size_t>(drop_fraction * csv.rows.size());
    for (size_t k = skip; k < csv.rows.size(); ++k) series.push_back(csv.rows[k][col]);
    out.push_back(std::move(series));
  }
  return out;
}

void run_free_relax(const Config& cfg, std::ostream& log) {
  json summary;
  summary["experiment"] = kind_name(cfg.experiment);
  auto gaps = json::array();
  for (size_t bi = 0; bi < cfg.beta_schedule.size(); ++bi) {
    const double beta = cfg.beta_schedule[bi];
    run_trajectories(cfg, bi, beta, log);
    json row;
    row["beta"] = beta;
    if (cfg.replicas >= 20) {
      const auto series = load_series_column(cfg, bi, "sbar_e1", 0.1);
      try {
        const auto est = spectral::gap_estimate_autocorr(series, cfg.dt * cfg.record_stride,
                                                         cfg.n_dim, cfg.length, beta, cfg.bc);
        row["gap"] = est.value;
        row["t_rel"] = 1.0 / est.value;
        row["ci_lo"] = est.ci.lo;
        row["ci_hi"] = est.ci.hi;
      } catch (const Error& e) {
        row["gap_error"] = e.what();
      }
    }
    gaps.push_back(row);
  }
  summary["per_beta"] = gaps;
  atomic_write(fs::path(cfg.output_dir) / "summary.json", summary.dump(2) + "\n");
}

void run_gap_vs_beta(const Config& cfg, std::ostream& log) {
  std::string csv = "n_dim,length,beta,bc,method,gap,ci_lo,ci_hi\n";
  for (size_t bi = 0; bi < cfg.beta_schedule.size(); ++bi) {
    const double beta = cfg.beta_schedule[bi];
    run_trajectories(cfg, bi, beta, log);
    const auto series = load_series_column(cfg, bi, "sbar_e1", 0.1);
    const auto est = spectral::gap_estimate_autocorr(series, cfg.dt * cfg.record_stride,
                                                     cfg.n_dim, cfg.length, beta, cfg.bc);
    csv += std::to_string(cfg.n_dim) + "," + std::to_string(cfg.length) + "," + fmt_double(beta) +
           "," + model::bc_name(cfg.bc) + ",autocorr," + fmt_double(est.value) + "," +
           fmt_double(est.ci.lo) + "," + fmt_double(est.ci.hi) + "\n";
    if (cfg.oracle_grid > 0 && cfg.n_dim == 2 && cfg.length <= 3) {
      const auto oracle = spectral::gap_oracle_xy(cfg.length, beta, cfg.oracle_grid, cfg.bc);
      csv += std::to_string(cfg.n_dim) + "," + std::to_string(cfg.length) + "," +
             fmt_double(beta) + "," + model::bc_name(cfg.bc) + ",oracle," +
             fmt_double(oracle.value) + "," + fmt_double(oracle.ci.lo) + "," +
             fmt_double(oracle.ci.hi) + "\n";
    }
  }
  atomic_write(fs::path(cfg.output_dir) / "gaps.csv", csv);
}

void run_winding(const Config& cfg, std::ostream& log) {
  for (size_t bi = 0; bi < cfg.beta_schedule.size(); ++bi) {
    const double beta = cfg.beta_schedule[bi];
    const std::string dir = replica_dir(cfg, bi);
    fs::create_directories(dir);
    const double max_time =
        cfg.max_time > 0.0 ? cfg.max_time : 1000.0 + 50.0 * std::exp(2.0 * beta) / cfg.length;
    parallel_for(cfg.replicas, effective_threads(cfg), [&](int r) {
      const std::string file = replica_file(dir, r);
      if (fs::exists(file)) return;
      Rng rng(cfg.seed, stream_id(bi, r));
      const auto start = model::SpinChain::ring(cfg.length, cfg.start_winding,
                                                model::BoundaryCondition::Periodic);
      dynamics::IntegratorConfig icfg;
      icfg.dt = cfg.dt;
      const auto flip = observables::hitting_time_winding_flip(start, beta, icfg, rng, max_time);
      std::string row = "replica,beta,length,flip_time,censored\n";
      row += std::to_string(r) + "," + fmt_double(beta) + "," + std::to_string(cfg.length) + ",";
      row += fmt_double(flip.time.value_or(max_time));
      row += flip.time ? ",0\n" : ",1\n";
      atomic_write(file, row);
    });
    log << "beta " << beta << ": flip campaign done\n";
  }
  // aggregate
  std::string all = "replica,beta,length,flip_time,censored\n";
  std::vector<double> betas, mean_logs;
  for (size_t bi = 0; bi < cfg.beta_schedule.size(); ++bi) {
    std::vector<double> logs;
    for (int r = 0; r < cfg.replicas; ++r) {
      const Csv csv = read_csv(replica_file(replica_dir(cfg, bi), r));
      const auto& row = csv.rows.at(0);
      all += std::to_string(static_cast<int>(row[0])) + "," + fmt_double(row[1]) + "," +
             std::to_string(static_cast<int>(row[2])) + "," + fmt_double(row[3]) + "," +
             std::to_string(static_cast<int>(row[4])) + "\n";
      if (row[4] == 0.0 && row[3] > 0.0) logs.push_back(std::log(row[3]));
    }
    if (!logs.empty()) {
      betas.push_back(cfg.beta_schedule[bi]);
      mean_logs.push_back(stats::mean(logs));
    }
  }
  atomic_write(fs::path(cfg.output_dir) / "fliptimes.csv", all);
  json summary;
  summary["experiment"] = kind_name(cfg.experiment);
  summary["beta"] = betas;
  summary["mean_log_flip_time"] = mean_logs;
  if (betas.size() >= 2) {
    const auto fit = stats::fit_line(betas, mean_logs);
    summary["slope"] = fit.slope;
    summary["slope_stderr"] = fit.slope_stderr;
  }
  atomic_write(fs::path(cfg.output_dir) / "summary.json", summary.dump(2) + "\n");
}

void run_center_of_mass(const Config& cfg, std::ostream& log) {
  if (cfg.bc != model::BoundaryCondition::Free)
    throw Error(Errc::InvalidConfig, "bc: center-of-mass campaign uses free boundaries");
  json summary;
  auto per_beta = json::array();
  for (size_t bi = 0; bi < cfg.beta_schedule.size(); ++bi) {
    const double beta = cfg.beta_schedule[bi];
    const std::string dir = replica_dir(cfg, bi);
    fs::create_directories(dir);
    parallel_for(cfg.replicas, effective_threads(cfg), [&](int r) {
      const std::string file = replica_file(dir, r);
      if (fs::exists(file)) return;
      Rng rng(cfg.seed, stream_id(bi, r));
      const model::SpinChain start = sampling::sample_free_gibbs(cfg.n_dim, cfg.length, beta, rng);
      dynamics::IntegratorConfig icfg;
      icfg.dt = cfg.dt;
      icfg.record_stride = cfg.record_stride;
      const auto trace = dynamics::center_of_mass_trace(start, beta, icfg, cfg.total_time, rng);
      std::string csv = "time,xbar\n";
      for (size_t k = 0; k < trace.times.size(); ++k)
        csv += fmt_double(trace.times[k]) + "," + fmt_double(trace.xbar[k]) + "\n";
      atomic_write(file, csv);
    });
    // Var[xbar(t) - xbar(0)] across replicas, per recorded time
    std::vector<std::vector<double>> xbars;
    std::vector<double> times;
    for (int r = 0; r < cfg.replicas; ++r) {
      const Csv csv = read_csv(replica_file(dir, r));
      std::vector<double> x;
      for (const auto& row : csv.rows) x.push_back(row[1]);
      if (r == 0)
        for (const auto& row : csv.rows) times.push_back(row[0]);
      xbars.push_back(std::move(x));
    }
    std::vector<double> var_t, fit_times;
    for (size_t k = 1; k < times.size(); ++k) {
      std::vector<double> d;
      for (const auto& x : xbars) d.push_back(x[k] - x[0]);
      var_t.push_back(stats::variance(d));
      fit_times.push_back(times[k]);
    }
    const auto fit = stats::fit_line(fit_times, var_t);
    json row;
    row["beta"] = beta;
    row["slope"] = fit.slope;
    row["slope_stderr"] = fit.slope_stderr;
    row["expected_slope"] = 2.0 / (beta * cfg.length);
    per_beta.push_back(row);
    std::string vcsv = "time,var,stderr\n";
    for (size_t k = 0; k < var_t.size(); ++k)
      vcsv += fmt_double(fit_times[k]) + "," + fmt_double(var_t[k]) + "," +
              fmt_double(var_t[k] * std::sqrt(2.0 / std::max(1, cfg.replicas - 1))) + "\n";
    atomic_write(fs::path(dir) / "variance.csv", vcsv);
    log << "beta " << beta << ": com slope " << fit.slope << " expected "
        << 2.0 / (beta * cfg.length) << "\n";
  }
  summary["experiment"] = kind_name(cfg.experiment);
  summary["per_beta"] = per_beta;
  atomic_write(fs::path(cfg.output_dir) / "summary.json", summary.dump(2) + "\n");
}

void run_bottleneck(const Config& cfg, std::ostream& log) {
  std::string csv = "beta,delta,p_A,p_B_minus_A,p_Bc,p_B0,p_B1,ratio,censored\n";
  std::vector<double> betas, log_ratios;
  for (size_t bi = 0; bi < cfg.beta_schedule.size(); ++bi) {
    const double beta = cfg.beta_schedule[bi];
    Rng rng(cfg.seed, stream_id(bi, 0));
    sampling::PeriodicOptions opts;
    opts.mcmc_burn_in_sweeps = cfg.mcmc_burn_in;
    const auto batch = sampling::sample_periodic_batch(cfg.n_dim, cfg.length, beta,
                                                       static_cast<int>(cfg.samples), rng,
                                                       periodic_method(cfg, beta), opts);
    const auto res = spectral::bottleneck_ratio(batch.samples, cfg.delta);
    csv += fmt_double(beta) + "," + fmt_double(cfg.delta) + "," + fmt_double(res.p_A) + "," +
           fmt_double(res.p_B_minus_A) + "," + fmt_double(res.p_Bc) + "," + fmt_double(res.p_B0) +
           "," + fmt_double(res.p_B1) + "," + fmt_double(res.ratio) + "," +
           (res.censored ? "1" : "0") + "\n";
    if (!res.censored && res.ratio > 0.0) {
      betas.push_back(beta);
      log_ratios.push_back(std::log(res.ratio));
    }
    log << "beta " << beta << ": ratio " << res.ratio << (res.censored ? " (censored)" : "")
        << "\n";
  }
  atomic_write(fs::path(cfg.output_dir) / "bottleneck.csv", csv);
  json summary;
  summary["experiment"] = kind_name(cfg.experiment);
  if (betas.size() >= 2) {
    const auto fit = stats::fit_line(betas, log_ratios);
    summary["log_ratio_slope"] = fit.slope;
    summary["slope_stderr"] = fit.slope_stderr;
  }
  atomic_write(fs::path(cfg.output_dir) / "summary.json", summary.dump(2) + "\n");
}

void run_poincare(const Config& cfg, std::ostream& log) {
  Rng rng(cfg.seed, 1);
  json report;
  auto c1_checks = json::array();
  for (double a : {0.0, 1.0, 2.0}) {
    for (double b : {0.0, 1.0, 4.0, 16.0}) {
      std::vector<spectral::TrigPoly> fs;
      for (int i = 0; i < 50; ++i) fs.push_back(spectral::TrigPoly::random(6, rng));
      const auto rep = spectral::verify_poincare_interval(a, b, fs);
      json row;
      row["a"] = a;
      row["b"] = b;
      row["constant"] = rep.constant;
      row["max_ratio"] = rep.max_ratio;
      row["pass"] = rep.pass;
      c1_checks.push_back(row);
    }
  }
  report["c1"] = c1_checks;
  auto c3_checks = json::array();
  for (double b : {0.0, 1.0, 4.0, 16.0}) {
    std::vector<spectral::TrigPoly> fs;
    for (int i = 0; i < 50; ++i) fs.push_back(spectral::TrigPoly::random(6, rng));
    const auto rep = spectral::verify_poincare_circle(b, fs);
    json row;
    row["b"] = b;
    row["constant"] = rep.constant;
    row["max_ratio"] = rep.max_ratio;
    row["pass"] = rep.pass;
    c3_checks.push_back(row);
  }
  report["c3"] = c3_checks;
  auto c2_checks = json::array();
  for (int n : {2, 3, 4}) {
    const auto rep = spectral::verify_poincare_sphere(n, 40, 100000, rng);
    json row;
    row["n_dim"] = n;
    row["constant"] = rep.constant;
    row["max_ratio"] = rep.max_ratio;
    row["pass"] = rep.pass;
    c2_checks.push_back(row);
  }
  report["c2"] = c2_checks;
  const auto tens = spectral::verify_tensorized_bound(std::max(3, cfg.n_dim),
                                                      cfg.beta_schedule.front(), 100, rng);
  report["tensorized"] = {{"max_ratio", tens.max_ratio}, {"pass", tens.pass}};
  atomic_write(fs::path(cfg.output_dir) / "poincare.json", report.dump(2) + "\n");
  log << "poincare report written\n";
}

void run_path_verify(const Config& cfg, std::ostream& log) {
  const double beta = cfg.beta_schedule.front();
  json summary;
  auto per_length = json::array();
  std::string cert_lines;
  const paths::PathEpsilons eps;
  const auto cover = paths::build_cover(eps.cover);
  const int n_labels = 2 * static_cast<int>(cover.points.size());
  for (int L : cfg.path_lengths) {
    Rng rng(cfg.seed, static_cast<uint64_t>(L));
    // arctic measure estimate by periodic reweighting
    double mu_arctic = 0.0;
    {
      double sw = 0.0, sa = 0.0;
      for (long long s = 0; s < cfg.samples; ++s) {
        const auto ws = sampling::sample_periodic_gibbs(3, L, beta, rng,
                                                        sampling::PeriodicMethod::Reweight);
        const double w = std::exp(ws.log_weight - beta);
        sw += w;
        if (model::in_arctic(ws.chain)) sa += w;
      }
      mu_arctic = sa > 0.0 ? sa / sw : 3.0 / static_cast<double>(cfg.samples);
    }
    int pass = 0, fail = 0;
    double worst_speed_align = 0.0, worst_speed_other = 0.0, worst_lj = 0.0;
    for (int c = 0; c < 2 * cfg.path_configs; ++c) {
      const bool gibbs = c >= cfg.path_configs;
      model::SpinChain chain(3, L, model::BoundaryCondition::Periodic);
      if (gibbs) {
        auto ws = sampling::sample_periodic_gibbs(3, L, beta, rng,
                                                  sampling::PeriodicMethod::Reweight);
        chain = ws.chain;
      } else {
        for (int i = 0; i < L; ++i) chain.set_spin(i, sampling::uniform_sphere(3, rng));
      }
      const paths::CanonicalPath path(chain, cover, eps);
      const auto trace = paths::sample_path_trace(path, 100);
      const auto cert = paths::certify_path(trace, beta, mu_arctic, n_labels);
      (cert.pass ? pass : fail)++;
      worst_speed_align = std::max(worst_speed_align, cert.max_speed_sq_align);
      worst_speed_other = std::max(worst_speed_other, cert.max_speed_sq_other);
      worst_lj = std::max(worst_lj, cert.max_log_jacobian);
      json c_line;
      c_line["length"] = L;
      c_line["family"] = gibbs ? "gibbs" : "uniform";
      c_line["sigma"] = path.label().sigma;
      c_line["cover_index"] = path.label().cover_index;
      c_line["pass"] = cert.pass;
      c_line["endpoint_in_arctic"] = cert.endpoint_in_arctic;
      c_line["max_step_energy_rise"] = cert.max_step_energy_rise;
      c_line["max_speed_sq_align"] = cert.max_speed_sq_align;
      c_line["max_speed_sq_other"] = cert.max_speed_sq_other;
      c_line["log_jacobian"] = cert.final_log_jacobian;
      c_line["log_jacobian_budget"] = cert.log_jacobian_budget;
      c_line["implied_t_rel_bound"] = cert.implied_t_rel_bound;
      cert_lines += c_line.dump() + "\n";
    }
    json row;
    row["length"] = L;
    row["pass"] = pass;
    row["fail"] = fail;
    row["mu_arctic"] = mu_arctic;
    row["n_labels"] = n_labels;
    row["worst_speed_sq_align"] = worst_speed_align;
    row["worst_speed_sq_other"] = worst_speed_other;
    row["worst_log_jacobian"] = worst_lj;
    per_length.push_back(row);
    log << "L=" << L << ": " << pass << " certified, " << fail << " failed\n";
  }
  // Hessian spectra in the arctic, reported but not asserted.
  {
    Rng rng(cfg.seed, 0xA5C71Cull);
    auto hess = json::array();
    int found = 0;
    for (long long s = 0; s < cfg.samples && found < 5; ++s) {
      const auto ws = sampling::sample_periodic_gibbs(3, cfg.path_lengths.front(), beta, rng,
                                                      sampling::PeriodicMethod::Reweight);
      if (!model::in_arctic(ws.chain)) continue;
      ++found;
      const auto eigs = model::hessian_spectrum_in_chart(ws.chain);
      hess.push_back({{"min_eig", eigs.front()}, {"max_eig", eigs.back()}});
    }
    summary["arctic_hessian_spectra"] = hess;
  }
  summary["experiment"] = kind_name(cfg.experiment);
  summary["per_length"] = per_length;
  summary["eps_contract"] = eps.contract;
  summary["eps_cover"] = eps.cover;
  summary["eps_align"] = eps.align;
  summary["cover_points"] = cover.points.size();
  atomic_write(fs::path(cfg.output_dir) / "certificates.jsonl", cert_lines);
  atomic_write(fs::path(cfg.output_dir) / "summary.json", summary.dump(2) + "\n");
}

}  // namespace

int run(const Config& cfg, std::ostream& log) {
  fs::create_directories(cfg.output_dir);
  const std::string canonical = canonical_config_json(cfg);
  atomic_write(fs::path(cfg.output_dir) / "config.json", canonical + "\n");
  switch (cfg.experiment) {
    case Kind::FreeRelax: run_free_relax(cfg, log); break;
    case Kind::WindingMetastability: run_winding(cfg, log); break;
    case Kind::GapVsBeta: run_gap_vs_beta(cfg, log); break;
    case Kind::PathVerify: run_path_verify(cfg, log); break;
    case Kind::PoincareCheck: run_poincare(cfg, log); break;
    case Kind::CenterOfMass: run_center_of_mass(cfg, log); break;
    case Kind::BottleneckScan: run_bottleneck(cfg, log); break;
  }
  write_manifest(cfg, canonical);
  return 0;
}

std::vector<std::string> emit_plot_data(const std::string& results_dir, PlotKind kind) {
  const fs::path dir(results_dir);
  if (!fs::exists(dir)) throw Error(Errc::MissingResults, "no results at " + results_dir);
  std::vector<std::string> written;
  if (kind == PlotKind::GapVsBeta) {
    const fs::path src = dir / "gaps.csv";
    if (!fs::exists(src)) throw Error(Errc::MissingResults, "gaps.csv not found");
    std::ifstream is(src);
    std::string line;
    std::getline(is, line);  // header
    std::map<std::string, std::string> by_method;
    while (std::getline(is, line)) {
      std::stringstream ss(line);
      std::string cell;
      std::vector<std::string> cells;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      if (cells.size() < 8) continue;
      const double gap = std::strtod(cells[5].c_str(), nullptr);
      const double lo = std::strtod(cells[6].c_str(), nullptr);
      const double hi = std::strtod(cells[7].c_str(), nullptr);
      by_method[cells[4]] += cells[2] + " " + cells[5] + " " + fmt_double(0.5 * (hi - lo)) + "\n";
      (void)gap;
    }
    if (by_method.empty()) throw Error(Errc::MissingResults, "gaps.csv has no data rows");
    for (const auto& [method, content] : by_method) {
      const fs::path out = dir / ("plot_gap_" + method + ".dat");
      atomic_write(out, content);
      written.push_back(out.string());
    }
  } else if (kind == PlotKind::FlipTimeVsBeta) {
    const fs::path src = dir / "fliptimes.csv";
    if (!fs::exists(src)) throw Error(Errc::MissingResults, "fliptimes.csv not found");
    const Csv csv = read_csv(src);
    std::map<double, std::vector<double>> logs;
    for (const auto& row : csv.rows)
      if (row.size() >= 5 && row[4] == 0.0 && row[3] > 0.0) logs[row[1]].push_back(std::log(row[3]));
    if (logs.empty()) throw Error(Errc::MissingResults, "no uncensored flip times");
    std::string content;
    for (const auto& [beta, xs] : logs) {
      const double m = stats::mean(xs);
      const double se = xs.size() > 1 ? std::sqrt(stats::variance(xs) / xs.size()) : 0.0;
      content += fmt_double(beta) + " " + fmt_double(m) + " " + fmt_double(se) + "\n";
    }
    const fs::path out = dir / "plot_fliptime.dat";
    atomic_write(out, content);
    written.push_back(out.string());
  } else {
    bool any = false;
    for (size_t bi = 0;; ++bi) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "b%02zu", bi);
      const fs::path src = dir / buf / "variance.csv";
      if (!fs::exists(src)) break;
      any = true;
      const Csv csv = read_csv(src);
      std::string content;
      for (const auto& row : csv.rows)
        content += fmt_double(row[0]) + " " + fmt_double(row[1]) + " " + fmt_double(row[2]) + "\n";
      const fs::path out = dir / (std::string("plot_variance_") + buf + ".dat");
      atomic_write(out, content);
      written.push_back(out.string());
    }
    if (!any) throw Error(Errc::MissingResults, "no variance.csv under " + results_dir);
  }
  return written;
}

}  // namespace spinchain::experiments
