#include "groupobs/cli.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>
#include <vector>

#include <json.hpp>

namespace groupobs {

namespace {

void append_g17(std::string& out, double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  out += buf;
}

ScenarioConfig effective_config(const CliInvocation& inv) {
  ScenarioConfig cfg = parse_config(inv.config_path);
  if (inv.seed) cfg.seed = *inv.seed;
  if (inv.decimate) {
    cfg.decimate = *inv.decimate;
    if (cfg.decimate < 1) throw ConfigError("decimate: must be >= 1");
  }
  return cfg;
}

int thread_budget(int wanted) {
  int budget = static_cast<int>(std::thread::hardware_concurrency());
  if (budget <= 0) budget = 1;
  if (const char* env = std::getenv("OBS_NUM_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) budget = std::min(budget, cap);
  }
  return std::max(1, std::min(wanted, budget));
}

}  // namespace

std::string trajectory_csv(const TrajectoryLog& log) {
  std::string out = "t,err_metric,err_rot_deg";
  for (int c = 0; c < log.w_cols; ++c) out += ",err_W_col" + std::to_string(c);
  out += ",err_z,err_bw,err_brho,gram_obs_min,gram_det_min,recon_residual\n";
  for (const auto& row : log.rows) {
    append_g17(out, row.t);
    out += ',';
    append_g17(out, row.err_metric);
    out += ',';
    append_g17(out, row.err_rot_deg);
    for (int c = 0; c < log.w_cols; ++c) {
      out += ',';
      append_g17(out, row.err_W(c));
    }
    out += ',';
    append_g17(out, row.err_z);
    out += ',';
    append_g17(out, row.err_bw);
    out += ',';
    append_g17(out, row.err_brho);
    out += ',';
    append_g17(out, row.gram_obs_min);
    out += ',';
    append_g17(out, row.gram_det_min);
    out += ',';
    append_g17(out, row.recon_residual);
    out += '\n';
  }
  return out;
}

std::string summary_json(const ScenarioConfig& config, const TrajectoryLog& log) {
  nlohmann::json j;
  j["version"] = 1;
  j["scenario"] = config.scenario;
  j["seed"] = config.seed;
  j["rows"] = log.rows.size();
  const auto& last = log.final_row();
  j["final"] = {{"t", last.t},
                {"err_metric", last.err_metric},
                {"err_rot_deg", last.err_rot_deg},
                {"err_z", last.err_z},
                {"err_bw", last.err_bw},
                {"err_brho", last.err_brho}};
  j["log_slope"] = log.log_slope;
  j["slope_valid"] = log.slope_valid;
  j["rank"] = {{"rank", log.rank.rank},
               {"sigma_min", log.rank.sigma_min},
               {"ges_eligible", log.rank.ges_eligible}};
  if (log.gram_evaluations > 0) {
    j["gramian"] = {{"obs_min", log.gram_obs_overall},
                    {"det_min", log.gram_det_overall},
                    {"evaluations", log.gram_evaluations}};
  }
  j["p_eigen"] = {{"min", log.p_eig_min},
                  {"max", log.p_eig_max},
                  {"ratio", log.p_eig_min > 0.0 ? log.p_eig_max / log.p_eig_min : 0.0}};
  return j.dump(2) + "\n";
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

void write_run_outputs(const std::filesystem::path& dir, const ScenarioConfig& cfg,
                       const TrajectoryLog& log) {
  std::filesystem::create_directories(dir);
  atomic_write(dir / "trajectory.csv", trajectory_csv(log));
  atomic_write(dir / "summary.json", summary_json(cfg, log));
}

int cmd_run(const CliInvocation& inv) {
  const ScenarioConfig cfg = effective_config(inv);
  const TrajectoryLog log = run_scenario(cfg);
  if (!log.rank.ges_eligible && !inv.quiet) {
    std::cerr << "warning: rank(D) < d+n+m, GES is not guaranteed for this configuration\n";
  }
  write_run_outputs(inv.out_dir, cfg, log);
  if (!inv.quiet) {
    std::cout << "run: " << cfg.scenario << " seed=" << cfg.seed
              << " final_err=" << log.final_row().err_metric << " slope=" << log.log_slope
              << "\n";
  }
  return kExitOk;
}

int cmd_sweep(const CliInvocation& inv) {
  const ScenarioConfig base = effective_config(inv);
  const int count = inv.sweep_seeds;
  if (count < 1) throw ConfigError("seeds: must be >= 1");

  std::vector<TrajectoryLog> logs(count);
  std::vector<std::string> errors(count);
  std::atomic<int> next{0};
  const int workers = thread_budget(count);

  auto worker = [&]() {
    for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        ScenarioConfig cfg = base;
        cfg.seed = base.seed + static_cast<std::uint64_t>(i);
        logs[i] = run_scenario(cfg);
        ScenarioConfig echo = cfg;
        write_run_outputs(std::filesystem::path(inv.out_dir) /
                              ("run_" + std::to_string(cfg.seed)),
                          echo, logs[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  for (int i = 0; i < count; ++i) {
    if (!errors[i].empty()) {
      throw std::runtime_error("seed " + std::to_string(base.seed + i) + ": " + errors[i]);
    }
  }

  nlohmann::json agg;
  agg["version"] = 1;
  agg["scenario"] = base.scenario;
  agg["base_seed"] = base.seed;
  agg["count"] = count;
  double slope_sum = 0.0, slope_sq = 0.0;
  nlohmann::json per_seed = nlohmann::json::array();
  for (int i = 0; i < count; ++i) {
    const auto& log = logs[i];
    slope_sum += log.log_slope;
    slope_sq += log.log_slope * log.log_slope;
    per_seed.push_back({{"seed", base.seed + static_cast<std::uint64_t>(i)},
                        {"final_err_metric", log.final_row().err_metric},
                        {"log_slope", log.log_slope},
                        {"slope_valid", log.slope_valid}});
  }
  const double mean = slope_sum / count;
  agg["slope_mean"] = mean;
  agg["slope_std"] = count > 1 ? std::sqrt(std::max(0.0, slope_sq / count - mean * mean)) : 0.0;
  agg["runs"] = per_seed;
  std::filesystem::create_directories(inv.out_dir);
  atomic_write(std::filesystem::path(inv.out_dir) / "sweep_summary.json", agg.dump(2) + "\n");
  if (!inv.quiet) {
    std::cout << "sweep: " << count << " seeds, mean slope " << mean << "\n";
  }
  return kExitOk;
}

int cmd_gramian(const CliInvocation& inv) {
  ScenarioConfig cfg = effective_config(inv);
  cfg.gramian.enabled = true;
  const TrajectoryLog log = run_scenario(cfg);
  std::string csv = "t,gram_obs_min,gram_det_min\n";
  for (const auto& row : log.rows) {
    append_g17(csv, row.t);
    csv += ',';
    append_g17(csv, row.gram_obs_min);
    csv += ',';
    append_g17(csv, row.gram_det_min);
    csv += '\n';
  }
  std::filesystem::create_directories(inv.out_dir);
  atomic_write(std::filesystem::path(inv.out_dir) / "gramian.csv", csv);
  atomic_write(std::filesystem::path(inv.out_dir) / "summary.json", summary_json(cfg, log));
  if (!inv.quiet) {
    std::cout << "gramian: obs_min=" << log.gram_obs_overall
              << " det_min=" << log.gram_det_overall << " over " << log.gram_evaluations
              << " evaluations\n";
  }
  return kExitOk;
}

int cmd_check_rank(const CliInvocation& inv) {
  const ScenarioConfig cfg = effective_config(inv);
  const ScenarioDef def = scenario_preset(cfg);
  const DirectionTable table = direction_table(def.spec);
  const RankCondition rc = rank_condition(table);
  nlohmann::json j = {{"scenario", cfg.scenario},
                      {"rank", rc.rank},
                      {"required", def.spec.ambient()},
                      {"sigma_min", rc.sigma_min},
                      {"ges_eligible", rc.ges_eligible}};
  std::cout << j.dump(2) << "\n";
  if (!inv.out_dir.empty()) {
    std::filesystem::create_directories(inv.out_dir);
    atomic_write(std::filesystem::path(inv.out_dir) / "rank.json", j.dump(2) + "\n");
  }
  return kExitOk;
}

}  // namespace

int run_invocation(const CliInvocation& inv) {
  try {
    switch (inv.cmd) {
      case Subcommand::Run:
        return cmd_run(inv);
      case Subcommand::Sweep:
        return cmd_sweep(inv);
      case Subcommand::Gramian:
        return cmd_gramian(inv);
      case Subcommand::CheckRank:
        return cmd_check_rank(inv);
    }
    return kExitConfigError;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumericalError;
  }
}

}  // namespace groupobs
