#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "sekf/experiments.hpp"
#include "sekf/systems.hpp"
#include "sekf/types.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitTrialFailures = 2;

nlohmann::json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f.good()) throw sekf::ContractError("cannot read " + path);
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw sekf::ContractError(std::string("JSON parse error in ") + path +
                              ": " + e.what());
  }
}

int cmd_simulate(const std::string& system, const std::string& params_path,
                 const std::string& out_path) {
  const nlohmann::json j =
      params_path.empty() ? nlohmann::json::object() : load_json(params_path);
  const nlohmann::json pj = j.value("params", nlohmann::json::object());

  sekf::Trajectory traj;
  if (system == "spring") {
    sekf::SpringParams p;
    p.m = pj.value("m", p.m);
    p.c = pj.value("c", p.c);
    p.k = pj.value("k", p.k);
    p.u = pj.value("u", p.u);
    traj = sekf::simulate_spring(p, j.value("x0", 1.0), j.value("v0", 0.0),
                                 j.value("duration", 20.0),
                                 j.value("dt", 0.05));
  } else if (system == "tclab") {
    sekf::TclabParams p;
    p.m = pj.value("m", p.m);
    p.c_p = pj.value("c_p", p.c_p);
    p.U = pj.value("U", p.U);
    p.A = pj.value("A", p.A);
    p.A_s = pj.value("A_s", p.A_s);
    p.eps = pj.value("eps", p.eps);
    p.alpha1 = pj.value("alpha1", p.alpha1);
    p.alpha2 = pj.value("alpha2", p.alpha2);
    p.T_inf = pj.value("T_inf", p.T_inf);
    const double duration = j.value("duration", 3600.0);
    sekf::HeaterSchedule schedule;
    if (j.contains("q1") || j.contains("q2")) {
      schedule.start_s = {0.0};
      schedule.q1 = {j.value("q1", 0.0)};
      schedule.q2 = {j.value("q2", 0.0)};
    } else {
      schedule = sekf::gen_heater_schedule(
          j.value("schedule_seed", std::uint64_t{0}), duration);
    }
    traj = sekf::simulate_tclab(p, j.value("T1_0", p.T_inf),
                                j.value("T2_0", p.T_inf), schedule, duration,
                                j.value("dt", 10.0));
  } else {
    throw sekf::ContractError("unknown system: " + system);
  }

  std::ofstream out(out_path);
  if (!out.good()) throw sekf::ContractError("cannot open " + out_path);
  out << traj.to_csv();
  if (!out.good()) throw sekf::ContractError("write failed for " + out_path);
  std::cout << "wrote " << traj.data.rows() << " samples to " << out_path
            << "\n";
  return kExitOk;
}

int cmd_train_source(const std::string& config_path) {
  const auto config = sekf::ExperimentConfig::from_file(config_path);
  const sekf::SourceArtifact a = sekf::train_source(config);
  std::cout << "source model for " << a.system
            << ": test loss " << a.test_loss << ", wall " << a.train_wall_s
            << " s, artifact at " << config.resolved_output_dir()
            << "/source.json\n";
  return kExitOk;
}

int cmd_run_grid(const std::string& config_path, int jobs, bool resume,
                 bool dry_run) {
  const auto config = sekf::ExperimentConfig::from_file(config_path);
  if (dry_run) {
    std::cout << "grid: " << sekf::grid_trial_count(config)
              << " trials (dry run, nothing executed)\n";
    return kExitOk;
  }
  const sekf::GridSummary s = sekf::run_grid(config, jobs, resume);
  std::cout << "grid: " << s.total << " trials, " << s.executed << " executed, "
            << s.skipped << " skipped, " << s.failed << " failed\n"
            << "report under " << config.resolved_output_dir() << "\n";
  return s.failed > 0 ? kExitTrialFailures : kExitOk;
}

int cmd_report(const std::string& dir, bool anova, bool layer_changes) {
  const int n = sekf::write_report(dir, anova, layer_changes);
  std::cout << "aggregated " << n << " trial records into " << dir
            << "/results.csv\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transfer-learning experiment runner for dynamical systems"};
  app.require_subcommand(1);

  std::string system, params_path, out_path, config_path, report_dir;
  int jobs = 1;
  bool resume = false, dry_run = false, anova = false, layer_changes = false;

  auto* simulate = app.add_subcommand("simulate", "Integrate one trajectory");
  simulate->add_option("--system", system, "spring or tclab")->required();
  simulate->add_option("--params-json", params_path,
                       "JSON with params and initial conditions");
  simulate->add_option("--out", out_path, "Output CSV path")->required();

  auto* train_source =
      app.add_subcommand("train-source", "Train and persist the source model");
  train_source->add_option("--config", config_path, "Experiment config JSON")
      ->required();

  auto* run_grid = app.add_subcommand("run-grid", "Run the full trial grid");
  run_grid->add_option("--config", config_path, "Experiment config JSON")
      ->required();
  run_grid->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  run_grid->add_flag("--resume", resume, "Skip completed trials");
  run_grid->add_flag("--dry-run", dry_run,
                     "Print the trial count and exit without running");

  auto* report = app.add_subcommand("report", "Aggregate trial records");
  report->add_option("--dir", report_dir, "Grid output directory")->required();
  report->add_flag("--anova", anova, "Write the permutation ANOVA table");
  report->add_flag("--layer-changes", layer_changes,
                   "Write the per-layer weight-change summary");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(system, params_path, out_path);
    if (train_source->parsed()) return cmd_train_source(config_path);
    if (run_grid->parsed())
      return cmd_run_grid(config_path, jobs, resume, dry_run);
    if (report->parsed()) return cmd_report(report_dir, anova, layer_changes);
  } catch (const sekf::ContractError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const sekf::DivergenceError& e) {
    std::cerr << "trial failure: " << e.what() << "\n";
    return kExitTrialFailures;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
  return kExitOk;
}
