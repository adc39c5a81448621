// SPDX-License-Identifier: Apache-2.0
// uavharvest: fit | plan | evaluate | sweep
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "harvest/error.hpp"
#include "harvest/io.hpp"

using namespace harvest;

namespace {

constexpr const char* kModelFormat = "uavharvest-model/1";
constexpr const char* kSweepFormat = "uavharvest-sweep/1";

struct PlannerFlags {
  int max_iterations = 50;
  double tolerance = 1e-4;
  bool linearize_v = false;
  std::vector<double> altitudes{100, 125, 150, 175, 200, 225, 250, 275, 300};
  std::uint64_t trials = 0;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* cmd) {
    cmd->add_option("--max-iter", max_iterations, "BCD iteration cap")->check(CLI::PositiveNumber);
    cmd->add_option("--tol", tolerance, "relative improvement that ends BCD")->check(CLI::PositiveNumber);
    cmd->add_flag("--linearize-v", linearize_v, "first-order bound on v in the vertical block");
    cmd->add_option("--altitudes", altitudes, "RFFSA candidate altitudes (m)")->delimiter(',');
    cmd->add_option("--trials", trials, "Monte-Carlo trials per block (0 skips)");
    cmd->add_option("--seed", seed, "Monte-Carlo root seed (default: scenario seed)");
  }

  [[nodiscard]] RunOptions options(const Scenario& s) const {
    RunOptions o;
    o.planner.max_iterations = max_iterations;
    o.planner.tolerance = tolerance;
    o.planner.linearize_v = linearize_v;
    o.fixed_altitudes = altitudes;
    o.trials = trials;
    o.seed = seed.value_or(s.seed);
    return o;
  }

  [[nodiscard]] Json to_json(const Scenario& s) const {
    return Json{{"max_iterations", max_iterations}, {"tolerance", tolerance},
                {"linearize_v", linearize_v},       {"fixed_altitudes", altitudes},
                {"trials", trials},                 {"seed", seed.value_or(s.seed)}};
  }
};

Json model_file(const LogisticModel& m) {
  return Json{{"format", kModelFormat},
              {"config", {{"kmin_db", m.kmin_db}, {"kmax_db", m.kmax_db}, {"eps", m.epsilon}, {"grid", m.grid}}},
              {"model", model_to_json(m)}};
}

// The fit for the scenario's own channel constants.
LogisticModel fit_for(const Scenario& s, int grid) {
  return fit_logistic_for(linear_to_db(s.kmin), linear_to_db(s.kmax), s.epsilon, grid);
}

RunRecord make_record(Scheme scheme, const Scenario& s, const LogisticModel& model, const PlannerFlags& flags) {
  const RunOptions opts = flags.options(s);
  const LogisticModel planning = scheme == Scheme::lb ? LogisticModel::line_of_sight() : model;
  SchemeResult res = run_scheme(scheme, s, planning, opts);
  RunRecord rec;
  rec.scheme = to_string(scheme);
  rec.seed = opts.seed;
  rec.scenario = s;
  rec.model = planning;
  rec.planner = flags.to_json(s);
  rec.relaxed_eta = res.rounding.relaxed_eta;
  rec.altitude = res.altitude;
  rec.plan = std::move(res.plan);
  rec.report = std::move(res.report);
  return rec;
}

void write_run(const RunRecord& rec, const std::string& out, const std::string& traj) {
  std::vector<std::pair<std::string, std::string>> files{{out, dump_json(run_to_json(rec))}};
  if (!traj.empty()) files.emplace_back(traj, trajectory_csv(rec.plan, rec.scenario, rec.model));
  write_files_atomic(files);
}

Scenario with_param(Scenario s, const std::string& param, double value) {
  if (param == "T") {
    s.duration_s = value;
    const double slots = std::round(value / s.slot_s);
    if (slots < 1.0 || std::abs(value / s.slot_s - slots) > 1e-9 * slots) {
      throw InvalidInput("sweep: T=" + std::to_string(value) + " is not a whole number of slots");
    }
    s.slots = static_cast<int>(slots);
  } else if (param == "vz") {
    s.vz = value;
  } else if (param == "eps") {
    s.epsilon = value;
  } else if (param == "kmax_db") {
    s.kmax = db_to_linear(value);
    if (s.kmax < s.kmin) throw InvalidInput("sweep: kmax_db must be >= kmin_db");
    const RicianCoefficients rc = rician_coeffs_from_bounds(s.kmin, s.kmax);
    s.a1 = rc.a1;
    s.a2 = rc.a2;
  }
  s.derive_limits();
  s.validate();
  check_reachable(s);
  return s;
}

Json sweep_row(double value, const RunRecord& rec) {
  return Json{{"value", value},
              {"scheme", rec.scheme},
              {"eta_estimated", rec.report.estimated},
              {"eta_achieved", rec.report.achieved},
              {"relaxed_eta", rec.relaxed_eta},
              {"altitude", rec.altitude},
              {"max_altitude_m", *std::max_element(rec.plan.z.begin(), rec.plan.z.end())},
              {"iterations", rec.plan.iterations},
              {"converged", rec.plan.converged},
              {"model", model_to_json(rec.model)},
              {"scenario", scenario_to_json(rec.scenario)}};
}

int cmd_fit(double kmin_db, double kmax_db, double eps, int grid, const std::string& out) {
  if (kmin_db > kmax_db) throw InvalidInput("fit: --kmax-db must be >= --kmin-db");
  LogisticModel m;
  try {
    m = fit_logistic_for(kmin_db, kmax_db, eps, grid);
  } catch (const FitError& e) {
    std::cerr << "uavharvest: warning: " << e.what() << "; writing the best parameters found\n";
    m = e.best();
  }
  write_files_atomic({{out, dump_json(model_file(m))}});
  std::cout << "b1=" << m.b1 << " b2=" << m.b2 << " c1=" << m.c1 << " c2=" << m.c2 << " rmse=" << m.rmse << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV trajectory and scheduling planner for Rician-fading data collection"};
  app.require_subcommand(1);

  // fit
  double kmin_db = 0.0, kmax_db = 30.0, eps = 0.01;
  int grid = 200;
  std::string fit_out;
  auto* fit = app.add_subcommand("fit", "fit the logistic effective-fading model");
  fit->add_option("--kmin-db", kmin_db, "Rician factor at zero elevation (dB)");
  fit->add_option("--kmax-db", kmax_db, "Rician factor at 90 degrees (dB)");
  fit->add_option("--eps", eps, "target outage probability");
  fit->add_option("--grid", grid, "regression grid size")->check(CLI::Range(10, 100000));
  fit->add_option("--out", fit_out, "model file")->required();

  // plan
  std::string scenario_path, model_path, scheme_name = "rfb", out, traj;
  PlannerFlags plan_flags;
  auto* plan = app.add_subcommand("plan", "design a trajectory and schedule");
  plan->add_option("--scenario", scenario_path, "scenario file")->required()->check(CLI::ExistingFile);
  plan->add_option("--model", model_path, "model file (not needed for lb)")->check(CLI::ExistingFile);
  plan->add_option("--scheme", scheme_name, "lb | rfla | rffsa | rfb")
      ->check(CLI::IsMember({"lb", "rfla", "rffsa", "rfb"}));
  plan->add_option("--out", out, "result file")->required();
  plan->add_option("--traj", traj, "trajectory CSV");
  plan_flags.attach(plan);

  // evaluate
  std::string eval_scenario, eval_plan, eval_out, eval_traj;
  std::uint64_t eval_trials = 100000;
  std::optional<std::uint64_t> eval_seed;
  auto* evaluate = app.add_subcommand("evaluate", "re-score a plan with exact fading and Monte-Carlo");
  evaluate->add_option("--scenario", eval_scenario, "scenario file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--plan", eval_plan, "result file from `plan`")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--trials", eval_trials, "Monte-Carlo trials per block (0 skips)");
  evaluate->add_option("--seed", eval_seed, "Monte-Carlo root seed (default: scenario seed)");
  evaluate->add_option("--out", eval_out, "result file")->required();
  evaluate->add_option("--traj", eval_traj, "trajectory CSV");

  // sweep
  std::string sweep_scenario, sweep_model, param, sweep_out;
  std::vector<double> values;
  std::vector<std::string> schemes{"rfb"};
  int sweep_grid = 200;
  PlannerFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "re-plan for each value of one parameter");
  sweep->add_option("--scenario", sweep_scenario, "scenario file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--model", sweep_model, "model file (default: fitted to the scenario)")->check(CLI::ExistingFile);
  sweep->add_option("--param", param, "T | vz | eps | kmax_db")->required()->check(CLI::IsMember({"T", "vz", "eps", "kmax_db"}));
  sweep->add_option("--values", values, "comma-separated values")->required()->delimiter(',');
  sweep->add_option("--schemes", schemes, "schemes to run")->delimiter(',')
      ->check(CLI::IsMember({"lb", "rfla", "rffsa", "rfb"}));
  sweep->add_option("--grid", sweep_grid, "regression grid for re-fitted models")->check(CLI::Range(10, 100000));
  sweep->add_option("--out", sweep_out, "sweep result file")->required();
  sweep_flags.attach(sweep);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) return cmd_fit(kmin_db, kmax_db, eps, grid, fit_out);

    if (*plan) {
      const Scenario s = load_scenario(scenario_path);
      const Scheme scheme = scheme_from_string(scheme_name);
      LogisticModel model = LogisticModel::line_of_sight();
      if (scheme != Scheme::lb) {
        if (model_path.empty()) throw InvalidInput("plan: --model is required for scheme " + scheme_name);
        model = load_model(model_path);
      }
      const RunRecord rec = make_record(scheme, s, model, plan_flags);
      write_run(rec, out, traj);
      std::cout << rec.scheme << ": estimated " << rec.report.estimated << " achieved " << rec.report.achieved
                << " bps/Hz after " << rec.plan.iterations << " iterations\n";
      return 0;
    }

    if (*evaluate) {
      const Scenario s = load_scenario(eval_scenario);
      RunRecord rec = run_from_json(read_json_file(eval_plan));
      if (static_cast<int>(rec.plan.q.size()) != s.slots + 1 || rec.plan.a.cols() != s.num_sensors()) {
        throw InvalidInput("evaluate: plan does not match the scenario's slots or sensors");
      }
      const std::string problem = check_plan(rec.plan, s);
      if (!problem.empty()) throw InvalidInput("evaluate: plan violates the scenario: " + problem);
      const double estimated = max_min_rate(rec.plan.a, rate_matrix(rec.plan.q, rec.plan.z, s, rec.model));
      rec.seed = eval_seed.value_or(s.seed);
      rec.scenario = s;
      rec.report = evaluate_plan(rec.plan, s, estimated, rec.scheme, eval_trials, rec.seed);
      write_run(rec, eval_out, eval_traj);
      double worst = 0.0;
      for (const auto& o : rec.report.outage) worst = std::max(worst, o.frequency());
      std::cout << rec.scheme << ": estimated " << estimated << " achieved " << rec.report.achieved
                << " bps/Hz, worst slot outage " << worst << "\n";
      return 0;
    }

    if (*sweep) {
      const Scenario base = load_scenario(sweep_scenario);
      const bool refit = param == "eps" || param == "kmax_db";
      const LogisticModel base_model = sweep_model.empty() ? fit_for(base, sweep_grid) : load_model(sweep_model);

      struct Job {
        double value;
        Scheme scheme;
      };
      std::vector<Job> jobs;
      for (double v : values) {
        for (const auto& name : schemes) jobs.push_back({v, scheme_from_string(name)});
      }
      // validate every value before spending time on any plan
      for (double v : values) (void)with_param(base, param, v);

      const auto run_job = [&](const Job& job) {
        const Scenario s = with_param(base, param, job.value);
        const LogisticModel m = refit ? fit_for(s, sweep_grid) : base_model;
        return make_record(job.scheme, s, m, sweep_flags);
      };
      const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
      std::vector<RunRecord> records;
      for (std::size_t start = 0; start < jobs.size(); start += workers) {
        std::vector<std::future<RunRecord>> batch;
        const std::size_t stop = std::min(jobs.size(), start + workers);
        for (std::size_t i = start; i < stop; ++i) {
          batch.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred, run_job, jobs[i]));
        }
        for (auto& f : batch) records.push_back(f.get());
      }

      Json rows = Json::array();
      for (std::size_t i = 0; i < jobs.size(); ++i) {
        rows.push_back(sweep_row(jobs[i].value, records[i]));
        std::cout << param << "=" << jobs[i].value << " " << records[i].scheme << ": achieved "
                  << records[i].report.achieved << "\n";
      }
      const Json doc{{"format", kSweepFormat},
                     {"config",
                      {{"scenario", scenario_to_json(base)},
                       {"model", model_to_json(base_model)},
                       {"param", param},
                       {"values", values},
                       {"schemes", schemes},
                       {"refit", refit},
                       {"planner", sweep_flags.to_json(base)}}},
                     {"rows", rows}};
      write_files_atomic({{sweep_out, dump_json(doc)}});
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "uavharvest: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
