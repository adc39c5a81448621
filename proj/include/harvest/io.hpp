// SPDX-License-Identifier: Apache-2.0
//
// Scenario, model and result files. Scenario files carry channel constants in
// dB and geometry in SI units; everything written back is the resolved,
// linear-scale configuration so that a result file is self-describing.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "harvest/channel.hpp"
#include "harvest/effective_fading.hpp"
#include "harvest/evaluation.hpp"
#include "harvest/planner.hpp"

namespace harvest {

using Json = nlohmann::json;

/// Parses a scenario document. Unknown fields, missing required fields and
/// type errors raise InvalidInput naming the offending field path.
Scenario scenario_from_json(const Json& doc);
Scenario load_scenario(const std::string& path);
/// Resolved (linear-scale) view of a scenario, for audit trails.
Json scenario_to_json(const Scenario& scenario);

Json model_to_json(const LogisticModel& model);
LogisticModel model_from_json(const Json& doc);
LogisticModel load_model(const std::string& path);

Json plan_to_json(const Plan& plan);
Plan plan_from_json(const Json& doc);

Json report_to_json(const EvalReport& report);
EvalReport report_from_json(const Json& doc);

/// Everything a `plan` or `evaluate` run produces.
struct RunRecord {
  std::string scheme;
  std::uint64_t seed = 0;
  Scenario scenario;
  LogisticModel model;  ///< model the plan was optimized with
  Json planner;         ///< planner settings, stored verbatim
  Plan plan;
  double relaxed_eta = 0.0;
  double altitude = 0.0;
  EvalReport report;
};

Json run_to_json(const RunRecord& run);
RunRecord run_from_json(const Json& doc);

/// One row per slot: slot,t_s,x_m,y_m,z_m,sn,a,rate_est_bpshz,rate_exact_bpshz.
/// sn is the slot's claimant (largest a, lowest index on ties) or -1.
std::string trajectory_csv(const Plan& plan, const Scenario& scenario, const LogisticModel& model);

/// Stable text form: two-space indent, sorted keys, trailing newline.
std::string dump_json(const Json& doc);
Json read_json_file(const std::string& path);

/// Writes every file through a temporary sibling and renames only after all
/// temporaries are complete, so a failure leaves no partial outputs.
void write_files_atomic(const std::vector<std::pair<std::string, std::string>>& files);

}  // namespace harvest
