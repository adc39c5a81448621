// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "harvest/error.hpp"
#include "harvest/io.hpp"

using namespace harvest;
using doctest::Approx;

namespace fs = std::filesystem;

namespace {

Json default_doc() {
  return Json::parse(R"({
    "sensors": [[200, 0]], "tx_power_w": 0.1, "q0": [0, 500], "z0": 100,
    "qF": [1000, 500], "zF": 100, "duration_s": 26, "slot_s": 0.2,
    "vxy_mps": 50, "vz_mps": 20, "min_altitude_m": 100, "beta0_db": -60,
    "alpha": 2, "sigma2_dbm": -109, "gamma_db": 8.2, "kmin_db": 0,
    "kmax_db": 30, "epsilon": 0.01})");
}

std::string error_of(const Json& doc) {
  try {
    scenario_from_json(doc);
  } catch (const InvalidInput& e) {
    return e.what();
  }
  return {};
}

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "harvest_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("bundled default scenario") {
  const Scenario s = load_scenario("scenarios/default.json");
  CHECK(s.slots == 130);
  CHECK(s.slot_s == Approx(0.2));
  CHECK(s.sxy == Approx(10.0));
  CHECK(s.sz == Approx(4.0));
  CHECK(s.gamma(0) == Approx(1.202e6).epsilon(1e-3));
  CHECK(s.kmin == Approx(1.0));
  CHECK(s.kmax == Approx(1000.0));
  CHECK(s.epsilon == 0.01);
  CHECK(s.blocks_per_slot == 10);
  CHECK(s.q0 == Point2(0, 500));
  CHECK(s.qF == Point2(1000, 500));
  CHECK(load_scenario("scenarios/four_sn.json").num_sensors() == 4);
}

TEST_CASE("schema errors name the field") {
  Json d = default_doc();
  d.erase("epsilon");
  CHECK(error_of(d).find("epsilon: missing required field") != std::string::npos);

  d = default_doc();
  d["kmin_db"] = 40;
  CHECK(error_of(d).find("kmax_db") != std::string::npos);

  d = default_doc();
  d["colour"] = "red";
  CHECK(error_of(d).find("colour: unknown field") != std::string::npos);

  d = default_doc();
  d["alpha"] = "two";
  CHECK(error_of(d).find("alpha: expected a number") != std::string::npos);

  d = default_doc();
  d["q0"] = Json::array({1, 2, 3});
  CHECK(error_of(d).find("q0") != std::string::npos);

  d = default_doc();
  d["duration_s"] = 26.1;
  CHECK(error_of(d).find("duration_s") != std::string::npos);

  d = default_doc();
  d["placement"] = {{"count", 3}, {"area_m", {100, 100}}, {"seed", 1}};
  CHECK(error_of(d).find("exactly one") != std::string::npos);

  d = default_doc();
  d["tx_power_w"] = Json::array({0.1, 0.2});
  CHECK(error_of(d).find("tx_power_w") != std::string::npos);

  d = default_doc();
  d["epsilon"] = 0.3;
  CHECK(!error_of(d).empty());

  d = default_doc();
  d["duration_s"] = 10;
  d["slot_s"] = 0.2;
  CHECK(error_of(d).find("need T >=") != std::string::npos);
}

TEST_CASE("random placement is seeded") {
  Json d = default_doc();
  d.erase("sensors");
  d["placement"] = {{"count", 5}, {"area_m", {1000, 800}}, {"seed", 3}};
  const Scenario a = scenario_from_json(d);
  const Scenario b = scenario_from_json(d);
  REQUIRE(a.num_sensors() == 5);
  CHECK(a.sensors == b.sensors);
  CHECK(a.tx_power.size() == 5);
  for (const auto& w : a.sensors) {
    CHECK(w.x() >= 0.0);
    CHECK(w.x() <= 1000.0);
    CHECK(w.y() >= 0.0);
    CHECK(w.y() <= 800.0);
  }
  d["placement"]["seed"] = 4;
  CHECK(scenario_from_json(d).sensors != a.sensors);
  d["placement"]["extra"] = 1;
  CHECK(error_of(d).find("placement.extra") != std::string::npos);
}

TEST_CASE("resolved scenario round trip") {
  const Scenario s = scenario_from_json(default_doc());
  RunRecord rec;
  rec.scheme = "rfla";
  rec.seed = 9;
  rec.scenario = s;
  rec.model = fit_logistic_for(0.0, 30.0, 0.01, 60);
  rec.planner = {{"max_iterations", 3}};
  rec.plan = initialize_plan(s);
  rec.plan.trace = {1.0, 1.5};
  rec.plan.notes = {"note"};
  rec.report = evaluate_plan(rec.plan, s, 1.25, "rfla", 10000, 9);
  const Json j = run_to_json(rec);
  const RunRecord back = run_from_json(Json::parse(dump_json(j)));
  CHECK(dump_json(run_to_json(back)) == dump_json(j));
  CHECK(back.report.achieved == rec.report.achieved);
  CHECK(back.report.exact_rates == rec.report.exact_rates);
  CHECK(back.report.outage.size() == rec.report.outage.size());
  CHECK(back.report.outage[7].outages == rec.report.outage[7].outages);
  CHECK(back.plan.a == rec.plan.a);
  CHECK(back.scenario.sensors == s.sensors);
  CHECK(back.model.b2 == rec.model.b2);
  CHECK(j["eta_estimated"] == 1.25);
  CHECK(j["config"]["scenario"]["sigma2_w"].get<double>() == Approx(dbm_to_watts(-109)));
}

TEST_CASE("trajectory csv") {
  const Scenario s = scenario_from_json(default_doc());
  Plan p = initialize_plan(s);
  p.a(5, 0) = 0.0;
  const LogisticModel m = fit_logistic_for(0.0, 30.0, 0.01, 60);
  const std::string csv = trajectory_csv(p, s, m);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "slot,t_s,x_m,y_m,z_m,sn,a,rate_est_bpshz,rate_exact_bpshz");
  int rows = 0;
  while (std::getline(in, line)) {
    if (rows == 5) CHECK(line.rfind("5,1,", 0) == 0);
    if (rows == 5) CHECK(line.find(",-1,0,0,0") != std::string::npos);
    if (rows == 0) CHECK(line.rfind("0,0,0,500,100,0,1,", 0) == 0);
    ++rows;
  }
  CHECK(rows == 130);
  CHECK(trajectory_csv(p, s, m) == csv);
}

TEST_CASE("model files") {
  const LogisticModel m = fit_logistic_for(0.0, 30.0, 0.01, 60);
  const LogisticModel back = model_from_json(model_to_json(m));
  CHECK(back.b1 == m.b1);
  CHECK(back.c2 == m.c2);
  CHECK(back.grid == 60);
  Json bad = model_to_json(m);
  bad["c2"] = 0.5;
  CHECK_THROWS_AS(model_from_json(bad), InvalidInput);
}

TEST_CASE("atomic writes") {
  const fs::path a = scratch("a.json");
  const fs::path b = scratch("b.csv");
  fs::remove(a);
  fs::remove(b);
  write_files_atomic({{a.string(), "one\n"}, {b.string(), "two\n"}});
  CHECK(slurp(a) == "one\n");
  CHECK(slurp(b) == "two\n");

  const fs::path c = scratch("c.json");
  fs::remove(c);
  CHECK_THROWS_AS(write_files_atomic({{c.string(), "x"}, {"/nonexistent_dir/x.csv", "y"}}), IoError);
  CHECK_FALSE(fs::exists(c));
  CHECK_FALSE(fs::exists(scratch("c.json.tmp")));
  CHECK_THROWS_AS(read_json_file("/nonexistent_dir/none.json"), IoError);
}

TEST_CASE("json text is stable") {
  const Json j = {{"b", 1}, {"a", {1.5, 2}}};
  CHECK(dump_json(j) == "{\n  \"a\": [\n    1.5,\n    2\n  ],\n  \"b\": 1\n}\n");
}
