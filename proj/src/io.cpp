// SPDX-License-Identifier: Apache-2.0
#include "harvest/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "harvest/error.hpp"
#include "harvest/random.hpp"

namespace harvest {

namespace {

namespace fs = std::filesystem;

// Reads the fields of one JSON object, remembering which keys were consumed
// so that leftovers can be rejected.
class Fields {
 public:
  Fields(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(path_, "expected an object");
  }

  [[nodiscard]] bool has(const std::string& key) const { return obj_.contains(key); }

  [[nodiscard]] std::string at(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const Json& raw(const std::string& key) {
    seen_.insert(key);
    if (!obj_.contains(key)) fail(at(key), "missing required field");
    return obj_.at(key);
  }

  double number(const std::string& key) { return as_number(raw(key), at(key)); }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  std::int64_t integer(const std::string& key) { return as_integer(raw(key), at(key)); }
  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    return has(key) ? integer(key) : fallback;
  }

  std::uint64_t unsigned_integer(const std::string& key) {
    const Json& v = raw(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    const std::int64_t i = as_integer(v, at(key));
    if (i < 0) fail(at(key), "must be non-negative");
    return static_cast<std::uint64_t>(i);
  }
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    return has(key) ? unsigned_integer(key) : fallback;
  }

  bool boolean(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_boolean()) fail(at(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_string()) fail(at(key), "expected a string");
    return v.get<std::string>();
  }

  Point2 point(const std::string& key) { return as_point(raw(key), at(key)); }

  std::vector<double> numbers(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_array()) fail(at(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], at(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  void finish() const {
    for (const auto& item : obj_.items()) {
      if (seen_.count(item.key()) == 0) fail(at(item.key()), "unknown field");
    }
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw InvalidInput((path.empty() ? std::string("document") : path) + ": " + what);
  }

  static double as_number(const Json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(path, "must be finite");
    return d;
  }

  static std::int64_t as_integer(const Json& v, const std::string& path) {
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9.0e15) return static_cast<std::int64_t>(d);
    }
    fail(path, "expected an integer");
  }

  static Point2 as_point(const Json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 2) fail(path, "expected [x, y]");
    return {as_number(v[0], path + "[0]"), as_number(v[1], path + "[1]")};
  }

 private:
  const Json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

Json point_json(const Point2& p) { return Json::array({p.x(), p.y()}); }

Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& v, const std::string& path) {
  if (!v.is_array()) Fields::fail(path, "expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(v.size());
  Eigen::Index cols = 0;
  if (rows > 0) {
    if (!v[0].is_array()) Fields::fail(path + "[0]", "expected an array");
    cols = static_cast<Eigen::Index>(v[0].size());
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::string rp = path + "[" + std::to_string(r) + "]";
    const Json& row = v[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) Fields::fail(rp, "ragged row");
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = Fields::as_number(row[static_cast<std::size_t>(c)], rp + "[" + std::to_string(c) + "]");
    }
  }
  return m;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

// Uniform placement in [0, x] x [0, y] from a dedicated substream.
std::vector<Point2> random_placement(int count, const Point2& area, std::uint64_t seed) {
  RandomStream stream(seed, {0x706c616365ULL});
  std::vector<Point2> out;
  for (int i = 0; i < count; ++i) {
    const double x = area.x() * stream.uniform();
    const double y = area.y() * stream.uniform();
    out.emplace_back(x, y);
  }
  return out;
}

}  // namespace

Scenario scenario_from_json(const Json& doc) {
  Fields f(doc, "");
  Scenario s;

  const bool listed = f.has("sensors");
  const bool placed = f.has("placement");
  if (listed == placed) Fields::fail("sensors", "give exactly one of 'sensors' or 'placement'");
  if (listed) {
    const Json& arr = f.raw("sensors");
    if (!arr.is_array() || arr.empty()) Fields::fail("sensors", "expected a non-empty array of [x, y]");
    for (std::size_t i = 0; i < arr.size(); ++i) s.sensors.push_back(Fields::as_point(arr[i], "sensors[" + std::to_string(i) + "]"));
  } else {
    Fields p(f.raw("placement"), "placement");
    const std::int64_t count = p.integer("count");
    if (count < 1 || count > 10000) Fields::fail("placement.count", "must lie in [1, 10000]");
    const Point2 area = p.point("area_m");
    if (!(area.x() > 0.0 && area.y() > 0.0)) Fields::fail("placement.area_m", "side lengths must be positive");
    const std::uint64_t seed = p.unsigned_integer("seed");
    p.finish();
    s.sensors = random_placement(static_cast<int>(count), area, seed);
  }
  const int n_sn = s.num_sensors();

  const Json& power = f.raw("tx_power_w");
  if (power.is_array()) {
    if (static_cast<int>(power.size()) != n_sn) Fields::fail("tx_power_w", "need one power per sensor");
    for (std::size_t i = 0; i < power.size(); ++i) s.tx_power.push_back(Fields::as_number(power[i], "tx_power_w[" + std::to_string(i) + "]"));
  } else {
    s.tx_power.assign(static_cast<std::size_t>(n_sn), Fields::as_number(power, "tx_power_w"));
  }
  for (std::size_t i = 0; i < s.tx_power.size(); ++i) {
    if (!(s.tx_power[i] > 0.0)) Fields::fail("tx_power_w", "powers must be positive");
  }

  s.q0 = f.point("q0");
  s.z0 = f.number("z0");
  s.qF = f.point("qF");
  s.zF = f.number("zF");

  s.duration_s = f.number("duration_s");
  s.slot_s = f.number("slot_s");
  if (!(s.duration_s > 0.0)) Fields::fail("duration_s", "must be positive");
  if (!(s.slot_s > 0.0)) Fields::fail("slot_s", "must be positive");
  const double ratio = s.duration_s / s.slot_s;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * ratio) {
    Fields::fail("duration_s", "must be a whole number of slots of length slot_s");
  }
  s.slots = static_cast<int>(rounded);
  s.slot_s = s.duration_s / s.slots;

  s.vxy = f.number("vxy_mps");
  s.vz = f.number("vz_mps");
  if (s.vxy < 0.0) Fields::fail("vxy_mps", "must be non-negative");
  if (s.vz < 0.0) Fields::fail("vz_mps", "must be non-negative");
  s.min_altitude = f.number("min_altitude_m");

  s.beta0 = db_to_linear(f.number("beta0_db"));
  s.alpha = f.number("alpha");
  s.sigma2 = dbm_to_watts(f.number("sigma2_dbm"));
  s.snr_gap = db_to_linear(f.number("gamma_db"));

  const double kmin_db = f.number("kmin_db");
  const double kmax_db = f.number("kmax_db");
  if (kmin_db > kmax_db) Fields::fail("kmax_db", "must be >= kmin_db");
  s.kmin = db_to_linear(kmin_db);
  s.kmax = db_to_linear(kmax_db);
  const RicianCoefficients rc = rician_coeffs_from_bounds(s.kmin, s.kmax);
  s.a1 = rc.a1;
  s.a2 = rc.a2;

  s.epsilon = f.number("epsilon");
  const std::int64_t blocks = f.integer("blocks_per_slot", 10);
  if (blocks < 1 || blocks > 1000000) Fields::fail("blocks_per_slot", "must lie in [1, 1e6]");
  s.blocks_per_slot = static_cast<int>(blocks);
  s.seed = f.unsigned_integer("seed", s.seed);
  f.finish();

  s.derive_limits();
  s.validate();
  check_reachable(s);
  return s;
}

Scenario load_scenario(const std::string& path) { return scenario_from_json(read_json_file(path)); }

Json scenario_to_json(const Scenario& s) {
  Json sensors = Json::array();
  for (const auto& w : s.sensors) sensors.push_back(point_json(w));
  return Json{{"sensors", sensors},
              {"tx_power_w", s.tx_power},
              {"q0", point_json(s.q0)},
              {"z0", s.z0},
              {"qF", point_json(s.qF)},
              {"zF", s.zF},
              {"duration_s", s.duration_s},
              {"slots", s.slots},
              {"slot_s", s.slot_s},
              {"vxy_mps", s.vxy},
              {"vz_mps", s.vz},
              {"sxy_m", s.sxy},
              {"sz_m", s.sz},
              {"min_altitude_m", s.min_altitude},
              {"beta0", s.beta0},
              {"alpha", s.alpha},
              {"sigma2_w", s.sigma2},
              {"snr_gap", s.snr_gap},
              {"a1", s.a1},
              {"a2", s.a2},
              {"kmin", s.kmin},
              {"kmax", s.kmax},
              {"epsilon", s.epsilon},
              {"blocks_per_slot", s.blocks_per_slot},
              {"seed", s.seed}};
}

Json model_to_json(const LogisticModel& m) {
  return Json{{"b1", m.b1},           {"b2", m.b2},           {"c1", m.c1},
              {"c2", m.c2},           {"kmin_db", m.kmin_db}, {"kmax_db", m.kmax_db},
              {"epsilon", m.epsilon}, {"rmse", m.rmse},       {"grid", m.grid}};
}

LogisticModel model_from_json(const Json& doc) {
  Fields f(doc, "model");
  LogisticModel m;
  m.b1 = f.number("b1");
  m.b2 = f.number("b2");
  m.c1 = f.number("c1");
  m.c2 = f.number("c2");
  m.kmin_db = f.number("kmin_db", 0.0);
  m.kmax_db = f.number("kmax_db", 0.0);
  m.epsilon = f.number("epsilon", 0.0);
  m.rmse = f.number("rmse", 0.0);
  m.grid = static_cast<int>(f.integer("grid", 0));
  f.finish();
  if (std::abs(m.c1 + m.c2 - 1.0) > 1e-9) Fields::fail("model.c2", "c1 + c2 must equal 1");
  if (m.c1 < 0.0 || m.c1 > 1.0) Fields::fail("model.c1", "must lie in [0, 1]");
  if (m.b2 < 0.0) Fields::fail("model.b2", "must be non-negative");
  return m;
}

LogisticModel load_model(const std::string& path) {
  Json doc = read_json_file(path);
  // model files written by `fit` wrap the coefficients next to their config
  if (doc.is_object() && doc.contains("model")) {
    Fields f(doc, "");
    const LogisticModel m = model_from_json(f.raw("model"));
    f.raw("config");
    f.raw("format");
    f.finish();
    return m;
  }
  return model_from_json(doc);
}

Json plan_to_json(const Plan& plan) {
  Json x = Json::array();
  Json y = Json::array();
  for (const auto& q : plan.q) {
    x.push_back(q.x());
    y.push_back(q.y());
  }
  return Json{{"trajectory", {{"x", x}, {"y", y}, {"z", plan.z}}},
              {"schedule", matrix_json(plan.a)},
              {"eta", plan.eta},
              {"trace", plan.trace},
              {"iterations", plan.iterations},
              {"converged", plan.converged},
              {"notes", plan.notes}};
}

Plan plan_from_json(const Json& doc) {
  Fields f(doc, "plan");
  Plan plan;
  {
    Fields t(f.raw("trajectory"), "plan.trajectory");
    const auto x = t.numbers("x");
    const auto y = t.numbers("y");
    plan.z = t.numbers("z");
    t.finish();
    if (x.size() != y.size() || x.size() != plan.z.size() || x.size() < 2) {
      Fields::fail("plan.trajectory", "x, y and z must have the same length >= 2");
    }
    for (std::size_t i = 0; i < x.size(); ++i) plan.q.emplace_back(x[i], y[i]);
  }
  plan.a = matrix_from_json(f.raw("schedule"), "plan.schedule");
  if (static_cast<std::size_t>(plan.a.rows()) + 1 != plan.q.size()) {
    Fields::fail("plan.schedule", "must have one row per slot (trajectory length - 1)");
  }
  plan.eta = f.number("eta");
  plan.trace = f.numbers("trace");
  plan.iterations = static_cast<int>(f.integer("iterations"));
  plan.converged = f.boolean("converged");
  const Json& notes = f.raw("notes");
  if (!notes.is_array()) Fields::fail("plan.notes", "expected an array of strings");
  for (std::size_t i = 0; i < notes.size(); ++i) {
    if (!notes[i].is_string()) Fields::fail("plan.notes[" + std::to_string(i) + "]", "expected a string");
    plan.notes.push_back(notes[i].get<std::string>());
  }
  f.finish();
  return plan;
}

Json report_to_json(const EvalReport& r) {
  Json outage = Json::array();
  for (const auto& o : r.outage) {
    outage.push_back(Json{{"slot", o.slot},
                          {"sn", o.sn},
                          {"k", o.k},
                          {"rate", o.rate},
                          {"samples", o.samples},
                          {"outages", o.outages},
                          {"frequency", o.frequency()}});
  }
  return Json{{"scheme", r.scheme},
              {"seed", r.seed},
              {"exact_rates", matrix_json(r.exact_rates)},
              {"achieved", r.achieved},
              {"estimated", r.estimated},
              {"trials", r.trials},
              {"blocks_per_slot", r.blocks_per_slot},
              {"outage", outage}};
}

EvalReport report_from_json(const Json& doc) {
  Fields f(doc, "report");
  EvalReport r;
  r.scheme = f.string("scheme");
  r.seed = f.unsigned_integer("seed");
  r.exact_rates = matrix_from_json(f.raw("exact_rates"), "report.exact_rates");
  r.achieved = f.number("achieved");
  r.estimated = f.number("estimated");
  r.trials = f.unsigned_integer("trials");
  r.blocks_per_slot = static_cast<int>(f.integer("blocks_per_slot"));
  const Json& outage = f.raw("outage");
  if (!outage.is_array()) Fields::fail("report.outage", "expected an array");
  for (std::size_t i = 0; i < outage.size(); ++i) {
    Fields o(outage[i], "report.outage[" + std::to_string(i) + "]");
    SlotOutage s;
    s.slot = static_cast<int>(o.integer("slot"));
    s.sn = static_cast<int>(o.integer("sn"));
    s.k = o.number("k");
    s.rate = o.number("rate");
    s.samples = o.unsigned_integer("samples");
    s.outages = o.unsigned_integer("outages");
    o.number("frequency");  // derived; recomputed from the counts
    o.finish();
    if (s.outages > s.samples) Fields::fail(o.at("outages"), "exceeds samples");
    r.outage.push_back(s);
  }
  f.finish();
  return r;
}

Json run_to_json(const RunRecord& run) {
  return Json{{"format", "uavharvest-result/1"},
              {"scheme", run.scheme},
              {"seed", run.seed},
              {"config", {{"scenario", scenario_to_json(run.scenario)}, {"model", model_to_json(run.model)}, {"planner", run.planner}}},
              {"eta_estimated", run.report.estimated},
              {"eta_achieved", run.report.achieved},
              {"relaxed_eta", run.relaxed_eta},
              {"altitude", run.altitude},
              {"plan", plan_to_json(run.plan)},
              {"report", report_to_json(run.report)}};
}

RunRecord run_from_json(const Json& doc) {
  Fields f(doc, "");
  RunRecord run;
  if (f.string("format") != "uavharvest-result/1") Fields::fail("format", "not a result file");
  run.scheme = f.string("scheme");
  run.seed = f.unsigned_integer("seed");
  {
    Fields c(f.raw("config"), "config");
    const Json& sc = c.raw("scenario");
    Fields s(sc, "config.scenario");
    Scenario& out = run.scenario;
    const Json& sensors = s.raw("sensors");
    if (!sensors.is_array()) Fields::fail("config.scenario.sensors", "expected an array");
    for (std::size_t i = 0; i < sensors.size(); ++i) out.sensors.push_back(Fields::as_point(sensors[i], "config.scenario.sensors[" + std::to_string(i) + "]"));
    out.tx_power = s.numbers("tx_power_w");
    out.q0 = s.point("q0");
    out.z0 = s.number("z0");
    out.qF = s.point("qF");
    out.zF = s.number("zF");
    out.duration_s = s.number("duration_s");
    out.slots = static_cast<int>(s.integer("slots"));
    out.slot_s = s.number("slot_s");
    out.vxy = s.number("vxy_mps");
    out.vz = s.number("vz_mps");
    out.sxy = s.number("sxy_m");
    out.sz = s.number("sz_m");
    out.min_altitude = s.number("min_altitude_m");
    out.beta0 = s.number("beta0");
    out.alpha = s.number("alpha");
    out.sigma2 = s.number("sigma2_w");
    out.snr_gap = s.number("snr_gap");
    out.a1 = s.number("a1");
    out.a2 = s.number("a2");
    out.kmin = s.number("kmin");
    out.kmax = s.number("kmax");
    out.epsilon = s.number("epsilon");
    out.blocks_per_slot = static_cast<int>(s.integer("blocks_per_slot"));
    out.seed = s.unsigned_integer("seed");
    s.finish();
    out.validate();
    run.model = model_from_json(c.raw("model"));
    run.planner = c.raw("planner");
    c.finish();
  }
  f.number("eta_estimated");
  f.number("eta_achieved");
  run.relaxed_eta = f.number("relaxed_eta");
  run.altitude = f.number("altitude");
  run.plan = plan_from_json(f.raw("plan"));
  run.report = report_from_json(f.raw("report"));
  f.finish();
  return run;
}

std::string trajectory_csv(const Plan& plan, const Scenario& scenario, const LogisticModel& model) {
  const int m_slots = plan.slots();
  if (plan.q.size() != static_cast<std::size_t>(m_slots) + 1 || plan.a.cols() != scenario.num_sensors()) {
    throw InvalidInput("trajectory_csv: plan does not match the scenario");
  }
  std::ostringstream out;
  out << "slot,t_s,x_m,y_m,z_m,sn,a,rate_est_bpshz,rate_exact_bpshz\n";
  for (int m = 0; m < m_slots; ++m) {
    const auto i = static_cast<std::size_t>(m);
    int sn = -1;
    double best = 0.0;
    for (int n = 0; n < plan.a.cols(); ++n) {
      if (plan.a(m, n) > best) {
        best = plan.a(m, n);
        sn = n;
      }
    }
    double est = 0.0;
    double exact = 0.0;
    if (sn >= 0) {
      const Point2& w = scenario.sensors[static_cast<std::size_t>(sn)];
      est = approx_rate(model, scenario.gamma(sn), plan.q[i], w, plan.z[i], scenario.alpha);
      exact = exact_rate(scenario, sn, plan.q[i], plan.z[i]);
    }
    out << m << ',' << format_number(m * scenario.slot_s) << ',' << format_number(plan.q[i].x()) << ','
        << format_number(plan.q[i].y()) << ',' << format_number(plan.z[i]) << ',' << sn << ','
        << format_number(best) << ',' << format_number(est) << ',' << format_number(exact) << '\n';
  }
  return out.str();
}

std::string dump_json(const Json& doc) { return doc.dump(2) + "\n"; }

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InvalidInput("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_files_atomic(const std::vector<std::pair<std::string, std::string>>& files) {
  std::vector<fs::path> temps;
  const auto cleanup = [&temps] {
    std::error_code ec;
    for (const auto& t : temps) fs::remove(t, ec);
  };
  for (const auto& [path, content] : files) {
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    temps.push_back(tmp);
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (out) out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) {
      cleanup();
      throw IoError("cannot write '" + path + "'");
    }
  }
  for (std::size_t i = 0; i < files.size(); ++i) {
    std::error_code ec;
    fs::rename(temps[i], files[i].first, ec);
    if (ec) {
      cleanup();
      throw IoError("cannot write '" + files[i].first + "': " + ec.message());
    }
  }
}

}  // namespace harvest
