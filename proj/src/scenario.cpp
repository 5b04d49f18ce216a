#include "gridsleuth/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include "gridsleuth/errors.hpp"
#include "gridsleuth/textio.hpp"

namespace gridsleuth::scenario {

namespace fs = std::filesystem;
using json = nlohmann::json;
using simulator::ScenarioEvent;

namespace {

uint64_t fnv1a64(const std::string& bytes,
                 uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex16(uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return std::string(buf);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw Error("short write to '" + path + "'");
}

std::string join(const std::string& dir, const char* name) {
  return (fs::path(dir) / name).string();
}

uint64_t pick(uint64_t explicit_seed, uint64_t fallback) {
  return explicit_seed != 0 ? explicit_seed : fallback;
}

void expect_keys(const json& j, const char* where,
                 std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw InvalidArgumentError("scenario config: unknown key '" + it.key() +
                                 "' in " + where);
  }
}

ScenarioEvent::Kind parse_kind(const std::string& s) {
  if (s == "line_trip") return ScenarioEvent::Kind::LineTrip;
  if (s == "line_close") return ScenarioEvent::Kind::LineClose;
  if (s == "shunt_scale") return ScenarioEvent::Kind::ShuntScale;
  throw InvalidArgumentError("scenario config: unknown event kind '" + s +
                             "' (expected line_trip, line_close or "
                             "shunt_scale)");
}

const char* kind_name(ScenarioEvent::Kind k) {
  switch (k) {
    case ScenarioEvent::Kind::LineTrip: return "line_trip";
    case ScenarioEvent::Kind::LineClose: return "line_close";
    case ScenarioEvent::Kind::ShuntScale: return "shunt_scale";
  }
  return "unknown";
}

}  // namespace

ScenarioConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scenario config: ") + e.what(),
                     static_cast<size_t>(e.byte));
  }
  if (!j.is_object() || j.value("format", "") != "gridsleuth-scenario")
    throw InvalidArgumentError(
        "scenario config: missing format marker 'gridsleuth-scenario'");
  if (j.value("version", 0) != 1)
    throw InvalidArgumentError("scenario config: unsupported version");
  expect_keys(j, "the top level",
              {"format", "version", "feeder", "allocation", "slots",
               "power_factor", "seeds", "noise", "slack", "events",
               "identification", "detector", "localization", "output"});

  ScenarioConfig c;
  if (!j.contains("feeder") || !j.at("feeder").is_string())
    throw InvalidArgumentError("scenario config: 'feeder' path is required");
  if (!j.contains("allocation") || !j.at("allocation").is_string())
    throw InvalidArgumentError(
        "scenario config: 'allocation' path is required");
  c.feeder_path = j.at("feeder").get<std::string>();
  c.allocation_path = j.at("allocation").get<std::string>();
  if (!j.contains("slots") || !j.at("slots").is_number_integer())
    throw InvalidArgumentError("scenario config: integer 'slots' is required");
  c.slots = j.at("slots").get<int>();
  if (c.slots < 1)
    throw InvalidArgumentError("scenario config: slots must be at least 1");

  c.power_factor = j.value("power_factor", c.power_factor);
  if (!(c.power_factor > 0.0) || c.power_factor > 1.0)
    throw InvalidArgumentError(
        "scenario config: power_factor must lie in (0, 1]");

  if (j.contains("seeds")) {
    const json& s = j.at("seeds");
    expect_keys(s, "'seeds'", {"load", "noise", "slack", "calibration"});
    c.load_seed = s.value("load", c.load_seed);
    c.noise_seed = s.value("noise", uint64_t{0});
    c.slack_seed = s.value("slack", uint64_t{0});
    c.calibration_seed = s.value("calibration", uint64_t{0});
  }
  c.noise_seed = pick(c.noise_seed, c.load_seed + 1);
  c.slack_seed = pick(c.slack_seed, c.load_seed + 2);
  c.calibration_seed = pick(c.calibration_seed, c.load_seed + 1000);

  if (j.contains("noise")) {
    const json& n = j.at("noise");
    expect_keys(n, "'noise'", {"magnitude_std", "angle_std"});
    c.noise.magnitude_std = n.value("magnitude_std", 0.0);
    c.noise.angle_std = n.value("angle_std", 0.0);
    if (c.noise.magnitude_std < 0.0 || c.noise.angle_std < 0.0)
      throw InvalidArgumentError(
          "scenario config: noise deviations must be nonnegative");
  }

  if (j.contains("slack")) {
    const json& s = j.at("slack");
    expect_keys(s, "'slack'",
                {"magnitude", "dither_magnitude", "dither_angle"});
    c.slack.magnitude = s.value("magnitude", 1.0);
    c.slack.dither_magnitude = s.value("dither_magnitude", 0.0);
    c.slack.dither_angle = s.value("dither_angle", 0.0);
    if (!(c.slack.magnitude > 0.0))
      throw InvalidArgumentError(
          "scenario config: slack magnitude must be positive");
    if (c.slack.dither_magnitude < 0.0 || c.slack.dither_angle < 0.0)
      throw InvalidArgumentError(
          "scenario config: slack dither deviations must be nonnegative");
  }

  if (j.contains("events")) {
    if (!j.at("events").is_array())
      throw InvalidArgumentError("scenario config: 'events' must be a list");
    int last_slot = -1;
    for (const json& e : j.at("events")) {
      expect_keys(e, "an event", {"slot", "kind", "target", "factor"});
      ScenarioEvent ev;
      if (!e.contains("slot") || !e.at("slot").is_number_integer())
        throw InvalidArgumentError(
            "scenario config: every event needs an integer 'slot'");
      ev.slot = e.at("slot").get<int>();
      if (ev.slot < 0)
        throw InvalidArgumentError(
            "scenario config: event slots must be nonnegative");
      if (ev.slot < last_slot)
        throw InvalidArgumentError(
            "scenario config: events must be listed in ascending slot order");
      last_slot = ev.slot;
      if (!e.contains("kind") || !e.at("kind").is_string())
        throw InvalidArgumentError(
            "scenario config: every event needs a 'kind'");
      ev.kind = parse_kind(e.at("kind").get<std::string>());
      ev.target = e.value("target", std::string());
      if (ev.target.empty())
        throw InvalidArgumentError(
            "scenario config: every event needs a 'target'");
      ev.factor = e.value("factor", 0.0);
      if (ev.kind == ScenarioEvent::Kind::ShuntScale && ev.factor < 0.0)
        throw InvalidArgumentError(
            "scenario config: shunt_scale factor must be nonnegative");
      c.events.push_back(ev);
    }
  }

  if (j.contains("identification")) {
    const json& i = j.at("identification");
    expect_keys(i, "'identification'", {"tau"});
    c.tau = i.value("tau", c.tau);
    if (!(c.tau > 0.0))
      throw InvalidArgumentError("scenario config: tau must be positive");
  }

  if (j.contains("detector")) {
    const json& d = j.at("detector");
    expect_keys(d, "'detector'", {"alpha", "gamma", "calibration_slots"});
    c.alpha = d.value("alpha", c.alpha);
    if (!(c.alpha > 0.0) || !(c.alpha < 1.0))
      throw InvalidArgumentError(
          "scenario config: alpha must lie strictly between 0 and 1");
    if (d.contains("gamma")) {
      const json& g = d.at("gamma");
      if (g.is_string() && g.get<std::string>() == "auto") {
        c.gamma_auto = true;
      } else if (g.is_number()) {
        c.gamma = g.get<double>();
        c.gamma_auto = false;
        if (!(c.gamma > 0.0))
          throw InvalidArgumentError(
              "scenario config: gamma must be positive or the string 'auto'");
      } else {
        throw InvalidArgumentError(
            "scenario config: gamma must be a number or 'auto'");
      }
    }
    c.calibration_slots = d.value("calibration_slots", c.calibration_slots);
    if (c.calibration_slots < 1000)
      throw InvalidArgumentError(
          "scenario config: calibration needs at least 1000 slots");
  }

  if (j.contains("localization")) {
    const json& l = j.at("localization");
    expect_keys(l, "'localization'",
                {"k", "guard", "block_floor", "epsilon"});
    c.k_localize = l.value("k", c.k_localize);
    if (c.k_localize < 1)
      throw InvalidArgumentError(
          "scenario config: localization k must be at least 1");
    c.guard = l.value("guard", c.guard);
    if (c.guard < 0)
      throw InvalidArgumentError(
          "scenario config: guard must be nonnegative");
    if (l.contains("block_floor")) {
      const json& b = l.at("block_floor");
      if (b.is_string() && b.get<std::string>() == "auto") {
        c.block_floor = -1.0;
      } else if (b.is_number() && b.get<double>() >= 0.0) {
        c.block_floor = b.get<double>();
      } else {
        throw InvalidArgumentError(
            "scenario config: block_floor must be a nonnegative number or "
            "'auto'");
      }
    }
    c.epsilon = l.value("epsilon", 0.0);
    if (c.epsilon < 0.0)
      throw InvalidArgumentError(
          "scenario config: epsilon must be nonnegative");
  }

  if (j.contains("output")) {
    if (!j.at("output").is_string() ||
        j.at("output").get<std::string>().empty())
      throw InvalidArgumentError(
          "scenario config: output must be a nonempty path");
    c.output_dir = j.at("output").get<std::string>();
  }
  return c;
}

namespace {

json config_json(const ScenarioConfig& c) {
  json j;
  j["format"] = "gridsleuth-scenario";
  j["version"] = 1;
  j["feeder"] = c.feeder_path;
  j["allocation"] = c.allocation_path;
  j["slots"] = c.slots;
  j["power_factor"] = c.power_factor;
  j["seeds"] = {{"load", c.load_seed},
                {"noise", pick(c.noise_seed, c.load_seed + 1)},
                {"slack", pick(c.slack_seed, c.load_seed + 2)},
                {"calibration", pick(c.calibration_seed, c.load_seed + 1000)}};
  j["noise"] = {{"magnitude_std", c.noise.magnitude_std},
                {"angle_std", c.noise.angle_std}};
  j["slack"] = {{"magnitude", c.slack.magnitude},
                {"dither_magnitude", c.slack.dither_magnitude},
                {"dither_angle", c.slack.dither_angle}};
  json evs = json::array();
  for (const ScenarioEvent& e : c.events)
    evs.push_back({{"slot", e.slot},
                   {"kind", kind_name(e.kind)},
                   {"target", e.target},
                   {"factor", e.factor}});
  j["events"] = evs;
  j["identification"] = {{"tau", c.tau}};
  j["detector"] = {{"alpha", c.alpha},
                   {"gamma", c.gamma_auto ? json("auto") : json(c.gamma)},
                   {"calibration_slots", c.calibration_slots}};
  j["localization"] = {{"k", c.k_localize},
                       {"guard", c.guard},
                       {"block_floor", c.block_floor < 0.0
                                           ? json("auto")
                                           : json(c.block_floor)},
                       {"epsilon", c.epsilon}};
  j["output"] = c.output_dir;
  return j;
}

}  // namespace

std::string config_to_json(const ScenarioConfig& c) {
  return config_json(c).dump(2) + "\n";
}

uint64_t config_hash(const ScenarioConfig& c) {
  // The hash pins the experiment, not its destination or file layout: the
  // output directory is dropped and the referenced fixture files enter by
  // content, so renaming a feeder file does not masquerade as a new run.
  json j = config_json(c);
  j.erase("output");
  j.erase("feeder");
  j.erase("allocation");
  uint64_t h = fnv1a64(j.dump());
  h = fnv1a64(read_file(c.feeder_path), h);
  h = fnv1a64(read_file(c.allocation_path), h);
  return h;
}

ScenarioConfig load_config_file(const std::string& path) {
  ScenarioConfig c = config_from_json(read_file(path));
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](std::string& p) {
    if (fs::path(p).is_relative()) p = (base / p).string();
  };
  resolve(c.feeder_path);
  resolve(c.allocation_path);
  if (!fs::exists(c.feeder_path))
    throw InvalidArgumentError("scenario config: feeder file '" +
                               c.feeder_path + "' not found");
  if (!fs::exists(c.allocation_path))
    throw InvalidArgumentError("scenario config: allocation file '" +
                               c.allocation_path + "' not found");
  return c;
}

simulator::ScenarioSpec build_spec(const ScenarioConfig& c) {
  simulator::ScenarioSpec spec;
  spec.allocation = loads::load_allocation_file(c.allocation_path);
  spec.household = loads::default_household_model(c.load_seed);
  spec.power_factor = c.power_factor;
  spec.noise = c.noise;
  spec.noise.seed = pick(c.noise_seed, c.load_seed + 1);
  spec.slack = c.slack;
  spec.slack.seed = pick(c.slack_seed, c.load_seed + 2);
  spec.events = c.events;
  spec.slots = c.slots;
  return spec;
}

streamio::StreamData read_stream_any(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw Error("cannot open '" + path + "' for reading");
  char magic[4] = {};
  probe.read(magic, 4);
  probe.close();
  if (std::string(magic, 4) == "GSRP") return streamio::read_replay(path);
  return streamio::read_stream_csv(path);
}

SimulateOutputs run_simulate(const ScenarioConfig& c) {
  const feeder::FeederModel f = feeder::load_feeder_file(c.feeder_path);
  const uint64_t h = config_hash(c);
  const auto stream = simulator::run_scenario(f, build_spec(c));
  const auto labels = streamio::node_labels(f);

  fs::create_directories(c.output_dir);
  SimulateOutputs out;
  out.csv_path = join(c.output_dir, "stream.csv");
  out.replay_path = join(c.output_dir, "stream.gsrp");
  out.manifest_path = join(c.output_dir, "manifest.json");
  out.slots = static_cast<int>(stream.size());
  out.dimension = f.dimension();
  out.hash = h;
  streamio::write_stream_csv(out.csv_path, stream, labels, h);
  streamio::write_replay(out.replay_path, stream, labels, h);

  json m;
  m["format"] = "gridsleuth-manifest";
  m["version"] = 1;
  m["tool_version"] = kToolVersion;
  m["config_hash"] = hex16(h);
  m["slots"] = out.slots;
  m["dimension"] = out.dimension;
  m["seeds"] = {{"load", c.load_seed},
                {"noise", pick(c.noise_seed, c.load_seed + 1)},
                {"slack", pick(c.slack_seed, c.load_seed + 2)},
                {"calibration", pick(c.calibration_seed, c.load_seed + 1000)}};
  m["feeder"] = c.feeder_path;
  m["allocation"] = c.allocation_path;
  m["events"] = c.events.size();
  write_file(out.manifest_path, m.dump(2) + "\n");
  return out;
}

IdentifyOutputs run_identify(const std::string& stream_path, double tau,
                             const std::string& out_dir,
                             const std::string& ground_truth_feeder) {
  streamio::StreamData sd = read_stream_any(stream_path);
  if (sd.snapshots.empty())
    throw InsufficientDataError("stream '" + stream_path +
                                "' holds no snapshots");
  const auto w = simulator::window(sd.snapshots, 0,
                                   static_cast<int>(sd.snapshots.size()));
  const ident::IdentifiedModel model = ident::identify(w.V, w.I, tau);

  fs::create_directories(out_dir);
  IdentifyOutputs out;
  out.model_path = join(out_dir, "model.json");
  out.report_path = join(out_dir, "identify_report.json");
  out.dimension = model.partition.dimension();
  out.rank = model.partition.rank();
  out.hash = sd.config_hash;

  json mj = json::parse(ident::model_to_json(model));
  mj["config_hash"] = hex16(sd.config_hash);
  write_file(out.model_path, mj.dump(2) + "\n");

  json rep;
  rep["format"] = "gridsleuth-identify-report";
  rep["version"] = 1;
  rep["config_hash"] = hex16(sd.config_hash);
  rep["stream"] = fs::path(stream_path).filename().string();
  rep["slots"] = sd.snapshots.size();
  rep["dimension"] = out.dimension;
  rep["rank"] = out.rank;
  rep["tau"] = tau;
  rep["diagnostics"] = {
      {"dependency_residual", model.diagnostics.dependency_residual},
      {"fit_residual", model.diagnostics.fit_residual},
      {"constraint_violation", model.diagnostics.constraint_violation},
      {"objective", model.diagnostics.objective},
      {"recovery_iterations", model.diagnostics.recovery_iterations}};

  if (!ground_truth_feeder.empty()) {
    const auto truth =
        feeder::assemble_ybus(feeder::load_feeder_file(ground_truth_feeder));
    if (truth.D != out.dimension)
      throw InvalidArgumentError(
          "ground-truth feeder has " + std::to_string(truth.D) +
          " node phases but the stream has " + std::to_string(out.dimension));
    const auto& dep = model.partition.dependent;
    const auto& ind = model.partition.independent;
    numerics::ComplexMatrix ref;
    if (dep.empty()) {
      ref = truth.Y;
    } else {
      // A rank-deficient window cannot pin the dependent rows, so the
      // recovered independent block is compared against the equivalent
      // reduced matrix: the true dependent blocks folded through the fitted
      // dependency map.
      numerics::ComplexMatrix Y11t(dep.size(), dep.size());
      numerics::ComplexMatrix Y22t(ind.size(), ind.size());
      for (size_t r = 0; r < dep.size(); ++r)
        for (size_t s = 0; s < dep.size(); ++s)
          Y11t(r, s) = truth.Y(dep[r], dep[s]);
      for (size_t r = 0; r < ind.size(); ++r)
        for (size_t s = 0; s < ind.size(); ++s)
          Y22t(r, s) = truth.Y(ind[r], ind[s]);
      ref = Y22t - model.X.transpose() * Y11t * model.X;
    }
    const numerics::ComplexMatrix& est = model.Y22;
    const Eigen::ArrayXXd abs_err = (ref - est).cwiseAbs().array();
    const double floor = 1e-3 * ref.cwiseAbs().maxCoeff();
    out.max_abs_error = abs_err.maxCoeff();
    out.max_rel_error = numerics::max_relative_error(ref, est);
    out.grid_path = join(out_dir, "identify_grid.csv");

    std::string grid = "# config=" + hex16(sd.config_hash) + "\n";
    grid += "row,col,node_row,node_col,abs_error,rel_error\n";
    for (Eigen::Index i = 0; i < ref.rows(); ++i)
      for (Eigen::Index jcol = 0; jcol < ref.cols(); ++jcol) {
        const size_t li = dep.empty() ? static_cast<size_t>(i)
                                      : static_cast<size_t>(ind[i]);
        const size_t lj = dep.empty() ? static_cast<size_t>(jcol)
                                      : static_cast<size_t>(ind[jcol]);
        const double denom = std::max(std::abs(ref(i, jcol)), floor);
        grid += std::to_string(i) + ',' + std::to_string(jcol) + ',' +
                sd.labels.at(li) + ',' + sd.labels.at(lj) + ',' +
                textio::format_double(abs_err(i, jcol)) + ',' +
                textio::format_double(abs_err(i, jcol) / denom) + '\n';
      }
    write_file(out.grid_path, grid);
    rep["max_abs_error"] = out.max_abs_error;
    rep["max_rel_error"] = out.max_rel_error;
    rep["grid"] = "identify_grid.csv";
  }
  write_file(out.report_path, rep.dump(2) + "\n");
  return out;
}

MonitorOutputs run_monitor(const ScenarioConfig& c,
                           const std::string& stream_path,
                           const std::string& model_path) {
  const feeder::FeederModel f = feeder::load_feeder_file(c.feeder_path);
  const uint64_t chash = config_hash(c);

  std::vector<simulator::PhasorSnapshot> stream;
  uint64_t stream_hash = chash;
  if (stream_path.empty()) {
    stream = simulator::run_scenario(f, build_spec(c));
  } else {
    streamio::StreamData sd = read_stream_any(stream_path);
    stream = std::move(sd.snapshots);
    stream_hash = sd.config_hash;
  }

  feeder::BusAdmittance Y0 = feeder::assemble_ybus(f);
  if (!model_path.empty()) {
    const auto model = ident::model_from_json(read_file(model_path));
    numerics::ComplexMatrix Y = ident::reconstruct_full(model);
    if (Y.rows() != Y0.D)
      throw InvalidArgumentError(
          "identified model spans " + std::to_string(Y.rows()) +
          " node phases but the feeder has " + std::to_string(Y0.D));
    Y0.Y = std::move(Y);
  }
  if (!stream.empty() && stream.front().V.size() != Y0.D)
    throw InvalidArgumentError(
        "stream carries " + std::to_string(stream.front().V.size()) +
        " node phases but the feeder has " + std::to_string(Y0.D));

  double gamma = c.gamma;
  if (c.gamma_auto) {
    // Event-free rehearsal with its own seeds; the noise model matches the
    // monitored stream so the quantile reflects the same disturbance level.
    ScenarioConfig cal = c;
    cal.events.clear();
    cal.slots = c.calibration_slots;
    cal.load_seed = pick(c.calibration_seed, c.load_seed + 1000);
    cal.noise_seed = cal.load_seed + 1;
    cal.slack_seed = cal.load_seed + 2;
    const auto rehearsal = simulator::run_scenario(f, build_spec(cal));
    events::DetectorState probe = events::make_detector(Y0, 1.0);
    std::vector<double> norms;
    norms.reserve(rehearsal.size());
    for (const auto& snap : rehearsal)
      norms.push_back(events::residual(probe, snap).norm);
    gamma = events::calibrate_threshold(norms, c.alpha);
  }

  events::DetectorState st = events::make_detector(Y0, gamma);
  std::vector<events::AlarmRow> rows;
  rows.reserve(stream.size());
  MonitorOutputs out;
  out.gamma = gamma;
  fs::create_directories(c.output_dir);

  int event_counter = 0;
  for (size_t i = 0; i < stream.size(); ++i) {
    const auto alarm = events::detect(st, stream[i]);
    rows.push_back({stream[i].slot, st.residual_history.back(), gamma,
                    alarm.has_value()});
    ++out.slots_processed;
    if (!alarm) continue;
    ++out.alarms;
    const int t = *alarm;
    try {
      const size_t start = i + static_cast<size_t>(c.guard);
      if (start + static_cast<size_t>(c.k_localize) > stream.size())
        throw InsufficientDataError(
            "the stream ends before " + std::to_string(c.k_localize) +
            " post-event slots are available after the alarm at slot " +
            std::to_string(t));
      const auto w =
          simulator::window(stream, static_cast<int>(start), c.k_localize);
      events::LocalizeOptions opts;
      opts.min_samples = c.k_localize;
      opts.epsilon = c.epsilon;
      opts.block_floor = c.block_floor;
      events::EventRecord rec = events::localize(st.Y0, w, t, opts);
      if (rec.changed_blocks.empty()) {
        // Nothing significant behind the alarm: count it and resume with
        // the unchanged model rather than folding solver dust into it.
        ++out.false_alarms;
        st.armed = true;
        continue;
      }
      char name[32];
      std::snprintf(name, sizeof(name), "event_%04d.json", ++event_counter);
      json ej = json::parse(events::record_to_json(rec));
      ej["config_hash"] = hex16(chash);
      const std::string path = join(c.output_dir, name);
      write_file(path, ej.dump(2) + "\n");
      out.event_paths.push_back(path);
      events::rebase(st, rec);
      ++out.events_localized;
    } catch (const Error& e) {
      ++out.localization_failures;
      out.advisory = "localization after the alarm at slot " +
                     std::to_string(t) + " failed: " + e.what();
      break;
    }
  }

  out.alarm_path = join(c.output_dir, "alarms.csv");
  write_file(out.alarm_path,
             "# config=" + hex16(chash) + "\n" + events::alarm_log_csv(rows));

  json s;
  s["format"] = "gridsleuth-monitor-summary";
  s["version"] = 1;
  s["tool_version"] = kToolVersion;
  s["config_hash"] = hex16(chash);
  s["stream_config_hash"] = hex16(stream_hash);
  s["gamma"] = gamma;
  s["slots_processed"] = out.slots_processed;
  s["alarms"] = out.alarms;
  s["events_localized"] = out.events_localized;
  s["false_alarms"] = out.false_alarms;
  s["localization_failures"] = out.localization_failures;
  json names = json::array();
  for (const auto& p : out.event_paths)
    names.push_back(fs::path(p).filename().string());
  s["events"] = names;
  if (!out.advisory.empty()) s["advisory"] = out.advisory;
  out.exit_code = out.localization_failures > 0 ? 3
                  : out.events_localized > 0   ? 2
                                               : 0;
  s["exit_code"] = out.exit_code;
  out.summary_path = join(c.output_dir, "summary.json");
  write_file(out.summary_path, s.dump(2) + "\n");
  return out;
}

ReplayOutputs run_replay(const std::string& replay_path,
                         const std::string& csv_out) {
  streamio::StreamData sd = streamio::read_replay(replay_path);
  ReplayOutputs out;
  out.hash = sd.config_hash;
  out.slots = static_cast<int>(sd.snapshots.size());
  out.dimension = static_cast<int>(sd.labels.size());
  if (!csv_out.empty()) {
    const fs::path parent = fs::path(csv_out).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    streamio::write_stream_csv(csv_out, sd.snapshots, sd.labels,
                               sd.config_hash);
    out.csv_path = csv_out;
  }
  return out;
}

std::vector<std::string> run_validate(const std::string& config_path) {
  std::vector<std::string> findings;
  ScenarioConfig c;
  try {
    c = load_config_file(config_path);
  } catch (const Error& e) {
    findings.push_back(std::string("config: ") + e.what());
    return findings;
  }

  std::unique_ptr<feeder::FeederModel> f;
  try {
    f = std::make_unique<feeder::FeederModel>(
        feeder::load_feeder_file(c.feeder_path));
  } catch (const Error& e) {
    findings.push_back(std::string("feeder: ") + e.what());
  }
  if (f) {
    if (!f->is_connected())
      findings.push_back(
          "feeder: not every bus reaches the slack through in-service lines");
    if (!f->is_radial())
      findings.push_back("feeder: the in-service network is not radial");
  }

  try {
    const loads::LoadAllocation alloc =
        loads::load_allocation_file(c.allocation_path);
    if (f) {
      for (const auto& entry : alloc.entries) {
        if (!f->has_bus(entry.bus)) {
          findings.push_back("allocation: bus '" + entry.bus +
                             "' is not in the feeder");
        } else if (f->index_of(entry.bus, entry.phase) < 0) {
          findings.push_back("allocation: bus '" + entry.bus +
                             "' has no phase " +
                             feeder::phase_letter(entry.phase));
        }
      }
    }
  } catch (const Error& e) {
    findings.push_back(std::string("allocation: ") + e.what());
  }

  if (f) {
    // Walk the event list against the evolving service state so a trip of
    // an already-open line is caught before a run wastes an hour.
    std::map<std::string, bool> service;
    for (const auto& line : f->lines()) service[line.id] = line.in_service;
    for (const auto& ev : c.events) {
      const std::string what = std::string(kind_name(ev.kind)) + " at slot " +
                               std::to_string(ev.slot);
      if (ev.slot >= c.slots)
        findings.push_back("events: " + what + " is beyond the run's " +
                           std::to_string(c.slots) + " slots");
      switch (ev.kind) {
        case ScenarioEvent::Kind::LineTrip:
        case ScenarioEvent::Kind::LineClose: {
          if (!f->has_line(ev.target)) {
            findings.push_back("events: " + what + " targets unknown line '" +
                               ev.target + "'");
            break;
          }
          const bool want_closed = ev.kind == ScenarioEvent::Kind::LineTrip;
          if (service[ev.target] != want_closed)
            findings.push_back("events: " + what + " finds line '" +
                               ev.target +
                               (want_closed ? "' already out of service"
                                            : "' already in service"));
          service[ev.target] = !want_closed;
          break;
        }
        case ScenarioEvent::Kind::ShuntScale: {
          if (!f->has_bus(ev.target)) {
            findings.push_back("events: " + what + " targets unknown bus '" +
                               ev.target + "'");
            break;
          }
          bool has_bank = false;
          for (const auto& sh : f->shunts())
            if (sh.bus == ev.target) has_bank = true;
          if (!has_bank)
            findings.push_back("events: " + what + " scales bus '" +
                               ev.target + "' which carries no shunt bank");
          break;
        }
      }
    }
  }

  if (c.gamma_auto && c.noise.magnitude_std == 0.0 &&
      c.noise.angle_std == 0.0)
    findings.push_back(
        "detector: gamma 'auto' on a noiseless stream calibrates against "
        "numerical roundoff; set an explicit gamma");
  if (c.guard == 0)
    findings.push_back(
        "localization: guard 0 starts the window on the alarm slot itself, "
        "which localization rejects as overlapping the event");
  return findings;
}

}  // namespace gridsleuth::scenario
