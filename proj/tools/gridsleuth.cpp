#include <CLI11.hpp>

#include <cctype>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include "gridsleuth/errors.hpp"
#include "gridsleuth/scenario.hpp"

namespace {

using namespace gridsleuth;

enum Level { kOff = 0, kError = 1, kWarn = 2, kInfo = 3, kDebug = 4 };

Level g_level = kWarn;

Level level_from_env() {
  const char* v = std::getenv("GRIDSLEUTH_LOG");
  if (!v) return kWarn;
  std::string s(v);
  for (char& c : s) c = static_cast<char>(std::tolower(c));
  if (s == "off" || s == "none") return kOff;
  if (s == "error") return kError;
  if (s == "warn" || s == "warning") return kWarn;
  if (s == "info") return kInfo;
  if (s == "debug") return kDebug;
  std::cerr << "gridsleuth: ignoring unknown GRIDSLEUTH_LOG level '" << v
            << "'\n";
  return kWarn;
}

void logmsg(Level lv, const std::string& msg) {
  static const char* names[] = {"off", "error", "warn", "info", "debug"};
  if (lv <= g_level) std::cerr << "[" << names[lv] << "] " << msg << "\n";
}

std::string hex16(uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return std::string(buf);
}

void apply_seed_override(scenario::ScenarioConfig& c, uint64_t seed) {
  c.load_seed = seed;
  c.noise_seed = seed + 1;
  c.slack_seed = seed + 2;
  c.calibration_seed = seed + 1000;
}

}  // namespace

int main(int argc, char** argv) {
  g_level = level_from_env();

  CLI::App app{"distribution grid identification and event monitoring"};
  app.set_version_flag("--version", scenario::kToolVersion);
  app.require_subcommand(1);

  std::string config_path, out_dir, stream_path, model_path, truth_path;
  std::string csv_out;
  uint64_t seed_override = 0;
  double tau = ident::kDefaultRankTolerance;
  double alpha = 0.0, gamma = 0.0;
  int k_localize = 0;

  CLI::App* sim = app.add_subcommand(
      "simulate", "run a scenario and write its phasor stream");
  sim->add_option("--config", config_path, "scenario file")
      ->required()
      ->check(CLI::ExistingFile);
  sim->add_option("--out", out_dir, "output directory override");
  auto* sim_seed =
      sim->add_option("--seed-override", seed_override, "replace all seeds");

  CLI::App* idf = app.add_subcommand(
      "identify", "recover the admittance matrix from a stream");
  idf->add_option("--stream", stream_path, "phasor stream (csv or replay)")
      ->required()
      ->check(CLI::ExistingFile);
  auto* idf_tau = idf->add_option("--tau", tau, "rank pivot threshold");
  idf->add_option("--out", out_dir, "output directory");
  idf->add_option("--ground-truth", truth_path,
                  "feeder file for an error report against the known matrix")
      ->check(CLI::ExistingFile);
  auto* idf_cfg = idf->add_option("--config", config_path,
                                  "scenario file supplying tau and output")
                      ->check(CLI::ExistingFile);

  CLI::App* mon = app.add_subcommand(
      "monitor", "detect and localize admittance events slot by slot");
  mon->add_option("--config", config_path, "scenario file")
      ->required()
      ->check(CLI::ExistingFile);
  mon->add_option("--stream", stream_path,
                  "monitor this stream instead of simulating live")
      ->check(CLI::ExistingFile);
  mon->add_option("--model", model_path,
                  "identified model JSON for the believed admittance")
      ->check(CLI::ExistingFile);
  mon->add_option("--out", out_dir, "output directory override");
  auto* mon_seed =
      mon->add_option("--seed-override", seed_override, "replace all seeds");
  auto* mon_alpha =
      mon->add_option("--alpha", alpha, "calibration tail probability");
  auto* mon_gamma =
      mon->add_option("--gamma", gamma, "explicit alarm threshold");
  auto* mon_k =
      mon->add_option("--k-localize", k_localize, "post-event window length");

  CLI::App* rep = app.add_subcommand(
      "replay", "inspect a binary replay file, optionally convert to csv");
  rep->add_option("--stream", stream_path, "replay file")
      ->required()
      ->check(CLI::ExistingFile);
  rep->add_option("--out", csv_out, "write the stream as csv to this path");

  CLI::App* val = app.add_subcommand(
      "validate", "check a scenario and its fixtures without running");
  val->add_option("--config", config_path, "scenario file")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      scenario::ScenarioConfig c = scenario::load_config_file(config_path);
      if (sim_seed->count()) apply_seed_override(c, seed_override);
      if (!out_dir.empty()) c.output_dir = out_dir;
      logmsg(kDebug, "effective config:\n" + scenario::config_to_json(c));
      const auto r = scenario::run_simulate(c);
      std::cout << "wrote " << r.csv_path << "\n"
                << "wrote " << r.replay_path << "\n"
                << "wrote " << r.manifest_path << "\n"
                << r.slots << " slots, " << r.dimension
                << " node phases, config " << hex16(r.hash) << "\n";
      return 0;
    }

    if (idf->parsed()) {
      std::string dir = "out";
      if (idf_cfg->count()) {
        scenario::ScenarioConfig c = scenario::load_config_file(config_path);
        dir = c.output_dir;
        if (!idf_tau->count()) tau = c.tau;
      }
      if (!out_dir.empty()) dir = out_dir;
      const auto r = scenario::run_identify(stream_path, tau, dir, truth_path);
      std::cout << "wrote " << r.model_path << "\n"
                << "wrote " << r.report_path << "\n";
      if (!r.grid_path.empty()) std::cout << "wrote " << r.grid_path << "\n";
      std::cout << "rank " << r.rank << " of " << r.dimension
                << ", config " << hex16(r.hash) << "\n";
      if (!r.grid_path.empty())
        std::cout << "max relative error "
                  << (r.rank == r.dimension ? "(vs full matrix) "
                                            : "(vs reduced reference) ")
                  << r.max_rel_error << "\n";
      return 0;
    }

    if (mon->parsed()) {
      scenario::ScenarioConfig c = scenario::load_config_file(config_path);
      if (mon_seed->count()) apply_seed_override(c, seed_override);
      if (!out_dir.empty()) c.output_dir = out_dir;
      if (mon_alpha->count()) c.alpha = alpha;
      if (mon_gamma->count()) {
        c.gamma = gamma;
        c.gamma_auto = false;
      }
      if (mon_k->count()) c.k_localize = k_localize;
      logmsg(kDebug, "effective config:\n" + scenario::config_to_json(c));
      const auto r = scenario::run_monitor(c, stream_path, model_path);
      logmsg(kInfo, "gamma " + std::to_string(r.gamma) +
                        (c.gamma_auto ? " (calibrated)" : " (configured)"));
      std::cout << "wrote " << r.alarm_path << "\n";
      for (const auto& p : r.event_paths) std::cout << "wrote " << p << "\n";
      std::cout << "wrote " << r.summary_path << "\n"
                << r.slots_processed << " slots: " << r.alarms << " alarms, "
                << r.events_localized << " events localized, "
                << r.false_alarms << " false alarms, "
                << r.localization_failures << " localization failures\n";
      if (!r.advisory.empty()) std::cerr << "advisory: " << r.advisory << "\n";
      return r.exit_code;
    }

    if (rep->parsed()) {
      const auto r = scenario::run_replay(stream_path, csv_out);
      std::cout << stream_path << ": " << r.slots << " slots, "
                << r.dimension << " node phases, config " << hex16(r.hash)
                << "\n";
      if (!r.csv_path.empty()) std::cout << "wrote " << r.csv_path << "\n";
      return 0;
    }

    if (val->parsed()) {
      const auto findings = scenario::run_validate(config_path);
      if (findings.empty()) {
        const auto c = scenario::load_config_file(config_path);
        std::cout << "valid, config " << hex16(scenario::config_hash(c))
                  << "\n";
        return 0;
      }
      for (const auto& msg : findings) std::cout << msg << "\n";
      return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
