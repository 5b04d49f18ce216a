#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridsleuth/events.hpp"
#include "gridsleuth/ident.hpp"
#include "gridsleuth/simulator.hpp"
#include "gridsleuth/streamio.hpp"

namespace gridsleuth::scenario {

inline constexpr const char* kToolVersion = "0.1.0";

// A fully resolved experiment description. The JSON schema (documented in
// docs/formats.md) is versioned and rejects unknown keys, so a typo cannot
// silently change a run. Seeds left at zero are derived from the load seed:
// noise = load + 1, slack = load + 2, calibration = load + 1000.
struct ScenarioConfig {
  std::string feeder_path;
  std::string allocation_path;
  int slots = 0;
  double power_factor = 0.95;

  uint64_t load_seed = 1;
  uint64_t noise_seed = 0;
  uint64_t slack_seed = 0;
  uint64_t calibration_seed = 0;

  simulator::NoiseModel noise;    // seed field is overwritten by noise_seed
  simulator::SlackProfile slack;  // seed field is overwritten by slack_seed
  std::vector<simulator::ScenarioEvent> events;

  double tau = ident::kDefaultRankTolerance;

  double alpha = 0.01;
  bool gamma_auto = true;
  double gamma = 0.0;  // used when gamma_auto is false
  int calibration_slots = 2000;

  int k_localize = events::kDefaultMinLocalizeSlots;
  int guard = 1;              // window starts guard slots after the alarm
  double block_floor = -1.0;  // < 0 selects the detector default
  double epsilon = 0.0;

  std::string output_dir = "out";
};

ScenarioConfig config_from_json(const std::string& text);
// Canonical form: every field explicit, keys sorted; hashing this string
// gives the config hash embedded in all outputs.
std::string config_to_json(const ScenarioConfig& c);
uint64_t config_hash(const ScenarioConfig& c);
// Loads and validates; feeder/allocation paths are resolved relative to the
// config file's directory and must exist.
ScenarioConfig load_config_file(const std::string& path);

// Scenario inputs ready to hand to the simulator.
simulator::ScenarioSpec build_spec(const ScenarioConfig& c);

// Reads either stream format, sniffing the replay magic.
streamio::StreamData read_stream_any(const std::string& path);

struct SimulateOutputs {
  std::string csv_path;
  std::string replay_path;
  std::string manifest_path;
  int slots = 0;
  int dimension = 0;
  uint64_t hash = 0;
};
SimulateOutputs run_simulate(const ScenarioConfig& c);

struct IdentifyOutputs {
  std::string model_path;
  std::string report_path;
  std::string grid_path;  // empty when no ground truth was supplied
  int dimension = 0;
  int rank = 0;
  double max_abs_error = 0.0;  // against the reduced reference; 0 sans truth
  double max_rel_error = 0.0;
  uint64_t hash = 0;  // carried over from the stream
};
// Identifies from every slot of the stream. With a ground-truth feeder the
// per-element error grid compares the recovered independent block against
// the equivalent reduced matrix (dependent rows folded through the fitted
// dependency map), the only reference a rank-deficient window determines.
IdentifyOutputs run_identify(const std::string& stream_path, double tau,
                             const std::string& out_dir,
                             const std::string& ground_truth_feeder = "");

struct MonitorOutputs {
  std::string alarm_path;
  std::string summary_path;
  std::vector<std::string> event_paths;
  int slots_processed = 0;
  int alarms = 0;
  int events_localized = 0;
  int false_alarms = 0;  // alarms whose localized change was insignificant
  int localization_failures = 0;
  double gamma = 0.0;
  std::string advisory;  // set when localization failed
  int exit_code = 0;     // 0 no events, 2 localized, 3 detection only
};
// Streams slot by slot: detect, localize on alarm, rebase, continue. With
// an empty stream_path the stream is generated live from the config (so a
// single config reproduces simulate + monitor end to end). model_path, when
// given, supplies the believed admittance from an identified model instead
// of assembling the ground-truth matrix.
MonitorOutputs run_monitor(const ScenarioConfig& c,
                           const std::string& stream_path = "",
                           const std::string& model_path = "");

struct ReplayOutputs {
  uint64_t hash = 0;
  int slots = 0;
  int dimension = 0;
  std::string csv_path;  // empty unless a CSV conversion was requested
};
ReplayOutputs run_replay(const std::string& replay_path,
                         const std::string& csv_out = "");

// Static checks of a config and the fixtures it references; each finding is
// one human-readable sentence, and an empty list means runnable.
std::vector<std::string> run_validate(const std::string& config_path);

}  // namespace gridsleuth::scenario
