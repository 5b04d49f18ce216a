#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "gridsleuth/feeder.hpp"
#include "gridsleuth/numerics.hpp"
#include "gridsleuth/simulator.hpp"

namespace gridsleuth::events {

using numerics::Complex;
using numerics::ComplexMatrix;
using numerics::ComplexVector;

// Threshold calibration headroom over the event-free quantile.
inline constexpr double kDefaultSafetyFactor = 1.5;
inline constexpr int kDefaultMinLocalizeSlots = 10;
// Changed blocks smaller than this fraction of the largest block of the
// believed admittance are solver dust, not events.
inline constexpr double kDefaultBlockFloorRatio = 1e-3;

// Online monitor around a believed admittance matrix. The residual history
// keeps the most recent norms (bounded ring) for whiteness checks.
struct DetectorState {
  feeder::BusAdmittance Y0;
  double gamma = 0.0;  // alarm threshold on the residual norm, amperes
  std::size_t history_capacity = 4096;
  std::deque<double> residual_history;
  bool armed = true;
};

DetectorState make_detector(feeder::BusAdmittance Y0, double gamma,
                            std::size_t history_capacity = 4096);

struct Residual {
  ComplexVector e;  // I(k) - Y0 V(k)
  double norm = 0.0;
};

// Prediction error of one snapshot against the believed admittance.
Residual residual(const DetectorState& state,
                  const simulator::PhasorSnapshot& snap);

// Feeds one snapshot to an armed detector. Logs the residual norm either
// way; on alarm (norm > gamma) returns the snapshot's slot and disarms the
// state until rebase re-arms it.
std::optional<int> detect(DetectorState& state,
                          const simulator::PhasorSnapshot& snap);

// gamma = safety * empirical (1-alpha) quantile of event-free residual
// norms. Requires at least 1000 samples and 0 < alpha < 1.
double calibrate_threshold(const std::vector<double>& norms, double alpha,
                           double safety = kDefaultSafetyFactor);

struct WhitenessReport {
  int n = 0;
  int turning_points = 0;
  double z_score = 0.0;
  bool pass = false;
};

// Turning-point whiteness test on a series of residual norms: counts
// interior strict local extrema, normalizes by mean 2(n-2)/3 and variance
// (16n-29)/90, passes when |z| stays within the two-sided alpha band.
// Requires n >= 20.
WhitenessReport turning_point_test(const std::vector<double>& series,
                                   double alpha);

struct ChangedBlock {
  std::string bus_m;
  std::string bus_n;  // equal to bus_m for a diagonal (shunt) block
  double magnitude = 0.0;  // Frobenius norm of the block of delta_Y
};

enum class EventClass {
  line_trip,
  line_close,
  shunt_change,
  switch_pair,
  unknown
};

std::string to_string(EventClass c);

struct EventRecord {
  int t = 0;               // detection slot
  ComplexMatrix delta_Y;   // symmetric admittance change
  std::vector<ChangedBlock> changed_blocks;  // by magnitude, descending
  EventClass classification = EventClass::unknown;
  int samples_used = 0;
};

struct LocalizeOptions {
  int min_samples = kDefaultMinLocalizeSlots;
  double epsilon = 0.0;      // residual ball for noisy windows; 0 = equality
  double block_floor = -1.0;  // < 0 picks ratio * largest block of Y0
  double tolerance = 1e-8;
};

// Recovers the sparsest symmetric admittance change explaining a purely
// post-event window: min ||dY||_1 s.t. I - Y0 V = dY V. The window must
// start after the detection slot t; windows that straddle the change make
// the recovery meaningless and are rejected.
EventRecord localize(const feeder::BusAdmittance& Y0,
                     const simulator::PhasorWindow& window, int t,
                     const LocalizeOptions& opts = {});

// Structural classification of a recovered change by its significant
// blocks. Off-diagonal blocks carry line events, diagonal-only changes are
// shunt switching, one opening plus one closing coupling is a switch pair.
EventClass classify(const ComplexMatrix& delta_Y,
                    const std::map<std::string, std::pair<int, int>>&
                        block_index,
                    double block_floor);

// Accepts a localization: folds the change into the believed admittance and
// re-arms detection.
void rebase(DetectorState& state, const EventRecord& rec);

std::string record_to_json(const EventRecord& rec);

struct AlarmRow {
  int slot = 0;
  double residual_norm = 0.0;
  double gamma = 0.0;
  bool alarmed = false;
};

// CSV with header "slot,residual_norm,gamma,alarmed"; numbers use the
// shortest exact round-trip form so identical runs write identical bytes.
std::string alarm_log_csv(const std::vector<AlarmRow>& rows);

}  // namespace gridsleuth::events
