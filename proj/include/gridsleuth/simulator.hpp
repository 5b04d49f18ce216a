#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "gridsleuth/feeder.hpp"
#include "gridsleuth/loads.hpp"
#include "gridsleuth/numerics.hpp"

namespace gridsleuth::simulator {

using numerics::Complex;
using numerics::ComplexMatrix;
using numerics::ComplexVector;

struct PhasorSnapshot {
  int slot = 0;
  ComplexVector V;  // volts, one entry per node/phase
  ComplexVector I;  // amperes, injections, same ordering
};

struct PhasorWindow {
  int first_slot = 0;
  ComplexMatrix V;  // D x K, column k is slot first_slot + k
  ComplexMatrix I;
};

// Polar measurement perturbation: each reported phasor x becomes
// x * (1 + magnitude_std * g1) * exp(i * angle_std * g2) with independent
// standard normal draws. Voltages are perturbed first, currents after;
// a zero-noise model draws nothing.
struct NoiseModel {
  double magnitude_std = 0.0;
  double angle_std = 0.0;
  uint64_t seed = 0;
};

// Per-phase slack voltage: magnitude (p.u. of the feeder base) on the
// standard rotation a:0, b:-120, c:+120 degrees, optionally dithered per
// slot to mimic transmission-side drift. Zero dither draws nothing.
struct SlackProfile {
  double magnitude = 1.0;
  double dither_magnitude = 0.0;  // relative std per slot
  double dither_angle = 0.0;      // radians std per slot
  uint64_t seed = 0;
};

struct PowerFlowResult {
  ComplexVector V;
  ComplexVector I;
  int iterations = 0;
  double mismatch = 0.0;  // worst per-node complex power error, p.u.
};

// Fixed-point current-injection solver. The slack-reduced admittance block
// is factored once at construction; nodes with no in-service path to the
// slack are pinned to V = 0 with their demand shed.
class PowerFlowSolver {
 public:
  explicit PowerFlowSolver(const feeder::FeederModel& f);
  ~PowerFlowSolver();
  PowerFlowSolver(PowerFlowSolver&&) noexcept;
  PowerFlowSolver& operator=(PowerFlowSolver&&) noexcept;

  const feeder::BusAdmittance& ybus() const;
  // S is consumed complex power per node/phase (volt-amperes); slack_voltage
  // has one entry per slack phase.
  PowerFlowResult solve(const ComplexVector& S,
                        const ComplexVector& slack_voltage) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

PowerFlowResult solve_powerflow(const feeder::FeederModel& f,
                                const ComplexVector& S,
                                const ComplexVector& slack_voltage);

// Balanced slack vector for the model's slack phases.
ComplexVector nominal_slack_voltage(const feeder::FeederModel& f,
                                    double magnitude_pu = 1.0);

struct ScenarioEvent {
  enum class Kind { LineTrip, LineClose, ShuntScale };
  int slot = 0;
  Kind kind = Kind::LineTrip;
  std::string target;   // line id, or bus id for shunt changes
  double factor = 0.0;  // shunt scale factor
};

struct ScenarioSpec {
  loads::LoadAllocation allocation;
  loads::HouseholdModel household;
  double power_factor = 0.95;
  NoiseModel noise;
  SlackProfile slack;
  std::vector<ScenarioEvent> events;  // ascending slot order
  int slots = 0;
};

// Emits one snapshot per slot. Events at slot t edit the network before that
// slot's solve, so t is the first slot reflecting the change. Reported
// currents are Y * V computed from the post-noise voltages, then perturbed
// independently.
std::vector<PhasorSnapshot> run_scenario(const feeder::FeederModel& f,
                                         const ScenarioSpec& spec);

PhasorWindow window(const std::vector<PhasorSnapshot>& stream, int first,
                    int K);

}  // namespace gridsleuth::simulator
