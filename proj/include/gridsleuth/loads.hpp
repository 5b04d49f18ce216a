#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gridsleuth/feeder.hpp"

namespace gridsleuth::loads {

// Discrete-time Markov chain over power states, advanced once per slot.
// An optional shared diurnal envelope multiplies the emitted power by
// 1 + amplitude * sin(2*pi*(k + envelope_phase)/envelope_period); it is
// common to all households so aggregate demand keeps a day shape instead of
// averaging flat.
struct HouseholdModel {
  Eigen::VectorXd states;      // watts, one per chain state
  Eigen::MatrixXd transition;  // row-stochastic, per-slot probabilities
  uint64_t seed = 0;
  double envelope_amplitude = 0.0;
  double envelope_period = 0.0;  // slots; <= 0 disables the envelope
  double envelope_phase = 0.0;   // slots
};

// The shipped defaults: idle 150 W, active 800 W, peak 2500 W, slow-mixing
// transitions, and a diurnal envelope sized so aggregated node demand has a
// realistic peak-to-average ratio.
HouseholdModel default_household_model(uint64_t seed);

struct AllocationEntry {
  std::string bus;
  feeder::Phase phase;
  int households = 0;
};

struct LoadAllocation {
  std::vector<AllocationEntry> entries;
  int total_households() const;
};

LoadAllocation load_allocation(const std::string& text);
LoadAllocation load_allocation_file(const std::string& path);
std::string save_allocation(const LoadAllocation& alloc);

// Complex power drawn at every node/phase for slots 0..K-1, in the feeder's
// global node/phase ordering. Unallocated rows are zero.
struct DemandSeries {
  Eigen::MatrixXcd S;  // D x K, volt-amperes
};

// Documented seeding recipe: household i on global node/phase index j of a
// run with master seed s samples from SplitMix(household_seed(s, j, i)).
uint64_t household_seed(uint64_t master, uint64_t node_index,
                        uint64_t household);

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition);

// One seeded Markov trajectory of length K (watts). The initial state is
// drawn from the stationary distribution.
Eigen::VectorXd sample_household(const HouseholdModel& m, int K);

// Sum of per-household trajectories per allocation entry; reactive power is
// set by the constant power factor, Q = P tan(acos(pf)).
DemandSeries aggregate(const feeder::FeederModel& f,
                       const LoadAllocation& alloc, const HouseholdModel& m,
                       double pf, int K);

}  // namespace gridsleuth::loads
