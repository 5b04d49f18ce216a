#include "gridsleuth/loads.hpp"

#include <Eigen/QR>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gridsleuth/errors.hpp"
#include "gridsleuth/rng.hpp"

namespace gridsleuth::loads {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void validate_model(const HouseholdModel& m) {
  const Eigen::Index n = m.states.size();
  if (n == 0) throw InvalidArgumentError("household model has no states");
  if (m.states.minCoeff() < 0.0)
    throw InvalidArgumentError("household power states must be nonnegative");
  if (m.transition.rows() != n || m.transition.cols() != n)
    throw InvalidArgumentError("transition matrix shape mismatch");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (m.transition.row(i).minCoeff() < 0.0)
      throw InvalidArgumentError("transition probabilities must be nonnegative");
    if (std::abs(m.transition.row(i).sum() - 1.0) > 1e-12)
      throw InvalidArgumentError("transition matrix rows must sum to 1");
  }
}

double envelope_at(const HouseholdModel& m, int k) {
  if (m.envelope_period <= 0.0 || m.envelope_amplitude == 0.0) return 1.0;
  return 1.0 + m.envelope_amplitude *
                   std::sin(kTwoPi * (k + m.envelope_phase) /
                            m.envelope_period);
}

int pick_state(const Eigen::VectorXd& weights, double u) {
  double acc = 0.0;
  const Eigen::Index n = weights.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    acc += weights(i);
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(n - 1);
}

// Sampling core shared by sample_household and aggregate, which hoists the
// validation, the stationary solve, and the envelope table out of the
// per-household loop. Multiplying each household by the same envelope values
// keeps aggregate sums bit-identical to summed sample_household calls.
void sample_into(const HouseholdModel& m, const Eigen::VectorXd& pi,
                 const Eigen::VectorXd& env, uint64_t seed, int K,
                 Eigen::VectorXd& out) {
  rng::SplitMix stream(seed);
  int state = pick_state(pi, stream.uniform());
  out(0) = m.states(state) * env(0);
  for (int k = 1; k < K; ++k) {
    state = pick_state(m.transition.row(state), stream.uniform());
    out(k) = m.states(state) * env(k);
  }
}

Eigen::VectorXd envelope_table(const HouseholdModel& m, int K) {
  Eigen::VectorXd env(K);
  for (int k = 0; k < K; ++k) env(k) = envelope_at(m, k);
  return env;
}

}  // namespace

uint64_t household_seed(uint64_t master, uint64_t node_index,
                        uint64_t household) {
  return rng::mix64(rng::mix64(rng::mix64(master) ^ node_index) ^ household);
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition) {
  const Eigen::Index n = transition.rows();
  // pi' P = pi' together with sum(pi) = 1, solved in the least-squares sense.
  Eigen::MatrixXd A(n + 1, n);
  A.topRows(n) =
      transition.transpose() - Eigen::MatrixXd::Identity(n, n);
  A.bottomRows(1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
  b(n) = 1.0;
  Eigen::VectorXd pi = A.colPivHouseholderQr().solve(b);
  for (Eigen::Index i = 0; i < n; ++i) pi(i) = std::max(pi(i), 0.0);
  pi /= pi.sum();
  return pi;
}

HouseholdModel default_household_model(uint64_t seed) {
  HouseholdModel m;
  m.states.resize(3);
  m.states << 150.0, 800.0, 2500.0;
  // Chain with stationary distribution (0.08, 0.9198, 0.0002): row i leaves
  // with total rate r = 0.12 split proportionally to the stationary mass of
  // the other states. The leave rate keeps every aggregation point moving
  // within a few hundred slots; the peak-state mass is small enough that
  // simultaneous peaks on a 10-household node stay rare over a full period.
  const double r = 0.12;
  Eigen::Vector3d pi(0.08, 0.9198, 0.0002);
  m.transition.resize(3, 3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j)
      if (i != j) m.transition(i, j) = r * pi(j);
    m.transition(i, i) = 1.0 - r * (1.0 - pi(i));
  }
  m.seed = seed;
  m.envelope_amplitude = 0.13;
  m.envelope_period = 50000.0;
  m.envelope_phase = 0.0;
  return m;
}

Eigen::VectorXd sample_household(const HouseholdModel& m, int K) {
  if (K < 1) throw InvalidArgumentError("trajectory length must be positive");
  validate_model(m);
  Eigen::VectorXd pi = stationary_distribution(m.transition);
  Eigen::VectorXd out(K);
  sample_into(m, pi, envelope_table(m, K), m.seed, K, out);
  return out;
}

int LoadAllocation::total_households() const {
  int total = 0;
  for (const AllocationEntry& e : entries) total += e.households;
  return total;
}

LoadAllocation load_allocation(const std::string& text) {
  LoadAllocation alloc;
  std::istringstream stream(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(stream, raw)) {
    ++lineno;
    std::istringstream line(raw);
    std::string bus, phase_tok;
    long long count = 0;
    if (!(line >> bus)) continue;
    if (bus[0] == '#') continue;
    if (!(line >> phase_tok >> count))
      throw ParseError("expected 'bus phase count'", lineno, 1);
    std::string extra;
    if (line >> extra)
      throw ParseError("unexpected trailing token '" + extra + "'", lineno, 1);
    std::vector<feeder::Phase> ps;
    try {
      ps = feeder::parse_phases(phase_tok);
    } catch (const InvalidArgumentError& e) {
      throw ParseError(e.what(), lineno, 1);
    }
    if (ps.size() != 1)
      throw ParseError("allocation rows take a single phase", lineno, 1);
    if (count < 0)
      throw ParseError("household count must be nonnegative", lineno, 1);
    alloc.entries.push_back({bus, ps[0], static_cast<int>(count)});
  }
  return alloc;
}

LoadAllocation load_allocation_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open allocation file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_allocation(buf.str());
}

std::string save_allocation(const LoadAllocation& alloc) {
  std::ostringstream out;
  for (const AllocationEntry& e : alloc.entries)
    out << e.bus << ' ' << feeder::phase_letter(e.phase) << ' ' << e.households
        << '\n';
  return out.str();
}

DemandSeries aggregate(const feeder::FeederModel& f,
                       const LoadAllocation& alloc, const HouseholdModel& m,
                       double pf, int K) {
  if (K < 1) throw InvalidArgumentError("slot count must be positive");
  if (!(pf > 0.0 && pf <= 1.0))
    throw InvalidArgumentError("power factor must be in (0, 1]");
  validate_model(m);
  const Eigen::VectorXd pi = stationary_distribution(m.transition);
  const Eigen::VectorXd env = envelope_table(m, K);
  const double tan_phi = std::tan(std::acos(pf));

  DemandSeries out;
  out.S = Eigen::MatrixXcd::Zero(f.dimension(), K);
  Eigen::VectorXd traj(K);
  Eigen::VectorXd total(K);
  for (const AllocationEntry& e : alloc.entries) {
    const int row = f.index_of(e.bus, e.phase);
    if (row < 0)
      throw ModelError("allocation references missing node/phase " + e.bus +
                       ":" + std::string(1, feeder::phase_letter(e.phase)));
    if (e.households < 0)
      throw ModelError("negative household count at bus " + e.bus);
    total.setZero();
    for (int i = 0; i < e.households; ++i) {
      sample_into(m, pi, env, household_seed(m.seed, static_cast<uint64_t>(row),
                                             static_cast<uint64_t>(i)),
                  K, traj);
      total += traj;
    }
    for (int k = 0; k < K; ++k)
      out.S(row, k) += std::complex<double>(total(k), total(k) * tan_phi);
  }
  return out;
}

}  // namespace gridsleuth::loads
