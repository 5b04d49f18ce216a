#include "gridsleuth/simulator.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <set>

#include "gridsleuth/rng.hpp"

namespace gridsleuth::simulator {

namespace {

constexpr double kDeg120 = 2.0943951023931954923;  // 120 degrees in radians

Complex phase_rotation(feeder::Phase p) {
  switch (p) {
    case feeder::Phase::A:
      return Complex(1.0, 0.0);
    case feeder::Phase::B:
      return std::polar(1.0, -kDeg120);
    default:
      return std::polar(1.0, kDeg120);
  }
}

}  // namespace

ComplexVector nominal_slack_voltage(const feeder::FeederModel& f,
                                    double magnitude_pu) {
  const feeder::Bus& slack = f.bus(f.slack_bus());
  ComplexVector v(static_cast<Eigen::Index>(slack.phases.size()));
  for (size_t i = 0; i < slack.phases.size(); ++i)
    v(static_cast<Eigen::Index>(i)) =
        magnitude_pu * f.base_voltage() * phase_rotation(slack.phases[i]);
  return v;
}

struct PowerFlowSolver::Impl {
  feeder::BusAdmittance adm;
  int D = 0;
  double v_base = 0.0;
  double s_base = 0.0;
  std::vector<int> slack_idx;     // global indices of slack phases
  std::vector<int> solved_idx;    // energized non-slack global indices
  std::vector<bool> energized;    // per global index
  std::vector<feeder::Phase> node_phase;
  Eigen::PartialPivLU<ComplexMatrix> lu;  // factor of Y[solved, solved]
  ComplexMatrix Y_sf;                     // Y[solved, slack]
};

PowerFlowSolver::PowerFlowSolver(const feeder::FeederModel& f)
    : impl_(std::make_unique<Impl>()) {
  impl_->adm = assemble_ybus(f);
  impl_->D = f.dimension();
  impl_->v_base = f.base_voltage();
  impl_->s_base = f.base_power();

  std::set<std::string> live;
  for (const std::string& b : f.energized_buses()) live.insert(b);
  impl_->energized.assign(impl_->D, false);
  impl_->node_phase.reserve(impl_->D);
  for (const feeder::NodePhase& np : f.node_phases()) {
    impl_->node_phase.push_back(np.phase);
    if (!live.count(np.bus_id)) continue;
    impl_->energized[np.index] = true;
    if (np.bus_id == f.slack_bus())
      impl_->slack_idx.push_back(np.index);
    else
      impl_->solved_idx.push_back(np.index);
  }

  const auto ns = static_cast<Eigen::Index>(impl_->solved_idx.size());
  const auto nf = static_cast<Eigen::Index>(impl_->slack_idx.size());
  ComplexMatrix Yss(ns, ns);
  impl_->Y_sf.resize(ns, nf);
  for (Eigen::Index r = 0; r < ns; ++r) {
    for (Eigen::Index c = 0; c < ns; ++c)
      Yss(r, c) = impl_->adm.Y(impl_->solved_idx[r], impl_->solved_idx[c]);
    for (Eigen::Index c = 0; c < nf; ++c)
      impl_->Y_sf(r, c) = impl_->adm.Y(impl_->solved_idx[r], impl_->slack_idx[c]);
  }
  if (ns > 0) {
    Eigen::FullPivLU<ComplexMatrix> probe(Yss);
    if (!probe.isInvertible())
      throw SolverError(
          "slack-reduced admittance matrix is singular; some node/phase has "
          "no coupling to the slack",
          0.0);
    impl_->lu.compute(Yss);
  }
}

PowerFlowSolver::~PowerFlowSolver() = default;
PowerFlowSolver::PowerFlowSolver(PowerFlowSolver&&) noexcept = default;
PowerFlowSolver& PowerFlowSolver::operator=(PowerFlowSolver&&) noexcept =
    default;

const feeder::BusAdmittance& PowerFlowSolver::ybus() const {
  return impl_->adm;
}

PowerFlowResult PowerFlowSolver::solve(const ComplexVector& S,
                                       const ComplexVector& slack_voltage) const {
  const Impl& im = *impl_;
  if (S.size() != im.D)
    throw InvalidArgumentError("demand vector has wrong dimension");
  if (slack_voltage.size() != static_cast<Eigen::Index>(im.slack_idx.size()))
    throw InvalidArgumentError("slack voltage has wrong number of phases");

  const auto ns = static_cast<Eigen::Index>(im.solved_idx.size());
  const double v_floor = 0.5 * im.v_base;

  ComplexVector V = ComplexVector::Zero(im.D);
  for (size_t i = 0; i < im.slack_idx.size(); ++i)
    V(im.slack_idx[i]) = slack_voltage(static_cast<Eigen::Index>(i));
  // Flat start on the nominal rotation.
  const double mag0 =
      slack_voltage.size() > 0 ? slack_voltage.cwiseAbs().mean() : im.v_base;
  for (Eigen::Index r = 0; r < ns; ++r) {
    const int g = im.solved_idx[r];
    V(g) = mag0 * phase_rotation(im.node_phase[g]);
  }

  const ComplexVector fixed = ns > 0 && im.Y_sf.cols() > 0
                                  ? ComplexVector(im.Y_sf * slack_voltage)
                                  : ComplexVector::Zero(ns);

  double mismatch = 0.0;
  const double tol = 1e-8;
  const int cap = 200;
  int it = 0;
  for (; it < cap; ++it) {
    // Injection currents of the constant-power loads at present voltages.
    ComplexVector inj(ns);
    for (Eigen::Index r = 0; r < ns; ++r) {
      const int g = im.solved_idx[r];
      inj(r) = std::conj(-S(g) / V(g));
    }
    ComplexVector Vs = im.lu.solve(inj - fixed);
    for (Eigen::Index r = 0; r < ns; ++r) V(im.solved_idx[r]) = Vs(r);

    mismatch = 0.0;
    ComplexVector I_all = im.adm.Y * V;
    for (Eigen::Index r = 0; r < ns; ++r) {
      const int g = im.solved_idx[r];
      const Complex gap = V(g) * std::conj(I_all(g)) + S(g);
      mismatch = std::max(mismatch, std::abs(gap) / im.s_base);
    }
    if (mismatch <= tol) break;
  }
  if (mismatch > tol)
    throw SolverError("power flow did not converge within iteration cap",
                      mismatch);

  for (Eigen::Index r = 0; r < ns; ++r) {
    const int g = im.solved_idx[r];
    if (std::abs(V(g)) < v_floor)
      throw DivergenceError("voltage collapse at node index " +
                            std::to_string(g));
  }

  PowerFlowResult out;
  out.V = V;
  out.I = im.adm.Y * V;
  out.iterations = it + 1;
  out.mismatch = mismatch;
  return out;
}

PowerFlowResult solve_powerflow(const feeder::FeederModel& f,
                                const ComplexVector& S,
                                const ComplexVector& slack_voltage) {
  return PowerFlowSolver(f).solve(S, slack_voltage);
}

namespace {

void apply_polar_noise(ComplexVector& x, double mag_std, double ang_std,
                       rng::SplitMix& stream) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double gm = stream.normal();
    const double ga = stream.normal();
    x(i) *= (1.0 + mag_std * gm) * std::polar(1.0, ang_std * ga);
  }
}

}  // namespace

std::vector<PhasorSnapshot> run_scenario(const feeder::FeederModel& f,
                                         const ScenarioSpec& spec) {
  if (spec.slots < 1)
    throw InvalidArgumentError("scenario must cover at least one slot");
  for (size_t i = 0; i < spec.events.size(); ++i) {
    if (spec.events[i].slot < 1 || spec.events[i].slot >= spec.slots)
      throw InvalidArgumentError("event slot " +
                                 std::to_string(spec.events[i].slot) +
                                 " is outside the scenario");
    if (i > 0 && spec.events[i].slot < spec.events[i - 1].slot)
      throw InvalidArgumentError("events must be sorted by slot");
  }

  loads::DemandSeries demand = loads::aggregate(
      f, spec.allocation, spec.household, spec.power_factor, spec.slots);

  const bool noisy =
      spec.noise.magnitude_std > 0.0 || spec.noise.angle_std > 0.0;
  const bool dithered =
      spec.slack.dither_magnitude > 0.0 || spec.slack.dither_angle > 0.0;
  rng::SplitMix noise_stream(spec.noise.seed);
  rng::SplitMix slack_stream(spec.slack.seed);

  feeder::FeederModel current = f;
  PowerFlowSolver solver(current);
  const ComplexVector slack0 = nominal_slack_voltage(f, spec.slack.magnitude);

  std::vector<PhasorSnapshot> out;
  out.reserve(spec.slots);
  size_t next_event = 0;
  for (int k = 0; k < spec.slots; ++k) {
    bool edited = false;
    while (next_event < spec.events.size() &&
           spec.events[next_event].slot == k) {
      const ScenarioEvent& ev = spec.events[next_event++];
      switch (ev.kind) {
        case ScenarioEvent::Kind::LineTrip:
          current = apply_line_trip(current, ev.target);
          break;
        case ScenarioEvent::Kind::LineClose:
          current = apply_line_close(current, ev.target);
          break;
        case ScenarioEvent::Kind::ShuntScale:
          current = apply_shunt_scale(current, ev.target, ev.factor);
          break;
      }
      edited = true;
    }
    if (edited) solver = PowerFlowSolver(current);

    ComplexVector slack_v = slack0;
    if (dithered)
      apply_polar_noise(slack_v, spec.slack.dither_magnitude,
                        spec.slack.dither_angle, slack_stream);

    PhasorSnapshot snap;
    snap.slot = k;
    try {
      PowerFlowResult res = solver.solve(demand.S.col(k), slack_v);
      snap.V = std::move(res.V);
    } catch (const DivergenceError& e) {
      throw DivergenceError("slot " + std::to_string(k) + ": " + e.what());
    } catch (const SolverError& e) {
      throw SolverError("slot " + std::to_string(k) + ": " + e.what(),
                        e.residual());
    }

    if (noisy)
      apply_polar_noise(snap.V, spec.noise.magnitude_std, spec.noise.angle_std,
                        noise_stream);
    snap.I = solver.ybus().Y * snap.V;
    if (noisy)
      apply_polar_noise(snap.I, spec.noise.magnitude_std, spec.noise.angle_std,
                        noise_stream);
    out.push_back(std::move(snap));
  }
  return out;
}

PhasorWindow window(const std::vector<PhasorSnapshot>& stream, int first,
                    int K) {
  if (K < 1) throw InvalidArgumentError("window length must be positive");
  if (first < 0 || static_cast<size_t>(first) + K > stream.size())
    throw InsufficientDataError("window [" + std::to_string(first) + ", " +
                                std::to_string(first + K) +
                                ") exceeds the stream");
  const auto D = stream[static_cast<size_t>(first)].V.size();
  PhasorWindow w;
  w.first_slot = stream[static_cast<size_t>(first)].slot;
  w.V.resize(D, K);
  w.I.resize(D, K);
  for (int k = 0; k < K; ++k) {
    const PhasorSnapshot& s = stream[static_cast<size_t>(first + k)];
    if (s.V.size() != D || s.I.size() != D)
      throw InvalidArgumentError("inconsistent snapshot dimensions");
    w.V.col(k) = s.V;
    w.I.col(k) = s.I;
  }
  return w;
}

}  // namespace gridsleuth::simulator
