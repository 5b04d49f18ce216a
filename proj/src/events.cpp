#include "gridsleuth/events.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "gridsleuth/errors.hpp"
#include "gridsleuth/textio.hpp"

namespace gridsleuth::events {

using json = nlohmann::json;

namespace {

void check_finite_norms(const std::vector<double>& norms, const char* who) {
  for (double v : norms)
    if (!std::isfinite(v) || v < 0.0)
      throw InvalidArgumentError(std::string(who) +
                                 ": residual norms must be finite and >= 0");
}

// Rational approximation to the standard normal quantile, good to ~1e-9.
double normal_quantile(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
             c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5, r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r +
          a[5]) *
         q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

ComplexMatrix symmetrized(const ComplexMatrix& M) {
  return 0.5 * (M + M.transpose());
}

double block_frobenius(const ComplexMatrix& Y,
                       const std::pair<int, int>& bm,
                       const std::pair<int, int>& bn) {
  return Y.block(bm.first, bn.first, bm.second, bn.second).norm();
}

double largest_block(const ComplexMatrix& Y,
                     const std::map<std::string, std::pair<int, int>>& idx) {
  double largest = 0.0;
  for (const auto& [m, bm] : idx)
    for (const auto& [n, bn] : idx)
      largest = std::max(largest, block_frobenius(Y, bm, bn));
  return largest;
}

// Sign probe for a coupling block: physical series admittances sit in the
// right half of the (Re, -Im) plane, so removing one leaves a positive
// score on the off-diagonal change and a negative one on the diagonals.
double block_score(const ComplexMatrix& B) {
  Complex top(0.0, 0.0);
  double best = -1.0;
  for (Eigen::Index r = 0; r < B.rows(); ++r)
    for (Eigen::Index c = 0; c < B.cols(); ++c)
      if (std::abs(B(r, c)) > best) {
        best = std::abs(B(r, c));
        top = B(r, c);
      }
  return top.real() - top.imag();
}

}  // namespace

DetectorState make_detector(feeder::BusAdmittance Y0, double gamma,
                            std::size_t history_capacity) {
  if (Y0.D <= 0 || Y0.Y.rows() != Y0.D || Y0.Y.cols() != Y0.D)
    throw InvalidArgumentError(
        "detector: believed admittance must be square and non-empty");
  if (!(gamma > 0.0))
    throw InvalidArgumentError("detector: threshold must be positive");
  if (history_capacity == 0)
    throw InvalidArgumentError("detector: history capacity must be positive");
  DetectorState s;
  s.Y0 = std::move(Y0);
  s.gamma = gamma;
  s.history_capacity = history_capacity;
  s.armed = true;
  return s;
}

Residual residual(const DetectorState& state,
                  const simulator::PhasorSnapshot& snap) {
  if (snap.V.size() != state.Y0.D || snap.I.size() != state.Y0.D)
    throw InvalidArgumentError(
        "residual: snapshot dimension does not match the believed "
        "admittance");
  Residual r;
  r.e = snap.I - state.Y0.Y * snap.V;
  r.norm = r.e.norm();
  return r;
}

std::optional<int> detect(DetectorState& state,
                          const simulator::PhasorSnapshot& snap) {
  if (!state.armed)
    throw InvalidArgumentError(
        "detect: detector is disarmed; rebase the last event before "
        "resuming");
  const Residual r = residual(state, snap);
  state.residual_history.push_back(r.norm);
  while (state.residual_history.size() > state.history_capacity)
    state.residual_history.pop_front();
  if (r.norm > state.gamma) {
    state.armed = false;
    return snap.slot;
  }
  return std::nullopt;
}

double calibrate_threshold(const std::vector<double>& norms, double alpha,
                           double safety) {
  if (norms.size() < 1000)
    throw InsufficientDataError(
        "calibrate_threshold: need at least 1000 event-free residual "
        "samples, got " +
        std::to_string(norms.size()));
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw InvalidArgumentError(
        "calibrate_threshold: alpha must lie strictly between 0 and 1");
  if (!(safety > 0.0))
    throw InvalidArgumentError(
        "calibrate_threshold: safety factor must be positive");
  check_finite_norms(norms, "calibrate_threshold");

  std::vector<double> sorted = norms;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * n));
  rank = std::min(std::max<std::size_t>(rank, 1), sorted.size());
  return safety * sorted[rank - 1];
}

WhitenessReport turning_point_test(const std::vector<double>& series,
                                   double alpha) {
  const int n = static_cast<int>(series.size());
  if (n < 20)
    throw InsufficientDataError(
        "turning_point_test: need at least 20 samples, got " +
        std::to_string(n));
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw InvalidArgumentError(
        "turning_point_test: alpha must lie strictly between 0 and 1");
  check_finite_norms(series, "turning_point_test");

  int T = 0;
  for (int i = 1; i + 1 < n; ++i) {
    const bool peak = series[i] > series[i - 1] && series[i] > series[i + 1];
    const bool valley =
        series[i] < series[i - 1] && series[i] < series[i + 1];
    if (peak || valley) ++T;
  }
  WhitenessReport rep;
  rep.n = n;
  rep.turning_points = T;
  const double mean = 2.0 * (n - 2) / 3.0;
  const double var = (16.0 * n - 29.0) / 90.0;
  rep.z_score = (T - mean) / std::sqrt(var);
  rep.pass = std::abs(rep.z_score) <= normal_quantile(1.0 - alpha / 2.0);
  return rep;
}

std::string to_string(EventClass c) {
  switch (c) {
    case EventClass::line_trip:
      return "line_trip";
    case EventClass::line_close:
      return "line_close";
    case EventClass::shunt_change:
      return "shunt_change";
    case EventClass::switch_pair:
      return "switch_pair";
    case EventClass::unknown:
      return "unknown";
  }
  return "unknown";
}

EventClass classify(const ComplexMatrix& delta_Y,
                    const std::map<std::string, std::pair<int, int>>&
                        block_index,
                    double block_floor) {
  if (delta_Y.rows() != delta_Y.cols() || block_index.empty())
    throw InvalidArgumentError(
        "classify: change matrix must be square with a block index");
  if (!(block_floor >= 0.0))
    throw InvalidArgumentError("classify: block floor must be >= 0");

  std::vector<std::string> diag;
  struct OffBlock {
    std::string m, n;
    double score;
  };
  std::vector<OffBlock> off;
  for (const auto& [m, bm] : block_index) {
    for (const auto& [n, bn] : block_index) {
      if (n < m) continue;
      const ComplexMatrix B =
          delta_Y.block(bm.first, bn.first, bm.second, bn.second);
      if (B.norm() < block_floor) continue;
      if (m == n)
        diag.push_back(m);
      else
        off.push_back({m, n, block_score(B)});
    }
  }

  if (off.empty()) return diag.empty() ? EventClass::unknown
                                       : EventClass::shunt_change;

  auto diag_confined_to = [&](const std::vector<std::string>& ends) {
    for (const auto& bus : diag)
      if (std::find(ends.begin(), ends.end(), bus) == ends.end())
        return false;
    return true;
  };

  if (off.size() == 1) {
    const OffBlock& L = off.front();
    if (L.score == 0.0 || diag.empty() || !diag_confined_to({L.m, L.n}))
      return EventClass::unknown;
    // A consistent line event moves the endpoint self-blocks opposite to
    // the coupling block.
    for (const auto& bus : diag) {
      const auto& bb = block_index.at(bus);
      const double s = block_score(
          delta_Y.block(bb.first, bb.first, bb.second, bb.second));
      if (s * L.score >= 0.0) return EventClass::unknown;
    }
    return L.score > 0.0 ? EventClass::line_trip : EventClass::line_close;
  }

  if (off.size() == 2) {
    const bool opposite = off[0].score * off[1].score < 0.0;
    if (opposite &&
        diag_confined_to({off[0].m, off[0].n, off[1].m, off[1].n}))
      return EventClass::switch_pair;
  }
  return EventClass::unknown;
}

EventRecord localize(const feeder::BusAdmittance& Y0,
                     const simulator::PhasorWindow& window, int t,
                     const LocalizeOptions& opts) {
  const int D = Y0.D;
  const auto K = window.V.cols();
  if (D <= 0 || Y0.Y.rows() != D || Y0.Y.cols() != D)
    throw InvalidArgumentError(
        "localize: believed admittance must be square and non-empty");
  if (window.V.rows() != D || window.I.rows() != D ||
      window.I.cols() != K)
    throw InvalidArgumentError(
        "localize: window dimensions do not match the believed admittance");
  if (opts.min_samples < 1)
    throw InvalidArgumentError("localize: minimum sample count must be >= 1");
  if (K < opts.min_samples)
    throw InsufficientDataError(
        "localize: window holds " + std::to_string(K) + " slots, need " +
        std::to_string(opts.min_samples));
  if (window.first_slot <= t)
    throw InfeasibleError(
        "localize: window starting at slot " +
        std::to_string(window.first_slot) +
        " overlaps the event detected at slot " + std::to_string(t) +
        "; retry with a later window that starts after the event");

  const ComplexMatrix E = window.I - Y0.Y * window.V;

  numerics::BasisPursuitProblem prob;
  prob.A = ComplexMatrix::Zero(D * K, static_cast<Eigen::Index>(D) * D);
  for (Eigen::Index k = 0; k < K; ++k)
    for (int j = 0; j < D; ++j)
      for (int i = 0; i < D; ++i)
        prob.A(i + k * D, i + static_cast<Eigen::Index>(j) * D) =
            window.V(j, k);
  prob.b = Eigen::Map<const ComplexVector>(E.data(), D * K);
  for (int i = 0; i < D; ++i)
    for (int j = i + 1; j < D; ++j)
      prob.symmetry_map.emplace_back(i + static_cast<Eigen::Index>(j) * D,
                                     j + static_cast<Eigen::Index>(i) * D);
  prob.tolerance = opts.tolerance;
  prob.epsilon = opts.epsilon;

  ComplexVector x;
  try {
    x = numerics::basis_pursuit(prob);
  } catch (const numerics::ConvergenceError& e) {
    throw InfeasibleError(
        std::string("localize: sparse change recovery stalled (") +
        e.what() +
        "); the window may span the event boundary, retry with a later "
        "window");
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(
        std::string("localize: ") + e.what() +
        "; the window may span the event boundary, retry with a later "
        "window");
  }

  EventRecord rec;
  rec.t = t;
  rec.samples_used = static_cast<int>(K);
  rec.delta_Y =
      symmetrized(Eigen::Map<const ComplexMatrix>(x.data(), D, D));

  double floor = opts.block_floor;
  if (floor < 0.0)
    floor = kDefaultBlockFloorRatio * largest_block(Y0.Y, Y0.block_index);
  for (const auto& [m, bm] : Y0.block_index) {
    for (const auto& [n, bn] : Y0.block_index) {
      if (n < m) continue;
      const double mag = block_frobenius(rec.delta_Y, bm, bn);
      if (mag >= floor && mag > 0.0)
        rec.changed_blocks.push_back({m, n, mag});
    }
  }
  std::stable_sort(rec.changed_blocks.begin(), rec.changed_blocks.end(),
                   [](const ChangedBlock& a, const ChangedBlock& b) {
                     return a.magnitude > b.magnitude;
                   });
  rec.classification = classify(rec.delta_Y, Y0.block_index, floor);
  return rec;
}

void rebase(DetectorState& state, const EventRecord& rec) {
  if (rec.delta_Y.rows() != state.Y0.D || rec.delta_Y.cols() != state.Y0.D)
    throw InvalidArgumentError(
        "rebase: change matrix does not match the believed admittance");
  state.Y0.Y += rec.delta_Y;
  state.armed = true;
}

std::string record_to_json(const EventRecord& rec) {
  json blocks = json::array();
  for (const auto& b : rec.changed_blocks)
    blocks.push_back({{"bus_m", b.bus_m},
                      {"bus_n", b.bus_n},
                      {"magnitude", b.magnitude}});
  json data = json::array();
  for (Eigen::Index r = 0; r < rec.delta_Y.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < rec.delta_Y.cols(); ++c)
      row.push_back(json::array(
          {rec.delta_Y(r, c).real(), rec.delta_Y(r, c).imag()}));
    data.push_back(std::move(row));
  }
  json j;
  j["format"] = "gridsleuth-event";
  j["version"] = 1;
  j["t"] = rec.t;
  j["samples_used"] = rec.samples_used;
  j["classification"] = to_string(rec.classification);
  j["changed_blocks"] = std::move(blocks);
  j["delta_Y"] = {{"rows", rec.delta_Y.rows()},
                  {"cols", rec.delta_Y.cols()},
                  {"data", std::move(data)}};
  return j.dump(2) + "\n";
}

std::string alarm_log_csv(const std::vector<AlarmRow>& rows) {
  std::string out = "slot,residual_norm,gamma,alarmed\n";
  for (const auto& r : rows) {
    out += std::to_string(r.slot);
    out += ',';
    out += textio::format_double(r.residual_norm);
    out += ',';
    out += textio::format_double(r.gamma);
    out += ',';
    out += r.alarmed ? '1' : '0';
    out += '\n';
  }
  return out;
}

}  // namespace gridsleuth::events
