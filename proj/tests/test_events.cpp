#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <json.hpp>
#include <optional>

#include "gridsleuth/events.hpp"
#include "gridsleuth/feeder.hpp"
#include "gridsleuth/loads.hpp"
#include "gridsleuth/rng.hpp"
#include "gridsleuth/simulator.hpp"

using namespace gridsleuth;
using events::DetectorState;
using events::EventClass;
using numerics::Complex;
using numerics::ComplexMatrix;
using simulator::ScenarioEvent;

namespace {

feeder::FeederModel fixture13() {
  return feeder::load_feeder_file(std::string(GS_FIXTURE_DIR) +
                                  "/feeder13.feeder");
}

simulator::ScenarioSpec fixture_spec(int slots, uint64_t model_seed = 1) {
  simulator::ScenarioSpec spec;
  spec.allocation = loads::load_allocation_file(std::string(GS_FIXTURE_DIR) +
                                                "/table1.alloc");
  spec.household = loads::default_household_model(model_seed);
  spec.slots = slots;
  return spec;
}

std::optional<int> first_alarm(DetectorState& st,
                               const std::vector<simulator::PhasorSnapshot>&
                                   stream) {
  for (const auto& s : stream) {
    auto a = events::detect(st, s);
    if (a) return a;
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("residual matches a direct evaluation") {
  auto f = fixture13();
  auto Y0 = feeder::assemble_ybus(f);
  auto stream = simulator::run_scenario(f, fixture_spec(3));
  DetectorState st = events::make_detector(Y0, 1.0);

  // Matched model: currents are computed from the same admittance.
  events::Residual r = events::residual(st, stream[1]);
  CHECK(r.norm <= 1e-8);

  // Mismatched model: the error is the admittance difference acting on V.
  auto Y1 = feeder::assemble_ybus(feeder::apply_line_trip(f, "632-645"));
  DetectorState st1 = events::make_detector(Y1, 1.0);
  events::Residual r1 = events::residual(st1, stream[1]);
  const double direct = ((Y0.Y - Y1.Y) * stream[1].V).norm();
  CHECK(r1.norm == doctest::Approx(direct).epsilon(1e-10));

  simulator::PhasorSnapshot zero;
  zero.V = numerics::ComplexVector::Zero(Y0.D);
  zero.I = numerics::ComplexVector::Zero(Y0.D);
  events::Residual rz = events::residual(st, zero);
  CHECK(rz.norm == 0.0);
  CHECK(rz.e.cwiseAbs().maxCoeff() == 0.0);

  simulator::PhasorSnapshot bad;
  bad.V = numerics::ComplexVector::Zero(3);
  bad.I = numerics::ComplexVector::Zero(3);
  CHECK_THROWS_AS(events::residual(st, bad), InvalidArgumentError);
}

TEST_CASE("detector construction is validated") {
  auto Y0 = feeder::assemble_ybus(fixture13());
  CHECK_THROWS_AS(events::make_detector(Y0, 0.0), InvalidArgumentError);
  CHECK_THROWS_AS(events::make_detector(Y0, -1.0), InvalidArgumentError);
  CHECK_THROWS_AS(events::make_detector(Y0, 1.0, 0), InvalidArgumentError);
  feeder::BusAdmittance empty;
  CHECK_THROWS_AS(events::make_detector(empty, 1.0), InvalidArgumentError);
}

TEST_CASE("a matched stream never alarms and history stays bounded") {
  auto f = fixture13();
  auto stream = simulator::run_scenario(f, fixture_spec(300));
  DetectorState st =
      events::make_detector(feeder::assemble_ybus(f), 1e-6, 64);
  CHECK(!first_alarm(st, stream).has_value());
  CHECK(st.armed);
  CHECK(st.residual_history.size() == 64);
}

TEST_CASE("an admittance change alarms in its first slot") {
  auto f = fixture13();
  auto spec = fixture_spec(80);
  spec.events.push_back({50, ScenarioEvent::Kind::LineTrip, "684-611", 0.0});
  auto stream = simulator::run_scenario(f, spec);
  auto Y0 = feeder::assemble_ybus(f);

  DetectorState st = events::make_detector(Y0, 1e-3);
  auto alarm = first_alarm(st, stream);
  REQUIRE(alarm.has_value());
  CHECK(*alarm == 50);
  CHECK(!st.armed);
  CHECK_THROWS_AS(events::detect(st, stream[51]), InvalidArgumentError);

  // Identical stream and threshold alarm at the identical slot.
  DetectorState st2 = events::make_detector(Y0, 1e-3);
  auto alarm2 = first_alarm(st2, stream);
  REQUIRE(alarm2.has_value());
  CHECK(*alarm2 == *alarm);
  CHECK(st.residual_history == st2.residual_history);

  // Raising the threshold can only delay the first alarm.
  DetectorState hi = events::make_detector(Y0, 1e9);
  auto ahi = first_alarm(hi, stream);
  CHECK((!ahi.has_value() || *ahi >= *alarm));
}

TEST_CASE("threshold calibration uses the event-free quantile") {
  std::vector<double> flat(1000, 2.5);
  CHECK(events::calibrate_threshold(flat, 0.05) == 1.5 * 2.5);
  CHECK(events::calibrate_threshold(flat, 0.05, 2.0) == 2.0 * 2.5);

  // Gaussian norms: the empirical quantile approaches the closed form.
  rng::SplitMix g(404);
  std::vector<double> norms(20000);
  for (double& v : norms) v = 10.0 + g.normal();
  const double analytic = 10.0 + 1.6448536269514722;  // 95th percentile
  const double gamma = events::calibrate_threshold(norms, 0.05);
  CHECK(std::abs(gamma - 1.5 * analytic) / (1.5 * analytic) < 0.05);

  std::vector<double> few(999, 1.0);
  CHECK_THROWS_AS(events::calibrate_threshold(few, 0.05),
                  InsufficientDataError);
  CHECK_THROWS_AS(events::calibrate_threshold(flat, 0.0),
                  InvalidArgumentError);
  CHECK_THROWS_AS(events::calibrate_threshold(flat, 1.0),
                  InvalidArgumentError);
  CHECK_THROWS_AS(events::calibrate_threshold(flat, 0.05, 0.0),
                  InvalidArgumentError);
  std::vector<double> dirty(1000, 1.0);
  dirty[3] = -1.0;
  CHECK_THROWS_AS(events::calibrate_threshold(dirty, 0.05),
                  InvalidArgumentError);
}

TEST_CASE("turning point test separates white noise from trends") {
  // Monotone series: no interior extrema at all.
  std::vector<double> up(30);
  for (int i = 0; i < 30; ++i) up[i] = i;
  events::WhitenessReport mono = events::turning_point_test(up, 0.05);
  CHECK(mono.turning_points == 0);
  CHECK(!mono.pass);

  // Alternating series: every interior point is an extremum.
  std::vector<double> alt(30);
  for (int i = 0; i < 30; ++i) alt[i] = (i % 2) ? 1.0 : 0.0;
  events::WhitenessReport zig = events::turning_point_test(alt, 0.05);
  CHECK(zig.turning_points == 28);
  CHECK(!zig.pass);

  // Hand-built series with exactly two turning points among n=20:
  // z = (2 - 12) / sqrt(291/90).
  std::vector<double> two;
  for (int i = 0; i <= 10; ++i) two.push_back(i);
  two.push_back(9.0);
  for (int i = 11; i <= 18; ++i) two.push_back(i);
  REQUIRE(two.size() == 20);
  events::WhitenessReport rep = events::turning_point_test(two, 0.05);
  CHECK(rep.n == 20);
  CHECK(rep.turning_points == 2);
  CHECK(rep.z_score == doctest::Approx(-10.0 / std::sqrt(291.0 / 90.0))
                           .epsilon(1e-12));
  CHECK(!rep.pass);

  // White noise passes at the configured level for almost every seed.
  int passes = 0;
  for (uint64_t seed = 1; seed <= 50; ++seed) {
    rng::SplitMix g(seed);
    std::vector<double> series(1000);
    for (double& v : series) v = std::abs(g.normal());
    if (events::turning_point_test(series, 0.05).pass) ++passes;
  }
  CHECK(passes >= 44);

  std::vector<double> tiny(19, 1.0);
  CHECK_THROWS_AS(events::turning_point_test(tiny, 0.05),
                  InsufficientDataError);
  CHECK_THROWS_AS(events::turning_point_test(up, 0.0), InvalidArgumentError);
}

TEST_CASE("classification reads the significant block pattern") {
  auto f = fixture13();
  auto Y0 = feeder::assemble_ybus(f);
  const auto& idx = Y0.block_index;

  // Removing a line leaves its negated contribution.
  const ComplexMatrix trip645 =
      feeder::assemble_ybus(feeder::apply_line_trip(f, "632-645")).Y - Y0.Y;
  CHECK(events::classify(trip645, idx, 0.1) == EventClass::line_trip);
  CHECK(events::classify(ComplexMatrix(-trip645), idx, 0.1) ==
        EventClass::line_close);

  // One line out, another in: opposite coupling roles.
  const ComplexMatrix trip633 =
      feeder::assemble_ybus(feeder::apply_line_trip(f, "632-633")).Y - Y0.Y;
  CHECK(events::classify(ComplexMatrix(trip645 - trip633), idx, 0.1) ==
        EventClass::switch_pair);

  // Diagonal-only change.
  ComplexMatrix shunt = ComplexMatrix::Zero(Y0.D, Y0.D);
  const auto& b675 = idx.at("675");
  for (int p = 0; p < b675.second; ++p)
    shunt(b675.first + p, b675.first + p) = Complex(0.0, -0.026);
  CHECK(events::classify(shunt, idx, 1e-3) == EventClass::shunt_change);

  // Dense symmetric change matches no physical pattern.
  rng::SplitMix g(7);
  ComplexMatrix dense(Y0.D, Y0.D);
  for (int r = 0; r < Y0.D; ++r)
    for (int c = 0; c < Y0.D; ++c) dense(r, c) = Complex(g.normal(), g.normal());
  dense = 0.5 * (dense + dense.transpose().eval());
  CHECK(events::classify(dense, idx, 1e-3) == EventClass::unknown);

  // Everything under the floor reads as no classifiable change.
  CHECK(events::classify(ComplexMatrix(1e-6 * trip645), idx, 0.1) ==
        EventClass::unknown);

  CHECK_THROWS_AS(events::classify(trip645, idx, -1.0), InvalidArgumentError);
  CHECK_THROWS_AS(events::classify(ComplexMatrix::Zero(3, 4), idx, 0.1),
                  InvalidArgumentError);
}

TEST_CASE("localization recovers a line trip and rebases the detector") {
  auto f = fixture13();
  auto spec = fixture_spec(80);
  spec.events.push_back({50, ScenarioEvent::Kind::LineTrip, "684-611", 0.0});
  auto stream = simulator::run_scenario(f, spec);
  auto Y0 = feeder::assemble_ybus(f);

  DetectorState st = events::make_detector(Y0, 1e-3);
  auto alarm = first_alarm(st, stream);
  REQUIRE(alarm.has_value());

  auto w = simulator::window(stream, *alarm + 1, 10);
  events::LocalizeOptions opts;
  opts.block_floor = 0.1;
  events::EventRecord rec = events::localize(Y0, w, *alarm, opts);

  CHECK(rec.t == 50);
  CHECK(rec.samples_used == 10);
  CHECK(rec.classification == EventClass::line_trip);
  CHECK((rec.delta_Y - rec.delta_Y.transpose()).cwiseAbs().maxCoeff() <
        1e-8);

  // The recovered change explains the window.
  const ComplexMatrix E = w.I - Y0.Y * w.V;
  CHECK((rec.delta_Y * w.V - E).cwiseAbs().maxCoeff() <= 1e-8);

  // Top coupling block is the tripped line; the dead-end self block sits on
  // an unenergized node and cannot appear.
  REQUIRE(!rec.changed_blocks.empty());
  std::optional<events::ChangedBlock> top_coupling;
  for (const auto& b : rec.changed_blocks) {
    CHECK(b.magnitude >= opts.block_floor);
    if (b.bus_m != b.bus_n && !top_coupling) top_coupling = b;
  }
  REQUIRE(top_coupling.has_value());
  CHECK(top_coupling->bus_m == "611");
  CHECK(top_coupling->bus_n == "684");

  // Every confidently nonzero entry agrees with the true change.
  const ComplexMatrix truth =
      feeder::assemble_ybus(feeder::apply_line_trip(f, "684-611")).Y - Y0.Y;
  for (int r = 0; r < Y0.D; ++r)
    for (int c = 0; c < Y0.D; ++c)
      if (std::abs(rec.delta_Y(r, c)) > 1e-3)
        CHECK(std::abs(rec.delta_Y(r, c) - truth(r, c)) <=
              0.05 * std::abs(truth(r, c)));

  // Accepting the event restores quiet monitoring.
  events::rebase(st, rec);
  CHECK(st.armed);
  for (const auto& s : stream)
    if (s.slot > 50) CHECK(!events::detect(st, s).has_value());
}

TEST_CASE("localization of a shunt change meets the reconstruction bound") {
  auto f = fixture13();
  auto spec = fixture_spec(60);
  spec.events.push_back({40, ScenarioEvent::Kind::ShuntScale, "675", 0.25});
  auto stream = simulator::run_scenario(f, spec);
  auto Y0 = feeder::assemble_ybus(f);

  auto w = simulator::window(stream, 41, 10);
  events::LocalizeOptions opts;
  opts.block_floor = 1e-3;
  events::EventRecord rec = events::localize(Y0, w, 40, opts);

  const ComplexMatrix truth =
      feeder::assemble_ybus(feeder::apply_shunt_scale(f, "675", 0.25)).Y -
      Y0.Y;
  CHECK((rec.delta_Y - truth).norm() / truth.norm() <= 0.05);
  CHECK(rec.classification == EventClass::shunt_change);
  REQUIRE(!rec.changed_blocks.empty());
  CHECK(rec.changed_blocks.front().bus_m == "675");
  CHECK(rec.changed_blocks.front().bus_n == "675");
}

TEST_CASE("an event-free window localizes to no change") {
  auto f = fixture13();
  auto stream = simulator::run_scenario(f, fixture_spec(30));
  auto Y0 = feeder::assemble_ybus(f);
  auto w = simulator::window(stream, 10, 10);
  events::EventRecord rec = events::localize(Y0, w, 5);
  CHECK(rec.delta_Y.cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(rec.changed_blocks.empty());
  CHECK(rec.classification == EventClass::unknown);
}

TEST_CASE("simultaneous open and close resolve as a switch pair") {
  auto f = fixture13();
  auto Y0 = feeder::assemble_ybus(f);
  const ComplexMatrix dA =
      feeder::assemble_ybus(feeder::apply_line_trip(f, "632-645")).Y - Y0.Y;
  const ComplexMatrix dB =
      Y0.Y - feeder::assemble_ybus(feeder::apply_line_trip(f, "632-633")).Y;
  const ComplexMatrix Y1 = Y0.Y + dA + dB;

  rng::SplitMix g(909);
  const int K = 12;
  simulator::PhasorWindow w;
  w.first_slot = 1;
  w.V = ComplexMatrix(Y0.D, K);
  for (int r = 0; r < Y0.D; ++r)
    for (int k = 0; k < K; ++k) w.V(r, k) = Complex(g.normal(), g.normal());
  w.I = Y1 * w.V;

  events::LocalizeOptions opts;
  opts.block_floor = 0.1;
  events::EventRecord rec = events::localize(Y0, w, 0, opts);
  CHECK(rec.classification == EventClass::switch_pair);
  CHECK((rec.delta_Y - (dA + dB)).norm() / (dA + dB).norm() <= 0.05);

  bool saw_open = false, saw_close = false;
  for (const auto& b : rec.changed_blocks) {
    if (b.bus_m == "632" && b.bus_n == "645") saw_open = true;
    if (b.bus_m == "632" && b.bus_n == "633") saw_close = true;
  }
  CHECK(saw_open);
  CHECK(saw_close);
}

TEST_CASE("noisy windows localize inside a residual ball") {
  // A well-excited window: independent voltage columns keep every change
  // direction observable at the noise level. (Steady feeder windows are
  // nearly collinear; at matching noise the ball then genuinely leaves the
  // weakly excited directions free, so the exact-equality form is the
  // default and the ball is opt-in.)
  auto f = fixture13();
  auto Y0 = feeder::assemble_ybus(f);
  const ComplexMatrix truth =
      feeder::assemble_ybus(feeder::apply_line_trip(f, "632-645")).Y - Y0.Y;

  rng::SplitMix g(515);
  const int K = 12;
  simulator::PhasorWindow w;
  w.first_slot = 1;
  w.V = ComplexMatrix(Y0.D, K);
  for (int r = 0; r < Y0.D; ++r)
    for (int k = 0; k < K; ++k) w.V(r, k) = Complex(g.normal(), g.normal());
  ComplexMatrix N(Y0.D, K);
  for (int r = 0; r < Y0.D; ++r)
    for (int k = 0; k < K; ++k)
      N(r, k) = 0.01 * Complex(g.normal(), g.normal());
  w.I = (Y0.Y + truth) * w.V + N;

  events::LocalizeOptions opts;
  opts.block_floor = 0.1;
  opts.epsilon = 1.2 * N.norm();
  events::EventRecord rec = events::localize(Y0, w, 0, opts);

  CHECK(rec.classification == EventClass::line_trip);
  CHECK((rec.delta_Y - truth).norm() / truth.norm() <= 0.1);
  // The ball is enforced on the independent rows; the symmetry-induced
  // dependent rows can add up to the same slack again.
  const ComplexMatrix E = w.I - Y0.Y * w.V;
  CHECK((rec.delta_Y * w.V - E).norm() <= 2.0 * opts.epsilon);
}

TEST_CASE("localization guards its window") {
  auto f = fixture13();
  auto stream = simulator::run_scenario(f, fixture_spec(30));
  auto Y0 = feeder::assemble_ybus(f);

  auto overlapping = simulator::window(stream, 10, 10);
  CHECK_THROWS_AS(events::localize(Y0, overlapping, 10), InfeasibleError);
  try {
    events::localize(Y0, overlapping, 15);
    FAIL("expected InfeasibleError");
  } catch (const InfeasibleError& e) {
    CHECK(std::string(e.what()).find("later window") != std::string::npos);
  }

  auto narrow = simulator::window(stream, 10, 5);
  CHECK_THROWS_AS(events::localize(Y0, narrow, 5), InsufficientDataError);

  simulator::PhasorWindow bad = simulator::window(stream, 10, 10);
  bad.V.conservativeResize(Y0.D - 1, 10);
  CHECK_THROWS_AS(events::localize(Y0, bad, 5), InvalidArgumentError);

  events::LocalizeOptions zero;
  zero.min_samples = 0;
  auto ok = simulator::window(stream, 10, 10);
  CHECK_THROWS_AS(events::localize(Y0, ok, 5, zero), InvalidArgumentError);
}

TEST_CASE("rebase validates dimensions") {
  auto Y0 = feeder::assemble_ybus(fixture13());
  DetectorState st = events::make_detector(Y0, 1.0);
  events::EventRecord rec;
  rec.delta_Y = ComplexMatrix::Zero(3, 3);
  CHECK_THROWS_AS(events::rebase(st, rec), InvalidArgumentError);
}

TEST_CASE("event records serialize with their block list") {
  events::EventRecord rec;
  rec.t = 50;
  rec.samples_used = 10;
  rec.classification = EventClass::line_trip;
  rec.delta_Y = ComplexMatrix::Zero(2, 2);
  rec.delta_Y(0, 1) = rec.delta_Y(1, 0) = Complex(1.5, -2.0);
  rec.changed_blocks.push_back({"611", "684", 5.5});
  rec.changed_blocks.push_back({"684", "684", 5.4});

  const std::string text = events::record_to_json(rec);
  auto j = nlohmann::json::parse(text);
  CHECK(j.at("format") == "gridsleuth-event");
  CHECK(j.at("version") == 1);
  CHECK(j.at("t") == 50);
  CHECK(j.at("samples_used") == 10);
  CHECK(j.at("classification") == "line_trip");
  REQUIRE(j.at("changed_blocks").size() == 2);
  CHECK(j.at("changed_blocks")[0].at("bus_m") == "611");
  CHECK(j.at("changed_blocks")[0].at("magnitude") == 5.5);
  CHECK(j.at("delta_Y").at("rows") == 2);
  CHECK(j.at("delta_Y").at("data")[0][1][0] == 1.5);
  CHECK(j.at("delta_Y").at("data")[0][1][1] == -2.0);

  // Identical records serialize to identical bytes.
  CHECK(events::record_to_json(rec) == text);
}

TEST_CASE("alarm log formatting is stable") {
  std::vector<events::AlarmRow> rows = {{0, 1.25e-9, 0.5, false},
                                        {1, 2.0, 0.5, true}};
  const std::string csv = events::alarm_log_csv(rows);
  CHECK(csv ==
        "slot,residual_norm,gamma,alarmed\n"
        "0,1.25e-09,0.5,0\n"
        "1,2,0.5,1\n");
  CHECK(events::alarm_log_csv(rows) == csv);
  CHECK(events::alarm_log_csv({}) == "slot,residual_norm,gamma,alarmed\n");
}
