#pragma once

#include <map>
#include <string>
#include <vector>

#include "gridsleuth/errors.hpp"
#include "gridsleuth/numerics.hpp"

namespace gridsleuth::feeder {

using numerics::Complex;
using numerics::ComplexMatrix;

enum class Phase : int { A = 0, B = 1, C = 2 };

char phase_letter(Phase p);
// Parses a token like "abc" or "bc" into a sorted, duplicate-free phase set.
std::vector<Phase> parse_phases(const std::string& token);
std::string phases_string(const std::vector<Phase>& phases);

struct Bus {
  std::string id;
  std::vector<Phase> phases;  // sorted a < b < c
};

struct LineSegment {
  std::string id;
  std::string from_bus;
  std::string to_bus;
  std::vector<Phase> phases;  // sorted; the phases the conductors carry
  ComplexMatrix Z;            // ohm, k x k complex symmetric, k = |phases|
  ComplexMatrix Ys;           // siemens, k x k complex symmetric
  bool in_service = true;
};

struct ShuntBank {
  std::string bus;
  std::vector<Phase> phases;
  ComplexMatrix Y;  // siemens, k x k complex symmetric
};

struct NodePhase {
  std::string bus_id;
  Phase phase;
  int index;  // position in the global ordering
};

// Closed lines declared with the SWITCH shorthand get this series impedance.
inline constexpr Complex kSwitchJumperImpedance{1e-4, 1e-4};

// Immutable network description. The global node/phase ordering is bus
// declaration order with phases a, b, c inside each bus; every index map and
// admittance matrix in the toolkit uses it.
class FeederModel {
 public:
  FeederModel(std::vector<Bus> buses, std::vector<LineSegment> lines,
              std::vector<ShuntBank> shunts, std::string slack_bus,
              double base_voltage, double base_power);

  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<LineSegment>& lines() const { return lines_; }
  const std::vector<ShuntBank>& shunts() const { return shunts_; }
  const std::string& slack_bus() const { return slack_bus_; }
  double base_voltage() const { return base_voltage_; }
  double base_power() const { return base_power_; }

  int dimension() const { return static_cast<int>(node_phases_.size()); }
  const std::vector<NodePhase>& node_phases() const { return node_phases_; }
  // -1 when the bus lacks that phase.
  int index_of(const std::string& bus, Phase p) const;
  bool has_bus(const std::string& bus) const;
  const Bus& bus(const std::string& id) const;
  const LineSegment& line(const std::string& id) const;
  bool has_line(const std::string& id) const;
  // First global index and phase count of a bus's contiguous block.
  std::pair<int, int> bus_span(const std::string& bus) const;

  // Both are evaluated over in-service lines only.
  bool is_connected() const;
  bool is_radial() const;
  // Buses reachable from the slack through in-service lines.
  std::vector<std::string> energized_buses() const;

 private:
  std::vector<Bus> buses_;
  std::vector<LineSegment> lines_;
  std::vector<ShuntBank> shunts_;
  std::string slack_bus_;
  double base_voltage_;
  double base_power_;
  std::vector<NodePhase> node_phases_;
  std::map<std::string, int> bus_pos_;
  std::map<std::string, std::pair<int, int>> spans_;
  std::map<std::string, int> line_pos_;
};

struct BusAdmittance {
  int D = 0;
  ComplexMatrix Y;
  // bus id -> (first global index, phase count)
  std::map<std::string, std::pair<int, int>> block_index;

  // The |P_m| x |P_n| submatrix coupling two buses.
  ComplexMatrix block(const std::string& m, const std::string& n) const;
};

BusAdmittance assemble_ybus(const FeederModel& f);

FeederModel apply_line_trip(const FeederModel& f, const std::string& line_id);
FeederModel apply_line_close(const FeederModel& f, const std::string& line_id);
// Scales every shunt bank on the bus (factor 0 switches capacitors out).
FeederModel apply_shunt_scale(const FeederModel& f, const std::string& bus,
                              double factor);

FeederModel load_feeder(const std::string& text);
FeederModel load_feeder_file(const std::string& path);
std::string save_feeder(const FeederModel& f);

}  // namespace gridsleuth::feeder
