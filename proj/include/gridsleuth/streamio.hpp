#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridsleuth/feeder.hpp"
#include "gridsleuth/simulator.hpp"

namespace gridsleuth::streamio {

// One "bus:p" label per node/phase, in the global ordering.
std::vector<std::string> node_labels(const feeder::FeederModel& f);

struct StreamData {
  uint64_t config_hash = 0;
  std::vector<std::string> labels;
  std::vector<simulator::PhasorSnapshot> snapshots;
};

// CSV layout: an optional "# config=<16 hex digits>" comment, a fixed header
// "slot,node_phase,V_re,V_im,I_re,I_im", then one row per node/phase per
// slot, slot-major, labels in the global ordering. Doubles are printed with
// the shortest representation that parses back exactly.
void write_stream_csv(const std::string& path,
                      const std::vector<simulator::PhasorSnapshot>& stream,
                      const std::vector<std::string>& labels,
                      uint64_t config_hash);
StreamData read_stream_csv(const std::string& path);

// Replay layout (all integers and doubles little-endian):
//   bytes 0..3   magic "GSRP"
//   u32          format version (currently 1)
//   u64          config hash
//   u32          D, number of node/phase labels
//   D times      u16 label byte length, then the label bytes
//   u32          K, number of records
//   K times      u32 slot, then D quadruples of f64: V_re, V_im, I_re, I_im
void write_replay(const std::string& path,
                  const std::vector<simulator::PhasorSnapshot>& stream,
                  const std::vector<std::string>& labels,
                  uint64_t config_hash);
StreamData read_replay(const std::string& path);

}  // namespace gridsleuth::streamio
