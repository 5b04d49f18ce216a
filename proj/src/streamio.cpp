#include "gridsleuth/streamio.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "gridsleuth/errors.hpp"
#include "gridsleuth/textio.hpp"

namespace gridsleuth::streamio {

using simulator::Complex;

static_assert(std::endian::native == std::endian::little,
              "replay serialization assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'G', 'S', 'R', 'P'};
constexpr uint32_t kVersion = 1;
constexpr const char* kCsvHeader = "slot,node_phase,V_re,V_im,I_re,I_im";

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void check_labels(const std::vector<simulator::PhasorSnapshot>& stream,
                  const std::vector<std::string>& labels) {
  const auto D = static_cast<Eigen::Index>(labels.size());
  for (const simulator::PhasorSnapshot& s : stream)
    if (s.V.size() != D || s.I.size() != D)
      throw InvalidArgumentError(
          "snapshot dimension does not match the label list");
}

}  // namespace

std::vector<std::string> node_labels(const feeder::FeederModel& f) {
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(f.dimension()));
  for (const feeder::NodePhase& np : f.node_phases())
    out.push_back(np.bus_id + ":" + feeder::phase_letter(np.phase));
  return out;
}

void write_stream_csv(const std::string& path,
                      const std::vector<simulator::PhasorSnapshot>& stream,
                      const std::vector<std::string>& labels,
                      uint64_t config_hash) {
  check_labels(stream, labels);
  for (const std::string& l : labels)
    if (l.find(',') != std::string::npos || l.find('\n') != std::string::npos)
      throw InvalidArgumentError("label '" + l +
                                 "' cannot be written as a CSV field");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "# config=" << hash_hex(config_hash) << "\n" << kCsvHeader << "\n";
  for (const simulator::PhasorSnapshot& s : stream)
    for (size_t i = 0; i < labels.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      out << s.slot << ',' << labels[i] << ','
          << textio::format_double(s.V(r).real()) << ','
          << textio::format_double(s.V(r).imag()) << ','
          << textio::format_double(s.I(r).real()) << ','
          << textio::format_double(s.I(r).imag()) << '\n';
    }
  if (!out) throw Error("write to '" + path + "' failed");
}

namespace {

// Splits a CSV row into exactly `n` fields, recording each field's 1-based
// starting column for error messages.
std::vector<std::string> split_row(const std::string& line, size_t n, int lineno,
                                   std::vector<int>& cols) {
  std::vector<std::string> fields;
  cols.clear();
  size_t start = 0;
  while (true) {
    cols.push_back(static_cast<int>(start) + 1);
    const size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  if (fields.size() != n)
    throw ParseError("expected " + std::to_string(n) + " comma-separated "
                     "fields, found " + std::to_string(fields.size()),
                     lineno, 1);
  return fields;
}

double parse_field_double(const std::string& s, int lineno, int col) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw ParseError("'" + s + "' is not a real number", lineno, col);
  return v;
}

long parse_field_long(const std::string& s, int lineno, int col) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const long v = std::strtol(begin, &end, 10);
  if (end == begin || *end != '\0')
    throw ParseError("'" + s + "' is not an integer", lineno, col);
  return v;
}

}  // namespace

StreamData read_stream_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");

  StreamData data;
  std::string line;
  int lineno = 0;

  if (!std::getline(in, line)) throw ParseError("empty stream file", 1, 1);
  ++lineno;
  if (line.rfind("# config=", 0) == 0) {
    const std::string hex = line.substr(9);
    char* end = nullptr;
    data.config_hash = std::strtoull(hex.c_str(), &end, 16);
    if (hex.empty() || *end != '\0')
      throw ParseError("malformed config hash '" + hex + "'", lineno, 10);
    if (!std::getline(in, line))
      throw ParseError("missing stream header", lineno, 1);
    ++lineno;
  }
  if (line != kCsvHeader)
    throw ParseError("expected header '" + std::string(kCsvHeader) + "'",
                     lineno, 1);

  bool first_block_done = false;
  long cur_slot = 0;
  size_t row_in_block = 0;
  std::vector<Complex> vbuf, ibuf;
  std::vector<int> cols;

  auto flush_block = [&](int at_line) {
    if (vbuf.empty()) return;
    if (first_block_done && vbuf.size() != data.labels.size())
      throw ParseError("slot " + std::to_string(cur_slot) + " has " +
                       std::to_string(vbuf.size()) + " rows, expected " +
                       std::to_string(data.labels.size()), at_line, 1);
    simulator::PhasorSnapshot s;
    s.slot = static_cast<int>(cur_slot);
    const auto D = static_cast<Eigen::Index>(vbuf.size());
    s.V.resize(D);
    s.I.resize(D);
    for (Eigen::Index i = 0; i < D; ++i) {
      s.V(i) = vbuf[static_cast<size_t>(i)];
      s.I(i) = ibuf[static_cast<size_t>(i)];
    }
    data.snapshots.push_back(std::move(s));
    first_block_done = true;
    vbuf.clear();
    ibuf.clear();
    row_in_block = 0;
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f = split_row(line, 6, lineno, cols);
    const long slot = parse_field_long(f[0], lineno, cols[0]);
    if (vbuf.empty() && !first_block_done) {
      cur_slot = slot;
    } else if (slot != cur_slot) {
      flush_block(lineno);
      if (slot <= cur_slot)
        throw ParseError("slot " + std::to_string(slot) +
                         " does not increase", lineno, cols[0]);
      cur_slot = slot;
    }
    if (!first_block_done) {
      data.labels.push_back(f[1]);
    } else {
      if (row_in_block >= data.labels.size() ||
          f[1] != data.labels[row_in_block])
        throw ParseError("node label '" + f[1] + "' does not match the "
                         "stream layout", lineno, cols[1]);
    }
    vbuf.emplace_back(parse_field_double(f[2], lineno, cols[2]),
                      parse_field_double(f[3], lineno, cols[3]));
    ibuf.emplace_back(parse_field_double(f[4], lineno, cols[4]),
                      parse_field_double(f[5], lineno, cols[5]));
    ++row_in_block;
  }
  flush_block(lineno);
  if (data.snapshots.empty())
    throw ParseError("stream file has no data rows", lineno, 1);
  return data;
}

namespace {

void put_bytes(std::ofstream& out, const void* p, size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void put_scalar(std::ofstream& out, T v) {
  put_bytes(out, &v, sizeof v);
}

}  // namespace

void write_replay(const std::string& path,
                  const std::vector<simulator::PhasorSnapshot>& stream,
                  const std::vector<std::string>& labels,
                  uint64_t config_hash) {
  check_labels(stream, labels);
  for (const std::string& l : labels)
    if (l.size() > std::numeric_limits<uint16_t>::max())
      throw InvalidArgumentError("label too long for the replay format");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");

  put_bytes(out, kMagic, 4);
  put_scalar<uint32_t>(out, kVersion);
  put_scalar<uint64_t>(out, config_hash);
  put_scalar<uint32_t>(out, static_cast<uint32_t>(labels.size()));
  for (const std::string& l : labels) {
    put_scalar<uint16_t>(out, static_cast<uint16_t>(l.size()));
    put_bytes(out, l.data(), l.size());
  }
  put_scalar<uint32_t>(out, static_cast<uint32_t>(stream.size()));
  for (const simulator::PhasorSnapshot& s : stream) {
    put_scalar<uint32_t>(out, static_cast<uint32_t>(s.slot));
    for (Eigen::Index i = 0; i < s.V.size(); ++i) {
      put_scalar<double>(out, s.V(i).real());
      put_scalar<double>(out, s.V(i).imag());
      put_scalar<double>(out, s.I(i).real());
      put_scalar<double>(out, s.I(i).imag());
    }
  }
  if (!out) throw Error("write to '" + path + "' failed");
}

StreamData read_replay(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());

  size_t off = 0;
  auto need = [&](size_t n, const char* what) {
    if (off + n > buf.size())
      throw ParseError(std::string("replay file truncated reading ") + what,
                       static_cast<unsigned long long>(off));
  };
  auto get_bytes = [&](void* p, size_t n, const char* what) {
    need(n, what);
    std::memcpy(p, buf.data() + off, n);
    off += n;
  };
  auto get_u16 = [&](const char* what) {
    uint16_t v;
    get_bytes(&v, sizeof v, what);
    return v;
  };
  auto get_u32 = [&](const char* what) {
    uint32_t v;
    get_bytes(&v, sizeof v, what);
    return v;
  };
  auto get_u64 = [&](const char* what) {
    uint64_t v;
    get_bytes(&v, sizeof v, what);
    return v;
  };
  auto get_f64 = [&](const char* what) {
    double v;
    get_bytes(&v, sizeof v, what);
    return v;
  };

  char magic[4];
  get_bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError("not a replay file (bad magic)", 0ULL);
  const uint32_t version = get_u32("version");
  if (version != kVersion)
    throw ParseError("unsupported replay version " + std::to_string(version),
                     4ULL);

  StreamData data;
  data.config_hash = get_u64("config hash");
  const uint32_t D = get_u32("node count");
  data.labels.reserve(D);
  for (uint32_t i = 0; i < D; ++i) {
    const uint16_t len = get_u16("label length");
    need(len, "label");
    data.labels.emplace_back(buf.data() + off, len);
    off += len;
  }
  const uint32_t K = get_u32("record count");
  data.snapshots.reserve(K);
  for (uint32_t k = 0; k < K; ++k) {
    simulator::PhasorSnapshot s;
    s.slot = static_cast<int>(get_u32("record slot"));
    s.V.resize(D);
    s.I.resize(D);
    for (uint32_t i = 0; i < D; ++i) {
      const double vr = get_f64("record payload");
      const double vi = get_f64("record payload");
      const double ir = get_f64("record payload");
      const double ii = get_f64("record payload");
      s.V(static_cast<Eigen::Index>(i)) = simulator::Complex(vr, vi);
      s.I(static_cast<Eigen::Index>(i)) = simulator::Complex(ir, ii);
    }
    data.snapshots.push_back(std::move(s));
  }
  if (off != buf.size())
    throw ParseError("trailing bytes after the final record",
                     static_cast<unsigned long long>(off));
  return data;
}

}  // namespace gridsleuth::streamio
