#include "gridsleuth/feeder.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "gridsleuth/textio.hpp"

namespace gridsleuth::feeder {

char phase_letter(Phase p) { return static_cast<char>('a' + static_cast<int>(p)); }

std::vector<Phase> parse_phases(const std::string& token) {
  if (token.empty())
    throw InvalidArgumentError("phase set must not be empty");
  bool seen[3] = {false, false, false};
  for (char c : token) {
    if (c < 'a' || c > 'c')
      throw InvalidArgumentError(std::string("invalid phase token '") + token +
                                 "'");
    if (seen[c - 'a'])
      throw InvalidArgumentError(std::string("duplicate phase in '") + token +
                                 "'");
    seen[c - 'a'] = true;
  }
  std::vector<Phase> out;
  for (int i = 0; i < 3; ++i)
    if (seen[i]) out.push_back(static_cast<Phase>(i));
  return out;
}

std::string phases_string(const std::vector<Phase>& phases) {
  std::string s;
  for (Phase p : phases) s += phase_letter(p);
  return s;
}

namespace {

bool is_symmetric(const ComplexMatrix& M, double tol) {
  return (M - M.transpose()).cwiseAbs().maxCoeff() <=
         tol * std::max(1.0, M.cwiseAbs().maxCoeff());
}

int phase_offset(const std::vector<Phase>& phases, Phase p) {
  for (size_t i = 0; i < phases.size(); ++i)
    if (phases[i] == p) return static_cast<int>(i);
  return -1;
}

}  // namespace

FeederModel::FeederModel(std::vector<Bus> buses, std::vector<LineSegment> lines,
                         std::vector<ShuntBank> shunts, std::string slack_bus,
                         double base_voltage, double base_power)
    : buses_(std::move(buses)),
      lines_(std::move(lines)),
      shunts_(std::move(shunts)),
      slack_bus_(std::move(slack_bus)),
      base_voltage_(base_voltage),
      base_power_(base_power) {
  if (base_voltage_ <= 0 || base_power_ <= 0)
    throw ModelError("base voltage and base power must be positive");
  if (buses_.empty()) throw ModelError("model has no buses");

  int idx = 0;
  for (size_t b = 0; b < buses_.size(); ++b) {
    const Bus& bus = buses_[b];
    if (bus.id.empty()) throw ModelError("bus with empty id");
    if (bus.phases.empty())
      throw ModelError("bus '" + bus.id + "' has no phases");
    if (!std::is_sorted(bus.phases.begin(), bus.phases.end()) ||
        std::adjacent_find(bus.phases.begin(), bus.phases.end()) !=
            bus.phases.end())
      throw ModelError("bus '" + bus.id + "' phases must be sorted and unique");
    if (!bus_pos_.emplace(bus.id, static_cast<int>(b)).second)
      throw ModelError("duplicate bus id '" + bus.id + "'");
    spans_[bus.id] = {idx, static_cast<int>(bus.phases.size())};
    for (Phase p : bus.phases)
      node_phases_.push_back({bus.id, p, idx++});
  }

  if (!bus_pos_.count(slack_bus_))
    throw ModelError("slack bus '" + slack_bus_ + "' is not declared");

  for (size_t l = 0; l < lines_.size(); ++l) {
    const LineSegment& seg = lines_[l];
    if (seg.id.empty()) throw ModelError("line with empty id");
    if (!line_pos_.emplace(seg.id, static_cast<int>(l)).second)
      throw ModelError("duplicate line id '" + seg.id + "'");
    if (seg.from_bus == seg.to_bus)
      throw ModelError("line '" + seg.id + "' connects a bus to itself");
    if (!bus_pos_.count(seg.from_bus) || !bus_pos_.count(seg.to_bus))
      throw ModelError("line '" + seg.id + "' references an unknown bus");
    if (seg.phases.empty())
      throw ModelError("line '" + seg.id + "' has no phases");
    const auto k = static_cast<Eigen::Index>(seg.phases.size());
    if (seg.Z.rows() != k || seg.Z.cols() != k)
      throw ModelError("line '" + seg.id + "' impedance matrix has wrong size");
    if (seg.Ys.rows() != k || seg.Ys.cols() != k)
      throw ModelError("line '" + seg.id + "' shunt matrix has wrong size");
    if (!is_symmetric(seg.Z, 1e-12))
      throw ModelError("line '" + seg.id + "' impedance matrix is not symmetric");
    if (!is_symmetric(seg.Ys, 1e-12))
      throw ModelError("line '" + seg.id + "' shunt matrix is not symmetric");
  }

  for (const ShuntBank& sh : shunts_) {
    if (!bus_pos_.count(sh.bus))
      throw ModelError("shunt references unknown bus '" + sh.bus + "'");
    const auto k = static_cast<Eigen::Index>(sh.phases.size());
    if (k == 0 || sh.Y.rows() != k || sh.Y.cols() != k)
      throw ModelError("shunt at bus '" + sh.bus + "' has wrong matrix size");
    if (!is_symmetric(sh.Y, 1e-12))
      throw ModelError("shunt at bus '" + sh.bus + "' is not symmetric");
    for (Phase p : sh.phases)
      if (index_of(sh.bus, p) < 0)
        throw ModelError("shunt at bus '" + sh.bus + "' uses phase " +
                         std::string(1, phase_letter(p)) +
                         " the bus does not carry");
  }
}

int FeederModel::index_of(const std::string& bus, Phase p) const {
  auto it = bus_pos_.find(bus);
  if (it == bus_pos_.end()) return -1;
  int off = phase_offset(buses_[it->second].phases, p);
  if (off < 0) return -1;
  return spans_.at(bus).first + off;
}

bool FeederModel::has_bus(const std::string& bus) const {
  return bus_pos_.count(bus) != 0;
}

const Bus& FeederModel::bus(const std::string& id) const {
  auto it = bus_pos_.find(id);
  if (it == bus_pos_.end())
    throw InvalidArgumentError("unknown bus '" + id + "'");
  return buses_[it->second];
}

const LineSegment& FeederModel::line(const std::string& id) const {
  auto it = line_pos_.find(id);
  if (it == line_pos_.end())
    throw InvalidArgumentError("unknown line '" + id + "'");
  return lines_[it->second];
}

bool FeederModel::has_line(const std::string& id) const {
  return line_pos_.count(id) != 0;
}

std::pair<int, int> FeederModel::bus_span(const std::string& bus) const {
  auto it = spans_.find(bus);
  if (it == spans_.end())
    throw InvalidArgumentError("unknown bus '" + bus + "'");
  return it->second;
}

std::vector<std::string> FeederModel::energized_buses() const {
  std::set<std::string> seen{slack_bus_};
  std::vector<std::string> frontier{slack_bus_};
  while (!frontier.empty()) {
    std::string cur = frontier.back();
    frontier.pop_back();
    for (const LineSegment& seg : lines_) {
      if (!seg.in_service) continue;
      std::string next;
      if (seg.from_bus == cur) next = seg.to_bus;
      else if (seg.to_bus == cur) next = seg.from_bus;
      else continue;
      if (seen.insert(next).second) frontier.push_back(next);
    }
  }
  std::vector<std::string> out;
  for (const Bus& b : buses_)
    if (seen.count(b.id)) out.push_back(b.id);
  return out;
}

bool FeederModel::is_connected() const {
  return energized_buses().size() == buses_.size();
}

bool FeederModel::is_radial() const {
  size_t active = 0;
  for (const LineSegment& seg : lines_)
    if (seg.in_service) ++active;
  return is_connected() && active == buses_.size() - 1;
}

ComplexMatrix BusAdmittance::block(const std::string& m,
                                   const std::string& n) const {
  auto im = block_index.find(m);
  auto in = block_index.find(n);
  if (im == block_index.end() || in == block_index.end())
    throw InvalidArgumentError("unknown bus in block lookup");
  return Y.block(im->second.first, in->second.first, im->second.second,
                 in->second.second);
}

BusAdmittance assemble_ybus(const FeederModel& f) {
  const int D = f.dimension();
  BusAdmittance out;
  out.D = D;
  out.Y = ComplexMatrix::Zero(D, D);
  for (const Bus& b : f.buses())
    out.block_index[b.id] = f.bus_span(b.id);

  for (const LineSegment& seg : f.lines()) {
    if (!seg.in_service) continue;
    const auto k = static_cast<Eigen::Index>(seg.phases.size());
    std::vector<int> im(k), in(k);
    for (Eigen::Index p = 0; p < k; ++p) {
      im[p] = f.index_of(seg.from_bus, seg.phases[p]);
      in[p] = f.index_of(seg.to_bus, seg.phases[p]);
      if (im[p] < 0 || in[p] < 0)
        throw ModelError("line '" + seg.id + "' uses phase " +
                         std::string(1, phase_letter(seg.phases[p])) +
                         " missing at an endpoint bus");
    }
    Eigen::FullPivLU<ComplexMatrix> lu(seg.Z);
    if (!lu.isInvertible())
      throw AssemblyError("line '" + seg.id +
                          "' has a singular impedance matrix");
    ComplexMatrix y = lu.inverse();
    for (Eigen::Index p = 0; p < k; ++p) {
      for (Eigen::Index q = 0; q < k; ++q) {
        const Complex series = y(p, q);
        const Complex half_shunt = 0.5 * seg.Ys(p, q);
        out.Y(im[p], im[q]) += series + half_shunt;
        out.Y(in[p], in[q]) += series + half_shunt;
        out.Y(im[p], in[q]) -= series;
        out.Y(in[p], im[q]) -= series;
      }
    }
  }

  for (const ShuntBank& sh : f.shunts()) {
    const auto k = static_cast<Eigen::Index>(sh.phases.size());
    for (Eigen::Index p = 0; p < k; ++p)
      for (Eigen::Index q = 0; q < k; ++q)
        out.Y(f.index_of(sh.bus, sh.phases[p]),
              f.index_of(sh.bus, sh.phases[q])) += sh.Y(p, q);
  }
  return out;
}

namespace {

FeederModel with_line_state(const FeederModel& f, const std::string& line_id,
                            bool in_service) {
  if (!f.has_line(line_id))
    throw InvalidArgumentError("unknown line '" + line_id + "'");
  std::vector<LineSegment> lines = f.lines();
  for (LineSegment& seg : lines) {
    if (seg.id != line_id) continue;
    if (seg.in_service == in_service)
      throw ModelError("line '" + line_id + "' is already " +
                       (in_service ? "in service" : "out of service"));
    seg.in_service = in_service;
  }
  return FeederModel(f.buses(), std::move(lines), f.shunts(), f.slack_bus(),
                     f.base_voltage(), f.base_power());
}

}  // namespace

FeederModel apply_line_trip(const FeederModel& f, const std::string& line_id) {
  return with_line_state(f, line_id, false);
}

FeederModel apply_line_close(const FeederModel& f, const std::string& line_id) {
  return with_line_state(f, line_id, true);
}

FeederModel apply_shunt_scale(const FeederModel& f, const std::string& bus,
                              double factor) {
  if (!f.has_bus(bus)) throw InvalidArgumentError("unknown bus '" + bus + "'");
  std::vector<ShuntBank> shunts = f.shunts();
  bool hit = false;
  for (ShuntBank& sh : shunts) {
    if (sh.bus != bus) continue;
    sh.Y *= factor;
    hit = true;
  }
  if (!hit) throw ModelError("bus '" + bus + "' has no shunt bank");
  return FeederModel(f.buses(), f.lines(), std::move(shunts), f.slack_bus(),
                     f.base_voltage(), f.base_power());
}

namespace {

struct Token {
  std::string text;
  int line;
  int col;
};

struct LineTokens {
  int line;
  std::vector<Token> tokens;
};

std::vector<LineTokens> tokenize(const std::string& text) {
  std::vector<LineTokens> out;
  int lineno = 0;
  std::istringstream stream(text);
  std::string raw;
  while (std::getline(stream, raw)) {
    ++lineno;
    LineTokens lt{lineno, {}};
    size_t i = 0;
    while (i < raw.size()) {
      while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i])))
        ++i;
      if (i >= raw.size() || raw[i] == '#') break;
      size_t start = i;
      while (i < raw.size() &&
             !std::isspace(static_cast<unsigned char>(raw[i])) &&
             raw[i] != '#')
        ++i;
      lt.tokens.push_back(
          {raw.substr(start, i - start), lineno, static_cast<int>(start) + 1});
    }
    if (!lt.tokens.empty()) out.push_back(std::move(lt));
  }
  return out;
}

class StatementReader {
 public:
  explicit StatementReader(const LineTokens& lt) : lt_(lt) {}

  const Token& next(const char* what) {
    if (pos_ >= lt_.tokens.size())
      throw ParseError(std::string("expected ") + what, lt_.line,
                       end_col());
    return lt_.tokens[pos_++];
  }

  double next_real(const char* what) {
    const Token& t = next(what);
    char* end = nullptr;
    double v = std::strtod(t.text.c_str(), &end);
    if (end != t.text.c_str() + t.text.size())
      throw ParseError(std::string("invalid number '") + t.text + "' for " +
                           what,
                       t.line, t.col);
    return v;
  }

  Complex next_complex(const char* what) {
    const Token& t = next(what);
    auto v = textio::parse_complex(t.text);
    if (!v)
      throw ParseError(std::string("invalid complex number '") + t.text +
                           "' for " + what,
                       t.line, t.col);
    return *v;
  }

  std::vector<Phase> next_phases() {
    const Token& t = next("phase set");
    try {
      return parse_phases(t.text);
    } catch (const InvalidArgumentError& e) {
      throw ParseError(e.what(), t.line, t.col);
    }
  }

  ComplexMatrix next_symmetric_matrix(Eigen::Index k, const char* what) {
    ComplexMatrix M(k, k);
    int first_line = lt_.line;
    for (Eigen::Index r = 0; r < k; ++r)
      for (Eigen::Index c = 0; c < k; ++c) M(r, c) = next_complex(what);
    if (!is_symmetric(M, 1e-12))
      throw ParseError(std::string(what) + " matrix is not symmetric",
                       first_line, 1);
    return M;
  }

  void expect_keyword(const char* kw) {
    const Token& t = next(kw);
    if (t.text != kw)
      throw ParseError(std::string("expected '") + kw + "', got '" + t.text +
                           "'",
                       t.line, t.col);
  }

  bool done() const { return pos_ >= lt_.tokens.size(); }

  const Token& peek() const { return lt_.tokens[pos_]; }

  void expect_end() const {
    if (!done())
      throw ParseError("unexpected trailing token '" + peek().text + "'",
                       peek().line, peek().col);
  }

 private:
  int end_col() const {
    const Token& last = lt_.tokens.back();
    return last.col + static_cast<int>(last.text.size());
  }

  const LineTokens& lt_;
  size_t pos_ = 0;
};

}  // namespace

FeederModel load_feeder(const std::string& text) {
  std::vector<Bus> buses;
  std::vector<LineSegment> lines;
  std::vector<ShuntBank> shunts;
  std::string slack;
  double base_v = 0, base_s = 0;
  std::set<std::string> bus_ids, line_ids;

  for (const LineTokens& lt : tokenize(text)) {
    StatementReader r(lt);
    const Token& head = r.next("statement");
    if (head.text == "BASE") {
      base_v = r.next_real("base voltage");
      base_s = r.next_real("base power");
      if (base_v <= 0 || base_s <= 0)
        throw ParseError("base values must be positive", head.line, head.col);
    } else if (head.text == "SLACK") {
      slack = r.next("slack bus id").text;
    } else if (head.text == "BUS") {
      Bus b;
      b.id = r.next("bus id").text;
      if (!bus_ids.insert(b.id).second)
        throw ParseError("duplicate bus id '" + b.id + "'", head.line,
                         head.col);
      b.phases = r.next_phases();
      buses.push_back(std::move(b));
    } else if (head.text == "LINE" || head.text == "SWITCH") {
      LineSegment seg;
      seg.id = r.next("line id").text;
      if (!line_ids.insert(seg.id).second)
        throw ParseError("duplicate line id '" + seg.id + "'", head.line,
                         head.col);
      const Token& from = r.next("from bus");
      const Token& to = r.next("to bus");
      seg.from_bus = from.text;
      seg.to_bus = to.text;
      if (!bus_ids.count(seg.from_bus))
        throw ParseError("line endpoint '" + seg.from_bus + "' is not declared",
                         from.line, from.col);
      if (!bus_ids.count(seg.to_bus))
        throw ParseError("line endpoint '" + seg.to_bus + "' is not declared",
                         to.line, to.col);
      seg.phases = r.next_phases();
      const auto k = static_cast<Eigen::Index>(seg.phases.size());
      if (head.text == "LINE") {
        r.expect_keyword("Z");
        seg.Z = r.next_symmetric_matrix(k, "impedance");
        r.expect_keyword("YS");
        seg.Ys = r.next_symmetric_matrix(k, "line shunt");
      } else {
        seg.Z = kSwitchJumperImpedance * ComplexMatrix::Identity(k, k);
        seg.Ys = ComplexMatrix::Zero(k, k);
      }
      if (!r.done()) {
        const Token& t = r.next("line flag");
        if (t.text != "OFFLINE")
          throw ParseError("unexpected token '" + t.text + "'", t.line, t.col);
        seg.in_service = false;
      }
      lines.push_back(std::move(seg));
    } else if (head.text == "SHUNT") {
      ShuntBank sh;
      const Token& bus = r.next("shunt bus");
      sh.bus = bus.text;
      if (!bus_ids.count(sh.bus))
        throw ParseError("shunt bus '" + sh.bus + "' is not declared", bus.line,
                         bus.col);
      sh.phases = r.next_phases();
      r.expect_keyword("Y");
      sh.Y = r.next_symmetric_matrix(
          static_cast<Eigen::Index>(sh.phases.size()), "shunt admittance");
      shunts.push_back(std::move(sh));
    } else {
      throw ParseError("unknown statement '" + head.text + "'", head.line,
                       head.col);
    }
    r.expect_end();
  }

  if (base_v <= 0) throw ParseError("missing BASE statement", 1, 1);
  if (slack.empty()) throw ParseError("missing SLACK statement", 1, 1);
  try {
    return FeederModel(std::move(buses), std::move(lines), std::move(shunts),
                       std::move(slack), base_v, base_s);
  } catch (const ModelError& e) {
    throw ParseError(e.what(), 1, 1);
  }
}

FeederModel load_feeder_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open feeder file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_feeder(buf.str());
}

std::string save_feeder(const FeederModel& f) {
  std::ostringstream out;
  using textio::format_complex;
  using textio::format_double;
  out << "BASE " << format_double(f.base_voltage()) << ' '
      << format_double(f.base_power()) << '\n';
  out << "SLACK " << f.slack_bus() << '\n';
  for (const Bus& b : f.buses())
    out << "BUS " << b.id << ' ' << phases_string(b.phases) << '\n';
  for (const LineSegment& seg : f.lines()) {
    out << "LINE " << seg.id << ' ' << seg.from_bus << ' ' << seg.to_bus << ' '
        << phases_string(seg.phases) << " Z";
    for (Eigen::Index r = 0; r < seg.Z.rows(); ++r)
      for (Eigen::Index c = 0; c < seg.Z.cols(); ++c)
        out << ' ' << format_complex(seg.Z(r, c));
    out << " YS";
    for (Eigen::Index r = 0; r < seg.Ys.rows(); ++r)
      for (Eigen::Index c = 0; c < seg.Ys.cols(); ++c)
        out << ' ' << format_complex(seg.Ys(r, c));
    if (!seg.in_service) out << " OFFLINE";
    out << '\n';
  }
  for (const ShuntBank& sh : f.shunts()) {
    out << "SHUNT " << sh.bus << ' ' << phases_string(sh.phases) << " Y";
    for (Eigen::Index r = 0; r < sh.Y.rows(); ++r)
      for (Eigen::Index c = 0; c < sh.Y.cols(); ++c)
        out << ' ' << format_complex(sh.Y(r, c));
    out << '\n';
  }
  return out.str();
}

}  // namespace gridsleuth::feeder
