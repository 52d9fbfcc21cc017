#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ccgrid/common.hpp"
#include "json.hpp"

namespace ccgrid {

// Grid case records. Everything electrical is stored in per-unit on the case
// base MVA; costs stay in $/h with powers in pu (cost coefficients are
// rescaled at parse time).

struct Bus {
  int id = 0;       // external bus number, as written in the case file
  int type = 1;     // 1 = PQ, 2 = PV (treated as PQ here), 3 = reference
  double v_min = 0.9;
  double v_max = 1.1;
  double gs = 0.0;  // per-bus shunt conductance/susceptance, pu
  double bs = 0.0;
  Vec p_load;       // forecast net active load per period, pu
  Vec q_load;
};

struct Branch {
  int from = 0;  // internal bus index, 0-based
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b_charge = 0.0;  // total line charging susceptance, pu
  double s_max = 0.0;     // flow capacity, pu
};

struct Generator {
  int bus = 0;  // internal bus index
  double p_min = 0.0, p_max = 0.0;
  double q_min = 0.0, q_max = 0.0;
  double c0 = 0.0;  // $/h
  double c1 = 0.0;  // $/(pu h)
  double c2 = 0.0;  // $/(pu^2 h)
  double omega_p = 0.0, omega_q = 0.0;
};

struct StorageUnit {
  int bus = 0;  // internal bus index
  double r_batt = 0.0, r_cvt = 0.0;  // equivalent resistances, pu
  double s_max = 0.0;                // apparent power rating, pu
  double e_min = 0.0, e_max = 0.0;   // energy bounds, pu*h
  double e0 = 0.0;                   // initial energy, pu*h
  double omega_p = 0.0, omega_q = 0.0;

  double r_eq() const { return r_batt + r_cvt; }
};

struct NetworkCase {
  std::string name;
  double base_mva = 100.0;
  int period_count = 1;     // T
  double period_hours = 1.0;  // dt
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::vector<StorageUnit> storage_units;

  int n() const { return int(buses.size()); }
  int slack() const {
    for (int i = 0; i < n(); ++i)
      if (buses[i].type == 3) return i;
    return -1;
  }
  int bus_index(int external_id) const {
    for (int i = 0; i < n(); ++i)
      if (buses[i].id == external_id) return i;
    return -1;
  }
};

struct AdmittanceMatrix {
  SpMat G;
  SpMat B;
};

struct LoadProfile {
  // multipliers(bus, period), dimensionless, applied to base loads
  Mat multipliers;
};

namespace detail {

inline std::string strip(const std::string& s) {
  auto a = s.find_first_not_of(" \t\r\n");
  auto b = s.find_last_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

inline std::vector<double> parse_row(const std::string& line, int lineno) {
  std::vector<double> out;
  std::string cleaned = line;
  for (char& c : cleaned)
    if (c == ';' || c == ',') c = ' ';
  std::istringstream iss(cleaned);
  std::string tok;
  while (iss >> tok) {
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
      throw ParseError("line " + std::to_string(lineno) + ": bad number '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

// Reads `mpc.<table> = [ rows ];` blocks and scalar assignments from a
// MATPOWER-style file. Anything that is not an mpc assignment is ignored.
struct CaseTables {
  double base_mva = 0.0;
  std::map<std::string, std::vector<std::vector<double>>> tables;
};

inline CaseTables read_case_tables(std::istream& in) {
  CaseTables ct;
  std::string line;
  std::string active;  // table currently being read
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto pct = line.find('%');
    if (pct != std::string::npos) line = line.substr(0, pct);
    line = strip(line);
    if (line.empty()) continue;

    if (!active.empty()) {
      bool closes = line.find(']') != std::string::npos;
      std::string data = line.substr(0, line.find(']'));
      data = strip(data);
      if (!data.empty()) {
        auto row = parse_row(data, lineno);
        if (!row.empty()) {
          auto& tbl = ct.tables[active];
          if (!tbl.empty() && tbl.front().size() != row.size())
            throw ParseError("line " + std::to_string(lineno) + ": row has " +
                             std::to_string(row.size()) + " columns, expected " +
                             std::to_string(tbl.front().size()));
          tbl.push_back(std::move(row));
        }
      }
      if (closes) active.clear();
      continue;
    }

    if (line.rfind("mpc.", 0) != 0) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = strip(line.substr(4, eq - 4));
    std::string rhs = strip(line.substr(eq + 1));
    if (!rhs.empty() && rhs.front() == '[') {
      active = key;
      ct.tables[key];
      rhs = strip(rhs.substr(1));
      if (!rhs.empty()) {
        bool closes = rhs.find(']') != std::string::npos;
        std::string data = strip(rhs.substr(0, rhs.find(']')));
        if (!data.empty()) ct.tables[key].push_back(parse_row(data, lineno));
        if (closes) active.clear();
      }
    } else if (key == "baseMVA") {
      if (!rhs.empty() && rhs.back() == ';') rhs.pop_back();
      ct.base_mva = std::strtod(rhs.c_str(), nullptr);
    }
  }
  if (!active.empty()) throw ParseError("unterminated table 'mpc." + active + "'");
  return ct;
}

}  // namespace detail

inline void validate_case(const NetworkCase& nc) {
  const int n = nc.n();
  if (n == 0) throw ValidationError("case has no buses");
  if (nc.period_count < 1) throw ValidationError("period count must be >= 1");
  if (nc.period_hours <= 0) throw ValidationError("period length must be > 0");

  int slack_count = 0;
  for (const auto& b : nc.buses) {
    if (b.type == 3) ++slack_count;
    if (!(b.v_min > 0 && b.v_min < b.v_max))
      throw ValidationError("bus " + std::to_string(b.id) + ": need 0 < v_min < v_max");
    if (b.p_load.size() != nc.period_count || b.q_load.size() != nc.period_count)
      throw ValidationError("bus " + std::to_string(b.id) + ": load schedule length mismatch");
  }
  if (slack_count != 1)
    throw ValidationError("case must have exactly one reference bus, found " +
                          std::to_string(slack_count));

  for (const auto& br : nc.branches) {
    if (br.from < 0 || br.from >= n || br.to < 0 || br.to >= n)
      throw ValidationError("branch references nonexistent bus");
    if (br.r == 0.0 && br.x == 0.0) throw ValidationError("branch with zero impedance");
    if (br.s_max <= 0) throw ValidationError("branch capacity must be > 0");
  }
  for (const auto& g : nc.generators) {
    if (g.bus < 0 || g.bus >= n) throw ValidationError("generator references nonexistent bus");
    if (g.p_min > g.p_max || g.q_min > g.q_max)
      throw ValidationError("generator limit bounds inverted");
    if (g.c2 < 0) throw ValidationError("generator quadratic cost must be >= 0");
    if (g.omega_p < 0 || g.omega_q < 0)
      throw ValidationError("generator participation factors must be >= 0");
  }
  for (const auto& s : nc.storage_units) {
    if (s.bus < 0 || s.bus >= n)
      throw ValidationError("storage unit references nonexistent bus");
    if (s.r_batt < 0 || s.r_cvt < 0) throw ValidationError("storage resistances must be >= 0");
    if (!(s.e_min <= s.e0 && s.e0 <= s.e_max))
      throw ValidationError("storage initial energy outside capacity bounds");
    if (s.s_max <= 0) throw ValidationError("storage rating must be > 0");
  }
}

// Sidecar configuration: storage units, participation factors, horizon and the
// various pipeline sections. Only the sections used by grid parsing are
// consumed here; the rest of the document is kept for the other modules.
inline nlohmann::json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config '" + path + "': " + e.what());
  }
  return j;
}

// Parse a MATPOWER-style case file plus an optional sidecar config document.
inline NetworkCase parse_case(const std::string& case_path,
                              const nlohmann::json& config = nlohmann::json::object()) {
  std::ifstream in(case_path);
  if (!in) throw ParseError("cannot open case file '" + case_path + "'");
  auto ct = detail::read_case_tables(in);

  NetworkCase nc;
  {
    auto slash = case_path.find_last_of("/\\");
    std::string base = slash == std::string::npos ? case_path : case_path.substr(slash + 1);
    auto dot = base.find_last_of('.');
    nc.name = dot == std::string::npos ? base : base.substr(0, dot);
  }
  nc.base_mva = config.value("base_mva", ct.base_mva > 0 ? ct.base_mva : 100.0);
  if (nc.base_mva <= 0) throw ValidationError("base MVA must be > 0");
  nc.period_count = config.value("periods", 1);
  nc.period_hours = config.value("period_hours", 1.0);

  auto it = ct.tables.find("bus");
  if (it == ct.tables.end() || it->second.empty()) throw ParseError("case has no bus table");
  for (const auto& row : it->second) {
    if (row.size() < 13) throw ParseError("bus row needs 13 columns");
    Bus b;
    b.id = int(row[0]);
    b.type = int(row[1]);
    b.gs = row[4] / nc.base_mva;
    b.bs = row[5] / nc.base_mva;
    b.v_max = row[11];
    b.v_min = row[12];
    b.p_load = Vec::Constant(nc.period_count, row[2] / nc.base_mva);
    b.q_load = Vec::Constant(nc.period_count, row[3] / nc.base_mva);
    nc.buses.push_back(std::move(b));
  }

  it = ct.tables.find("branch");
  if (it != ct.tables.end()) {
    for (const auto& row : it->second) {
      if (row.size() < 6) throw ParseError("branch row needs at least 6 columns");
      Branch br;
      br.from = nc.bus_index(int(row[0]));
      br.to = nc.bus_index(int(row[1]));
      if (br.from < 0 || br.to < 0)
        throw ValidationError("branch endpoint references unknown bus " +
                              std::to_string(int(br.from < 0 ? row[0] : row[1])));
      br.r = row[2];
      br.x = row[3];
      br.b_charge = row[4];
      br.s_max = row[5] / nc.base_mva;
      nc.branches.push_back(br);
    }
  }

  it = ct.tables.find("gen");
  std::size_t gen_count = it == ct.tables.end() ? 0 : it->second.size();
  if (it != ct.tables.end()) {
    for (const auto& row : it->second) {
      if (row.size() < 10) throw ParseError("gen row needs at least 10 columns");
      Generator g;
      g.bus = nc.bus_index(int(row[0]));
      if (g.bus < 0)
        throw ValidationError("generator references unknown bus " + std::to_string(int(row[0])));
      g.q_max = row[3] / nc.base_mva;
      g.q_min = row[4] / nc.base_mva;
      g.p_max = row[8] / nc.base_mva;
      g.p_min = row[9] / nc.base_mva;
      nc.generators.push_back(g);
    }
  }

  it = ct.tables.find("gencost");
  if (it != ct.tables.end()) {
    if (it->second.size() != gen_count)
      throw ParseError("gencost rows do not match gen rows");
    for (std::size_t i = 0; i < it->second.size(); ++i) {
      const auto& row = it->second[i];
      if (row.size() < 4 || int(row[0]) != 2)
        throw ParseError("only polynomial (model 2) gencost rows are supported");
      int ncost = int(row[3]);
      if (row.size() < 4 + std::size_t(ncost)) throw ParseError("gencost row too short");
      // polynomial coefficients are listed highest order first, in MW units
      double c2 = 0, c1 = 0, c0 = 0;
      if (ncost >= 3) {
        c2 = row[4];
        c1 = row[5];
        c0 = row[6];
      } else if (ncost == 2) {
        c1 = row[4];
        c0 = row[5];
      } else if (ncost == 1) {
        c0 = row[4];
      }
      nc.generators[i].c2 = c2 * nc.base_mva * nc.base_mva;
      nc.generators[i].c1 = c1 * nc.base_mva;
      nc.generators[i].c0 = c0;
    }
  }

  if (config.contains("storage")) {
    for (const auto& js : config.at("storage")) {
      StorageUnit s;
      int bus_id = js.at("bus").get<int>();
      s.bus = nc.bus_index(bus_id);
      if (s.bus < 0)
        throw ValidationError("storage unit references unknown bus " + std::to_string(bus_id));
      s.s_max = js.at("s_max_mva").get<double>() / nc.base_mva;
      s.e_min = js.value("e_min_mwh", 0.0) / nc.base_mva;
      s.e_max = js.at("e_max_mwh").get<double>() / nc.base_mva;
      s.e0 = js.value("e0_mwh", 0.5 * (js.value("e_min_mwh", 0.0) +
                                        js.at("e_max_mwh").get<double>())) /
             nc.base_mva;
      s.r_batt = js.value("r_batt", 0.0);
      s.r_cvt = js.value("r_cvt", 0.0);
      nc.storage_units.push_back(s);
    }
  }

  // Participation factors: explicit lists or uniform over all units.
  const std::size_t units = nc.generators.size() + nc.storage_units.size();
  auto part = config.value("participation", nlohmann::json::object());
  std::string mode = part.value("mode", "uniform");
  if (mode == "uniform") {
    double w = units > 0 ? 1.0 / double(units) : 0.0;
    for (auto& g : nc.generators) g.omega_p = g.omega_q = w;
    for (auto& s : nc.storage_units) s.omega_p = s.omega_q = w;
  } else if (mode == "explicit") {
    auto gw = part.at("generators");
    auto sw = part.at("storage");
    if (gw.size() != nc.generators.size() || sw.size() != nc.storage_units.size())
      throw ValidationError("participation lists do not match unit counts");
    for (std::size_t i = 0; i < nc.generators.size(); ++i) {
      nc.generators[i].omega_p = gw[i].at("p").get<double>();
      nc.generators[i].omega_q = gw[i].at("q").get<double>();
    }
    for (std::size_t i = 0; i < nc.storage_units.size(); ++i) {
      nc.storage_units[i].omega_p = sw[i].at("p").get<double>();
      nc.storage_units[i].omega_q = sw[i].at("q").get<double>();
    }
  } else {
    throw ValidationError("unknown participation mode '" + mode + "'");
  }

  validate_case(nc);
  return nc;
}

// Standard bus-admittance construction: Y_ij = -y_ij off-diagonal,
// Y_ii = sum of incident series admittances plus shunt terms.
inline AdmittanceMatrix build_admittance(const NetworkCase& nc) {
  const int n = nc.n();
  if (nc.branches.empty()) throw ValidationError("cannot build admittance: no branches");
  std::vector<Triplet> tg, tb;
  for (const auto& br : nc.branches) {
    if (br.r == 0.0 && br.x == 0.0) throw ValidationError("zero-impedance branch");
    std::complex<double> y = 1.0 / std::complex<double>(br.r, br.x);
    tg.emplace_back(br.from, br.to, -y.real());
    tg.emplace_back(br.to, br.from, -y.real());
    tb.emplace_back(br.from, br.to, -y.imag());
    tb.emplace_back(br.to, br.from, -y.imag());
    tg.emplace_back(br.from, br.from, y.real());
    tg.emplace_back(br.to, br.to, y.real());
    tb.emplace_back(br.from, br.from, y.imag() + 0.5 * br.b_charge);
    tb.emplace_back(br.to, br.to, y.imag() + 0.5 * br.b_charge);
  }
  for (int i = 0; i < n; ++i) {
    if (nc.buses[i].gs != 0.0) tg.emplace_back(i, i, nc.buses[i].gs);
    if (nc.buses[i].bs != 0.0) tb.emplace_back(i, i, nc.buses[i].bs);
  }
  AdmittanceMatrix y;
  y.G.resize(n, n);
  y.B.resize(n, n);
  y.G.setFromTriplets(tg.begin(), tg.end());
  y.B.setFromTriplets(tb.begin(), tb.end());
  return y;
}

inline LoadProfile read_profile_csv(const std::string& path, int n_buses, int periods) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open profile '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty profile file");
  if (detail::strip(line) != "bus,period,multiplier")
    throw ParseError("profile header must be 'bus,period,multiplier'");
  LoadProfile p;
  p.multipliers = Mat::Ones(n_buses, periods);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::strip(line);
    if (line.empty()) continue;
    auto row = detail::parse_row(line, lineno);
    if (row.size() != 3) throw ParseError("profile line " + std::to_string(lineno) +
                                          ": expected 3 fields");
    int b = int(row[0]) - 1, t = int(row[1]) - 1;
    if (b < 0 || b >= n_buses || t < 0 || t >= periods)
      throw ParseError("profile line " + std::to_string(lineno) + ": index out of range");
    p.multipliers(b, t) = row[2];
  }
  return p;
}

inline NetworkCase apply_profile(const NetworkCase& nc, const LoadProfile& profile) {
  if (profile.multipliers.rows() != nc.n() || profile.multipliers.cols() != nc.period_count)
    throw ValidationError("profile dimensions do not match case");
  if ((profile.multipliers.array() <= 0.0).any())
    throw ValidationError("profile multipliers must be > 0");
  NetworkCase out = nc;
  for (int i = 0; i < nc.n(); ++i) {
    out.buses[i].p_load =
        nc.buses[i].p_load.cwiseProduct(profile.multipliers.row(i).transpose());
    out.buses[i].q_load =
        nc.buses[i].q_load.cwiseProduct(profile.multipliers.row(i).transpose());
  }
  return out;
}

// Serialize to the same tabular format parse_case reads. Values that the
// parser derives (loads per period beyond the base, participation factors)
// go to a JSON sidecar so that a round trip reproduces the record exactly.
inline std::string write_case_m(const NetworkCase& nc) {
  std::ostringstream os;
  os << "function mpc = " << nc.name << "\n";
  os << "mpc.version = '2';\n";
  os << "mpc.baseMVA = " << format_double(nc.base_mva) << ";\n";
  os << "mpc.bus = [\n";
  for (const auto& b : nc.buses) {
    os << "\t" << b.id << "\t" << b.type << "\t" << format_double(b.p_load[0] * nc.base_mva)
       << "\t" << format_double(b.q_load[0] * nc.base_mva) << "\t"
       << format_double(b.gs * nc.base_mva) << "\t" << format_double(b.bs * nc.base_mva)
       << "\t1\t1\t0\t230\t1\t" << format_double(b.v_max) << "\t" << format_double(b.v_min)
       << ";\n";
  }
  os << "];\n";
  os << "mpc.gen = [\n";
  for (const auto& g : nc.generators) {
    os << "\t" << nc.buses[g.bus].id << "\t0\t0\t" << format_double(g.q_max * nc.base_mva)
       << "\t" << format_double(g.q_min * nc.base_mva) << "\t1\t" << format_double(nc.base_mva)
       << "\t1\t" << format_double(g.p_max * nc.base_mva) << "\t"
       << format_double(g.p_min * nc.base_mva) << ";\n";
  }
  os << "];\n";
  os << "mpc.branch = [\n";
  for (const auto& br : nc.branches) {
    os << "\t" << nc.buses[br.from].id << "\t" << nc.buses[br.to].id << "\t"
       << format_double(br.r) << "\t" << format_double(br.x) << "\t"
       << format_double(br.b_charge) << "\t" << format_double(br.s_max * nc.base_mva)
       << ";\n";
  }
  os << "];\n";
  os << "mpc.gencost = [\n";
  for (const auto& g : nc.generators) {
    os << "\t2\t0\t0\t3\t" << format_double(g.c2 / (nc.base_mva * nc.base_mva)) << "\t"
       << format_double(g.c1 / nc.base_mva) << "\t" << format_double(g.c0) << ";\n";
  }
  os << "];\n";
  return os.str();
}

inline nlohmann::json write_case_sidecar(const NetworkCase& nc) {
  nlohmann::json j;
  j["base_mva"] = nc.base_mva;
  j["periods"] = nc.period_count;
  j["period_hours"] = nc.period_hours;
  auto storage = nlohmann::json::array();
  for (const auto& s : nc.storage_units) {
    storage.push_back({{"bus", nc.buses[s.bus].id},
                       {"s_max_mva", s.s_max * nc.base_mva},
                       {"e_min_mwh", s.e_min * nc.base_mva},
                       {"e_max_mwh", s.e_max * nc.base_mva},
                       {"e0_mwh", s.e0 * nc.base_mva},
                       {"r_batt", s.r_batt},
                       {"r_cvt", s.r_cvt}});
  }
  j["storage"] = storage;
  auto gw = nlohmann::json::array();
  for (const auto& g : nc.generators) gw.push_back({{"p", g.omega_p}, {"q", g.omega_q}});
  auto sw = nlohmann::json::array();
  for (const auto& s : nc.storage_units) sw.push_back({{"p", s.omega_p}, {"q", s.omega_q}});
  j["participation"] = {{"mode", "explicit"}, {"generators", gw}, {"storage", sw}};
  return j;
}

}  // namespace ccgrid
