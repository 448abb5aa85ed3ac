#pragma once

// Serialization layer: schedule configs as JSON, measurement artifacts as
// CSV with provenance headers, and machine-readable reports.  Every artifact
// records the tool version, the schema version, and a hash of the schedule
// it was produced from, so reruns can be compared byte for byte.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <locale>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "skewmeas/analysis.hpp"
#include "skewmeas/bigpow.hpp"
#include "skewmeas/construction.hpp"
#include "skewmeas/schedule.hpp"
#include "skewmeas/spectrum.hpp"

namespace skewmeas {

using Json = nlohmann::json;

inline constexpr const char* kToolVersion = "skewmeas 1.0.0";
inline constexpr const char* kSchemaVersion = "1";

// ---------------------------------------------------------------------------
// Number formatting (locale-independent, deterministic)
// ---------------------------------------------------------------------------

inline std::string format_double(double x) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(17) << x;
  return os.str();
}

inline std::string format_rat(const Rat& q) {
  return numerator(q).str() + "/" + denominator(q).str();
}

inline Rat parse_rat(const std::string& text) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) return Rat(parse_int(text));
  const Int num = parse_int(text.substr(0, slash));
  const Int den = parse_int(text.substr(slash + 1));
  if (den == 0) throw std::invalid_argument("rational with zero denominator");
  return Rat(num, den);
}

// Exact decimal expansion of a nonnegative rational, truncated (not rounded)
// to 30 fractional digits.
inline std::string format_fixed30(const Rat& x) {
  if (x < 0) throw std::domain_error("format_fixed30: need x >= 0");
  const Int ip = rational_floor(x);
  const Rat frac = x - Rat(ip);
  const Int scaled = rational_floor(frac * Rat(ipow(10, 30)));
  std::string digits = scaled.str();
  if (digits.size() < 30) digits.insert(0, 30 - digits.size(), '0');
  return ip.str() + "." + digits;
}

// ---------------------------------------------------------------------------
// Big integers and rationals in JSON
// ---------------------------------------------------------------------------

// Integers that fit exactly in a double-safe range become JSON numbers;
// anything larger is written as a decimal string.
inline Json int_to_json(const Int& n) {
  static const Int kSafe = Int(1) << 53;
  if (n >= -kSafe && n <= kSafe) return Json(n.convert_to<std::int64_t>());
  return Json(n.str());
}

// Accepts a JSON number, a decimal string, or {"pow":{"base":b,"exp":e}}
// for exponents too large to spell out.
inline Int int_from_json(const Json& j, std::size_t bit_budget = (1u << 20)) {
  if (j.is_number_integer()) return Int(j.get<std::int64_t>());
  if (j.is_number_unsigned()) return Int(j.get<std::uint64_t>());
  if (j.is_string()) return parse_int(j.get<std::string>());
  if (j.is_object() && j.contains("pow")) {
    const Json& p = j.at("pow");
    return ipow_checked(int_from_json(p.at("base"), bit_budget),
                        int_from_json(p.at("exp"), bit_budget), bit_budget);
  }
  throw std::invalid_argument(
      "expected an integer, a decimal string, or {\"pow\":{...}}");
}

inline Rat rat_from_json(const Json& j) {
  if (j.is_string()) return parse_rat(j.get<std::string>());
  if (j.is_number_integer()) return Rat(j.get<std::int64_t>());
  if (j.is_number_unsigned()) return Rat(Int(j.get<std::uint64_t>()));
  throw std::invalid_argument("expected a rational \"p/q\" string or integer");
}

inline std::int64_t small_int_from_json(const Json& j,
                                        const char* what = "value") {
  const Int n = int_from_json(j);
  if (n < std::numeric_limits<std::int64_t>::min() ||
      n > std::numeric_limits<std::int64_t>::max())
    throw std::invalid_argument(std::string(what) + " out of range");
  return n.convert_to<std::int64_t>();
}

// ---------------------------------------------------------------------------
// Schedule configs
// ---------------------------------------------------------------------------

inline Json schedule_to_json(const Schedule& sched) {
  Json stages = Json::array();
  for (const StageParams& p : sched.stages) {
    Json st;
    st["s"] = p.s;
    st["a"] = int_to_json(p.a);
    st["b"] = int_to_json(p.b);
    st["digits"] = p.digits.members;
    st["eps"] = format_rat(p.eps);
    stages.push_back(std::move(st));
  }
  Json out;
  out["schema"] = kSchemaVersion;
  out["stages"] = std::move(stages);
  out["provenance"] = sched.provenance;
  return out;
}

inline Schedule schedule_from_json(const Json& cfg,
                                   std::size_t bit_budget = (1u << 20)) {
  if (!cfg.contains("stages") || !cfg.at("stages").is_array() ||
      cfg.at("stages").empty())
    throw std::invalid_argument(
        "schedule config needs a nonempty \"stages\" array");
  Schedule sched;
  sched.provenance = cfg.value("provenance", std::string("custom"));
  for (const Json& st : cfg.at("stages")) {
    StageParams p;
    p.s = small_int_from_json(st.at("s"), "stage base");
    p.a = int_from_json(st.at("a"), bit_budget);
    p.b = int_from_json(st.at("b"), bit_budget);
    std::vector<std::int64_t> members;
    for (const Json& d : st.at("digits"))
      members.push_back(small_int_from_json(d, "digit"));
    p.digits = make_digit_set(p.s, std::move(members));
    p.eps = rat_from_json(st.at("eps"));
    sched.stages.push_back(std::move(p));
  }
  derive_stage_quantities(sched, bit_budget);
  return sched;
}

// A config either lists stages inline or names a generator:
//   {"generator":{"kind":"appendix","A0":4,"depth":16}}
//   {"generator":{"kind":"table1","bases":[3,4],"depth":6}}
inline Schedule schedule_from_config(const Json& cfg,
                                     std::size_t bit_budget = (1u << 20)) {
  if (cfg.contains("generator")) {
    const Json& g = cfg.at("generator");
    const std::string kind = g.at("kind").get<std::string>();
    const auto depth = static_cast<std::size_t>(
        small_int_from_json(g.at("depth"), "depth"));
    if (kind == "appendix") {
      AppendixOptions opt;
      opt.bit_budget = bit_budget;
      return make_appendix_schedule(small_int_from_json(g.at("A0"), "A0"),
                                    depth, opt);
    }
    if (kind == "table1") {
      std::vector<std::int64_t> bases;
      for (const Json& c : g.at("bases"))
        bases.push_back(small_int_from_json(c, "base"));
      Table1Options opt;
      opt.bit_budget = bit_budget;
      if (g.contains("gap")) opt.gap = int_from_json(g.at("gap"), bit_budget);
      return make_table1_schedule(bases, depth, opt);
    }
    throw std::invalid_argument("unknown generator kind: " + kind);
  }
  return schedule_from_json(cfg, bit_budget);
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Json j;
  in >> j;
  return j;
}

inline Schedule load_schedule(const std::string& path,
                              std::size_t bit_budget = (1u << 20)) {
  return schedule_from_config(read_json_file(path), bit_budget);
}

// ---------------------------------------------------------------------------
// Artifact headers
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// 16-hex-digit digest of the canonical schedule dump.
inline std::string schedule_hash(const Schedule& sched) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0')
     << fnv1a(schedule_to_json(sched).dump());
  return os.str();
}

struct ArtifactHeader {
  std::string schedule_hash;
  std::optional<std::uint64_t> seed;
  std::vector<std::pair<std::string, std::string>> extras;
};

inline ArtifactHeader make_header(const Schedule& sched) {
  ArtifactHeader h;
  h.schedule_hash = schedule_hash(sched);
  return h;
}

inline void write_header(std::ostream& out, const ArtifactHeader& h) {
  out << "# " << kToolVersion << "\n";
  out << "# schema: " << kSchemaVersion << "\n";
  out << "# schedule: " << h.schedule_hash << "\n";
  if (h.seed) out << "# seed: " << *h.seed << "\n";
  for (const auto& [key, value] : h.extras)
    out << "# " << key << ": " << value << "\n";
}

// ---------------------------------------------------------------------------
// CSV artifacts
// ---------------------------------------------------------------------------

inline const char* method_name(EvalMethod m) {
  switch (m) {
    case EvalMethod::direct: return "direct";
    case EvalMethod::delta: return "delta";
    default: return "auto";
  }
}

inline void write_spectrum_csv(std::ostream& out, const ArtifactHeader& h,
                               const std::vector<SpectrumRow>& rows) {
  write_header(out, h);
  out << "xi,re,im,abs,band,subband,envelope_bound,method,error_budget\n";
  for (const SpectrumRow& r : rows) {
    out << r.xi.str() << ',' << format_double(r.coeff.real()) << ','
        << format_double(r.coeff.imag()) << ','
        << format_double(std::abs(r.coeff)) << ',' << r.band << ','
        << r.subband << ',' << format_double(r.envelope) << ',' << r.method
        << ',' << format_double(r.error_budget) << "\n";
  }
}

inline void write_del_csv(std::ostream& out, const ArtifactHeader& h,
                          const DELReport& rep) {
  write_header(out, h);
  const bool split = rep.split_stage.has_value();
  out << "N,inner_sum,partial_sum";
  if (split)
    out << ",inner_abs,partial_abs,u_inner,u_partial,v_inner,v_partial";
  out << "\n";
  for (const DELRow& r : rep.rows) {
    out << r.N << ',' << format_double(r.inner) << ','
        << format_double(r.partial);
    if (split)
      out << ',' << format_double(r.inner_abs) << ','
          << format_double(r.partial_abs) << ',' << format_double(r.u_inner)
          << ',' << format_double(r.u_partial) << ','
          << format_double(r.v_inner) << ',' << format_double(r.v_partial);
    out << "\n";
  }
}

inline std::string lineage_string(
    const std::vector<std::pair<Int, Int>>& lineage) {
  std::string out;
  for (std::size_t i = 0; i < lineage.size(); ++i) {
    if (i) out += ';';
    out += lineage[i].first.str();
    out += ':';
    out += lineage[i].second.str();
  }
  return out;
}

inline void write_sample_csv(std::ostream& out, const ArtifactHeader& h,
                             const std::vector<SamplePoint>& samples) {
  write_header(out, h);
  out << "value,lineage\n";
  for (const SamplePoint& pt : samples)
    out << format_fixed30(pt.x) << ',' << lineage_string(pt.lineage) << "\n";
}

inline void write_leaf_csv(std::ostream& out, const ArtifactHeader& h,
                           const StageMeasure& meas) {
  write_header(out, h);
  out << "left,weight,favoured,lineage\n";
  for (const LeafInterval& leaf : meas.leaves)
    out << format_rat(leaf.left) << ',' << format_rat(leaf.weight) << ','
        << (leaf.favoured ? 1 : 0) << ',' << lineage_string(leaf.lineage)
        << "\n";
}

// ---------------------------------------------------------------------------
// Reports as JSON
// ---------------------------------------------------------------------------

inline Json check_to_json(const CheckResult& c) {
  Json j;
  j["pass"] = c.pass;
  j["failed_stages"] = c.failed_stages;
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

inline Json validation_to_json(const ValidationReport& rep) {
  Json j;
  j["pass"] = rep.all_pass();
  Json checks;
  checks["abs"] = check_to_json(rep.abs);
  checks["digit_basic"] = check_to_json(rep.digit_basic);
  checks["ratio_to_zero"] = check_to_json(rep.ratio_to_zero);
  checks["growth3"] = check_to_json(rep.growth3);
  checks["growth16"] = check_to_json(rep.growth16);
  checks["divergence"] = check_to_json(rep.divergence);
  checks["frostman_size"] = check_to_json(rep.frostman_size);
  if (rep.normality_shape)
    checks["normality_shape"] = check_to_json(*rep.normality_shape);
  j["checks"] = std::move(checks);
  Json sums = Json::object();
  for (const auto& [base, sum] : rep.divergence_sums)
    sums[std::to_string(base)] = format_rat(sum);
  j["divergence_sums"] = std::move(sums);
  return j;
}

inline Json envelope_to_json(const EnvelopeReport& rep) {
  Json bands = Json::array();
  for (const BandStats& b : rep.bands) {
    Json jb;
    jb["band"] = b.band;
    jb["count"] = b.count;
    jb["max_abs"] = b.max_abs;
    jb["argmax"] = int_to_json(b.argmax);
    jb["envelope_bound"] = b.envelope;
    jb["max_ratio"] = b.max_ratio;
    bands.push_back(std::move(jb));
  }
  Json j;
  j["stage"] = rep.M;
  j["xi_lo"] = int_to_json(rep.xi_lo);
  j["xi_hi"] = int_to_json(rep.xi_hi);
  j["bands"] = std::move(bands);
  return j;
}

inline Json frostman_to_json(const FrostmanReport& rep) {
  Json j;
  j["eta"] = format_rat(rep.eta);
  Json basic = Json::array();
  for (const FrostmanBasicRow& r : rep.basic) {
    Json row;
    row["stage"] = r.m;
    row["max_weight"] = format_rat(r.max_weight);
    row["ratio"] = r.ratio;
    basic.push_back(std::move(row));
  }
  j["basic"] = std::move(basic);
  Json inter = Json::array();
  for (const FrostmanIntermediateRow& r : rep.intermediate) {
    Json row;
    row["stage"] = r.m;
    row["depth"] = r.j;
    row["max_mass"] = format_rat(r.max_mass);
    row["ratio"] = r.ratio;
    inter.push_back(std::move(row));
  }
  j["intermediate"] = std::move(inter);
  Json win;
  win["left"] = format_rat(rep.window.left);
  win["right"] = format_rat(rep.window.right);
  win["mass"] = format_rat(rep.window.mass);
  win["ratio"] = rep.window.ratio;
  j["window"] = std::move(win);
  return j;
}

inline Json digit_stats_to_json(const DigitStats& st) {
  Json j;
  j["base"] = st.base;
  j["sample_count"] = st.sample_count;
  j["positions"] = st.positions;
  Json counts = Json::object();
  for (const auto& [pos, vec] : st.counts)
    counts[std::to_string(pos)] = vec;
  j["counts"] = std::move(counts);
  j["block_len"] = st.block_len;
  Json blocks = Json::array();
  for (const auto& [block, n] : st.block_counts) {
    Json entry;
    entry["digits"] = block;
    entry["count"] = n;
    blocks.push_back(std::move(entry));
  }
  j["block_counts"] = std::move(blocks);
  return j;
}

inline std::string error_json(const std::string& kind,
                              const std::string& message) {
  Json j;
  j["error"] = kind;
  j["message"] = message;
  return j.dump();
}

}  // namespace skewmeas
