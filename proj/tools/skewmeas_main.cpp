// Command-line front end: loads schedule configs, runs builds, spectral
// scans, certifiers, and number-theoretic queries, and emits deterministic
// CSV/JSON artifacts.
//
// Exit codes: 0 ok, 1 validation/certification failure, 2 budget exceeded,
// 3 I/O error.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "skewmeas/analysis.hpp"
#include "skewmeas/construction.hpp"
#include "skewmeas/expsums.hpp"
#include "skewmeas/io.hpp"
#include "skewmeas/numtheory.hpp"
#include "skewmeas/parallel.hpp"
#include "skewmeas/schedule.hpp"
#include "skewmeas/spectrum.hpp"

namespace {

using namespace skewmeas;

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitBudget = 2;
constexpr int kExitIo = 3;

// Writes a fully assembled payload in one shot (stdout when no path given),
// so artifacts are byte-deterministic.
void emit(const std::string& path, const std::string& payload) {
  if (path.empty()) {
    std::cout << payload;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << payload;
  f.flush();
  if (!f) throw std::runtime_error("write failed: " + path);
}

Json meta_json(const std::optional<std::string>& hash,
               const std::optional<std::uint64_t>& seed) {
  Json m;
  m["tool"] = kToolVersion;
  m["schema"] = kSchemaVersion;
  if (hash) m["schedule"] = *hash;
  if (seed) m["seed"] = *seed;
  return m;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

EvalMethod parse_method(const std::string& name) {
  if (name == "auto") return EvalMethod::automatic;
  if (name == "direct") return EvalMethod::direct;
  if (name == "delta") return EvalMethod::delta;
  throw std::invalid_argument("method must be auto, direct, or delta");
}

// Option storage shared across subcommands; each callback reads what it
// declared.
struct Ctx {
  std::string config;
  std::string out;
  std::string rows_out;
  std::size_t stage = 0;
  std::string xi_min = "0";
  std::string xi_max;
  std::uint64_t xi_step = 1;
  std::string method = "auto";
  std::size_t delta_from = 0;
  std::uint64_t leaf_budget = 1'000'000;
  std::size_t bit_budget = 1u << 20;
  unsigned threads = 0;
  std::uint64_t count = 0;
  std::uint64_t seed = 0;
  std::vector<std::int64_t> positions;
  std::int64_t block_len = 1;
  std::int64_t digit_base = 0;
  std::string eta = "1/2";
  int window_depth = 12;
  std::string x;
  std::string base = "2";
  std::string h = "1";
  std::uint64_t n = 4096;
  bool approx = false;
  std::uint64_t n_max = 100;
  std::size_t split_stage = 0;
  bool split = false;
  std::string u, v, nval;
  std::string k_opt;
  bool has_k = false;
  double kap = 0;
  bool has_kap = false;
  std::vector<std::string> suites;
  std::vector<std::string> args;  // positional arguments of nt subcommands
};

Schedule load(const Ctx& c) { return load_schedule(c.config, c.bit_budget); }

EvalOptions eval_options(const Ctx& c) {
  EvalOptions opt;
  opt.method = parse_method(c.method);
  opt.delta_from = c.delta_from;
  opt.leaf_budget = c.leaf_budget;
  opt.bit_budget = c.bit_budget;
  return opt;
}

// ---------------------------------------------------------------------------
// Subcommand bodies.  Each throws on error; main maps exceptions to codes.
// ---------------------------------------------------------------------------

int run_validate(const Ctx& c) {
  const Schedule sched = load(c);
  const ValidationReport rep = validate(sched);
  Json j;
  j["meta"] = meta_json(schedule_hash(sched), std::nullopt);
  j["provenance"] = sched.provenance;
  j["depth"] = sched.depth();
  j["report"] = validation_to_json(rep);
  emit(c.out, dump(j));
  return rep.all_pass() ? kExitOk : kExitFail;
}

int run_build(const Ctx& c) {
  const Schedule sched = load(c);
  BuildOptions opt;
  opt.leaf_budget = c.leaf_budget;
  opt.bit_budget = c.bit_budget;
  const StageMeasure meas = build(sched, c.stage, opt);
  ArtifactHeader h = make_header(sched);
  h.extras.emplace_back("stage", std::to_string(meas.M));
  h.extras.emplace_back("leaves", std::to_string(meas.leaves.size()));
  std::ostringstream os;
  write_leaf_csv(os, h, meas);
  emit(c.out, os.str());
  return kExitOk;
}

int run_spectrum(const Ctx& c) {
  const Schedule sched = load(c);
  SpectrumEvaluator eval(sched, c.stage, eval_options(c));
  const Int lo = parse_int(c.xi_min), hi = parse_int(c.xi_max);
  if (lo > hi) throw std::invalid_argument("empty frequency range");
  if (c.xi_step == 0) throw std::invalid_argument("xi-step must be positive");
  std::vector<SpectrumRow> rows;
  for (Int xi = lo; xi <= hi; xi += c.xi_step) rows.push_back(eval.row(xi));
  ArtifactHeader h = make_header(sched);
  h.extras.emplace_back("stage", std::to_string(c.stage));
  std::ostringstream os;
  write_spectrum_csv(os, h, rows);
  emit(c.out, os.str());
  return kExitOk;
}

int run_envelope(const Ctx& c) {
  const Schedule sched = load(c);
  const EnvelopeReport rep = envelope_scan(sched, c.stage, parse_int(c.xi_max),
                                           eval_options(c), c.threads);
  Json j;
  j["meta"] = meta_json(schedule_hash(sched), std::nullopt);
  j["report"] = envelope_to_json(rep);
  emit(c.out, dump(j));
  if (!c.rows_out.empty()) {
    ArtifactHeader h = make_header(sched);
    h.extras.emplace_back("stage", std::to_string(rep.M));
    std::ostringstream os;
    write_spectrum_csv(os, h, rep.rows);
    emit(c.rows_out, os.str());
  }
  return kExitOk;
}

int run_frostman(const Ctx& c) {
  const Schedule sched = load(c);
  BuildOptions opt;
  opt.leaf_budget = c.leaf_budget;
  opt.bit_budget = c.bit_budget;
  const StageMeasure meas = build(sched, c.stage, opt);
  const FrostmanReport rep =
      frostman_report(sched, meas, parse_rat(c.eta), c.window_depth,
                      c.bit_budget);
  Json j;
  j["meta"] = meta_json(schedule_hash(sched), std::nullopt);
  j["stage"] = meas.M;
  j["report"] = frostman_to_json(rep);
  emit(c.out, dump(j));
  return kExitOk;
}

int run_sample(const Ctx& c) {
  const Schedule sched = load(c);
  const auto pts = sample(sched, c.stage, c.count, c.seed, c.bit_budget);
  ArtifactHeader h = make_header(sched);
  h.seed = c.seed;
  h.extras.emplace_back("stage", std::to_string(c.stage));
  std::ostringstream os;
  write_sample_csv(os, h, pts);
  emit(c.out, os.str());
  return kExitOk;
}

int run_digit_bias(const Ctx& c) {
  const Schedule sched = load(c);
  const auto pts = sample(sched, c.stage, c.count, c.seed, c.bit_budget);
  const std::int64_t base =
      c.digit_base > 0
          ? c.digit_base
          : sched.stage(c.stage ? c.stage : sched.depth()).s;
  const DigitStats st = digit_frequency(pts, base, c.positions, c.block_len);
  Json j;
  j["meta"] = meta_json(schedule_hash(sched), c.seed);
  j["stage"] = c.stage;
  j["stats"] = digit_stats_to_json(st);
  emit(c.out, dump(j));
  return kExitOk;
}

int run_weyl(const Ctx& c) {
  const Int b = parse_int(c.base), h = parse_int(c.h);
  Cplx w;
  if (c.approx)
    w = weyl_sum_double(to_double(parse_rat(c.x)), b, h, c.n);
  else
    w = weyl_sum(parse_rat(c.x), b, h, c.n);
  Json j;
  j["meta"] = meta_json(std::nullopt, std::nullopt);
  j["x"] = c.x;
  j["base"] = int_to_json(b);
  j["h"] = int_to_json(h);
  j["n"] = c.n;
  j["re"] = w.real();
  j["im"] = w.imag();
  j["abs"] = std::abs(w);
  emit(c.out, dump(j));
  return kExitOk;
}

int run_del(const Ctx& c) {
  const Schedule sched = load(c);
  DELOptions opt;
  if (c.split_stage > 0) opt.split_stage = c.split_stage;
  opt.leaf_budget = c.leaf_budget;
  opt.bit_budget = c.bit_budget;
  const DELReport rep = del_partial(sched, c.stage, parse_int(c.h),
                                    parse_int(c.base), c.n_max, opt);
  ArtifactHeader hd = make_header(sched);
  hd.extras.emplace_back("stage", std::to_string(rep.M));
  hd.extras.emplace_back("h", rep.h.str());
  hd.extras.emplace_back("base", rep.b.str());
  if (rep.split_stage)
    hd.extras.emplace_back("split-stage", std::to_string(*rep.split_stage));
  std::ostringstream os;
  write_del_csv(os, hd, rep);
  emit(c.out, os.str());
  return kExitOk;
}

int run_classify(const Ctx& c) {
  const Schedule sched = load(c);
  std::optional<Int> K;
  if (c.has_k) K = parse_int(c.k_opt);
  const IndexClass ic =
      classify_index(sched, c.stage, parse_int(c.u), parse_int(c.v),
                     parse_int(c.nval), parse_int(c.h), parse_int(c.base), K,
                     c.bit_budget);
  Json j;
  j["meta"] = meta_json(schedule_hash(sched), std::nullopt);
  j["stage"] = c.stage;
  j["u"] = int_to_json(ic.u);
  j["v"] = int_to_json(ic.v);
  j["N"] = int_to_json(ic.N);
  j["level1"] = ic.level1;
  j["level2"] = ic.level2;
  if (!ic.level3.empty()) {
    j["level3"] = ic.level3;
    j["case"] = std::string(1, ic.case_tag);
    j["K"] = int_to_json(ic.K);
    j["kappa"] = ic.kappa_s;
    j["pair_count"] = int_to_json(ic.n_count);
    j["window_len"] = int_to_json(ic.window_len);
    j["zeta"] = int_to_json(ic.zeta);
    if (ic.case_tag == 'b') {
      j["k_of_u"] = int_to_json(ic.k_of_u);
      j["h_val"] = int_to_json(ic.h_val);
    }
  }
  j["cutoff"] = ic.c_m;
  j["digit_len"] = int_to_json(ic.R);
  emit(c.out, dump(j));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// nt: standalone number-theoretic queries.
// ---------------------------------------------------------------------------

int run_nt_factor(const Ctx& c) {
  const Int n = parse_int(c.args.at(0));
  Json factors = Json::array();
  for (const auto& [p, e] : factorize(n)) {
    Json f;
    f["prime"] = int_to_json(p);
    f["exp"] = int_to_json(e);
    factors.push_back(std::move(f));
  }
  Json j;
  j["n"] = int_to_json(n);
  j["factors"] = std::move(factors);
  emit(c.out, dump(j));
  return kExitOk;
}

int run_nt_ord(const Ctx& c) {
  const Int a = parse_int(c.args.at(0)), m = parse_int(c.args.at(1));
  emit(c.out, mult_order(a, m).str() + "\n");
  return kExitOk;
}

int run_nt_kappa(const Ctx& c) {
  emit(c.out, format_double(kappa(parse_int(c.args.at(0))
                                      .convert_to<std::int64_t>())) +
                  "\n");
  return kExitOk;
}

int run_nt_dset(const Ctx& c) {
  const std::int64_t s = parse_int(c.args.at(0)).convert_to<std::int64_t>();
  const std::int64_t ell = parse_int(c.args.at(1)).convert_to<std::int64_t>();
  const double kap = c.has_kap ? c.kap : kappa(s);
  const Int count = extremal_digit_count(ell, s, kap);
  const double bound = extremal_digit_bound(ell, kap);
  Json j;
  j["s"] = s;
  j["ell"] = ell;
  j["kappa"] = kap;
  j["count"] = int_to_json(count);
  j["bound"] = bound;
  j["pass"] = to_double(Rat(count)) <= bound;
  emit(c.out, dump(j));
  return kExitOk;
}

int run_nt_oset(const Ctx& c) {
  const Int N = parse_int(c.args.at(0)), k = parse_int(c.args.at(1));
  const Int p = parse_int(c.args.at(2)), b = parse_int(c.args.at(3));
  const auto set = divisible_power_set(N, k, p, b);
  const Rat bound = divisible_power_bound(N, k, p, b);
  Json members = Json::array();
  for (const Int& v : set) members.push_back(int_to_json(v));
  Json j;
  j["set"] = std::move(members);
  j["count"] = set.size();
  j["bound"] = format_rat(bound);
  j["pass"] = Rat(Int(set.size())) <= bound;
  emit(c.out, dump(j));
  return kExitOk;
}

int run_nt_xset(const Ctx& c) {
  const Int xi = parse_int(c.args.at(0)), rho = parse_int(c.args.at(1));
  const Int b = parse_int(c.args.at(2)), s = parse_int(c.args.at(3));
  const std::int64_t k = parse_int(c.args.at(4)).convert_to<std::int64_t>();
  const auto set = residue_hit_set(xi, rho, b, s, k);
  const Rat bound = residue_hit_bound(xi, b, s, k);
  Json members = Json::array();
  for (const Int& u : set) members.push_back(int_to_json(u));
  Json j;
  j["set"] = std::move(members);
  j["count"] = set.size();
  j["bound"] = format_rat(bound);
  j["pass"] = Rat(Int(set.size())) <= bound;
  emit(c.out, dump(j));
  return kExitOk;
}

int run_nt_eset(const Ctx& c) {
  const Int xi = parse_int(c.args.at(0)), b = parse_int(c.args.at(1));
  const Int s = parse_int(c.args.at(2));
  const std::int64_t ell = parse_int(c.args.at(3)).convert_to<std::int64_t>();
  const std::int64_t ellp = parse_int(c.args.at(4)).convert_to<std::int64_t>();
  const double kap =
      c.has_kap ? c.kap : kappa(s.convert_to<std::int64_t>());
  const auto set = bad_block_set(xi, b, s, ell, ellp, kap);
  const double bound = bad_block_bound(xi, b, s, ell, ellp, kap);
  Json members = Json::array();
  for (const Int& u : set) members.push_back(int_to_json(u));
  Json j;
  j["set"] = std::move(members);
  j["count"] = set.size();
  j["kappa"] = kap;
  j["bound"] = bound;
  j["pass"] = static_cast<double>(set.size()) <= bound;
  emit(c.out, dump(j));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// certify: precondition-gated invariant suites.
// ---------------------------------------------------------------------------

struct SuiteResult {
  std::string name;
  std::string status;  // "pass", "fail", or "skipped"
  std::string reason;
};

SuiteResult certify_mass(const Schedule& sched, const Ctx& c) {
  SuiteResult r{"mass", "pass", ""};
  BuildOptions opt;
  opt.leaf_budget = c.leaf_budget;
  opt.bit_budget = c.bit_budget;
  std::size_t checked = 0;
  for (std::size_t m = 1; m <= sched.depth(); ++m) {
    StageMeasure meas;
    try {
      meas = build(sched, m, opt);
    } catch (const std::overflow_error&) {
      break;
    }
    if (meas.total_mass() != Rat(1)) {
      r.status = "fail";
      r.reason = "total mass differs from 1 at stage " + std::to_string(m);
      return r;
    }
    ++checked;
  }
  if (checked == 0) {
    r.status = "skipped";
    r.reason = "no stage fits the enumeration budget";
  } else {
    r.reason = "exact through stage " + std::to_string(checked);
  }
  return r;
}

SuiteResult certify_digit(const Schedule& sched, const Ctx& c) {
  SuiteResult r{"digit", "pass", ""};
  BuildOptions opt;
  opt.leaf_budget = c.leaf_budget;
  opt.bit_budget = c.bit_budget;
  std::size_t checked = 0;
  for (std::size_t m = 1; m <= sched.depth(); ++m) {
    StageMeasure meas;
    try {
      meas = build(sched, m, opt);
    } catch (const std::overflow_error&) {
      break;
    }
    if (favoured_mass(meas) != digit_event_mass(sched, m, c.bit_budget)) {
      r.status = "fail";
      r.reason = "aggregate differs from closed formula at stage " +
                 std::to_string(m);
      return r;
    }
    ++checked;
  }
  if (checked == 0) {
    r.status = "skipped";
    r.reason = "no stage fits the enumeration budget";
  } else {
    r.reason = "exact through stage " + std::to_string(checked);
  }
  return r;
}

SuiteResult certify_factorization(const Schedule& sched, const Ctx& c) {
  SuiteResult r{"factorization", "pass", ""};
  BuildOptions opt;
  opt.leaf_budget = c.leaf_budget;
  opt.bit_budget = c.bit_budget;
  std::size_t checked = 0;
  StageMeasure parent;
  try {
    parent = build(sched, 0, opt);
  } catch (const std::overflow_error&) {
    parent = StageMeasure{};
  }
  for (std::size_t M = 1; M <= sched.depth(); ++M) {
    StageMeasure full;
    try {
      full = build(sched, M, opt);
    } catch (const std::overflow_error&) {
      break;
    }
    for (Int xi = -200; xi <= 200; xi += 13) {
      const Cplx direct = gamma_direct(sched, full, xi, c.bit_budget);
      const Cplx fact =
          gamma_factorized(sched, M, parent, xi, c.bit_budget);
      if (std::abs(direct - fact) > 1e-9) {
        r.status = "fail";
        r.reason = "identity breaks at stage " + std::to_string(M) +
                   ", frequency " + xi.str();
        return r;
      }
    }
    parent = std::move(full);
    ++checked;
  }
  if (checked == 0) {
    r.status = "skipped";
    r.reason = "no stage fits the enumeration budget";
  } else {
    r.reason = "|direct - factorized| <= 1e-9 through stage " +
               std::to_string(checked);
  }
  return r;
}

SuiteResult certify_envelope(const Schedule& sched, const Ctx& c) {
  SuiteResult r{"envelope", "pass", ""};
  if (sched.depth() < 2) {
    r.status = "skipped";
    r.reason = "band structure needs at least two stages";
    return r;
  }
  const ValidationReport rep = validate(sched);
  if (!rep.growth3.pass) {
    std::string stages;
    for (std::size_t m : rep.growth3.failed_stages) {
      if (!stages.empty()) stages += ",";
      stages += std::to_string(m);
    }
    r.status = "skipped";
    r.reason = "cubic growth hypothesis fails at stage " + stages +
               "; envelope bound not applicable";
    return r;
  }
  const std::size_t M = c.stage ? c.stage : 2;
  const Int xi_max = c.xi_max.empty() ? Int(10'000) : parse_int(c.xi_max);
  const EnvelopeReport env =
      envelope_scan(sched, M, xi_max, eval_options(c), c.threads);
  for (const BandStats& b : env.bands) {
    if (!std::isfinite(b.max_ratio) || b.max_ratio > 10.0) {
      r.status = "fail";
      r.reason = "band " + std::to_string(b.band) + " ratio " +
                 format_double(b.max_ratio) + " exceeds 10";
      return r;
    }
  }
  r.reason = "all band ratios within 10 up to frequency " + xi_max.str();
  return r;
}

int run_certify(const Ctx& c) {
  const Schedule sched = load(c);
  std::vector<std::string> names = c.suites;
  if (names.empty()) names = {"mass", "digit", "factorization", "envelope"};
  std::vector<SuiteResult> results;
  for (const std::string& name : names) {
    if (name == "mass")
      results.push_back(certify_mass(sched, c));
    else if (name == "digit")
      results.push_back(certify_digit(sched, c));
    else if (name == "factorization")
      results.push_back(certify_factorization(sched, c));
    else if (name == "envelope")
      results.push_back(certify_envelope(sched, c));
    else
      throw std::invalid_argument("unknown suite: " + name);
  }
  bool ok = true;
  Json suites = Json::array();
  for (const SuiteResult& r : results) {
    ok = ok && r.status != "fail";
    Json jr;
    jr["name"] = r.name;
    jr["status"] = r.status;
    if (!r.reason.empty()) jr["reason"] = r.reason;
    suites.push_back(std::move(jr));
  }
  Json j;
  j["meta"] = meta_json(schedule_hash(sched), std::nullopt);
  j["suites"] = std::move(suites);
  j["pass"] = ok;
  emit(c.out, dump(j));
  return ok ? kExitOk : kExitFail;
}

// ---------------------------------------------------------------------------
// Wiring.
// ---------------------------------------------------------------------------

void add_config(CLI::App* sub, Ctx& c) {
  sub->add_option("config", c.config, "schedule config JSON (stage list or generator spec)")
      ->required();
}

void add_out(CLI::App* sub, Ctx& c) {
  sub->add_option("--out", c.out, "output path (default: stdout)");
}

void add_budgets(CLI::App* sub, Ctx& c) {
  sub->add_option("--leaf-budget", c.leaf_budget,
                  "largest leaf count enumerated exactly")
      ->check(CLI::PositiveNumber);
  sub->add_option("--bit-budget", c.bit_budget,
                  "largest integer bit length materialized")
      ->check(CLI::PositiveNumber);
}

const char* kSpectrumColumns =
    "CSV columns: xi (integer frequency); re, im (coefficient at xi); abs "
    "(modulus); band (index m with Q_m < |xi| <= Q_{m+1}, 0 below the first "
    "band); subband (1 while xi^2 <= s_m^{b_m} s_{m+1}^{a_{m+1}}, else 2, 0 "
    "outside bands); envelope_bound (eps_m + eps_{m+1} + tau_m + tau_{m+1} + "
    "N_{m+1}^{-1/2} for the row's band, 1.0 outside); method (direct = exact "
    "enumeration, delta = stage-cut approximation); error_budget (C0 min(1, "
    "|xi| s_{cut+1}^{-a_{cut+1}}) on the delta route, 0 when exact).";

const char* kDelColumns =
    "CSV columns: N (outer cutoff); inner_sum (N + 2 Re sum over u < v < N "
    "of the coefficient at h b^u (b^{v-u} - 1)); partial_sum (running sum of "
    "inner_sum / N^3). With --split-stage: inner_abs, partial_abs "
    "(absolute-value variants) and u_inner, u_partial, v_inner, v_partial "
    "(contributions of the two increment halves at the split stage).";

const char* kSampleColumns =
    "CSV columns: value (exact position, decimal truncated to 30 fractional "
    "digits); lineage (per stage 'k:l' with k the equal-split child and l "
    "the digit index, semicolon-joined).";

const char* kLeafColumns =
    "CSV columns: left (leaf left endpoint, exact 'p/q'); weight (leaf mass, "
    "exact 'p/q'); favoured (1 when every stage chose a favoured digit); "
    "lineage (per stage 'k:l', semicolon-joined).";

}  // namespace

int main(int argc, char** argv) {
  Ctx c;
  CLI::App app{
      "skewmeas: finite stages of a skewed self-similar measure family — "
      "exact builds, Fourier coefficient scans, decay envelopes, ball-mass "
      "ratios, and the supporting number-theoretic certificates. All "
      "artifacts are byte-deterministic for a fixed config and seed and "
      "carry tool version, schema version, schedule hash, and seed in their "
      "headers."};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));
  app.footer(
      "Exit codes: 0 ok, 1 validation/certification failure, 2 budget "
      "exceeded, 3 I/O error. SKEWMEAS_THREADS caps worker threads unless "
      "--threads is given.");

  int (*handler)(const Ctx&) = nullptr;
  auto set = [&handler](int (*fn)(const Ctx&)) {
    return [&handler, fn]() { handler = fn; };
  };

  auto* validate_cmd = app.add_subcommand(
      "validate", "Check a schedule against the admissibility hypotheses");
  add_config(validate_cmd, c);
  add_out(validate_cmd, c);
  validate_cmd->callback(set(run_validate));

  auto* build_cmd = app.add_subcommand(
      "build", "Materialize a stage measure as an exact leaf table");
  add_config(build_cmd, c);
  build_cmd->add_option("--stage", c.stage, "stage to materialize")
      ->required();
  add_budgets(build_cmd, c);
  add_out(build_cmd, c);
  build_cmd->footer(kLeafColumns);
  build_cmd->callback(set(run_build));

  auto* spectrum_cmd = app.add_subcommand(
      "spectrum", "Fourier coefficients over an integer frequency range");
  add_config(spectrum_cmd, c);
  spectrum_cmd->add_option("--stage", c.stage, "stage whose density is transformed")
      ->required();
  spectrum_cmd->add_option("--xi-max", c.xi_max, "largest frequency")
      ->required();
  spectrum_cmd->add_option("--xi-min", c.xi_min,
                           "smallest frequency (default 0; may be negative)");
  spectrum_cmd->add_option("--xi-step", c.xi_step, "frequency stride")
      ->check(CLI::PositiveNumber);
  spectrum_cmd->add_option(
      "--method", c.method,
      "auto | direct (exact enumeration) | delta (forced stage cut)");
  spectrum_cmd->add_option("--delta-from", c.delta_from,
                           "enumeration cut for --method delta");
  add_budgets(spectrum_cmd, c);
  add_out(spectrum_cmd, c);
  spectrum_cmd->footer(kSpectrumColumns);
  spectrum_cmd->callback(set(run_spectrum));

  auto* envelope_cmd = app.add_subcommand(
      "envelope", "Per-band coefficient maxima against the decay envelope");
  add_config(envelope_cmd, c);
  envelope_cmd->add_option("--stage", c.stage, "stage whose density is scanned")
      ->required();
  envelope_cmd->add_option("--xi-max", c.xi_max, "scan cap (clipped to the last band)")
      ->required();
  envelope_cmd->add_option("--threads", c.threads,
                           "worker threads (default: SKEWMEAS_THREADS or hardware)");
  envelope_cmd->add_option("--method", c.method,
                           "auto | direct | delta (see spectrum)");
  envelope_cmd->add_option("--rows", c.rows_out,
                           "also write every scanned row as spectrum CSV");
  add_budgets(envelope_cmd, c);
  add_out(envelope_cmd, c);
  envelope_cmd->footer(kSpectrumColumns);
  envelope_cmd->callback(set(run_envelope));

  auto* frostman_cmd = app.add_subcommand(
      "frostman", "Ball-mass ratios at exponent eta (basic, intermediate, window scan)");
  add_config(frostman_cmd, c);
  frostman_cmd->add_option("--stage", c.stage, "stage to analyse")->required();
  frostman_cmd->add_option("--eta", c.eta, "Frostman exponent, rational p/q in (0,1)");
  frostman_cmd->add_option("--window-depth", c.window_depth,
                           "dyadic window refinement depth (0..30)");
  add_budgets(frostman_cmd, c);
  add_out(frostman_cmd, c);
  frostman_cmd->callback(set(run_frostman));

  auto* sample_cmd = app.add_subcommand(
      "sample", "Draw seeded points from a stage law");
  add_config(sample_cmd, c);
  sample_cmd->add_option("--stage", c.stage, "stage law to sample")->required();
  sample_cmd->add_option("--count", c.count, "number of points")->required();
  sample_cmd->add_option("--seed", c.seed, "RNG seed (mandatory)")->required();
  add_budgets(sample_cmd, c);
  add_out(sample_cmd, c);
  sample_cmd->footer(kSampleColumns);
  sample_cmd->callback(set(run_sample));

  auto* digit_cmd = app.add_subcommand(
      "digit-bias", "Digit frequencies of seeded samples at chosen positions");
  add_config(digit_cmd, c);
  digit_cmd->add_option("--stage", c.stage, "stage law to sample")->required();
  digit_cmd->add_option("--count", c.count, "number of points")->required();
  digit_cmd->add_option("--seed", c.seed, "RNG seed (mandatory)")->required();
  digit_cmd->add_option("--positions", c.positions, "digit positions (1-based)")
      ->required()
      ->delimiter(',');
  digit_cmd->add_option("--block-len", c.block_len,
                        "joint block length over consecutive listed positions");
  digit_cmd->add_option("--base", c.digit_base,
                        "digit base (default: base of the sampled stage)");
  add_budgets(digit_cmd, c);
  add_out(digit_cmd, c);
  digit_cmd->callback(set(run_digit_bias));

  auto* weyl_cmd = app.add_subcommand(
      "weyl", "Orbit exponential average (1/N) sum e(h x b^n)");
  weyl_cmd->add_option("--x", c.x, "starting point, rational p/q")->required();
  weyl_cmd->add_option("--base", c.base, "orbit base b >= 2")->required();
  weyl_cmd->add_option("--mult", c.h, "frequency multiplier h");
  weyl_cmd->add_option("--n", c.n, "number of orbit terms");
  weyl_cmd->add_flag("--approx", c.approx,
                     "floating-point orbit instead of the exact rational one");
  add_out(weyl_cmd, c);
  weyl_cmd->callback(set(run_weyl));

  auto* del_cmd = app.add_subcommand(
      "del", "Triple-series partial sums of orbit correlations");
  add_config(del_cmd, c);
  del_cmd->add_option("--stage", c.stage, "stage whose coefficients are used")
      ->required();
  del_cmd->add_option("--n-max", c.n_max, "outer cutoff")->required();
  del_cmd->add_option("--mult", c.h, "frequency multiplier h");
  del_cmd->add_option("--base", c.base, "orbit base b >= 2");
  del_cmd->add_option("--split-stage", c.split_stage,
                      "emit increment-split columns at this stage");
  add_budgets(del_cmd, c);
  add_out(del_cmd, c);
  del_cmd->footer(kDelColumns);
  del_cmd->callback(set(run_del));

  auto* classify_cmd = app.add_subcommand(
      "classify", "Place a correlation index (u, v, N) in the exceptional-set hierarchy");
  add_config(classify_cmd, c);
  classify_cmd->add_option("--stage", c.stage, "stage whose cutoffs apply")
      ->required();
  classify_cmd->add_option("--u", c.u, "first exponent")->required();
  classify_cmd->add_option("--v", c.v, "second exponent (u < v < N)")->required();
  classify_cmd->add_option("--n", c.nval, "outer cutoff N")->required();
  classify_cmd->add_option("--mult", c.h, "frequency multiplier h");
  classify_cmd->add_option("--base", c.base, "orbit base b >= 2")->required();
  auto* kflag = classify_cmd->add_option(
      "--k", c.k_opt, "normality shape parameter (default: derived from the stage)");
  add_budgets(classify_cmd, c);
  add_out(classify_cmd, c);
  classify_cmd->callback([&c, &handler, kflag]() {
    c.has_k = kflag->count() > 0;
    handler = run_classify;
  });

  auto* nt_cmd = app.add_subcommand("nt", "Standalone number-theoretic queries");
  nt_cmd->require_subcommand(1);
  struct NtSpec {
    const char* name;
    const char* desc;
    std::vector<const char*> pos;
    int (*fn)(const Ctx&);
    bool kappa_flag;
  };
  const std::vector<NtSpec> nt_specs = {
      {"factor", "Prime factorization as JSON", {"n"}, run_nt_factor, false},
      {"ord", "Multiplicative order of a modulo m (prints the order)",
       {"a", "m"}, run_nt_ord, false},
      {"kappa", "Digit-pair density constant for base s", {"s"}, run_nt_kappa,
       false},
      {"dset",
       "Count of length-ell digit strings with at most kappa*ell non-extreme "
       "pairs, with its cardinality bound",
       {"s", "ell"}, run_nt_dset, true},
      {"oset",
       "{v in Z_N : p^k divides b^v - 1} with its cardinality bound",
       {"N", "k", "p", "b"}, run_nt_oset, false},
      {"xset",
       "{u in Z_{s^k} : xi (b^u)_s' = rho mod s^k} with its cardinality bound",
       {"xi", "rho", "b", "s", "k"}, run_nt_xset, false},
      {"eset",
       "{u in Z_{s^ell} : digit window ell'..ell-1 of xi (b^u)_s' has at most "
       "kappa*(ell-ell') non-extreme pairs} with its cardinality bound",
       {"xi", "b", "s", "ell", "ellp"}, run_nt_eset, true},
  };
  for (const NtSpec& spec : nt_specs) {
    auto* sub = nt_cmd->add_subcommand(spec.name, spec.desc);
    sub->add_option("args", c.args, "positional arguments")
        ->expected(static_cast<int>(spec.pos.size()));
    CLI::Option* kap_flag = nullptr;
    if (spec.kappa_flag)
      kap_flag = sub->add_option("--kappa", c.kap,
                                 "override the density constant");
    add_out(sub, c);
    auto fn = spec.fn;
    sub->callback([&c, &handler, fn, kap_flag]() {
      c.has_kap = kap_flag && kap_flag->count() > 0;
      handler = fn;
    });
  }

  auto* certify_cmd = app.add_subcommand(
      "certify", "Run precondition-gated invariant suites and report pass/fail");
  add_config(certify_cmd, c);
  certify_cmd
      ->add_option("--suite", c.suites,
                   "suites to run: mass, digit, factorization, envelope "
                   "(default: all; suites whose preconditions fail are "
                   "skipped with a reason)")
      ->delimiter(',');
  certify_cmd->add_option("--stage", c.stage,
                          "stage for the envelope suite (default 2)");
  certify_cmd->add_option("--xi-max", c.xi_max,
                          "envelope scan cap (default 10000)");
  certify_cmd->add_option("--threads", c.threads, "worker threads");
  add_budgets(certify_cmd, c);
  add_out(certify_cmd, c);
  certify_cmd->callback(set(run_certify));

  try {
    app.parse(argc, argv);
    if (!handler) return kExitOk;
    return handler(c);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << error_json("usage", e.what()) << "\n";
    return kExitFail;
  } catch (const std::overflow_error& e) {
    std::cerr << error_json("budget", e.what()) << "\n";
    return kExitBudget;
  } catch (const Json::exception& e) {
    std::cerr << error_json("validation", e.what()) << "\n";
    return kExitFail;
  } catch (const std::invalid_argument& e) {
    std::cerr << error_json("validation", e.what()) << "\n";
    return kExitFail;
  } catch (const std::domain_error& e) {
    std::cerr << error_json("validation", e.what()) << "\n";
    return kExitFail;
  } catch (const std::runtime_error& e) {
    std::cerr << error_json("io", e.what()) << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << error_json("internal", e.what()) << "\n";
    return kExitFail;
  }
}
