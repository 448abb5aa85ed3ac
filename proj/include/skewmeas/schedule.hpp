#pragma once
// Parameter vectors for the skewed-measure construction: per-stage bases,
// exponent pairs, favoured digit sets and bias weights, plus derived
// quantities, machine-checkable hypothesis validators, and the two
// built-in schedule generators (cycling-base and factorial-growth).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bigpow.hpp"

namespace skewmeas {

struct DigitSet {
  std::int64_t base = 0;
  std::vector<std::int64_t> members;  // sorted, unique, in [0, base)

  bool contains(std::int64_t d) const {
    return std::binary_search(members.begin(), members.end(), d);
  }
  bool has_zero() const { return contains(0); }
  bool excludes_top() const { return !contains(base - 1); }
  bool has_zero_one() const { return contains(0) && contains(1); }
  std::int64_t size() const { return static_cast<std::int64_t>(members.size()); }

  void check() const {
    if (base < 2) throw std::invalid_argument("digit set: base must be >= 2");
    if (members.empty()) throw std::invalid_argument("digit set: empty");
    if (!std::is_sorted(members.begin(), members.end()) ||
        std::adjacent_find(members.begin(), members.end()) != members.end())
      throw std::invalid_argument("digit set: members must be sorted and unique");
    if (members.front() < 0 || members.back() >= base)
      throw std::invalid_argument("digit set: member out of range");
    if (size() >= base)
      throw std::invalid_argument("digit set: must be a strict subset");
  }
};

inline DigitSet make_digit_set(std::int64_t base, std::vector<std::int64_t> members) {
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  DigitSet d{base, std::move(members)};
  d.check();
  return d;
}

struct StageParams {
  std::int64_t s = 0;  // base
  Int a, b;            // exponent pair, a < b
  DigitSet digits;     // favoured digits over Z_s
  Rat eps;             // bias weight in (0, 1]

  // Derived (filled by derive_stage_quantities).
  bool has_N = false;
  Int N;        // child count of the equal split; N+1 = floor(s^a / t)
  double Q = 0;    // s^{(a+b)/2}, reporting only (may overflow to inf)
  double tau = 0;  // s^{(a-b)/2}, reporting only
  double lg2_Q = 0;

  std::int64_t r() const { return digits.size(); }
  double log2_s() const { return std::log2(static_cast<double>(s)); }

  const Int& N_or_throw() const {
    if (!has_N) throw std::logic_error("stage N not materialized (over budget)");
    return N;
  }
};

struct Schedule {
  std::vector<StageParams> stages;
  std::string provenance = "custom";
  Rat C0 = 100;  // global comparison constant used in reported bounds

  std::size_t depth() const { return stages.size(); }
  const StageParams& stage(std::size_t m) const {  // 1-based
    if (m == 0 || m > stages.size()) throw std::out_of_range("stage index");
    return stages[m - 1];
  }
  // Grid denominator entering stage m: t = s_{m-1}^{b_{m-1}}, t = 1 at m = 1.
  Int grid_denominator(std::size_t m, std::size_t bit_budget = (1u << 20)) const {
    if (m <= 1) return 1;
    const StageParams& p = stage(m - 1);
    return ipow_checked(Int(p.s), p.b, bit_budget);
  }
  // Occurrence indices (1-based stages) per base value.
  std::map<std::int64_t, std::vector<std::size_t>> occurrences() const {
    std::map<std::int64_t, std::vector<std::size_t>> occ;
    for (std::size_t i = 0; i < stages.size(); ++i) occ[stages[i].s].push_back(i + 1);
    return occ;
  }
};

// ---------------------------------------------------------------------------
// Derived quantities.

// Fills N (when materializable under the bit budget), Q, tau for every stage.
// Rejects any stage whose equal-split child count would vanish.
inline void derive_stage_quantities(Schedule& sched,
                                    std::size_t bit_budget = (1u << 20)) {
  for (std::size_t m = 1; m <= sched.depth(); ++m) {
    StageParams& p = sched.stages[m - 1];
    if (p.s < 3) throw std::invalid_argument("stage base must be >= 3");
    if (p.a < 1 || !(p.a < p.b))
      throw std::invalid_argument("stage exponents must satisfy 1 <= a < b");
    p.digits.check();
    if (p.digits.base != p.s)
      throw std::invalid_argument("digit set base mismatch");
    if (p.eps <= 0 || p.eps > 1)
      throw std::invalid_argument("eps must lie in (0, 1]");

    // floor(s^a / t) >= 2  <=>  s^a >= 2 t, checked without materializing.
    const std::int64_t ps = m >= 2 ? sched.stages[m - 2].s : 1;
    const Int pb = m >= 2 ? sched.stages[m - 2].b : Int(0);
    if (pow_cmp(Int(2), Int(ps), pb, Int(1), Int(p.s), p.a) > 0)
      throw std::invalid_argument("equal split would have no children (s^a < 2t)");

    p.has_N = false;
    if (pow_fits(Int(p.s), p.a, bit_budget) && pow_fits(Int(ps), pb, bit_budget)) {
      const Int t = m >= 2 ? ipow_checked(Int(ps), pb, bit_budget) : Int(1);
      p.N = floor_div(ipow_checked(Int(p.s), p.a, bit_budget), t) - 1;
      p.has_N = true;
    }

    const double ad = p.a.convert_to<double>();
    const double bd = p.b.convert_to<double>();
    p.lg2_Q = 0.5 * (ad + bd) * p.log2_s();
    p.Q = std::exp2(p.lg2_Q);
    p.tau = std::exp2(-0.5 * (bd - ad) * p.log2_s());
  }
}

// ---------------------------------------------------------------------------
// Validation.

struct CheckResult {
  bool pass = true;
  std::vector<std::size_t> failed_stages;  // 1-based
  std::string note;

  void fail(std::size_t m) {
    pass = false;
    failed_stages.push_back(m);
  }
};

struct ValidationReport {
  CheckResult abs;            // a < b and 2 s_{m-1}^{b_{m-1}} < s_m^{a_m}
  CheckResult digit_basic;    // 0 in D_m, s_m - 1 not in D_m
  CheckResult ratio_to_zero;  // a_m / b_m strictly decreasing
  CheckResult growth3;        // s_{m-1}^{3 b_{m-1}} < s_m^{a_m}
  CheckResult growth16;       // 16 s_{m-1}^{b_{m-1}} < s_m^{a_m} (m >= 2)
  CheckResult divergence;     // sum of eps over each base's occurrences
  CheckResult frostman_size;  // #D_m * C0 >= s_m
  std::optional<CheckResult> normality_shape;
  std::map<std::int64_t, Rat> divergence_sums;

  bool all_pass() const {
    bool ok = abs.pass && digit_basic.pass && ratio_to_zero.pass &&
              growth3.pass && growth16.pass && divergence.pass &&
              frostman_size.pass;
    if (normality_shape) ok = ok && normality_shape->pass;
    return ok;
  }
};

struct ValidateOptions {
  std::optional<Rat> divergence_threshold;  // per-base partial-sum floor
  Rat C0 = 100;
};

inline ValidationReport validate(const Schedule& sched,
                                 const ValidateOptions& opt = {}) {
  ValidationReport rep;
  for (std::size_t m = 1; m <= sched.depth(); ++m) {
    const StageParams& p = sched.stage(m);
    const std::int64_t ps = m >= 2 ? sched.stage(m - 1).s : 1;
    const Int pb = m >= 2 ? sched.stage(m - 1).b : Int(0);

    if (!(p.a < p.b) ||
        pow_cmp(Int(2), Int(ps), pb, Int(1), Int(p.s), p.a) >= 0)
      rep.abs.fail(m);

    if (!p.digits.has_zero() || !p.digits.excludes_top()) rep.digit_basic.fail(m);

    if (m >= 2) {
      const StageParams& q = sched.stage(m - 1);
      // a_m / b_m < a_{m-1} / b_{m-1}  <=>  a_m b_{m-1} < a_{m-1} b_m.
      if (!(p.a * q.b < q.a * p.b)) rep.ratio_to_zero.fail(m);
      if (pow_cmp(Int(16), Int(ps), pb, Int(1), Int(p.s), p.a) >= 0)
        rep.growth16.fail(m);
    }

    if (pow_cmp(Int(1), Int(ps), 3 * pb, Int(1), Int(p.s), p.a) >= 0)
      rep.growth3.fail(m);

    if (Rat(p.digits.size()) * opt.C0 < Rat(p.s)) rep.frostman_size.fail(m);
  }

  for (const auto& [base, idx] : sched.occurrences()) {
    Rat sum = 0;
    for (std::size_t m : idx) sum += sched.stage(m).eps;
    rep.divergence_sums[base] = sum;
    if (opt.divergence_threshold && sum < *opt.divergence_threshold) {
      rep.divergence.pass = false;
      rep.divergence.note = "partial sum below threshold for base " +
                            std::to_string(base);
    }
  }
  if (!opt.divergence_threshold)
    rep.divergence.note = "no threshold supplied; partial sums reported only";
  return rep;
}

// ---------------------------------------------------------------------------
// Multiplicative dependence and class representatives.

// True iff r^m = s^n has a solution: prime supports equal and exponent
// vectors proportional.
inline bool mult_dependent(const Int& r, const Int& s) {
  if (r < 2 || s < 2) throw std::invalid_argument("bases must be >= 2");
  const auto fr = factor_map(r), fs = factor_map(s);
  if (fr.size() != fs.size()) return false;
  auto it_r = fr.begin();
  auto it_s = fs.begin();
  const Int er0 = it_r->second, es0 = it_s->second;
  for (; it_r != fr.end(); ++it_r, ++it_s) {
    if (it_r->first != it_s->first) return false;
    if (it_r->second * es0 != it_s->second * er0) return false;
  }
  return true;
}

// The primitive root of a base: smallest g with n = g^k for some k >= 1.
inline Int primitive_root_base(const Int& n) {
  const auto f = factor_map(n);
  Int g = 0;  // gcd of exponents
  for (const auto& [p, e] : f) g = boost::multiprecision::gcd(g, e);
  Int root = 1;
  for (const auto& [p, e] : f) root *= ipow_checked(p, e / g);
  return root;
}

// One representative per dependence class: the smallest power of the class
// root that is >= 3.
inline std::vector<Int> minimal_representation(std::vector<Int> bases) {
  std::set<Int> reps;
  for (const Int& n : bases) {
    Int g = primitive_root_base(n);
    reps.insert(g >= 3 ? g : g * g);
  }
  return {reps.begin(), reps.end()};
}

// ---------------------------------------------------------------------------
// Generators.

// Dyadic block index: stage m belongs to block j iff 2^j - 1 <= m <= 2^{j+1}-2.
inline unsigned block_index(std::size_t m) {
  unsigned j = 0;
  std::size_t v = m + 1;
  while (v >>= 1) ++j;
  return j;
}

// Smallest a with s^a > x  (x >= 1).
inline Int min_exponent_above(const Int& x, std::int64_t s) {
  if (x < s) return 1;
  return digit_count(x, Int(s));
}

struct Table1Options {
  std::vector<Rat> eps_seq;  // e_j per block; default e_j = 1/(j+1)
  Int gap = 1;               // b_m = a_m + gap
  std::size_t bit_budget = (1u << 20);
};

// Cycling-base schedule: block j uses bases C with index m - 2^j + 2
// (wrapped modulo |C|), bias e_j, favoured digits {0,1}; exponents chosen
// minimally so every growth hypothesis holds.
inline Schedule make_table1_schedule(const std::vector<std::int64_t>& C,
                                     std::size_t depth,
                                     const Table1Options& opt = {}) {
  if (C.empty()) throw std::invalid_argument("base list must be nonempty");
  for (std::int64_t t : C)
    if (t < 3) throw std::invalid_argument("bases must be >= 3");
  Schedule sched;
  sched.provenance = "table1";
  Int t_prev = 1;
  for (std::size_t m = 1; m <= depth; ++m) {
    const unsigned j = block_index(m);
    const std::size_t i = (m - ((std::size_t{1} << j) - 1)) % C.size();
    StageParams p;
    p.s = C[i];
    p.eps = j - 1 < opt.eps_seq.size() ? opt.eps_seq[j - 1] : Rat(1, j + 1);
    p.digits = make_digit_set(p.s, {0, 1});
    const Int lin = Int(16) * t_prev, cub = t_prev * t_prev * t_prev;
    const Int lower = std::max(lin, cub);
    p.a = min_exponent_above(lower, p.s);
    p.b = p.a + opt.gap;
    sched.stages.push_back(std::move(p));
    t_prev = ipow_checked(Int(sched.stages.back().s), sched.stages.back().b,
                          opt.bit_budget);
  }
  derive_stage_quantities(sched, opt.bit_budget);
  return sched;
}

struct AppendixOptions {
  Int exponent_budget = Int(1) << 60;  // largest allowed b_m
  std::size_t bit_budget = (1u << 20);
};

// Factorial-growth schedule: single favoured digit {0}, bias 1/j on block j;
// first A0^2 stages use base 3 with a = 3^m - 2, b = 3^m - 1; later stages
// cycle through bases 3,4,5,... with a = A0 * m! * ceil(sqrt(m)), b = (m+1)!.
inline Schedule make_appendix_schedule(std::int64_t A0, std::size_t depth,
                                       const AppendixOptions& opt = {}) {
  if (A0 < 4) throw std::invalid_argument("A0 must be >= 4");
  if (depth < 1) throw std::invalid_argument("depth must be >= 1");
  Schedule sched;
  sched.provenance = "appendix";
  Int factorial = 1;  // m!
  for (std::size_t m = 1; m <= depth; ++m) {
    factorial *= Int(m);
    StageParams p;
    const unsigned j = block_index(m);
    p.eps = Rat(1, j);
    if (static_cast<std::int64_t>(m) <= A0 * A0) {
      p.s = 3;
      const Int pw = ipow_checked(Int(3), Int(m), opt.bit_budget);
      p.a = pw - 2;
      p.b = pw - 1;
    } else {
      const std::size_t i = m - ((std::size_t{1} << j) - 1);  // 0-based offset
      p.s = static_cast<std::int64_t>(i + 1) + 2;  // bases 3,4,5,... in order
      // ceil(A0 sqrt(m)): the tightest integer multiplier preserving both
      // the growth floor A0 m! sqrt(m) and a < b (since A0 sqrt(m) < m here).
      Int c = boost::multiprecision::sqrt(Int(A0) * A0 * Int(m));
      if (c * c < Int(A0) * A0 * Int(m)) ++c;
      p.a = factorial * c;
      p.b = factorial * Int(m + 1);
    }
    if (p.b > opt.exponent_budget)
      throw std::overflow_error("appendix schedule: exponent budget exceeded");
    p.digits = make_digit_set(p.s, {0});
    sched.stages.push_back(std::move(p));
  }
  derive_stage_quantities(sched, opt.bit_budget);
  return sched;
}

// {sum d_l t^l : d_l in D_t, l < n} as a digit set over Z_{t^n}.
inline DigitSet lift_digit_set(const DigitSet& D_t, std::int64_t n,
                               std::size_t budget = 1'000'000) {
  if (n < 1) throw std::invalid_argument("lift: n must be >= 1");
  const Int big = ipow_checked(Int(D_t.base), Int(n), 64);
  if (big > Int(std::int64_t{1} << 62))
    throw std::overflow_error("lift: base t^n too large");
  std::vector<std::int64_t> vals{0};
  std::int64_t scale = 1;
  for (std::int64_t l = 0; l < n; ++l) {
    if (vals.size() * D_t.members.size() > budget)
      throw std::overflow_error("lift: enumeration budget exceeded");
    std::vector<std::int64_t> next;
    next.reserve(vals.size() * D_t.members.size());
    for (std::int64_t v : vals)
      for (std::int64_t d : D_t.members) next.push_back(v + d * scale);
    vals = std::move(next);
    scale *= D_t.base;
  }
  return make_digit_set(big.convert_to<std::int64_t>(), std::move(vals));
}

// ---------------------------------------------------------------------------
// Growth-shape checks for normality-style schedules.

struct NormalityGrowthReport {
  CheckResult k1_floor;        // K_1 >= C0
  CheckResult log_growth;      // log K_m >= (m K_{m-1} s_{m-1})^{C0}
  CheckResult kappa_monotone;  // kappa_m K_m s_m^{-C0} strictly increasing
  CheckResult shape;           // a_m = s_m^{K_m^2}, b_m = 2 m a_m
  std::vector<double> kappa_values_log2;
};

// Exact comparison of ln(K) >= X via bit-length intervals; returns +1 pass,
// -1 fail, 0 indeterminate.
inline int ln_at_least(const Int& K, const Int& X) {
  // ln K >= X  <=>  log2 K >= X * log2(e).
  static const Rat log2e_lo(Int("1442695040888963407"), Int("1000000000000000000"));
  static const Rat log2e_hi(Int("1442695040888963408"), Int("1000000000000000000"));
  const Int bits(static_cast<std::uint64_t>(bit_length(K)));
  if (Rat(bits - 1) >= Rat(X) * log2e_hi) return 1;
  if (Rat(bits) <= Rat(X) * log2e_lo) return -1;
  return 0;
}

inline NormalityGrowthReport check_normality_growth(
    const Schedule& sched, const std::vector<Int>& K_seq, const Int& C0,
    const std::vector<double>& kappa_seq) {
  NormalityGrowthReport rep;
  if (K_seq.size() < sched.depth())
    throw std::invalid_argument("K sequence shorter than schedule");
  if (K_seq.empty() || K_seq[0] < C0) rep.k1_floor.fail(1);
  for (std::size_t m = 2; m <= sched.depth(); ++m) {
    const Int X = ipow_checked(Int(m) * K_seq[m - 2] * Int(sched.stage(m - 1).s),
                               C0, 1u << 24);
    const int verdict = ln_at_least(K_seq[m - 1], X);
    if (verdict <= 0) {
      rep.log_growth.fail(m);
      if (verdict == 0) rep.log_growth.note = "bit-length interval indeterminate";
    }
  }
  for (std::size_t m = 1; m <= sched.depth(); ++m) {
    const StageParams& p = sched.stage(m);
    const double kap = m - 1 < kappa_seq.size() ? kappa_seq[m - 1] : 0.0;
    const double lg = std::log2(kap) +
                      bit_length(K_seq[m - 1]) -  // log2 K to 1-bit accuracy
                      C0.convert_to<double>() * p.log2_s();
    rep.kappa_values_log2.push_back(lg);
    if (m >= 2 && lg <= rep.kappa_values_log2[m - 2]) rep.kappa_monotone.fail(m);
  }
  for (std::size_t m = 1; m <= sched.depth(); ++m) {
    const StageParams& p = sched.stage(m);
    // a_m must equal s^{K_m^2}: strip factors of s and compare exponents.
    Int e = 0, v = p.a;
    while (v % p.s == 0) {
      v /= p.s;
      ++e;
    }
    const bool a_ok = (v == 1) && (e == K_seq[m - 1] * K_seq[m - 1]);
    const bool b_ok = p.b == Int(2) * Int(m) * p.a;
    if (!a_ok || !b_ok) rep.shape.fail(m);
  }
  return rep;
}

}  // namespace skewmeas
