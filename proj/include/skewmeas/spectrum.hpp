#pragma once

// Fourier coefficients of the stage densities: direct phase sums over
// materialized stages, factorized approximants for deep stages, band-envelope
// scans, the u/v increment splits with their companion brackets, Weyl-orbit
// and triple-series diagnostics, and the index classifiers for pairs of
// expansion bases.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "skewmeas/construction.hpp"
#include "skewmeas/expsums.hpp"
#include "skewmeas/numtheory.hpp"
#include "skewmeas/parallel.hpp"

namespace skewmeas {

// ---------------------------------------------------------------------------
// Cached integer-phase view of a measure: every left endpoint (or snapped
// refinement origin) becomes a numerator over one common denominator, so a
// phase sum costs one modular product per leaf.

struct PhaseTable {
  Int denom = 1;
  std::vector<Int> num;
  std::vector<double> weight;
};

inline PhaseTable phase_table(const Schedule& sched, const StageMeasure& meas,
                              std::size_t bit_budget = 1u << 20) {
  PhaseTable t;
  t.denom = sched.grid_denominator(meas.M + 1, bit_budget);
  t.num.reserve(meas.leaves.size());
  t.weight.reserve(meas.leaves.size());
  for (const auto& leaf : meas.leaves) {
    const Rat pos = leaf.left * t.denom;
    if (boost::multiprecision::denominator(pos) != 1)
      throw std::logic_error("phase_table: leaf off the stage grid");
    t.num.push_back(boost::multiprecision::numerator(pos));
    t.weight.push_back(to_double(leaf.weight));
  }
  return t;
}

// Positions alpha(i) + eta(i) = m_hat(i) / s_m^{a_m} of the stage-m snap
// applied to every stage-(m-1) cell.
inline PhaseTable snap_phase_table(const Schedule& sched, std::size_t m,
                                   const StageMeasure& parent,
                                   std::size_t bit_budget = 1u << 20) {
  if (m < 1 || m > sched.depth())
    throw std::invalid_argument("snap_phase_table: stage out of range");
  if (parent.M + 1 != m)
    throw std::invalid_argument("snap_phase_table: parent must be stage m-1");
  const StageParams& p = sched.stage(m);
  PhaseTable t;
  t.denom = ipow_checked(Int(p.s), p.a, bit_budget);
  t.num.reserve(parent.leaves.size());
  t.weight.reserve(parent.leaves.size());
  for (const auto& leaf : parent.leaves) {
    t.num.push_back(rational_ceil(leaf.left * t.denom));
    t.weight.push_back(to_double(leaf.weight));
  }
  return t;
}

inline Cplx weighted_phase_sum(const PhaseTable& t, const Int& xi) {
  Int xr = xi % t.denom;
  if (xr < 0) xr += t.denom;
  const double den = t.denom.convert_to<double>();
  Cplx total = 0.0;
  for (std::size_t i = 0; i < t.num.size(); ++i) {
    Int r = (xr * t.num[i]) % t.denom;
    const double u = r.convert_to<double>() / den;
    total += t.weight[i] * Cplx(std::cos(2 * kPi * u), -std::sin(2 * kPi * u));
  }
  return total;
}

// ---------------------------------------------------------------------------
// Phase sums of the construction.

// Snap-corrected phase sum over the stage-(m-1) cells.
inline Cplx lambda_m(const Schedule& sched, std::size_t m,
                     const StageMeasure& parent, const Int& xi,
                     std::size_t bit_budget = 1u << 20) {
  return weighted_phase_sum(snap_phase_table(sched, m, parent, bit_budget), xi);
}

// Full enumeration of a materialized stage (oracle route).
inline Cplx gamma_direct(const Schedule& sched, const StageMeasure& meas,
                         const Int& xi, std::size_t bit_budget = 1u << 20) {
  return weighted_phase_sum(phase_table(sched, meas, bit_budget), xi);
}

// Exact per-stage identity: the stage-M phase sum equals the snapped
// stage-(M-1) sum times the scalar stage factor.
inline Cplx gamma_factorized(const Schedule& sched, std::size_t M,
                             const StageMeasure& parent, const Int& xi,
                             std::size_t bit_budget = 1u << 20) {
  return lambda_m(sched, M, parent, xi, bit_budget) *
         stage_factor(xi, sched.stage(M), bit_budget);
}

// Factorized approximant: enumerate only to stage m-1, then multiply the
// scalar stage factors of stages m..M.
inline Cplx delta_M(const Schedule& sched, std::size_t M, std::size_t m,
                    const StageMeasure& parent_of_m, const Int& xi,
                    std::size_t bit_budget = 1u << 20) {
  if (m < 1 || m > M || M > sched.depth())
    throw std::invalid_argument("delta_M: need 1 <= m <= M <= depth");
  Cplx val = lambda_m(sched, m, parent_of_m, xi, bit_budget);
  for (std::size_t r = m; r <= M; ++r)
    val *= stage_factor(xi, sched.stage(r), bit_budget);
  return val;
}

// Mean square of the stage density: sum of w^2 / leaf_length, exact.
inline Rat l2_norm_squared(const StageMeasure& meas) {
  Rat total = 0;
  for (const auto& leaf : meas.leaves) total += leaf.weight * leaf.weight;
  return total / meas.leaf_length;
}

// ---------------------------------------------------------------------------
// Bands.  Band m holds the frequencies with Q_m < |xi| <= Q_{m+1}, where
// Q_m^2 = s_m^{a_m+b_m}; membership is decided by exact integer comparison.

inline int band_index(const Schedule& sched, const Int& xi,
                      std::size_t bit_budget = 1u << 20) {
  const Int q = xi * xi;
  if (q == 0) return 0;
  for (std::size_t m = 1; m <= sched.depth(); ++m) {
    const StageParams& p = sched.stage(m);
    if (pow_cmp(q, 1, 0, 1, Int(p.s), p.a + p.b, bit_budget) <= 0)
      return static_cast<int>(m) - 1;
  }
  return static_cast<int>(sched.depth());
}

// Sub-band split of band m: 1 while xi^2 <= s_m^{b_m} * s_{m+1}^{a_{m+1}},
// else 2.  Defined for 1 <= m < depth.
inline int subband_index(const Schedule& sched, int band, const Int& xi,
                         std::size_t bit_budget = 1u << 20) {
  if (band < 1 || band >= static_cast<int>(sched.depth())) return 0;
  const StageParams& pm = sched.stage(static_cast<std::size_t>(band));
  const StageParams& pn = sched.stage(static_cast<std::size_t>(band) + 1);
  const Int cut = ipow_checked(Int(pm.s), pm.b, bit_budget) *
                  ipow_checked(Int(pn.s), pn.a, bit_budget);
  return xi * xi <= cut ? 1 : 2;
}

// Band-m decay envelope: bias weights and Frostman tails of stages m and m+1
// plus the split-count correction.
inline double envelope_bound(const Schedule& sched, int band) {
  if (band < 1 || band >= static_cast<int>(sched.depth())) return 1.0;
  const StageParams& pm = sched.stage(static_cast<std::size_t>(band));
  const StageParams& pn = sched.stage(static_cast<std::size_t>(band) + 1);
  return to_double(pm.eps) + to_double(pn.eps) + pm.tau + pn.tau +
         1.0 / std::sqrt(to_double(Rat(pn.N_or_throw())));
}

// ---------------------------------------------------------------------------
// Row-level evaluation with an explicit error budget.

struct SpectrumRow {
  Int xi;
  Cplx coeff;
  int band = 0;
  int subband = 0;
  double envelope = 1.0;
  std::string method;       // "direct" (exact) or "delta" (budgeted)
  double error_budget = 0;  // zero on the direct route
};

enum class EvalMethod { automatic, direct, delta };

struct EvalOptions {
  EvalMethod method = EvalMethod::automatic;
  std::size_t delta_from = 0;  // forced enumeration cut for EvalMethod::delta
  std::uint64_t leaf_budget = 1'000'000;
  std::size_t bit_budget = 1u << 20;
};

// Exact leaf count of stage m, saturating at cap+1.
inline Int stage_leaf_count_capped(const Schedule& sched, std::size_t m,
                                   const Int& cap) {
  Int count = 1;
  for (std::size_t r = 1; r <= m; ++r) {
    const StageParams& p = sched.stage(r);
    count *= p.N_or_throw();
    if (count > cap) return cap + 1;
    if (pow_cmp(count, Int(p.s), p.b - p.a, cap, 1, 0) > 0) return cap + 1;
    for (Int w = p.b - p.a; w > 0; --w) count *= p.s;
  }
  return count;
}

class SpectrumEvaluator {
 public:
  SpectrumEvaluator(const Schedule& sched, std::size_t M, EvalOptions opt = {})
      : sched_(&sched), M_(M), opt_(opt) {
    if (M > sched.depth())
      throw std::invalid_argument("SpectrumEvaluator: stage out of range");
    std::size_t cut = M;  // enumeration covers stages < cut; factors cover the rest
    switch (opt.method) {
      case EvalMethod::direct:
        if (stage_leaf_count_capped(sched, M ? M - 1 : 0, Int(opt.leaf_budget)) >
            Int(opt.leaf_budget))
          throw std::overflow_error("SpectrumEvaluator: direct route over budget");
        break;
      case EvalMethod::delta:
        if (opt.delta_from < 1 || opt.delta_from > M)
          throw std::invalid_argument("SpectrumEvaluator: bad delta cut");
        cut = opt.delta_from;
        break;
      case EvalMethod::automatic: {
        while (cut > 1 && stage_leaf_count_capped(sched, cut - 1,
                                                  Int(opt.leaf_budget)) >
                              Int(opt.leaf_budget))
          --cut;
        break;
      }
    }
    cut_ = M ? cut : 0;
    parent_ = build(sched, M ? cut_ - 1 : 0,
                    BuildOptions{opt.leaf_budget, opt.bit_budget});
    if (M_ > 0)
      snap_ = snap_phase_table(sched, cut_, parent_, opt.bit_budget);
    else
      snap_ = phase_table(sched, parent_, opt.bit_budget);
    grid_ = sched.grid_denominator(M_ + 1, opt.bit_budget);
    if (cut_ < M_) {
      const StageParams& pn = sched.stage(cut_ + 1);
      budget_scale_ = Rat(1, ipow_checked(Int(pn.s), pn.a, opt.bit_budget));
    }
  }

  std::size_t enumeration_cut() const { return cut_; }
  bool exact() const { return cut_ == M_; }
  const StageMeasure& parent_measure() const { return parent_; }

  // Phase sum of the stage-M measure (exact when cut == M).
  Cplx gamma(const Int& xi) const {
    Cplx val = weighted_phase_sum(snap_, xi);
    for (std::size_t r = cut_; r <= M_ && r >= 1; ++r)
      val *= stage_factor(xi, sched_->stage(r), opt_.bit_budget);
    return val;
  }

  Cplx coefficient(const Int& xi) const {
    return one_hat(Rat(xi, grid_)) * gamma(xi);
  }

  double error_budget(const Int& xi) const {
    if (exact()) return 0.0;
    Rat scaled = Rat(abs(xi)) * budget_scale_;
    if (scaled > 1) scaled = 1;
    return to_double(sched_->C0 * scaled);
  }

  SpectrumRow row(const Int& xi) const {
    SpectrumRow r;
    r.xi = xi;
    r.coeff = coefficient(xi);
    r.band = band_index(*sched_, xi, opt_.bit_budget);
    if (r.band >= 1 && r.band < static_cast<int>(sched_->depth()) &&
        r.band < static_cast<int>(M_)) {
      r.subband = subband_index(*sched_, r.band, xi, opt_.bit_budget);
      r.envelope = envelope_bound(*sched_, r.band);
    }
    r.error_budget = error_budget(xi);
    r.method = r.error_budget == 0.0 ? "direct" : "delta";
    return r;
  }

 private:
  const Schedule* sched_;
  std::size_t M_;
  EvalOptions opt_;
  std::size_t cut_ = 0;
  StageMeasure parent_;
  PhaseTable snap_;
  Int grid_ = 1;
  Rat budget_scale_ = 0;
};

// Convenience single-frequency evaluation.
inline SpectrumRow phi_hat(const Schedule& sched, std::size_t M, const Int& xi,
                           EvalOptions opt = {}) {
  return SpectrumEvaluator(sched, M, opt).row(xi);
}

// ---------------------------------------------------------------------------
// Envelope scan over the certified bands.

struct BandStats {
  int band = 0;
  std::size_t count = 0;
  double max_abs = 0;
  Int argmax = 0;
  double envelope = 1.0;
  double max_ratio = 0;
};

struct EnvelopeReport {
  std::size_t M = 0;
  Int xi_lo = 0, xi_hi = 0;
  std::vector<SpectrumRow> rows;
  std::vector<BandStats> bands;
};

// Scans every integer frequency in (Q_1, min(Q_M, xi_max)].
inline EnvelopeReport envelope_scan(const Schedule& sched, std::size_t M,
                                    const Int& xi_max, EvalOptions opt = {},
                                    unsigned threads = 0) {
  if (M < 2 || M > sched.depth())
    throw std::invalid_argument("envelope_scan: need 2 <= M <= depth");
  const StageParams& p1 = sched.stage(1);
  const StageParams& pM = sched.stage(M);
  const Int q1 = ipow_checked(Int(p1.s), p1.a + p1.b, opt.bit_budget);
  const Int qM = ipow_checked(Int(pM.s), pM.a + pM.b, opt.bit_budget);
  Int lo = boost::multiprecision::sqrt(q1) + 1;  // smallest xi with xi^2 > q1
  while (lo * lo <= q1) ++lo;
  Int hi = boost::multiprecision::sqrt(qM);  // largest xi with xi^2 <= qM
  while (hi * hi > qM) --hi;
  if (hi > xi_max) hi = xi_max;

  EnvelopeReport report;
  report.M = M;
  report.xi_lo = lo;
  report.xi_hi = hi;
  if (hi < lo) return report;

  const SpectrumEvaluator eval(sched, M, opt);
  const Int span = hi - lo + 1;
  const std::size_t count = span.convert_to<std::uint64_t>();
  report.rows.resize(count);
  parallel_for(
      count,
      [&](std::size_t i) { report.rows[i] = eval.row(lo + Int(i)); },
      threads);

  std::map<int, BandStats> stats;
  for (const auto& row : report.rows) {
    BandStats& b = stats[row.band];
    b.band = row.band;
    b.envelope = row.envelope;
    ++b.count;
    const double mag = std::abs(row.coeff);
    if (mag > b.max_abs) {
      b.max_abs = mag;
      b.argmax = row.xi;
    }
  }
  for (auto& [band, b] : stats) {
    b.max_ratio = b.max_abs / b.envelope;
    report.bands.push_back(b);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Increment splits.  With t the previous grid scale, the refinement step from
// stage m-1 to m decomposes as (snap + equal split) followed by the digit
// redistribution; u and v are the two increments.

struct UVSplit {
  Cplx u, v;
  double u_bracket = 0;  // min(1, t/|xi|, |xi|/s^a)
  double v_bracket = 0;  // min(1, |xi|/s^a, s^b/|xi|)
};

inline UVSplit u_v_split(const Schedule& sched, std::size_t m,
                         const StageMeasure& prev, const Int& xi,
                         std::size_t bit_budget = 1u << 20) {
  if (m < 1 || m > sched.depth())
    throw std::invalid_argument("u_v_split: stage out of range");
  if (prev.M + 1 != m)
    throw std::invalid_argument("u_v_split: prev must be stage m-1");
  const StageParams& p = sched.stage(m);
  const Int t = sched.grid_denominator(m, bit_budget);
  const Int sa = ipow_checked(Int(p.s), p.a, bit_budget);
  const Int sb = ipow_checked(Int(p.s), p.b, bit_budget);
  const Int N = p.N_or_throw();

  const Cplx lam = lambda_m(sched, m, prev, xi, bit_budget);
  const Cplx gam_prev = gamma_direct(sched, prev, xi, bit_budget);
  const Cplx psi = one_hat(Rat(xi * N, sa)) * lam;
  const Cplx phi_prev = one_hat(Rat(xi, t)) * gam_prev;
  const Cplx phi_m =
      one_hat(Rat(xi, sb)) * lam * stage_factor(xi, p, bit_budget);

  UVSplit out;
  out.u = psi - phi_prev;
  out.v = phi_m - psi;
  if (xi != 0) {
    const Int mag = abs(xi);
    Rat ub = Rat(t, mag);
    ub = std::min(ub, Rat(mag, sa));
    ub = std::min(ub, Rat(1));
    Rat vb = Rat(mag, sa);
    vb = std::min(vb, Rat(sb, mag));
    vb = std::min(vb, Rat(1));
    out.u_bracket = to_double(ub);
    out.v_bracket = to_double(vb);
  }
  return out;
}

// Refined v bracket: truncation term over the window (a', a] plus the
// digit-pair decay with exponent J counted on the reduced frequency across
// the whole window (a', b].
inline double refined_v_bracket(const StageParams& p, const Int& xi,
                                const Int& a_prime, double c = 0.5,
                                std::size_t bit_budget = 1u << 20) {
  const JCounts jc =
      block_J_counts(xi, p.s, a_prime.convert_to<std::int64_t>(),
                     p.a.convert_to<std::int64_t>(), p.b.convert_to<std::int64_t>());
  const Int gap = ipow_checked(Int(p.s), p.a - a_prime, bit_budget);
  return to_double(Rat(gap, p.N_or_throw())) +
         refined_full_bound(jc.J_comp, p.s, c);
}

// Same, with the decay counted only inside the equal-split window (a', a].
inline double refined_v_bracket_window(const StageParams& p, const Int& xi,
                                       const Int& a_prime, double c = 0.5,
                                       std::size_t bit_budget = 1u << 20) {
  const JCounts jc =
      block_J_counts(xi, p.s, a_prime.convert_to<std::int64_t>(),
                     p.a.convert_to<std::int64_t>(), p.b.convert_to<std::int64_t>());
  const Int gap = ipow_checked(Int(p.s), p.a - a_prime, bit_budget);
  return to_double(Rat(gap, p.N_or_throw())) +
         refined_full_bound(jc.J_under, p.s, c);
}

// ---------------------------------------------------------------------------
// Weyl orbit averages.

// (1/N) sum of e(h * x * b^n) with the orbit of x reduced exactly mod 1.
inline Cplx weyl_sum(const Rat& x, const Int& b, const Int& h,
                     std::uint64_t N) {
  if (N < 1) throw std::invalid_argument("weyl_sum: need N >= 1");
  if (b < 2) throw std::invalid_argument("weyl_sum: need b >= 2");
  const Int q = boost::multiprecision::denominator(x);
  Int orbit = boost::multiprecision::numerator(x) % q;
  if (orbit < 0) orbit += q;
  Cplx total = 0.0;
  for (std::uint64_t n = 0; n < N; ++n) {
    total += unit_phase(h * orbit, q);
    orbit = (orbit * b) % q;
  }
  return total / static_cast<double>(N);
}

// Floating orbit variant for points known only as doubles.
inline Cplx weyl_sum_double(double x, const Int& b, const Int& h,
                            std::uint64_t N) {
  if (N < 1) throw std::invalid_argument("weyl_sum: need N >= 1");
  if (b < 2) throw std::invalid_argument("weyl_sum: need b >= 2");
  const double bd = to_double(Rat(b));
  const double hd = to_double(Rat(h));
  double orbit = x - std::floor(x);
  Cplx total = 0.0;
  for (std::uint64_t n = 0; n < N; ++n) {
    const double y = hd * orbit;
    const double t = y - std::floor(y);
    total += Cplx(std::cos(2 * kPi * t), -std::sin(2 * kPi * t));
    orbit = orbit * bd;
    orbit -= std::floor(orbit);
  }
  return total / static_cast<double>(N);
}

// ---------------------------------------------------------------------------
// Triple-series diagnostics: partial sums of
//   sum_N N^{-3} sum_{u,v<N} nu_hat(h (b^v - b^u))
// with nu the stage-M density, plus the absolute-value variant and, when a
// split stage is supplied, the same double sums over |u_m| and |v_m|.

struct DELRow {
  std::uint64_t N = 0;
  double inner = 0;        // sum over u,v < N of nu_hat
  double partial = 0;      // running sum of inner / N^3
  double inner_abs = 0;    // absolute-value variant
  double partial_abs = 0;
  double u_inner = 0, u_partial = 0;
  double v_inner = 0, v_partial = 0;
};

struct DELReport {
  Int h = 1, b = 2;
  std::size_t M = 0;
  std::optional<std::size_t> split_stage;
  std::vector<DELRow> rows;
};

struct DELOptions {
  std::optional<std::size_t> split_stage;
  std::uint64_t leaf_budget = 1'000'000;
  std::size_t bit_budget = 1u << 20;
};

inline DELReport del_partial(const Schedule& sched, std::size_t M, const Int& h,
                             const Int& b, std::uint64_t N_max,
                             DELOptions opt = {}) {
  if (h == 0) throw std::invalid_argument("del_partial: need h != 0");
  if (b < 2) throw std::invalid_argument("del_partial: need b >= 2");
  if (N_max < 1) throw std::invalid_argument("del_partial: need N_max >= 1");

  EvalOptions eval_opt;
  eval_opt.leaf_budget = opt.leaf_budget;
  eval_opt.bit_budget = opt.bit_budget;
  const SpectrumEvaluator eval(sched, M, eval_opt);

  std::optional<StageMeasure> split_prev;
  if (opt.split_stage) {
    const std::size_t m = *opt.split_stage;
    if (m < 1 || m > sched.depth())
      throw std::invalid_argument("del_partial: split stage out of range");
    split_prev = build(sched, m - 1, BuildOptions{opt.leaf_budget, opt.bit_budget});
  }

  std::vector<Int> bpow(N_max);
  bpow[0] = 1;
  for (std::uint64_t n = 1; n < N_max; ++n) bpow[n] = bpow[n - 1] * b;

  DELReport report;
  report.h = h;
  report.b = b;
  report.M = M;
  report.split_stage = opt.split_stage;
  report.rows.reserve(N_max);

  double off = 0, off_abs = 0, off_u = 0, off_v = 0;
  DELRow prev;
  for (std::uint64_t N = 1; N <= N_max; ++N) {
    // New off-diagonal pairs against v = N-1.
    for (std::uint64_t u = 0; u + 1 < N; ++u) {
      const Int xi = h * (bpow[N - 1] - bpow[u]);
      const Cplx z = eval.coefficient(xi);
      off += 2 * z.real();
      off_abs += 2 * std::abs(z);
      if (split_prev) {
        const UVSplit uv =
            u_v_split(sched, *opt.split_stage, *split_prev, xi, opt.bit_budget);
        off_u += 2 * std::abs(uv.u);
        off_v += 2 * std::abs(uv.v);
      }
    }
    DELRow row;
    row.N = N;
    row.inner = static_cast<double>(N) + off;  // diagonal terms contribute 1
    row.inner_abs = static_cast<double>(N) + off_abs;
    row.u_inner = off_u;  // the splits vanish at frequency zero
    row.v_inner = off_v;
    const double n3 = std::pow(static_cast<double>(N), 3);
    row.partial = prev.partial + row.inner / n3;
    row.partial_abs = prev.partial_abs + row.inner_abs / n3;
    row.u_partial = prev.u_partial + row.u_inner / n3;
    row.v_partial = prev.v_partial + row.v_inner / n3;
    report.rows.push_back(row);
    prev = row;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Index classifiers for a pair of expansion bases (b for the orbit, s_m for
// the stage).  Levels: pair cutoff, triple coarse regions, and the fine split
// of the middle region, which depends on whether the lead prime of s_m
// divides b.

struct IndexClass {
  Int u, v, N;
  std::string level1;  // "U1" or "U2"
  std::string level2;  // "V11".."V14" or "V2"
  std::string level3;  // fine tag inside V2, empty otherwise
  char case_tag = '-';  // 'a' when the lead prime misses b, 'b' otherwise
  // Witnesses.
  double c_m = 0;       // pair cutoff (a_m/2) log_b(s_m)
  Int R = 0;            // base-s digit length of N
  Int K = 0;
  double kappa_s = 0;
  Int n_count = 0;      // digit-pair count over the classifier window
  Int window_len = 0;
  Int k_of_u = 0;       // exact s-power exponent of b^u (case b)
  Int h_val = 0;        // s-adic valuation of h (case b)
  Int zeta = 0;         // integer whose digits feed the pair count
};

// Derives K from a stage whose split exponent is an exact power s^{K^2}.
inline Int normality_K(const StageParams& p) {
  const Valuation val = valuation(p.a, Int(p.s));
  if (val.cofactor != 1)
    throw std::invalid_argument("normality_K: split exponent is not a pure power");
  const Int k = boost::multiprecision::sqrt(val.exponent);
  if (k * k != val.exponent)
    throw std::invalid_argument("normality_K: power is not a perfect square");
  return k;
}

inline IndexClass classify_index(const Schedule& sched, std::size_t m,
                                 const Int& u, const Int& v, const Int& N,
                                 const Int& h, const Int& b,
                                 std::optional<Int> K_opt = std::nullopt,
                                 std::size_t bit_budget = 1u << 20) {
  if (m < 1 || m > sched.depth())
    throw std::invalid_argument("classify_index: stage out of range");
  if (u < 0 || v < 0 || N < 1)
    throw std::invalid_argument("classify_index: need u,v >= 0 and N >= 1");
  if (h == 0) throw std::invalid_argument("classify_index: need h != 0");
  if (b < 2) throw std::invalid_argument("classify_index: need b >= 2");
  const StageParams& p = sched.stage(m);
  const Int s(p.s);
  const Int mm(static_cast<std::int64_t>(m));

  IndexClass out;
  out.u = u;
  out.v = v;
  out.N = N;
  out.c_m = to_double(Rat(p.a, 2)) * std::log(to_double(Rat(s))) /
            std::log(to_double(Rat(b)));

  // Level 1: b^{2(u+v)} vs s^{a_m}.
  const bool small_pair = pow_cmp(1, b, 2 * (u + v), 1, s, p.a, bit_budget) <= 0;
  out.level1 = small_pair ? "U1" : "U2";

  // Level 2, first match wins.
  if (small_pair)
    out.level2 = "V11";
  else if (pow_cmp(1, b, u + v, mm * mm, s, p.b, bit_budget) >= 0)
    out.level2 = "V12";
  else if (pow_cmp(1, b, 4 * N, 1, s, p.a, bit_budget) <= 0)
    out.level2 = "V13";
  else if (pow_cmp(1, b, N, 1, s, mm * p.b, bit_budget) >= 0)
    out.level2 = "V14";
  else
    out.level2 = "V2";

  out.R = digit_count(N, s);
  if (out.level2 != "V2") return out;

  out.K = K_opt ? *K_opt : normality_K(p);
  const PairFactorization pf = pair_factorization(b, s);
  out.kappa_s = kappa(p.s);
  const Int bv1 = ipow_checked(b, v, bit_budget) - 1;

  if (pf.beta1() == 0) {
    // Case (a): the lead prime of s does not divide b.
    out.case_tag = 'a';
    const Int pK = ipow_checked(pf.p1(), out.K, bit_budget);
    if (bv1 % pK == 0) {
      out.level3 = "V21";
      return out;
    }
    out.zeta = abs(h) * bv1;
    out.window_len = out.R - out.K;
    if (out.window_len < 0) out.window_len = 0;
    const auto ds = digits(out.zeta, p.s,
                           static_cast<std::size_t>(out.R.convert_to<std::int64_t>()));
    std::vector<std::int64_t> window(
        ds.begin() + static_cast<std::ptrdiff_t>(
                         std::min(out.K, out.R).convert_to<std::int64_t>()),
        ds.end());
    out.n_count = detail::pair_count_or_zero(window, p.s);
    out.level3 = to_double(Rat(out.n_count)) <=
                         out.kappa_s * to_double(Rat(out.window_len))
                     ? "V22"
                     : "V23";
    return out;
  }

  // Case (b): every prime of s divides b.
  out.case_tag = 'b';
  out.k_of_u = s_power_in_bu(pf, u);
  const Valuation hv = valuation(abs(h), s);
  out.h_val = hv.exponent;
  const Int lead = out.k_of_u + out.h_val;
  if (lead <= out.K) {
    out.level3 = "Vbar21";
    return out;
  }
  if (lead >= p.b - out.R) {
    out.level3 = "Vbar22";
    return out;
  }
  const Int bu = ipow_checked(b, u, bit_budget);
  const Valuation buv = valuation(bu, s);
  out.zeta = hv.cofactor * buv.cofactor * bv1;
  out.window_len = out.R;
  const auto ds = digits(out.zeta, p.s,
                         static_cast<std::size_t>(out.R.convert_to<std::int64_t>()));
  out.n_count = detail::pair_count_or_zero(ds, p.s);
  out.level3 =
      to_double(Rat(out.n_count)) <= out.kappa_s * to_double(Rat(out.R))
          ? "Vbar23"
          : "Vbar24";
  return out;
}

}  // namespace skewmeas
