#pragma once

// Measure-side diagnostics: ball-condition ratios at basic, intermediate, and
// windowed scales, sampled digit statistics with binomial error bars, and
// per-band decay reports for deep schedules driven through the budgeted
// spectrum route.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "skewmeas/construction.hpp"
#include "skewmeas/schedule.hpp"
#include "skewmeas/spectrum.hpp"

namespace skewmeas {

// ---------------------------------------------------------------------------
// Fast exact interval masses over a materialized stage (leaves are sorted and
// pairwise disjoint with a common length, so a prefix table plus boundary
// clipping answers each window in logarithmic time).

struct MassIndex {
  const StageMeasure* meas = nullptr;
  std::vector<Rat> lefts;
  std::vector<Rat> prefix;  // prefix[i] = weight of leaves [0, i)
};

inline MassIndex make_mass_index(const StageMeasure& meas) {
  MassIndex idx;
  idx.meas = &meas;
  idx.lefts.reserve(meas.leaves.size());
  idx.prefix.reserve(meas.leaves.size() + 1);
  idx.prefix.push_back(Rat(0));
  for (const auto& leaf : meas.leaves) {
    idx.lefts.push_back(leaf.left);
    idx.prefix.push_back(idx.prefix.back() + leaf.weight);
  }
  if (!std::is_sorted(idx.lefts.begin(), idx.lefts.end()))
    throw std::logic_error("make_mass_index: leaves out of order");
  return idx;
}

inline Rat interval_mass(const MassIndex& idx, const Rat& c, const Rat& d) {
  if (d <= c) return Rat(0);
  const Rat len = idx.meas->leaf_length;
  const Rat cut(c - len);
  const auto first = std::upper_bound(idx.lefts.begin(), idx.lefts.end(), cut);
  const auto last = std::lower_bound(idx.lefts.begin(), idx.lefts.end(), d);
  if (first >= last) return Rat(0);
  const std::size_t i0 = static_cast<std::size_t>(first - idx.lefts.begin());
  const std::size_t i1 = static_cast<std::size_t>(last - idx.lefts.begin());
  Rat total = idx.prefix[i1] - idx.prefix[i0];
  const auto clip = [&](std::size_t i) {
    const Rat lo = std::max(c, idx.lefts[i]);
    const Rat hi = std::min(d, Rat(idx.lefts[i] + len));
    total -= idx.meas->leaves[i].weight * (Rat(1) - (hi - lo) / len);
  };
  clip(i0);
  if (i1 - 1 != i0) clip(i1 - 1);
  return total;
}

// ---------------------------------------------------------------------------
// Ball-condition ratios mu(I) / |I|^{1-eta}.

struct FrostmanBasicRow {
  std::size_t m = 0;
  Rat max_weight;     // exact: prod over stages of theta_max / N
  double ratio = 0;   // max_weight * s^{b (1-eta)}
};

struct FrostmanIntermediateRow {
  std::size_t m = 0;
  std::int64_t j = 0;  // block depth within the stage, 0..b-a
  Rat max_mass;        // exact mass of the heaviest depth-j digit block
  double ratio = 0;    // max_mass * s^{(a+j)(1-eta)}
};

struct FrostmanWindow {
  Rat left = 0, right = 0;
  Rat mass = 0;
  double ratio = 0;
};

struct FrostmanReport {
  Rat eta;
  std::vector<FrostmanBasicRow> basic;
  std::vector<FrostmanIntermediateRow> intermediate;
  FrostmanWindow window;
};

namespace detail {
inline void check_eta(const Rat& eta) {
  if (eta <= 0 || eta >= 1)
    throw std::invalid_argument("ball ratios: need eta in (0,1)");
}
}  // namespace detail

// Heaviest digit-block weight of one stage: the all-favoured block.
inline Rat max_theta(const StageParams& p, std::size_t bit_budget = 1u << 20) {
  const Int sw = ipow_checked(Int(p.s), p.b - p.a, bit_budget);
  const Int rw = ipow_checked(Int(p.r()), p.b - p.a, bit_budget);
  return (1 - p.eps) / Rat(sw) + p.eps / Rat(rw);
}

// Per-stage maxima of w(i_m) s_m^{b_m(1-eta)}, from aggregates alone.
inline std::vector<FrostmanBasicRow> frostman_basic(
    const Schedule& sched, std::size_t M, const Rat& eta,
    std::size_t bit_budget = 1u << 20) {
  detail::check_eta(eta);
  if (M > sched.depth())
    throw std::invalid_argument("frostman_basic: stage beyond schedule");
  std::vector<FrostmanBasicRow> rows;
  Rat w = 1;
  for (std::size_t m = 1; m <= M; ++m) {
    const StageParams& p = sched.stage(m);
    w *= max_theta(p, bit_budget) / Rat(p.N_or_throw());
    FrostmanBasicRow row;
    row.m = m;
    row.max_weight = w;
    row.ratio = std::exp(log_rat(w) + to_double(Rat(p.b) * (1 - eta)) *
                                          std::log(static_cast<double>(p.s)));
    rows.push_back(std::move(row));
  }
  return rows;
}

// Per-(m, j) maxima over depth-j digit blocks inside one equal-split child:
// the block fixing the top j digits to favoured values carries mass
// w_{m-1}/N * [(1-eps) s^{-j} + eps r^{-j}].
inline std::vector<FrostmanIntermediateRow> frostman_intermediate(
    const Schedule& sched, std::size_t M, const Rat& eta,
    std::size_t bit_budget = 1u << 20) {
  detail::check_eta(eta);
  if (M > sched.depth())
    throw std::invalid_argument("frostman_intermediate: stage beyond schedule");
  std::vector<FrostmanIntermediateRow> rows;
  Rat w_prev = 1;
  for (std::size_t m = 1; m <= M; ++m) {
    const StageParams& p = sched.stage(m);
    if (p.b - p.a > 4096)
      throw std::overflow_error("frostman_intermediate: block width over budget");
    const std::int64_t width = Int(p.b - p.a).convert_to<std::int64_t>();
    const Rat base = w_prev / Rat(p.N_or_throw());
    Rat spow = 1, rpow = 1;
    for (std::int64_t j = 0; j <= width; ++j) {
      FrostmanIntermediateRow row;
      row.m = m;
      row.j = j;
      row.max_mass = base * ((1 - p.eps) / spow + p.eps / rpow);
      row.ratio =
          std::exp(log_rat(row.max_mass) +
                   to_double(Rat(p.a + j) * (1 - eta)) *
                       std::log(static_cast<double>(p.s)));
      rows.push_back(std::move(row));
      spow *= p.s;
      rpow *= p.r();
    }
    w_prev *= max_theta(p, bit_budget) / Rat(p.N_or_throw());
  }
  return rows;
}

// Windowed supremum of mu(I)/|I|^{1-eta} over all dyadic intervals of depth
// up to window_depth plus every construction-aligned leaf window.
inline FrostmanWindow frostman_window(const StageMeasure& meas, const Rat& eta,
                                      int window_depth) {
  detail::check_eta(eta);
  if (window_depth < 0 || window_depth > 30)
    throw std::invalid_argument("frostman_window: depth out of range");
  const MassIndex idx = make_mass_index(meas);
  const double eta_d = to_double(eta);
  FrostmanWindow best;
  const auto consider = [&](const Rat& l, const Rat& r) {
    const Rat mass = interval_mass(idx, l, r);
    if (mass <= 0) return;
    const double ratio =
        std::exp(log_rat(mass) - (1 - eta_d) * log_rat(Rat(r - l)));
    if (ratio > best.ratio) {
      best.left = l;
      best.right = r;
      best.mass = mass;
      best.ratio = ratio;
    }
  };
  for (int d = 0; d <= window_depth; ++d) {
    const Int den = Int(1) << d;
    for (Int k = 0; k < den; ++k) consider(Rat(k, den), Rat(k + 1, den));
  }
  for (const auto& leaf : meas.leaves)
    consider(leaf.left, leaf.left + meas.leaf_length);
  return best;
}

inline FrostmanReport frostman_report(const Schedule& sched,
                                      const StageMeasure& meas, const Rat& eta,
                                      int window_depth,
                                      std::size_t bit_budget = 1u << 20) {
  FrostmanReport rep;
  rep.eta = eta;
  rep.basic = frostman_basic(sched, meas.M, eta, bit_budget);
  rep.intermediate = frostman_intermediate(sched, meas.M, eta, bit_budget);
  rep.window = frostman_window(meas, eta, window_depth);
  return rep;
}

// ---------------------------------------------------------------------------
// Sampled digit statistics.

struct DigitStats {
  std::int64_t base = 0;
  std::size_t sample_count = 0;
  std::vector<std::int64_t> positions;
  // position -> per-digit counts (size base, summing to sample_count).
  std::map<std::int64_t, std::vector<std::uint64_t>> counts;
  std::int64_t block_len = 1;
  // digit block over consecutive listed positions -> occurrences.
  std::map<std::vector<std::int64_t>, std::uint64_t> block_counts;
};

inline double binomial_sigma(double p, std::size_t n) {
  return std::sqrt(p * (1 - p) / static_cast<double>(n));
}

inline bool within_three_sigma(std::uint64_t count, std::size_t n,
                               const Rat& p0) {
  const double p = to_double(p0);
  const double phat = static_cast<double>(count) / static_cast<double>(n);
  return std::abs(phat - p) <= 3 * binomial_sigma(p, n) + 1e-12;
}

inline DigitStats digit_frequency(const std::vector<SamplePoint>& samples,
                                  std::int64_t base,
                                  std::vector<std::int64_t> positions,
                                  std::int64_t block_len = 1) {
  if (base < 2) throw std::invalid_argument("digit_frequency: base >= 2");
  if (positions.empty())
    throw std::invalid_argument("digit_frequency: positions required");
  for (const std::int64_t pos : positions)
    if (pos < 1) throw std::invalid_argument("digit_frequency: positions >= 1");
  if (block_len < 1 ||
      block_len > static_cast<std::int64_t>(positions.size()))
    throw std::invalid_argument("digit_frequency: bad block length");

  DigitStats stats;
  stats.base = base;
  stats.sample_count = samples.size();
  stats.positions = std::move(positions);
  stats.block_len = block_len;
  for (const std::int64_t pos : stats.positions)
    stats.counts.emplace(pos,
                         std::vector<std::uint64_t>(static_cast<std::size_t>(base)));

  std::vector<std::int64_t> digits_here(stats.positions.size());
  for (const SamplePoint& pt : samples) {
    for (std::size_t i = 0; i < stats.positions.size(); ++i) {
      const std::int64_t d = digit_at(pt.x, stats.positions[i], base);
      digits_here[i] = d;
      ++stats.counts[stats.positions[i]][static_cast<std::size_t>(d)];
    }
    for (std::size_t i = 0;
         i + static_cast<std::size_t>(block_len) <= digits_here.size(); ++i) {
      std::vector<std::int64_t> block(
          digits_here.begin() + static_cast<std::ptrdiff_t>(i),
          digits_here.begin() +
              static_cast<std::ptrdiff_t>(i + static_cast<std::size_t>(block_len)));
      ++stats.block_counts[std::move(block)];
    }
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Per-band decay report: the maximum coefficient magnitude over geometrically
// spaced probes of each band, against the stage bias as the predicted level.

struct DecayBandRow {
  int band = 0;
  Int xi_lo = 0, xi_hi = 0;
  std::size_t probes = 0;
  double max_abs = 0;
  Int argmax = 0;
  double scale = 1.0;  // bias eps of the band stage
  double ratio = 0;    // max_abs / scale
};

inline std::vector<DecayBandRow> decay_band_report(const Schedule& sched,
                                                   std::size_t M,
                                                   EvalOptions opt = {}) {
  if (M < 2 || M > sched.depth())
    throw std::invalid_argument("decay_band_report: need 2 <= M <= depth");
  const SpectrumEvaluator eval(sched, M, opt);
  std::vector<DecayBandRow> rows;
  for (std::size_t m = 1; m < M; ++m) {
    const StageParams& pm = sched.stage(m);
    const StageParams& pn = sched.stage(m + 1);
    const Int qm = ipow_checked(Int(pm.s), pm.a + pm.b, opt.bit_budget);
    const Int qn = ipow_checked(Int(pn.s), pn.a + pn.b, opt.bit_budget);
    Int lo = boost::multiprecision::sqrt(qm) + 1;
    while (lo > 1 && (lo - 1) * (lo - 1) > qm) --lo;
    Int hi = boost::multiprecision::sqrt(qn);
    while (hi * hi > qn) --hi;

    DecayBandRow row;
    row.band = static_cast<int>(m);
    row.xi_lo = lo;
    row.xi_hi = hi;
    row.scale = to_double(pm.eps);
    const auto probe = [&](const Int& xi) {
      const double mag = std::abs(eval.coefficient(xi));
      if (mag > row.max_abs) {
        row.max_abs = mag;
        row.argmax = xi;
      }
      ++row.probes;
    };
    Int last = 0;
    for (Int xi = lo; xi <= hi; xi *= 2) {
      probe(xi);
      last = xi;
    }
    if (row.probes > 0 && last != hi) probe(hi);
    row.ratio = row.max_abs / row.scale;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace skewmeas
