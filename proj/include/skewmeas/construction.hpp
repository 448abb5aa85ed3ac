#pragma once
// Materialization of finite stages of the skewed measure: the elementary
// refinement of a grid interval into biased children, full stage builds with
// exact rational masses, interval measure queries, digit-event masses, and
// seeded sampling from the stage law.

#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "bigpow.hpp"
#include "schedule.hpp"

namespace skewmeas {

inline Int rational_floor(const Rat& x) {
  return floor_div(boost::multiprecision::numerator(x),
                   boost::multiprecision::denominator(x));
}

inline Int rational_ceil(const Rat& x) {
  return ceil_div(boost::multiprecision::numerator(x),
                  boost::multiprecision::denominator(x));
}

// One leaf of a materialized stage: [left, left + s^{-b}] with an exact
// weight, its bias flag, and the (split index, digit index) path from root.
struct LeafInterval {
  Rat left;
  Rat weight;
  bool favoured = false;
  std::vector<std::pair<Int, Int>> lineage;
};

struct StageMeasure {
  Schedule schedule;
  std::size_t M = 0;   // number of applied stages
  Rat leaf_length = 1; // s_M^{-b_M}; 1 for the root stage
  std::vector<LeafInterval> leaves;

  Rat total_mass() const {
    Rat s = 0;
    for (const auto& leaf : leaves) s += leaf.weight;
    return s;
  }
};

// True when every base-s digit of l (width many) lies in the favoured set.
inline bool favoured_index(const Int& l, std::int64_t width,
                           const DigitSet& digits) {
  Int v = l;
  for (std::int64_t i = 0; i < width; ++i) {
    const Int d = v % digits.base;
    if (!digits.contains(d.convert_to<std::int64_t>())) return false;
    v /= digits.base;
  }
  return true;
}

// theta_l = (1 - eps) s^{-(b-a)} + eps r^{-(b-a)} [l favoured].
inline Rat theta_weight(const StageParams& p, const Int& l, std::int64_t width) {
  const Int s_pow = ipow(p.s, width);
  Rat theta = (1 - p.eps) / Rat(s_pow);
  if (favoured_index(l, width, p.digits))
    theta += p.eps / Rat(ipow(p.digits.size(), width));
  return theta;
}

struct ElementaryResult {
  Int m_hat;  // left grid index: J starts at m_hat s^{-a}
  Rat eta;    // offset m_hat s^{-a} - alpha, in [0, s^{-a})
  Rat spill;  // length of I not covered by the N children
  std::vector<LeafInterval> leaves;
};

// Refine the grid interval [alpha, alpha + 1/t] (weight w) through one stage:
// snap to the s^{-a} grid, split into N equal children, then subdivide each
// child into s^{b-a} leaves carrying the biased digit weights.
inline ElementaryResult elementary_op(const Rat& alpha, const Rat& weight,
                                      const StageParams& p, const Int& t,
                                      std::size_t bit_budget = (1u << 20),
                                      std::uint64_t leaf_budget = 1'000'000) {
  if (pow_cmp(Int(2), t, Int(1), Int(1), Int(p.s), p.a) > 0)
    throw std::invalid_argument("elementary_op: requires s^a > 2t");
  const Int sa = ipow_checked(Int(p.s), p.a, bit_budget);
  const Int sb = ipow_checked(Int(p.s), p.b, bit_budget);
  const Int N = floor_div(sa, t) - 1;
  const std::int64_t width = Int(p.b - p.a).convert_to<std::int64_t>();
  const Int leaves_per_child = ipow_checked(Int(p.s), p.b - p.a, bit_budget);
  if (N * leaves_per_child > Int(leaf_budget))
    throw std::overflow_error("elementary_op: leaf budget exceeded");

  ElementaryResult out;
  out.m_hat = rational_ceil(alpha * sa);
  out.eta = Rat(out.m_hat, sa) - alpha;
  out.spill = Rat(1, t) - Rat(N, sa);
  out.leaves.reserve((N * leaves_per_child).convert_to<std::size_t>());
  for (Int k = 0; k < N; ++k) {
    const Rat child_left = Rat(out.m_hat + k, sa);
    for (Int l = 0; l < leaves_per_child; ++l) {
      LeafInterval leaf;
      leaf.left = child_left + Rat(l, sb);
      leaf.favoured = favoured_index(l, width, p.digits);
      leaf.weight = weight * theta_weight(p, l, width) / Rat(N);
      leaf.lineage = {{k, l}};
      out.leaves.push_back(std::move(leaf));
    }
  }
  return out;
}

struct BuildOptions {
  std::uint64_t leaf_budget = 1'000'000;
  std::size_t bit_budget = (1u << 20);
};

// Materialize the stage-M measure by iterating the elementary refinement
// over every leaf.  M = 0 yields the unit interval with unit mass.
inline StageMeasure build(const Schedule& sched, std::size_t M,
                          const BuildOptions& opt = {}) {
  if (M > sched.depth()) throw std::invalid_argument("build: stage beyond schedule");
  StageMeasure meas;
  meas.schedule = sched;
  meas.M = M;
  meas.leaves.push_back({Rat(0), Rat(1), false, {}});
  for (std::size_t m = 1; m <= M; ++m) {
    const StageParams& p = sched.stage(m);
    const Int t = sched.grid_denominator(m, opt.bit_budget);
    std::vector<LeafInterval> next;
    for (const LeafInterval& parent : meas.leaves) {
      auto res = elementary_op(parent.left, parent.weight, p, t, opt.bit_budget,
                               opt.leaf_budget);
      if (next.size() + res.leaves.size() > opt.leaf_budget)
        throw std::overflow_error("build: leaf budget exceeded");
      for (LeafInterval& leaf : res.leaves) {
        leaf.lineage.insert(leaf.lineage.begin(), parent.lineage.begin(),
                            parent.lineage.end());
        next.push_back(std::move(leaf));
      }
    }
    meas.leaves = std::move(next);
    meas.leaf_length = Rat(1, ipow_checked(Int(p.s), p.b, opt.bit_budget));
  }
  return meas;
}

// Exact measure of [c, d] under the stage density (piecewise constant on
// leaves): sum of weight * |leaf intersect [c,d]| / |leaf|.
inline Rat measure_of_interval(const StageMeasure& meas, const Rat& c,
                               const Rat& d) {
  if (d < c) throw std::invalid_argument("measure_of_interval: empty interval");
  Rat total = 0;
  for (const auto& leaf : meas.leaves) {
    const Rat lo = std::max(c, leaf.left);
    const Rat hi = std::min(d, Rat(leaf.left + meas.leaf_length));
    if (hi > lo) total += leaf.weight * (hi - lo) / meas.leaf_length;
  }
  return total;
}

// Mass of the stage-m digit event (union of favoured leaves):
// eps + (1 - eps) (r/s)^{b-a}, independent of earlier stages.
inline Rat digit_event_mass(const Schedule& sched, std::size_t m,
                            std::size_t bit_budget = (1u << 20)) {
  const StageParams& p = sched.stage(m);
  const Int rp = ipow_checked(Int(p.digits.size()), p.b - p.a, bit_budget);
  const Int sp = ipow_checked(Int(p.s), p.b - p.a, bit_budget);
  return p.eps + (1 - p.eps) * Rat(rp, sp);
}

// Enumerated counterpart: total weight of favoured leaves at the final stage.
inline Rat favoured_mass(const StageMeasure& meas) {
  Rat total = 0;
  for (const auto& leaf : meas.leaves)
    if (leaf.favoured) total += leaf.weight;
  return total;
}

struct SamplePoint {
  Rat x;          // exact position including the uniform offset
  double xd = 0;  // x rounded to double
  std::vector<std::pair<Int, Int>> lineage;
  std::vector<bool> favoured;  // per stage
};

// Draw points from the stage-M law: per stage an equal-split child is chosen
// uniformly and the digit index l by the two-branch rule (with probability
// eps all digits uniform over the favoured set, else uniform over Z_s),
// which reproduces the theta weights exactly.  The final position adds a
// 64-bit dyadic uniform offset within the leaf.
inline std::vector<SamplePoint> sample(const Schedule& sched, std::size_t M,
                                       std::size_t count, std::uint64_t seed,
                                       std::size_t bit_budget = (1u << 20)) {
  if (M > sched.depth()) throw std::invalid_argument("sample: stage beyond schedule");
  std::mt19937_64 rng(seed);
  std::vector<SamplePoint> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SamplePoint pt;
    Rat alpha = 0;
    Rat leaf_len = 1;
    for (std::size_t m = 1; m <= M; ++m) {
      const StageParams& p = sched.stage(m);
      const Int sa = ipow_checked(Int(p.s), p.a, bit_budget);
      const Int sb = ipow_checked(Int(p.s), p.b, bit_budget);
      const Int t = sched.grid_denominator(m, bit_budget);
      const Int N = floor_div(sa, t) - 1;
      if (N < 1) throw std::invalid_argument("sample: requires s^a > 2t");
      if (N > Int(std::numeric_limits<std::int64_t>::max()))
        throw std::overflow_error("sample: split count too large");
      const std::int64_t width = Int(p.b - p.a).convert_to<std::int64_t>();

      const Int m_hat = rational_ceil(alpha * sa);
      std::uniform_int_distribution<std::int64_t> pick_k(
          0, N.convert_to<std::int64_t>() - 1);
      const Int k = pick_k(rng);

      std::bernoulli_distribution biased(to_double(p.eps));
      const bool fav = biased(rng);
      Int l = 0;
      if (fav) {
        std::uniform_int_distribution<std::size_t> pick_d(
            0, p.digits.members.size() - 1);
        for (std::int64_t j = 0; j < width; ++j)
          l = l * p.s + p.digits.members[pick_d(rng)];
      } else {
        std::uniform_int_distribution<std::int64_t> pick_d(0, p.s - 1);
        for (std::int64_t j = 0; j < width; ++j) l = l * p.s + pick_d(rng);
      }
      alpha = Rat(m_hat + k, sa) + Rat(l, sb);
      leaf_len = Rat(1, sb);
      pt.lineage.emplace_back(k, l);
      pt.favoured.push_back(favoured_index(l, width, p.digits));
    }
    const std::uint64_t u = rng();
    pt.x = alpha + leaf_len * Rat(Int(u), Int(1) << 64);
    pt.xd = to_double(pt.x);
    out.push_back(std::move(pt));
  }
  return out;
}

// Base-s digit of x at scale s^{-pos}: floor(x s^pos) mod s.
inline std::int64_t digit_at(const Rat& x, std::int64_t pos, std::int64_t s) {
  if (pos < 1) throw std::invalid_argument("digit_at: position must be >= 1");
  const Int scaled = rational_floor(x * ipow(s, pos));
  return ((scaled % s + s) % s).convert_to<std::int64_t>();
}

}  // namespace skewmeas
