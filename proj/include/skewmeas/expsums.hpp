#pragma once

// Scalar exponential-sum factors of the stage transfer operator, with their
// companion decay bounds.  All phases are reduced modulo one in exact rational
// arithmetic before any floating-point evaluation, so values are accurate to a
// few ulps regardless of the size of the frequency or of the scale powers.
//
// Convention: e(y) = exp(-2*pi*i*y).

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "skewmeas/bigpow.hpp"
#include "skewmeas/schedule.hpp"

namespace skewmeas {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

using Cplx = std::complex<double>;

// e(y) with the fractional part extracted exactly.
inline Cplx unit_phase(const Rat& y) {
  const double t = frac_phase(y);
  return {std::cos(2 * kPi * t), -std::sin(2 * kPi * t)};
}

// e(num/den) without constructing a normalized rational.
inline Cplx unit_phase(const Int& num, const Int& den) {
  const double t = frac_phase(num, den);
  return {std::cos(2 * kPi * t), -std::sin(2 * kPi * t)};
}

// 1 - e(y), written as 2*sin(pi*t)*(sin(pi*t) + i*cos(pi*t)) to avoid the
// cancellation in 1 - cos near t = 0.
inline Cplx one_minus_unit_phase(const Rat& y) {
  const double t = frac_phase(y);
  const double st = std::sin(kPi * t), ct = std::cos(kPi * t);
  return {2 * st * st, 2 * st * ct};
}

// Fourier transform of the unit-interval indicator at a real frequency.
inline Cplx one_hat(const Rat& theta) {
  if (theta == 0) return {1.0, 0.0};
  const Cplx num = one_minus_unit_phase(theta);
  return num / Cplx(0.0, 2 * kPi * to_double(theta));
}

inline double one_hat_bound(const Rat& theta) {
  if (theta == 0) return 1.0;
  const double t = std::abs(to_double(theta));
  return std::min(1.0, 1.0 / (kPi * t));
}

// Average of e(xi * k / s^a) over the equal-split offsets k = 0..N-1.
inline Cplx equal_split_factor(const Int& xi, const Int& N, std::int64_t s,
                               const Int& a, std::size_t bit_budget = 1u << 20) {
  if (N < 1) throw std::invalid_argument("equal_split_factor: N must be >= 1");
  const Int sa = ipow_checked(s, a, bit_budget);
  if (xi % sa == 0) return {1.0, 0.0};
  const Cplx num = one_minus_unit_phase(Rat(xi * N, sa));
  const Cplx den = one_minus_unit_phase(Rat(xi, sa));
  return num / den / to_double(Rat(N));
}

inline Cplx equal_split_factor(const Int& xi, const StageParams& p,
                               std::size_t bit_budget = 1u << 20) {
  return equal_split_factor(xi, p.N_or_throw(), p.s, p.a, bit_budget);
}

// Average of e(xi * d / s^j) over a digit alphabet at scale j.
inline Cplx digit_average(const Int& xi, const Int& j, std::int64_t s,
                          const std::vector<std::int64_t>& digits,
                          std::size_t bit_budget = 1u << 20) {
  if (digits.empty()) throw std::invalid_argument("digit_average: empty alphabet");
  const Int sj = ipow_checked(s, j, bit_budget);
  Cplx total = 0.0;
  for (std::int64_t d : digits) total += unit_phase(Rat(xi * d, sj));
  return total / static_cast<double>(digits.size());
}

inline Cplx digit_average_full(const Int& xi, const Int& j, std::int64_t s,
                               std::size_t bit_budget = 1u << 20) {
  std::vector<std::int64_t> all(static_cast<std::size_t>(s));
  for (std::int64_t d = 0; d < s; ++d) all[static_cast<std::size_t>(d)] = d;
  return digit_average(xi, j, s, all, bit_budget);
}

// Normalized sum of e(xi * l / s^b) over blocks l whose b-a digits all lie in
// the favoured alphabet; factorizes as a product of digit averages.
inline Cplx favoured_digit_factor(const Int& xi, const StageParams& p,
                                  std::size_t bit_budget = 1u << 20) {
  Cplx prod = 1.0;
  for (Int j = p.a + 1; j <= p.b; ++j)
    prod *= digit_average(xi, j, p.s, p.digits.members, bit_budget);
  return prod;
}

// Direct enumeration of the same sum; the term count is r^{b-a}.
inline Cplx favoured_digit_factor_direct(const Int& xi, const StageParams& p,
                                         std::uint64_t term_budget = 1'000'000,
                                         std::size_t bit_budget = 1u << 20) {
  const Int width = p.b - p.a;
  const Int terms = ipow_checked(p.digits.size(), width, bit_budget);
  if (terms > Int(term_budget))
    throw std::overflow_error("favoured_digit_factor_direct: term budget exceeded");
  const Int sb = ipow_checked(p.s, p.b, bit_budget);
  const std::uint64_t count = terms.convert_to<std::uint64_t>();
  const auto w = width.convert_to<std::uint64_t>();
  Cplx total = 0.0;
  for (std::uint64_t idx = 0; idx < count; ++idx) {
    std::uint64_t rest = idx;
    Int l = 0;
    for (std::uint64_t pos = 0; pos < w; ++pos) {
      l = l * p.s + p.digits.members[rest % p.digits.members.size()];
      rest /= p.digits.members.size();
    }
    total += unit_phase(Rat(xi * l, sb));
  }
  return total / static_cast<double>(count);
}

// Normalized sum of e(xi * l / s^b) over all blocks l = 0..s^{b-a}-1.  The
// closed form collapses the geometric sum and is exact in each divisibility
// regime of xi.
inline Cplx full_digit_factor(const Int& xi, std::int64_t s, const Int& a,
                              const Int& b, std::size_t bit_budget = 1u << 20) {
  const Int sa = ipow_checked(s, a, bit_budget);
  const Int sb = ipow_checked(s, b, bit_budget);
  if (xi % sb == 0) return {1.0, 0.0};
  if (xi % sa == 0) return {0.0, 0.0};
  const Cplx num = one_minus_unit_phase(Rat(xi, sa));
  const Cplx den = one_minus_unit_phase(Rat(xi, sb));
  return num / den * to_double(Rat(sa, sb));
}

inline Cplx full_digit_factor(const Int& xi, const StageParams& p,
                              std::size_t bit_budget = 1u << 20) {
  return full_digit_factor(xi, p.s, p.a, p.b, bit_budget);
}

inline Cplx full_digit_factor_product(const Int& xi, const StageParams& p,
                                      std::size_t bit_budget = 1u << 20) {
  Cplx prod = 1.0;
  for (Int j = p.a + 1; j <= p.b; ++j)
    prod *= digit_average_full(xi, j, p.s, bit_budget);
  return prod;
}

// Convex combination of the favoured and full block averages with weight eps.
inline Cplx digit_factor(const Int& xi, const StageParams& p,
                         std::size_t bit_budget = 1u << 20) {
  const double eps = to_double(p.eps);
  return eps * favoured_digit_factor(xi, p, bit_budget) +
         (1.0 - eps) * full_digit_factor(xi, p, bit_budget);
}

// One full stage factor: equal split followed by the digit average.
inline Cplx stage_factor(const Int& xi, const StageParams& p,
                         std::size_t bit_budget = 1u << 20) {
  return equal_split_factor(xi, p, bit_budget) * digit_factor(xi, p, bit_budget);
}

// Companion bound for the stage factor, valid for 1 <= |xi| < s^b: the bias
// weight eps plus a Dirichlet-kernel tail.  On frequencies divisible by s^a
// the tail vanishes.
inline double stage_factor_bound(const Int& xi, const StageParams& p,
                                 std::size_t bit_budget = 1u << 20) {
  const Int sb = ipow_checked(p.s, p.b, bit_budget);
  const Int mag = abs(xi);
  if (mag < 1 || mag >= sb)
    throw std::domain_error("stage_factor_bound: need 1 <= |xi| < s^b");
  const double eps = to_double(p.eps);
  const Int sa = ipow_checked(p.s, p.a, bit_budget);
  if (xi % sa == 0) return eps;
  const double t = frac_phase(xi, sb);
  const double tail = to_double(Rat(sa, sb * p.N_or_throw()));
  return eps + tail / std::sin(kPi * t);
}

// Cross-stage factor: the digit average of one stage against the equal split
// of the next.
inline Cplx cross_factor(const Int& xi, const StageParams& p1,
                         const StageParams& p2,
                         std::size_t bit_budget = 1u << 20) {
  return digit_factor(xi, p1, bit_budget) * equal_split_factor(xi, p2, bit_budget);
}

// Companion bracket c0 * (eps_1 + s1^{a1}/|xi| + s1^{b1}/s2^{a2}), valid for
// 2*s1^{a1} <= |xi| and xi^2 < s1^{b1} * s2^{a2}.
inline double cross_factor_bound(const Int& xi, const StageParams& p1,
                                 const StageParams& p2, double c0 = 1.0,
                                 std::size_t bit_budget = 1u << 20) {
  const Int sa1 = ipow_checked(p1.s, p1.a, bit_budget);
  const Int sb1 = ipow_checked(p1.s, p1.b, bit_budget);
  const Int sa2 = ipow_checked(p2.s, p2.a, bit_budget);
  const Int mag = abs(xi);
  if (2 * sa1 > mag || mag * mag >= sb1 * sa2)
    throw std::domain_error("cross_factor_bound: frequency outside validity window");
  const Rat bracket = p1.eps + Rat(sa1, mag) + Rat(sb1, sa2);
  return c0 * to_double(bracket);
}

// Ratio of the next stage's equal-split numerator phase to the previous
// stage's grid phase; close to one while xi^2 <= s1^{b1} * s2^{a2}.
inline Cplx ratio_factor(const Int& xi, const StageParams& p1,
                         const StageParams& p2,
                         std::size_t bit_budget = 1u << 20) {
  const Int t = ipow_checked(p1.s, p1.b, bit_budget);
  if (xi % t == 0)
    throw std::domain_error("ratio_factor: frequency divisible by the grid scale");
  const Int sa2 = ipow_checked(p2.s, p2.a, bit_budget);
  const Cplx num = one_minus_unit_phase(Rat(xi * p2.N_or_throw(), sa2));
  const Cplx den = one_minus_unit_phase(Rat(xi, t));
  return num / den;
}

inline double ratio_factor_error_bound(const Int& xi, const StageParams& p1,
                                       const StageParams& p2, double c0 = 1.0,
                                       std::size_t bit_budget = 1u << 20) {
  const Int t = ipow_checked(p1.s, p1.b, bit_budget);
  const Int sa2 = ipow_checked(p2.s, p2.a, bit_budget);
  const Int mag = abs(xi);
  if (mag * mag > t * sa2)
    throw std::domain_error("ratio_factor_error_bound: frequency outside validity window");
  return c0 * to_double(Rat(mag * t, sa2));
}

// Refined single-frequency decay: every non-extreme adjacent digit pair of the
// frequency contributes a fixed multiplicative loss.
inline double refined_favoured_bound(const Int& not_extreme_pairs, std::int64_t s,
                                     std::int64_t r, double c = 0.5) {
  const double base = 1.0 - c / (static_cast<double>(r) * std::pow(double(s), 4));
  return std::pow(base, to_double(Rat(not_extreme_pairs)));
}

inline double refined_full_bound(const Int& not_extreme_pairs, std::int64_t s,
                                 double c = 0.5) {
  const double base = 1.0 - c / std::pow(double(s), 5);
  return std::pow(base, to_double(Rat(not_extreme_pairs)));
}

// Window bound for the equal-split factor: splitting the offsets along the
// scale-a' grid leaves a truncation term plus a product of full digit
// averages over the window.
inline double equal_split_window_bound(const Int& xi, const Int& N,
                                       std::int64_t s, const Int& a_prime,
                                       const Int& a,
                                       std::size_t bit_budget = 1u << 20) {
  if (a_prime < 0 || a_prime > a)
    throw std::invalid_argument("equal_split_window_bound: need 0 <= a' <= a");
  double prod = 1.0;
  for (Int k = a_prime + 1; k <= a; ++k)
    prod *= std::abs(digit_average_full(xi, k, s, bit_budget));
  const Int gap = ipow_checked(s, a - a_prime, bit_budget);
  return to_double(Rat(gap, N)) + prod;
}

}  // namespace skewmeas
