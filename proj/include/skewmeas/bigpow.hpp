#pragma once
// Exact big-integer / rational arithmetic helpers shared by every module:
// power materialization under a bit budget, exact comparison of products
// c * s^e without materialization, valuations, and exact phase reduction.

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace skewmeas {

using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

inline std::size_t bit_length(const Int& n) {
  if (n == 0) return 0;
  return boost::multiprecision::msb(boost::multiprecision::abs(n)) + 1;
}

// n^e for non-negative e that fits the given bit budget; throws otherwise.
inline Int ipow_checked(const Int& base, const Int& exp,
                        std::size_t bit_budget = (std::size_t{1} << 20)) {
  if (exp < 0) throw std::invalid_argument("ipow_checked: negative exponent");
  if (base == 0) return exp == 0 ? Int(1) : Int(0);
  const std::size_t base_bits = bit_length(base);
  if (base_bits > 1 && exp > Int(bit_budget))
    throw std::overflow_error("ipow_checked: exponent over bit budget");
  // Upper estimate: exp * bits(base) bits.
  if (base_bits > 1) {
    Int est = exp * Int(base_bits);
    if (est > Int(bit_budget))
      throw std::overflow_error("ipow_checked: result over bit budget");
  }
  Int r = 1, b = base;
  Int e = exp;
  while (e > 0) {
    if ((e & 1) != 0) r *= b;
    e >>= 1;
    if (e > 0) b *= b;
  }
  return r;
}

inline Int ipow(std::int64_t base, std::int64_t exp) {
  return ipow_checked(Int(base), Int(exp));
}

inline bool pow_fits(const Int& base, const Int& exp, std::size_t bit_budget) {
  if (base == 0 || base == 1 || exp == 0) return true;
  if (exp < 0) return false;
  if (exp > Int(bit_budget)) return false;
  return exp * Int(bit_length(base)) <= Int(bit_budget);
}

inline Int floor_div(const Int& a, const Int& b) {
  Int q = a / b, r = a % b;
  if (r != 0 && ((r < 0) != (b < 0))) --q;
  return q;
}

inline Int ceil_div(const Int& a, const Int& b) { return -floor_div(-a, b); }

// Largest k with p^k | n (n != 0), together with the cofactor n / p^k.
struct Valuation {
  Int exponent;
  Int cofactor;
};

inline Valuation valuation(Int n, const Int& p) {
  if (n == 0) throw std::invalid_argument("valuation of zero");
  if (p < 2) throw std::invalid_argument("valuation base < 2");
  Valuation v{0, n};
  while (v.cofactor % p == 0) {
    v.cofactor /= p;
    ++v.exponent;
  }
  return v;
}

// Trial-division factorization map p -> e. Budgeted; covers the small bases
// and coefficients arising in schedule validation and classifier thresholds.
inline std::map<Int, Int> factor_map(Int n, std::uint64_t budget = 1'000'000) {
  if (n <= 0) throw std::invalid_argument("factor_map: need n >= 1");
  std::map<Int, Int> f;
  for (Int p = 2; p * p <= n; ++p) {
    if (Int(budget) < p) throw std::overflow_error("factor_map: budget exceeded");
    while (n % p == 0) {
      ++f[p];
      n /= p;
    }
  }
  if (n > 1) ++f[n];
  return f;
}

namespace detail {

// Exact rational bounds lo <= log2(v) < hi at resolution ~1/k, from the bit
// length of v^k (pure integer arithmetic).
inline void log2_bounds(const Int& v, unsigned k, Rat& lo, Rat& hi) {
  Int vk = 1;
  Int base = v;
  unsigned e = k;
  while (e > 0) {
    if (e & 1u) vk *= base;
    e >>= 1u;
    if (e > 0) base *= base;
  }
  const Int bits(static_cast<std::uint64_t>(bit_length(vk)));
  lo = Rat(bits - 1, k);
  hi = Rat(bits, k);
}

}  // namespace detail

// Exact three-way comparison of c1*s1^e1 vs c2*s2^e2 (all parts >= 0,
// c >= 1, s >= 1, e >= 0).  Strategy: materialize when small; same-base
// exponent reduction; exact equality via prime-exponent vectors; otherwise
// log2 interval refinement, which terminates because unequal values have
// strictly separated logarithms.
inline int pow_cmp(const Int& c1, const Int& s1, const Int& e1,
                   const Int& c2, const Int& s2, const Int& e2,
                   std::size_t bit_budget = (std::size_t{1} << 20)) {
  if (c1 < 1 || c2 < 1 || s1 < 1 || s2 < 1 || e1 < 0 || e2 < 0)
    throw std::invalid_argument("pow_cmp: parts must be positive");
  auto cmp = [](const Int& a, const Int& b) { return a < b ? -1 : (a > b ? 1 : 0); };

  const bool small1 = pow_fits(s1, e1, bit_budget);
  const bool small2 = pow_fits(s2, e2, bit_budget);
  if (small1 && small2)
    return cmp(c1 * ipow_checked(s1, e1, bit_budget),
               c2 * ipow_checked(s2, e2, bit_budget));

  if (s1 == s2 && s1 >= 2) {
    // Reduce to c1*s^(e1-e2) vs c2 (or the mirror image).
    const Int* cl = &c1;
    const Int* cr = &c2;
    Int d = e1 - e2;
    int sign = 1;
    if (d < 0) {
      std::swap(cl, cr);
      d = -d;
      sign = -1;
    }
    if (d > Int(64 + bit_length(*cr))) return sign;  // s^d alone exceeds cr
    Int lhs = *cl * ipow_checked(s1, d, bit_budget);
    return sign * cmp(lhs, *cr);
  }

  bool equality_checked = false;
  for (unsigned k = 8; k <= (1u << 22); k *= 4) {
    Rat lo_s1, hi_s1, lo_s2, hi_s2, lo_c1, hi_c1, lo_c2, hi_c2;
    detail::log2_bounds(s1, k, lo_s1, hi_s1);
    detail::log2_bounds(s2, k, lo_s2, hi_s2);
    detail::log2_bounds(c1, k, lo_c1, hi_c1);
    detail::log2_bounds(c2, k, lo_c2, hi_c2);
    Rat lo1 = Rat(e1) * lo_s1 + lo_c1, hi1 = Rat(e1) * hi_s1 + hi_c1;
    Rat lo2 = Rat(e2) * lo_s2 + lo_c2, hi2 = Rat(e2) * hi_s2 + hi_c2;
    if (hi1 < lo2) return -1;
    if (hi2 < lo1) return 1;
    if (!equality_checked) {
      equality_checked = true;
      std::map<Int, Int> f1 = factor_map(c1), f2 = factor_map(c2);
      for (auto& [p, e] : factor_map(s1)) f1[p] += e * e1;
      for (auto& [p, e] : factor_map(s2)) f2[p] += e * e2;
      std::erase_if(f1, [](const auto& kv) { return kv.second == 0; });
      std::erase_if(f2, [](const auto& kv) { return kv.second == 0; });
      if (f1 == f2) return 0;
    }
  }
  throw std::runtime_error("pow_cmp: interval refinement failed to separate");
}

// Convenience wrappers for the recurring shape "coeff * s^e ? t^f".
inline bool pow_less(const Int& c1, const Int& s1, const Int& e1,
                     const Int& s2, const Int& e2) {
  return pow_cmp(c1, s1, e1, Int(1), s2, e2) < 0;
}

// Exact fractional part of num/den in [0,1), converted to double last.
inline double frac_phase(const Int& num, const Int& den) {
  if (den <= 0) throw std::invalid_argument("frac_phase: den must be positive");
  Int r = num % den;
  if (r < 0) r += den;
  return Rat(r, den).convert_to<double>();
}

inline double frac_phase(const Rat& x) {
  return frac_phase(numerator(x), denominator(x));
}

inline double to_double(const Rat& x) { return x.convert_to<double>(); }

// Number of base-s digits of n (>=1 for n>=1); floor(log_s n) + 1.
inline Int digit_count(Int n, const Int& s) {
  if (n < 0) n = -n;
  Int d = 0;
  while (n > 0) {
    n /= s;
    ++d;
  }
  return d;
}

inline Int parse_int(const std::string& s) { return Int(s); }

// Natural log of a positive integer, stable at arbitrary magnitude.
inline double log_int(const Int& n) {
  if (n <= 0) throw std::domain_error("log_int: need n > 0");
  const std::size_t bits = bit_length(n);
  if (bits <= 512) return std::log(n.convert_to<double>());
  const Int top = n >> (bits - 64);
  return std::log(top.convert_to<double>()) +
         static_cast<double>(bits - 64) * 0.69314718055994530942;
}

inline double log_rat(const Rat& q) {
  if (q <= 0) throw std::domain_error("log_rat: need q > 0");
  return log_int(numerator(q)) - log_int(denominator(q));
}

}  // namespace skewmeas
