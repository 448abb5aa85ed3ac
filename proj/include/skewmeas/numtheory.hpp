#pragma once
// Number-theoretic primitives: factorizations of base pairs, digit-pair
// statistics, multiplicative orders, and the cardinality bounds used to
// control exceptional index sets in the correlation-sum estimates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "bigpow.hpp"

namespace skewmeas {

using boost::multiprecision::powm;

// n >= 2 as (prime, exponent) pairs in increasing prime order.
inline std::vector<std::pair<Int, Int>> factorize(const Int& n,
                                                  std::uint64_t budget = 1'000'000) {
  if (n < 2) throw std::invalid_argument("factorize: n must be >= 2");
  const auto m = factor_map(n, budget);
  return {m.begin(), m.end()};
}

inline bool is_prime(const Int& p) {
  if (p < 2) return false;
  const auto f = factor_map(p);
  return f.size() == 1 && f.begin()->second == 1;
}

// Largest power of j dividing k, and the cofactor: k = power * cofactor
// with j not dividing cofactor.
struct PowerSplit {
  Int power;
  Int cofactor;
};

inline PowerSplit factor_power(const Int& k, const Int& j) {
  if (k < 1) throw std::invalid_argument("factor_power: k must be >= 1");
  if (j < 2) throw std::invalid_argument("factor_power: j must be >= 2");
  PowerSplit out{1, k};
  while (out.cofactor % j == 0) {
    out.cofactor /= j;
    out.power *= j;
  }
  return out;
}

// Base-s digits of |n|, least significant first, zero-padded to len.
inline std::vector<std::int64_t> digits(const Int& n, std::int64_t s,
                                        std::size_t len) {
  if (s < 2) throw std::invalid_argument("digits: base must be >= 2");
  std::vector<std::int64_t> d(len, 0);
  Int v = boost::multiprecision::abs(n);
  for (std::size_t i = 0; v != 0; ++i) {
    const Int q = v % s;
    if (i < len) d[i] = q.convert_to<std::int64_t>();
    v /= s;
  }
  return d;
}

// Number of adjacent digit pairs avoiding the extreme values 0 and s^2 - 1:
// #{1 <= j <= l-1 : 1 <= d_{j-1} + d_j s <= s^2 - 2}.
inline std::int64_t pair_count(const std::vector<std::int64_t>& d,
                               std::int64_t s) {
  if (d.size() < 2) throw std::invalid_argument("pair_count: need >= 2 digits");
  std::int64_t n = 0;
  for (std::size_t j = 1; j < d.size(); ++j) {
    const std::int64_t v = d[j - 1] + d[j] * s;
    if (v >= 1 && v <= s * s - 2) ++n;
  }
  return n;
}

namespace detail {
// pair_count with the degenerate convention that blocks shorter than 2
// digits have no countable pairs.
inline std::int64_t pair_count_or_zero(const std::vector<std::int64_t>& d,
                                       std::int64_t s) {
  return d.size() < 2 ? 0 : pair_count(d, s);
}
}  // namespace detail

// ---------------------------------------------------------------------------
// The digit-pair density constant.

// log2 of (s^2-2)^k * 2^{1/2-k} / ((2k)^k (1-2k)^{1/2-k}) for k in (0, 1/4).
inline double kappa_gauge_log2(double k, std::int64_t s) {
  return k * std::log2(static_cast<double>(s) * s - 2.0) + (0.5 - k) -
         k * std::log2(2.0 * k) - (0.5 - k) * std::log2(1.0 - 2.0 * k);
}

// Largest kappa in (0, 1/4), located on a coarse 1e-4 grid and refined to
// 1e-6, with the gauge strictly below 2^{3/4}; a 1e-9 pullback keeps the
// returned value safely inside the strict inequality.
inline double kappa(std::int64_t s) {
  if (s < 2) throw std::invalid_argument("kappa: base must be >= 2");
  const double target = 0.75;
  double coarse = 0;
  for (double k = 0.25 - 1e-4; k > 0; k -= 1e-4) {
    if (kappa_gauge_log2(k, s) < target) {
      coarse = k;
      break;
    }
  }
  double fine = 0;
  for (double k = std::min(0.25 - 1e-6, coarse + 1e-4); k > 0; k -= 1e-6) {
    if (kappa_gauge_log2(k, s) < target) {
      fine = k;
      break;
    }
  }
  if (fine <= 0) throw std::runtime_error("kappa: no admissible value found");
  return fine - 1e-9;
}

// #{d in Z_s^l : pair count <= kap * l}, counted by dynamic programming over
// (position, previous digit, running count). The budget caps the implied
// enumeration size s^l.
inline Int extremal_digit_count(std::int64_t ell, std::int64_t s, double kap,
                                std::uint64_t budget = 10'000'000) {
  if (ell < 1) throw std::invalid_argument("extremal_digit_count: l >= 1");
  if (s < 2) throw std::invalid_argument("extremal_digit_count: s >= 2");
  if (!pow_fits(Int(s), Int(ell), 64) ||
      ipow(s, ell) > Int(budget))
    throw std::overflow_error("extremal_digit_count: enumeration budget exceeded");
  const auto cmax = static_cast<std::int64_t>(std::floor(kap * ell));
  if (cmax < 0) return 0;
  // dp[d][c]: sequences of the current length ending in digit d with c
  // non-extreme adjacent pairs (counts above cmax are discarded).
  std::vector<std::vector<Int>> dp(s, std::vector<Int>(cmax + 1, 0));
  for (std::int64_t d = 0; d < s; ++d) dp[d][0] = 1;
  for (std::int64_t pos = 1; pos < ell; ++pos) {
    std::vector<std::vector<Int>> nx(s, std::vector<Int>(cmax + 1, 0));
    for (std::int64_t prev = 0; prev < s; ++prev)
      for (std::int64_t c = 0; c <= cmax; ++c) {
        if (dp[prev][c] == 0) continue;
        for (std::int64_t d = 0; d < s; ++d) {
          const std::int64_t v = prev + d * s;
          const std::int64_t c2 = c + (v >= 1 && v <= s * s - 2 ? 1 : 0);
          if (c2 <= cmax) nx[d][c2] += dp[prev][c];
        }
      }
    dp = std::move(nx);
  }
  Int total = 0;
  for (std::int64_t d = 0; d < s; ++d)
    for (std::int64_t c = 0; c <= cmax; ++c) total += dp[d][c];
  return total;
}

// Companion cardinality bound kappa^{-1} 2^{3l/4}, valid for every l >= 1.
inline double extremal_digit_bound(std::int64_t ell, double kap) {
  return std::exp2(0.75 * ell) / kap;
}

// ---------------------------------------------------------------------------
// Multiplicative orders and power-divisibility sets.

// min{n >= 1 : a^n = 1 mod m}; requires gcd(a, m) = 1 and m >= 2.
inline Int mult_order(const Int& a, const Int& m,
                      std::uint64_t budget = 10'000'000) {
  if (m < 2) throw std::invalid_argument("mult_order: modulus must be >= 2");
  const Int a0 = ((a % m) + m) % m;
  if (boost::multiprecision::gcd(a0, m) != 1)
    throw std::invalid_argument("mult_order: arguments must be coprime");
  Int x = a0 % m, n = 1;
  while (x != 1) {
    x = (x * a0) % m;
    ++n;
    if (n > Int(budget)) throw std::overflow_error("mult_order: budget exceeded");
  }
  return n;
}

// Lower bound p^k / (2 b^p) for ord_{p^k}(b), p prime not dividing b.
inline Rat mult_order_bound(const Int& p, const Int& k, const Int& b) {
  return Rat(ipow_checked(p, k), 2 * ipow_checked(b, p));
}

// {v in Z_N : p^k | (b^v - 1)} for a prime p not dividing b.
inline std::vector<Int> divisible_power_set(const Int& N, const Int& k,
                                            const Int& p, const Int& b) {
  if (N < 1) throw std::invalid_argument("divisible_power_set: N must be >= 1");
  if (k < 1) throw std::invalid_argument("divisible_power_set: k must be >= 1");
  if (!is_prime(p)) throw std::invalid_argument("divisible_power_set: p must be prime");
  if (b < 2 || b % p == 0)
    throw std::invalid_argument("divisible_power_set: need b >= 2 with p not dividing b");
  const Int pk = ipow_checked(p, k);
  std::vector<Int> out;
  Int x = 1;  // b^v mod p^k
  for (Int v = 0; v < N; ++v) {
    if (x == 1) out.push_back(v);
    x = (x * b) % pk;
  }
  return out;
}

// Advertised companion cardinality bound 2 b^p p^{-k} N.  Caution: the set
// always contains v = 0, so its size is at least 1, while this expression
// drops below 1 whenever N < p^k / (2 b^p).  Outside that small-N regime the
// bound holds; certifiers that need an unconditional majorant should use
// 1 + 2 b^p p^{-k} N instead (one forced element plus one per full period).
inline Rat divisible_power_bound(const Int& N, const Int& k, const Int& p,
                                 const Int& b) {
  return Rat(2 * ipow_checked(b, p) * N, ipow_checked(p, k));
}

// ---------------------------------------------------------------------------
// Paired factorizations of multiplicatively independent bases.

// b = prod p_j^{beta_j}, s = prod p_j^{sigma_j} over the union of their
// prime supports, ordered so sigma_1/beta_1 >= ... >= sigma_n/beta_n with
// beta_j = 0 ranked first.  tau = beta_1/sigma_1 is defined exactly when
// every prime of s divides b (the "shared support" case).
struct PairFactorization {
  std::vector<Int> primes;
  std::vector<Int> beta;
  std::vector<Int> sigma;
  bool shared_support = false;  // every prime of s divides b
  std::optional<Rat> tau;       // beta_1 / sigma_1 when shared_support

  const Int& p1() const { return primes.front(); }
  const Int& beta1() const { return beta.front(); }
  const Int& sigma1() const { return sigma.front(); }
  std::size_t size() const { return primes.size(); }
};

inline PairFactorization pair_factorization(const Int& b, const Int& s) {
  if (b < 2 || s < 2) throw std::invalid_argument("pair_factorization: bases >= 2");
  const auto fb = factor_map(b), fs = factor_map(s);
  if (fb.size() == fs.size()) {  // dependent iff exponent vectors proportional
    bool dep = true;
    auto ib = fb.begin();
    auto is = fs.begin();
    const Int eb0 = ib->second, es0 = is->second;
    for (; ib != fb.end(); ++ib, ++is)
      if (ib->first != is->first || ib->second * es0 != is->second * eb0) {
        dep = false;
        break;
      }
    if (dep)
      throw std::invalid_argument(
          "pair_factorization: bases are multiplicatively dependent");
  }
  std::vector<std::size_t> order;
  PairFactorization pf;
  for (const auto& [p, e] : fb) {
    pf.primes.push_back(p);
    pf.beta.push_back(e);
    const auto it = fs.find(p);
    pf.sigma.push_back(it == fs.end() ? Int(0) : it->second);
  }
  for (const auto& [p, e] : fs)
    if (fb.find(p) == fb.end()) {
      pf.primes.push_back(p);
      pf.beta.push_back(0);
      pf.sigma.push_back(e);
    }
  order.resize(pf.primes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // sigma/beta descending; beta = 0 counts as +infinity; ties by prime.
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const bool inf_i = pf.beta[i] == 0, inf_j = pf.beta[j] == 0;
    if (inf_i != inf_j) return inf_i;
    if (!inf_i) {
      const Int lhs = pf.sigma[i] * pf.beta[j], rhs = pf.sigma[j] * pf.beta[i];
      if (lhs != rhs) return lhs > rhs;
    }
    return pf.primes[i] < pf.primes[j];
  });
  PairFactorization out;
  out.shared_support = true;
  for (std::size_t i : order) {
    out.primes.push_back(pf.primes[i]);
    out.beta.push_back(pf.beta[i]);
    out.sigma.push_back(pf.sigma[i]);
    if (pf.sigma[i] > 0 && pf.beta[i] == 0) out.shared_support = false;
  }
  if (out.shared_support) out.tau = Rat(out.beta1(), out.sigma1());
  return out;
}

// Largest x with s^x | b^u:  min over primes of s of floor(u beta_j / sigma_j).
inline Int s_power_in_bu(const PairFactorization& pf, const Int& u) {
  if (u < 0) throw std::invalid_argument("s_power_in_bu: u must be >= 0");
  bool any = false;
  Int best = 0;
  for (std::size_t j = 0; j < pf.size(); ++j) {
    if (pf.sigma[j] == 0) continue;
    const Int cand = floor_div(u * pf.beta[j], pf.sigma[j]);
    if (!any || cand < best) best = cand;
    any = true;
  }
  return any ? best : Int(0);
}

// (b^u)_s' mod m, computed prime-by-prime without materializing b^u.
inline Int bu_cofactor_mod(const PairFactorization& pf, const Int& u,
                           const Int& m) {
  if (m < 1) throw std::invalid_argument("bu_cofactor_mod: modulus >= 1");
  const Int x = s_power_in_bu(pf, u);
  Int acc = 1 % m;
  for (std::size_t j = 0; j < pf.size(); ++j) {
    const Int e = u * pf.beta[j] - x * pf.sigma[j];
    if (e < 0) throw std::logic_error("bu_cofactor_mod: negative exponent");
    if (e > 0) {
      const Int base = pf.primes[j] % m;
      const Int factor = powm(base, e, m);
      acc = (acc * factor) % m;
    }
  }
  return acc;
}

// {u in {0..s^k-1} : xi (b^u)_s' = rho mod s^k}.
inline std::vector<Int> residue_hit_set(const Int& xi, const Int& rho,
                                        const Int& b, const Int& s,
                                        std::int64_t k,
                                        std::uint64_t budget = 10'000'000) {
  if (k < 1) throw std::invalid_argument("residue_hit_set: k must be >= 1");
  if (xi < 0 || rho < 0) throw std::invalid_argument("residue_hit_set: xi, rho >= 0");
  const PairFactorization pf = pair_factorization(b, s);
  const Int sk = ipow_checked(s, Int(k));
  if (sk > Int(budget))
    throw std::overflow_error("residue_hit_set: enumeration budget exceeded");
  if (rho >= sk) throw std::invalid_argument("residue_hit_set: rho out of range");
  std::vector<Int> out;
  for (Int u = 0; u < sk; ++u)
    if ((xi * bu_cofactor_mod(pf, u, sk)) % sk == rho) out.push_back(u);
  return out;
}

// Companion cardinality bound c(b,s) (xi)_{p1} (s/p1)^k with the explicit
// constant c(b,s) = 2 sigma_1 b^{p1} (b^{sigma_1}-1)/(b-1).
inline Rat residue_hit_bound(const Int& xi, const Int& b, const Int& s,
                             std::int64_t k) {
  if (xi < 1) throw std::invalid_argument("residue_hit_bound: xi must be >= 1");
  const PairFactorization pf = pair_factorization(b, s);
  const Rat c = Rat(2 * pf.sigma1() * ipow_checked(b, pf.p1()) *
                        (ipow_checked(b, pf.sigma1()) - 1),
                    b - 1);
  const Int xi_p1 = factor_power(xi, pf.p1()).power;
  return c * Rat(xi_p1) * Rat(ipow_checked(s, Int(k)), ipow_checked(pf.p1(), Int(k)));
}

// {u in Z_{s^l} : the digit block l'..l-1 of xi (b^u)_s' has pair count
// <= kap * (l - l')}.
inline std::vector<Int> bad_block_set(const Int& xi, const Int& b, const Int& s,
                                      std::int64_t ell, std::int64_t ell_prime,
                                      double kap,
                                      std::uint64_t budget = 10'000'000) {
  if (ell < 1 || ell_prime < 0 || ell_prime >= ell)
    throw std::invalid_argument("bad_block_set: need 0 <= l' < l");
  const PairFactorization pf = pair_factorization(b, s);
  const Int sl = ipow_checked(s, Int(ell));
  if (sl > Int(budget))
    throw std::overflow_error("bad_block_set: enumeration budget exceeded");
  const std::int64_t s64 = s.convert_to<std::int64_t>();
  const std::int64_t len = ell - ell_prime;
  std::vector<Int> out;
  for (Int u = 0; u < sl; ++u) {
    const Int X = (boost::multiprecision::abs(xi) * bu_cofactor_mod(pf, u, sl)) % sl;
    auto d = digits(X, s64, static_cast<std::size_t>(ell));
    const std::vector<std::int64_t> block(d.begin() + ell_prime, d.end());
    if (detail::pair_count_or_zero(block, s64) <=
        static_cast<std::int64_t>(std::floor(kap * len)))
      out.push_back(u);
  }
  return out;
}

// Companion cardinality bound 2 kappa^{-1} 2^{-l/4 - 3l'/4} log2(s)
// s^{l+l'} b^{2s} (xi)_{p1}.
inline double bad_block_bound(const Int& xi, const Int& b, const Int& s,
                              std::int64_t ell, std::int64_t ell_prime,
                              double kap) {
  if (xi < 1) throw std::invalid_argument("bad_block_bound: xi must be >= 1");
  const PairFactorization pf = pair_factorization(b, s);
  const Int xi_p1 = factor_power(xi, pf.p1()).power;
  const double lg_s = std::log2(to_double(Rat(s)));
  const double lg = 1.0 - ell / 4.0 - 3.0 * ell_prime / 4.0 - std::log2(kap) +
                    (ell + ell_prime) * lg_s +
                    2.0 * to_double(Rat(s)) * std::log2(to_double(Rat(b))) +
                    std::log2(to_double(Rat(xi_p1)));
  return std::exp2(lg) * lg_s;
}

// ---------------------------------------------------------------------------
// Windowed counts of non-extreme digit pairs.

struct JCounts {
  Int J_bar;    // window a..b-1 on digits of |xi|
  Int J_under;  // window a'..a-1 on digits of |xi|
  Int J_comp;   // window a'-k0..b-k0-1 on digits of |xi / s^{k0}|
  Int k0;
};

namespace detail {
// 1 <= d_{j-1} + d_j s <= s^2 - 2 with d_j(x) = 0 for j < 0.
inline bool not_extreme_at(const std::vector<std::int64_t>& d, std::int64_t j,
                           std::int64_t s) {
  const auto at = [&](std::int64_t i) -> std::int64_t {
    return i < 0 || i >= static_cast<std::int64_t>(d.size()) ? 0 : d[i];
  };
  const std::int64_t v = at(j - 1) + at(j) * s;
  return v >= 1 && v <= s * s - 2;
}

inline Int window_count(const std::vector<std::int64_t>& d, std::int64_t lo,
                        std::int64_t hi, std::int64_t s) {
  Int n = 0;
  for (std::int64_t j = lo; j <= hi; ++j)
    if (not_extreme_at(d, j, s)) ++n;
  return n;
}
}  // namespace detail

// The three windowed pair counts entering the refined decay estimates.  k0
// defaults to the full s-adic valuation of xi; an explicit k0 must divide.
inline JCounts block_J_counts(const Int& xi, std::int64_t s, std::int64_t a_prime,
                              std::int64_t a, std::int64_t b,
                              std::optional<Int> k0_opt = std::nullopt) {
  if (s < 2) throw std::invalid_argument("block_J_counts: base must be >= 2");
  if (!(0 <= a_prime && a_prime <= a && a < b))
    throw std::invalid_argument("block_J_counts: need 0 <= a' <= a < b");
  JCounts jc{0, 0, 0, 0};
  if (xi == 0) return jc;
  const Int axi = boost::multiprecision::abs(xi);
  Int k0 = 0, zeta = axi;
  if (k0_opt) {
    k0 = *k0_opt;
    if (k0 < 0) throw std::invalid_argument("block_J_counts: k0 must be >= 0");
    const Int pw = ipow_checked(Int(s), k0);
    if (axi % pw != 0)
      throw std::invalid_argument("block_J_counts: s^{k0} does not divide xi");
    zeta = axi / pw;
  } else {
    while (zeta % s == 0) {
      zeta /= s;
      ++k0;
    }
  }
  const auto dxi = digits(axi, s, static_cast<std::size_t>(
                                      digit_count(axi, Int(s)).convert_to<std::int64_t>()));
  const auto dz = digits(zeta, s, static_cast<std::size_t>(
                                      digit_count(zeta, Int(s)).convert_to<std::int64_t>()));
  jc.k0 = k0;
  jc.J_bar = detail::window_count(dxi, a, b - 1, s);
  jc.J_under = detail::window_count(dxi, a_prime, a - 1, s);
  const std::int64_t k064 = k0.convert_to<std::int64_t>();
  jc.J_comp = detail::window_count(dz, a_prime - k064, b - k064 - 1, s);
  return jc;
}

}  // namespace skewmeas
