#pragma once

// Exact integer arithmetic helpers shared by the coefficient rings and the
// operator layer: machine-word modular arithmetic, arbitrary-precision
// integers for character values, and binomial rows C(c, k) mod p^m computed
// without rounding.

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <vector>

#include "phigamma/errors.hpp"

namespace phigamma {

using BigInt = boost::multiprecision::cpp_int;

inline std::uint64_t mulmod_u64(std::uint64_t a, std::uint64_t b, std::uint64_t mod) {
  return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % mod);
}

inline std::uint64_t powmod_u64(std::uint64_t base, std::uint64_t exp, std::uint64_t mod) {
  std::uint64_t r = 1 % mod;
  base %= mod;
  while (exp) {
    if (exp & 1) r = mulmod_u64(r, base, mod);
    base = mulmod_u64(base, base, mod);
    exp >>= 1;
  }
  return r;
}

// Inverse of a modulo mod via extended Euclid; throws not_a_unit otherwise.
inline std::uint64_t invmod_u64(std::uint64_t a, std::uint64_t mod) {
  std::int64_t t = 0, nt = 1;
  std::int64_t r = static_cast<std::int64_t>(mod), nr = static_cast<std::int64_t>(a % mod);
  while (nr != 0) {
    std::int64_t q = r / nr;
    std::int64_t tmp = t - q * nt;
    t = nt; nt = tmp;
    tmp = r - q * nr;
    r = nr; nr = tmp;
  }
  if (r != 1) throw not_a_unit("invmod_u64: argument shares a factor with the modulus");
  if (t < 0) t += static_cast<std::int64_t>(mod);
  return static_cast<std::uint64_t>(t);
}

inline bool is_prime_u64(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

// p^m as a machine word; rejects anything that does not comfortably fit.
inline std::uint64_t pow_checked_u64(std::uint64_t p, std::uint32_t m) {
  std::uint64_t q = 1;
  for (std::uint32_t i = 0; i < m; ++i) {
    if (q > (std::uint64_t{1} << 62) / p)
      throw std::invalid_argument("pow_checked_u64: p^m exceeds the supported word range");
    q *= p;
  }
  return q;
}

// Non-negative residue of an arbitrary-precision integer.
inline std::uint64_t mod_to_u64(const BigInt& c, std::uint64_t mod) {
  BigInt r = c % mod;
  if (r < 0) r += mod;
  return static_cast<std::uint64_t>(r);
}

inline BigInt bigint_pow(BigInt base, std::uint64_t exp) {
  BigInt r = 1;
  while (exp) {
    if (exp & 1) r *= base;
    base *= base;
    exp >>= 1;
  }
  return r;
}

inline BigInt powmod_big(BigInt base, BigInt exp, const BigInt& mod) {
  BigInt r = 1;
  base %= mod;
  if (base < 0) base += mod;
  while (exp > 0) {
    if ((exp & 1) != 0) r = r * base % mod;
    base = base * base % mod;
    exp >>= 1;
  }
  return r;
}

// Teichmueller lift: the unique (p-1)-st root of unity in Z/p^N congruent to
// seed mod p, found by iterating x <- x^p (stabilizes once exponent p^k tops N).
inline BigInt teichmueller(std::uint64_t p, std::uint64_t seed, std::uint32_t prec_exp) {
  if (seed % p == 0) throw not_a_unit("teichmueller: seed divisible by p");
  BigInt mod = bigint_pow(BigInt(p), prec_exp);
  BigInt x = seed % p;
  for (std::uint32_t i = 0; i <= prec_exp + 1; ++i) {
    BigInt nx = powmod_big(x, BigInt(p), mod);
    if (nx == x) break;
    x = nx;
  }
  return x;
}

// Row of binomial coefficients C(c, k) mod `mod` for k = 0..kmax, with c an
// exact (possibly huge, possibly negative) integer. Kept exact throughout:
// C(c, k+1) = C(c, k) * (c - k) / (k + 1) with an exact division.
inline std::vector<std::uint64_t> binomial_row_mod(const BigInt& c, std::uint64_t kmax,
                                                   std::uint64_t mod) {
  std::vector<std::uint64_t> out;
  out.reserve(static_cast<std::size_t>(kmax) + 1);
  BigInt cur = 1;
  out.push_back(1 % mod);
  for (std::uint64_t k = 0; k < kmax; ++k) {
    cur *= (c - k);
    cur /= (k + 1);  // exact: C(c, k+1) is an integer
    out.push_back(mod_to_u64(cur, mod));
  }
  return out;
}

}  // namespace phigamma
