#pragma once

// Scalars of Z/p^m: the base coefficient ring at working precision m.
// Values carry their ring tag so mixed-context arithmetic is caught at the
// site of the bug instead of producing silent garbage.

#include <cstdint>
#include <string>

#include "phigamma/arith.hpp"
#include "phigamma/errors.hpp"

namespace phigamma {

// p-adic valuation truncated at precision m; the zero element reports
// INFINITE rather than a number.
struct Valuation {
  std::int64_t v = 0;
  bool infinite = false;

  static Valuation finite(std::int64_t val) { return Valuation{val, false}; }
  static Valuation inf() { return Valuation{0, true}; }

  friend bool operator==(const Valuation&, const Valuation&) = default;
  // Order with INFINITE as the top element.
  friend bool operator<(const Valuation& a, const Valuation& b) {
    if (a.infinite) return false;
    if (b.infinite) return true;
    return a.v < b.v;
  }
};

// Ring tag for Z/p^m.
struct Zpm {
  std::uint32_t p = 0;
  std::uint32_t m = 0;
  std::uint64_t q = 0;  // p^m

  static Zpm make(std::uint64_t p, std::uint32_t m) {
    if (!is_prime_u64(p)) throw std::invalid_argument("Zpm: p must be prime");
    if (m == 0) throw std::invalid_argument("Zpm: precision m must be >= 1");
    Zpm r;
    r.p = static_cast<std::uint32_t>(p);
    r.m = m;
    r.q = pow_checked_u64(p, m);
    return r;
  }

  friend bool operator==(const Zpm&, const Zpm&) = default;
};

class ModInt {
 public:
  ModInt() = default;
  ModInt(const Zpm& ring, std::uint64_t value) : r_(ring), v_(value % ring.q) {}
  ModInt(const Zpm& ring, const BigInt& value) : r_(ring), v_(mod_to_u64(value, ring.q)) {}

  static ModInt zero(const Zpm& ring) { return ModInt(ring, std::uint64_t{0}); }
  static ModInt one(const Zpm& ring) { return ModInt(ring, std::uint64_t{1}); }
  static ModInt from_int(const Zpm& ring, std::int64_t value) {
    std::int64_t q = static_cast<std::int64_t>(ring.q);
    std::int64_t v = value % q;
    if (v < 0) v += q;
    return ModInt(ring, static_cast<std::uint64_t>(v));
  }

  const Zpm& ring() const { return r_; }
  std::uint64_t value() const { return v_; }
  bool is_zero() const { return v_ == 0; }

  friend ModInt operator+(const ModInt& a, const ModInt& b) {
    a.check(b);
    std::uint64_t s = a.v_ + b.v_;
    if (s >= a.r_.q) s -= a.r_.q;
    return ModInt(a.r_, s);
  }
  friend ModInt operator-(const ModInt& a, const ModInt& b) {
    a.check(b);
    std::uint64_t s = a.v_ + a.r_.q - b.v_;
    if (s >= a.r_.q) s -= a.r_.q;
    return ModInt(a.r_, s);
  }
  friend ModInt operator*(const ModInt& a, const ModInt& b) {
    a.check(b);
    return ModInt(a.r_, mulmod_u64(a.v_, b.v_, a.r_.q));
  }
  ModInt operator-() const { return ModInt(r_, v_ == 0 ? 0 : r_.q - v_); }

  ModInt& operator+=(const ModInt& b) { return *this = *this + b; }
  ModInt& operator-=(const ModInt& b) { return *this = *this - b; }
  ModInt& operator*=(const ModInt& b) { return *this = *this * b; }

  friend bool operator==(const ModInt& a, const ModInt& b) {
    return a.r_ == b.r_ && a.v_ == b.v_;
  }

  // Inverse of a unit; NotAUnit when v_p > 0.
  ModInt inv_unit() const {
    if (v_ % r_.p == 0) throw not_a_unit("ModInt::inv_unit: valuation is positive");
    return ModInt(r_, invmod_u64(v_, r_.q));
  }

  Valuation valuation() const {
    if (v_ == 0) return Valuation::inf();
    std::uint64_t x = v_;
    std::int64_t v = 0;
    while (x % r_.p == 0) { x /= r_.p; ++v; }
    return Valuation::finite(v);
  }

  ModInt pow(std::uint64_t e) const { return ModInt(r_, powmod_u64(v_, e, r_.q)); }

  // Exact division by p. The quotient is well defined only mod p^{m-1}; the
  // stored value fixes the spare top digit to zero, which is harmless as long
  // as the caller scales back by p before comparing.
  ModInt exact_div_p() const {
    if (v_ % r_.p != 0) throw std::invalid_argument("ModInt::exact_div_p: value not divisible by p");
    return ModInt(r_, v_ / r_.p);
  }

  std::string to_string() const { return std::to_string(v_); }

 private:
  void check(const ModInt& other) const {
    if (!(r_ == other.r_)) throw context_mismatch("ModInt: mixed Z/p^m contexts");
  }

  Zpm r_;
  std::uint64_t v_ = 0;
};

}  // namespace phigamma
