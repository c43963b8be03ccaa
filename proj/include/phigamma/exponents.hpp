#pragma once

// Exact rational exponents (denominators are p-powers in perfect mode),
// exponent vectors, and the window type that tracks where a truncated series
// is exact.
//
// Window semantics, used throughout the series layer:
//   * entire == true: the stored monomials are the complete element; lo/hi
//     are just its support bounding box.
//   * entire == false: the true element has no support below lo in each
//     variable (hard floor), stored coefficients are exact on the box
//     {e : lo <= e <= hi componentwise}, and coefficients with some e > hi
//     are unknown.

#include <boost/container/small_vector.hpp>

#include <array>
#include <cstdint>
#include <numeric>
#include <string>

#include "phigamma/errors.hpp"

namespace phigamma {

// Exact rational with small components; intermediate products go through
// __int128 so desk-scale exponent/norm arithmetic cannot overflow silently.
struct Rat {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rat make(std::int64_t n, std::int64_t d) {
    if (d == 0) throw std::invalid_argument("Rat: zero denominator");
    if (d < 0) { n = -n; d = -d; }
    std::int64_t g = std::gcd(n < 0 ? -n : n, d);
    if (g > 1) { n /= g; d /= g; }
    return Rat{n, d};
  }
  static Rat of(std::int64_t n) { return Rat{n, 1}; }

  bool is_integer() const { return den == 1; }

  friend Rat operator+(const Rat& a, const Rat& b) {
    __int128 n = static_cast<__int128>(a.num) * b.den + static_cast<__int128>(b.num) * a.den;
    __int128 d = static_cast<__int128>(a.den) * b.den;
    return norm128(n, d);
  }
  friend Rat operator-(const Rat& a, const Rat& b) {
    __int128 n = static_cast<__int128>(a.num) * b.den - static_cast<__int128>(b.num) * a.den;
    __int128 d = static_cast<__int128>(a.den) * b.den;
    return norm128(n, d);
  }
  friend Rat operator*(const Rat& a, const Rat& b) {
    return norm128(static_cast<__int128>(a.num) * b.num, static_cast<__int128>(a.den) * b.den);
  }
  Rat operator-() const { return Rat{-num, den}; }

  friend bool operator==(const Rat& a, const Rat& b) { return a.num == b.num && a.den == b.den; }
  friend bool operator<(const Rat& a, const Rat& b) {
    return static_cast<__int128>(a.num) * b.den < static_cast<__int128>(b.num) * a.den;
  }
  friend bool operator<=(const Rat& a, const Rat& b) { return a == b || a < b; }

  std::string to_string() const {
    if (den == 1) return std::to_string(num);
    return std::to_string(num) + "/" + std::to_string(den);
  }

 private:
  static Rat norm128(__int128 n, __int128 d) {
    if (d < 0) { n = -n; d = -d; }
    __int128 an = n < 0 ? -n : n;
    __int128 g = gcd128(an, d);
    if (g > 1) { n /= g; d /= g; }
    constexpr __int128 lim = static_cast<__int128>(1) << 62;
    if (n >= lim || n <= -lim || d >= lim)
      throw std::overflow_error("Rat: component out of range");
    return Rat{static_cast<std::int64_t>(n), static_cast<std::int64_t>(d)};
  }
  static __int128 gcd128(__int128 a, __int128 b) {
    while (b) { __int128 t = a % b; a = b; b = t; }
    return a;
  }
};

using ExpVec = boost::container::small_vector<Rat, 3>;

inline bool expvec_less(const ExpVec& a, const ExpVec& b) {
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    if (a[i] < b[i]) return true;
    if (b[i] < a[i]) return false;
  }
  return a.size() < b.size();
}

struct ExpVecLess {
  bool operator()(const ExpVec& a, const ExpVec& b) const { return expvec_less(a, b); }
};

constexpr std::int64_t kWindowMin = -(std::int64_t{1} << 40);
constexpr std::int64_t kWindowMax = (std::int64_t{1} << 40);

inline std::int64_t clamp_bound(std::int64_t v) {
  if (v < kWindowMin) return kWindowMin;
  if (v > kWindowMax) return kWindowMax;
  return v;
}

struct Window {
  // one [lo, hi] per variable, aligned with the context's variable order
  boost::container::small_vector<std::array<std::int64_t, 2>, 3> bounds;
  bool entire = false;

  static Window box(std::size_t nvars, std::int64_t lo, std::int64_t hi) {
    Window w;
    w.bounds.assign(nvars, {lo, hi});
    return w;
  }
  static Window entire_box(std::size_t nvars) {
    Window w = box(nvars, 0, 0);
    w.entire = true;
    return w;
  }

  std::size_t size() const { return bounds.size(); }
  std::int64_t lo(std::size_t i) const { return bounds[i][0]; }
  std::int64_t hi(std::size_t i) const { return bounds[i][1]; }

  bool empty_box() const {
    for (const auto& b : bounds)
      if (b[1] < b[0]) return true;
    return false;
  }

  bool contains(const ExpVec& e) const {
    if (entire) return true;
    for (std::size_t i = 0; i < bounds.size(); ++i) {
      if (e[i] < Rat::of(bounds[i][0])) return false;
      if (Rat::of(bounds[i][1]) < e[i]) return false;
    }
    return true;
  }

  friend bool operator==(const Window&, const Window&) = default;

  std::string to_string() const {
    if (entire) return "entire";
    std::string s;
    for (const auto& b : bounds) {
      if (!s.empty()) s += " x ";
      s += "[" + std::to_string(b[0]) + "," + std::to_string(b[1]) + "]";
    }
    return s;
  }
};

// Exact value of -log_p of a multiplicative norm, with a bottom element for
// the zero series (norm 0, i.e. log_p = -infinity; reported as NEG_INFINITE).
struct LogNorm {
  Rat value{};
  bool neg_infinite = false;

  static LogNorm of(Rat v) { return LogNorm{v, false}; }
  static LogNorm zero_series() { return LogNorm{{}, true}; }

  friend bool operator==(const LogNorm&, const LogNorm&) = default;

  std::string to_string() const { return neg_infinite ? "NEG_INFINITE" : value.to_string(); }
};

}  // namespace phigamma
