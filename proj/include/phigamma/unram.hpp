#pragma once

// Unramified coefficient ring W(F_{p^f})/p^m, presented as polynomials in a
// fixed generator theta modulo (p^m, minpoly). The minimal polynomial is the
// lexicographically least monic irreducible of degree f over F_p (coefficient
// tuples (c_0, ..., c_{f-1}) enumerated as base-p counters), lifted to Z/p^m
// with the same small integer coefficients. The coefficient Frobenius is the
// unique ring lift of x -> x^p, computed once per context by Hensel/Newton
// iteration from sigma = theta^p mod p.

#include <boost/container/small_vector.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "phigamma/modint.hpp"

namespace phigamma {

namespace detail {

using FpPoly = std::vector<std::uint64_t>;  // little-endian, coefficients in [0, p)

inline void poly_trim(FpPoly& a) {
  while (!a.empty() && a.back() == 0) a.pop_back();
}

inline FpPoly poly_rem(FpPoly a, const FpPoly& g, std::uint64_t p) {
  // g monic (leading coefficient 1 expected after normalization by caller)
  poly_trim(a);
  const std::size_t dg = g.size() - 1;
  while (a.size() > dg) {
    std::uint64_t lead = a.back();
    std::size_t shift = a.size() - 1 - dg;
    if (lead != 0) {
      for (std::size_t i = 0; i <= dg; ++i) {
        std::uint64_t sub = mulmod_u64(lead, g[i], p);
        std::uint64_t& c = a[shift + i];
        c = (c + p - sub) % p;
      }
    }
    a.pop_back();
    poly_trim(a);
    if (a.size() <= dg) break;
  }
  return a;
}

inline FpPoly poly_mulmod(const FpPoly& a, const FpPoly& b, const FpPoly& g, std::uint64_t p) {
  if (a.empty() || b.empty()) return {};
  FpPoly prod(a.size() + b.size() - 1, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0) continue;
    for (std::size_t j = 0; j < b.size(); ++j)
      prod[i + j] = (prod[i + j] + mulmod_u64(a[i], b[j], p)) % p;
  }
  return poly_rem(std::move(prod), g, p);
}

inline FpPoly poly_powmod(FpPoly base, std::uint64_t exp, const FpPoly& g, std::uint64_t p) {
  FpPoly r{1};
  base = poly_rem(std::move(base), g, p);
  while (exp) {
    if (exp & 1) r = poly_mulmod(r, base, g, p);
    base = poly_mulmod(base, base, g, p);
    exp >>= 1;
  }
  return r;
}

inline FpPoly poly_gcd(FpPoly a, FpPoly b, std::uint64_t p) {
  poly_trim(a);
  poly_trim(b);
  while (!b.empty()) {
    // make b monic for the remainder step
    std::uint64_t inv = invmod_u64(b.back(), p);
    FpPoly bm = b;
    for (auto& c : bm) c = mulmod_u64(c, inv, p);
    FpPoly r = poly_rem(a, bm, p);
    a = std::move(b);
    b = std::move(r);
  }
  return a;
}

// Extended Euclid in F_p[x]: returns u with u*a == gcd(a, g) mod g. Used only
// when gcd is a nonzero constant, to invert a modulo g.
inline FpPoly poly_invmod(const FpPoly& a, const FpPoly& g, std::uint64_t p) {
  FpPoly r0 = g, r1 = poly_rem(a, g, p);
  FpPoly t0 = {}, t1 = {1};
  while (true) {
    poly_trim(r1);
    if (r1.empty()) throw not_a_unit("poly_invmod: not invertible");
    if (r1.size() == 1) break;
    // divide r0 by r1 (long division), track transform on t
    std::uint64_t inv = invmod_u64(r1.back(), p);
    FpPoly q(r0.size() > r1.size() ? r0.size() - r1.size() + 1 : 1, 0);
    FpPoly rem = r0;
    poly_trim(rem);
    while (rem.size() >= r1.size() && !rem.empty()) {
      std::uint64_t c = mulmod_u64(rem.back(), inv, p);
      std::size_t shift = rem.size() - r1.size();
      q[shift] = (q[shift] + c) % p;
      for (std::size_t i = 0; i < r1.size(); ++i) {
        std::uint64_t sub = mulmod_u64(c, r1[i], p);
        rem[shift + i] = (rem[shift + i] + p - sub) % p;
      }
      poly_trim(rem);
    }
    // (r0, r1) <- (r1, rem); (t0, t1) <- (t1, t0 - q*t1)
    FpPoly qt1(q.size() + t1.size() ? q.size() + (t1.empty() ? 1 : t1.size()) - 1 : 0, 0);
    if (!t1.empty())
      for (std::size_t i = 0; i < q.size(); ++i)
        for (std::size_t j = 0; j < t1.size(); ++j)
          qt1[i + j] = (qt1[i + j] + mulmod_u64(q[i], t1[j], p)) % p;
    FpPoly nt = t0;
    if (nt.size() < qt1.size()) nt.resize(qt1.size(), 0);
    for (std::size_t i = 0; i < qt1.size(); ++i) nt[i] = (nt[i] + p - qt1[i]) % p;
    poly_trim(nt);
    t0 = std::move(t1);
    t1 = std::move(nt);
    r0 = std::move(r1);
    r1 = std::move(rem);
  }
  // scale by inverse of the constant gcd
  std::uint64_t s = invmod_u64(r1[0], p);
  FpPoly res = poly_rem(t1, g, p);
  for (auto& c : res) c = mulmod_u64(c, s, p);
  return res;
}

inline bool poly_is_irreducible(const FpPoly& g, std::uint64_t p) {
  const std::size_t f = g.size() - 1;
  if (f == 0) return false;
  // Rabin: x^{p^f} == x mod g, and gcd(x^{p^{f/q}} - x, g) = 1 for prime q | f.
  FpPoly x{0, 1};
  FpPoly xp = x;
  std::vector<FpPoly> frob_chain;  // frob_chain[k] = x^{p^{k+1}} mod g
  for (std::size_t k = 0; k < f; ++k) {
    xp = poly_powmod(xp, p, g, p);
    frob_chain.push_back(xp);
  }
  FpPoly top = frob_chain[f - 1];
  // top must equal x; compare after reduction, which matters when deg g = 1
  FpPoly diff = top;
  if (diff.size() < 2) diff.resize(2, 0);
  diff[1] = (diff[1] + p - 1) % p;
  poly_trim(diff);
  diff = poly_rem(diff, g, p);
  if (!diff.empty()) return false;
  for (std::size_t q = 2; q <= f; ++q) {
    if (f % q != 0) continue;
    bool q_prime = true;
    for (std::size_t d = 2; d * d <= q; ++d)
      if (q % d == 0) { q_prime = false; break; }
    if (!q_prime) continue;
    FpPoly sub = frob_chain[f / q - 1];
    if (sub.size() < 2) sub.resize(2, 0);
    sub[1] = (sub[1] + p - 1) % p;
    poly_trim(sub);
    FpPoly gg = poly_gcd(g, sub, p);
    if (gg.size() != 1) return false;
  }
  return true;
}

// Lexicographically least monic irreducible of degree f over F_p: enumerate
// constant-to-top coefficient tuples as a base-p counter and take the first hit.
inline FpPoly least_irreducible(std::uint64_t p, std::uint32_t f) {
  FpPoly g(f + 1, 0);
  g[f] = 1;
  for (std::uint64_t counter = 0;; ++counter) {
    std::uint64_t c = counter;
    for (std::uint32_t i = 0; i < f; ++i) { g[i] = c % p; c /= p; }
    if (c != 0)
      throw std::invalid_argument("least_irreducible: exhausted candidates (f too large?)");
    if (poly_is_irreducible(g, p)) return g;
  }
}

}  // namespace detail

class UnramCoeff;

// Shared, interned context for W(F_{p^f})/p^m. Stable address for the whole
// program run; coefficient values keep a raw pointer to it.
class UnramContext {
 public:
  Zpm ring;
  std::uint32_t f = 1;
  // monic minimal polynomial of theta, integer coefficients in [0, p), length f+1
  std::vector<std::uint64_t> minpoly;
  // rep of sigma^j for j = 0..f-1 where sigma = Frobenius(theta); columns of
  // the Frobenius matrix on the theta-power basis
  std::vector<std::vector<std::uint64_t>> sigma_pow;

  static const UnramContext* get(std::uint64_t p, std::uint32_t m, std::uint32_t f);

  // Keys of every context interned so far, for the CLI's warm-start cache.
  static std::vector<std::tuple<std::uint64_t, std::uint32_t, std::uint32_t>> interned();

  // Interned contexts compare by address.
  friend bool operator==(const UnramContext& a, const UnramContext& b) { return &a == &b; }

  // Raw helpers on plain rep vectors (length f, entries mod p^m); shared by
  // the coefficient value type and by the finite-base machinery.
  using Rep = std::vector<std::uint64_t>;

  Rep rep_zero() const { return Rep(f, 0); }

  Rep rep_mul(const Rep& a, const Rep& b) const {
    const std::uint64_t q = ring.q;
    std::vector<std::uint64_t> prod(2 * f - 1, 0);
    for (std::uint32_t i = 0; i < f; ++i) {
      if (a[i] == 0) continue;
      for (std::uint32_t j = 0; j < f; ++j)
        prod[i + j] = (prod[i + j] + mulmod_u64(a[i], b[j], q)) % q;
    }
    // fold down by the monic minpoly
    for (std::size_t d = prod.size(); d-- > f;) {
      std::uint64_t lead = prod[d];
      if (lead == 0) continue;
      prod[d] = 0;
      for (std::uint32_t i = 0; i < f; ++i) {
        std::uint64_t sub = mulmod_u64(lead, minpoly[i], q);
        prod[d - f + i] = (prod[d - f + i] + q - sub) % q;
      }
    }
    prod.resize(f);
    return prod;
  }

  Rep rep_add(const Rep& a, const Rep& b) const {
    Rep r(f);
    for (std::uint32_t i = 0; i < f; ++i) {
      std::uint64_t s = a[i] + b[i];
      if (s >= ring.q) s -= ring.q;
      r[i] = s;
    }
    return r;
  }

  Rep rep_scale(const Rep& a, std::uint64_t c) const {
    Rep r(f);
    for (std::uint32_t i = 0; i < f; ++i) r[i] = mulmod_u64(a[i], c, ring.q);
    return r;
  }

  bool rep_is_unit(const Rep& a) const {
    for (auto c : a)
      if (c % ring.p != 0) return true;
    return false;
  }

  // Inverse of a unit rep: invert mod p by extended Euclid, then Newton-lift
  // b <- b(2 - ab) up to precision m.
  Rep rep_inv(const Rep& a) const {
    if (!rep_is_unit(a)) throw not_a_unit("UnramContext: inverse of a non-unit");
    detail::FpPoly abar(a.begin(), a.end());
    for (auto& c : abar) c %= ring.p;
    detail::FpPoly gbar(minpoly.begin(), minpoly.end());
    for (auto& c : gbar) c %= ring.p;
    detail::FpPoly b0 = detail::poly_invmod(abar, gbar, ring.p);
    Rep b = rep_zero();
    for (std::size_t i = 0; i < b0.size(); ++i) b[i] = b0[i];
    for (std::uint32_t it = 0, need = 1; need < ring.m; ++it, need *= 2) {
      // b <- b * (2 - a*b)
      Rep ab = rep_mul(a, b);
      Rep two_minus(f, 0);
      two_minus[0] = 2 % ring.q;
      for (std::uint32_t i = 0; i < f; ++i)
        two_minus[i] = (two_minus[i] + ring.q - ab[i]) % ring.q;
      b = rep_mul(b, two_minus);
    }
    return b;
  }

  // Evaluate a monic integer polynomial (the minpoly or its derivative) at a rep.
  Rep rep_eval_minpoly(const Rep& x) const {
    Rep acc = rep_zero();
    acc[0] = 1;  // leading coefficient
    for (std::uint32_t i = f; i-- > 0;) {
      acc = rep_mul(acc, x);
      acc[0] = (acc[0] + minpoly[i]) % ring.q;
    }
    return acc;
  }

  Rep rep_eval_minpoly_deriv(const Rep& x) const {
    Rep acc = rep_zero();
    acc[0] = f % ring.q;  // derivative leading coefficient f
    for (std::uint32_t i = f; i-- > 1;) {
      acc = rep_mul(acc, x);
      std::uint64_t ci = mulmod_u64(minpoly[i], i, ring.q);
      acc[0] = (acc[0] + ci) % ring.q;
    }
    return acc;
  }

 private:
  UnramContext() = default;
  void init(std::uint64_t p, std::uint32_t m, std::uint32_t f_in);
};

inline void UnramContext::init(std::uint64_t p, std::uint32_t m, std::uint32_t f_in) {
  ring = Zpm::make(p, m);
  f = f_in;
  if (f == 0) throw std::invalid_argument("UnramContext: residue degree f must be >= 1");
  detail::FpPoly g = detail::least_irreducible(p, f);
  minpoly.assign(g.begin(), g.end());

  // sigma = Hensel lift of theta^p: root of minpoly congruent to theta^p mod p
  detail::FpPoly gbar(minpoly.begin(), minpoly.end());
  for (auto& c : gbar) c %= p;
  detail::FpPoly s0 = detail::poly_powmod({0, 1}, p, gbar, p);
  Rep sigma = rep_zero();
  for (std::size_t i = 0; i < s0.size(); ++i) sigma[i] = s0[i];
  for (std::uint32_t it = 0, reached = 1; reached < m; ++it, reached *= 2) {
    // Newton: sigma <- sigma - minpoly(sigma) / minpoly'(sigma)
    Rep val = rep_eval_minpoly(sigma);
    Rep der = rep_eval_minpoly_deriv(sigma);
    Rep corr = rep_mul(val, rep_inv(der));
    for (std::uint32_t i = 0; i < f; ++i) sigma[i] = (sigma[i] + ring.q - corr[i]) % ring.q;
  }
  // sanity: sigma is a genuine root at precision m
  for (auto c : rep_eval_minpoly(sigma))
    if (c != 0) throw std::logic_error("UnramContext: Frobenius lift failed to converge");

  sigma_pow.resize(f);
  Rep acc = rep_zero();
  acc[0] = 1;
  for (std::uint32_t j = 0; j < f; ++j) {
    sigma_pow[j] = acc;
    acc = rep_mul(acc, sigma);
  }
}

namespace unram_detail {

struct ContextRegistry {
  std::mutex mu;
  std::map<std::tuple<std::uint64_t, std::uint32_t, std::uint32_t>,
           std::unique_ptr<UnramContext>>
      map;
  static ContextRegistry& instance() {
    static ContextRegistry r;
    return r;
  }
};

}  // namespace unram_detail

inline const UnramContext* UnramContext::get(std::uint64_t p, std::uint32_t m, std::uint32_t f) {
  auto& reg = unram_detail::ContextRegistry::instance();
  std::scoped_lock lock(reg.mu);
  auto key = std::make_tuple(p, m, f);
  auto it = reg.map.find(key);
  if (it == reg.map.end()) {
    auto cx = std::unique_ptr<UnramContext>(new UnramContext());
    cx->init(p, m, f);
    it = reg.map.emplace(key, std::move(cx)).first;
  }
  return it->second.get();
}

inline std::vector<std::tuple<std::uint64_t, std::uint32_t, std::uint32_t>>
UnramContext::interned() {
  auto& reg = unram_detail::ContextRegistry::instance();
  std::scoped_lock lock(reg.mu);
  std::vector<std::tuple<std::uint64_t, std::uint32_t, std::uint32_t>> keys;
  for (const auto& [k, v] : reg.map) keys.push_back(k);
  return keys;
}

// Element of W(F_{p^f})/p^m as a theta-power polynomial. For f = 1 this
// degenerates to a plain Z/p^m scalar.
class UnramCoeff {
 public:
  using Rep = boost::container::small_vector<std::uint64_t, 3>;

  UnramCoeff() = default;
  explicit UnramCoeff(const UnramContext* cx) : cx_(cx), rep_(cx->f, 0) {}
  UnramCoeff(const UnramContext* cx, std::uint64_t scalar) : cx_(cx), rep_(cx->f, 0) {
    rep_[0] = scalar % cx->ring.q;
  }
  UnramCoeff(const UnramContext* cx, const BigInt& scalar) : cx_(cx), rep_(cx->f, 0) {
    rep_[0] = mod_to_u64(scalar, cx->ring.q);
  }

  static UnramCoeff zero(const UnramContext* cx) { return UnramCoeff(cx); }
  static UnramCoeff one(const UnramContext* cx) { return UnramCoeff(cx, std::uint64_t{1}); }
  static UnramCoeff theta(const UnramContext* cx) {
    UnramCoeff r(cx);
    if (cx->f == 1) {
      // theta is the residue of x mod (x), i.e. 0; harmless but explicit
      return r;
    }
    r.rep_[1] = 1;
    return r;
  }
  static UnramCoeff from_rep(const UnramContext* cx, std::vector<std::uint64_t> rep) {
    if (rep.size() != cx->f) throw std::invalid_argument("UnramCoeff: rep length != f");
    UnramCoeff r(cx);
    for (std::size_t i = 0; i < rep.size(); ++i) r.rep_[i] = rep[i] % cx->ring.q;
    return r;
  }
  static UnramCoeff from_int(const UnramContext* cx, std::int64_t v) {
    return UnramCoeff(cx, BigInt(v));
  }

  const UnramContext* context() const { return cx_; }
  const Zpm& ring() const { return cx_->ring; }
  std::uint64_t coeff(std::uint32_t i) const { return rep_[i]; }

  bool is_zero() const {
    for (auto c : rep_)
      if (c != 0) return false;
    return true;
  }

  friend bool operator==(const UnramCoeff& a, const UnramCoeff& b) {
    a.check(b);
    return a.rep_ == b.rep_;
  }

  friend UnramCoeff operator+(const UnramCoeff& a, const UnramCoeff& b) {
    a.check(b);
    UnramCoeff r(a.cx_);
    const std::uint64_t q = a.cx_->ring.q;
    for (std::size_t i = 0; i < a.rep_.size(); ++i) {
      std::uint64_t s = a.rep_[i] + b.rep_[i];
      if (s >= q) s -= q;
      r.rep_[i] = s;
    }
    return r;
  }

  friend UnramCoeff operator-(const UnramCoeff& a, const UnramCoeff& b) {
    a.check(b);
    UnramCoeff r(a.cx_);
    const std::uint64_t q = a.cx_->ring.q;
    for (std::size_t i = 0; i < a.rep_.size(); ++i)
      r.rep_[i] = (a.rep_[i] + q - b.rep_[i]) % q;
    return r;
  }

  UnramCoeff operator-() const {
    UnramCoeff r(cx_);
    const std::uint64_t q = cx_->ring.q;
    for (std::size_t i = 0; i < rep_.size(); ++i) r.rep_[i] = rep_[i] == 0 ? 0 : q - rep_[i];
    return r;
  }

  friend UnramCoeff operator*(const UnramCoeff& a, const UnramCoeff& b) {
    a.check(b);
    if (a.cx_->f == 1) {
      UnramCoeff r(a.cx_);
      r.rep_[0] = mulmod_u64(a.rep_[0], b.rep_[0], a.cx_->ring.q);
      return r;
    }
    UnramContext::Rep av(a.rep_.begin(), a.rep_.end()), bv(b.rep_.begin(), b.rep_.end());
    auto rv = a.cx_->rep_mul(av, bv);
    UnramCoeff r(a.cx_);
    for (std::size_t i = 0; i < rv.size(); ++i) r.rep_[i] = rv[i];
    return r;
  }

  UnramCoeff& operator+=(const UnramCoeff& b) { return *this = *this + b; }
  UnramCoeff& operator-=(const UnramCoeff& b) { return *this = *this - b; }
  UnramCoeff& operator*=(const UnramCoeff& b) { return *this = *this * b; }

  UnramCoeff scale(std::uint64_t c) const {
    UnramCoeff r(cx_);
    for (std::size_t i = 0; i < rep_.size(); ++i) r.rep_[i] = mulmod_u64(rep_[i], c % cx_->ring.q, cx_->ring.q);
    return r;
  }

  UnramCoeff inv_unit() const {
    UnramContext::Rep av(rep_.begin(), rep_.end());
    auto rv = cx_->rep_inv(av);
    UnramCoeff r(cx_);
    for (std::size_t i = 0; i < rv.size(); ++i) r.rep_[i] = rv[i];
    return r;
  }

  Valuation valuation() const {
    Valuation best = Valuation::inf();
    for (auto c : rep_) {
      if (c == 0) continue;
      std::uint64_t x = c;
      std::int64_t v = 0;
      while (x % cx_->ring.p == 0) { x /= cx_->ring.p; ++v; }
      if (Valuation::finite(v) < best) best = Valuation::finite(v);
    }
    return best;
  }

  bool is_unit() const {
    auto v = valuation();
    return !v.infinite && v.v == 0;
  }

  // Coefficient Frobenius: theta -> sigma, Z/p^m scalars fixed.
  UnramCoeff frobenius() const {
    UnramCoeff r(cx_);
    const std::uint64_t q = cx_->ring.q;
    for (std::uint32_t j = 0; j < cx_->f; ++j) {
      if (rep_[j] == 0) continue;
      const auto& sj = cx_->sigma_pow[j];
      for (std::uint32_t i = 0; i < cx_->f; ++i)
        r.rep_[i] = (r.rep_[i] + mulmod_u64(rep_[j], sj[i], q)) % q;
    }
    return r;
  }

  UnramCoeff frobenius_pow(std::uint32_t k) const {
    UnramCoeff r = *this;
    for (std::uint32_t i = 0; i < k; ++i) r = r.frobenius();
    return r;
  }

  UnramCoeff exact_div_p() const {
    UnramCoeff r(cx_);
    for (std::size_t i = 0; i < rep_.size(); ++i) {
      if (rep_[i] % cx_->ring.p != 0)
        throw std::invalid_argument("UnramCoeff::exact_div_p: not divisible by p");
      r.rep_[i] = rep_[i] / cx_->ring.p;
    }
    return r;
  }

  UnramCoeff reduce_mod_p() const {
    UnramCoeff r(cx_);
    for (std::size_t i = 0; i < rep_.size(); ++i) r.rep_[i] = rep_[i] % cx_->ring.p;
    return r;
  }

  UnramCoeff pow(std::uint64_t e) const {
    UnramCoeff r = one(cx_), b = *this;
    while (e) {
      if (e & 1) r *= b;
      b *= b;
      e >>= 1;
    }
    return r;
  }

  std::string to_string() const {
    std::string out;
    for (std::uint32_t i = 0; i < cx_->f; ++i) {
      if (rep_[i] == 0) continue;
      if (!out.empty()) out += " + ";
      if (i == 0) {
        out += std::to_string(rep_[i]);
      } else {
        if (rep_[i] != 1) out += std::to_string(rep_[i]) + "*";
        out += (i == 1) ? "t" : ("t^" + std::to_string(i));
      }
    }
    return out.empty() ? "0" : out;
  }

 private:
  void check(const UnramCoeff& other) const {
    if (cx_ != other.cx_) throw context_mismatch("UnramCoeff: mixed coefficient contexts");
  }

  const UnramContext* cx_ = nullptr;
  Rep rep_;
};

}  // namespace phigamma
