#pragma once

// Operators on truncated Laurent series: the semilinear substitution phi,
// the group action gamma, the trace-section psi, residues, Gauss norms, the
// integral/fractional splitting, and certified inversion.
//
// Window contracts implemented here (per variable, alpha the acted one):
//   phi_alpha:   lo' = lo >= 0 ? lo : p*lo - (m-1)(p-1)
//                hi' = hi >= 0 ? hi : p*hi + (p-1) - (m-1)(p-1)
//   gamma_alpha: lo' = lo, hi' = hi  (images of pi^k start exactly at k)
//   psi_alpha:   hi' = floor((hi-p+1)/p) - ceil((p-1)(m(m-1)-1)/p): unknown
//                data above hi spills into lower p-digits of the claim; lo'
//                follows the subtract rounds below floor(lo/p), since phi of
//                residue block k reaches down to p*k - min(|k|, m-1)(p-1)
//   residue:     exact whenever hi >= -1 in every variable
// Entire inputs produce entire outputs for phi and psi; gamma keeps entire
// outputs only when the substitution is a genuine polynomial.

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "phigamma/arith.hpp"
#include "phigamma/series.hpp"

namespace phigamma {

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if (a % b != 0 && ((a < 0) != (b < 0))) --q;
  return q;
}

namespace series_detail {

// Raw arithmetic used inside inversion: term maps truncated to a fixed box,
// ignoring the window calculus (the caller verifies its end product).
inline LaurentSeries raw_boxed(const LaurentSeries& s, const Window& box) {
  return s.truncated(box);
}

inline LaurentSeries raw_mul(const LaurentSeries& a, const LaurentSeries& b, const Window& box) {
  LaurentSeries::TermMap acc;
  const SeriesContext* cx = a.context();
  for (const auto& [ea, ca] : a.terms()) {
    for (const auto& [eb, cb] : b.terms()) {
      ExpVec e = ea;
      for (std::size_t i = 0; i < e.size(); ++i) e[i] = e[i] + eb[i];
      if (!box.contains(e)) continue;
      UnramCoeff c = ca * cb;
      if (c.is_zero()) continue;
      auto it = acc.find(e);
      if (it == acc.end()) acc.emplace(std::move(e), c);
      else {
        it->second = it->second + c;
        if (it->second.is_zero()) acc.erase(it);
      }
    }
  }
  return LaurentSeries::assemble(cx, std::move(acc), box);
}

// (1 + pi_alpha)^i for 0 <= i, as an entire polynomial
inline LaurentSeries one_plus_pi_pow(const SeriesContext* cx, std::size_t alpha, std::uint64_t i) {
  LaurentSeries acc = LaurentSeries::one(cx);
  LaurentSeries base = LaurentSeries::one(cx) + LaurentSeries::variable(cx, alpha);
  for (std::uint64_t k = 0; k < i; ++k) acc = acc * base;
  return acc;
}

// C(c, k) mod p^m depends on c only through c mod p^{m + v_p(kmax!)}.  Group
// character values carry hundreds of guard digits and operator assembly asks
// for the same row once per basis column, so reduce first and memoize.
inline const std::vector<std::uint64_t>& binomial_row_reduced(const SeriesContext* cx,
                                                              const BigInt& c,
                                                              std::uint64_t kmax) {
  const std::uint64_t q = cx->coeff->ring.q;
  const std::uint32_t p = cx->p();
  std::uint64_t vp = 0;
  for (std::uint64_t t = kmax / p; t > 0; t /= p) vp += t;
  BigInt mod = bigint_pow(BigInt(p), cx->m() + static_cast<std::uint32_t>(vp) + 1);
  BigInt cr = c % mod;
  if (cr < 0) cr += mod;
  std::string key = cr.str() + "#" + std::to_string(kmax) + "#" + std::to_string(q);
  static std::mutex mu;
  static std::map<std::string, std::vector<std::uint64_t>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(std::move(key), binomial_row_mod(cr, kmax, q)).first;
  return it->second;
}

}  // namespace series_detail

// ---------------------------------------------------------------------------
// phi
// ---------------------------------------------------------------------------

// Entire image of pi_alpha^k under pi -> (1+pi)^p - 1.  For k < 0 the unit
// ((1+pi)^p - 1)/pi^p = 1 + w has w supported on [1-p, -1] with p-divisible
// coefficients, so w^m vanishes and the inverse power is the finite sum
// sum_{i<m} binom(-|k|, i) w^i.
inline LaurentSeries phi_power_factor(const SeriesContext* cx, std::size_t alpha, std::int64_t k) {
  const std::uint32_t p = cx->p();
  const std::uint64_t q = cx->coeff->ring.q;
  const std::uint32_t m = cx->m();
  if (k >= 0) {
    LaurentSeries base = LaurentSeries::zero(cx);
    auto row = binomial_row_mod(BigInt(p), p, q);
    for (std::uint32_t j = 1; j <= p; ++j) {
      if (row[j] % q == 0) continue;
      ExpVec e(cx->nvars(), Rat::of(0));
      e[alpha] = Rat::of(j);
      base = base + LaurentSeries::monomial(cx, e, UnramCoeff::from_int(cx->coeff, static_cast<std::int64_t>(row[j])));
    }
    LaurentSeries acc = LaurentSeries::one(cx);
    for (std::int64_t i = 0; i < k; ++i) acc = acc * base;
    return acc;
  }
  LaurentSeries w = LaurentSeries::zero(cx);
  auto row = binomial_row_mod(BigInt(p), p, q);
  for (std::uint32_t j = 1; j <= p - 1; ++j) {
    if (row[j] % q == 0) continue;
    ExpVec e(cx->nvars(), Rat::of(0));
    e[alpha] = Rat::of(static_cast<std::int64_t>(j) - static_cast<std::int64_t>(p));
    w = w + LaurentSeries::monomial(cx, e, UnramCoeff::from_int(cx->coeff, static_cast<std::int64_t>(row[j])));
  }
  // (1+w)^k = sum_{i<m} binom(k, i) w^i exactly, since w^m = 0 mod p^m
  auto krow = binomial_row_mod(BigInt(k), m, q);
  LaurentSeries acc = LaurentSeries::zero(cx);
  LaurentSeries wpow = LaurentSeries::one(cx);
  for (std::uint32_t i = 0; i < m; ++i) {
    acc = acc + wpow.scaled(UnramCoeff::from_int(cx->coeff, static_cast<std::int64_t>(krow[i])));
    if (i + 1 < m) wpow = wpow * w;
  }
  ExpVec shift(cx->nvars(), Rat::of(0));
  shift[alpha] = Rat::of(p * k);
  return acc.shifted(shift);
}

inline LaurentSeries phi_alpha(const LaurentSeries& f, std::size_t alpha) {
  const SeriesContext* cx = f.context();
  if (alpha >= cx->nvars()) throw std::invalid_argument("phi_alpha: variable index out of range");
  const std::uint32_t p = cx->p();
  const std::uint32_t m = cx->m();

  if (cx->mode == SeriesMode::Perfect) {
    // pi^e -> pi^{pe} is a bijection on monomials; the window box scales with it
    LaurentSeries out = LaurentSeries::zero(cx);
    Window w = f.window();
    if (!w.entire) {
      w.bounds[alpha][0] = clamp_bound(w.bounds[alpha][0] * p);
      w.bounds[alpha][1] = clamp_bound(w.bounds[alpha][1] * p);
    }
    out = out.truncated(w);
    for (const auto& [e, c] : f.terms()) {
      ExpVec e2 = e;
      e2[alpha] = e2[alpha] * Rat::of(p);
      out = out + LaurentSeries::monomial(cx, e2, c.frobenius()).truncated(w);
    }
    return out.truncated(w);
  }

  Window w = f.window();
  if (!w.entire) {
    std::int64_t lo = w.lo(alpha), hi = w.hi(alpha);
    std::int64_t drop = static_cast<std::int64_t>(m - 1) * (p - 1);
    w.bounds[alpha][0] = clamp_bound(lo >= 0 ? lo : p * lo - drop);
    w.bounds[alpha][1] = clamp_bound(hi >= 0 ? hi : p * hi + (p - 1) - drop);
  }
  LaurentSeries out = LaurentSeries::zero(cx).truncated(w);
  std::map<std::int64_t, LaurentSeries> factor_cache;
  for (const auto& [e, c] : f.terms()) {
    std::int64_t k = e[alpha].num;
    auto it = factor_cache.find(k);
    if (it == factor_cache.end())
      it = factor_cache.emplace(k, phi_power_factor(cx, alpha, k)).first;
    ExpVec base = e;
    base[alpha] = Rat::of(0);
    out = out + it->second.shifted(base).scaled(c.frobenius()).truncated(w);
  }
  return out.truncated(w);
}

// ---------------------------------------------------------------------------
// gamma
// ---------------------------------------------------------------------------

inline LaurentSeries gamma_alpha(const LaurentSeries& f, std::size_t alpha, const BigInt& c) {
  const SeriesContext* cx = f.context();
  if (alpha >= cx->nvars()) throw std::invalid_argument("gamma_alpha: variable index out of range");
  if (cx->mode != SeriesMode::Integral)
    throw mode_mismatch("gamma_alpha acts on the integral-exponent ring");
  const std::uint32_t p = cx->p();
  const std::uint64_t q = cx->coeff->ring.q;
  if (c % p == 0) throw std::invalid_argument("gamma_alpha: substitution exponent must be a p-adic unit");
  if (f.is_zero() && f.is_entire()) return f;

  std::int64_t kmin = 0, kmax = 0;
  bool first = true;
  for (const auto& [e, cc] : f.terms()) {
    std::int64_t k = e[alpha].num;
    if (first) { kmin = kmax = k; first = false; }
    kmin = std::min(kmin, k);
    kmax = std::max(kmax, k);
  }

  bool entire_out = false;
  Window w = f.window();
  if (f.is_entire()) {
    bool small_c = c >= 0 && c <= 4096;
    bool poly = kmin >= 0 && small_c && BigInt(kmax) * c <= 200000;
    if (poly) entire_out = true;
    else {
      // invent a box: the context default, widened to cover the input support
      Window sup = f.support_box();
      w = cx->default_window();
      for (std::size_t i = 0; i < cx->nvars(); ++i) {
        w.bounds[i][0] = std::min(w.bounds[i][0], sup.bounds[i][0]);
        w.bounds[i][1] = std::max(w.bounds[i][1], sup.bounds[i][1]);
      }
      w.entire = false;
    }
  }

  const std::int64_t hi = entire_out ? 0 : w.hi(alpha);

  // B = (1+pi)^c - 1 with exponents up to `bdeg`
  auto build_base = [&](std::int64_t bdeg) {
    LaurentSeries base = LaurentSeries::zero(cx);
    if (bdeg < 1) return base;
    const auto& row = series_detail::binomial_row_reduced(cx, c, static_cast<std::uint64_t>(bdeg));
    for (std::int64_t j = 1; j <= bdeg; ++j) {
      if (row[static_cast<std::size_t>(j)] % q == 0) continue;
      ExpVec e(cx->nvars(), Rat::of(0));
      e[alpha] = Rat::of(j);
      base = base + LaurentSeries::monomial(cx, e, UnramCoeff::from_int(cx->coeff, static_cast<std::int64_t>(row[static_cast<std::size_t>(j)])));
    }
    return base;
  };

  LaurentSeries out = LaurentSeries::zero(cx);
  if (!entire_out) out = out.truncated(w);

  if (entire_out) {
    // true polynomial expansion
    std::int64_t bdeg = 1;
    if (c > 1) bdeg = static_cast<std::int64_t>(c.convert_to<std::uint64_t>());
    LaurentSeries base = build_base(bdeg);
    std::map<std::int64_t, LaurentSeries> pow_cache;
    pow_cache[0] = LaurentSeries::one(cx);
    auto power = [&](std::int64_t k) -> const LaurentSeries& {
      auto it = pow_cache.lower_bound(k);
      if (it != pow_cache.end() && it->first == k) return it->second;
      --it;
      std::int64_t have = it->first;
      LaurentSeries acc = it->second;
      for (std::int64_t i = have; i < k; ++i) acc = acc * base;
      return pow_cache.emplace(k, std::move(acc)).first->second;
    };
    for (const auto& [e, cc] : f.terms()) {
      std::int64_t k = e[alpha].num;
      ExpVec basexp = e;
      basexp[alpha] = Rat::of(0);
      out = out + power(k).shifted(basexp).scaled(cc);
    }
    return out;
  }

  // windowed evaluation: factors truncated at the alpha-window top
  LaurentSeries base = build_base(hi >= 1 ? hi : 0);
  UnramCoeff cunit(cx->coeff, c);
  UnramCoeff cinv = cunit.inv_unit();

  // positive powers
  std::map<std::int64_t, LaurentSeries> pow_cache;
  pow_cache[0] = LaurentSeries::one(cx);
  auto power_pos = [&](std::int64_t k) -> LaurentSeries {
    auto it = pow_cache.lower_bound(k);
    if (it != pow_cache.end() && it->first == k) return it->second;
    --it;
    std::int64_t have = it->first;
    LaurentSeries acc = it->second;
    Window box = Window::box(cx->nvars(), kWindowMin, kWindowMax);
    box.bounds[alpha][1] = hi;
    for (std::int64_t i = have; i < k; ++i)
      acc = series_detail::raw_mul(acc, base, box);
    return pow_cache.emplace(k, std::move(acc)).first->second;
  };

  // inverse unit part: B/pi = c(1+v), (1+v)^{-1} truncated to a span
  std::optional<LaurentSeries> vinv_geo;
  std::map<std::int64_t, LaurentSeries> negpow_cache;
  std::int64_t span = hi - kmin;
  auto negpower = [&](std::int64_t k) -> LaurentSeries {
    auto it = negpow_cache.find(k);
    if (it != negpow_cache.end()) return it->second;
    Window box = Window::box(cx->nvars(), kWindowMin, kWindowMax);
    box.bounds[alpha][1] = span;
    if (!vinv_geo) {
      LaurentSeries bu = LaurentSeries::zero(cx);
      const auto& row = series_detail::binomial_row_reduced(cx, c, static_cast<std::uint64_t>(span + 1));
      for (std::int64_t j = 2; j <= span + 1; ++j) {
        ExpVec e(cx->nvars(), Rat::of(0));
        e[alpha] = Rat::of(j - 1);
        std::uint64_t rv = row[static_cast<std::size_t>(j)];
        if (rv % q == 0) continue;
        bu = bu + LaurentSeries::monomial(cx, e, UnramCoeff::from_int(cx->coeff, static_cast<std::int64_t>(rv)));
      }
      LaurentSeries v = bu.scaled(cinv);
      LaurentSeries geo = LaurentSeries::one(cx);
      LaurentSeries pw = LaurentSeries::one(cx);
      for (std::int64_t i = 1; i <= span; ++i) {
        pw = series_detail::raw_mul(pw, -v, box);
        if (pw.is_zero()) break;
        geo = geo + pw;
      }
      vinv_geo = geo;
    }
    LaurentSeries acc = LaurentSeries::one(cx);
    for (std::int64_t i = 0; i < k; ++i)
      acc = series_detail::raw_mul(acc, *vinv_geo, box);
    acc = acc.scaled(cinv.pow(static_cast<std::uint64_t>(k)));
    return negpow_cache.emplace(k, std::move(acc)).first->second;
  };

  for (const auto& [e, cc] : f.terms()) {
    std::int64_t k = e[alpha].num;
    LaurentSeries factor = LaurentSeries::one(cx);
    if (k > 0) factor = power_pos(k);
    else if (k < 0) {
      factor = negpower(-k);
      ExpVec sh(cx->nvars(), Rat::of(0));
      sh[alpha] = Rat::of(k);
      factor = factor.shifted(sh);
    }
    ExpVec basexp = e;
    basexp[alpha] = Rat::of(0);
    LaurentSeries part = factor.shifted(basexp).scaled(cc);
    // parts are exact data on the claimed window by construction
    out = out + part.truncated(w);
  }
  return out.truncated(w);
}

// ---------------------------------------------------------------------------
// psi
// ---------------------------------------------------------------------------

// Left inverse of phi_alpha: writing f = sum_{i<p} (1+pi_alpha)^i phi_alpha(f_i),
// returns f_0.  Digit-by-digit: solve mod p by residue blocks and the
// unitriangular change of basis pi^i -> (1+pi)^i, lift the solution as an
// entire polynomial, subtract, divide by p, repeat m times.
inline LaurentSeries psi_alpha(const LaurentSeries& f, std::size_t alpha) {
  const SeriesContext* cx = f.context();
  if (alpha >= cx->nvars()) throw std::invalid_argument("psi_alpha: variable index out of range");
  if (cx->mode != SeriesMode::Integral)
    throw mode_mismatch("psi_alpha acts on the integral-exponent ring");
  const std::uint32_t p = cx->p();
  const std::uint32_t m = cx->m();
  const std::uint64_t q = cx->coeff->ring.q;
  const std::uint32_t fdeg = cx->f();

  const bool entire = f.is_entire();
  std::int64_t kLo = 0, kHi = -1, kClaim = -1, kLoOut = 0;
  Window outw = f.window();
  if (!entire) {
    kLo = floor_div(f.window().lo(alpha), p);
    kHi = floor_div(f.window().hi(alpha) - (p - 1), p);
    // Unknown coefficients above the window spill downward through the
    // lift-and-subtract rounds: phi of a residue block reaches (m-1)(p-1)
    // exponents below the block at higher p-digits, and wrong top blocks
    // contaminate m(p-1) further exponents per round.  Retreat the exactness
    // claim by the accumulated spill so every claimed coefficient is
    // independent of data outside the input window.
    std::int64_t spill = 0;
    if (m >= 2) {
      std::int64_t reach = static_cast<std::int64_t>(p - 1) *
                           (static_cast<std::int64_t>(m) * (m - 1) - 1);
      spill = -floor_div(-reach, p);
    }
    kClaim = kHi - spill;
    // The same rounds extend the hard support floor downward: phi of residue
    // block k reaches p*k - min(|k|, m-1)(p-1), so the result can hold terms
    // below floor(lo/p) and the claimed floor must follow them.
    std::int64_t curLo = f.window().lo(alpha);
    for (std::uint32_t r = 1; r < m; ++r) {
      std::int64_t b = floor_div(curLo, p);
      std::int64_t mm = (b < 0) ? static_cast<std::int64_t>(m - 1)
                                : std::min<std::int64_t>(b, m - 1);
      curLo = std::min(curLo, b * static_cast<std::int64_t>(p) -
                                  mm * static_cast<std::int64_t>(p - 1));
    }
    kLoOut = floor_div(curLo, p);
    if (kHi < kLo || kClaim < kLoOut)
      throw insufficient_window("psi_alpha: window holds no complete residue block");
    outw.bounds[alpha][0] = kLoOut;
    outw.bounds[alpha][1] = kClaim;
  }

  // pi^i = sum_j binom(i,j)(-1)^{i-j} (1+pi)^j within each residue block
  std::vector<std::vector<std::uint64_t>> basis(p, std::vector<std::uint64_t>(p, 0));
  for (std::uint32_t i = 0; i < p; ++i) {
    auto row = binomial_row_mod(BigInt(i), i, q);
    for (std::uint32_t j = 0; j <= i; ++j) {
      std::uint64_t v = row[j];
      if ((i - j) % 2 == 1) v = (q - v) % q;
      basis[i][j] = v;
    }
  }

  LaurentSeries result = LaurentSeries::zero(cx);
  LaurentSeries cur = f;
  if (!entire) {
    // keep room below the data for the downward reach of the subtract
    // rounds; everything there is known zero, so the claim stays exact
    Window blocks = f.window();
    blocks.bounds[alpha][0] = std::min(kLo, kLoOut) * p;
    blocks.bounds[alpha][1] = kHi * p + (p - 1);
    cur = LaurentSeries::assemble(cx, cur.truncated(blocks).terms(), blocks);
  }
  std::uint64_t pj = 1;

  for (std::uint32_t round = 0; round < m; ++round) {
    if (cur.is_zero()) break;
    // gather mod-p residue blocks: key has the alpha slot replaced by the block index
    std::map<ExpVec, std::vector<std::vector<std::uint64_t>>, ExpVecLess> blocks;
    for (const auto& [e, cc] : cur.terms()) {
      std::int64_t k = floor_div(e[alpha].num, p);
      std::uint32_t i = static_cast<std::uint32_t>(e[alpha].num - static_cast<std::int64_t>(k) * p);
      ExpVec key = e;
      key[alpha] = Rat::of(k);
      auto it = blocks.find(key);
      if (it == blocks.end())
        it = blocks.emplace(key, std::vector<std::vector<std::uint64_t>>(p, std::vector<std::uint64_t>(fdeg, 0))).first;
      for (std::uint32_t d = 0; d < fdeg; ++d) it->second[i][d] = cc.coeff(d) % p;
    }

    std::vector<LaurentSeries> lifted(p, LaurentSeries::zero(cx));
    for (const auto& [key, g] : blocks) {
      for (std::uint32_t j = 0; j < p; ++j) {
        // h_j = sum_{i >= j} basis[i][j] g_i, then the Frobenius preimage mod p
        std::vector<std::uint64_t> rep(fdeg, 0);
        for (std::uint32_t i = j; i < p; ++i)
          for (std::uint32_t d = 0; d < fdeg; ++d)
            rep[d] = (rep[d] + basis[i][j] % p * g[i][d]) % p;
        UnramCoeff h = UnramCoeff::from_rep(cx->coeff, rep);
        if (h.is_zero()) continue;
        UnramCoeff pre = h.frobenius_pow(fdeg == 1 ? 0 : fdeg - 1);
        std::vector<std::uint64_t> prep(fdeg, 0);
        for (std::uint32_t d = 0; d < fdeg; ++d) prep[d] = pre.coeff(d) % p;
        UnramCoeff lift = UnramCoeff::from_rep(cx->coeff, prep);
        if (lift.is_zero()) continue;
        lifted[j] = lifted[j] + LaurentSeries::monomial(cx, key, lift);
      }
    }

    result = result + lifted[0].scaled(UnramCoeff::from_int(cx->coeff, static_cast<std::int64_t>(pj)));

    if (round + 1 == m) break;
    LaurentSeries sub = LaurentSeries::zero(cx);
    for (std::uint32_t i = 0; i < p; ++i) {
      if (lifted[i].is_zero()) continue;
      sub = sub + series_detail::one_plus_pi_pow(cx, alpha, i) * phi_alpha(lifted[i], alpha);
    }
    if (!entire) {
      Window blockw = cur.window();
      sub = sub.truncated(blockw);
      cur = (cur - sub).truncated(blockw);
    } else {
      cur = cur - sub;
    }
    cur = cur.exact_div_p();
    pj *= p;
  }

  return result.truncated(outw);
}

// ---------------------------------------------------------------------------
// residue and norms
// ---------------------------------------------------------------------------

// Coefficient of prod X_alpha^{-1} in f * prod (1+X_alpha)^{-1}, expanding
// each (1+X)^{-1} in nonnegative powers.  Only monomials with all exponents
// <= -1 contribute, so the value is exact as soon as the window reaches -1.
inline UnramCoeff residue(const LaurentSeries& f) {
  const SeriesContext* cx = f.context();
  if (cx->mode != SeriesMode::Integral)
    throw mode_mismatch("residue is defined on the integral-exponent ring");
  if (!f.is_entire())
    for (std::size_t i = 0; i < cx->nvars(); ++i)
      if (f.window().hi(i) < -1)
        throw insufficient_window("residue: window must reach exponent -1 in every variable");
  UnramCoeff acc = UnramCoeff::zero(cx->coeff);
  for (const auto& [e, c] : f.terms()) {
    bool all_neg = true;
    std::int64_t parity = 0;
    for (const auto& r : e) {
      if (!(r < Rat::of(0))) { all_neg = false; break; }
      parity += 1 + r.num;
    }
    if (!all_neg) continue;
    acc = (parity % 2 != 0) ? acc - c : acc + c;
  }
  return acc;
}

inline LogNorm gauss_norm_jr(const LaurentSeries& f, std::size_t j, const Rat& r) {
  const SeriesContext* cx = f.context();
  if (j >= cx->nvars()) throw std::invalid_argument("gauss_norm_jr: variable index out of range");
  if (!(Rat::of(0) < r)) throw std::invalid_argument("gauss_norm_jr: radius must be positive");
  if (f.is_zero()) return LogNorm::zero_series();
  const Rat scale = r * Rat::make(cx->p(), cx->p() - 1);
  bool first = true;
  Rat best{};
  for (const auto& [e, c] : f.terms()) {
    Rat v = scale * e[j] + Rat::of(c.valuation().v);
    if (first || v < best) { best = v; first = false; }
  }
  return LogNorm::of(best);
}

inline LogNorm gauss_norm_r(const LaurentSeries& f, const Rat& r) {
  const SeriesContext* cx = f.context();
  if (!(Rat::of(0) < r)) throw std::invalid_argument("gauss_norm_r: radius must be positive");
  if (f.is_zero()) return LogNorm::zero_series();
  const Rat scale = r * Rat::make(cx->p(), cx->p() - 1);
  bool first = true;
  Rat best{};
  for (const auto& [e, c] : f.terms()) {
    Rat emin = e[0];
    for (std::size_t i = 1; i < e.size(); ++i)
      if (e[i] < emin) emin = e[i];
    Rat v = scale * emin + Rat::of(c.valuation().v);
    if (first || v < best) { best = v; first = false; }
  }
  return LogNorm::of(best);
}

inline LogNorm perfectoid_norm(const LaurentSeries& f) {
  const SeriesContext* cx = f.context();
  if (cx->mode != SeriesMode::Perfect || cx->m() != 1)
    throw mode_mismatch("perfectoid_norm lives on the characteristic-p perfect ring");
  if (f.is_zero()) return LogNorm::zero_series();
  const Rat scale = Rat::make(cx->p(), cx->p() - 1);
  bool first = true;
  Rat best{};
  for (std::size_t j = 0; j < cx->nvars(); ++j) {
    bool sfirst = true;
    Rat emin{};
    for (const auto& [e, c] : f.terms()) {
      if (sfirst || e[j] < emin) { emin = e[j]; sfirst = false; }
    }
    Rat v = scale * emin;
    if (first || v < best) { best = v; first = false; }
  }
  return LogNorm::of(best);
}

inline std::pair<LaurentSeries, LaurentSeries> split_integral(const LaurentSeries& f) {
  const SeriesContext* cx = f.context();
  LaurentSeries ip = LaurentSeries::zero(cx).truncated(f.window());
  LaurentSeries fp = LaurentSeries::zero(cx).truncated(f.window());
  for (const auto& [e, c] : f.terms()) {
    bool integral = true;
    for (const auto& r : e)
      if (!r.is_integer()) { integral = false; break; }
    auto piece = LaurentSeries::monomial(cx, e, c).truncated(f.window());
    if (integral) ip = ip + piece;
    else fp = fp + piece;
  }
  return {ip, fp};
}

// ---------------------------------------------------------------------------
// certified inversion
// ---------------------------------------------------------------------------

enum class InvertStatus { Certified, NotAUnit, Inconclusive };

// Certified means: f * inverse == 1 exactly on the inverse's window (checked
// with the honest product before returning).  NotAUnit is only reported with
// a proof (an entire element that vanishes mod p can never multiply to 1).
struct InvertOutcome {
  InvertStatus status;
  std::optional<LaurentSeries> inverse;
  std::string note;
};

namespace series_detail {

// best-effort mod-p inverse via stratum recursion in the last variable,
// truncated to `box`; correctness is established by the caller's final check
inline LaurentSeries invert_modp_rec(const LaurentSeries& fbar, std::size_t level,
                                     const Window& box) {
  const SeriesContext* cx = fbar.context();
  if (level == static_cast<std::size_t>(-1) || fbar.terms().size() == 1) {
    // base case: a single monomial with a unit coefficient
    const auto& [e, c] = *fbar.terms().begin();
    ExpVec inv = e;
    for (auto& r : inv) r = -r;
    return LaurentSeries::monomial(cx, inv, c.inv_unit());
  }
  std::int64_t v = 0;
  bool first = true;
  for (const auto& [e, c] : fbar.terms()) {
    if (first || e[level].num < v) { v = e[level].num; first = false; }
  }
  LaurentSeries s0 = LaurentSeries::zero(cx);
  for (const auto& [e, c] : fbar.terms()) {
    if (e[level].num != v) continue;
    ExpVec e2 = e;
    e2[level] = Rat::of(0);
    s0 = s0 + LaurentSeries::monomial(cx, e2, c);
  }
  LaurentSeries t0 = invert_modp_rec(s0, level - 1, box);
  ExpVec down(cx->nvars(), Rat::of(0));
  down[level] = Rat::of(-v);
  LaurentSeries head = raw_boxed(t0.shifted(down), box);
  LaurentSeries werr = raw_mul(fbar, head, box) - LaurentSeries::one(cx);
  werr = raw_boxed(werr, box);
  std::int64_t span = box.hi(level) - box.lo(level) + 4;
  LaurentSeries geo = LaurentSeries::one(cx);
  LaurentSeries pw = LaurentSeries::one(cx);
  for (std::int64_t i = 0; i < span; ++i) {
    pw = raw_mul(pw, -werr, box);
    if (pw.is_zero()) break;
    geo = geo + pw;
  }
  return raw_mul(head, raw_boxed(geo, box), box);
}

// Largest sub-box of `limit` containing 0 on which v equals the constant 1.
// Cuts that would evict terms of `keep` (the candidate inverse) are taken
// only as a last resort; otherwise trimming the inverse just recreates a
// truncation frontier in the product and the certificate never settles.
inline std::optional<Window> delta_one_box(const LaurentSeries& v, Window limit,
                                           const LaurentSeries& keep) {
  const SeriesContext* cx = v.context();
  ExpVec zero(cx->nvars(), Rat::of(0));
  bool saw_one = false;
  for (const auto& [e, c] : v.terms()) {
    if (e == zero) {
      if (!(c == UnramCoeff::one(cx->coeff))) return std::nullopt;
      saw_one = true;
    }
  }
  if (!saw_one) return std::nullopt;
  auto keep_penalty = [&](std::size_t var, bool is_hi, std::int64_t cut) {
    std::int64_t n = 0;
    for (const auto& [e, c] : keep.terms()) {
      if (is_hi && Rat::of(cut) < e[var]) ++n;
      if (!is_hi && e[var] < Rat::of(cut)) ++n;
    }
    return n;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [e, c] : v.terms()) {
      if (e == zero) continue;
      if (!limit.contains(e)) continue;
      // evict this stray term with a single-variable cut that keeps 0 in the
      // box: lower hi below a positive coordinate, or raise lo above a
      // negative one
      std::size_t best = 0;
      std::int64_t best_cost = -1, best_val = 0, best_pen = 0;
      bool best_is_hi = true;
      auto consider = [&](std::size_t i, bool is_hi, std::int64_t cut, std::int64_t cost) {
        std::int64_t pen = keep_penalty(i, is_hi, cut);
        if (best_cost < 0 || pen < best_pen || (pen == best_pen && cost < best_cost)) {
          best = i; best_cost = cost; best_val = cut; best_pen = pen; best_is_hi = is_hi;
        }
      };
      for (std::size_t i = 0; i < cx->nvars(); ++i) {
        if (Rat::of(0) < e[i]) {
          std::int64_t cut = LaurentSeries::ceil_rat(e[i]) - 1;  // >= 0
          consider(i, true, cut, limit.hi(i) - cut);
        } else if (e[i] < Rat::of(0)) {
          std::int64_t cut = LaurentSeries::floor_rat(e[i]) + 1;  // <= 0
          consider(i, false, cut, cut - limit.lo(i));
        }
      }
      if (best_cost < 0) return std::nullopt;
      if (best_is_hi) limit.bounds[best][1] = best_val;
      else limit.bounds[best][0] = best_val;
      changed = true;
      break;
    }
  }
  if (limit.empty_box()) return std::nullopt;
  for (std::size_t i = 0; i < cx->nvars(); ++i)
    if (limit.hi(i) < 0 || limit.lo(i) > 0) return std::nullopt;
  return limit;
}

}  // namespace series_detail

inline InvertOutcome try_invert(const LaurentSeries& f) {
  const SeriesContext* cx = f.context();
  const std::uint32_t m = cx->m();
  if (f.is_zero())
    return f.is_entire()
               ? InvertOutcome{InvertStatus::NotAUnit, std::nullopt, "zero"}
               : InvertOutcome{InvertStatus::Inconclusive, std::nullopt,
                               "vanishes on the window; behaviour outside is unknown"};

  const SeriesContext* modp = SeriesContext::get(cx->p(), 1, cx->f(), cx->vars, cx->mode,
                                                 cx->den_bound_exp, cx->default_lo, cx->default_hi);
  LaurentSeries fbar = f.reduce_mod_p(m == 1 ? cx : modp);
  if (fbar.is_zero()) {
    if (f.is_entire())
      return {InvertStatus::NotAUnit, std::nullopt, "lies in p times the ring"};
    return {InvertStatus::Inconclusive, std::nullopt,
            "vanishes mod p on the window; behaviour outside is unknown"};
  }

  // working box: the window (or support plus the context default), padded by
  // its own span so intermediate drift survives until the final check
  Window base = f.is_entire() ? f.support_box() : f.window();
  if (f.is_entire()) {
    for (std::size_t i = 0; i < cx->nvars(); ++i) {
      base.bounds[i][0] = std::min(base.bounds[i][0], cx->default_lo);
      base.bounds[i][1] = std::max(base.bounds[i][1], cx->default_hi);
    }
  } else {
    // window bounds can carry near-sentinel values from an earlier inversion
    // certificate; keep the computation box proportional to the actual data
    Window sup = f.support_box();
    for (std::size_t i = 0; i < cx->nvars(); ++i) {
      std::int64_t lo_floor = std::min(sup.bounds[i][0], cx->default_lo);
      std::int64_t hi_ceil = std::max(sup.bounds[i][1], cx->default_hi);
      std::int64_t guard = hi_ceil - lo_floor + 1;
      base.bounds[i][0] = std::max(base.bounds[i][0], lo_floor - guard);
      base.bounds[i][1] = std::min(base.bounds[i][1], hi_ceil + guard);
    }
  }
  Window pad = base;
  pad.entire = false;
  for (std::size_t i = 0; i < cx->nvars(); ++i) {
    std::int64_t span = base.hi(i) - base.lo(i) + 1;
    pad.bounds[i][0] = clamp_bound(base.lo(i) - span);
    pad.bounds[i][1] = clamp_bound(base.hi(i) + span);
  }

  LaurentSeries g0 = series_detail::invert_modp_rec(fbar, cx->nvars() - 1, pad);
  LaurentSeries g = (m == 1) ? g0 : g0.lift_from_mod_p(cx);

  // Newton refinement to full precision
  if (m > 1) {
    std::uint32_t rounds = 0;
    for (std::uint32_t pm = 1; pm < m; pm *= 2) ++rounds;
    LaurentSeries two = LaurentSeries::one(cx) + LaurentSeries::one(cx);
    for (std::uint32_t i = 0; i < rounds; ++i) {
      LaurentSeries fg = series_detail::raw_mul(f, g, pad);
      g = series_detail::raw_mul(g, two - fg, pad);
    }
  }

  // verify-and-truncate loop: the certificate is the final windowed product
  for (int iter = 0; iter < 4; ++iter) {
    LaurentSeries cand = g;
    cand = cand.truncated([&] {
      Window wc = pad;
      wc.entire = true;
      return wc;
    }());
    LaurentSeries v = f * cand;
    // an entire product equal to 1 certifies the inverse everywhere
    if (v.window().entire && v == LaurentSeries::one(cx))
      return {InvertStatus::Certified, cand, ""};
    // claim no more than the box the product was actually computed on;
    // sentinel-sized windows poison interval arithmetic downstream
    Window limit = v.window().entire ? pad : v.window();
    limit.entire = false;
    auto cert = series_detail::delta_one_box(v, limit, cand);
    if (!cert)
      return {InvertStatus::Inconclusive, std::nullopt,
              "no window certificate for the candidate inverse"};
    Window cw = *cert;
    LaurentSeries trimmed = g.truncated(cw);
    if (trimmed.terms() == g.terms()) {
      // the exact inverse agrees with the candidate everywhere below the
      // verified top, so the candidate's support floor is a hard lower bound
      // and claiming it keeps later window arithmetic from eroding
      Window claim = cw;
      if (!trimmed.is_zero()) {
        Window sup = trimmed.support_box();
        for (std::size_t i = 0; i < cx->nvars(); ++i)
          claim.bounds[i][0] = std::max(claim.bounds[i][0], sup.bounds[i][0]);
      }
      return {InvertStatus::Certified, LaurentSeries::assemble(cx, trimmed.terms(), claim), ""};
    }
    g = trimmed;
  }
  return {InvertStatus::Inconclusive, std::nullopt,
          "certificate window did not stabilize"};
}

}  // namespace phigamma
