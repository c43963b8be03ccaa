// Finite-level descent laboratory: tensor products of finite residue fields
// carrying partial Frobenii, commuting-matrix Galois data over Z/p^m, and
// the exact equivalence between the two sides, checkable against a
// brute-force Koszul oracle.
//
// The base F_{q_1} x ... x F_{q_n} (tensor over F_p) splits into g = prod
// f_alpha / L copies of F_{p^L}, L = lcm(f_alpha).  We index components by
// the orbits of the diagonal shift on the embedding torus prod Z/f_alpha: a
// ring element stores one value per orbit representative, the values at the
// other points of an orbit being Frobenius translates.  A partial Frobenius
// shifts one torus coordinate, hence permutes orbits and twists entries by a
// computable Frobenius power; the full composite shifts the diagonal and
// fixes every component.
//
// Descent reduces to one twisted fixed-point problem per call: a basis U
// with U = P sigma^e(U) over a single large unramified coefficient ring.
// It is solved the way the source algorithms prescribe: a linear Lang-type
// solve over the residue field, then an iterative lift solving entrywise
// Artin-Schreier equations, searched exhaustively when the field is small
// and by the additive-polynomial linear system otherwise.

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "phigamma/complexes.hpp"
#include "phigamma/module.hpp"
#include "phigamma/zlinalg.hpp"

namespace phigamma {

// ---------------------------------------------------------------------------
// the split tensor-product base
// ---------------------------------------------------------------------------

struct FiniteBase {
  Zpm ring{};
  std::uint32_t n = 0;
  std::vector<std::uint32_t> f;    // residue degrees per variable
  std::uint32_t L = 1;             // lcm of the f_alpha
  std::size_t g = 0;               // component count
  const UnramContext* comp = nullptr;  // W(F_{p^L})/p^m

  std::vector<std::vector<std::uint32_t>> reps;  // orbit representatives
  std::vector<std::size_t> orbit_of;             // flattened torus -> orbit
  std::vector<std::uint32_t> shift_of;           // flattened torus -> diagonal shift

  // partial Frobenius alpha: component i reads sigma^twist[i] of component src[i]
  struct CompMap {
    std::vector<std::size_t> src;
    std::vector<std::uint32_t> twist;
  };
  std::vector<CompMap> frob;

  std::size_t torus_size() const {
    std::size_t s = 1;
    for (auto d : f) s *= d;
    return s;
  }
  std::size_t point_index(const std::vector<std::uint32_t>& t) const {
    std::size_t idx = 0;
    for (std::uint32_t i = 0; i < n; ++i) idx = idx * f[i] + t[i];
    return idx;
  }

  friend bool operator==(const FiniteBase& a, const FiniteBase& b) {
    return a.ring.p == b.ring.p && a.ring.m == b.ring.m && a.f == b.f;
  }

  static FiniteBase make(std::uint32_t p, std::uint32_t m, std::vector<std::uint32_t> degrees) {
    if (degrees.empty()) throw std::invalid_argument("FiniteBase: no variables");
    for (auto d : degrees)
      if (d == 0) throw std::invalid_argument("FiniteBase: residue degree must be >= 1");
    FiniteBase B;
    B.ring = Zpm::make(p, m);
    B.n = static_cast<std::uint32_t>(degrees.size());
    B.f = std::move(degrees);
    B.L = 1;
    for (auto d : B.f) B.L = std::lcm(B.L, d);
    B.comp = UnramContext::get(p, m, B.L);

    const std::size_t tor = B.torus_size();
    B.orbit_of.assign(tor, static_cast<std::size_t>(-1));
    B.shift_of.assign(tor, 0);
    std::vector<std::uint32_t> t(B.n, 0);
    for (std::size_t idx = 0; idx < tor; ++idx) {
      // decode idx
      std::size_t rem = idx;
      for (std::uint32_t i = B.n; i-- > 0;) {
        t[i] = static_cast<std::uint32_t>(rem % B.f[i]);
        rem /= B.f[i];
      }
      if (B.orbit_of[idx] != static_cast<std::size_t>(-1)) continue;
      std::size_t orb = B.reps.size();
      B.reps.push_back(t);
      std::vector<std::uint32_t> q = t;
      for (std::uint32_t s = 0;; ++s) {
        std::size_t qi = B.point_index(q);
        if (s > 0 && qi == idx) break;
        B.orbit_of[qi] = orb;
        B.shift_of[qi] = s;
        for (std::uint32_t i = 0; i < B.n; ++i) q[i] = (q[i] + 1) % B.f[i];
        if (s + 1 >= 2 * B.L) throw std::logic_error("FiniteBase: orbit walk did not close");
      }
    }
    B.g = B.reps.size();
    std::size_t expect = tor / B.L;
    if (B.g != expect) throw std::logic_error("FiniteBase: component count mismatch");

    B.frob.resize(B.n);
    for (std::uint32_t a = 0; a < B.n; ++a) {
      B.frob[a].src.resize(B.g);
      B.frob[a].twist.resize(B.g);
      for (std::size_t i = 0; i < B.g; ++i) {
        std::vector<std::uint32_t> q = B.reps[i];
        q[a] = (q[a] + 1) % B.f[a];
        std::size_t qi = B.point_index(q);
        B.frob[a].src[i] = B.orbit_of[qi];
        B.frob[a].twist[i] = B.shift_of[qi];
      }
    }
    return B;
  }
};

// ---------------------------------------------------------------------------
// small dense matrices over an unramified coefficient ring
// ---------------------------------------------------------------------------

using UMat = std::vector<std::vector<UnramCoeff>>;

inline UMat umat_zero(const UnramContext* cx, std::size_t r, std::size_t c) {
  return UMat(r, std::vector<UnramCoeff>(c, UnramCoeff::zero(cx)));
}
inline UMat umat_identity(const UnramContext* cx, std::size_t r) {
  UMat m = umat_zero(cx, r, r);
  for (std::size_t i = 0; i < r; ++i) m[i][i] = UnramCoeff::one(cx);
  return m;
}
inline UMat umat_mul(const UMat& a, const UMat& b) {
  std::size_t r = a.size(), k = b.size(), c = b[0].size();
  if (a[0].size() != k) throw std::invalid_argument("umat_mul: shape mismatch");
  const UnramContext* cx = a[0][0].context();
  UMat out = umat_zero(cx, r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t t = 0; t < k; ++t) {
      if (a[i][t].is_zero()) continue;
      for (std::size_t j = 0; j < c; ++j) out[i][j] += a[i][t] * b[t][j];
    }
  return out;
}
inline UMat umat_frob_pow(const UMat& a, std::uint32_t k) {
  UMat out = a;
  for (auto& row : out)
    for (auto& v : row) v = v.frobenius_pow(k);
  return out;
}
inline bool umat_equal(const UMat& a, const UMat& b) { return a == b; }

// Gauss-Jordan inverse over the local coefficient ring; unit pivots exist
// exactly when the matrix is invertible.
inline std::optional<UMat> umat_try_inv(const UMat& a) {
  std::size_t r = a.size();
  const UnramContext* cx = a[0][0].context();
  UMat m = a, inv = umat_identity(cx, r);
  for (std::size_t k = 0; k < r; ++k) {
    std::size_t piv = r;
    for (std::size_t i = k; i < r; ++i)
      if (m[i][k].is_unit()) { piv = i; break; }
    if (piv == r) return std::nullopt;
    std::swap(m[k], m[piv]);
    std::swap(inv[k], inv[piv]);
    UnramCoeff s = m[k][k].inv_unit();
    for (std::size_t j = 0; j < r; ++j) {
      m[k][j] = m[k][j] * s;
      inv[k][j] = inv[k][j] * s;
    }
    for (std::size_t i = 0; i < r; ++i) {
      if (i == k || m[i][k].is_zero()) continue;
      UnramCoeff c = m[i][k];
      for (std::size_t j = 0; j < r; ++j) {
        m[i][j] -= c * m[k][j];
        inv[i][j] -= c * inv[k][j];
      }
    }
  }
  return inv;
}
inline UMat umat_inv(const UMat& a) {
  auto inv = umat_try_inv(a);
  if (!inv) throw not_a_unit("umat_inv: matrix is not invertible");
  return *inv;
}

// ---------------------------------------------------------------------------
// canonical subfield embeddings between unramified coefficient rings
// ---------------------------------------------------------------------------

// W(F_{p^a})/p^m -> W(F_{p^b})/p^m for a | b: send the generator to the
// Hensel lift of a residue root of its minimal polynomial.  Ring maps of
// truncated Witt rings are determined by that root, so the embedding
// commutes with Frobenius automatically.
struct SubfieldHom {
  const UnramContext* src = nullptr;
  const UnramContext* dst = nullptr;
  std::vector<UnramCoeff> root_pow;  // images of the generator powers
  ZMat digit_mat;                    // dst digits of those images, column per source digit

  UnramCoeff apply(const UnramCoeff& a) const {
    UnramCoeff out = UnramCoeff::zero(dst);
    for (std::uint32_t j = 0; j < src->f; ++j) {
      std::uint64_t c = a.coeff(j);
      if (c) out += root_pow[j].scale(c);
    }
    return out;
  }
  // preimage under the embedding; the input must lie in the subring
  UnramCoeff section(const UnramCoeff& y) const {
    ZMat b = ZMat::zero(dst->ring, dst->f, 1);
    for (std::uint32_t i = 0; i < dst->f; ++i) b.at(i, 0) = y.coeff(i);
    auto x = solve(digit_mat, b);
    if (!x) throw std::logic_error("SubfieldHom: value is not in the subring");
    std::vector<std::uint64_t> rep(src->f);
    for (std::uint32_t j = 0; j < src->f; ++j) rep[j] = x->at(j, 0);
    return UnramCoeff::from_rep(src, rep);
  }
};

inline const SubfieldHom& subfield_hom(const UnramContext* src, const UnramContext* dst) {
  static std::map<std::pair<const UnramContext*, const UnramContext*>, SubfieldHom> cache;
  auto key = std::make_pair(src, dst);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  if (src->ring.q != dst->ring.q || dst->f % src->f != 0)
    throw std::invalid_argument("subfield_hom: not a subfield situation");

  SubfieldHom H;
  H.src = src;
  H.dst = dst;
  UnramCoeff root = UnramCoeff::zero(dst);
  if (src->f == 1) {
    root = UnramCoeff::zero(dst);  // generator of the prime ring is 0 (x mod x)
  } else if (src == dst) {
    root = UnramCoeff::theta(dst);
  } else {
    // residue root: search the sigma^{src->f}-fixed subfield, whose F_p-span
    // we read off a kernel over the residue ring
    const std::uint32_t p = dst->ring.p;
    const UnramContext* res = UnramContext::get(p, 1, dst->f);
    ZMat S = ZMat::zero(res->ring, dst->f, dst->f);
    for (std::uint32_t d = 0; d < dst->f; ++d) {
      std::vector<std::uint64_t> rep(dst->f, 0);
      rep[d] = 1;
      UnramCoeff v = UnramCoeff::from_rep(res, rep).frobenius_pow(src->f);
      for (std::uint32_t i = 0; i < dst->f; ++i)
        S.at(i, d) = (v.coeff(i) + p - (i == d ? 1 : 0)) % p;
    }
    ZMat K = kernel(S);
    if (K.cols != src->f) throw std::logic_error("subfield_hom: wrong subfield dimension");
    std::uint64_t count = 1;
    for (std::uint32_t j = 0; j < src->f; ++j) {
      count *= p;
      if (count > 65536) throw std::logic_error("subfield_hom: residue search too large");
    }
    auto eval_poly = [&](const std::vector<std::uint64_t>& cs, const UnramCoeff& x) {
      const UnramContext* cx = x.context();
      UnramCoeff acc = UnramCoeff::zero(cx);
      for (std::size_t d = cs.size(); d-- > 0;) {
        acc = acc * x;
        acc += UnramCoeff::from_int(cx, static_cast<std::int64_t>(cs[d]));
      }
      return acc;
    };
    std::optional<UnramCoeff> found;
    std::vector<std::uint32_t> digits(src->f, 0);
    while (true) {
      std::vector<std::uint64_t> rep(dst->f, 0);
      for (std::uint32_t j = 0; j < src->f; ++j)
        if (digits[j])
          for (std::uint32_t i = 0; i < dst->f; ++i)
            rep[i] = (rep[i] + mulmod_u64(K.at(i, j), digits[j], p)) % p;
      UnramCoeff cand = UnramCoeff::from_rep(res, rep);
      if (eval_poly(src->minpoly, cand).is_zero() && !cand.is_zero()) {
        found = cand;
        break;
      }
      std::uint32_t j = 0;
      while (j < src->f && ++digits[j] == p) digits[j++] = 0;
      if (j == src->f) break;
    }
    if (!found) throw std::logic_error("subfield_hom: no residue root found");
    // Hensel-lift the residue root into the full ring
    std::vector<std::uint64_t> rep0(dst->f);
    for (std::uint32_t i = 0; i < dst->f; ++i) rep0[i] = found->coeff(i);
    root = UnramCoeff::from_rep(dst, rep0);
    std::vector<std::uint64_t> deriv(src->minpoly.size() - 1);
    for (std::size_t d = 1; d < src->minpoly.size(); ++d)
      deriv[d - 1] = mulmod_u64(src->minpoly[d], d % dst->ring.q, dst->ring.q);
    for (std::uint32_t step = 1; step < dst->ring.m; ++step) {
      UnramCoeff h = eval_poly(src->minpoly, root);
      UnramCoeff hp = eval_poly(deriv, root);
      root = root - h * hp.inv_unit();
    }
    if (!eval_poly(src->minpoly, root).is_zero())
      throw std::logic_error("subfield_hom: Hensel lift failed");
  }

  H.root_pow.assign(src->f, UnramCoeff::one(dst));
  for (std::uint32_t j = 1; j < src->f; ++j) H.root_pow[j] = H.root_pow[j - 1] * root;
  H.digit_mat = ZMat::zero(dst->ring, dst->f, src->f);
  for (std::uint32_t j = 0; j < src->f; ++j)
    for (std::uint32_t i = 0; i < dst->f; ++i) H.digit_mat.at(i, j) = H.root_pow[j].coeff(i);
  return cache.emplace(key, std::move(H)).first->second;
}

// ---------------------------------------------------------------------------
// the two sides of the correspondence
// ---------------------------------------------------------------------------

struct GaloisRepFin {
  Zpm ring{};
  std::size_t rank = 0;
  std::vector<ZMat> rho;  // one commuting invertible matrix per variable

  static GaloisRepFin trivial(const Zpm& ring, std::size_t rank, std::uint32_t n) {
    GaloisRepFin V;
    V.ring = ring;
    V.rank = rank;
    for (std::uint32_t a = 0; a < n; ++a) V.rho.push_back(ZMat::identity(ring, rank));
    return V;
  }

  void validate() const {
    for (const ZMat& r : rho) {
      if (r.rows != rank || r.cols != rank)
        throw std::invalid_argument("GaloisRepFin: matrix shape mismatch");
      SmithForm s = smith(r);
      if (s.piv.size() != rank || *std::max_element(s.piv.begin(), s.piv.end()) != 0)
        throw std::invalid_argument("GaloisRepFin: generator not invertible");
    }
    for (std::size_t a = 0; a < rho.size(); ++a)
      for (std::size_t b = a + 1; b < rho.size(); ++b) {
        ZMat lhs = rho[a] * rho[b], rhs = rho[b] * rho[a];
        for (std::size_t i = 0; i < rank; ++i)
          for (std::size_t j = 0; j < rank; ++j)
            if (lhs.at(i, j) != rhs.at(i, j))
              throw std::invalid_argument("GaloisRepFin: generators do not commute");
      }
  }

  static GaloisRepFin direct_sum(const GaloisRepFin& x, const GaloisRepFin& y) {
    if (x.rho.size() != y.rho.size()) throw std::invalid_argument("direct_sum: variable mismatch");
    GaloisRepFin V;
    V.ring = x.ring;
    V.rank = x.rank + y.rank;
    for (std::size_t a = 0; a < x.rho.size(); ++a) {
      ZMat m = ZMat::zero(x.ring, V.rank, V.rank);
      for (std::size_t i = 0; i < x.rank; ++i)
        for (std::size_t j = 0; j < x.rank; ++j) m.at(i, j) = x.rho[a].at(i, j);
      for (std::size_t i = 0; i < y.rank; ++i)
        for (std::size_t j = 0; j < y.rank; ++j) m.at(x.rank + i, x.rank + j) = y.rho[a].at(i, j);
      V.rho.push_back(std::move(m));
    }
    return V;
  }

  static GaloisRepFin tensor(const GaloisRepFin& x, const GaloisRepFin& y) {
    if (x.rho.size() != y.rho.size()) throw std::invalid_argument("tensor: variable mismatch");
    GaloisRepFin V;
    V.ring = x.ring;
    V.rank = x.rank * y.rank;
    for (std::size_t a = 0; a < x.rho.size(); ++a) {
      ZMat m = ZMat::zero(x.ring, V.rank, V.rank);
      for (std::size_t i1 = 0; i1 < x.rank; ++i1)
        for (std::size_t j1 = 0; j1 < x.rank; ++j1)
          for (std::size_t i2 = 0; i2 < y.rank; ++i2)
            for (std::size_t j2 = 0; j2 < y.rank; ++j2)
              m.at(i1 * y.rank + i2, j1 * y.rank + j2) =
                  mulmod_u64(x.rho[a].at(i1, j1), y.rho[a].at(i2, j2), x.ring.q);
      V.rho.push_back(std::move(m));
    }
    return V;
  }
};

struct PhiModFin {
  FiniteBase base;
  std::size_t rank = 0;
  // F[alpha][component]: the semilinear Frobenius matrix read at that output
  // component; the action is x |-> F[a][i] sigma^{twist}(x[src])
  std::vector<std::vector<UMat>> F;

  static PhiModFin trivial(const FiniteBase& B, std::size_t rank) {
    PhiModFin D;
    D.base = B;
    D.rank = rank;
    D.F.assign(B.n, std::vector<UMat>(B.g, umat_identity(B.comp, rank)));
    return D;
  }

  EtaleReport validate_etale() const {
    for (std::uint32_t a = 0; a < base.n; ++a)
      for (std::size_t i = 0; i < base.g; ++i)
        if (!umat_try_inv(F[a][i]))
          return {EtaleStatus::NotEtale, "variable " + std::to_string(a) + ", component " +
                                             std::to_string(i) + ": matrix not invertible"};
    return {EtaleStatus::Etale, ""};
  }

  CommutationReport validate_commutation() const {
    for (std::uint32_t a = 0; a < base.n; ++a)
      for (std::uint32_t b = a + 1; b < base.n; ++b)
        for (std::size_t i = 0; i < base.g; ++i) {
          UMat lhs = umat_mul(F[a][i], umat_frob_pow(F[b][base.frob[a].src[i]],
                                                     base.frob[a].twist[i]));
          UMat rhs = umat_mul(F[b][i], umat_frob_pow(F[a][base.frob[b].src[i]],
                                                     base.frob[b].twist[i]));
          if (!umat_equal(lhs, rhs))
            return {false, "variables " + std::to_string(a) + "," + std::to_string(b) +
                               " disagree on component " + std::to_string(i)};
        }
    return {true, ""};
  }

  // Z/p^m coordinates: index ((component * rank + row) * L + digit)
  std::size_t dim() const { return base.g * rank * base.comp->f; }

  ZMat phi_operator(std::uint32_t alpha) const {
    const std::uint32_t Lf = base.comp->f;
    ZMat M = ZMat::zero(base.ring, dim(), dim());
    for (std::size_t i = 0; i < base.g; ++i) {
      std::size_t j = base.frob[alpha].src[i];
      std::uint32_t tw = base.frob[alpha].twist[i];
      for (std::size_t cr = 0; cr < rank; ++cr) {
        for (std::uint32_t d = 0; d < Lf; ++d) {
          std::vector<std::uint64_t> rep(Lf, 0);
          rep[d] = 1;
          UnramCoeff x = UnramCoeff::from_rep(base.comp, rep).frobenius_pow(tw);
          std::size_t col = (j * rank + cr) * Lf + d;
          for (std::size_t orow = 0; orow < rank; ++orow) {
            UnramCoeff y = F[alpha][i][orow][cr] * x;
            for (std::uint32_t dd = 0; dd < Lf; ++dd) {
              std::uint64_t v = y.coeff(dd);
              if (v)
                M.at((i * rank + orow) * Lf + dd, col) =
                    (M.at((i * rank + orow) * Lf + dd, col) + v) % base.ring.q;
            }
          }
        }
      }
    }
    return M;
  }

  static PhiModFin direct_sum(const PhiModFin& x, const PhiModFin& y) {
    if (!(x.base == y.base)) throw std::invalid_argument("direct_sum: base mismatch");
    PhiModFin D;
    D.base = x.base;
    D.rank = x.rank + y.rank;
    D.F.assign(x.base.n, std::vector<UMat>(x.base.g, umat_zero(x.base.comp, D.rank, D.rank)));
    for (std::uint32_t a = 0; a < x.base.n; ++a)
      for (std::size_t c = 0; c < x.base.g; ++c) {
        for (std::size_t i = 0; i < x.rank; ++i)
          for (std::size_t j = 0; j < x.rank; ++j) D.F[a][c][i][j] = x.F[a][c][i][j];
        for (std::size_t i = 0; i < y.rank; ++i)
          for (std::size_t j = 0; j < y.rank; ++j)
            D.F[a][c][x.rank + i][x.rank + j] = y.F[a][c][i][j];
      }
    return D;
  }

  static PhiModFin tensor(const PhiModFin& x, const PhiModFin& y) {
    if (!(x.base == y.base)) throw std::invalid_argument("tensor: base mismatch");
    PhiModFin D;
    D.base = x.base;
    D.rank = x.rank * y.rank;
    D.F.assign(x.base.n, std::vector<UMat>(x.base.g, umat_zero(x.base.comp, D.rank, D.rank)));
    for (std::uint32_t a = 0; a < x.base.n; ++a)
      for (std::size_t c = 0; c < x.base.g; ++c)
        for (std::size_t i1 = 0; i1 < x.rank; ++i1)
          for (std::size_t j1 = 0; j1 < x.rank; ++j1)
            for (std::size_t i2 = 0; i2 < y.rank; ++i2)
              for (std::size_t j2 = 0; j2 < y.rank; ++j2)
                D.F[a][c][i1 * y.rank + i2][j1 * y.rank + j2] =
                    x.F[a][c][i1][j1] * y.F[a][c][i2][j2];
    return D;
  }
};

// ---------------------------------------------------------------------------
// the twisted fixed-basis solver
// ---------------------------------------------------------------------------

inline std::uint32_t matrix_order(const ZMat& A, std::uint32_t cap = 100000) {
  ZMat cur = A;
  ZMat id = ZMat::identity(A.ring, A.rows);
  for (std::uint32_t k = 1; k <= cap; ++k) {
    bool is_id = true;
    for (std::size_t i = 0; i < A.rows && is_id; ++i)
      for (std::size_t j = 0; j < A.cols; ++j)
        if (cur.at(i, j) != id.at(i, j)) { is_id = false; break; }
    if (is_id) return k;
    cur = cur * A;
  }
  throw std::invalid_argument("matrix_order: exceeded the order cap");
}

namespace finite_detail {

// y with sigma^e(y) - y = c over the residue field; exhaustive search when
// the field is small, the linear additive-polynomial system otherwise
inline UnramCoeff solve_twisted_difference(const UnramContext* res, std::uint32_t e,
                                           const UnramCoeff& c) {
  const std::uint32_t p = res->ring.p, Lf = res->f;
  std::uint64_t count = 1;
  bool small = true;
  for (std::uint32_t i = 0; i < Lf && small; ++i) {
    count *= p;
    if (count > 65536) small = false;
  }
  if (small) {
    std::vector<std::uint64_t> rep(Lf, 0);
    while (true) {
      UnramCoeff y = UnramCoeff::from_rep(res, rep);
      if (y.frobenius_pow(e) - y == c) return y;
      std::uint32_t j = 0;
      while (j < Lf && ++rep[j] == p) rep[j++] = 0;
      if (j == Lf) break;
    }
    throw isomorphism_not_found("twisted difference equation has no root in the component field");
  }
  ZMat A = ZMat::zero(res->ring, Lf, Lf);
  for (std::uint32_t d = 0; d < Lf; ++d) {
    std::vector<std::uint64_t> rep(Lf, 0);
    rep[d] = 1;
    UnramCoeff v = UnramCoeff::from_rep(res, rep).frobenius_pow(e);
    for (std::uint32_t i = 0; i < Lf; ++i) A.at(i, d) = (v.coeff(i) + p - (i == d ? 1 : 0)) % p;
  }
  ZMat b = ZMat::zero(res->ring, Lf, 1);
  for (std::uint32_t i = 0; i < Lf; ++i) b.at(i, 0) = c.coeff(i);
  auto x = solve(A, b);
  if (!x)
    throw isomorphism_not_found("twisted difference equation has no root in the component field");
  std::vector<std::uint64_t> rep(Lf);
  for (std::uint32_t i = 0; i < Lf; ++i) rep[i] = x->at(i, 0);
  return UnramCoeff::from_rep(res, rep);
}

}  // namespace finite_detail

// Invertible U over W(F_{p^{L'}})/p^m with U = P sigma^e(U): residue-level
// Lang solve, then the iterative lift through entrywise twisted difference
// equations.
inline UMat twisted_fixed_basis(const UnramContext* big, const UMat& P, std::uint32_t e) {
  const std::uint32_t p = big->ring.p, m = big->ring.m, Lf = big->f;
  const std::size_t r = P.size();
  const UnramContext* res = UnramContext::get(p, 1, Lf);

  // residue fixed space of v -> P sigma^e(v) as an F_p-linear kernel
  const std::size_t dim = r * Lf;
  ZMat A = ZMat::zero(res->ring, dim, dim);
  for (std::size_t j = 0; j < r; ++j)
    for (std::uint32_t d = 0; d < Lf; ++d) {
      std::vector<std::uint64_t> rep(Lf, 0);
      rep[d] = 1;
      UnramCoeff xv = UnramCoeff::from_rep(res, rep).frobenius_pow(e);
      for (std::size_t i = 0; i < r; ++i) {
        std::vector<std::uint64_t> prep(Lf);
        for (std::uint32_t t = 0; t < Lf; ++t) prep[t] = P[i][j].coeff(t) % p;
        UnramCoeff w = UnramCoeff::from_rep(res, prep) * xv;
        for (std::uint32_t dd = 0; dd < Lf; ++dd) {
          std::uint64_t v = (w.coeff(dd) + (i == j && dd == d ? p - 1 : 0)) % p;
          if (v) A.at(i * Lf + dd, j * Lf + d) = v;
        }
      }
    }
  ZMat K = kernel(A);

  // pick r residue columns independent over the big residue field
  std::vector<std::vector<UnramCoeff>> chosen;
  std::vector<std::vector<UnramCoeff>> echelon;  // row-reduced copies
  for (std::size_t c = 0; c < K.cols && chosen.size() < r; ++c) {
    std::vector<UnramCoeff> v(r, UnramCoeff::zero(res));
    for (std::size_t i = 0; i < r; ++i) {
      std::vector<std::uint64_t> rep(Lf);
      for (std::uint32_t d = 0; d < Lf; ++d) rep[d] = K.at(i * Lf + d, c);
      v[i] = UnramCoeff::from_rep(res, rep);
    }
    std::vector<UnramCoeff> w = v;
    for (const auto& row : echelon) {
      std::size_t piv = 0;
      while (piv < r && row[piv].is_zero()) ++piv;
      if (piv < r && !w[piv].is_zero()) {
        UnramCoeff c2 = w[piv] * row[piv].inv_unit();
        for (std::size_t i = 0; i < r; ++i) w[i] -= c2 * row[i];
      }
    }
    bool zero = true;
    for (const auto& x : w)
      if (!x.is_zero()) { zero = false; break; }
    if (zero) continue;
    echelon.push_back(w);
    chosen.push_back(v);
  }
  if (chosen.size() < r)
    throw isomorphism_not_found("twisted fixed space has rank below the module rank");

  UMat U = umat_zero(big, r, r);
  for (std::size_t j = 0; j < r; ++j)
    for (std::size_t i = 0; i < r; ++i) {
      std::vector<std::uint64_t> rep(Lf);
      for (std::uint32_t d = 0; d < Lf; ++d) rep[d] = chosen[j][i].coeff(d);
      U[i][j] = UnramCoeff::from_rep(big, rep);
    }

  // lift: U^{-1} P sigma^e(U) = 1 + p^j A, correct by 1 + p^j Y with
  // sigma^e(Y) - Y = -A on residues
  std::uint64_t pj = 1;
  for (std::uint32_t step = 1; step < m; ++step) {
    pj *= p;
    UMat E = umat_mul(umat_mul(umat_inv(U), P), umat_frob_pow(U, e));
    UMat corr = umat_identity(big, r);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < r; ++j) {
        UnramCoeff a = E[i][j] - (i == j ? UnramCoeff::one(big) : UnramCoeff::zero(big));
        std::vector<std::uint64_t> rep(Lf);
        for (std::uint32_t d = 0; d < Lf; ++d) {
          std::uint64_t v = a.coeff(d);
          if (v % pj != 0)
            throw std::logic_error("twisted_fixed_basis: lift invariant violated");
          rep[d] = (v / pj) % p;
        }
        UnramCoeff ares = UnramCoeff::from_rep(res, rep);
        if (ares.is_zero()) continue;
        UnramCoeff y = finite_detail::solve_twisted_difference(res, e, -ares);
        std::vector<std::uint64_t> yrep(Lf);
        for (std::uint32_t d = 0; d < Lf; ++d) yrep[d] = y.coeff(d) * pj;
        corr[i][j] += UnramCoeff::from_rep(big, yrep);
      }
    U = umat_mul(U, corr);
  }

  if (!umat_equal(U, umat_mul(P, umat_frob_pow(U, e))))
    throw isomorphism_not_found("twisted fixed basis failed final verification");
  if (!umat_try_inv(U))
    throw isomorphism_not_found("twisted fixed basis is not invertible");
  return U;
}

// ---------------------------------------------------------------------------
// the descent functors
// ---------------------------------------------------------------------------

namespace finite_detail {

// walk data: t_rep(i) + e_alpha = t_rep(j) + sum_b a_b f_b e_b + s * diag
// inside the enlarged torus prod Z/(f_b k_b)
struct TorusWalk {
  std::size_t src = 0;
  std::vector<std::uint32_t> a;
  std::uint32_t s = 0;
};

inline TorusWalk torus_walk(const FiniteBase& B, const std::vector<std::uint32_t>& k,
                            std::uint32_t bigL, std::size_t i, std::uint32_t alpha) {
  TorusWalk W;
  std::vector<std::uint32_t> q = B.reps[i];
  q[alpha] = (q[alpha] + 1) % B.f[alpha];
  W.src = B.frob[alpha].src[i];
  const auto& target = B.reps[W.src];
  for (std::uint32_t s = 0; s < bigL; ++s) {
    bool ok = true;
    std::vector<std::uint32_t> a(B.n, 0);
    for (std::uint32_t b = 0; b < B.n && ok; ++b) {
      std::uint64_t mod = static_cast<std::uint64_t>(B.f[b]) * k[b];
      // lhs coordinate in the enlarged torus: rep_i + e_alpha has no wrap
      // beyond f_b, so compute it from the small-torus data directly
      std::uint64_t lhs = B.reps[i][b] + (b == alpha ? 1u : 0u);
      std::uint64_t rhs = (target[b] + static_cast<std::uint64_t>(s)) % mod;
      std::uint64_t diff = (lhs + mod - rhs) % mod;
      if (diff % B.f[b] != 0) ok = false;
      else a[b] = static_cast<std::uint32_t>((diff / B.f[b]) % k[b]);
    }
    if (ok) {
      W.a = std::move(a);
      W.s = s;
      if (W.s % B.L != B.frob[alpha].twist[i])
        throw std::logic_error("torus_walk: twist inconsistent with the base map");
      return W;
    }
  }
  throw std::logic_error("torus_walk: no diagonal shift matches");
}

inline ZMat zmat_pow(const ZMat& A, std::uint64_t e) {
  ZMat r = ZMat::identity(A.ring, A.rows);
  ZMat b = A;
  while (e) {
    if (e & 1) r = r * b;
    b = b * b;
    e >>= 1;
  }
  return r;
}

inline UMat umat_from_zmat(const UnramContext* cx, const ZMat& A) {
  UMat out = umat_zero(cx, A.rows, A.cols);
  for (std::size_t i = 0; i < A.rows; ++i)
    for (std::size_t j = 0; j < A.cols; ++j)
      out[i][j] = UnramCoeff::from_int(cx, static_cast<std::int64_t>(A.at(i, j)));
  return out;
}

}  // namespace finite_detail

// (V tensor W(closure))^{Galois}: one twisted fixed-basis solve, then the
// Frobenius matrices read off torus walks.
inline PhiModFin functor_D(const FiniteBase& B, const GaloisRepFin& V) {
  V.validate();
  if (V.rho.size() != B.n) throw std::invalid_argument("functor_D: variable count mismatch");
  const std::uint32_t p = B.ring.p, m = B.ring.m;

  std::vector<std::uint32_t> k(B.n);
  std::uint32_t bigL = 1;
  for (std::uint32_t a = 0; a < B.n; ++a) {
    k[a] = matrix_order(V.rho[a]);
    bigL = std::lcm(bigL, B.f[a] * k[a]);
  }
  const UnramContext* big = UnramContext::get(p, m, bigL);

  // stabilizer of a torus point: the diagonal L-step matched by rho^{L/f}
  ZMat Pz = ZMat::identity(B.ring, V.rank);
  for (std::uint32_t a = 0; a < B.n; ++a)
    Pz = Pz * finite_detail::zmat_pow(V.rho[a], (B.L / B.f[a]) % k[a]);
  UMat U = twisted_fixed_basis(big, finite_detail::umat_from_zmat(big, Pz), B.L);
  UMat Uinv = umat_inv(U);

  const SubfieldHom& emb = subfield_hom(B.comp, big);
  PhiModFin D;
  D.base = B;
  D.rank = V.rank;
  D.F.assign(B.n, std::vector<UMat>(B.g, umat_zero(B.comp, V.rank, V.rank)));
  for (std::uint32_t a = 0; a < B.n; ++a)
    for (std::size_t i = 0; i < B.g; ++i) {
      auto W = finite_detail::torus_walk(B, k, bigL, i, a);
      ZMat rinv = ZMat::identity(B.ring, V.rank);
      for (std::uint32_t b = 0; b < B.n; ++b) {
        std::uint64_t e = (k[b] - W.a[b] % k[b]) % k[b];
        rinv = rinv * finite_detail::zmat_pow(V.rho[b], e);
      }
      UMat block = umat_mul(umat_mul(Uinv, finite_detail::umat_from_zmat(big, rinv)),
                            umat_frob_pow(U, W.s));
      for (std::size_t x = 0; x < V.rank; ++x)
        for (std::size_t y = 0; y < V.rank; ++y) D.F[a][i][x][y] = emb.section(block[x][y]);
    }

  if (!D.validate_etale().ok() || !D.validate_commutation().ok)
    throw std::logic_error("functor_D: output failed validation");
  return D;
}

// (D tensor W(closure))^{phi = 1} with the Galois matrices read off the
// fixed vectors; extensions are searched in increasing degree up to a cap.
inline GaloisRepFin functor_V(const PhiModFin& D, std::uint32_t degree_cap = 12) {
  EtaleReport et = D.validate_etale();
  if (!et.ok()) throw not_etale("functor_V: " + et.note);
  auto comm = D.validate_commutation();
  if (!comm.ok) throw commutation_failure("functor_V: " + comm.note);

  const FiniteBase& B = D.base;
  const std::uint32_t p = B.ring.p, m = B.ring.m;
  const std::size_t r = D.rank;
  ModuleProfile want;
  want.exps.assign(r, m);

  for (std::uint32_t kk = 1; kk <= degree_cap; ++kk) {
    std::vector<std::uint32_t> fk(B.n);
    for (std::uint32_t a = 0; a < B.n; ++a) fk[a] = B.f[a] * kk;
    FiniteBase Bk = FiniteBase::make(p, m, fk);
    const UnramContext* big = Bk.comp;
    const std::uint32_t Lb = Bk.L;
    const SubfieldHom& emb = subfield_hom(B.comp, big);

    // alignment of each enlarged component with the base component below it
    std::vector<std::size_t> below(Bk.g);
    std::vector<std::uint32_t> align(Bk.g);
    for (std::size_t c = 0; c < Bk.g; ++c) {
      std::vector<std::uint32_t> t(B.n);
      for (std::uint32_t b = 0; b < B.n; ++b) t[b] = Bk.reps[c][b] % B.f[b];
      std::size_t ti = B.point_index(t);
      below[c] = B.orbit_of[ti];
      align[c] = B.shift_of[ti];
    }

    const std::size_t dim = Bk.g * r * Lb;
    std::vector<ZMat> phis;
    for (std::uint32_t a = 0; a < B.n; ++a) {
      ZMat M = ZMat::zero(B.ring, dim, dim);
      for (std::size_t c = 0; c < Bk.g; ++c) {
        std::size_t cs = Bk.frob[a].src[c];
        std::uint32_t tw = Bk.frob[a].twist[c];
        // matrix entries: sigma^{align(c)} of the embedded base block
        UMat blk = umat_zero(big, r, r);
        for (std::size_t x = 0; x < r; ++x)
          for (std::size_t y = 0; y < r; ++y)
            blk[x][y] = emb.apply(D.F[a][below[c]][x][y]).frobenius_pow(align[c]);
        for (std::size_t cr = 0; cr < r; ++cr)
          for (std::uint32_t d = 0; d < Lb; ++d) {
            std::vector<std::uint64_t> rep(Lb, 0);
            rep[d] = 1;
            UnramCoeff xv = UnramCoeff::from_rep(big, rep).frobenius_pow(tw);
            std::size_t col = (cs * r + cr) * Lb + d;
            for (std::size_t orow = 0; orow < r; ++orow) {
              UnramCoeff y = blk[orow][cr] * xv;
              for (std::uint32_t dd = 0; dd < Lb; ++dd) {
                std::uint64_t v = y.coeff(dd);
                if (v)
                  M.at((c * r + orow) * Lb + dd, col) =
                      (M.at((c * r + orow) * Lb + dd, col) + v) % B.ring.q;
              }
            }
          }
      }
      phis.push_back(std::move(M));
    }

    ZMat stacked = ZMat::zero(B.ring, B.n * dim, dim);
    for (std::uint32_t a = 0; a < B.n; ++a)
      for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) {
          std::uint64_t v = phis[a].at(i, j);
          v = (v + (i == j ? B.ring.q - 1 : 0)) % B.ring.q;
          stacked.at(a * dim + i, j) = v;
        }
    ZMat K = kernel(stacked);
    if (span_profile(K) != want) continue;

    // a free basis from the kernel generators
    ZMat basis = ZMat::zero(B.ring, dim, 0);
    for (std::size_t c = 0; c < K.cols && basis.cols < r; ++c) {
      ZMat cand = ZMat::hconcat(basis, K.col_slice(c, c + 1));
      ModuleProfile pr = span_profile(cand);
      if (pr.exps.size() == cand.cols &&
          static_cast<std::uint32_t>(*std::min_element(pr.exps.begin(), pr.exps.end())) == m)
        basis = std::move(cand);
    }
    if (basis.cols != r) continue;

    // trivialization: the fixed vectors must frame every component
    bool framed = true;
    for (std::size_t c = 0; c < Bk.g && framed; ++c) {
      UMat Uc = umat_zero(big, r, r);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < r; ++j) {
          std::vector<std::uint64_t> rep(Lb);
          for (std::uint32_t d = 0; d < Lb; ++d) rep[d] = basis.at((c * r + i) * Lb + d, j);
          Uc[i][j] = UnramCoeff::from_rep(big, rep);
        }
      if (!umat_try_inv(Uc)) framed = false;
    }
    if (!framed) continue;

    // Galois generators act by the q_alpha-power shift; read their matrices
    // on the fixed basis
    GaloisRepFin V;
    V.ring = B.ring;
    V.rank = r;
    bool ok = true;
    for (std::uint32_t a = 0; a < B.n && ok; ++a) {
      ZMat G = ZMat::zero(B.ring, dim, dim);
      for (std::size_t c = 0; c < Bk.g; ++c) {
        std::vector<std::uint32_t> q = Bk.reps[c];
        q[a] = static_cast<std::uint32_t>((q[a] + B.f[a]) % fk[a]);
        std::size_t qi = Bk.point_index(q);
        std::size_t cs = Bk.orbit_of[qi];
        std::uint32_t tw = Bk.shift_of[qi];
        for (std::size_t cr = 0; cr < r; ++cr)
          for (std::uint32_t d = 0; d < Lb; ++d) {
            std::vector<std::uint64_t> rep(Lb, 0);
            rep[d] = 1;
            UnramCoeff y = UnramCoeff::from_rep(big, rep).frobenius_pow(tw);
            for (std::uint32_t dd = 0; dd < Lb; ++dd) {
              std::uint64_t v = y.coeff(dd);
              if (v)
                G.at((c * r + cr) * Lb + dd, (cs * r + cr) * Lb + d) =
                    (G.at((c * r + cr) * Lb + dd, (cs * r + cr) * Lb + d) + v) % B.ring.q;
            }
          }
      }
      auto coords = solve(basis, G * basis);
      if (!coords) { ok = false; break; }
      V.rho.push_back(*coords);
    }
    if (!ok) continue;
    V.validate();
    return V;
  }
  throw isomorphism_not_found("functor_V: no trivializing extension within the degree cap");
}

// ---------------------------------------------------------------------------
// isomorphism search and round trips
// ---------------------------------------------------------------------------

namespace finite_detail {

// an invertible element of the span of the kernel columns, or nothing
inline std::optional<ZMat> invertible_in_span(const ZMat& K, std::size_t r) {
  const Zpm ring = K.ring;
  auto shape = [&](const std::vector<std::uint64_t>& coef) {
    ZMat T = ZMat::zero(ring, r, r);
    for (std::size_t c = 0; c < K.cols; ++c) {
      if (coef[c] == 0) continue;
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < r; ++j)
          T.at(i, j) = (T.at(i, j) + mulmod_u64(K.at(i * r + j, c), coef[c], ring.q)) % ring.q;
    }
    return T;
  };
  auto invertible = [&](const ZMat& T) {
    SmithForm s = smith(T);
    return s.piv.size() == r && *std::max_element(s.piv.begin(), s.piv.end()) == 0;
  };
  if (K.cols == 0) return std::nullopt;
  std::vector<std::uint64_t> coef(K.cols, 0);
  for (std::size_t c = 0; c < K.cols; ++c) {
    coef.assign(K.cols, 0);
    coef[c] = 1;
    ZMat T = shape(coef);
    if (invertible(T)) return T;
  }
  std::mt19937_64 rng(0);
  for (int trial = 0; trial < 2000; ++trial) {
    for (std::size_t c = 0; c < K.cols; ++c) coef[c] = rng() % ring.q;
    ZMat T = shape(coef);
    if (invertible(T)) return T;
  }
  return std::nullopt;
}

}  // namespace finite_detail

inline std::optional<ZMat> find_rep_isomorphism(const GaloisRepFin& x, const GaloisRepFin& y) {
  if (x.rank != y.rank || x.rho.size() != y.rho.size()) return std::nullopt;
  const std::size_t r = x.rank;
  const Zpm ring = x.ring;
  // T rho_a = rho'_a T as a linear system on the r^2 entries of T
  ZMat sys = ZMat::zero(ring, x.rho.size() * r * r, r * r);
  for (std::size_t a = 0; a < x.rho.size(); ++a)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < r; ++j) {
        // coefficient of T(u,v) in (T rho - rho' T)(i,j)
        for (std::size_t v = 0; v < r; ++v) {
          std::size_t row = (a * r + i) * r + j;
          sys.at(row, i * r + v) =
              (sys.at(row, i * r + v) + x.rho[a].at(v, j)) % ring.q;
          sys.at(row, v * r + j) =
              (sys.at(row, v * r + j) + ring.q - y.rho[a].at(i, v) % ring.q) % ring.q;
        }
      }
  return finite_detail::invertible_in_span(kernel(sys), r);
}

inline std::optional<std::vector<UMat>> find_phimod_isomorphism(const PhiModFin& x,
                                                                const PhiModFin& y) {
  if (!(x.base == y.base) || x.rank != y.rank) return std::nullopt;
  const FiniteBase& B = x.base;
  const std::size_t r = x.rank;
  const std::uint32_t Lf = B.comp->f;
  const std::size_t unknowns = B.g * r * r * Lf;
  // condition per variable and output component:
  //   T[i] F_a[i] - F'_a[i] sigma^{tw}(T[src]) = 0
  std::size_t rows = B.n * B.g * r * r * Lf;
  ZMat sys = ZMat::zero(B.ring, rows, unknowns);
  for (std::size_t comp = 0; comp < B.g; ++comp)
    for (std::size_t u = 0; u < r; ++u)
      for (std::size_t v = 0; v < r; ++v)
        for (std::uint32_t d = 0; d < Lf; ++d) {
          std::size_t colu = ((comp * r + u) * r + v) * Lf + d;
          std::vector<std::uint64_t> rep(Lf, 0);
          rep[d] = 1;
          UnramCoeff unit = UnramCoeff::from_rep(B.comp, rep);
          for (std::uint32_t a = 0; a < B.n; ++a) {
            for (std::size_t i = 0; i < B.g; ++i) {
              std::size_t src = B.frob[a].src[i];
              std::uint32_t tw = B.frob[a].twist[i];
              // contribution of T[comp](u,v) theta^d to the (i, row, col) block
              for (std::size_t p2 = 0; p2 < r; ++p2)
                for (std::size_t q2 = 0; q2 < r; ++q2) {
                  UnramCoeff val = UnramCoeff::zero(B.comp);
                  if (comp == i && p2 == u) val += unit * x.F[a][i][v][q2];
                  if (comp == src && q2 == v)
                    val -= y.F[a][i][p2][u] * unit.frobenius_pow(tw);
                  if (val.is_zero()) continue;
                  for (std::uint32_t dd = 0; dd < Lf; ++dd) {
                    std::uint64_t e = val.coeff(dd);
                    if (!e) continue;
                    std::size_t row = ((a * B.g + i) * r * r + p2 * r + q2) * Lf + dd;
                    sys.at(row, colu) = (sys.at(row, colu) + e) % B.ring.q;
                  }
                }
            }
          }
        }
  ZMat K = kernel(sys);
  if (K.cols == 0) return std::nullopt;
  // search the kernel span for a T invertible on every component
  auto build = [&](const std::vector<std::uint64_t>& coef) {
    std::vector<UMat> T(B.g, umat_zero(B.comp, r, r));
    for (std::size_t c = 0; c < K.cols; ++c) {
      if (!coef[c]) continue;
      for (std::size_t comp = 0; comp < B.g; ++comp)
        for (std::size_t u = 0; u < r; ++u)
          for (std::size_t v = 0; v < r; ++v) {
            std::vector<std::uint64_t> rep(Lf);
            for (std::uint32_t d = 0; d < Lf; ++d)
              rep[d] = mulmod_u64(K.at(((comp * r + u) * r + v) * Lf + d, c), coef[c], B.ring.q);
            T[comp][u][v] += UnramCoeff::from_rep(B.comp, rep);
          }
    }
    return T;
  };
  auto good = [&](const std::vector<UMat>& T) {
    for (const auto& M : T)
      if (!umat_try_inv(M)) return false;
    return true;
  };
  std::vector<std::uint64_t> coef(K.cols, 0);
  for (std::size_t c = 0; c < K.cols; ++c) {
    coef.assign(K.cols, 0);
    coef[c] = 1;
    auto T = build(coef);
    if (good(T)) return T;
  }
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 2000; ++trial) {
    for (std::size_t c = 0; c < K.cols; ++c) coef[c] = rng() % B.ring.q;
    auto T = build(coef);
    if (good(T)) return T;
  }
  return std::nullopt;
}

inline bool roundtrip_check(const FiniteBase& B, const GaloisRepFin& V, ZMat* iso = nullptr) {
  GaloisRepFin back = functor_V(functor_D(B, V));
  auto T = find_rep_isomorphism(V, back);
  if (!T) throw isomorphism_not_found("roundtrip_check: V and V(D(V)) are not isomorphic");
  if (iso) *iso = *T;
  return true;
}

inline bool roundtrip_check_D(const PhiModFin& D) {
  GaloisRepFin V = functor_V(D);
  PhiModFin back = functor_D(D.base, V);
  auto T = find_phimod_isomorphism(D, back);
  if (!T) throw isomorphism_not_found("roundtrip_check_D: D and D(V(D)) are not isomorphic");
  return true;
}

// ---------------------------------------------------------------------------
// the representing algebra at residue level
// ---------------------------------------------------------------------------

// S = R[T_1..T_r] / ((T_i^p) - A^{-1}(T_i)) for the composite Frobenius
// matrix A, with the etale certificate (unit Jacobian) and geometric fiber
// point counts.
struct RepresentingAlgebra {
  std::size_t rank = 0;
  std::size_t dim = 0;  // p^rank monomial basis per component
  // structure constants per component: table[a][b] = coefficients of the
  // basis expansion of monomial_a * monomial_b
  std::vector<std::vector<std::vector<std::vector<UnramCoeff>>>> table;
  bool jacobian_unit = false;
  std::vector<std::size_t> fiber_points;  // per component, over the closure
};

namespace finite_detail {

// composite full Frobenius of a PhiModFin: acts componentwise with one
// diagonal twist
inline std::vector<UMat> full_frobenius_matrix(const PhiModFin& D) {
  const FiniteBase& B = D.base;
  std::vector<UMat> M(B.g, umat_identity(B.comp, D.rank));
  std::vector<std::size_t> src(B.g);
  std::vector<std::uint32_t> tw(B.g, 0);
  for (std::size_t i = 0; i < B.g; ++i) src[i] = i;
  for (std::uint32_t a = 0; a < B.n; ++a) {
    std::vector<UMat> M2(B.g, umat_zero(B.comp, D.rank, D.rank));
    std::vector<std::size_t> src2(B.g);
    std::vector<std::uint32_t> tw2(B.g);
    for (std::size_t i = 0; i < B.g; ++i) {
      M2[i] = umat_mul(M[i], umat_frob_pow(D.F[a][src[i]], tw[i]));
      src2[i] = B.frob[a].src[src[i]];
      tw2[i] = tw[i] + B.frob[a].twist[src[i]];
    }
    M = std::move(M2);
    src = std::move(src2);
    tw = std::move(tw2);
  }
  for (std::size_t i = 0; i < B.g; ++i) {
    if (src[i] != i) throw std::logic_error("full Frobenius permutes components");
    if (tw[i] % B.L != 1 % B.L) throw std::logic_error("full Frobenius twist is not one");
  }
  return M;
}

}  // namespace finite_detail

inline RepresentingAlgebra representing_algebra(const PhiModFin& D,
                                                std::uint32_t degree_cap = 12) {
  const FiniteBase& B = D.base;
  if (B.ring.m != 1)
    throw mode_mismatch("representing_algebra: defined at residue level (m = 1)");
  EtaleReport et = D.validate_etale();
  if (!et.ok()) throw not_etale("representing_algebra: " + et.note);

  const std::uint32_t p = B.ring.p;
  const std::size_t r = D.rank;
  RepresentingAlgebra S;
  S.rank = r;
  S.dim = 1;
  for (std::size_t i = 0; i < r; ++i) S.dim *= p;

  std::vector<UMat> A = finite_detail::full_frobenius_matrix(D);
  S.jacobian_unit = true;
  std::vector<UMat> Ainv;
  for (std::size_t c = 0; c < B.g; ++c) {
    auto inv = umat_try_inv(A[c]);
    if (!inv) { S.jacobian_unit = false; break; }
    Ainv.push_back(*inv);
  }
  if (!S.jacobian_unit) throw not_etale("representing_algebra: composite Frobenius not a unit");

  // monomial exponents in base p
  auto exps_of = [&](std::size_t idx) {
    std::vector<std::uint32_t> e(r);
    for (std::size_t i = 0; i < r; ++i) {
      e[i] = static_cast<std::uint32_t>(idx % p);
      idx /= p;
    }
    return e;
  };
  auto index_of = [&](const std::vector<std::uint32_t>& e) {
    std::size_t idx = 0;
    for (std::size_t i = r; i-- > 0;) idx = idx * p + e[i];
    return idx;
  };

  for (std::size_t c = 0; c < B.g; ++c) {
    // reduce polynomials through T_i^p = (A^{-1} T)_i
    using Poly = std::map<std::vector<std::uint32_t>, UnramCoeff>;
    auto reduce = [&](Poly poly) {
      while (true) {
        auto hit = poly.end();
        std::size_t var = 0;
        for (auto it = poly.begin(); it != poly.end(); ++it) {
          if (it->second.is_zero()) continue;
          for (std::size_t i = 0; i < r; ++i)
            if (it->first[i] >= p) { hit = it; var = i; break; }
          if (hit != poly.end()) break;
        }
        if (hit == poly.end()) break;
        auto mono = hit->first;
        UnramCoeff coefv = hit->second;
        poly.erase(hit);
        mono[var] -= p;
        for (std::size_t j = 0; j < r; ++j) {
          if (Ainv[c][var][j].is_zero()) continue;
          auto m2 = mono;
          ++m2[j];
          auto [it2, fresh] = poly.emplace(m2, coefv * Ainv[c][var][j]);
          if (!fresh) it2->second += coefv * Ainv[c][var][j];
        }
      }
      return poly;
    };
    std::vector<std::vector<std::vector<UnramCoeff>>> ctable(
        S.dim, std::vector<std::vector<UnramCoeff>>(
                   S.dim, std::vector<UnramCoeff>(S.dim, UnramCoeff::zero(B.comp))));
    for (std::size_t a1 = 0; a1 < S.dim; ++a1)
      for (std::size_t a2 = 0; a2 < S.dim; ++a2) {
        auto e1 = exps_of(a1), e2 = exps_of(a2);
        std::vector<std::uint32_t> e(r);
        for (std::size_t i = 0; i < r; ++i) e[i] = e1[i] + e2[i];
        Poly poly;
        poly.emplace(e, UnramCoeff::one(B.comp));
        poly = reduce(std::move(poly));
        for (const auto& [mono, coefv] : poly) ctable[a1][a2][index_of(mono)] = coefv;
      }
    S.table.push_back(std::move(ctable));

    // geometric points of the fiber: fixed vectors of x -> A sigma(x) over
    // increasing extensions until the count reaches p^r
    std::size_t best = 0;
    for (std::uint32_t kk = 1; kk <= degree_cap; ++kk) {
      std::uint32_t Kf = B.L * kk;
      const UnramContext* ext = UnramContext::get(p, 1, Kf);
      const SubfieldHom& emb = subfield_hom(UnramContext::get(p, 1, B.L), ext);
      std::size_t dimk = r * Kf;
      ZMat M = ZMat::zero(B.ring, dimk, dimk);
      for (std::size_t j = 0; j < r; ++j)
        for (std::uint32_t d = 0; d < Kf; ++d) {
          std::vector<std::uint64_t> rep(Kf, 0);
          rep[d] = 1;
          UnramCoeff xv = UnramCoeff::from_rep(ext, rep).frobenius();
          for (std::size_t i = 0; i < r; ++i) {
            // residue image of the component entry
            std::vector<std::uint64_t> arep(B.L);
            for (std::uint32_t t = 0; t < B.L; ++t) arep[t] = A[c][i][j].coeff(t);
            UnramCoeff av = emb.apply(UnramCoeff::from_rep(UnramContext::get(p, 1, B.L), arep));
            UnramCoeff w = av * xv;
            for (std::uint32_t dd = 0; dd < Kf; ++dd) {
              std::uint64_t v = (w.coeff(dd) + (i == j && dd == d ? p - 1 : 0)) % p;
              if (v) M.at(i * Kf + dd, j * Kf + d) = v;
            }
          }
        }
      std::size_t fdim = kernel(M).cols;
      std::size_t pts = 1;
      for (std::size_t t = 0; t < fdim; ++t) pts *= p;
      best = std::max(best, pts);
      if (fdim == r) break;
    }
    S.fiber_points.push_back(best);
  }
  return S;
}

// ---------------------------------------------------------------------------
// oracles
// ---------------------------------------------------------------------------

// Continuous cohomology of the commuting generators by brute force: the
// complex on (rho_alpha - 1), exact elementary divisors in every degree.
inline std::vector<ModuleProfile> koszul_oracle(const GaloisRepFin& V) {
  V.validate();
  MatrixComplex C = build_matrix_complex(V.rho);
  std::vector<ModuleProfile> out;
  for (std::uint32_t t = 0; t <= C.nvars; ++t) out.push_back(C.cohomology(t));
  return out;
}

// The same complex built from the module side's Frobenius operators.
inline std::vector<ModuleProfile> phi_complex_profiles(const PhiModFin& D) {
  std::vector<ZMat> ops;
  for (std::uint32_t a = 0; a < D.base.n; ++a) ops.push_back(D.phi_operator(a));
  for (std::size_t a = 0; a < ops.size(); ++a)
    for (std::size_t b = a + 1; b < ops.size(); ++b) {
      ZMat lhs = ops[a] * ops[b], rhs = ops[b] * ops[a];
      for (std::size_t i = 0; i < lhs.rows; ++i)
        for (std::size_t j = 0; j < lhs.cols; ++j)
          if (lhs.at(i, j) != rhs.at(i, j))
            throw commutation_failure("phi operators do not commute as matrices");
    }
  MatrixComplex C = build_matrix_complex(ops);
  std::vector<ModuleProfile> out;
  for (std::uint32_t t = 0; t <= C.nvars; ++t) out.push_back(C.cohomology(t));
  return out;
}

// Series module with constant matrices from a one-component residue-trivial
// base: the bridge from the finite laboratory into the Laurent-series side.
inline EtalePhiGammaModule constant_series_module(const PhiModFin& D, const SeriesContext* cx) {
  for (auto d : D.base.f)
    if (d != 1)
      throw std::invalid_argument("constant_series_module: needs residue degree one per variable");
  if (cx->nvars() != D.base.n || cx->p() != D.base.ring.p || cx->m() != D.base.ring.m)
    throw context_mismatch("constant_series_module: context mismatch");
  std::vector<SeriesMat> F;
  for (std::uint32_t a = 0; a < D.base.n; ++a) {
    SeriesMat M = SeriesMat::zero(cx, D.rank);
    for (std::size_t i = 0; i < D.rank; ++i)
      for (std::size_t j = 0; j < D.rank; ++j)
        M.at(i, j) = LaurentSeries::constant(
            cx, UnramCoeff::from_int(cx->coeff,
                                     static_cast<std::int64_t>(D.F[a][0][i][j].coeff(0))));
    F.push_back(std::move(M));
  }
  std::vector<SeriesMat> id(D.base.n, SeriesMat::identity(cx, D.rank));
  return EtalePhiGammaModule(cx, D.rank, F, id, id, "constant");
}

}  // namespace phigamma
