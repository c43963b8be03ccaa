#pragma once

// Linear algebra over the chain ring Z/p^m: Smith normal form with recorded
// transforms, kernels, linear solving, and subquotient profiles.  Everything
// is exact; pivots are chosen by minimal p-valuation, so the diagonal comes
// out as p-powers with nondecreasing exponents.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "phigamma/arith.hpp"
#include "phigamma/modint.hpp"

namespace phigamma {

struct ZMat {
  Zpm ring;
  std::size_t rows = 0, cols = 0;
  std::vector<std::uint64_t> a;

  static ZMat zero(const Zpm& ring, std::size_t r, std::size_t c) {
    ZMat m;
    m.ring = ring;
    m.rows = r;
    m.cols = c;
    m.a.assign(r * c, 0);
    return m;
  }
  static ZMat identity(const Zpm& ring, std::size_t n) {
    ZMat m = zero(ring, n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1;
    return m;
  }

  std::uint64_t& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  std::uint64_t at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

  friend bool operator==(const ZMat& x, const ZMat& y) {
    return x.rows == y.rows && x.cols == y.cols && x.a == y.a;
  }

  friend ZMat operator*(const ZMat& x, const ZMat& y) {
    if (x.cols != y.rows) throw std::invalid_argument("ZMat: size mismatch in product");
    ZMat r = zero(x.ring, x.rows, y.cols);
    const std::uint64_t q = x.ring.q;
    if (q <= (1ull << 21) && x.cols < (1ull << 20)) {
      // entries stay reduced below q, so a whole row of products fits in
      // 64 bits and one reduction at the end suffices
      std::vector<std::uint64_t> acc(y.cols);
      for (std::size_t i = 0; i < x.rows; ++i) {
        std::fill(acc.begin(), acc.end(), 0);
        for (std::size_t k = 0; k < x.cols; ++k) {
          std::uint64_t v = x.at(i, k);
          if (v == 0) continue;
          const std::uint64_t* yr = &y.a[k * y.cols];
          for (std::size_t j = 0; j < y.cols; ++j) acc[j] += v * yr[j];
        }
        for (std::size_t j = 0; j < y.cols; ++j) r.at(i, j) = acc[j] % q;
      }
      return r;
    }
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t k = 0; k < x.cols; ++k) {
        std::uint64_t v = x.at(i, k);
        if (v == 0) continue;
        for (std::size_t j = 0; j < y.cols; ++j)
          r.at(i, j) = (r.at(i, j) + mulmod_u64(v, y.at(k, j), x.ring.q)) % x.ring.q;
      }
    return r;
  }

  ZMat transposed() const {
    ZMat r = zero(ring, cols, rows);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) r.at(j, i) = at(i, j);
    return r;
  }

  bool is_zero() const {
    for (auto v : a)
      if (v != 0) return false;
    return true;
  }

  // columns i..j-1
  ZMat col_slice(std::size_t i, std::size_t j) const {
    ZMat r = zero(ring, rows, j - i);
    for (std::size_t k = 0; k < rows; ++k)
      for (std::size_t c = i; c < j; ++c) r.at(k, c - i) = at(k, c);
    return r;
  }

  static ZMat hconcat(const ZMat& x, const ZMat& y) {
    if (x.rows != y.rows) throw std::invalid_argument("ZMat: hconcat row mismatch");
    ZMat r = zero(x.ring, x.rows, x.cols + y.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
      for (std::size_t j = 0; j < x.cols; ++j) r.at(i, j) = x.at(i, j);
      for (std::size_t j = 0; j < y.cols; ++j) r.at(i, x.cols + j) = y.at(i, j);
    }
    return r;
  }

  static ZMat vconcat(const ZMat& x, const ZMat& y) {
    if (x.cols != y.cols) throw std::invalid_argument("ZMat: vconcat col mismatch");
    ZMat r = zero(x.ring, x.rows + y.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t j = 0; j < x.cols; ++j) r.at(i, j) = x.at(i, j);
    for (std::size_t i = 0; i < y.rows; ++i)
      for (std::size_t j = 0; j < y.cols; ++j) r.at(x.rows + i, j) = y.at(i, j);
    return r;
  }
};

inline std::uint32_t val_p(std::uint64_t v, const Zpm& ring) {
  if (v == 0) return ring.m;
  std::uint32_t s = 0;
  while (v % ring.p == 0) { v /= ring.p; ++s; }
  return s;
}

struct SmithForm {
  ZMat U, D, V;                    // U * A * V = D, with U and V unimodular
  std::vector<std::uint32_t> piv;  // valuations of the diagonal pivots found
};

namespace zdetail {

// Diagonalize D in place; mirror row operations onto *R (rows match D) and
// column operations onto *C (rows of C match D's columns).  Unit pivots end
// the pivot search immediately, so the scan cost stays near linear on the
// dense unit-rich matrices this library produces.
inline void smith_core(ZMat& D, ZMat* R, ZMat* C, std::vector<std::uint32_t>& piv) {
  const Zpm ring = D.ring;
  const std::uint64_t q = ring.q;
  const bool smallq = q < (1ull << 32);
  auto mul = [&](std::uint64_t a, std::uint64_t b) {
    return smallq ? (a * b) % q : mulmod_u64(a, b, q);
  };
  const std::size_t rows = D.rows, cols = D.cols;
  std::size_t n = std::min(rows, cols);
  for (std::size_t k = 0; k < n; ++k) {
    std::uint32_t best = ring.m;
    std::size_t pi = k, pj = k;
    for (std::size_t i = k; i < rows && best > 0; ++i)
      for (std::size_t j = k; j < cols; ++j) {
        std::uint32_t v = val_p(D.at(i, j), ring);
        if (v < best) {
          best = v;
          pi = i;
          pj = j;
          if (best == 0) break;
        }
      }
    if (best >= ring.m) break;
    if (pi != k) {
      for (std::size_t j = 0; j < cols; ++j) std::swap(D.at(k, j), D.at(pi, j));
      if (R)
        for (std::size_t j = 0; j < R->cols; ++j) std::swap(R->at(k, j), R->at(pi, j));
    }
    if (pj != k) {
      for (std::size_t i = 0; i < rows; ++i) std::swap(D.at(i, k), D.at(i, pj));
      if (C)
        for (std::size_t i = 0; i < C->rows; ++i) std::swap(C->at(i, k), C->at(i, pj));
    }
    // normalize the pivot to exactly p^best
    std::uint64_t ps = 1;
    for (std::uint32_t t = 0; t < best; ++t) ps *= ring.p;
    std::uint64_t unit = D.at(k, k) / ps;
    std::uint64_t uinv = invmod_u64(unit % q, q);
    for (std::size_t j = 0; j < cols; ++j) D.at(k, j) = mul(D.at(k, j), uinv);
    if (R)
      for (std::size_t j = 0; j < R->cols; ++j) R->at(k, j) = mul(R->at(k, j), uinv);
    // clear the rest of column k (row ops), then of row k (col ops)
    for (std::size_t i = k + 1; i < rows; ++i) {
      std::uint64_t v = D.at(i, k);
      if (v == 0) continue;
      std::uint64_t factor = v / ps;  // exact: pivot valuation is minimal
      for (std::size_t j = 0; j < cols; ++j) {
        std::uint64_t sub = mul(factor, D.at(k, j));
        D.at(i, j) = (D.at(i, j) + q - sub) % q;
      }
      if (R)
        for (std::size_t j = 0; j < R->cols; ++j) {
          std::uint64_t sub = mul(factor, R->at(k, j));
          R->at(i, j) = (R->at(i, j) + q - sub) % q;
        }
    }
    for (std::size_t j = k + 1; j < cols; ++j) {
      std::uint64_t v = D.at(k, j);
      if (v == 0) continue;
      std::uint64_t factor = v / ps;
      for (std::size_t i = 0; i < rows; ++i) {
        std::uint64_t sub = mul(factor, D.at(i, k));
        D.at(i, j) = (D.at(i, j) + q - sub) % q;
      }
      if (C)
        for (std::size_t i = 0; i < C->rows; ++i) {
          std::uint64_t sub = mul(factor, C->at(i, k));
          C->at(i, j) = (C->at(i, j) + q - sub) % q;
        }
    }
    piv.push_back(best);
  }
}

}  // namespace zdetail

inline SmithForm smith(const ZMat& A) {
  SmithForm s{ZMat::identity(A.ring, A.rows), A, ZMat::identity(A.ring, A.cols), {}};
  zdetail::smith_core(s.D, &s.U, &s.V, s.piv);
  return s;
}

// Pivot valuations alone, skipping the transform bookkeeping.
inline std::vector<std::uint32_t> smith_pivots(const ZMat& A) {
  ZMat D = A;
  std::vector<std::uint32_t> piv;
  zdetail::smith_core(D, nullptr, nullptr, piv);
  return piv;
}

// Generators of {x : A x = 0} as matrix columns (possibly zero columns wide).
inline ZMat kernel(const ZMat& A) {
  const Zpm ring = A.ring;
  ZMat D = A;
  ZMat V = ZMat::identity(ring, A.cols);
  std::vector<std::uint32_t> piv;
  zdetail::smith_core(D, nullptr, &V, piv);
  std::vector<std::size_t> gen_col;
  std::vector<std::uint64_t> gen_scale;
  for (std::size_t k = 0; k < piv.size(); ++k) {
    if (piv[k] == 0) continue;
    std::uint64_t sc = 1;
    for (std::uint32_t t = 0; t < ring.m - piv[k]; ++t) sc *= ring.p;
    gen_col.push_back(k);
    gen_scale.push_back(sc);
  }
  for (std::size_t k = piv.size(); k < A.cols; ++k) {
    gen_col.push_back(k);
    gen_scale.push_back(1);
  }
  ZMat K = ZMat::zero(ring, A.cols, gen_col.size());
  for (std::size_t g = 0; g < gen_col.size(); ++g)
    for (std::size_t i = 0; i < A.cols; ++i)
      K.at(i, g) = mulmod_u64(V.at(i, gen_col[g]), gen_scale[g], ring.q);
  return K;
}

// One solution of A X = B, or nullopt if none exists.
inline std::optional<ZMat> solve(const ZMat& A, const ZMat& B) {
  if (A.rows != B.rows) throw std::invalid_argument("solve: row mismatch");
  const Zpm ring = A.ring;
  ZMat D = A;
  ZMat Y = B;
  ZMat V = ZMat::identity(ring, A.cols);
  std::vector<std::uint32_t> piv;
  zdetail::smith_core(D, &Y, &V, piv);
  ZMat X0 = ZMat::zero(ring, A.cols, B.cols);
  for (std::size_t c = 0; c < B.cols; ++c) {
    for (std::size_t k = 0; k < A.rows; ++k) {
      std::uint64_t y = Y.at(k, c);
      if (k < piv.size()) {
        std::uint32_t sv = piv[k];
        if (val_p(y, ring) < sv) return std::nullopt;
        std::uint64_t ps = 1;
        for (std::uint32_t t = 0; t < sv; ++t) ps *= ring.p;
        X0.at(k, c) = y / ps;
      } else if (y != 0) {
        return std::nullopt;
      }
    }
  }
  return V * X0;
}

// Which columns of B admit a solution of A x = b, sharing one elimination
// across all of them.
inline std::vector<bool> solvable_columns(const ZMat& A, const ZMat& B) {
  if (A.rows != B.rows) throw std::invalid_argument("solvable_columns: row mismatch");
  const Zpm ring = A.ring;
  ZMat D = A;
  ZMat Y = B;
  std::vector<std::uint32_t> piv;
  zdetail::smith_core(D, &Y, nullptr, piv);
  std::vector<bool> ok(B.cols, true);
  for (std::size_t c = 0; c < B.cols; ++c)
    for (std::size_t k = 0; k < A.rows; ++k) {
      std::uint64_t y = Y.at(k, c);
      if (k < piv.size() ? val_p(y, ring) < piv[k] : y != 0) {
        ok[c] = false;
        break;
      }
    }
  return ok;
}

// Isomorphism class of a finite module over Z/p^m as the multiset of
// exponents s in its decomposition into summands Z/p^s; exponent m covers
// both free summands and p^m-torsion, which coincide over this ring.
struct ModuleProfile {
  std::vector<std::uint32_t> exps;  // sorted descending, entries in 1..m

  std::uint32_t free_rank(std::uint32_t m) const {
    std::uint32_t n = 0;
    for (auto e : exps)
      if (e == m) ++n;
    return n;
  }
  bool trivial() const { return exps.empty(); }

  friend bool operator==(const ModuleProfile&, const ModuleProfile&) = default;

  std::string to_string(std::uint64_t p) const {
    if (exps.empty()) return "0";
    std::string out;
    for (auto e : exps) {
      if (!out.empty()) out += " + ";
      std::uint64_t q = 1;
      for (std::uint32_t t = 0; t < e; ++t) q *= p;
      out += "Z/" + std::to_string(q);
    }
    return out;
  }
};

// Profile of R^k / span(columns of M).
inline ModuleProfile quotient_profile(const ZMat& M) {
  const Zpm ring = M.ring;
  std::vector<std::uint32_t> piv = smith_pivots(M);
  ModuleProfile prof;
  for (std::size_t k = 0; k < M.rows; ++k) {
    std::uint32_t e = (k < piv.size()) ? piv[k] : ring.m;
    if (e > 0) prof.exps.push_back(e);
  }
  std::sort(prof.exps.begin(), prof.exps.end(), std::greater<>());
  return prof;
}

// Profile of the module generated by the columns of K.
inline ModuleProfile span_profile(const ZMat& K) {
  ModuleProfile pr;
  if (K.cols == 0) return pr;
  for (std::uint32_t v : smith_pivots(K))
    if (v < K.ring.m) pr.exps.push_back(K.ring.m - v);
  std::sort(pr.exps.begin(), pr.exps.end(), std::greater<>());
  return pr;
}

inline ModuleProfile subquotient_profile(const ZMat& K, const ZMat& B) {
  if (K.cols == 0) {
    if (!B.is_zero()) throw std::invalid_argument("subquotient: relations outside the span");
    return ModuleProfile{};
  }
  ZMat M = kernel(K);
  if (B.cols > 0) {
    auto X = solve(K, B);
    if (!X) throw std::invalid_argument("subquotient: relations outside the span");
    M = ZMat::hconcat(*X, M);
  }
  return quotient_profile(M);
}

// span(K) ∩ ker(A), generators as columns.
inline ZMat kernel_in_span(const ZMat& A, const ZMat& K) {
  if (K.cols == 0) return ZMat::zero(A.ring, K.rows, 0);
  return K * kernel(A * K);
}

// Joint kernel of a list of operators, restricting sequentially so later
// kernels are computed on progressively smaller coordinate spaces.
inline ZMat joint_kernel(const std::vector<ZMat>& ops) {
  if (ops.empty()) throw std::invalid_argument("joint_kernel: no operators");
  ZMat K = kernel(ops[0]);
  for (std::size_t i = 1; i < ops.size() && K.cols > 0; ++i)
    K = kernel_in_span(ops[i], K);
  return K;
}

// ---------------------------------------------------------------------------
// sparse kernel
// ---------------------------------------------------------------------------

// Row-major sparse matrix for the large assembled operators.  The kernel is
// found by eliminating with unit pivots (Markowitz-style choice) and handing
// the small non-unit residue to the dense Smith machinery.
struct SparseMat {
  Zpm ring;
  std::size_t rows = 0, cols = 0;
  std::vector<std::map<std::uint32_t, std::uint64_t>> row;

  static SparseMat zero(const Zpm& ring, std::size_t r, std::size_t c) {
    SparseMat m;
    m.ring = ring;
    m.rows = r;
    m.cols = c;
    m.row.resize(r);
    return m;
  }
  void add(std::size_t i, std::uint32_t j, std::uint64_t v) {
    v %= ring.q;
    if (v == 0) return;
    auto& r = row[i];
    auto it = r.find(j);
    if (it == r.end()) r.emplace(j, v);
    else {
      it->second = (it->second + v) % ring.q;
      if (it->second == 0) r.erase(it);
    }
  }
  static SparseMat vconcat(const SparseMat& a, const SparseMat& b) {
    if (a.cols != b.cols) throw std::invalid_argument("SparseMat: vconcat col mismatch");
    SparseMat m = zero(a.ring, a.rows + b.rows, a.cols);
    for (std::size_t i = 0; i < a.rows; ++i) m.row[i] = a.row[i];
    for (std::size_t i = 0; i < b.rows; ++i) m.row[a.rows + i] = b.row[i];
    return m;
  }
};

inline ZMat sparse_kernel(SparseMat A) {
  const Zpm ring = A.ring;
  const std::uint64_t q = ring.q;

  // column -> rows with a nonzero entry there
  std::vector<std::set<std::uint32_t>> col_rows(A.cols);
  for (std::size_t i = 0; i < A.rows; ++i)
    for (const auto& [j, v] : A.row[i]) col_rows[j].insert(static_cast<std::uint32_t>(i));

  std::vector<bool> row_done(A.rows, false), col_done(A.cols, false);
  // eliminated unit-pivot rows, in elimination order: (row, pivot col)
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pivots;

  while (true) {
    // Markowitz: unit entry minimizing (nnz(row)-1)(nnz(col)-1)
    std::uint64_t best_score = ~std::uint64_t{0};
    std::uint32_t bi = 0, bj = 0;
    bool found = false;
    for (std::size_t i = 0; i < A.rows; ++i) {
      if (row_done[i] || A.row[i].empty()) continue;
      for (const auto& [j, v] : A.row[i]) {
        if (v % ring.p == 0) continue;
        std::uint64_t score = static_cast<std::uint64_t>(A.row[i].size() - 1) *
                              (col_rows[j].size() - 1);
        if (score < best_score) { best_score = score; bi = static_cast<std::uint32_t>(i); bj = j; found = true; }
        if (best_score == 0) break;
      }
      if (best_score == 0) break;
    }
    if (!found) break;

    // scale the pivot row to make the pivot 1
    std::uint64_t inv = invmod_u64(A.row[bi][bj], q);
    for (auto& [j, v] : A.row[bi]) v = mulmod_u64(v, inv, q);
    // eliminate the pivot column from every other active row
    std::vector<std::uint32_t> targets(col_rows[bj].begin(), col_rows[bj].end());
    for (std::uint32_t i : targets) {
      if (i == bi || row_done[i]) continue;
      std::uint64_t f = A.row[i][bj];
      for (const auto& [j, v] : A.row[bi]) {
        std::uint64_t sub = mulmod_u64(f, v, q);
        auto it = A.row[i].find(j);
        std::uint64_t nv = ((it == A.row[i].end() ? 0 : it->second) + q - sub) % q;
        if (nv == 0) {
          if (it != A.row[i].end()) { A.row[i].erase(it); col_rows[j].erase(i); }
        } else {
          if (it == A.row[i].end()) { A.row[i].emplace(j, nv); col_rows[j].insert(i); }
          else it->second = nv;
        }
      }
    }
    row_done[bi] = true;
    col_done[bj] = true;
    pivots.emplace_back(bi, bj);
  }

  // residual system on the non-pivot columns
  std::vector<std::uint32_t> free_cols;
  std::vector<std::int64_t> col_pos(A.cols, -1);
  for (std::uint32_t j = 0; j < A.cols; ++j)
    if (!col_done[j]) {
      col_pos[j] = static_cast<std::int64_t>(free_cols.size());
      free_cols.push_back(j);
    }
  std::vector<std::uint32_t> res_rows;
  for (std::uint32_t i = 0; i < A.rows; ++i)
    if (!row_done[i] && !A.row[i].empty()) res_rows.push_back(i);

  ZMat R = ZMat::zero(ring, res_rows.size(), free_cols.size());
  for (std::size_t ri = 0; ri < res_rows.size(); ++ri)
    for (const auto& [j, v] : A.row[res_rows[ri]]) {
      if (col_pos[j] < 0)
        throw std::logic_error("sparse_kernel: residual row touches a pivot column");
      R.at(ri, static_cast<std::size_t>(col_pos[j])) = v;
    }
  ZMat KR = res_rows.empty() ? ZMat::identity(ring, free_cols.size()) : kernel(R);

  // back-substitute through the unit pivot rows, newest first
  ZMat K = ZMat::zero(ring, A.cols, KR.cols);
  for (std::size_t g = 0; g < KR.cols; ++g)
    for (std::size_t fc = 0; fc < free_cols.size(); ++fc)
      K.at(free_cols[fc], g) = KR.at(fc, g);
  for (auto it = pivots.rbegin(); it != pivots.rend(); ++it) {
    auto [pi, pj] = *it;
    for (std::size_t g = 0; g < KR.cols; ++g) {
      std::uint64_t acc = 0;
      for (const auto& [j, v] : A.row[pi]) {
        if (j == pj) continue;
        acc = (acc + mulmod_u64(v, K.at(j, g), q)) % q;
      }
      K.at(pj, g) = (q - acc) % q;
    }
  }
  return K;
}

}  // namespace phigamma
