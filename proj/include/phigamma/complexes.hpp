// Subset-indexed complexes over a module: the phi, gamma, and psi complexes,
// their totalization, and cohomology on truncated monomial bases.
//
// Differentials carry blocks (-1)^sign (id - op_beta).  The eps sign counts
// elements of the source subset smaller than beta; the eta sign counts
// elements of the complement smaller than beta.  The totalized complex uses
// d = d_gamma + (-1)^{gamma-degree} d_phi, a frozen convention.
//
// Matrix assembly works on the monomial basis of a finite window.  Columns
// are exact (basis monomials are entire series), and a column is flagged as
// boundary when its image leaves the window through the floor: every
// operator here maps exponent k to exponents >= k except through the floor,
// so floor exits are the only truncation that can leak back into the window
// under further applications.  Ceiling exits truncate to data the finite
// model never consults again.

#pragma once

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

#include "phigamma/module.hpp"
#include "phigamma/zlinalg.hpp"

namespace phigamma {

// ---------------------------------------------------------------------------
// subsets and signs
// ---------------------------------------------------------------------------

// Subsets of {0..n-1} as bitmasks, rank r, in lexicographic order of the
// ordered element lists.
inline std::vector<std::uint32_t> subsets_of_rank(std::uint32_t n, std::uint32_t r) {
  std::vector<std::uint32_t> out;
  if (r > n) return out;
  std::vector<std::uint32_t> idx(r);
  for (std::uint32_t i = 0; i < r; ++i) idx[i] = i;
  while (true) {
    std::uint32_t mask = 0;
    for (std::uint32_t i : idx) mask |= (1u << i);
    out.push_back(mask);
    if (r == 0) break;
    std::int64_t k = static_cast<std::int64_t>(r) - 1;
    while (k >= 0 && idx[k] == n - r + k) --k;
    if (k < 0) break;
    ++idx[k];
    for (std::uint32_t j = static_cast<std::uint32_t>(k) + 1; j < r; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

inline std::uint32_t popcount32(std::uint32_t v) {
  std::uint32_t c = 0;
  while (v) { v &= v - 1; ++c; }
  return c;
}

// #{elements of S smaller than beta}
inline std::uint32_t sign_eps(std::uint32_t S, std::uint32_t beta) {
  return popcount32(S & ((1u << beta) - 1));
}

// #{elements of the complement of S (within n variables) smaller than beta}
inline std::uint32_t sign_eta(std::uint32_t S, std::uint32_t beta, std::uint32_t n) {
  std::uint32_t full = (n >= 32) ? ~0u : ((1u << n) - 1);
  return popcount32(~S & full & ((1u << beta) - 1));
}

// ---------------------------------------------------------------------------
// element-level differentials
// ---------------------------------------------------------------------------

enum class OperatorKind { Phi, Gamma, Tau, Psi };

inline ModuleElement apply_operator(const EtalePhiGammaModule& M, OperatorKind k,
                                    std::size_t alpha, const ModuleElement& x) {
  switch (k) {
    case OperatorKind::Phi: return M.apply_phi(alpha, x);
    case OperatorKind::Gamma: return M.apply_gamma(alpha, x);
    case OperatorKind::Tau: return M.apply_tau(alpha, x);
    case OperatorKind::Psi: return M.apply_psi(alpha, x);
  }
  throw std::logic_error("apply_operator: unknown kind");
}

// degree-r chain of the subset complex: component per subset of rank r
using SubsetChain = std::map<std::uint32_t, ModuleElement>;

// blocks (-1)^eps (id - op_beta) for Phi/Gamma, (-1)^eta (id - psi_beta) for Psi
inline SubsetChain subset_differential(const EtalePhiGammaModule& M, OperatorKind kind,
                                       const SubsetChain& chain) {
  const std::uint32_t n = static_cast<std::uint32_t>(M.context()->nvars());
  SubsetChain out;
  for (const auto& [S, x] : chain) {
    for (std::uint32_t beta = 0; beta < n; ++beta) {
      if (S & (1u << beta)) continue;
      std::uint32_t sign = (kind == OperatorKind::Psi) ? sign_eta(S, beta, n) : sign_eps(S, beta);
      ModuleElement y = element_sub(x, apply_operator(M, kind, beta, x));
      std::uint32_t T = S | (1u << beta);
      auto it = out.find(T);
      if (it == out.end()) it = out.emplace(T, M.zero_element()).first;
      it->second = (sign % 2 == 0) ? element_add(it->second, y) : element_sub(it->second, y);
    }
  }
  return out;
}

// bidegree chain for the totalized complex: key (gamma subset, phi subset)
using HerrChain = std::map<std::pair<std::uint32_t, std::uint32_t>, ModuleElement>;

inline HerrChain herr_differential(const EtalePhiGammaModule& M, const HerrChain& chain) {
  const std::uint32_t n = static_cast<std::uint32_t>(M.context()->nvars());
  HerrChain out;
  auto acc = [&](std::uint32_t Sg, std::uint32_t Sp, const ModuleElement& y, bool negate) {
    auto key = std::make_pair(Sg, Sp);
    auto it = out.find(key);
    if (it == out.end()) it = out.emplace(key, M.zero_element()).first;
    it->second = negate ? element_sub(it->second, y) : element_add(it->second, y);
  };
  for (const auto& [key, x] : chain) {
    auto [Sg, Sp] = key;
    for (std::uint32_t beta = 0; beta < n; ++beta) {
      if (!(Sg & (1u << beta))) {
        ModuleElement y = element_sub(x, M.apply_gamma(beta, x));
        acc(Sg | (1u << beta), Sp, y, sign_eps(Sg, beta) % 2 == 1);
      }
      if (!(Sp & (1u << beta))) {
        ModuleElement y = element_sub(x, M.apply_phi(beta, x));
        bool neg = (sign_eps(Sp, beta) + popcount32(Sg)) % 2 == 1;
        acc(Sg, Sp | (1u << beta), y, neg);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// exact matrix complexes (finite coefficient spaces, no windows)
// ---------------------------------------------------------------------------

// Complex of n commuting Z/p^m-linear operators on R^N with blocks
// (-1)^eps (id - op_beta); cohomology is exact elementary-divisor data.
struct MatrixComplex {
  Zpm ring{};
  std::uint32_t nvars = 0;
  std::size_t block = 0;
  std::vector<std::vector<std::uint32_t>> subsets;  // per degree
  std::vector<ZMat> d;                              // d[t]: degree t -> t+1

  std::size_t term_dim(std::size_t t) const {
    return (t < subsets.size()) ? subsets[t].size() * block : 0;
  }

  ModuleProfile cohomology(std::size_t t) const {
    if (t > nvars) return ModuleProfile{};
    ZMat K = (t < d.size()) ? kernel(d[t]) : ZMat::identity(ring, term_dim(t));
    ZMat B = (t > 0) ? d[t - 1] : ZMat::zero(ring, term_dim(0), 0);
    return subquotient_profile(K, B);
  }
};

inline MatrixComplex build_matrix_complex(const std::vector<ZMat>& ops) {
  if (ops.empty()) throw std::invalid_argument("build_matrix_complex: no operators");
  MatrixComplex C;
  C.ring = ops[0].ring;
  C.nvars = static_cast<std::uint32_t>(ops.size());
  C.block = ops[0].rows;
  for (const ZMat& op : ops)
    if (op.rows != C.block || op.cols != C.block)
      throw std::invalid_argument("build_matrix_complex: operator shape mismatch");
  for (std::uint32_t t = 0; t <= C.nvars; ++t) C.subsets.push_back(subsets_of_rank(C.nvars, t));
  const std::uint64_t q = C.ring.q;
  for (std::uint32_t t = 0; t < C.nvars; ++t) {
    const auto& src = C.subsets[t];
    const auto& dst = C.subsets[t + 1];
    std::map<std::uint32_t, std::size_t> dst_pos;
    for (std::size_t b = 0; b < dst.size(); ++b) dst_pos[dst[b]] = b;
    ZMat D = ZMat::zero(C.ring, dst.size() * C.block, src.size() * C.block);
    for (std::size_t a = 0; a < src.size(); ++a) {
      std::uint32_t S = src[a];
      for (std::uint32_t beta = 0; beta < C.nvars; ++beta) {
        if (S & (1u << beta)) continue;
        std::size_t b = dst_pos.at(S | (1u << beta));
        bool neg = sign_eps(S, beta) % 2 == 1;
        for (std::size_t i = 0; i < C.block; ++i)
          for (std::size_t j = 0; j < C.block; ++j) {
            std::uint64_t v = (i == j ? 1 : 0) + q - ops[beta].at(i, j) % q;
            v %= q;
            if (neg) v = (q - v) % q;
            if (v)
              D.at(b * C.block + i, a * C.block + j) =
                  (D.at(b * C.block + i, a * C.block + j) + v) % q;
          }
      }
    }
    C.d.push_back(std::move(D));
  }
  return C;
}

// ---------------------------------------------------------------------------
// windowed monomial bases
// ---------------------------------------------------------------------------

struct WindowBasis {
  const SeriesContext* cx = nullptr;
  Window W;
  std::size_t rank = 0;
  std::size_t nmono = 0, dim = 0;

  WindowBasis() = default;
  WindowBasis(const SeriesContext* cx_, const Window& w, std::size_t rank_)
      : cx(cx_), W(w), rank(rank_) {
    if (w.entire || w.empty_box())
      throw std::invalid_argument("WindowBasis: needs a nonempty finite window");
    nmono = 1;
    for (std::size_t i = 0; i < cx->nvars(); ++i)
      nmono *= static_cast<std::size_t>(w.hi(i) - w.lo(i) + 1);
    dim = nmono * rank * cx->f();
  }

  std::size_t mono_index(const ExpVec& e) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < cx->nvars(); ++i) {
      std::int64_t span = W.hi(i) - W.lo(i) + 1;
      idx = idx * static_cast<std::size_t>(span) + static_cast<std::size_t>(e[i].num - W.lo(i));
    }
    return idx;
  }
  ExpVec mono_at(std::size_t idx) const {
    ExpVec e(cx->nvars(), Rat::of(0));
    for (std::size_t i = cx->nvars(); i-- > 0;) {
      std::int64_t span = W.hi(i) - W.lo(i) + 1;
      e[i] = Rat::of(W.lo(i) + static_cast<std::int64_t>(idx % static_cast<std::size_t>(span)));
      idx /= static_cast<std::size_t>(span);
    }
    return e;
  }
  std::size_t index(std::size_t mono, std::size_t row, std::size_t digit) const {
    return (mono * rank + row) * cx->f() + digit;
  }
};

// Truncation of one operator to the window basis.  Basis monomials are
// entire, so every column is exact data; low_exit marks columns whose image
// has support below the window floor (compositions through such columns are
// not represented faithfully), exits marks any support outside the window,
// and inexact marks columns whose image carries a claim window narrower than
// the basis window (possible when module matrices hold windowed entries).
struct WindowedOperator {
  SparseMat mat;
  std::vector<bool> low_exit, exits, inexact;
};

inline WindowedOperator assemble_operator(const EtalePhiGammaModule& M, OperatorKind kind,
                                          std::size_t alpha, const WindowBasis& B) {
  const SeriesContext* cx = B.cx;
  const std::uint32_t fdeg = cx->f();
  WindowedOperator out;
  out.mat = SparseMat::zero(cx->coeff->ring, B.dim, B.dim);
  out.low_exit.assign(B.dim, false);
  out.exits.assign(B.dim, false);
  out.inexact.assign(B.dim, false);
  for (std::size_t mono = 0; mono < B.nmono; ++mono) {
    ExpVec e = B.mono_at(mono);
    for (std::size_t r = 0; r < B.rank; ++r) {
      for (std::uint32_t dd = 0; dd < fdeg; ++dd) {
        std::size_t col = B.index(mono, r, dd);
        std::vector<std::uint64_t> rep(fdeg, 0);
        rep[dd] = 1;
        ModuleElement x = M.zero_element();
        x[r] = LaurentSeries::monomial(cx, e, UnramCoeff::from_rep(cx->coeff, rep));
        ModuleElement y = apply_operator(M, kind, alpha, x);
        for (std::size_t i = 0; i < B.rank; ++i) {
          const LaurentSeries& s = y[i];
          if (!s.is_entire())
            for (std::size_t v = 0; v < cx->nvars(); ++v)
              if (s.window().lo(v) > B.W.lo(v) || s.window().hi(v) < B.W.hi(v))
                out.inexact[col] = true;
          for (const auto& [ev, cc] : s.terms()) {
            if (!B.W.contains(ev)) {
              out.exits[col] = true;
              for (std::size_t v = 0; v < cx->nvars(); ++v)
                if (ev[v] < Rat::of(B.W.lo(v))) out.low_exit[col] = true;
              continue;
            }
            std::size_t row_mono = B.mono_index(ev);
            for (std::uint32_t d2 = 0; d2 < fdeg; ++d2) {
              std::uint64_t vv = cc.coeff(d2);
              if (vv) out.mat.add(B.index(row_mono, i, d2), static_cast<std::uint32_t>(col), vv);
            }
          }
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// truncated complexes on windows
// ---------------------------------------------------------------------------

enum class ComplexKind { Phi, Gamma, Psi, Herr };

struct TruncatedComplex {
  ComplexKind kind = ComplexKind::Phi;
  const EtalePhiGammaModule* module = nullptr;
  WindowBasis basis;
  // term labels per degree: (gamma subset, phi subset); non-Herr kinds keep
  // the active subset in the second slot
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> terms;
  std::vector<SparseMat> d;
  // per basis column: safe under further truncated applications
  std::vector<bool> col_safe;
  // per basis column: image leaves the window somewhere (reported)
  std::vector<bool> col_exits;

  std::size_t degrees() const { return terms.size(); }
  std::size_t term_dim(std::size_t t) const {
    return (t < terms.size()) ? terms[t].size() * basis.dim : 0;
  }
};

namespace complexes_detail {

struct OpSet {
  // per variable: the operators a complex consumes
  std::vector<WindowedOperator> phi, gamma, tau, psi;
};

inline const WindowedOperator& op_for(const OpSet& ops, OperatorKind k, std::size_t a) {
  switch (k) {
    case OperatorKind::Phi: return ops.phi[a];
    case OperatorKind::Gamma: return ops.gamma[a];
    case OperatorKind::Tau: return ops.tau[a];
    case OperatorKind::Psi: return ops.psi[a];
  }
  throw std::logic_error("op_for: unknown kind");
}

// accumulate sign * (id - op) into D at block (brow, bcol)
inline void add_block(SparseMat& D, const WindowedOperator& op, bool negate,
                      std::size_t brow, std::size_t bcol, std::size_t dim) {
  const std::uint64_t q = D.ring.q;
  for (std::size_t j = 0; j < dim; ++j) {
    std::uint64_t one = negate ? (q - 1) % q : 1;
    D.add(brow * dim + j, static_cast<std::uint32_t>(bcol * dim + j), one);
  }
  for (std::size_t i = 0; i < op.mat.rows; ++i)
    for (const auto& [j, v] : op.mat.row[i]) {
      std::uint64_t nv = negate ? v % q : (q - v % q) % q;
      D.add(brow * dim + i, static_cast<std::uint32_t>(bcol * dim + j), nv);
    }
}

}  // namespace complexes_detail

inline TruncatedComplex build_subset_complex(const EtalePhiGammaModule& M, const Window& W,
                                             ComplexKind kind) {
  const SeriesContext* cx = M.context();
  const std::uint32_t n = static_cast<std::uint32_t>(cx->nvars());
  TruncatedComplex C;
  C.kind = kind;
  C.module = &M;
  C.basis = WindowBasis(cx, W, M.rank());

  complexes_detail::OpSet ops;
  auto need = [&](OperatorKind k) {
    auto& slot = (k == OperatorKind::Phi)     ? ops.phi
                 : (k == OperatorKind::Gamma) ? ops.gamma
                 : (k == OperatorKind::Tau)   ? ops.tau
                                              : ops.psi;
    for (std::size_t a = 0; a < n; ++a) slot.push_back(assemble_operator(M, k, a, C.basis));
  };
  if (kind == ComplexKind::Phi || kind == ComplexKind::Herr) need(OperatorKind::Phi);
  if (kind == ComplexKind::Gamma || kind == ComplexKind::Herr) need(OperatorKind::Gamma);
  if (kind == ComplexKind::Psi) need(OperatorKind::Psi);

  C.col_safe.assign(C.basis.dim, true);
  C.col_exits.assign(C.basis.dim, false);
  auto fold_flags = [&](const std::vector<WindowedOperator>& list) {
    for (const auto& op : list)
      for (std::size_t j = 0; j < C.basis.dim; ++j) {
        if (op.low_exit[j] || op.inexact[j]) C.col_safe[j] = false;
        if (op.exits[j]) C.col_exits[j] = true;
      }
  };
  fold_flags(ops.phi);
  fold_flags(ops.gamma);
  fold_flags(ops.psi);

  const std::size_t dim = C.basis.dim;
  if (kind != ComplexKind::Herr) {
    OperatorKind ok = (kind == ComplexKind::Phi)     ? OperatorKind::Phi
                      : (kind == ComplexKind::Gamma) ? OperatorKind::Gamma
                                                     : OperatorKind::Psi;
    for (std::uint32_t t = 0; t <= n; ++t) {
      C.terms.emplace_back();
      for (std::uint32_t S : subsets_of_rank(n, t)) C.terms.back().emplace_back(0u, S);
    }
    for (std::uint32_t t = 0; t < n; ++t) {
      std::map<std::uint32_t, std::size_t> dst_pos;
      for (std::size_t b = 0; b < C.terms[t + 1].size(); ++b)
        dst_pos[C.terms[t + 1][b].second] = b;
      SparseMat D = SparseMat::zero(cx->coeff->ring, C.term_dim(t + 1), C.term_dim(t));
      for (std::size_t a = 0; a < C.terms[t].size(); ++a) {
        std::uint32_t S = C.terms[t][a].second;
        for (std::uint32_t beta = 0; beta < n; ++beta) {
          if (S & (1u << beta)) continue;
          std::uint32_t sign = (kind == ComplexKind::Psi) ? sign_eta(S, beta, n) : sign_eps(S, beta);
          complexes_detail::add_block(D, complexes_detail::op_for(ops, ok, beta), sign % 2 == 1,
                                      dst_pos.at(S | (1u << beta)), a, dim);
        }
      }
      C.d.push_back(std::move(D));
    }
    return C;
  }

  // totalized double complex: degree t holds bidegrees (i, j), i + j = t
  for (std::uint32_t t = 0; t <= 2 * n; ++t) {
    C.terms.emplace_back();
    for (std::uint32_t i = 0; i <= std::min(t, n); ++i) {
      std::uint32_t j = t - i;
      if (j > n) continue;
      for (std::uint32_t Sg : subsets_of_rank(n, i))
        for (std::uint32_t Sp : subsets_of_rank(n, j)) C.terms.back().emplace_back(Sg, Sp);
    }
  }
  for (std::uint32_t t = 0; t + 1 <= 2 * n; ++t) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> dst_pos;
    for (std::size_t b = 0; b < C.terms[t + 1].size(); ++b) dst_pos[C.terms[t + 1][b]] = b;
    SparseMat D = SparseMat::zero(cx->coeff->ring, C.term_dim(t + 1), C.term_dim(t));
    for (std::size_t a = 0; a < C.terms[t].size(); ++a) {
      auto [Sg, Sp] = C.terms[t][a];
      for (std::uint32_t beta = 0; beta < n; ++beta) {
        if (!(Sg & (1u << beta))) {
          bool neg = sign_eps(Sg, beta) % 2 == 1;
          complexes_detail::add_block(D, ops.gamma[beta], neg,
                                      dst_pos.at({Sg | (1u << beta), Sp}), a, dim);
        }
        if (!(Sp & (1u << beta))) {
          bool neg = (sign_eps(Sp, beta) + popcount32(Sg)) % 2 == 1;
          complexes_detail::add_block(D, ops.phi[beta], neg,
                                      dst_pos.at({Sg, Sp | (1u << beta)}), a, dim);
        }
      }
    }
    C.d.push_back(std::move(D));
  }
  return C;
}

inline TruncatedComplex build_phi_complex(const EtalePhiGammaModule& M, const Window& W) {
  return build_subset_complex(M, W, ComplexKind::Phi);
}
inline TruncatedComplex build_gamma_complex(const EtalePhiGammaModule& M, const Window& W) {
  return build_subset_complex(M, W, ComplexKind::Gamma);
}
inline TruncatedComplex build_psi_complex(const EtalePhiGammaModule& M, const Window& W) {
  EtaleReport rep = M.validate_etale();
  if (!rep.ok()) throw not_etale("psi complex needs certified unit structure: " + rep.note);
  return build_subset_complex(M, W, ComplexKind::Psi);
}
inline TruncatedComplex build_herr(const EtalePhiGammaModule& M, const Window& W) {
  return build_subset_complex(M, W, ComplexKind::Herr);
}

// d following d, tested column by column on the columns whose own image is
// faithful and lands entirely on faithful basis positions
struct CompositeReport {
  std::size_t tested = 0, skipped = 0;
  bool all_zero = true;
};

inline CompositeReport composite_check(const TruncatedComplex& C, std::size_t t) {
  CompositeReport rep;
  if (t + 1 >= C.d.size()) return rep;
  const SparseMat& D0 = C.d[t];
  const SparseMat& D1 = C.d[t + 1];
  const std::uint64_t q = D0.ring.q;
  const std::size_t dim = C.basis.dim;
  // column -> entries of D0, gathered once
  std::vector<std::map<std::uint32_t, std::uint64_t>> col_entries(D0.cols);
  for (std::size_t i = 0; i < D0.rows; ++i)
    for (const auto& [j, v] : D0.row[i]) col_entries[j].emplace(static_cast<std::uint32_t>(i), v);
  std::vector<std::map<std::uint32_t, std::uint64_t>> col_entries1(D1.cols);
  for (std::size_t i = 0; i < D1.rows; ++i)
    for (const auto& [j, v] : D1.row[i]) col_entries1[j].emplace(static_cast<std::uint32_t>(i), v);
  for (std::size_t col = 0; col < D0.cols; ++col) {
    if (!C.col_safe[col % dim]) { ++rep.skipped; continue; }
    bool interior_image = true;
    for (const auto& [r, v] : col_entries[col])
      if (!C.col_safe[r % dim]) { interior_image = false; break; }
    if (!interior_image) { ++rep.skipped; continue; }
    std::map<std::uint32_t, std::uint64_t> acc;
    for (const auto& [r, v] : col_entries[col])
      for (const auto& [r2, w] : col_entries1[r]) {
        std::uint64_t add = mulmod_u64(v, w, q);
        auto it = acc.find(r2);
        if (it == acc.end()) acc.emplace(r2, add % q);
        else it->second = (it->second + add) % q;
      }
    for (const auto& [r2, v] : acc)
      if (v % q != 0) { rep.all_zero = false; return rep; }
    ++rep.tested;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// cohomology
// ---------------------------------------------------------------------------

struct CohomologyProfile {
  std::uint32_t degree = 0;
  ModuleProfile profile;
  bool stabilized = true;
  std::size_t boundary_flags = 0;
  bool experimental = false;

  std::string to_string(std::uint64_t p) const {
    std::string s = "h^" + std::to_string(degree) + " = " + profile.to_string(p);
    if (!stabilized) s += " [not stabilized]";
    if (boundary_flags) s += " [boundary dims: " + std::to_string(boundary_flags) + "]";
    if (experimental) s += " [experimental]";
    return s;
  }
};

inline Window doubled_window(const Window& W) {
  Window w2 = W;
  for (auto& b : w2.bounds) {
    b[0] *= 2;
    b[1] *= 2;
  }
  return w2;
}

namespace complexes_detail {

// joint fixed vectors of the listed operators on the safe columns of the
// window basis, returned in ambient basis coordinates
struct FixedSpace {
  ZMat K;                       // basis.dim x k
  std::size_t boundary = 0;     // excluded column count
};

inline FixedSpace fixed_space(const EtalePhiGammaModule& M, const WindowBasis& B,
                              const std::vector<std::pair<OperatorKind, std::size_t>>& which) {
  std::vector<WindowedOperator> ops;
  for (auto [k, a] : which) ops.push_back(assemble_operator(M, k, a, B));
  std::vector<bool> allowed(B.dim, true);
  for (const auto& op : ops)
    for (std::size_t j = 0; j < B.dim; ++j)
      if (op.low_exit[j] || op.inexact[j]) allowed[j] = false;
  std::vector<std::uint32_t> cols;
  for (std::size_t j = 0; j < B.dim; ++j)
    if (allowed[j]) cols.push_back(static_cast<std::uint32_t>(j));
  std::vector<std::int64_t> pos(B.dim, -1);
  for (std::size_t c = 0; c < cols.size(); ++c) pos[cols[c]] = static_cast<std::int64_t>(c);

  const Zpm ring = B.cx->coeff->ring;
  const std::uint64_t q = ring.q;
  SparseMat S = SparseMat::zero(ring, ops.size() * B.dim, cols.size());
  for (std::size_t o = 0; o < ops.size(); ++o) {
    for (std::size_t i = 0; i < B.dim; ++i)
      for (const auto& [j, v] : ops[o].mat.row[i])
        if (pos[j] >= 0) S.add(o * B.dim + i, static_cast<std::uint32_t>(pos[j]), v);
    for (std::uint32_t c = 0; c < cols.size(); ++c)
      S.add(o * B.dim + cols[c], c, q - 1);  // subtract the identity
  }
  ZMat Kc = sparse_kernel(S);
  ZMat K = ZMat::zero(ring, B.dim, Kc.cols);
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (std::size_t j = 0; j < Kc.cols; ++j) K.at(cols[c], j) = Kc.at(c, j);
  FixedSpace out;
  out.K = std::move(K);
  out.boundary = B.dim - cols.size();
  return out;
}

// restrict ambient kernel columns of the big window to the small window's
// coordinates
inline ZMat project_columns(const ZMat& K, const WindowBasis& big, const WindowBasis& small) {
  ZMat P = ZMat::zero(K.ring, small.dim, K.cols);
  for (std::size_t mono = 0; mono < small.nmono; ++mono) {
    ExpVec e = small.mono_at(mono);
    std::size_t bm = big.mono_index(e);
    for (std::size_t r = 0; r < small.rank; ++r)
      for (std::uint32_t dd = 0; dd < small.cx->f(); ++dd)
        for (std::size_t c = 0; c < K.cols; ++c)
          P.at(small.index(mono, r, dd), c) = K.at(big.index(bm, r, dd), c);
  }
  return P;
}

}  // namespace complexes_detail

// Exact degree-0 cohomology of the totalized complex: simultaneous fixed
// vectors of the torsion generators, the gamma generators, and the phi
// operators, computed on two nested windows; the claims must agree.
inline CohomologyProfile h0_exact(const EtalePhiGammaModule& M, const Window& W) {
  const SeriesContext* cx = M.context();
  const std::uint32_t n = static_cast<std::uint32_t>(cx->nvars());
  std::vector<std::pair<OperatorKind, std::size_t>> which;
  for (std::size_t a = 0; a < n; ++a) which.emplace_back(OperatorKind::Tau, a);
  for (std::size_t a = 0; a < n; ++a) which.emplace_back(OperatorKind::Gamma, a);
  for (std::size_t a = 0; a < n; ++a) which.emplace_back(OperatorKind::Phi, a);

  WindowBasis B1(cx, W, M.rank());
  WindowBasis B2(cx, doubled_window(W), M.rank());
  auto F1 = complexes_detail::fixed_space(M, B1, which);
  auto F2 = complexes_detail::fixed_space(M, B2, which);

  CohomologyProfile out;
  out.degree = 0;
  out.profile = span_profile(F1.K);
  out.boundary_flags = F1.boundary;

  ModuleProfile p2 = span_profile(F2.K);
  bool stable = (out.profile == p2);
  if (stable && F2.K.cols > 0) {
    ZMat proj = complexes_detail::project_columns(F2.K, B2, B1);
    if (!solve(F1.K, proj)) stable = false;
  }
  if (!stable)
    throw not_stabilized("degree-0 fixed space changed under window doubling: " +
                         out.profile.to_string(cx->p()) + " vs " + p2.to_string(cx->p()));
  return out;
}

// Elementary-divisor profiles per degree on the window basis.  Degree 0 uses
// faithful columns only; degrees >= 1 are experimental: kernels and images
// are intersected with the safe subspace and dropped relations are counted
// into boundary_flags rather than trusted.
inline std::vector<CohomologyProfile> cohomology_in_window(const TruncatedComplex& C) {
  const EtalePhiGammaModule& M = *C.module;
  const SeriesContext* cx = M.context();
  const Zpm ring = cx->coeff->ring;
  const std::size_t dim = C.basis.dim;
  const std::uint32_t n = static_cast<std::uint32_t>(cx->nvars());

  // torsion-invariance constraints baked into every term copy
  std::vector<WindowedOperator> tau;
  std::vector<bool> safe = C.col_safe;
  if (C.kind == ComplexKind::Herr)
    for (std::size_t a = 0; a < n; ++a) {
      tau.push_back(assemble_operator(M, OperatorKind::Tau, a, C.basis));
      for (std::size_t j = 0; j < dim; ++j)
        if (tau.back().low_exit[j] || tau.back().inexact[j]) safe[j] = false;
    }

  std::vector<CohomologyProfile> out;
  for (std::size_t t = 0; t < C.degrees(); ++t) {
    CohomologyProfile prof;
    prof.degree = static_cast<std::uint32_t>(t);
    prof.experimental = (t >= 1);
    const std::size_t tdim = C.term_dim(t);

    // safe coordinates at degree t
    std::vector<std::uint32_t> cols;
    for (std::size_t j = 0; j < tdim; ++j)
      if (safe[j % dim]) cols.push_back(static_cast<std::uint32_t>(j));
    std::vector<std::int64_t> pos(tdim, -1);
    for (std::size_t c = 0; c < cols.size(); ++c) pos[cols[c]] = static_cast<std::int64_t>(c);
    prof.boundary_flags = tdim - cols.size();

    // stack the outgoing differential with the torsion constraints
    std::size_t extra = tau.size() * tdim;
    std::size_t drows = (t < C.d.size()) ? C.d[t].rows : 0;
    SparseMat S = SparseMat::zero(ring, drows + extra, cols.size());
    if (t < C.d.size())
      for (std::size_t i = 0; i < C.d[t].rows; ++i)
        for (const auto& [j, v] : C.d[t].row[i])
          if (pos[j] >= 0) S.add(i, static_cast<std::uint32_t>(pos[j]), v);
    for (std::size_t o = 0; o < tau.size(); ++o) {
      for (std::size_t copy = 0; copy * dim < tdim; ++copy)
        for (std::size_t i = 0; i < dim; ++i)
          for (const auto& [j, v] : tau[o].mat.row[i]) {
            std::size_t jj = copy * dim + j;
            if (pos[jj] >= 0)
              S.add(drows + o * tdim + copy * dim + i, static_cast<std::uint32_t>(pos[jj]), v);
          }
      for (std::uint32_t c = 0; c < cols.size(); ++c)
        S.add(drows + o * tdim + cols[c], c, ring.q - 1);
    }
    ZMat Kc = sparse_kernel(S);
    ZMat Z = ZMat::zero(ring, tdim, Kc.cols);
    for (std::size_t c = 0; c < cols.size(); ++c)
      for (std::size_t j = 0; j < Kc.cols; ++j) Z.at(cols[c], j) = Kc.at(c, j);

    // boundaries from the previous degree, restricted to its safe columns
    ZMat B = ZMat::zero(ring, tdim, 0);
    if (t > 0) {
      const SparseMat& D = C.d[t - 1];
      std::vector<std::uint32_t> src;
      for (std::size_t j = 0; j < D.cols; ++j)
        if (safe[j % dim]) src.push_back(static_cast<std::uint32_t>(j));
      ZMat Bfull = ZMat::zero(ring, tdim, src.size());
      std::vector<std::int64_t> spos(D.cols, -1);
      for (std::size_t c = 0; c < src.size(); ++c) spos[src[c]] = static_cast<std::int64_t>(c);
      for (std::size_t i = 0; i < D.rows; ++i)
        for (const auto& [j, v] : D.row[i])
          if (spos[j] >= 0) Bfull.at(i, static_cast<std::size_t>(spos[j])) = v;
      // keep the boundary columns that land inside the computed cycle span
      std::vector<bool> landed = solvable_columns(Z, Bfull);
      std::vector<std::size_t> keep;
      for (std::size_t c = 0; c < Bfull.cols; ++c) {
        if (landed[c]) keep.push_back(c);
        else ++prof.boundary_flags;
      }
      if (keep.size() == Bfull.cols) {
        B = std::move(Bfull);
      } else {
        B = ZMat::zero(ring, tdim, keep.size());
        for (std::size_t c = 0; c < keep.size(); ++c)
          for (std::size_t i = 0; i < tdim; ++i) B.at(i, c) = Bfull.at(i, keep[c]);
      }
    }
    prof.profile = subquotient_profile(Z, B);
    out.push_back(std::move(prof));
  }
  return out;
}

// Profiles on the requested window plus a stabilization verdict from
// recomputing on the doubled window; degree 0 of the totalized complex also
// has the exact path in h0_exact.
inline std::vector<CohomologyProfile> cohomology_stabilized(const EtalePhiGammaModule& M,
                                                            const Window& W, ComplexKind kind) {
  TruncatedComplex C1 = build_subset_complex(M, W, kind);
  TruncatedComplex C2 = build_subset_complex(M, doubled_window(W), kind);
  auto r1 = cohomology_in_window(C1);
  auto r2 = cohomology_in_window(C2);
  for (std::size_t t = 0; t < r1.size(); ++t)
    r1[t].stabilized = (t < r2.size() && r1[t].profile == r2[t].profile);
  return r1;
}

}  // namespace phigamma
