#pragma once

// Etale (phi_Delta, Gamma_Delta)-modules over the truncated series ring:
// matrices of Laurent series per variable for the Frobenius action, the
// procyclic group generator, and the torsion generator, plus the standard
// constructions (twist, dual, sum, tensor, restriction of scalars) and the
// residue pairing.
//
// Semilinear convention: an operator with matrix M and ring endomorphism a
// acts by v -> M * a(v) entrywise, so two such operators commute exactly when
// M_A * a_A(M_B) = M_B * a_B(M_A).

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "phigamma/arith.hpp"
#include "phigamma/errors.hpp"
#include "phigamma/series_ops.hpp"

namespace phigamma {

// Coordinates of a module element in the chosen basis.
using ModuleElement = std::vector<LaurentSeries>;

// Square matrix of Laurent series over one context, row major.
class SeriesMat {
 public:
  SeriesMat() = default;

  static SeriesMat zero(const SeriesContext* cx, std::size_t n) {
    SeriesMat m;
    m.cx_ = cx;
    m.n_ = n;
    m.a_.assign(n * n, LaurentSeries::zero(cx));
    return m;
  }
  static SeriesMat identity(const SeriesContext* cx, std::size_t n) {
    SeriesMat m = zero(cx, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = LaurentSeries::one(cx);
    return m;
  }
  static SeriesMat scalar(const SeriesContext* cx, std::size_t n, const LaurentSeries& s) {
    SeriesMat m = zero(cx, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = s;
    return m;
  }

  const SeriesContext* context() const { return cx_; }
  std::size_t size() const { return n_; }
  LaurentSeries& at(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
  const LaurentSeries& at(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }

  friend SeriesMat operator*(const SeriesMat& x, const SeriesMat& y) {
    if (x.cx_ != y.cx_) throw context_mismatch("SeriesMat: mixed contexts");
    if (x.n_ != y.n_) throw std::invalid_argument("SeriesMat: size mismatch");
    SeriesMat r = zero(x.cx_, x.n_);
    for (std::size_t i = 0; i < x.n_; ++i)
      for (std::size_t j = 0; j < x.n_; ++j) {
        LaurentSeries acc = LaurentSeries::zero(x.cx_);
        for (std::size_t k = 0; k < x.n_; ++k) acc = acc + x.at(i, k) * y.at(k, j);
        r.at(i, j) = std::move(acc);
      }
    return r;
  }

  ModuleElement apply(const ModuleElement& v) const {
    if (v.size() != n_) throw std::invalid_argument("SeriesMat: vector length mismatch");
    ModuleElement out;
    out.reserve(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      LaurentSeries acc = LaurentSeries::zero(cx_);
      for (std::size_t j = 0; j < n_; ++j) acc = acc + at(i, j) * v[j];
      out.push_back(std::move(acc));
    }
    return out;
  }

  SeriesMat transposed() const {
    SeriesMat r = zero(cx_, n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) r.at(j, i) = at(i, j);
    return r;
  }

  SeriesMat scaled(const UnramCoeff& c) const {
    SeriesMat r = *this;
    for (auto& e : r.a_) e = e.scaled(c);
    return r;
  }

  template <typename Fn>
  SeriesMat map(Fn&& fn) const {
    SeriesMat r = *this;
    for (auto& e : r.a_) e = fn(e);
    return r;
  }

  static SeriesMat block_diag(const SeriesMat& x, const SeriesMat& y) {
    if (x.cx_ != y.cx_) throw context_mismatch("SeriesMat: mixed contexts");
    SeriesMat r = zero(x.cx_, x.n_ + y.n_);
    for (std::size_t i = 0; i < x.n_; ++i)
      for (std::size_t j = 0; j < x.n_; ++j) r.at(i, j) = x.at(i, j);
    for (std::size_t i = 0; i < y.n_; ++i)
      for (std::size_t j = 0; j < y.n_; ++j) r.at(x.n_ + i, x.n_ + j) = y.at(i, j);
    return r;
  }

  static SeriesMat kronecker(const SeriesMat& x, const SeriesMat& y) {
    if (x.cx_ != y.cx_) throw context_mismatch("SeriesMat: mixed contexts");
    SeriesMat r = zero(x.cx_, x.n_ * y.n_);
    for (std::size_t i = 0; i < x.n_; ++i)
      for (std::size_t j = 0; j < x.n_; ++j)
        for (std::size_t k = 0; k < y.n_; ++k)
          for (std::size_t l = 0; l < y.n_; ++l)
            r.at(i * y.n_ + k, j * y.n_ + l) = x.at(i, j) * y.at(k, l);
    return r;
  }

 private:
  const SeriesContext* cx_ = nullptr;
  std::size_t n_ = 0;
  std::vector<LaurentSeries> a_;
};

// First stored coefficient on which the two series disagree where both are
// known, rendered for failure messages; nullopt when they agree.
inline std::optional<std::string> series_disagreement(const LaurentSeries& a,
                                                      const LaurentSeries& b) {
  a.check_same(b);
  auto scan = [&](const LaurentSeries& x, const LaurentSeries& y) -> std::optional<std::string> {
    for (const auto& [e, c] : x.terms()) {
      if (!x.known_at(e) || !y.known_at(e)) continue;
      if (!(y.coeff_at(e) == c)) {
        std::string mon;
        for (std::size_t i = 0; i < e.size(); ++i) {
          if (e[i].num == 0) continue;
          if (!mon.empty()) mon += "*";
          mon += x.context()->vars[i] + "^" + e[i].to_string();
        }
        if (mon.empty()) mon = "1";
        return "monomial " + mon + ": " + c.to_string() + " vs " + y.coeff_at(e).to_string();
      }
    }
    return std::nullopt;
  };
  if (auto w = scan(a, b)) return w;
  return scan(b, a);
}

inline std::optional<std::string> matrix_disagreement(const SeriesMat& x, const SeriesMat& y) {
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j)
      if (auto w = series_disagreement(x.at(i, j), y.at(i, j)))
        return "entry (" + std::to_string(i) + "," + std::to_string(j) + "), " + *w;
  return std::nullopt;
}

enum class EtaleStatus { Etale, NotEtale, Inconclusive };

struct MatInversion {
  EtaleStatus status = EtaleStatus::Inconclusive;
  std::optional<SeriesMat> inverse;
  std::string note;
};

// Gauss-Jordan over the series ring with certified-unit pivots.  A column of
// the remaining block in which every entry is provably zero mod p forces the
// mod-p determinant to vanish (NotEtale); anything short of a certified pivot
// elsewhere stays Inconclusive.  The product A * A^{-1} is re-verified before
// the inverse is returned.
inline MatInversion invert_series_matrix(const SeriesMat& A) {
  const SeriesContext* cx = A.context();
  const std::size_t n = A.size();
  SeriesMat W = A;
  SeriesMat B = SeriesMat::identity(cx, n);
  try {
    for (std::size_t k = 0; k < n; ++k) {
      std::optional<std::size_t> sel;
      LaurentSeries pivot_inv = LaurentSeries::zero(cx);
      bool all_non_unit = true;
      for (std::size_t i = k; i < n && !sel; ++i) {
        InvertOutcome out = try_invert(W.at(i, k));
        if (out.status == InvertStatus::Certified) {
          sel = i;
          pivot_inv = *out.inverse;
        } else if (out.status != InvertStatus::NotAUnit) {
          all_non_unit = false;
        }
      }
      if (!sel) {
        if (all_non_unit)
          return {EtaleStatus::NotEtale, std::nullopt,
                  "column " + std::to_string(k) + " vanishes mod p"};
        return {EtaleStatus::Inconclusive, std::nullopt,
                "no certified pivot in column " + std::to_string(k)};
      }
      if (*sel != k)
        for (std::size_t j = 0; j < n; ++j) {
          std::swap(W.at(*sel, j), W.at(k, j));
          std::swap(B.at(*sel, j), B.at(k, j));
        }
      for (std::size_t j = 0; j < n; ++j) {
        W.at(k, j) = pivot_inv * W.at(k, j);
        B.at(k, j) = pivot_inv * B.at(k, j);
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (i == k) continue;
        LaurentSeries factor = W.at(i, k);
        if (factor.is_zero()) continue;
        for (std::size_t j = 0; j < n; ++j) {
          W.at(i, j) = W.at(i, j) - factor * W.at(k, j);
          B.at(i, j) = B.at(i, j) - factor * B.at(k, j);
        }
      }
    }
    SeriesMat P = A * B;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        LaurentSeries want = i == j ? LaurentSeries::one(cx) : LaurentSeries::zero(cx);
        if (!(P.at(i, j) - want).is_zero())
          return {EtaleStatus::Inconclusive, std::nullopt,
                  "inverse failed re-verification at entry (" + std::to_string(i) + "," +
                      std::to_string(j) + ")"};
      }
  } catch (const insufficient_window&) {
    return {EtaleStatus::Inconclusive, std::nullopt, "window collapsed during elimination"};
  }
  return {EtaleStatus::Etale, std::move(B), ""};
}

struct EtaleReport {
  EtaleStatus status = EtaleStatus::Inconclusive;
  std::string note;
  bool ok() const { return status == EtaleStatus::Etale; }
};

struct CommutationReport {
  bool ok = true;
  std::string note;
};

class EtalePhiGammaModule {
 public:
  // Character values are exact integers; the torsion value for odd p is a
  // Teichmueller lift carried with enough guard digits that every binomial
  // row any window of this tool can request stays exact mod p^m.
  static constexpr std::uint32_t kCharGuardDigits = 256;

  static BigInt standard_gamma_value(std::uint32_t p) {
    return p == 2 ? BigInt(5) : BigInt(p + 1);
  }
  static BigInt standard_tau_value(std::uint32_t p, std::uint32_t m) {
    if (p == 2) return BigInt(-1);
    std::uint64_t g = 0;
    for (std::uint64_t cand = 2; cand < p; ++cand) {
      bool primitive = true;
      std::uint64_t pw = 1;
      for (std::uint32_t k = 1; k + 1 < p && primitive; ++k) {
        pw = pw * cand % p;
        if (pw == 1) primitive = false;
      }
      if (primitive) { g = cand; break; }
    }
    return teichmueller(p, g, m + kCharGuardDigits);
  }

  EtalePhiGammaModule(const SeriesContext* cx, std::size_t rank, std::vector<SeriesMat> F,
                      std::vector<SeriesMat> G, std::vector<SeriesMat> T,
                      std::string provenance = "custom")
      : cx_(cx), rank_(rank), F_(std::move(F)), G_(std::move(G)), T_(std::move(T)),
        provenance_(std::move(provenance)), finv_(cx->nvars()) {
    if (cx->mode != SeriesMode::Integral)
      throw mode_mismatch("modules live over the integral-exponent ring");
    if (F_.size() != cx->nvars() || G_.size() != cx->nvars() || T_.size() != cx->nvars())
      throw std::invalid_argument("module needs one matrix of each kind per variable");
    gamma_char_.assign(cx->nvars(), standard_gamma_value(cx->p()));
    tau_char_.assign(cx->nvars(), standard_tau_value(cx->p(), cx->m()));
  }

  static EtalePhiGammaModule trivial(const SeriesContext* cx, std::size_t rank) {
    std::vector<SeriesMat> id(cx->nvars(), SeriesMat::identity(cx, rank));
    return EtalePhiGammaModule(cx, rank, id, id, id, "trivial(" + std::to_string(rank) + ")");
  }

  static EtalePhiGammaModule rank1(const SeriesContext* cx, const LaurentSeries& f_entry,
                                   std::string provenance = "rank1") {
    std::vector<SeriesMat> F(cx->nvars(), SeriesMat::scalar(cx, 1, f_entry));
    std::vector<SeriesMat> id(cx->nvars(), SeriesMat::identity(cx, 1));
    return EtalePhiGammaModule(cx, 1, F, id, id, std::move(provenance));
  }

  const SeriesContext* context() const { return cx_; }
  std::size_t rank() const { return rank_; }
  const SeriesMat& frobenius_matrix(std::size_t a) const { return F_[a]; }
  const SeriesMat& gamma_matrix(std::size_t a) const { return G_[a]; }
  const SeriesMat& torsion_matrix(std::size_t a) const { return T_[a]; }
  const BigInt& gamma_value(std::size_t a) const { return gamma_char_[a]; }
  const BigInt& tau_value(std::size_t a) const { return tau_char_[a]; }
  const std::string& provenance() const { return provenance_; }

  // ring endomorphisms applied entrywise to matrices
  SeriesMat phi_entries(std::size_t a, const SeriesMat& M) const {
    return M.map([&](const LaurentSeries& s) { return phi_alpha(s, a); });
  }
  SeriesMat gamma_entries(std::size_t a, const SeriesMat& M) const {
    return M.map([&](const LaurentSeries& s) { return gamma_alpha(s, a, gamma_char_[a]); });
  }
  SeriesMat tau_entries(std::size_t a, const SeriesMat& M) const {
    return M.map([&](const LaurentSeries& s) { return gamma_alpha(s, a, tau_char_[a]); });
  }

  ModuleElement apply_phi(std::size_t a, const ModuleElement& x) const {
    check_element(x);
    ModuleElement y;
    y.reserve(rank_);
    for (const auto& s : x) y.push_back(phi_alpha(s, a));
    return F_[a].apply(y);
  }
  ModuleElement apply_gamma(std::size_t a, const ModuleElement& x) const {
    check_element(x);
    ModuleElement y;
    y.reserve(rank_);
    for (const auto& s : x) y.push_back(gamma_alpha(s, a, gamma_char_[a]));
    return G_[a].apply(y);
  }
  ModuleElement apply_tau(std::size_t a, const ModuleElement& x) const {
    check_element(x);
    ModuleElement y;
    y.reserve(rank_);
    for (const auto& s : x) y.push_back(gamma_alpha(s, a, tau_char_[a]));
    return T_[a].apply(y);
  }
  ModuleElement apply_psi(std::size_t a, const ModuleElement& x) const {
    check_element(x);
    ModuleElement y = frobenius_inverse(a).apply(x);
    for (auto& s : y) s = psi_alpha(s, a);
    return y;
  }

  EtaleReport validate_etale() const {
    for (std::size_t a = 0; a < cx_->nvars(); ++a) {
      MatInversion inv = invert_series_matrix(F_[a]);
      if (inv.status != EtaleStatus::Etale)
        return {inv.status, "variable " + cx_->vars[a] + ": " + inv.note};
      finv_[a] = std::move(inv.inverse);
    }
    return {EtaleStatus::Etale, ""};
  }

  // All pairwise semilinear commutation relations among the Frobenius, the
  // procyclic generator, and the torsion generator, exact on the contracted
  // windows; the note carries the offending pair and a witness monomial.
  CommutationReport validate_commutation() const {
    struct Gen {
      char kind;  // 'F', 'G', 'T'
      std::size_t a;
    };
    std::vector<Gen> gens;
    for (std::size_t a = 0; a < cx_->nvars(); ++a) gens.push_back({'F', a});
    for (std::size_t a = 0; a < cx_->nvars(); ++a) gens.push_back({'G', a});
    for (std::size_t a = 0; a < cx_->nvars(); ++a) gens.push_back({'T', a});
    auto matrix_of = [&](const Gen& g) -> const SeriesMat& {
      return g.kind == 'F' ? F_[g.a] : g.kind == 'G' ? G_[g.a] : T_[g.a];
    };
    auto entries_through = [&](const Gen& g, const SeriesMat& M) {
      return g.kind == 'F' ? phi_entries(g.a, M)
                           : g.kind == 'G' ? gamma_entries(g.a, M) : tau_entries(g.a, M);
    };
    for (std::size_t u = 0; u < gens.size(); ++u)
      for (std::size_t v = u + 1; v < gens.size(); ++v) {
        const Gen &gu = gens[u], &gv = gens[v];
        if (gu.kind == gv.kind && gu.a == gv.a) continue;
        SeriesMat lhs = matrix_of(gu) * entries_through(gu, matrix_of(gv));
        SeriesMat rhs = matrix_of(gv) * entries_through(gv, matrix_of(gu));
        if (auto w = matrix_disagreement(lhs, rhs)) {
          std::string name_u = std::string(1, gu.kind) + "_" + cx_->vars[gu.a];
          std::string name_v = std::string(1, gv.kind) + "_" + cx_->vars[gv.a];
          return {false, "pair (" + name_u + ", " + name_v + "), " + *w};
        }
      }
    return {true, ""};
  }

  // F untouched; the group matrices pick up the character value of their own
  // generator, exactly the effect of tensoring with the standard twist.
  EtalePhiGammaModule tate_twist() const {
    EtalePhiGammaModule M = *this;
    for (std::size_t a = 0; a < cx_->nvars(); ++a) {
      M.G_[a] = M.G_[a].scaled(UnramCoeff(cx_->coeff, gamma_char_[a]));
      M.T_[a] = M.T_[a].scaled(UnramCoeff(cx_->coeff, tau_char_[a]));
    }
    M.provenance_ = "twist(" + provenance_ + ")";
    M.finv_ = finv_;  // F matrices unchanged
    return M;
  }

  // Matrices of the dual are inverses of transposes, which makes the
  // evaluation pairing operator-compatible; verified downstream through the
  // residue-pairing adjointness rather than asserted.
  EtalePhiGammaModule dual() const {
    std::vector<SeriesMat> F, G, T;
    for (std::size_t a = 0; a < cx_->nvars(); ++a) {
      F.push_back(require_inverse(F_[a], "dual of the Frobenius matrix"));
      G.push_back(require_inverse(G_[a], "dual of the group matrix"));
      T.push_back(require_inverse(T_[a], "dual of the torsion matrix"));
    }
    EtalePhiGammaModule M(cx_, rank_, std::move(F), std::move(G), std::move(T),
                          "dual(" + provenance_ + ")");
    return M;
  }

  static EtalePhiGammaModule direct_sum(const EtalePhiGammaModule& x,
                                        const EtalePhiGammaModule& y) {
    if (x.cx_ != y.cx_) throw context_mismatch("direct_sum: mixed contexts");
    std::vector<SeriesMat> F, G, T;
    for (std::size_t a = 0; a < x.cx_->nvars(); ++a) {
      F.push_back(SeriesMat::block_diag(x.F_[a], y.F_[a]));
      G.push_back(SeriesMat::block_diag(x.G_[a], y.G_[a]));
      T.push_back(SeriesMat::block_diag(x.T_[a], y.T_[a]));
    }
    return EtalePhiGammaModule(x.cx_, x.rank_ + y.rank_, std::move(F), std::move(G),
                               std::move(T),
                               "sum(" + x.provenance_ + ", " + y.provenance_ + ")");
  }

  static EtalePhiGammaModule tensor(const EtalePhiGammaModule& x,
                                    const EtalePhiGammaModule& y) {
    if (x.cx_ != y.cx_) throw context_mismatch("tensor: mixed contexts");
    std::vector<SeriesMat> F, G, T;
    for (std::size_t a = 0; a < x.cx_->nvars(); ++a) {
      F.push_back(SeriesMat::kronecker(x.F_[a], y.F_[a]));
      G.push_back(SeriesMat::kronecker(x.G_[a], y.G_[a]));
      T.push_back(SeriesMat::kronecker(x.T_[a], y.T_[a]));
    }
    return EtalePhiGammaModule(x.cx_, x.rank_ * y.rank_, std::move(F), std::move(G),
                               std::move(T),
                               "tensor(" + x.provenance_ + ", " + y.provenance_ + ")");
  }

  // Restriction of scalars along Z_p inside the degree-f coefficient ring:
  // rank multiplies by f and matrix entries are rewritten over the fixed
  // theta-power basis.  The Frobenius blocks pick up the coefficient
  // Frobenius on theta powers; the group actions are coefficient-trivial.
  EtalePhiGammaModule induct_unramified() const {
    const std::uint32_t f = cx_->f();
    if (f == 1) return *this;
    const SeriesContext* cx2 =
        SeriesContext::get(cx_->p(), cx_->m(), 1, cx_->vars, cx_->mode, cx_->den_bound_exp,
                           cx_->default_lo, cx_->default_hi);
    auto expand = [&](const SeriesMat& M, bool twist_by_frobenius) {
      SeriesMat R = SeriesMat::zero(cx2, rank_ * f);
      for (std::size_t i = 0; i < rank_; ++i)
        for (std::size_t j = 0; j < rank_; ++j)
          for (std::uint32_t s = 0; s < f; ++s) {
            UnramCoeff th = UnramCoeff::theta(cx_->coeff).pow(s);
            if (twist_by_frobenius) th = th.frobenius();
            LaurentSeries prod = M.at(i, j).scaled(th);
            std::vector<LaurentSeries::TermMap> comp(f);
            for (const auto& [e, c] : prod.terms())
              for (std::uint32_t t = 0; t < f; ++t) {
                std::uint64_t ct = c.coeff(t);
                if (ct == 0) continue;
                comp[t].emplace(e, UnramCoeff(cx2->coeff, ct));
              }
            for (std::uint32_t t = 0; t < f; ++t)
              R.at(i * f + t, j * f + s) =
                  LaurentSeries::assemble(cx2, std::move(comp[t]), prod.window());
          }
      return R;
    };
    std::vector<SeriesMat> F, G, T;
    for (std::size_t a = 0; a < cx_->nvars(); ++a) {
      F.push_back(expand(F_[a], true));
      G.push_back(expand(G_[a], false));
      T.push_back(expand(T_[a], false));
    }
    return EtalePhiGammaModule(cx2, rank_ * f, std::move(F), std::move(G), std::move(T),
                               "induct(" + provenance_ + ")");
  }

  ModuleElement zero_element() const {
    return ModuleElement(rank_, LaurentSeries::zero(cx_));
  }
  ModuleElement basis_element(std::size_t i) const {
    ModuleElement v = zero_element();
    v[i] = LaurentSeries::one(cx_);
    return v;
  }

 private:
  void check_element(const ModuleElement& x) const {
    if (x.size() != rank_) throw std::invalid_argument("module element has wrong rank");
    for (const auto& s : x)
      if (s.context() != cx_) throw context_mismatch("module element from another context");
  }

  const SeriesMat& frobenius_inverse(std::size_t a) const {
    if (!finv_[a]) {
      MatInversion inv = invert_series_matrix(F_[a]);
      if (inv.status != EtaleStatus::Etale)
        throw not_etale("frobenius matrix for variable " + cx_->vars[a] +
                        " has no certified inverse: " + inv.note);
      finv_[a] = std::move(inv.inverse);
    }
    return *finv_[a];
  }

  static SeriesMat require_inverse(const SeriesMat& M, const std::string& what) {
    MatInversion inv = invert_series_matrix(M.transposed());
    if (inv.status == EtaleStatus::NotEtale)
      throw not_etale(what + ": matrix is singular mod p");
    if (inv.status != EtaleStatus::Etale)
      throw precision_error(what + ": inversion inconclusive: " + inv.note);
    return *inv.inverse;
  }

  const SeriesContext* cx_;
  std::size_t rank_;
  std::vector<SeriesMat> F_, G_, T_;
  std::vector<BigInt> gamma_char_, tau_char_;
  std::string provenance_;
  mutable std::vector<std::optional<SeriesMat>> finv_;
};

// Residue pairing of coordinate vectors: {x, y} = res(sum_i x_i y_i).  The
// natural second argument lives in the twisted dual, but the formula only
// needs the coordinates.
inline UnramCoeff pairing(const ModuleElement& x, const ModuleElement& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pairing: rank mismatch");
  if (x.empty()) throw std::invalid_argument("pairing: empty elements");
  LaurentSeries acc = LaurentSeries::zero(x[0].context());
  for (std::size_t i = 0; i < x.size(); ++i) acc = acc + x[i] * y[i];
  return residue(acc);
}

inline ModuleElement element_add(const ModuleElement& x, const ModuleElement& y) {
  if (x.size() != y.size()) throw std::invalid_argument("element_add: rank mismatch");
  ModuleElement out;
  out.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out.push_back(x[i] + y[i]);
  return out;
}

inline ModuleElement element_sub(const ModuleElement& x, const ModuleElement& y) {
  if (x.size() != y.size()) throw std::invalid_argument("element_sub: rank mismatch");
  ModuleElement out;
  out.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out.push_back(x[i] - y[i]);
  return out;
}

inline bool element_agrees(const ModuleElement& x, const ModuleElement& y) {
  if (x.size() != y.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!agree_on_overlap(x[i], y[i])) return false;
  return true;
}

}  // namespace phigamma
