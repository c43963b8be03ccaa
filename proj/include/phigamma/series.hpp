#pragma once

// Truncated multivariate Laurent series over W(F_{p^f})/p^m, with exact
// window bookkeeping.  The window rules for the ring operations are:
//
//   add:  lo = min(lo_f, lo_g); hi = min over the non-entire operands
//   mul:  lo = lo_f + lo_g; hi = min(lo_f + hi_g, lo_g + hi_f), where an
//         entire operand contributes its support minimum as lo and drops its
//         hi constraint
//
// and an operation on entire operands yields an entire result.  Every claim
// is per variable.

#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "phigamma/exponents.hpp"
#include "phigamma/unram.hpp"

namespace phigamma {

enum class SeriesMode { Integral, Perfect };

// Immutable, interned description of a series ring: coefficients, variable
// labels (one per element of the index set), exponent mode, and the default
// evaluation box used when a truncation bound has to be invented (e.g. the
// image of an entire series under an operator with infinite expansion).
class SeriesContext {
 public:
  const UnramContext* coeff;
  std::vector<std::string> vars;
  SeriesMode mode;
  std::uint32_t den_bound_exp;  // exponent denominators divide p^this (perfect mode)
  std::int64_t default_lo;
  std::int64_t default_hi;

  std::uint32_t p() const { return coeff->ring.p; }
  std::uint32_t m() const { return coeff->ring.m; }
  std::uint32_t f() const { return coeff->f; }
  std::size_t nvars() const { return vars.size(); }

  std::size_t var_index(const std::string& name) const {
    for (std::size_t i = 0; i < vars.size(); ++i)
      if (vars[i] == name) return i;
    throw std::invalid_argument("SeriesContext: unknown variable " + name);
  }

  static const SeriesContext* get(std::uint32_t p, std::uint32_t m, std::uint32_t f,
                                  std::vector<std::string> vars,
                                  SeriesMode mode = SeriesMode::Integral,
                                  std::uint32_t den_bound_exp = 2,
                                  std::int64_t default_lo = -16,
                                  std::int64_t default_hi = 16) {
    if (vars.empty()) throw std::invalid_argument("SeriesContext: need at least one variable");
    for (std::size_t i = 0; i + 1 < vars.size(); ++i)
      if (!(vars[i] < vars[i + 1]))
        throw std::invalid_argument("SeriesContext: variable labels must be strictly sorted");
    if (mode == SeriesMode::Perfect && m != 1)
      throw mode_mismatch("perfect mode is the characteristic-p ring; requires m = 1");
    if (mode == SeriesMode::Integral) den_bound_exp = 0;
    if (default_hi < default_lo)
      throw std::invalid_argument("SeriesContext: empty default window");

    std::ostringstream key;
    key << p << '|' << m << '|' << f << '|' << static_cast<int>(mode) << '|'
        << den_bound_exp << '|' << default_lo << '|' << default_hi;
    for (const auto& v : vars) key << '|' << v;

    static std::mutex mu;
    static std::map<std::string, std::unique_ptr<SeriesContext>>* registry =
        new std::map<std::string, std::unique_ptr<SeriesContext>>();
    std::lock_guard<std::mutex> lock(mu);
    auto it = registry->find(key.str());
    if (it == registry->end()) {
      auto cx = std::unique_ptr<SeriesContext>(new SeriesContext());
      cx->coeff = UnramContext::get(p, m, f);
      cx->vars = std::move(vars);
      cx->mode = mode;
      cx->den_bound_exp = den_bound_exp;
      cx->default_lo = default_lo;
      cx->default_hi = default_hi;
      it = registry->emplace(key.str(), std::move(cx)).first;
    }
    return it->second.get();
  }

  Window default_window() const { return Window::box(nvars(), default_lo, default_hi); }

  void validate_exponent(const ExpVec& e) const {
    if (e.size() != nvars())
      throw std::invalid_argument("exponent vector has wrong arity");
    for (const auto& r : e) {
      if (mode == SeriesMode::Integral) {
        if (!r.is_integer())
          throw mode_mismatch("integral mode admits integer exponents only");
      } else {
        std::int64_t d = r.den;
        std::uint32_t steps = 0;
        while (d > 1) {
          if (d % p() != 0 || steps >= den_bound_exp)
            throw mode_mismatch("exponent denominator exceeds the p-power bound");
          d /= p();
          ++steps;
        }
      }
    }
  }

 private:
  SeriesContext() = default;
};

class LaurentSeries {
 public:
  using TermMap = std::map<ExpVec, UnramCoeff, ExpVecLess>;

  LaurentSeries() : cx_(nullptr) {}

  static LaurentSeries zero(const SeriesContext* cx) {
    LaurentSeries s;
    s.cx_ = cx;
    s.win_ = Window::entire_box(cx->nvars());
    return s;
  }
  static LaurentSeries one(const SeriesContext* cx) {
    return monomial(cx, ExpVec(cx->nvars(), Rat::of(0)), UnramCoeff::one(cx->coeff));
  }
  static LaurentSeries constant(const SeriesContext* cx, const UnramCoeff& c) {
    return monomial(cx, ExpVec(cx->nvars(), Rat::of(0)), c);
  }
  static LaurentSeries monomial(const SeriesContext* cx, const ExpVec& e, const UnramCoeff& c) {
    cx->validate_exponent(e);
    LaurentSeries s = zero(cx);
    if (!c.is_zero()) s.terms_.emplace(e, c);
    s.refresh_entire_bounds();
    return s;
  }
  // pi_var as a series, and the variable's exponent vector helper
  static LaurentSeries variable(const SeriesContext* cx, std::size_t var, std::int64_t k = 1) {
    ExpVec e(cx->nvars(), Rat::of(0));
    e[var] = Rat::of(k);
    return monomial(cx, e, UnramCoeff::one(cx->coeff));
  }

  // Installs a prebuilt term map, dropping zeros and anything outside w.
  static LaurentSeries assemble(const SeriesContext* cx, TermMap terms, const Window& w) {
    LaurentSeries s;
    s.cx_ = cx;
    s.terms_ = std::move(terms);
    s.win_ = w;
    for (auto it = s.terms_.begin(); it != s.terms_.end();) {
      if (it->second.is_zero() || (!w.entire && !w.contains(it->first)))
        it = s.terms_.erase(it);
      else
        ++it;
    }
    if (w.entire) s.refresh_entire_bounds();
    return s;
  }

  const SeriesContext* context() const { return cx_; }
  const TermMap& terms() const { return terms_; }
  const Window& window() const { return win_; }
  bool is_entire() const { return win_.entire; }
  bool is_zero() const { return terms_.empty(); }

  UnramCoeff coeff_at(const ExpVec& e) const {
    auto it = terms_.find(e);
    if (it != terms_.end()) return it->second;
    return UnramCoeff::zero(cx_->coeff);
  }

  // True when the coefficient at e is determined by the stored data: always
  // for entire series, below the hard floor (known zero), or inside the box.
  bool known_at(const ExpVec& e) const {
    if (win_.entire) return true;
    for (std::size_t i = 0; i < cx_->nvars(); ++i)
      if (e[i] < Rat::of(win_.lo(i))) return true;
    for (std::size_t i = 0; i < cx_->nvars(); ++i)
      if (Rat::of(win_.hi(i)) < e[i]) return false;
    return true;
  }

  // Drops terms outside the box and installs the window.  Entire windows
  // keep everything and recompute their bounding box.
  LaurentSeries truncated(const Window& w) const {
    LaurentSeries out = *this;
    out.win_ = w;
    if (w.entire) {
      out.refresh_entire_bounds();
      return out;
    }
    for (auto it = out.terms_.begin(); it != out.terms_.end();) {
      if (!w.contains(it->first)) it = out.terms_.erase(it);
      else ++it;
    }
    return out;
  }

  friend LaurentSeries operator+(const LaurentSeries& a, const LaurentSeries& b) {
    a.check_same(b);
    if (a.is_zero() && a.is_entire()) return b;
    if (b.is_zero() && b.is_entire()) return a;
    LaurentSeries out = LaurentSeries::zero(a.cx_);
    out.terms_ = a.terms_;
    for (const auto& [e, c] : b.terms_) {
      auto it = out.terms_.find(e);
      if (it == out.terms_.end()) out.terms_.emplace(e, c);
      else {
        it->second = it->second + c;
        if (it->second.is_zero()) out.terms_.erase(it);
      }
    }
    return out.truncated(win_add(a.win_, b.win_));
  }
  friend LaurentSeries operator-(const LaurentSeries& a, const LaurentSeries& b) { return a + (-b); }
  LaurentSeries operator-() const {
    LaurentSeries out = *this;
    for (auto& [e, c] : out.terms_) c = -c;
    return out;
  }

  friend LaurentSeries operator*(const LaurentSeries& a, const LaurentSeries& b) {
    a.check_same(b);
    if ((a.is_zero() && a.is_entire()) || (b.is_zero() && b.is_entire()))
      return LaurentSeries::zero(a.cx_);
    Window w = win_mul(a.win_, b.win_);
    if (!w.entire && w.empty_box())
      throw insufficient_window("product has an empty result window");
    LaurentSeries out = LaurentSeries::zero(a.cx_);
    out.win_ = w;
    for (const auto& [ea, ca] : a.terms_) {
      for (const auto& [eb, cb] : b.terms_) {
        ExpVec e = ea;
        for (std::size_t i = 0; i < e.size(); ++i) e[i] = e[i] + eb[i];
        if (!w.contains(e)) continue;
        UnramCoeff c = ca * cb;
        if (c.is_zero()) continue;
        auto it = out.terms_.find(e);
        if (it == out.terms_.end()) out.terms_.emplace(std::move(e), c);
        else {
          it->second = it->second + c;
          if (it->second.is_zero()) out.terms_.erase(it);
        }
      }
    }
    if (w.entire) out.refresh_entire_bounds();
    return out;
  }

  LaurentSeries scaled(const UnramCoeff& c) const {
    LaurentSeries out = LaurentSeries::zero(cx_);
    out.win_ = win_;
    if (c.is_zero()) {
      if (!win_.entire) return out;  // still exact on the old window
      return LaurentSeries::zero(cx_);
    }
    for (const auto& [e, v] : terms_) {
      UnramCoeff w = v * c;
      if (!w.is_zero()) out.terms_.emplace(e, w);
    }
    if (out.win_.entire) out.refresh_entire_bounds();
    return out;
  }
  LaurentSeries scaled(std::uint64_t c) const {
    return scaled(UnramCoeff::from_int(cx_->coeff, c));
  }

  // Multiplication by the monomial pi^shift (exact, window translates).
  LaurentSeries shifted(const ExpVec& shift) const {
    cx_->validate_exponent(shift);
    LaurentSeries out = LaurentSeries::zero(cx_);
    out.win_ = win_;
    if (!win_.entire) {
      for (std::size_t i = 0; i < cx_->nvars(); ++i) {
        if (!shift[i].is_integer())
          throw mode_mismatch("window shift needs integer exponents");
        out.win_.bounds[i][0] = clamp_bound(win_.lo(i) + shift[i].num);
        out.win_.bounds[i][1] = clamp_bound(win_.hi(i) + shift[i].num);
      }
    }
    for (const auto& [e, c] : terms_) {
      ExpVec e2 = e;
      for (std::size_t i = 0; i < e2.size(); ++i) e2[i] = e2[i] + shift[i];
      out.terms_.emplace(std::move(e2), c);
    }
    if (out.win_.entire) out.refresh_entire_bounds();
    return out;
  }

  // Coefficientwise reduction into the (p, 1, f) context.
  LaurentSeries reduce_mod_p(const SeriesContext* target) const {
    LaurentSeries out = LaurentSeries::zero(target);
    out.win_ = win_;
    for (const auto& [e, c] : terms_) {
      std::vector<std::uint64_t> rep(cx_->f(), 0);
      for (std::uint32_t i = 0; i < cx_->f(); ++i) rep[i] = c.coeff(i) % cx_->p();
      UnramCoeff r = UnramCoeff::from_rep(target->coeff, std::move(rep));
      if (!r.is_zero()) out.terms_.emplace(e, r);
    }
    if (out.win_.entire) out.refresh_entire_bounds();
    return out;
  }

  // Coefficientwise embedding of mod-p data into a p^m context (values in [0, p)).
  LaurentSeries lift_from_mod_p(const SeriesContext* target) const {
    LaurentSeries out = LaurentSeries::zero(target);
    out.win_ = win_;
    for (const auto& [e, c] : terms_) {
      std::vector<std::uint64_t> rep(cx_->f(), 0);
      for (std::uint32_t i = 0; i < cx_->f(); ++i) rep[i] = c.coeff(i);
      UnramCoeff r = UnramCoeff::from_rep(target->coeff, std::move(rep));
      if (!r.is_zero()) out.terms_.emplace(e, r);
    }
    if (out.win_.entire) out.refresh_entire_bounds();
    return out;
  }

  LaurentSeries exact_div_p() const {
    LaurentSeries out = LaurentSeries::zero(cx_);
    out.win_ = win_;
    for (const auto& [e, c] : terms_) {
      UnramCoeff d = c.exact_div_p();
      if (!d.is_zero()) out.terms_.emplace(e, d);
    }
    if (out.win_.entire) out.refresh_entire_bounds();
    return out;
  }

  friend bool operator==(const LaurentSeries& a, const LaurentSeries& b) {
    return a.cx_ == b.cx_ && a.win_ == b.win_ && a.terms_ == b.terms_;
  }

  std::string to_string() const;

  void check_same(const LaurentSeries& o) const {
    if (cx_ != o.cx_) throw context_mismatch("series contexts differ");
  }

  // window combination rules (per variable; see file header)
  static Window win_add(const Window& a, const Window& b) {
    if (a.entire && b.entire) {
      Window w = Window::entire_box(a.size());
      return w;
    }
    Window w = Window::box(a.size(), 0, 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
      w.bounds[i][0] = std::min(a.lo(i), b.lo(i));
      std::int64_t hi = kWindowMax;
      if (!a.entire) hi = std::min(hi, a.hi(i));
      if (!b.entire) hi = std::min(hi, b.hi(i));
      w.bounds[i][1] = hi;
    }
    return w;
  }
  static Window win_mul(const Window& a, const Window& b) {
    if (a.entire && b.entire) return Window::entire_box(a.size());
    Window w = Window::box(a.size(), 0, 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
      w.bounds[i][0] = clamp_bound(a.lo(i) + b.lo(i));
      std::int64_t hi = kWindowMax;
      if (!b.entire) hi = std::min(hi, clamp_bound(a.lo(i) + b.hi(i)));
      if (!a.entire) hi = std::min(hi, clamp_bound(b.lo(i) + a.hi(i)));
      w.bounds[i][1] = hi;
    }
    return w;
  }

  // Support bounding box (valid only when there is at least one term).
  Window support_box() const {
    Window w = Window::box(cx_->nvars(), 0, 0);
    bool first = true;
    for (const auto& [e, c] : terms_) {
      for (std::size_t i = 0; i < e.size(); ++i) {
        // conservative integer hull of a possibly fractional exponent
        std::int64_t flo = floor_rat(e[i]);
        std::int64_t fhi = ceil_rat(e[i]);
        if (first) { w.bounds[i][0] = flo; w.bounds[i][1] = fhi; }
        else {
          w.bounds[i][0] = std::min(w.bounds[i][0], flo);
          w.bounds[i][1] = std::max(w.bounds[i][1], fhi);
        }
      }
      first = false;
    }
    return w;
  }

  static std::int64_t floor_rat(const Rat& r) {
    std::int64_t q = r.num / r.den;
    if (r.num % r.den != 0 && r.num < 0) --q;
    return q;
  }
  static std::int64_t ceil_rat(const Rat& r) {
    std::int64_t q = r.num / r.den;
    if (r.num % r.den != 0 && r.num > 0) ++q;
    return q;
  }

 private:
  void refresh_entire_bounds() {
    if (!win_.entire) return;
    if (terms_.empty()) {
      win_ = Window::entire_box(cx_->nvars());
      return;
    }
    Window box = support_box();
    box.entire = true;
    win_ = box;
  }

  const SeriesContext* cx_;
  TermMap terms_;
  Window win_;
};

inline std::string LaurentSeries::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream out;
  bool first = true;
  for (const auto& [e, c] : terms_) {
    if (!first) out << " + ";
    first = false;
    std::string cs = c.to_string();
    bool composite = cs.find(" + ") != std::string::npos;
    bool all_zero = true;
    for (const auto& r : e)
      if (r.num != 0) all_zero = false;
    if (all_zero) {
      out << (composite ? "(" + cs + ")" : cs);
      continue;
    }
    if (cs != "1") out << (composite ? "(" + cs + ")" : cs) << "*";
    bool first_var = true;
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (e[i].num == 0) continue;
      if (!first_var) out << "*";
      first_var = false;
      out << cx_->vars[i];
      if (!(e[i] == Rat::of(1))) {
        if (e[i].is_integer()) out << "^" << e[i].num;
        else out << "^(" << e[i].to_string() << ")";
      }
    }
  }
  return out.str();
}

// Compare two series on the overlap of their exact regions (the common box
// plus hard-floor zeros).  This is the right equality for window-truncated
// results of different provenance.
inline bool agree_on_overlap(const LaurentSeries& a, const LaurentSeries& b) {
  a.check_same(b);
  auto known_both = [&](const ExpVec& e) { return a.known_at(e) && b.known_at(e); };
  for (const auto& [e, c] : a.terms())
    if (known_both(e) && !(b.coeff_at(e) == c)) return false;
  for (const auto& [e, c] : b.terms())
    if (known_both(e) && !(a.coeff_at(e) == c)) return false;
  return true;
}

}  // namespace phigamma
