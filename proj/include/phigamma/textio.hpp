// Interchange formats: the canonical series text syntax, JSON fixture
// serialization for the three object kinds (series modules, finite-level
// modules, commuting matrix families), a small TOML subset for hand-written
// inputs, and the coefficient-context warm cache honored by the CLI.
//
// Series text: sums of terms like "3*pi_a^-2*pi_b + 7 + 2*t*pi_a^(1/2)".
// The unramified generator is t; fractional exponents sit in parentheses.
// Emission is canonical: terms in lexicographic exponent order (the term
// map's order), one text term per theta digit in ascending power, no
// redundant "1*" factors.  Parsing accepts any term order and repeated
// monomials and folds them.

#pragma once

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "phigamma/finite_level.hpp"
#include "phigamma/module.hpp"

namespace phigamma {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// coefficient and series text
// ---------------------------------------------------------------------------

namespace textio_detail {

inline std::string exp_to_text(const Rat& e) {
  if (e.den == 1) return std::to_string(e.num);
  return "(" + std::to_string(e.num) + "/" + std::to_string(e.den) + ")";
}

// one text term per theta digit: digit [* t^j] [* pi_v^e ...]
inline void emit_digit_term(std::string& out, std::uint64_t digit, std::uint32_t tpow,
                            const std::string& monomial) {
  if (!out.empty()) out += " + ";
  std::string factors;
  if (tpow > 0) {
    factors = "t";
    if (tpow > 1) factors += "^" + std::to_string(tpow);
  }
  if (!monomial.empty()) {
    if (!factors.empty()) factors += "*";
    factors += monomial;
  }
  if (factors.empty()) {
    out += std::to_string(digit);
  } else if (digit == 1) {
    out += factors;
  } else {
    out += std::to_string(digit) + "*" + factors;
  }
}

}  // namespace textio_detail

inline std::string coeff_to_text(const UnramCoeff& c) {
  std::string out;
  for (std::uint32_t j = 0; j < c.context()->f; ++j) {
    std::uint64_t d = c.coeff(j);
    if (d == 0) continue;
    textio_detail::emit_digit_term(out, d, j, "");
  }
  return out.empty() ? "0" : out;
}

inline std::string series_to_text(const LaurentSeries& s) {
  const SeriesContext* cx = s.context();
  std::string out;
  for (const auto& [e, c] : s.terms()) {
    std::string mono;
    for (std::size_t i = 0; i < cx->nvars(); ++i) {
      if (e[i].num == 0) continue;
      if (!mono.empty()) mono += "*";
      mono += "pi_" + cx->vars[i];
      if (!(e[i].num == 1 && e[i].den == 1)) mono += "^" + textio_detail::exp_to_text(e[i]);
    }
    for (std::uint32_t j = 0; j < cx->f(); ++j) {
      std::uint64_t d = c.coeff(j);
      if (d == 0) continue;
      textio_detail::emit_digit_term(out, d, j, mono);
    }
  }
  return out.empty() ? "0" : out;
}

namespace textio_detail {

struct Cursor {
  const std::string& s;
  std::size_t i = 0;

  void skip_ws() {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  }
  bool eof() {
    skip_ws();
    return i >= s.size();
  }
  char peek() {
    skip_ws();
    return i < s.size() ? s[i] : '\0';
  }
  bool accept(char c) {
    skip_ws();
    if (i < s.size() && s[i] == c) {
      ++i;
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& what) {
    throw schema_error("series text: " + what + " at position " + std::to_string(i) + " in \"" +
                       s + "\"");
  }
  std::int64_t integer() {
    skip_ws();
    bool neg = accept('-');
    skip_ws();
    if (i >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i]))) fail("expected digits");
    std::int64_t v = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
      v = v * 10 + (s[i] - '0');
      ++i;
    }
    return neg ? -v : v;
  }
  std::string ident() {
    skip_ws();
    std::size_t start = i;
    while (i < s.size() &&
           (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_'))
      ++i;
    if (start == i) fail("expected an identifier");
    return s.substr(start, i - start);
  }
};

inline Rat parse_exponent(Cursor& cur) {
  if (cur.accept('(')) {
    std::int64_t num = cur.integer();
    std::int64_t den = 1;
    if (cur.accept('/')) den = cur.integer();
    if (!cur.accept(')')) cur.fail("expected ')'");
    return Rat::make(num, den);
  }
  return Rat::of(cur.integer());
}

}  // namespace textio_detail

inline LaurentSeries series_from_text(const SeriesContext* cx, const std::string& text) {
  textio_detail::Cursor cur{text};
  LaurentSeries acc = LaurentSeries::zero(cx);
  bool first = true;
  while (!cur.eof()) {
    bool negate = false;
    if (!first || cur.peek() == '+' || cur.peek() == '-') {
      if (cur.accept('+')) {
      } else if (cur.accept('-')) {
        negate = true;
      } else if (!first) {
        cur.fail("expected '+' or '-' between terms");
      }
    }
    first = false;
    // one term: product of factors
    std::uint64_t scalar = 1;
    std::uint32_t tpow = 0;
    ExpVec e(cx->nvars(), Rat::of(0));
    bool any = false;
    do {
      cur.skip_ws();
      if (cur.i < text.size() && std::isdigit(static_cast<unsigned char>(text[cur.i]))) {
        std::int64_t v = cur.integer();
        scalar = mulmod_u64(scalar, static_cast<std::uint64_t>(v) % cx->coeff->ring.q,
                            cx->coeff->ring.q);
      } else {
        std::string name = cur.ident();
        if (name == "t") {
          std::int64_t j = 1;
          if (cur.accept('^')) j = cur.integer();
          if (j < 0) cur.fail("t takes nonnegative powers");
          tpow += static_cast<std::uint32_t>(j);
        } else if (name.rfind("pi_", 0) == 0) {
          std::size_t v;
          try {
            v = cx->var_index(name.substr(3));
          } catch (const std::invalid_argument&) {
            cur.fail("unknown variable \"" + name.substr(3) + "\"");
          }
          Rat ex = cur.accept('^') ? textio_detail::parse_exponent(cur) : Rat::of(1);
          e[v] = e[v] + ex;
        } else {
          cur.fail("unknown factor \"" + name + "\"");
        }
      }
      any = true;
    } while (cur.accept('*'));
    if (!any) cur.fail("empty term");
    UnramCoeff c = UnramCoeff::one(cx->coeff).scale(scalar);
    for (std::uint32_t j = 0; j < tpow; ++j) c = c * UnramCoeff::theta(cx->coeff);
    if (negate) c = -c;
    acc = acc + LaurentSeries::monomial(cx, e, c);
  }
  return acc;
}

inline UnramCoeff coeff_from_text(const UnramContext* cx, const std::string& text) {
  // reuse the series parser over a throwaway one-variable ring
  const SeriesContext* scx = SeriesContext::get(
      static_cast<std::uint32_t>(cx->ring.p), cx->ring.m, cx->f, {"internal"});
  LaurentSeries s = series_from_text(scx, text);
  for (const auto& [e, c] : s.terms())
    if (e[0].num != 0) throw schema_error("coefficient text must not mention variables");
  auto it = s.terms().find(ExpVec(1, Rat::of(0)));
  if (it == s.terms().end()) return UnramCoeff::zero(cx);
  std::vector<std::uint64_t> rep(cx->f);
  for (std::uint32_t j = 0; j < cx->f; ++j) rep[j] = it->second.coeff(j);
  return UnramCoeff::from_rep(cx, rep);
}

// ---------------------------------------------------------------------------
// fixture serialization
// ---------------------------------------------------------------------------

inline Json module_to_json(const EtalePhiGammaModule& M) {
  const SeriesContext* cx = M.context();
  Json j;
  j["kind"] = "series_module";
  j["p"] = cx->p();
  j["m"] = cx->m();
  j["f"] = cx->f();
  j["mode"] = (cx->mode == SeriesMode::Integral) ? "integral" : "perfect";
  j["vars"] = cx->vars;
  j["rank"] = M.rank();
  auto mat_array = [&](auto getter) {
    Json arr = Json::array();
    for (std::size_t a = 0; a < cx->nvars(); ++a) {
      const SeriesMat& mat = getter(a);
      Json rows = Json::array();
      for (std::size_t i = 0; i < M.rank(); ++i) {
        Json row = Json::array();
        for (std::size_t k = 0; k < M.rank(); ++k) row.push_back(series_to_text(mat.at(i, k)));
        rows.push_back(std::move(row));
      }
      arr.push_back(std::move(rows));
    }
    return arr;
  };
  j["frobenius"] = mat_array([&](std::size_t a) -> const SeriesMat& { return M.frobenius_matrix(a); });
  j["gamma"] = mat_array([&](std::size_t a) -> const SeriesMat& { return M.gamma_matrix(a); });
  j["torsion"] = mat_array([&](std::size_t a) -> const SeriesMat& { return M.torsion_matrix(a); });
  j["provenance"] = M.provenance();
  return j;
}

inline EtalePhiGammaModule module_from_json(const Json& j) {
  if (j.value("kind", "") != "series_module")
    throw schema_error("expected kind \"series_module\"");
  std::vector<std::string> vars = j.at("vars").get<std::vector<std::string>>();
  SeriesMode mode = SeriesMode::Integral;
  if (j.value("mode", "integral") == "perfect") mode = SeriesMode::Perfect;
  const SeriesContext* cx =
      SeriesContext::get(j.at("p").get<std::uint32_t>(), j.at("m").get<std::uint32_t>(),
                         j.at("f").get<std::uint32_t>(), vars, mode);
  std::size_t rank = j.at("rank").get<std::size_t>();
  auto mats = [&](const char* key) {
    const Json& arr = j.at(key);
    if (arr.size() != cx->nvars()) throw schema_error(std::string(key) + ": wrong arity");
    std::vector<SeriesMat> out;
    for (std::size_t a = 0; a < cx->nvars(); ++a) {
      SeriesMat m = SeriesMat::zero(cx, rank);
      if (arr[a].size() != rank) throw schema_error(std::string(key) + ": wrong row count");
      for (std::size_t i = 0; i < rank; ++i) {
        if (arr[a][i].size() != rank) throw schema_error(std::string(key) + ": wrong col count");
        for (std::size_t k = 0; k < rank; ++k)
          m.at(i, k) = series_from_text(cx, arr[a][i][k].get<std::string>());
      }
      out.push_back(std::move(m));
    }
    return out;
  };
  return EtalePhiGammaModule(cx, rank, mats("frobenius"), mats("gamma"), mats("torsion"),
                             j.value("provenance", "parsed"));
}

inline Json finite_module_to_json(const PhiModFin& D) {
  Json j;
  j["kind"] = "finite_module";
  j["p"] = D.base.ring.p;
  j["m"] = D.base.ring.m;
  j["degrees"] = D.base.f;
  j["rank"] = D.rank;
  Json arr = Json::array();
  for (std::uint32_t a = 0; a < D.base.n; ++a) {
    Json comps = Json::array();
    for (std::size_t c = 0; c < D.base.g; ++c) {
      Json rows = Json::array();
      for (std::size_t i = 0; i < D.rank; ++i) {
        Json row = Json::array();
        for (std::size_t k = 0; k < D.rank; ++k) row.push_back(coeff_to_text(D.F[a][c][i][k]));
        rows.push_back(std::move(row));
      }
      comps.push_back(std::move(rows));
    }
    arr.push_back(std::move(comps));
  }
  j["frobenius"] = arr;
  return j;
}

inline PhiModFin finite_module_from_json(const Json& j) {
  if (j.value("kind", "") != "finite_module")
    throw schema_error("expected kind \"finite_module\"");
  FiniteBase B = FiniteBase::make(j.at("p").get<std::uint32_t>(), j.at("m").get<std::uint32_t>(),
                                  j.at("degrees").get<std::vector<std::uint32_t>>());
  PhiModFin D;
  D.base = B;
  D.rank = j.at("rank").get<std::size_t>();
  const Json& arr = j.at("frobenius");
  if (arr.size() != B.n) throw schema_error("frobenius: wrong variable count");
  D.F.assign(B.n, std::vector<UMat>(B.g, umat_zero(B.comp, D.rank, D.rank)));
  for (std::uint32_t a = 0; a < B.n; ++a) {
    if (arr[a].size() != B.g) throw schema_error("frobenius: wrong component count");
    for (std::size_t c = 0; c < B.g; ++c)
      for (std::size_t i = 0; i < D.rank; ++i)
        for (std::size_t k = 0; k < D.rank; ++k)
          D.F[a][c][i][k] = coeff_from_text(B.comp, arr[a][c][i][k].get<std::string>());
  }
  return D;
}

inline Json galois_rep_to_json(const GaloisRepFin& V) {
  Json j;
  j["kind"] = "galois_rep";
  j["p"] = V.ring.p;
  j["m"] = V.ring.m;
  j["nvars"] = V.rho.size();
  j["rank"] = V.rank;
  Json arr = Json::array();
  for (const ZMat& r : V.rho) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < r.rows; ++i) {
      Json row = Json::array();
      for (std::size_t k = 0; k < r.cols; ++k) row.push_back(r.at(i, k));
      rows.push_back(std::move(row));
    }
    arr.push_back(std::move(rows));
  }
  j["rho"] = arr;
  return j;
}

inline GaloisRepFin galois_rep_from_json(const Json& j) {
  if (j.value("kind", "") != "galois_rep") throw schema_error("expected kind \"galois_rep\"");
  GaloisRepFin V;
  V.ring = Zpm::make(j.at("p").get<std::uint32_t>(), j.at("m").get<std::uint32_t>());
  V.rank = j.at("rank").get<std::size_t>();
  for (const Json& rm : j.at("rho")) {
    ZMat r = ZMat::zero(V.ring, V.rank, V.rank);
    if (rm.size() != V.rank) throw schema_error("rho: wrong row count");
    for (std::size_t i = 0; i < V.rank; ++i) {
      if (rm[i].size() != V.rank) throw schema_error("rho: wrong col count");
      for (std::size_t k = 0; k < V.rank; ++k)
        r.at(i, k) = rm[i][k].get<std::uint64_t>() % V.ring.q;
    }
    V.rho.push_back(std::move(r));
  }
  if (V.rho.size() != j.at("nvars").get<std::size_t>())
    throw schema_error("rho: wrong variable count");
  return V;
}

// Canonical emission: sorted keys (the library's object representation),
// two-space indent, trailing newline.  Fixture round trips are byte-exact
// against this form.
inline std::string canonical_dump(const Json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// minimal TOML subset
// ---------------------------------------------------------------------------

// Accepted: comments (#), [table.path] headers, key = value lines with
// values that are strings, integers, booleans, or same-line (nested) arrays.
// That covers hand-written fixtures; everything normalizes to the same
// canonical JSON as the native format.
namespace textio_detail {

inline Json toml_value(Cursor& cur);

inline Json toml_array(Cursor& cur) {
  Json arr = Json::array();
  if (!cur.accept('[')) cur.fail("expected '['");
  if (cur.accept(']')) return arr;
  while (true) {
    arr.push_back(toml_value(cur));
    if (cur.accept(']')) break;
    if (!cur.accept(',')) cur.fail("expected ',' or ']'");
    if (cur.accept(']')) break;  // trailing comma
  }
  return arr;
}

inline Json toml_value(Cursor& cur) {
  cur.skip_ws();
  char c = cur.peek();
  if (c == '[') return toml_array(cur);
  if (c == '"') {
    ++cur.i;
    std::string out;
    while (cur.i < cur.s.size() && cur.s[cur.i] != '"') {
      if (cur.s[cur.i] == '\\' && cur.i + 1 < cur.s.size()) ++cur.i;
      out += cur.s[cur.i++];
    }
    if (!cur.accept('"')) cur.fail("unterminated string");
    return Json(out);
  }
  if (c == 't' || c == 'f') {
    std::string word = cur.ident();
    if (word == "true") return Json(true);
    if (word == "false") return Json(false);
    cur.fail("unknown bare word \"" + word + "\"");
  }
  return Json(cur.integer());
}

}  // namespace textio_detail

inline Json parse_toml(const std::string& text) {
  Json root = Json::object();
  Json* table = &root;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // strip comments outside strings
    bool instr = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') instr = !instr;
      if (line[i] == '#' && !instr) {
        line = line.substr(0, i);
        break;
      }
    }
    std::size_t b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    std::size_t e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    if (line.front() == '[') {
      if (line.back() != ']')
        throw schema_error("toml line " + std::to_string(lineno) + ": bad table header");
      std::string path = line.substr(1, line.size() - 2);
      table = &root;
      std::size_t pos = 0;
      while (pos <= path.size()) {
        std::size_t dot = path.find('.', pos);
        std::string part = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (part.empty())
          throw schema_error("toml line " + std::to_string(lineno) + ": empty table name");
        table = &(*table)[part];
        if (dot == std::string::npos) break;
        pos = dot + 1;
      }
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw schema_error("toml line " + std::to_string(lineno) + ": expected key = value");
    std::string key = line.substr(0, eq);
    std::size_t ke = key.find_last_not_of(" \t");
    key = key.substr(0, ke + 1);
    std::string value = line.substr(eq + 1);
    textio_detail::Cursor cur{value};
    (*table)[key] = textio_detail::toml_value(cur);
    if (!cur.eof())
      throw schema_error("toml line " + std::to_string(lineno) + ": trailing content");
  }
  return root;
}

// ---------------------------------------------------------------------------
// files and the context warm cache
// ---------------------------------------------------------------------------

inline Json load_fixture_text(const std::string& text, const std::string& name) {
  auto dot = name.rfind('.');
  std::string ext = (dot == std::string::npos) ? "" : name.substr(dot + 1);
  try {
    if (ext == "toml") return parse_toml(text);
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw schema_error(name + ": " + e.what());
  }
}

inline Json load_fixture_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw schema_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_fixture_text(buf.str(), path);
}

// PGM_CACHE_DIR, when set, holds a context manifest that is replayed on
// startup so repeated CLI runs rebuild coefficient tables once.
inline void warm_context_cache() {
  const char* dir = std::getenv("PGM_CACHE_DIR");
  if (!dir) return;
  std::ifstream in(std::string(dir) + "/contexts.txt");
  if (!in) return;
  std::uint64_t p;
  std::uint32_t m, f;
  while (in >> p >> m >> f) {
    if (p < 2 || m == 0 || f == 0 || f > 64) continue;
    UnramContext::get(p, m, f);
  }
}

inline void save_context_cache() {
  const char* dir = std::getenv("PGM_CACHE_DIR");
  if (!dir) return;
  std::ofstream out(std::string(dir) + "/contexts.txt");
  if (!out) return;
  for (const auto& [p, m, f] : UnramContext::interned())
    out << p << " " << m << " " << f << "\n";
}

}  // namespace phigamma
