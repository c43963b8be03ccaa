// Finite-level correspondence: split tensor bases, the two descent functors,
// round trips up to isomorphism, the residue-level representing algebra, and
// agreement of the module-side Frobenius complex with the brute-force
// commuting-generator oracle.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <vector>

#include "phigamma/finite_level.hpp"

using namespace phigamma;

namespace {

// independent component count: fold the factors one at a time, splitting
// every accumulated field of degree d against a new factor of degree f into
// gcd(d, f) copies of degree lcm(d, f)
std::map<std::uint32_t, std::size_t> factor_fold(const std::vector<std::uint32_t>& fs) {
  std::map<std::uint32_t, std::size_t> comp{{1u, 1u}};
  for (std::uint32_t f : fs) {
    std::map<std::uint32_t, std::size_t> next;
    for (auto [d, cnt] : comp)
      next[std::lcm(d, f)] += cnt * std::gcd(d, f);
    comp = std::move(next);
  }
  return comp;
}

GaloisRepFin character(const Zpm& ring, std::vector<std::uint64_t> values) {
  GaloisRepFin V;
  V.ring = ring;
  V.rank = 1;
  for (std::uint64_t v : values) {
    ZMat r = ZMat::zero(ring, 1, 1);
    r.at(0, 0) = v % ring.q;
    V.rho.push_back(std::move(r));
  }
  return V;
}

std::vector<std::uint64_t> units_mod(std::uint64_t q, std::uint32_t p) {
  std::vector<std::uint64_t> u;
  for (std::uint64_t v = 1; v < q; ++v)
    if (v % p != 0) u.push_back(v);
  return u;
}

}  // namespace

TEST_CASE("split base components match the tensor factorization count") {
  std::vector<std::vector<std::uint32_t>> shapes = {
      {1}, {2}, {3}, {1, 1}, {2, 2}, {2, 3}, {2, 4}, {2, 2, 2}, {6, 4}, {3, 2, 2}};
  for (const auto& fs : shapes) {
    auto B = FiniteBase::make(5, 1, fs);
    auto expect = factor_fold(fs);
    REQUIRE(expect.size() == 1);
    auto [deg, cnt] = *expect.begin();
    CHECK(B.L == deg);
    CHECK(B.g == cnt);
    std::size_t tor = 1;
    for (auto f : fs) tor *= f;
    CHECK(B.g * B.L == tor);
  }
}

TEST_CASE("partial Frobenius maps permute components and close up") {
  for (auto fs : std::vector<std::vector<std::uint32_t>>{{2}, {2, 2}, {2, 3}, {4, 6}}) {
    auto B = FiniteBase::make(3, 1, fs);
    for (std::uint32_t a = 0; a < B.n; ++a) {
      std::vector<bool> seen(B.g, false);
      for (std::size_t i = 0; i < B.g; ++i) {
        REQUIRE(B.frob[a].src[i] < B.g);
        seen[B.frob[a].src[i]] = true;
      }
      CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
      // f_a applications of the map return to the start with twist 0 mod L
      for (std::size_t i = 0; i < B.g; ++i) {
        std::size_t cur = i;
        std::uint32_t tw = 0;
        for (std::uint32_t s = 0; s < B.f[a]; ++s) {
          tw += B.frob[a].twist[cur];
          cur = B.frob[a].src[cur];
        }
        CHECK(cur == i);
        CHECK(tw % B.L == 0);
      }
    }
    // composing all the partial maps shifts the diagonal: identity on
    // components, total twist one
    std::vector<std::size_t> src(B.g);
    std::vector<std::uint32_t> tw(B.g, 0);
    for (std::size_t i = 0; i < B.g; ++i) src[i] = i;
    for (std::uint32_t a = 0; a < B.n; ++a)
      for (std::size_t i = 0; i < B.g; ++i) {
        tw[i] += B.frob[a].twist[src[i]];
        src[i] = B.frob[a].src[src[i]];
      }
    for (std::size_t i = 0; i < B.g; ++i) {
      CHECK(src[i] == i);
      CHECK(tw[i] % B.L == 1 % B.L);
    }
  }
}

TEST_CASE("matrix helpers over the unramified coefficients") {
  const UnramContext* cx = UnramContext::get(3, 2, 2);
  UMat A = umat_identity(cx, 2);
  A[0][1] = UnramCoeff::theta(cx);
  A[1][0] = UnramCoeff::from_int(cx, 3);
  A[1][1] = UnramCoeff::from_int(cx, 4) + UnramCoeff::theta(cx);
  REQUIRE(umat_try_inv(A).has_value());
  CHECK(umat_equal(umat_mul(A, umat_inv(A)), umat_identity(cx, 2)));
  CHECK(umat_equal(umat_mul(umat_inv(A), A), umat_identity(cx, 2)));
  // Frobenius powers act entrywise and multiplicatively
  UMat A2 = umat_frob_pow(umat_frob_pow(A, 1), 1);
  CHECK(umat_equal(A2, umat_frob_pow(A, 2)));
  CHECK(umat_equal(umat_frob_pow(A, 2), A));  // sigma has order f = 2
  UMat s = umat_frob_pow(A, 1);
  CHECK_FALSE(umat_equal(s, A));
  // singular matrix has no inverse
  UMat Z = umat_zero(cx, 2, 2);
  Z[0][0] = UnramCoeff::from_int(cx, 3);
  CHECK_FALSE(umat_try_inv(Z).has_value());
  CHECK_THROWS_AS(umat_inv(Z), not_a_unit);
}

TEST_CASE("subfield embeddings are ring maps with exact sections") {
  struct Case {
    std::uint32_t p, m, fs, fd;
  };
  for (auto [p, m, fs, fd] : std::vector<Case>{{2, 1, 2, 4}, {3, 2, 2, 4}, {2, 2, 1, 3}, {3, 2, 2, 6}}) {
    const UnramContext* src = UnramContext::get(p, m, fs);
    const UnramContext* dst = UnramContext::get(p, m, fd);
    const SubfieldHom& H = subfield_hom(src, dst);
    CHECK(H.apply(UnramCoeff::one(src)) == UnramCoeff::one(dst));
    std::mt19937_64 rng(7);
    for (int t = 0; t < 12; ++t) {
      std::vector<std::uint64_t> ra(fs), rb(fs);
      for (auto& v : ra) v = rng() % src->ring.q;
      for (auto& v : rb) v = rng() % src->ring.q;
      UnramCoeff a = UnramCoeff::from_rep(src, ra), b = UnramCoeff::from_rep(src, rb);
      CHECK(H.apply(a * b) == H.apply(a) * H.apply(b));
      CHECK(H.apply(a + b) == H.apply(a) + H.apply(b));
      // the embedding intertwines the p-power Frobenii
      CHECK(H.apply(a.frobenius()) == H.apply(a).frobenius());
      CHECK(H.section(H.apply(a)) == a);
    }
  }
}

TEST_CASE("descent of the trivial representation gives identity Frobenii") {
  for (auto fs : std::vector<std::vector<std::uint32_t>>{{1}, {2}, {1, 2}, {2, 2}}) {
    auto B = FiniteBase::make(3, 2, fs);
    auto V = GaloisRepFin::trivial(B.ring, 2, B.n);
    auto D = functor_D(B, V);
    for (std::uint32_t a = 0; a < B.n; ++a)
      for (std::size_t c = 0; c < B.g; ++c)
        CHECK(umat_equal(D.F[a][c], umat_identity(B.comp, 2)));
  }
}

TEST_CASE("descent of a character inverts its value") {
  auto B3 = FiniteBase::make(3, 2, {1});
  for (std::uint64_t c : units_mod(9, 3)) {
    auto D = functor_D(B3, character(B3.ring, {c}));
    std::uint64_t cinv = 1;
    while ((cinv * c) % 9 != 1) ++cinv;
    CHECK(D.F[0][0][0][0] == UnramCoeff::from_int(B3.comp, static_cast<std::int64_t>(cinv)));
  }
  auto B2 = FiniteBase::make(2, 2, {1});
  for (std::uint64_t c : units_mod(4, 2)) {
    auto D = functor_D(B2, character(B2.ring, {c}));
    std::uint64_t cinv = (c == 1) ? 1 : 3;
    CHECK(D.F[0][0][0][0] == UnramCoeff::from_int(B2.comp, static_cast<std::int64_t>(cinv)));
  }
}

TEST_CASE("fixed points of the descended module recover the character exactly") {
  auto B = FiniteBase::make(3, 2, {1});
  for (std::uint64_t c : units_mod(9, 3)) {
    auto V = character(B.ring, {c});
    auto W = functor_V(functor_D(B, V));
    REQUIRE(W.rank == 1);
    CHECK(W.rho[0].at(0, 0) == c);
  }
}

TEST_CASE("a module with unit entry values is matched by exactly one character") {
  // brute force over all characters: the module with F = (inverse of 4)
  // matches the character 4 and no other
  auto B = FiniteBase::make(3, 2, {1});
  auto target = functor_D(B, character(B.ring, {4}));
  std::size_t hits = 0;
  std::uint64_t found = 0;
  for (std::uint64_t c : units_mod(9, 3)) {
    auto Dc = functor_D(B, character(B.ring, {c}));
    if (find_phimod_isomorphism(Dc, target).has_value()) {
      ++hits;
      found = c;
    }
  }
  CHECK(hits == 1);
  CHECK(found == 4);
}

TEST_CASE("round trip through both functors on rank-two representations") {
  SECTION("rotation of order four with a commuting scalar, two variables") {
    auto B = FiniteBase::make(3, 2, {1, 1});
    GaloisRepFin V;
    V.ring = B.ring;
    V.rank = 2;
    ZMat rot = ZMat::zero(B.ring, 2, 2);
    rot.at(0, 1) = 1;
    rot.at(1, 0) = 8;
    ZMat sc = ZMat::zero(B.ring, 2, 2);
    sc.at(0, 0) = 4;
    sc.at(1, 1) = 4;
    V.rho = {rot, sc};
    ZMat iso = ZMat::zero(B.ring, 0, 0);
    CHECK(roundtrip_check(B, V, &iso));
    REQUIRE(iso.rows == 2);
  }
  SECTION("unipotent generator, one variable, residue level") {
    auto B = FiniteBase::make(2, 1, {1});
    GaloisRepFin V;
    V.ring = B.ring;
    V.rank = 2;
    ZMat u = ZMat::identity(B.ring, 2);
    u.at(0, 1) = 1;
    V.rho = {u};
    CHECK(roundtrip_check(B, V));
  }
  SECTION("direct sum of characters over a quadratic base") {
    auto B = FiniteBase::make(2, 2, {2});
    auto V = GaloisRepFin::direct_sum(character(B.ring, {1}), character(B.ring, {3}));
    CHECK(roundtrip_check(B, V));
  }
}

TEST_CASE("round trip starting from the module side") {
  SECTION("trivial module over a quadratic base") {
    auto B = FiniteBase::make(2, 1, {2});
    CHECK(roundtrip_check_D(PhiModFin::trivial(B, 1)));
  }
  SECTION("generator twist over the field with four elements descends to trivial") {
    auto B = FiniteBase::make(2, 1, {2});
    auto D = PhiModFin::trivial(B, 1);
    D.F[0][0][0][0] = UnramCoeff::theta(B.comp);
    CHECK(roundtrip_check_D(D));
    auto V = functor_V(D);
    CHECK(V.rho[0].at(0, 0) == 1);
  }
  SECTION("compatible unit scalars on a two-component base") {
    auto B = FiniteBase::make(3, 2, {2, 2});
    REQUIRE(B.g == 2);
    auto D = PhiModFin::trivial(B, 1);
    // commutation for scalars needs F0[0] F1[1] = F1[0] F0[1]
    D.F[0][0][0][0] = UnramCoeff::from_int(B.comp, 4);
    D.F[0][1][0][0] = UnramCoeff::from_int(B.comp, 2);
    D.F[1][0][0][0] = UnramCoeff::from_int(B.comp, 2);
    D.F[1][1][0][0] = UnramCoeff::from_int(B.comp, 1);
    REQUIRE(D.validate_commutation().ok);
    CHECK(roundtrip_check_D(D));
  }
}

TEST_CASE("non-invertible Frobenius matrices are rejected") {
  auto B = FiniteBase::make(3, 2, {1});
  auto D = PhiModFin::trivial(B, 1);
  D.F[0][0][0][0] = UnramCoeff::from_int(B.comp, 3);
  CHECK_FALSE(D.validate_etale().ok());
  CHECK_THROWS_AS(functor_V(D), not_etale);
  GaloisRepFin bad;
  bad.ring = B.ring;
  bad.rank = 1;
  ZMat z = ZMat::zero(B.ring, 1, 1);
  z.at(0, 0) = 3;
  bad.rho = {z};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  GaloisRepFin nc;
  nc.ring = B.ring;
  nc.rank = 2;
  ZMat a = ZMat::identity(B.ring, 2), b = ZMat::identity(B.ring, 2);
  a.at(0, 1) = 1;
  b.at(1, 0) = 1;
  nc.rho = {a, b};
  CHECK_THROWS_AS(nc.validate(), std::invalid_argument);
}

TEST_CASE("commuting-generator oracle values") {
  SECTION("trivial rank one in two variables at residue level") {
    auto prof = koszul_oracle(GaloisRepFin::trivial(Zpm::make(3, 1), 1, 2));
    REQUIRE(prof.size() == 3);
    CHECK(prof[0] == ModuleProfile{{1}});
    CHECK(prof[1] == ModuleProfile{{1, 1}});
    CHECK(prof[2] == ModuleProfile{{1}});
  }
  SECTION("the one-unit character has matching kernel and cokernel") {
    auto prof = koszul_oracle(character(Zpm::make(3, 2), {4}));
    REQUIRE(prof.size() == 2);
    CHECK(prof[0] == ModuleProfile{{1}});
    CHECK(prof[1] == ModuleProfile{{1}});
  }
  SECTION("direct sums add profiles") {
    auto x = character(Zpm::make(3, 2), {4});
    auto y = GaloisRepFin::trivial(Zpm::make(3, 2), 1, 1);
    auto both = koszul_oracle(GaloisRepFin::direct_sum(x, y));
    auto px = koszul_oracle(x);
    auto py = koszul_oracle(y);
    for (std::size_t t = 0; t < both.size(); ++t) {
      ModuleProfile sum = px[t];
      sum.exps.insert(sum.exps.end(), py[t].exps.begin(), py[t].exps.end());
      std::sort(sum.exps.begin(), sum.exps.end(), std::greater<>());
      CHECK(both[t] == sum);
    }
  }
}

TEST_CASE("module-side Frobenius complex matches the oracle in every degree") {
  SECTION("characters in one variable") {
    auto B = FiniteBase::make(3, 2, {1});
    for (std::uint64_t c : units_mod(9, 3)) {
      auto V = character(B.ring, {c});
      auto lhs = phi_complex_profiles(functor_D(B, V));
      auto rhs = koszul_oracle(V);
      REQUIRE(lhs.size() == rhs.size());
      for (std::size_t t = 0; t < lhs.size(); ++t) CHECK(lhs[t] == rhs[t]);
    }
  }
  SECTION("trivial rank one, two variables, residue level") {
    auto B = FiniteBase::make(3, 1, {1, 1});
    auto V = GaloisRepFin::trivial(B.ring, 1, 2);
    auto lhs = phi_complex_profiles(functor_D(B, V));
    auto rhs = koszul_oracle(V);
    REQUIRE(lhs.size() == 3);
    CHECK(lhs[0] == rhs[0]);
    CHECK(lhs[1] == rhs[1]);
    CHECK(lhs[2] == rhs[2]);
  }
  SECTION("quadratic residue base") {
    auto B = FiniteBase::make(2, 1, {2});
    auto V = GaloisRepFin::trivial(B.ring, 1, 1);
    auto lhs = phi_complex_profiles(functor_D(B, V));
    auto rhs = koszul_oracle(V);
    for (std::size_t t = 0; t < lhs.size(); ++t) CHECK(lhs[t] == rhs[t]);
  }
  SECTION("character pair in two variables with torsion values") {
    auto B = FiniteBase::make(3, 2, {1, 1});
    auto V = character(B.ring, {4, 7});
    auto lhs = phi_complex_profiles(functor_D(B, V));
    auto rhs = koszul_oracle(V);
    for (std::size_t t = 0; t < lhs.size(); ++t) CHECK(lhs[t] == rhs[t]);
  }
}

TEST_CASE("descent respects direct sums and tensor products up to isomorphism") {
  auto B = FiniteBase::make(3, 2, {1});
  auto x = character(B.ring, {4});
  auto y = character(B.ring, {7});
  SECTION("direct sum") {
    auto lhs = functor_D(B, GaloisRepFin::direct_sum(x, y));
    auto rhs = PhiModFin::direct_sum(functor_D(B, x), functor_D(B, y));
    CHECK(find_phimod_isomorphism(lhs, rhs).has_value());
  }
  SECTION("tensor product") {
    auto lhs = functor_D(B, GaloisRepFin::tensor(x, y));
    auto rhs = PhiModFin::tensor(functor_D(B, x), functor_D(B, y));
    CHECK(find_phimod_isomorphism(lhs, rhs).has_value());
    // 4 * 7 = 28 = 1 mod 9, so the tensor is trivial
    CHECK(find_phimod_isomorphism(lhs, PhiModFin::trivial(B, 1)).has_value());
  }
}

TEST_CASE("representing algebra counts the right number of geometric points") {
  SECTION("trivial rank one") {
    for (std::uint32_t p : {2u, 3u, 5u}) {
      auto B = FiniteBase::make(p, 1, {1});
      auto S = representing_algebra(PhiModFin::trivial(B, 1));
      CHECK(S.dim == p);
      CHECK(S.jacobian_unit);
      REQUIRE(S.fiber_points.size() == 1);
      CHECK(S.fiber_points[0] == p);
    }
  }
  SECTION("generator twist over the quadratic base") {
    auto B = FiniteBase::make(2, 1, {2});
    auto D = PhiModFin::trivial(B, 1);
    D.F[0][0][0][0] = UnramCoeff::theta(B.comp);
    auto S = representing_algebra(D);
    CHECK(S.dim == 2);
    CHECK(S.jacobian_unit);
    CHECK(S.fiber_points[0] == 2);
  }
  SECTION("trivial rank two") {
    auto B = FiniteBase::make(2, 1, {1});
    auto S = representing_algebra(PhiModFin::trivial(B, 2));
    CHECK(S.dim == 4);
    CHECK(S.fiber_points[0] == 4);
  }
  SECTION("monomial one is the algebra unit") {
    auto B = FiniteBase::make(3, 1, {1});
    auto S = representing_algebra(PhiModFin::trivial(B, 1));
    for (std::size_t b = 0; b < S.dim; ++b)
      for (std::size_t k = 0; k < S.dim; ++k)
        CHECK(S.table[0][0][b][k] ==
              (k == b ? UnramCoeff::one(B.comp) : UnramCoeff::zero(B.comp)));
  }
  SECTION("rejected away from residue level and without unit matrices") {
    auto B2 = FiniteBase::make(3, 2, {1});
    CHECK_THROWS_AS(representing_algebra(PhiModFin::trivial(B2, 1)), mode_mismatch);
    auto B = FiniteBase::make(3, 1, {1});
    auto D = PhiModFin::trivial(B, 1);
    D.F[0][0][0][0] = UnramCoeff::zero(B.comp);
    CHECK_THROWS_AS(representing_algebra(D), not_etale);
  }
}

TEST_CASE("constant-matrix modules transfer to the series ring") {
  auto B = FiniteBase::make(3, 2, {1, 1});
  auto V = character(B.ring, {4, 7});
  auto D = functor_D(B, V);
  const SeriesContext* cx = SeriesContext::get(3, 2, 1, {"a", "b"});
  auto M = constant_series_module(D, cx);
  CHECK(M.rank() == 1);
  CHECK(M.validate_etale().ok());
  // degree-zero cohomology of the transferred module matches the oracle
  auto oracle = koszul_oracle(V);
  auto profs = cohomology_stabilized(M, Window::box(2, -6, 6), ComplexKind::Phi);
  REQUIRE(!profs.empty());
  CHECK(profs[0].profile == oracle[0]);
}
