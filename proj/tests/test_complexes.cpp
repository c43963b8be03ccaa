// Subset complexes: sign bookkeeping, exact matrix complexes, element-level
// differentials squaring to zero, truncated operator matrices on windows,
// the phi/psi adjunction through the residue pairing, and degree-0
// cohomology with window-doubling stabilization.

#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "phigamma/complexes.hpp"

using namespace phigamma;

namespace {

const SeriesContext* ctxn(std::uint32_t p, std::uint32_t m, std::uint32_t n,
                          std::uint32_t f = 1) {
  std::vector<std::string> names = {"a", "b", "c"};
  names.resize(n);
  return SeriesContext::get(p, m, f, names);
}

// entire polynomial with support in [lo, hi]^n: exact under every operator
LaurentSeries random_poly(const SeriesContext* cx, std::mt19937_64& rng, int terms = 4,
                          std::int64_t lo = -2, std::int64_t hi = 3) {
  LaurentSeries s = LaurentSeries::zero(cx);
  for (int t = 0; t < terms; ++t) {
    ExpVec e(cx->nvars(), Rat::of(0));
    for (std::size_t i = 0; i < cx->nvars(); ++i)
      e[i] = Rat::of(lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1)));
    s = s + LaurentSeries::monomial(
                cx, e, UnramCoeff::from_int(cx->coeff, static_cast<std::int64_t>(rng() % 17) - 8));
  }
  return s;
}

ModuleElement random_poly_element(const EtalePhiGammaModule& M, std::mt19937_64& rng,
                                  std::int64_t lo = -2, std::int64_t hi = 3) {
  ModuleElement v;
  for (std::size_t i = 0; i < M.rank(); ++i) v.push_back(random_poly(M.context(), rng, 4, lo, hi));
  return v;
}

bool element_is_zero(const ModuleElement& v) {
  for (const auto& s : v)
    if (!s.is_zero()) return false;
  return true;
}

ZMat random_unit_matrix(const Zpm& ring, std::size_t nn, std::mt19937_64& rng) {
  // unit-determinant by construction: unipotent lower times unipotent upper
  ZMat L = ZMat::identity(ring, nn), U = ZMat::identity(ring, nn);
  for (std::size_t i = 0; i < nn; ++i)
    for (std::size_t j = 0; j < nn; ++j) {
      if (i > j) L.at(i, j) = rng() % ring.q;
      if (i < j) U.at(i, j) = rng() % ring.q;
    }
  return L * U;
}

}  // namespace

TEST_CASE("subset enumeration is lexicographic with binomial counts") {
  CHECK(subsets_of_rank(3, 0) == std::vector<std::uint32_t>{0u});
  CHECK(subsets_of_rank(3, 1) == std::vector<std::uint32_t>({0b001u, 0b010u, 0b100u}));
  CHECK(subsets_of_rank(3, 2) == std::vector<std::uint32_t>({0b011u, 0b101u, 0b110u}));
  CHECK(subsets_of_rank(3, 3) == std::vector<std::uint32_t>{0b111u});
  CHECK(subsets_of_rank(5, 2).size() == 10);
  CHECK(subsets_of_rank(2, 3).empty());
}

TEST_CASE("position signs count predecessors in the subset and its complement") {
  for (std::uint32_t n : {2u, 3u, 4u}) {
    for (std::uint32_t S = 0; S < (1u << n); ++S) {
      for (std::uint32_t beta = 0; beta < n; ++beta) {
        std::uint32_t in = 0, outn = 0;
        for (std::uint32_t a = 0; a < beta; ++a) {
          if (S & (1u << a)) ++in;
          else ++outn;
        }
        CHECK(sign_eps(S, beta) == in);
        CHECK(sign_eta(S, beta, n) == outn);
        if (!(S & (1u << beta))) {
          // the complement sign at (S, beta) is the subset sign seen from the
          // other side: this is what makes the two differentials adjoint
          std::uint32_t full = (1u << n) - 1;
          std::uint32_t other = full & ~S & ~(1u << beta);
          CHECK(sign_eta(S, beta, n) == sign_eps(other, beta));
        }
      }
    }
  }
}

TEST_CASE("matrix complex of identity operators has binomial cohomology") {
  // two commuting identities: all differentials vanish, so each degree
  // contributes its full term
  Zpm ring = Zpm::make(5, 1);
  std::vector<ZMat> ops(2, ZMat::identity(ring, 1));
  MatrixComplex C = build_matrix_complex(ops);
  REQUIRE(C.d.size() == 2);
  CHECK(C.term_dim(0) == 1);
  CHECK(C.term_dim(1) == 2);
  CHECK(C.term_dim(2) == 1);
  CHECK(C.cohomology(0) == ModuleProfile{{1}});
  CHECK(C.cohomology(1) == ModuleProfile{{1, 1}});
  CHECK(C.cohomology(2) == ModuleProfile{{1}});
}

TEST_CASE("matrix complex of multiplication by 1+p has order-p cohomology") {
  Zpm ring = Zpm::make(3, 2);
  ZMat op = ZMat::zero(ring, 1, 1);
  op.at(0, 0) = 1 + ring.p;
  MatrixComplex C = build_matrix_complex({op});
  CHECK(C.cohomology(0) == ModuleProfile{{1}});
  CHECK(C.cohomology(1) == ModuleProfile{{1}});
}

TEST_CASE("matrix complex differentials compose to zero for commuting operators") {
  std::mt19937_64 rng(7);
  for (std::uint32_t p : {2u, 3u}) {
    for (std::uint32_t m : {1u, 2u}) {
      Zpm ring = Zpm::make(p, m);
      ZMat A = random_unit_matrix(ring, 3, rng);
      // powers of one matrix commute pairwise
      std::vector<ZMat> ops = {A, A * A, A * A * A};
      MatrixComplex C = build_matrix_complex(ops);
      for (std::size_t t = 0; t + 1 < C.d.size(); ++t) {
        ZMat sq = C.d[t + 1] * C.d[t];
        for (std::size_t i = 0; i < sq.rows; ++i)
          for (std::size_t j = 0; j < sq.cols; ++j) REQUIRE(sq.at(i, j) == 0);
      }
    }
  }
}

TEST_CASE("matrix complex cohomology is additive over direct sums") {
  std::mt19937_64 rng(11);
  Zpm ring = Zpm::make(3, 2);
  ZMat A = random_unit_matrix(ring, 2, rng);
  ZMat B = random_unit_matrix(ring, 2, rng);
  ZMat A2 = A * A, B2 = B * B;
  auto blockdiag = [&](const ZMat& X, const ZMat& Y) {
    ZMat Z = ZMat::zero(ring, 4, 4);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        Z.at(i, j) = X.at(i, j);
        Z.at(2 + i, 2 + j) = Y.at(i, j);
      }
    return Z;
  };
  MatrixComplex CA = build_matrix_complex({A, A2});
  MatrixComplex CB = build_matrix_complex({B, B2});
  MatrixComplex CS = build_matrix_complex({blockdiag(A, B), blockdiag(A2, B2)});
  for (std::size_t t = 0; t <= 2; ++t) {
    ModuleProfile sum = CA.cohomology(t);
    for (auto e : CB.cohomology(t).exps) sum.exps.push_back(e);
    std::sort(sum.exps.begin(), sum.exps.end(), std::greater<>());
    CHECK(CS.cohomology(t) == sum);
  }
}

TEST_CASE("element-level differentials square to zero") {
  std::mt19937_64 rng(13);
  for (std::uint32_t p : {2u, 3u}) {
    for (std::uint32_t n : {1u, 2u, 3u}) {
      auto* cx = ctxn(p, 2, n);
      EtalePhiGammaModule M = EtalePhiGammaModule::trivial(cx, 1).tate_twist();
      for (OperatorKind kind : {OperatorKind::Phi, OperatorKind::Gamma, OperatorKind::Psi}) {
        SubsetChain chain;
        chain[0] = random_poly_element(M, rng);
        if (n >= 2) chain[1] = random_poly_element(M, rng);
        SubsetChain dd = subset_differential(M, kind, subset_differential(M, kind, chain));
        for (const auto& [S, v] : dd) REQUIRE(element_is_zero(v));
      }
    }
  }
}

TEST_CASE("totalized differential squares to zero across bidegrees") {
  std::mt19937_64 rng(17);
  for (std::uint32_t p : {2u, 3u}) {
    for (std::uint32_t n : {1u, 2u, 3u}) {
      auto* cx = ctxn(p, 2, n);
      EtalePhiGammaModule twist = EtalePhiGammaModule::trivial(cx, 1).tate_twist();
      EtalePhiGammaModule M = EtalePhiGammaModule::direct_sum(twist, twist.tate_twist());
      HerrChain chain;
      chain[{0u, 0u}] = random_poly_element(M, rng);
      if (n >= 2) {
        chain[{1u, 0u}] = random_poly_element(M, rng);
        chain[{0u, 2u}] = random_poly_element(M, rng);
      }
      HerrChain dd = herr_differential(M, herr_differential(M, chain));
      for (const auto& [key, v] : dd) REQUIRE(element_is_zero(v));
    }
  }
}

TEST_CASE("chain pairing is adjoint between the phi and psi differentials") {
  // pair the component at S against the dual component at the complement;
  // the eta sign is exactly the complement-side eps, so the identity holds
  // with no extra sign
  std::mt19937_64 rng(19);
  for (std::uint32_t p : {2u, 3u}) {
    for (std::uint32_t n : {1u, 2u, 3u}) {
      auto* cx = ctxn(p, 2, n);
      EtalePhiGammaModule M =
          EtalePhiGammaModule::direct_sum(EtalePhiGammaModule::trivial(cx, 1),
                                          EtalePhiGammaModule::trivial(cx, 1).tate_twist());
      EtalePhiGammaModule Mdual = M.dual();
      std::uint32_t full = (1u << n) - 1;
      auto chain_pair = [&](const SubsetChain& x, const SubsetChain& y) {
        UnramCoeff acc = UnramCoeff::zero(cx->coeff);
        for (const auto& [S, xv] : x) {
          auto it = y.find(full & ~S);
          if (it != y.end()) acc = acc + pairing(xv, it->second);
        }
        return acc;
      };
      for (std::uint32_t r = 0; r < n; ++r) {
        SubsetChain x, y;
        for (std::uint32_t S : subsets_of_rank(n, r)) x[S] = random_poly_element(M, rng);
        for (std::uint32_t T : subsets_of_rank(n, n - r - 1))
          y[T] = random_poly_element(Mdual, rng);
        UnramCoeff lhs = chain_pair(subset_differential(M, OperatorKind::Phi, x), y);
        UnramCoeff rhs = chain_pair(x, subset_differential(Mdual, OperatorKind::Psi, y));
        REQUIRE(lhs == rhs);
      }
    }
  }
}

TEST_CASE("windowed operator matrices flag floor exits and keep columns exact") {
  auto* cx = ctxn(3, 2, 1);
  EtalePhiGammaModule M = EtalePhiGammaModule::trivial(cx, 1);
  WindowBasis B(cx, Window::box(1, -5, 4), 1);
  REQUIRE(B.dim == 10);

  WindowedOperator phi = assemble_operator(M, OperatorKind::Phi, 0, B);
  WindowedOperator gam = assemble_operator(M, OperatorKind::Gamma, 0, B);

  auto col_of = [&](std::int64_t k) {
    ExpVec e(1, Rat::of(k));
    return B.index(B.mono_index(e), 0, 0);
  };
  // phi sends k to support [3k - 2, 3k] for k < 0 and {3k} for k >= 0;
  // k = -1 lands on [-5, -3] and just fits, k = -2 reaches -8 and exits
  CHECK_FALSE(phi.low_exit[col_of(-1)]);
  CHECK(phi.low_exit[col_of(-2)]);
  CHECK(phi.low_exit[col_of(-4)]);
  CHECK(phi.exits[col_of(2)]);
  CHECK_FALSE(phi.low_exit[col_of(2)]);
  CHECK_FALSE(phi.exits[col_of(1)]);
  // gamma images start at the input exponent: no floor exits anywhere
  for (std::size_t j = 0; j < B.dim; ++j) CHECK_FALSE(gam.low_exit[j]);
  // spot-check an exact phi column: e_1 -> e_3
  ExpVec e1(1, Rat::of(1)), e3(1, Rat::of(3));
  const auto& row3 = phi.mat.row[B.index(B.mono_index(e3), 0, 0)];
  auto it = row3.find(static_cast<std::uint32_t>(col_of(1)));
  REQUIRE(it != row3.end());
  CHECK(it->second == 1);
}

TEST_CASE("truncated complexes have the expected shapes") {
  auto* cx1 = ctxn(3, 1, 1);
  EtalePhiGammaModule M1 = EtalePhiGammaModule::trivial(cx1, 1);
  Window W1 = Window::box(1, -3, 3);
  TruncatedComplex P = build_phi_complex(M1, W1);
  REQUIRE(P.degrees() == 2);
  CHECK(P.term_dim(0) == 7);
  CHECK(P.term_dim(1) == 7);
  TruncatedComplex H1 = build_herr(M1, W1);
  REQUIRE(H1.degrees() == 3);
  CHECK(H1.term_dim(1) == 2 * 7);

  auto* cx2 = ctxn(3, 1, 2);
  EtalePhiGammaModule M2 = EtalePhiGammaModule::trivial(cx2, 1);
  TruncatedComplex H2 = build_herr(M2, Window::box(2, -2, 2));
  REQUIRE(H2.degrees() == 5);
  std::size_t block = 25;
  CHECK(H2.term_dim(0) == 1 * block);
  CHECK(H2.term_dim(1) == 4 * block);
  CHECK(H2.term_dim(2) == 6 * block);
  CHECK(H2.term_dim(3) == 4 * block);
  CHECK(H2.term_dim(4) == 1 * block);
}

TEST_CASE("truncated differentials compose to zero on faithful columns") {
  for (std::uint32_t p : {2u, 3u}) {
    for (std::uint32_t n : {1u, 2u}) {
      auto* cx = ctxn(p, 2, n);
      EtalePhiGammaModule M = EtalePhiGammaModule::trivial(cx, 1).tate_twist();
      Window W = Window::box(n, -4, 4);
      for (ComplexKind kind :
           {ComplexKind::Phi, ComplexKind::Gamma, ComplexKind::Psi, ComplexKind::Herr}) {
        TruncatedComplex C = build_subset_complex(M, W, kind);
        for (std::size_t t = 0; t + 1 < C.d.size(); ++t) {
          CompositeReport rep = composite_check(C, t);
          INFO("p=" << p << " n=" << n << " kind=" << static_cast<int>(kind) << " t=" << t);
          CHECK(rep.all_zero);
          if (kind == ComplexKind::Gamma) CHECK(rep.skipped == 0);
          if (n == 1 || t > 0 || kind == ComplexKind::Gamma) continue;
          CHECK(rep.tested > 0);
        }
      }
    }
  }
}

TEST_CASE("degree zero cohomology of the trivial module is one cyclic copy") {
  for (std::uint32_t p : {3u, 5u}) {
    for (std::uint32_t m : {1u, 2u}) {
      for (std::uint32_t n : {1u, 2u}) {
        auto* cx = ctxn(p, m, n);
        EtalePhiGammaModule M = EtalePhiGammaModule::trivial(cx, 1);
        CohomologyProfile h0 = h0_exact(M, Window::box(n, -4, 4));
        INFO("p=" << p << " m=" << m << " n=" << n << ": " << h0.to_string(p));
        CHECK(h0.profile == ModuleProfile{{m}});
        CHECK(h0.stabilized);
      }
    }
  }
}

TEST_CASE("degree zero cohomology of a twist vanishes") {
  for (std::uint32_t p : {3u, 5u}) {
    for (std::uint32_t n : {1u, 2u}) {
      auto* cx = ctxn(p, 2, n);
      EtalePhiGammaModule M = EtalePhiGammaModule::trivial(cx, 1).tate_twist();
      CohomologyProfile h0 = h0_exact(M, Window::box(n, -4, 4));
      CHECK(h0.profile.trivial());
    }
  }
}

TEST_CASE("degree zero cohomology adds over direct sums") {
  auto* cx = ctxn(3, 2, 2);
  EtalePhiGammaModule T = EtalePhiGammaModule::trivial(cx, 1);
  EtalePhiGammaModule M = EtalePhiGammaModule::direct_sum(T, T);
  CohomologyProfile h0 = h0_exact(M, Window::box(2, -4, 4));
  CHECK(h0.profile == ModuleProfile{{2, 2}});
  EtalePhiGammaModule mixed = EtalePhiGammaModule::direct_sum(T, T.tate_twist());
  CHECK(h0_exact(mixed, Window::box(2, -4, 4)).profile == ModuleProfile{{2}});
}

TEST_CASE("windowed cohomology of the totalized complex matches the exact degree zero") {
  for (std::uint32_t p : {3u, 5u}) {
    auto* cx = ctxn(p, 2, 1);
    EtalePhiGammaModule M = EtalePhiGammaModule::trivial(cx, 1);
    auto profs = cohomology_stabilized(M, Window::box(1, -4, 4), ComplexKind::Herr);
    REQUIRE(profs.size() == 3);
    CHECK(profs[0].profile == ModuleProfile{{2}});
    CHECK(profs[0].stabilized);
    CHECK_FALSE(profs[0].experimental);
    CHECK(profs[1].experimental);
  }
}

TEST_CASE("span profile reads elementary divisors off the generators") {
  Zpm ring = Zpm::make(3, 2);
  ZMat K = ZMat::zero(ring, 3, 2);
  K.at(0, 0) = 3;
  K.at(1, 1) = 1;
  ModuleProfile pr = span_profile(K);
  CHECK(pr == ModuleProfile{{2, 1}});
  CHECK(span_profile(ZMat::zero(ring, 3, 0)).trivial());
}
