// Module layer: etale validation, operator actions, twists, duals, the
// residue pairing, and restriction of scalars from the unramified extension.

#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "phigamma/module.hpp"

using namespace phigamma;

namespace {

const SeriesContext* ctx1(std::uint32_t p, std::uint32_t m, std::uint32_t f = 1) {
  return SeriesContext::get(p, m, f, {"a"});
}
const SeriesContext* ctx2(std::uint32_t p, std::uint32_t m) {
  return SeriesContext::get(p, m, 1, {"a", "b"});
}

LaurentSeries var(const SeriesContext* cx, std::size_t i) {
  return LaurentSeries::variable(cx, i);
}
LaurentSeries one_plus_pi(const SeriesContext* cx, std::size_t i) {
  return LaurentSeries::one(cx) + var(cx, i);
}

LaurentSeries random_series(const SeriesContext* cx, std::mt19937_64& rng, int terms = 4,
                            std::int64_t lo = -2, std::int64_t hi = 3) {
  // claim the generator's floor as the hard support bound so products keep
  // a usable exactness window
  Window w = cx->default_window();
  for (std::size_t i = 0; i < cx->nvars(); ++i) w.bounds[i][0] = lo;
  LaurentSeries s = LaurentSeries::zero(cx).truncated(w);
  for (int t = 0; t < terms; ++t) {
    ExpVec e(cx->nvars(), Rat::of(0));
    for (std::size_t i = 0; i < cx->nvars(); ++i)
      e[i] = Rat::of(lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1)));
    s = s + LaurentSeries::monomial(cx, e, UnramCoeff::from_int(cx->coeff,
                                                                static_cast<std::int64_t>(rng() % 17) - 8))
                .truncated(w);
  }
  return s;
}

ModuleElement random_element(const EtalePhiGammaModule& M, std::mt19937_64& rng) {
  ModuleElement v;
  for (std::size_t i = 0; i < M.rank(); ++i) v.push_back(random_series(M.context(), rng));
  return v;
}

}  // namespace

TEST_CASE("etale validation certifies units and rejects p-divisible matrices") {
  const SeriesContext* cx = ctx1(3, 2);

  CHECK(EtalePhiGammaModule::trivial(cx, 2).validate_etale().ok());

  auto scaled_id = [&](const LaurentSeries& s) {
    std::vector<SeriesMat> F(1, SeriesMat::scalar(cx, 1, s));
    std::vector<SeriesMat> id(1, SeriesMat::identity(cx, 1));
    return EtalePhiGammaModule(cx, 1, F, id, id);
  };

  EtaleReport bad = scaled_id(LaurentSeries::constant(cx, UnramCoeff::from_int(cx->coeff, 3)))
                        .validate_etale();
  CHECK(bad.status == EtaleStatus::NotEtale);

  EtalePhiGammaModule mono = scaled_id(var(cx, 0));
  CHECK(mono.validate_etale().ok());
  // the certified inverse of pi is pi^{-1}: psi(F^{-1} * pi) = psi(1) = 1
  ModuleElement e{var(cx, 0)};
  ModuleElement w = mono.apply_psi(0, e);
  CHECK(agree_on_overlap(w[0], LaurentSeries::one(cx)));

  // unit determinant without a unit in the corner still inverts
  SeriesMat F2 = SeriesMat::zero(cx, 2);
  F2.at(0, 0) = LaurentSeries::constant(cx, UnramCoeff::from_int(cx->coeff, 3));
  F2.at(0, 1) = LaurentSeries::one(cx);
  F2.at(1, 0) = LaurentSeries::one(cx);
  F2.at(1, 1) = LaurentSeries::constant(cx, UnramCoeff::from_int(cx->coeff, 3));
  MatInversion inv = invert_series_matrix(F2);
  REQUIRE(inv.status == EtaleStatus::Etale);

  SeriesMat S2 = SeriesMat::zero(cx, 2);
  S2.at(0, 0) = LaurentSeries::constant(cx, UnramCoeff::from_int(cx->coeff, 3));
  S2.at(1, 0) = LaurentSeries::constant(cx, UnramCoeff::from_int(cx->coeff, 6));
  S2.at(0, 1) = LaurentSeries::one(cx);
  S2.at(1, 1) = LaurentSeries::one(cx);
  CHECK(invert_series_matrix(S2).status == EtaleStatus::NotEtale);
}

TEST_CASE("commutation relations hold for good data and fail with a witness") {
  const SeriesContext* cx = ctx2(3, 2);

  CHECK(EtalePhiGammaModule::trivial(cx, 2).validate_commutation().ok);
  CHECK(EtalePhiGammaModule::trivial(cx, 1).tate_twist().validate_commutation().ok);

  // F_a = 1 + pi_a, F_b = 1: both sides of the phi relation equal 1 + pi_a
  std::vector<SeriesMat> F{SeriesMat::scalar(cx, 1, one_plus_pi(cx, 0)),
                           SeriesMat::identity(cx, 1)};
  std::vector<SeriesMat> id(2, SeriesMat::identity(cx, 1));
  EtalePhiGammaModule good(cx, 1, F, id, id);
  SeriesMat lhs = good.frobenius_matrix(0) * good.phi_entries(0, good.frobenius_matrix(1));
  SeriesMat rhs = good.frobenius_matrix(1) * good.phi_entries(1, good.frobenius_matrix(0));
  CHECK_FALSE(matrix_disagreement(lhs, rhs).has_value());

  // F_b touching pi_a breaks the (F_a, F_b) relation
  std::vector<SeriesMat> Fbad{SeriesMat::scalar(cx, 1, one_plus_pi(cx, 0)),
                              SeriesMat::scalar(cx, 1, one_plus_pi(cx, 0))};
  EtalePhiGammaModule bad(cx, 1, Fbad, id, id);
  CommutationReport rep = bad.validate_commutation();
  CHECK_FALSE(rep.ok);
  CHECK(rep.note.find("F_a") != std::string::npos);
  CHECK(rep.note.find("F_b") != std::string::npos);
  CHECK(rep.note.find("monomial") != std::string::npos);
}

TEST_CASE("operator actions on elements follow the semilinear convention") {
  const SeriesContext* cx = ctx1(3, 2);
  EtalePhiGammaModule triv = EtalePhiGammaModule::trivial(cx, 1);
  ModuleElement one{LaurentSeries::one(cx)};
  CHECK(element_agrees(triv.apply_phi(0, one), one));

  EtalePhiGammaModule M = EtalePhiGammaModule::rank1(cx, one_plus_pi(cx, 0));
  CHECK(element_agrees(M.apply_phi(0, one), ModuleElement{one_plus_pi(cx, 0)}));

  ModuleElement pi{var(cx, 0)};
  LaurentSeries expect = one_plus_pi(cx, 0) * phi_alpha(var(cx, 0), 0);
  CHECK(element_agrees(M.apply_phi(0, pi), ModuleElement{expect}));

  // psi kills (1+pi)^{-j} for 1 <= j < p
  for (std::uint64_t j = 1; j < 3; ++j) {
    LaurentSeries fj = LaurentSeries::one(cx);
    for (std::uint64_t t = 0; t < j; ++t) fj = fj * one_plus_pi(cx, 0);
    EtalePhiGammaModule Mj = EtalePhiGammaModule::rank1(cx, fj);
    ModuleElement out = Mj.apply_psi(0, one);
    CHECK(out[0].is_zero());
  }
}

TEST_CASE("psi is a section of phi on random module elements") {
  std::mt19937_64 rng(42);
  for (auto [p, m] : {std::pair<std::uint32_t, std::uint32_t>{2, 2}, {3, 2}}) {
    const SeriesContext* cx = ctx2(p, m);
    std::vector<SeriesMat> F{SeriesMat::scalar(cx, 1, one_plus_pi(cx, 0)),
                             SeriesMat::scalar(cx, 1, var(cx, 1))};
    std::vector<SeriesMat> id(2, SeriesMat::identity(cx, 1));
    EtalePhiGammaModule M(cx, 1, F, id, id);
    for (int trial = 0; trial < 8; ++trial) {
      ModuleElement x = random_element(M, rng);
      for (std::size_t a = 0; a < 2; ++a)
        CHECK(element_agrees(M.apply_psi(a, M.apply_phi(a, x)), x));
    }
  }
}

TEST_CASE("Tate twist scales the group matrices by the character values") {
  const SeriesContext* cx = ctx1(3, 2);
  EtalePhiGammaModule tw = EtalePhiGammaModule::trivial(cx, 1).tate_twist();
  // chi(gamma) = 1 + p = 4
  CHECK(tw.gamma_matrix(0).at(0, 0) ==
        LaurentSeries::constant(cx, UnramCoeff::from_int(cx->coeff, 4)));
  EtalePhiGammaModule tw2 = tw.tate_twist();
  CHECK(tw2.gamma_matrix(0).at(0, 0) ==
        LaurentSeries::constant(cx, UnramCoeff::from_int(cx->coeff, 16 % 9)));
  CHECK(tw2.validate_etale().ok());
  CHECK(tw2.validate_commutation().ok);

  // the torsion matrix picks up the Teichmueller value: order p-1, not 1
  LaurentSeries tau = tw.torsion_matrix(0).at(0, 0);
  CHECK_FALSE(tau == LaurentSeries::one(cx));
  BigInt w = EtalePhiGammaModule::standard_tau_value(3, 2);
  CHECK(powmod_big(w, BigInt(2), bigint_pow(BigInt(3), 2)) == 1);
  CHECK(w % 3 == 2);
}

TEST_CASE("dual inverts transposes and the double dual returns") {
  const SeriesContext* cx = ctx1(3, 2);
  EtalePhiGammaModule triv = EtalePhiGammaModule::trivial(cx, 1);
  EtalePhiGammaModule td = triv.dual();
  CHECK(td.frobenius_matrix(0).at(0, 0) == LaurentSeries::one(cx));

  EtalePhiGammaModule M = EtalePhiGammaModule::rank1(cx, one_plus_pi(cx, 0));
  EtalePhiGammaModule Md = M.dual();
  CHECK((Md.frobenius_matrix(0).at(0, 0) * one_plus_pi(cx, 0) - LaurentSeries::one(cx))
            .is_zero());
  EtalePhiGammaModule Mdd = Md.dual();
  CHECK(agree_on_overlap(Mdd.frobenius_matrix(0).at(0, 0), M.frobenius_matrix(0).at(0, 0)));
}

TEST_CASE("residue pairing: evaluation, normalization, and phi/psi adjointness") {
  const SeriesContext* cx = ctx2(3, 2);
  std::mt19937_64 rng(7);

  // rank-1 trivial: {f v, g v*} = res(f g)
  for (int trial = 0; trial < 10; ++trial) {
    LaurentSeries f = random_series(cx, rng), g = random_series(cx, rng);
    CHECK(pairing(ModuleElement{f}, ModuleElement{g}) == residue(f * g));
  }

  // {prod (1+X)/X . v, v*} = 1
  LaurentSeries u = LaurentSeries::one(cx);
  for (std::size_t i = 0; i < 2; ++i) {
    ExpVec e(2, Rat::of(0));
    e[i] = Rat::of(-1);
    u = u * (one_plus_pi(cx, i).shifted(e));
  }
  CHECK(pairing(ModuleElement{u}, ModuleElement{LaurentSeries::one(cx)}) ==
        UnramCoeff::one(cx->coeff));

  // adjointness through a nontrivial rank-2 Frobenius
  SeriesMat F = SeriesMat::zero(cx, 2);
  F.at(0, 0) = one_plus_pi(cx, 0);
  F.at(0, 1) = LaurentSeries::one(cx);
  F.at(1, 0) = var(cx, 0);
  F.at(1, 1) = LaurentSeries::one(cx);
  std::vector<SeriesMat> Fs{F, SeriesMat::scalar(cx, 2, var(cx, 1))};
  std::vector<SeriesMat> id(2, SeriesMat::identity(cx, 2));
  EtalePhiGammaModule M(cx, 2, Fs, id, id);
  REQUIRE(M.validate_etale().ok());
  EtalePhiGammaModule Md = M.dual();
  for (int trial = 0; trial < 6; ++trial) {
    ModuleElement x = random_element(M, rng), y = random_element(Md, rng);
    for (std::size_t a = 0; a < 2; ++a)
      CHECK(pairing(M.apply_phi(a, x), y) == pairing(x, Md.apply_psi(a, y)));
  }
}

TEST_CASE("residue transforms by the inverse character under gamma") {
  // frozen convention, confirmed by truncated brute force: res(gamma_c f) = c^{-1} res(f)
  std::mt19937_64 rng(11);
  for (auto [p, m] : {std::pair<std::uint32_t, std::uint32_t>{3, 2}, {2, 3}, {5, 1}}) {
    const SeriesContext* cx = ctx2(p, m);
    BigInt c = EtalePhiGammaModule::standard_gamma_value(p);
    UnramCoeff cinv = UnramCoeff(cx->coeff, c).inv_unit();
    for (int trial = 0; trial < 12; ++trial) {
      LaurentSeries f = random_series(cx, rng, 5, -3, 3);
      for (std::size_t a = 0; a < 2; ++a)
        CHECK(residue(gamma_alpha(f, a, c)) == residue(f) * cinv);
    }
  }
}

TEST_CASE("pairing is invariant under gamma on the twisted dual") {
  const SeriesContext* cx = ctx1(3, 2);
  std::mt19937_64 rng(13);
  EtalePhiGammaModule M = EtalePhiGammaModule::rank1(cx, one_plus_pi(cx, 0));
  EtalePhiGammaModule Mdt = M.dual().tate_twist();
  for (int trial = 0; trial < 10; ++trial) {
    ModuleElement x = random_element(M, rng), y = random_element(Mdt, rng);
    CHECK(pairing(M.apply_gamma(0, x), Mdt.apply_gamma(0, y)) == pairing(x, y));
  }
}

TEST_CASE("direct sum and tensor compose ranks and matrices") {
  const SeriesContext* cx = ctx1(3, 2);
  EtalePhiGammaModule A = EtalePhiGammaModule::rank1(cx, one_plus_pi(cx, 0));
  EtalePhiGammaModule B = EtalePhiGammaModule::trivial(cx, 1).tate_twist();

  EtalePhiGammaModule S = EtalePhiGammaModule::direct_sum(A, B);
  CHECK(S.rank() == 2);
  CHECK(S.frobenius_matrix(0).at(0, 0) == A.frobenius_matrix(0).at(0, 0));
  CHECK(S.gamma_matrix(0).at(1, 1) == B.gamma_matrix(0).at(0, 0));
  CHECK(S.frobenius_matrix(0).at(0, 1).is_zero());

  EtalePhiGammaModule P = EtalePhiGammaModule::tensor(A, B);
  CHECK(P.rank() == 1);
  // twist(M (x) N) = twist(M) (x) N
  EtalePhiGammaModule lhs = EtalePhiGammaModule::tensor(A, B).tate_twist();
  EtalePhiGammaModule rhs = EtalePhiGammaModule::tensor(A.tate_twist(), B);
  CHECK(lhs.gamma_matrix(0).at(0, 0) == rhs.gamma_matrix(0).at(0, 0));
  // a product of twists is a complete, relation-satisfying module
  CHECK(EtalePhiGammaModule::tensor(B, B).validate_commutation().ok);

  // summing with the rank-0 module changes nothing
  EtalePhiGammaModule Z = EtalePhiGammaModule::trivial(cx, 0);
  EtalePhiGammaModule S0 = EtalePhiGammaModule::direct_sum(A, Z);
  CHECK(S0.rank() == 1);
  CHECK(S0.frobenius_matrix(0).at(0, 0) == A.frobenius_matrix(0).at(0, 0));
}

TEST_CASE("restriction of scalars from the unramified extension") {
  const SeriesContext* cx = ctx1(3, 2, 2);
  EtalePhiGammaModule M = EtalePhiGammaModule::trivial(cx, 1);
  EtalePhiGammaModule Ind = M.induct_unramified();
  CHECK(Ind.rank() == 2);
  CHECK(Ind.context()->f() == 1);

  // identity functor at f = 1
  const SeriesContext* cx1f = ctx1(3, 2);
  EtalePhiGammaModule N = EtalePhiGammaModule::rank1(cx1f, one_plus_pi(cx1f, 0));
  EtalePhiGammaModule NInd = N.induct_unramified();
  CHECK(NInd.rank() == 1);
  CHECK(NInd.frobenius_matrix(0).at(0, 0) == N.frobenius_matrix(0).at(0, 0));

  // the induced Frobenius block is the matrix of the coefficient Frobenius on
  // the theta-power basis; group blocks are the identity
  const UnramContext* uc = cx->coeff;
  for (std::uint32_t s = 0; s < 2; ++s) {
    UnramCoeff img = UnramCoeff::theta(uc).pow(s).frobenius();
    for (std::uint32_t t = 0; t < 2; ++t) {
      LaurentSeries entry = Ind.frobenius_matrix(0).at(t, s);
      UnramCoeff got = entry.is_zero() ? UnramCoeff::zero(Ind.context()->coeff)
                                       : entry.coeff_at(ExpVec(1, Rat::of(0)));
      CHECK(got.coeff(0) == img.coeff(t));
    }
  }
  CHECK(Ind.gamma_matrix(0).at(0, 0) == LaurentSeries::one(Ind.context()));
  CHECK(Ind.gamma_matrix(0).at(0, 1).is_zero());
  CHECK(Ind.validate_etale().ok());
  CHECK(Ind.validate_commutation().ok);

  // functoriality: induction commutes with direct sums and twists
  EtalePhiGammaModule M2 = EtalePhiGammaModule::trivial(cx, 1).tate_twist();
  EtalePhiGammaModule lhs = EtalePhiGammaModule::direct_sum(M, M2).induct_unramified();
  EtalePhiGammaModule rhs =
      EtalePhiGammaModule::direct_sum(M.induct_unramified(), M2.induct_unramified());
  CHECK(lhs.rank() == rhs.rank());
  for (std::size_t i = 0; i < lhs.rank(); ++i)
    for (std::size_t j = 0; j < lhs.rank(); ++j) {
      CHECK(agree_on_overlap(lhs.frobenius_matrix(0).at(i, j), rhs.frobenius_matrix(0).at(i, j)));
      CHECK(agree_on_overlap(lhs.gamma_matrix(0).at(i, j), rhs.gamma_matrix(0).at(i, j)));
    }
  EtalePhiGammaModule tl = M2.induct_unramified();
  EtalePhiGammaModule tr = M.induct_unramified().tate_twist();
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      CHECK(agree_on_overlap(tl.gamma_matrix(0).at(i, j), tr.gamma_matrix(0).at(i, j)));
}
