#include <catch2/catch_amalgamated.hpp>

#include "phigamma/module.hpp"
#include "phigamma/textio.hpp"

using namespace phigamma;

TEST_CASE("series text emits canonically and parses back") {
  const SeriesContext* cx = SeriesContext::get(3, 2, 2, {"a", "b"});
  LaurentSeries s = LaurentSeries::monomial(
      cx, {Rat::of(-2), Rat::of(1)}, UnramCoeff::one(cx->coeff).scale(3));
  s = s + LaurentSeries::monomial(cx, {Rat::of(0), Rat::of(0)},
                                  UnramCoeff::from_rep(cx->coeff, {7, 2}));
  std::string text = series_to_text(s);
  CHECK(text == "3*pi_a^-2*pi_b + 7 + 2*t");
  LaurentSeries back = series_from_text(cx, text);
  CHECK(back.terms() == s.terms());

  CHECK(series_to_text(LaurentSeries::zero(cx)) == "0");
  CHECK(series_from_text(cx, "0").terms().empty());
}

TEST_CASE("series text accepts unsorted input, folds repeats, handles signs") {
  const SeriesContext* cx = SeriesContext::get(5, 2, 1, {"x"});
  LaurentSeries s = series_from_text(cx, "2*pi_x + 3 - pi_x + pi_x^2*4");
  CHECK(series_to_text(s) == "3 + pi_x + 4*pi_x^2");
  LaurentSeries t = series_from_text(cx, "-3 + 2*pi_x^-1");
  CHECK(series_to_text(t) == "2*pi_x^-1 + 22");
}

TEST_CASE("fractional exponents round trip in perfect mode") {
  const SeriesContext* cx = SeriesContext::get(3, 1, 1, {"x"}, SeriesMode::Perfect);
  LaurentSeries s = series_from_text(cx, "2*pi_x^(1/3) + pi_x^(-4/9)");
  std::string text = series_to_text(s);
  CHECK(text == "pi_x^(-4/9) + 2*pi_x^(1/3)");
  CHECK(series_from_text(cx, text).terms() == s.terms());
}

TEST_CASE("series text rejects malformed input") {
  const SeriesContext* cx = SeriesContext::get(3, 1, 1, {"x"});
  CHECK_THROWS_AS(series_from_text(cx, "pi_y"), schema_error);
  CHECK_THROWS_AS(series_from_text(cx, "2**3"), schema_error);
  CHECK_THROWS_AS(series_from_text(cx, "q + 1"), schema_error);
  CHECK_THROWS_AS(series_from_text(cx, "t^-1"), schema_error);
  CHECK_THROWS_AS(series_from_text(cx, "pi_x^(1/"), schema_error);
}

TEST_CASE("coefficient text round trips") {
  const UnramContext* cx = UnramContext::get(2, 2, 3);
  UnramCoeff c = UnramCoeff::from_rep(cx, {3, 0, 1});
  std::string text = coeff_to_text(c);
  CHECK(text == "3 + t^2");
  CHECK(coeff_from_text(cx, text) == c);
  CHECK(coeff_to_text(UnramCoeff::zero(cx)) == "0");
  CHECK(coeff_from_text(cx, "0") == UnramCoeff::zero(cx));
  CHECK_THROWS_AS(coeff_from_text(cx, "pi_internal"), schema_error);
}

TEST_CASE("series module json round trip is byte exact") {
  const SeriesContext* cx = SeriesContext::get(3, 2, 1, {"x", "y"});
  EtalePhiGammaModule M = EtalePhiGammaModule::trivial(cx, 1).tate_twist();
  Json j = module_to_json(M);
  std::string dump = canonical_dump(j);
  EtalePhiGammaModule back = module_from_json(Json::parse(dump));
  CHECK(back.context() == cx);
  CHECK(back.rank() == M.rank());
  CHECK(canonical_dump(module_to_json(back)) == dump);
  CHECK(back.provenance() == M.provenance());
}

TEST_CASE("finite module json round trip is byte exact") {
  FiniteBase B = FiniteBase::make(3, 2, {2, 2});
  GaloisRepFin V;
  V.ring = B.ring;
  V.rank = 1;
  ZMat c4 = ZMat::identity(B.ring, 1);
  c4.at(0, 0) = 4;
  ZMat c7 = ZMat::identity(B.ring, 1);
  c7.at(0, 0) = 7;
  V.rho = {c4, c7};
  PhiModFin D = functor_D(B, V);
  Json j = finite_module_to_json(D);
  std::string dump = canonical_dump(j);
  PhiModFin back = finite_module_from_json(Json::parse(dump));
  CHECK(back.base == D.base);
  CHECK(back.rank == D.rank);
  for (std::uint32_t a = 0; a < B.n; ++a)
    for (std::size_t c = 0; c < B.g; ++c) CHECK(umat_equal(back.F[a][c], D.F[a][c]));
  CHECK(canonical_dump(finite_module_to_json(back)) == dump);
}

TEST_CASE("galois rep json round trip is byte exact") {
  GaloisRepFin V;
  V.ring = Zpm::make(2, 2);
  V.rank = 2;
  ZMat r = ZMat::identity(V.ring, 2);
  r.at(0, 1) = 1;
  V.rho = {r};
  std::string dump = canonical_dump(galois_rep_to_json(V));
  GaloisRepFin back = galois_rep_from_json(Json::parse(dump));
  CHECK(back.rank == 2);
  CHECK(back.rho[0] == r);
  CHECK(canonical_dump(galois_rep_to_json(back)) == dump);
}

TEST_CASE("toml subset normalizes to the same canonical json") {
  std::string toml =
      "# hand-written fixture\n"
      "kind = \"galois_rep\"\n"
      "p = 2            # the prime\n"
      "m = 2\n"
      "nvars = 1\n"
      "rank = 2\n"
      "rho = [[[1, 1], [0, 1]]]\n";
  Json j = load_fixture_text(toml, "fixture.toml");
  GaloisRepFin V = galois_rep_from_json(j);
  CHECK(V.rho[0].at(0, 1) == 1);
  std::string native = canonical_dump(galois_rep_to_json(V));
  Json j2 = load_fixture_text(native, "fixture.json");
  CHECK(canonical_dump(galois_rep_to_json(galois_rep_from_json(j2))) == native);
}

TEST_CASE("toml tables, strings with escapes, booleans") {
  std::string toml =
      "[run.options]\n"
      "format = \"json\"\n"
      "experimental = true\n"
      "label = \"say \\\"hi\\\"\"\n"
      "window = [-4, 4]\n";
  Json j = parse_toml(toml);
  CHECK(j["run"]["options"]["format"] == "json");
  CHECK(j["run"]["options"]["experimental"] == true);
  CHECK(j["run"]["options"]["label"] == "say \"hi\"");
  CHECK(j["run"]["options"]["window"][0] == -4);
  CHECK_THROWS_AS(parse_toml("key 5\n"), schema_error);
  CHECK_THROWS_AS(parse_toml("[broken\n"), schema_error);
}

TEST_CASE("fixture loader reports parse failures as schema errors") {
  CHECK_THROWS_AS(load_fixture_text("{not json", "x.json"), schema_error);
  CHECK_THROWS_AS(module_from_json(Json{{"kind", "other"}}), schema_error);
  CHECK_THROWS_AS(finite_module_from_json(Json{{"kind", "other"}}), schema_error);
  CHECK_THROWS_AS(galois_rep_from_json(Json{{"kind", "other"}}), schema_error);
}
