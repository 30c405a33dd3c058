// JSON/CSV serialization: schema round-trips, infinity handling, rejection of
// malformed input, and byte-determinism of emitted reports.

#include <catch2/catch_amalgamated.hpp>

#include "embedkit/json_io.hpp"

using namespace embedkit;
using jsonio::json;

TEST_CASE("infinite exponents travel as strings", "[jsonio]") {
  CHECK(jsonio::num_to_json(kInf) == json("inf"));
  CHECK(jsonio::num_to_json(-kInf) == json("-inf"));
  CHECK(jsonio::num_to_json(2.5) == json(2.5));
  CHECK(jsonio::num_to_json(kNaN).is_null());

  CHECK(jsonio::num_from_json(json("inf"), "x") == kInf);
  CHECK(jsonio::num_from_json(json("-inf"), "x") == -kInf);
  CHECK(jsonio::num_from_json(json(3), "x") == 3.0);
  CHECK(std::isnan(jsonio::num_from_json(json(nullptr), "x")));
  CHECK_THROWS_AS(jsonio::num_from_json(json("wide"), "x"), InvalidSpec);
}

TEST_CASE("weight json round-trips preserve the catalog key", "[jsonio]") {
  const std::vector<weights::Weight> ws = {
      weights::Weight::constant(2, 3.5),
      weights::Weight::radial_power(1, 0.5, -0.25),
      weights::Weight::partial_radial_power(1, 1, 0.75, 0.0),
      weights::Weight::product_power({1, 1}, {0.5, -0.5}),
      weights::Weight::distance_power(2, weights::Manifold::sphere({0.0, 0.0}, 1.0), 0.5),
      weights::Weight::distance_power(3, weights::Manifold::circle3d({0.0, 0.0, 0.0}, 1.0), -0.5),
      weights::Weight::radial_power(1, 0.5, 0.5).scaled(2.0),
  };
  for (const auto& w : ws) {
    const json j = jsonio::weight_to_json(w);
    const auto back = jsonio::weight_from_json(j);
    CHECK(back.key() == w.key());
    CHECK(back.dim() == w.dim());
    CHECK(back.scale() == w.scale());
    // serialization is stable: dump(to_json(from_json(...))) is a fixed point
    CHECK(jsonio::weight_to_json(back).dump() == j.dump());
  }
}

TEST_CASE("custom weights are rejected in both directions", "[jsonio]") {
  const auto w = weights::Weight::custom(1, [](std::span<const double>) { return 1.0; });
  CHECK_THROWS_AS(jsonio::weight_to_json(w), InvalidSpec);
  CHECK_THROWS_AS(jsonio::weight_from_json(json{{"family", "custom"}, {"d", 1}}), InvalidSpec);
  CHECK_THROWS_AS(jsonio::weight_from_json(json{{"family", "nope"}, {"d", 1}}), InvalidSpec);
  CHECK_THROWS_AS(jsonio::weight_from_json(json{{"family", "radial_power"}, {"d", 1}}),
                  json::exception);  // missing alpha/beta
}

TEST_CASE("space and query round-trips, including q = inf", "[jsonio]") {
  criteria::SpaceSpec src;
  src.scale = criteria::Scale::Besov;
  src.s = 1.25;
  src.p = 2.0;
  src.q = kInf;
  src.weight = weights::Weight::radial_power(1, 0.5, 0.5);
  criteria::SpaceSpec tgt;
  tgt.scale = criteria::Scale::TriebelLizorkin;
  tgt.s = 0.0;
  tgt.p = 4.0;
  tgt.q = 2.0;
  tgt.weight = weights::Weight::constant(1);

  const criteria::EmbeddingQuery q{src, tgt};
  const json j = jsonio::query_to_json(q);
  CHECK(j.at("source").at("q") == json("inf"));
  const auto back = jsonio::query_from_json(j);
  CHECK(back.source.scale == criteria::Scale::Besov);
  CHECK(back.source.q == kInf);
  CHECK(back.target.p == 4.0);
  CHECK(back.target.weight.key() == tgt.weight.key());

  // a space may give "d" instead of a weight: defaults to the unweighted case
  const json bare = {{"scale", "bessel_potential"}, {"s", 1.0}, {"p", 2.0}, {"d", 2}};
  const auto sp = jsonio::space_from_json(bare);
  CHECK(sp.weight.key() == weights::Weight::constant(2).key());
  CHECK_FALSE(sp.uses_q());

  const json none = {{"scale", "besov"}, {"s", 1.0}, {"p", 2.0}};
  CHECK_THROWS_AS(jsonio::space_from_json(none), InvalidSpec);
  const json badscale = {{"scale", "hardy"}, {"s", 1.0}, {"p", 2.0}, {"d", 1}};
  CHECK_THROWS_AS(jsonio::space_from_json(badscale), InvalidSpec);
}

TEST_CASE("window and policy objects override a base", "[jsonio]") {
  const dyadic::Window base = dyadic::Window::defaults(2);
  const json j = {{"nu_max", 5}, {"radius_cap", nullptr}, {"filter", "far"}, {"budget", 1234}};
  const auto w = jsonio::window_from_json(j, base);
  CHECK(w.nu_max == 5);
  CHECK_FALSE(w.radius_cap.has_value());
  REQUIRE(w.filter.has_value());
  CHECK(*w.filter == dyadic::Region::Far);
  CHECK(w.budget == 1234);
  CHECK(w.radius_factor == base.radius_factor);

  const auto round = jsonio::window_from_json(jsonio::window_to_json(w), dyadic::Window{});
  CHECK(round.nu_max == w.nu_max);
  CHECK(round.radius_cap == w.radius_cap);
  CHECK(round.filter == w.filter);

  CHECK_THROWS_AS(jsonio::window_from_json(json{{"filter", "everywhere"}}, base), InvalidSpec);

  criteria::EvalPolicy pol;
  const json pj = {{"slope_threshold", 0.05}, {"quad", {{"rel_tol", 1e-6}}}, {"threads", 2}};
  const auto p = jsonio::policy_from_json(pj, pol);
  CHECK(p.slope_threshold == 0.05);
  CHECK(p.quad.rel_tol == 1e-6);
  CHECK(p.quad.max_depth == pol.quad.max_depth);
  CHECK(p.threads == 2);
  const auto pr = jsonio::policy_from_json(jsonio::policy_to_json(p), criteria::EvalPolicy{});
  CHECK(pr.slope_threshold == p.slope_threshold);
  CHECK(pr.quad.rel_tol == p.quad.rel_tol);
}

TEST_CASE("verdict serialization carries evidence", "[jsonio]") {
  criteria::Verdict v;
  v.outcome = criteria::Outcome::Holds;
  v.rule = "closed_form";
  v.closed_form = true;
  v.evidence.sup_value = 0.5;
  v.evidence.log2_sup = -1.0;
  v.evidence.witness = dyadic::Cube{3, {1, -2}};
  v.evidence.slopes.push_back({"far", dyadic::SlopeFit{-0.5, 1.0, 0.01, 6}});
  v.evidence.margins.push_back({"smoothness_gap", 0.25});
  v.evidence.notes.push_back("note");

  const json j = jsonio::verdict_to_json(v);
  CHECK(j.at("outcome") == json("holds"));
  CHECK(j.at("evidence").at("witness").at("nu") == json(3));
  CHECK(j.at("evidence").at("witness").at("m")[1] == json(-2));
  CHECK(j.at("evidence").at("slopes")[0].at("name") == json("far"));
  CHECK(j.at("evidence").at("slopes")[0].at("slope") == json(-0.5));
  CHECK(j.at("evidence").at("margins")[0].at("value") == json(0.25));

  criteria::Verdict empty;
  empty.evidence.log2_sup = -kInf;
  const json je = jsonio::verdict_to_json(empty);
  CHECK(je.at("evidence").at("witness").is_null());
  CHECK(je.at("evidence").at("log2_sup") == json("-inf"));
}

TEST_CASE("sweep json and csv are deterministic", "[jsonio]") {
  const auto grid = criteria::unweighted_grid(1);
  std::vector<criteria::EmbeddingQuery> queries(grid.begin(), grid.begin() + 4);
  const auto rep = criteria::cross_validate(queries, dyadic::Window::defaults(1));

  const json j1 = jsonio::sweep_to_json(rep);
  const json j2 = jsonio::sweep_to_json(rep);
  CHECK(j1.dump() == j2.dump());
  CHECK(j1.at("rows").size() == 4);
  CHECK(j1.at("rows")[0].at("index") == json(0));

  const std::string csv = jsonio::sweep_to_csv(rep);
  CHECK(csv.rfind("# embedkit sweep csv v1\n", 0) == 0);
  CHECK(csv == jsonio::sweep_to_csv(rep));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2 + 4);  // header comment + columns + rows
}

TEST_CASE("grid json selects standards and overrides", "[jsonio]") {
  const auto g = jsonio::grid_from_json(json{{"d", 2}}, oracle::Grid::standard(1));
  CHECK(g.d == 2);
  CHECK(g.N == oracle::Grid::standard(2).N);
  const auto h = jsonio::grid_from_json(json{{"d", 1}, {"N", 4096}, {"L", 4.0}},
                                        oracle::Grid::standard(1));
  CHECK(h.N == 4096);
  CHECK(h.L == 4.0);
  CHECK_THROWS_AS(jsonio::grid_from_json(json{{"N", 100}}, oracle::Grid::standard(1)),
                  InvalidSpec);
  const auto r = jsonio::grid_from_json(jsonio::grid_to_json(h), oracle::Grid::standard(1));
  CHECK(r == h);
}

TEST_CASE("field descriptors reproduce the factory functions", "[jsonio]") {
  const oracle::Grid g{1, 8.0, 1 << 10};

  const auto tone = jsonio::field_from_descriptor(json{{"kind", "tone"}, {"j", {3}}}, g);
  const std::vector<int> j3 = {3};
  const auto tref = oracle::make_tone(g, j3);
  REQUIRE(tone.values.size() == tref.values.size());
  CHECK(tone.values == tref.values);

  const auto atom =
      jsonio::field_from_descriptor(json{{"kind", "atom"}, {"nu", 3}, {"m", {2}}}, g);
  const std::vector<int> m = {2};
  CHECK(atom.values == oracle::make_atom(g, 3, m).values);

  const auto rnd = jsonio::field_from_descriptor(
      json{{"kind", "random"}, {"seed", 7}, {"band", 4.0}}, g);
  oracle::RandomFieldOptions opt;
  opt.band = 4.0;
  CHECK(rnd.values == oracle::random_bandlimited(g, 7, opt).values);

  const auto gs = jsonio::field_from_descriptor(
      json{{"kind", "gaussian"}, {"center", {0.5}}, {"sigma", 0.25}}, g);
  const std::vector<double> c = {0.5};
  CHECK(gs.values == oracle::make_gaussian(g, c, 0.25).values);

  CHECK_THROWS_AS(jsonio::field_from_descriptor(json{{"kind", "comb"}}, g), InvalidSpec);
}

TEST_CASE("probe and gn reports serialize with versioned csv headers", "[jsonio]") {
  criteria::EmbeddingQuery q;
  q.source = {criteria::Scale::TriebelLizorkin, 1.0, 2.0, 2.0, weights::Weight::constant(1)};
  q.target = {criteria::Scale::TriebelLizorkin, 0.0, 2.0, 2.0, weights::Weight::constant(1)};
  oracle::ProbeOptions opt;
  opt.grid = oracle::Grid{1, 8.0, 1 << 10};
  opt.nu_min = 2;
  opt.nu_max = 4;
  const auto rep = oracle::embedding_ratio_probe(q, opt);

  const json j = jsonio::probe_to_json(rep);
  CHECK(j.at("conclusion") == json("consistent_with_holds"));
  CHECK(j.at("lines").size() == 3);
  CHECK(j.at("lines")[0].at("samples").size() == 3);
  CHECK(j.dump() == jsonio::probe_to_json(rep).dump());

  const std::string csv = jsonio::probe_to_csv(rep);
  CHECK(csv.rfind("# embedkit probe csv v1\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2 + 3 * 3);

  oracle::GnSpec spec;  // defaults interpolate H^1_2 with L^2
  const auto batch = oracle::gn_batch(oracle::Grid{1, 8.0, 1 << 10}, spec, 3, 99);
  const json gj = jsonio::gn_to_json(spec, batch);
  CHECK(gj.at("count") == json(3));
  CHECK(gj.at("results").size() == 3);
  CHECK(gj.at("interpolated").contains("p"));
  const std::string gcsv = jsonio::gn_to_csv(batch);
  CHECK(gcsv.rfind("# embedkit gn csv v1\n", 0) == 0);
  CHECK(gcsv == jsonio::gn_to_csv(batch));
}

TEST_CASE("ap estimates serialize classification and argmax", "[jsonio]") {
  weights::ApEstimate e;
  e.p = 2.0;
  e.supremum = 1.5;
  e.argmax = Box{{-1.0}, {1.0}};
  e.classification = weights::ApClass::Member;
  e.note = "ok";
  const json j = jsonio::ap_estimate_to_json(e);
  CHECK(j.at("classification") == json("member"));
  CHECK(j.at("argmax").at("lo")[0] == json(-1.0));
  CHECK(j.at("p") == json(2.0));
}
