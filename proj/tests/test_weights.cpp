#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "embedkit/common.hpp"
#include "embedkit/weights.hpp"

using namespace embedkit;
using weights::Weight;
using Catch::Approx;

TEST_CASE("pointwise evaluation per family") {
  SECTION("constant") {
    auto w = Weight::constant(2, 3.5);
    CHECK(w(std::vector<double>{0.1, -0.7}) == 3.5);
  }
  SECTION("radial power, two regimes") {
    auto w = Weight::radial_power(1, 0.5, 2.0);
    CHECK(w(std::vector<double>{0.25}) == Approx(std::sqrt(0.25)));
    CHECK(w(std::vector<double>{-3.0}) == Approx(9.0));
    CHECK(w(std::vector<double>{1.0}) == Approx(1.0));
  }
  SECTION("negative exponent throws at the singular point") {
    auto w = Weight::radial_power(2, -0.5, 0.0);
    CHECK_THROWS_AS(w(std::vector<double>{0.0, 0.0}), SingularPoint);
    CHECK(w(std::vector<double>{3.0, 4.0}) == Approx(1.0));  // r=5 >= 1, beta=0
  }
  SECTION("partial radial uses only the first n coordinates") {
    auto w = Weight::partial_radial_power(1, 1, 2.0, 0.5);
    CHECK(w(std::vector<double>{0.5, 100.0}) == Approx(0.25));
    CHECK(w(std::vector<double>{4.0, -3.0}) == Approx(2.0));
  }
  SECTION("product power multiplies block factors") {
    auto w = Weight::product_power({1, 1}, {1.0, 2.0});
    CHECK(w(std::vector<double>{0.5, 0.5}) == Approx(0.5 * 0.25));
    CHECK(w(std::vector<double>{2.0, 3.0}) == Approx(2.0 * 9.0));
  }
  SECTION("distance power to a sphere") {
    auto circle = weights::Manifold::sphere({0.0, 0.0}, 1.0);
    auto w = Weight::distance_power(2, circle, 2.0);
    CHECK(w(std::vector<double>{2.0, 0.0}) == Approx(1.0));
    CHECK(w(std::vector<double>{0.5, 0.0}) == Approx(0.25));
  }
  SECTION("scaling multiplies values") {
    auto w = Weight::radial_power(1, 1.0, 1.0).scaled(2.0);
    CHECK(w(std::vector<double>{0.5}) == Approx(1.0));
  }
}

TEST_CASE("factories reject non-integrable exponents") {
  CHECK_THROWS_AS(Weight::radial_power(1, -1.0, 0.0), InvalidSpec);
  CHECK_THROWS_AS(Weight::radial_power(2, 0.0, -2.0), InvalidSpec);
  CHECK_THROWS_AS(Weight::partial_radial_power(1, 2, -1.5, 0.0), InvalidSpec);
  CHECK_THROWS_AS(Weight::product_power({1, 2}, {0.0, -2.0}), InvalidSpec);
  auto circle = weights::Manifold::sphere({0.0, 0.0}, 1.0);
  CHECK_THROWS_AS(Weight::distance_power(2, circle, -1.0), InvalidSpec);
}

TEST_CASE("pow stays inside the catalog") {
  auto w = Weight::radial_power(1, 0.5, 1.0);
  auto w2 = w.pow(2.0);
  REQUIRE(w2.family() == weights::Family::RadialPower);
  CHECK(w2.as<weights::RadialPowerW>().alpha == Approx(1.0));
  CHECK(w2.as<weights::RadialPowerW>().beta == Approx(2.0));
  auto winv = w.pow(-0.5);
  CHECK(winv.as<weights::RadialPowerW>().alpha == Approx(-0.25));
  CHECK(winv.as<weights::RadialPowerW>().beta == Approx(-0.5));
  // exponent that leaves the locally integrable range
  CHECK_THROWS_AS(w.pow(-3.0), InvalidSpec);
  // constants fold the scale
  auto c = Weight::constant(2, 4.0).pow(0.5);
  CHECK(c(std::vector<double>{0.0, 0.0}) == Approx(2.0));
}

TEST_CASE("power_product combines cataloged weights") {
  auto a = Weight::radial_power(1, 0.5, 1.0);
  auto b = Weight::radial_power(1, 0.25, -0.5);
  auto v = weights::power_product(a, 1.0, b, 2.0);
  REQUIRE(v.family() == weights::Family::RadialPower);
  CHECK(v.as<weights::RadialPowerW>().alpha == Approx(1.0));
  CHECK(v.as<weights::RadialPowerW>().beta == Approx(0.0));
  // constant partner only contributes its scale
  auto c = weights::power_product(a, 1.0, Weight::constant(1, 2.0), 3.0);
  CHECK(c.family() == weights::Family::RadialPower);
  CHECK(c(std::vector<double>{2.0}) == Approx(8.0 * 2.0));
}

TEST_CASE("cube measures: closed forms in one dimension") {
  quad::Options opt;
  SECTION("constant") {
    auto r = weights::cube_measure(Weight::constant(1, 3.0), Box{{-2.0}, {5.0}}, opt);
    CHECK(r.value == Approx(21.0).epsilon(1e-14));
    CHECK(r.path == weights::MeasurePath::ClosedForm);
  }
  SECTION("|x| over the unit cube at the origin") {
    auto r = weights::cube_measure(Weight::radial_power(1, 1.0, 1.0), Box{{-0.5}, {0.5}}, opt);
    CHECK(r.value == Approx(0.25).epsilon(1e-14));
    CHECK(r.path == weights::MeasurePath::ClosedForm);
  }
  SECTION("two-regime radial profile") {
    // int_0^1 x^{-1/2} + int_1^2 x^2 = 2 + 7/3
    auto r = weights::cube_measure(Weight::radial_power(1, -0.5, 2.0), Box{{0.0}, {2.0}}, opt);
    CHECK(r.value == Approx(2.0 + 7.0 / 3.0).epsilon(1e-13));
  }
  SECTION("partial radial: profile along x times length in y") {
    auto w = Weight::partial_radial_power(1, 1, -0.5, 1.0);
    auto r = weights::cube_measure(w, Box{{0.0, 3.0}, {2.0, 4.0}}, opt);
    CHECK(r.value == Approx(2.0 + 1.5).epsilon(1e-13));
    CHECK(r.path == weights::MeasurePath::ClosedForm);
  }
  SECTION("product power factorizes") {
    auto w = Weight::product_power({1, 1}, {0.5, -0.5});
    auto r = weights::cube_measure(w, Box{{0.0, 0.0}, {1.0, 4.0}}, opt);
    CHECK(r.value == Approx((2.0 / 3.0) * 4.0).epsilon(1e-13));
  }
}

TEST_CASE("cube measures: planar semi-analytic paths match independent references") {
  quad::Options opt;
  SECTION("smooth radial power off the origin") {
    auto r = weights::cube_measure(Weight::radial_power(2, 0.5, 0.5),
                                   Box{{0.3, -0.2}, {0.9, 0.4}}, opt);
    CHECK(r.value == Approx(0.28395873201388050).epsilon(1e-10));
    CHECK(r.path == weights::MeasurePath::SemiAnalytic);
  }
  SECTION("two-regime radial power around the origin") {
    auto r = weights::cube_measure(Weight::radial_power(2, 1.0, 3.0),
                                   Box{{-1.5, -1.5}, {0.5, 0.5}}, opt);
    CHECK(r.value == Approx(6.7600002382917013).epsilon(1e-10));
  }
  SECTION("singular radial power at the origin") {
    auto r = weights::cube_measure(Weight::radial_power(2, -0.5, -0.5),
                                   Box{{-0.5, -0.5}, {0.5, 0.5}}, opt);
    CHECK(r.value == Approx(1.7677476267894528).epsilon(1e-10));
  }
  SECTION("distance power crossing the circle") {
    auto circle = weights::Manifold::sphere({0.0, 0.0}, 1.0);
    auto r = weights::cube_measure(Weight::distance_power(2, circle, -0.5),
                                   Box{{0.5, 0.5}, {1.5, 1.5}}, opt);
    CHECK(r.value == Approx(2.0630592888855633).epsilon(1e-10));
  }
  SECTION("distance power, circle inside the box") {
    auto circle = weights::Manifold::sphere({0.0, 0.0}, 1.0);
    auto r = weights::cube_measure(Weight::distance_power(2, circle, 1.0),
                                   Box{{-2.0, -2.0}, {2.0, 2.0}}, opt);
    CHECK(r.value == Approx(10.580658029248002).epsilon(1e-10));
  }
}

TEST_CASE("generic quadrature agrees with the structured paths") {
  quad::Options opt;
  opt.rel_tol = 1e-9;
  struct Case {
    Weight w;
    Box box;
  };
  auto circle = weights::Manifold::sphere({0.0, 0.0}, 1.0);
  std::vector<Case> cases;
  cases.push_back({Weight::radial_power(1, -0.5, 2.0), Box{{-1.0}, {2.0}}});
  cases.push_back({Weight::radial_power(2, 1.0, 3.0), Box{{-1.5, -1.5}, {0.5, 0.5}}});
  cases.push_back({Weight::radial_power(2, -0.5, -0.5), Box{{-0.5, -0.5}, {0.5, 0.5}}});
  cases.push_back({Weight::distance_power(2, circle, -0.5), Box{{0.5, 0.5}, {1.5, 1.5}}});
  for (const auto& c : cases) {
    double structured = weights::cube_measure(c.w, c.box, opt).value;
    double generic = weights::cube_measure_generic(c.w, c.box, opt).value;
    INFO(c.w.key());
    CHECK(generic == Approx(structured).epsilon(1e-6));
  }
}

TEST_CASE("measure properties") {
  quad::Options opt;
  SECTION("tiling additivity") {
    auto w = Weight::radial_power(2, -0.5, -0.5);
    double whole = weights::cube_measure(w, Box{{0.0, 0.0}, {1.0, 1.0}}, opt).value;
    double parts = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        Box b{{0.5 * i, 0.5 * j}, {0.5 * (i + 1), 0.5 * (j + 1)}};
        parts += weights::cube_measure(w, b, opt).value;
      }
    CHECK(parts == Approx(whole).epsilon(1e-9));
  }
  SECTION("homogeneity of pure powers on centered cubes") {
    auto w = Weight::radial_power(2, 0.5, 0.5);
    auto m = [&](double t) {
      return weights::cube_measure(w, Box{{-t, -t}, {t, t}}, opt).value;
    };
    // w(lambda Q) = lambda^{d + g} w(Q)
    CHECK(m(1.0) / m(0.5) == Approx(std::pow(2.0, 2.5)).epsilon(1e-9));
    CHECK(m(2.0) / m(1.0) == Approx(std::pow(2.0, 2.5)).epsilon(1e-9));
  }
  SECTION("scaled weight scales the measure") {
    auto w = Weight::radial_power(1, 0.5, 0.5);
    auto w2 = w.scaled(3.0);
    Box b{{0.25}, {1.0}};
    CHECK(weights::cube_measure(w2, b, opt).value ==
          Approx(3.0 * weights::cube_measure(w, b, opt).value).epsilon(1e-12));
  }
  SECTION("custom weights run through the generic path") {
    auto w = Weight::custom(
        1, [](std::span<const double> x) { return 1.0 + x[0] * x[0]; }, {}, "1+x^2");
    auto r = weights::cube_measure(w, Box{{0.0}, {2.0}}, opt);
    CHECK(r.value == Approx(2.0 + 8.0 / 3.0).epsilon(1e-8));
    CHECK(r.path == weights::MeasurePath::Quadrature);
  }
  SECTION("non-integrable custom weight is reported divergent") {
    quad::SingularSet sing;
    sing.points.push_back({0.0, 0.0});
    auto w = Weight::custom(
        2,
        [](std::span<const double> x) {
          double r2 = x[0] * x[0] + x[1] * x[1];
          return r2 > 0 ? 1.0 / r2 : kInf;
        },
        sing, "1/r^2");
    CHECK_THROWS_AS(weights::cube_measure(w, Box{{-0.5, -0.5}, {0.5, 0.5}}, opt),
                    QuadratureFailure);
  }
}

TEST_CASE("A_p quantity: frozen value and lower bound") {
  auto w = Weight::radial_power(1, 0.5, 0.5);
  double q = weights::ap_quantity(w, Box{{-1.0}, {1.0}}, 2.0);
  CHECK(q == Approx(4.0 / 3.0).epsilon(1e-10));

  // Jensen: the quantity is >= 1 on every cube for every p. (Exponents are
  // kept inside (-d, d(p-1)) for the smallest p so the dual side integrates.)
  std::vector<Weight> ws = {Weight::constant(1, 2.0), Weight::radial_power(1, 0.4, 0.4),
                            Weight::radial_power(1, -0.25, 1.0)};
  std::vector<Box> cubes = {Box{{-1.0}, {1.0}}, Box{{0.25}, {0.75}}, Box{{-4.0}, {4.0}}};
  for (const auto& ww : ws)
    for (const auto& Q : cubes)
      for (double p : {1.5, 2.0, 3.0}) {
        INFO(ww.key() << " p=" << p);
        CHECK(weights::ap_quantity(ww, Q, p) >= 1.0 - 1e-9);
      }
  CHECK(weights::ap_quantity(Weight::constant(1, 5.0), Box{{0.0}, {1.0}}, 2.0) ==
        Approx(1.0).epsilon(1e-12));
}

TEST_CASE("A_p membership by exponent ranges") {
  using weights::ApClass;
  auto mem = [](const Weight& w, double p) { return weights::ap_membership_closed_form(w, p); };
  CHECK(mem(Weight::radial_power(1, 0.5, 0.5), 2.0).cls == ApClass::Member);
  CHECK(mem(Weight::radial_power(1, 0.5, 0.5), 2.0).margin == Approx(0.5));
  CHECK(mem(Weight::radial_power(1, 1.5, 0.0), 2.0).cls == ApClass::NonMember);
  CHECK(mem(Weight::radial_power(1, 1.0, 0.0), 2.0).cls == ApClass::Boundary);
  CHECK(mem(Weight::radial_power(1, 1.5, 0.0), 3.0).cls == ApClass::Member);
  CHECK(mem(Weight::constant(2, 7.0), 1.5).cls == ApClass::Member);
  // exponent ranges follow the radial dimension for partial-radial weights
  auto pm = mem(Weight::partial_radial_power(1, 1, 0.5, 0.0), 2.0);
  CHECK(pm.cls == ApClass::Member);
  CHECK(pm.inferred);
  CHECK(mem(Weight::partial_radial_power(1, 1, 1.5, 0.0), 2.0).cls == ApClass::NonMember);
  // distance powers use the codimension
  auto circle = weights::Manifold::sphere({0.0, 0.0}, 1.0);
  CHECK(mem(Weight::distance_power(2, circle, 0.5), 2.0).cls == ApClass::Member);
  CHECK(mem(Weight::distance_power(2, circle, 1.5), 2.0).cls == ApClass::NonMember);
  CHECK(mem(Weight::custom(1, [](std::span<const double>) { return 1.0; }, {}, "one"), 2.0).cls ==
        ApClass::Unknown);
}

TEST_CASE("empirical A_p estimation matches the exponent ranges") {
  using weights::ApClass;
  SECTION("member with scale-invariant constant 4/3") {
    auto est = weights::estimate_ap_constant(Weight::radial_power(1, 0.5, 0.5), 2.0);
    CHECK(est.classification == ApClass::Member);
    CHECK(est.supremum == Approx(4.0 / 3.0).epsilon(1e-6));
  }
  SECTION("non-member detected through the dual blow-up") {
    auto est = weights::estimate_ap_constant(Weight::radial_power(1, 1.5, 1.5), 2.0);
    CHECK(est.classification == ApClass::NonMember);
  }
  SECTION("non-member detected through growth") {
    auto w = Weight::custom(
        1, [](std::span<const double> x) { return 1.0 + x[0] * x[0]; }, {}, "1+x^2");
    auto est = weights::estimate_ap_constant(w, 2.0);
    CHECK(est.classification == ApClass::NonMember);
    CHECK(est.slope_grow > 0.5);
  }
}

TEST_CASE("product and reverse-Holder probes") {
  auto w = Weight::radial_power(1, 0.5, 0.5);
  SECTION("small perturbations stay in the class") {
    std::vector<double> eps = {0.0, 0.1};
    std::vector<double> del = {0.0, 0.1};
    auto rows = weights::check_product_weight_ap(w, w, 2.0, eps, del);
    REQUIRE(rows.size() == 4);
    for (const auto& r : rows) {
      INFO("eps=" << r.eps << " delta=" << r.delta);
      CHECK(r.classification == weights::ApClass::Member);
    }
  }
  SECTION("reverse-Holder ratios stay bounded on the default family") {
    auto cubes = weights::default_reverse_holder_cubes(w);
    auto rep = weights::check_reverse_holder(w, w, 0.25, 0.25, cubes);
    REQUIRE(!rep.rows.empty());
    CHECK(rep.max_ratio > 0.0);
    CHECK(rep.max_ratio < 100.0);
  }
}

TEST_CASE("weight keys are descriptive and scale-aware") {
  auto w = Weight::radial_power(2, 0.5, -0.25);
  CHECK(w.key() != Weight::radial_power(2, 0.5, 0.25).key());
  CHECK(w.key() != w.scaled(2.0).key());
  CHECK(w.key() == Weight::radial_power(2, 0.5, -0.25).key());
}
