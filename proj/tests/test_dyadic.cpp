#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "embedkit/common.hpp"
#include "embedkit/dyadic.hpp"

using namespace embedkit;
using dyadic::Cube;
using Catch::Approx;

TEST_CASE("cube geometry") {
  Cube c{3, {8, 0}};
  CHECK(c.dim() == 2);
  CHECK(c.side() == Approx(0.125));
  CHECK(c.center(0) == Approx(1.0));
  CHECK(c.center(1) == Approx(0.0));
  CHECK(c.center_norm() == Approx(1.0));
  Box b = dyadic::cube_box(c);
  CHECK(b.lo[0] == Approx(1.0 - 1.0 / 16.0));
  CHECK(b.hi[0] == Approx(1.0 + 1.0 / 16.0));
  CHECK(b.lo[1] == Approx(-1.0 / 16.0));
  CHECK(b.volume() == Approx(0.125 * 0.125));
  CHECK_THROWS_AS(dyadic::cube_box(Cube{-1, {0}}), InvalidSpec);
}

TEST_CASE("region classification") {
  using dyadic::Region;
  CHECK(dyadic::classify_region(Cube{5, {1}}) == Region::NearOrigin);     // 1/32 <= 0.1
  CHECK(dyadic::classify_region(Cube{0, {20}}) == Region::Far);           // 20 >= 10
  CHECK(dyadic::classify_region(Cube{0, {1, 1}}) == Region::Intermediate);
  CHECK(dyadic::classify_region(Cube{0, {0}}) == Region::NearOrigin);

  // Boundary values are inclusive on both ends.
  CHECK(dyadic::classify_region(Cube{2, {1}}, 0.25) == Region::NearOrigin);  // r = 1/4 = eps
  CHECK(dyadic::classify_region(Cube{0, {4}}, 0.25) == Region::Far);         // r = 4 = 1/eps

  CHECK_THROWS_AS(dyadic::classify_region(Cube{0, {1}}, 0.0), InvalidSpec);
  CHECK_THROWS_AS(dyadic::classify_region(Cube{0, {1}}, 1.0), InvalidSpec);
  CHECK_THROWS_AS(dyadic::classify_region(Cube{0, {1}}, -0.5), InvalidSpec);
}

TEST_CASE("window defaults and radii") {
  auto w1 = dyadic::Window::defaults(1);
  CHECK(w1.nu_max == 12);
  CHECK(!w1.radius_cap);
  CHECK(w1.radius_at(0) == 4);
  CHECK(w1.radius_at(3) == 32);
  auto w2 = dyadic::Window::defaults(2);
  CHECK(w2.nu_max == 8);
  REQUIRE(w2.radius_cap);
  CHECK(*w2.radius_cap == 96);
  CHECK(w2.radius_at(8) == 96);
  auto w3 = dyadic::Window::defaults(3);
  CHECK(w3.nu_max == 6);
  REQUIRE(w3.radius_cap);
  CHECK(*w3.radius_cap == 12);
}

TEST_CASE("window enumeration") {
  SECTION("tiny window, exact contents") {
    dyadic::Window w;
    w.nu_max = 1;
    w.radius_factor = 1.0;
    auto cubes = dyadic::enumerate_window(w, 2);
    // nu=0: 3^2 cubes, nu=1: 5^2 cubes
    REQUIRE(cubes.size() == 9 + 25);
    CHECK(cubes.front() == Cube{0, {-1, -1}});
    CHECK(cubes[9] == Cube{1, {-2, -2}});
    CHECK(cubes.back() == Cube{1, {2, 2}});
    // no duplicates
    std::set<std::pair<int, std::vector<std::int64_t>>> seen;
    for (const auto& c : cubes) seen.insert({c.nu, c.m});
    CHECK(seen.size() == cubes.size());
  }
  SECTION("frozen count for the one-dimensional default window") {
    auto cubes = dyadic::enumerate_window(dyadic::Window::defaults(1), 1);
    // sum_{nu=0..12} (2*4*2^nu + 1) = 13 + 8*(2^13 - 1)
    CHECK(cubes.size() == 65541);
  }
  SECTION("budget violations throw before allocation") {
    auto w = dyadic::Window::defaults(2);
    w.radius_cap.reset();
    w.nu_max = 12;
    CHECK_THROWS_AS(dyadic::enumerate_window(w, 2), WindowTooLarge);
  }
  SECTION("region filters partition the window") {
    dyadic::Window w;
    w.nu_max = 4;
    w.radius_factor = 2.0;
    auto all = dyadic::enumerate_window(w, 1);
    std::size_t total = 0;
    for (auto reg : {dyadic::Region::NearOrigin, dyadic::Region::Intermediate,
                     dyadic::Region::Far}) {
      auto wf = w;
      wf.filter = reg;
      auto part = dyadic::enumerate_window(wf, 1);
      for (const auto& c : part) CHECK(dyadic::classify_region(c, wf.region_eps) == reg);
      total += part.size();
    }
    CHECK(total == all.size());
  }
}

TEST_CASE("far ladders") {
  auto cubes = dyadic::far_ladder_cubes(2, 4);
  // per level: (j=0..4) x (2 axes x 2 signs + diagonal) = 5 * 5; three levels
  REQUIRE(cubes.size() == 75);
  for (const auto& c : cubes) {
    CHECK((c.nu == 0 || c.nu == 1 || c.nu == 2));
    std::int64_t mx = 0;
    for (auto mi : c.m) mx = std::max(mx, std::abs(mi));
    CHECK(std::has_single_bit(static_cast<std::uint64_t>(mx)));
  }
  auto one_level = dyadic::far_ladder_cubes(1, 3, std::vector<int>{5});
  REQUIRE(one_level.size() == 8);  // (j=0..3) x (1 axis x 2 signs)
  for (const auto& c : one_level) CHECK(c.nu == 5);
}

TEST_CASE("slope fitting") {
  SECTION("exact line is recovered with zero residual") {
    std::vector<double> xs = {0, 1, 2, 3, 4};
    std::vector<double> ys;
    for (double x : xs) ys.push_back(-1.5 * x + 7.0);
    auto f = dyadic::fit_linear(xs, ys);
    CHECK(f.slope == Approx(-1.5).margin(1e-12));
    CHECK(f.intercept == Approx(7.0).margin(1e-12));
    CHECK(f.residual == Approx(0.0).margin(1e-12));
    CHECK(f.n == 5);
  }
  SECTION("fit_log_slope recovers dyadic decay exponents") {
    std::vector<double> xs = {0, 1, 2, 3, 4, 5};
    std::vector<double> ys;
    for (double x : xs) ys.push_back(3.0 * std::pow(2.0, -x));
    auto f = dyadic::fit_log_slope(xs, ys);
    CHECK(f.slope == Approx(-1.0).margin(1e-12));
    CHECK(f.intercept == Approx(std::log2(3.0)).margin(1e-12));
  }
  SECTION("noise shows up in the residual, not a crash") {
    std::vector<double> xs = {0, 1, 2, 3, 4, 5, 6, 7};
    std::vector<double> ys;
    for (double x : xs) ys.push_back(0.3 * x + ((static_cast<int>(x) % 2) ? 1.0 : -1.0));
    auto f = dyadic::fit_linear(xs, ys);
    CHECK(f.slope == Approx(0.3).margin(0.1));
    CHECK(f.residual > 0.5);
  }
  SECTION("input validation") {
    std::vector<double> xs = {1, 1, 1};
    std::vector<double> ys = {1, 2, 3};
    CHECK_THROWS_AS(dyadic::fit_linear(xs, ys), DegenerateAbscissa);
    std::vector<double> two = {1, 2};
    CHECK_THROWS_AS(dyadic::fit_linear(two, two), InvalidSpec);
    std::vector<double> xs2 = {1, 2, 3};
    std::vector<double> neg = {1.0, -1.0, 1.0};
    CHECK_THROWS_AS(dyadic::fit_log_slope(xs2, neg), InvalidSpec);
  }
}
