#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "conelab/errors.hpp"
#include "conelab/grids.hpp"
#include "conelab/space.hpp"

using namespace conelab;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("density evaluation") {
  CHECK(eval_density(Density::power_law(1, 3), 2.0) == 4.0);
  CHECK(eval_density(Density::power_law(1, 3), 0.0) == 0.0);
  CHECK(eval_density(Density::truncated(1, 3, 1), 2.0) == 0.0);
  CHECK(eval_density(Density::truncated(1, 3, 1), 0.5) == 0.25);
  CHECK(eval_density(Density::power_law_exp(2, 3, 1), 1.0) == doctest::Approx(2.0 / std::exp(1.0)));
  const auto tab = Density::tabulated({0, 1, 2}, {0, 1, 4});
  CHECK(eval_density(tab, 0.5) == doctest::Approx(0.5));
  CHECK(eval_density(tab, 1.5) == doctest::Approx(2.0));  // log-linear between 1 and 4
  CHECK_THROWS_AS(eval_density(tab, 2.5), DomainError);
  CHECK_THROWS_AS(eval_density(Density::power_law(1, 3), -1.0), DomainError);
}

TEST_CASE("density validation") {
  CHECK_THROWS(Density::power_law(0, 3));
  CHECK_THROWS(Density::power_law(1, 1));
  CHECK_THROWS(Density::truncated(1, 3, 0));
  CHECK_THROWS(Density::power_law_exp(1, 3, 0));
  CHECK_THROWS(Density::tabulated({0, 2, 1}, {1, 1, 1}));
  CHECK_THROWS(Density::tabulated({0, 1}, {1, -1}));
  CHECK_THROWS(Density::tabulated({0, 1}, {1}));
}

TEST_CASE("ball volumes") {
  CHECK(ball_volume(Density::power_law(1, 3), 2.0) == doctest::Approx(8.0 / 3.0).epsilon(1e-15));
  CHECK(ball_volume(Density::truncated(1, 3, 1), 2.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(ball_volume(Density::tabulated({0, 10}, {1, 1}), 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  // int_0^1 x^2 e^{-x} = 2 - 5/e
  CHECK(ball_volume(Density::power_law_exp(1, 3, 1), 1.0) == doctest::Approx(2.0 - 5.0 / std::exp(1.0)).epsilon(1e-13));
  // Linear table 0 -> 10 on [0,10]: m(B_4) = 8
  CHECK(ball_volume(Density::tabulated({0, 10}, {0, 10}), 4.0) == doctest::Approx(8.0).epsilon(1e-14));
  // Log-linear segment 1 -> e on [0,1]: int e^x = e - 1
  CHECK(ball_volume(Density::tabulated({0, 1}, {1, std::exp(1.0)}), 1.0) == doctest::Approx(std::exp(1.0) - 1).epsilon(1e-13));

  SUBCASE("monotone in rho for every kind") {
    const Density ds[] = {Density::power_law(1, 3), Density::truncated(2, 2.5, 1.5), Density::power_law_exp(1, 3, 1),
                          Density::tabulated({0, 1, 3}, {0.5, 2, 0})};
    for (const auto& d : ds) {
      double prev = 0.0;
      for (double r : log_spaced(1e-3, 50, 200)) {
        const double v = ball_volume(d, r);
        CHECK(v >= prev);
        prev = v;
      }
    }
  }
}

TEST_CASE("sigma") {
  CHECK(sigma({0, 3, 0.3, 2}) == 0.3);
  CHECK(std::isinf(sigma({4, 1, 0.5, kPi})));
  CHECK(sigma({-1, 1, 0.5, 1}) == doctest::Approx(0.44340944198503695).epsilon(1e-14));
  CHECK(sigma({-1, 1, 0.5, 1}) == doctest::Approx(0.4434094).epsilon(1e-7));
  // sin branch: K=1, N=1, theta=1 -> sin(t)/sin(1)
  CHECK(sigma({1, 1, 0.25, 1}) == doctest::Approx(std::sin(0.25) / std::sin(1.0)).epsilon(1e-14));
  // K theta^2 < 0 with N = 0 gives t
  CHECK(sigma({-1, 0, 0.4, 1}) == 0.4);
  CHECK(sigma({0, 0, 0.4, 1}) == 0.4);
  // Large sinh arguments stay finite.
  CHECK(sigma({-1e6, 1, 0.5, 10}) == doctest::Approx(std::exp(-0.5 * 1e4)).epsilon(1e-6));
  CHECK_THROWS(sigma({0, 3, 1.5, 1}));
  CHECK_THROWS(sigma({0, 3, 0.5, -1}));
}

TEST_CASE("tau") {
  CHECK(tau({0, 5, 0.7, 3}) == 0.7);
  CHECK(tau({0, 1, 0.2, 1}) == 0.2);
  CHECK(tau({-1, 2, 0.5, 1}) == doctest::Approx(0.47085530791583785).epsilon(1e-14));
  CHECK(std::abs(tau({-1, 2, 0.5, 1}) - 0.470856) <= 1e-6);
  CHECK_THROWS(tau({0, 0.5, 0.5, 1}));
}

TEST_CASE("distortion at K=0 returns t on a sweep") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double N = 1.0 + 10.0 * U(rng);
    const double t = U(rng);
    const double theta = 20.0 * U(rng);
    CHECK(sigma({0, N, t, theta}) == t);
    CHECK(tau({0, N, t, theta}) == doctest::Approx(t).epsilon(1e-15));
  }
}

TEST_CASE("MCP density check") {
  SUBCASE("x^2 against N=3 attains 0 at x1=0") {
    const auto r = check_mcp_density(Density::power_law(1, 3), 3);
    CHECK(r.satisfied());
    CHECK(std::abs(r.min_slack) <= 1e-12 * r.scale);
    CHECK(r.samples_tested == 64u * 64u * 32u);
  }
  SUBCASE("x^2 against N=2 fails") {
    const auto r = check_mcp_density(Density::power_law(1, 3), 2);
    CHECK(r.min_slack < 0.0);
    CHECK_FALSE(r.satisfied());
    CHECK(r.argmin[1] == 0.0);
  }
  SUBCASE("x^2 against N=4 passes") {
    CHECK(check_mcp_density(Density::power_law(1, 3), 4).satisfied());
  }
  SUBCASE("x^2 e^{-x} on [0,20] fails") {
    // Brute-force sample at (x0, x1, t) = (1, 20, 1/2): h(10.5) - h(1)/4.
    const Density d = Density::power_law_exp(1, 3, 1);
    const double slack = d(10.5) - 0.25 * d(1.0);
    CHECK(slack == doctest::Approx(-0.08900).epsilon(1e-3));
    const auto r = check_mcp_density(d, 3);
    CHECK(r.min_slack < 0.0);
    CHECK(r.min_slack <= slack);
  }
  SUBCASE("x^2 e^{-x} on [0,2] passes") {
    CHECK(check_mcp_density(Density::power_law_exp(1, 3, 1, 2.0), 3).satisfied());
  }
  SUBCASE("refining nested grids never raises min_slack") {
    const Density ds[] = {Density::power_law_exp(1, 3, 1), Density::tabulated({0, 1, 5}, {0, 1, 0.2}),
                          Density::power_law(1, 2.5)};
    for (const auto& d : ds) {
      double prev = check_mcp_density(d, 3, {5, 5, 5}).min_slack;
      for (std::size_t n : {9u, 17u, 33u}) {
        const double cur = check_mcp_density(d, 3, {n, n, n}).min_slack;
        CHECK(cur <= prev);
        prev = cur;
      }
    }
  }
  CHECK_THROWS(check_mcp_density(Density::power_law(1, 3), 3, {1, 4, 4}));
}

TEST_CASE("Bishop-Gromov profile") {
  {
    const std::vector<double> r{1, 2, 4};
    const auto p = bishop_gromov_profile(Density::power_law(1, 3), 3, r);
    for (double v : p.ratios) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(p.monotone_nonincreasing);
  }
  {
    const std::vector<double> r{0.5, 1, 2};
    const auto p = bishop_gromov_profile(Density::truncated(1, 3, 1), 3, r);
    CHECK(p.ratios[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(p.ratios[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(p.ratios[2] == doctest::Approx(1.0 / 24.0).epsilon(1e-15));
    CHECK(p.monotone_nonincreasing);
  }
  {
    const auto r = log_spaced(0.1, 10, 9);
    const auto p = bishop_gromov_profile(Density::tabulated({0, 10}, {1, 1}), 3, r);
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(p.ratios[i] == doctest::Approx(std::pow(r[i], -2.0)).epsilon(1e-13));
    CHECK(p.monotone_nonincreasing);
  }
  {
    // x^3 against N=3 grows: not monotone.
    const std::vector<double> r{1, 2};
    CHECK_FALSE(bishop_gromov_profile(Density::power_law(1, 4), 3, r).monotone_nonincreasing);
  }
  const std::vector<double> bad{2, 1};
  CHECK_THROWS(bishop_gromov_profile(Density::power_law(1, 3), 3, bad));
}

TEST_CASE("MCP implies Bishop-Gromov on the same corpus") {
  const Density ds[] = {Density::power_law(1, 3),          Density::truncated(1, 3, 1),
                        Density::power_law_exp(1, 3, 1, 2), Density::tabulated({0, 10}, {1, 1}),
                        Density::tabulated({0, 10}, {0, 10}), Density::power_law(2, 2.5)};
  const auto r = default_cone_radii();
  for (const auto& d : ds) {
    if (check_mcp_density(d, 3).satisfied()) CHECK(bishop_gromov_profile(d, 3, r).monotone_nonincreasing);
  }
}

TEST_CASE("cone fit") {
  const auto r = default_cone_radii();
  {
    const auto f = cone_fit(Density::power_law(2, 3), 3, r);
    CHECK(f.is_cone);
    // m(B_r) = 2 r^3 / 3 over (4 pi / 3) r^3
    CHECK(f.A == doctest::Approx(1.0 / (2.0 * kPi)).epsilon(1e-14));
  }
  {
    const std::vector<double> rr{0.5, 1, 2};
    CHECK_FALSE(cone_fit(Density::truncated(1, 3, 1), 3, rr).is_cone);
  }
  CHECK_FALSE(cone_fit(Density::tabulated({0, 10}, {1, 1}), 3, std::vector<double>{1, 2, 4}).is_cone);
  for (double c : {0.1, 1.0, 7.0}) {
    for (double N : {1.5, 2.0, 3.0, 4.5, 8.0}) {
      const auto f = cone_fit(Density::power_law(c, N), N, r);
      CHECK(f.is_cone);
      CHECK(f.max_rel_deviation <= 1e-12);
      CHECK(f.A == doctest::Approx(c / (N * unit_ball_volume(N))).epsilon(1e-13));
    }
  }
  CHECK_THROWS_AS(cone_fit(Density::tabulated({0, 1, 2}, {0, 0, 1}), 3, std::vector<double>{0.5, 1}), DegenerateError);
  CHECK_THROWS(cone_fit(Density::power_law(1, 3), 3, std::vector<double>{1}));
}
