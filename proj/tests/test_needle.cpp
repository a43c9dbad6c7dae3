#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "conelab/errors.hpp"
#include "conelab/grids.hpp"
#include "conelab/needle.hpp"

using namespace conelab;

namespace {

NeedleEnsemble ensemble(double N, std::vector<Ray> rays) { return NeedleEnsemble{N, std::move(rays)}; }

// int_0^inf x^4 e^{-2x^2} dx = Gamma(5/2) / (2 * 2^{5/2})
const double kGaussianFourthMoment = 0.75 * std::sqrt(std::numbers::pi) / (2.0 * std::pow(2.0, 2.5));

}  // namespace

TEST_CASE("ensemble validation") {
  CHECK_NOTHROW(ensemble(3, {{1, 0.5}, {2, 0.5}}).validate());
  CHECK_THROWS(ensemble(3, {{1, 0.5}, {2, 0.4}}).validate());
  CHECK_THROWS(ensemble(3, {{-1, 0.5}, {2, 0.5}}).validate());
  CHECK_THROWS(ensemble(1, {{1, 1.0}}).validate());
  CHECK_THROWS(ensemble(3, {}).validate());
}

TEST_CASE("assembly") {
  CHECK(assemble(ensemble(3, {{1, 0.5}, {3, 0.5}}), 1.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  for (double c : {0.3, 1.0, 5.0}) {
    for (double rho : {0.1, 1.0, 7.0}) {
      const auto e = ensemble(2.5, {{c, 1.0}});
      CHECK(assemble(e, rho) == doctest::Approx(ball_volume(Density::power_law(c, 2.5), rho)).epsilon(1e-14));
    }
  }
  const auto e = ensemble(4, {{1, 0.2}, {2, 0.3}, {5, 0.5}});
  const double ratio = assemble(e, 1.0);
  for (double rho : {0.01, 0.5, 3.0, 40.0}) CHECK(assemble(e, rho) / std::pow(rho, 4.0) == doctest::Approx(ratio).epsilon(1e-14));
  CHECK(cone_fit(e.assembled_density(), 4, default_cone_radii()).is_cone);
}

TEST_CASE("disintegration") {
  const auto e = ensemble(3, {{1, 1.0 / 3}, {2, 1.0 / 3}, {3, 1.0 / 3}});
  const auto r = verify_disintegration(e, default_cone_radii());
  CHECK(r.max_rel_deviation <= 1e-12);
  CHECK(r.radii.size() == default_cone_radii().size());
  // w_0 = q_0 (1 + 1e-3): relative excess q_0 c_0 1e-3 / sum q c = 1e-3 / 6
  const std::vector<double> w{(1.0 / 3) * (1 + 1e-3), 1.0 / 3, 1.0 / 3};
  const auto p = verify_disintegration(e, default_cone_radii(), w);
  CHECK(p.max_rel_deviation == doctest::Approx(1e-3 / 6.0).epsilon(1e-9));
  CHECK_THROWS(verify_disintegration(e, {}));
  CHECK_THROWS(verify_disintegration(e, default_cone_radii(), std::vector<double>{1.0}));
}

TEST_CASE("reweighting") {
  const auto e = ensemble(3, {{1, 0.5}, {2, 0.5}});
  SUBCASE("Gaussian profile") {
    const auto r = reweight(e, hpw_extremal(1.0));
    REQUIRE(r.C.size() == 2u);
    CHECK(r.C[0] == doctest::Approx(kGaussianFourthMoment).epsilon(1e-10));
    CHECK(r.C[1] == doctest::Approx(2 * kGaussianFourthMoment).epsilon(1e-10));
    for (double m : r.normalized_moment) CHECK(std::abs(m - 1.0) <= 1e-8);
    CHECK(std::abs(r.tilde_q_total - 0.17624730055999221) <= 1e-8);
    CHECK(r.tilde_q_total == doctest::Approx(1.5 * kGaussianFourthMoment).epsilon(1e-10));
    CHECK(r.total_rel_deviation <= 1e-8);
    CHECK(r.reassembly_rel_deviation <= 1e-10);
    CHECK(r.dropped.empty());
  }
  SUBCASE("zero function") {
    CHECK_THROWS(reweight(e, GridFunction{{0, 1, 2}, {0, 0, 0}}));
  }
  SUBCASE("per-ray functions with a dropped ray") {
    const std::vector<TestFunction> us{hpw_extremal(1.0), GridFunction{{0, 1, 2}, {0, 0, 0}}};
    const auto r = reweight(e, us);
    REQUIRE(r.dropped.size() == 1u);
    CHECK(r.dropped[0] == 1u);
    CHECK(r.tilde_q[1] == 0.0);
    CHECK(r.tilde_q_total == doctest::Approx(0.5 * kGaussianFourthMoment).epsilon(1e-10));
    CHECK(std::abs(r.normalized_moment[0] - 1.0) <= 1e-8);
    CHECK(r.reassembly_rel_deviation <= 1e-10);
  }
  SUBCASE("wrong number of per-ray functions") {
    const std::vector<TestFunction> us{hpw_extremal(1.0)};
    CHECK_THROWS(reweight(e, us));
  }
}

TEST_CASE("HPW aggregation") {
  SUBCASE("extremal on a four-dimensional cone") {
    const auto e = ensemble(4, {{1, 0.25}, {2, 0.25}, {0.5, 0.5}});
    const auto r = aggregate_hpw(e, hpw_extremal(0.7));
    CHECK(std::abs(r.final_slack) <= 1e-8);
    for (double s : r.ray_slack) CHECK(std::abs(s) <= 1e-8);
    CHECK(std::abs(r.cauchy_schwarz_slack) <= 1e-10);
    CHECK(r.chain_identity_residual <= 1e-10);
  }
  SUBCASE("random functions") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(0.1, 3.0);
    for (int i = 0; i < 100; ++i) {
      const double q0 = 0.2 + 0.6 * std::uniform_real_distribution<double>(0, 1)(rng);
      const auto e = ensemble(2.2 + U(rng), {{U(rng), q0}, {U(rng), 1 - q0}});
      const RayFunctions u =
          i % 2 == 0 ? RayFunctions(TestFunction(random_grid_function(rng)))
                     : RayFunctions(std::vector<TestFunction>{random_grid_function(rng), random_grid_function(rng)});
      const auto r = aggregate_hpw(e, u);
      CHECK(r.final_slack >= -1e-9);
      CHECK(r.integrated_slack >= -1e-9);
      CHECK(r.cauchy_schwarz_slack >= -1e-9);
      for (double s : r.ray_slack) CHECK(s >= -1e-9);
      CHECK(r.chain_identity_residual <= 1e-9 * std::max(1.0, r.final_slack));
    }
  }
  SUBCASE("single ray reduces to the HPW report") {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 10; ++i) {
      const auto u = random_grid_function(rng);
      const auto r = aggregate_hpw(ensemble(3, {{1.5, 1.0}}), u);
      const auto h = hpw_report(Density::power_law(1.5, 3), 3, u);
      CHECK(r.final_slack == doctest::Approx(h.slack).epsilon(1e-10));
    }
  }
}

TEST_CASE("CKN needle check") {
  const auto params = CknParams::make(4, 1, 2.5);
  const Ray ray{2.0, 1.0};
  SUBCASE("extremal is an equality case") {
    for (double lambda : {0.1, 1.0, 10.0}) {
      const auto r = ray_ckn_check(ray, 2.5, params, ckn_extremal(params, lambda));
      CHECK(std::abs(r.rel_slack) <= 1e-6);
      CHECK(std::abs(r.first_slack) <= 1e-6 * r.rhs);
    }
  }
  SUBCASE("random functions") {
    std::mt19937_64 rng(21);
    for (int i = 0; i < 100; ++i) {
      const auto r = ray_ckn_check(ray, 2.5, params, random_grid_function(rng));
      CHECK(r.slack >= -1e-9 * std::max(1.0, r.rhs));
      CHECK(r.first_slack >= -1e-9 * std::max(1.0, r.rhs));
      CHECK(r.second_slack >= -1e-9 * std::max(1.0, r.rhs));
    }
  }
  SUBCASE("support away from the origin") {
    const GridFunction u{{0, 1, 2, 3}, {0, 0, 1, 0}};
    const auto r = ray_ckn_check(ray, 2.5, params, u);
    CHECK(r.slack >= 0.0);
    CHECK(r.rel_slack > 0.0);
  }
  CHECK_THROWS(ray_ckn_check(ray, 3.0, params, hpw_extremal(1.0)));
}
