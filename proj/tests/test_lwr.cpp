#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "stochvsl/lwr.hpp"
#include "support.hpp"

using namespace stochvsl;
using testsupport::case_fd;

TEST_CASE("critical density") {
  CHECK(critical_density(30, -4.9, 0.5) == doctest::Approx(0.0702006).epsilon(1e-6));
  CHECK(critical_density(20, -4.9, 0.5) == doctest::Approx(0.0983936).epsilon(1e-6));
  CHECK(critical_density(7, -7, 0.3) == doctest::Approx(0.15));
  CHECK_THROWS_AS(critical_density(0, -4.9, 0.5), InvalidParameter);
  CHECK_THROWS_AS(critical_density(30, 4.9, 0.5), InvalidParameter);
  CHECK_THROWS_AS(critical_density(30, -4.9, 0), InvalidParameter);
}

TEST_CASE("flux") {
  const auto fd = case_fd();
  CHECK(fd.consistent());
  CHECK(fd.flux(0) == 0.0);
  CHECK(fd.flux(0.07) == doctest::Approx(2.1));
  CHECK(fd.flux(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(fd.flux(fd.rho_c) == doctest::Approx(fd.capacity));
  CHECK_THROWS_AS(fd.flux(0.6), std::out_of_range);
  CHECK_THROWS_AS(fd.flux(-0.1), std::out_of_range);

  // concavity on a grid and the apex as global maximum
  for (int i = 0; i <= 200; ++i) {
    const double a = fd.rho_m * i / 200.0;
    CHECK(fd.flux(a) <= fd.capacity + 1e-12);
    for (int j = i; j <= 200; j += 7) {
      const double b = fd.rho_m * j / 200.0;
      CHECK(fd.flux(0.5 * (a + b)) >= 0.5 * (fd.flux(a) + fd.flux(b)) - 1e-12);
    }
  }
  const auto sym = TriangularFD::make(25, -25, 0.4);
  CHECK(sym.rho_c == doctest::Approx(0.2));
}

TEST_CASE("geometry") {
  const auto g = LinkGeometry::make(100, 600, 2, 4);
  CHECK(g.chi == 1300);
  CHECK(g.segment_of(100) == 1);
  CHECK(g.segment_of(699) == 1);
  CHECK(g.segment_of(701) == 2);
  CHECK(g.segment_of(1300) == 2);
  CHECK_THROWS_AS(LinkGeometry::make(0, 600, 0), InvalidParameter);
}

TEST_CASE("initial component") {
  const auto fd = case_fd();
  const auto g = LinkGeometry::make(0, 600, 1);
  ValueConditionSet vc{{0.0}, {0.0}, {0.0}, 20.0};
  CHECK(m_initial(vc, fd, g, 1, 5, 300).value == 0.0);
  CHECK(m_initial(vc, fd, g, 1, 0, 600).value == 0.0);

  vc.initial_density = {fd.rho_m};
  // t = 10: tw = -49, so x = tw + X/2 = 251
  CHECK(m_initial(vc, fd, g, 1, 10, 251).value == doctest::Approx(-125.5));

  // at t = 0 the label decreases linearly through the segment
  vc.initial_density = {0.2};
  CHECK(m_initial(vc, fd, g, 1, 0, 450).value == doctest::Approx(-90));
}

TEST_CASE("initial component outside its domain is infinite") {
  const auto fd = case_fd();
  const auto g = LinkGeometry::make(0, 600, 2);
  ValueConditionSet vc{{0.03, 0.3}, {}, {}, 20.0};
  // segment 2 starts at 600; backward wave reaches 600 - 4.9 t only
  CHECK_FALSE(m_initial(vc, fd, g, 2, 10, 500).is_finite());
  CHECK(m_initial(vc, fd, g, 2, 10, 560).is_finite());
  // segment 1 is free flowing; nothing of it is upstream of x = 0 + 0
  CHECK(m_initial(vc, fd, g, 1, 10, 0).is_finite());
}

TEST_CASE("initial component branches agree on their shared guards") {
  const auto fd = case_fd();
  const auto g = LinkGeometry::make(0, 600, 2);
  for (double r : {0.0, 0.03, fd.rho_c, 0.2, 0.5}) {
    ValueConditionSet vc{{0.01, r}, {}, {}, 20.0};
    for (double t : {0.0, 3.0, 17.0, 40.0}) {
      const double a = 600.0, b = 1200.0;
      for (double y : {a + fd.vf * t, b + fd.w * t, a + fd.w * t}) {
        if (y < 0 || y > 1200) continue;
        const auto lo = initial_piece(fd, g, vc.initial_density, 2, t, y - 1e-6);
        const auto hi = initial_piece(fd, g, vc.initial_density, 2, t, y + 1e-6);
        if (lo && hi) CHECK(std::abs(lo->value - hi->value) < 1e-5);
      }
    }
  }
}

TEST_CASE("upstream component") {
  const auto fd = case_fd();
  const auto g = LinkGeometry::make(0, 600, 2);
  ValueConditionSet vc{{0, 0}, {2.1, 2.1, 2.1}, {0, 0, 0}, 20.0};
  CHECK(m_upstream(vc, fd, g, 1, 40, 600).value == doctest::Approx(42));
  for (int n = 1; n <= 3; ++n) {
    CHECK(m_upstream(vc, fd, g, n, n * 20.0, 0).value == doctest::Approx(2.1 * n * 20));
  }
  CHECK_FALSE(m_upstream(vc, fd, g, 1, 10, 600).is_finite());
  CHECK_FALSE(m_upstream(vc, fd, g, 3, 39.9, 0).is_finite());
  CHECK_THROWS_AS(m_upstream(vc, fd, g, 4, 100, 0), std::out_of_range);
}

TEST_CASE("downstream component") {
  const auto fd = case_fd();
  const auto g = LinkGeometry::make(0, 600, 2);
  ValueConditionSet vc{{0, 0}, std::vector<double>(5, 0.0), std::vector<double>(5, 0.0), 20.0};
  CHECK(m_downstream(vc, fd, g, 5, 100, 1200 - 49).value == doctest::Approx(24.5));
  CHECK_FALSE(m_downstream(vc, fd, g, 5, 85, 1200 - 49).is_finite());

  vc.outflow = {1.0, 0.5, 2.0, 0.0, 1.5};
  double cum = 0.0;
  for (int n = 1; n <= 5; ++n) {
    cum += vc.outflow[n - 1] * 20;
    CHECK(m_downstream(vc, fd, g, n, n * 20.0, 1200).value == doctest::Approx(cum));
  }
}

TEST_CASE("inf-morphism") {
  const auto fd = case_fd();
  const auto g = LinkGeometry::make(0, 600, 2);
  SUBCASE("initial values at t = 0") {
    ValueConditionSet vc{{0.05, 0.3}, {1.0}, {1.0}, 20.0};
    CHECK(moskowitz(vc, fd, g, 0, 300).value == doctest::Approx(-15));
    CHECK(moskowitz(vc, fd, g, 0, 900).value == doctest::Approx(-30 - 90));
  }
  SUBCASE("capacity inflow into an empty road") {
    ValueConditionSet vc{{0, 0}, std::vector<double>(4, fd.capacity),
                         std::vector<double>(4, 0.0), 20.0};
    // ahead of the front the empty initial condition rules; behind it the
    // upstream component does
    const double t = 30, x = 600;
    const auto up = m_upstream(vc, fd, g, 1, t, x).value;
    const auto up2 = m_upstream(vc, fd, g, 2, t, x).value;
    CHECK(moskowitz(vc, fd, g, t, x).value == doctest::Approx(std::min(up, up2)));
    CHECK(moskowitz(vc, fd, g, t, x).value == doctest::Approx(fd.capacity * 10));
    const std::vector<double> xs{0.0, 200.0, 599.0};
    for (double r : density_profile(vc, fd, g, 30, xs)) {
      CHECK(r == doctest::Approx(fd.rho_c));
    }
  }
}

TEST_CASE("density profile") {
  const auto fd = case_fd();
  const auto g = LinkGeometry::make(0, 600, 2);
  ValueConditionSet vc{{0.05, 0.3}, std::vector<double>(8, 0.0),
                       std::vector<double>(8, 0.0), 20.0};
  const std::vector<double> xs{0.0, 300.0, 599.0, 600.0, 900.0, 1200.0};
  const auto r0 = density_profile(vc, fd, g, 0, xs);
  CHECK(r0[0] == doctest::Approx(0.05));
  CHECK(r0[2] == doctest::Approx(0.05));
  CHECK(r0[3] == doctest::Approx(0.3));  // downstream side at the interface
  CHECK(r0[5] == doctest::Approx(0.3));

  // blocked downstream: jam builds up at the end
  const auto late = density_profile(vc, fd, g, 160, std::vector<double>{1100.0, 1200.0});
  CHECK(late[0] == doctest::Approx(fd.rho_m));
  CHECK(late[1] == doctest::Approx(fd.rho_m));
}

TEST_CASE("randomized compatible instances: structural properties") {
  std::mt19937_64 rng(7);
  const auto fd = case_fd();
  const auto g = LinkGeometry::make(0, 600, 2);
  for (int inst = 0; inst < 8; ++inst) {
    const auto vc = testsupport::random_compatible_vc(rng, fd, g, 8, 20.0);
    REQUIRE_NOTHROW(vc.validate(fd, g));
    const double stored = vc.stored_vehicles(g);
    for (int n = 1; n <= 8; ++n) {
      const double t = n * 20.0;
      // compatible boundary data is reproduced by the combined solution
      CHECK(moskowitz(vc, fd, g, t, 0).value ==
            doctest::Approx(vc.cumulative_inflow(n)).epsilon(1e-9).scale(1.0));
      CHECK(moskowitz(vc, fd, g, t, 1200).value ==
            doctest::Approx(-stored + vc.cumulative_outflow(n)).scale(1.0));
    }
    // also inside steps, where waves reach a boundary between step ends
    for (double t = 0.25; t < 160; t += 0.5) {
      const int n = static_cast<int>(t / 20.0) + 1;
      const double cin = vc.cumulative_inflow(n - 1) + vc.inflow[n - 1] * (t - (n - 1) * 20.0);
      const double cout = vc.cumulative_outflow(n - 1) + vc.outflow[n - 1] * (t - (n - 1) * 20.0);
      CHECK(moskowitz(vc, fd, g, t, 0).value == doctest::Approx(cin).scale(1.0));
      CHECK(moskowitz(vc, fd, g, t, 1200).value == doctest::Approx(cout - stored).scale(1.0));
    }
    for (double t = 0; t <= 160; t += 13) {
      double prev = kInf;
      for (double x = 0; x <= 1200; x += 37.5) {
        const double m = moskowitz(vc, fd, g, t, x).value;
        REQUIRE(std::isfinite(m));
        CHECK(m <= prev + 1e-9);
        prev = m;
        if (t + 13 <= 160) CHECK(moskowitz(vc, fd, g, t + 13, x).value >= m - 1e-9);
        for (int k = 1; k <= 2; ++k) CHECK(m <= m_initial(vc, fd, g, k, t, x).value);
        for (int n = 1; n <= 8; ++n) {
          CHECK(m <= m_upstream(vc, fd, g, n, t, x).value);
          CHECK(m <= m_downstream(vc, fd, g, n, t, x).value);
        }
      }
      std::vector<double> xs;
      for (double x = 0; x <= 1200; x += 10) xs.push_back(x);
      for (double r : density_profile(vc, fd, g, t, xs)) {
        CHECK(r >= 0.0);
        CHECK(r <= fd.rho_m);
      }
    }
    // mass bookkeeping of exact segment averages
    const auto seg = segment_densities(vc, fd, g, 160);
    const double on_link = (seg[0] + seg[1]) * 600;
    CHECK(on_link == doctest::Approx(stored + vc.cumulative_inflow(8) - vc.cumulative_outflow(8)));
  }
}

TEST_CASE("closed form agrees with the finite-volume oracle") {
  std::mt19937_64 rng(2024);
  const auto fd = case_fd();
  const auto g = LinkGeometry::make(0, 600, 2);
  for (int inst = 0; inst < 5; ++inst) {
    const auto vc = testsupport::random_compatible_vc(rng, fd, g, 8, 20.0);
    const auto coarse = testsupport::compare_with_godunov(vc, fd, g, 4);
    const auto mid = testsupport::compare_with_godunov(vc, fd, g, 8);
    const auto fine = testsupport::compare_with_godunov(vc, fd, g, 16);
    const auto finest = testsupport::compare_with_godunov(vc, fd, g, 32);
    CHECK(mid.density <= 0.15 * fd.rho_m);
    CHECK(mid.count < coarse.count);
    CHECK(fine.count < mid.count);
    CHECK(finest.count < fine.count);
    CHECK(finest.count < 0.5 * coarse.count);
  }
}

TEST_CASE("godunov oracle edge cases") {
  const auto fd = case_fd();
  const auto g = LinkGeometry::make(0, 600, 2);
  ValueConditionSet vc{{0, 0}, std::vector<double>(3, 0.0), std::vector<double>(3, 0.0), 20.0};
  auto f = godunov_oracle(vc, fd, g, 2.5, 75);
  for (const auto& row : f.density)
    for (double r : row) CHECK(r == 0.0);

  vc.initial_density = {0.0, fd.rho_m};
  vc.inflow = {1.0, 1.0, 1.0};
  f = godunov_oracle(vc, fd, g, 2.5, 75);
  CHECK(f.density.back()[8] == doctest::Approx(fd.rho_m));
  CHECK(f.density.back()[15] == doctest::Approx(fd.rho_m));
  CHECK_THROWS_AS(godunov_oracle(vc, fd, g, 3.0, 75), InvalidParameter);
}
