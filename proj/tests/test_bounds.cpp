#include <doctest.h>

#include <cmath>

#include "aplicur/bounds.hpp"

using namespace aplicur;

TEST_SUITE_BEGIN("bounds");

TEST_CASE("chebyshev factor") {
  CHECK(chebyshev_bound(1.0, 1) == 0.0);
  CHECK(chebyshev_bound(1.0, 5) == 0.0);
  CHECK(chebyshev_bound(7.0, 0) == 2.0);
  CHECK(chebyshev_bound(10.0, 1) == doctest::Approx(18.0 / 11.0).epsilon(1e-15));
  CHECK_THROWS_AS((void)chebyshev_bound(0.5, 1), Error);
}

TEST_CASE("two-interval factor") {
  SUBCASE("degenerate clusters with unit trailing ratio give zero") {
    // both clusters single points, kappa_{l+1} = 1 => C = 1 => factor 0
    SpectrumSummary s = SpectrumSummary::make({2.0, 2.0, 1.0, 1.0}, 2);
    CHECK(two_interval_bound(s, 2) == 0.0);
  }
  SUBCASE("worked example") {
    SpectrumSummary s = SpectrumSummary::make({10.0, 9.0, 2.0, 1.0}, 2);
    CHECK(s.width_leading() == doctest::Approx(19.0));
    CHECK(s.width_trailing() == doctest::Approx(3.0));
    CHECK(s.width() == doctest::Approx(19.0));
    double c = 4.0 + 19.0;
    double base = (std::sqrt(c) - 1.0) / (std::sqrt(c) + 1.0);
    TwoIntervalDebug dbg;
    CHECK(two_interval_bound(s, 4, &dbg) == doctest::Approx(base * base).epsilon(1e-14));
    CHECK(dbg.c_stated == doctest::Approx(c));
    CHECK(dbg.a == doctest::Approx(1.0));
    CHECK(dbg.c == doctest::Approx(81.0));
  }
  SUBCASE("first two iterations cost nothing") {
    SpectrumSummary s = SpectrumSummary::make({10.0, 9.0, 2.0, 1.0}, 2);
    CHECK(two_interval_bound(s, 0) == 1.0);
    CHECK(two_interval_bound(s, 1) == 1.0);
  }
  SUBCASE("overlapping clusters are rejected") {
    SpectrumSummary s = SpectrumSummary::make({3.0, 2.0, 2.0, 1.0}, 2);
    CHECK_THROWS_AS((void)two_interval_bound(s, 2), Error);
  }
}

TEST_CASE("condition number bound") {
  CHECK(cond_number_bound(2.0, 0.5, 0.0) == doctest::Approx(std::sqrt(4.25) / 0.5));
  CHECK(cond_number_bound(0.0, 0.5, 0.0) == doctest::Approx(1.0));
  CHECK(cond_number_bound(1.0, 0.1, 0.05) ==
        doctest::Approx((std::sqrt(1.01) + 0.05) / 0.05).epsilon(1e-14));
  CHECK_THROWS_AS((void)cond_number_bound(1.0, 0.1, 0.2), Error);
}

TEST_CASE("multiphase factor") {
  SUBCASE("single phase with zero iterations is the constant 2") {
    PhaseBoundTerm t{0.01, 1.0, 0};
    CHECK(multiphase_bound(std::span(&t, 1), 0.1) == doctest::Approx(2.0));
  }
  SUBCASE("perfect approximation and zero target contract to zero") {
    PhaseBoundTerm t{0.0, 0.0, 1};
    CHECK(multiphase_bound(std::span(&t, 1), 0.1) == doctest::Approx(0.0));
  }
  SUBCASE("two phases against a hand-rolled product") {
    std::vector<PhaseBoundTerm> phases{{0.01, 1.0, 3}, {0.001, 0.5, 4}};
    double mu = 0.1;
    double b1 = 1.0 - 2.0 * (mu - 0.01) / (mu + std::sqrt(1.0 + mu * mu));
    double b2 = 1.0 - 2.0 * (mu - 0.001) / (mu + std::sqrt(0.25 + mu * mu));
    double expect = 4.0 * std::pow(b1, 3) * std::pow(b2, 4);
    CHECK(multiphase_bound(phases, mu) == doctest::Approx(expect).epsilon(1e-14));
  }
  SUBCASE("violated precondition is refused") {
    PhaseBoundTerm t{0.2, 1.0, 2};
    CHECK_THROWS_AS((void)multiphase_bound(std::span(&t, 1), 0.1), Error);
  }
}

TEST_CASE("cross-approximation existence factors") {
  CurExistenceFactors f1 = cur_existence_bounds(4, 9, 4);
  CHECK(f1.spectral == doctest::Approx(1.0)); // l = min(m, n)
  CurExistenceFactors f2 = cur_existence_bounds(1, 2, 2);
  CHECK(f2.frob == doctest::Approx(2.0));
  CHECK(f2.spectral == doctest::Approx(2.0)); // sqrt(1 + 1*3*1)
  CHECK(cur_existence_bounds(3, 20, 10).frob == doctest::Approx(4.0));
}

TEST_CASE("two-interval beats chebyshev on strongly clustered spectra") {
  // soft dominance check: with a big gap, the clustered factor is at most
  // half the chebyshev factor at matched iteration counts
  std::vector<double> sig{100.0, 99.5, 99.0, 1.2, 1.1, 1.0};
  SpectrumSummary s = SpectrumSummary::make(sig, 3);
  double kappa = 100.0;
  for (Index k = 2; k <= 12; k += 2)
    CHECK(two_interval_bound(s, k) <= chebyshev_bound(kappa, k) / 2.0);
}

TEST_SUITE_END();
