// Experiment-layer tests: confidence intervals against hand-computed
// values, and (as the module grows) campaign determinism and reports.
#include <catch2/catch_amalgamated.hpp>

#include "graspkit/experiment.hpp"

using namespace graspkit;
using experiment::wilson_interval;

TEST_CASE("wilson interval matches hand-computed endpoints", "[experiment]") {
  // 0/10: the interval must keep a zero numerator away from a degenerate
  // [0,0]; closed form gives (0, z^2/(n+z^2)).
  auto zero = wilson_interval(0, 10);
  CHECK(zero.lo == Catch::Approx(0.0).margin(1e-12));
  CHECK(zero.hi == Catch::Approx(3.8416 / (10 + 3.8416)).epsilon(1e-6));
  CHECK(zero.hi == Catch::Approx(0.277540).margin(5e-6));

  // 10/10 mirrors 0/10.
  auto full = wilson_interval(10, 10);
  CHECK(full.lo == Catch::Approx(1.0 - zero.hi).margin(1e-12));
  CHECK(full.hi == Catch::Approx(1.0).margin(1e-12));

  // 50/100 is symmetric about 1/2 with width just under 0.2.
  auto half = wilson_interval(50, 100);
  CHECK(half.lo + half.hi == Catch::Approx(1.0).margin(1e-12));
  CHECK(half.width() == Catch::Approx(0.19234).margin(5e-5));

  CHECK(wilson_interval(199, 200).hi > wilson_interval(199, 200).lo);
  CHECK_THROWS(wilson_interval(0, 0));
  CHECK_THROWS(wilson_interval(5, 4));
  CHECK_THROWS(wilson_interval(-1, 4));
}

TEST_CASE("wilson interval always covers the point estimate", "[experiment]") {
  for (int n : {1, 3, 10, 37, 100, 1000}) {
    for (int s = 0; s <= n; s += std::max(1, n / 7)) {
      auto iv = wilson_interval(s, n);
      double p = double(s) / n;
      CHECK(iv.lo >= 0.0);
      CHECK(iv.hi <= 1.0);
      CHECK(iv.lo <= p + 1e-12);
      CHECK(iv.hi >= p - 1e-12);
    }
  }
}
