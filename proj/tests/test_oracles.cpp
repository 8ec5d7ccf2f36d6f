#include <doctest.h>

#include "modlab/error.hpp"
#include "modlab/metrics.hpp"
#include "modlab/oracles.hpp"
#include "modlab/rng.hpp"
#include "modlab/training.hpp"

#include <cmath>
#include <numbers>

using namespace modlab;

namespace {

constexpr double kPi = std::numbers::pi;

// Exact maximum of | |cos t| - |sin t| - cos 2t |. On the first quadrant the
// expression factors as (cos t - sin t)(1 - cos t - sin t); with
// u = cos t + sin t this is sqrt(2 - u^2)(u - 1), maximal where
// 2u^2 - u - 2 = 0.
double abs_cos_exact_maximum() {
  const double u = (1.0 + std::sqrt(17.0)) / 4.0;
  return std::sqrt(2.0 - u * u) * (u - 1.0);
}

std::vector<double> logits_of(const ModelParams& m) {
  const int p = m.arch.p;
  const Matrix l = logits_for(m, all_pairs(p));
  return {l.data(), l.data() + l.size()};
}

}  // namespace

TEST_CASE("Clock logits on the twelve-hour face") {
  const CircleSpec face{12, 1};
  CHECK(clock_logit(face, 10, 3, 1) == doctest::Approx(1.0).epsilon(1e-15));
  for (int a = 0; a < 12; ++a)
    for (int b = 0; b < 12; ++b) CHECK(clock_logit(face, a, b, (a + b) % 12) == 1.0);
  CHECK_THROWS_AS(clock_logit(face, 12, 0, 0), Error);
}

TEST_CASE("Clock logit equals its bilinear expansion") {
  for (int k : {1, 17}) {
    const CircleSpec s{59, k};
    double worst = 0.0;
    for (int a = 0; a < 59; ++a)
      for (int b = 0; b < 59; ++b)
        for (int c = 0; c < 59; ++c) worst = std::max(worst, std::abs(clock_logit(s, a, b, c) - clock_logit_bilinear(s, a, b, c)));
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("Clock logit is maximal only on the solution set") {
  const CircleSpec s{59, 5};
  for (int a = 0; a < 59; a += 7)
    for (int b = 0; b < 59; b += 3)
      for (int c = 0; c < 59; ++c) {
        if (c == (a + b) % 59) CHECK(clock_logit(s, a, b, c) == 1.0);
        else CHECK(clock_logit(s, a, b, c) < 1.0 - 1e-6);
      }
}

TEST_CASE("Pizza logits vanish on antipodal pairs") {
  const CircleSpec face{12, 1};
  for (int c = 0; c < 12; ++c) {
    CHECK(std::abs(pizza_logit(face, 1, 7, c)) < 1e-12);
    CHECK(std::abs(pizza_logit(face, 2, 8, c)) < 1e-12);
  }
  for (int a = 0; a < 12; ++a) CHECK(pizza_logit(face, a, a, (2 * a) % 12) == doctest::Approx(1.0));
  // Odd modulus: no antipodal pairs.
  const CircleSpec odd{59, 1};
  for (int a = 0; a < 59; ++a)
    for (int b = 0; b < 59; ++b) CHECK(std::abs(pizza_logit(odd, a, b, (a + b) % 59)) > 1e-3);
}

TEST_CASE("Pizza correct logits are constant along a fixed difference") {
  const CircleSpec s{59, 3};
  for (int r = 0; r < 59; ++r) {
    const double first = pizza_logit(s, r, 0, r);
    CHECK(first == doctest::Approx(std::abs(std::cos(s.w() * r / 2.0))).epsilon(1e-12));
    for (int b = 1; b < 59; ++b) {
      const int a = (b + r) % 59;
      CHECK(pizza_logit(s, a, b, (a + b) % 59) == doctest::Approx(first).epsilon(1e-12));
    }
  }
}

TEST_CASE("Accompanying logit closed form") {
  for (int k : {1, 4, 29}) {
    const CircleSpec s{59, k};
    for (int a = 0; a < 59; a += 5)
      for (int b = 0; b < 59; b += 4)
        for (int c = 0; c < 59; c += 3) {
          const double w = s.w();
          const double expected = -std::cos(w * (a - b)) * std::cos(w * (a + b - c));
          CHECK(accompanying_logit(s, a, b, c) == doctest::Approx(expected).epsilon(1e-12).scale(1.0));
        }
  }
  const CircleSpec s{59, 2};
  for (int a = 0; a < 59; ++a) CHECK(accompanying_logit(s, a, a, (2 * a) % 59) == doctest::Approx(-1.0));
  // Near-antipodal on the accompanied circle: large positive at c = a + b.
  const CircleSpec face{12, 1};
  CHECK(accompanying_logit(face, 1, 7, 8) == doctest::Approx(1.0));
}

TEST_CASE("Example pizza circuit approximates the pizza formula") {
  const CircleSpec s{59, 1};
  const AnalyticModel m = build_analytic_pizza(s);
  CHECK(m.kind == AnalyticKind::pizza_example);
  const auto logits = logits_of(m.network);
  const auto target = pizza_logit_tensor(s);
  const auto f = fve(target, logits);
  REQUIRE(f.has_value());
  CHECK(*f >= 0.98);
  // The network reproduces the scalar definition.
  for (int a = 0; a < 59; a += 6)
    for (int b = 0; b < 59; b += 5)
      for (int c = 0; c < 59; c += 7)
        CHECK(logits[(static_cast<std::size_t>(a) * 59 + b) * 59 + c] ==
              doctest::Approx(pizza_example_logit(s, a, b, c)).epsilon(1e-12).scale(1.0));
  // Symmetric in the operands.
  for (int a = 0; a < 59; ++a)
    for (int b = 0; b < 59; ++b)
      for (int c = 0; c < 59; c += 11)
        CHECK(logits[(static_cast<std::size_t>(a) * 59 + b) * 59 + c] ==
              logits[(static_cast<std::size_t>(b) * 59 + a) * 59 + c]);
}

TEST_CASE("Example pizza features come from the summed embeddings") {
  const CircleSpec s{59, 1};
  const auto f1 = pizza_example_features(s, 3, 10);
  const auto f2 = pizza_example_features(s, 10, 3);
  CHECK(f1.alpha == f2.alpha);
  CHECK(f1.beta == f2.beta);
  const double w = s.w();
  CHECK(pizza_example_logit(s, 3, 10, 7) ==
        doctest::Approx(f1.alpha * std::cos(w * 7) + f1.beta * std::sin(w * 7)).epsilon(1e-14));
}

TEST_CASE("Analytic clock and accompanying networks reproduce their formulas") {
  for (int k : {1, 17}) {
    const CircleSpec s{59, k};
    const auto clock = fve(clock_logit_tensor(s), logits_of(build_analytic_clock(s).network));
    REQUIRE(clock);
    CHECK(*clock == doctest::Approx(1.0).epsilon(1e-12));
    const auto acc = fve(accompanying_logit_tensor(s), logits_of(build_analytic_accompanying(s).network));
    REQUIRE(acc);
    CHECK(*acc == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(build_analytic_clock({59, 1}).network.arch.family == Family::analytic_clock);
  CHECK(accuracy_of(logits_for(build_analytic_clock({59, 3}).network, all_pairs(59)), [] {
          std::vector<int> t;
          for (const auto& q : all_pairs(59)) t.push_back((q.a + q.b) % 59);
          return t;
        }()) == 1.0);
}

TEST_CASE("Fraction of variance explained") {
  SeededRng rng(11);
  std::vector<double> x(500), y(500), noisy(500);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.normal();
    y[i] = 3.0 * x[i] - 7.0;
    noisy[i] = x[i] + 0.5 * rng.normal();
  }
  CHECK(*fve(x, x) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(*fve(x, y) == doctest::Approx(1.0).epsilon(1e-12));
  const double base = *fve(x, noisy);
  CHECK(base < 1.0);
  // Positive affine maps of either argument leave the value unchanged.
  std::vector<double> noisy2(noisy), x2(x);
  for (auto& v : noisy2) v = 0.25 * v + 100.0;
  for (auto& v : x2) v = 9.0 * v - 3.0;
  CHECK(*fve(x, noisy2) == doctest::Approx(base).epsilon(1e-10));
  CHECK(*fve(x2, noisy) == doctest::Approx(base).epsilon(1e-10));
  // Negated prediction: 1 - 4 = -3.
  std::vector<double> neg(x);
  for (auto& v : neg) v = -v;
  CHECK(*fve(x, neg) == doctest::Approx(-3.0).epsilon(1e-12));

  const std::vector<double> flat(500, 2.5);
  CHECK_FALSE(fve(flat, x).has_value());
  CHECK_FALSE(fve(x, flat).has_value());
  CHECK_THROWS_AS(fve(x, std::vector<double>(3, 1.0)), Error);
}

TEST_CASE("Absolute cosine identity deviation") {
  const double exact = abs_cos_exact_maximum();
  CHECK(exact == doctest::Approx(0.168375).epsilon(1e-6));
  const double grid = abs_cos_identity_deviation(100000);
  CHECK(grid < 0.25);
  CHECK(grid <= exact + 1e-15);
  CHECK(exact - grid < 1e-8);
  CHECK_THROWS_AS(abs_cos_identity_deviation(999), Error);
  // Both sides agree exactly at t = 0 and t = pi / 4.
  CHECK(std::abs(std::abs(std::cos(0.0)) - std::abs(std::sin(0.0)) - std::cos(0.0)) == 0.0);
  CHECK(std::abs(std::abs(std::cos(kPi / 4)) - std::abs(std::sin(kPi / 4)) - std::cos(kPi / 2)) < 1e-15);
}

TEST_CASE("Symmetric decomposition identity") {
  SeededRng rng(21);
  for (int i = 0; i < 10; ++i) {
    const double a = rng.uniform(-3.0, 3.0), b = rng.uniform(-3.0, 3.0);
    CHECK(symmetric_decomposition_check(a, b, 100) < 1e-12);
  }
  CHECK(symmetric_decomposition_check(1.0, 0.0, 100) < 1e-12);
  // x = y: both sides equal 2 cos x.
  const double x = 0.7;
  CHECK(std::cos(0.0) * 2.0 * std::cos(x) == doctest::Approx(std::cos(x) + std::cos(x)));
}

TEST_CASE("Circle specs are validated") {
  CHECK_THROWS_AS(validate(CircleSpec{59, 0}), Error);
  CHECK_THROWS_AS(validate(CircleSpec{59, 59}), Error);
  CHECK_THROWS_AS(build_analytic_pizza({1, 1}), Error);
  CHECK(CircleSpec{59, 1}.w() == doctest::Approx(2.0 * kPi / 59.0));
}
