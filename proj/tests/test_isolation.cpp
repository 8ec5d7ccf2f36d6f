#include <doctest.h>

#include "modlab/error.hpp"
#include "modlab/isolation.hpp"
#include "modlab/oracles.hpp"
#include "modlab/rng.hpp"

#include <cmath>
#include <numbers>

using namespace modlab;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Matrix circle_points(int p, int k, double phase, double radius, bool reflect = false) {
  Matrix m(p, 2);
  for (int t = 0; t < p; ++t) {
    const double angle = phase + kTwoPi * k * t / p;
    m(t, 0) = radius * std::cos(angle) + 0.3;
    m(t, 1) = radius * std::sin(angle) * (reflect ? -1.0 : 1.0) - 1.1;
  }
  return m;
}

// Analytic pizza at frequency k widened to eight embedding columns. Columns
// 2 and 3 carry a weaker circle at 2k that the network ignores.
ModelParams pizza_with_companion(int p, int k) {
  ModelParams m = build_analytic_pizza({p, k}).network;
  Matrix& e = m.at("W_E");
  Matrix wide = Matrix::Zero(p, 8);
  wide.leftCols(2) = e;
  for (int t = 0; t < p; ++t) {
    wide(t, 2) = 0.5 * std::cos(kTwoPi * 2 * k * t / p);
    wide(t, 3) = 0.5 * std::sin(kTwoPi * 2 * k * t / p);
    wide(t, 4) = 0.01 * std::cos(kTwoPi * 7 * t / p);
    wide(t, 5) = 0.01 * std::sin(kTwoPi * 7 * t / p);
  }
  e = wide;
  Matrix& w = m.at("L1.W");
  Matrix tall = Matrix::Zero(8, w.cols());
  tall.topRows(2) = w;
  w = tall;
  return m;
}

}  // namespace

TEST_CASE("Frequency estimation recovers every k") {
  const int p = 59;
  SeededRng rng(4);
  for (int k = 1; k < p; ++k) {
    const double phase = rng.uniform(0.0, kTwoPi);
    const FrequencyEstimate e = estimate_k(circle_points(p, k, phase, 1.0 + rng.uniform()));
    CHECK(e.k == k);
    CHECK(e.k_mirror == p - k);
    CHECK(e.misfit < 1e-12);
    CHECK(e.circular);
    // A mirror image runs the other way round.
    CHECK(estimate_k(circle_points(p, k, phase, 2.0, true)).k == p - k);
  }
}

TEST_CASE("Frequency estimation flags scattered points") {
  SeededRng rng(5);
  Matrix pts(59, 2);
  for (Index i = 0; i < pts.size(); ++i) pts.data()[i] = rng.normal();
  const FrequencyEstimate e = estimate_k(pts);
  CHECK_FALSE(e.circular);
  CHECK(e.misfit > kCircleMisfitThreshold);
  CHECK_THROWS_AS(estimate_k(Matrix::Zero(59, 3)), Error);
}

TEST_CASE("Modular inverse and circle gap") {
  for (int k = 1; k < 59; ++k) {
    const int inv = modular_inverse(k, 59);
    CHECK((k * inv) % 59 == 1);
    const int g = circle_gap(k, 59);
    CHECK(g >= 1);
    CHECK(g <= 29);
    CHECK(circle_gap(59 - k, 59) == g);
  }
  // Frequency 17 at p = 59: neighbouring points differ by 7 tokens.
  CHECK(circle_gap(17, 59) == 7);
  CHECK(circle_gap(1, 59) == 1);
  CHECK_THROWS_AS(modular_inverse(4, 12), Error);
}

TEST_CASE("Keeping every component reproduces the embeddings") {
  RunConfig c;
  c.family = Family::linear_alpha;
  c.p = 11;
  c.width = 16;
  const ModelParams m = build(c);
  std::vector<int> all(11);
  for (int i = 0; i < 11; ++i) all[static_cast<std::size_t>(i)] = i;
  const ModelParams back = isolate_components(m, all, true);
  CHECK((back.at("W_E") - m.at("W_E")).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(back.at("L1.W") == m.at("L1.W"));
  const ModelParams centred = isolate_components(m, all, false);
  CHECK(centred.at("W_E").colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  const std::vector<int> bad{11};
  CHECK_THROWS_AS(isolate_components(m, bad), Error);
}

TEST_CASE("Isolation report on a pizza with a doubled-frequency companion") {
  const int p = 59, k = 3;
  const ModelParams m = pizza_with_companion(p, k);
  IsolationOptions o;
  o.n_pairs = 2;
  IsolationSummary s = isolation_summary(m, o);
  REQUIRE(s.circles.size() == 2);
  const CircleReport& lead = s.circles[0];
  CHECK(lead.circular);
  CHECK((lead.k == k || lead.k_mirror == k));
  CHECK(lead.gap == circle_gap(k, p));
  REQUIRE(lead.fve_pizza);
  REQUIRE(lead.fve_clock);
  CHECK(*lead.fve_pizza >= 0.98);
  CHECK(*lead.fve_pizza - *lead.fve_clock >= 0.1);
  // Isolating the lead circle recovers the bare pizza network.
  CHECK(lead.isolated_accuracy == doctest::Approx(accuracy_all_pairs(build_analytic_pizza({p, k}).network)));

  const CircleReport& second = s.circles[1];
  CHECK(second.circular);
  CHECK((second.k == 2 * k || second.k_mirror == 2 * k));
  // The network ignores this circle, so its isolated logits are constant.
  CHECK_FALSE(second.fve_pizza.has_value());

  REQUIRE(s.accompanying_pairs.size() == 1);
  CHECK(s.accompanying_pairs[0] == std::pair{0, 1});
  CHECK(s.circles[1].is_accompanying);
  CHECK(s.circles[0].partner == 1);
  REQUIRE(s.accompanied_accuracy);
  REQUIRE(s.accompanying_accuracy);
  CHECK(*s.accompanied_accuracy > *s.accompanying_accuracy);
  CHECK(s.leading_accuracy == doctest::Approx(*s.accompanied_accuracy));
}

TEST_CASE("Accompanying detection follows the doubled gap") {
  std::vector<CircleReport> r(3);
  for (auto& c : r) c.circular = true;
  r[0].gap = 20;
  r[1].gap = 13;
  r[2].gap = 10;
  auto pairs = detect_accompanying(r, 59);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0] == std::pair{0, 2});
  CHECK(r[2].is_accompanying);
  CHECK_FALSE(r[1].partner.has_value());

  // Folded gaps: 2 * 25 = 50 = -9 (mod 59).
  std::vector<CircleReport> f(2);
  for (auto& c : f) c.circular = true;
  f[0].gap = 9;
  f[1].gap = 25;
  CHECK(detect_accompanying(f, 59).size() == 1);

  f[1].circular = false;
  f[1].is_accompanying = false;
  f[0].partner.reset();
  CHECK(detect_accompanying(f, 59).empty());
}

TEST_CASE("Removing the outer ReLU of a beta model") {
  RunConfig c;
  c.family = Family::linear_beta;
  c.p = 11;
  c.width = 16;
  ModelParams m = build(c);
  const ReluRemoval r = relu_removal_check(m);
  CHECK(r.accuracy_delta == doctest::Approx(r.accuracy_after - r.accuracy_before));
  CHECK(std::isfinite(r.loss_before));
  CHECK(std::isfinite(r.loss_after));
  // Large positive biases make the ReLU the identity.
  m.at("L2.b").setConstant(100.0);
  const ReluRemoval same = relu_removal_check(m);
  CHECK(same.loss_before == doctest::Approx(same.loss_after).epsilon(1e-12));

  c.family = Family::linear_alpha;
  CHECK_THROWS_AS(relu_removal_check(build(c)), Error);
}

TEST_CASE("Aligned weights and the domino score") {
  Matrix pure = Matrix::Zero(6, 4);
  pure(0, 0) = 1.0;
  pure(1, 0) = 2.0;
  pure(3, 1) = -1.0;
  pure(4, 2) = 0.5;
  pure(5, 2) = 0.5;
  CHECK(domino_score(pure) == doctest::Approx(1.0));
  Matrix spread = Matrix::Ones(6, 2);
  CHECK(domino_score(spread) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(domino_score(Matrix::Zero(6, 3)), Error);

  RunConfig c;
  c.family = Family::linear_beta;
  c.p = 11;
  c.width = 16;
  const AlignedWeights a = align_weights(build(c), 6);
  CHECK(a.w1.rows() == 6);
  CHECK(a.w1.cols() == 16);
  CHECK(a.w2.rows() == 16);
  CHECK(a.w2.cols() == 6);
  CHECK(a.domino_score > 0.0);
  CHECK(a.domino_score <= 1.0);
  CHECK_THROWS_AS(align_weights(build(c), 5), Error);

  c.family = Family::linear_alpha;
  const AlignedWeights alpha = align_weights(build(c), 4);
  CHECK(alpha.w2.rows() == 16);
  c.family = Family::linear_delta;
  CHECK_THROWS_AS(align_weights(build(c), 6), Error);
}

TEST_CASE("Unit circle response of an absolute value") {
  // relu(cos t) + relu(-cos t) = |cos t| = 2/pi + (4 / 3pi) cos 2t + ...
  Matrix slice(2, 2);
  slice << 1.0, -1.0, 0.0, 0.0;
  const Vector bias = Vector::Zero(2);
  const Vector out = Vector::Ones(2);
  const UnitCircleFit f = fit_unit_circle_response(slice, bias, out);
  const double pi = std::numbers::pi;
  CHECK(f.offset == doctest::Approx(2.0 / pi).epsilon(1e-6));
  CHECK(f.amplitude == doctest::Approx(4.0 / (3.0 * pi)).epsilon(1e-6));
  CHECK(std::abs(f.phase) < 1e-9);
  CHECK(f.best_frequency == 2);
  const double variance = 0.5 - 4.0 / (pi * pi);
  CHECK(f.residual_fraction == doctest::Approx(1.0 - 0.5 * std::pow(4.0 / (3.0 * pi), 2) / variance).epsilon(1e-5));
  CHECK_THROWS_AS(fit_unit_circle_response(Matrix::Zero(2, 2), bias, out), Error);
}
