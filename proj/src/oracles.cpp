#include "modlab/oracles.hpp"

#include "modlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace modlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Angle of integer step n on the circle of spec, reduced mod p first.
double angle(const CircleSpec& spec, long n) {
  const long p = spec.p;
  const long r = ((n * spec.k) % p + p) % p;
  return kTwoPi * static_cast<double>(r) / static_cast<double>(p);
}

void check_tokens(const CircleSpec& spec, int a, int b, int c) {
  if (a < 0 || b < 0 || c < 0 || a >= spec.p || b >= spec.p || c >= spec.p) {
    fail_usage("token outside [0, p)");
  }
}

Matrix circle_table(int p, double w) {
  Matrix m(p, 2);
  for (int t = 0; t < p; ++t) {
    m(t, 0) = std::cos(w * t);
    m(t, 1) = std::sin(w * t);
  }
  return m;
}

// 2 x p unembedding with columns (cos w c, sin w c).
Matrix unembedding(int p, double w) { return circle_table(p, w).transpose(); }

template <typename F>
std::vector<double> tensor_of(const CircleSpec& spec, F f) {
  validate(spec);
  const int p = spec.p;
  std::vector<double> out(static_cast<std::size_t>(p) * p * p);
  std::size_t i = 0;
  for (int a = 0; a < p; ++a) {
    for (int b = 0; b < p; ++b) {
      for (int c = 0; c < p; ++c) out[i++] = f(spec, a, b, c);
    }
  }
  return out;
}

}  // namespace

double CircleSpec::w() const { return kTwoPi * static_cast<double>(k) / static_cast<double>(p); }

void validate(const CircleSpec& spec) {
  if (spec.p < 2) fail_usage("circle spec: p must be at least 2");
  if (spec.k < 1 || spec.k > spec.p - 1) {
    fail_usage("circle spec: k=" + std::to_string(spec.k) + " outside [1, p-1]");
  }
}

double clock_logit(const CircleSpec& spec, int a, int b, int c) {
  check_tokens(spec, a, b, c);
  return std::cos(angle(spec, static_cast<long>(a) + b - c));
}

double clock_logit_bilinear(const CircleSpec& spec, int a, int b, int c) {
  check_tokens(spec, a, b, c);
  const double w = spec.w();
  const double ax = std::cos(w * a), ay = std::sin(w * a);
  const double bx = std::cos(w * b), by = std::sin(w * b);
  const double cx = std::cos(w * c), cy = std::sin(w * c);
  return (ax * bx - ay * by) * cx + (ax * by + ay * bx) * cy;
}

double pizza_logit(const CircleSpec& spec, int a, int b, int c) {
  check_tokens(spec, a, b, c);
  // Half angle of w_k (a - b), unreduced so the absolute value sees the
  // true half-turn count.
  const double half = 0.5 * spec.w() * static_cast<double>(a - b);
  return std::abs(std::cos(half)) * std::cos(angle(spec, static_cast<long>(a) + b - c));
}

double accompanying_logit(const CircleSpec& spec, int a, int b, int c) {
  check_tokens(spec, a, b, c);
  const double ta = angle(spec, 2L * a);
  const double tb = angle(spec, 2L * b);
  const double sx = 0.5 * (std::cos(ta) + std::cos(tb));
  const double sy = 0.5 * (std::sin(ta) + std::sin(tb));
  const double tc = angle(spec, c);
  return -(std::cos(tc) * sx + std::sin(tc) * sy);
}

PizzaFeatures pizza_example_features(const CircleSpec& spec, int a, int b) {
  check_tokens(spec, a, b, 0);
  const double ta = angle(spec, a), tb = angle(spec, b);
  const double sx = std::cos(ta) + std::cos(tb);
  const double sy = std::sin(ta) + std::sin(tb);
  PizzaFeatures f;
  f.alpha = std::abs(sx) - std::abs(sy);
  f.beta = std::abs(sx + sy) / std::numbers::sqrt2 - std::abs(sx - sy) / std::numbers::sqrt2;
  return f;
}

double pizza_example_logit(const CircleSpec& spec, int a, int b, int c) {
  const PizzaFeatures f = pizza_example_features(spec, a, b);
  const double tc = angle(spec, c);
  return f.alpha * std::cos(tc) + f.beta * std::sin(tc);
}

AnalyticModel build_analytic_clock(const CircleSpec& spec) {
  validate(spec);
  AnalyticModel m;
  m.kind = AnalyticKind::clock;
  m.spec = spec;
  m.network.arch.family = Family::analytic_clock;
  m.network.arch.p = spec.p;
  m.network.arch.width = 2;
  m.network.tensors.push_back({"W_E", circle_table(spec.p, spec.w())});
  m.network.tensors.push_back({"W_U", unembedding(spec.p, spec.w())});
  return m;
}

AnalyticModel build_analytic_pizza(const CircleSpec& spec) {
  validate(spec);
  const double r = 1.0 / std::numbers::sqrt2;
  // Projections of E_a + E_b: x, y, (x + y)/sqrt2, (x - y)/sqrt2, then their
  // negations so relu(h) + relu(-h) = |h|.
  Matrix project(2, 4);
  project << 1.0, 0.0, r, r,
             0.0, 1.0, r, -r;
  Matrix l1(2, 8);
  l1 << project, -project;
  // Hidden units -> (alpha, beta).
  Matrix combine(8, 2);
  combine << 1, 0,  -1, 0,  0, 1,  0, -1,
             1, 0,  -1, 0,  0, 1,  0, -1;

  AnalyticModel m;
  m.kind = AnalyticKind::pizza_example;
  m.spec = spec;
  m.network.arch.family = Family::linear_alpha;
  m.network.arch.p = spec.p;
  m.network.arch.width = 2;
  m.network.tensors.push_back({"W_E", circle_table(spec.p, spec.w())});
  m.network.tensors.push_back({"L1.W", l1});
  m.network.tensors.push_back({"L1.b", Matrix::Zero(1, 8)});
  m.network.tensors.push_back({"W_U", combine * unembedding(spec.p, spec.w())});
  return m;
}

AnalyticModel build_analytic_accompanying(const CircleSpec& spec) {
  validate(spec);
  AnalyticModel m;
  m.kind = AnalyticKind::accompanying;
  m.spec = spec;
  m.network.arch.family = Family::analytic_linear;
  m.network.arch.p = spec.p;
  m.network.arch.width = 2;
  Matrix doubled(spec.p, 2);
  for (int t = 0; t < spec.p; ++t) {
    const double th = angle(spec, 2L * t);
    doubled(t, 0) = std::cos(th);
    doubled(t, 1) = std::sin(th);
  }
  m.network.tensors.push_back({"W_E", doubled});
  // Midpoint (x1 + x2)/2 dotted with -U_c.
  m.network.tensors.push_back({"W_U", -0.5 * unembedding(spec.p, spec.w())});
  return m;
}

std::optional<double> fve(std::span<const double> target, std::span<const double> predicted) {
  if (target.size() != predicted.size()) fail_usage("fve: tensors differ in size");
  if (target.empty()) return std::nullopt;
  const double mt = mean_of(target), mp = mean_of(predicted);
  const double st = stddev_of(target), sp = stddev_of(predicted);
  // Relative floor: a tensor whose spread is rounding noise is constant.
  const double scale_t = std::max(1.0, std::abs(mt)), scale_p = std::max(1.0, std::abs(mp));
  if (!(st > 1e-12 * scale_t) || !(sp > 1e-12 * scale_p)) return std::nullopt;
  double mse = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = (target[i] - mt) / st - (predicted[i] - mp) / sp;
    mse += d * d;
  }
  return 1.0 - mse / static_cast<double>(target.size());
}

double abs_cos_identity_deviation(int grid) {
  if (grid < 1000) fail_usage("abs_cos_identity_deviation: grid must be at least 1000");
  double worst = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double t = kTwoPi * static_cast<double>(i) / static_cast<double>(grid);
    worst = std::max(worst, std::abs(std::abs(std::cos(t)) - std::abs(std::sin(t)) - std::cos(2.0 * t)));
  }
  return worst;
}

double symmetric_decomposition_check(double alpha, double beta, int grid) {
  if (grid < 1) fail_usage("symmetric_decomposition_check: grid must be positive");
  double worst = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double x = kTwoPi * i / grid;
    for (int j = 0; j < grid; ++j) {
      const double y = kTwoPi * j / grid;
      const double lhs = alpha * (std::cos(x) + std::cos(y)) + beta * (std::sin(x) + std::sin(y));
      const double rhs = std::cos((x - y) / 2.0) *
                         (2.0 * alpha * std::cos((x + y) / 2.0) + 2.0 * beta * std::sin((x + y) / 2.0));
      worst = std::max(worst, std::abs(lhs - rhs));
    }
  }
  return worst;
}

std::vector<double> clock_logit_tensor(const CircleSpec& spec) { return tensor_of(spec, clock_logit); }
std::vector<double> pizza_logit_tensor(const CircleSpec& spec) { return tensor_of(spec, pizza_logit); }
std::vector<double> accompanying_logit_tensor(const CircleSpec& spec) {
  return tensor_of(spec, accompanying_logit);
}

}  // namespace modlab
