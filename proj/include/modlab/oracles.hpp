#pragma once

#include "modlab/models.hpp"

#include <optional>
#include <span>

namespace modlab {

struct CircleSpec {
  int p = 59;
  int k = 1;

  // Angular step 2 pi k / p.
  double w() const;
};

void validate(const CircleSpec& spec);

// cos(w_k (a + b - c)).
double clock_logit(const CircleSpec& spec, int a, int b, int c);

// The same logit written as the bilinear form on unit-circle embeddings:
// (Ea_x Eb_x - Ea_y Eb_y) Ec_x + (Ea_x Eb_y + Ea_y Eb_x) Ec_y.
double clock_logit_bilinear(const CircleSpec& spec, int a, int b, int c);

// |cos(w_k (a - b) / 2)| * cos(w_k (a + b - c)).
double pizza_logit(const CircleSpec& spec, int a, int b, int c);

// Accompanying pizza: embed on the doubled circle, take the midpoint s and
// score class c by -(cos w_k c, sin w_k c) . s. Here w_k is the frequency of
// the accompanied circle.
double accompanying_logit(const CircleSpec& spec, int a, int b, int c);

// Intermediate pair of the example pizza circuit: four absolute values of
// projections of E_a + E_b, differenced.
struct PizzaFeatures {
  double alpha = 0.0;
  double beta = 0.0;
};
PizzaFeatures pizza_example_features(const CircleSpec& spec, int a, int b);
// alpha cos(w_k c) + beta sin(w_k c).
double pizza_example_logit(const CircleSpec& spec, int a, int b, int c);

enum class AnalyticKind { clock, pizza_example, accompanying };

// A closed-form algorithm packaged as a network so the autodiff engine and
// every metric can run on it unchanged.
struct AnalyticModel {
  AnalyticKind kind = AnalyticKind::clock;
  CircleSpec spec;
  ModelParams network;
};

AnalyticModel build_analytic_clock(const CircleSpec& spec);
// Example pizza circuit as a one-hidden-layer ReLU network (|x| = relu(x) +
// relu(-x)) with unit-circle embeddings and an analytic unembedding.
AnalyticModel build_analytic_pizza(const CircleSpec& spec);
AnalyticModel build_analytic_accompanying(const CircleSpec& spec);

// Fraction of variance explained after standardizing both tensors to mean
// 0, variance 1: 1 - mean squared difference. Absent when either tensor has
// zero variance.
std::optional<double> fve(std::span<const double> target, std::span<const double> predicted);

// max over t = 2 pi i / grid of | |cos t| - |sin t| - cos 2t |.
double abs_cos_identity_deviation(int grid);

// max residual of alpha(cos x + cos y) + beta(sin x + sin y) against
// cos((x - y)/2) (2 alpha cos((x + y)/2) + 2 beta sin((x + y)/2)) over a
// grid x grid lattice of [0, 2 pi)^2.
double symmetric_decomposition_check(double alpha, double beta, int grid);

// Closed-form logit tensors over all (a, b, c), index (a*p + b)*p + c.
std::vector<double> clock_logit_tensor(const CircleSpec& spec);
std::vector<double> pizza_logit_tensor(const CircleSpec& spec);
std::vector<double> accompanying_logit_tensor(const CircleSpec& spec);

}  // namespace modlab
