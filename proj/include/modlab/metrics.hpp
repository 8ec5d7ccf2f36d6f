#pragma once

#include "modlab/gradients.hpp"
#include "modlab/record.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace modlab {

// L[a][b] = logit of class (a + b) mod p for input (a, b).
struct CorrectLogitMatrix {
  int p = 0;
  Matrix values;
};

CorrectLogitMatrix correct_logits(const ModelParams& model);

// Display layout: row r holds the pairs with a - b = r, column s those with
// a + b = s (both mod p). Requires odd p so that (r, s) names one pair.
Matrix reindex_a_minus_b(const CorrectLogitMatrix& l);

std::vector<Triple> exhaustive_triples(int p);
// n triples drawn uniformly from Z_p^3 on a dedicated stream of `seed`.
std::vector<Triple> random_triples(int p, int n, std::uint64_t seed);

inline constexpr double kDegenerateGradientNorm = 1e-12;

struct SymmetricityResult {
  std::optional<double> value;
  int samples = 0;
  int skipped = 0;
};

// Mean cosine similarity of (dQ_abc/dE_a, dQ_abc/dE_b) over the triples.
// Triples where either gradient norm is below 1e-12 are skipped and counted.
SymmetricityResult gradient_symmetricity(const ModelParams& model, std::span<const Triple> triples);

// Mean over d of std_i L[i][i+d], divided by the std of all entries.
// Absent when the overall std is at most 1e-9.
std::optional<double> distance_irrelevance(const CorrectLogitMatrix& l);

// Mean over the four leading principal components of the best single
// frequency's Fourier power fraction. Uses the first p rows.
std::optional<double> circularity(const Matrix& embeddings, int p);

struct ProjectedGradient {
  Triple triple;
  std::array<double, 6> wrt_a{};
  std::array<double, 6> wrt_b{};
};

// Both embedding gradients expressed in the six leading principal
// components of the number embeddings.
std::vector<ProjectedGradient> gradient_projection_figure(const ModelParams& model, std::span<const Triple> samples);
// Columns a,b,c,component,grad_a,grad_b; one row per sample and component.
std::string projection_csv(std::span<const ProjectedGradient> rows);

struct MetricOptions {
  // Use every (a, b, c) instead of a random sample.
  bool exhaustive = false;
  int samples = 100;
  std::uint64_t seed = 0;
};

// Full report; val_accuracy is supplied by the caller (it depends on the
// split, which the model does not know).
MetricReport compute_metrics(const ModelParams& model, double val_accuracy, const MetricOptions& options);

}  // namespace modlab
