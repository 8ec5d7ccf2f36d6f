#pragma once

#include "modlab/record.hpp"

#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace modlab {

// Replace the number-token embedding rows by their reconstruction from the
// chosen principal components (0-based). The row mean is dropped unless
// keep_mean is set. Every other tensor is left untouched.
ModelParams isolate_components(const ModelParams& model, std::span<const int> components, bool keep_mean = false);
ModelParams isolate_circle(const ModelParams& model, std::pair<int, int> pc_pair, bool keep_mean = false);

// Accuracy over all p^2 inputs.
double accuracy_all_pairs(const ModelParams& model);

// 1 - R above this marks a pair as non-circular.
inline constexpr double kCircleMisfitThreshold = 0.3;

struct FrequencyEstimate {
  int k = 0;
  int k_mirror = 0;
  // 1 - mean resultant length of theta_t - 2 pi k t / p.
  double misfit = 1.0;
  bool circular = false;
};

// Frequency of a p x 2 point set, read from the polar angles of the
// centered points. Token t sits near angle theta_0 + 2 pi k t / p.
FrequencyEstimate estimate_k(const Matrix& points);

// Token difference between neighbouring points of a circle at frequency k:
// k^-1 mod p folded into [1, p/2]. Requires p prime.
int circle_gap(int k, int p);
int modular_inverse(int k, int p);

struct IsolationOptions {
  int n_pairs = 3;
  bool keep_mean = false;
  bool compute_fve = true;
};

// One report per leading principal pair (0,1), (2,3), ... For circular
// pairs the isolated logits over all p^3 (a, b, c) are compared with the
// clock and pizza formulas at the estimated k, and with the accompanying
// formula built for the circle this one would accompany (k / 2 mod p).
std::vector<CircleReport> isolation_report(const ModelParams& model, const IsolationOptions& options = {});

// Pairs (accompanied, accompanying) with gap_accompanied = +-2 gap_accompanying
// (mod p). Marks the accompanying reports and links partners.
std::vector<std::pair<int, int>> detect_accompanying(std::vector<CircleReport>& reports, int p);

struct IsolationSummary {
  std::vector<CircleReport> circles;
  // (accompanied, accompanying) report indices.
  std::vector<std::pair<int, int>> accompanying_pairs;
  // Accuracy with the 2 * n_pairs leading components kept jointly.
  double leading_accuracy = 0.0;
  // Accuracy with the components of every accompanied (resp. accompanying)
  // circle kept jointly; absent without a detected pair.
  std::optional<double> accompanied_accuracy;
  std::optional<double> accompanying_accuracy;
};

IsolationSummary isolation_summary(const ModelParams& model, const IsolationOptions& options = {});

struct ReluRemoval {
  double accuracy_before = 0.0;
  double accuracy_after = 0.0;
  double accuracy_delta = 0.0;
  double loss_before = 0.0;
  double loss_after = 0.0;
};

// Evaluate a linear beta or gamma model with and without its outer ReLU.
ReluRemoval relu_removal_check(const ModelParams& model);

struct AlignedWeights {
  // n_pcs x hidden: each embedding principal direction pushed through W1.
  Matrix w1;
  // hidden x n_pcs: W2 pulled back onto each unembedding principal direction.
  Matrix w2;
  // Mean over live hidden units of the share of aligned-W1 power held by the
  // strongest principal pair (0,1), (2,3), ...
  double domino_score = 0.0;
  double domino_score_w2 = 0.0;
  Matrix embedding_components;
  Matrix unembedding_components;
};

// Linear alpha, beta or gamma models. For alpha the second matrix is the
// identity on the hidden layer.
AlignedWeights align_weights(const ModelParams& model, int n_pcs = 6);
// Domino score of an n_pcs x hidden matrix.
double domino_score(const Matrix& aligned);

struct UnitCircleFit {
  double offset = 0.0;
  double amplitude = 0.0;
  double phase = 0.0;
  // Unexplained share of the response variance under offset + A cos(2t + phi).
  double residual_fraction = 1.0;
  // Harmonic in 1..4 holding the most power.
  int best_frequency = 0;
};

// Scalar response f(cos t, sin t) = out . relu(x W + b) for a two-row input
// slice W, sampled at `grid` points and fitted with offset + A cos(2t + phi).
UnitCircleFit fit_unit_circle_response(const Matrix& slice, const Vector& bias, const Vector& out, int grid = 3600);

// The slice, bias and output weights for one embedding pair and one
// unembedding direction of a linear model, taken from align_weights.
struct CircleResponse {
  Matrix slice;
  Vector bias;
  Vector out;
};
CircleResponse circle_response(const ModelParams& model, std::pair<int, int> embedding_pair, int unembedding_component);

}  // namespace modlab
