#pragma once

#include "modlab/models.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace modlab {

struct Example {
  int a = 0;
  int b = 0;
  int target = 0;
};

struct ForwardResult {
  Vector logits;
  autodiff::Tape tape;
  Graph graph;
};

// Single-input forward pass keeping the tape for replay or backward.
ForwardResult forward(const ModelParams& model, TokenPair input);

struct EmbeddingGradient {
  Vector wrt_a;
  Vector wrt_b;
};

// dQ_abc/dE_a and dQ_abc/dE_b with the two embedding rows treated as free
// inputs (the additive positional term passes adjoints through unchanged,
// so this also equals the gradient at E + W_pos).
EmbeddingGradient grad_logit_wrt_embeddings(const ModelParams& model, int a, int b, int c);

struct Triple {
  int a = 0;
  int b = 0;
  int c = 0;
};

// Batched form: one backward pass over all triples.
std::vector<EmbeddingGradient> grad_logit_wrt_embeddings(const ModelParams& model, std::span<const Triple> triples);

struct ParamGradients {
  double loss = 0.0;
  // Same order and shapes as ModelParams::tensors.
  std::vector<Matrix> grads;
};

// Gradient of the mean cross-entropy over the batch.
ParamGradients grad_params(const ModelParams& model, std::span<const Example> batch);

struct FiniteDifferenceReport {
  double max_relative_error = 0.0;
  int parameter_probes = 0;
  int embedding_probes = 0;
  // Probes whose +/- step straddled a rectifier kink; excluded.
  int skipped_kinks = 0;
};

// Relative error |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline constexpr double kRelativeErrorFloor = 1e-6;

// Central differences on randomly probed coordinates of both the parameters
// (objective: mean cross-entropy of a random batch) and the operand
// embeddings (objective: one logit Q_abc).
FiniteDifferenceReport finite_difference_check(const ModelParams& model, int probes, double step,
                                               std::uint64_t seed = 0);

}  // namespace modlab
