#pragma once

#include "modlab/numerics.hpp"
#include "modlab/tape.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace modlab {

enum class Family {
  transformer,
  linear_alpha,
  linear_alpha_prime,
  linear_beta,
  linear_gamma,
  linear_delta,
  // Closed-form reference networks built by the oracles module; never
  // produced from a RunConfig.
  analytic_clock,
  analytic_linear,
};

enum class Activation { relu, gelu };
enum class EmbeddingVariant { shared, separate, equal_sign };

// What the (1 - rate) share of each attention matrix is replaced with.
// `ones` mixes every position with unit weight, `identity` keeps each
// position's own value.
enum class ConstantAttention { ones, identity };

std::string_view to_string(Family f);
std::string_view to_string(Activation a);
std::string_view to_string(EmbeddingVariant v);
std::string_view to_string(ConstantAttention c);
Family parse_family(std::string_view s);
Activation parse_activation(std::string_view s);
EmbeddingVariant parse_embedding_variant(std::string_view s);
ConstantAttention parse_constant_attention(std::string_view s);

bool is_linear_family(Family f);

struct RunConfig {
  Family family = Family::transformer;
  int p = 59;
  int width = 128;
  int layers = 1;
  double attention_rate = 1.0;
  int heads = 4;
  Activation activation = Activation::relu;
  EmbeddingVariant embedding_variant = EmbeddingVariant::shared;
  ConstantAttention constant_attention = ConstantAttention::ones;
  std::uint64_t seed = 0;
  double lr = 1e-3;
  double weight_decay = 2.0;
  int epochs = 20000;
  double train_fraction = 0.8;
  int checkpoint_every = 100;
  bool early_stop = false;
  // Compute metric snapshots (gradient symmetricity, distance irrelevance,
  // circularity) at every checkpoint. Gradient-costly.
  bool checkpoint_metrics = false;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Throws Error(usage) describing the first violated constraint.
void validate(const RunConfig& config);

struct Architecture {
  Family family = Family::transformer;
  int p = 59;
  int width = 128;
  int layers = 1;
  int heads = 4;
  int head_dim = 32;
  Activation activation = Activation::relu;
  EmbeddingVariant embedding_variant = EmbeddingVariant::shared;
  ConstantAttention constant_attention = ConstantAttention::ones;
  double attention_rate = 1.0;

  int vocab() const;
  int context() const;
};

Architecture architecture_of(const RunConfig& config);

struct NamedTensor {
  std::string name;
  Matrix value;
};

// Learnable tensors of one model. Activations are row vectors: a linear
// layer computes x * W + b with W stored fan_in x fan_out.
//
// transformer: W_E, W_pos, then per layer l "l.W_Q", "l.W_K", "l.W_V"
//   (d x heads*head_dim, head h in columns [h*head_dim, (h+1)*head_dim)),
//   "l.W_O" (heads*head_dim x d), "l.W_in" (d x 4d), "l.b_in", "l.W_out",
//   "l.b_out", and W_U (d x p).
// linear families: W_E (or W_E_A and W_E_B for alpha'), L1.W/L1.b,
//   L2.W/L2.b for beta and gamma, and the bias-free unembedding W_U.
struct ModelParams {
  Architecture arch;
  std::vector<NamedTensor> tensors;

  const Matrix& at(std::string_view name) const;
  Matrix& at(std::string_view name);
  bool has(std::string_view name) const;
  std::optional<std::size_t> index_of(std::string_view name) const;
  std::size_t parameter_count() const;
  // Token-embedding rows for the numbers 0..p-1 (first table for alpha').
  Matrix number_embeddings() const;
  // Name of the table holding the number-token embeddings.
  std::string_view embedding_name() const;
};

ModelParams build(const RunConfig& config);

struct TokenPair {
  int a = 0;
  int b = 0;
};

// Token sequence fed to the network for input (a, b).
std::vector<int> tokens_for(const Architecture& arch, TokenPair pair);

struct GraphOptions {
  // Feed the two operand embeddings as free leaves instead of gathering them
  // from the embedding table, so their adjoints are dQ/dE_a and dQ/dE_b.
  bool free_operand_embeddings = false;
  // Drop the ReLU after the second hidden layer (linear beta/gamma only).
  bool drop_outer_relu = false;
  // Overrides the architecture's attention rate when set.
  std::optional<double> attention_rate;
};

struct Graph {
  autodiff::NodeId logits;
  // Operand embedding leaves; valid only with free_operand_embeddings.
  autodiff::NodeId operand_a;
  autodiff::NodeId operand_b;
  // One variable node per entry of ModelParams::tensors, same order.
  std::vector<autodiff::NodeId> params;
};

// Emit the logit computation for a batch of inputs onto a tape; logits are
// batch x p, taken at the last sequence position.
Graph emit_logits(autodiff::Tape& tape, const ModelParams& model, std::span<const TokenPair> batch,
                  const GraphOptions& options = {});

// Convenience evaluations without keeping the tape.
Matrix logits_for(const ModelParams& model, std::span<const TokenPair> batch, const GraphOptions& options = {});

// Transformer logits with an explicit attention rate in [0, 1].
Matrix transformer_logits(const ModelParams& model, std::span<const TokenPair> batch, double attention_rate);

// Logits of a linear-family model; the family is checked against the model.
Matrix linear_logits(const ModelParams& model, std::span<const TokenPair> batch, Family family);

// Effective attention matrix rate*M + (1-rate)*C for C the constant pattern.
Matrix interpolate_attention(const Matrix& attention, double rate, ConstantAttention constant);

// All p^2 inputs in row-major (a, b) order.
std::vector<TokenPair> all_pairs(int p);

}  // namespace modlab
