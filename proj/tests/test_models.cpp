#include <doctest.h>

#include "modlab/error.hpp"
#include "modlab/gradients.hpp"
#include "modlab/models.hpp"

#include <cmath>

using namespace modlab;

namespace {

RunConfig config_of(Family f, int width, std::uint64_t seed = 1) {
  RunConfig c;
  c.family = f;
  c.p = 11;
  c.width = width;
  c.seed = seed;
  return c;
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

Matrix swapped_logits(const ModelParams& m) {
  std::vector<TokenPair> pairs = all_pairs(m.arch.p);
  for (auto& q : pairs) std::swap(q.a, q.b);
  return logits_for(m, pairs);
}

}  // namespace

TEST_CASE("Head dimension is width over heads") {
  RunConfig c;
  c.width = 128;
  const ModelParams m = build(c);
  CHECK(m.arch.head_dim == 32);
  CHECK(m.at("0.W_Q").cols() == 128);
  CHECK(m.at("0.W_in").rows() == 128);
  CHECK(m.at("0.W_in").cols() == 512);
  CHECK(m.at("W_U").rows() == 128);
  CHECK(m.at("W_U").cols() == 59);
  CHECK(m.at("W_pos").rows() == 2);
  CHECK_FALSE(m.has("b_U"));
}

TEST_CASE("Linear delta concatenates its inputs") {
  const ModelParams m = build(config_of(Family::linear_delta, 256));
  CHECK(m.at("L1.W").rows() == 512);
  CHECK(m.at("L1.W").cols() == 256);
  CHECK_FALSE(m.has("W_pos"));
}

TEST_CASE("Vocabulary follows the embedding variant") {
  RunConfig c = config_of(Family::transformer, 16);
  CHECK(build(c).at("W_E").rows() == 11);
  c.embedding_variant = EmbeddingVariant::separate;
  CHECK(build(c).at("W_E").rows() == 22);
  CHECK(tokens_for(build(c).arch, {3, 4}) == std::vector<int>{3, 15});
  c.embedding_variant = EmbeddingVariant::equal_sign;
  const ModelParams eq = build(c);
  CHECK(eq.at("W_E").rows() == 12);
  CHECK(eq.at("W_pos").rows() == 3);
  CHECK(tokens_for(eq.arch, {3, 4}) == std::vector<int>{3, 4, 11});
  CHECK(eq.number_embeddings().rows() == 11);
}

TEST_CASE("Same seed gives bit-identical parameters") {
  for (Family f : {Family::transformer, Family::linear_alpha, Family::linear_alpha_prime, Family::linear_beta,
                   Family::linear_gamma, Family::linear_delta}) {
    const ModelParams a = build(config_of(f, 16, 9));
    const ModelParams b = build(config_of(f, 16, 9));
    const ModelParams c = build(config_of(f, 16, 10));
    REQUIRE(a.tensors.size() == b.tensors.size());
    bool differs = false;
    for (std::size_t i = 0; i < a.tensors.size(); ++i) {
      CHECK(a.tensors[i].name == b.tensors[i].name);
      CHECK(a.tensors[i].value == b.tensors[i].value);
      differs = differs || a.tensors[i].value != c.tensors[i].value;
    }
    CHECK(differs);
  }
}

TEST_CASE("Initialization is bounded by the inverse square root of fan-in") {
  const ModelParams m = build(config_of(Family::transformer, 64));
  CHECK(max_abs(m.at("0.W_in")) <= 1.0 / std::sqrt(64.0));
  CHECK(max_abs(m.at("0.W_out")) <= 1.0 / std::sqrt(256.0));
  CHECK(max_abs(m.at("0.b_in")) == 0.0);
  CHECK(max_abs(m.at("W_pos")) == 0.0);
}

TEST_CASE("Invalid configs are rejected") {
  RunConfig c;
  c.attention_rate = 1.5;
  CHECK_THROWS_AS(build(c), Error);
  c = RunConfig{};
  c.width = 2;
  CHECK_THROWS_AS(build(c), Error);
  c = RunConfig{};
  c.train_fraction = 1.0;
  CHECK_THROWS_AS(validate(c), Error);
  c = RunConfig{};
  c.family = Family::linear_alpha;
  c.embedding_variant = EmbeddingVariant::separate;
  CHECK_THROWS_AS(validate(c), Error);
  c = RunConfig{};
  c.family = Family::analytic_clock;
  CHECK_THROWS_AS(validate(c), Error);
  try {
    validate(RunConfig{.p = 1});
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::usage);
  }
}

TEST_CASE("Attention interpolation arithmetic") {
  Matrix m(2, 2);
  m << 0.6, 0.4, 0.3, 0.7;
  Matrix identity(2, 2);
  identity << 0.8, 0.2, 0.15, 0.85;
  Matrix ones(2, 2);
  ones << 0.8, 0.7, 0.65, 0.85;
  CHECK(max_abs(interpolate_attention(m, 0.5, ConstantAttention::identity) - identity) < 1e-15);
  CHECK(max_abs(interpolate_attention(m, 0.5, ConstantAttention::ones) - ones) < 1e-15);
  CHECK(interpolate_attention(m, 1.0, ConstantAttention::ones) == m);
  CHECK_THROWS_AS(interpolate_attention(m, -0.1, ConstantAttention::ones), Error);
}

TEST_CASE("Transformer logits at the rate endpoints and in between") {
  RunConfig c = config_of(Family::transformer, 16);
  c.attention_rate = 0.3;
  const ModelParams m = build(c);
  const auto pairs = all_pairs(11);
  CHECK(logits_for(m, pairs) == transformer_logits(m, pairs, 0.3));
  const Matrix l0 = transformer_logits(m, pairs, 0.0);
  const Matrix l1 = transformer_logits(m, pairs, 1.0);
  CHECK(max_abs(l0 - l1) > 1e-6);
  // Continuity in the rate.
  CHECK(max_abs(transformer_logits(m, pairs, 0.3 + 1e-9) - transformer_logits(m, pairs, 0.3)) < 1e-6);
  CHECK_THROWS_AS(transformer_logits(m, pairs, 1.2), Error);
  CHECK(l0.allFinite());
}

TEST_CASE("Constant attention ignores queries and keys") {
  for (ConstantAttention ca : {ConstantAttention::ones, ConstantAttention::identity}) {
    RunConfig c = config_of(Family::transformer, 16);
    c.attention_rate = 0.0;
    c.constant_attention = ca;
    const ModelParams m = build(c);
    ModelParams scrambled = m;
    scrambled.at("0.W_Q") *= -3.0;
    scrambled.at("0.W_K").setConstant(0.7);
    const Matrix l = logits_for(m, all_pairs(11));
    CHECK(max_abs(l - logits_for(scrambled, all_pairs(11))) < 1e-12);
    if (ca == ConstantAttention::identity) {
      // Identity attention keeps the last position's own stream only, so the
      // output does not depend on a at all.
      CHECK(max_abs(l.row(0) - l.row(11)) < 1e-12);
    } else {
      // The residual stream carries b alone, so swapping the operands matters.
      CHECK(max_abs(l - swapped_logits(m)) > 1e-6);
    }
  }
}

TEST_CASE("Linear families alpha and beta are symmetric; delta is not") {
  for (Family f : {Family::linear_alpha, Family::linear_beta, Family::linear_gamma}) {
    const ModelParams m = build(config_of(f, 24));
    CHECK(max_abs(logits_for(m, all_pairs(11)) - swapped_logits(m)) < 1e-12);
  }
  const ModelParams d = build(config_of(Family::linear_delta, 24));
  CHECK(max_abs(logits_for(d, all_pairs(11)) - swapped_logits(d)) > 1e-6);
  const ModelParams ap = build(config_of(Family::linear_alpha_prime, 24));
  CHECK(max_abs(logits_for(ap, all_pairs(11)) - swapped_logits(ap)) > 1e-6);
}

TEST_CASE("Gamma equals beta with a bias-free first layer") {
  const ModelParams beta = build(config_of(Family::linear_beta, 24, 4));
  ModelParams gamma = build(config_of(Family::linear_gamma, 24, 4));
  for (std::size_t i = 0; i < beta.tensors.size(); ++i) gamma.tensors[i].value = beta.tensors[i].value;
  const auto pairs = all_pairs(11);
  const Matrix lb = linear_logits(beta, pairs, Family::linear_beta);
  CHECK(max_abs(lb - linear_logits(gamma, pairs, Family::linear_gamma)) < 1e-12);
  gamma.at("L1.b").setConstant(0.3);
  CHECK(max_abs(lb - linear_logits(gamma, pairs, Family::linear_gamma)) > 1e-6);
  CHECK_THROWS_AS(linear_logits(beta, pairs, Family::linear_gamma), Error);
}

TEST_CASE("Alpha with a linear unembedding path is linear in the summed embedding") {
  RunConfig c = config_of(Family::linear_alpha, 8);
  ModelParams m = build(c);
  // Make the hidden pre-activations positive so ReLU is the identity.
  m.at("L1.b").setConstant(100.0);
  const auto pairs = all_pairs(11);
  const Matrix l = logits_for(m, pairs);
  const Matrix& e = m.at("W_E");
  for (const auto& q : pairs) {
    const Matrix expected = ((e.row(q.a) + e.row(q.b)) * m.at("L1.W") + m.at("L1.b")) * m.at("W_U");
    CHECK(max_abs(l.row(q.a * 11 + q.b) - expected) < 1e-10);
  }
}

TEST_CASE("Finite differences agree with the tape for every family") {
  for (Family f : {Family::transformer, Family::linear_alpha, Family::linear_alpha_prime, Family::linear_beta,
                   Family::linear_gamma, Family::linear_delta}) {
    CAPTURE(to_string(f));
    const FiniteDifferenceReport r = finite_difference_check(build(config_of(f, 16, 3)), 12, 1e-5, 3);
    CHECK(r.max_relative_error < 1e-4);
    CHECK(r.parameter_probes > 0);
    CHECK(r.embedding_probes > 0);
  }
  RunConfig g = config_of(Family::transformer, 16, 5);
  g.activation = Activation::gelu;
  g.attention_rate = 0.4;
  g.layers = 2;
  CHECK(finite_difference_check(build(g), 12, 1e-5, 5).max_relative_error < 1e-4);
}

TEST_CASE("Embedding gradients are unchanged by the positional term") {
  RunConfig c = config_of(Family::transformer, 16, 8);
  ModelParams m = build(c);
  const EmbeddingGradient g0 = grad_logit_wrt_embeddings(m, 2, 7, 4);
  // Changing W_pos moves the forward point; the free-leaf gradient at E is
  // the gradient at E + W_pos, so shifting E by -W_pos must compensate.
  ModelParams shifted = m;
  shifted.at("W_pos").setConstant(0.25);
  shifted.at("W_E").array() -= 0.25;
  const EmbeddingGradient g1 = grad_logit_wrt_embeddings(shifted, 2, 7, 4);
  CHECK((g0.wrt_a - g1.wrt_a).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((g0.wrt_b - g1.wrt_b).cwiseAbs().maxCoeff() < 1e-10);

  const std::vector<Triple> triples{{2, 7, 4}, {1, 1, 0}};
  const auto batched = grad_logit_wrt_embeddings(m, triples);
  CHECK((batched[0].wrt_a - g0.wrt_a).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Names round-trip") {
  for (Family f : {Family::transformer, Family::linear_alpha, Family::linear_alpha_prime, Family::linear_beta,
                   Family::linear_gamma, Family::linear_delta}) {
    CHECK(parse_family(to_string(f)) == f);
  }
  CHECK(parse_activation("gelu") == Activation::gelu);
  CHECK(parse_embedding_variant("equal-sign") == EmbeddingVariant::equal_sign);
  CHECK(parse_constant_attention("identity") == ConstantAttention::identity);
  CHECK_THROWS_AS(parse_family("mlp"), Error);
}
