#include "modlab/models.hpp"

#include "modlab/error.hpp"
#include "modlab/rng.hpp"

#include <cmath>
#include <string>

namespace modlab {

using autodiff::NodeId;
using autodiff::Tape;

namespace {

constexpr std::uint64_t kInitStream = 1;

template <typename E>
struct NameEntry {
  E value;
  std::string_view name;
};

constexpr NameEntry<Family> kFamilies[] = {
    {Family::transformer, "transformer"},         {Family::linear_alpha, "linear-alpha"},
    {Family::linear_alpha_prime, "linear-alpha-prime"}, {Family::linear_beta, "linear-beta"},
    {Family::linear_gamma, "linear-gamma"},       {Family::linear_delta, "linear-delta"},
    {Family::analytic_clock, "analytic-clock"},   {Family::analytic_linear, "analytic-linear"},
};
constexpr NameEntry<Activation> kActivations[] = {{Activation::relu, "relu"}, {Activation::gelu, "gelu"}};
constexpr NameEntry<EmbeddingVariant> kVariants[] = {{EmbeddingVariant::shared, "shared"},
                                                     {EmbeddingVariant::separate, "separate"},
                                                     {EmbeddingVariant::equal_sign, "equal-sign"}};
constexpr NameEntry<ConstantAttention> kConstants[] = {{ConstantAttention::ones, "ones"},
                                                       {ConstantAttention::identity, "identity"}};

template <typename E, std::size_t N>
std::string_view name_of(const NameEntry<E> (&table)[N], E v) {
  for (const auto& e : table) {
    if (e.value == v) return e.name;
  }
  return "?";
}

template <typename E, std::size_t N>
E parse_name(const NameEntry<E> (&table)[N], std::string_view s, const char* what) {
  for (const auto& e : table) {
    if (e.name == s) return e.value;
  }
  std::string known;
  for (const auto& e : table) known += (known.empty() ? "" : ", ") + std::string(e.name);
  fail_usage("unknown " + std::string(what) + " '" + std::string(s) + "' (expected one of: " + known + ")");
}

Matrix uniform_init(SeededRng& rng, Index rows, Index cols) {
  const double bound = std::sqrt(1.0 / static_cast<double>(rows));
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

}  // namespace

std::string_view to_string(Family f) { return name_of(kFamilies, f); }
std::string_view to_string(Activation a) { return name_of(kActivations, a); }
std::string_view to_string(EmbeddingVariant v) { return name_of(kVariants, v); }
std::string_view to_string(ConstantAttention c) { return name_of(kConstants, c); }
Family parse_family(std::string_view s) { return parse_name(kFamilies, s, "family"); }
Activation parse_activation(std::string_view s) { return parse_name(kActivations, s, "activation"); }
EmbeddingVariant parse_embedding_variant(std::string_view s) {
  return parse_name(kVariants, s, "embedding variant");
}
ConstantAttention parse_constant_attention(std::string_view s) {
  return parse_name(kConstants, s, "constant attention");
}

bool is_linear_family(Family f) {
  switch (f) {
    case Family::linear_alpha:
    case Family::linear_alpha_prime:
    case Family::linear_beta:
    case Family::linear_gamma:
    case Family::linear_delta:
      return true;
    default:
      return false;
  }
}

void validate(const RunConfig& c) {
  if (c.family == Family::analytic_clock || c.family == Family::analytic_linear) {
    fail_usage("family " + std::string(to_string(c.family)) + " is built by the oracles module, not from a run config");
  }
  if (c.p < 2) fail_usage("p must be at least 2");
  if (c.width < 1) fail_usage("width must be positive");
  if (!(c.attention_rate >= 0.0 && c.attention_rate <= 1.0)) fail_usage("attention rate must lie in [0, 1]");
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) fail_usage("train fraction must lie in (0, 1)");
  if (c.epochs < 0) fail_usage("epochs must be non-negative");
  if (c.checkpoint_every < 1) fail_usage("checkpoint_every must be positive");
  if (!(c.lr >= 0.0) || !(c.weight_decay >= 0.0)) fail_usage("lr and weight decay must be non-negative");
  if (c.family == Family::transformer) {
    if (c.layers < 1) fail_usage("transformer needs at least one layer");
    if (c.heads < 1) fail_usage("heads must be positive");
    if (c.width < c.heads) fail_usage("width must be at least the number of heads");
  } else if (c.embedding_variant != EmbeddingVariant::shared) {
    fail_usage("embedding variants apply to transformers only (use linear-alpha-prime for separate tables)");
  }
}

int Architecture::vocab() const {
  switch (embedding_variant) {
    case EmbeddingVariant::separate:
      return 2 * p;
    case EmbeddingVariant::equal_sign:
      return p + 1;
    case EmbeddingVariant::shared:
      break;
  }
  return p;
}

int Architecture::context() const { return embedding_variant == EmbeddingVariant::equal_sign ? 3 : 2; }

Architecture architecture_of(const RunConfig& c) {
  validate(c);
  Architecture a;
  a.family = c.family;
  a.p = c.p;
  a.width = c.width;
  a.layers = c.layers;
  a.heads = c.heads;
  a.head_dim = c.width / c.heads;
  a.activation = c.activation;
  a.embedding_variant = c.embedding_variant;
  a.constant_attention = c.constant_attention;
  a.attention_rate = c.attention_rate;
  return a;
}

const Matrix& ModelParams::at(std::string_view name) const {
  if (auto i = index_of(name)) return tensors[*i].value;
  fail_data("model has no tensor named '" + std::string(name) + "'");
}

Matrix& ModelParams::at(std::string_view name) {
  if (auto i = index_of(name)) return tensors[*i].value;
  fail_data("model has no tensor named '" + std::string(name) + "'");
}

bool ModelParams::has(std::string_view name) const { return index_of(name).has_value(); }

std::optional<std::size_t> ModelParams::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += static_cast<std::size_t>(t.value.size());
  return n;
}

std::string_view ModelParams::embedding_name() const {
  return arch.family == Family::linear_alpha_prime ? "W_E_A" : "W_E";
}

Matrix ModelParams::number_embeddings() const { return at(embedding_name()).topRows(arch.p); }

ModelParams build(const RunConfig& config) {
  ModelParams m;
  m.arch = architecture_of(config);
  const Architecture& a = m.arch;
  SeededRng rng(config.seed, kInitStream);
  const Index d = a.width;
  auto weight = [&](std::string name, Index rows, Index cols) {
    m.tensors.push_back({std::move(name), uniform_init(rng, rows, cols)});
  };
  auto zeros = [&](std::string name, Index rows, Index cols) {
    m.tensors.push_back({std::move(name), Matrix::Zero(rows, cols)});
  };

  switch (a.family) {
    case Family::transformer: {
      const Index inner = static_cast<Index>(a.heads) * a.head_dim;
      weight("W_E", a.vocab(), d);
      zeros("W_pos", a.context(), d);
      for (int l = 0; l < a.layers; ++l) {
        const std::string pre = std::to_string(l) + ".";
        weight(pre + "W_Q", d, inner);
        weight(pre + "W_K", d, inner);
        weight(pre + "W_V", d, inner);
        weight(pre + "W_O", inner, d);
        weight(pre + "W_in", d, 4 * d);
        zeros(pre + "b_in", 1, 4 * d);
        weight(pre + "W_out", 4 * d, d);
        zeros(pre + "b_out", 1, d);
      }
      weight("W_U", d, a.p);
      break;
    }
    case Family::linear_alpha:
      weight("W_E", a.p, d);
      weight("L1.W", d, d);
      zeros("L1.b", 1, d);
      weight("W_U", d, a.p);
      break;
    case Family::linear_alpha_prime:
      weight("W_E_A", a.p, d);
      weight("W_E_B", a.p, d);
      weight("L1.W", d, d);
      zeros("L1.b", 1, d);
      weight("W_U", d, a.p);
      break;
    case Family::linear_beta:
    case Family::linear_gamma:
      weight("W_E", a.p, d);
      weight("L1.W", d, d);
      zeros("L1.b", 1, d);
      weight("L2.W", d, d);
      zeros("L2.b", 1, d);
      weight("W_U", d, a.p);
      break;
    case Family::linear_delta:
      weight("W_E", a.p, d);
      weight("L1.W", 2 * d, d);
      zeros("L1.b", 1, d);
      weight("W_U", d, a.p);
      break;
    case Family::analytic_clock:
    case Family::analytic_linear:
      fail_usage("analytic families are built by the oracles module");
  }
  return m;
}

std::vector<int> tokens_for(const Architecture& arch, TokenPair pair) {
  switch (arch.embedding_variant) {
    case EmbeddingVariant::separate:
      return {pair.a, pair.b + arch.p};
    case EmbeddingVariant::equal_sign:
      return {pair.a, pair.b, arch.p};
    case EmbeddingVariant::shared:
      break;
  }
  return {pair.a, pair.b};
}

Matrix interpolate_attention(const Matrix& attention, double rate, ConstantAttention constant) {
  if (!(rate >= 0.0 && rate <= 1.0)) fail_usage("attention rate must lie in [0, 1]");
  Matrix c = constant == ConstantAttention::ones ? Matrix(Matrix::Ones(attention.rows(), attention.cols()))
                                                 : Matrix(Matrix::Identity(attention.rows(), attention.cols()));
  return rate * attention + (1.0 - rate) * c;
}

std::vector<TokenPair> all_pairs(int p) {
  std::vector<TokenPair> out;
  out.reserve(static_cast<std::size_t>(p) * static_cast<std::size_t>(p));
  for (int a = 0; a < p; ++a) {
    for (int b = 0; b < p; ++b) out.push_back({a, b});
  }
  return out;
}

namespace {

class Emitter {
 public:
  Emitter(Tape& tape, const ModelParams& model, std::span<const TokenPair> batch, const GraphOptions& options)
      : tape_(tape), model_(model), arch_(model.arch), batch_(batch), options_(options) {
    for (const auto& t : model.tensors) graph_.params.push_back(tape.variable(t.value));
  }

  Graph run() {
    for (const auto& pr : batch_) {
      if (pr.a < 0 || pr.a >= arch_.p || pr.b < 0 || pr.b >= arch_.p) {
        fail_usage("token out of range for modulus " + std::to_string(arch_.p));
      }
    }
    if (batch_.empty()) fail_usage("empty batch");
    switch (arch_.family) {
      case Family::transformer:
        graph_.logits = transformer();
        break;
      case Family::analytic_clock:
        graph_.logits = analytic_clock();
        break;
      case Family::analytic_linear:
        graph_.logits = tape_.matmul(tape_.add(operand(0), operand(1)), param("W_U"));
        break;
      default:
        graph_.logits = linear();
        break;
    }
    return graph_;
  }

 private:
  NodeId param(std::string_view name) {
    const auto i = model_.index_of(name);
    if (!i) fail_data("model has no tensor named '" + std::string(name) + "'");
    return graph_.params[*i];
  }

  std::vector<Index> column_of_tokens(int position) const {
    std::vector<Index> rows;
    rows.reserve(batch_.size());
    for (const auto& pr : batch_) rows.push_back(tokens_for(arch_, pr)[static_cast<std::size_t>(position)]);
    return rows;
  }

  // Embedding of the token at an operand position (0 -> a, 1 -> b).
  NodeId operand(int position) {
    std::string_view table = model_.embedding_name();
    if (arch_.family == Family::linear_alpha_prime && position == 1) table = "W_E_B";
    std::vector<Index> rows = column_of_tokens(position);
    if (!options_.free_operand_embeddings) return tape_.gather_rows(param(table), std::move(rows));
    const Matrix& t = model_.at(table);
    Matrix gathered(static_cast<Index>(rows.size()), t.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) gathered.row(static_cast<Index>(r)) = t.row(rows[r]);
    NodeId leaf = tape_.variable(std::move(gathered));
    (position == 0 ? graph_.operand_a : graph_.operand_b) = leaf;
    return leaf;
  }

  NodeId activate(NodeId x) {
    return arch_.activation == Activation::gelu ? tape_.gelu(x) : tape_.relu(x);
  }

  NodeId dense(NodeId x, std::string_view w, std::string_view b) {
    return tape_.add_row_broadcast(tape_.matmul(x, param(w)), param(b));
  }

  NodeId analytic_clock() {
    NodeId ea = operand(0);
    NodeId eb = operand(1);
    NodeId ax = tape_.slice_cols(ea, 0, 1), ay = tape_.slice_cols(ea, 1, 1);
    NodeId bx = tape_.slice_cols(eb, 0, 1), by = tape_.slice_cols(eb, 1, 1);
    NodeId ux = tape_.add(tape_.hadamard(ax, bx), tape_.scale(tape_.hadamard(ay, by), -1.0));
    NodeId uy = tape_.add(tape_.hadamard(ax, by), tape_.hadamard(ay, bx));
    const NodeId parts[] = {ux, uy};
    return tape_.matmul(tape_.concat_cols(parts), param("W_U"));
  }

  NodeId linear() {
    NodeId x1 = operand(0);
    NodeId x2 = operand(1);
    switch (arch_.family) {
      case Family::linear_alpha:
      case Family::linear_alpha_prime: {
        NodeId h = activate(dense(tape_.add(x1, x2), "L1.W", "L1.b"));
        return tape_.matmul(h, param("W_U"));
      }
      case Family::linear_beta:
      case Family::linear_gamma: {
        NodeId pre1 = arch_.family == Family::linear_beta
                          ? dense(tape_.add(x1, x2), "L1.W", "L1.b")
                          : tape_.add(dense(x1, "L1.W", "L1.b"), dense(x2, "L1.W", "L1.b"));
        NodeId h1 = activate(pre1);
        NodeId pre2 = dense(h1, "L2.W", "L2.b");
        NodeId h2 = options_.drop_outer_relu ? pre2 : activate(pre2);
        return tape_.matmul(h2, param("W_U"));
      }
      case Family::linear_delta: {
        const NodeId parts[] = {x1, x2};
        NodeId h = activate(dense(tape_.concat_cols(parts), "L1.W", "L1.b"));
        return tape_.matmul(h, param("W_U"));
      }
      default:
        fail_usage("not a linear family: " + std::string(to_string(arch_.family)));
    }
  }

  NodeId transformer() {
    const double rate = options_.attention_rate.value_or(arch_.attention_rate);
    if (!(rate >= 0.0 && rate <= 1.0)) fail_usage("attention rate must lie in [0, 1]");
    const int ctx = arch_.context();
    const Index dh = arch_.head_dim;
    const double score_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const Index batch = static_cast<Index>(batch_.size());
    const Matrix constant = interpolate_attention(Matrix::Zero(ctx, ctx), 0.0, arch_.constant_attention);

    NodeId w_pos = param("W_pos");
    std::vector<NodeId> x(static_cast<std::size_t>(ctx));
    for (int t = 0; t < ctx; ++t) {
      NodeId tok = t < 2 ? operand(t) : tape_.gather_rows(param("W_E"), column_of_tokens(t));
      x[static_cast<std::size_t>(t)] = tape_.add_row_broadcast(tok, tape_.slice_rows(w_pos, t, 1));
    }

    for (int l = 0; l < arch_.layers; ++l) {
      const std::string pre = std::to_string(l) + ".";
      const bool last = l + 1 == arch_.layers;
      std::vector<NodeId> keys, values;
      for (int j = 0; j < ctx; ++j) {
        values.push_back(tape_.matmul(x[static_cast<std::size_t>(j)], param(pre + "W_V")));
        if (rate > 0.0) keys.push_back(tape_.matmul(x[static_cast<std::size_t>(j)], param(pre + "W_K")));
      }
      std::vector<NodeId> next = x;
      // Only the last position feeds the logits, so the final layer skips the rest.
      for (int i = last ? ctx - 1 : 0; i < ctx; ++i) {
        NodeId xi = x[static_cast<std::size_t>(i)];
        NodeId query = rate > 0.0 ? tape_.matmul(xi, param(pre + "W_Q")) : NodeId{};
        std::vector<NodeId> heads;
        for (int h = 0; h < arch_.heads; ++h) {
          const Index off = static_cast<Index>(h) * dh;
          std::vector<NodeId> terms;
          if (rate > 0.0) {
            NodeId qh = tape_.slice_cols(query, off, dh);
            std::vector<NodeId> scores;
            for (int j = 0; j < ctx; ++j) {
              NodeId kh = tape_.slice_cols(keys[static_cast<std::size_t>(j)], off, dh);
              scores.push_back(tape_.scale(tape_.row_sum(tape_.hadamard(qh, kh)), score_scale));
            }
            NodeId attn = tape_.softmax_rows(tape_.concat_cols(scores));
            if (rate < 1.0) {
              Matrix mix = constant.row(i).replicate(batch, 1) * (1.0 - rate);
              attn = tape_.add(tape_.scale(attn, rate), tape_.constant(std::move(mix)));
            }
            for (int j = 0; j < ctx; ++j) {
              NodeId vh = tape_.slice_cols(values[static_cast<std::size_t>(j)], off, dh);
              terms.push_back(tape_.scale_rows(tape_.slice_cols(attn, j, 1), vh));
            }
          } else {
            for (int j = 0; j < ctx; ++j) {
              const double weight = constant(i, j);
              if (weight == 0.0) continue;
              NodeId vh = tape_.slice_cols(values[static_cast<std::size_t>(j)], off, dh);
              terms.push_back(weight == 1.0 ? vh : tape_.scale(vh, weight));
            }
          }
          NodeId sum = terms.front();
          for (std::size_t k = 1; k < terms.size(); ++k) sum = tape_.add(sum, terms[k]);
          heads.push_back(sum);
        }
        NodeId mixed = heads.size() == 1 ? heads.front() : tape_.concat_cols(heads);
        NodeId resid = tape_.add(xi, tape_.matmul(mixed, param(pre + "W_O")));
        NodeId hidden = activate(dense(resid, pre + "W_in", pre + "b_in"));
        next[static_cast<std::size_t>(i)] = tape_.add(resid, dense(hidden, pre + "W_out", pre + "b_out"));
      }
      x = std::move(next);
    }
    return tape_.matmul(x[static_cast<std::size_t>(ctx - 1)], param("W_U"));
  }

  Tape& tape_;
  const ModelParams& model_;
  const Architecture& arch_;
  std::span<const TokenPair> batch_;
  const GraphOptions& options_;
  Graph graph_;
};

}  // namespace

Graph emit_logits(Tape& tape, const ModelParams& model, std::span<const TokenPair> batch,
                  const GraphOptions& options) {
  return Emitter(tape, model, batch, options).run();
}

Matrix logits_for(const ModelParams& model, std::span<const TokenPair> batch, const GraphOptions& options) {
  Tape tape;
  const Graph g = emit_logits(tape, model, batch, options);
  return tape.value(g.logits);
}

Matrix transformer_logits(const ModelParams& model, std::span<const TokenPair> batch, double attention_rate) {
  if (model.arch.family != Family::transformer) fail_usage("transformer_logits on a non-transformer model");
  if (!(attention_rate >= 0.0 && attention_rate <= 1.0)) fail_usage("attention rate must lie in [0, 1]");
  GraphOptions opt;
  opt.attention_rate = attention_rate;
  return logits_for(model, batch, opt);
}

Matrix linear_logits(const ModelParams& model, std::span<const TokenPair> batch, Family family) {
  if (!is_linear_family(family)) fail_usage("unknown linear family: " + std::string(to_string(family)));
  if (model.arch.family != family) fail_usage("model family does not match the requested linear family");
  return logits_for(model, batch);
}

}  // namespace modlab
