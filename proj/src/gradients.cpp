#include "modlab/gradients.hpp"

#include "modlab/error.hpp"
#include "modlab/rng.hpp"

#include <algorithm>
#include <cmath>

namespace modlab {

using autodiff::Tape;

ForwardResult forward(const ModelParams& model, TokenPair input) {
  ForwardResult out;
  const TokenPair batch[] = {input};
  out.graph = emit_logits(out.tape, model, batch);
  out.logits = out.tape.value(out.graph.logits).row(0).transpose();
  return out;
}

std::vector<EmbeddingGradient> grad_logit_wrt_embeddings(const ModelParams& model,
                                                         std::span<const Triple> triples) {
  const int p = model.arch.p;
  std::vector<TokenPair> batch;
  batch.reserve(triples.size());
  for (const auto& t : triples) {
    if (t.c < 0 || t.c >= p) fail_usage("class index out of range");
    batch.push_back({t.a, t.b});
  }
  Tape tape;
  GraphOptions opt;
  opt.free_operand_embeddings = true;
  const Graph g = emit_logits(tape, model, batch, opt);
  // Rows are independent examples, so one seed with a single 1 per row
  // yields every per-example gradient at once.
  Matrix seed = Matrix::Zero(static_cast<Index>(triples.size()), p);
  for (std::size_t r = 0; r < triples.size(); ++r) seed(static_cast<Index>(r), triples[r].c) = 1.0;
  tape.backward(g.logits, seed);

  const Matrix& ga = tape.adjoint(g.operand_a);
  const Matrix& gb = tape.adjoint(g.operand_b);
  const Index dim = tape.value(g.operand_a).cols();
  std::vector<EmbeddingGradient> out(triples.size());
  for (std::size_t r = 0; r < triples.size(); ++r) {
    out[r].wrt_a = ga.size() ? Vector(ga.row(static_cast<Index>(r)).transpose()) : Vector::Zero(dim);
    out[r].wrt_b = gb.size() ? Vector(gb.row(static_cast<Index>(r)).transpose()) : Vector::Zero(dim);
  }
  return out;
}

EmbeddingGradient grad_logit_wrt_embeddings(const ModelParams& model, int a, int b, int c) {
  const Triple t[] = {{a, b, c}};
  return grad_logit_wrt_embeddings(model, t).front();
}

ParamGradients grad_params(const ModelParams& model, std::span<const Example> batch) {
  if (batch.empty()) fail_usage("grad_params: empty batch");
  std::vector<TokenPair> inputs;
  std::vector<int> targets;
  inputs.reserve(batch.size());
  targets.reserve(batch.size());
  for (const auto& e : batch) {
    inputs.push_back({e.a, e.b});
    targets.push_back(e.target);
  }
  Tape tape;
  const Graph g = emit_logits(tape, model, inputs);
  const auto loss = tape.cross_entropy_mean(g.logits, std::move(targets));
  tape.backward(loss, Matrix::Ones(1, 1));

  ParamGradients out;
  out.loss = tape.value(loss)(0, 0);
  out.grads.reserve(model.tensors.size());
  for (std::size_t i = 0; i < model.tensors.size(); ++i) {
    const Matrix& adj = tape.adjoint(g.params[i]);
    const Matrix& shape = model.tensors[i].value;
    out.grads.push_back(adj.size() ? adj : Matrix::Zero(shape.rows(), shape.cols()));
  }
  return out;
}

namespace {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

// Objective value and kink signature after replaying the tape.
struct Sample {
  double value;
  std::vector<bool> kinks;
};

}  // namespace

FiniteDifferenceReport finite_difference_check(const ModelParams& model, int probes, double step,
                                               std::uint64_t seed) {
  if (!(step > 0.0)) fail_usage("finite_difference_check: step must be positive");
  const int p = model.arch.p;
  SeededRng rng(seed, 0xFDC0);
  FiniteDifferenceReport report;

  // Parameters: mean cross-entropy over a small random batch.
  {
    std::vector<TokenPair> inputs;
    std::vector<int> targets;
    for (int i = 0; i < 8; ++i) {
      const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(p)));
      const int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(p)));
      inputs.push_back({a, b});
      targets.push_back((a + b) % p);
    }
    Tape tape;
    const Graph g = emit_logits(tape, model, inputs);
    const auto loss = tape.cross_entropy_mean(g.logits, targets);
    tape.backward(loss, Matrix::Ones(1, 1));

    auto eval = [&](std::size_t tensor, Index coord, double value) {
      Matrix m = tape.value(g.params[tensor]);
      m.data()[coord] = value;
      tape.set_value(g.params[tensor], std::move(m));
      tape.replay();
      return Sample{tape.value(loss)(0, 0), tape.kink_signature()};
    };

    for (int k = 0; k < probes; ++k) {
      const auto tensor = static_cast<std::size_t>(rng.below(model.tensors.size()));
      const Matrix original = model.tensors[tensor].value;
      if (original.size() == 0) continue;
      const auto coord = static_cast<Index>(rng.below(static_cast<std::uint64_t>(original.size())));
      const Matrix& adj = tape.adjoint(g.params[tensor]);
      const double analytic = adj.size() ? adj.data()[coord] : 0.0;
      const double x0 = original.data()[coord];
      const Sample plus = eval(tensor, coord, x0 + step);
      const Sample minus = eval(tensor, coord, x0 - step);
      tape.set_value(g.params[tensor], original);
      tape.replay();
      if (plus.kinks != minus.kinks) {
        ++report.skipped_kinks;
        continue;
      }
      const double numeric = (plus.value - minus.value) / (2.0 * step);
      report.max_relative_error = std::max(report.max_relative_error, relative_error(analytic, numeric));
      ++report.parameter_probes;
    }
  }

  // Operand embeddings: one logit per probe.
  for (int k = 0; k < probes; ++k) {
    const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(p)));
    const int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(p)));
    const int c = static_cast<int>(rng.below(static_cast<std::uint64_t>(p)));
    const TokenPair input[] = {{a, b}};
    Tape tape;
    GraphOptions opt;
    opt.free_operand_embeddings = true;
    const Graph g = emit_logits(tape, model, input, opt);
    Matrix seed_m = Matrix::Zero(1, p);
    seed_m(0, c) = 1.0;
    tape.backward(g.logits, seed_m);

    const bool first = rng.below(2) == 0;
    const auto leaf = first ? g.operand_a : g.operand_b;
    const Matrix original = tape.value(leaf);
    const auto coord = static_cast<Index>(rng.below(static_cast<std::uint64_t>(original.size())));
    const Matrix& adj = tape.adjoint(leaf);
    const double analytic = adj.size() ? adj.data()[coord] : 0.0;

    auto eval = [&](double value) {
      Matrix m = original;
      m.data()[coord] = value;
      tape.set_value(leaf, std::move(m));
      tape.replay();
      return Sample{tape.value(g.logits)(0, c), tape.kink_signature()};
    };
    const Sample plus = eval(original.data()[coord] + step);
    const Sample minus = eval(original.data()[coord] - step);
    if (plus.kinks != minus.kinks) {
      ++report.skipped_kinks;
      continue;
    }
    const double numeric = (plus.value - minus.value) / (2.0 * step);
    report.max_relative_error = std::max(report.max_relative_error, relative_error(analytic, numeric));
    ++report.embedding_probes;
  }
  return report;
}

}  // namespace modlab
