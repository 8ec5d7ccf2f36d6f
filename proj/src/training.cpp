#include "modlab/training.hpp"

#include "modlab/error.hpp"
#include "modlab/rng.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace modlab {

namespace {
constexpr std::uint64_t kSplitStream = 2;
}

Dataset make_dataset(int p, double train_fraction, std::uint64_t seed) {
  if (p < 1) fail_usage("make_dataset: p must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) fail_usage("make_dataset: fraction must lie in (0, 1)");
  const long total = static_cast<long>(p) * p;
  const long n_train = std::lround(train_fraction * static_cast<double>(total));
  if (n_train <= 0 || n_train >= total) {
    fail_usage("make_dataset: fraction " + std::to_string(train_fraction) + " leaves an empty split for p=" +
               std::to_string(p));
  }
  std::vector<long> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0L);
  SeededRng rng(seed, kSplitStream);
  for (long i = total - 1; i > 0; --i) {
    const auto j = static_cast<long>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  Dataset ds;
  ds.p = p;
  for (long r = 0; r < total; ++r) {
    const long idx = order[static_cast<std::size_t>(r)];
    const int a = static_cast<int>(idx / p);
    const int b = static_cast<int>(idx % p);
    Example e{a, b, (a + b) % p};
    (r < n_train ? ds.train : ds.validation).push_back(e);
  }
  return ds;
}

int argmax_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  int best = 0;
  for (Index c = 1; c < row.size(); ++c) {
    if (row(c) > row(best)) best = static_cast<int>(c);
  }
  return best;
}

double accuracy_of(const Matrix& logits, std::span<const int> targets) {
  if (targets.empty()) return 0.0;
  long hits = 0;
  for (Index r = 0; r < logits.rows(); ++r) {
    if (argmax_lowest(logits.row(r)) == targets[static_cast<std::size_t>(r)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(targets.size());
}

Evaluation evaluate(const ModelParams& model, std::span<const Example> part) {
  if (part.empty()) fail_usage("evaluate: empty dataset part");
  std::vector<TokenPair> inputs;
  std::vector<int> targets;
  for (const auto& e : part) {
    inputs.push_back({e.a, e.b});
    targets.push_back(e.target);
  }
  const Matrix logits = logits_for(model, inputs);
  Evaluation ev;
  ev.accuracy = accuracy_of(logits, targets);
  double total = 0.0;
  for (Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
    total += lse - logits(r, targets[static_cast<std::size_t>(r)]);
  }
  ev.loss = total / static_cast<double>(logits.rows());
  return ev;
}

AdamW::AdamW(const ModelParams& model, AdamWSettings settings) : settings_(settings) {
  for (const auto& t : model.tensors) {
    m_.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
    v_.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
  }
}

void AdamW::step(ModelParams& model, const std::vector<Matrix>& grads) {
  if (grads.size() != model.tensors.size()) fail_usage("AdamW: gradient set does not match the model");
  ++t_;
  const double bc1 = 1.0 - std::pow(settings_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(settings_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    Matrix& theta = model.tensors[i].value;
    m_[i] = settings_.beta1 * m_[i] + (1.0 - settings_.beta1) * grads[i];
    v_[i] = settings_.beta2 * v_[i] + (1.0 - settings_.beta2) * grads[i].cwiseAbs2();
    const auto adam = (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + settings_.eps);
    theta.array() -= settings_.lr * (adam + settings_.weight_decay * theta.array());
  }
}

RunRecord train(const RunConfig& config, const TrainOptions& options) {
  validate(config);
  RunRecord rec;
  rec.config = config;
  ModelParams model = build(config);
  const Dataset ds = make_dataset(config.p, config.train_fraction, config.seed);
  AdamW optimizer(model, {config.lr, config.weight_decay});

  std::vector<TokenPair> inputs;
  std::vector<int> targets;
  for (const auto& e : ds.train) {
    inputs.push_back({e.a, e.b});
    targets.push_back(e.target);
  }

  auto checkpoint = [&](int epoch) {
    Checkpoint cp;
    cp.epoch = epoch;
    const Evaluation tr = evaluate(model, ds.train);
    const Evaluation va = evaluate(model, ds.validation);
    cp.train_loss = tr.loss;
    cp.train_acc = tr.accuracy;
    cp.val_loss = va.loss;
    cp.val_acc = va.accuracy;
    if (options.checkpoint_embeddings) cp.embeddings = model.number_embeddings();
    if (options.on_checkpoint) options.on_checkpoint(model, ds, cp);
    rec.checkpoints.push_back(std::move(cp));
  };

  checkpoint(0);
  double previous_loss = std::numeric_limits<double>::quiet_NaN();
  int stable_epochs = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    autodiff::Tape tape;
    const Graph g = emit_logits(tape, model, inputs);
    const auto loss_node = tape.cross_entropy_mean(g.logits, targets);
    const double loss = tape.value(loss_node)(0, 0);
    if (!std::isfinite(loss)) {
      rec.failed = true;
      rec.failure = "non-finite training loss at epoch " + std::to_string(epoch);
      break;
    }
    tape.backward(loss_node, Matrix::Ones(1, 1));
    std::vector<Matrix> grads;
    grads.reserve(g.params.size());
    for (std::size_t i = 0; i < g.params.size(); ++i) {
      const Matrix& adj = tape.adjoint(g.params[i]);
      const Matrix& shape = model.tensors[i].value;
      grads.push_back(adj.size() ? adj : Matrix::Zero(shape.rows(), shape.cols()));
    }
    optimizer.step(model, grads);
    rec.epochs_run = epoch;

    bool stop = false;
    if (config.early_stop) {
      if (std::abs(loss - previous_loss) < kEarlyStopLossDelta) {
        // Validation only matters while the loss is flat.
        stable_epochs = evaluate(model, ds.validation).accuracy == 1.0 ? stable_epochs + 1 : 0;
      } else {
        stable_epochs = 0;
      }
      stop = stable_epochs >= kEarlyStopWindow;
    }
    previous_loss = loss;
    if (epoch % config.checkpoint_every == 0 || epoch == config.epochs || stop) checkpoint(epoch);
    if (stop) break;
  }

  if (rec.failed && rec.checkpoints.back().epoch != rec.epochs_run) {
    // Keep whatever the diverged state evaluates to for the partial record.
    Checkpoint cp;
    cp.epoch = rec.epochs_run;
    cp.train_loss = std::numeric_limits<double>::quiet_NaN();
    cp.val_loss = std::numeric_limits<double>::quiet_NaN();
    rec.checkpoints.push_back(cp);
  }
  rec.converged = !rec.failed && rec.checkpoints.back().val_acc == 1.0;
  rec.final_embeddings = model.number_embeddings();
  rec.weights = std::move(model);
  return rec;
}

}  // namespace modlab
