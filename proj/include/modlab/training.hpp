#pragma once

#include "modlab/gradients.hpp"
#include "modlab/record.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace modlab {

struct Dataset {
  int p = 0;
  std::vector<Example> train;
  std::vector<Example> validation;
};

// Deterministic split of all p^2 pairs; |train| = round(fraction * p^2).
Dataset make_dataset(int p, double train_fraction, std::uint64_t seed);

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
};

// Accuracy with argmax ties broken toward the lowest class index.
Evaluation evaluate(const ModelParams& model, std::span<const Example> part);
double accuracy_of(const Matrix& logits, std::span<const int> targets);
int argmax_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& row);

struct AdamWSettings {
  double lr = 1e-3;
  double weight_decay = 2.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Decoupled weight decay: theta <- theta - lr * (adam_step + wd * theta).
class AdamW {
 public:
  AdamW(const ModelParams& model, AdamWSettings settings);
  void step(ModelParams& model, const std::vector<Matrix>& grads);
  long steps() const { return t_; }

 private:
  AdamWSettings settings_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long t_ = 0;
};

inline constexpr int kEarlyStopWindow = 500;
inline constexpr double kEarlyStopLossDelta = 1e-9;

// Called at each checkpoint; lets callers attach metric snapshots.
using CheckpointHook = std::function<void(const ModelParams&, const Dataset&, Checkpoint&)>;

struct TrainOptions {
  CheckpointHook on_checkpoint;
  // Store a copy of the number embeddings in every checkpoint.
  bool checkpoint_embeddings = false;
};

// Full-batch AdamW training. The record holds final weights, final number
// embeddings and the checkpoint trace; metrics are left to the caller.
RunRecord train(const RunConfig& config, const TrainOptions& options = {});

}  // namespace modlab
