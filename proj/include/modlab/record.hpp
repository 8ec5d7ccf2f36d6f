#pragma once

#include "modlab/models.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace modlab {

inline constexpr int kRecordSchemaVersion = 1;

// Absent values mean "undefined" (e.g. distance irrelevance of a constant
// correct-logit matrix); consumers must branch.
struct MetricReport {
  std::optional<double> gradient_symmetricity;
  int symmetricity_samples = 0;
  // Triples dropped because a gradient norm was below 1e-12.
  int symmetricity_skipped = 0;
  std::optional<double> distance_irrelevance;
  std::optional<double> circularity;
  double val_accuracy = 0.0;
  // "random:<n>:<seed>" or "exhaustive".
  std::string sample_set;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

struct Checkpoint {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  std::optional<MetricReport> metrics;
  std::optional<Matrix> embeddings;
};

struct CircleReport {
  std::pair<int, int> pc_pair{0, 1};
  bool circular = false;
  // Estimated frequency in [1, p-1] and its mirror p - k.
  int k = 0;
  int k_mirror = 0;
  double w_k = 0.0;
  // Token difference between neighbouring points on the circle (k^-1 mod p,
  // folded into [1, p/2]).
  int gap = 0;
  double misfit = 1.0;
  double isolated_accuracy = 0.0;
  std::optional<double> fve_clock;
  std::optional<double> fve_pizza;
  std::optional<double> fve_accompanying;
  bool is_accompanying = false;
  std::optional<int> partner;
};

enum class Label { pizza, clock, non_circular, ambiguous };
std::string_view to_string(Label label);
Label parse_label(std::string_view s);

struct Thresholds {
  double circularity = 0.995;
  double symmetricity = 0.98;
  double distance_irrelevance = 0.6;

  friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

struct Classification {
  Label label = Label::ambiguous;
  Thresholds thresholds;

  friend bool operator==(const Classification&, const Classification&) = default;
};

struct RunRecord {
  int schema_version = kRecordSchemaVersion;
  RunConfig config;
  bool converged = false;
  bool failed = false;
  std::string failure;
  int epochs_run = 0;
  std::vector<Checkpoint> checkpoints;
  Matrix final_embeddings;
  std::optional<ModelParams> weights;
  std::optional<MetricReport> metrics;
  std::vector<CircleReport> circles;
  std::optional<Classification> classification;
};

}  // namespace modlab
