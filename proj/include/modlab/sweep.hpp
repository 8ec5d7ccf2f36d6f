#pragma once

#include "modlab/isolation.hpp"
#include "modlab/metrics.hpp"
#include "modlab/record.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace modlab {

// Pure function of the report and thresholds. Undefined metrics give
// ambiguous.
Classification classify(const MetricReport& report, const Thresholds& thresholds = {});

struct AnalysisOptions {
  // Random triples for gradient symmetricity; 0 means exhaustive.
  int symmetricity_samples = 100;
  // Principal pairs examined by circle isolation.
  int circle_pairs = 3;
  bool keep_mean = false;
  Thresholds thresholds;
  // Keep full weights in the record.
  bool store_weights = true;
};

// Keys symmetricity_samples, circle_pairs, keep_mean, store_weights.
AnalysisOptions analysis_options_from_json(std::string_view text);

// Fills metrics, circles and classification from the record's weights.
// Circles and classification are computed for converged runs only.
void analyze(RunRecord& record, const AnalysisOptions& options = {});

// Metric snapshot used for checkpoints and final reports of a run.
MetricReport run_metrics(const ModelParams& model, const RunConfig& config, double val_accuracy,
                         const AnalysisOptions& options);

// Train then analyze. Checkpoint metric snapshots are attached when the
// config asks for them.
RunRecord run_experiment(const RunConfig& config, const AnalysisOptions& options = {});

struct Sampler {
  enum class Kind { list, uniform, log_uniform };
  Kind kind = Kind::list;
  std::vector<double> values;
  double lo = 0.0;
  double hi = 1.0;
};

// Declarative sweep: either a cartesian grid over listed values, or `runs`
// random draws (attention rate uniform, width log-uniform, ...).
struct SweepSpec {
  RunConfig base;
  Sampler attention_rate;
  Sampler width;
  Sampler layers;
  std::vector<std::uint64_t> seeds;
  // 0 means grid mode.
  int runs = 0;
  std::uint64_t sampler_seed = 0;
  AnalysisOptions analysis;
};

SweepSpec sweep_spec_from_json(std::string_view text);
std::string to_json(const SweepSpec& spec, int indent = -1);

// Configs in a fixed order that does not depend on execution.
std::vector<RunConfig> expand(const SweepSpec& spec);

struct SweepOptions {
  // Worker threads; 0 reads MODLAB_WORKERS, falling back to 1.
  int workers = 0;
  // Directory receiving run_NNNN.json per run plus index.json.
  std::optional<std::filesystem::path> out_dir;
  std::function<void(std::size_t, const RunRecord&)> on_complete;
};

int default_workers();

// Runs every config; failures are recorded in the run's record and the
// sweep continues. Results are in config order.
std::vector<RunRecord> run_sweep(const std::vector<RunConfig>& configs, const AnalysisOptions& analysis,
                                 const SweepOptions& options = {});

struct PhaseBoundary {
  LogisticFit fit;
  double accuracy = 0.0;
  int pizza = 0;
  int clock = 0;
  // False when one class is missing.
  bool valid = false;
};

// Logistic boundary over (attention rate, log2 width), clock = 1, fitted
// on converged runs labelled pizza or clock.
PhaseBoundary phase_boundary(const std::vector<RunRecord>& records);

// One row per run: config, metrics and label.
std::string records_csv(const std::vector<RunRecord>& records);
std::string index_json(const std::vector<RunRecord>& records, const std::vector<std::string>& files);

// Every *.json run record under dir, sorted by file name (index.json is
// skipped).
std::vector<RunRecord> load_records(const std::filesystem::path& dir);

}  // namespace modlab
