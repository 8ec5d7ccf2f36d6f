#include "modlab/sweep.hpp"

#include "json_io.hpp"
#include "modlab/error.hpp"
#include "modlab/record_io.hpp"
#include "modlab/rng.hpp"
#include "modlab/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <sstream>
#include <thread>

namespace modlab {

namespace {

constexpr std::uint64_t kSamplerStream = 4;

using json_io::json;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

json sampler_json(const Sampler& s) {
  switch (s.kind) {
    case Sampler::Kind::list: return s.values;
    case Sampler::Kind::uniform: return {{"uniform", {s.lo, s.hi}}};
    case Sampler::Kind::log_uniform: return {{"log_uniform", {s.lo, s.hi}}};
  }
  return nullptr;
}

Sampler sampler_of(const json& j, const char* name) {
  Sampler s;
  if (j.is_number()) {
    s.values = {j.get<double>()};
  } else if (j.is_array()) {
    if (j.empty()) fail_data(std::string("sweep spec: empty list for ") + name);
    for (const auto& v : j) s.values.push_back(v.get<double>());
  } else if (j.is_object() && j.size() == 1 && (j.contains("uniform") || j.contains("log_uniform"))) {
    const bool log = j.contains("log_uniform");
    const json& range = log ? j.at("log_uniform") : j.at("uniform");
    s.kind = log ? Sampler::Kind::log_uniform : Sampler::Kind::uniform;
    s.lo = range.at(0).get<double>();
    s.hi = range.at(1).get<double>();
    if (!(s.lo <= s.hi) || (log && !(s.lo > 0.0))) fail_data(std::string("sweep spec: bad range for ") + name);
  } else {
    fail_data(std::string("sweep spec: cannot read sampler for ") + name);
  }
  return s;
}

double draw(const Sampler& s, SeededRng& rng) {
  switch (s.kind) {
    case Sampler::Kind::list: return s.values[rng.below(s.values.size())];
    case Sampler::Kind::uniform: return rng.uniform(s.lo, s.hi);
    case Sampler::Kind::log_uniform: return std::exp(rng.uniform(std::log(s.lo), std::log(s.hi)));
  }
  return 0.0;
}

int as_count(double v, const char* name) {
  const double r = std::round(v);
  if (std::abs(v - r) > 1e-9) fail_usage(std::string("sweep: ") + name + " must be an integer");
  return static_cast<int>(r);
}

std::vector<double> grid_values(const Sampler& s, const char* name) {
  if (s.kind != Sampler::Kind::list) fail_usage(std::string("sweep: grid mode needs a list for ") + name);
  return s.values;
}

RunRecord failed_record(const RunConfig& config, const std::string& why) {
  RunRecord r;
  r.config = config;
  r.failed = true;
  r.failure = why;
  return r;
}

AnalysisOptions analysis_of(const json& j) {
  if (!j.is_object()) fail_data("analysis options must be a JSON object");
  AnalysisOptions a;
  for (const auto& [key, v] : j.items()) {
    if (key == "symmetricity_samples") a.symmetricity_samples = v.get<int>();
    else if (key == "circle_pairs") a.circle_pairs = v.get<int>();
    else if (key == "keep_mean") a.keep_mean = v.get<bool>();
    else if (key == "store_weights") a.store_weights = v.get<bool>();
    else fail_data("unknown analysis key '" + key + "'");
  }
  if (a.symmetricity_samples < 0 || a.circle_pairs < 0) fail_data("analysis counts must be non-negative");
  return a;
}

}  // namespace

AnalysisOptions analysis_options_from_json(std::string_view text) {
  try {
    return analysis_of(json_io::parse(text, "analysis options"));
  } catch (const json::exception& e) {
    fail_data(std::string("analysis options: ") + e.what());
  }
}

Classification classify(const MetricReport& report, const Thresholds& thresholds) {
  Classification c;
  c.thresholds = thresholds;
  if (!report.circularity || !report.gradient_symmetricity || !report.distance_irrelevance) {
    c.label = Label::ambiguous;
    return c;
  }
  const double sg = *report.gradient_symmetricity;
  const double q = *report.distance_irrelevance;
  if (*report.circularity < thresholds.circularity) {
    c.label = Label::non_circular;
  } else if (sg > thresholds.symmetricity && q < thresholds.distance_irrelevance) {
    c.label = Label::pizza;
  } else if (sg <= thresholds.symmetricity && q >= thresholds.distance_irrelevance) {
    c.label = Label::clock;
  } else {
    c.label = Label::ambiguous;
  }
  return c;
}

MetricReport run_metrics(const ModelParams& model, const RunConfig& config, double val_accuracy,
                         const AnalysisOptions& options) {
  MetricOptions mo;
  mo.exhaustive = options.symmetricity_samples == 0;
  mo.samples = options.symmetricity_samples;
  mo.seed = config.seed;
  return compute_metrics(model, val_accuracy, mo);
}

void analyze(RunRecord& record, const AnalysisOptions& options) {
  if (!record.weights) fail_data("record has no stored weights to analyze");
  const ModelParams& model = *record.weights;
  const double val_acc = record.checkpoints.empty() ? 0.0 : record.checkpoints.back().val_acc;
  record.metrics = run_metrics(model, record.config, val_acc, options);
  record.circles.clear();
  record.classification.reset();
  if (!record.converged) return;
  const Matrix emb = model.number_embeddings();
  if (options.circle_pairs > 0 && 2 * options.circle_pairs <= std::min(emb.rows(), emb.cols())) {
    IsolationOptions io;
    io.n_pairs = options.circle_pairs;
    io.keep_mean = options.keep_mean;
    record.circles = isolation_report(model, io);
    detect_accompanying(record.circles, model.arch.p);
  }
  record.classification = classify(*record.metrics, options.thresholds);
}

RunRecord run_experiment(const RunConfig& config, const AnalysisOptions& options) {
  TrainOptions to;
  if (config.checkpoint_metrics) {
    to.on_checkpoint = [&](const ModelParams& model, const Dataset&, Checkpoint& cp) {
      cp.metrics = run_metrics(model, config, cp.val_acc, options);
    };
  }
  RunRecord record = train(config, to);
  if (!record.failed) analyze(record, options);
  if (!options.store_weights) record.weights.reset();
  return record;
}

SweepSpec sweep_spec_from_json(std::string_view text) {
  try {
    const json j = json_io::parse(text, "sweep spec");
    if (!j.is_object()) fail_data("sweep spec must be a JSON object");
    SweepSpec s;
    for (const auto& [key, v] : j.items()) {
      if (key == "base") s.base = json_io::config_of(v);
    }
    s.attention_rate.values = {s.base.attention_rate};
    s.width.values = {static_cast<double>(s.base.width)};
    s.layers.values = {static_cast<double>(s.base.layers)};
    for (const auto& [key, v] : j.items()) {
      if (key == "base") continue;
      if (key == "attention_rate") s.attention_rate = sampler_of(v, "attention_rate");
      else if (key == "width") s.width = sampler_of(v, "width");
      else if (key == "layers") s.layers = sampler_of(v, "layers");
      else if (key == "seeds") s.seeds = v.get<std::vector<std::uint64_t>>();
      else if (key == "runs") s.runs = v.get<int>();
      else if (key == "sampler_seed") s.sampler_seed = v.get<std::uint64_t>();
      else if (key == "analysis") s.analysis = analysis_of(v);
      else {
        fail_data("sweep spec: unknown key '" + key + "'");
      }
    }
    if (s.seeds.empty()) s.seeds = {s.base.seed};
    if (s.runs < 0) fail_data("sweep spec: runs must be non-negative");
    return s;
  } catch (const json::exception& e) {
    fail_data(std::string("sweep spec: ") + e.what());
  } catch (const Error& e) {
    if (e.category() == ErrorCategory::usage) fail_data(std::string("sweep spec: ") + e.what());
    throw;
  }
}

std::string to_json(const SweepSpec& s, int indent) {
  json j = {
      {"base", json_io::config(s.base)},
      {"attention_rate", sampler_json(s.attention_rate)},
      {"width", sampler_json(s.width)},
      {"layers", sampler_json(s.layers)},
      {"seeds", s.seeds},
      {"runs", s.runs},
      {"sampler_seed", s.sampler_seed},
      {"analysis",
       {{"symmetricity_samples", s.analysis.symmetricity_samples},
        {"circle_pairs", s.analysis.circle_pairs},
        {"keep_mean", s.analysis.keep_mean},
        {"store_weights", s.analysis.store_weights}}},
  };
  return j.dump(indent);
}

std::vector<RunConfig> expand(const SweepSpec& spec) {
  std::vector<RunConfig> out;
  const std::vector<std::uint64_t> seeds = spec.seeds.empty() ? std::vector{spec.base.seed} : spec.seeds;
  if (spec.runs == 0) {
    for (double rate : grid_values(spec.attention_rate, "attention_rate")) {
      for (double width : grid_values(spec.width, "width")) {
        for (double layers : grid_values(spec.layers, "layers")) {
          for (std::uint64_t seed : seeds) {
            RunConfig c = spec.base;
            c.attention_rate = rate;
            c.width = as_count(width, "width");
            c.layers = as_count(layers, "layers");
            c.seed = seed;
            validate(c);
            out.push_back(c);
          }
        }
      }
    }
    return out;
  }
  SeededRng rng(spec.sampler_seed, kSamplerStream);
  for (int i = 0; i < spec.runs; ++i) {
    RunConfig c = spec.base;
    c.attention_rate = draw(spec.attention_rate, rng);
    // Widths are snapped to a multiple of the head count.
    const double w = draw(spec.width, rng);
    const int heads = std::max(1, c.heads);
    c.width = std::max(heads, static_cast<int>(std::lround(w / heads)) * heads);
    c.layers = std::max(1, static_cast<int>(std::lround(draw(spec.layers, rng))));
    c.seed = seeds[static_cast<std::size_t>(i) % seeds.size()] + static_cast<std::uint64_t>(i / seeds.size());
    validate(c);
    out.push_back(c);
  }
  return out;
}

int default_workers() {
  if (const char* env = std::getenv("MODLAB_WORKERS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0 && n <= 1024) return static_cast<int>(n);
    fail_usage("MODLAB_WORKERS must be a positive integer, got '" + std::string(env) + "'");
  }
  return 1;
}

std::vector<RunRecord> run_sweep(const std::vector<RunConfig>& configs, const AnalysisOptions& analysis,
                                 const SweepOptions& options) {
  const int workers = std::max(1, std::min<int>(options.workers > 0 ? options.workers : default_workers(),
                                                static_cast<int>(std::max<std::size_t>(1, configs.size()))));
  if (options.out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*options.out_dir, ec);
    if (ec) fail_data("cannot create " + options.out_dir->string());
  }
  std::vector<RunRecord> records(configs.size());
  std::vector<std::string> files(configs.size());
  std::atomic<std::size_t> next{0};
  std::mutex report_mutex;
  std::exception_ptr io_error;

  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      RunRecord rec;
      try {
        rec = run_experiment(configs[i], analysis);
      } catch (const std::exception& e) {
        rec = failed_record(configs[i], e.what());
      }
      char name[32];
      std::snprintf(name, sizeof name, "run_%04zu.json", i);
      files[i] = name;
      try {
        if (options.out_dir) save_record(*options.out_dir / name, rec);
      } catch (...) {
        const std::lock_guard lock(report_mutex);
        if (!io_error) io_error = std::current_exception();
      }
      records[i] = std::move(rec);
      if (options.on_complete) {
        const std::lock_guard lock(report_mutex);
        options.on_complete(i, records[i]);
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (io_error) std::rethrow_exception(io_error);
  if (options.out_dir) write_file_atomic(*options.out_dir / "index.json", index_json(records, files));
  return records;
}

PhaseBoundary phase_boundary(const std::vector<RunRecord>& records) {
  std::vector<Point2> pts;
  std::vector<int> labels;
  PhaseBoundary out;
  for (const auto& r : records) {
    if (!r.converged || !r.classification) continue;
    const Label l = r.classification->label;
    if (l != Label::pizza && l != Label::clock) continue;
    pts.push_back({r.config.attention_rate, std::log2(static_cast<double>(r.config.width))});
    labels.push_back(l == Label::clock ? 1 : 0);
    (l == Label::clock ? out.clock : out.pizza) += 1;
  }
  out.fit = fit_logistic_2d(pts, labels);
  out.valid = out.pizza > 0 && out.clock > 0;
  if (!pts.empty()) {
    int hits = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) hits += out.fit.predict(pts[i].x, pts[i].y) == labels[i];
    out.accuracy = static_cast<double>(hits) / static_cast<double>(pts.size());
  }
  return out;
}

std::string records_csv(const std::vector<RunRecord>& records) {
  std::ostringstream os;
  os << "run,family,p,width,layers,attention_rate,seed,converged,failed,epochs_run,val_accuracy,"
        "gradient_symmetricity,distance_irrelevance,circularity,label\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const RunRecord& r = records[i];
    const RunConfig& c = r.config;
    os << i << ',' << to_string(c.family) << ',' << c.p << ',' << c.width << ',' << c.layers << ','
       << format_double(c.attention_rate) << ',' << c.seed << ',' << (r.converged ? 1 : 0) << ','
       << (r.failed ? 1 : 0) << ',' << r.epochs_run << ',';
    if (r.metrics) {
      os << format_double(r.metrics->val_accuracy) << ',' << format_optional(r.metrics->gradient_symmetricity) << ','
         << format_optional(r.metrics->distance_irrelevance) << ',' << format_optional(r.metrics->circularity);
    } else {
      os << ",,,";
    }
    os << ',' << (r.classification ? to_string(r.classification->label) : std::string_view()) << '\n';
  }
  return os.str();
}

std::string index_json(const std::vector<RunRecord>& records, const std::vector<std::string>& files) {
  json runs = json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const RunRecord& r = records[i];
    runs.push_back({
        {"file", i < files.size() ? files[i] : std::string()},
        {"config", json_io::config(r.config)},
        {"converged", r.converged},
        {"failed", r.failed},
        {"label", r.classification ? json(to_string(r.classification->label)) : json(nullptr)},
    });
  }
  return json{{"schema_version", kRecordSchemaVersion}, {"runs", std::move(runs)}}.dump(2);
}

std::vector<RunRecord> load_records(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) fail_data(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    const auto& path = entry.path();
    if (entry.is_regular_file() && path.extension() == ".json" && path.filename() != "index.json") {
      paths.push_back(path);
    }
  }
  if (ec) fail_data("cannot list " + dir.string());
  std::sort(paths.begin(), paths.end());
  std::vector<RunRecord> out;
  for (const auto& path : paths) out.push_back(load_record(path));
  return out;
}

}  // namespace modlab
