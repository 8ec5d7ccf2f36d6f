#include "modlab/modlab.h"

#include "json_io.hpp"
#include "modlab/error.hpp"
#include "modlab/gradients.hpp"
#include "modlab/oracles.hpp"
#include "modlab/record_io.hpp"
#include "modlab/svg.hpp"
#include "modlab/sweep.hpp"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

struct mlab_config {
  modlab::RunConfig value;
};

struct mlab_record {
  modlab::RunRecord value;
};

namespace {

using modlab::json_io::json;

thread_local std::string g_last_error;

mlab_status fail(mlab_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
mlab_status guard(F f) {
  try {
    f();
    g_last_error.clear();
    return MLAB_OK;
  } catch (const modlab::Error& e) {
    return fail(static_cast<mlab_status>(static_cast<int>(e.category())), e.what());
  } catch (const std::bad_alloc&) {
    return fail(MLAB_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MLAB_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MLAB_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) modlab::fail_usage(std::string(what) + " must not be NULL");
}

char* copy_out(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

modlab::AnalysisOptions analysis(const char* text) {
  return text ? modlab::analysis_options_from_json(text) : modlab::AnalysisOptions{};
}

const modlab::ModelParams& weights_of(const modlab::RunRecord& r) {
  if (!r.weights) modlab::fail_data("record has no stored weights");
  return *r.weights;
}

json summary(const modlab::RunRecord& r) {
  namespace io = modlab::json_io;
  json circles = json::array();
  for (const auto& c : r.circles) circles.push_back(io::circle(c));
  const auto* last = r.checkpoints.empty() ? nullptr : &r.checkpoints.back();
  return {
      {"config", io::config(r.config)},
      {"converged", r.converged},
      {"failed", r.failed},
      {"failure", r.failure},
      {"epochs_run", r.epochs_run},
      {"final_train_loss", last ? io::number(last->train_loss) : json(nullptr)},
      {"final_val_accuracy", last ? io::number(last->val_acc) : json(nullptr)},
      {"metrics", r.metrics ? io::metrics(*r.metrics) : json(nullptr)},
      {"circles", std::move(circles)},
      {"classification", r.classification ? io::classification(*r.classification) : json(nullptr)},
  };
}

}  // namespace

extern "C" {

const char* mlab_version(void) { return "1.0.0"; }

const char* mlab_last_error(void) { return g_last_error.c_str(); }

void mlab_free_string(char* s) { std::free(s); }

mlab_status mlab_config_default(mlab_config** out) {
  return guard([&] {
    require(out, "out");
    *out = new mlab_config{};
  });
}

mlab_status mlab_config_from_json(const char* text, mlab_config** out) {
  return guard([&] {
    require(text, "json");
    require(out, "out");
    modlab::RunConfig c = modlab::config_from_json(text);
    modlab::validate(c);
    *out = new mlab_config{c};
  });
}

mlab_status mlab_config_set(mlab_config* config, const char* key, const char* value) {
  return guard([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    json v = json::parse(value, nullptr, false);
    if (v.is_discarded()) v = std::string(value);
    json patch = {{key, v}};
    modlab::RunConfig c;
    try {
      c = modlab::json_io::config_of(patch, config->value);
    } catch (const json::exception& e) {
      modlab::fail_usage(std::string("config key '") + key + "': " + e.what());
    } catch (const modlab::Error& e) {
      modlab::fail_usage(e.what());
    }
    modlab::validate(c);
    config->value = c;
  });
}

mlab_status mlab_config_to_json(const mlab_config* config, char** out) {
  return guard([&] {
    require(config, "config");
    require(out, "out");
    *out = copy_out(modlab::to_json(config->value, 2));
  });
}

void mlab_config_free(mlab_config* config) { delete config; }

mlab_status mlab_train(const mlab_config* config, const char* analysis_json, mlab_record** out) {
  return guard([&] {
    require(config, "config");
    require(out, "out");
    modlab::RunRecord r = modlab::run_experiment(config->value, analysis(analysis_json));
    *out = new mlab_record{std::move(r)};
  });
}

mlab_status mlab_record_load(const char* path, mlab_record** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new mlab_record{modlab::load_record(path)};
  });
}

mlab_status mlab_record_save(const mlab_record* record, const char* path) {
  return guard([&] {
    require(record, "record");
    require(path, "path");
    modlab::save_record(path, record->value);
  });
}

mlab_status mlab_record_to_json(const mlab_record* record, char** out) {
  return guard([&] {
    require(record, "record");
    require(out, "out");
    *out = copy_out(modlab::to_json(record->value));
  });
}

void mlab_record_free(mlab_record* record) { delete record; }

mlab_status mlab_record_analyze(mlab_record* record, const char* analysis_json) {
  return guard([&] {
    require(record, "record");
    modlab::analyze(record->value, analysis(analysis_json));
  });
}

mlab_status mlab_record_summary_json(const mlab_record* record, char** out) {
  return guard([&] {
    require(record, "record");
    require(out, "out");
    *out = copy_out(summary(record->value).dump(2));
  });
}

mlab_status mlab_record_isolation_json(const mlab_record* record, int n_pairs, int keep_mean, char** out) {
  return guard([&] {
    require(record, "record");
    require(out, "out");
    modlab::IsolationOptions o;
    o.n_pairs = n_pairs;
    o.keep_mean = keep_mean != 0;
    const modlab::IsolationSummary s = modlab::isolation_summary(weights_of(record->value), o);
    namespace io = modlab::json_io;
    json circles = json::array();
    for (const auto& c : s.circles) circles.push_back(io::circle(c));
    json pairs = json::array();
    for (const auto& [i, j] : s.accompanying_pairs) pairs.push_back({i, j});
    const json doc = {
        {"circles", std::move(circles)},
        {"accompanying_pairs", std::move(pairs)},
        {"leading_accuracy", io::number(s.leading_accuracy)},
        {"accompanied_accuracy", io::optional_number(s.accompanied_accuracy)},
        {"accompanying_accuracy", io::optional_number(s.accompanying_accuracy)},
    };
    *out = copy_out(doc.dump(2));
  });
}

mlab_status mlab_classify_json(const char* metrics_json, char** out) {
  return guard([&] {
    require(metrics_json, "metrics_json");
    require(out, "out");
    const modlab::Classification c = modlab::classify(modlab::metric_report_from_json(metrics_json));
    *out = copy_out(modlab::json_io::classification(c).dump(2));
  });
}

mlab_status mlab_record_heatmap_svg(const mlab_record* record, int layout, char** out) {
  return guard([&] {
    require(record, "record");
    require(out, "out");
    if (layout != 0 && layout != 1) modlab::fail_usage("heatmap layout must be 0 or 1");
    const auto l = modlab::correct_logits(weights_of(record->value));
    *out = copy_out(modlab::render_heatmap(l, layout ? modlab::HeatmapLayout::a_minus_b : modlab::HeatmapLayout::raw));
  });
}

mlab_status mlab_record_circle_svg(const mlab_record* record, int first, int second, char** out) {
  return guard([&] {
    require(record, "record");
    require(out, "out");
    const modlab::Matrix& emb = record->value.final_embeddings;
    const auto available = std::min(emb.rows(), emb.cols());
    if (first < 0 || second < 0 || first >= available || second >= available) {
      modlab::fail_usage("principal component index out of range");
    }
    const modlab::PcaResult pca = modlab::principal_components(emb, std::max(first, second) + 1);
    modlab::Matrix pts(emb.rows(), 2);
    pts.col(0) = pca.projections.col(first);
    pts.col(1) = pca.projections.col(second);
    std::vector<std::string> labels;
    for (modlab::Index t = 0; t < emb.rows(); ++t) labels.push_back(std::to_string(t));
    *out = copy_out(modlab::render_circle(pts, labels));
  });
}

mlab_status mlab_sweep_run(const char* spec_json, const char* out_dir, int workers, char** out) {
  return guard([&] {
    require(spec_json, "spec_json");
    require(out_dir, "out_dir");
    require(out, "out");
    const modlab::SweepSpec spec = modlab::sweep_spec_from_json(spec_json);
    modlab::SweepOptions so;
    so.workers = workers;
    so.out_dir = out_dir;
    const auto records = modlab::run_sweep(modlab::expand(spec), spec.analysis, so);
    *out = copy_out(modlab::read_file(std::filesystem::path(out_dir) / "index.json"));
  });
}

mlab_status mlab_report(const char* runs_dir, const char* svg_path, const char* csv_path, char** out) {
  return guard([&] {
    require(runs_dir, "runs_dir");
    require(svg_path, "svg_path");
    require(out, "out");
    const auto records = modlab::load_records(runs_dir);
    modlab::write_file_atomic(svg_path, modlab::render_phase(records));
    if (csv_path) modlab::write_file_atomic(csv_path, modlab::records_csv(records));
    const modlab::PhaseBoundary b = modlab::phase_boundary(records);
    const json doc = {
        {"runs", records.size()},
        {"pizza", b.pizza},
        {"clock", b.clock},
        {"valid", b.valid},
        {"w_attention_rate", b.fit.w_x},
        {"w_log2_width", b.fit.w_y},
        {"bias", b.fit.bias},
        {"fit_converged", b.fit.converged},
        {"accuracy", b.accuracy},
    };
    *out = copy_out(doc.dump(2));
  });
}

mlab_status mlab_selfcheck(char** out) {
  bool all_pass = true;
  const mlab_status st = guard([&] {
    require(out, "out");
    json checks = json::array();
    auto add = [&](const char* name, double value, bool pass) {
      checks.push_back({{"name", name}, {"value", modlab::json_io::number(value)}, {"pass", pass}});
      all_pass = all_pass && pass;
    };
    modlab::RunConfig c;
    c.p = 11;
    c.width = 16;
    c.seed = 7;
    const auto fd = modlab::finite_difference_check(modlab::build(c), 10, 1e-4, 7);
    add("finite_difference_transformer", fd.max_relative_error, fd.max_relative_error < 1e-4);

    const modlab::CircleSpec spec{11, 1};
    const auto tri = modlab::exhaustive_triples(11);
    const auto pizza = modlab::gradient_symmetricity(modlab::build_analytic_pizza(spec).network, tri);
    add("analytic_pizza_symmetricity", pizza.value.value_or(0.0),
        pizza.value && std::abs(*pizza.value - 1.0) < 1e-6);
    const auto clock = modlab::gradient_symmetricity(modlab::build_analytic_clock(spec).network, tri);
    add("analytic_clock_symmetricity", clock.value.value_or(1.0), clock.value && std::abs(*clock.value) < 1e-6);
    const double dev = modlab::abs_cos_identity_deviation(100000);
    add("abs_cos_identity_deviation", dev, dev < 0.25);
    *out = copy_out(json{{"passed", all_pass}, {"checks", std::move(checks)}}.dump(2));
  });
  if (st != MLAB_OK) return st;
  return all_pass ? MLAB_OK : fail(MLAB_ERR_NUMERIC, "selfcheck failed");
}

}  // extern "C"
