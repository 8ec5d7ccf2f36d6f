#include "json_io.hpp"
#include "modlab/error.hpp"
#include "modlab/record_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

namespace modlab {

std::string_view to_string(Label label) {
  switch (label) {
    case Label::pizza: return "pizza";
    case Label::clock: return "clock";
    case Label::non_circular: return "non_circular";
    case Label::ambiguous: return "ambiguous";
  }
  return "ambiguous";
}

Label parse_label(std::string_view s) {
  for (Label l : {Label::pizza, Label::clock, Label::non_circular, Label::ambiguous}) {
    if (to_string(l) == s) return l;
  }
  fail_data("unknown label '" + std::string(s) + "'");
}

namespace json_io {

json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number_of(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  fail_data("expected a number, got " + j.dump());
}

json optional_number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

std::optional<double> optional_number_of(const json& j) {
  if (j.is_null()) return std::nullopt;
  return number_of(j);
}

json matrix(const Matrix& m) {
  json data = json::array();
  for (Index i = 0; i < m.size(); ++i) data.push_back(number(m.data()[i]));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_of(const json& j) {
  const auto rows = j.at("rows").get<Index>();
  const auto cols = j.at("cols").get<Index>();
  const json& data = j.at("data");
  if (rows < 0 || cols < 0 || !data.is_array() || static_cast<Index>(data.size()) != rows * cols) {
    fail_data("matrix data length does not match its shape");
  }
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = number_of(data[static_cast<std::size_t>(i)]);
  return m;
}

json config(const RunConfig& c) {
  return {
      {"family", to_string(c.family)},
      {"p", c.p},
      {"width", c.width},
      {"layers", c.layers},
      {"attention_rate", number(c.attention_rate)},
      {"heads", c.heads},
      {"activation", to_string(c.activation)},
      {"embedding_variant", to_string(c.embedding_variant)},
      {"constant_attention", to_string(c.constant_attention)},
      {"seed", c.seed},
      {"lr", number(c.lr)},
      {"weight_decay", number(c.weight_decay)},
      {"epochs", c.epochs},
      {"train_fraction", number(c.train_fraction)},
      {"checkpoint_every", c.checkpoint_every},
      {"early_stop", c.early_stop},
      {"checkpoint_metrics", c.checkpoint_metrics},
  };
}

RunConfig config_of(const json& j, RunConfig c) {
  if (!j.is_object()) fail_data("config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "family") c.family = parse_family(v.get<std::string>());
    else if (key == "p") c.p = v.get<int>();
    else if (key == "width") c.width = v.get<int>();
    else if (key == "layers") c.layers = v.get<int>();
    else if (key == "attention_rate") c.attention_rate = number_of(v);
    else if (key == "heads") c.heads = v.get<int>();
    else if (key == "activation") c.activation = parse_activation(v.get<std::string>());
    else if (key == "embedding_variant") c.embedding_variant = parse_embedding_variant(v.get<std::string>());
    else if (key == "constant_attention") c.constant_attention = parse_constant_attention(v.get<std::string>());
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "lr") c.lr = number_of(v);
    else if (key == "weight_decay") c.weight_decay = number_of(v);
    else if (key == "epochs") c.epochs = v.get<int>();
    else if (key == "train_fraction") c.train_fraction = number_of(v);
    else if (key == "checkpoint_every") c.checkpoint_every = v.get<int>();
    else if (key == "early_stop") c.early_stop = v.get<bool>();
    else if (key == "checkpoint_metrics") c.checkpoint_metrics = v.get<bool>();
    else fail_data("unknown config key '" + key + "'");
  }
  return c;
}

json metrics(const MetricReport& r) {
  return {
      {"gradient_symmetricity", optional_number(r.gradient_symmetricity)},
      {"symmetricity_samples", r.symmetricity_samples},
      {"symmetricity_skipped", r.symmetricity_skipped},
      {"distance_irrelevance", optional_number(r.distance_irrelevance)},
      {"circularity", optional_number(r.circularity)},
      {"val_accuracy", number(r.val_accuracy)},
      {"sample_set", r.sample_set},
  };
}

MetricReport metrics_of(const json& j) {
  MetricReport r;
  r.gradient_symmetricity = optional_number_of(j.at("gradient_symmetricity"));
  // Bookkeeping fields may be left out of hand-written reports.
  r.symmetricity_samples = j.value("symmetricity_samples", 0);
  r.symmetricity_skipped = j.value("symmetricity_skipped", 0);
  r.distance_irrelevance = optional_number_of(j.at("distance_irrelevance"));
  r.circularity = optional_number_of(j.at("circularity"));
  if (j.contains("val_accuracy")) r.val_accuracy = number_of(j.at("val_accuracy"));
  r.sample_set = j.value("sample_set", std::string());
  return r;
}

json circle(const CircleReport& r) {
  return {
      {"pc_pair", {r.pc_pair.first, r.pc_pair.second}},
      {"circular", r.circular},
      {"k", r.k},
      {"k_mirror", r.k_mirror},
      {"w_k", number(r.w_k)},
      {"gap", r.gap},
      {"misfit", number(r.misfit)},
      {"isolated_accuracy", number(r.isolated_accuracy)},
      {"fve_clock", optional_number(r.fve_clock)},
      {"fve_pizza", optional_number(r.fve_pizza)},
      {"fve_accompanying", optional_number(r.fve_accompanying)},
      {"is_accompanying", r.is_accompanying},
      {"partner", r.partner ? json(*r.partner) : json(nullptr)},
  };
}

CircleReport circle_of(const json& j) {
  CircleReport r;
  const json& pair = j.at("pc_pair");
  r.pc_pair = {pair.at(0).get<int>(), pair.at(1).get<int>()};
  r.circular = j.at("circular").get<bool>();
  r.k = j.at("k").get<int>();
  r.k_mirror = j.at("k_mirror").get<int>();
  r.w_k = number_of(j.at("w_k"));
  r.gap = j.at("gap").get<int>();
  r.misfit = number_of(j.at("misfit"));
  r.isolated_accuracy = number_of(j.at("isolated_accuracy"));
  r.fve_clock = optional_number_of(j.at("fve_clock"));
  r.fve_pizza = optional_number_of(j.at("fve_pizza"));
  r.fve_accompanying = optional_number_of(j.at("fve_accompanying"));
  r.is_accompanying = j.at("is_accompanying").get<bool>();
  if (!j.at("partner").is_null()) r.partner = j.at("partner").get<int>();
  return r;
}

json classification(const Classification& c) {
  return {
      {"label", to_string(c.label)},
      {"thresholds",
       {{"circularity", number(c.thresholds.circularity)},
        {"symmetricity", number(c.thresholds.symmetricity)},
        {"distance_irrelevance", number(c.thresholds.distance_irrelevance)}}},
  };
}

Classification classification_of(const json& j) {
  Classification c;
  c.label = parse_label(j.at("label").get<std::string>());
  const json& t = j.at("thresholds");
  c.thresholds.circularity = number_of(t.at("circularity"));
  c.thresholds.symmetricity = number_of(t.at("symmetricity"));
  c.thresholds.distance_irrelevance = number_of(t.at("distance_irrelevance"));
  return c;
}

namespace {

json checkpoint(const Checkpoint& cp) {
  return {
      {"epoch", cp.epoch},
      {"train_loss", number(cp.train_loss)},
      {"val_loss", number(cp.val_loss)},
      {"train_acc", number(cp.train_acc)},
      {"val_acc", number(cp.val_acc)},
      {"metrics", cp.metrics ? metrics(*cp.metrics) : json(nullptr)},
      {"embeddings", cp.embeddings ? matrix(*cp.embeddings) : json(nullptr)},
  };
}

Checkpoint checkpoint_of(const json& j) {
  Checkpoint cp;
  cp.epoch = j.at("epoch").get<int>();
  cp.train_loss = number_of(j.at("train_loss"));
  cp.val_loss = number_of(j.at("val_loss"));
  cp.train_acc = number_of(j.at("train_acc"));
  cp.val_acc = number_of(j.at("val_acc"));
  if (j.contains("metrics") && !j.at("metrics").is_null()) cp.metrics = metrics_of(j.at("metrics"));
  if (j.contains("embeddings") && !j.at("embeddings").is_null()) cp.embeddings = matrix_of(j.at("embeddings"));
  return cp;
}

json weights(const ModelParams& m) {
  json tensors = json::array();
  for (const auto& t : m.tensors) tensors.push_back({{"name", t.name}, {"value", matrix(t.value)}});
  return tensors;
}

ModelParams weights_of(const json& j, const RunConfig& config) {
  ModelParams m = build(config);
  if (!j.is_array() || j.size() != m.tensors.size()) fail_data("weights do not match the configured architecture");
  for (std::size_t i = 0; i < m.tensors.size(); ++i) {
    const auto name = j[i].at("name").get<std::string>();
    Matrix value = matrix_of(j[i].at("value"));
    NamedTensor& slot = m.tensors[i];
    if (name != slot.name || value.rows() != slot.value.rows() || value.cols() != slot.value.cols()) {
      fail_data("weight tensor '" + name + "' does not match the configured architecture");
    }
    slot.value = std::move(value);
  }
  return m;
}

}  // namespace

json record(const RunRecord& r) {
  json cps = json::array();
  for (const auto& cp : r.checkpoints) cps.push_back(checkpoint(cp));
  json circles = json::array();
  for (const auto& c : r.circles) circles.push_back(circle(c));
  return {
      {"schema_version", r.schema_version},
      {"config", config(r.config)},
      {"converged", r.converged},
      {"failed", r.failed},
      {"failure", r.failure},
      {"epochs_run", r.epochs_run},
      {"checkpoints", std::move(cps)},
      {"final_embeddings", matrix(r.final_embeddings)},
      {"weights", r.weights ? weights(*r.weights) : json(nullptr)},
      {"metrics", r.metrics ? metrics(*r.metrics) : json(nullptr)},
      {"circles", std::move(circles)},
      {"classification", r.classification ? classification(*r.classification) : json(nullptr)},
  };
}

RunRecord record_of(const json& j) {
  RunRecord r;
  r.schema_version = j.at("schema_version").get<int>();
  if (r.schema_version < 1 || r.schema_version > kRecordSchemaVersion) {
    fail_data("unsupported record schema version " + std::to_string(r.schema_version));
  }
  r.config = config_of(j.at("config"));
  r.converged = j.at("converged").get<bool>();
  r.failed = j.at("failed").get<bool>();
  r.failure = j.at("failure").get<std::string>();
  r.epochs_run = j.at("epochs_run").get<int>();
  for (const auto& cp : j.at("checkpoints")) r.checkpoints.push_back(checkpoint_of(cp));
  r.final_embeddings = matrix_of(j.at("final_embeddings"));
  if (!j.at("weights").is_null()) r.weights = weights_of(j.at("weights"), r.config);
  if (!j.at("metrics").is_null()) r.metrics = metrics_of(j.at("metrics"));
  for (const auto& c : j.at("circles")) r.circles.push_back(circle_of(c));
  if (!j.at("classification").is_null()) r.classification = classification_of(j.at("classification"));
  return r;
}

json parse(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail_data(std::string(what) + ": malformed JSON (" + e.what() + ")");
  }
}

}  // namespace json_io

namespace {

// nlohmann signals missing keys and type mismatches with its own
// exceptions; a record or config that trips them is malformed input.
template <typename F>
auto guarded(const char* what, F f) {
  try {
    return f();
  } catch (const json_io::json::exception& e) {
    fail_data(std::string(what) + ": " + e.what());
  } catch (const Error& e) {
    if (e.category() == ErrorCategory::usage) fail_data(std::string(what) + ": " + e.what());
    throw;
  }
}

}  // namespace

std::string to_json(const RunRecord& record, int indent) { return json_io::record(record).dump(indent); }
std::string to_json(const RunConfig& config, int indent) { return json_io::config(config).dump(indent); }
std::string to_json(const MetricReport& report, int indent) { return json_io::metrics(report).dump(indent); }

RunRecord record_from_json(std::string_view text) {
  return guarded("record", [&] { return json_io::record_of(json_io::parse(text, "record")); });
}

RunConfig config_from_json(std::string_view text) {
  return guarded("config", [&] { return json_io::config_of(json_io::parse(text, "config")); });
}

MetricReport metric_report_from_json(std::string_view text) {
  return guarded("metric report", [&] { return json_io::metrics_of(json_io::parse(text, "metric report")); });
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail_data("cannot open " + tmp.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) fail_data("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail_data("cannot move " + tmp.string() + " to " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_data("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail_data("read failed for " + path.string());
  return ss.str();
}

void save_record(const std::filesystem::path& path, const RunRecord& record) {
  write_file_atomic(path, to_json(record));
}

RunRecord load_record(const std::filesystem::path& path) {
  try {
    return record_from_json(read_file(path));
  } catch (const Error& e) {
    if (e.category() == ErrorCategory::data && std::string_view(e.what()).find(path.string()) == std::string_view::npos) {
      fail_data(path.string() + ": " + e.what());
    }
    throw;
  }
}

}  // namespace modlab
