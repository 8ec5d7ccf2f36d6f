// modlab command-line entry point. Talks to the library only through the C
// interface in modlab/modlab.h.

#include "modlab/modlab.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

namespace {

using nlohmann::json;

// Thrown to unwind with a given exit status after printing the reason.
struct Exit {
  int code;
};

void check(mlab_status st) {
  if (st != MLAB_OK) {
    std::cerr << "error[" << static_cast<int>(st) << "]: " << mlab_last_error() << '\n';
    throw Exit{static_cast<int>(st)};
  }
}

std::string take(char* s) {
  std::string out = s ? s : "";
  mlab_free_string(s);
  return out;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "error[3]: cannot open " << path << '\n';
    throw Exit{MLAB_ERR_DATA};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) {
    std::cerr << "error[3]: cannot write " << path << '\n';
    throw Exit{MLAB_ERR_DATA};
  }
}

struct ConfigHandle {
  mlab_config* p = nullptr;
  ~ConfigHandle() { mlab_config_free(p); }
};

struct RecordHandle {
  mlab_record* p = nullptr;
  ~RecordHandle() { mlab_record_free(p); }
};

// Analysis flags shared by train and analyze.
struct AnalysisFlags {
  int samples = 100;
  int pairs = 3;
  bool keep_mean = false;
  bool no_weights = false;

  std::string json_text() const {
    return json{{"symmetricity_samples", samples},
                {"circle_pairs", pairs},
                {"keep_mean", keep_mean},
                {"store_weights", !no_weights}}
        .dump();
  }
};

void add_analysis_flags(CLI::App* cmd, AnalysisFlags& f) {
  cmd->add_option("--samples", f.samples, "Random triples for gradient symmetricity (0 = exhaustive)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--pairs", f.pairs, "Principal pairs examined by circle isolation")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--keep-mean", f.keep_mean, "Keep the embedding mean when isolating circles");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train small networks on modular addition and identify the algorithm they learn"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mlab_version()));

  // train
  auto* train = app.add_subcommand("train", "Train one model and analyze it");
  std::string config_path, train_out;
  // Flag name -> config key; only flags given on the command line are set.
  const std::pair<const char*, const char*> config_flags[] = {
      {"--family", "family"},
      {"--p", "p"},
      {"--width", "width"},
      {"--layers", "layers"},
      {"--attention-rate", "attention_rate"},
      {"--heads", "heads"},
      {"--activation", "activation"},
      {"--embedding-variant", "embedding_variant"},
      {"--constant-attention", "constant_attention"},
      {"--seed", "seed"},
      {"--lr", "lr"},
      {"--weight-decay", "weight_decay"},
      {"--epochs", "epochs"},
      {"--train-fraction", "train_fraction"},
      {"--checkpoint-every", "checkpoint_every"},
  };
  std::map<std::string, std::string> config_values;
  for (const auto& [flag, key] : config_flags) train->add_option(flag, config_values[key]);
  bool early_stop = false, checkpoint_metrics = false;
  train->add_flag("--early-stop", early_stop, "Stop once validation accuracy is 1 and the loss is flat");
  train->add_flag("--checkpoint-metrics", checkpoint_metrics, "Attach metric snapshots to every checkpoint");
  train->add_option("--config", config_path, "JSON config merged onto the defaults before flags")
      ->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "Run record path")->required();
  AnalysisFlags train_analysis;
  add_analysis_flags(train, train_analysis);
  train->add_flag("--no-weights", train_analysis.no_weights, "Do not store full weights");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Recompute metrics and classification of a record");
  std::string analyze_in, analyze_out;
  analyze->add_option("record", analyze_in)->required()->check(CLI::ExistingFile);
  analyze->add_option("--out", analyze_out, "Write the updated record here (default: in place)");
  AnalysisFlags analyze_flags;
  add_analysis_flags(analyze, analyze_flags);

  // isolate
  auto* isolate = app.add_subcommand("isolate", "Circle isolation report for a record");
  std::string isolate_in, isolate_out;
  int isolate_pairs = 3;
  bool isolate_keep_mean = false;
  isolate->add_option("record", isolate_in)->required()->check(CLI::ExistingFile);
  isolate->add_option("--pairs", isolate_pairs, "Leading principal pairs")->check(CLI::PositiveNumber);
  isolate->add_flag("--keep-mean", isolate_keep_mean);
  isolate->add_option("--out", isolate_out, "Also write the report to this file");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run a sweep spec");
  std::string sweep_spec, sweep_out;
  int workers = 0;
  sweep->add_option("spec", sweep_spec)->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", sweep_out, "Directory for run records")->required();
  sweep->add_option("--workers", workers, "Worker threads (default: MODLAB_WORKERS or 1)");

  // classify
  auto* classify = app.add_subcommand("classify", "Label a run from its metric report");
  std::string classify_in;
  classify->add_option("file", classify_in, "Run record or bare metric report JSON")
      ->required()
      ->check(CLI::ExistingFile);

  // report
  auto* report = app.add_subcommand("report", "Emit SVG figures");
  std::string runs_dir, report_out, csv_out, record_in, heatmap_out, circle_out, layout = "a-minus-b";
  std::vector<int> pair{0, 1};
  report->add_option("--runs", runs_dir, "Directory of run records (phase scatter)");
  report->add_option("--out", report_out, "Phase scatter SVG path");
  report->add_option("--csv", csv_out, "CSV summary path");
  report->add_option("--record", record_in, "Run record for heatmap / circle figures");
  report->add_option("--heatmap", heatmap_out, "Correct-logit heatmap SVG path");
  report->add_option("--layout", layout, "Heatmap layout")->check(CLI::IsMember({"raw", "a-minus-b"}));
  report->add_option("--circle", circle_out, "Embedding circle SVG path");
  report->add_option("--pair", pair, "Principal components for --circle")->expected(2);

  auto* selfcheck = app.add_subcommand("selfcheck", "Fast internal consistency checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return MLAB_ERR_USAGE;
  }

  try {
    if (*train) {
      ConfigHandle cfg;
      if (!config_path.empty()) {
        check(mlab_config_from_json(read_text(config_path).c_str(), &cfg.p));
      } else {
        check(mlab_config_default(&cfg.p));
      }
      for (const auto& [flag, key] : config_flags) {
        if (train->count(flag) > 0) check(mlab_config_set(cfg.p, key, config_values[key].c_str()));
      }
      if (early_stop) check(mlab_config_set(cfg.p, "early_stop", "true"));
      if (checkpoint_metrics) check(mlab_config_set(cfg.p, "checkpoint_metrics", "true"));
      RecordHandle rec;
      check(mlab_train(cfg.p, train_analysis.json_text().c_str(), &rec.p));
      check(mlab_record_save(rec.p, train_out.c_str()));
      char* s = nullptr;
      check(mlab_record_summary_json(rec.p, &s));
      std::cout << take(s) << '\n';
    } else if (*analyze) {
      RecordHandle rec;
      check(mlab_record_load(analyze_in.c_str(), &rec.p));
      check(mlab_record_analyze(rec.p, analyze_flags.json_text().c_str()));
      check(mlab_record_save(rec.p, (analyze_out.empty() ? analyze_in : analyze_out).c_str()));
      char* s = nullptr;
      check(mlab_record_summary_json(rec.p, &s));
      std::cout << take(s) << '\n';
    } else if (*isolate) {
      RecordHandle rec;
      check(mlab_record_load(isolate_in.c_str(), &rec.p));
      char* s = nullptr;
      check(mlab_record_isolation_json(rec.p, isolate_pairs, isolate_keep_mean ? 1 : 0, &s));
      const std::string text = take(s);
      if (!isolate_out.empty()) write_text(isolate_out, text + "\n");
      std::cout << text << '\n';
    } else if (*sweep) {
      char* s = nullptr;
      check(mlab_sweep_run(read_text(sweep_spec).c_str(), sweep_out.c_str(), workers, &s));
      std::cout << take(s) << '\n';
    } else if (*classify) {
      const std::string text = read_text(classify_in);
      const json doc = json::parse(text, nullptr, false);
      if (doc.is_discarded() || !doc.is_object()) {
        std::cerr << "error[3]: " << classify_in << " is not a JSON object\n";
        throw Exit{MLAB_ERR_DATA};
      }
      std::string metrics = text;
      if (doc.contains("schema_version")) {
        if (!doc.contains("metrics") || doc.at("metrics").is_null()) {
          std::cerr << "error[3]: record has no metric report; run analyze first\n";
          throw Exit{MLAB_ERR_DATA};
        }
        metrics = doc.at("metrics").dump();
      }
      char* s = nullptr;
      check(mlab_classify_json(metrics.c_str(), &s));
      std::cout << take(s) << '\n';
    } else if (*report) {
      bool did = false;
      if (!runs_dir.empty()) {
        if (report_out.empty()) {
          std::cerr << "error[2]: --runs needs --out\n";
          return MLAB_ERR_USAGE;
        }
        char* s = nullptr;
        check(mlab_report(runs_dir.c_str(), report_out.c_str(), csv_out.empty() ? nullptr : csv_out.c_str(), &s));
        std::cout << take(s) << '\n';
        did = true;
      }
      if (!record_in.empty()) {
        RecordHandle rec;
        check(mlab_record_load(record_in.c_str(), &rec.p));
        if (!heatmap_out.empty()) {
          char* s = nullptr;
          check(mlab_record_heatmap_svg(rec.p, layout == "a-minus-b" ? 1 : 0, &s));
          write_text(heatmap_out, take(s));
          did = true;
        }
        if (!circle_out.empty()) {
          char* s = nullptr;
          check(mlab_record_circle_svg(rec.p, pair[0], pair[1], &s));
          write_text(circle_out, take(s));
          did = true;
        }
      }
      if (!did) {
        std::cerr << "error[2]: report needs --runs/--out or --record with --heatmap/--circle\n";
        return MLAB_ERR_USAGE;
      }
    } else if (*selfcheck) {
      char* s = nullptr;
      const mlab_status st = mlab_selfcheck(&s);
      if (s) std::cout << take(s) << '\n';
      check(st);
    }
  } catch (const Exit& e) {
    return e.code;
  }
  return 0;
}
