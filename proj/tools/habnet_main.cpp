// habnet: train, evaluate, predict, score and inspect hierarchical
// bi-directional self-attention models for paper-review data.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "habnet/attention_export.hpp"
#include "habnet/data.hpp"
#include "habnet/metrics.hpp"
#include "habnet/model.hpp"
#include "habnet/synthetic.hpp"
#include "habnet/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "habnet 0.1.0";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw habnet::ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw habnet::ConfigError("cannot write " + path);
  out << content;
}

std::string fnv1a64_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

// Run configuration file: {"model": {...}, "train": {...}, "data": {...}}.
struct RunConfig {
  habnet::ModelConfig model;
  habnet::TrainConfig train;
  std::string embeddings_path;
  habnet::SplitSpec split;
  bool d_e_explicit = false;
  bool epochs_explicit = false;

  // The documented per-task defaults kick in only where the file is silent:
  // embedding width 50 (decision) / 100 (rating), epochs 100 / 50.
  void apply_task_defaults() {
    if (!d_e_explicit) {
      model.d_e = model.task == habnet::Task::rating ? 100 : 50;
    }
    if (!epochs_explicit) {
      train.epochs = model.task == habnet::Task::rating ? 50 : 100;
    }
  }

  json to_json() const {
    json j;
    j["model"] = json::parse(model.to_json());
    j["train"] = json::parse(train.to_json());
    json d;
    d["embeddings"] = embeddings_path;
    d["split_seed"] = split.seed;
    if (split.counts.has_value()) {
      d["split"] = {{"train", split.counts->train},
                    {"validation", split.counts->validation},
                    {"test", split.counts->test}};
    }
    j["data"] = d;
    return j;
  }
};

RunConfig load_run_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw habnet::ConfigError(path + ": " + e.what());
  }
  RunConfig rc;
  if (j.contains("model")) {
    rc.model = habnet::ModelConfig::from_json(j["model"].dump());
    rc.d_e_explicit = j["model"].contains("d_e");
  }
  if (j.contains("train")) {
    rc.train = habnet::TrainConfig::from_json(j["train"].dump());
    rc.epochs_explicit = j["train"].contains("epochs");
  }
  if (j.contains("data")) {
    const json& d = j["data"];
    if (d.contains("embeddings")) {
      rc.embeddings_path = d["embeddings"].get<std::string>();
    }
    if (d.contains("split_seed")) {
      rc.split.seed = d["split_seed"].get<std::uint64_t>();
    }
    if (d.contains("split")) {
      habnet::SplitCounts counts;
      counts.train = d["split"]["train"].get<std::size_t>();
      counts.validation = d["split"]["validation"].get<std::size_t>();
      counts.test = d["split"]["test"].get<std::size_t>();
      rc.split.counts = counts;
    }
  }
  return rc;
}

struct LoadedData {
  std::vector<habnet::TokenizedPaper> corpus;  // task granularity
  habnet::EmbeddingTable table;
  habnet::DatasetSplit split;
  std::string corpus_checksum;
};

LoadedData load_data(const RunConfig& rc, const std::string& data_path) {
  if (rc.embeddings_path.empty()) {
    throw habnet::ConfigError("config lacks data.embeddings path");
  }
  LoadedData out;
  const std::string raw = read_file(data_path);
  out.corpus_checksum = fnv1a64_hex(raw);
  auto papers = habnet::parse_corpus(raw, data_path);
  auto tokenized = habnet::tokenize_corpus(papers);
  if (rc.model.task == habnet::Task::rating) {
    tokenized = habnet::explode_reviews(tokenized);
  }
  auto vocab = habnet::corpus_vocabulary(tokenized);
  out.table = habnet::load_embeddings(rc.embeddings_path, vocab);
  if (out.table.dim != rc.model.d_e) {
    throw habnet::ConfigError(
        "embedding file is " + std::to_string(out.table.dim) +
        "-dimensional but the config sets d_e=" + std::to_string(rc.model.d_e));
  }
  out.split = habnet::split_dataset(tokenized, rc.split);
  out.corpus = std::move(tokenized);
  return out;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const RunConfig& rc, const std::string& corpus_checksum,
                    const std::vector<std::string>& artifacts) {
  json j;
  j["tool_version"] = kToolVersion;
  j["command"] = command;
  j["config"] = rc.to_json();
  j["corpus_checksum"] = corpus_checksum;
  j["seed"] = rc.train.seed;
  j["artifacts"] = artifacts;
  write_file(out_dir + "/manifest.json", j.dump(2) + "\n");
}

json report_to_json(const habnet::EvalReport& rep) {
  return json::parse(rep.to_json());
}

// ---------------------------------------------------------------------------

int cmd_train(const std::string& task, const std::string& data_path,
              const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed,
              std::optional<std::size_t> repeats) {
  RunConfig rc = load_run_config(config_path);
  rc.model.task = habnet::task_from_name(task);
  rc.apply_task_defaults();
  if (seed.has_value()) rc.train.seed = *seed;
  if (repeats.has_value()) rc.train.repeats = *repeats;
  rc.model.validate();
  rc.train.validate();

  LoadedData data = load_data(rc, data_path);
  std::cout << "embedding coverage: " << data.table.vocab_covered
            << " vocabulary tokens with pretrained rows, "
            << data.table.vocab_missing << " mapped to UNK\n";
  {
    // surface skipped records once, up front
    std::vector<std::string> warnings;
    habnet::batchify(data.corpus, rc.model.caps(), rc.train.batch_size,
                     data.table, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  }
  fs::create_directories(out_dir);

  std::vector<habnet::EvalReport> test_reports;
  std::vector<std::string> artifacts;
  habnet::RunLog first_log;
  for (std::size_t run = 0; run < rc.train.repeats; ++run) {
    habnet::TrainConfig tc = rc.train;
    tc.seed = rc.train.seed + run;  // derived seeds
    habnet::TrainResult result = habnet::train(
        rc.model, tc, data.table, data.split.train, data.split.validation);
    habnet::EvalReport test = habnet::evaluate(
        rc.model, result.params, data.table, data.split.test,
        habnet::resolve_thread_count());
    test_reports.push_back(test);

    const std::string ckpt_name =
        run == 0 ? "checkpoint.habnet"
                 : "checkpoint_r" + std::to_string(run) + ".habnet";
    habnet::save_checkpoint(result.params, out_dir + "/" + ckpt_name);
    artifacts.push_back(ckpt_name);
    const std::string log_name =
        run == 0 ? "runlog.jsonl" : "runlog_r" + std::to_string(run) + ".jsonl";
    write_file(out_dir + "/" + log_name, result.log.to_jsonl());
    artifacts.push_back(log_name);
    if (run == 0) first_log = result.log;

    std::cout << "run " << run << " (seed " << tc.seed
              << "): best epoch " << result.log.best_epoch << ", test "
              << (rc.model.task == habnet::Task::decision
                      ? "accuracy " + std::to_string(test.accuracy)
                      : "DM " + std::to_string(test.dm.value_or(0.0)))
              << "\n";
  }

  // metrics summary: per-run values plus mean / stddev across repeats
  json summary;
  auto collect = [&](const char* name, auto getter) {
    std::vector<double> values;
    for (const auto& rep : test_reports) values.push_back(getter(rep));
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    summary[name] = {{"values", values},
                     {"mean", mean},
                     {"stddev", std::sqrt(var)}};
  };
  collect("accuracy", [](const habnet::EvalReport& r) { return r.accuracy; });
  if (rc.model.task == habnet::Task::decision) {
    collect("macro_f1", [](const habnet::EvalReport& r) { return r.macro_f1; });
    collect("micro_f1", [](const habnet::EvalReport& r) { return r.micro_f1; });
  } else {
    collect("dm", [](const habnet::EvalReport& r) { return *r.dm; });
    collect("op", [](const habnet::EvalReport& r) { return r.op; });
  }
  write_file(out_dir + "/metrics.json", summary.dump(2) + "\n");
  artifacts.push_back("metrics.json");

  write_file(out_dir + "/config.json", rc.to_json().dump(2) + "\n");
  artifacts.push_back("config.json");
  write_manifest(out_dir, "train", rc, data.corpus_checksum, artifacts);

  if (rc.train.repeats > 1) {
    std::cout << "test metrics over " << rc.train.repeats
              << " runs (mean +/- stddev):\n";
    for (const auto& [name, stats] : summary.items()) {
      std::cout << "  " << name << " " << stats["mean"].get<double>()
                << " +/- " << stats["stddev"].get<double>() << "\n";
    }
  } else {
    std::cout << test_reports[0].to_table();
  }
  return 0;
}

int cmd_evaluate(const std::string& checkpoint_path,
                 const std::string& config_path, const std::string& data_path,
                 const std::string& split_name,
                 const std::vector<std::string>& metric_list) {
  RunConfig rc = load_run_config(config_path);
  rc.model.validate();
  // metric/task compatibility
  for (const auto& m : metric_list) {
    const bool rating_only = m == "dm" || m == "op";
    if (rating_only && rc.model.task == habnet::Task::decision) {
      throw habnet::ConfigError("metric '" + m +
                                "' applies to the rating task only");
    }
    if (m != "acc" && m != "maf1" && m != "mif1" && m != "dm" && m != "op") {
      throw habnet::ConfigError("unknown metric '" + m + "'");
    }
  }
  LoadedData data = load_data(rc, data_path);
  habnet::ModelParams params =
      habnet::load_checkpoint(checkpoint_path, rc.model);

  const std::vector<habnet::TokenizedPaper>* split = nullptr;
  if (split_name == "train") split = &data.split.train;
  else if (split_name == "validation") split = &data.split.validation;
  else if (split_name == "test") split = &data.split.test;
  else if (split_name == "all") split = &data.corpus;
  else throw habnet::ConfigError("unknown split '" + split_name + "'");

  habnet::EvalReport rep = habnet::evaluate(rc.model, params, data.table,
                                            *split,
                                            habnet::resolve_thread_count());
  std::cout << rep.to_json() << "\n" << rep.to_table();
  return 0;
}

int cmd_predict(const std::string& checkpoint_path,
                const std::string& config_path, const std::string& input_path,
                const std::string& out_path) {
  RunConfig rc = load_run_config(config_path);
  rc.model.validate();
  auto papers = habnet::load_corpus(input_path);
  auto tokenized = habnet::tokenize_corpus(papers);
  if (rc.model.task == habnet::Task::rating) {
    tokenized = habnet::explode_reviews(tokenized);
  }
  auto vocab = habnet::corpus_vocabulary(tokenized);
  habnet::EmbeddingTable table =
      habnet::load_embeddings(rc.embeddings_path, vocab);
  habnet::ModelParams params =
      habnet::load_checkpoint(checkpoint_path, rc.model);

  std::vector<std::string> warnings;
  auto batches =
      habnet::batchify(tokenized, rc.model.caps(), 64, table, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

  json out = json::array();
  for (const auto& batch : batches) {
    for (std::size_t item = 0; item < batch.size; ++item) {
      habnet::Tape tp;
      habnet::PaperOutputs fwd = habnet::forward_paper(
          tp, rc.model, params, table, batch, item, nullptr);
      json jp;
      jp["id"] = batch.ids[item];
      if (rc.model.task == habnet::Task::decision) {
        habnet::Tensor rs_probs;
        {
          // softmax over the stored logits
          habnet::Tape tp2;
          rs_probs = tp2.masked_softmax(
              habnet::Tensor::leaf({1, 2}, fwd.decision_logits.value()), 1,
              habnet::Mask::ones({1, 2}));
        }
        jp["decision"] = {
            {"probabilities", rs_probs.value()},
            {"label", rs_probs.at(0, 1) > rs_probs.at(0, 0) ? "accept"
                                                            : "reject"}};
      } else {
        json reviews = json::array();
        for (std::size_t k = 0; k < fwd.review_slots.size(); ++k) {
          habnet::Tape tp2;
          habnet::Tensor probs = tp2.masked_softmax(
              habnet::Tensor::leaf({1, 10}, fwd.rating_logits[k].value()), 1,
              habnet::Mask::ones({1, 10}));
          std::size_t best = 0;
          for (std::size_t c = 1; c < 10; ++c)
            if (probs.at(0, c) > probs.at(0, best)) best = c;
          reviews.push_back({{"index", fwd.review_slots[k]},
                             {"probabilities", probs.value()},
                             {"rating", best + 1}});
        }
        jp["reviews"] = reviews;
      }
      out.push_back(std::move(jp));
    }
  }
  const std::string text = out.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_file(out_path, text);
  }
  return 0;
}

int cmd_metrics(const std::string& pred_path, const std::string& true_col,
                const std::string& pred_col, const std::string& task,
                int d_max) {
  std::ifstream in(pred_path);
  if (!in) throw habnet::FormatError("cannot open " + pred_path);
  const habnet::Task t = habnet::task_from_name(task);
  std::vector<int> classes = t == habnet::Task::decision
                                 ? std::vector<int>{0, 1}
                                 : habnet::class_range(1, 10);
  habnet::LabeledPredictions preds =
      habnet::read_label_csv(in, true_col, pred_col, classes);
  habnet::EvalReport rep = habnet::evaluate_predictions(
      preds, t == habnet::Task::rating, d_max);
  std::cout << rep.to_json() << "\n" << rep.to_table();
  return 0;
}

int cmd_attention(const std::string& checkpoint_path,
                  const std::string& config_path, const std::string& data_path,
                  const std::string& level_name, std::size_t top_k,
                  std::size_t min_count, bool by_class,
                  const std::string& paper_id, std::size_t review_index,
                  const std::string& out_dir, bool svg) {
  RunConfig rc = load_run_config(config_path);
  rc.model.validate();
  LoadedData data = load_data(rc, data_path);
  habnet::ModelParams params =
      habnet::load_checkpoint(checkpoint_path, rc.model);
  const habnet::AttentionLevel level =
      habnet::attention_level_from_name(level_name);

  auto find_paper = [&]() -> const habnet::TokenizedPaper& {
    if (paper_id.empty()) {
      throw habnet::ConfigError("--paper is required at this level");
    }
    for (const auto& p : data.corpus) {
      if (p.id == paper_id) return p;
    }
    throw habnet::ConfigError("paper '" + paper_id + "' not in the corpus");
  };

  std::vector<std::string> artifacts;
  std::string csv;
  std::string svg_text;
  if (level == habnet::AttentionLevel::word) {
    habnet::WordExportOptions options;
    options.top_k = top_k;
    options.min_count = min_count;
    options.by_class = by_class;
    options.threads = habnet::resolve_thread_count();
    std::vector<std::string> warnings;
    auto rows = habnet::word_attention_export(rc.model, params, data.table,
                                              data.corpus, options, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    csv = habnet::word_rows_to_csv(rows);
  } else if (level == habnet::AttentionLevel::sentence) {
    auto units = habnet::sentence_attention_export(
        rc.model, params, data.table, find_paper(), review_index);
    csv = habnet::unit_weights_to_csv(units, "sentence");
    if (svg) svg_text = habnet::heat_strip_svg(units);
  } else {
    auto units = habnet::review_attention_export(rc.model, params, data.table,
                                                 find_paper());
    csv = habnet::unit_weights_to_csv(units, "review");
    if (svg) svg_text = habnet::heat_strip_svg(units);
  }

  if (out_dir.empty()) {
    std::cout << csv;
    if (svg && !svg_text.empty()) std::cout << svg_text;
  } else {
    fs::create_directories(out_dir);
    const std::string csv_name = "attention_" + level_name + ".csv";
    write_file(out_dir + "/" + csv_name, csv);
    artifacts.push_back(csv_name);
    if (svg && !svg_text.empty()) {
      const std::string svg_name = "attention_" + level_name + ".svg";
      write_file(out_dir + "/" + svg_name, svg_text);
      artifacts.push_back(svg_name);
    }
    write_manifest(out_dir, "attention", rc, data.corpus_checksum, artifacts);
  }
  return 0;
}

int cmd_synth(const std::string& flavour, std::size_t papers, std::size_t d_e,
              std::uint64_t seed, const std::string& out_dir) {
  habnet::SyntheticCorpus corpus;
  if (flavour == "overfit") {
    corpus = habnet::synthetic_overfit_corpus(papers, 60, d_e, seed);
  } else if (flavour == "separable") {
    corpus = habnet::synthetic_separable_corpus(papers, d_e, seed);
  } else {
    throw habnet::ConfigError("unknown synthetic flavour '" + flavour + "'");
  }
  fs::create_directories(out_dir);
  habnet::save_corpus(corpus.papers, out_dir + "/corpus.json");
  habnet::write_text_file(out_dir + "/embeddings.txt", corpus.embedding_file);
  std::cout << "wrote " << corpus.papers.size() << " papers to " << out_dir
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HabNet: hierarchical bi-directional self-attention for "
               "paper-review decision and rating prediction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  // train
  auto* train = app.add_subcommand("train", "train a model");
  std::string task = "decision", data_path, config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> repeats;
  train->add_option("--task", task, "decision|rating")
      ->check(CLI::IsMember({"decision", "rating"}));
  train->add_option("--data", data_path, "corpus JSON")->required();
  train->add_option("--config", config_path, "run config JSON")->required();
  train->add_option("--out", out_dir, "artifact directory")->required();
  train->add_option("--seed", seed, "seed override");
  train->add_option("--repeats", repeats, "number of derived-seed runs");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint");
  std::string ckpt_path, split_name = "test";
  std::vector<std::string> metric_list;
  evaluate->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  evaluate->add_option("--config", config_path, "run config JSON")->required();
  evaluate->add_option("--data", data_path, "corpus JSON")->required();
  evaluate->add_option("--split", split_name, "train|validation|test|all");
  evaluate->add_option("--metrics", metric_list,
                       "metric names: acc maf1 mif1 dm op")
      ->delimiter(',');

  // predict
  auto* predict = app.add_subcommand("predict", "predict on new input");
  std::string input_path, pred_out;
  predict->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  predict->add_option("--config", config_path, "run config JSON")->required();
  predict->add_option("--input", input_path, "input corpus JSON")->required();
  predict->add_option("--out", pred_out, "output path (default stdout)");

  // metrics
  auto* metrics = app.add_subcommand("metrics",
                                     "score a CSV of labels with no model");
  std::string pred_path, true_col = "true", pred_col = "pred",
              metrics_task = "rating";
  int d_max = 9;
  metrics->add_option("--pred", pred_path, "CSV with id,true,pred")->required();
  metrics->add_option("--true-col", true_col, "truth column name");
  metrics->add_option("--pred-col", pred_col, "prediction column name");
  metrics->add_option("--task", metrics_task, "decision|rating")
      ->check(CLI::IsMember({"decision", "rating"}));
  metrics->add_option("--d-max", d_max, "maximum rating distance");

  // attention
  auto* attention =
      app.add_subcommand("attention", "export attention weights");
  std::string level = "word", paper_id;
  std::size_t top_k = 15, min_count = 5, review_index = 0;
  bool by_class = false, svg = false;
  attention->add_option("--checkpoint", ckpt_path, "checkpoint file")
      ->required();
  attention->add_option("--config", config_path, "run config JSON")->required();
  attention->add_option("--data", data_path, "corpus JSON")->required();
  attention->add_option("--level", level, "word|sentence|review")
      ->check(CLI::IsMember({"word", "sentence", "review"}));
  attention->add_option("--top-k", top_k, "rows per class (word level)");
  attention->add_option("--min-count", min_count, "occurrence floor");
  attention->add_flag("--by-class", by_class, "aggregate by decision class");
  attention->add_option("--paper", paper_id, "paper id");
  attention->add_option("--review", review_index, "review index in the paper");
  attention->add_option("--out", out_dir, "artifact directory");
  attention->add_flag("--svg", svg, "also emit an SVG heat strip");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  std::string flavour = "overfit";
  std::size_t synth_papers = 32, synth_de = 8;
  std::uint64_t synth_seed = 1;
  synth->add_option("--flavour", flavour, "overfit|separable")
      ->check(CLI::IsMember({"overfit", "separable"}));
  synth->add_option("--papers", synth_papers, "paper count");
  synth->add_option("--d-e", synth_de, "embedding width");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return 0;  // --help / --version
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return 2;
  }

  try {
    if (train->parsed()) {
      return cmd_train(task, data_path, config_path, out_dir, seed, repeats);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(ckpt_path, config_path, data_path, split_name,
                          metric_list);
    }
    if (predict->parsed()) {
      return cmd_predict(ckpt_path, config_path, input_path, pred_out);
    }
    if (metrics->parsed()) {
      return cmd_metrics(pred_path, true_col, pred_col, metrics_task, d_max);
    }
    if (attention->parsed()) {
      return cmd_attention(ckpt_path, config_path, data_path, level, top_k,
                           min_count, by_class, paper_id, review_index,
                           out_dir, svg);
    }
    if (synth->parsed()) {
      return cmd_synth(flavour, synth_papers, synth_de, synth_seed, out_dir);
    }
  } catch (const habnet::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
