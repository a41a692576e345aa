#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "habnet/attention_export.hpp"
#include "habnet/synthetic.hpp"
#include "habnet/trainer.hpp"
#include "json.hpp"

using namespace habnet;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliRunner {
  std::string bin;
  fs::path dir;

  CliRunner() {
    const char* env = std::getenv("HABNET_BIN");
    REQUIRE_MESSAGE(env != nullptr,
                    "HABNET_BIN must point at the habnet binary (set by ctest)");
    bin = env;
    dir = fs::path("cli_scratch");
    fs::create_directories(dir);
  }
  ~CliRunner() { fs::remove_all(dir); }

  int run(const std::string& args, const std::string& stdout_file = "") {
    std::string cmd = bin + " " + args;
    if (!stdout_file.empty()) cmd += " > " + stdout_file;
    cmd += " 2> " + (dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  }

  std::string path(const std::string& name) const {
    return (dir / name).string();
  }
};

// Library-level export fixture: a small trained-ish (random) model.
struct ExportFixture {
  ModelConfig cfg;
  ModelParams params;
  EmbeddingTable table;
  std::vector<TokenizedPaper> corpus;

  ExportFixture() {
    SyntheticCorpus synth = synthetic_separable_corpus(20, 4, 5);
    cfg.d_e = 4;
    cfg.max_reviews = 4;
    cfg.max_sentences = 4;
    cfg.max_words = 10;
    params = ModelParams::init(cfg, 6);
    corpus = tokenize_corpus(synth.papers);
    auto vocab = corpus_vocabulary(corpus);
    std::istringstream emb(synth.embedding_file);
    table = parse_embeddings(emb, vocab, "synthetic");
  }
};

}  // namespace

TEST_CASE("sentence attention weights sum to one over valid sentences") {
  ExportFixture fx;
  auto units =
      sentence_attention_export(fx.cfg, fx.params, fx.table, fx.corpus[0], 0);
  REQUIRE(!units.empty());
  double sum = 0.0;
  for (const auto& u : units) sum += u.weight;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("single-sentence review gives that sentence weight one") {
  ExportFixture fx;
  PaperRecord p{"single", true, {{"filler0 filler1 filler2.", 5}}};
  auto tokenized = tokenize_corpus({p});
  auto units =
      sentence_attention_export(fx.cfg, fx.params, fx.table, tokenized[0], 0);
  REQUIRE(units.size() == 1);
  CHECK(units[0].weight == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("review attention weights sum to one over valid reviews") {
  ExportFixture fx;
  auto units =
      review_attention_export(fx.cfg, fx.params, fx.table, fx.corpus[1]);
  REQUIRE(units.size() == fx.corpus[1].reviews.size());
  double sum = 0.0;
  for (const auto& u : units) sum += u.weight;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("word export honours top-k, min-count and class split") {
  ExportFixture fx;
  WordExportOptions options;
  options.top_k = 5;
  options.min_count = 1;
  options.by_class = true;
  std::vector<std::string> warnings;
  auto rows = word_attention_export(fx.cfg, fx.params, fx.table, fx.corpus,
                                    options, &warnings);
  std::size_t accept_rows = 0, reject_rows = 0;
  for (const auto& r : rows) {
    if (r.cls == "accept") ++accept_rows;
    if (r.cls == "reject") ++reject_rows;
  }
  CHECK(accept_rows == 5);
  CHECK(reject_rows == 5);
  // ranked descending within each class
  double prev = 1e300;
  for (const auto& r : rows) {
    if (r.cls != "accept") break;
    CHECK(r.mean_weight <= prev);
    prev = r.mean_weight;
  }

  options.top_k = 500;  // more than the vocabulary: clamped with a warning
  warnings.clear();
  word_attention_export(fx.cfg, fx.params, fx.table, fx.corpus, options,
                        &warnings);
  CHECK(!warnings.empty());
}

TEST_CASE("export formats are machine-readable") {
  ExportFixture fx;
  auto units =
      sentence_attention_export(fx.cfg, fx.params, fx.table, fx.corpus[0], 0);
  const std::string csv = unit_weights_to_csv(units, "sentence");
  CHECK(csv.rfind("sentence,weight,text\n", 0) == 0);
  const std::string svg = heat_strip_svg(units);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("<rect") != std::string::npos);

  WordExportOptions options;
  options.top_k = 3;
  options.min_count = 1;
  auto rows =
      word_attention_export(fx.cfg, fx.params, fx.table, fx.corpus, options);
  const std::string wcsv = word_rows_to_csv(rows);
  std::size_t lines = 0;
  for (char c : wcsv)
    if (c == '\n') ++lines;
  CHECK(lines >= 2);
}

TEST_CASE("variant exclusions are configuration errors") {
  ExportFixture fx;
  ModelConfig v2 = fx.cfg;
  v2.variant = Variant::v2;
  ModelParams p2 = ModelParams::init(v2, 7);
  CHECK_THROWS_AS(
      word_attention_export(v2, p2, fx.table, fx.corpus, WordExportOptions{}),
      ConfigError);
  ModelConfig v3 = fx.cfg;
  v3.variant = Variant::v3;
  ModelParams p3 = ModelParams::init(v3, 7);
  CHECK_THROWS_AS(
      sentence_attention_export(v3, p3, fx.table, fx.corpus[0], 0),
      ConfigError);
  ModelConfig v1 = fx.cfg;
  v1.variant = Variant::v1;
  ModelParams p1 = ModelParams::init(v1, 7);
  CHECK_THROWS_AS(review_attention_export(v1, p1, fx.table, fx.corpus[0]),
                  ConfigError);
}

TEST_CASE("cli contract") {
  CliRunner cli;

  SUBCASE("missing required flag is a usage error") {
    CHECK(cli.run("train --task decision") == 2);
    const std::string err = slurp(cli.path("../cli_scratch/stderr.txt"));
    CHECK(err.find("--data") != std::string::npos);
  }

  SUBCASE("unknown subcommand is a usage error") {
    CHECK(cli.run("frobnicate") == 2);
  }

  SUBCASE("end-to-end: synth, train, evaluate, predict, attention, metrics") {
    const std::string d = cli.dir.string();
    REQUIRE(cli.run("synth --flavour separable --papers 16 --d-e 4 --seed 3 "
                    "--out " + d) == 0);

    nlohmann::json cfg;
    cfg["model"] = {{"d_e", 4}, {"L", 10}, {"N", 4}, {"M", 4},
                    {"variant", "full"}};
    cfg["train"] = {{"epochs", 2}, {"batch_size", 8},
                    {"learning_rate", 0.002}, {"seed", 5}};
    cfg["data"] = {{"embeddings", d + "/embeddings.txt"}, {"split_seed", 11}};
    std::ofstream(cli.path("config.json")) << cfg.dump(2);

    REQUIRE(cli.run("train --task decision --data " + d +
                    "/corpus.json --config " + d + "/config.json --out " + d +
                    "/run", cli.path("train_out.txt")) == 0);
    CHECK(fs::exists(cli.path("run/checkpoint.habnet")));
    CHECK(fs::exists(cli.path("run/runlog.jsonl")));
    CHECK(fs::exists(cli.path("run/manifest.json")));
    CHECK(fs::exists(cli.path("run/metrics.json")));
    // manifest is valid JSON
    auto manifest = nlohmann::json::parse(slurp(cli.path("run/manifest.json")));
    CHECK(manifest["command"] == "train");
    CHECK(manifest.contains("corpus_checksum"));

    // evaluate prints JSON then a table
    REQUIRE(cli.run("evaluate --checkpoint " + d +
                    "/run/checkpoint.habnet --config " + d +
                    "/run/config.json --data " + d + "/corpus.json "
                    "--split test", cli.path("eval_out.txt")) == 0);
    const std::string eval_out = slurp(cli.path("eval_out.txt"));
    const auto brace = eval_out.rfind("}");
    REQUIRE(brace != std::string::npos);
    auto parsed = nlohmann::json::parse(eval_out.substr(0, brace + 1));
    CHECK(parsed.contains("accuracy"));
    CHECK(eval_out.find("ACC\tMa-F1\tMi-F1") != std::string::npos);

    // dm on a decision run is a configuration error
    CHECK(cli.run("evaluate --checkpoint " + d +
                  "/run/checkpoint.habnet --config " + d +
                  "/run/config.json --data " + d + "/corpus.json "
                  "--metrics dm") == 1);

    // predict emits one record per paper with two probabilities
    REQUIRE(cli.run("predict --checkpoint " + d +
                    "/run/checkpoint.habnet --config " + d +
                    "/run/config.json --input " + d + "/corpus.json",
                    cli.path("pred_out.txt")) == 0);
    auto pred = nlohmann::json::parse(slurp(cli.path("pred_out.txt")));
    CHECK(pred.is_array());
    CHECK(pred.size() == 16);
    const auto& probs = pred[0]["decision"]["probabilities"];
    CHECK(probs.size() == 2);
    CHECK(std::abs(probs[0].get<double>() + probs[1].get<double>() - 1.0) <
          1e-12);

    // attention export
    REQUIRE(cli.run("attention --checkpoint " + d +
                    "/run/checkpoint.habnet --config " + d +
                    "/run/config.json --data " + d + "/corpus.json "
                    "--level word --top-k 5 --min-count 1 --by-class --out " +
                    d + "/attn") == 0);
    CHECK(fs::exists(cli.path("attn/attention_word.csv")));
    CHECK(fs::exists(cli.path("attn/manifest.json")));

    REQUIRE(cli.run("attention --checkpoint " + d +
                    "/run/checkpoint.habnet --config " + d +
                    "/run/config.json --data " + d + "/corpus.json "
                    "--level sentence --paper sep0 --review 0 --svg --out " +
                    d + "/attn_s") == 0);
    CHECK(fs::exists(cli.path("attn_s/attention_sentence.csv")));
    CHECK(fs::exists(cli.path("attn_s/attention_sentence.svg")));

    // standalone metrics: the worked DM and OP examples
    std::ofstream(cli.path("labels.csv"))
        << "id,true,pred\n0,8,7\n1,3,3\n2,10,1\n";
    REQUIRE(cli.run("metrics --pred " + cli.path("labels.csv") +
                    " --task rating", cli.path("metrics_out.txt")) == 0);
    auto mj = nlohmann::json::parse(
        slurp(cli.path("metrics_out.txt"))
            .substr(0, slurp(cli.path("metrics_out.txt")).rfind("}") + 1));
    CHECK(std::abs(mj["dm"].get<double>() - 17.0 / 27.0) < 1e-12);

    std::ofstream(cli.path("labels2.csv"))
        << "id,true,pred\n0,0,0\n1,0,0\n2,1,0\n3,1,1\n";
    REQUIRE(cli.run("metrics --pred " + cli.path("labels2.csv") +
                    " --task decision", cli.path("metrics2_out.txt")) == 0);
    const std::string m2 = slurp(cli.path("metrics2_out.txt"));
    auto mj2 = nlohmann::json::parse(m2.substr(0, m2.rfind("}") + 1));
    CHECK(std::abs(mj2["op"].get<double>() - (0.75 - 1.0 / 3.0)) < 1e-12);

    // malformed CSV names the line
    std::ofstream(cli.path("bad.csv")) << "id,true,pred\n0,a,1\n";
    CHECK(cli.run("metrics --pred " + cli.path("bad.csv") +
                  " --task rating") == 1);
  }

  SUBCASE("repeats emit per-run checkpoints and summary statistics") {
    const std::string d = cli.dir.string();
    REQUIRE(cli.run("synth --flavour separable --papers 12 --d-e 4 --seed 9 "
                    "--out " + d) == 0);
    nlohmann::json cfg;
    cfg["model"] = {{"d_e", 4}, {"L", 10}, {"N", 4}, {"M", 4}};
    cfg["train"] = {{"epochs", 2}, {"batch_size", 4}, {"seed", 2}};
    cfg["data"] = {{"embeddings", d + "/embeddings.txt"}, {"split_seed", 3}};
    std::ofstream(cli.path("config.json")) << cfg.dump(2);
    REQUIRE(cli.run("train --task decision --data " + d +
                    "/corpus.json --config " + d + "/config.json --out " + d +
                    "/rep --repeats 2", cli.path("rep_out.txt")) == 0);
    CHECK(fs::exists(cli.path("rep/checkpoint.habnet")));
    CHECK(fs::exists(cli.path("rep/checkpoint_r1.habnet")));
    auto summary = nlohmann::json::parse(slurp(cli.path("rep/metrics.json")));
    CHECK(summary["accuracy"]["values"].size() == 2);
    CHECK(summary["accuracy"].contains("mean"));
    CHECK(summary["accuracy"].contains("stddev"));
    const std::string out = slurp(cli.path("rep_out.txt"));
    CHECK(out.find("+/-") != std::string::npos);
  }

  SUBCASE("rating task end to end") {
    const std::string d = cli.dir.string();
    REQUIRE(cli.run("synth --flavour overfit --papers 10 --d-e 4 --seed 21 "
                    "--out " + d) == 0);
    nlohmann::json cfg;
    cfg["model"] = {{"d_e", 4}, {"L", 8}, {"N", 3}, {"M", 1}};
    cfg["train"] = {{"epochs", 2}, {"batch_size", 8}, {"seed", 4}};
    cfg["data"] = {{"embeddings", d + "/embeddings.txt"}, {"split_seed", 5}};
    std::ofstream(cli.path("config.json")) << cfg.dump(2);
    REQUIRE(cli.run("train --task rating --data " + d +
                    "/corpus.json --config " + d + "/config.json --out " + d +
                    "/rate", cli.path("rate_out.txt")) == 0);
    REQUIRE(cli.run("evaluate --checkpoint " + d +
                    "/rate/checkpoint.habnet --config " + d +
                    "/rate/config.json --data " + d + "/corpus.json",
                    cli.path("rate_eval.txt")) == 0);
    const std::string eval_out = slurp(cli.path("rate_eval.txt"));
    CHECK(eval_out.find("ACC\tDM\tOP") != std::string::npos);

    REQUIRE(cli.run("predict --checkpoint " + d +
                    "/rate/checkpoint.habnet --config " + d +
                    "/rate/config.json --input " + d + "/corpus.json",
                    cli.path("rate_pred.txt")) == 0);
    auto pred = nlohmann::json::parse(slurp(cli.path("rate_pred.txt")));
    REQUIRE(pred.is_array());
    REQUIRE(!pred.empty());
    const auto& review = pred[0]["reviews"][0];
    CHECK(review["probabilities"].size() == 10);
    const int rating = review["rating"].get<int>();
    CHECK(rating >= 1);
    CHECK(rating <= 10);
  }
}
