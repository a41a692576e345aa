#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "attention_oracles.hpp"
#include "doctest.h"
#include "fd_support.hpp"
#include "habnet/model.hpp"

using namespace habnet;

namespace {

EmbeddingTable table_from(const std::string& file_text,
                          const std::vector<std::string>& vocab) {
  std::istringstream in(file_text);
  return parse_embeddings(in, vocab, "mem");
}

Batch one_paper_batch(const PaperRecord& paper, const BatchCaps& caps,
                      const EmbeddingTable& table) {
  auto batches = batchify(tokenize_corpus({paper}), caps, 1, table);
  REQUIRE(batches.size() == 1);
  return batches[0];
}

// Vocabulary of twelve short tokens with deterministic random embeddings.
struct Fixture {
  std::vector<std::string> vocab;
  EmbeddingTable table;

  explicit Fixture(std::size_t d_e, std::uint64_t seed = 77) {
    for (char c = 'a'; c < 'a' + 12; ++c) vocab.push_back(std::string(1, c));
    Rng rng(seed);
    std::ostringstream file;
    for (const auto& tok : vocab) {
      file << tok;
      for (std::size_t k = 0; k < d_e; ++k) file << " " << rng.uniform(-1, 1);
      file << "\n";
    }
    table = table_from(file.str(), vocab);
  }

  // words like "a b c. d e." -> one review
  PaperRecord paper(const std::string& id,
                    const std::vector<std::string>& review_texts,
                    bool accepted) const {
    PaperRecord p;
    p.id = id;
    p.accepted = accepted;
    for (const auto& t : review_texts) p.reviews.push_back({t, std::nullopt});
    return p;
  }
};

}  // namespace

TEST_CASE("config width ladder per variant") {
  ModelConfig cfg;
  cfg.d_e = 4;
  SUBCASE("full: 8, 16, 32") {
    CHECK(cfg.sentence_width() == 8);
    CHECK(cfg.review_width() == 16);
    CHECK(cfg.gru_hidden_width() == 8);
    CHECK(cfg.paper_width() == 32);
  }
  SUBCASE("V1 drops the inter-review widening") {
    cfg.variant = Variant::v1;
    CHECK(cfg.review_width() == 16);
    CHECK(cfg.paper_width() == 16);
  }
  SUBCASE("V2 halves everything downstream") {
    cfg.variant = Variant::v2;
    CHECK(cfg.sentence_width() == 4);
    CHECK(cfg.review_width() == 8);
    CHECK(cfg.paper_width() == 16);
  }
  SUBCASE("V3 keeps sentence width for reviews") {
    cfg.variant = Variant::v3;
    CHECK(cfg.sentence_width() == 8);
    CHECK(cfg.review_width() == 8);
    CHECK(cfg.paper_width() == 16);
  }
  SUBCASE("explicit gru_hidden must preserve the full-variant ladder") {
    cfg.gru_hidden = 5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.gru_hidden = 8;
    CHECK_NOTHROW(cfg.validate());
  }
  SUBCASE("json round trip") {
    cfg.variant = Variant::v3;
    cfg.task = Task::rating;
    cfg.d_h = 6;
    ModelConfig back = ModelConfig::from_json(cfg.to_json());
    CHECK(back.d_e == cfg.d_e);
    CHECK(back.variant == cfg.variant);
    CHECK(back.task == cfg.task);
    CHECK(back.d_h == 6);
  }
}

TEST_CASE("encode_sentence composition") {
  ModelConfig cfg;
  cfg.d_e = 2;
  ModelParams params = ModelParams::init(cfg, 5);
  Rng rng(6);

  SUBCASE("single word gives [w || w]") {
    Tensor words = fd::random_leaf(rng, {1, 2}, false);
    Tape tp;
    Tensor s = encode_sentence(tp, cfg, params, words, {1});
    CHECK(s.shape() == Shape{1, 4});
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(s.at(0, k) == doctest::Approx(words.at(0, k)).epsilon(1e-14));
      CHECK(s.at(0, 2 + k) == doctest::Approx(words.at(0, k)).epsilon(1e-14));
    }
  }
  SUBCASE("width doubles: d_e=50 gives 100") {
    ModelConfig wide;
    wide.d_e = 50;
    ModelParams wp = ModelParams::init(wide, 5);
    Tensor words = fd::random_leaf(rng, {3, 50}, false);
    Tape tp;
    CHECK(encode_sentence(tp, wide, wp, words, {1, 1, 1}).shape() ==
          Shape{1, 100});
  }
  SUBCASE("a custom score-hidden width leaves the ladder unchanged") {
    ModelConfig narrow;
    narrow.d_e = 2;
    narrow.d_h = 3;
    ModelParams np = ModelParams::init(narrow, 5);
    CHECK(np.sent_s2t->w1.shape() == Shape{3, 4});
    Tensor words = fd::random_leaf(rng, {3, 2}, false);
    Tape tp;
    CHECK(encode_sentence(tp, narrow, np, words, {1, 1, 1}).shape() ==
          Shape{1, 4});
  }
  SUBCASE("three words match the chained module oracles") {
    Tensor words = fd::random_leaf(rng, {3, 2}, false);
    LevelMask mask{1, 1, 1};
    Tape tp;
    Tensor s = encode_sentence(tp, cfg, params, words, mask);
    auto we = oracles::bisan(oracles::to_rows(words), mask,
                             params.sent_bisan->fw, params.sent_bisan->bw);
    auto s2t = oracles::source2token(we, mask, *params.sent_s2t);
    for (std::size_t k = 0; k < 4; ++k)
      CHECK(s.at(0, k) == doctest::Approx(s2t.summary[k]).epsilon(1e-12));
  }
}

TEST_CASE("encode_review composition") {
  ModelConfig cfg;
  cfg.d_e = 2;
  ModelParams params = ModelParams::init(cfg, 7);
  Rng rng(8);

  SUBCASE("single sentence gives [s || s]") {
    Tensor s = fd::random_leaf(rng, {1, 4}, false);
    Tape tp;
    Tensor r = encode_review(tp, cfg, params, s, {1});
    CHECK(r.shape() == Shape{1, 8});
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(r.at(0, k) == doctest::Approx(s.at(0, k)).epsilon(1e-14));
      CHECK(r.at(0, 4 + k) == doctest::Approx(s.at(0, k)).epsilon(1e-14));
    }
  }
  SUBCASE("two sentences match the chained module oracles") {
    Tensor s = fd::random_leaf(rng, {2, 4}, false);
    LevelMask mask{1, 1};
    Tape tp;
    Tensor r = encode_review(tp, cfg, params, s, mask);
    auto se = oracles::bisan(oracles::to_rows(s), mask,
                             params.intra_bisan->fw, params.intra_bisan->bw);
    auto s2t = oracles::source2token(se, mask, *params.intra_s2t);
    for (std::size_t k = 0; k < 8; ++k)
      CHECK(r.at(0, k) == doctest::Approx(s2t.summary[k]).epsilon(1e-12));
  }
}

TEST_CASE("encode_paper composition") {
  ModelConfig cfg;
  cfg.d_e = 2;
  ModelParams params = ModelParams::init(cfg, 9);
  Rng rng(10);

  SUBCASE("one review collapses to its own refined encoding") {
    Tensor r = fd::random_leaf(rng, {1, 8}, false);
    Tape tp;
    PaperEncoding enc = encode_paper(tp, cfg, params, r, {1});
    CHECK(enc.rs.shape() == Shape{1, 16});
    CHECK(enc.re.shape() == Shape{1, 16});
    for (std::size_t k = 0; k < 16; ++k)
      CHECK(enc.rs.at(0, k) == doctest::Approx(enc.re.at(0, k)).epsilon(1e-14));
  }
  SUBCASE("two reviews match the gru+bisan+s2t oracle chain") {
    Tensor r = fd::random_leaf(rng, {2, 8}, false);
    LevelMask mask{1, 1};
    Tape tp;
    PaperEncoding enc = encode_paper(tp, cfg, params, r, mask);
    auto recoded = oracles::bigru(oracles::to_rows(r), mask, *params.gru);
    auto re = oracles::bisan(recoded, mask, params.inter_bisan->fw,
                             params.inter_bisan->bw);
    auto s2t = oracles::source2token(re, mask, *params.inter_s2t);
    REQUIRE(enc.rs.cols() == s2t.summary.size());
    for (std::size_t k = 0; k < s2t.summary.size(); ++k)
      CHECK(enc.rs.at(0, k) == doctest::Approx(s2t.summary[k]).epsilon(1e-12));
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t k = 0; k < 16; ++k)
        CHECK(enc.re.at(i, k) == doctest::Approx(re[i][k]).epsilon(1e-12));
  }
}

TEST_CASE("prediction heads") {
  ModelConfig cfg;
  cfg.d_e = 2;
  ModelParams params = ModelParams::init(cfg, 11);
  Rng rng(12);
  Tape tp;

  SUBCASE("zeroed decision head is uniform") {
    std::fill(params.decision_w.value().begin(),
              params.decision_w.value().end(), 0.0);
    Tensor rs = fd::random_leaf(rng, {1, 16}, false);
    Tensor probs = predict_decision(tp, params, rs);
    CHECK(probs.at(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(probs.at(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("decision probabilities sum to one") {
    Tensor rs = fd::random_leaf(rng, {1, 16}, false);
    Tensor probs = predict_decision(tp, params, rs);
    CHECK(std::abs(probs.at(0, 0) + probs.at(0, 1) - 1.0) < 1e-12);
  }
  SUBCASE("hand logits [1,-1]") {
    // weights that reproduce fixed logits from a one-hot input
    std::fill(params.decision_w.value().begin(),
              params.decision_w.value().end(), 0.0);
    params.decision_w.value()[0] = 1.0;                      // class 0 looks at rs[0]
    params.decision_w.value()[cfg.paper_width()] = -1.0;     // class 1
    std::vector<double> onehot(16, 0.0);
    onehot[0] = 1.0;
    Tensor rs = Tensor::leaf({1, 16}, onehot);
    Tensor probs = predict_decision(tp, params, rs);
    CHECK(probs.at(0, 0) == doctest::Approx(0.88079707797788).epsilon(1e-12));
    CHECK(probs.at(0, 1) == doctest::Approx(0.11920292202212).epsilon(1e-12));
  }
  SUBCASE("zeroed rating head is uniform over ten classes") {
    std::fill(params.rating_w.value().begin(), params.rating_w.value().end(),
              0.0);
    Tensor r = fd::random_leaf(rng, {1, 8}, false);
    Tensor probs = predict_rating(tp, params, r);
    for (std::size_t c = 0; c < 10; ++c)
      CHECK(probs.at(0, c) == doctest::Approx(0.1).epsilon(1e-14));
  }
  SUBCASE("argmax class maps to rating class+1") {
    Tensor r = fd::random_leaf(rng, {1, 8}, false);
    Tensor probs = predict_rating(tp, params, r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < 10; ++c)
      if (probs.at(0, c) > probs.at(0, best)) best = c;
    const int rating = static_cast<int>(best) + 1;
    CHECK(rating >= 1);
    CHECK(rating <= 10);
  }
  SUBCASE("width mismatch raises a dimension error") {
    Tensor bad = fd::random_leaf(rng, {1, 7}, false);
    CHECK_THROWS_AS(predict_decision(tp, params, bad), ShapeError);
  }
}

TEST_CASE("forward variants") {
  Fixture fx(2);

  SUBCASE("V1 equals the equal-weight mean of review encodings") {
    ModelConfig cfg;
    cfg.d_e = 2;
    cfg.variant = Variant::v1;
    cfg.max_reviews = 3;
    cfg.max_sentences = 2;
    cfg.max_words = 6;
    ModelParams params = ModelParams::init(cfg, 13);
    // identical reviews -> identical encodings -> rs equals each encoding
    PaperRecord p = fx.paper("p", {"a b c.", "a b c."}, true);
    Batch batch = one_paper_batch(p, cfg.caps(), fx.table);
    Tape tp;
    ForwardTrace trace;
    PaperOutputs out = forward_paper(tp, cfg, params, fx.table, batch, 0, &trace);
    REQUIRE(out.review_slots.size() == 2);
    for (std::size_t k = 0; k < cfg.review_width(); ++k) {
      CHECK(trace.rs[k] == doctest::Approx(out.review_encodings[0].at(0, k))
                               .epsilon(1e-12));
    }
  }

  SUBCASE("V2 sentence encoding is the arithmetic word mean") {
    ModelConfig cfg;
    cfg.d_e = 2;
    cfg.variant = Variant::v2;
    cfg.max_reviews = 2;
    cfg.max_sentences = 2;
    cfg.max_words = 4;
    ModelParams params = ModelParams::init(cfg, 14);
    std::vector<std::string> vocab{"u", "v"};
    auto table = table_from("u 1 3\nv 3 1\n", vocab);
    PaperRecord p{"p", true, {{"u v.", std::nullopt}}};
    Batch batch = one_paper_batch(p, cfg.caps(), table);
    Tape tp;
    ForwardTrace trace;
    forward_paper(tp, cfg, params, table, batch, 0, &trace);
    // first sentence encoding row: mean of [1,3] and [3,1] and the '.' row
    // ('.' is out of the embedding file, so it contributes the zero UNK row)
    const TraceMat& s = trace.s[0];
    CHECK(s.cols == 2);
    CHECK(s.at(0, 0) == doctest::Approx((1.0 + 3.0 + 0.0) / 3).epsilon(1e-14));
    CHECK(s.at(0, 1) == doctest::Approx((3.0 + 1.0 + 0.0) / 3).epsilon(1e-14));
  }

  SUBCASE("V3 review encoding is the sentence mean") {
    ModelConfig cfg;
    cfg.d_e = 2;
    cfg.variant = Variant::v3;
    cfg.max_reviews = 2;
    cfg.max_sentences = 3;
    cfg.max_words = 5;
    ModelParams params = ModelParams::init(cfg, 15);
    PaperRecord p = fx.paper("p", {"a b. c d. e f."}, false);
    Batch batch = one_paper_batch(p, cfg.caps(), fx.table);
    Tape tp;
    ForwardTrace trace;
    PaperOutputs out = forward_paper(tp, cfg, params, fx.table, batch, 0, &trace);
    const TraceMat& s = trace.s[0];
    REQUIRE(s.rows == 3);
    for (std::size_t k = 0; k < cfg.sentence_width(); ++k) {
      const double mean = (s.at(0, k) + s.at(1, k) + s.at(2, k)) / 3.0;
      CHECK(out.review_encodings[0].at(0, k) ==
            doctest::Approx(mean).epsilon(1e-12));
    }
  }

  SUBCASE("full-variant trace widths for d_e=4 are (8, 16, 16, 32, 32)") {
    Fixture fx4(4);
    ModelConfig cfg;
    cfg.d_e = 4;
    cfg.max_reviews = 2;
    cfg.max_sentences = 2;
    cfg.max_words = 6;
    ModelParams params = ModelParams::init(cfg, 16);
    PaperRecord p = fx4.paper("p", {"a b c. d e.", "f g h."}, true);
    Batch batch = one_paper_batch(p, cfg.caps(), fx4.table);
    Tape tp;
    ForwardTrace trace;
    forward_paper(tp, cfg, params, fx4.table, batch, 0, &trace);
    CHECK(trace.s[0].cols == 8);
    CHECK(trace.se[0].cols == 16);
    CHECK(trace.r.cols == 16);
    CHECK(trace.re.cols == 32);
    CHECK(trace.rs.size() == 32);
  }
}

TEST_CASE("padding invariance at the model level") {
  Fixture fx(3);
  ModelConfig snug;
  snug.d_e = 3;
  snug.max_reviews = 2;
  snug.max_sentences = 2;
  snug.max_words = 5;
  ModelConfig roomy = snug;
  roomy.max_reviews = 4;
  roomy.max_sentences = 3;
  roomy.max_words = 8;
  ModelParams params = ModelParams::init(snug, 17);

  PaperRecord p = fx.paper("p", {"a b c d.", "f g. h i."}, true);
  Batch tight = one_paper_batch(p, snug.caps(), fx.table);
  Batch padded = one_paper_batch(p, roomy.caps(), fx.table);

  Tape tp;
  ForwardTrace t1, t2;
  PaperOutputs a = forward_paper(tp, snug, params, fx.table, tight, 0, &t1);
  PaperOutputs b = forward_paper(tp, snug, params, fx.table, padded, 0, &t2);
  REQUIRE(a.review_slots == b.review_slots);
  for (std::size_t i = 0; i < a.rating_logits.size(); ++i)
    for (std::size_t c = 0; c < 10; ++c)
      CHECK(std::abs(a.rating_logits[i].at(0, c) -
                     b.rating_logits[i].at(0, c)) < 1e-10);
  for (std::size_t c = 0; c < 2; ++c)
    CHECK(std::abs(a.decision_logits.at(0, c) - b.decision_logits.at(0, c)) <
          1e-10);
  REQUIRE(t1.rs.size() == t2.rs.size());
  for (std::size_t k = 0; k < t1.rs.size(); ++k)
    CHECK(std::abs(t1.rs[k] - t2.rs[k]) < 1e-10);
}

TEST_CASE("V1 paper encoding is permutation-invariant over reviews") {
  Fixture fx(2);
  ModelConfig cfg;
  cfg.d_e = 2;
  cfg.variant = Variant::v1;
  cfg.max_reviews = 3;
  cfg.max_sentences = 2;
  cfg.max_words = 6;
  ModelParams params = ModelParams::init(cfg, 18);

  PaperRecord p = fx.paper("p", {"a b.", "c d e.", "f g h i."}, true);
  PaperRecord q = fx.paper("q", {"f g h i.", "a b.", "c d e."}, true);
  Batch bp = one_paper_batch(p, cfg.caps(), fx.table);
  Batch bq = one_paper_batch(q, cfg.caps(), fx.table);
  Tape tp;
  ForwardTrace tr_p, tr_q;
  forward_paper(tp, cfg, params, fx.table, bp, 0, &tr_p);
  forward_paper(tp, cfg, params, fx.table, bq, 0, &tr_q);
  REQUIRE(tr_p.rs.size() == tr_q.rs.size());
  for (std::size_t k = 0; k < tr_p.rs.size(); ++k)
    CHECK(std::abs(tr_p.rs[k] - tr_q.rs[k]) < 1e-12);
}

TEST_CASE("full variant is order-aware over reviews") {
  Fixture fx(2);
  ModelConfig cfg;
  cfg.d_e = 2;
  cfg.max_reviews = 3;
  cfg.max_sentences = 2;
  cfg.max_words = 6;
  ModelParams params = ModelParams::init(cfg, 23);
  PaperRecord p = fx.paper("p", {"a b.", "c d e.", "f g h i."}, true);
  PaperRecord q = fx.paper("q", {"f g h i.", "a b.", "c d e."}, true);
  Batch bp = one_paper_batch(p, cfg.caps(), fx.table);
  Batch bq = one_paper_batch(q, cfg.caps(), fx.table);
  Tape tp;
  ForwardTrace tr_p, tr_q;
  forward_paper(tp, cfg, params, fx.table, bp, 0, &tr_p);
  forward_paper(tp, cfg, params, fx.table, bq, 0, &tr_q);
  double diff = 0.0;
  for (std::size_t k = 0; k < tr_p.rs.size(); ++k)
    diff = std::max(diff, std::abs(tr_p.rs[k] - tr_q.rs[k]));
  CHECK(diff > 1e-9);  // the GRU and directional masks see the order
}

TEST_CASE("rating of a review ignores its siblings") {
  Fixture fx(2);
  ModelConfig cfg;
  cfg.d_e = 2;
  cfg.task = Task::rating;
  cfg.max_reviews = 2;
  cfg.max_sentences = 2;
  cfg.max_words = 6;
  ModelParams params = ModelParams::init(cfg, 19);

  PaperRecord p = fx.paper("p", {"a b c.", "d e f."}, true);
  PaperRecord q = fx.paper("q", {"a b c.", "j k l."}, true);
  Batch bp = one_paper_batch(p, cfg.caps(), fx.table);
  Batch bq = one_paper_batch(q, cfg.caps(), fx.table);
  Tape tp;
  PaperOutputs op = forward_paper(tp, cfg, params, fx.table, bp, 0);
  PaperOutputs oq = forward_paper(tp, cfg, params, fx.table, bq, 0);
  for (std::size_t c = 0; c < 10; ++c)
    CHECK(op.rating_logits[0].at(0, c) == oq.rating_logits[0].at(0, c));
}

TEST_CASE("every active parameter receives gradient on a generic batch") {
  Fixture fx(3);
  ModelConfig cfg;
  cfg.d_e = 3;
  cfg.max_reviews = 2;
  cfg.max_sentences = 2;
  cfg.max_words = 5;
  ModelParams params = ModelParams::init(cfg, 20);

  PaperRecord p = fx.paper("p", {"a b c. d e.", "f g h i j."}, true);
  Batch batch = one_paper_batch(p, cfg.caps(), fx.table);
  Tape tp;
  PaperOutputs out = forward_paper(tp, cfg, params, fx.table, batch, 0);
  // combined loss, both heads
  std::vector<Tensor> logits = out.rating_logits;
  Tensor rating_stack = tp.concat_rows(logits);
  Tensor loss = tp.add(tp.cross_entropy(out.decision_logits, {1}),
                       tp.cross_entropy(rating_stack, {2, 7}));
  params.zero_grads();
  tp.backward(loss);
  for (const auto& [name, t] : params.named()) {
    double mx = 0.0;
    for (double g : t.grad()) mx = std::max(mx, std::abs(g));
    INFO(name);
    CHECK(mx > 0.0);
  }
}

TEST_CASE("checkpoint round trip") {
  ModelConfig cfg;
  cfg.d_e = 3;
  ModelParams params = ModelParams::init(cfg, 21);
  const std::string path = "test_ckpt.habnet";
  const std::string path2 = "test_ckpt2.habnet";

  SUBCASE("save, load, save produces identical bytes") {
    save_checkpoint(params, path);
    ModelParams loaded = load_checkpoint(path, cfg);
    save_checkpoint(loaded, path2);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());
    CHECK(sa.str().substr(0, 8) == "HABNET01");
    std::remove(path.c_str());
    std::remove(path2.c_str());
  }
  SUBCASE("truncated file is rejected without partial state") {
    save_checkpoint(params, path);
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    in.close();
    std::string bytes = ss.str();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    CHECK_THROWS_AS(load_checkpoint(path, cfg), FormatError);
    std::remove(path.c_str());
  }
  SUBCASE("magic mismatch is rejected") {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "NOTMAGIC" << std::string(16, '\0');
    out.close();
    CHECK_THROWS_AS(load_checkpoint(path, cfg), FormatError);
    std::remove(path.c_str());
  }
  SUBCASE("config mismatch is rejected") {
    save_checkpoint(params, path);
    ModelConfig other = cfg;
    other.d_e = 4;
    CHECK_THROWS_AS(load_checkpoint(path, other), FormatError);
    ModelConfig v1 = cfg;
    v1.variant = Variant::v1;
    CHECK_THROWS_AS(load_checkpoint(path, v1), FormatError);
    std::remove(path.c_str());
  }
}

TEST_CASE("spot gradient check through the full stack") {
  Fixture fx(2);
  ModelConfig cfg;
  cfg.d_e = 2;
  cfg.max_reviews = 2;
  cfg.max_sentences = 2;
  cfg.max_words = 4;
  ModelParams params = ModelParams::init(cfg, 22);
  PaperRecord p = fx.paper("p", {"a b. c d.", "e f g."}, true);
  Batch batch = one_paper_batch(p, cfg.caps(), fx.table);

  auto build = [&](Tape& tp) {
    PaperOutputs out = forward_paper(tp, cfg, params, fx.table, batch, 0);
    Tensor rating_stack = tp.concat_rows(out.rating_logits);
    return tp.add(tp.cross_entropy(out.decision_logits, {1}),
                  tp.cross_entropy(rating_stack, {4, 9}));
  };
  CHECK(fd::grad_matches(params.find("inter.gru.fw.uh"), build));
  CHECK(fd::grad_matches(params.find("sentence.bisan.bw.wq"), build));
  CHECK(fd::grad_matches(params.find("intra.s2t.w1"), build));
  CHECK(fd::grad_matches(params.find("head.decision.w"), build));
}
