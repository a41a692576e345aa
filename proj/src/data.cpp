#include "habnet/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "habnet/rng.hpp"
#include "json.hpp"

namespace habnet {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::vector<PaperRecord> parse_corpus(const std::string& json_text,
                                      const std::string& where) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw IngestError(where + ": " + e.what());
  }
  if (!root.is_object() || !root.contains("papers") ||
      !root["papers"].is_array()) {
    throw IngestError(where + ": top-level object with a 'papers' array required");
  }
  std::vector<PaperRecord> out;
  std::set<std::string> seen_ids;
  std::size_t pos = 0;
  for (const auto& jp : root["papers"]) {
    ++pos;
    const std::string loc = where + ", paper #" + std::to_string(pos);
    if (!jp.is_object() || !jp.contains("id") || !jp["id"].is_string()) {
      throw IngestError(loc + ": string 'id' required");
    }
    PaperRecord paper;
    paper.id = jp["id"].get<std::string>();
    if (!seen_ids.insert(paper.id).second) {
      throw IngestError(where + ": duplicate paper id '" + paper.id + "'");
    }
    const std::string pid = where + ", paper '" + paper.id + "'";
    if (jp.contains("decision") && !jp["decision"].is_null()) {
      if (!jp["decision"].is_string()) {
        throw IngestError(pid + ": decision must be \"accept\", \"reject\" or null");
      }
      const std::string d = jp["decision"].get<std::string>();
      if (d == "accept") {
        paper.accepted = true;
      } else if (d == "reject") {
        paper.accepted = false;
      } else {
        throw IngestError(pid + ": unknown decision '" + d + "'");
      }
    }
    if (!jp.contains("reviews") || !jp["reviews"].is_array() ||
        jp["reviews"].empty()) {
      throw IngestError(pid + ": at least one review required");
    }
    for (const auto& jr : jp["reviews"]) {
      if (!jr.is_object() || !jr.contains("text") || !jr["text"].is_string()) {
        throw IngestError(pid + ": review needs string 'text'");
      }
      ReviewRecord review;
      review.text = jr["text"].get<std::string>();
      if (jr.contains("rating") && !jr["rating"].is_null()) {
        if (!jr["rating"].is_number_integer()) {
          throw IngestError(pid + ": rating must be an integer or null");
        }
        const int r = jr["rating"].get<int>();
        if (r < 1 || r > 10) {
          throw ValueError(pid + ": rating " + std::to_string(r) +
                           " outside [1, 10]");
        }
        review.rating = r;
      }
      paper.reviews.push_back(std::move(review));
    }
    out.push_back(std::move(paper));
  }
  return out;
}

std::vector<PaperRecord> load_corpus(const std::string& path) {
  return parse_corpus(read_file(path), path);
}

std::string corpus_to_json(const std::vector<PaperRecord>& papers) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : papers) {
    nlohmann::json jp;
    jp["id"] = p.id;
    if (p.accepted.has_value()) {
      jp["decision"] = *p.accepted ? "accept" : "reject";
    } else {
      jp["decision"] = nullptr;
    }
    nlohmann::json reviews = nlohmann::json::array();
    for (const auto& r : p.reviews) {
      nlohmann::json jr;
      jr["text"] = r.text;
      if (r.rating.has_value()) {
        jr["rating"] = *r.rating;
      } else {
        jr["rating"] = nullptr;
      }
      reviews.push_back(std::move(jr));
    }
    jp["reviews"] = std::move(reviews);
    arr.push_back(std::move(jp));
  }
  nlohmann::json root;
  root["papers"] = std::move(arr);
  return root.dump(2);
}

void save_corpus(const std::vector<PaperRecord>& papers,
                 const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestError("cannot write " + path);
  out << corpus_to_json(papers) << "\n";
}

Sentences tokenize(const std::string& text) {
  auto is_word_byte = [](unsigned char c) {
    return std::isalnum(c) != 0 || c >= 0x80;
  };
  auto is_terminator = [](unsigned char c) {
    return c == '.' || c == '!' || c == '?';
  };

  Sentences out;
  std::vector<std::string> sentence;
  std::string word;
  auto flush_word = [&]() {
    if (!word.empty()) {
      sentence.push_back(word);
      word.clear();
    }
  };
  auto flush_sentence = [&]() {
    flush_word();
    if (!sentence.empty()) {
      out.push_back(sentence);
      sentence.clear();
    }
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (is_word_byte(c)) {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else if (std::isspace(c)) {
      flush_word();
    } else {
      flush_word();
      sentence.push_back(std::string(1, static_cast<char>(c)));
      const bool at_end = i + 1 == text.size();
      const bool before_space =
          !at_end && std::isspace(static_cast<unsigned char>(text[i + 1]));
      if (is_terminator(c) && (at_end || before_space)) flush_sentence();
    }
  }
  flush_sentence();
  return out;
}

std::vector<TokenizedPaper> tokenize_corpus(
    const std::vector<PaperRecord>& papers) {
  std::vector<TokenizedPaper> out;
  out.reserve(papers.size());
  for (const auto& p : papers) {
    TokenizedPaper tp;
    tp.id = p.id;
    tp.accepted = p.accepted;
    for (const auto& r : p.reviews) {
      tp.reviews.push_back(TokenizedReview{tokenize(r.text), r.rating});
    }
    out.push_back(std::move(tp));
  }
  return out;
}

std::vector<std::string> corpus_vocabulary(
    const std::vector<TokenizedPaper>& corpus) {
  std::set<std::string> seen;
  for (const auto& p : corpus)
    for (const auto& r : p.reviews)
      for (const auto& s : r.sentences)
        for (const auto& w : s) seen.insert(w);
  return {seen.begin(), seen.end()};
}

std::int32_t EmbeddingTable::lookup(const std::string& token) const {
  auto it = index.find(token);
  return it == index.end() ? kUnk : it->second;
}

const double* EmbeddingTable::row(std::int32_t idx) const {
  return matrix.data() + static_cast<std::size_t>(idx) * dim;
}

EmbeddingTable parse_embeddings(std::istream& in,
                                const std::vector<std::string>& vocab,
                                const std::string& where) {
  const std::set<std::string> wanted(vocab.begin(), vocab.end());
  EmbeddingTable table;
  std::vector<std::string> kept_tokens;
  std::vector<std::vector<double>> kept_rows;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    std::vector<double> values;
    double v;
    while (ls >> v) values.push_back(v);
    if (values.empty()) {
      throw FormatError(where + ": no values on line " +
                        std::to_string(lineno));
    }
    if (table.dim == 0) {
      table.dim = values.size();
    } else if (values.size() != table.dim) {
      throw FormatError(where + ": line " + std::to_string(lineno) + " has " +
                        std::to_string(values.size()) + " values, expected " +
                        std::to_string(table.dim));
    }
    if (wanted.count(token) && !std::count(kept_tokens.begin(),
                                           kept_tokens.end(), token)) {
      kept_tokens.push_back(token);
      kept_rows.push_back(std::move(values));
    }
  }
  if (table.dim == 0) throw FormatError(where + ": empty embedding file");

  table.matrix.assign(2 * table.dim, 0.0);  // PAD and UNK rows stay zero
  for (std::size_t i = 0; i < kept_tokens.size(); ++i) {
    table.index[kept_tokens[i]] = static_cast<std::int32_t>(2 + i);
    table.matrix.insert(table.matrix.end(), kept_rows[i].begin(),
                        kept_rows[i].end());
  }
  table.vocab_covered = kept_tokens.size();
  table.vocab_missing = vocab.size() - kept_tokens.size();
  return table;
}

EmbeddingTable load_embeddings(const std::string& path,
                               const std::vector<std::string>& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open embeddings " + path);
  return parse_embeddings(in, vocab, path);
}

DatasetSplit split_dataset(std::vector<TokenizedPaper> corpus,
                           const SplitSpec& spec) {
  std::sort(corpus.begin(), corpus.end(),
            [](const TokenizedPaper& a, const TokenizedPaper& b) {
              return a.id < b.id;
            });
  SplitCounts counts;
  if (spec.counts.has_value()) {
    counts = *spec.counts;
    if (counts.train + counts.validation + counts.test != corpus.size()) {
      throw ConfigError(
          "split counts " + std::to_string(counts.train) + "+" +
          std::to_string(counts.validation) + "+" + std::to_string(counts.test) +
          " = " +
          std::to_string(counts.train + counts.validation + counts.test) +
          " do not sum to corpus size " + std::to_string(corpus.size()));
    }
  } else {
    counts.train = corpus.size() * 70 / 100;
    counts.validation = corpus.size() * 15 / 100;
    counts.test = corpus.size() - counts.train - counts.validation;
  }
  Rng rng(spec.seed);
  rng.shuffle(corpus);
  DatasetSplit split;
  split.train.assign(corpus.begin(), corpus.begin() + counts.train);
  split.validation.assign(corpus.begin() + counts.train,
                          corpus.begin() + counts.train + counts.validation);
  split.test.assign(corpus.begin() + counts.train + counts.validation,
                    corpus.end());
  return split;
}

std::vector<TokenizedPaper> explode_reviews(
    const std::vector<TokenizedPaper>& corpus) {
  std::vector<TokenizedPaper> out;
  for (const auto& p : corpus) {
    for (std::size_t i = 0; i < p.reviews.size(); ++i) {
      TokenizedPaper single;
      single.id = p.id + "#" + std::to_string(i);
      single.accepted = p.accepted;
      single.reviews.push_back(p.reviews[i]);
      out.push_back(std::move(single));
    }
  }
  return out;
}

CorpusStats corpus_stats(const std::vector<PaperRecord>& papers) {
  CorpusStats stats;
  stats.papers = papers.size();
  for (const auto& p : papers) {
    stats.reviews += p.reviews.size();
    if (p.accepted.has_value()) {
      if (*p.accepted) {
        ++stats.accepted;
      } else {
        ++stats.rejected;
      }
    }
    for (const auto& r : p.reviews) {
      if (r.rating.has_value()) ++stats.rating_histogram[*r.rating - 1];
    }
  }
  return stats;
}

std::vector<Batch> batchify(const std::vector<TokenizedPaper>& corpus,
                            const BatchCaps& caps, std::size_t batch_size,
                            const EmbeddingTable& table,
                            std::vector<std::string>* warnings) {
  if (caps.max_reviews == 0 || caps.max_sentences == 0 || caps.max_words == 0) {
    throw ConfigError("batchify: caps must be at least 1");
  }
  if (batch_size == 0) throw ConfigError("batchify: batch size must be >= 1");

  const std::size_t m = caps.max_reviews, n = caps.max_sentences,
                    l = caps.max_words;
  std::vector<Batch> batches;
  Batch cur;
  auto open_batch = [&]() {
    cur = Batch{};
    cur.m = m;
    cur.n = n;
    cur.l = l;
  };
  auto grow = [&]() {
    cur.size += 1;
    cur.words.resize(cur.size * m * n * l, EmbeddingTable::kPad);
    cur.word_mask.resize(cur.size * m * n * l, 0);
    cur.sentence_mask.resize(cur.size * m * n, 0);
    cur.review_mask.resize(cur.size * m, 0);
    cur.rating.resize(cur.size * m, -1);
  };
  open_batch();

  for (const auto& paper : corpus) {
    const std::size_t b = cur.size;
    grow();
    bool any_token = false;
    const std::size_t reviews = std::min(paper.reviews.size(), m);
    for (std::size_t mi = 0; mi < reviews; ++mi) {
      const auto& review = paper.reviews[mi];
      const std::size_t sentences = std::min(review.sentences.size(), n);
      bool review_has_token = false;
      for (std::size_t ni = 0; ni < sentences; ++ni) {
        const auto& sentence = review.sentences[ni];
        const std::size_t words = std::min(sentence.size(), l);
        if (words == 0) continue;
        review_has_token = true;
        cur.sentence_mask[(b * m + mi) * n + ni] = 1;
        for (std::size_t li = 0; li < words; ++li) {
          const std::size_t at = ((b * m + mi) * n + ni) * l + li;
          cur.words[at] = table.lookup(sentence[li]);
          cur.word_mask[at] = 1;
        }
      }
      if (review_has_token) {
        cur.review_mask[b * m + mi] = 1;
        if (review.rating.has_value()) cur.rating[b * m + mi] = *review.rating;
        any_token = true;
      }
    }
    if (!any_token) {
      // roll the slot back
      cur.size -= 1;
      cur.words.resize(cur.size * m * n * l);
      cur.word_mask.resize(cur.size * m * n * l);
      cur.sentence_mask.resize(cur.size * m * n);
      cur.review_mask.resize(cur.size * m);
      cur.rating.resize(cur.size * m);
      if (warnings) {
        warnings->push_back("skipping paper '" + paper.id +
                            "': no valid tokens after truncation");
      }
      continue;
    }
    cur.decision.push_back(
        paper.accepted.has_value() ? (*paper.accepted ? 1 : 0) : -1);
    cur.ids.push_back(paper.id);
    if (cur.size == batch_size) {
      batches.push_back(std::move(cur));
      open_batch();
    }
  }
  if (cur.size > 0) batches.push_back(std::move(cur));
  return batches;
}

}  // namespace habnet
