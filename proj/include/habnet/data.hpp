#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "habnet/errors.hpp"

namespace habnet {

struct ReviewRecord {
  std::string text;
  std::optional<int> rating;  // 1..10 when present
};

struct PaperRecord {
  std::string id;
  std::optional<bool> accepted;  // absent for rating-only corpora
  std::vector<ReviewRecord> reviews;
};

// Corpus JSON:
//   {"papers":[{"id":str,"decision":"accept"|"reject"|null,
//               "reviews":[{"text":str,"rating":int|null}]}]}
std::vector<PaperRecord> load_corpus(const std::string& path);
std::vector<PaperRecord> parse_corpus(const std::string& json_text,
                                      const std::string& where);
std::string corpus_to_json(const std::vector<PaperRecord>& papers);
void save_corpus(const std::vector<PaperRecord>& papers,
                 const std::string& path);

// Deterministic rule-based tokenizer: sentences end at . ! ? followed by
// whitespace (or end of text); tokens are lowercased; punctuation characters
// are their own tokens; empty sentences are dropped.
using Sentences = std::vector<std::vector<std::string>>;
Sentences tokenize(const std::string& text);

struct TokenizedReview {
  Sentences sentences;
  std::optional<int> rating;
};

struct TokenizedPaper {
  std::string id;
  std::optional<bool> accepted;
  std::vector<TokenizedReview> reviews;
};

std::vector<TokenizedPaper> tokenize_corpus(
    const std::vector<PaperRecord>& papers);

// Sorted unique token list over the whole corpus.
std::vector<std::string> corpus_vocabulary(
    const std::vector<TokenizedPaper>& corpus);

// Token lookup plus the frozen pretrained matrix. Reserved rows: PAD = 0
// (all zeros, never updated) and UNK = 1 (zeros). Corpus tokens without an
// embedding row resolve to UNK.
struct EmbeddingTable {
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;

  std::size_t dim = 0;
  std::vector<double> matrix;  // rows() x dim, row-major
  std::unordered_map<std::string, std::int32_t> index;
  std::size_t vocab_covered = 0;
  std::size_t vocab_missing = 0;

  std::size_t rows() const { return dim == 0 ? 0 : matrix.size() / dim; }
  std::int32_t lookup(const std::string& token) const;
  const double* row(std::int32_t idx) const;
};

// Text file, one `token v1 ... v_d` line per token. Rows are loaded for
// vocabulary tokens only, in file order.
EmbeddingTable load_embeddings(const std::string& path,
                               const std::vector<std::string>& vocab);
EmbeddingTable parse_embeddings(std::istream& in,
                                const std::vector<std::string>& vocab,
                                const std::string& where);

struct SplitCounts {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};

struct SplitSpec {
  std::uint64_t seed = 13;
  // Absent counts fall back to a 70/15/15 split.
  std::optional<SplitCounts> counts;
};

struct DatasetSplit {
  std::vector<TokenizedPaper> train;
  std::vector<TokenizedPaper> validation;
  std::vector<TokenizedPaper> test;
};

// Sort-by-id barrier, seeded shuffle, then contiguous slicing. Counts that
// do not sum to the corpus size are a configuration error.
DatasetSplit split_dataset(std::vector<TokenizedPaper> corpus,
                           const SplitSpec& spec);

// Rating-task granularity: one single-review paper per (paper, review).
std::vector<TokenizedPaper> explode_reviews(
    const std::vector<TokenizedPaper>& corpus);

struct CorpusStats {
  std::size_t papers = 0;
  std::size_t reviews = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::array<std::size_t, 10> rating_histogram{};  // ratings 1..10
};

CorpusStats corpus_stats(const std::vector<PaperRecord>& papers);

struct BatchCaps {
  std::size_t max_reviews = 5;    // M
  std::size_t max_sentences = 40; // N
  std::size_t max_words = 50;     // L
};

// Fixed-shape padded arrays with hierarchical validity masks:
// a valid word implies its sentence is valid implies its review is valid.
struct Batch {
  std::size_t size = 0;  // papers in this batch
  std::size_t m = 0, n = 0, l = 0;
  std::vector<std::int32_t> words;          // size*m*n*l
  std::vector<std::uint8_t> word_mask;      // size*m*n*l
  std::vector<std::uint8_t> sentence_mask;  // size*m*n
  std::vector<std::uint8_t> review_mask;    // size*m
  std::vector<int> decision;                // size, -1 when absent
  std::vector<int> rating;                  // size*m, -1 when absent
  std::vector<std::string> ids;             // size

  std::int32_t word_at(std::size_t b, std::size_t mi, std::size_t ni,
                       std::size_t li) const {
    return words[((b * m + mi) * n + ni) * l + li];
  }
  bool word_valid(std::size_t b, std::size_t mi, std::size_t ni,
                  std::size_t li) const {
    return word_mask[((b * m + mi) * n + ni) * l + li] != 0;
  }
  bool sentence_valid(std::size_t b, std::size_t mi, std::size_t ni) const {
    return sentence_mask[(b * m + mi) * n + ni] != 0;
  }
  bool review_valid(std::size_t b, std::size_t mi) const {
    return review_mask[b * m + mi] != 0;
  }
};

// Truncate to the caps, pad shorter axes, build masks. Papers that end up
// with no valid tokens are skipped with a warning.
std::vector<Batch> batchify(const std::vector<TokenizedPaper>& corpus,
                            const BatchCaps& caps, std::size_t batch_size,
                            const EmbeddingTable& table,
                            std::vector<std::string>* warnings = nullptr);

}  // namespace habnet
