#include "habnet/synthetic.hpp"

#include <fstream>
#include <sstream>

#include "habnet/rng.hpp"

namespace habnet {

namespace {

std::string random_embeddings(const std::vector<std::string>& vocab,
                              std::size_t d_e, Rng& rng) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& tok : vocab) {
    out << tok;
    for (std::size_t k = 0; k < d_e; ++k) out << " " << rng.uniform(-0.5, 0.5);
    out << "\n";
  }
  return out.str();
}

std::string random_sentence(const std::vector<std::string>& vocab, Rng& rng,
                            int min_words, int max_words) {
  std::ostringstream s;
  const int words = rng.uniform_int(min_words, max_words);
  for (int w = 0; w < words; ++w) {
    if (w) s << " ";
    s << vocab[rng.below(vocab.size())];
  }
  s << ".";
  return s.str();
}

}  // namespace

SyntheticCorpus synthetic_overfit_corpus(std::size_t papers,
                                         std::size_t vocab_size,
                                         std::size_t d_e, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> vocab;
  for (std::size_t i = 0; i < vocab_size; ++i) {
    vocab.push_back("w" + std::to_string(i));
  }

  SyntheticCorpus corpus;
  corpus.embedding_file = random_embeddings(vocab, d_e, rng);
  for (std::size_t i = 0; i < papers; ++i) {
    PaperRecord p;
    p.id = "synth" + std::to_string(i);
    p.accepted = i % 2 == 0;  // balanced
    const int reviews = rng.uniform_int(2, 4);
    for (int r = 0; r < reviews; ++r) {
      std::ostringstream text;
      const int sentences = rng.uniform_int(1, 3);
      for (int s = 0; s < sentences; ++s) {
        if (s) text << " ";
        text << random_sentence(vocab, rng, 3, 6);
      }
      p.reviews.push_back({text.str(), rng.uniform_int(1, 10)});
    }
    corpus.papers.push_back(std::move(p));
  }
  return corpus;
}

SyntheticCorpus synthetic_separable_corpus(std::size_t papers, std::size_t d_e,
                                           std::uint64_t seed) {
  Rng rng(seed);
  SyntheticCorpus corpus;
  corpus.accept_keywords = {"excellent", "competitive", "insightful"};
  corpus.reject_keywords = {"unsatisfactory", "incoherent", "flawed"};
  std::vector<std::string> filler;
  for (std::size_t i = 0; i < 14; ++i) {
    filler.push_back("filler" + std::to_string(i));
  }

  std::vector<std::string> vocab = filler;
  vocab.insert(vocab.end(), corpus.accept_keywords.begin(),
               corpus.accept_keywords.end());
  vocab.insert(vocab.end(), corpus.reject_keywords.begin(),
               corpus.reject_keywords.end());
  corpus.embedding_file = random_embeddings(vocab, d_e, rng);

  for (std::size_t i = 0; i < papers; ++i) {
    PaperRecord p;
    p.id = "sep" + std::to_string(i);
    const bool accept = i % 2 == 0;
    p.accepted = accept;
    const auto& keywords =
        accept ? corpus.accept_keywords : corpus.reject_keywords;
    // one keyword type per paper, rotating for balance: the keyword is the
    // only class evidence in its papers, so none can be ignored
    const std::string& keyword = keywords[(i / 2) % keywords.size()];
    const int reviews = rng.uniform_int(2, 4);
    for (int r = 0; r < reviews; ++r) {
      std::ostringstream text;
      const int sentences = rng.uniform_int(2, 3);
      for (int s = 0; s < sentences; ++s) {
        // fixed sentence length so every token type competes on equal
        // footing: keyword + 4 fillers + keyword + terminator
        std::ostringstream plain;
        for (int w = 0; w < 4; ++w) {
          if (w) plain << " ";
          plain << filler[rng.below(filler.size())];
        }
        const std::string sentence =
            keyword + " " + plain.str() + " " + keyword;
        if (s) text << " ";
        text << sentence << ".";
      }
      const int rating = accept ? rng.uniform_int(6, 9) : rng.uniform_int(2, 5);
      p.reviews.push_back({text.str(), rating});
    }
    corpus.papers.push_back(std::move(p));
  }
  return corpus;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestError("cannot write " + path);
  out << content;
}

}  // namespace habnet
