#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "habnet/data.hpp"

namespace habnet {

struct SyntheticCorpus {
  std::vector<PaperRecord> papers;
  std::string embedding_file;  // `token v1 ... v_d` lines
  std::vector<std::string> accept_keywords;  // planted, separable flavour only
  std::vector<std::string> reject_keywords;
};

// Memorisation corpus: 2-4 reviews per paper of random text over a closed
// vocabulary, random balanced decisions, random ratings. Carries no signal;
// a model reaching full training accuracy has memorised it.
SyntheticCorpus synthetic_overfit_corpus(std::size_t papers,
                                         std::size_t vocab_size,
                                         std::size_t d_e, std::uint64_t seed);

// Separable corpus: the decision is determined by planted sentiment keywords
// mixed into otherwise neutral filler text; ratings correlate with the
// decision.
SyntheticCorpus synthetic_separable_corpus(std::size_t papers, std::size_t d_e,
                                           std::uint64_t seed);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace habnet
