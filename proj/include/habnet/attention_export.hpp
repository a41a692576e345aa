#pragma once

#include <string>
#include <vector>

#include "habnet/data.hpp"
#include "habnet/model.hpp"

namespace habnet {

enum class AttentionLevel { word, sentence, review };

AttentionLevel attention_level_from_name(const std::string& name);
std::string attention_level_name(AttentionLevel level);

// Multi-dimensional attention weights are reduced to one scalar per unit by
// an arithmetic mean over feature dimensions; within a parent the scalars of
// valid siblings sum to 1.

struct WordAttentionRow {
  std::string cls;  // "accept", "reject" or "all"
  std::string token;
  double mean_weight = 0.0;
  std::size_t occurrences = 0;
};

struct WordExportOptions {
  std::size_t top_k = 15;
  // occurrence floor per (class, token) aggregate
  std::size_t min_count = 5;
  bool by_class = true;
  unsigned threads = 1;
};

// Word-level source2token weights, dimension-averaged per occurrence, then
// aggregated by mean per token type within each decision class and ranked.
std::vector<WordAttentionRow> word_attention_export(
    const ModelConfig& cfg, const ModelParams& params,
    const EmbeddingTable& table, const std::vector<TokenizedPaper>& corpus,
    const WordExportOptions& options,
    std::vector<std::string>* warnings = nullptr);

struct UnitWeight {
  std::size_t index = 0;
  double weight = 0.0;
  std::string text;
};

// Per-sentence scalar weights within one review of one paper.
std::vector<UnitWeight> sentence_attention_export(const ModelConfig& cfg,
                                                  const ModelParams& params,
                                                  const EmbeddingTable& table,
                                                  const TokenizedPaper& paper,
                                                  std::size_t review_index);

// Per-review scalar weights within one paper.
std::vector<UnitWeight> review_attention_export(const ModelConfig& cfg,
                                                const ModelParams& params,
                                                const EmbeddingTable& table,
                                                const TokenizedPaper& paper);

std::string word_rows_to_csv(const std::vector<WordAttentionRow>& rows);
std::string unit_weights_to_csv(const std::vector<UnitWeight>& units,
                                const std::string& unit_name);

// Dependency-free heat strip: one colored cell per unit, deeper color for
// bigger weight.
std::string heat_strip_svg(const std::vector<UnitWeight>& units);

}  // namespace habnet
