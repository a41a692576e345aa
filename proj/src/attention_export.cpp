#include "habnet/attention_export.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

#include "habnet/trainer.hpp"

namespace habnet {

AttentionLevel attention_level_from_name(const std::string& name) {
  if (name == "word") return AttentionLevel::word;
  if (name == "sentence") return AttentionLevel::sentence;
  if (name == "review") return AttentionLevel::review;
  throw ConfigError("unknown attention level '" + name + "'");
}

std::string attention_level_name(AttentionLevel level) {
  switch (level) {
    case AttentionLevel::word: return "word";
    case AttentionLevel::sentence: return "sentence";
    case AttentionLevel::review: return "review";
  }
  throw ConfigError("unknown attention level");
}

namespace {

double row_mean(const TraceMat& m, std::size_t row) {
  double acc = 0.0;
  for (std::size_t c = 0; c < m.cols; ++c) acc += m.at(row, c);
  return acc / static_cast<double>(m.cols);
}

std::string join(const std::vector<std::string>& tokens, std::size_t limit) {
  std::string out;
  for (std::size_t i = 0; i < std::min(tokens.size(), limit); ++i) {
    if (i) out += " ";
    out += tokens[i];
  }
  if (tokens.size() > limit) out += " ...";
  return out;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

std::string fmt(double v, const char* spec = "%.10f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

void parallel_items(std::size_t count, unsigned threads,
                    const std::function<void(std::size_t)>& work) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) work(i);
    return;
  }
  const unsigned n = std::min<unsigned>(threads, static_cast<unsigned>(count));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(n);
  for (unsigned w = 0; w < n; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (std::size_t i = w; i < count; i += n) work(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct TracedPaper {
  const TokenizedPaper* paper = nullptr;
  ForwardTrace trace;
};

// Forward every paper once, with traces, preserving corpus order.
std::vector<TracedPaper> trace_corpus(const ModelConfig& cfg,
                                      const ModelParams& params,
                                      const EmbeddingTable& table,
                                      const std::vector<TokenizedPaper>& corpus,
                                      unsigned threads) {
  auto batches = batchify(corpus, cfg.caps(), 64, table);
  std::map<std::string, const TokenizedPaper*> by_id;
  for (const auto& p : corpus) by_id[p.id] = &p;

  std::vector<std::pair<const Batch*, std::size_t>> items;
  for (const auto& b : batches) {
    for (std::size_t i = 0; i < b.size; ++i) items.emplace_back(&b, i);
  }
  std::vector<TracedPaper> out(items.size());
  parallel_items(items.size(), threads, [&](std::size_t idx) {
    const Batch& batch = *items[idx].first;
    const std::size_t item = items[idx].second;
    Tape tp;
    forward_paper(tp, cfg, params, table, batch, item, &out[idx].trace);
    out[idx].paper = by_id.at(batch.ids[item]);
  });
  return out;
}

}  // namespace

std::vector<WordAttentionRow> word_attention_export(
    const ModelConfig& cfg, const ModelParams& params,
    const EmbeddingTable& table, const std::vector<TokenizedPaper>& corpus,
    const WordExportOptions& options, std::vector<std::string>* warnings) {
  if (cfg.variant == Variant::v2) {
    throw ConfigError("variant V2 has no word-level attention weights");
  }
  auto traced = trace_corpus(cfg, params, table, corpus, options.threads);

  // (class, token) -> (weight sum, occurrences)
  std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>>
      agg;
  for (const auto& tp : traced) {
    std::string cls = "all";
    if (options.by_class && tp.paper->accepted.has_value()) {
      cls = *tp.paper->accepted ? "accept" : "reject";
    }
    const auto& reviews = tp.paper->reviews;
    for (std::size_t mi = 0; mi < tp.trace.word_weights.size(); ++mi) {
      if (mi >= reviews.size()) break;
      const auto& sentences = reviews[mi].sentences;
      for (std::size_t ni = 0; ni < tp.trace.word_weights[mi].size(); ++ni) {
        if (ni >= sentences.size()) break;
        const TraceMat& weights = tp.trace.word_weights[mi][ni];
        if (weights.cols == 0) continue;  // masked slot
        const auto& tokens = sentences[ni];
        const std::size_t valid = std::min<std::size_t>(tokens.size(), weights.rows);
        for (std::size_t li = 0; li < valid; ++li) {
          auto& cell = agg[{cls, tokens[li]}];
          cell.first += row_mean(weights, li);
          cell.second += 1;
        }
      }
    }
  }

  // rank per class
  std::map<std::string, std::vector<WordAttentionRow>> per_class;
  for (const auto& [key, cell] : agg) {
    if (cell.second < options.min_count) continue;
    per_class[key.first].push_back(WordAttentionRow{
        key.first, key.second,
        cell.first / static_cast<double>(cell.second), cell.second});
  }
  std::vector<WordAttentionRow> out;
  for (auto& [cls, rows] : per_class) {
    std::sort(rows.begin(), rows.end(),
              [](const WordAttentionRow& a, const WordAttentionRow& b) {
                if (a.mean_weight != b.mean_weight)
                  return a.mean_weight > b.mean_weight;
                return a.token < b.token;
              });
    if (rows.size() < options.top_k && warnings) {
      warnings->push_back("class '" + cls + "' has only " +
                          std::to_string(rows.size()) + " tokens above the " +
                          std::to_string(options.min_count) +
                          "-occurrence floor (top-k " +
                          std::to_string(options.top_k) + " clamped)");
    }
    const std::size_t keep = std::min(options.top_k, rows.size());
    out.insert(out.end(), rows.begin(), rows.begin() + keep);
  }
  return out;
}

std::vector<UnitWeight> sentence_attention_export(const ModelConfig& cfg,
                                                  const ModelParams& params,
                                                  const EmbeddingTable& table,
                                                  const TokenizedPaper& paper,
                                                  std::size_t review_index) {
  if (cfg.variant == Variant::v3) {
    throw ConfigError("variant V3 has no sentence-level attention weights");
  }
  auto traced = trace_corpus(cfg, params, table, {paper}, 1);
  if (traced.empty()) throw ConfigError("paper has no valid tokens");
  const ForwardTrace& trace = traced[0].trace;
  if (review_index >= trace.sentence_weights.size() ||
      trace.sentence_weights[review_index].cols == 0) {
    throw ConfigError("paper '" + paper.id + "' has no valid review " +
                      std::to_string(review_index));
  }
  const TraceMat& weights = trace.sentence_weights[review_index];
  const auto& sentences = paper.reviews[review_index].sentences;
  std::vector<UnitWeight> out;
  for (std::size_t ni = 0; ni < weights.rows && ni < sentences.size(); ++ni) {
    if (sentences[ni].empty()) continue;
    double w = row_mean(weights, ni);
    out.push_back(UnitWeight{ni, w, join(sentences[ni], 32)});
  }
  return out;
}

std::vector<UnitWeight> review_attention_export(const ModelConfig& cfg,
                                                const ModelParams& params,
                                                const EmbeddingTable& table,
                                                const TokenizedPaper& paper) {
  if (cfg.variant == Variant::v1) {
    throw ConfigError("variant V1 has no review-level attention weights");
  }
  if (cfg.task == Task::rating) {
    throw ConfigError("the rating path never runs the inter-review encoder");
  }
  auto traced = trace_corpus(cfg, params, table, {paper}, 1);
  if (traced.empty()) throw ConfigError("paper has no valid tokens");
  const ForwardTrace& trace = traced[0].trace;
  const TraceMat& weights = trace.review_weights;
  std::vector<UnitWeight> out;
  for (std::size_t mi = 0; mi < weights.rows && mi < paper.reviews.size();
       ++mi) {
    bool valid = false;
    for (std::size_t c = 0; c < weights.cols; ++c) {
      if (weights.at(mi, c) != 0.0) valid = true;
    }
    if (!valid) continue;
    std::vector<std::string> first_sentence;
    if (!paper.reviews[mi].sentences.empty()) {
      first_sentence = paper.reviews[mi].sentences.front();
    }
    out.push_back(UnitWeight{mi, row_mean(weights, mi), join(first_sentence, 10)});
  }
  return out;
}

std::string word_rows_to_csv(const std::vector<WordAttentionRow>& rows) {
  std::ostringstream out;
  out << "class,token,mean_weight,occurrences\n";
  for (const auto& r : rows) {
    out << r.cls << "," << r.token << "," << fmt(r.mean_weight) << ","
        << r.occurrences << "\n";
  }
  return out.str();
}

std::string unit_weights_to_csv(const std::vector<UnitWeight>& units,
                                const std::string& unit_name) {
  std::ostringstream out;
  out << unit_name << ",weight,text\n";
  for (const auto& u : units) {
    out << u.index << "," << fmt(u.weight) << "," << csv_quote(u.text) << "\n";
  }
  return out.str();
}

std::string heat_strip_svg(const std::vector<UnitWeight>& units) {
  const int cell_w = 84, cell_h = 30, gap = 4, label_h = 18;
  const int width = static_cast<int>(units.size()) * (cell_w + gap) + gap;
  const int height = cell_h + label_h + 2 * gap;
  double max_w = 0.0;
  for (const auto& u : units) max_w = std::max(max_w, u.weight);
  if (max_w <= 0.0) max_w = 1.0;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  int x = gap;
  for (const auto& u : units) {
    const double t = u.weight / max_w;
    // white to crimson
    const int r = static_cast<int>(255 + t * (178 - 255));
    const int g = static_cast<int>(255 + t * (24 - 255));
    const int b = static_cast<int>(255 + t * (43 - 255));
    char color[8];
    std::snprintf(color, sizeof(color), "#%02x%02x%02x", r, g, b);
    svg << "  <rect x=\"" << x << "\" y=\"" << gap << "\" width=\"" << cell_w
        << "\" height=\"" << cell_h << "\" fill=\"" << color
        << "\" stroke=\"#444444\"/>\n";
    svg << "  <text x=\"" << x + cell_w / 2 << "\" y=\""
        << gap + cell_h + label_h - 5
        << "\" font-size=\"11\" text-anchor=\"middle\">" << u.index << ": "
        << fmt(u.weight, "%.4f") << "</text>\n";
    x += cell_w + gap;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace habnet
