#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "habnet/errors.hpp"

namespace habnet {

// Aligned (predicted, true) label pairs over an explicit class universe.
struct LabeledPredictions {
  std::vector<int> predicted;
  std::vector<int> actual;
  std::vector<int> classes;  // sorted, unique

  std::size_t size() const { return predicted.size(); }
  // n >= 1, aligned lengths, every label inside the universe.
  void validate() const;
};

// Rows are true classes, columns predicted, in universe order.
struct ConfusionMatrix {
  std::vector<int> classes;
  std::vector<std::int64_t> counts;

  std::int64_t at(std::size_t t, std::size_t p) const {
    return counts[t * classes.size() + p];
  }
  std::int64_t total() const;
  std::int64_t row_sum(std::size_t t) const;
  std::int64_t col_sum(std::size_t p) const;
};

ConfusionMatrix build_confusion(const LabeledPredictions& preds);

struct F1Suite {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  // Per universe class; 0 when the class has no support.
  std::vector<double> recall;
};

// Accuracy, per-class precision/recall with the 0/0 -> 0 convention,
// macro-F1 over the full universe, micro-F1 from pooled TP/FP/FN.
F1Suite f1_suite(const ConfusionMatrix& cm);

// DM = (1/n) sum(1 - |p_i - r_i| / d_max). Requires every distance within
// d_max and d_max >= 1.
double distance_measure(const LabeledPredictions& preds, int d_max);

struct OpValue {
  double value = 0.0;
  // All supported-class recalls were zero; the pairwise penalty is defined
  // as 0 and this flag raised.
  bool degenerate = false;
};

// OP = ACC - sum over ordered class pairs |R_i - R_j| / (2 (N-1) sum_k R_k),
// where the recall set covers only classes with ground-truth support. A
// single supported class yields OP = ACC.
OpValue optimized_precision(const ConfusionMatrix& cm);

struct EvalReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  std::optional<double> dm;  // rating task only
  double op = 0.0;
  bool op_degenerate = false;
  std::vector<double> recall;
  ConfusionMatrix confusion;

  std::string to_json() const;
  // Mirrors the reporting layout: ACC / Ma-F1 / Mi-F1 for decisions,
  // ACC / DM / OP for ratings.
  std::string to_table() const;
};

EvalReport evaluate_predictions(const LabeledPredictions& preds, bool with_dm,
                                int d_max = 9);

// CSV with a header naming at least `true` and `pred` columns (renameable).
// Throws FormatError with the offending line number.
LabeledPredictions read_label_csv(std::istream& in,
                                  const std::string& true_col,
                                  const std::string& pred_col,
                                  const std::vector<int>& classes);

std::vector<int> class_range(int lo, int hi);

}  // namespace habnet
