#include "habnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace habnet {

namespace {

std::size_t class_index(const std::vector<int>& classes, int label,
                        const char* who) {
  auto it = std::lower_bound(classes.begin(), classes.end(), label);
  if (it == classes.end() || *it != label) {
    throw ValueError(std::string(who) + ": label " + std::to_string(label) +
                     " outside the class universe");
  }
  return static_cast<std::size_t>(it - classes.begin());
}

}  // namespace

void LabeledPredictions::validate() const {
  if (predicted.empty() || predicted.size() != actual.size()) {
    throw ContractError("labeled predictions: need n >= 1 aligned pairs");
  }
  if (classes.empty() || !std::is_sorted(classes.begin(), classes.end())) {
    throw ContractError("labeled predictions: sorted class universe required");
  }
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    class_index(classes, predicted[i], "predictions");
    class_index(classes, actual[i], "truths");
  }
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::row_sum(std::size_t t) const {
  std::int64_t s = 0;
  for (std::size_t p = 0; p < classes.size(); ++p) s += at(t, p);
  return s;
}

std::int64_t ConfusionMatrix::col_sum(std::size_t p) const {
  std::int64_t s = 0;
  for (std::size_t t = 0; t < classes.size(); ++t) s += at(t, p);
  return s;
}

ConfusionMatrix build_confusion(const LabeledPredictions& preds) {
  preds.validate();
  ConfusionMatrix cm;
  cm.classes = preds.classes;
  cm.counts.assign(cm.classes.size() * cm.classes.size(), 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::size_t t = class_index(cm.classes, preds.actual[i], "truths");
    const std::size_t p =
        class_index(cm.classes, preds.predicted[i], "predictions");
    ++cm.counts[t * cm.classes.size() + p];
  }
  return cm;
}

F1Suite f1_suite(const ConfusionMatrix& cm) {
  const std::size_t n_classes = cm.classes.size();
  const double total = static_cast<double>(cm.total());
  if (total == 0.0) throw ContractError("f1_suite: empty confusion matrix");

  F1Suite out;
  out.recall.assign(n_classes, 0.0);
  double diag = 0.0, macro = 0.0;
  std::int64_t pooled_tp = 0, pooled_fp = 0, pooled_fn = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    const std::int64_t tp = cm.at(c, c);
    const std::int64_t fp = cm.col_sum(c) - tp;
    const std::int64_t fn = cm.row_sum(c) - tp;
    diag += static_cast<double>(tp);
    pooled_tp += tp;
    pooled_fp += fp;
    pooled_fn += fn;
    const double precision =
        tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp)
                    : 0.0;
    const double recall =
        tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn)
                    : 0.0;
    out.recall[c] = recall;
    macro += precision + recall > 0.0
                 ? 2.0 * precision * recall / (precision + recall)
                 : 0.0;
  }
  out.accuracy = diag / total;
  out.macro_f1 = macro / static_cast<double>(n_classes);
  const double md = static_cast<double>(2 * pooled_tp + pooled_fp + pooled_fn);
  out.micro_f1 = md > 0.0 ? 2.0 * static_cast<double>(pooled_tp) / md : 0.0;
  return out;
}

double distance_measure(const LabeledPredictions& preds, int d_max) {
  preds.validate();
  if (d_max <= 0) {
    throw ContractError("distance_measure: d_max must be positive");
  }
  const ConfusionMatrix cm = build_confusion(preds);
  const std::size_t n_classes = cm.classes.size();
  double acc = 0.0;
  for (std::size_t t = 0; t < n_classes; ++t) {
    for (std::size_t p = 0; p < n_classes; ++p) {
      const std::int64_t count = cm.at(t, p);
      if (count == 0) continue;
      const int d = std::abs(cm.classes[t] - cm.classes[p]);
      if (d > d_max) {
        throw ContractError("distance_measure: distance " + std::to_string(d) +
                            " exceeds d_max " + std::to_string(d_max));
      }
      acc += static_cast<double>(count) *
             (1.0 - static_cast<double>(d) / static_cast<double>(d_max));
    }
  }
  return acc / static_cast<double>(preds.size());
}

OpValue optimized_precision(const ConfusionMatrix& cm) {
  const F1Suite suite = f1_suite(cm);
  // Recall set: classes that actually occur in the evaluated truths.
  std::vector<double> recalls;
  for (std::size_t c = 0; c < cm.classes.size(); ++c) {
    if (cm.row_sum(c) > 0) recalls.push_back(suite.recall[c]);
  }
  OpValue out;
  if (recalls.size() <= 1) {
    out.value = suite.accuracy;
    return out;
  }
  const double recall_sum =
      std::accumulate(recalls.begin(), recalls.end(), 0.0);
  if (recall_sum == 0.0) {
    out.value = suite.accuracy;
    out.degenerate = true;
    return out;
  }
  double pair_sum = 0.0;  // ordered pairs; the diagonal contributes zero
  for (double ri : recalls)
    for (double rj : recalls) pair_sum += std::abs(ri - rj);
  const double penalty =
      pair_sum / (2.0 * static_cast<double>(recalls.size() - 1) * recall_sum);
  out.value = suite.accuracy - penalty;
  return out;
}

EvalReport evaluate_predictions(const LabeledPredictions& preds, bool with_dm,
                                int d_max) {
  EvalReport rep;
  rep.confusion = build_confusion(preds);
  const F1Suite suite = f1_suite(rep.confusion);
  rep.accuracy = suite.accuracy;
  rep.macro_f1 = suite.macro_f1;
  rep.micro_f1 = suite.micro_f1;
  rep.recall = suite.recall;
  const OpValue op = optimized_precision(rep.confusion);
  rep.op = op.value;
  rep.op_degenerate = op.degenerate;
  if (with_dm) rep.dm = distance_measure(preds, d_max);
  return rep;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["accuracy"] = accuracy;
  j["macro_f1"] = macro_f1;
  j["micro_f1"] = micro_f1;
  if (dm.has_value()) j["dm"] = *dm;
  j["op"] = op;
  j["op_degenerate"] = op_degenerate;
  j["recall"] = recall;
  j["classes"] = confusion.classes;
  j["confusion"] = confusion.counts;
  return j.dump(2);
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  auto cell = [&os](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    os << buf << "\t";
  };
  if (dm.has_value()) {
    os << "ACC\tDM\tOP\n";
    cell(accuracy);
    cell(*dm);
    cell(op);
  } else {
    os << "ACC\tMa-F1\tMi-F1\n";
    cell(accuracy);
    cell(macro_f1);
    cell(micro_f1);
  }
  os << "\n";
  return os.str();
}

std::vector<int> class_range(int lo, int hi) {
  std::vector<int> out;
  for (int c = lo; c <= hi; ++c) out.push_back(c);
  return out;
}

LabeledPredictions read_label_csv(std::istream& in,
                                  const std::string& true_col,
                                  const std::string& pred_col,
                                  const std::vector<int>& classes) {
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        cells.push_back(cur);
        cur.clear();
      } else if (ch != '\r') {
        cur.push_back(ch);
      }
    }
    cells.push_back(cur);
    return cells;
  };

  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError("label csv: missing header (line 1)");
  }
  const auto header = split(line);
  auto find_col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw FormatError("label csv: header lacks column '" + name + "' (line 1)");
  };
  const std::size_t ti = find_col(true_col);
  const std::size_t pi = find_col(pred_col);

  LabeledPredictions preds;
  preds.classes = classes;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() <= std::max(ti, pi)) {
      throw FormatError("label csv: too few cells (line " +
                        std::to_string(lineno) + ")");
    }
    auto parse = [&](const std::string& s) {
      std::size_t pos = 0;
      int v = 0;
      try {
        v = std::stoi(s, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != s.size() || s.empty()) {
        throw FormatError("label csv: bad integer '" + s + "' (line " +
                          std::to_string(lineno) + ")");
      }
      return v;
    };
    preds.actual.push_back(parse(cells[ti]));
    preds.predicted.push_back(parse(cells[pi]));
  }
  preds.validate();
  return preds;
}

}  // namespace habnet
