#include "habnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <sstream>
#include <thread>

#include "habnet/rng.hpp"
#include "json.hpp"

namespace habnet {

void TrainConfig::validate() const {
  if (epochs < 1 || batch_size < 1) {
    throw ConfigError("epochs and batch size must be at least 1");
  }
  // learning_rate 0 is allowed: it is the null update used as a diagnostic
  if (learning_rate < 0.0 || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be finite and non-negative");
  }
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ConfigError("moment decays must lie in [0, 1)");
  }
  if (epsilon <= 0.0 || clip_norm <= 0.0) {
    throw ConfigError("epsilon and clip norm must be positive");
  }
  if (repeats < 1) throw ConfigError("repeats must be at least 1");
}

std::string TrainConfig::to_json() const {
  nlohmann::json j;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["epsilon"] = epsilon;
  j["clip_norm"] = clip_norm;
  j["seed"] = seed;
  j["repeats"] = repeats;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  TrainConfig tc;
  if (j.contains("epochs")) tc.epochs = j["epochs"].get<std::size_t>();
  if (j.contains("batch_size")) tc.batch_size = j["batch_size"].get<std::size_t>();
  if (j.contains("learning_rate")) tc.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("beta1")) tc.beta1 = j["beta1"].get<double>();
  if (j.contains("beta2")) tc.beta2 = j["beta2"].get<double>();
  if (j.contains("epsilon")) tc.epsilon = j["epsilon"].get<double>();
  if (j.contains("clip_norm")) tc.clip_norm = j["clip_norm"].get<double>();
  if (j.contains("seed")) tc.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("repeats")) tc.repeats = j["repeats"].get<std::size_t>();
  tc.validate();
  return tc;
}

double clip_global_norm(
    const std::vector<std::pair<std::string, Tensor>>& params, double clip) {
  double sq = 0.0;
  for (const auto& [_, t] : params) {
    for (double g : t.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > clip && norm > 0.0) {
    const double s = clip / norm;
    for (const auto& [_, t] : params) {
      Tensor handle = t;
      for (double& g : handle.grad()) g *= s;
    }
  }
  return norm;
}

AdamOptimizer::AdamOptimizer(double learning_rate, double beta1, double beta2,
                             double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

void AdamOptimizer::step(
    const std::vector<std::pair<std::string, Tensor>>& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].second.numel(), 0.0);
      v_[i].assign(params[i].second.numel(), 0.0);
    }
  }
  if (m_.size() != params.size()) {
    throw ContractError("optimizer state does not match parameter registry");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor handle = params[i].second;
    const auto& g = handle.grad();
    auto& value = handle.value();
    for (std::size_t k = 0; k < g.size(); ++k) {
      m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * g[k];
      v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * g[k] * g[k];
      const double mhat = m_[i][k] / bc1;
      const double vhat = v_[i][k] / bc2;
      value[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

std::string RunLog::to_jsonl() const {
  std::ostringstream out;
  for (const auto& e : epochs) {
    nlohmann::json j;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["val_metric"] = e.val_metric;
    j["best"] = e.best;
    out << j.dump() << "\n";
  }
  return out.str();
}

Tensor batch_loss(Tape& tp, const ModelConfig& cfg, const ModelParams& params,
                  const EmbeddingTable& table, const Batch& batch) {
  std::vector<Tensor> logit_rows;
  std::vector<int> labels;
  for (std::size_t item = 0; item < batch.size; ++item) {
    PaperOutputs out = forward_paper(tp, cfg, params, table, batch, item);
    if (cfg.task == Task::decision) {
      if (batch.decision[item] < 0) {
        throw ConfigError("decision task: paper '" + batch.ids[item] +
                          "' has no decision label");
      }
      logit_rows.push_back(out.decision_logits);
      labels.push_back(batch.decision[item]);
    } else {
      for (std::size_t k = 0; k < out.review_slots.size(); ++k) {
        const int rating = batch.rating[item * batch.m + out.review_slots[k]];
        if (rating < 0) continue;  // unrated review contributes no loss
        logit_rows.push_back(out.rating_logits[k]);
        labels.push_back(rating - 1);
      }
    }
  }
  if (logit_rows.empty()) {
    throw ConfigError("batch contributes no labeled examples");
  }
  return tp.cross_entropy(tp.concat_rows(logit_rows), labels);
}

namespace {

// Deterministic fan-out: worker w takes items w, w+n, w+2n, ... and results
// land in preallocated slots, so the merge order never depends on timing.
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

struct ItemPrediction {
  int decision_pred = -1, decision_true = -1;
  std::vector<int> rating_pred, rating_true;
};

std::size_t argmax_row(const Tensor& logits) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.cols(); ++c) {
    if (logits.at(0, c) > logits.at(0, best)) best = c;
  }
  return best;
}

}  // namespace

SplitPredictions predict_split(const ModelConfig& cfg,
                               const ModelParams& params,
                               const EmbeddingTable& table,
                               const std::vector<TokenizedPaper>& split,
                               unsigned threads) {
  auto batches = batchify(split, cfg.caps(), 64, table);
  std::vector<std::pair<const Batch*, std::size_t>> items;
  for (const auto& b : batches) {
    for (std::size_t i = 0; i < b.size; ++i) items.emplace_back(&b, i);
  }
  std::vector<ItemPrediction> results(items.size());
  parallel_items(items.size(), threads, [&](std::size_t idx) {
    const Batch& batch = *items[idx].first;
    const std::size_t item = items[idx].second;
    Tape tp;
    PaperOutputs out = forward_paper(tp, cfg, params, table, batch, item);
    ItemPrediction& r = results[idx];
    if (cfg.task == Task::decision) {
      r.decision_true = batch.decision[item];
      r.decision_pred = static_cast<int>(argmax_row(out.decision_logits));
    } else {
      for (std::size_t k = 0; k < out.review_slots.size(); ++k) {
        const int rating = batch.rating[item * batch.m + out.review_slots[k]];
        if (rating < 0) continue;
        r.rating_true.push_back(rating);
        r.rating_pred.push_back(
            static_cast<int>(argmax_row(out.rating_logits[k])) + 1);
      }
    }
  });

  SplitPredictions preds;
  for (const auto& r : results) {
    if (cfg.task == Task::decision) {
      if (r.decision_true < 0) {
        throw ConfigError("decision task: unlabeled paper in evaluation split");
      }
      preds.decision_pred.push_back(r.decision_pred);
      preds.decision_true.push_back(r.decision_true);
    } else {
      preds.rating_pred.insert(preds.rating_pred.end(), r.rating_pred.begin(),
                               r.rating_pred.end());
      preds.rating_true.insert(preds.rating_true.end(), r.rating_true.begin(),
                               r.rating_true.end());
    }
  }
  return preds;
}

EvalReport evaluate(const ModelConfig& cfg, const ModelParams& params,
                    const EmbeddingTable& table,
                    const std::vector<TokenizedPaper>& split,
                    unsigned threads) {
  SplitPredictions preds = predict_split(cfg, params, table, split, threads);
  if (cfg.task == Task::decision) {
    LabeledPredictions lp{preds.decision_pred, preds.decision_true, {0, 1}};
    return evaluate_predictions(lp, false);
  }
  LabeledPredictions lp{preds.rating_pred, preds.rating_true,
                        class_range(1, 10)};
  return evaluate_predictions(lp, true, 9);
}

TrainResult train(const ModelConfig& cfg, const TrainConfig& tc,
                  const EmbeddingTable& table,
                  const std::vector<TokenizedPaper>& train_set,
                  const std::vector<TokenizedPaper>& validation_set) {
  cfg.validate();
  tc.validate();
  if (train_set.empty() || validation_set.empty()) {
    throw ConfigError("train: empty split");
  }

  ModelParams params = ModelParams::init(cfg, tc.seed);
  AdamOptimizer adam(tc.learning_rate, tc.beta1, tc.beta2, tc.epsilon);
  Rng shuffle_rng(tc.seed ^ 0xD1B54A32D192ED03ULL);

  std::vector<TokenizedPaper> order = train_set;
  TrainResult result;
  double best_metric = -1.0;
  std::vector<std::vector<double>> best_values;

  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    auto batches = batchify(order, cfg.caps(), tc.batch_size, table);
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (const Batch& batch : batches) {
      ++batch_index;
      Tape tp;
      Tensor loss;
      try {
        loss = batch_loss(tp, cfg, params, table, batch);
      } catch (const ValueError& e) {
        throw ValueError("diverged at epoch " + std::to_string(epoch) +
                         ", batch " + std::to_string(batch_index) +
                         " (first paper '" + batch.ids.front() +
                         "'): " + e.what());
      }
      params.zero_grads();
      tp.backward(loss);
      clip_global_norm(params.named(), tc.clip_norm);
      adam.step(params.named());
      loss_sum += loss.item() * static_cast<double>(batch.size);
    }
    const double train_loss = loss_sum / static_cast<double>(order.size());

    EvalReport val = evaluate(cfg, params, table, validation_set);
    const double val_metric =
        cfg.task == Task::decision ? val.accuracy : *val.dm;

    // Ties go to the later epoch: among equal validation scores the most
    // converged parameters win.
    EpochRecord rec{epoch, train_loss, val_metric, false};
    if (val_metric >= best_metric) {
      best_metric = val_metric;
      rec.best = true;
      result.log.best_epoch = epoch;
      best_values.clear();
      for (const auto& [_, t] : params.named()) best_values.push_back(t.value());
    }
    result.log.epochs.push_back(rec);
  }

  // restore the best snapshot
  for (std::size_t i = 0; i < params.named().size(); ++i) {
    Tensor handle = params.named()[i].second;
    handle.value() = best_values[i];
  }
  result.params = std::move(params);
  return result;
}

unsigned resolve_thread_count() {
  const char* env = std::getenv("HABNET_THREADS");
  if (!env) return 1;
  const long v = std::strtol(env, nullptr, 10);
  if (v < 1) return 1;
  return static_cast<unsigned>(v);
}

}  // namespace habnet
