#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "habnet/data.hpp"
#include "habnet/metrics.hpp"
#include "habnet/model.hpp"

namespace habnet {

struct TrainConfig {
  std::size_t epochs = 100;  // decision default; rating runs use 50
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::size_t repeats = 1;

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

// Scales all gradients so the global norm is at most `clip`; returns the
// pre-clip norm.
double clip_global_norm(
    const std::vector<std::pair<std::string, Tensor>>& params, double clip);

// Adaptive moment estimation with bias correction over a fixed parameter
// registry. State is positional, so the registry order must not change.
class AdamOptimizer {
 public:
  AdamOptimizer(double learning_rate, double beta1, double beta2,
                double epsilon);

  void step(const std::vector<std::pair<std::string, Tensor>>& params);
  std::uint64_t steps_taken() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_metric = 0.0;  // accuracy (decision) or DM (rating)
  bool best = false;
};

struct RunLog {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;

  std::string to_jsonl() const;
};

struct TrainResult {
  ModelParams params;  // best-validation snapshot
  RunLog log;
};

// Cross-entropy over one batch: decision logits vs decision labels, or
// pooled per-review rating logits vs rating labels, depending on the task.
Tensor batch_loss(Tape& tp, const ModelConfig& cfg, const ModelParams& params,
                  const EmbeddingTable& table, const Batch& batch);

// Per epoch: seeded shuffle, minibatch forward/backward, global-norm clip,
// adaptive-moment update, validation; the best-validation checkpoint wins.
TrainResult train(const ModelConfig& cfg, const TrainConfig& tc,
                  const EmbeddingTable& table,
                  const std::vector<TokenizedPaper>& train_set,
                  const std::vector<TokenizedPaper>& validation_set);

// Forward-only evaluation. Decision reports ACC/Ma-F1/Mi-F1, rating adds
// DM and OP. `threads` > 1 fans items out with a deterministic merge.
EvalReport evaluate(const ModelConfig& cfg, const ModelParams& params,
                    const EmbeddingTable& table,
                    const std::vector<TokenizedPaper>& split,
                    unsigned threads = 1);

// Predicted labels per item, aligned with the batchified order:
// decision in {0,1}, ratings in 1..10 per valid rated review.
struct SplitPredictions {
  std::vector<int> decision_pred, decision_true;
  std::vector<int> rating_pred, rating_true;
};

SplitPredictions predict_split(const ModelConfig& cfg,
                               const ModelParams& params,
                               const EmbeddingTable& table,
                               const std::vector<TokenizedPaper>& split,
                               unsigned threads = 1);

// HABNET_THREADS, default 1.
unsigned resolve_thread_count();

}  // namespace habnet
