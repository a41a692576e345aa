#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "habnet/attention.hpp"
#include "habnet/data.hpp"
#include "habnet/tensor.hpp"

namespace habnet {

enum class Variant { full, v1, v2, v3 };
enum class Task { decision, rating };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);
std::string task_name(Task t);
Task task_from_name(const std::string& name);
std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct ModelConfig {
  std::size_t d_e = 50;
  std::size_t max_words = 50;      // L
  std::size_t max_sentences = 40;  // N
  std::size_t max_reviews = 5;     // M
  Variant variant = Variant::full;
  Task task = Task::decision;
  std::size_t gru_hidden = 0;  // 0 derives the width-preserving default
  std::size_t d_h = 0;         // 0 -> d_in at each instantiation
  Activation attn_sigma = Activation::elu;

  void validate() const;

  // Width ladder. Full variant: s 2d_e, se 4d_e, r 4d_e, re 8d_e, rs 8d_e.
  std::size_t sentence_width() const;    // |s|
  std::size_t review_width() const;      // |r|
  std::size_t gru_hidden_width() const;  // per direction
  std::size_t paper_width() const;       // |rs|

  BatchCaps caps() const { return {max_reviews, max_sentences, max_words}; }

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

struct BiSanParams {
  DirectionalSanParams fw;
  DirectionalSanParams bw;
};

struct GruDirectionParams {
  Tensor wz, wr, wh;  // [h x in]
  Tensor uz, ur, uh;  // [h x h]
  Tensor bz, br, bh;  // [1 x h]
};

struct BiGruParams {
  GruDirectionParams fw;
  GruDirectionParams bw;
};

// All trainable arrays, plus a deterministic name -> tensor registry used by
// the optimizer and the checkpoint format. Variant-excluded levels are absent.
class ModelParams {
 public:
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);

  std::optional<BiSanParams> sent_bisan;
  std::optional<Source2TokenParams> sent_s2t;
  std::optional<BiSanParams> intra_bisan;
  std::optional<Source2TokenParams> intra_s2t;
  std::optional<BiGruParams> gru;
  std::optional<BiSanParams> inter_bisan;
  std::optional<Source2TokenParams> inter_s2t;
  Tensor decision_w, decision_b;  // [2 x paper_width], [1 x 2]
  Tensor rating_w, rating_b;      // [10 x review_width], [1 x 10]

  const std::vector<std::pair<std::string, Tensor>>& named() const {
    return named_;
  }
  Tensor find(const std::string& name) const;
  void zero_grads();

 private:
  void reg(const std::string& name, const Tensor& t);
  void reg_bisan(const std::string& prefix, BiSanParams& p);
  void reg_s2t(const std::string& prefix, Source2TokenParams& p);
  void reg_gru(const std::string& prefix, GruDirectionParams& p);

  std::vector<std::pair<std::string, Tensor>> named_;
};

struct TraceMat {
  std::size_t rows = 0, cols = 0;
  std::vector<double> v;

  double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

// Attention weights and intermediate encodings of one paper's forward pass.
// Indices follow the padded batch layout; masked slots hold empty matrices.
struct ForwardTrace {
  std::vector<std::vector<TraceMat>> word_weights;  // [M][N], L x |we|
  std::vector<std::vector<TraceMat>> we;            // [M][N], L x |we|
  std::vector<TraceMat> s;                          // [M], N x |s|
  std::vector<TraceMat> sentence_weights;           // [M], N x |se|
  std::vector<TraceMat> se;                         // [M], N x |se|
  TraceMat r;                                       // M x |r|
  TraceMat re;                                      // M x |re|
  TraceMat review_weights;                          // M x |re|
  std::vector<double> rs;
};

// Level encoders. Each handles its variant's replacement internally.
Tensor encode_sentence(Tape& tp, const ModelConfig& cfg,
                       const ModelParams& params, const Tensor& words,
                       const LevelMask& word_mask,
                       TraceMat* we_out = nullptr,
                       TraceMat* weights_out = nullptr);

Tensor encode_review(Tape& tp, const ModelConfig& cfg,
                     const ModelParams& params, const Tensor& sentences,
                     const LevelMask& sentence_mask,
                     TraceMat* se_out = nullptr,
                     TraceMat* weights_out = nullptr);

struct PaperEncoding {
  Tensor rs;  // [1 x paper_width]
  Tensor re;  // [M x 2*paper-level width], undefined in V1
};

PaperEncoding encode_paper(Tape& tp, const ModelConfig& cfg,
                           const ModelParams& params, const Tensor& reviews,
                           const LevelMask& review_mask,
                           TraceMat* re_out = nullptr,
                           TraceMat* weights_out = nullptr);

struct PaperOutputs {
  Tensor decision_logits;  // [1 x 2], defined iff the decision path ran
  std::vector<std::size_t> review_slots;  // batch review indices, valid only
  std::vector<Tensor> review_encodings;   // r_i, aligned with review_slots
  std::vector<Tensor> rating_logits;      // [1 x 10], aligned with review_slots
};

// Full forward pass over one batch item. The rating path always runs per
// valid review; the paper path runs for the decision task only.
PaperOutputs forward_paper(Tape& tp, const ModelConfig& cfg,
                           const ModelParams& params,
                           const EmbeddingTable& table, const Batch& batch,
                           std::size_t item, ForwardTrace* trace = nullptr);

// Softmax heads. Classes: decision {reject=0, accept=1}; rating class c
// maps to rating c+1.
Tensor predict_decision(Tape& tp, const ModelParams& params, const Tensor& rs);
Tensor predict_rating(Tape& tp, const ModelParams& params, const Tensor& r_i);

// Checkpoint format: "HABNET01", version u32, count u32, then per tensor:
// name length u16 + UTF-8 name + rank u8 + extents u32 each + row-major
// 64-bit little-endian floats.
struct NamedTensorData {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

void write_checkpoint(const std::string& path,
                      const std::vector<NamedTensorData>& tensors);
std::vector<NamedTensorData> read_checkpoint(const std::string& path);
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path, const ModelConfig& cfg);

}  // namespace habnet
