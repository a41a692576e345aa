#include "habnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace habnet {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::v1: return "V1";
    case Variant::v2: return "V2";
    case Variant::v3: return "V3";
  }
  throw ConfigError("unknown variant");
}

Variant variant_from_name(const std::string& name) {
  if (name == "full") return Variant::full;
  if (name == "V1" || name == "v1") return Variant::v1;
  if (name == "V2" || name == "v2") return Variant::v2;
  if (name == "V3" || name == "v3") return Variant::v3;
  throw ConfigError("unknown variant '" + name + "'");
}

std::string task_name(Task t) {
  return t == Task::decision ? "decision" : "rating";
}

Task task_from_name(const std::string& name) {
  if (name == "decision") return Task::decision;
  if (name == "rating") return Task::rating;
  throw ConfigError("unknown task '" + name + "'");
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::elu: return "elu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  throw ConfigError("unknown activation");
}

Activation activation_from_name(const std::string& name) {
  if (name == "elu") return Activation::elu;
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  throw ConfigError("unknown activation '" + name + "'");
}

void ModelConfig::validate() const {
  if (d_e < 1 || max_words < 1 || max_sentences < 1 || max_reviews < 1) {
    throw ConfigError("d_e, L, N, M must all be at least 1");
  }
  if (variant == Variant::full && gru_hidden != 0 && gru_hidden != 2 * d_e) {
    throw ConfigError("full variant requires gru_hidden = 2*d_e = " +
                      std::to_string(2 * d_e) + ", got " +
                      std::to_string(gru_hidden));
  }
  if (gru_hidden_width() < 1) throw ConfigError("gru hidden width must be >= 1");
}

std::size_t ModelConfig::sentence_width() const {
  return variant == Variant::v2 ? d_e : 2 * d_e;
}

std::size_t ModelConfig::review_width() const {
  return variant == Variant::v3 ? sentence_width() : 2 * sentence_width();
}

std::size_t ModelConfig::gru_hidden_width() const {
  // Default keeps the Bi-GRU output width equal to its input width, the only
  // choice consistent with the inter-level attention shape bookkeeping.
  return gru_hidden != 0 ? gru_hidden : review_width() / 2;
}

std::size_t ModelConfig::paper_width() const {
  if (variant == Variant::v1) return review_width();
  return 4 * gru_hidden_width();
}

std::string ModelConfig::to_json() const {
  nlohmann::json j;
  j["d_e"] = d_e;
  j["L"] = max_words;
  j["N"] = max_sentences;
  j["M"] = max_reviews;
  j["variant"] = variant_name(variant);
  j["task"] = task_name(task);
  j["gru_hidden"] = gru_hidden;
  j["d_h"] = d_h;
  j["attn_sigma"] = activation_name(attn_sigma);
  return j.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  ModelConfig cfg;
  if (j.contains("d_e")) cfg.d_e = j["d_e"].get<std::size_t>();
  if (j.contains("L")) cfg.max_words = j["L"].get<std::size_t>();
  if (j.contains("N")) cfg.max_sentences = j["N"].get<std::size_t>();
  if (j.contains("M")) cfg.max_reviews = j["M"].get<std::size_t>();
  if (j.contains("variant"))
    cfg.variant = variant_from_name(j["variant"].get<std::string>());
  if (j.contains("task")) cfg.task = task_from_name(j["task"].get<std::string>());
  if (j.contains("gru_hidden")) cfg.gru_hidden = j["gru_hidden"].get<std::size_t>();
  if (j.contains("d_h")) cfg.d_h = j["d_h"].get<std::size_t>();
  if (j.contains("attn_sigma"))
    cfg.attn_sigma = activation_from_name(j["attn_sigma"].get<std::string>());
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Parameters

void ModelParams::reg(const std::string& name, const Tensor& t) {
  for (const auto& [existing, _] : named_) {
    if (existing == name) throw ConfigError("duplicate parameter " + name);
  }
  named_.emplace_back(name, t);
}

void ModelParams::reg_bisan(const std::string& prefix, BiSanParams& p) {
  const std::pair<const char*, DirectionalSanParams*> dirs[] = {
      {"fw", &p.fw}, {"bw", &p.bw}};
  for (auto [dn, dp] : dirs) {
    const std::string base = prefix + "." + dn + ".";
    reg(base + "wq", dp->wq);
    reg(base + "wk", dp->wk);
    reg(base + "b_attn", dp->b_attn);
    reg(base + "wf", dp->wf);
    reg(base + "wx", dp->wx);
    reg(base + "bf", dp->bf);
  }
}

void ModelParams::reg_s2t(const std::string& prefix, Source2TokenParams& p) {
  reg(prefix + ".w1", p.w1);
  reg(prefix + ".b1", p.b1);
  reg(prefix + ".w", p.w);
  reg(prefix + ".b", p.b);
}

void ModelParams::reg_gru(const std::string& prefix, GruDirectionParams& p) {
  reg(prefix + ".wz", p.wz);
  reg(prefix + ".wr", p.wr);
  reg(prefix + ".wh", p.wh);
  reg(prefix + ".uz", p.uz);
  reg(prefix + ".ur", p.ur);
  reg(prefix + ".uh", p.uh);
  reg(prefix + ".bz", p.bz);
  reg(prefix + ".br", p.br);
  reg(prefix + ".bh", p.bh);
}

namespace {

GruDirectionParams init_gru_direction(std::size_t in, std::size_t hidden,
                                      Rng& rng) {
  GruDirectionParams p;
  p.wz = glorot_matrix(hidden, in, rng);
  p.wr = glorot_matrix(hidden, in, rng);
  p.wh = glorot_matrix(hidden, in, rng);
  p.uz = glorot_matrix(hidden, hidden, rng);
  p.ur = glorot_matrix(hidden, hidden, rng);
  p.uh = glorot_matrix(hidden, hidden, rng);
  p.bz = Tensor::zeros({1, hidden}, true);
  p.br = Tensor::zeros({1, hidden}, true);
  p.bh = Tensor::zeros({1, hidden}, true);
  return p;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ModelParams mp;

  auto dh = [&cfg](std::size_t d_in) {
    return cfg.d_h != 0 ? cfg.d_h : d_in;
  };

  if (cfg.variant != Variant::v2) {
    mp.sent_bisan = BiSanParams{DirectionalSanParams::init(cfg.d_e, rng),
                                DirectionalSanParams::init(cfg.d_e, rng)};
    mp.reg_bisan("sentence.bisan", *mp.sent_bisan);
    const std::size_t w = 2 * cfg.d_e;
    mp.sent_s2t = Source2TokenParams::init(w, dh(w), rng);
    mp.reg_s2t("sentence.s2t", *mp.sent_s2t);
  }
  if (cfg.variant != Variant::v3) {
    const std::size_t w = cfg.sentence_width();
    mp.intra_bisan = BiSanParams{DirectionalSanParams::init(w, rng),
                                 DirectionalSanParams::init(w, rng)};
    mp.reg_bisan("intra.bisan", *mp.intra_bisan);
    mp.intra_s2t = Source2TokenParams::init(2 * w, dh(2 * w), rng);
    mp.reg_s2t("intra.s2t", *mp.intra_s2t);
  }
  if (cfg.variant != Variant::v1) {
    const std::size_t in = cfg.review_width();
    const std::size_t hidden = cfg.gru_hidden_width();
    mp.gru = BiGruParams{init_gru_direction(in, hidden, rng),
                         init_gru_direction(in, hidden, rng)};
    mp.reg_gru("inter.gru.fw", mp.gru->fw);
    mp.reg_gru("inter.gru.bw", mp.gru->bw);
    const std::size_t w = 2 * hidden;
    mp.inter_bisan = BiSanParams{DirectionalSanParams::init(w, rng),
                                 DirectionalSanParams::init(w, rng)};
    mp.reg_bisan("inter.bisan", *mp.inter_bisan);
    mp.inter_s2t = Source2TokenParams::init(2 * w, dh(2 * w), rng);
    mp.reg_s2t("inter.s2t", *mp.inter_s2t);
  }
  mp.decision_w = glorot_matrix(2, cfg.paper_width(), rng);
  mp.decision_b = Tensor::zeros({1, 2}, true);
  mp.reg("head.decision.w", mp.decision_w);
  mp.reg("head.decision.b", mp.decision_b);
  mp.rating_w = glorot_matrix(10, cfg.review_width(), rng);
  mp.rating_b = Tensor::zeros({1, 10}, true);
  mp.reg("head.rating.w", mp.rating_w);
  mp.reg("head.rating.b", mp.rating_b);
  return mp;
}

Tensor ModelParams::find(const std::string& name) const {
  for (const auto& [n, t] : named_) {
    if (n == name) return t;
  }
  throw ConfigError("unknown parameter " + name);
}

void ModelParams::zero_grads() {
  for (auto& [_, t] : named_) t.zero_grad();
}

// ---------------------------------------------------------------------------
// Encoders

namespace {

TraceMat trace_of(const Tensor& t) {
  return TraceMat{t.rows(), t.cols(), t.value()};
}

// Mask-aware mean over valid rows as a single constant-weight matmul.
Tensor masked_mean(Tape& tp, const Tensor& x, const LevelMask& mask) {
  const std::size_t n = count_valid(mask);
  if (n == 0) throw DegenerateSliceError("masked mean: no valid rows");
  std::vector<double> w(mask.size(), 0.0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) w[i] = 1.0 / static_cast<double>(n);
  }
  return tp.matmul(Tensor::leaf({1, mask.size()}, std::move(w)), x);
}

// One GRU direction over a padded sequence. Masked steps carry the hidden
// state through unchanged and emit a zero row, keeping padding inert.
Tensor gru_scan(Tape& tp, const GruDirectionParams& p, const Tensor& seq,
                const LevelMask& mask, bool reverse) {
  const std::size_t t_count = seq.shape()[0];
  const std::size_t hidden = p.uz.shape()[0];
  Tensor wz_t = tp.transpose(p.wz);
  Tensor wr_t = tp.transpose(p.wr);
  Tensor wh_t = tp.transpose(p.wh);
  Tensor uz_t = tp.transpose(p.uz);
  Tensor ur_t = tp.transpose(p.ur);
  Tensor uh_t = tp.transpose(p.uh);
  Tensor ones = Tensor::full({1, hidden}, 1.0);

  Tensor h = Tensor::zeros({1, hidden});
  std::vector<Tensor> out(t_count);
  for (std::size_t step = 0; step < t_count; ++step) {
    const std::size_t i = reverse ? t_count - 1 - step : step;
    if (!mask[i]) {
      out[i] = Tensor::zeros({1, hidden});
      continue;
    }
    Tensor x = tp.slice_rows(seq, i, 1);
    Tensor z = tp.sigmoid(
        tp.add(tp.add(tp.matmul(x, wz_t), tp.matmul(h, uz_t)), p.bz));
    Tensor r = tp.sigmoid(
        tp.add(tp.add(tp.matmul(x, wr_t), tp.matmul(h, ur_t)), p.br));
    Tensor cand = tp.tanh(tp.add(
        tp.add(tp.matmul(x, wh_t), tp.matmul(tp.mul(r, h), uh_t)), p.bh));
    Tensor keep = tp.add(ones, tp.scale(z, -1.0));
    h = tp.add(tp.mul(keep, h), tp.mul(z, cand));
    out[i] = h;
  }
  return tp.concat_rows(out);
}

Tensor bigru(Tape& tp, const BiGruParams& p, const Tensor& seq,
             const LevelMask& mask) {
  Tensor fw = gru_scan(tp, p.fw, seq, mask, false);
  Tensor bw = gru_scan(tp, p.bw, seq, mask, true);
  return tp.concat_cols({fw, bw});
}

Tensor head_logits(Tape& tp, const Tensor& input, const Tensor& w,
                   const Tensor& b) {
  if (input.cols() != w.shape()[1]) {
    throw ShapeError("head: input width " + std::to_string(input.cols()) +
                     " does not match weight " + shape_str(w.shape()));
  }
  return tp.add(tp.matmul(input, tp.transpose(w)), b);
}

Tensor softmax_row(Tape& tp, const Tensor& logits) {
  return tp.masked_softmax(logits, 1, Mask::ones(logits.shape()));
}

}  // namespace

Tensor encode_sentence(Tape& tp, const ModelConfig& cfg,
                       const ModelParams& params, const Tensor& words,
                       const LevelMask& word_mask, TraceMat* we_out,
                       TraceMat* weights_out) {
  if (cfg.variant == Variant::v2) {
    return masked_mean(tp, words, word_mask);
  }
  Tensor we = bisan(tp, words, word_mask, params.sent_bisan->fw,
                    params.sent_bisan->bw);
  auto s2t = source2token(tp, we, word_mask, *params.sent_s2t, cfg.attn_sigma);
  if (we_out) *we_out = trace_of(we);
  if (weights_out) *weights_out = trace_of(s2t.weights);
  return s2t.summary;
}

Tensor encode_review(Tape& tp, const ModelConfig& cfg,
                     const ModelParams& params, const Tensor& sentences,
                     const LevelMask& sentence_mask, TraceMat* se_out,
                     TraceMat* weights_out) {
  if (cfg.variant == Variant::v3) {
    return masked_mean(tp, sentences, sentence_mask);
  }
  Tensor se = bisan(tp, sentences, sentence_mask, params.intra_bisan->fw,
                    params.intra_bisan->bw);
  auto s2t =
      source2token(tp, se, sentence_mask, *params.intra_s2t, cfg.attn_sigma);
  if (se_out) *se_out = trace_of(se);
  if (weights_out) *weights_out = trace_of(s2t.weights);
  return s2t.summary;
}

PaperEncoding encode_paper(Tape& tp, const ModelConfig& cfg,
                           const ModelParams& params, const Tensor& reviews,
                           const LevelMask& review_mask, TraceMat* re_out,
                           TraceMat* weights_out) {
  if (cfg.variant == Variant::v1) {
    return {masked_mean(tp, reviews, review_mask), Tensor{}};
  }
  Tensor recoded = bigru(tp, *params.gru, reviews, review_mask);
  Tensor re = bisan(tp, recoded, review_mask, params.inter_bisan->fw,
                    params.inter_bisan->bw);
  auto s2t =
      source2token(tp, re, review_mask, *params.inter_s2t, cfg.attn_sigma);
  if (re_out) *re_out = trace_of(re);
  if (weights_out) *weights_out = trace_of(s2t.weights);
  return {s2t.summary, re};
}

PaperOutputs forward_paper(Tape& tp, const ModelConfig& cfg,
                           const ModelParams& params,
                           const EmbeddingTable& table, const Batch& batch,
                           std::size_t item, ForwardTrace* trace) {
  if (table.dim != cfg.d_e) {
    throw ConfigError("embedding width " + std::to_string(table.dim) +
                      " does not match configured d_e " +
                      std::to_string(cfg.d_e));
  }
  const std::size_t m = batch.m, n = batch.n, l = batch.l;
  if (trace) {
    trace->word_weights.assign(m, std::vector<TraceMat>(n));
    trace->we.assign(m, std::vector<TraceMat>(n));
    trace->s.assign(m, TraceMat{});
    trace->sentence_weights.assign(m, TraceMat{});
    trace->se.assign(m, TraceMat{});
  }

  PaperOutputs out;
  std::vector<Tensor> review_rows(m);
  LevelMask review_mask(m, 0);
  for (std::size_t mi = 0; mi < m; ++mi) {
    review_mask[mi] = batch.review_valid(item, mi) ? 1 : 0;
    if (!review_mask[mi]) {
      review_rows[mi] = Tensor::zeros({1, cfg.review_width()});
      continue;
    }
    std::vector<Tensor> sentence_rows(n);
    LevelMask sentence_mask(n, 0);
    std::vector<TraceMat> s_rows(n);
    for (std::size_t ni = 0; ni < n; ++ni) {
      sentence_mask[ni] = batch.sentence_valid(item, mi, ni) ? 1 : 0;
      if (!sentence_mask[ni]) {
        sentence_rows[ni] = Tensor::zeros({1, cfg.sentence_width()});
        continue;
      }
      std::vector<double> rows(l * table.dim, 0.0);
      LevelMask word_mask(l, 0);
      for (std::size_t li = 0; li < l; ++li) {
        if (!batch.word_valid(item, mi, ni, li)) continue;
        word_mask[li] = 1;
        const double* src = table.row(batch.word_at(item, mi, ni, li));
        std::copy(src, src + table.dim, rows.begin() + li * table.dim);
      }
      Tensor words = Tensor::leaf({l, table.dim}, std::move(rows));
      sentence_rows[ni] = encode_sentence(
          tp, cfg, params, words, word_mask,
          trace ? &trace->we[mi][ni] : nullptr,
          trace ? &trace->word_weights[mi][ni] : nullptr);
    }
    Tensor stacked = tp.concat_rows(sentence_rows);
    if (trace) trace->s[mi] = trace_of(stacked);
    Tensor r = encode_review(tp, cfg, params, stacked, sentence_mask,
                             trace ? &trace->se[mi] : nullptr,
                             trace ? &trace->sentence_weights[mi] : nullptr);
    review_rows[mi] = r;
    out.review_slots.push_back(mi);
    out.review_encodings.push_back(r);
    out.rating_logits.push_back(
        head_logits(tp, r, params.rating_w, params.rating_b));
  }

  if (cfg.task == Task::decision) {
    Tensor stacked = tp.concat_rows(review_rows);
    if (trace) trace->r = trace_of(stacked);
    PaperEncoding enc =
        encode_paper(tp, cfg, params, stacked, review_mask,
                     trace ? &trace->re : nullptr,
                     trace ? &trace->review_weights : nullptr);
    out.decision_logits =
        head_logits(tp, enc.rs, params.decision_w, params.decision_b);
    if (trace) trace->rs = enc.rs.value();
  }
  return out;
}

Tensor predict_decision(Tape& tp, const ModelParams& params,
                        const Tensor& rs) {
  return softmax_row(tp,
                     head_logits(tp, rs, params.decision_w, params.decision_b));
}

Tensor predict_rating(Tape& tp, const ModelParams& params, const Tensor& r_i) {
  return softmax_row(tp,
                     head_logits(tp, r_i, params.rating_w, params.rating_b));
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'H', 'A', 'B', 'N', 'E', 'T', '0', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) {
    if (pos + n > buf.size()) {
      throw FormatError(std::string("checkpoint truncated reading ") + what);
    }
  }
  std::uint16_t u16() {
    need(2, "u16");
    std::uint16_t v = static_cast<std::uint8_t>(buf[pos]) |
                      (static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf[pos + 1])) << 8);
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint8_t u8() {
    need(1, "u8");
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  double f64() {
    need(8, "f64");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos + i])) << (8 * i);
    pos += 8;
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void write_checkpoint(const std::string& path,
                      const std::vector<NamedTensorData>& tensors) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_u16(out, static_cast<std::uint16_t>(t.name.size()));
    out.append(t.name);
    out.push_back(static_cast<char>(t.shape.size()));
    for (std::size_t e : t.shape) put_u32(out, static_cast<std::uint32_t>(e));
    for (double v : t.values) put_f64(out, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot write checkpoint " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f.good()) throw FormatError("short write on checkpoint " + path);
}

std::vector<NamedTensorData> read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  const std::string buf = ss.str();

  Reader r{buf};
  const std::string magic = r.bytes(sizeof(kMagic), "magic");
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("checkpoint magic mismatch in " + path);
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  std::vector<NamedTensorData> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensorData t;
    const std::uint16_t name_len = r.u16();
    t.name = r.bytes(name_len, "name");
    const std::uint8_t rank = r.u8();
    std::size_t numel = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      t.shape.push_back(r.u32());
      numel *= t.shape.back();
    }
    t.values.resize(numel);
    for (std::size_t v = 0; v < numel; ++v) t.values[v] = r.f64();
    out.push_back(std::move(t));
  }
  if (r.pos != buf.size()) {
    throw FormatError("trailing bytes in checkpoint " + path);
  }
  return out;
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::vector<NamedTensorData> tensors;
  for (const auto& [name, t] : params.named()) {
    tensors.push_back(NamedTensorData{name, t.shape(), t.value()});
  }
  write_checkpoint(path, tensors);
}

ModelParams load_checkpoint(const std::string& path, const ModelConfig& cfg) {
  const auto tensors = read_checkpoint(path);
  ModelParams params = ModelParams::init(cfg, 0);
  if (tensors.size() != params.named().size()) {
    throw FormatError("checkpoint holds " + std::to_string(tensors.size()) +
                      " tensors, config wants " +
                      std::to_string(params.named().size()));
  }
  std::map<std::string, const NamedTensorData*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t;
  for (const auto& [name, tensor] : params.named()) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw FormatError("checkpoint lacks parameter " + name);
    }
    if (it->second->shape != tensor.shape()) {
      throw FormatError("checkpoint parameter " + name + " has shape " +
                        shape_str(it->second->shape) + ", config wants " +
                        shape_str(tensor.shape()));
    }
    for (double v : it->second->values) {
      if (!std::isfinite(v)) {
        throw FormatError("checkpoint parameter " + name +
                          " holds non-finite values");
      }
    }
    Tensor handle = tensor;  // shares the node
    handle.value() = it->second->values;
  }
  return params;
}

}  // namespace habnet
