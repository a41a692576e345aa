#include "habnet/attention.hpp"

#include <cmath>
#include <string>

namespace habnet {

std::size_t count_valid(const LevelMask& mask) {
  std::size_t n = 0;
  for (auto f : mask) n += f ? 1 : 0;
  return n;
}

namespace {

void check_sequence(const Tensor& x, const LevelMask& mask, const char* who) {
  if (x.rank() != 2) {
    throw ShapeError(std::string(who) + ": sequence must be [T x d], got " +
                     shape_str(x.shape()));
  }
  if (mask.size() != x.shape()[0]) {
    throw ShapeError(std::string(who) + ": mask length " +
                     std::to_string(mask.size()) + " vs T=" +
                     std::to_string(x.shape()[0]));
  }
  if (count_valid(mask) == 0) {
    throw DegenerateSliceError(std::string(who) + ": all positions masked");
  }
}

}  // namespace

Tensor apply_activation(Tape& tp, const Tensor& x, Activation a) {
  switch (a) {
    case Activation::elu:
      return tp.elu(x);
    case Activation::tanh:
      return tp.tanh(x);
    case Activation::sigmoid:
      return tp.sigmoid(x);
  }
  throw ConfigError("unknown activation");
}

Tensor glorot_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.uniform(-bound, bound);
  return Tensor::leaf({rows, cols}, std::move(v), true);
}

Tensor tile_rows(Tape& tp, const Tensor& row, std::size_t n) {
  return tp.matmul(Tensor::full({n, 1}, 1.0), row);
}

Source2TokenParams Source2TokenParams::init(std::size_t d_in, std::size_t d_h,
                                            Rng& rng) {
  Source2TokenParams p;
  p.w1 = glorot_matrix(d_h, d_in, rng);
  p.b1 = Tensor::zeros({1, d_h}, true);
  p.w = glorot_matrix(d_h, d_in, rng);
  p.b = Tensor::zeros({1, d_in}, true);
  return p;
}

Source2TokenOut source2token(Tape& tp, const Tensor& x, const LevelMask& mask,
                             const Source2TokenParams& p, Activation sigma) {
  check_sequence(x, mask, "source2token");
  const std::size_t t = x.shape()[0];
  Tensor hidden = apply_activation(
      tp, tp.add(tp.matmul(x, tp.transpose(p.w1)), tile_rows(tp, p.b1, t)),
      sigma);
  Tensor scores = tp.add(tp.matmul(hidden, p.w), tile_rows(tp, p.b, t));
  Tensor weights = tp.masked_softmax(scores, 0, Mask::column(mask));
  Tensor summary = tp.matmul(Tensor::full({1, t}, 1.0), tp.mul(weights, x));
  return {summary, weights};
}

DirectionalSanParams DirectionalSanParams::init(std::size_t d_in, Rng& rng) {
  DirectionalSanParams p;
  p.wq = glorot_matrix(d_in, d_in, rng);
  p.wk = glorot_matrix(d_in, d_in, rng);
  p.b_attn = Tensor::zeros({1, d_in}, true);
  p.wf = glorot_matrix(d_in, d_in, rng);
  p.wx = glorot_matrix(d_in, d_in, rng);
  p.bf = Tensor::zeros({1, d_in}, true);
  return p;
}

Tensor directional_san(Tape& tp, const Tensor& x, Direction dir,
                       const LevelMask& mask, const DirectionalSanParams& p) {
  check_sequence(x, mask, "directional_san");
  const std::size_t t = x.shape()[0];
  const std::size_t d = x.shape()[1];
  const double c = p.scale_c;

  Tensor queries = tp.matmul(x, tp.transpose(p.wq));
  Tensor keys = tp.matmul(x, tp.transpose(p.wk));
  Tensor wf_t = tp.transpose(p.wf);
  Tensor wx_t = tp.transpose(p.wx);
  Tensor ones_row = Tensor::full({1, t}, 1.0);
  Tensor ones_d = Tensor::full({1, d}, 1.0);

  std::vector<Tensor> rows;
  rows.reserve(t);
  for (std::size_t i = 0; i < t; ++i) {
    if (!mask[i]) {
      rows.push_back(Tensor::zeros({1, d}));
      continue;
    }
    Tensor qi = tp.slice_rows(queries, i, 1);
    Tensor affinity = tp.add(keys, tile_rows(tp, tp.add(qi, p.b_attn), t));
    Tensor score = tp.scale(tp.tanh(tp.scale(affinity, 1.0 / c)), c);

    LevelMask attendable(t, 0);
    for (std::size_t j = 0; j < t; ++j) {
      const bool in_dir = dir == Direction::forward ? j <= i : j >= i;
      attendable[j] = (mask[j] && in_dir) ? 1 : 0;
    }
    Tensor probs = tp.masked_softmax(score, 0, Mask::column(attendable));
    Tensor si = tp.matmul(ones_row, tp.mul(probs, x));

    Tensor xi = tp.slice_rows(x, i, 1);
    Tensor gate = tp.sigmoid(
        tp.add(tp.add(tp.matmul(si, wf_t), tp.matmul(xi, wx_t)), p.bf));
    Tensor anti_gate = tp.add(ones_d, tp.scale(gate, -1.0));
    rows.push_back(tp.add(tp.mul(gate, xi), tp.mul(anti_gate, si)));
  }
  return tp.concat_rows(rows);
}

Tensor bisan(Tape& tp, const Tensor& x, const LevelMask& mask,
             const DirectionalSanParams& fw, const DirectionalSanParams& bw) {
  Tensor f = directional_san(tp, x, Direction::forward, mask, fw);
  Tensor b = directional_san(tp, x, Direction::backward, mask, bw);
  return tp.concat_cols({f, b});
}

}  // namespace habnet
