#pragma once

#include <cstdint>
#include <vector>

#include "habnet/rng.hpp"
#include "habnet/tensor.hpp"

namespace habnet {

// Per-position validity flags for one sequence. Padded slots are 0.
using LevelMask = std::vector<std::uint8_t>;

enum class Activation { elu, tanh, sigmoid };
enum class Direction { forward, backward };

Tensor apply_activation(Tape& tp, const Tensor& x, Activation a);

// Variance-preserving uniform init in [-sqrt(6/(fan_in+fan_out)), +...].
Tensor glorot_matrix(std::size_t rows, std::size_t cols, Rng& rng);

// Replicate a [1 x d] row n times via multiplication with a constant ones
// column, so the gradient sums over rows without a dedicated op.
Tensor tile_rows(Tape& tp, const Tensor& row, std::size_t n);

// Trainable symbols of the multi-dimensional source2token score
// f(x) = W^T sigma(W1 x + b1) + b, one scalar per feature dimension.
struct Source2TokenParams {
  Tensor w1;  // [d_h x d_in]
  Tensor b1;  // [1 x d_h]
  Tensor w;   // [d_h x d_in]
  Tensor b;   // [1 x d_in]

  static Source2TokenParams init(std::size_t d_in, std::size_t d_h, Rng& rng);
};

struct Source2TokenOut {
  Tensor summary;  // [1 x d_in]
  Tensor weights;  // [T x d_in], per-dimension distributions over tokens
};

// Sequence-to-vector reduction: per-dimension softmax over token scores,
// output is the per-dimension weighted sum of the inputs.
Source2TokenOut source2token(Tape& tp, const Tensor& x, const LevelMask& mask,
                             const Source2TokenParams& p, Activation sigma);

// Directional multi-dimensional token2token attention with a sigmoid fusion
// gate. Dimension-preserving: output width equals input width.
struct DirectionalSanParams {
  Tensor wq;      // [d_in x d_in]
  Tensor wk;      // [d_in x d_in]
  Tensor b_attn;  // [1 x d_in]
  Tensor wf;      // [d_in x d_in]
  Tensor wx;      // [d_in x d_in]
  Tensor bf;      // [1 x d_in]
  double scale_c = 5.0;

  static DirectionalSanParams init(std::size_t d_in, Rng& rng);
};

// score(i,j) = c * tanh((Wq x_i + Wk x_j + b) / c), softmaxed over j per
// dimension. Forward masks j > i, backward masks j < i; self stays
// attendable so every valid position has support. Output at position i is
// G (.) x_i + (1-G) (.) s_i with G = sigmoid(Wf s_i + Wx x_i + bf).
// Padded rows come out exactly zero and receive zero attention.
Tensor directional_san(Tape& tp, const Tensor& x, Direction dir,
                       const LevelMask& mask, const DirectionalSanParams& p);

// Forward and backward passes concatenated on the feature axis: [T x 2 d_in].
Tensor bisan(Tape& tp, const Tensor& x, const LevelMask& mask,
             const DirectionalSanParams& fw, const DirectionalSanParams& bw);

std::size_t count_valid(const LevelMask& mask);

}  // namespace habnet
