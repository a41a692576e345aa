#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "habnet/errors.hpp"

namespace habnet {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

// Boolean validity mask, broadcastable to a tensor by the trailing-1 rule.
struct Mask {
  Shape shape;
  std::vector<std::uint8_t> on;

  static Mask ones(const Shape& s);
  // Column mask [n x 1] from per-position flags, for masking matrix rows.
  static Mask column(const std::vector<std::uint8_t>& flags);
  static Mask vector(const std::vector<std::uint8_t>& flags);
};

// Dense 64-bit tensor participating in a reverse-mode graph. A Tensor is a
// cheap handle; the payload lives on a shared node that the recording tape
// also references, so intermediates stay alive for the backward pass.
class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  // 2-D helpers; rank-1 tensors read as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  bool requires_grad() const;
  std::vector<double>& value();
  const std::vector<double>& value() const;
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  void zero_grad();

  double item() const;  // scalar tensors only
  double at(std::size_t r, std::size_t c) const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  friend class Tape;

  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // sized iff requires_grad
    bool requires_grad = false;
  };

  std::shared_ptr<Node> node_;
};

// Define-by-run gradient tape. Operations compute forward immediately and
// record a backward rule; backward() replays the rules once, in reverse
// recording order (which is topological by construction). A tape and its
// tensors are confined to one thread; independent tapes may run concurrently.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // -- linear algebra ------------------------------------------------------
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor transpose(const Tensor& a);

  // -- pointwise (shapes equal, or trailing-1 broadcast on one operand) -----
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor tanh(const Tensor& a);
  Tensor sigmoid(const Tensor& a);
  Tensor elu(const Tensor& a);
  Tensor scale(const Tensor& a, double c);

  // -- structure -----------------------------------------------------------
  Tensor concat_cols(const std::vector<Tensor>& parts);  // last axis
  Tensor concat_rows(const std::vector<Tensor>& parts);  // first axis, 2-D
  Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count);
  Tensor reshape(const Tensor& a, Shape shape);  // same element count

  // -- reductions / classification ------------------------------------------
  // Softmax along `axis` over unmasked entries only. Masked positions get
  // weight exactly 0. A slice with no unmasked entry throws.
  Tensor masked_softmax(const Tensor& a, std::size_t axis, const Mask& mask);
  // Mean over rows of -log softmax(logits)[label], log-sum-exp stabilised.
  Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

  // Seeds d(loss)/d(loss) = 1 and replays recorded rules in reverse. Every
  // requires_grad tensor reachable from `loss` accumulates its gradient.
  void backward(const Tensor& loss);

  std::size_t recorded_ops() const { return steps_.size(); }

 private:
  struct Step {
    const char* op;
    std::vector<std::shared_ptr<Tensor::Node>> inputs;
    std::shared_ptr<Tensor::Node> output;
    std::function<void()> back;
  };

  Tensor result(const char* op, Shape shape, std::vector<double> values,
                bool requires_grad);
  void record(const char* op, std::vector<std::shared_ptr<Tensor::Node>> in,
              const Tensor& out, std::function<void()> back);
  Tensor binary_pointwise(const char* op, const Tensor& a, const Tensor& b,
                          double (*fwd)(double, double), int kind);
  Tensor unary_pointwise(const char* op, const Tensor& a,
                         double (*fwd)(double), double (*dfdx)(double, double));

  std::vector<Step> steps_;
};

}  // namespace habnet
