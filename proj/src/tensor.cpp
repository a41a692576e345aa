#include "habnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

namespace habnet {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

namespace {

void check_finite(const char* op, const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw ValueError(std::string(op) + ": non-finite value produced");
    }
  }
}

std::vector<std::size_t> row_major_strides(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

// Trailing-1 rule: `from` stretches to `to` iff ranks match and, past some
// axis j, every extent of `from` is 1 while the leading extents agree.
bool trailing1_broadcastable(const Shape& from, const Shape& to) {
  if (from.size() != to.size()) return false;
  std::size_t j = from.size();
  while (j > 0 && from[j - 1] == 1 && to[j - 1] >= 1) --j;
  for (std::size_t i = 0; i < j; ++i) {
    if (from[i] != to[i]) return false;
  }
  return true;
}

}  // namespace

Mask Mask::ones(const Shape& s) {
  return Mask{s, std::vector<std::uint8_t>(shape_numel(s), 1)};
}

Mask Mask::column(const std::vector<std::uint8_t>& flags) {
  return Mask{{flags.size(), 1}, flags};
}

Mask Mask::vector(const std::vector<std::uint8_t>& flags) {
  return Mask{{flags.size()}, flags};
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::leaf(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("leaf: shape " + shape_str(shape) + " wants " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  check_finite("leaf", values);
  Tensor t;
  t.node_ = std::make_shared<Node>();
  t.node_->shape = std::move(shape);
  t.node_->value = std::move(values);
  t.node_->requires_grad = requires_grad;
  if (requires_grad) t.node_->grad.assign(t.node_->value.size(), 0.0);
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::size_t n = shape_numel(shape);
  return leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double v) {
  std::size_t n = shape_numel(shape);
  return leaf(std::move(shape), std::vector<double>(n, v), false);
}

Tensor Tensor::scalar(double v) { return leaf({1}, {v}, false); }

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->value.size(); }

std::size_t Tensor::rows() const {
  return rank() == 1 ? 1 : shape()[0];
}

std::size_t Tensor::cols() const {
  return rank() == 1 ? shape()[0] : shape()[1];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

std::vector<double>& Tensor::value() { return node_->value; }
const std::vector<double>& Tensor::value() const { return node_->value; }

std::vector<double>& Tensor::grad() {
  if (!node_->requires_grad) throw ContractError("grad: tensor has no grad");
  return node_->grad;
}

const std::vector<double>& Tensor::grad() const {
  if (!node_->requires_grad) throw ContractError("grad: tensor has no grad");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ContractError("item: tensor " + shape_str(shape()) + " is not scalar");
  }
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return node_->value[r * cols() + c];
}

// ---------------------------------------------------------------------------
// Tape

Tensor Tape::result(const char* op, Shape shape, std::vector<double> values,
                    bool requires_grad) {
  check_finite(op, values);
  Tensor t;
  t.node_ = std::make_shared<Tensor::Node>();
  t.node_->shape = std::move(shape);
  t.node_->value = std::move(values);
  t.node_->requires_grad = requires_grad;
  if (requires_grad) t.node_->grad.assign(t.node_->value.size(), 0.0);
  return t;
}

void Tape::record(const char* op,
                  std::vector<std::shared_ptr<Tensor::Node>> in,
                  const Tensor& out, std::function<void()> back) {
  if (!out.requires_grad()) return;
  steps_.push_back(Step{op, std::move(in), out.node_, std::move(back)});
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n, 0.0);
  const auto& av = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) {
        out[i * n + j] += aip * bv[p * n + j];
      }
    }
  }
  bool rg = a.requires_grad() || b.requires_grad();
  Tensor c = result("matmul", {m, n}, std::move(out), rg);
  auto an = a.node_, bn = b.node_, cn = c.node_;
  record("matmul", {an, bn}, c, [an, bn, cn, m, k, n]() {
    const auto& g = cn->grad;
    if (an->requires_grad) {
      auto& ga = an->grad;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = g[i * n + j];
          for (std::size_t p = 0; p < k; ++p)
            ga[i * k + p] += gij * bn->value[p * n + j];
        }
    }
    if (bn->requires_grad) {
      auto& gb = bn->grad;
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t i = 0; i < m; ++i) {
          const double aip = an->value[i * k + p];
          for (std::size_t j = 0; j < n; ++j)
            gb[p * n + j] += aip * g[i * n + j];
        }
    }
  });
  return c;
}

Tensor Tape::transpose(const Tensor& a) {
  if (a.rank() != 2) {
    throw ShapeError("transpose: rank-2 tensor required, got " +
                     shape_str(a.shape()));
  }
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.value()[i * c + j];
  Tensor t = result("transpose", {c, r}, std::move(out), a.requires_grad());
  auto an = a.node_, tn = t.node_;
  record("transpose", {an}, t, [an, tn, r, c]() {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j)
        an->grad[i * c + j] += tn->grad[j * r + i];
  });
  return t;
}

// kind: 0 = add, 1 = mul
Tensor Tape::binary_pointwise(const char* op, const Tensor& a, const Tensor& b,
                              double (*fwd)(double, double), int kind) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  Shape sout;
  if (sa == sb) {
    sout = sa;
  } else if (trailing1_broadcastable(sb, sa)) {
    sout = sa;
  } else if (trailing1_broadcastable(sa, sb)) {
    sout = sb;
  } else {
    throw ShapeError(std::string(op) + ": incompatible shapes " +
                     shape_str(sa) + " and " + shape_str(sb));
  }

  const auto ost = row_major_strides(sout);
  auto operand_strides = [&](const Shape& s) {
    auto st = row_major_strides(s);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] == 1 && sout[i] != 1) st[i] = 0;
    return st;
  };
  const auto ast = operand_strides(sa);
  const auto bst = operand_strides(sb);
  const std::size_t n = shape_numel(sout);

  // Everything below is captured by value: the backward rule runs after these
  // locals are gone.
  auto map_index = [ost, sout = sout](std::size_t lin,
                                      const std::vector<std::size_t>& st) {
    std::size_t idx = 0;
    for (std::size_t d = 0; d < sout.size(); ++d) {
      idx += (lin / ost[d]) % sout[d] * st[d];
    }
    return idx;
  };

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = fwd(a.value()[map_index(i, ast)], b.value()[map_index(i, bst)]);
  }
  bool rg = a.requires_grad() || b.requires_grad();
  Tensor c = result(op, sout, std::move(out), rg);
  auto an = a.node_, bn = b.node_, cn = c.node_;
  record(op, {an, bn}, c, [an, bn, cn, map_index, ast, bst, n, kind]() {
    for (std::size_t i = 0; i < n; ++i) {
      const double g = cn->grad[i];
      const std::size_t ia = map_index(i, ast);
      const std::size_t ib = map_index(i, bst);
      if (kind == 0) {
        if (an->requires_grad) an->grad[ia] += g;
        if (bn->requires_grad) bn->grad[ib] += g;
      } else {
        if (an->requires_grad) an->grad[ia] += g * bn->value[ib];
        if (bn->requires_grad) bn->grad[ib] += g * an->value[ia];
      }
    }
  });
  return c;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  return binary_pointwise(
      "add", a, b, [](double x, double y) { return x + y; }, 0);
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  return binary_pointwise(
      "mul", a, b, [](double x, double y) { return x * y; }, 1);
}

Tensor Tape::unary_pointwise(const char* op, const Tensor& a,
                             double (*fwd)(double),
                             double (*dfdx)(double, double)) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.value()[i]);
  Tensor c = result(op, a.shape(), std::move(out), a.requires_grad());
  auto an = a.node_, cn = c.node_;
  record(op, {an}, c, [an, cn, dfdx]() {
    for (std::size_t i = 0; i < an->grad.size(); ++i) {
      an->grad[i] += cn->grad[i] * dfdx(an->value[i], cn->value[i]);
    }
  });
  return c;
}

Tensor Tape::tanh(const Tensor& a) {
  return unary_pointwise(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor Tape::sigmoid(const Tensor& a) {
  return unary_pointwise(
      "sigmoid", a,
      [](double x) {
        // Branch keeps exp() off the overflowing side.
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                        : std::exp(x) / (1.0 + std::exp(x));
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor Tape::elu(const Tensor& a) {
  return unary_pointwise(
      "elu", a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : std::exp(x); });
}

Tensor Tape::scale(const Tensor& a, double c) {
  if (!std::isfinite(c)) throw ValueError("scale: non-finite factor");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * a.value()[i];
  Tensor t = result("scale", a.shape(), std::move(out), a.requires_grad());
  auto an = a.node_, tn = t.node_;
  record("scale", {an}, t, [an, tn, c]() {
    for (std::size_t i = 0; i < an->grad.size(); ++i)
      an->grad[i] += c * tn->grad[i];
  });
  return t;
}

Tensor Tape::concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const std::size_t rank = parts.front().rank();
  if (rank != 1 && rank != 2) {
    throw ShapeError("concat_cols: rank-1 or rank-2 operands required");
  }
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    if (p.rank() != rank || p.rows() != rows) {
      throw ShapeError("concat_cols: operand " + shape_str(p.shape()) +
                       " disagrees with " + shape_str(parts.front().shape()) +
                       " on leading axes");
    }
    cols += p.cols();
    rg = rg || p.requires_grad();
  }
  std::vector<double> out(rows * cols);
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    const std::size_t pc = p.cols();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < pc; ++j)
        out[r * cols + off + j] = p.value()[r * pc + j];
    off += pc;
  }
  Shape sout = rank == 1 ? Shape{cols} : Shape{rows, cols};
  Tensor c = result("concat_cols", std::move(sout), std::move(out), rg);
  std::vector<std::shared_ptr<Tensor::Node>> ins;
  for (const Tensor& p : parts) ins.push_back(p.node_);
  auto cn = c.node_;
  record("concat_cols", ins, c, [ins, cn, rows, cols]() {
    std::size_t off = 0;
    for (const auto& pn : ins) {
      const std::size_t pc =
          pn->shape.size() == 1 ? pn->shape[0] : pn->shape[1];
      if (pn->requires_grad) {
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < pc; ++j)
            pn->grad[r * pc + j] += cn->grad[r * cols + off + j];
      }
      off += pc;
    }
  });
  return c;
}

Tensor Tape::concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.cols() != cols) {
      throw ShapeError("concat_rows: operand " + shape_str(p.shape()) +
                       " disagrees on column count");
    }
    rows += p.rows();
    rg = rg || p.requires_grad();
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const Tensor& p : parts)
    out.insert(out.end(), p.value().begin(), p.value().end());
  Tensor c = result("concat_rows", {rows, cols}, std::move(out), rg);
  std::vector<std::shared_ptr<Tensor::Node>> ins;
  for (const Tensor& p : parts) ins.push_back(p.node_);
  auto cn = c.node_;
  record("concat_rows", ins, c, [ins, cn]() {
    std::size_t off = 0;
    for (const auto& pn : ins) {
      if (pn->requires_grad) {
        for (std::size_t i = 0; i < pn->grad.size(); ++i)
          pn->grad[i] += cn->grad[off + i];
      }
      off += pn->value.size();
    }
  });
  return c;
}

Tensor Tape::slice_rows(const Tensor& a, std::size_t begin, std::size_t count) {
  if (a.rank() != 2) {
    throw ShapeError("slice_rows: rank-2 tensor required");
  }
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  if (begin + count > r) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") exceeds " +
                     shape_str(a.shape()));
  }
  std::vector<double> out(a.value().begin() + begin * c,
                          a.value().begin() + (begin + count) * c);
  Tensor t = result("slice_rows", {count, c}, std::move(out), a.requires_grad());
  auto an = a.node_, tn = t.node_;
  record("slice_rows", {an}, t, [an, tn, begin, c, count]() {
    for (std::size_t i = 0; i < count * c; ++i)
      an->grad[begin * c + i] += tn->grad[i];
  });
  return t;
}

Tensor Tape::reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: " + shape_str(a.shape()) + " to " +
                     shape_str(shape) + " changes element count");
  }
  Tensor t = result("reshape", std::move(shape), a.value(), a.requires_grad());
  auto an = a.node_, tn = t.node_;
  record("reshape", {an}, t, [an, tn]() {
    for (std::size_t i = 0; i < an->grad.size(); ++i)
      an->grad[i] += tn->grad[i];
  });
  return t;
}

Tensor Tape::masked_softmax(const Tensor& a, std::size_t axis,
                            const Mask& mask) {
  if (a.rank() > 2 || axis >= a.rank()) {
    throw ShapeError("masked_softmax: rank-1/2 tensor with valid axis required");
  }
  // Materialise the mask at full shape via the trailing-1 rule.
  std::vector<std::uint8_t> m(a.numel());
  if (mask.shape == a.shape()) {
    m = mask.on;
  } else if (trailing1_broadcastable(mask.shape, a.shape())) {
    const auto ost = row_major_strides(a.shape());
    auto mst = row_major_strides(mask.shape);
    for (std::size_t i = 0; i < mask.shape.size(); ++i)
      if (mask.shape[i] == 1 && a.shape()[i] != 1) mst[i] = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
      std::size_t idx = 0;
      for (std::size_t d = 0; d < a.rank(); ++d)
        idx += (i / ost[d]) % a.shape()[d] * mst[d];
      m[i] = mask.on[idx];
    }
  } else {
    throw ShapeError("masked_softmax: mask " + shape_str(mask.shape) +
                     " not broadcastable to " + shape_str(a.shape()));
  }

  // Slice geometry: iterate `lanes` slices of `len` entries spaced `stride`.
  std::size_t len, stride, lanes, lane_step;
  if (a.rank() == 1) {
    len = a.shape()[0], stride = 1, lanes = 1, lane_step = 0;
  } else if (axis == 0) {
    len = a.shape()[0], stride = a.shape()[1], lanes = a.shape()[1],
    lane_step = 1;
  } else {
    len = a.shape()[1], stride = 1, lanes = a.shape()[0],
    lane_step = a.shape()[1];
  }
  auto lane_base = [lane_step](std::size_t lane) { return lane * lane_step; };

  std::vector<double> out(a.numel(), 0.0);
  for (std::size_t lane = 0; lane < lanes; ++lane) {
    const std::size_t base = lane_base(lane);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t idx = base + i * stride;
      if (m[idx]) mx = std::max(mx, a.value()[idx]);
    }
    if (!std::isfinite(mx)) {
      throw DegenerateSliceError(
          "masked_softmax: fully masked slice " + std::to_string(lane) +
          " along axis " + std::to_string(axis));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t idx = base + i * stride;
      if (m[idx]) {
        out[idx] = std::exp(a.value()[idx] - mx);
        sum += out[idx];
      }
    }
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t idx = base + i * stride;
      if (m[idx]) out[idx] /= sum;
    }
  }
  Tensor y = result("masked_softmax", a.shape(), std::move(out),
                    a.requires_grad());
  auto an = a.node_, yn = y.node_;
  record("masked_softmax", {an}, y,
         [an, yn, m, len, stride, lanes, lane_base]() {
           for (std::size_t lane = 0; lane < lanes; ++lane) {
             const std::size_t base = lane_base(lane);
             double dot = 0.0;
             for (std::size_t i = 0; i < len; ++i) {
               const std::size_t idx = base + i * stride;
               if (m[idx]) dot += yn->grad[idx] * yn->value[idx];
             }
             for (std::size_t i = 0; i < len; ++i) {
               const std::size_t idx = base + i * stride;
               if (m[idx])
                 an->grad[idx] += yn->value[idx] * (yn->grad[idx] - dot);
             }
           }
         });
  return y;
}

Tensor Tape::cross_entropy(const Tensor& logits,
                           const std::vector<int>& labels) {
  if (logits.rank() != 2) {
    throw ShapeError("cross_entropy: logits must be [batch x classes], got " +
                     shape_str(logits.shape()));
  }
  const std::size_t b = logits.shape()[0], nc = logits.shape()[1];
  if (labels.size() != b) {
    throw ShapeError("cross_entropy: " + std::to_string(b) +
                     " rows vs " + std::to_string(labels.size()) + " labels");
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= nc) {
      throw ValueError("cross_entropy: label " + std::to_string(l) +
                       " outside [0, " + std::to_string(nc) + ")");
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const double* row = logits.value().data() + i * nc;
    double mx = row[0];
    for (std::size_t c = 1; c < nc; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < nc; ++c) sum += std::exp(row[c] - mx);
    total += std::log(sum) + mx - row[labels[i]];
  }
  Tensor loss = result("cross_entropy", {1}, {total / static_cast<double>(b)},
                       logits.requires_grad());
  auto ln = logits.node_, on = loss.node_;
  record("cross_entropy", {ln}, loss, [ln, on, labels, b, nc]() {
    const double g = on->grad[0] / static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i) {
      const double* row = ln->value.data() + i * nc;
      double mx = row[0];
      for (std::size_t c = 1; c < nc; ++c) mx = std::max(mx, row[c]);
      double sum = 0.0;
      for (std::size_t c = 0; c < nc; ++c) sum += std::exp(row[c] - mx);
      for (std::size_t c = 0; c < nc; ++c) {
        const double p = std::exp(row[c] - mx) / sum;
        const double ind = c == static_cast<std::size_t>(labels[i]) ? 1.0 : 0.0;
        ln->grad[i * nc + c] += g * (p - ind);
      }
    }
  });
  return loss;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward: loss must be a defined scalar tensor");
  }
  if (!loss.requires_grad()) return;  // nothing trainable reaches the loss
  loss.node_->grad[0] += 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
    it->back();
  }
}

}  // namespace habnet
