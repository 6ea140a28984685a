// Copyright 2026 The XSumForge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense float64 tensors with a reverse-mode tape. Only the operators the
// convolutional summarizer needs are provided, for rank-1 and rank-2
// tensors.
//
// A Tensor is a shared handle: copies alias the same buffers. Parameters
// are leaves created with requires_grad; their gradients accumulate across
// tapes until zero_grad(). Every op takes the Tape it records onto; a
// non-recording tape (Tape::inference()) yields constant results.

#ifndef XSUMFORGE_DIFFCORE_H_
#define XSUMFORGE_DIFFCORE_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "xsumforge/common.h"

namespace xsf {

using Shape = std::vector<int64_t>;

int64_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(s_); }
  const Shape& shape() const { return s_->shape; }
  int rank() const { return static_cast<int>(s_->shape.size()); }
  int64_t dim(int i) const;
  int64_t size() const { return static_cast<int64_t>(s_->value.size()); }
  bool requires_grad() const { return s_->requires_grad; }

  std::span<const double> values() const { return s_->value; }
  std::span<double> mutable_values() { return s_->value; }
  double operator[](int64_t i) const { return s_->value[i]; }
  double at(int64_t row, int64_t col) const;
  double item() const;

  bool has_grad() const { return !s_->grad.empty(); }
  // Zero-filled on first access. Handles share storage, so this is const.
  std::span<double> grad() const;
  void zero_grad();

  // Deep copy with the same requires_grad flag and no gradient.
  Tensor clone() const;
  bool same(const Tensor& other) const { return s_ == other.s_; }

 private:
  struct Storage {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> s_;
};

class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  static Tape inference() { return Tape(false); }

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  bool recording() const { return recording_; }
  size_t size() const { return nodes_.size(); }

  // True if any input needs a gradient and this tape records.
  bool tracks(std::initializer_list<const Tensor*> inputs) const;

  // Appends a node producing `output`. backward_fn reads output.grad() and
  // accumulates into its inputs' grads.
  void record(const Tensor& output, std::vector<Tensor> inputs,
              std::function<void()> backward_fn);

  // Seeds d(loss)/d(loss) = 1 and runs every node at or before the node
  // producing `loss` exactly once, newest first. Throws kDetachedTensor when
  // loss was not produced on this tape, kShapeMismatch for non-scalars.
  void backward(const Tensor& loss);

 private:
  struct Node {
    Tensor output;
    std::vector<Tensor> inputs;
    std::function<void()> backward_fn;
  };
  bool recording_;
  std::vector<Node> nodes_;
};

enum class PadMode { kSymmetric, kCausal };
enum class NormAxis { kRows, kCols };

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double factor);
// Elementwise product with a constant (non-differentiated) tensor.
Tensor mul_const(Tape& tape, const Tensor& a, const Tensor& constant);
Tensor sum(Tape& tape, const Tensor& a);

// Rows of table[V, f] selected by ids -> [m, f]. kIndexOutOfVocab.
Tensor embedding(Tape& tape, const Tensor& table, std::span<const int> ids);

Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b);
Tensor concat_rows(Tape& tape, const std::vector<Tensor>& parts);

// x[.., a] * W[a, b] + bias[b]. x may be rank 1 or 2.
Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b);

// a[n, p] * b[p, q]
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
// a[n, p] * b[q, p]^T
Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b);

// 1-D convolution over the rows of x[m, c] with w[o, k*c] (tap-major:
// column j*c + ch multiplies input row i+j-offset, channel ch) and bias[o].
// Symmetric mode pads k-1 zero rows on each side and center-crops the
// m+k-1 raw outputs (floor((k-1)/2) dropped on the left); causal mode pads
// k-1 rows on the left so output i depends on inputs <= i only.
Tensor conv1d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b,
              PadMode mode);

// [A; B] -> A * sigmoid(B) over the last dimension. kOddWidth.
Tensor glu(Tape& tape, const Tensor& y);

Tensor softmax_rows(Tape& tape, const Tensor& x);

// Normalizes each row to zero mean and unit variance (no affine terms).
Tensor layer_norm(Tape& tape, const Tensor& x, double eps = 1e-5);

// Inverted dropout. Identity when !training or p == 0.
Tensor dropout(Tape& tape, const Tensor& x, double p, bool training, Rng& rng);

// g * v / ||v|| with one norm per row (kRows, g has v.dim(0) entries) or
// per column (kCols, g has v.dim(1) entries).
Tensor weight_norm(Tape& tape, const Tensor& v, const Tensor& g, NormAxis axis);

struct XentResult {
  Tensor loss;   // scalar: mean NLL over unmasked rows
  Tensor probs;  // [n, T], constant
  int64_t counted = 0;
};

// pad_mask[i] == true excludes row i from the loss. kIndexOutOfVocab for
// targets outside [0, T); kInvalidArgument when every row is masked.
XentResult softmax_xent(Tape& tape, const Tensor& logits,
                        std::span<const int> targets,
                        const std::vector<bool>& pad_mask);

}  // namespace xsf

#endif  // XSUMFORGE_DIFFCORE_H_
