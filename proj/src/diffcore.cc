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

#include "xsumforge/diffcore.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

namespace xsf {

namespace {

[[noreturn]] void shape_error(const std::string& op, const std::string& msg) {
  throw Error(ErrorCode::kShapeMismatch, op + ": " + msg);
}

int64_t rows_of(const Tensor& t) {
  return t.rank() == 1 ? 1 : t.shape()[0];
}

int64_t cols_of(const Tensor& t) { return t.shape().back(); }

void require_rank(const std::string& op, const Tensor& t, int lo, int hi) {
  if (!t.defined()) shape_error(op, "undefined tensor");
  if (t.rank() < lo || t.rank() > hi) {
    shape_error(op, "unsupported rank " + shape_string(t.shape()));
  }
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

int64_t shape_size(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

// --- Tensor --------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  for (int64_t d : shape) {
    if (d < 0) shape_error("zeros", "negative dimension");
  }
  Tensor t;
  t.s_ = std::make_shared<Storage>();
  t.s_->value.assign(static_cast<size_t>(shape_size(shape)), 0.0);
  t.s_->shape = std::move(shape);
  t.s_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  if (static_cast<int64_t>(values.size()) != shape_size(shape)) {
    shape_error("from", "value count does not match " + shape_string(shape));
  }
  Tensor t;
  t.s_ = std::make_shared<Storage>();
  t.s_->shape = std::move(shape);
  t.s_->value = std::move(values);
  t.s_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

int64_t Tensor::dim(int i) const {
  if (i < 0) i += rank();
  return s_->shape.at(i);
}

double Tensor::at(int64_t row, int64_t col) const {
  return s_->value[row * s_->shape.back() + col];
}

double Tensor::item() const {
  if (size() != 1) shape_error("item", "tensor is not a scalar");
  return s_->value[0];
}

std::span<double> Tensor::grad() const {
  if (s_->grad.empty()) s_->grad.assign(s_->value.size(), 0.0);
  return s_->grad;
}

void Tensor::zero_grad() {
  std::fill(s_->grad.begin(), s_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  return from(s_->shape, s_->value, s_->requires_grad);
}

// --- Tape ----------------------------------------------------------------

bool Tape::tracks(std::initializer_list<const Tensor*> inputs) const {
  if (!recording_) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void Tape::record(const Tensor& output, std::vector<Tensor> inputs,
                  std::function<void()> backward_fn) {
  nodes_.push_back({output, std::move(inputs), std::move(backward_fn)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "backward needs a scalar loss");
  }
  ptrdiff_t start = -1;
  for (ptrdiff_t i = static_cast<ptrdiff_t>(nodes_.size()) - 1; i >= 0; --i) {
    if (nodes_[i].output.same(loss)) {
      start = i;
      break;
    }
  }
  if (start < 0) {
    throw Error(ErrorCode::kDetachedTensor,
                "loss was not produced on this tape");
  }
  Tensor seed = loss;
  seed.grad()[0] += 1.0;
  for (ptrdiff_t i = start; i >= 0; --i) {
    Node& node = nodes_[i];
    if (!node.output.has_grad()) continue;  // unreachable from loss
    node.backward_fn();
  }
}

// --- elementwise ---------------------------------------------------------

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    shape_error("add", shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  const bool track = tape.tracks({&a, &b});
  Tensor out = Tensor::zeros(a.shape(), track);
  auto o = out.mutable_values();
  for (int64_t i = 0; i < a.size(); ++i) o[i] = a[i] + b[i];
  if (track) {
    tape.record(out, {a, b}, [a, b, out]() mutable {
      const auto go = out.grad();
      for (const Tensor* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto g = t->grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] += go[i];
      }
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
  const bool track = tape.tracks({&a});
  Tensor out = Tensor::zeros(a.shape(), track);
  auto o = out.mutable_values();
  for (int64_t i = 0; i < a.size(); ++i) o[i] = a[i] * factor;
  if (track) {
    tape.record(out, {a}, [a, out, factor]() mutable {
      const auto go = out.grad();
      auto g = a.grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += go[i] * factor;
    });
  }
  return out;
}

Tensor mul_const(Tape& tape, const Tensor& a, const Tensor& constant) {
  if (a.shape() != constant.shape()) {
    shape_error("mul_const", shape_string(a.shape()) + " vs " +
                                 shape_string(constant.shape()));
  }
  const bool track = tape.tracks({&a});
  Tensor out = Tensor::zeros(a.shape(), track);
  auto o = out.mutable_values();
  for (int64_t i = 0; i < a.size(); ++i) o[i] = a[i] * constant[i];
  if (track) {
    tape.record(out, {a}, [a, constant, out]() mutable {
      const auto go = out.grad();
      auto g = a.grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += go[i] * constant[i];
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& a) {
  const bool track = tape.tracks({&a});
  double s = 0.0;
  for (double v : a.values()) s += v;
  Tensor out = Tensor::scalar(s, track);
  if (track) {
    tape.record(out, {a}, [a, out]() mutable {
      const double go = out.grad()[0];
      for (double& g : a.grad()) g += go;
    });
  }
  return out;
}

// --- structural ----------------------------------------------------------

Tensor embedding(Tape& tape, const Tensor& table, std::span<const int> ids) {
  require_rank("embedding", table, 2, 2);
  const int64_t V = table.dim(0);
  const int64_t f = table.dim(1);
  for (int id : ids) {
    if (id < 0 || id >= V) {
      throw Error(ErrorCode::kIndexOutOfVocab,
                  "embedding id " + std::to_string(id) + " not in [0," +
                      std::to_string(V) + ")");
    }
  }
  const bool track = tape.tracks({&table});
  const auto m = static_cast<int64_t>(ids.size());
  Tensor out = Tensor::zeros({m, f}, track);
  auto o = out.mutable_values();
  const auto tv = table.values();
  for (int64_t i = 0; i < m; ++i) {
    std::copy_n(tv.begin() + ids[i] * f, f, o.begin() + i * f);
  }
  if (track) {
    std::vector<int> idv(ids.begin(), ids.end());
    tape.record(out, {table}, [table, out, idv, f]() mutable {
      const auto go = out.grad();
      auto g = table.grad();
      for (size_t i = 0; i < idv.size(); ++i) {
        for (int64_t j = 0; j < f; ++j) g[idv[i] * f + j] += go[i * f + j];
      }
    });
  }
  return out;
}

Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank("concat_cols", a, 2, 2);
  require_rank("concat_cols", b, 2, 2);
  if (a.dim(0) != b.dim(0)) shape_error("concat_cols", "row counts differ");
  const int64_t m = a.dim(0), p = a.dim(1), q = b.dim(1);
  const bool track = tape.tracks({&a, &b});
  Tensor out = Tensor::zeros({m, p + q}, track);
  auto o = out.mutable_values();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < p; ++j) o[i * (p + q) + j] = a[i * p + j];
    for (int64_t j = 0; j < q; ++j) o[i * (p + q) + p + j] = b[i * q + j];
  }
  if (track) {
    tape.record(out, {a, b}, [a, b, out, m, p, q]() mutable {
      const auto go = out.grad();
      if (a.requires_grad()) {
        auto g = a.grad();
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < p; ++j) g[i * p + j] += go[i * (p + q) + j];
      }
      if (b.requires_grad()) {
        auto g = b.grad();
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < q; ++j)
            g[i * q + j] += go[i * (p + q) + p + j];
      }
    });
  }
  return out;
}

Tensor concat_rows(Tape& tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) shape_error("concat_rows", "no inputs");
  const int64_t c = cols_of(parts[0]);
  int64_t rows = 0;
  bool track = false;
  for (const auto& p : parts) {
    require_rank("concat_rows", p, 1, 2);
    if (cols_of(p) != c) shape_error("concat_rows", "column counts differ");
    rows += rows_of(p);
    track = track || tape.tracks({&p});
  }
  Tensor out = Tensor::zeros({rows, c}, track);
  auto o = out.mutable_values();
  int64_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.values().begin(), p.values().end(), o.begin() + offset);
    offset += p.size();
  }
  if (track) {
    tape.record(out, parts, [parts, out]() mutable {
      const auto go = out.grad();
      int64_t off = 0;
      for (auto& p : parts) {
        if (p.requires_grad()) {
          auto g = p.grad();
          for (int64_t i = 0; i < p.size(); ++i) g[i] += go[off + i];
        }
        off += p.size();
      }
    });
  }
  return out;
}

// --- dense maps ----------------------------------------------------------

Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank("linear", x, 1, 2);
  require_rank("linear", w, 2, 2);
  require_rank("linear", b, 1, 1);
  const int64_t m = rows_of(x), a = cols_of(x), n = w.dim(1);
  if (w.dim(0) != a || b.dim(0) != n) {
    shape_error("linear", "x" + shape_string(x.shape()) + " W" +
                              shape_string(w.shape()) + " b" +
                              shape_string(b.shape()));
  }
  const bool track = tape.tracks({&x, &w, &b});
  Shape out_shape = x.shape();
  out_shape.back() = n;
  Tensor out = Tensor::zeros(out_shape, track);
  auto o = out.mutable_values();
  const auto xv = x.values(), wv = w.values(), bv = b.values();
  for (int64_t i = 0; i < m; ++i) {
    double* orow = o.data() + i * n;
    for (int64_t j = 0; j < n; ++j) orow[j] = bv[j];
    for (int64_t k = 0; k < a; ++k) {
      const double xi = xv[i * a + k];
      if (xi == 0.0) continue;
      const double* wrow = wv.data() + k * n;
      for (int64_t j = 0; j < n; ++j) orow[j] += xi * wrow[j];
    }
  }
  if (track) {
    tape.record(out, {x, w, b}, [x, w, b, out, m, a, n]() mutable {
      const auto go = out.grad();
      const auto xv = x.values(), wv = w.values();
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (int64_t i = 0; i < m; ++i)
          for (int64_t k = 0; k < a; ++k) {
            double s = 0.0;
            for (int64_t j = 0; j < n; ++j) s += go[i * n + j] * wv[k * n + j];
            gx[i * a + k] += s;
          }
      }
      if (w.requires_grad()) {
        auto gw = w.grad();
        for (int64_t i = 0; i < m; ++i)
          for (int64_t k = 0; k < a; ++k) {
            const double xi = xv[i * a + k];
            if (xi == 0.0) continue;
            for (int64_t j = 0; j < n; ++j) gw[k * n + j] += xi * go[i * n + j];
          }
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < n; ++j) gb[j] += go[i * n + j];
      }
    });
  }
  return out;
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2, 2);
  require_rank("matmul", b, 2, 2);
  const int64_t n = a.dim(0), p = a.dim(1), q = b.dim(1);
  if (b.dim(0) != p) {
    shape_error("matmul", shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const bool track = tape.tracks({&a, &b});
  Tensor out = Tensor::zeros({n, q}, track);
  auto o = out.mutable_values();
  const auto av = a.values(), bv = b.values();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t k = 0; k < p; ++k) {
      const double aik = av[i * p + k];
      for (int64_t j = 0; j < q; ++j) o[i * q + j] += aik * bv[k * q + j];
    }
  if (track) {
    tape.record(out, {a, b}, [a, b, out, n, p, q]() mutable {
      const auto go = out.grad();
      const auto av = a.values(), bv = b.values();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (int64_t i = 0; i < n; ++i)
          for (int64_t k = 0; k < p; ++k) {
            double s = 0.0;
            for (int64_t j = 0; j < q; ++j) s += go[i * q + j] * bv[k * q + j];
            ga[i * p + k] += s;
          }
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (int64_t i = 0; i < n; ++i)
          for (int64_t k = 0; k < p; ++k) {
            const double aik = av[i * p + k];
            for (int64_t j = 0; j < q; ++j) gb[k * q + j] += aik * go[i * q + j];
          }
      }
    });
  }
  return out;
}

Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank("matmul_nt", a, 2, 2);
  require_rank("matmul_nt", b, 2, 2);
  const int64_t n = a.dim(0), p = a.dim(1), q = b.dim(0);
  if (b.dim(1) != p) {
    shape_error("matmul_nt", shape_string(a.shape()) + " x " +
                                 shape_string(b.shape()) + "^T");
  }
  const bool track = tape.tracks({&a, &b});
  Tensor out = Tensor::zeros({n, q}, track);
  auto o = out.mutable_values();
  const auto av = a.values(), bv = b.values();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < q; ++j) {
      double s = 0.0;
      for (int64_t k = 0; k < p; ++k) s += av[i * p + k] * bv[j * p + k];
      o[i * q + j] = s;
    }
  if (track) {
    tape.record(out, {a, b}, [a, b, out, n, p, q]() mutable {
      const auto go = out.grad();
      const auto av = a.values(), bv = b.values();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < q; ++j) {
            const double g = go[i * q + j];
            for (int64_t k = 0; k < p; ++k) ga[i * p + k] += g * bv[j * p + k];
          }
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < q; ++j) {
            const double g = go[i * q + j];
            for (int64_t k = 0; k < p; ++k) gb[j * p + k] += g * av[i * p + k];
          }
      }
    });
  }
  return out;
}

Tensor conv1d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b,
              PadMode mode) {
  require_rank("conv1d", x, 2, 2);
  require_rank("conv1d", w, 2, 2);
  require_rank("conv1d", b, 1, 1);
  const int64_t m = x.dim(0), c = x.dim(1), o = w.dim(0), kc = w.dim(1);
  if (m < 1) shape_error("conv1d", "empty input");
  if (c < 1 || kc % c != 0 || kc / c < 1) {
    shape_error("conv1d", "kernel width " + std::to_string(kc) +
                              " is not a multiple of channels " +
                              std::to_string(c));
  }
  if (b.dim(0) != o) shape_error("conv1d", "bias width");
  const int64_t k = kc / c;
  const int64_t offset = mode == PadMode::kCausal ? k - 1 : (k - 1) - (k - 1) / 2;

  const bool track = tape.tracks({&x, &w, &b});
  Tensor out = Tensor::zeros({m, o}, track);
  auto ov = out.mutable_values();
  const auto xv = x.values(), wv = w.values(), bv = b.values();
  std::vector<double> window(kc);
  auto fill_window = [&xv, m, c, k, offset](int64_t i, std::vector<double>& win) {
    for (int64_t j = 0; j < k; ++j) {
      const int64_t r = i + j - offset;
      if (r < 0 || r >= m) {
        std::fill_n(win.begin() + j * c, c, 0.0);
      } else {
        std::copy_n(xv.begin() + r * c, c, win.begin() + j * c);
      }
    }
  };
  for (int64_t i = 0; i < m; ++i) {
    fill_window(i, window);
    for (int64_t oo = 0; oo < o; ++oo) {
      double s = bv[oo];
      const double* wrow = wv.data() + oo * kc;
      for (int64_t t = 0; t < kc; ++t) s += wrow[t] * window[t];
      ov[i * o + oo] = s;
    }
  }
  if (track) {
    tape.record(out, {x, w, b}, [x, w, b, out, m, c, o, k, kc, offset]() mutable {
      const auto go = out.grad();
      const auto xv = x.values(), wv = w.values();
      std::vector<double> win(kc), gwin(kc);
      for (int64_t i = 0; i < m; ++i) {
        const double* gout = go.data() + i * o;
        if (w.requires_grad()) {
          for (int64_t j = 0; j < k; ++j) {
            const int64_t r = i + j - offset;
            if (r < 0 || r >= m) std::fill_n(win.begin() + j * c, c, 0.0);
            else std::copy_n(xv.begin() + r * c, c, win.begin() + j * c);
          }
          auto gw = w.grad();
          for (int64_t oo = 0; oo < o; ++oo) {
            const double g = gout[oo];
            double* gwrow = gw.data() + oo * kc;
            for (int64_t t = 0; t < kc; ++t) gwrow[t] += g * win[t];
          }
        }
        if (b.requires_grad()) {
          auto gb = b.grad();
          for (int64_t oo = 0; oo < o; ++oo) gb[oo] += gout[oo];
        }
        if (x.requires_grad()) {
          std::fill(gwin.begin(), gwin.end(), 0.0);
          for (int64_t oo = 0; oo < o; ++oo) {
            const double g = gout[oo];
            const double* wrow = wv.data() + oo * kc;
            for (int64_t t = 0; t < kc; ++t) gwin[t] += g * wrow[t];
          }
          auto gx = x.grad();
          for (int64_t j = 0; j < k; ++j) {
            const int64_t r = i + j - offset;
            if (r < 0 || r >= m) continue;
            for (int64_t ch = 0; ch < c; ++ch) gx[r * c + ch] += gwin[j * c + ch];
          }
        }
      }
    });
  }
  return out;
}

// --- nonlinearities ------------------------------------------------------

Tensor glu(Tape& tape, const Tensor& y) {
  require_rank("glu", y, 1, 2);
  const int64_t width = cols_of(y);
  if (width % 2 != 0) {
    throw Error(ErrorCode::kOddWidth,
                "glu input width " + std::to_string(width) + " is odd");
  }
  const int64_t rows = rows_of(y), d = width / 2;
  const bool track = tape.tracks({&y});
  Shape shape = y.shape();
  shape.back() = d;
  Tensor out = Tensor::zeros(shape, track);
  auto o = out.mutable_values();
  const auto yv = y.values();
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < d; ++j) {
      o[i * d + j] = yv[i * width + j] * sigmoid(yv[i * width + d + j]);
    }
  if (track) {
    tape.record(out, {y}, [y, out, rows, d, width]() mutable {
      const auto go = out.grad();
      const auto yv = y.values();
      auto gy = y.grad();
      for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < d; ++j) {
          const double a = yv[i * width + j];
          const double s = sigmoid(yv[i * width + d + j]);
          const double g = go[i * d + j];
          gy[i * width + j] += g * s;
          gy[i * width + d + j] += g * a * s * (1.0 - s);
        }
    });
  }
  return out;
}

Tensor softmax_rows(Tape& tape, const Tensor& x) {
  require_rank("softmax_rows", x, 1, 2);
  const int64_t rows = rows_of(x), n = cols_of(x);
  const bool track = tape.tracks({&x});
  Tensor out = Tensor::zeros(x.shape(), track);
  auto o = out.mutable_values();
  const auto xv = x.values();
  for (int64_t i = 0; i < rows; ++i) {
    const double* xr = xv.data() + i * n;
    double* yr = o.data() + i * n;
    const double mx = *std::max_element(xr, xr + n);
    double z = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      z += yr[j];
    }
    for (int64_t j = 0; j < n; ++j) yr[j] /= z;
  }
  if (track) {
    tape.record(out, {x}, [x, out, rows, n]() mutable {
      const auto go = out.grad();
      const auto yv = out.values();
      auto gx = x.grad();
      for (int64_t i = 0; i < rows; ++i) {
        double dot = 0.0;
        for (int64_t j = 0; j < n; ++j) dot += go[i * n + j] * yv[i * n + j];
        for (int64_t j = 0; j < n; ++j)
          gx[i * n + j] += yv[i * n + j] * (go[i * n + j] - dot);
      }
    });
  }
  return out;
}

Tensor layer_norm(Tape& tape, const Tensor& x, double eps) {
  require_rank("layer_norm", x, 1, 2);
  const int64_t rows = rows_of(x), n = cols_of(x);
  const bool track = tape.tracks({&x});
  Tensor out = Tensor::zeros(x.shape(), track);
  auto o = out.mutable_values();
  const auto xv = x.values();
  std::vector<double> inv_std(rows);
  for (int64_t i = 0; i < rows; ++i) {
    const double* xr = xv.data() + i * n;
    double mean = 0.0;
    for (int64_t j = 0; j < n; ++j) mean += xr[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (int64_t j = 0; j < n; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (int64_t j = 0; j < n; ++j) o[i * n + j] = (xr[j] - mean) * inv_std[i];
  }
  if (track) {
    tape.record(out, {x}, [x, out, rows, n, inv_std]() mutable {
      const auto go = out.grad();
      const auto yv = out.values();
      auto gx = x.grad();
      for (int64_t i = 0; i < rows; ++i) {
        double mean_g = 0.0, mean_gy = 0.0;
        for (int64_t j = 0; j < n; ++j) {
          mean_g += go[i * n + j];
          mean_gy += go[i * n + j] * yv[i * n + j];
        }
        mean_g /= static_cast<double>(n);
        mean_gy /= static_cast<double>(n);
        for (int64_t j = 0; j < n; ++j) {
          gx[i * n + j] +=
              inv_std[i] * (go[i * n + j] - mean_g - yv[i * n + j] * mean_gy);
        }
      }
    });
  }
  return out;
}

Tensor dropout(Tape& tape, const Tensor& x, double p, bool training, Rng& rng) {
  if (p < 0.0 || p >= 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "dropout p must be in [0, 1)");
  }
  if (!training || p == 0.0) return x;
  const bool track = tape.tracks({&x});
  Tensor out = Tensor::zeros(x.shape(), track);
  auto o = out.mutable_values();
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(static_cast<size_t>(x.size()));
  for (int64_t i = 0; i < x.size(); ++i) {
    mask[i] = rng.uniform() < p ? 0.0 : keep_scale;
    o[i] = x[i] * mask[i];
  }
  if (track) {
    tape.record(out, {x}, [x, out, mask]() mutable {
      const auto go = out.grad();
      auto gx = x.grad();
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * mask[i];
    });
  }
  return out;
}

Tensor weight_norm(Tape& tape, const Tensor& v, const Tensor& g, NormAxis axis) {
  require_rank("weight_norm", v, 2, 2);
  require_rank("weight_norm", g, 1, 1);
  const int64_t r = v.dim(0), c = v.dim(1);
  const bool by_rows = axis == NormAxis::kRows;
  const int64_t units = by_rows ? r : c;
  const int64_t len = by_rows ? c : r;
  if (g.dim(0) != units) shape_error("weight_norm", "gain width");
  // Element e of unit u sits at index(u, e).
  auto index = [by_rows, c](int64_t u, int64_t e) {
    return by_rows ? u * c + e : e * c + u;
  };
  const bool track = tape.tracks({&v, &g});
  Tensor out = Tensor::zeros(v.shape(), track);
  auto o = out.mutable_values();
  const auto vv = v.values();
  std::vector<double> norms(units);
  for (int64_t u = 0; u < units; ++u) {
    double ss = 0.0;
    for (int64_t e = 0; e < len; ++e) ss += vv[index(u, e)] * vv[index(u, e)];
    norms[u] = std::sqrt(ss);
    const double f = norms[u] > 0 ? g[u] / norms[u] : 0.0;
    for (int64_t e = 0; e < len; ++e) o[index(u, e)] = f * vv[index(u, e)];
  }
  if (track) {
    tape.record(out, {v, g}, [v, g, out, norms, units, len, index]() mutable {
      const auto go = out.grad();
      const auto vv = v.values();
      for (int64_t u = 0; u < units; ++u) {
        const double n = norms[u];
        if (n == 0.0) continue;
        double dot = 0.0;  // go . v / n
        for (int64_t e = 0; e < len; ++e) dot += go[index(u, e)] * vv[index(u, e)];
        dot /= n;
        if (g.requires_grad()) g.grad()[u] += dot;
        if (v.requires_grad()) {
          auto gv = v.grad();
          const double f = g[u] / n;
          for (int64_t e = 0; e < len; ++e) {
            gv[index(u, e)] += f * (go[index(u, e)] - dot * vv[index(u, e)] / n);
          }
        }
      }
    });
  }
  return out;
}

XentResult softmax_xent(Tape& tape, const Tensor& logits,
                        std::span<const int> targets,
                        const std::vector<bool>& pad_mask) {
  require_rank("softmax_xent", logits, 1, 2);
  const int64_t n = rows_of(logits), T = cols_of(logits);
  if (static_cast<int64_t>(targets.size()) != n ||
      static_cast<int64_t>(pad_mask.size()) != n) {
    shape_error("softmax_xent", "targets/mask length must equal row count");
  }
  for (int t : targets) {
    if (t < 0 || t >= T) {
      throw Error(ErrorCode::kIndexOutOfVocab,
                  "target " + std::to_string(t) + " not in [0," +
                      std::to_string(T) + ")");
    }
  }
  int64_t counted = 0;
  for (bool masked : pad_mask) counted += masked ? 0 : 1;
  if (counted == 0) {
    throw Error(ErrorCode::kInvalidArgument, "every target position is padding");
  }

  Tensor probs = Tensor::zeros({n, T});
  auto pv = probs.mutable_values();
  const auto xv = logits.values();
  double nll = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double* xr = xv.data() + i * T;
    double* pr = pv.data() + i * T;
    const double mx = *std::max_element(xr, xr + T);
    double z = 0.0;
    for (int64_t j = 0; j < T; ++j) {
      pr[j] = std::exp(xr[j] - mx);
      z += pr[j];
    }
    for (int64_t j = 0; j < T; ++j) pr[j] /= z;
    if (!pad_mask[i]) nll -= xr[targets[i]] - mx - std::log(z);
  }
  const bool track = tape.tracks({&logits});
  Tensor loss = Tensor::scalar(nll / static_cast<double>(counted), track);
  if (track) {
    std::vector<int> tv(targets.begin(), targets.end());
    tape.record(loss, {logits},
                [logits, loss, probs, tv, pad_mask, n, T, counted]() mutable {
                  const double scale = loss.grad()[0] / static_cast<double>(counted);
                  const auto pv = probs.values();
                  auto g = logits.grad();
                  for (int64_t i = 0; i < n; ++i) {
                    if (pad_mask[i]) continue;
                    for (int64_t j = 0; j < T; ++j) g[i * T + j] += scale * pv[i * T + j];
                    g[i * T + tv[i]] -= scale;
                  }
                });
  }
  return {loss, probs, counted};
}

}  // namespace xsf
