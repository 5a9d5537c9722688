/*
 * Copyright (c) 2026 The OWAN Lab Authors.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "owan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Core>

namespace owan {
namespace {

using Index = std::ptrdiff_t;

void expect_rank(const Shape& s, std::size_t rank, const char* what) {
  if (s.size() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " + shape_string(s));
  }
}

/// Geometry of a stride-1, same-padded convolution. groups == 1 is a dense
/// conv; groups == channels is depthwise (the only grouped form used).
struct ConvGeometry {
  Index batch, in_channels, out_channels, height, width, filter, dilation, groups;

  Index plane() const { return height * width; }
  Index pad() const { return dilation * (filter - 1) / 2; }
};

/// Valid index range [lo, hi) of positions p with 0 <= p + offset < extent.
inline void valid_range(Index offset, Index extent, Index& lo, Index& hi) {
  lo = std::max<Index>(0, -offset);
  hi = std::min<Index>(extent, extent - offset);
}

// Depthwise kernels work on zero-padded copies of each plane so the inner
// loops carry no bounds checks. Output rows are produced in blocks of
// kBlock lanes that stay in registers across all filter taps.
template <typename T>
constexpr Index kBlock = 64 / sizeof(T);

inline Index round_up(Index v, Index m) { return (v + m - 1) / m * m; }

/// Copies an H x W plane into a (H + 2*pad) x stride buffer at offset
/// (pad, pad); everything else is zero.
template <typename T>
void pad_plane(const T* src, Index H, Index W, Index pad, Index stride, T* dst) {
  std::fill(dst, dst + (H + 2 * pad) * stride, T(0));
  for (Index y = 0; y < H; ++y) std::copy(src + y * W, src + (y + 1) * W, dst + (y + pad) * stride + pad);
}

/// out[y][x] = sum_{ky,kx} w[ky][kx] * padded[y + ky*d][x + kx*d]
template <typename T>
void correlate_padded(const T* padded, Index stride, const T* w, Index f, Index d, Index H, Index W, T* out) {
  constexpr Index B = kBlock<T>;
  for (Index y = 0; y < H; ++y) {
    for (Index xb = 0; xb < W; xb += B) {
      T acc[B] = {};
      for (Index ky = 0; ky < f; ++ky) {
        const T* row = padded + (y + ky * d) * stride + xb;
        for (Index kx = 0; kx < f; ++kx) {
          const T wv = w[ky * f + kx];
          const T* src = row + kx * d;
          for (Index v = 0; v < B; ++v) acc[v] += wv * src[v];
        }
      }
      const Index n = std::min(B, W - xb);
      T* dst = out + y * W + xb;
      for (Index v = 0; v < n; ++v) dst[v] += acc[v];
    }
  }
}

template <typename T>
void depthwise_forward(const ConvGeometry& g, const T* in, const T* weight, T* out) {
  const Index H = g.height, W = g.width, f = g.filter, d = g.dilation, pad = g.pad();
  const Index stride = round_up(W, kBlock<T>) + 2 * pad;
  std::vector<T> padded(static_cast<std::size_t>((H + 2 * pad) * stride));
  for (Index n = 0; n < g.batch; ++n) {
    for (Index c = 0; c < g.in_channels; ++c) {
      const Index p = n * g.in_channels + c;
      pad_plane(in + p * H * W, H, W, pad, stride, padded.data());
      T* o = out + p * H * W;
      std::fill(o, o + H * W, T(0));
      correlate_padded(padded.data(), stride, weight + c * f * f, f, d, H, W, o);
    }
  }
}

template <typename T>
void depthwise_backward(const ConvGeometry& g, const T* grad_out, const T* in, const T* weight, T* grad_in,
                        T* grad_weight) {
  constexpr Index B = kBlock<T>;
  const Index H = g.height, W = g.width, f = g.filter, d = g.dilation, pad = g.pad();
  const Index stride = round_up(W, B) + 2 * pad;
  const Index wide = round_up(W, B);
  std::vector<T> padded(static_cast<std::size_t>((H + 2 * pad) * stride));
  std::vector<T> flipped(static_cast<std::size_t>(f * f));
  std::vector<T> go_wide(static_cast<std::size_t>(H * wide));
  for (Index n = 0; n < g.batch; ++n) {
    for (Index c = 0; c < g.in_channels; ++c) {
      const Index p = n * g.in_channels + c;
      const T* go = grad_out + p * H * W;
      const T* w = weight + c * f * f;
      if (grad_in) {
        // input gradient = correlation of the padded output gradient with
        // the 180-degree rotated kernel
        for (Index k = 0; k < f * f; ++k) flipped[k] = w[f * f - 1 - k];
        pad_plane(go, H, W, pad, stride, padded.data());
        correlate_padded(padded.data(), stride, flipped.data(), f, d, H, W, grad_in + p * H * W);
      }
      if (grad_weight) {
        pad_plane(in + p * H * W, H, W, pad, stride, padded.data());
        std::fill(go_wide.begin(), go_wide.end(), T(0));
        for (Index y = 0; y < H; ++y) std::copy(go + y * W, go + (y + 1) * W, go_wide.data() + y * wide);
        T* gw = grad_weight + c * f * f;
        for (Index ky = 0; ky < f; ++ky) {
          for (Index kx = 0; kx < f; ++kx) {
            T acc[B] = {};
            for (Index y = 0; y < H; ++y) {
              const T* grow = go_wide.data() + y * wide;
              const T* xrow = padded.data() + (y + ky * d) * stride + kx * d;
              for (Index xb = 0; xb < wide; xb += B) {
                for (Index v = 0; v < B; ++v) acc[v] += grow[xb + v] * xrow[xb + v];
              }
            }
            T total = 0;
            for (Index v = 0; v < B; ++v) total += acc[v];
            gw[ky * f + kx] += total;
          }
        }
      }
    }
  }
}

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

/// Unfolds one sample (Cin x H x W) into a (Cin*f*f) x (H*W) matrix of
/// zero-padded taps.
template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* col) {
  const Index hw = g.plane(), W = g.width, H = g.height, f = g.filter, pad = g.pad();
  for (Index ci = 0; ci < g.in_channels; ++ci) {
    const T* plane = x + ci * hw;
    for (Index ky = 0; ky < f; ++ky) {
      const Index dy = ky * g.dilation - pad;
      Index y0, y1;
      valid_range(dy, H, y0, y1);
      for (Index kx = 0; kx < f; ++kx) {
        const Index dx = kx * g.dilation - pad;
        Index x0, x1;
        valid_range(dx, W, x0, x1);
        T* row = col + ((ci * f + ky) * f + kx) * hw;
        std::fill(row, row + hw, T(0));
        for (Index y = y0; y < y1; ++y) {
          const T* src = plane + (y + dy) * W + dx;
          T* dst = row + y * W;
          for (Index xx = x0; xx < x1; ++xx) dst[xx] = src[xx];
        }
      }
    }
  }
}

/// Adjoint of im2col: scatters tap gradients back onto the sample.
template <typename T>
void col2im_add(const ConvGeometry& g, const T* col, T* x) {
  const Index hw = g.plane(), W = g.width, H = g.height, f = g.filter, pad = g.pad();
  for (Index ci = 0; ci < g.in_channels; ++ci) {
    T* plane = x + ci * hw;
    for (Index ky = 0; ky < f; ++ky) {
      const Index dy = ky * g.dilation - pad;
      Index y0, y1;
      valid_range(dy, H, y0, y1);
      for (Index kx = 0; kx < f; ++kx) {
        const Index dx = kx * g.dilation - pad;
        Index x0, x1;
        valid_range(dx, W, x0, x1);
        const T* row = col + ((ci * f + ky) * f + kx) * hw;
        for (Index y = y0; y < y1; ++y) {
          T* dst = plane + (y + dy) * W + dx;
          const T* src = row + y * W;
          for (Index xx = x0; xx < x1; ++xx) dst[xx] += src[xx];
        }
      }
    }
  }
}

// Dense (groups == 1) convolution as per-sample GEMMs:
//   out[Co x HW] = W[Co x K] * col[K x HW],  K = Cin*f*f.
template <typename T>
void dense_conv_forward(const ConvGeometry& g, const T* in, const T* weight, const T* bias, T* out) {
  const Index hw = g.plane(), K = g.in_channels * g.filter * g.filter;
  ConstMatrixMap<T> w(weight, g.out_channels, K);
  std::vector<T> col(g.filter == 1 ? 0 : static_cast<std::size_t>(K * hw));
  for (Index n = 0; n < g.batch; ++n) {
    const T* x = in + n * g.in_channels * hw;
    if (g.filter != 1) {
      im2col(g, x, col.data());
      x = col.data();
    }
    MatrixMap<T> o(out + n * g.out_channels * hw, g.out_channels, hw);
    o.noalias() = w * ConstMatrixMap<T>(x, K, hw);
    if (bias) {
      for (Index co = 0; co < g.out_channels; ++co) o.row(co).array() += bias[co];
    }
  }
}

template <typename T>
void dense_conv_backward(const ConvGeometry& g, const T* grad_out, const T* in, const T* weight, T* grad_in,
                         T* grad_weight, T* grad_bias) {
  const Index hw = g.plane(), K = g.in_channels * g.filter * g.filter;
  ConstMatrixMap<T> w(weight, g.out_channels, K);
  std::vector<T> col(g.filter == 1 ? 0 : static_cast<std::size_t>(K * hw));
  std::vector<T> dcol(col.size());
  for (Index n = 0; n < g.batch; ++n) {
    ConstMatrixMap<T> go(grad_out + n * g.out_channels * hw, g.out_channels, hw);
    if (grad_bias) {
      // Plain loop: Eigen's vectorized sum() peels by address, so its
      // rounding would depend on buffer alignment.
      for (Index co = 0; co < g.out_channels; ++co) {
        const T* row = grad_out + (n * g.out_channels + co) * hw;
        T acc = 0;
        for (Index i = 0; i < hw; ++i) acc += row[i];
        grad_bias[co] += acc;
      }
    }
    if (grad_weight) {
      const T* x = in + n * g.in_channels * hw;
      if (g.filter != 1) {
        im2col(g, x, col.data());
        x = col.data();
      }
      MatrixMap<T>(grad_weight, g.out_channels, K).noalias() += go * ConstMatrixMap<T>(x, K, hw).transpose();
    }
    if (grad_in) {
      T* gx = grad_in + n * g.in_channels * hw;
      if (g.filter == 1) {
        MatrixMap<T>(gx, K, hw).noalias() += w.transpose() * go;
      } else {
        MatrixMap<T>(dcol.data(), K, hw).noalias() = w.transpose() * go;
        col2im_add(g, dcol.data(), gx);
      }
    }
  }
}

template <typename T>
Tensor<T> grouped_conv(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                       const ConvGeometry& geo) {
  auto out = Tensor<T>::uninitialized(Shape{static_cast<std::size_t>(geo.batch), static_cast<std::size_t>(geo.out_channels),
                      static_cast<std::size_t>(geo.height), static_cast<std::size_t>(geo.width)});
  const T* bias_data = bias.defined() ? bias.values().data() : nullptr;
  if (geo.groups == 1) {
    dense_conv_forward(geo, input.values().data(), weight.values().data(), bias_data, out.values().data());
  } else {
    depthwise_forward(geo, input.values().data(), weight.values().data(), out.values().data());
  }
  if (tape.needs_grad({&input, &weight, &bias})) {
    std::vector<Tensor<T>> inputs{input, weight};
    if (bias.defined()) inputs.push_back(bias);
    tape.record(std::move(inputs), out, [input, weight, bias, out, geo]() {
      const T* go = out.grad().data();
      T* gi = input.requires_grad() ? input.grad_buffer().data() : nullptr;
      T* gw = weight.requires_grad() ? weight.grad_buffer().data() : nullptr;
      T* gb = (bias.defined() && bias.requires_grad()) ? bias.grad_buffer().data() : nullptr;
      if (geo.groups == 1) {
        dense_conv_backward(geo, go, input.values().data(), weight.values().data(), gi, gw, gb);
        return;
      }
      depthwise_backward(geo, go, input.values().data(), weight.values().data(), gi, gw);
    });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t dilation) {
  expect_rank(input.shape(), 4, "conv2d input");
  expect_rank(weight.shape(), 4, "conv2d weight");
  const auto& is = input.shape();
  const auto& ws = weight.shape();
  if (ws[1] != is[1]) {
    throw ShapeError("conv2d: weight " + shape_string(ws) + " expects " + std::to_string(ws[1]) +
                     " input channels, input is " + shape_string(is));
  }
  if (ws[2] != ws[3] || ws[2] % 2 == 0) {
    throw ShapeError("conv2d: filter must be square with odd size, got " + shape_string(ws));
  }
  if (dilation == 0) throw ShapeError("conv2d: dilation must be positive");
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != ws[0])) {
    throw ShapeError("conv2d: bias " + shape_string(bias.shape()) + " does not match " + std::to_string(ws[0]) +
                     " output channels");
  }
  ConvGeometry geo{Index(is[0]), Index(is[1]), Index(ws[0]), Index(is[2]), Index(is[3]), Index(ws[2]),
                   Index(dilation), 1};
  return grouped_conv(tape, input, weight, bias, geo);
}

template <typename T>
Tensor<T> depthwise_conv2d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& weight, std::size_t dilation) {
  expect_rank(input.shape(), 4, "depthwise_conv2d input");
  expect_rank(weight.shape(), 3, "depthwise_conv2d weight");
  const auto& is = input.shape();
  const auto& ws = weight.shape();
  if (ws[0] != is[1]) {
    throw ShapeError("depthwise_conv2d: weight " + shape_string(ws) + " has " + std::to_string(ws[0]) +
                     " channels, input is " + shape_string(is));
  }
  if (ws[1] != ws[2] || ws[1] % 2 == 0) {
    throw ShapeError("depthwise_conv2d: filter must be square with odd size, got " + shape_string(ws));
  }
  if (dilation == 0) throw ShapeError("depthwise_conv2d: dilation must be positive");
  ConvGeometry geo{Index(is[0]), Index(is[1]), Index(is[1]), Index(is[2]), Index(is[3]), Index(ws[1]),
                   Index(dilation), Index(is[1])};
  return grouped_conv(tape, input, weight, Tensor<T>{}, geo);
}

template <typename T>
Tensor<T> avg_pool_same(Tape<T>& tape, const Tensor<T>& input, std::size_t window) {
  expect_rank(input.shape(), 4, "avg_pool_same input");
  if (window % 2 == 0) throw ShapeError("avg_pool_same: window must be odd");
  const auto& s = input.shape();
  const Index planes = Index(s[0] * s[1]), H = Index(s[2]), W = Index(s[3]), r = Index(window / 2);
  // reciprocal of the in-bounds tap count at each location
  std::vector<T> inv_count(static_cast<std::size_t>(H * W));
  for (Index y = 0; y < H; ++y) {
    const Index rows = std::min(H - 1, y + r) - std::max<Index>(0, y - r) + 1;
    for (Index x = 0; x < W; ++x) {
      const Index cols = std::min(W - 1, x + r) - std::max<Index>(0, x - r) + 1;
      inv_count[y * W + x] = T(1) / T(rows * cols);
    }
  }
  auto out = Tensor<T>::uninitialized(s);
  const T* in = input.values().data();
  T* o = out.values().data();
  for (Index p = 0; p < planes; ++p) {
    const T* xp = in + p * H * W;
    T* op = o + p * H * W;
    for (Index y = 0; y < H; ++y) {
      for (Index x = 0; x < W; ++x) {
        T acc = 0;
        for (Index yy = std::max<Index>(0, y - r); yy <= std::min(H - 1, y + r); ++yy) {
          for (Index xx = std::max<Index>(0, x - r); xx <= std::min(W - 1, x + r); ++xx) acc += xp[yy * W + xx];
        }
        op[y * W + x] = acc * inv_count[y * W + x];
      }
    }
  }
  if (tape.needs_grad({&input})) {
    tape.record({input}, out, [input, out, inv_count = std::move(inv_count), planes, H, W, r]() mutable {
      const T* go = out.grad().data();
      T* gi = input.grad_buffer().data();
      for (Index p = 0; p < planes; ++p) {
        const T* gp = go + p * H * W;
        T* ip = gi + p * H * W;
        for (Index y = 0; y < H; ++y) {
          for (Index x = 0; x < W; ++x) {
            const T g = gp[y * W + x] * inv_count[y * W + x];
            for (Index yy = std::max<Index>(0, y - r); yy <= std::min(H - 1, y + r); ++yy) {
              for (Index xx = std::max<Index>(0, x - r); xx <= std::min(W - 1, x + r); ++xx) ip[yy * W + xx] += g;
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& input) {
  auto out = Tensor<T>::uninitialized(input.shape());
  auto x = input.values();
  auto o = out.values();
  for (std::size_t i = 0; i < x.size(); ++i) o[i] = x[i] > T(0) ? x[i] : T(0);
  if (tape.needs_grad({&input})) {
    tape.record({input}, out, [input, out]() mutable {
      auto g = out.grad();
      auto x = input.values();
      auto gi = input.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x[i] > T(0)) gi[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> global_channel_mean(Tape<T>& tape, const Tensor<T>& input) {
  expect_rank(input.shape(), 4, "global_channel_mean input");
  const auto& s = input.shape();
  const std::size_t planes = s[0] * s[1], hw = s[2] * s[3];
  auto out = Tensor<T>::uninitialized(Shape{s[0], s[1]});
  auto x = input.values();
  auto o = out.values();
  const T inv = T(1) / T(hw);
  for (std::size_t p = 0; p < planes; ++p) {
    T acc = 0;
    for (std::size_t i = 0; i < hw; ++i) acc += x[p * hw + i];
    o[p] = acc * inv;
  }
  if (tape.needs_grad({&input})) {
    tape.record({input}, out, [input, out, planes, hw, inv]() mutable {
      auto g = out.grad();
      auto gi = input.grad_buffer();
      for (std::size_t p = 0; p < planes; ++p) {
        const T v = g[p] * inv;
        for (std::size_t i = 0; i < hw; ++i) gi[p * hw + i] += v;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> dense_nobias(Tape<T>& tape, const Tensor<T>& weight, const Tensor<T>& v) {
  expect_rank(weight.shape(), 2, "dense_nobias weight");
  const std::size_t M = weight.dim(0), C = weight.dim(1);
  if (v.rank() < 1 || v.rank() > 2 || v.shape().back() != C) {
    throw ShapeError("dense_nobias: weight " + shape_string(weight.shape()) + " cannot multiply " +
                     shape_string(v.shape()));
  }
  const bool batched = v.rank() == 2;
  const std::size_t N = batched ? v.dim(0) : 1;
  auto out = Tensor<T>::uninitialized(batched ? Shape{N, M} : Shape{M});
  auto w = weight.values();
  auto x = v.values();
  auto o = out.values();
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t m = 0; m < M; ++m) {
      T acc = 0;
      for (std::size_t c = 0; c < C; ++c) acc += w[m * C + c] * x[n * C + c];
      o[n * M + m] = acc;
    }
  }
  if (tape.needs_grad({&weight, &v})) {
    tape.record({weight, v}, out, [weight, v, out, N, M, C]() mutable {
      auto g = out.grad();
      auto w = weight.values();
      auto x = v.values();
      if (weight.requires_grad()) {
        auto gw = weight.grad_buffer();
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t m = 0; m < M; ++m) {
            for (std::size_t c = 0; c < C; ++c) gw[m * C + c] += g[n * M + m] * x[n * C + c];
          }
        }
      }
      if (v.requires_grad()) {
        auto gv = v.grad_buffer();
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t m = 0; m < M; ++m) {
            for (std::size_t c = 0; c < C; ++c) gv[n * C + c] += g[n * M + m] * w[m * C + c];
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& logits) {
  if (logits.rank() < 1 || logits.rank() > 2) {
    throw ShapeError("softmax: expected a vector or matrix, got " + shape_string(logits.shape()));
  }
  const std::size_t M = logits.shape().back();
  const std::size_t rows = logits.numel() / M;
  auto out = Tensor<T>::uninitialized(logits.shape());
  auto x = logits.values();
  auto o = out.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.data() + r * M;
    T* orow = o.data() + r * M;
    const T peak = *std::max_element(xr, xr + M);
    T total = 0;
    for (std::size_t m = 0; m < M; ++m) {
      orow[m] = std::exp(xr[m] - peak);
      total += orow[m];
    }
    // Floor at the smallest normal so underflowed entries stay positive.
    for (std::size_t m = 0; m < M; ++m) orow[m] = std::max(orow[m] / total, std::numeric_limits<T>::min());
  }
  if (tape.needs_grad({&logits})) {
    tape.record({logits}, out, [logits, out, rows, M]() mutable {
      auto g = out.grad();
      auto y = out.values();
      auto gi = logits.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r) {
        T dot = 0;
        for (std::size_t m = 0; m < M; ++m) dot += g[r * M + m] * y[r * M + m];
        for (std::size_t m = 0; m < M; ++m) gi[r * M + m] += y[r * M + m] * (g[r * M + m] - dot);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> take_column(Tape<T>& tape, const Tensor<T>& matrix, std::size_t column) {
  expect_rank(matrix.shape(), 2, "take_column input");
  const std::size_t N = matrix.dim(0), M = matrix.dim(1);
  if (column >= M) throw ShapeError("take_column: column " + std::to_string(column) + " out of range");
  auto out = Tensor<T>::uninitialized(Shape{N});
  for (std::size_t n = 0; n < N; ++n) out.values()[n] = matrix.values()[n * M + column];
  if (tape.needs_grad({&matrix})) {
    tape.record({matrix}, out, [matrix, out, N, M, column]() mutable {
      auto g = out.grad();
      auto gi = matrix.grad_buffer();
      for (std::size_t n = 0; n < N; ++n) gi[n * M + column] += g[n];
    });
  }
  return out;
}

template <typename T>
Tensor<T> select_row(Tape<T>& tape, const Tensor<T>& matrix, std::size_t row) {
  expect_rank(matrix.shape(), 2, "select_row input");
  const std::size_t R = matrix.dim(0), M = matrix.dim(1);
  if (row >= R) throw ShapeError("select_row: row " + std::to_string(row) + " out of range");
  auto src = matrix.values().subspan(row * M, M);
  Tensor<T> out(Shape{1, M}, std::vector<T>(src.begin(), src.end()));
  if (tape.needs_grad({&matrix})) {
    tape.record({matrix}, out, [matrix, out, M, row]() mutable {
      auto g = out.grad();
      auto gi = matrix.grad_buffer();
      for (std::size_t m = 0; m < M; ++m) gi[row * M + m] += g[m];
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale_channels(Tape<T>& tape, const Tensor<T>& map, const Tensor<T>& s) {
  if (map.rank() < 1) throw ShapeError("scale_channels: map must have a batch axis");
  const std::size_t N = map.dim(0);
  const std::size_t per_sample = map.numel() / N;
  if (s.numel() != 1 && !(s.rank() == 1 && s.dim(0) == N)) {
    throw ShapeError("scale_channels: scale " + shape_string(s.shape()) + " does not broadcast over batch of " +
                     std::to_string(N));
  }
  const bool shared = s.numel() == 1;
  auto out = Tensor<T>::uninitialized(map.shape());
  auto x = map.values();
  auto o = out.values();
  auto sv = s.values();
  for (std::size_t n = 0; n < N; ++n) {
    const T f = sv[shared ? 0 : n];
    for (std::size_t i = 0; i < per_sample; ++i) o[n * per_sample + i] = f * x[n * per_sample + i];
  }
  if (tape.needs_grad({&map, &s})) {
    tape.record({map, s}, out, [map, s, out, N, per_sample, shared]() mutable {
      auto g = out.grad();
      auto x = map.values();
      auto sv = s.values();
      if (map.requires_grad()) {
        auto gm = map.grad_buffer();
        for (std::size_t n = 0; n < N; ++n) {
          const T f = sv[shared ? 0 : n];
          for (std::size_t i = 0; i < per_sample; ++i) gm[n * per_sample + i] += f * g[n * per_sample + i];
        }
      }
      if (s.requires_grad()) {
        auto gs = s.grad_buffer();
        for (std::size_t n = 0; n < N; ++n) {
          T acc = 0;
          for (std::size_t i = 0; i < per_sample; ++i) acc += g[n * per_sample + i] * x[n * per_sample + i];
          gs[shared ? 0 : n] += acc;
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat_channels(Tape<T>& tape, const std::vector<Tensor<T>>& maps) {
  if (maps.empty()) throw ShapeError("concat_channels: no inputs");
  const auto& first = maps.front().shape();
  expect_rank(first, 4, "concat_channels input");
  std::size_t channels = 0;
  for (const auto& m : maps) {
    const auto& s = m.shape();
    expect_rank(s, 4, "concat_channels input");
    if (s[0] != first[0] || s[2] != first[2] || s[3] != first[3]) {
      throw ShapeError("concat_channels: " + shape_string(s) + " does not match " + shape_string(first));
    }
    channels += s[1];
  }
  const std::size_t N = first[0], hw = first[2] * first[3];
  auto out = Tensor<T>::uninitialized(Shape{N, channels, first[2], first[3]});
  auto o = out.values();
  std::size_t offset = 0;
  for (const auto& m : maps) {
    const std::size_t block = m.dim(1) * hw;
    auto x = m.values();
    for (std::size_t n = 0; n < N; ++n) {
      std::copy(x.begin() + n * block, x.begin() + (n + 1) * block, o.begin() + n * channels * hw + offset);
    }
    offset += block;
  }
  bool any = false;
  for (const auto& m : maps) any = any || tape.needs_grad({&m});
  if (any) {
    tape.record(maps, out, [maps, out, N, channels, hw]() mutable {
      auto g = out.grad();
      std::size_t offset = 0;
      for (auto& m : maps) {
        const std::size_t block = m.dim(1) * hw;
        if (m.requires_grad()) {
          auto gm = m.grad_buffer();
          for (std::size_t n = 0; n < N; ++n) {
            const T* src = g.data() + n * channels * hw + offset;
            T* dst = gm.data() + n * block;
            for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
          }
        }
        offset += block;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  auto out = Tensor<T>::uninitialized(a.shape());
  auto x = a.values();
  auto y = b.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  if (tape.needs_grad({&a, &b})) {
    tape.record({a, b}, out, [a, b, out]() mutable {
      auto g = out.grad();
      for (auto* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto gt = t->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> l1_loss(Tape<T>& tape, const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("l1_loss: " + shape_string(pred.shape()) + " vs " + shape_string(target.shape()));
  }
  const T batch = pred.rank() > 0 ? T(pred.dim(0)) : T(1);
  auto p = pred.values();
  auto t = target.values();
  double acc = 0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += static_cast<double>(std::abs(p[i] - t[i]));
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(batch)));
  if (tape.needs_grad({&pred, &target})) {
    tape.record({pred, target}, out, [pred, target, out, batch]() mutable {
      const T g = out.grad()[0] / batch;
      auto p = pred.values();
      auto t = target.values();
      auto sign = [](T d) { return d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0)); };
      if (pred.requires_grad()) {
        auto gp = pred.grad_buffer();
        for (std::size_t i = 0; i < p.size(); ++i) gp[i] += g * sign(p[i] - t[i]);
      }
      if (target.requires_grad()) {
        auto gt = target.grad_buffer();
        for (std::size_t i = 0; i < p.size(); ++i) gt[i] -= g * sign(p[i] - t[i]);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& input) {
  auto x = input.values();
  Tensor<T> out = Tensor<T>::scalar(std::accumulate(x.begin(), x.end(), T(0)));
  if (tape.needs_grad({&input})) {
    tape.record({input}, out, [input, out]() mutable {
      const T g = out.grad()[0];
      for (auto& v : input.grad_buffer()) v += g;
    });
  }
  return out;
}

#define OWAN_INSTANTIATE_OPS(T)                                                                              \
  template Tensor<T> conv2d(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t);    \
  template Tensor<T> depthwise_conv2d(Tape<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t);            \
  template Tensor<T> avg_pool_same(Tape<T>&, const Tensor<T>&, std::size_t);                                 \
  template Tensor<T> relu(Tape<T>&, const Tensor<T>&);                                                       \
  template Tensor<T> global_channel_mean(Tape<T>&, const Tensor<T>&);                                        \
  template Tensor<T> dense_nobias(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> softmax(Tape<T>&, const Tensor<T>&);                                                    \
  template Tensor<T> take_column(Tape<T>&, const Tensor<T>&, std::size_t);                                   \
  template Tensor<T> select_row(Tape<T>&, const Tensor<T>&, std::size_t);                                    \
  template Tensor<T> scale_channels(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> concat_channels(Tape<T>&, const std::vector<Tensor<T>>&);                               \
  template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> l1_loss(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> sum(Tape<T>&, const Tensor<T>&);

OWAN_INSTANTIATE_OPS(float)
OWAN_INSTANTIATE_OPS(double)

}  // namespace owan
