// SPDX-License-Identifier: Apache-2.0
#include "agenet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "agenet/kernels.hpp"

namespace agenet::ops {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

Tape& tape_of(Var v) {
  require(v.tape != nullptr, "op applied to an unbound Var");
  return *v.tape;
}

kernels::Conv2dGeometry conv_geometry(const Shape& x, const Shape& k, std::size_t stride,
                                      std::size_t padding) {
  require(x.size() == 4, "conv2d: input must be [N,C,H,W], got " + shape_string(x));
  require(k.size() == 4, "conv2d: kernel must be [C_out,C_in,k,k], got " + shape_string(k));
  require(k[2] == k[3], "conv2d: kernel must be square, got " + shape_string(k));
  require(k[2] % 2 == 1, "conv2d: kernel size must be odd, got " + std::to_string(k[2]));
  require(k[1] == x[1], "conv2d: input channels " + std::to_string(x[1]) + " vs kernel " +
                            shape_string(k));
  require(stride >= 1, "conv2d: stride must be positive");
  require(x[2] + 2 * padding >= k[2] && x[3] + 2 * padding >= k[2],
          "conv2d: kernel " + std::to_string(k[2]) + " larger than padded input " +
              shape_string(x) + " (padding " + std::to_string(padding) + ")");
  kernels::Conv2dGeometry g;
  g.batch = x[0];
  g.in_channels = x[1];
  g.in_h = x[2];
  g.in_w = x[3];
  g.out_channels = k[0];
  g.kernel = k[2];
  g.stride = stride;
  g.padding = padding;
  return g;
}

Var conv2d_impl(Var input, Var kernel, const Var* bias, std::size_t stride, std::size_t padding) {
  const auto g = conv_geometry(input.shape(), kernel.shape(), stride, padding);
  if (bias != nullptr) {
    require(bias->shape() == Shape{g.out_channels},
            "conv2d: bias must be [" + std::to_string(g.out_channels) + "], got " +
                shape_string(bias->shape()));
  }
  Tensor out(Shape{g.batch, g.out_channels, g.out_h(), g.out_w()});
  kernels::parallel::conv2d_forward(g, input.value().data(), kernel.value().data(),
                                    bias != nullptr ? bias->value().data() : nullptr, out.data());
  std::vector<Var> inputs{input, kernel};
  if (bias != nullptr) inputs.push_back(*bias);
  const bool has_bias = bias != nullptr;
  return tape_of(input).record(std::move(out), std::move(inputs), [g, has_bias](BackwardContext& c) {
    const double* dy = c.output_grad().data();
    if (Tensor* dx = c.input_grad(0)) {
      kernels::parallel::conv2d_backward_input(g, dy, c.input(1).data(), dx->data());
    }
    Tensor* dw = c.input_grad(1);
    Tensor* db = has_bias ? c.input_grad(2) : nullptr;
    if (dw != nullptr || db != nullptr) {
      if (dw != nullptr) {
        kernels::parallel::conv2d_backward_weight(g, dy, c.input(0).data(), dw->data(),
                                                  db != nullptr ? db->data() : nullptr);
      } else {
        const std::size_t p = g.out_h() * g.out_w();
        for (std::size_t n = 0; n < g.batch; ++n)
          for (std::size_t co = 0; co < g.out_channels; ++co) {
            double s = 0.0;
            for (std::size_t q = 0; q < p; ++q) s += dy[(n * g.out_channels + co) * p + q];
            (*db)[co] += s;
          }
      }
    }
  });
}

}  // namespace

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

Var affine(Var input, Var weight, Var bias) {
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  require(xs.size() == 2, "affine: input must be [N,D_in], got " + shape_string(xs));
  require(ws.size() == 2, "affine: weight must be [D_in,D_out], got " + shape_string(ws));
  require(xs[1] == ws[0], "affine: input " + shape_string(xs) + " does not conform to weight " +
                              shape_string(ws));
  require(bias.shape() == Shape{ws[1]},
          "affine: bias must be [" + std::to_string(ws[1]) + "], got " + shape_string(bias.shape()));
  const std::size_t n = xs[0], d_in = xs[1], d_out = ws[1];
  Tensor out(Shape{n, d_out});
  kernels::parallel::affine_forward(n, d_in, d_out, input.value().data(), weight.value().data(),
                                    bias.value().data(), out.data());
  return tape_of(input).record(std::move(out), {input, weight, bias},
                               [n, d_in, d_out](BackwardContext& c) {
                                 Tensor* dx = c.input_grad(0);
                                 Tensor* dw = c.input_grad(1);
                                 Tensor* db = c.input_grad(2);
                                 kernels::parallel::affine_backward(
                                     n, d_in, d_out, c.output_grad().data(), c.input(0).data(),
                                     c.input(1).data(), dx ? dx->data() : nullptr,
                                     dw ? dw->data() : nullptr, db ? db->data() : nullptr);
                               });
}

Var conv2d(Var input, Var kernel, Var bias, std::size_t stride, std::size_t padding) {
  return conv2d_impl(input, kernel, &bias, stride, padding);
}

Var conv2d(Var input, Var kernel, std::size_t stride, std::size_t padding) {
  return conv2d_impl(input, kernel, nullptr, stride, padding);
}

Var conv1d(Var input, Var kernel) {
  const Shape& xs = input.shape();
  require(xs.size() == 2, "conv1d: input must be [N,L], got " + shape_string(xs));
  require(kernel.shape().size() == 1, "conv1d: kernel must be rank 1, got " +
                                          shape_string(kernel.shape()));
  const std::size_t k = kernel.shape()[0];
  require(k % 2 == 1, "conv1d: kernel size must be odd, got " + std::to_string(k));
  const std::size_t n = xs[0], len = xs[1];
  const long half = static_cast<long>(k / 2);
  const double* x = input.value().data();
  const double* w = kernel.value().data();
  Tensor out(Shape{n, len});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t l = 0; l < len; ++l) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const long src = static_cast<long>(l + j) - half;
        if (src >= 0 && src < static_cast<long>(len)) acc += x[r * len + src] * w[j];
      }
      out[r * len + l] = acc;
    }
  return tape_of(input).record(std::move(out), {input, kernel}, [n, len, k, half](BackwardContext& c) {
    const double* dy = c.output_grad().data();
    const double* x = c.input(0).data();
    const double* w = c.input(1).data();
    Tensor* dx = c.input_grad(0);
    Tensor* dw = c.input_grad(1);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t l = 0; l < len; ++l) {
        const double g = dy[r * len + l];
        for (std::size_t j = 0; j < k; ++j) {
          const long src = static_cast<long>(l + j) - half;
          if (src < 0 || src >= static_cast<long>(len)) continue;
          if (dx != nullptr) (*dx)[r * len + src] += g * w[j];
          if (dw != nullptr) (*dw)[j] += g * x[r * len + src];
        }
      }
  });
}

Var maxpool2d(Var input, std::size_t kernel, std::size_t stride, std::size_t padding) {
  const Shape& xs = input.shape();
  require(xs.size() == 4, "maxpool2d: input must be [N,C,H,W], got " + shape_string(xs));
  require(kernel >= 1 && stride >= 1, "maxpool2d: kernel and stride must be positive");
  require(padding < kernel, "maxpool2d: padding must be smaller than the window");
  require(xs[2] + 2 * padding >= kernel && xs[3] + 2 * padding >= kernel,
          "maxpool2d: window " + std::to_string(kernel) + " does not fit padded input " +
              shape_string(xs));
  kernels::Pool2dGeometry g;
  g.batch = xs[0];
  g.channels = xs[1];
  g.in_h = xs[2];
  g.in_w = xs[3];
  g.kernel = kernel;
  g.stride = stride;
  g.padding = padding;
  Tensor out(Shape{g.batch, g.channels, g.out_h(), g.out_w()});
  std::vector<std::size_t> argmax(out.size());
  kernels::parallel::maxpool2d_forward(g, input.value().data(), out.data(), argmax.data());
  return tape_of(input).record(std::move(out), {input},
                               [argmax = std::move(argmax)](BackwardContext& c) {
                                 if (Tensor* dx = c.input_grad(0)) {
                                   kernels::maxpool2d_backward(argmax.size(),
                                                               c.output_grad().data(),
                                                               argmax.data(), dx->data());
                                 }
                               });
}

Var global_avg_pool(Var input) {
  const Shape& xs = input.shape();
  require(xs.size() == 4, "global_avg_pool: input must be [N,C,H,W], got " + shape_string(xs));
  require(xs[2] >= 1 && xs[3] >= 1, "global_avg_pool: empty spatial extent");
  const std::size_t planes = xs[0] * xs[1], area = xs[2] * xs[3];
  const double inv = 1.0 / static_cast<double>(area);
  Tensor out(Shape{xs[0], xs[1]});
  const double* x = input.value().data();
  for (std::size_t p = 0; p < planes; ++p) {
    double s = 0.0;
    for (std::size_t i = 0; i < area; ++i) s += x[p * area + i];
    out[p] = s * inv;
  }
  return tape_of(input).record(std::move(out), {input}, [planes, area, inv](BackwardContext& c) {
    Tensor* dx = c.input_grad(0);
    if (dx == nullptr) return;
    const double* dy = c.output_grad().data();
    for (std::size_t p = 0; p < planes; ++p) {
      const double g = dy[p] * inv;
      for (std::size_t i = 0; i < area; ++i) (*dx)[p * area + i] += g;
    }
  });
}

Var add(Var a, Var b) {
  require(a.shape() == b.shape(),
          "add: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  Tensor out = a.value();
  out.add_(b.value());
  return tape_of(a).record(std::move(out), {a, b}, [](BackwardContext& c) {
    if (Tensor* da = c.input_grad(0)) da->add_(c.output_grad());
    if (Tensor* db = c.input_grad(1)) db->add_(c.output_grad());
  });
}

Var mul(Var a, Var b) {
  require(a.shape() == b.shape(),
          "mul: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return tape_of(a).record(std::move(out), {a, b}, [](BackwardContext& c) {
    const Tensor& dy = c.output_grad();
    if (Tensor* da = c.input_grad(0)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*da)[i] += dy[i] * c.input(1)[i];
    }
    if (Tensor* db = c.input_grad(1)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*db)[i] += dy[i] * c.input(0)[i];
    }
  });
}

Var mul_channel_broadcast(Var x, Var weights) {
  const Shape& xs = x.shape();
  require(xs.size() == 4, "mul_channel_broadcast: x must be [N,C,H,W], got " + shape_string(xs));
  require(weights.shape() == Shape{xs[0], xs[1]},
          "mul_channel_broadcast: weights must be [N,C] = " + shape_string({xs[0], xs[1]}) +
              ", got " + shape_string(weights.shape()));
  const std::size_t planes = xs[0] * xs[1], area = xs[2] * xs[3];
  Tensor out = x.value();
  const double* w = weights.value().data();
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t i = 0; i < area; ++i) out[p * area + i] *= w[p];
  return tape_of(x).record(std::move(out), {x, weights}, [planes, area](BackwardContext& c) {
    const double* dy = c.output_grad().data();
    if (Tensor* dx = c.input_grad(0)) {
      const double* w = c.input(1).data();
      for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t i = 0; i < area; ++i) (*dx)[p * area + i] += dy[p * area + i] * w[p];
    }
    if (Tensor* dw = c.input_grad(1)) {
      const double* xv = c.input(0).data();
      for (std::size_t p = 0; p < planes; ++p) {
        double s = 0.0;
        for (std::size_t i = 0; i < area; ++i) s += dy[p * area + i] * xv[p * area + i];
        (*dw)[p] += s;
      }
    }
  });
}

Var sigmoid(Var x) {
  Tensor out = x.value();
  for (auto& v : out.values()) v = stable_sigmoid(v);
  return tape_of(x).record(std::move(out), {x}, [](BackwardContext& c) {
    Tensor* dx = c.input_grad(0);
    if (dx == nullptr) return;
    const Tensor& y = c.output();
    const Tensor& dy = c.output_grad();
    for (std::size_t i = 0; i < y.size(); ++i) (*dx)[i] += dy[i] * y[i] * (1.0 - y[i]);
  });
}

Var relu(Var x) {
  Tensor out = x.value();
  for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
  return tape_of(x).record(std::move(out), {x}, [](BackwardContext& c) {
    Tensor* dx = c.input_grad(0);
    if (dx == nullptr) return;
    const Tensor& xv = c.input(0);
    const Tensor& dy = c.output_grad();
    for (std::size_t i = 0; i < xv.size(); ++i) {
      if (xv[i] > 0.0) (*dx)[i] += dy[i];
    }
  });
}

Var scale(Var x, double factor) {
  Tensor out = x.value();
  for (auto& v : out.values()) v *= factor;
  return tape_of(x).record(std::move(out), {x}, [factor](BackwardContext& c) {
    Tensor* dx = c.input_grad(0);
    if (dx == nullptr) return;
    const Tensor& dy = c.output_grad();
    for (std::size_t i = 0; i < dy.size(); ++i) (*dx)[i] += dy[i] * factor;
  });
}

Var concat(std::span<const Var> parts) {
  require(!parts.empty(), "concat: no operands");
  const Shape& first = parts[0].shape();
  require(first.size() == 2 || first.size() == 4,
          "concat: operands must be rank 2 or 4, got " + shape_string(first));
  const std::size_t outer = first[0];
  std::size_t inner = 1;
  for (std::size_t a = 2; a < first.size(); ++a) inner *= first[a];
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size() && s[0] == first[0];
    for (std::size_t a = 2; ok && a < s.size(); ++a) ok = s[a] == first[a];
    require(ok, "concat: operand " + shape_string(s) + " incompatible with " + shape_string(first));
    widths.push_back(s[1]);
    total += s[1];
  }
  Shape out_shape = first;
  out_shape[1] = total;
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const double* src = parts[i].value().data();
    const std::size_t block = widths[i] * inner;
    for (std::size_t n = 0; n < outer; ++n)
      std::copy(src + n * block, src + (n + 1) * block, out.data() + (n * total + offset) * inner);
    offset += widths[i];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape_of(parts[0]).record(std::move(out), std::move(inputs),
                                  [widths, outer, inner, total](BackwardContext& c) {
                                    const double* dy = c.output_grad().data();
                                    std::size_t offset = 0;
                                    for (std::size_t i = 0; i < widths.size(); ++i) {
                                      const std::size_t block = widths[i] * inner;
                                      if (Tensor* dx = c.input_grad(i)) {
                                        for (std::size_t n = 0; n < outer; ++n) {
                                          const double* src = dy + (n * total + offset) * inner;
                                          for (std::size_t j = 0; j < block; ++j)
                                            (*dx)[n * block + j] += src[j];
                                        }
                                      }
                                      offset += widths[i];
                                    }
                                  });
}

Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return tape_of(x).record(Tensor::scalar(s), {x}, [](BackwardContext& c) {
    Tensor* dx = c.input_grad(0);
    if (dx == nullptr) return;
    const double g = c.output_grad()[0];
    for (auto& v : dx->values()) v += g;
  });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return tape_of(x).record(std::move(out), {x}, [](BackwardContext& c) {
    Tensor* dx = c.input_grad(0);
    if (dx == nullptr) return;
    const Tensor& dy = c.output_grad();
    for (std::size_t i = 0; i < dy.size(); ++i) (*dx)[i] += dy[i];
  });
}

Var detach(Var x) { return tape_of(x).constant(x.value()); }

Var softmax_xent(Var logits, std::span<const int> true_class) {
  const Shape& s = logits.shape();
  require(s.size() == 2, "softmax_xent: logits must be [N,C], got " + shape_string(s));
  const std::size_t n = s[0], classes = s[1];
  require(true_class.size() == n, "softmax_xent: " + std::to_string(true_class.size()) +
                                      " labels for " + std::to_string(n) + " rows");
  require(classes >= 1, "softmax_xent: no classes");
  for (std::size_t r = 0; r < n; ++r) {
    require(true_class[r] >= 0 && static_cast<std::size_t>(true_class[r]) < classes,
            "softmax_xent: class " + std::to_string(true_class[r]) + " out of range [0," +
                std::to_string(classes) + ") at row " + std::to_string(r));
  }
  const double* z = logits.value().data();
  Tensor probs(Shape{n, classes});
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double* zr = z + r * classes;
    const double m = *std::max_element(zr, zr + classes);
    double denom = 0.0;
    for (std::size_t j = 0; j < classes; ++j) denom += std::exp(zr[j] - m);
    const double lse = m + std::log(denom);
    loss += lse - zr[true_class[r]];
    for (std::size_t j = 0; j < classes; ++j) probs[r * classes + j] = std::exp(zr[j] - lse);
  }
  std::vector<int> labels(true_class.begin(), true_class.end());
  return tape_of(logits).record(
      Tensor::scalar(loss), {logits},
      [probs = std::move(probs), labels = std::move(labels), classes](BackwardContext& c) {
        Tensor* dz = c.input_grad(0);
        if (dz == nullptr) return;
        const double g = c.output_grad()[0];
        for (std::size_t r = 0; r < labels.size(); ++r)
          for (std::size_t j = 0; j < classes; ++j) {
            const double onehot = static_cast<std::size_t>(labels[r]) == j ? 1.0 : 0.0;
            (*dz)[r * classes + j] += g * (probs[r * classes + j] - onehot);
          }
      });
}

Var l1_loss(Var h, std::span<const double> target) {
  require(h.value().size() == target.size(),
          "l1_loss: " + std::to_string(h.value().size()) + " outputs for " +
              std::to_string(target.size()) + " targets (expected one scalar per sample)");
  double loss = 0.0;
  const double* hv = h.value().data();
  for (std::size_t i = 0; i < target.size(); ++i) loss += std::abs(hv[i] - target[i]);
  std::vector<double> t(target.begin(), target.end());
  return tape_of(h).record(Tensor::scalar(loss), {h}, [t = std::move(t)](BackwardContext& c) {
    Tensor* dh = c.input_grad(0);
    if (dh == nullptr) return;
    const double g = c.output_grad()[0];
    const Tensor& hv = c.input(0);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double d = hv[i] - t[i];
      (*dh)[i] += g * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
    }
  });
}

}  // namespace agenet::ops
