// Copyright 2026 The fcelab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fcelab/diff/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "fcelab/errors.hpp"

namespace fcelab {
namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::RowVectorXd>;

[[noreturn]] void shape_mismatch(std::string_view primitive,
                                 std::initializer_list<Shape> shapes) {
  std::string msg(primitive);
  msg += ": incompatible shapes";
  for (const Shape& s : shapes) msg += " " + shape_string(s);
  throw ShapeError(msg);
}

void require_same_shape(std::string_view primitive, Var a, Var b) {
  if (a.shape() != b.shape()) shape_mismatch(primitive, {a.shape(), b.shape()});
}

// Splits a shape around `axis` into outer * extent * inner.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(std::string_view primitive, const Shape& shape,
                     std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(primitive) + ": axis " +
                     std::to_string(axis) + " out of range for shape " +
                     shape_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out = shape;
  out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  return out;
}

// Elementwise unary primitive; `derivative` maps (x, y) to dy/dx.
template <typename Forward, typename Derivative>
Var unary(std::string_view primitive, Var x, Forward forward,
          Derivative derivative) {
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
  const std::array<Var, 1> inputs{x};
  return x.tape().record(
      primitive, std::move(out), inputs,
      [derivative](const BackwardContext& ctx) {
        Tensor* gx = ctx.grad_inputs[0];
        if (gx == nullptr) return;
        const Tensor& xv = *ctx.inputs[0];
        for (std::size_t i = 0; i < xv.size(); ++i) {
          (*gx)[i] += ctx.grad_output[i] * derivative(xv[i], ctx.output[i]);
        }
      });
}

double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double stable_softplus(double v) {
  return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
}

}  // namespace

Var affine(Var x, Var weight, Var bias) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  const Shape& bs = bias.shape();
  if (xs.size() != 2 || ws.size() != 2 || bs.size() != 1 || xs[1] != ws[0] ||
      bs[0] != ws[1]) {
    shape_mismatch("affine", {xs, ws, bs});
  }
  const auto n = static_cast<Eigen::Index>(xs[0]);
  const auto in = static_cast<Eigen::Index>(ws[0]);
  const auto out_dim = static_cast<Eigen::Index>(ws[1]);

  Tensor out(Shape{xs[0], ws[1]});
  MatrixMap y(out.raw(), n, out_dim);
  ConstMatrixMap xm(x.value().raw(), n, in);
  ConstMatrixMap wm(weight.value().raw(), in, out_dim);
  Eigen::Map<const Eigen::RowVectorXd> bm(bias.value().raw(), out_dim);
  if (in <= 4) {
    // GEMM setup dominates for very thin inputs.
    for (Eigen::Index i = 0; i < n; ++i) {
      y.row(i) = bm;
      for (Eigen::Index k = 0; k < in; ++k) y.row(i) += xm(i, k) * wm.row(k);
    }
  } else {
    y.noalias() = xm * wm;
    y.rowwise() += bm;
  }

  const std::array<Var, 3> inputs{x, weight, bias};
  return x.tape().record(
      "affine", std::move(out), inputs,
      [n, in, out_dim](const BackwardContext& ctx) {
        ConstMatrixMap gy(ctx.grad_output.raw(), n, out_dim);
        if (Tensor* gx = ctx.grad_inputs[0]) {
          MatrixMap(gx->raw(), n, in).noalias() +=
              gy * ConstMatrixMap(ctx.inputs[1]->raw(), in, out_dim).transpose();
        }
        if (Tensor* gw = ctx.grad_inputs[1]) {
          MatrixMap(gw->raw(), in, out_dim).noalias() +=
              ConstMatrixMap(ctx.inputs[0]->raw(), n, in).transpose() * gy;
        }
        if (Tensor* gb = ctx.grad_inputs[2]) {
          VectorMap(gb->raw(), out_dim) += gy.colwise().sum();
        }
      });
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::array<Var, 2> inputs{a, b};
  return a.tape().record("add", std::move(out), inputs,
                         [](const BackwardContext& ctx) {
                           for (Tensor* g : ctx.grad_inputs) {
                             if (g == nullptr) continue;
                             for (std::size_t i = 0; i < g->size(); ++i) {
                               (*g)[i] += ctx.grad_output[i];
                             }
                           }
                         });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::array<Var, 2> inputs{a, b};
  return a.tape().record(
      "sub", std::move(out), inputs, [](const BackwardContext& ctx) {
        if (Tensor* ga = ctx.grad_inputs[0]) {
          for (std::size_t i = 0; i < ga->size(); ++i) {
            (*ga)[i] += ctx.grad_output[i];
          }
        }
        if (Tensor* gb = ctx.grad_inputs[1]) {
          for (std::size_t i = 0; i < gb->size(); ++i) {
            (*gb)[i] -= ctx.grad_output[i];
          }
        }
      });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::array<Var, 2> inputs{a, b};
  return a.tape().record(
      "mul", std::move(out), inputs, [](const BackwardContext& ctx) {
        const Tensor& av = *ctx.inputs[0];
        const Tensor& bv = *ctx.inputs[1];
        if (Tensor* ga = ctx.grad_inputs[0]) {
          for (std::size_t i = 0; i < ga->size(); ++i) {
            (*ga)[i] += ctx.grad_output[i] * bv[i];
          }
        }
        if (Tensor* gb = ctx.grad_inputs[1]) {
          for (std::size_t i = 0; i < gb->size(); ++i) {
            (*gb)[i] += ctx.grad_output[i] * av[i];
          }
        }
      });
}

Var scale(Var x, double factor) {
  return unary(
      "scale", x, [factor](double v) { return factor * v; },
      [factor](double, double) { return factor; });
}

Var leaky_relu(Var x, double slope) {
  return unary(
      "leaky_relu", x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Var relu(Var x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Var log(Var x) {
  return unary(
      "log", x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Var sigmoid(Var x) {
  return unary("sigmoid", x, stable_sigmoid,
               [](double, double y) { return y * (1.0 - y); });
}

Var softplus(Var x) {
  return unary("softplus", x, stable_softplus,
               [](double v, double) { return stable_sigmoid(v); });
}

Var sum(Var x) {
  const Tensor& in = x.value();
  double total = 0.0;
  for (double v : in.data()) total += v;
  const std::array<Var, 1> inputs{x};
  return x.tape().record("sum", Tensor::scalar(total), inputs,
                         [](const BackwardContext& ctx) {
                           Tensor* gx = ctx.grad_inputs[0];
                           if (gx == nullptr) return;
                           const double g = ctx.grad_output[0];
                           for (double& v : gx->data()) v += g;
                         });
}

Var sum(Var x, std::size_t axis) {
  const AxisSplit s = split_axis("sum", x.shape(), axis);
  const Tensor& in = x.value();
  Tensor out(drop_axis(x.shape(), axis));
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t j = 0; j < s.extent; ++j) {
      const double* row = in.raw() + (o * s.extent + j) * s.inner;
      double* dst = out.raw() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += row[i];
    }
  }
  const std::array<Var, 1> inputs{x};
  return x.tape().record("sum", std::move(out), inputs,
                         [s](const BackwardContext& ctx) {
                           Tensor* gx = ctx.grad_inputs[0];
                           if (gx == nullptr) return;
                           for (std::size_t o = 0; o < s.outer; ++o) {
                             const double* g = ctx.grad_output.raw() + o * s.inner;
                             for (std::size_t j = 0; j < s.extent; ++j) {
                               double* dst =
                                   gx->raw() + (o * s.extent + j) * s.inner;
                               for (std::size_t i = 0; i < s.inner; ++i) {
                                 dst[i] += g[i];
                               }
                             }
                           }
                         });
}

Var mean(Var x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw ShapeError("mean: empty input");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var logsumexp(Var x, std::size_t axis) {
  const AxisSplit s = split_axis("logsumexp", x.shape(), axis);
  if (s.extent == 0) throw ShapeError("logsumexp: empty reduction axis");
  const Tensor& in = x.value();
  Tensor out(drop_axis(x.shape(), axis));
  auto at = [&](const Tensor& t, std::size_t o, std::size_t j, std::size_t i) {
    return t[(o * s.extent + j) * s.inner + i];
  };
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      double hi = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < s.extent; ++j) hi = std::max(hi, at(in, o, j, i));
      double acc = 0.0;
      for (std::size_t j = 0; j < s.extent; ++j) acc += std::exp(at(in, o, j, i) - hi);
      out[o * s.inner + i] = hi + std::log(acc);
    }
  }
  const std::array<Var, 1> inputs{x};
  return x.tape().record(
      "logsumexp", std::move(out), inputs, [s](const BackwardContext& ctx) {
        Tensor* gx = ctx.grad_inputs[0];
        if (gx == nullptr) return;
        const Tensor& xv = *ctx.inputs[0];
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t j = 0; j < s.extent; ++j) {
            for (std::size_t i = 0; i < s.inner; ++i) {
              const std::size_t k = (o * s.extent + j) * s.inner + i;
              const std::size_t r = o * s.inner + i;
              (*gx)[k] += ctx.grad_output[r] * std::exp(xv[k] - ctx.output[r]);
            }
          }
        }
      });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts[0].shape();
  split_axis("concat", first, axis);
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> extents;
  for (const Var& p : parts) {
    Shape probe = p.shape();
    if (probe.size() != first.size()) shape_mismatch("concat", {first, probe});
    extents.push_back(probe[axis]);
    out_shape[axis] += probe[axis];
    probe[axis] = first[axis];
    if (probe != first) shape_mismatch("concat", {first, p.shape()});
  }
  const AxisSplit s = split_axis("concat", out_shape, axis);
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& src = parts[k].value();
    const std::size_t block = extents[k] * s.inner;
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(src.raw() + o * block, block,
                  out.raw() + o * s.extent * s.inner + offset * s.inner);
    }
    offset += extents[k];
  }
  return parts[0].tape().record(
      "concat", std::move(out), parts,
      [s, extents](const BackwardContext& ctx) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < extents.size(); ++k) {
          const std::size_t block = extents[k] * s.inner;
          if (Tensor* g = ctx.grad_inputs[k]) {
            for (std::size_t o = 0; o < s.outer; ++o) {
              const double* src = ctx.grad_output.raw() +
                                  o * s.extent * s.inner + offset * s.inner;
              double* dst = g->raw() + o * block;
              for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
            }
          }
          offset += extents[k];
        }
      });
}

Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end) {
  const AxisSplit s = split_axis("slice", x.shape(), axis);
  if (begin > end || end > s.extent) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") out of bounds for shape " +
                     shape_string(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const std::size_t block = (end - begin) * s.inner;
  Tensor out(out_shape);
  const Tensor& in = x.value();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(in.raw() + (o * s.extent + begin) * s.inner, block,
                out.raw() + o * block);
  }
  const std::array<Var, 1> inputs{x};
  return x.tape().record(
      "slice", std::move(out), inputs,
      [s, begin, block](const BackwardContext& ctx) {
        Tensor* gx = ctx.grad_inputs[0];
        if (gx == nullptr) return;
        for (std::size_t o = 0; o < s.outer; ++o) {
          const double* src = ctx.grad_output.raw() + o * block;
          double* dst = gx->raw() + (o * s.extent + begin) * s.inner;
          for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
        }
      });
}

std::vector<Var> split(Var x, std::size_t axis,
                       std::span<const std::size_t> sizes) {
  const AxisSplit s = split_axis("split", x.shape(), axis);
  std::size_t total = 0;
  for (std::size_t n : sizes) total += n;
  if (total != s.extent) {
    throw ShapeError("split: sizes sum to " + std::to_string(total) +
                     " but axis has extent " + std::to_string(s.extent));
  }
  std::vector<Var> parts;
  std::size_t begin = 0;
  for (std::size_t n : sizes) {
    parts.push_back(slice(x, axis, begin, begin + n));
    begin += n;
  }
  return parts;
}

Var broadcast_to(Var x, const Shape& shape) {
  const Shape& src = x.shape();
  if (src.size() > shape.size()) shape_mismatch("broadcast_to", {src, shape});
  // Source strides aligned to the target rank; zero on broadcast axes.
  const std::size_t lead = shape.size() - src.size();
  std::vector<std::size_t> strides(shape.size(), 0);
  std::size_t stride = 1;
  for (std::size_t i = src.size(); i-- > 0;) {
    const std::size_t t = i + lead;
    if (src[i] == shape[t]) {
      strides[t] = src[i] == 1 ? 0 : stride;
    } else if (src[i] != 1) {
      shape_mismatch("broadcast_to", {src, shape});
    }
    stride *= src[i];
  }
  // Flat source index for every output element.
  const std::size_t n = shape_size(shape);
  std::vector<std::size_t> index(n);
  {
    std::vector<std::size_t> counter(shape.size(), 0);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < n; ++k) {
      index[k] = offset;
      for (std::size_t d = shape.size(); d-- > 0;) {
        ++counter[d];
        offset += strides[d];
        if (counter[d] < shape[d]) break;
        offset -= strides[d] * counter[d];
        counter[d] = 0;
      }
    }
  }
  const Tensor& in = x.value();
  Tensor out(shape);
  for (std::size_t k = 0; k < n; ++k) out[k] = in[index[k]];
  const std::array<Var, 1> inputs{x};
  return x.tape().record("broadcast_to", std::move(out), inputs,
                         [index = std::move(index)](const BackwardContext& ctx) {
                           Tensor* gx = ctx.grad_inputs[0];
                           if (gx == nullptr) return;
                           for (std::size_t k = 0; k < index.size(); ++k) {
                             (*gx)[index[k]] += ctx.grad_output[k];
                           }
                         });
}

Var add_scalar(Var x, double value) {
  Var c = x.tape().constant(Tensor::scalar(value));
  return add(x, broadcast_to(c, x.shape()));
}

Var column(Var x, std::size_t col) {
  if (x.shape().size() != 2) shape_mismatch("column", {x.shape()});
  return sum(slice(x, 1, col, col + 1), 1);
}

}  // namespace fcelab
