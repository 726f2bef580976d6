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

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fcelab/diff/tape.hpp"

// Closed primitive set of the differentiation engine. Every primitive has a
// backward rule and is covered by the gradient-check suite.
namespace fcelab {

inline constexpr double kDefaultLeakySlope = 0.2;

// x: {N, in}, weight: {in, out}, bias: {out}  ->  {N, out}
Var affine(Var x, Var weight, Var bias);

// Same-shape elementwise arithmetic.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// Multiplication by a fixed scalar.
Var scale(Var x, double factor);

Var leaky_relu(Var x, double slope = kDefaultLeakySlope);
Var relu(Var x);
Var tanh(Var x);
Var exp(Var x);
Var log(Var x);
Var sigmoid(Var x);
Var softplus(Var x);

Var sum(Var x);
Var sum(Var x, std::size_t axis);
Var mean(Var x);
Var logsumexp(Var x, std::size_t axis);

Var concat(std::span<const Var> parts, std::size_t axis);
// Elements [begin, end) along `axis`; the building block of split().
Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end);
std::vector<Var> split(Var x, std::size_t axis,
                       std::span<const std::size_t> sizes);

// Expands size-1 or missing leading axes to `shape`.
Var broadcast_to(Var x, const Shape& shape);

// Composites.
inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var neg(Var x) { return scale(x, -1.0); }
// log sigma(x) = -softplus(-x)
inline Var log_sigmoid(Var x) { return neg(softplus(neg(x))); }
Var add_scalar(Var x, double value);
// Column `col` of an {N, K} matrix as an {N} vector.
Var column(Var x, std::size_t col);

}  // namespace fcelab
