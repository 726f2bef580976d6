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
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fcelab/diff/tensor.hpp"

namespace fcelab {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape
// lives.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Whether a model's parameters take part in differentiation for one pass.
enum class Track { params, frozen };

struct BackwardContext {
  const Tensor& output;
  const Tensor& grad_output;
  std::span<const Tensor* const> inputs;
  // One slot per input; null when that input does not need a gradient.
  // Rules accumulate (+=) into non-null slots.
  std::span<Tensor* const> grad_inputs;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

// Records primitive applications in execution order, which is a topological
// order of the computation graph, and runs a single reverse sweep.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // A leaf whose gradient is readable through grad() after backward().
  Var variable(Tensor value);
  // Binds a parameter once per tape. With Track::params, backward()
  // accumulates into p.grad; with Track::frozen the value is a constant.
  Var parameter(const Parameter& p, Track track = Track::params);

  // Appends a primitive result. Throws NumericError on non-finite output.
  Var record(std::string_view primitive, Tensor value,
             std::span<const Var> inputs, BackwardFn backward);

  // Reverse sweep from a scalar root. A tape supports exactly one sweep.
  void backward(Var root);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  const Tensor& grad(Var v) const;

  bool consumed() const noexcept { return consumed_; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  enum class Kind { constant, variable, parameter, op };

  struct Node {
    Kind kind = Kind::constant;
    Tensor value{};
    bool requires_grad = false;
    std::vector<std::size_t> inputs{};
    BackwardFn backward{};
    const Parameter* param = nullptr;
    Tensor grad{};
    bool has_grad = false;
  };

  Var push(Node node);
  void check_owned(Var v) const;

  std::vector<Node> nodes_;
  // Indexed by Track: a parameter may be bound once frozen and once tracked.
  std::unordered_map<const Parameter*, std::size_t> bound_params_[2];
  bool consumed_ = false;
};

}  // namespace fcelab
