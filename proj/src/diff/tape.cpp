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

#include "fcelab/diff/tape.hpp"

#include <stdexcept>
#include <string>

#include "fcelab/errors.hpp"

namespace fcelab {

const Tensor& Var::value() const { return tape_->value(*this); }

bool Var::requires_grad() const { return tape_->requires_grad(*this); }

Var Tape::push(Node node) {
  if (consumed_) {
    throw std::logic_error("tape: cannot record after backward()");
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) {
    throw std::invalid_argument("tape: variable belongs to another tape");
  }
}

Var Tape::constant(Tensor value) {
  return push(Node{.kind = Kind::constant, .value = std::move(value)});
}

Var Tape::variable(Tensor value) {
  return push(Node{.kind = Kind::variable,
                   .value = std::move(value),
                   .requires_grad = true});
}

Var Tape::parameter(const Parameter& p, Track track) {
  auto& bound = bound_params_[track == Track::params ? 1 : 0];
  if (auto it = bound.find(&p); it != bound.end()) {
    return Var(this, it->second);
  }
  const bool tracked = track == Track::params;
  Var v = push(Node{.kind = tracked ? Kind::parameter : Kind::constant,
                    .value = p.value,
                    .requires_grad = tracked,
                    .param = tracked ? &p : nullptr});
  bound.emplace(&p, v.id_);
  return v;
}

Var Tape::record(std::string_view primitive, Tensor value,
                 std::span<const Var> inputs, BackwardFn backward) {
  if (!value.all_finite()) {
    throw NumericError(std::string(primitive) + ": non-finite output");
  }
  Node node{.kind = Kind::op, .value = std::move(value)};
  for (const Var& in : inputs) {
    check_owned(in);
    node.requires_grad = node.requires_grad || nodes_[in.id_].requires_grad;
  }
  if (node.requires_grad) {
    node.inputs.reserve(inputs.size());
    for (const Var& in : inputs) node.inputs.push_back(in.id_);
    node.backward = std::move(backward);
  }
  return push(std::move(node));
}

void Tape::backward(Var root) {
  check_owned(root);
  if (consumed_) {
    throw std::logic_error("tape: backward() already ran on this tape");
  }
  const Tensor& root_value = nodes_[root.id_].value;
  if (root_value.size() != 1) {
    throw ShapeError("backward: root must be scalar, got shape " +
                     shape_string(root_value.shape()));
  }
  consumed_ = true;

  for (Node& node : nodes_) {
    if (node.kind == Kind::variable) {
      node.grad = Tensor(node.value.shape());
      node.has_grad = true;
    }
  }
  Node& top = nodes_[root.id_];
  if (!top.requires_grad) return;
  if (!top.has_grad) {
    top.grad = Tensor(top.value.shape());
    top.has_grad = true;
  }
  top.grad[0] += 1.0;

  std::vector<const Tensor*> in_values;
  std::vector<Tensor*> in_grads;
  for (std::size_t i = root.id_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.has_grad) continue;
    switch (node.kind) {
      case Kind::constant:
      case Kind::variable:
        break;
      case Kind::parameter: {
        auto out = node.param->grad.data();
        auto g = node.grad.data();
        for (std::size_t k = 0; k < g.size(); ++k) out[k] += g[k];
        break;
      }
      case Kind::op: {
        in_values.clear();
        in_grads.clear();
        for (std::size_t in : node.inputs) {
          Node& src = nodes_[in];
          in_values.push_back(&src.value);
          if (src.requires_grad) {
            if (!src.has_grad) {
              src.grad = Tensor(src.value.shape());
              src.has_grad = true;
            }
            in_grads.push_back(&src.grad);
          } else {
            in_grads.push_back(nullptr);
          }
        }
        node.backward(BackwardContext{node.value, node.grad, in_values,
                                      in_grads});
        // Interior gradients are dead once propagated.
        node.grad = Tensor();
        node.has_grad = false;
        break;
      }
    }
  }
}

const Tensor& Tape::value(Var v) const {
  check_owned(v);
  return nodes_[v.id_].value;
}

bool Tape::requires_grad(Var v) const {
  check_owned(v);
  return nodes_[v.id_].requires_grad;
}

const Tensor& Tape::grad(Var v) const {
  check_owned(v);
  const Node& node = nodes_[v.id_];
  if (node.kind != Kind::variable || !node.has_grad) {
    throw std::logic_error(
        "tape: grad() is only available for variables after backward()");
  }
  return node.grad;
}

}  // namespace fcelab
