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

#include "fcelab/diff/layers.hpp"

#include <cmath>

#include "fcelab/diff/ops.hpp"

namespace fcelab {

DenseLayer::DenseLayer(const std::string& prefix, std::size_t in,
                       std::size_t out)
    : weight(prefix + ".W", Tensor(Shape{in, out})),
      bias(prefix + ".b", Tensor(Shape{out})) {}

Var DenseLayer::operator()(Tape& tape, Var x, Track track) const {
  return affine(x, tape.parameter(weight, track), tape.parameter(bias, track));
}

void DenseLayer::init_fan_in(std::mt19937_64& rng) {
  init_uniform(rng, 1.0 / std::sqrt(static_cast<double>(in_features())));
}

void DenseLayer::init_uniform(std::mt19937_64& rng, double bound) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (double& w : weight.value.data()) w = u(rng);
  for (double& b : bias.value.data()) b = u(rng);
}

void DenseLayer::init_zero() {
  weight.value.fill(0.0);
  bias.value.fill(0.0);
}

}  // namespace fcelab
