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
#include <random>
#include <string>

#include "fcelab/diff/tape.hpp"

namespace fcelab {

// Fully-connected layer y = x W + b with W stored as {in, out}.
struct DenseLayer {
  DenseLayer() = default;
  DenseLayer(const std::string& prefix, std::size_t in, std::size_t out);

  std::size_t in_features() const { return weight.value.dim(0); }
  std::size_t out_features() const { return weight.value.dim(1); }

  Var operator()(Tape& tape, Var x, Track track) const;

  // U(-1/sqrt(in), 1/sqrt(in)) for weights and biases.
  void init_fan_in(std::mt19937_64& rng);
  void init_uniform(std::mt19937_64& rng, double bound);
  void init_zero();

  Parameter weight;
  Parameter bias;
};

}  // namespace fcelab
