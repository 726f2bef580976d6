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
#include <cstdint>
#include <random>
#include <vector>

#include "fcelab/diff/layers.hpp"
#include "fcelab/diff/tape.hpp"

namespace fcelab {

struct FlowConfig {
  std::size_t blocks = 10;
  std::size_t width = 128;
  // Log-scales are squashed to scale_max * tanh(raw / scale_max).
  double scale_max = 5.0;
};

// Affine coupling on 2D inputs. The conditioner sees the input with the
// transformed coordinate masked out and emits (raw log-scale, shift) for
// both coordinates; only the transformed coordinate's pair is applied.
struct CouplingBlock {
  std::size_t passed = 0;
  DenseLayer hidden0;
  DenseLayer hidden1;
  DenseLayer head;
};

// Pair produced by a pass through the flow.
struct FlowOutput {
  Var out;
  Var log_det;  // {N}; log|det d out / d in|
};

struct FlowResult {
  Tensor out;
  Tensor log_det;
};

struct FlowSample {
  Tensor x;         // {N, 2}
  Tensor log_prob;  // {N}, exact log q(x) from the forward path
};

// log N(z; 0, I) for rows of a {N, 2} input.
Var base_log_prob(Var z);

// Normalizing flow x = g(z), z ~ N(0, I), built from alternating coupling
// blocks. Parameter names follow flow.block{i}.layer{j}.{W,b}.
class FlowModel {
 public:
  // Hidden layers get fan-in uniform weights from `seed`; heads start at zero
  // so a fresh flow is the identity map.
  explicit FlowModel(FlowConfig config = {}, std::uint64_t seed = 0);

  const FlowConfig& config() const { return config_; }
  const std::vector<CouplingBlock>& blocks() const { return blocks_; }
  std::vector<CouplingBlock>& blocks() { return blocks_; }

  // Generative direction z -> x.
  FlowOutput forward(Tape& tape, Var z, Track track = Track::params) const;
  // x -> z; log_det is the inverse log-determinant.
  FlowOutput inverse(Tape& tape, Var x, Track track = Track::params) const;
  Var log_prob(Tape& tape, Var x, Track track = Track::params) const;

  // Value-only evaluation, processed in fixed-size row chunks.
  FlowResult forward(const Tensor& z) const;
  FlowResult inverse(const Tensor& x) const;
  Tensor log_prob(const Tensor& x) const;

  FlowSample sample(std::size_t n, std::uint64_t seed) const;
  FlowSample sample(std::size_t n, std::mt19937_64& rng) const;
  // Density of forward(z) computed without inversion.
  FlowSample push_forward(const Tensor& z) const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  // Re-draws every head layer from U(-bound, bound); yields a non-trivial
  // random flow.
  void randomize_heads(std::mt19937_64& rng, double bound);

 private:
  FlowConfig config_;
  std::vector<CouplingBlock> blocks_;
};

// Draws an {n, 2} standard normal matrix.
Tensor standard_normal(std::size_t n, std::mt19937_64& rng);

}  // namespace fcelab
