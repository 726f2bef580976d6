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

#include "fcelab/estimators/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fcelab/errors.hpp"
#include "fcelab/util/log.hpp"

namespace fcelab {

OptimizerState make_optimizer(const OptimizerConfig& config,
                              std::span<Parameter* const> params) {
  if (!(config.learning_rate > 0.0)) {
    throw std::invalid_argument("optimizer: learning rate must be positive");
  }
  OptimizerState state{config, 0, {}, {}};
  for (const Parameter* p : params) {
    state.first_moment.emplace_back(p->value.shape());
    state.second_moment.emplace_back(p->value.shape());
  }
  return state;
}

bool optimizer_step(OptimizerState& state, std::span<Parameter* const> params) {
  if (params.size() != state.first_moment.size()) {
    throw ShapeError("optimizer_step: state tracks " +
                     std::to_string(state.first_moment.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  bool finite = true;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->grad.shape() != state.first_moment[k].shape()) {
      throw ShapeError("optimizer_step: gradient shape mismatch for " +
                       params[k]->name);
    }
    finite = finite && params[k]->grad.all_finite();
  }
  if (!finite) {
    log_warning("optimizer_step: non-finite gradient, step skipped");
    for (Parameter* p : params) p->zero_grad();
    return false;
  }

  const OptimizerConfig& c = state.config;
  const auto t = static_cast<double>(++state.step);
  const double first_correction = 1.0 - std::pow(c.beta1, t);
  const double second_correction = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto value = params[k]->value.data();
    auto grad = params[k]->grad.data();
    auto m = state.first_moment[k].data();
    auto v = state.second_moment[k].data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      if (c.kind == OptimizerKind::adam) {
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
        const double m_hat = m[i] / first_correction;
        const double v_hat = v[i] / second_correction;
        value[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
      } else {
        v[i] = std::max(c.beta2 * v[i], std::abs(g));
        value[i] -= (c.learning_rate / first_correction) * m[i] / (v[i] + c.epsilon);
      }
    }
    params[k]->zero_grad();
  }
  return true;
}

}  // namespace fcelab
