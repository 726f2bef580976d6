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

#include "fcelab/diff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "fcelab/errors.hpp"

namespace fcelab {
namespace {

double relative_error(double analytic, double numeric) {
  const double denom =
      std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

double finite_value(Var root) {
  const double v = root.value().item();
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite value");
  return v;
}

}  // namespace

double grad_check(const ScalarOfInput& f, const Tensor& point, double step) {
  Tensor analytic;
  {
    Tape tape;
    Var x = tape.variable(point);
    Var root = f(x);
    finite_value(root);
    tape.backward(root);
    analytic = tape.grad(x);
  }
  auto eval = [&](const Tensor& at) {
    Tape tape;
    return finite_value(f(tape.constant(at)));
  };
  double worst = 0.0;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + step;
    const double up = eval(probe);
    probe[i] = point[i] - step;
    const double down = eval(probe);
    probe[i] = point[i];
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2 * step)));
  }
  return worst;
}

double grad_check_params(const ScalarOfParams& f,
                         std::span<Parameter* const> params, double step,
                         std::size_t max_coords, std::uint64_t seed) {
  std::vector<Tensor> saved_grads;
  for (Parameter* p : params) {
    saved_grads.push_back(p->grad);
    p->zero_grad();
  }
  {
    Tape tape;
    Var root = f(tape);
    finite_value(root);
    tape.backward(root);
  }
  std::vector<Tensor> analytic;
  for (Parameter* p : params) analytic.push_back(p->grad);

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k]->value.size(); ++i) {
      coords.emplace_back(k, i);
    }
  }
  if (max_coords > 0 && coords.size() > max_coords) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coords);
  }

  auto eval = [&] {
    Tape tape;
    return finite_value(f(tape));
  };
  double worst = 0.0;
  for (auto [k, i] : coords) {
    double& slot = params[k]->value[i];
    const double original = slot;
    slot = original + step;
    const double up = eval();
    slot = original - step;
    const double down = eval();
    slot = original;
    worst = std::max(worst,
                     relative_error(analytic[k][i], (up - down) / (2 * step)));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    params[k]->grad = std::move(saved_grads[k]);
  }
  return worst;
}

}  // namespace fcelab
