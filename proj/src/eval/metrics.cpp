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

#include "fcelab/eval/metrics.hpp"

#include <cmath>
#include <string>

#include "fcelab/errors.hpp"

namespace fcelab {

LogDensityFn ebm_log_density(const EnergyModel& model, std::size_t head) {
  if (head >= model.heads()) {
    throw std::out_of_range("head " + std::to_string(head) + " of a " +
                            std::to_string(model.heads()) + "-head model");
  }
  return [&model, head](const Tensor& x) { return model.log_unnormalized(x, head); };
}

LogDensityFn flow_log_density(const FlowModel& flow) {
  return [&flow](const Tensor& x) { return flow.log_prob(x); };
}

Tensor mse_eval_points(const GroundTruth& truth, std::size_t n, std::uint64_t seed) {
  return sample(truth, n, seed).points;
}

double density_mse(const Tensor& model_values, const GaussianMixture2D& truth,
                   const Tensor& points) {
  if (model_values.size() != points.dim(0)) {
    throw ShapeError("density_mse: " + std::to_string(model_values.size()) +
                     " values for " + std::to_string(points.dim(0)) + " points");
  }
  if (points.dim(0) == 0) throw std::invalid_argument("density_mse: no points");
  const std::vector<double> truth_values = truth.log_density(points);
  double total = 0.0;
  for (std::size_t i = 0; i < truth_values.size(); ++i) {
    if (!std::isfinite(model_values[i])) {
      throw NumericError("density_mse: non-finite model log-density at point " +
                         std::to_string(i));
    }
    const double d = model_values[i] - truth_values[i];
    total += d * d;
  }
  return total / static_cast<double>(truth_values.size());
}

double density_mse(const LogDensityFn& model, const GaussianMixture2D& truth,
                   const Tensor& points) {
  return density_mse(model(points), truth, points);
}

double density_mse(const DensityGrid& grid, const GaussianMixture2D& truth) {
  return density_mse(grid.values, truth, grid_centers(grid.spec));
}

double mean_nll(const LogDensityFn& model, const Tensor& points) {
  const Tensor v = model(points);
  double total = 0.0;
  for (double x : v.data()) total -= x;
  const double out = total / static_cast<double>(v.size());
  if (!std::isfinite(out)) throw NumericError("mean_nll: non-finite");
  return out;
}

}  // namespace fcelab
