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

#include "fcelab/estimators/diagnostics.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "fcelab/diff/ops.hpp"
#include "fcelab/diff/tape.hpp"
#include "fcelab/errors.hpp"

namespace fcelab {
namespace {

double log_add_exp(double a, double b) {
  const double m = std::max(a, b);
  if (m == -INFINITY) return m;
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double mean_of(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v;
  return s / static_cast<double>(t.size());
}

}  // namespace

double jsd_diagnostic(const FlowModel& flow, const GaussianMixture2D& truth,
                      std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("jsd_diagnostic: n must be > 0");
  std::mt19937_64 rng(seed);
  const Tensor from_p = truth.sample(n, rng);
  const FlowSample from_q = flow.sample(n, rng);

  const std::vector<double> lp_p = truth.log_density(from_p);
  const Tensor lq_p = flow.log_prob(from_p);
  const std::vector<double> lp_q = truth.log_density(from_q.x);
  const Tensor& lq_q = from_q.log_prob;

  // KL(p || m) and KL(q || m) with m the equal mixture.
  double kl_p = 0.0;
  double kl_q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    kl_p += lp_p[i] - log_add_exp(lp_p[i], lq_p[i]);
    kl_q += lq_q[i] - log_add_exp(lp_q[i], lq_q[i]);
  }
  const double jsd = 0.5 * (kl_p + kl_q) / static_cast<double>(n) + std::numbers::ln2;
  if (!std::isfinite(jsd)) throw NumericError("jsd_diagnostic: non-finite estimate");
  return jsd;
}

double jsd_diagnostic(const FlowModel& flow, const GroundTruth& truth,
                      std::size_t n, std::uint64_t seed) {
  return jsd_diagnostic(flow, closed_form(truth), n, seed);
}

double variational_free_energy(const FlowModel& flow, const EnergyModel& ebm,
                               std::size_t n, std::uint64_t seed,
                               DensityPath path) {
  if (n == 0) throw std::invalid_argument("variational_free_energy: n must be > 0");
  std::mt19937_64 rng(seed);
  const Tensor z = standard_normal(n, rng);
  FlowSample s = flow.push_forward(z);
  const Tensor log_q = path == DensityPath::forward ? s.log_prob : flow.log_prob(s.x);
  const double value = mean_of(log_q) - mean_of(ebm.log_unnormalized(s.x));
  if (!std::isfinite(value)) {
    throw NumericError("variational_free_energy: non-finite estimate");
  }
  return value;
}

std::vector<Tensor> ebm_mle_gradient(const EnergyModel& ebm, const Tensor& data,
                                     const Tensor& model_samples,
                                     std::size_t head) {
  EnergyModel copy = ebm;
  Tape tape;
  Var objective = mean(copy.energy(tape, tape.constant(data), head)) -
                  mean(copy.energy(tape, tape.constant(model_samples), head));
  for (Parameter* p : copy.parameters()) p->zero_grad();
  tape.backward(objective);
  std::vector<Tensor> grads;
  for (Parameter* p : copy.parameters()) grads.push_back(p->grad);
  return grads;
}

}  // namespace fcelab
