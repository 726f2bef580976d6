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

#include "fcelab/eval/gradcheck_suite.hpp"

#include <algorithm>
#include <functional>
#include <random>

#include "fcelab/diff/grad_check.hpp"
#include "fcelab/diff/ops.hpp"
#include "fcelab/ebm/ebm.hpp"
#include "fcelab/estimators/objectives.hpp"
#include "fcelab/flow/flow.hpp"
#include "fcelab/semisup/semisup.hpp"

namespace fcelab {
namespace {

Tensor normal(Shape shape, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = d(rng);
  return t;
}

FlowModel small_flow(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> blocks(1, 4);
  std::uniform_int_distribution<std::size_t> width(3, 8);
  FlowModel flow({blocks(rng), width(rng), 5.0}, rng());
  flow.randomize_heads(rng, 0.5);
  return flow;
}

EnergyModel small_ebm(std::mt19937_64& rng, std::size_t heads) {
  std::uniform_int_distribution<std::size_t> depth(1, 3);
  std::uniform_int_distribution<std::size_t> width(3, 8);
  EbmConfig config;
  config.hidden.assign(depth(rng), 0);
  for (std::size_t& w : config.hidden) w = width(rng);
  config.heads = heads;
  EnergyModel ebm(config, rng());
  ebm.layers().back().init_uniform(rng, 0.5);
  std::uniform_real_distribution<double> c(-1.0, 1.0);
  for (double& v : ebm.normalizer().value.data()) v = c(rng);
  return ebm;
}

std::size_t batch_size(std::mt19937_64& rng) {
  return std::uniform_int_distribution<std::size_t>(2, 6)(rng);
}

using Check = std::function<double(std::mt19937_64&, double)>;

double ops_check(std::mt19937_64& rng, double step) {
  const std::size_t n = batch_size(rng);
  const Tensor x = normal({n, 3}, rng);
  const Tensor w = normal({3, 4}, rng);
  const Tensor b = normal({4}, rng);
  return grad_check(
      [&](Var v) {
        Tape& t = v.tape();
        Var h = affine(v, t.constant(w), t.constant(b));
        Var a = tanh(h) * exp(scale(h, 0.3));
        Var parts[] = {sigmoid(slice(a, 1, 0, 2)), softplus(slice(a, 1, 2, 4))};
        Var joined = concat(parts, 1);
        Var lse = logsumexp(joined, 1);
        Var r = leaky_relu(add_scalar(v, 0.1), 0.3);
        return sum(lse) + mean(log(add_scalar(exp(r), 1.0))) +
               sum(broadcast_to(sum(r, 0), Shape{2, 3}));
      },
      x, step);
}

double flow_params_check(std::mt19937_64& rng, double step) {
  FlowModel flow = small_flow(rng);
  const Tensor x = normal({batch_size(rng), 2}, rng);
  return grad_check_params(
      [&](Tape& t) { return sum(flow.log_prob(t, t.constant(x))); }, flow.parameters(), step);
}

double flow_input_check(std::mt19937_64& rng, double step) {
  FlowModel flow = small_flow(rng);
  const Tensor x = normal({batch_size(rng), 2}, rng);
  return grad_check([&](Var v) { return sum(flow.log_prob(v.tape(), v)); }, x, step);
}

double flow_forward_check(std::mt19937_64& rng, double step) {
  FlowModel flow = small_flow(rng);
  const std::size_t n = batch_size(rng);
  const Tensor z = normal({n, 2}, rng);
  const Tensor w = normal({n, 2}, rng);
  return grad_check_params(
      [&](Tape& t) {
        FlowOutput out = flow.forward(t, t.constant(z));
        return sum(out.out * t.constant(w)) + sum(out.log_det);
      },
      flow.parameters(), step);
}

double ebm_params_check(std::mt19937_64& rng, double step) {
  EnergyModel ebm = small_ebm(rng, 1);
  const Tensor x = normal({batch_size(rng), 2}, rng);
  return grad_check_params(
      [&](Tape& t) { return sum(ebm.log_unnormalized(t, t.constant(x), 0)); },
      ebm.parameters(), step);
}

double nce_check(std::mt19937_64& rng, double step) {
  EnergyModel ebm = small_ebm(rng, 1);
  const std::size_t n = batch_size(rng);
  const Tensor data = normal({n, 2}, rng, 0.5);
  const Tensor noise = normal({n, 2}, rng);
  const Tensor lq_data = normal({n}, rng);
  const Tensor lq_noise = normal({n}, rng);
  const double odds = std::uniform_real_distribution<double>(0.5, 3.0)(rng);
  return grad_check_params(
      [&](Tape& t) {
        return nce_objective(t, ebm, data, lq_data, noise, lq_noise, Track::params, odds)
            .value;
      },
      ebm.parameters(), step);
}

double fce_theta_check(std::mt19937_64& rng, double step) {
  EnergyModel ebm = small_ebm(rng, 1);
  FlowModel flow = small_flow(rng);
  const std::size_t n = batch_size(rng);
  const Tensor data = normal({n, 2}, rng);
  const Tensor z = normal({n, 2}, rng);
  return grad_check_params(
      [&](Tape& t) {
        return fce_value(t, ebm, flow, data, z, Track::params, Track::frozen).value;
      },
      ebm.parameters(), step);
}

double fce_alpha_check(std::mt19937_64& rng, double step) {
  EnergyModel ebm = small_ebm(rng, 1);
  FlowModel flow = small_flow(rng);
  const std::size_t n = batch_size(rng);
  const Tensor data = normal({n, 2}, rng);
  const Tensor z = normal({n, 2}, rng);
  return grad_check_params(
      [&](Tape& t) {
        return fce_value(t, ebm, flow, data, z, Track::frozen, Track::params).value;
      },
      flow.parameters(), step);
}

double label_loss_check(std::mt19937_64& rng, double step) {
  const std::size_t k = std::uniform_int_distribution<std::size_t>(2, 4)(rng);
  EnergyModel ebm = small_ebm(rng, k);
  const std::size_t n = batch_size(rng);
  const Tensor x = normal({n, 2}, rng);
  std::vector<int> labels(n);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(k) - 1);
  for (int& y : labels) y = pick(rng);
  return grad_check_params([&](Tape& t) { return label_loss(t, ebm, x, labels); },
                           ebm.parameters(), step);
}

double mixture_check(std::mt19937_64& rng, double step) {
  const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
  EnergyModel ebm = small_ebm(rng, k);
  const Tensor x = normal({batch_size(rng), 2}, rng);
  return grad_check_params(
      [&](Tape& t) { return sum(mixture_log_unnormalized(t, ebm, t.constant(x))); },
      ebm.parameters(), step);
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(std::size_t configurations,
                                                 std::uint64_t seed, double step) {
  const std::vector<std::pair<std::string, Check>> checks{
      {"ops.composite/input", ops_check},
      {"flow.log_prob/params", flow_params_check},
      {"flow.log_prob/input", flow_input_check},
      {"flow.forward/params", flow_forward_check},
      {"ebm.log_unnormalized/params", ebm_params_check},
      {"nce_objective/theta", nce_check},
      {"fce_value/theta", fce_theta_check},
      {"fce_value/alpha", fce_alpha_check},
      {"label_loss/theta", label_loss_check},
      {"mixture_log_unnormalized/theta", mixture_check},
  };
  std::vector<GradCheckResult> results;
  for (std::size_t c = 0; c < checks.size(); ++c) {
    std::mt19937_64 rng(seed * 1000003ULL + c);
    GradCheckResult r{checks[c].first, configurations, 0.0};
    for (std::size_t i = 0; i < configurations; ++i) {
      r.max_error = std::max(r.max_error, checks[c].second(rng, step));
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace fcelab
