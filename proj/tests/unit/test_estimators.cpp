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

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fcelab/data/distributions.hpp"
#include "fcelab/diff/grad_check.hpp"
#include "fcelab/diff/ops.hpp"
#include "fcelab/ebm/ebm.hpp"
#include "fcelab/errors.hpp"
#include "fcelab/estimators/alternation.hpp"
#include "fcelab/estimators/diagnostics.hpp"
#include "fcelab/estimators/objectives.hpp"
#include "fcelab/estimators/optimizer.hpp"
#include "fcelab/estimators/train.hpp"
#include "fcelab/eval/history.hpp"
#include "fcelab/flow/flow.hpp"
#include "fcelab/util/log.hpp"
#include "support.hpp"

using namespace fcelab;
using fcelab::testing::max_abs_diff;
using fcelab::testing::normal_tensor;
using fcelab::testing::uniform_tensor;

namespace {

const double kLn2 = std::numbers::ln2;

FlowModel small_flow(std::uint64_t seed, double head_bound = 0.3) {
  FlowConfig cfg;
  cfg.blocks = 2;
  cfg.width = 8;
  FlowModel flow(cfg, seed);
  std::mt19937_64 rng(seed + 500);
  if (head_bound > 0.0) flow.randomize_heads(rng, head_bound);
  return flow;
}

EnergyModel small_ebm(std::uint64_t seed, double out_bound = 0.3) {
  EbmConfig cfg;
  cfg.hidden = {8, 8};
  EnergyModel ebm(cfg, seed);
  std::mt19937_64 rng(seed + 900);
  if (out_bound > 0.0) ebm.layers().back().init_uniform(rng, out_bound);
  return ebm;
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

struct WarningCapture {
  WarningCapture() {
    previous = set_warning_sink([this](std::string_view m) { messages.emplace_back(m); });
  }
  ~WarningCapture() { set_warning_sink(previous); }
  std::vector<std::string> messages;
  WarningSink previous;
};

std::string history_text(const std::vector<HistoryRow>& rows) {
  std::ostringstream out;
  write_history_csv(out, rows);
  return out.str();
}

std::vector<Tensor> values_of(std::span<Parameter* const> params) {
  std::vector<Tensor> out;
  for (const Parameter* p : params) out.push_back(p->value);
  return out;
}

// Hand-written reference of the bias-corrected updates for one scalar.
struct ReferenceOptimizer {
  bool adamax;
  double lr, b1, b2, eps;
  double m = 0.0, v = 0.0;
  int t = 0;
  double step(double theta, double g) {
    ++t;
    m = b1 * m + (1.0 - b1) * g;
    if (adamax) {
      v = std::max(b2 * v, std::abs(g));
      return theta - lr / (1.0 - std::pow(b1, t)) * m / (v + eps);
    }
    v = b2 * v + (1.0 - b2) * g * g;
    const double mh = m / (1.0 - std::pow(b1, t));
    const double vh = v / (1.0 - std::pow(b2, t));
    return theta - lr * mh / (std::sqrt(vh) + eps);
  }
};

}  // namespace

// ---------------------------------------------------------------- optimizers

TEST_CASE("first Adam step moves each coordinate by about the learning rate") {
  Parameter p("p", Tensor::vector({0.5, -2.0}));
  Parameter* params[] = {&p};
  OptimizerState opt = make_optimizer({OptimizerKind::adam, 1e-3}, params);
  p.grad.fill(1.0);
  CHECK(optimizer_step(opt, params));
  CHECK(p.value[0] == doctest::Approx(0.5 - 1e-3).epsilon(1e-7));
  CHECK(p.value[1] == doctest::Approx(-2.0 - 1e-3).epsilon(1e-7));
  CHECK(opt.step == 1);
  CHECK(p.grad == Tensor(Shape{2}));
}

TEST_CASE("zero gradients leave parameters unchanged") {
  for (OptimizerKind kind : {OptimizerKind::adam, OptimizerKind::adamax}) {
    Parameter p("p", Tensor::vector({0.5, -2.0, 3.0}));
    Parameter* params[] = {&p};
    OptimizerState opt = make_optimizer({kind, 1e-2}, params);
    for (int i = 0; i < 10; ++i) CHECK(optimizer_step(opt, params));
    CHECK(p.value == Tensor::vector({0.5, -2.0, 3.0}));
    CHECK(opt.step == 10);
  }
}

TEST_CASE("Adamax infinity-norm accumulator under a constant gradient") {
  Parameter p("p", Tensor::vector({1.0, 1.0}));
  Parameter* params[] = {&p};
  OptimizerState opt = make_optimizer({OptimizerKind::adamax, 1e-3}, params);
  for (int i = 0; i < 20; ++i) {
    p.grad[0] = -0.7;
    p.grad[1] = 2.0;
    optimizer_step(opt, params);
    CHECK(opt.second_moment[0][0] == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(opt.second_moment[0][1] == doctest::Approx(2.0).epsilon(1e-15));
  }
}

TEST_CASE("optimizers match a scalar reference over many steps") {
  for (OptimizerKind kind : {OptimizerKind::adam, OptimizerKind::adamax}) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, 1.0);
    Parameter p("p", Tensor::vector({0.3, -0.1, 2.0}));
    Parameter* params[] = {&p};
    const OptimizerConfig cfg{kind, 3e-3};
    OptimizerState opt = make_optimizer(cfg, params);
    std::vector<ReferenceOptimizer> ref(
        3, ReferenceOptimizer{kind == OptimizerKind::adamax, cfg.learning_rate, cfg.beta1,
                              cfg.beta2, cfg.epsilon});
    Tensor expect = p.value;
    for (int t = 0; t < 50; ++t) {
      for (std::size_t i = 0; i < 3; ++i) {
        p.grad[i] = g(rng);
        expect[i] = ref[i].step(expect[i], p.grad[i]);
      }
      optimizer_step(opt, params);
    }
    CHECK(max_abs_diff(p.value, expect) < 1e-14);
    CHECK(opt.first_moment[0].shape() == p.value.shape());
    CHECK(opt.second_moment[0].shape() == p.value.shape());
  }
}

TEST_CASE("non-finite gradient skips the step") {
  WarningCapture warnings;
  Parameter p("p", Tensor::vector({1.0, 2.0}));
  Parameter* params[] = {&p};
  OptimizerState opt = make_optimizer({OptimizerKind::adam, 1e-3}, params);
  p.grad[0] = 1.0;
  optimizer_step(opt, params);
  const Tensor before = p.value;
  const Tensor m_before = opt.first_moment[0];
  p.grad[0] = std::numeric_limits<double>::infinity();
  p.grad[1] = 1.0;
  CHECK_FALSE(optimizer_step(opt, params));
  CHECK(opt.step == 1);
  CHECK(p.value == before);
  CHECK(opt.first_moment[0] == m_before);
  CHECK(p.grad == Tensor(Shape{2}));
  CHECK(warnings.messages.size() == 1);
}

// ---------------------------------------------------------------- contrastive values

TEST_CASE("accuracy counts ties as half") {
  Tape t;
  {
    const ContrastiveValue near = contrastive_value(t.constant(Tensor::vector({1e-15})),
                                                    t.constant(Tensor::vector({-1e-15})));
    CHECK(near.accuracy == 0.5);
  }
  const ContrastiveValue cv = contrastive_value(t.constant(Tensor::vector({1.0, -1.0, 0.0})),
                                                t.constant(Tensor::vector({-1.0, -1.0, 2.0})));
  CHECK(cv.accuracy == doctest::Approx(3.5 / 6.0).epsilon(1e-15));
}

TEST_CASE("NCE objective at p equal to noise is -2 ln 2") {
  const EnergyModel ebm = small_ebm(0, 0.0);
  std::mt19937_64 rng(0);
  const Tensor data = normal_tensor({50, 2}, rng);
  const Tensor noise = normal_tensor({50, 2}, rng);
  const Tensor zeros(Shape{50});
  Tape t;
  const ContrastiveValue cv = nce_objective(t, ebm, data, zeros, noise, zeros);
  CHECK(cv.value.value().item() == doctest::Approx(-2.0 * kLn2).epsilon(1e-15));
  CHECK(cv.accuracy == 0.5);
}

TEST_CASE("NCE objective approaches zero under perfect separation") {
  const EnergyModel ebm = small_ebm(1, 0.0);
  std::mt19937_64 rng(1);
  const Tensor data = normal_tensor({20, 2}, rng);
  const Tensor noise = normal_tensor({20, 2}, rng);
  Tape t;
  const ContrastiveValue cv = nce_objective(t, ebm, data, Tensor(Shape{20}, -60.0), noise,
                                            Tensor(Shape{20}, 60.0));
  const double v = cv.value.value().item();
  CHECK(v <= 0.0);
  CHECK(v > -1e-20);
  CHECK(cv.accuracy == 1.0);
}

TEST_CASE("NCE objective matches a direct recomputation and is bounded by zero") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const EnergyModel ebm = small_ebm(seed, 1.0);
    std::mt19937_64 rng(seed);
    const Tensor data = normal_tensor({40, 2}, rng);
    const Tensor noise = normal_tensor({40, 2}, rng, 2.0);
    const Tensor lq_data = uniform_tensor({40}, rng, -5.0, 5.0);
    const Tensor lq_noise = uniform_tensor({40}, rng, -5.0, 5.0);
    Tape t;
    const double v = nce_objective(t, ebm, data, lq_data, noise, lq_noise).value.value().item();
    const Tensor lp_data = ebm.log_unnormalized(data);
    const Tensor lp_noise = ebm.log_unnormalized(noise);
    double direct = 0.0;
    for (std::size_t i = 0; i < 40; ++i) {
      const double u_pos = 1.0 / (1.0 + std::exp(lq_data[i] - lp_data[i]));
      const double u_neg = 1.0 / (1.0 + std::exp(lq_noise[i] - lp_noise[i]));
      direct += std::log(u_pos) + std::log(1.0 - u_neg);
    }
    direct /= 40.0;
    CHECK(std::abs(v - direct) < 1e-12);
    CHECK(v < 0.0);
  }
}

TEST_CASE("NCE objective rejects mismatched batches") {
  const EnergyModel ebm = small_ebm(2);
  Tape t;
  CHECK_THROWS_AS(nce_objective(t, ebm, Tensor(Shape{5, 2}), Tensor(Shape{5}),
                                Tensor(Shape{4, 2}), Tensor(Shape{4})),
                  ShapeError);
  CHECK_THROWS_AS(nce_objective(t, ebm, Tensor(Shape{5, 2}), Tensor(Shape{4}),
                                Tensor(Shape{5, 2}), Tensor(Shape{5})),
                  ShapeError);
}

TEST_CASE("Gaussian noise baseline is moment matched") {
  std::mt19937_64 rng(3);
  Tensor data = normal_tensor({4, 2}, rng);
  const GaussianNoiseBaseline g = fit_gaussian_noise(data);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    mx += data(i, 0) / 4.0;
    my += data(i, 1) / 4.0;
  }
  double sxy = 0.0;
  for (std::size_t i = 0; i < 4; ++i) sxy += (data(i, 0) - mx) * (data(i, 1) - my) / 3.0;
  CHECK(g.mean[0] == doctest::Approx(mx).epsilon(1e-14));
  CHECK(g.mean[1] == doctest::Approx(my).epsilon(1e-14));
  CHECK(g.covariance[1] == doctest::Approx(sxy).epsilon(1e-12));
  CHECK(g.covariance[2] == g.covariance[1]);
  const Tensor x = normal_tensor({10, 2}, rng);
  const std::vector<double> ref = g.distribution().log_density(x);
  const Tensor ld = g.log_density(x);
  for (std::size_t i = 0; i < 10; ++i) CHECK(ld[i] == ref[i]);
}

TEST_CASE("NCE recovers a Gaussian density against wider Gaussian noise") {
  // Data N(0, 0.25 I), noise N(0, I). The learned log density is compared
  // with the analytic one over the data's 2-sigma disk.
  const GroundTruth truth = make_distribution("gaussian");
  const Tensor data = sample(truth, 20000, 4).points;
  EbmConfig cfg;
  cfg.hidden = {32, 32, 32};
  EnergyModel ebm(cfg, 4);
  GaussianNoiseBaseline noise;
  TrainConfig tc;
  tc.iterations = 3000;
  tc.batch_size = 500;
  tc.ebm_optimizer = {OptimizerKind::adam, 1e-3};
  tc.eval_every = 0;
  TrainState state = make_train_state(tc, 4, ebm.parameters(), {});
  nce_train(ebm, data, noise, tc, state);

  std::vector<double> xs;
  for (int i = -20; i <= 20; ++i) {
    for (int j = -20; j <= 20; ++j) {
      const double x = i * 0.05;
      const double y = j * 0.05;
      if (x * x + y * y > 1.0) continue;
      xs.push_back(x);
      xs.push_back(y);
    }
  }
  const std::size_t n = xs.size() / 2;
  const Tensor pts({n, 2}, xs);
  const Tensor learned = ebm.log_unnormalized(pts);
  const std::vector<double> exact = log_density(truth, pts);
  double mse = 0.0;
  for (std::size_t i = 0; i < n; ++i) mse += std::pow(learned[i] - exact[i], 2) / n;
  INFO("mse " << mse);
  CHECK(mse < 0.05);
}

// ---------------------------------------------------------------- FCE value

TEST_CASE("FCE value when the model equals the flow") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const FlowModel flow = small_flow(seed, seed == 0 ? 0.0 : 0.5);
    ModelLogDensity same = [&](Tape& t, Var x, Track) { return flow.log_prob(t, x, Track::frozen); };
    std::mt19937_64 rng(seed);
    const Tensor data = normal_tensor({64, 2}, rng, 1.5);
    const Tensor z = normal_tensor({64, 2}, rng);
    Tape t;
    const ContrastiveValue cv = fce_value(t, same, flow, data, z, Track::frozen, Track::frozen);
    CHECK(std::abs(cv.value.value().item() + 2.0 * kLn2) < 1e-12);
    CHECK(cv.accuracy == 0.5);
  }
}

TEST_CASE("raising c lowers the posterior everywhere") {
  EnergyModel ebm = small_ebm(5, 1.0);
  const FlowModel flow = small_flow(5);
  const FlowSample s = flow.sample(200, 5);
  const PosteriorLogs before = log_posterior(ebm, s.log_prob, s.x);
  ebm.normalizer().value[0] += 0.1;
  const PosteriorLogs after = log_posterior(ebm, s.log_prob, s.x);
  for (std::size_t i = 0; i < 200; ++i) CHECK(after.log_u[i] < before.log_u[i]);
}

TEST_CASE("FCE value gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    EnergyModel ebm = small_ebm(seed, 0.5);
    FlowModel flow = small_flow(seed, 0.5);
    std::mt19937_64 rng(seed);
    const Tensor data = normal_tensor({6, 2}, rng, 1.5);
    const Tensor z = normal_tensor({6, 2}, rng);

    const double flow_err = grad_check_params(
        [&](Tape& t) { return fce_value(t, ebm, flow, data, z, Track::frozen, Track::params).value; },
        flow.parameters(), 1e-6);
    CHECK(flow_err < 1e-4);

    const double ebm_err = grad_check_params(
        [&](Tape& t) { return fce_value(t, ebm, flow, data, z, Track::params, Track::frozen).value; },
        ebm.parameters(), 1e-6);
    CHECK(ebm_err < 1e-4);
  }
}

TEST_CASE("EBM step treats the flow density as a constant") {
  EnergyModel ebm = small_ebm(6, 0.5);
  FlowModel flow = small_flow(6, 0.5);
  std::mt19937_64 rng(6);
  const Tensor data = normal_tensor({32, 2}, rng);
  const Tensor z = normal_tensor({32, 2}, rng);
  const std::vector<Tensor> flow_before = values_of(flow.parameters());
  OptimizerState opt = make_optimizer({OptimizerKind::adam, 1e-2}, ebm.parameters());
  fce_ebm_step(single_head(ebm), ebm.parameters(), flow, data, z, opt);
  CHECK(values_of(flow.parameters()) == flow_before);
  for (const Parameter* p : flow.parameters()) CHECK(p->grad == Tensor(p->value.shape()));
}

TEST_CASE("each side moves the value in its own direction") {
  EnergyModel ebm = small_ebm(7, 0.5);
  FlowModel flow = small_flow(7, 0.5);
  std::mt19937_64 rng(7);
  const Tensor data = normal_tensor({256, 2}, rng, 1.5);
  const Tensor z = normal_tensor({256, 2}, rng);
  auto value = [&] {
    Tape t;
    return fce_value(t, ebm, flow, data, z, Track::frozen, Track::frozen).value.value().item();
  };
  const double v0 = value();
  OptimizerState eo = make_optimizer({OptimizerKind::adam, 1e-3}, ebm.parameters());
  const StepStats es = fce_ebm_step(single_head(ebm), ebm.parameters(), flow, data, z, eo);
  CHECK(es.value == doctest::Approx(v0).epsilon(1e-14));
  const double v1 = value();
  CHECK(v1 > v0);
  OptimizerState fo = make_optimizer({OptimizerKind::adamax, 1e-3}, flow.parameters());
  fce_flow_step(single_head(ebm), flow, data, z, fo);
  CHECK(value() < v1);
}

// ---------------------------------------------------------------- MLE

TEST_CASE("MLE gradient vanishes when the data is the base distribution") {
  FlowConfig cfg;
  cfg.blocks = 4;
  cfg.width = 16;
  // Four points with unit second moments and zero odd moments: the identity
  // flow is an exact stationary point.
  {
    FlowModel flow(cfg, 1);
    OptimizerState opt = make_optimizer({OptimizerKind::adamax, 1e-5}, flow.parameters());
    const MleStats s = mle_flow_step(flow, Tensor::matrix(4, 2, {1, 1, 1, -1, -1, 1, -1, -1}), opt);
    CHECK(s.grad_norm < 1e-12);
    CHECK(s.nll == doctest::Approx(std::log(2.0 * std::numbers::pi) + 1.0).epsilon(1e-14));
    CHECK(s.bits_per_dim == doctest::Approx(s.nll / (2.0 * kLn2)).epsilon(1e-15));
  }
  // Large base samples: small gradient compared with shifted data.
  std::mt19937_64 rng(2);
  const Tensor base = normal_tensor({100000, 2}, rng);
  Tensor shifted = base;
  for (double& v : shifted.data()) v = 0.5 * v + 0.5;
  FlowModel a(cfg, 1);
  FlowModel b(cfg, 1);
  OptimizerState oa = make_optimizer({OptimizerKind::adamax, 1e-5}, a.parameters());
  OptimizerState ob = make_optimizer({OptimizerKind::adamax, 1e-5}, b.parameters());
  const double g_base = mle_flow_step(a, base, oa).grad_norm;
  const double g_shift = mle_flow_step(b, shifted, ob).grad_norm;
  INFO(g_base << " vs " << g_shift);
  CHECK(g_base < 0.05 * g_shift);
}

TEST_CASE("MLE NLL falls over the first 100 steps on most seeds") {
  const GroundTruth ring = make_distribution("rings8");
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Tensor data = sample(ring, 20000, seed).points;
    FlowModel flow({}, seed);
    TrainConfig tc;
    tc.iterations = 100;
    tc.batch_size = 500;
    tc.flow_optimizer = {OptimizerKind::adamax, 1e-3};
    tc.eval_every = 0;
    TrainState st = make_train_state(tc, seed, {}, flow.parameters());
    const std::vector<HistoryRow> rows = mle_train(flow, data, tc, st);
    REQUIRE(rows.size() == 100);
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 10; ++i) {
      first += rows[i].value;
      last += rows[90 + i].value;
    }
    if (last < first) ++improved;
    CHECK(rows[0].side == "mle");
    CHECK_FALSE(rows[0].accuracy.has_value());
  }
  CHECK(improved >= 3);
}

TEST_CASE("MLE on a single Gaussian reaches its entropy") {
  const double sd = 0.5;
  const GroundTruth g(GaussianMixture2D::isotropic({1.0, -0.5}, sd));
  const Tensor data = sample(g, 20000, 8).points;
  FlowConfig cfg;
  cfg.blocks = 4;
  cfg.width = 16;
  FlowModel flow(cfg, 8);
  TrainConfig tc;
  tc.iterations = 1500;
  tc.batch_size = 500;
  tc.flow_optimizer = {OptimizerKind::adamax, 1e-2};
  tc.eval_every = 0;
  TrainState st = make_train_state(tc, 8, {}, flow.parameters());
  mle_train(flow, data, tc, st);
  const Tensor test = sample(g, 20000, 9).points;
  const Tensor lp = flow.log_prob(test);
  const double nll = -mean_of(lp.data());
  const double entropy = 1.0 + std::log(2.0 * std::numbers::pi * sd * sd);
  INFO("nll " << nll << " entropy " << entropy);
  CHECK(std::abs(nll - entropy) < 0.05);
}

TEST_CASE("MLE step rejects non-finite losses") {
  FlowModel flow(FlowConfig{2, 8, 5.0}, 0);
  OptimizerState opt = make_optimizer({OptimizerKind::adamax, 1e-3}, flow.parameters());
  const Tensor bad = Tensor::matrix(1, 2, {std::nan(""), 0.0});
  const std::vector<Tensor> before = values_of(flow.parameters());
  CHECK_THROWS_AS(mle_flow_step(flow, bad, opt), NumericError);
  CHECK(values_of(flow.parameters()) == before);
  CHECK(opt.step == 0);
}

// ---------------------------------------------------------------- alternation

TEST_CASE("gate thresholds") {
  AlternationState s;
  CHECK(record_update(s, 0.5) == SwitchDecision::stay);
  CHECK(s.side == Side::ebm);
  CHECK(record_update(s, 0.49) == SwitchDecision::stay);
  CHECK(record_update(s, 0.51) == SwitchDecision::threshold);
  CHECK(s.side == Side::flow);
  CHECK(s.consecutive == 0);
  CHECK(record_update(s, 0.5) == SwitchDecision::stay);
  CHECK(record_update(s, 0.9) == SwitchDecision::stay);
  CHECK(record_update(s, 0.3) == SwitchDecision::threshold);
  CHECK(s.side == Side::ebm);
  CHECK(s.last_accuracy == 0.3);
}

TEST_CASE("consecutive cap forces a switch with a warning") {
  WarningCapture warnings;
  AlternationState s;
  s.max_consecutive = 100;
  for (int i = 0; i < 99; ++i) CHECK(record_update(s, 0.2) == SwitchDecision::stay);
  CHECK(record_update(s, 0.2) == SwitchDecision::forced);
  CHECK(s.side == Side::flow);
  CHECK(s.forced_switches == 1);
  CHECK(warnings.messages.size() == 1);
}

TEST_CASE("every switch follows at least one update on the side it leaves") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> acc(0.3, 0.7);
  AlternationState s;
  s.max_consecutive = 7;
  WarningCapture quiet;
  Side side = s.side;
  std::int64_t updates_on_side = 0;
  for (int i = 0; i < 10000; ++i) {
    ++updates_on_side;
    const SwitchDecision d = record_update(s, acc(rng));
    if (d == SwitchDecision::stay) {
      CHECK(s.side == side);
      CHECK(s.consecutive == updates_on_side);
      CHECK(s.consecutive < s.max_consecutive);
    } else {
      CHECK(updates_on_side >= 1);
      CHECK(s.side != side);
      side = s.side;
      updates_on_side = 0;
    }
  }
}

// ---------------------------------------------------------------- training loops

namespace {

// c starts near the typical log q so both classes are mixed from the start.
EnergyModel fixture_ebm() {
  EnergyModel ebm = small_ebm(11, 0.0);
  ebm.normalizer().value[0] = 3.0;
  return ebm;
}

struct FceFixture {
  EnergyModel ebm = fixture_ebm();
  FlowModel flow = small_flow(11, 0.0);
  Tensor data = sample(make_distribution("rings8"), 2000, 11).points;
  TrainConfig config = [] {
    TrainConfig c;
    c.iterations = 300;
    c.batch_size = 64;
    c.ebm_optimizer = {OptimizerKind::adam, 1e-2};
    c.flow_optimizer = {OptimizerKind::adamax, 1e-2};
    c.max_consecutive = 5;
    c.eval_every = 0;
    return c;
  }();
  TrainState state = make_train_state(config, 42, ebm.parameters(), flow.parameters());
};

}  // namespace

TEST_CASE("zero iterations leave everything untouched") {
  FceFixture f;
  f.config.iterations = 0;
  const std::vector<Tensor> e0 = values_of(f.ebm.parameters());
  const std::vector<Tensor> q0 = values_of(f.flow.parameters());
  CHECK(fce_train(f.ebm, f.flow, f.data, f.config, f.state).empty());
  CHECK(values_of(f.ebm.parameters()) == e0);
  CHECK(values_of(f.flow.parameters()) == q0);
  CHECK(f.state.iteration == 0);
  CHECK(f.state.ebm_optimizer.step == 0);
}

TEST_CASE("training follows the accuracy gate") {
  WarningCapture quiet;
  FceFixture f;
  const std::vector<HistoryRow> rows = fce_train(f.ebm, f.flow, f.data, f.config, f.state);
  REQUIRE(rows.size() == 300);
  AlternationState replay;
  replay.max_consecutive = f.config.max_consecutive;
  std::int64_t ebm = 0;
  std::int64_t flow = 0;
  int gated = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const HistoryRow& r = rows[i];
    CHECK(r.iter == static_cast<std::int64_t>(i + 1));
    CHECK(r.side == side_name(replay.side));
    (replay.side == Side::ebm ? ebm : flow) += 1;
    CHECK(r.ebm_steps == ebm);
    CHECK(r.flow_steps == flow);
    REQUIRE(r.accuracy.has_value());
    if (record_update(replay, *r.accuracy) == SwitchDecision::threshold) ++gated;
  }
  CHECK(gated > 0);
  CHECK(ebm > 0);
  CHECK(flow > 0);
  CHECK(f.state.ebm_optimizer.step == ebm);
  CHECK(f.state.flow_optimizer.step == flow);
}

TEST_CASE("identical seeds give byte-identical histories") {
  WarningCapture quiet;
  FceFixture a;
  FceFixture b;
  const std::string ha = history_text(fce_train(a.ebm, a.flow, a.data, a.config, a.state));
  const std::string hb = history_text(fce_train(b.ebm, b.flow, b.data, b.config, b.state));
  CHECK(ha == hb);
  CHECK(values_of(a.ebm.parameters()) == values_of(b.ebm.parameters()));
  FceFixture c;
  c.state = make_train_state(c.config, 43, c.ebm.parameters(), c.flow.parameters());
  CHECK(history_text(fce_train(c.ebm, c.flow, c.data, c.config, c.state)) != ha);
}

TEST_CASE("a run split in two matches an uninterrupted run") {
  WarningCapture quiet;
  FceFixture whole;
  const std::vector<HistoryRow> all = fce_train(whole.ebm, whole.flow, whole.data, whole.config, whole.state);

  FceFixture split;
  split.config.iterations = 137;
  std::vector<HistoryRow> rows = fce_train(split.ebm, split.flow, split.data, split.config, split.state);
  // Copies stand in for a save and reload.
  EnergyModel ebm = split.ebm;
  FlowModel flow = split.flow;
  TrainState state = split.state;
  TrainConfig rest = split.config;
  rest.iterations = 300;
  const std::vector<HistoryRow> tail = fce_train(ebm, flow, split.data, rest, state);
  rows.insert(rows.end(), tail.begin(), tail.end());
  CHECK(history_text(rows) == history_text(all));
  CHECK(values_of(ebm.parameters()) == values_of(whole.ebm.parameters()));
  CHECK(values_of(flow.parameters()) == values_of(whole.flow.parameters()));
}

TEST_CASE("hooks run at their cadence") {
  WarningCapture quiet;
  FceFixture f;
  f.config.iterations = 50;
  f.config.eval_every = 10;
  int evals = 0;
  int checkpoints = 0;
  std::vector<std::int64_t> seen;
  TrainHooks hooks;
  hooks.evaluate = [&](const TrainState& s, HistoryRow& row) {
    ++evals;
    CHECK(s.iteration % 10 == 0);
    row.jsd = 0.25;
  };
  hooks.checkpoint = [&](const TrainState& s) {
    ++checkpoints;
    CHECK(s.iteration % 20 == 0);
    CHECK(seen.back() == s.iteration);
  };
  hooks.checkpoint_every = 20;
  hooks.on_row = [&](const HistoryRow& r) { seen.push_back(r.iter); };
  const std::vector<HistoryRow> rows = fce_train(f.ebm, f.flow, f.data, f.config, f.state, hooks);
  CHECK(evals == 5);
  CHECK(checkpoints == 2);
  CHECK(seen.size() == 50);
  CHECK(rows[9].jsd == 0.25);
  CHECK_FALSE(rows[10].jsd.has_value());
}

TEST_CASE("training validates its configuration") {
  FceFixture f;
  f.config.batch_size = 0;
  CHECK_THROWS_AS(fce_train(f.ebm, f.flow, f.data, f.config, f.state), ConfigError);
  FceFixture g;
  g.config.accuracy_threshold = 1.0;
  CHECK_THROWS_AS(fce_train(g.ebm, g.flow, g.data, g.config, g.state), ConfigError);
  FceFixture h;
  CHECK_THROWS_AS(fce_train(h.ebm, h.flow, Tensor(Shape{10, 3}), h.config, h.state), ShapeError);
}

TEST_CASE("NCE trainer rows") {
  EnergyModel ebm = small_ebm(12, 0.0);
  const Tensor data = sample(make_distribution("rings8"), 1000, 12).points;
  TrainConfig tc;
  tc.iterations = 20;
  tc.batch_size = 50;
  tc.eval_every = 0;
  TrainState st = make_train_state(tc, 12, ebm.parameters(), {});
  const std::vector<HistoryRow> rows = nce_train(ebm, data, fit_gaussian_noise(data), tc, st);
  REQUIRE(rows.size() == 20);
  CHECK(rows[0].side == "nce");
  CHECK(rows[0].value < 0.0);
  CHECK(rows[0].accuracy.has_value());
  CHECK(rows.back().ebm_steps == 20);
}

// ---------------------------------------------------------------- diagnostics

TEST_CASE("JSD bounds") {
  const FlowModel identity;
  const GaussianMixture2D std_normal = GaussianMixture2D::isotropic({0.0, 0.0}, 1.0);
  CHECK(jsd_diagnostic(identity, std_normal, 20000, 1) < 0.01);
  const GaussianMixture2D far = GaussianMixture2D::isotropic({100.0, 100.0}, 1.0);
  CHECK(std::abs(jsd_diagnostic(identity, far, 20000, 1) - kLn2) < 1e-3);
  CHECK_THROWS_AS(jsd_diagnostic(identity, make_distribution("spirals"), 100, 1), UnsupportedError);
}

TEST_CASE("JSD agrees with grid quadrature for an anisotropic flow") {
  // One coupling block with a constant log-scale s makes q = N(0, diag(1, e^{2s})).
  FlowConfig cfg;
  cfg.blocks = 1;
  FlowModel flow(cfg, 0);
  const double raw = 0.6;
  flow.blocks()[0].head.bias.value[1] = raw;
  const double s = 5.0 * std::tanh(raw / 5.0);
  const GaussianMixture2D truth = GaussianMixture2D::isotropic({0.5, 0.0}, 1.0);

  const double sy = std::exp(s);
  const std::size_t res = 800;
  const double lo = -10.0, hi = 10.0, h = (hi - lo) / res;
  double jsd = 0.0;
  for (std::size_t i = 0; i < res; ++i) {
    for (std::size_t j = 0; j < res; ++j) {
      const double x = lo + (i + 0.5) * h;
      const double y = lo + (j + 0.5) * h;
      const double q = std::exp(-0.5 * (x * x + y * y / (sy * sy))) / (2.0 * std::numbers::pi * sy);
      const double p = std::exp(-0.5 * ((x - 0.5) * (x - 0.5) + y * y)) / (2.0 * std::numbers::pi);
      const double m = 0.5 * (p + q);
      if (p > 0.0) jsd += 0.5 * p * std::log(p / m) * h * h;
      if (q > 0.0) jsd += 0.5 * q * std::log(q / m) * h * h;
    }
  }
  const double mc = jsd_diagnostic(flow, truth, 200000, 3);
  INFO("quadrature " << jsd << " monte carlo " << mc);
  CHECK(std::abs(mc - jsd) < 3e-3);
}

TEST_CASE("variational free energy") {
  SUBCASE("flat model and identity flow give minus the base entropy") {
    const EnergyModel flat = small_ebm(0, 0.0);
    const FlowModel identity;
    const double v = variational_free_energy(identity, flat, 200000, 1);
    CHECK(std::abs(v + 1.0 + std::log(2.0 * std::numbers::pi)) < 0.01);
  }
  SUBCASE("forward and inverse paths agree") {
    const EnergyModel ebm = small_ebm(1, 0.5);
    const FlowModel flow = small_flow(1, 0.5);
    const double fwd = variational_free_energy(flow, ebm, 5000, 2, DensityPath::forward);
    const double inv = variational_free_energy(flow, ebm, 5000, 2, DensityPath::inverse);
    CHECK(std::abs(fwd - inv) < 1e-8);
  }
}

TEST_CASE("flow updates against a frozen EBM lower the free energy") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const EnergyModel ebm = small_ebm(seed, 1.0);
    FlowModel flow({2, 16, 5.0}, seed);
    const Tensor data = sample(make_distribution("rings8"), 2000, seed).points;
    const double before = variational_free_energy(flow, ebm, 20000, 100 + seed);
    OptimizerState opt = make_optimizer({OptimizerKind::adamax, 1e-3}, flow.parameters());
    std::mt19937_64 rng(seed);
    for (int i = 0; i < 200; ++i) {
      const Tensor batch = draw_batch(data, 128, rng);
      const Tensor z = standard_normal(128, rng);
      fce_flow_step(single_head(ebm), flow, batch, z, opt);
    }
    const double after = variational_free_energy(flow, ebm, 20000, 100 + seed);
    INFO("seed " << seed << " before " << before << " after " << after);
    CHECK(after < before);
  }
}

TEST_CASE("EBM likelihood gradient utility") {
  EnergyModel ebm = small_ebm(3, 0.5);
  std::mt19937_64 rng(3);
  const Tensor data = normal_tensor({10, 2}, rng);
  const Tensor model = normal_tensor({12, 2}, rng, 2.0);
  const std::vector<Tensor> grad = ebm_mle_gradient(ebm, data, model);
  const std::vector<Parameter*> params = ebm.parameters();
  REQUIRE(grad.size() == params.size());

  auto objective = [&] {
    return mean_of(ebm.energy(data).data()) - mean_of(ebm.energy(model).data());
  };
  const double h = 1e-6;
  for (std::size_t k = 0; k < params.size(); ++k) {
    CHECK(grad[k].shape() == params[k]->value.shape());
    if (params[k]->name == "ebm.c") {
      CHECK(grad[k] == Tensor(Shape{1}));
      continue;
    }
    for (std::size_t i = 0; i < params[k]->value.size(); i += 3) {
      double& v = params[k]->value[i];
      const double saved = v;
      v = saved + h;
      const double up = objective();
      v = saved - h;
      const double down = objective();
      v = saved;
      CHECK(std::abs((up - down) / (2.0 * h) - grad[k][i]) < 1e-6);
    }
  }
  for (const Tensor& g : ebm_mle_gradient(ebm, data, data)) {
    for (double v : g.data()) CHECK(v == 0.0);
  }
}
