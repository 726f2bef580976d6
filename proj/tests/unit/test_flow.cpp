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
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

#include "fcelab/data/distributions.hpp"
#include "fcelab/diff/grad_check.hpp"
#include "fcelab/diff/ops.hpp"
#include "fcelab/errors.hpp"
#include "fcelab/flow/flow.hpp"
#include "support.hpp"

using namespace fcelab;
using fcelab::testing::max_abs_diff;
using fcelab::testing::normal_tensor;
using fcelab::testing::uniform_tensor;

namespace {

// Head bound 0.05 at width 128 gives log-dets of order one without pushing
// mass far outside the quadrature box.
FlowModel random_flow(std::uint64_t seed, FlowConfig config = {}, double bound = 0.05) {
  FlowModel flow(config, seed);
  std::mt19937_64 rng(seed + 1000);
  flow.randomize_heads(rng, bound);
  return flow;
}

double quadrature(const FlowModel& flow, double half_width, std::size_t res) {
  const double h = 2.0 * half_width / static_cast<double>(res);
  Tensor pts({res * res, 2});
  for (std::size_t i = 0; i < res; ++i) {
    for (std::size_t j = 0; j < res; ++j) {
      pts(i * res + j, 0) = -half_width + (static_cast<double>(i) + 0.5) * h;
      pts(i * res + j, 1) = -half_width + (static_cast<double>(j) + 0.5) * h;
    }
  }
  const Tensor lp = flow.log_prob(pts);
  double mass = 0.0;
  for (double v : lp.data()) mass += std::exp(v);
  return mass * h * h;
}

double mean_of(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v;
  return s / static_cast<double>(t.size());
}

}  // namespace

TEST_CASE("fresh flow is the identity") {
  const FlowModel flow;
  CHECK(flow.blocks().size() == 10);
  std::mt19937_64 rng(1);
  const Tensor z = normal_tensor({64, 2}, rng);
  const FlowResult f = flow.forward(z);
  CHECK(f.out == z);
  CHECK(f.log_det == Tensor(Shape{64}));
  const FlowResult inv = flow.inverse(z);
  CHECK(inv.out == z);
}

TEST_CASE("identity flow log density is the standard normal") {
  const FlowModel flow;
  const Tensor lp = flow.log_prob(Tensor::matrix(2, 2, {0.0, 0.0, 1.0, 0.0}));
  const double ln2pi = std::log(2.0 * std::numbers::pi);
  CHECK(lp[0] == doctest::Approx(-ln2pi).epsilon(1e-15));
  CHECK(lp[1] == doctest::Approx(-ln2pi - 0.5).epsilon(1e-15));
}

TEST_CASE("masks alternate") {
  const FlowModel flow;
  for (std::size_t i = 0; i < flow.blocks().size(); ++i) CHECK(flow.blocks()[i].passed == i % 2);
}

TEST_CASE("single block with constant log-scale") {
  FlowConfig cfg;
  cfg.blocks = 1;
  FlowModel flow(cfg, 3);
  // Head outputs are (s0, s1, t0, t1); block 0 transforms coordinate 1.
  const double raw = 0.7;
  flow.blocks()[0].head.bias.value[1] = raw;
  const double s = 5.0 * std::tanh(raw / 5.0);
  const Tensor z = Tensor::matrix(3, 2, {0.1, 0.2, -1.0, 2.0, 3.0, -0.5});
  const FlowResult f = flow.forward(z);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(f.log_det[i] == doctest::Approx(s).epsilon(1e-14));
    CHECK(f.out(i, 0) == z(i, 0));
    CHECK(f.out(i, 1) == doctest::Approx(z(i, 1) * std::exp(s)).epsilon(1e-14));
  }
}

TEST_CASE("log-scale squashing bounds every block") {
  FlowConfig cfg;
  cfg.blocks = 2;
  FlowModel flow(cfg, 3);
  for (auto& b : flow.blocks()) {
    b.head.bias.value[0] = 1e6;
    b.head.bias.value[1] = 1e6;
  }
  const FlowResult f = flow.forward(Tensor::matrix(1, 2, {0.1, 0.1}));
  CHECK(f.log_det[0] <= 2.0 * cfg.scale_max + 1e-12);
  const FlowResult back = flow.inverse(f.out);
  CHECK(std::abs(back.out(0, 0) - 0.1) < 1e-8);
  CHECK(std::abs(back.out(0, 1) - 0.1) < 1e-8);
}

TEST_CASE("log-det matches a finite-difference Jacobian") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const FlowModel flow = random_flow(seed);
    std::mt19937_64 rng(seed);
    const Tensor z = normal_tensor({20, 2}, rng);
    const FlowResult f = flow.forward(z);
    // Narrow stencil: the ReLU conditioner has kinks.
    const double h = 1e-7;
    for (std::size_t i = 0; i < 20; ++i) {
      double jac[2][2];
      for (std::size_t c = 0; c < 2; ++c) {
        Tensor zp = Tensor::matrix(1, 2, {z(i, 0), z(i, 1)});
        Tensor zm = zp;
        zp[c] += h;
        zm[c] -= h;
        const Tensor xp = flow.forward(zp).out;
        const Tensor xm = flow.forward(zm).out;
        for (std::size_t r = 0; r < 2; ++r) jac[r][c] = (xp[r] - xm[r]) / (2.0 * h);
      }
      const double det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
      CHECK(det > 0.0);
      CHECK(std::abs(std::log(std::abs(det)) - f.log_det[i]) < 1e-5);
    }
  }
}

TEST_CASE("round trip over 10^4 random points") {
  const FlowModel flow = random_flow(7);
  std::mt19937_64 rng(7);
  const Tensor x = uniform_tensor({10000, 2}, rng, -5.0, 5.0);
  const FlowResult inv = flow.inverse(x);
  const FlowResult fwd = flow.forward(inv.out);
  CHECK(max_abs_diff(fwd.out, x) < 1e-8);
  double worst = 0.0;
  for (std::size_t i = 0; i < 10000; ++i) {
    worst = std::max(worst, std::abs(fwd.log_det[i] + inv.log_det[i]));
  }
  CHECK(worst < 1e-8);

  const Tensor z = normal_tensor({10000, 2}, rng);
  CHECK(max_abs_diff(flow.inverse(flow.forward(z).out).out, z) < 1e-8);
}

TEST_CASE("log_prob via inverse equals the cached forward path") {
  const FlowModel flow = random_flow(8);
  const FlowSample s = flow.sample(2000, 5);
  const Tensor lp = flow.log_prob(s.x);
  CHECK(max_abs_diff(lp, s.log_prob) < 1e-8);
  std::mt19937_64 rng(9);
  const Tensor z = normal_tensor({500, 2}, rng);
  const FlowSample pf = flow.push_forward(z);
  CHECK(max_abs_diff(flow.log_prob(pf.x), pf.log_prob) < 1e-8);
}

TEST_CASE("taped and value-only passes agree") {
  const FlowModel flow = random_flow(10);
  std::mt19937_64 rng(10);
  const Tensor x = normal_tensor({300, 2}, rng);
  Tape t;
  const Tensor taped = flow.log_prob(t, t.constant(x)).value();
  CHECK(max_abs_diff(taped, flow.log_prob(x)) < 1e-12);
  Tape t2;
  const FlowOutput f = flow.forward(t2, t2.constant(x));
  const FlowResult g = flow.forward(x);
  CHECK(max_abs_diff(f.out.value(), g.out) < 1e-12);
  CHECK(max_abs_diff(f.log_det.value(), g.log_det) < 1e-12);
}

TEST_CASE("random flows integrate to one") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const double mass = quadrature(random_flow(seed), 6.0, 400);
    INFO("seed " << seed << " mass " << mass);
    CHECK(std::abs(mass - 1.0) < 1e-2);
  }
}

TEST_CASE("sampling") {
  const FlowModel identity;
  const FlowSample s = identity.sample(100000, 1);
  double c00 = 0.0;
  double c01 = 0.0;
  double c11 = 0.0;
  double m0 = 0.0;
  double m1 = 0.0;
  for (std::size_t i = 0; i < 100000; ++i) {
    m0 += s.x(i, 0);
    m1 += s.x(i, 1);
  }
  m0 /= 1e5;
  m1 /= 1e5;
  for (std::size_t i = 0; i < 100000; ++i) {
    const double a = s.x(i, 0) - m0;
    const double b = s.x(i, 1) - m1;
    c00 += a * a;
    c01 += a * b;
    c11 += b * b;
  }
  CHECK(std::abs(c00 / 99999 - 1.0) < 0.02);
  CHECK(std::abs(c11 / 99999 - 1.0) < 0.02);
  CHECK(std::abs(c01 / 99999) < 0.02);

  const FlowModel flow = random_flow(4);
  CHECK(flow.sample(100, 3).x == flow.sample(100, 3).x);
  CHECK(flow.sample(100, 3).x != flow.sample(100, 4).x);
  CHECK_THROWS_AS(flow.sample(0, 3), std::invalid_argument);
}

TEST_CASE("own samples are more likely than distant data") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const FlowModel flow = random_flow(seed);
    const FlowSample own = flow.sample(5000, seed);
    const Samples far =
        sample(GroundTruth(GaussianMixture2D::isotropic({8.0, -8.0}, 0.5)), 5000, seed);
    CHECK(mean_of(own.log_prob) >= mean_of(flow.log_prob(far.points)));
  }
}

TEST_CASE("non-finite inputs are rejected") {
  const FlowModel flow;
  const Tensor bad = Tensor::matrix(1, 2, {std::nan(""), 0.0});
  CHECK_THROWS_AS(flow.forward(bad), NumericError);
  CHECK_THROWS_AS(flow.inverse(bad), NumericError);
  CHECK_THROWS_AS(flow.log_prob(bad), NumericError);
  CHECK_THROWS_AS(flow.log_prob(Tensor(Shape{4, 3})), ShapeError);
}

TEST_CASE("gradient of mean log_prob passes grad_check") {
  FlowConfig cfg;
  cfg.blocks = 3;
  cfg.width = 8;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    FlowModel flow = random_flow(seed, cfg, 0.5);
    std::mt19937_64 rng(seed);
    const Tensor x = normal_tensor({6, 2}, rng);
    const double err = grad_check_params(
        [&](Tape& t) { return mean(flow.log_prob(t, t.constant(x))); }, flow.parameters(), 1e-6);
    CHECK(err < 1e-4);
    const double err_x = grad_check(
        [&](Var v) { return mean(flow.log_prob(v.tape(), v, Track::frozen)); }, x, 1e-6);
    CHECK(err_x < 1e-4);
  }
}

TEST_CASE("parameter names follow the checkpoint layout") {
  FlowConfig cfg;
  cfg.blocks = 2;
  const FlowModel flow(cfg, 0);
  std::set<std::string> names;
  for (const Parameter* p : flow.parameters()) names.insert(p->name);
  CHECK(names.size() == 12);
  CHECK(names.count("flow.block0.layer0.W") == 1);
  CHECK(names.count("flow.block1.layer2.b") == 1);
  for (const Parameter* p : flow.parameters()) {
    if (p->name == "flow.block0.layer2.W") CHECK(p->value.shape() == Shape{128, 4});
    if (p->name == "flow.block0.layer0.W") CHECK(p->value.shape() == Shape{2, 128});
  }
}
