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

#include "fcelab/data/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "fcelab/errors.hpp"

namespace fcelab {
namespace {

double log_sum_exp(std::span<const double> terms) {
  const double hi = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - hi);
  return hi + std::log(acc);
}

}  // namespace

GaussianMixture2D::GaussianMixture2D(std::vector<GaussianComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) {
    throw std::invalid_argument("GaussianMixture2D: no components");
  }
  double total = 0.0;
  for (const auto& c : components_) {
    const auto& s = c.covariance;
    const double det = s[0] * s[3] - s[1] * s[2];
    if (c.weight <= 0.0 || s[1] != s[2] || s[0] <= 0.0 || det <= 0.0) {
      throw std::invalid_argument(
          "GaussianMixture2D: component needs positive weight and a "
          "symmetric positive-definite covariance");
    }
    total += c.weight;
    Cached k;
    const double l00 = std::sqrt(s[0]);
    const double l10 = s[2] / l00;
    const double l11 = std::sqrt(s[3] - l10 * l10);
    k.chol = {l00, 0.0, l10, l11};
    k.precision = {s[3] / det, -s[1] / det, -s[2] / det, s[0] / det};
    k.log_norm = std::log(c.weight) - std::log(2.0 * std::numbers::pi) -
                 0.5 * std::log(det);
    cached_.push_back(k);
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("GaussianMixture2D: weights sum to " +
                                std::to_string(total));
  }
}

GaussianMixture2D GaussianMixture2D::ring(std::size_t modes, double radius,
                                          double sd) {
  std::vector<GaussianComponent> comps;
  for (std::size_t k = 0; k < modes; ++k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(modes);
    comps.push_back({{radius * std::cos(angle), radius * std::sin(angle)},
                     {sd * sd, 0.0, 0.0, sd * sd},
                     1.0 / static_cast<double>(modes)});
  }
  return GaussianMixture2D(std::move(comps));
}

GaussianMixture2D GaussianMixture2D::isotropic(Vec2 mean, double sd) {
  return GaussianMixture2D({{mean, {sd * sd, 0.0, 0.0, sd * sd}, 1.0}});
}

Tensor GaussianMixture2D::sample(std::size_t n, std::mt19937_64& rng,
                                 std::vector<std::size_t>* assignment) const {
  if (n == 0) throw std::invalid_argument("sample: n must be >= 1");
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor out(Shape{n, 2});
  if (assignment != nullptr) assignment->assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = uniform(rng);
    std::size_t k = 0;
    double cumulative = components_[0].weight;
    while (u >= cumulative && k + 1 < components_.size()) {
      cumulative += components_[++k].weight;
    }
    const double e0 = normal(rng);
    const double e1 = normal(rng);
    const auto& l = cached_[k].chol;
    out(i, 0) = components_[k].mean[0] + l[0] * e0;
    out(i, 1) = components_[k].mean[1] + l[2] * e0 + l[3] * e1;
    if (assignment != nullptr) (*assignment)[i] = k;
  }
  return out;
}

double GaussianMixture2D::log_density(Vec2 x) const {
  std::vector<double> terms(components_.size());
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const double dx = x[0] - components_[k].mean[0];
    const double dy = x[1] - components_[k].mean[1];
    const auto& p = cached_[k].precision;
    const double quad = dx * (p[0] * dx + p[1] * dy) + dy * (p[2] * dx + p[3] * dy);
    terms[k] = cached_[k].log_norm - 0.5 * quad;
  }
  return log_sum_exp(terms);
}

std::vector<double> GaussianMixture2D::log_density(const Tensor& points) const {
  if (points.rank() != 2 || points.dim(1) != 2) {
    throw ShapeError("log_density: expected {N,2}, got " +
                     shape_string(points.shape()));
  }
  std::vector<double> out(points.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = log_density(Vec2{points(i, 0), points(i, 1)});
  }
  return out;
}

std::array<double, 4> GaussianMixture2D::bounding_box(double sds) const {
  std::array<double, 4> box{std::numeric_limits<double>::infinity(),
                            -std::numeric_limits<double>::infinity(),
                            std::numeric_limits<double>::infinity(),
                            -std::numeric_limits<double>::infinity()};
  for (const auto& c : components_) {
    const double rx = sds * std::sqrt(c.covariance[0]);
    const double ry = sds * std::sqrt(c.covariance[3]);
    box[0] = std::min(box[0], c.mean[0] - rx);
    box[1] = std::max(box[1], c.mean[0] + rx);
    box[2] = std::min(box[2], c.mean[1] - ry);
    box[3] = std::max(box[3], c.mean[1] + ry);
  }
  return box;
}

Vec2 TwoSpirals::curve(double t, int label) const {
  const double angle = 3.0 * std::numbers::pi * turns * t;
  const double sign = label == 0 ? 1.0 : -1.0;
  return {sign * t * std::cos(angle), sign * t * std::sin(angle)};
}

double TwoSpirals::arc_length(double t) const {
  // r = phi / b with phi = b t; ds = sqrt(1 + phi^2) dphi / b.
  const double b = 3.0 * std::numbers::pi * turns;
  const double phi = b * t;
  return (phi * std::sqrt(1.0 + phi * phi) + std::asinh(phi)) / (2.0 * b);
}

std::size_t LabeledDataset::labeled_count() const {
  return static_cast<std::size_t>(std::count_if(
      labels.begin(), labels.end(), [](int l) { return l != kUnlabeled; }));
}

namespace {

Tensor select_rows(const Tensor& points, const std::vector<int>& labels,
                   bool labeled) {
  std::vector<double> data;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if ((labels[i] != kUnlabeled) == labeled) {
      data.push_back(points(i, 0));
      data.push_back(points(i, 1));
    }
  }
  const std::size_t n = data.size() / 2;
  return Tensor(Shape{n, 2}, std::move(data));
}

}  // namespace

Tensor LabeledDataset::labeled_points() const {
  return select_rows(points, labels, true);
}

std::vector<int> LabeledDataset::labeled_targets() const {
  std::vector<int> out;
  for (int l : labels) {
    if (l != kUnlabeled) out.push_back(l);
  }
  return out;
}

Tensor LabeledDataset::unlabeled_points() const {
  return select_rows(points, labels, false);
}

GroundTruth make_distribution(std::string_view name) {
  if (name == "rings8") return GaussianMixture2D::ring(8, 2.0, 0.2);
  if (name == "gaussian") return GaussianMixture2D::isotropic({0.0, 0.0}, 0.5);
  if (name == "checkerboard") return Checkerboard{};
  if (name == "spirals") return TwoSpirals{};
  throw std::invalid_argument("unknown distribution '" + std::string(name) +
                              "' (expected rings8, gaussian, checkerboard or "
                              "spirals)");
}

std::string distribution_name(const GroundTruth& dist) {
  struct Visitor {
    std::string operator()(const GaussianMixture2D& m) const {
      return m.components().size() == 1 ? "gaussian" : "rings8";
    }
    std::string operator()(const TwoSpirals&) const { return "spirals"; }
    std::string operator()(const Checkerboard&) const { return "checkerboard"; }
  };
  return std::visit(Visitor{}, dist);
}

Samples sample(const GroundTruth& dist, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample(dist, n, rng);
}

Samples sample(const GroundTruth& dist, std::size_t n, std::mt19937_64& rng) {
  if (n == 0) throw std::invalid_argument("sample: n must be >= 1");
  struct Visitor {
    std::size_t n;
    std::mt19937_64& rng;

    Samples operator()(const GaussianMixture2D& m) const {
      return {m.sample(n, rng), std::vector<int>(n, kUnlabeled), {}};
    }

    Samples operator()(const TwoSpirals& s) const {
      std::uniform_real_distribution<double> t_dist(s.t_min, s.t_max);
      std::bernoulli_distribution coin(0.5);
      std::normal_distribution<double> noise(0.0, s.noise_sd);
      Samples out{Tensor(Shape{n, 2}), std::vector<int>(n), std::vector<double>(n)};
      for (std::size_t i = 0; i < n; ++i) {
        const int label = coin(rng) ? 1 : 0;
        const double t = t_dist(rng);
        const Vec2 p = s.curve(t, label);
        out.points(i, 0) = p[0] + noise(rng);
        out.points(i, 1) = p[1] + noise(rng);
        out.labels[i] = label;
        out.curve_t[i] = t;
      }
      return out;
    }

    Samples operator()(const Checkerboard&) const {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::bernoulli_distribution coin(0.5);
      Samples out{Tensor(Shape{n, 2}), std::vector<int>(n, kUnlabeled), {}};
      for (std::size_t i = 0; i < n; ++i) {
        const double x1 = unit(rng) * 4.0 - 2.0;
        const double x2 = unit(rng) - (coin(rng) ? 2.0 : 0.0) +
                          static_cast<double>(
                              static_cast<long>(std::floor(x1)) & 1L);
        out.points(i, 0) = 2.0 * x1;
        out.points(i, 1) = 2.0 * x2;
      }
      return out;
    }
  };
  return std::visit(Visitor{n, rng}, dist);
}

bool has_log_density(const GroundTruth& dist) {
  return std::holds_alternative<GaussianMixture2D>(dist);
}

const GaussianMixture2D& closed_form(const GroundTruth& dist) {
  if (const auto* m = std::get_if<GaussianMixture2D>(&dist)) return *m;
  throw UnsupportedError("log_density: distribution '" +
                         distribution_name(dist) + "' has no closed form");
}

std::vector<double> log_density(const GroundTruth& dist, const Tensor& points) {
  return closed_form(dist).log_density(points);
}

std::array<double, 4> natural_box(const GroundTruth& dist) {
  struct Visitor {
    std::array<double, 4> operator()(const GaussianMixture2D& m) const {
      return m.bounding_box(6.0);
    }
    std::array<double, 4> operator()(const TwoSpirals& s) const {
      const double r = s.t_max + 6.0 * s.noise_sd;
      return {-r, r, -r, r};
    }
    std::array<double, 4> operator()(const Checkerboard&) const {
      return {-4.5, 4.5, -4.5, 4.5};
    }
  };
  return std::visit(Visitor{}, dist);
}

LabeledDataset make_semisup_split(const TwoSpirals& dist,
                                  std::size_t n_unlabeled,
                                  std::size_t labels_per_class,
                                  std::uint64_t seed) {
  if (labels_per_class == 0) {
    throw std::invalid_argument("make_semisup_split: labels_per_class must be >= 1");
  }
  constexpr std::size_t kClasses = 2;
  Samples drawn = sample(GroundTruth(dist), n_unlabeled + kClasses * labels_per_class, seed);

  LabeledDataset out{drawn.points,
                     std::vector<int>(drawn.labels.size(), kUnlabeled), kClasses};
  const double s_lo = dist.arc_length(dist.t_min);
  const double s_hi = dist.arc_length(dist.t_max);
  for (int c = 0; c < static_cast<int>(kClasses); ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < drawn.labels.size(); ++i) {
      if (drawn.labels[i] == c) members.push_back(i);
    }
    if (members.size() < labels_per_class) {
      throw std::invalid_argument(
          "make_semisup_split: class " + std::to_string(c) + " has only " +
          std::to_string(members.size()) + " samples, " +
          std::to_string(labels_per_class) + " labels requested");
    }
    for (std::size_t j = 0; j < labels_per_class; ++j) {
      const double target =
          s_lo + (static_cast<double>(j) + 0.5) /
                     static_cast<double>(labels_per_class) * (s_hi - s_lo);
      std::size_t best = drawn.labels.size();
      double best_gap = std::numeric_limits<double>::infinity();
      for (std::size_t i : members) {
        if (out.labels[i] != kUnlabeled) continue;
        const double gap = std::abs(dist.arc_length(drawn.curve_t[i]) - target);
        if (gap < best_gap) {
          best_gap = gap;
          best = i;
        }
      }
      out.labels[best] = c;
    }
  }
  return out;
}

}  // namespace fcelab
