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

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fcelab/diff/tensor.hpp"

namespace fcelab {

inline constexpr int kUnlabeled = -1;

using Vec2 = std::array<double, 2>;
// Row-major 2x2 matrix.
using Mat2 = std::array<double, 4>;

struct GaussianComponent {
  Vec2 mean{};
  Mat2 covariance{1.0, 0.0, 0.0, 1.0};
  double weight = 1.0;
};

class GaussianMixture2D {
 public:
  // Throws std::invalid_argument unless weights sum to 1 (within 1e-12) and
  // every covariance is symmetric positive-definite.
  explicit GaussianMixture2D(std::vector<GaussianComponent> components);

  // `modes` equal-weight isotropic components on a circle.
  static GaussianMixture2D ring(std::size_t modes = 8, double radius = 2.0,
                                double sd = 0.2);
  static GaussianMixture2D isotropic(Vec2 mean, double sd);

  const std::vector<GaussianComponent>& components() const { return components_; }

  // Draws n points; optionally reports the component index of each draw.
  Tensor sample(std::size_t n, std::mt19937_64& rng,
                std::vector<std::size_t>* assignment = nullptr) const;

  double log_density(Vec2 x) const;
  std::vector<double> log_density(const Tensor& points) const;

  // Axis-aligned box covering `sds` standard deviations of every component:
  // {xmin, xmax, ymin, ymax}.
  std::array<double, 4> bounding_box(double sds = 6.0) const;

 private:
  struct Cached {
    Mat2 chol;       // lower-triangular Cholesky factor
    Mat2 precision;  // inverse covariance
    double log_norm; // log w - log(2 pi sqrt(det))
  };
  std::vector<GaussianComponent> components_;
  std::vector<Cached> cached_;
};

// Two interleaved spirals. Class 0 follows radius r = t at angle
// 3 pi * turns * t for t in [t_min, t_max]; class 1 is its point reflection.
struct TwoSpirals {
  double noise_sd = 0.05;
  double turns = 1.0;
  double t_min = 0.25;
  double t_max = 1.0;

  // Noise-free point on the spiral of `label` at curve parameter t.
  Vec2 curve(double t, int label) const;
  // Arc length of the spiral from the origin to parameter t.
  double arc_length(double t) const;
};

// Uniform density over alternating unit squares of a 4x4 board scaled by 2
// (support [-4,4]^2).
struct Checkerboard {};

using GroundTruth = std::variant<GaussianMixture2D, TwoSpirals, Checkerboard>;

struct Samples {
  Tensor points;            // {N, 2}
  std::vector<int> labels;  // class per point, kUnlabeled when undefined
  std::vector<double> curve_t;  // spiral parameter, spirals only
};

// Points with labels in {0..K-1} or kUnlabeled.
struct LabeledDataset {
  Tensor points;
  std::vector<int> labels;
  std::size_t num_classes = 0;

  std::size_t labeled_count() const;
  // Rows whose label is (or is not) kUnlabeled.
  Tensor labeled_points() const;
  std::vector<int> labeled_targets() const;
  Tensor unlabeled_points() const;
};

// Names: "rings8", "gaussian" (N(0, 0.25 I)), "checkerboard", "spirals".
GroundTruth make_distribution(std::string_view name);
std::string distribution_name(const GroundTruth& dist);

// Deterministic under `seed`; throws std::invalid_argument for n == 0.
Samples sample(const GroundTruth& dist, std::size_t n, std::uint64_t seed);
Samples sample(const GroundTruth& dist, std::size_t n, std::mt19937_64& rng);

bool has_log_density(const GroundTruth& dist);
// Throws UnsupportedError for distributions without a closed form.
const GaussianMixture2D& closed_form(const GroundTruth& dist);
std::vector<double> log_density(const GroundTruth& dist, const Tensor& points);

// Region used for rendering and quadrature: {xmin, xmax, ymin, ymax}.
std::array<double, 4> natural_box(const GroundTruth& dist);

// Draws n_unlabeled + 2 * labels_per_class points and labels exactly
// labels_per_class per class, chosen nearest to evenly spaced arc-length
// quantiles of each spiral.
LabeledDataset make_semisup_split(const TwoSpirals& dist,
                                  std::size_t n_unlabeled,
                                  std::size_t labels_per_class,
                                  std::uint64_t seed);

}  // namespace fcelab
