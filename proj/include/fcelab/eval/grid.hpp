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
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>

#include "fcelab/diff/tensor.hpp"

namespace fcelab {

// Maps {N,2} points to {N} log-densities. Must be safe to call from
// several threads at once.
using LogDensityFn = std::function<Tensor(const Tensor&)>;

struct GridSpec {
  double x_min = -4.0;
  double x_max = 4.0;
  double y_min = -4.0;
  double y_max = 4.0;
  std::size_t nx = 200;
  std::size_t ny = 200;

  double cell_width() const { return (x_max - x_min) / static_cast<double>(nx); }
  double cell_height() const { return (y_max - y_min) / static_cast<double>(ny); }
  double cell_area() const { return cell_width() * cell_height(); }
};

// Throws std::invalid_argument unless min < max and resolution >= 2.
void validate_grid(const GridSpec& spec);
// "xmin,xmax,ymin,ymax,nx,ny"
GridSpec parse_grid_spec(std::string_view text);
GridSpec square_grid(const std::array<double, 4>& box, std::size_t n);

struct DensityGrid {
  GridSpec spec;
  Tensor values;  // {nx, ny}; values(i, j) at the centre of cell (i, j)
};

// Cell centres as {nx*ny, 2}, x index outer.
Tensor grid_centers(const GridSpec& spec);

// Worker count for data-parallel evaluation: FCELAB_THREADS if set, else
// hardware concurrency.
std::size_t evaluation_threads();

// Evaluates in fixed chunks so the result does not depend on the thread
// count. Throws NumericError on non-finite values.
DensityGrid render_grid(const LogDensityFn& model, const GridSpec& spec);

// Riemann sum of exp(values) times cell area.
double grid_mass(const DensityGrid& grid);

void write_grid_csv(std::ostream& out, const DensityGrid& grid);
void write_grid_csv(const std::string& path, const DensityGrid& grid);

}  // namespace fcelab
