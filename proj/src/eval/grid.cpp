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

#include "fcelab/eval/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <vector>

#include "fcelab/data/csv.hpp"
#include "fcelab/errors.hpp"

namespace fcelab {
namespace {

constexpr std::size_t kChunkRows = 4096;

}  // namespace

void validate_grid(const GridSpec& spec) {
  if (!(spec.x_min < spec.x_max) || !(spec.y_min < spec.y_max)) {
    throw std::invalid_argument("grid: need x_min < x_max and y_min < y_max");
  }
  if (spec.nx < 2 || spec.ny < 2) {
    throw std::invalid_argument("grid: resolution must be at least 2 per axis");
  }
}

GridSpec parse_grid_spec(std::string_view text) {
  std::vector<std::string> parts;
  std::stringstream in{std::string(text)};
  for (std::string item; std::getline(in, item, ',');) parts.push_back(item);
  if (parts.size() != 6) {
    throw std::invalid_argument("grid: expected xmin,xmax,ymin,ymax,nx,ny, got '" +
                                std::string(text) + "'");
  }
  GridSpec spec;
  try {
    std::size_t used = 0;
    auto number = [&](const std::string& s) {
      double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    };
    auto count = [&](const std::string& s) {
      unsigned long v = std::stoul(s, &used);
      if (used != s.size() || s.find('-') != std::string::npos) {
        throw std::invalid_argument(s);
      }
      return static_cast<std::size_t>(v);
    };
    spec.x_min = number(parts[0]);
    spec.x_max = number(parts[1]);
    spec.y_min = number(parts[2]);
    spec.y_max = number(parts[3]);
    spec.nx = count(parts[4]);
    spec.ny = count(parts[5]);
  } catch (const std::logic_error&) {
    throw std::invalid_argument("grid: malformed field in '" + std::string(text) + "'");
  }
  validate_grid(spec);
  return spec;
}

GridSpec square_grid(const std::array<double, 4>& box, std::size_t n) {
  return {box[0], box[1], box[2], box[3], n, n};
}

Tensor grid_centers(const GridSpec& spec) {
  validate_grid(spec);
  Tensor out({spec.nx * spec.ny, 2});
  const double w = spec.cell_width();
  const double h = spec.cell_height();
  for (std::size_t i = 0; i < spec.nx; ++i) {
    for (std::size_t j = 0; j < spec.ny; ++j) {
      const std::size_t r = i * spec.ny + j;
      out(r, 0) = spec.x_min + (static_cast<double>(i) + 0.5) * w;
      out(r, 1) = spec.y_min + (static_cast<double>(j) + 0.5) * h;
    }
  }
  return out;
}

std::size_t evaluation_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FCELAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) n = static_cast<std::size_t>(v);
  }
  return n;
}

DensityGrid render_grid(const LogDensityFn& model, const GridSpec& spec) {
  const Tensor centers = grid_centers(spec);
  const std::size_t rows = centers.dim(0);
  const std::size_t chunks = (rows + kChunkRows - 1) / kChunkRows;
  DensityGrid grid{spec, Tensor({spec.nx, spec.ny})};

  auto run_chunk = [&](std::size_t c) {
    const std::size_t begin = c * kChunkRows;
    const std::size_t end = std::min(rows, begin + kChunkRows);
    Tensor part({end - begin, 2});
    std::copy(centers.raw() + 2 * begin, centers.raw() + 2 * end, part.raw());
    const Tensor v = model(part);
    if (v.size() != end - begin) throw ShapeError("render_grid: model returned wrong size");
    std::copy(v.raw(), v.raw() + v.size(), grid.values.raw() + begin);
  };

  const std::size_t workers = std::min(evaluation_threads(), chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t c = w; c < chunks; c += workers) run_chunk(c);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  if (!grid.values.all_finite()) throw NumericError("render_grid: non-finite log-density");
  return grid;
}

double grid_mass(const DensityGrid& grid) {
  double total = 0.0;
  for (double v : grid.values.data()) total += std::exp(v);
  return total * grid.spec.cell_area();
}

void write_grid_csv(std::ostream& out, const DensityGrid& grid) {
  const Tensor centers = grid_centers(grid.spec);
  out << "x,y,log_density\n";
  for (std::size_t r = 0; r < centers.dim(0); ++r) {
    out << format_double(centers(r, 0)) << ',' << format_double(centers(r, 1)) << ','
        << format_double(grid.values[r]) << '\n';
  }
}

void write_grid_csv(const std::string& path, const DensityGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_grid_csv(out, grid);
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace fcelab
