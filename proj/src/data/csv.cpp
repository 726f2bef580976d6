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

#include "fcelab/data/csv.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "fcelab/errors.hpp"

namespace fcelab {

std::string format_double(double value) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof(buf), "%.17g", value);
  return std::string(buf, static_cast<std::size_t>(len));
}

void write_samples_csv(std::ostream& out, const Tensor& points,
                       std::span<const int> labels) {
  if (points.rank() != 2 || points.dim(1) != 2 ||
      (!labels.empty() && labels.size() != points.dim(0))) {
    throw ShapeError("write_samples_csv: expected {N,2} points and N labels");
  }
  out << "x,y,label\n";
  for (std::size_t i = 0; i < points.dim(0); ++i) {
    out << format_double(points(i, 0)) << ',' << format_double(points(i, 1))
        << ',' << (labels.empty() ? kUnlabeled : labels[i]) << '\n';
  }
}

void write_samples_csv(const std::string& path, const Tensor& points,
                       std::span<const int> labels) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_samples_csv(out, points, labels);
}

Samples read_samples_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "x,y,label") {
    throw FormatError("samples csv: missing header x,y,label");
  }
  std::vector<double> data;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    double x = 0.0;
    double y = 0.0;
    int label = 0;
    char c1 = 0;
    char c2 = 0;
    if (!(row >> x >> c1 >> y >> c2 >> label) || c1 != ',' || c2 != ',') {
      throw FormatError("samples csv: malformed row '" + line + "'");
    }
    data.push_back(x);
    data.push_back(y);
    labels.push_back(label);
  }
  const std::size_t n = labels.size();
  return {Tensor(Shape{n, 2}, std::move(data)), std::move(labels), {}};
}

}  // namespace fcelab
