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

#include <iosfwd>
#include <span>
#include <string>

#include "fcelab/data/distributions.hpp"

namespace fcelab {

// Shortest round-trippable text: 17 significant digits.
std::string format_double(double value);

// Header `x,y,label`; label -1 marks unlabeled points.
void write_samples_csv(std::ostream& out, const Tensor& points,
                       std::span<const int> labels);
void write_samples_csv(const std::string& path, const Tensor& points,
                       std::span<const int> labels);
Samples read_samples_csv(std::istream& in);

}  // namespace fcelab
