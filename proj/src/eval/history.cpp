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

#include "fcelab/eval/history.hpp"

#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>

#include "fcelab/data/csv.hpp"

namespace fcelab {
namespace {

void field(std::ostream& out, const std::optional<double>& v) {
  out << ',';
  if (v) out << format_double(*v);
}

}  // namespace

void write_history_header(std::ostream& out, bool semisup_columns) {
  out << "iter,side,value,accuracy,ebm_mse,flow_nll,jsd";
  if (semisup_columns) out << ",label_loss,heldout_acc";
  out << '\n';
}

void write_history_row(std::ostream& out, const HistoryRow& row, bool semisup_columns) {
  out << row.iter << ',' << row.side << ',' << format_double(row.value);
  field(out, row.accuracy);
  field(out, row.ebm_mse);
  field(out, row.flow_nll);
  field(out, row.jsd);
  if (semisup_columns) {
    field(out, row.label_loss);
    field(out, row.heldout_acc);
  }
  out << '\n';
}

void write_history_csv(std::ostream& out, std::span<const HistoryRow> rows,
                       bool semisup_columns) {
  write_history_header(out, semisup_columns);
  for (const HistoryRow& row : rows) write_history_row(out, row, semisup_columns);
}

void write_history_csv(const std::string& path, std::span<const HistoryRow> rows,
                       bool semisup_columns) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_history_csv(out, rows, semisup_columns);
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace fcelab
