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

#include "fcelab/estimators/train.hpp"

namespace fcelab {

// iter,side,value,accuracy,ebm_mse,flow_nll,jsd (+ label_loss,heldout_acc);
// metrics that were not computed on a row are left empty.
void write_history_header(std::ostream& out, bool semisup_columns);
void write_history_row(std::ostream& out, const HistoryRow& row, bool semisup_columns);
void write_history_csv(std::ostream& out, std::span<const HistoryRow> rows,
                       bool semisup_columns = false);
void write_history_csv(const std::string& path, std::span<const HistoryRow> rows,
                       bool semisup_columns = false);

}  // namespace fcelab
