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

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fcelab/data/distributions.hpp"
#include "fcelab/ebm/ebm.hpp"
#include "fcelab/estimators/train.hpp"
#include "fcelab/eval/metrics.hpp"
#include "fcelab/flow/flow.hpp"
#include "fcelab/semisup/semisup.hpp"

namespace fcelab {

enum class Method { fce, nce, mle, semisup };
enum class FlowInit { rand, mle_pretrained };

std::string_view method_name(Method m);
Method parse_method(std::string_view name);
std::string_view flow_init_name(FlowInit f);
FlowInit parse_flow_init(std::string_view name);

struct DataConfig {
  std::string name = "rings8";
  // Per-distribution overrides: rings8 {modes, radius, sd}, gaussian {sd},
  // spirals {noise_sd, turns}.
  std::map<std::string, double> params;
};

GroundTruth make_distribution(const DataConfig& data);

struct RunConfig {
  Method method = Method::fce;
  DataConfig data;
  std::vector<std::uint64_t> seeds{0};

  std::int64_t iterations = 20000;
  std::size_t batch_size = 500;
  std::size_t n_train = 100000;
  double ebm_lr = 3e-4;
  double flow_lr = 1e-5;
  double accuracy_threshold = 0.5;
  std::int64_t max_consecutive = 100;
  double negative_prior_odds = 1.0;

  std::size_t flow_blocks = 10;
  std::size_t flow_width = 128;
  double flow_scale_max = 5.0;
  std::vector<std::size_t> ebm_hidden{128, 128, 128};

  FlowInit flow_init = FlowInit::rand;
  std::int64_t pretrain_iters = 5000;
  double pretrain_lr = 1e-3;

  std::int64_t eval_every = 500;
  std::size_t eval_points = 10000;
  std::uint64_t eval_seed = kDefaultEvalSeed;
  std::size_t jsd_samples = 10000;
  std::int64_t checkpoint_every = 0;
  std::size_t grid_resolution = 200;
  std::string out_dir = "run";

  std::size_t labels_per_class = 7;
  std::size_t n_unlabeled = 5000;
  std::size_t heldout_points = 2000;
  double label_loss_weight = 1.0;
  std::int64_t warmup_ebm_iters = 0;

  TrainConfig train_config() const;
  SemisupConfig semisup_config() const;
  FlowConfig flow_config() const;
  EbmConfig ebm_config(std::size_t heads = 1) const;
};

// Throws ConfigError naming the offending field.
void validate(const RunConfig& config);

// Missing keys keep their defaults; unknown keys are rejected.
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::string& path);
std::string to_json(const RunConfig& config);

}  // namespace fcelab
