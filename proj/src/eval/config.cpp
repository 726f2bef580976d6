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

#include "fcelab/eval/config.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fcelab/errors.hpp"

namespace fcelab {
namespace {

using nlohmann::json;

template <typename T>
T as(const json& value, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!value.is_number()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!value.is_number_integer()) throw ConfigError("");
      if constexpr (std::is_unsigned_v<T>) {
        if (value.get<std::int64_t>() < 0) throw ConfigError("");
      }
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!value.is_string()) throw ConfigError("");
    }
    return value.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config field '" + key + "' has the wrong type: " + value.dump());
  }
}

template <typename T>
std::vector<T> as_list(const json& value, const std::string& key) {
  if (!value.is_array()) throw ConfigError("config field '" + key + "' must be a list");
  std::vector<T> out;
  for (const json& v : value) out.push_back(as<T>(v, key));
  return out;
}

const std::map<std::string, std::set<std::string>>& data_params() {
  static const std::map<std::string, std::set<std::string>> known{
      {"rings8", {"modes", "radius", "sd"}},
      {"gaussian", {"sd"}},
      {"checkerboard", {}},
      {"spirals", {"noise_sd", "turns"}},
  };
  return known;
}

DataConfig parse_data(const json& value) {
  DataConfig data;
  if (value.is_string()) {
    data.name = value.get<std::string>();
  } else if (value.is_object()) {
    for (const auto& [k, v] : value.items()) {
      if (k == "name") {
        data.name = as<std::string>(v, "data.name");
      } else {
        data.params[k] = as<double>(v, "data." + k);
      }
    }
  } else {
    throw ConfigError("config field 'data' must be a name or an object");
  }
  return data;
}

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::fce: return "fce";
    case Method::nce: return "nce";
    case Method::mle: return "mle";
    case Method::semisup: return "semisup";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "fce") return Method::fce;
  if (name == "nce") return Method::nce;
  if (name == "mle") return Method::mle;
  if (name == "semisup") return Method::semisup;
  throw ConfigError("unknown method '" + std::string(name) +
                    "' (expected fce, nce, mle or semisup)");
}

std::string_view flow_init_name(FlowInit f) {
  return f == FlowInit::rand ? "rand" : "mle-pretrained";
}

FlowInit parse_flow_init(std::string_view name) {
  if (name == "rand") return FlowInit::rand;
  if (name == "mle-pretrained" || name == "trained") return FlowInit::mle_pretrained;
  throw ConfigError("unknown flow_init '" + std::string(name) +
                    "' (expected rand or mle-pretrained)");
}

GroundTruth make_distribution(const DataConfig& data) {
  auto known = data_params().find(data.name);
  if (known == data_params().end()) {
    throw ConfigError("unknown distribution '" + data.name +
                      "' (expected rings8, gaussian, checkerboard or spirals)");
  }
  for (const auto& [k, v] : data.params) {
    if (!known->second.count(k)) {
      throw ConfigError("distribution '" + data.name + "' has no parameter '" + k + "'");
    }
  }
  auto param = [&](const char* key, double fallback) {
    auto it = data.params.find(key);
    return it == data.params.end() ? fallback : it->second;
  };
  try {
    if (data.name == "rings8") {
      const double modes = param("modes", 8.0);
      if (modes < 1.0 || modes != static_cast<double>(static_cast<std::size_t>(modes))) {
        throw ConfigError("data.modes must be a positive integer");
      }
      return GaussianMixture2D::ring(static_cast<std::size_t>(modes),
                                     param("radius", 2.0), param("sd", 0.2));
    }
    if (data.name == "gaussian") {
      return GaussianMixture2D::isotropic({0.0, 0.0}, param("sd", 0.5));
    }
    if (data.name == "spirals") {
      TwoSpirals s;
      s.noise_sd = param("noise_sd", s.noise_sd);
      s.turns = param("turns", s.turns);
      if (!(s.noise_sd > 0.0) || !(s.turns > 0.0)) {
        throw ConfigError("spirals noise_sd and turns must be > 0");
      }
      return s;
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("data: ") + e.what());
  }
  return make_distribution(std::string_view(data.name));
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.iterations = iterations;
  t.batch_size = batch_size;
  t.ebm_optimizer = {OptimizerKind::adam, ebm_lr};
  t.flow_optimizer = {OptimizerKind::adamax, flow_lr};
  t.accuracy_threshold = accuracy_threshold;
  t.max_consecutive = max_consecutive;
  t.negative_prior_odds = negative_prior_odds;
  t.eval_every = eval_every;
  return t;
}

SemisupConfig RunConfig::semisup_config() const {
  return {train_config(), label_loss_weight, warmup_ebm_iters};
}

FlowConfig RunConfig::flow_config() const {
  return {flow_blocks, flow_width, flow_scale_max};
}

EbmConfig RunConfig::ebm_config(std::size_t heads) const {
  EbmConfig c;
  c.hidden = ebm_hidden;
  c.heads = heads;
  return c;
}

void validate(const RunConfig& c) {
  auto require = [](bool ok, const char* message) {
    if (!ok) throw ConfigError(message);
  };
  require(!c.seeds.empty(), "seeds must not be empty");
  require(c.iterations >= 0, "iterations must be >= 0");
  require(c.batch_size > 0, "batch_size must be > 0");
  require(c.n_train > 0, "n_train must be > 0");
  require(c.ebm_lr > 0.0, "ebm_lr must be > 0");
  require(c.flow_lr > 0.0, "flow_lr must be > 0");
  require(c.pretrain_lr > 0.0, "pretrain_lr must be > 0");
  require(c.pretrain_iters >= 0, "pretrain_iters must be >= 0");
  require(c.accuracy_threshold > 0.0 && c.accuracy_threshold < 1.0,
          "accuracy_threshold must lie in (0, 1)");
  require(c.max_consecutive >= 1, "max_consecutive must be >= 1");
  require(c.negative_prior_odds > 0.0, "negative_prior_odds must be > 0");
  require(c.flow_blocks >= 1 && c.flow_width >= 1, "flow_blocks and flow_width must be >= 1");
  require(c.flow_scale_max > 0.0, "flow_scale_max must be > 0");
  require(!c.ebm_hidden.empty(), "ebm_hidden must list at least one width");
  for (std::size_t w : c.ebm_hidden) require(w >= 1, "ebm_hidden widths must be >= 1");
  require(c.eval_every >= 0, "eval_every must be >= 0");
  require(c.eval_points >= 1, "eval_points must be >= 1");
  require(c.jsd_samples >= 1, "jsd_samples must be >= 1");
  require(c.checkpoint_every >= 0, "checkpoint_every must be >= 0");
  require(c.grid_resolution >= 2, "grid_resolution must be >= 2");
  require(c.label_loss_weight >= 0.0, "label_loss_weight must be >= 0");
  require(c.warmup_ebm_iters >= 0, "warmup_ebm_iters must be >= 0");
  const GroundTruth truth = make_distribution(c.data);
  if (c.method == Method::semisup) {
    require(std::holds_alternative<TwoSpirals>(truth), "method semisup requires data spirals");
    require(c.labels_per_class >= 1, "labels_per_class must be >= 1");
    require(c.heldout_points >= 1, "heldout_points must be >= 1");
  }
  if (c.method == Method::nce) {
    require(c.n_train >= 2, "nce needs n_train >= 2 to fit the noise");
  }
}

RunConfig parse_run_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");

  RunConfig c;
  using Setter = std::function<void(const json&, const std::string&)>;
  const std::map<std::string, Setter> setters{
      {"method", [&](const json& v, const std::string& k) { c.method = parse_method(as<std::string>(v, k)); }},
      {"data", [&](const json& v, const std::string&) { c.data = parse_data(v); }},
      {"seeds", [&](const json& v, const std::string& k) { c.seeds = as_list<std::uint64_t>(v, k); }},
      {"seed", [&](const json& v, const std::string& k) { c.seeds = {as<std::uint64_t>(v, k)}; }},
      {"iterations", [&](const json& v, const std::string& k) { c.iterations = as<std::int64_t>(v, k); }},
      {"batch_size", [&](const json& v, const std::string& k) { c.batch_size = as<std::size_t>(v, k); }},
      {"n_train", [&](const json& v, const std::string& k) { c.n_train = as<std::size_t>(v, k); }},
      {"ebm_lr", [&](const json& v, const std::string& k) { c.ebm_lr = as<double>(v, k); }},
      {"flow_lr", [&](const json& v, const std::string& k) { c.flow_lr = as<double>(v, k); }},
      {"accuracy_threshold", [&](const json& v, const std::string& k) { c.accuracy_threshold = as<double>(v, k); }},
      {"max_consecutive", [&](const json& v, const std::string& k) { c.max_consecutive = as<std::int64_t>(v, k); }},
      {"negative_prior_odds", [&](const json& v, const std::string& k) { c.negative_prior_odds = as<double>(v, k); }},
      {"flow_blocks", [&](const json& v, const std::string& k) { c.flow_blocks = as<std::size_t>(v, k); }},
      {"flow_width", [&](const json& v, const std::string& k) { c.flow_width = as<std::size_t>(v, k); }},
      {"flow_scale_max", [&](const json& v, const std::string& k) { c.flow_scale_max = as<double>(v, k); }},
      {"ebm_hidden", [&](const json& v, const std::string& k) { c.ebm_hidden = as_list<std::size_t>(v, k); }},
      {"flow_init", [&](const json& v, const std::string& k) { c.flow_init = parse_flow_init(as<std::string>(v, k)); }},
      {"pretrain_iters", [&](const json& v, const std::string& k) { c.pretrain_iters = as<std::int64_t>(v, k); }},
      {"pretrain_lr", [&](const json& v, const std::string& k) { c.pretrain_lr = as<double>(v, k); }},
      {"eval_every", [&](const json& v, const std::string& k) { c.eval_every = as<std::int64_t>(v, k); }},
      {"eval_points", [&](const json& v, const std::string& k) { c.eval_points = as<std::size_t>(v, k); }},
      {"eval_seed", [&](const json& v, const std::string& k) { c.eval_seed = as<std::uint64_t>(v, k); }},
      {"jsd_samples", [&](const json& v, const std::string& k) { c.jsd_samples = as<std::size_t>(v, k); }},
      {"checkpoint_every", [&](const json& v, const std::string& k) { c.checkpoint_every = as<std::int64_t>(v, k); }},
      {"grid_resolution", [&](const json& v, const std::string& k) { c.grid_resolution = as<std::size_t>(v, k); }},
      {"out_dir", [&](const json& v, const std::string& k) { c.out_dir = as<std::string>(v, k); }},
      {"labels_per_class", [&](const json& v, const std::string& k) { c.labels_per_class = as<std::size_t>(v, k); }},
      {"n_unlabeled", [&](const json& v, const std::string& k) { c.n_unlabeled = as<std::size_t>(v, k); }},
      {"heldout_points", [&](const json& v, const std::string& k) { c.heldout_points = as<std::size_t>(v, k); }},
      {"label_loss_weight", [&](const json& v, const std::string& k) { c.label_loss_weight = as<double>(v, k); }},
      {"warmup_ebm_iters", [&](const json& v, const std::string& k) { c.warmup_ebm_iters = as<std::int64_t>(v, k); }},
  };
  for (const auto& [key, value] : doc.items()) {
    if (key == "vat") {
      throw ConfigError("'vat' is not supported: virtual adversarial training is not part of fcelab");
    }
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(value, key);
  }
  validate(c);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string to_json(const RunConfig& c) {
  json data = json::object();
  data["name"] = c.data.name;
  for (const auto& [k, v] : c.data.params) data[k] = v;
  json doc{
      {"method", method_name(c.method)},
      {"data", data},
      {"seeds", c.seeds},
      {"iterations", c.iterations},
      {"batch_size", c.batch_size},
      {"n_train", c.n_train},
      {"ebm_lr", c.ebm_lr},
      {"flow_lr", c.flow_lr},
      {"accuracy_threshold", c.accuracy_threshold},
      {"max_consecutive", c.max_consecutive},
      {"negative_prior_odds", c.negative_prior_odds},
      {"flow_blocks", c.flow_blocks},
      {"flow_width", c.flow_width},
      {"flow_scale_max", c.flow_scale_max},
      {"ebm_hidden", c.ebm_hidden},
      {"flow_init", flow_init_name(c.flow_init)},
      {"pretrain_iters", c.pretrain_iters},
      {"pretrain_lr", c.pretrain_lr},
      {"eval_every", c.eval_every},
      {"eval_points", c.eval_points},
      {"eval_seed", c.eval_seed},
      {"jsd_samples", c.jsd_samples},
      {"checkpoint_every", c.checkpoint_every},
      {"grid_resolution", c.grid_resolution},
      {"out_dir", c.out_dir},
      {"labels_per_class", c.labels_per_class},
      {"n_unlabeled", c.n_unlabeled},
      {"heldout_points", c.heldout_points},
      {"label_loss_weight", c.label_loss_weight},
      {"warmup_ebm_iters", c.warmup_ebm_iters},
  };
  return doc.dump(2);
}

}  // namespace fcelab
