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

#include "fcelab/eval/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "fcelab/errors.hpp"

namespace fcelab {
namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written in host order");

struct PendingArray {
  std::string key;
  const Tensor* tensor;
};

json optimizer_json(const OptimizerState& opt) {
  return {{"kind", opt.config.kind == OptimizerKind::adam ? "adam" : "adamax"},
          {"learning_rate", opt.config.learning_rate},
          {"beta1", opt.config.beta1},
          {"beta2", opt.config.beta2},
          {"epsilon", opt.config.epsilon},
          {"step", opt.step},
          {"moments", opt.first_moment.size()}};
}

void add_optimizer_arrays(std::vector<PendingArray>& out, const std::string& prefix,
                          const OptimizerState& opt) {
  for (std::size_t i = 0; i < opt.first_moment.size(); ++i) {
    out.push_back({prefix + ".m." + std::to_string(i), &opt.first_moment[i]});
    out.push_back({prefix + ".v." + std::to_string(i), &opt.second_moment[i]});
  }
}

struct ArrayIndex {
  std::uint64_t offset;
  Shape shape;
};

class Reader {
 public:
  Reader(std::map<std::string, ArrayIndex> index, std::vector<char> payload)
      : index_(std::move(index)), payload_(std::move(payload)) {}

  Tensor take(const std::string& key, const Shape& expected) {
    auto it = index_.find(key);
    if (it == index_.end()) throw FormatError("checkpoint: missing array '" + key + "'");
    if (it->second.shape != expected) {
      throw FormatError("checkpoint: array '" + key + "' has shape " +
                        shape_string(it->second.shape) + ", expected " +
                        shape_string(expected));
    }
    Tensor t(expected);
    std::memcpy(t.raw(), payload_.data() + it->second.offset, t.size() * sizeof(double));
    index_.erase(it);
    return t;
  }

  void finish() const {
    if (!index_.empty()) {
      throw FormatError("checkpoint: unknown array key '" + index_.begin()->first + "'");
    }
  }

 private:
  std::map<std::string, ArrayIndex> index_;
  std::vector<char> payload_;
};

OptimizerState read_optimizer(const json& j, const std::string& prefix, Reader& reader,
                              const std::vector<Shape>& shapes) {
  OptimizerState opt;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind != "adam" && kind != "adamax") {
    throw FormatError("checkpoint: unknown optimizer kind '" + kind + "'");
  }
  opt.config.kind = kind == "adam" ? OptimizerKind::adam : OptimizerKind::adamax;
  opt.config.learning_rate = j.at("learning_rate").get<double>();
  opt.config.beta1 = j.at("beta1").get<double>();
  opt.config.beta2 = j.at("beta2").get<double>();
  opt.config.epsilon = j.at("epsilon").get<double>();
  opt.step = j.at("step").get<std::int64_t>();
  const std::size_t n = j.at("moments").get<std::size_t>();
  if (n != 0 && n != shapes.size()) {
    throw FormatError("checkpoint: " + prefix + " holds " + std::to_string(n) +
                      " moments for " + std::to_string(shapes.size()) + " parameters");
  }
  for (std::size_t i = 0; i < n; ++i) {
    opt.first_moment.push_back(reader.take(prefix + ".m." + std::to_string(i), shapes[i]));
    opt.second_moment.push_back(reader.take(prefix + ".v." + std::to_string(i), shapes[i]));
  }
  return opt;
}

template <typename Model>
std::vector<Shape> shapes_of(const std::optional<Model>& model) {
  std::vector<Shape> out;
  if (model) {
    for (const Parameter* p : model->parameters()) out.push_back(p->value.shape());
  }
  return out;
}

template <typename Model>
void read_params(Model& model, Reader& reader) {
  for (Parameter* p : model.parameters()) {
    p->value = reader.take(p->name, p->value.shape());
    p->grad = Tensor(p->value.shape());
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const EnergyModel* ebm,
                     const FlowModel* flow, const TrainState* state,
                     const std::string& config_json) {
  json index = json::object();
  std::vector<PendingArray> arrays;
  if (ebm) {
    index["ebm_config"] = {{"hidden", ebm->config().hidden},
                           {"heads", ebm->config().heads},
                           {"slope", ebm->config().slope}};
    for (const Parameter* p : ebm->parameters()) arrays.push_back({p->name, &p->value});
  }
  if (flow) {
    index["flow_config"] = {{"blocks", flow->config().blocks},
                            {"width", flow->config().width},
                            {"scale_max", flow->config().scale_max}};
    for (const Parameter* p : flow->parameters()) arrays.push_back({p->name, &p->value});
  }
  if (state) {
    std::ostringstream rng;
    rng << state->rng;
    const AlternationState& a = state->alternation;
    index["state"] = {
        {"seed", state->seed},
        {"iteration", state->iteration},
        {"ebm_steps", state->ebm_steps},
        {"flow_steps", state->flow_steps},
        {"rng", rng.str()},
        {"alternation",
         {{"side", std::string(side_name(a.side))},
          {"last_accuracy", a.last_accuracy},
          {"consecutive", a.consecutive},
          {"threshold", a.threshold},
          {"max_consecutive", a.max_consecutive},
          {"forced_switches", a.forced_switches}}},
        {"ebm_optimizer", optimizer_json(state->ebm_optimizer)},
        {"flow_optimizer", optimizer_json(state->flow_optimizer)},
    };
    add_optimizer_arrays(arrays, "optim.ebm", state->ebm_optimizer);
    add_optimizer_arrays(arrays, "optim.flow", state->flow_optimizer);
  }
  if (!config_json.empty()) index["config"] = json::parse(config_json);

  json table = json::object();
  std::uint64_t offset = 0;
  for (const PendingArray& a : arrays) {
    if (table.contains(a.key)) throw FormatError("checkpoint: duplicate key " + a.key);
    table[a.key] = {{"offset", offset}, {"shape", a.tensor->shape()}, {"dtype", "f64"}};
    offset += a.tensor->size() * sizeof(double);
  }
  index["arrays"] = table;
  const std::string text = index.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
    const std::uint32_t version = kCheckpointVersion;
    const std::uint64_t length = text.size();
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&length), sizeof(length));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const PendingArray& a : arrays) {
      out.write(reinterpret_cast<const char*>(a.tensor->raw()),
                static_cast<std::streamsize>(a.tensor->size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  constexpr std::size_t kHeader = sizeof(kCheckpointMagic) + sizeof(std::uint32_t) +
                                  sizeof(std::uint64_t);
  if (bytes.size() < kHeader) throw FormatError("checkpoint: truncated header in " + path);
  if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw FormatError("checkpoint: bad magic in " + path +
                      " (not an fcelab checkpoint or unsupported version)");
  }
  std::uint32_t version = 0;
  std::uint64_t length = 0;
  std::memcpy(&version, bytes.data() + 8, sizeof(version));
  std::memcpy(&length, bytes.data() + 12, sizeof(length));
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: version " + std::to_string(version) + " in " + path +
                      ", this build reads version " + std::to_string(kCheckpointVersion));
  }
  if (length > bytes.size() - kHeader) throw FormatError("checkpoint: truncated index");

  json index;
  try {
    index = json::parse(bytes.begin() + kHeader,
                        bytes.begin() + static_cast<std::ptrdiff_t>(kHeader + length));
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: corrupt index: ") + e.what());
  }

  static const std::set<std::string> known{"ebm_config", "flow_config", "state", "config",
                                           "arrays"};
  for (const auto& [k, v] : index.items()) {
    if (!known.count(k)) throw FormatError("checkpoint: unknown index key '" + k + "'");
  }

  const std::size_t payload_begin = kHeader + length;
  const std::size_t payload_size = bytes.size() - payload_begin;
  std::map<std::string, ArrayIndex> arrays;
  try {
    for (const auto& [key, entry] : index.at("arrays").items()) {
      if (entry.at("dtype").get<std::string>() != "f64") {
        throw FormatError("checkpoint: array '" + key + "' has unsupported dtype");
      }
      ArrayIndex a{entry.at("offset").get<std::uint64_t>(), entry.at("shape").get<Shape>()};
      const std::uint64_t end = a.offset + shape_size(a.shape) * sizeof(double);
      if (end > payload_size) {
        throw FormatError("checkpoint: truncated payload for '" + key + "'");
      }
      arrays.emplace(key, std::move(a));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed array table: ") + e.what());
  }
  Reader reader(std::move(arrays),
                std::vector<char>(bytes.begin() + static_cast<std::ptrdiff_t>(payload_begin),
                                  bytes.end()));

  Checkpoint out;
  try {
    if (index.contains("ebm_config")) {
      const json& j = index["ebm_config"];
      EbmConfig c;
      c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
      c.heads = j.at("heads").get<std::size_t>();
      c.slope = j.at("slope").get<double>();
      out.ebm.emplace(c);
      read_params(*out.ebm, reader);
    }
    if (index.contains("flow_config")) {
      const json& j = index["flow_config"];
      FlowConfig c{j.at("blocks").get<std::size_t>(), j.at("width").get<std::size_t>(),
                   j.at("scale_max").get<double>()};
      out.flow.emplace(c);
      read_params(*out.flow, reader);
    }
    if (index.contains("state")) {
      const json& j = index["state"];
      TrainState s;
      s.seed = j.at("seed").get<std::uint64_t>();
      s.iteration = j.at("iteration").get<std::int64_t>();
      s.ebm_steps = j.at("ebm_steps").get<std::int64_t>();
      s.flow_steps = j.at("flow_steps").get<std::int64_t>();
      std::istringstream rng(j.at("rng").get<std::string>());
      rng >> s.rng;
      if (!rng) throw FormatError("checkpoint: corrupt rng state");
      const json& a = j.at("alternation");
      const std::string side = a.at("side").get<std::string>();
      if (side != "ebm" && side != "flow") throw FormatError("checkpoint: bad side " + side);
      s.alternation.side = side == "ebm" ? Side::ebm : Side::flow;
      s.alternation.last_accuracy = a.at("last_accuracy").get<double>();
      s.alternation.consecutive = a.at("consecutive").get<std::int64_t>();
      s.alternation.threshold = a.at("threshold").get<double>();
      s.alternation.max_consecutive = a.at("max_consecutive").get<std::int64_t>();
      s.alternation.forced_switches = a.at("forced_switches").get<std::int64_t>();
      s.ebm_optimizer =
          read_optimizer(j.at("ebm_optimizer"), "optim.ebm", reader, shapes_of(out.ebm));
      s.flow_optimizer =
          read_optimizer(j.at("flow_optimizer"), "optim.flow", reader, shapes_of(out.flow));
      out.state = std::move(s);
    }
    if (index.contains("config")) out.config_json = index["config"].dump(2);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed index: ") + e.what());
  }
  reader.finish();
  return out;
}

}  // namespace fcelab
