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

#include "fcelab/eval/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fcelab/data/csv.hpp"
#include "fcelab/errors.hpp"
#include "fcelab/estimators/diagnostics.hpp"
#include "fcelab/eval/checkpoint.hpp"
#include "fcelab/eval/config.hpp"
#include "fcelab/eval/gradcheck_suite.hpp"
#include "fcelab/eval/grid.hpp"
#include "fcelab/eval/history.hpp"
#include "fcelab/eval/metrics.hpp"
#include "fcelab/eval/runner.hpp"
#include "fcelab/semisup/semisup.hpp"

namespace fs = std::filesystem;

namespace fcelab {
namespace {

struct TrainArgs {
  std::string config_path;
  std::string out;
  std::string method;
  std::string data;
  std::string checkpoint;
  std::optional<std::uint64_t> seed;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// Keeps the header and rows up to `iteration` of an existing history file.
std::string history_prefix(const fs::path& path, std::int64_t iteration) {
  std::ifstream in(path);
  if (!in) return {};
  std::string out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!header) {
      const std::int64_t iter = std::stoll(line.substr(0, line.find(',')));
      if (iter > iteration) break;
    }
    header = false;
    out += line + '\n';
  }
  return out;
}

void write_final_grids(const Run& run, const fs::path& dir) {
  const GridSpec spec = square_grid(natural_box(run.truth), run.config.grid_resolution);
  if (run.ebm) {
    for (std::size_t k = 0; k < run.ebm->heads(); ++k) {
      const std::string name =
          run.ebm->heads() == 1 ? "grid_ebm.csv" : "grid_ebm_head" + std::to_string(k) + ".csv";
      write_grid_csv((dir / name).string(), render_grid(ebm_log_density(*run.ebm, k), spec));
    }
  }
  if (run.flow) {
    write_grid_csv((dir / "grid_flow.csv").string(),
                   render_grid(flow_log_density(*run.flow), spec));
  }
}

std::string summary_json(const Run& run, const Metrics& m) {
  nlohmann::json j{{"seed", run.seed},
                   {"iterations", run.state.iteration},
                   {"ebm_steps", run.state.ebm_steps},
                   {"flow_steps", run.state.flow_steps},
                   {"forced_switches", run.state.alternation.forced_switches},
                   {"mse_points", "samples from p_data"},
                   {"eval_points", run.config.eval_points},
                   {"eval_seed", run.config.eval_seed}};
  if (m.ebm_mse) j["ebm_mse"] = *m.ebm_mse;
  if (m.flow_nll) j["flow_nll"] = *m.flow_nll;
  if (m.jsd) j["jsd"] = *m.jsd;
  if (m.heldout_acc) j["heldout_acc"] = *m.heldout_acc;
  return j.dump(2) + "\n";
}

void train_one(Run& run, const fs::path& dir, bool resumed) {
  fs::create_directories(dir);
  const bool semisup = run.config.method == Method::semisup;
  const fs::path history_path = dir / "history.csv";
  std::string prefix = resumed ? history_prefix(history_path, run.state.iteration) : "";
  std::ofstream history(history_path, std::ios::binary | std::ios::trunc);
  if (!history) throw std::runtime_error("cannot write " + history_path.string());
  if (prefix.empty()) {
    write_history_header(history, semisup);
  } else {
    history << prefix;
  }
  write_text(dir / "config.json", to_json(run.config) + "\n");
  if (!run.pretrain_history.empty()) {
    write_history_csv((dir / "pretrain_history.csv").string(), run.pretrain_history);
  }

  execute(
      run,
      [&](const Run& r) {
        history.flush();
        save_run_checkpoint(
            (dir / ("ckpt_" + std::to_string(r.state.iteration) + ".ckpt")).string(), r);
      },
      [&](const HistoryRow& row) { write_history_row(history, row, semisup); });
  history.flush();
  if (!history) throw std::runtime_error("write failed: " + history_path.string());

  save_run_checkpoint((dir / "final.ckpt").string(), run);
  write_final_grids(run, dir);
  const Metrics m = evaluate(run);
  write_text(dir / "summary.json", summary_json(run, m));
  std::cout << "seed " << run.seed << ": " << run.state.iteration << " iterations";
  if (m.ebm_mse) std::cout << ", ebm_mse " << format_double(*m.ebm_mse);
  if (m.jsd) std::cout << ", jsd " << format_double(*m.jsd);
  if (m.heldout_acc) std::cout << ", heldout_acc " << format_double(*m.heldout_acc);
  std::cout << ", wrote " << dir.string() << "\n";
}

int run_train(const TrainArgs& args, std::optional<Method> forced) {
  if (!args.checkpoint.empty()) {
    Checkpoint ckpt = load_checkpoint(args.checkpoint);
    RunConfig config = !args.config_path.empty() ? load_run_config(args.config_path)
                       : !ckpt.config_json.empty() ? parse_run_config(ckpt.config_json)
                                                   : throw ConfigError(
                                                         "checkpoint has no config; pass --config");
    if (!args.out.empty()) config.out_dir = args.out;
    Run run = resume_run(config, ckpt);
    train_one(run, config.out_dir, true);
    return 0;
  }

  nlohmann::json doc = nlohmann::json::object();
  if (!args.config_path.empty()) doc = nlohmann::json::parse(read_file(args.config_path));
  if (forced) doc["method"] = std::string(method_name(*forced));
  if (!args.method.empty()) {
    if (forced && parse_method(args.method) != *forced) {
      throw ConfigError("--method conflicts with the subcommand");
    }
    doc["method"] = args.method;
  }
  if (!args.data.empty()) doc["data"] = args.data;
  if (forced == Method::semisup && !doc.contains("data")) doc["data"] = "spirals";
  if (args.seed) doc["seeds"] = {*args.seed};
  RunConfig config = parse_run_config(doc.dump());
  if (!args.out.empty()) config.out_dir = args.out;

  for (std::uint64_t seed : config.seeds) {
    const fs::path dir = config.seeds.size() == 1
                             ? fs::path(config.out_dir)
                             : fs::path(config.out_dir) / ("seed_" + std::to_string(seed));
    Run run = prepare_run(config, seed);
    train_one(run, dir, false);
  }
  return 0;
}

void add_train_options(CLI::App* cmd, TrainArgs& args, bool with_method) {
  cmd->add_option("--config", args.config_path, "JSON run config");
  cmd->add_option("--out", args.out, "output directory");
  if (with_method) cmd->add_option("--method", args.method, "fce, nce, mle or semisup");
  cmd->add_option("--data", args.data, "rings8, gaussian, checkerboard or spirals");
  cmd->add_option("--seed", args.seed, "run a single seed");
  cmd->add_option("--checkpoint", args.checkpoint, "resume from this checkpoint");
}

std::string pick_model(const Checkpoint& ckpt, const std::string& requested) {
  if (!requested.empty()) {
    if (requested != "ebm" && requested != "flow" && requested != "mixture") {
      throw ConfigError("--model must be ebm, flow or mixture");
    }
    if (requested == "flow" ? !ckpt.flow : !ckpt.ebm) {
      throw ConfigError("checkpoint has no " + requested + " model");
    }
    return requested;
  }
  if (ckpt.ebm) return "ebm";
  if (ckpt.flow) return "flow";
  throw FormatError("checkpoint holds no model");
}

LogDensityFn model_fn(const Checkpoint& ckpt, const std::string& which, std::size_t head) {
  if (which == "flow") return flow_log_density(*ckpt.flow);
  if (which == "mixture") {
    const EnergyModel& m = *ckpt.ebm;
    return [&m](const Tensor& x) { return mixture_log_unnormalized(m, x); };
  }
  return ebm_log_density(*ckpt.ebm, head);
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"fcelab: flow contrastive estimation on 2D densities"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a model and write history, checkpoints and grids");
  add_train_options(train, train_args, true);

  TrainArgs semisup_args;
  CLI::App* semisup = app.add_subcommand("semisup-train", "semi-supervised FCE on two spirals");
  add_train_options(semisup, semisup_args, true);

  std::string checkpoint;
  std::string metric = "mse";
  std::string truth_name;
  std::string model;
  std::size_t head = 0;
  std::size_t n = 10000;
  std::uint64_t eval_seed = kDefaultEvalSeed;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--metric", metric, "mse, nll, jsd or accuracy");
  eval->add_option("--truth", truth_name, "ground-truth distribution")->required();
  eval->add_option("--model", model, "ebm, flow or mixture");
  eval->add_option("--head", head);
  eval->add_option("--n", n, "evaluation points");
  eval->add_option("--seed", eval_seed, "evaluation seed");

  std::string out_path;
  std::string data_name;
  std::size_t sample_n = 1000;
  std::uint64_t sample_seed = 0;
  CLI::App* sample_cmd = app.add_subcommand("sample", "draw samples from a flow or a ground truth");
  sample_cmd->add_option("--checkpoint", checkpoint, "flow checkpoint");
  sample_cmd->add_option("--data", data_name, "sample the ground truth instead");
  sample_cmd->add_option("--n", sample_n);
  sample_cmd->add_option("--seed", sample_seed);
  sample_cmd->add_option("--out", out_path, "CSV path (stdout if omitted)");

  std::string grid_text = "-4,4,-4,4,200,200";
  CLI::App* render = app.add_subcommand("render", "rasterize a log-density to a grid CSV");
  render->add_option("--checkpoint", checkpoint);
  render->add_option("--data", data_name, "render the ground truth instead");
  render->add_option("--grid", grid_text, "xmin,xmax,ymin,ymax,nx,ny");
  render->add_option("--model", model, "ebm, flow or mixture");
  render->add_option("--head", head);
  render->add_option("--out", out_path, "CSV path (stdout if omitted)");

  std::size_t configurations = 100;
  std::uint64_t gc_seed = 0;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  gradcheck->add_option("--configs", configurations, "random configurations per check");
  gradcheck->add_option("--seed", gc_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (train->parsed()) return run_train(train_args, std::nullopt);
    if (semisup->parsed()) return run_train(semisup_args, Method::semisup);

    if (eval->parsed()) {
      const Checkpoint ckpt = load_checkpoint(checkpoint);
      const GroundTruth truth = make_distribution(std::string_view(truth_name));
      double value = 0.0;
      if (metric == "mse") {
        const std::string which = pick_model(ckpt, model);
        value = density_mse(model_fn(ckpt, which, head), closed_form(truth),
                            mse_eval_points(truth, n, eval_seed));
      } else if (metric == "nll") {
        const std::string which = pick_model(ckpt, model.empty() && ckpt.flow ? "flow" : model);
        value = mean_nll(model_fn(ckpt, which, head), mse_eval_points(truth, n, eval_seed));
      } else if (metric == "jsd") {
        if (!ckpt.flow) throw ConfigError("jsd needs a flow checkpoint");
        value = jsd_diagnostic(*ckpt.flow, truth, n, eval_seed);
      } else if (metric == "accuracy") {
        if (!ckpt.ebm || ckpt.ebm->heads() < 2) {
          throw ConfigError("accuracy needs a class-conditional EBM checkpoint");
        }
        const Samples held = sample(truth, n, eval_seed);
        value = classification_accuracy(predict(*ckpt.ebm, held.points), held.labels);
      } else {
        throw ConfigError("unknown metric '" + metric + "'");
      }
      std::cout << format_double(value) << "\n";
      return 0;
    }

    if (sample_cmd->parsed()) {
      Samples s;
      if (!data_name.empty()) {
        s = sample(make_distribution(std::string_view(data_name)), sample_n, sample_seed);
      } else if (!checkpoint.empty()) {
        const Checkpoint ckpt = load_checkpoint(checkpoint);
        if (!ckpt.flow) throw ConfigError("checkpoint has no flow to sample from");
        s.points = ckpt.flow->sample(sample_n, sample_seed).x;
        s.labels.assign(sample_n, kUnlabeled);
      } else {
        throw ConfigError("sample needs --checkpoint or --data");
      }
      if (out_path.empty()) {
        write_samples_csv(std::cout, s.points, s.labels);
      } else {
        write_samples_csv(out_path, s.points, s.labels);
      }
      return 0;
    }

    if (render->parsed()) {
      const GridSpec spec = parse_grid_spec(grid_text);
      DensityGrid grid;
      std::optional<Checkpoint> ckpt;
      if (!data_name.empty()) {
        const GroundTruth dist = make_distribution(std::string_view(data_name));
        const GaussianMixture2D& truth = closed_form(dist);
        grid = render_grid([&](const Tensor& x) { return Tensor::vector(truth.log_density(x)); },
                           spec);
      } else if (!checkpoint.empty()) {
        ckpt = load_checkpoint(checkpoint);
        grid = render_grid(model_fn(*ckpt, pick_model(*ckpt, model), head), spec);
      } else {
        throw ConfigError("render needs --checkpoint or --data");
      }
      if (out_path.empty()) {
        write_grid_csv(std::cout, grid);
      } else {
        write_grid_csv(out_path, grid);
      }
      return 0;
    }

    if (gradcheck->parsed()) {
      bool ok = true;
      for (const GradCheckResult& r : run_gradcheck_suite(configurations, gc_seed)) {
        std::cout << (r.passed() ? "PASS " : "FAIL ") << r.name << " configs=" << r.configurations
                  << " max_rel_err=" << format_double(r.max_error) << "\n";
        ok = ok && r.passed();
      }
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "fcelab: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

int cli_main(std::vector<std::string> args) {
  std::vector<char*> argv;
  for (std::string& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  return cli_main(static_cast<int>(args.size()), argv.data());
}

}  // namespace fcelab
