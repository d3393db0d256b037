/*
 * Copyright 2026 The Corticast Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// corticast: command-line entry point.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "corticast/attribution.hpp"
#include "corticast/binary_io.hpp"
#include "corticast/checkpoint.hpp"
#include "corticast/dataio.hpp"
#include "corticast/error.hpp"
#include "corticast/evalkit.hpp"
#include "corticast/mesh.hpp"
#include "corticast/mesh_io.hpp"
#include "corticast/optim.hpp"
#include "corticast/synthetic.hpp"
#include "corticast/task.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace corticast;

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kUsage = 2, kData = 3, kMetadata = 4, kNumeric = 5 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything a training-type command needs; keys of the JSON config file
// are these field names.
struct RunConfig {
  std::string task = "scan_age";
  std::string manifest;
  std::string out;
  std::uint64_t seed = 0;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t patience = 200;
  std::size_t max_epochs = 20000;
  std::size_t hidden_units = 16;
  std::size_t n_blocks = 4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::vector<double> target_weights;
  std::string space = "native";
  bool no_timing = false;
  std::size_t folds = 10;
  std::size_t runs = 4;
  std::vector<std::uint64_t> seeds;
};

// Flag > config file > default: every bound option remembers how to copy its
// value from the parsed flags and how to read it from JSON.
class RunOptions {
 public:
  explicit RunOptions(CLI::App* cmd) : cmd_(cmd) {
    cmd_->add_option("--config", config_path_, "JSON file with run settings");
  }

  template <typename T>
  void bind(const std::string& flag, const std::string& key, T RunConfig::*member,
            const std::string& help) {
    CLI::Option* opt = nullptr;
    if constexpr (std::is_same_v<T, bool>) {
      opt = cmd_->add_flag(flag, flags_.*member, help);
    } else {
      opt = cmd_->add_option(flag, flags_.*member, help)->capture_default_str();
    }
    bindings_.push_back({opt, key, [member](RunConfig& dst, const RunConfig& src) {
                           dst.*member = src.*member;
                         }});
    readers_[key] = [member, key](RunConfig& dst, const json& value) {
      try {
        dst.*member = value.get<T>();
      } catch (const json::exception&) {
        throw UsageError("config key '" + key + "' has the wrong type");
      }
    };
  }

  RunConfig resolve() const {
    RunConfig resolved;
    if (!config_path_.empty()) {
      json j;
      try {
        const auto bytes = read_file(config_path_);
        j = json::parse(bytes.begin(), bytes.end());
      } catch (const json::exception& e) {
        throw UsageError("config " + config_path_ + ": " + e.what());
      }
      if (!j.is_object()) throw UsageError("config " + config_path_ + ": expected an object");
      for (const auto& [key, value] : j.items()) {
        const auto it = readers_.find(key);
        if (it == readers_.end()) throw UsageError("config: unknown key '" + key + "'");
        it->second(resolved, value);
      }
    }
    for (const auto& b : bindings_) {
      if (b.option->count() > 0) b.copy(resolved, flags_);
    }
    return resolved;
  }

 private:
  struct Binding {
    CLI::Option* option;
    std::string key;
    std::function<void(RunConfig&, const RunConfig&)> copy;
  };

  CLI::App* cmd_;
  RunConfig flags_;
  std::string config_path_;
  std::vector<Binding> bindings_;
  std::map<std::string, std::function<void(RunConfig&, const json&)>> readers_;
};

void add_training_options(RunOptions& o) {
  o.bind("--task", "task", &RunConfig::task, "scan_age, birth_age or challenge");
  o.bind("--manifest", "manifest", &RunConfig::manifest, "Manifest CSV");
  o.bind("--out", "out", &RunConfig::out, "Output directory");
  o.bind("--seed", "seed", &RunConfig::seed, "Run seed");
  o.bind("--lr", "learning_rate", &RunConfig::learning_rate, "Adam learning rate");
  o.bind("--batch-size", "batch_size", &RunConfig::batch_size, "Subjects per batch");
  o.bind("--patience", "patience", &RunConfig::patience, "Epochs without improvement");
  o.bind("--max-epochs", "max_epochs", &RunConfig::max_epochs, "Epoch cap");
  o.bind("--hidden", "hidden_units", &RunConfig::hidden_units, "Hidden units per layer");
  o.bind("--blocks", "n_blocks", &RunConfig::n_blocks, "Per-vertex blocks");
  o.bind("--beta1", "adam_beta1", &RunConfig::adam_beta1, "Adam beta1");
  o.bind("--beta2", "adam_beta2", &RunConfig::adam_beta2, "Adam beta2");
  o.bind("--adam-eps", "adam_epsilon", &RunConfig::adam_epsilon, "Adam epsilon");
  o.bind("--target-weights", "target_weights", &RunConfig::target_weights,
         "Loss weight per output (challenge), default all ones");
  o.bind("--space", "space", &RunConfig::space, "Space label: native or template");
  o.bind("--no-timing", "no_timing", &RunConfig::no_timing,
         "Log zero wall times so outputs are byte-reproducible");
}

evalkit::ExperimentConfig experiment(const RunConfig& rc) {
  if (rc.manifest.empty()) throw UsageError("--manifest is required");
  if (rc.out.empty()) throw UsageError("--out is required");
  if (rc.space != "native" && rc.space != "template") {
    throw UsageError("--space must be native or template");
  }
  evalkit::ExperimentConfig ec;
  ec.task = optim::parse_task(rc.task);
  ec.model.hidden_units = rc.hidden_units;
  ec.model.n_blocks = rc.n_blocks;
  ec.train.learning_rate = rc.learning_rate;
  ec.train.batch_size = rc.batch_size;
  ec.train.patience = rc.patience;
  ec.train.max_epochs = rc.max_epochs;
  ec.train.adam_beta1 = rc.adam_beta1;
  ec.train.adam_beta2 = rc.adam_beta2;
  ec.train.adam_epsilon = rc.adam_epsilon;
  ec.train.target_weights = rc.target_weights;
  ec.train.record_wall_time = !rc.no_timing;
  ec.train.validate();
  ec.space = rc.space;
  return ec;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void write_run(const fs::path& dir, const evalkit::RunResult& run) {
  fs::create_directories(dir);
  autonet::save_checkpoint(run.checkpoint, dir / "model.mlpc");
  write_text_atomic(dir / "train_log.csv", optim::train_log_csv(run.log));
  write_text_atomic(dir / "train_summary.json", optim::train_summary_json(run.log));
  if (run.test.n_subjects > 0) {
    write_text_atomic(dir / "test_eval.json", dump(evalkit::to_json(run.test)));
  }
}

void write_protocol(const fs::path& dir, const std::string& stem,
                    const evalkit::ProtocolOutcome& outcome, const std::string& prefix) {
  for (std::size_t i = 0; i < outcome.runs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%s_%02zu", prefix.c_str(), i);
    write_run(dir / name, outcome.runs[i]);
  }
  write_text_atomic(dir / (stem + ".json"), dump(evalkit::to_json(outcome.report)));
  write_text_atomic(dir / (stem + ".csv"), evalkit::to_csv(outcome.report));
}

// --- commands ---------------------------------------------------------------

int cmd_icosphere(int order, const std::string& out) {
  if (order < 0 || order > mesh::kMaxIcosphereOrder) {
    throw UsageError("--order must lie in [0, " + std::to_string(mesh::kMaxIcosphereOrder) + "]");
  }
  const auto m = mesh::icosphere(order);
  mesh::save_smesh(m, out);
  std::cout << "vertices " << m.vertices.size() << " triangles " << m.triangles.size() << "\n";
  return kOk;
}

int cmd_resample(const std::string& mesh_path, const std::string& features_path,
                 int target_order, bool mirror, const std::string& out) {
  if (target_order < 0 || target_order > mesh::kMaxIcosphereOrder) {
    throw UsageError("--target-order out of range");
  }
  auto source = mesh::load_smesh(mesh_path);
  const auto field = mesh::load_sfeat(features_path);
  if (field.vertex_count() != source.vertices.size()) {
    throw SchemaError(features_path + ": " + std::to_string(field.vertex_count()) +
                      " vertices, mesh " + mesh_path + " has " +
                      std::to_string(source.vertices.size()));
  }
  if (mirror) source = mesh::mirror_sagittal(source);
  const auto target = mesh::at_file_precision(mesh::icosphere(target_order));
  mesh::save_sfeat(mesh::resample(source, field, target), out);
  return kOk;
}

struct SynthArgs {
  std::size_t subjects = 530;
  int order = 2;
  std::uint64_t seed = 0;
  double noise_sigma = 0.5;
  std::string latent = "pma_scan";
  double preterm_fraction = 0.21;
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  dataio::SyntheticSpec spec;
  if (a.latent == "pma_scan") {
    spec.latent = dataio::Target::pma_scan;
  } else if (a.latent == "ga_birth") {
    spec.latent = dataio::Target::ga_birth;
  } else {
    throw UsageError("--latent must be pma_scan or ga_birth");
  }
  spec.noise_sigma = a.noise_sigma;
  spec.preterm_fraction = a.preterm_fraction;
  const auto data = dataio::generate_synthetic(a.subjects, a.order, a.seed, spec);
  const fs::path dir = a.out;
  fs::create_directories(dir);
  dataio::save_manifest(data.dataset, dir / "manifest.csv");
  const json truth{{"signal_channel", data.truth.signal_channel},
                   {"latent", dataio::to_string(data.truth.latent)},
                   {"intercept", data.truth.intercept},
                   {"slope", data.truth.slope},
                   {"noise_sigma", data.truth.noise_sigma},
                   {"preterm_count", dataio::count_preterm(data.dataset)}};
  write_text_atomic(dir / "ground_truth.json", dump(truth));
  return kOk;
}

int cmd_train(const RunConfig& rc) {
  const auto ec = experiment(rc);
  const auto dataset = dataio::load_manifest(rc.manifest);
  const auto split = dataio::split_indices(dataset);
  const auto run = evalkit::train_and_evaluate(ec, dataset, split, rc.seed);
  write_run(rc.out, run);
  std::cout << "best_epoch " << run.log.best_epoch << " best_val_loss " << run.log.best_val_loss;
  if (run.test.n_subjects > 0) std::cout << " test_mae_weeks " << run.test.mae;
  std::cout << "\n";
  return kOk;
}

int cmd_eval(const std::string& model_path, const std::string& manifest,
             const std::string& split_name, const std::string& space, const std::string& out) {
  const auto checkpoint = autonet::load_checkpoint(model_path);
  if (!checkpoint.stats) throw FormatError(model_path + ": no standardization statistics");
  const auto dataset = dataio::load_manifest(manifest);
  const auto split = dataio::parse_split(split_name);
  const auto subjects = dataset.indices_of(split);
  const auto report =
      evalkit::evaluate(checkpoint.model, dataset, *checkpoint.stats,
                        optim::parse_task(checkpoint.task), subjects, split_name, space);
  const std::string text = dump(evalkit::to_json(report));
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text_atomic(out, text);
    std::cout.precision(17);
    std::cout << "mae_weeks " << report.mae << "\n";
  }
  return kOk;
}

int cmd_cv(const RunConfig& rc) {
  const auto ec = experiment(rc);
  const auto dataset = dataio::load_manifest(rc.manifest);
  const auto outcome =
      evalkit::cross_validate(dataset, rc.folds, rc.seed, evalkit::make_trainer(ec));
  write_protocol(rc.out, "cv_report", outcome, "fold");
  std::cout << "mean_mae_weeks " << outcome.report.mean << " std " << outcome.report.std << "\n";
  return kOk;
}

int cmd_protocol(const RunConfig& rc) {
  const auto ec = experiment(rc);
  std::vector<std::uint64_t> seeds = rc.seeds;
  if (seeds.empty()) {
    seeds.resize(rc.runs);
    std::iota(seeds.begin(), seeds.end(), rc.seed);
  }
  const auto dataset = dataio::load_manifest(rc.manifest);
  const auto outcome = evalkit::run_protocol(dataset, seeds, evalkit::make_trainer(ec));
  write_protocol(rc.out, "protocol_report", outcome, "run");
  std::cout << "best_mae_weeks " << outcome.report.best << " std " << outcome.report.std << "\n";
  return kOk;
}

struct ExplainArgs {
  std::string model;
  std::string manifest;
  std::string method = "deeplift_rescale";
  std::size_t backgrounds = 32;
  std::uint64_t seed = 0;
  std::size_t steps = 256;
  std::size_t output_index = 0;
  std::string out;
};

int cmd_explain(const ExplainArgs& a) {
  const auto checkpoint = autonet::load_checkpoint(a.model);
  const auto dataset = dataio::load_manifest(a.manifest);
  const auto spec = attribution::output_spec(checkpoint, a.output_index);
  const auto background_ids =
      attribution::choose_backgrounds(dataset.indices_of(dataio::Split::train), a.backgrounds,
                                      a.seed);
  if (background_ids.empty()) throw SchemaError("manifest has no training subjects");
  const auto backgrounds = attribution::subject_inputs(checkpoint, dataset, background_ids);
  const auto subjects = attribution::evaluation_subjects(dataset);
  const auto inputs = attribution::subject_inputs(checkpoint, dataset, subjects);

  Matrix baseline(backgrounds.front().rows(), backgrounds.front().cols());
  for (const auto& b : backgrounds) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      baseline.values()[i] += b.values()[i] / static_cast<double>(backgrounds.size());
    }
  }

  std::vector<attribution::Attribution> results;
  for (const auto& x : inputs) {
    if (a.method == "deeplift_rescale") {
      results.push_back(attribution::deeplift_rescale(checkpoint.model, x, backgrounds, spec));
    } else if (a.method == "integrated_gradients") {
      auto r = attribution::integrated_gradients(checkpoint.model, x, baseline, a.steps, spec);
      r.background_n = backgrounds.size();
      results.push_back(std::move(r));
    } else {
      throw UsageError("--method must be deeplift_rescale or integrated_gradients");
    }
  }

  const fs::path dir = a.out;
  fs::create_directories(dir / "subjects");
  double worst = 0.0;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const auto& id = dataset.subjects[subjects[i]].meta.subject_id;
    mesh::save_sfeat(attribution::to_field(results[i], checkpoint.channel_names),
                     dir / "subjects" / (id + ".sfeat"));
    write_text_atomic(dir / "subjects" / (id + ".json"),
                      dump(attribution::sidecar_json(results[i])));
    worst = std::max(worst, results[i].completeness_residual);
  }

  const auto maps = attribution::group_maps(dataset, subjects, results, checkpoint.channel_names);
  json groups = json::object();
  for (const auto* map : {maps.preterm ? &*maps.preterm : nullptr, maps.term ? &*maps.term : nullptr}) {
    if (map == nullptr) continue;
    const std::string name = attribution::to_string(map->group);
    mesh::save_sfeat(map->features, dir / ("group_" + name + "_features.sfeat"));
    mesh::save_sfeat(map->attributions, dir / ("group_" + name + "_attributions.sfeat"));
    const auto importance = attribution::channel_importance(*map, checkpoint.channel_names);
    json imp = json::object();
    for (std::size_t c = 0; c < importance.size(); ++c) imp[checkpoint.channel_names[c]] = importance[c];
    groups[name] = json{{"n_subjects", map->n_subjects}, {"mean_abs_attribution", imp}};
  }
  for (const char* name : {"preterm", "term"}) {
    if (!groups.contains(name)) groups[name] = nullptr;
  }
  const json summary{{"method", a.method},
                     {"background_n", backgrounds.size()},
                     {"output_index", a.output_index},
                     {"n_subjects", subjects.size()},
                     {"completeness_residual", worst},
                     {"groups", groups}};
  write_text_atomic(dir / "explain_summary.json", dump(summary));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cortical surface phenotype regression"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  auto* ico = app.add_subcommand("icosphere", "Write an icosphere mesh");
  int ico_order = 6;
  std::string ico_out;
  ico->add_option("--order", ico_order, "Subdivision order")->capture_default_str();
  ico->add_option("--out", ico_out, "Output .smesh")->required();

  auto* res = app.add_subcommand("resample", "Resample features onto an icosphere");
  std::string res_mesh, res_features, res_out;
  int res_order = 6;
  bool res_mirror = false;
  res->add_option("--mesh", res_mesh, "Source .smesh")->required();
  res->add_option("--features", res_features, "Source .sfeat")->required();
  res->add_option("--target-order", res_order, "Target icosphere order")->capture_default_str();
  res->add_flag("--mirror", res_mirror, "Mirror the source mesh across x = 0 first");
  res->add_option("--out", res_out, "Output .sfeat")->required();

  auto* syn = app.add_subcommand("synth", "Generate a synthetic dataset");
  SynthArgs synth;
  syn->add_option("--subjects", synth.subjects, "Subject count")->capture_default_str();
  syn->add_option("--order", synth.order, "Icosphere order")->capture_default_str();
  syn->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
  syn->add_option("--noise-sigma", synth.noise_sigma, "Target noise, weeks")->capture_default_str();
  syn->add_option("--latent", synth.latent, "Age carried by the signal channel")
      ->capture_default_str();
  syn->add_option("--preterm-fraction", synth.preterm_fraction, "Share born before 37 weeks")
      ->capture_default_str();
  syn->add_option("--out", synth.out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train on the manifest's fixed split");
  RunOptions train_opts(train);
  add_training_options(train_opts);

  auto* cv = app.add_subcommand("cv", "k-fold cross-validation");
  RunOptions cv_opts(cv);
  add_training_options(cv_opts);
  cv_opts.bind("--folds", "folds", &RunConfig::folds, "Fold count");

  auto* proto = app.add_subcommand("protocol", "Repeated training with different seeds");
  RunOptions proto_opts(proto);
  add_training_options(proto_opts);
  proto_opts.bind("--runs", "runs", &RunConfig::runs, "Runs, seeded seed, seed+1, ...");
  proto_opts.bind("--seeds", "seeds", &RunConfig::seeds, "Explicit run seeds (overrides --runs)");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ev_model, ev_manifest, ev_split = "test", ev_space = "native", ev_out;
  ev->add_option("--model", ev_model, "Checkpoint .mlpc")->required();
  ev->add_option("--manifest", ev_manifest, "Manifest CSV")->required();
  ev->add_option("--split", ev_split, "train, val or test")->capture_default_str();
  ev->add_option("--space", ev_space, "Space label")->capture_default_str();
  ev->add_option("--out", ev_out, "Report JSON (default stdout)");

  auto* ex = app.add_subcommand("explain", "Attribution maps for validation and test subjects");
  ExplainArgs explain;
  ex->add_option("--model", explain.model, "Checkpoint .mlpc")->required();
  ex->add_option("--manifest", explain.manifest, "Manifest CSV")->required();
  ex->add_option("--method", explain.method, "deeplift_rescale or integrated_gradients")
      ->capture_default_str();
  ex->add_option("--backgrounds", explain.backgrounds, "Training subjects used as references")
      ->capture_default_str();
  ex->add_option("--seed", explain.seed, "Background sampling seed")->capture_default_str();
  ex->add_option("--steps", explain.steps, "Integration steps")->capture_default_str();
  ex->add_option("--output-index", explain.output_index, "Explained output")
      ->capture_default_str();
  ex->add_option("--out", explain.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*ico) return cmd_icosphere(ico_order, ico_out);
    if (*res) return cmd_resample(res_mesh, res_features, res_order, res_mirror, res_out);
    if (*syn) return cmd_synth(synth);
    if (*train) return cmd_train(train_opts.resolve());
    if (*cv) return cmd_cv(cv_opts.resolve());
    if (*proto) return cmd_protocol(proto_opts.resolve());
    if (*ev) return cmd_eval(ev_model, ev_manifest, ev_split, ev_space, ev_out);
    if (*ex) return cmd_explain(explain);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kUsage;
  } catch (const MetadataError& e) {
    std::cerr << "metadata error: " << e.what() << "\n";
    return kMetadata;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
