// SPDX-License-Identifier: Apache-2.0
#include "agenet/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "agenet/config.hpp"
#include "agenet/gradcheck_suite.hpp"
#include "agenet/ranking.hpp"
#include "agenet/trainer.hpp"

namespace agenet {

namespace fs = std::filesystem;

namespace {

std::string fixed6(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << v;
  return os.str();
}

template <typename T>
std::string list6(const std::vector<T>& values) {
  std::string s = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_floating_point_v<T>) {
      s += fixed6(values[i]);
    } else {
      s += std::to_string(values[i]);
    }
  }
  return s + "]";
}

// Thrown for bad flags or configuration; maps to exit status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string preset;
  std::string loss;
  bool no_guidance = false;
  std::string out;
};

void add_common(CLI::App* cmd, Options& o, bool training_flags) {
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--out", o.out, "Output path");
  if (training_flags) {
    cmd->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--preset", o.preset, "Network preset")->check(CLI::IsMember({"standard", "desk"}));
    cmd->add_option("--loss", o.loss, "Age loss")->check(CLI::IsMember({"ecr", "l1", "ce"}));
    cmd->add_flag("--no-attribute-guidance", o.no_guidance,
                  "Train on the age loss alone");
  }
}

TrainConfig resolve_config(const Options& o) {
  TrainConfig cfg;
  try {
    cfg = o.config.empty() ? TrainConfig{} : load_train_config(o.config);
  } catch (const ConfigError& e) {
    throw UsageError(std::string("config error: ") + e.what());
  }
  if (o.seed) cfg.seed = *o.seed;
  if (!o.preset.empty()) {
    const std::size_t res = cfg.network.input_resolution;
    cfg.network = NetworkConfig::preset(o.preset);
    cfg.network.input_resolution = res;
  }
  if (!o.loss.empty()) cfg.loss = loss_kind_from_string(o.loss);
  if (o.no_guidance) cfg.attribute_guidance = false;
  if (!o.out.empty()) cfg.output_dir = fs::path(o.out);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("config error: ") + e.what());
  }
  return cfg;
}

void print_report(std::ostream& out, const EvalReport& r) {
  out << "samples " << r.count << "\n";
  out << "mae " << fixed6(r.mae) << "\n";
  for (const auto& g : r.group_mae) {
    out << "group_mae from " << g.lower_age << " count " << g.count << " mae " << fixed6(g.mae)
        << "\n";
  }
  out << "gender_accuracy " << fixed6(r.gender_accuracy) << "\n";
  out << "age_group_accuracy " << fixed6(r.age_group_accuracy) << "\n";
  if (r.ethnicity_accuracy) out << "ethnicity_accuracy " << fixed6(*r.ethnicity_accuracy) << "\n";
}

int cmd_gradcheck(const std::string& scope_name, const Options& o, std::size_t seeds,
                  std::size_t networks, std::ostream& out) {
  GradcheckScope scope;
  try {
    scope = gradcheck_scope_from_string(scope_name);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  SuiteOptions opts;
  opts.seeds = seeds;
  opts.full_seeds = networks;
  if (o.seed) opts.base_seed = *o.seed;
  bool ok = true;
  run_gradcheck_suite(scope, opts, [&](const SuiteEntry& e) {
    out << (e.passed() ? "PASS " : "FAIL ") << e.name << " runs " << e.runs << " elements " << e.checked
        << " unresolved " << e.unresolved << " max_rel_err "
        << std::scientific << std::setprecision(6) << e.max_error << " tol " << e.tolerance
        << std::defaultfloat << "\n";
    if (!e.passed()) out << e.failure;
    ok = ok && e.passed();
  });
  return ok ? kExitOk : kExitFailure;
}

int cmd_synth(const Options& o, std::size_t count, std::size_t resolution, double noise,
              const std::string& schema_name, std::ostream& out) {
  if (o.out.empty()) throw UsageError("synth: --out is required");
  AttributeSchema schema;
  try {
    schema = AttributeSchema::named(schema_name);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (noise < 0.0) throw UsageError("synth: --noise must be >= 0");
  SyntheticSpec spec;
  spec.resolution = resolution;
  spec.a_min = schema.a_min;
  spec.a_max = schema.a_max;
  spec.noise_sigma = noise;
  spec.seed = o.seed.value_or(0);
  spec.count = count;
  spec.ethnicity_classes = std::max<std::size_t>(1, schema.ethnicity_classes);

  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  if (ec) throw std::runtime_error("synth: cannot create " + dir.string() + ": " + ec.message());
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < count; ++i) {
    const Sample s = synth_generate(spec, i);
    char name[32];
    std::snprintf(name, sizeof(name), "images/%06zu.img", i);
    write_image(dir / name, s.image);
    entries.push_back({name, s.age, s.gender, s.ethnicity});
  }
  write_manifest(dir / "manifest.csv", entries);
  out << "wrote " << count << " samples to " << (dir / "manifest.csv").string() << "\n";
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const TrainConfig cfg = resolve_config(o);
  std::vector<std::string> warnings;
  const Dataset data = load_dataset(cfg, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  out << "train " << data.train.size() << " val " << data.val.size() << " test "
      << data.test.size() << " loss " << to_string(cfg.loss) << " guidance "
      << (cfg.attribute_guidance ? "on" : "off") << "\n";
  const TrainResult res = train(cfg, data, [&](const EpochMetrics& m) {
    out << "epoch " << m.epoch << " train_loss " << fixed6(m.train_loss) << " train_mae "
        << fixed6(m.train_mae) << " val_mae " << fixed6(m.val_mae)
        << (m.retained ? " retained" : "") << std::endl;
  });
  out << "best_val_mae " << fixed6(res.best.best_val_mae) << " epoch " << res.best.epoch << "\n";
  if (!data.test.empty()) {
    const auto best = restore_model(res.best);
    out << "test_mae " << fixed6(evaluate(*best, data.test, cfg.crop_size).mae) << "\n";
  }
  if (cfg.output_dir) out << "checkpoint " << (*cfg.output_dir / "best.agn").string() << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& manifest, const std::string& split,
             const std::string& schema_name, std::ostream& out, std::ostream& err) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const auto model = restore_model(ckpt);
  TrainConfig cfg = ckpt.config;
  if (!manifest.empty()) cfg.data.manifest = manifest;
  AttributeSchema dataset_schema = cfg.schema;
  if (!schema_name.empty()) {
    try {
      dataset_schema = AttributeSchema::named(schema_name);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    if (!same_schema(dataset_schema, cfg.schema)) {
      throw UsageError("eval: dataset schema '" + dataset_schema.name +
                       "' does not match checkpoint schema '" + cfg.schema.name + "'");
    }
  }
  std::vector<std::string> warnings;
  const Dataset data = load_dataset(cfg, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  const std::vector<Sample>& samples =
      split == "train" ? data.train : split == "test" ? data.test : data.val;
  out << "checkpoint epoch " << ckpt.epoch << " best_val_mae " << fixed6(ckpt.best_val_mae)
      << "\n";
  print_report(out, evaluate(*model, dataset_schema, samples, cfg.crop_size));
  return kExitOk;
}

int cmd_encode(int age, int a_min, int a_max, std::ostream& out) {
  const IntervalPoints pts = make_interval_points(a_min, a_max);
  const RankingLabel label = encode_ranking_label(age, pts);
  std::vector<int> bits(label.bits.begin(), label.bits.end());
  out << "label " << list6(bits) << "\n";
  out << "b " << list6(pts.thresholds) << "\n";
  return kExitOk;
}

int cmd_loss(double h, int age, int a_min, int a_max, std::ostream& out) {
  const IntervalPoints pts = make_interval_points(a_min, a_max);
  const RankingLabel label = encode_ranking_label(age, pts);
  out << "loss " << fixed6(ecr_loss_value(h, label, pts)) << "\n";
  out << "grad " << fixed6(ecr_loss_derivative(h, label, pts)) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Age estimation with ranking loss, multi-scale attention backbone and attribute guidance",
               "agenet"};
  app.require_subcommand(1);
  Options o;

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  std::string scope = "ops";
  std::size_t seeds = 100;
  gradcheck->add_option("--scope", scope, "ops, block or full");
  std::size_t networks = 3;
  gradcheck->add_option("--seeds", seeds, "Random cases per op");
  gradcheck->add_option("--networks", networks, "Randomly initialised networks in full scope");
  add_common(gradcheck, o, false);

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset (images + manifest)");
  std::size_t count = 100, resolution = 64;
  double noise = 0.0;
  std::string schema = "morph";
  synth->add_option("--count", count, "Number of samples");
  synth->add_option("--resolution", resolution, "Image side length")->check(CLI::Range(2, 4096));
  synth->add_option("--noise", noise, "Gaussian noise standard deviation");
  synth->add_option("--schema", schema, "morph, utkface or lap2016");
  add_common(synth, o, false);

  auto* train_cmd = app.add_subcommand("train", "Train a model");
  add_common(train_cmd, o, true);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string checkpoint, manifest, split = "val", eval_schema;
  eval->add_option("checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--manifest", manifest, "Dataset manifest (default: the training data)")
      ->check(CLI::ExistingFile);
  eval->add_option("--split", split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_option("--schema", eval_schema, "Schema of the dataset");

  auto* encode = app.add_subcommand("encode", "Print the ranking label and interval points");
  int age = 0, a_min = 0, a_max = 0;
  encode->add_option("age", age)->required();
  encode->add_option("a_min", a_min)->required();
  encode->add_option("a_max", a_max)->required();

  auto* loss = app.add_subcommand("loss", "Print the ranking loss and its derivative");
  double h = 0.0;
  loss->add_option("prediction", h, "Regression output h")->required();
  loss->add_option("age", age)->required();
  loss->add_option("a_min", a_min)->required();
  loss->add_option("a_max", a_max)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*gradcheck) return cmd_gradcheck(scope, o, seeds, networks, out);
    if (*synth) return cmd_synth(o, count, resolution, noise, schema, out);
    if (*train_cmd) return cmd_train(o, out, err);
    if (*eval) return cmd_eval(checkpoint, manifest, split, eval_schema, out, err);
    if (*encode) return cmd_encode(age, a_min, a_max, out);
    if (*loss) return cmd_loss(h, age, a_min, a_max, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace agenet
