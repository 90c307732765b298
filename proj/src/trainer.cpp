// SPDX-License-Identifier: Apache-2.0
#include "agenet/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "agenet/adam.hpp"
#include "agenet/config.hpp"
#include "agenet/ops.hpp"

namespace agenet {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- configuration -----------------------------------------------------------

void TrainConfig::validate() const {
  if (epochs == 0) throw std::invalid_argument("epochs must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (!std::isfinite(learning_rate) || learning_rate < 0.0) {
    throw std::invalid_argument("learning_rate must be finite and non-negative");
  }
  if (crop_size == 0) throw std::invalid_argument("crop_size must be positive");
  if (head.fuse_kernel % 2 == 0) throw std::invalid_argument("head.fuse_kernel must be odd");
  for (double w : {head.alpha, head.beta, head.gamma}) {
    if (!std::isfinite(w) || w < 0.0) {
      throw std::invalid_argument("attribute loss weights must be finite and non-negative");
    }
  }
  network.validate();
  if (network.input_channels != 3) throw std::invalid_argument("network must take 3 channels");
  schema.validate();
  if (schema.a_min >= schema.a_max) throw std::invalid_argument("schema needs a_min < a_max");
  if (data.manifest.empty()) {
    if (crop_size > data.resolution) {
      throw std::invalid_argument("crop_size " + std::to_string(crop_size) +
                                  " exceeds data.resolution " + std::to_string(data.resolution));
    }
    if (data.train_count == 0 || data.val_count == 0) {
      throw std::invalid_argument("synthetic data needs train_count and val_count > 0");
    }
    if (!(data.noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be >= 0");
    if (schema.ethnicity_classes > 4) {
      throw std::invalid_argument("synthetic data renders at most 4 ethnicity classes");
    }
  }
}

ModelConfig TrainConfig::model_config() const {
  ModelConfig m;
  m.network = network;
  m.network.input_resolution = crop_size;
  m.schema = schema;
  m.head = head;
  m.loss = loss;
  return m;
}

SyntheticSpec synthetic_spec(const TrainConfig& cfg) {
  SyntheticSpec s;
  s.resolution = cfg.data.resolution;
  s.a_min = cfg.schema.a_min;
  s.a_max = cfg.schema.a_max;
  s.noise_sigma = cfg.data.noise_sigma;
  s.seed = cfg.data.synthetic_seed;
  s.count = cfg.data.train_count + cfg.data.val_count + cfg.data.test_count;
  s.ethnicity_classes = std::max<std::size_t>(1, cfg.schema.ethnicity_classes);
  return s;
}

Dataset load_dataset(const TrainConfig& cfg, std::vector<std::string>* warnings) {
  cfg.validate();
  Dataset d;
  if (cfg.data.manifest.empty()) {
    const SyntheticSpec spec = synthetic_spec(cfg);
    std::size_t index = 0;
    for (auto [split, count] : {std::pair{&d.train, cfg.data.train_count},
                                std::pair{&d.val, cfg.data.val_count},
                                std::pair{&d.test, cfg.data.test_count}}) {
      split->reserve(count);
      for (std::size_t i = 0; i < count; ++i) split->push_back(synth_generate(spec, index++));
    }
    return d;
  }
  ManifestLoadResult m = load_manifest(cfg.data.manifest, cfg.schema);
  if (warnings) {
    warnings->insert(warnings->end(), m.warnings.begin(), m.warnings.end());
    for (const auto& r : m.rejected) warnings->push_back("rejected " + r);
  }
  const SplitIndices s = split_811(m.entries.size(), cfg.data.split_seed);
  for (auto [split, idx] : {std::pair{&d.train, &s.train}, std::pair{&d.val, &s.val},
                            std::pair{&d.test, &s.test}}) {
    for (std::size_t i : *idx) split->push_back(load_sample(m.entries[i]));
  }
  return d;
}

std::string metrics_line(const EpochMetrics& m) {
  return json{{"epoch", m.epoch},
              {"train_loss", m.train_loss},
              {"train_mae", m.train_mae},
              {"val_mae", m.val_mae},
              {"retained", m.retained}}
      .dump();
}

// ---- checkpoints -------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[4] = {'A', 'G', 'N', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put_le(std::string& buf, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  const char* take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw std::runtime_error("checkpoint truncated while reading " + std::string(what) +
                               " at byte " + std::to_string(pos_));
    }
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  template <typename T>
  T le(const char* what) {
    const auto* p = reinterpret_cast<const unsigned char*>(take(sizeof(T), what));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
    return v;
  }

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Checkpoint make_checkpoint(const AgeNet& model, const TrainConfig& cfg, double best_val_mae,
                           std::size_t epoch) {
  Checkpoint c;
  for (const auto& p : model.parameters()) c.records.push_back({p->name, p->value});
  c.config = cfg;
  c.best_val_mae = best_val_mae;
  c.epoch = epoch;
  return c;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string buf(kCheckpointMagic, 4);
  put_le<std::uint32_t>(buf, kCheckpointVersion);
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(ckpt.records.size()));
  for (const auto& r : ckpt.records) {
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(r.name.size()));
    buf += r.name;
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(r.value.rank()));
    for (std::size_t d : r.value.shape()) put_le<std::uint64_t>(buf, d);
    for (double v : r.value.values()) put_le<std::uint64_t>(buf, std::bit_cast<std::uint64_t>(v));
  }
  const std::string meta = json{{"config", to_json(ckpt.config)},
                                {"best_val_mae", ckpt.best_val_mae},
                                {"epoch", ckpt.epoch}}
                               .dump();
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(meta.size()));
  buf += meta;
  return buf;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (std::memcmp(in.take(4, "magic"), kCheckpointMagic, 4) != 0) {
    throw std::runtime_error("not a checkpoint: bad magic");
  }
  const auto version = in.le<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  const auto count = in.le<std::uint32_t>("record count");
  for (std::uint32_t i = 0; i < count; ++i) {
    Checkpoint::Record r;
    const auto name_len = in.le<std::uint32_t>("name length");
    r.name.assign(in.take(name_len, "name"), name_len);
    const auto rank = in.le<std::uint32_t>("rank");
    if (rank > 8) throw std::runtime_error("checkpoint record " + r.name + ": implausible rank");
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(in.le<std::uint64_t>("dims"));
      if (d != 0 && numel > in.remaining() / d) {
        throw std::runtime_error("checkpoint truncated: record " + r.name + " larger than file");
      }
      numel *= d;
    }
    if (numel > in.remaining() / 8) {
      throw std::runtime_error("checkpoint truncated: record " + r.name + " larger than file");
    }
    Tensor t(shape);
    for (double& v : t.values()) v = std::bit_cast<double>(in.le<std::uint64_t>("values"));
    r.value = std::move(t);
    c.records.push_back(std::move(r));
  }
  const auto meta_len = in.le<std::uint32_t>("metadata length");
  const std::string meta(in.take(meta_len, "metadata"), meta_len);
  if (!in.done()) throw std::runtime_error("checkpoint has trailing bytes");
  json j;
  try {
    j = json::parse(meta);
    c.config = train_config_from_json(j.at("config"), {}, false);
    c.best_val_mae = j.at("best_val_mae").get<double>();
    c.epoch = j.at("epoch").get<std::size_t>();
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint metadata unreadable: ") + e.what());
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out.flush()) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

std::unique_ptr<AgeNet> restore_model(const Checkpoint& ckpt) {
  auto model = std::make_unique<AgeNet>(ckpt.config.model_config());
  std::set<std::string> loaded;
  for (const auto& r : ckpt.records) {
    Parameter* p = model->parameters().find(r.name);
    if (p == nullptr) throw std::runtime_error("checkpoint: unknown parameter '" + r.name + "'");
    if (!loaded.insert(r.name).second) {
      throw std::runtime_error("checkpoint: parameter '" + r.name + "' appears twice");
    }
    if (p->value.shape() != r.value.shape()) {
      throw std::runtime_error("checkpoint: parameter '" + r.name + "' has shape " +
                               shape_string(r.value.shape()) + ", model expects " +
                               shape_string(p->value.shape()));
    }
    p->value = r.value;
  }
  for (const auto& p : model->parameters()) {
    if (!loaded.contains(p->name)) {
      throw std::runtime_error("checkpoint: parameter '" + p->name + "' missing");
    }
  }
  return model;
}

// ---- evaluation --------------------------------------------------------------

bool same_schema(const AttributeSchema& a, const AttributeSchema& b) {
  return a.a_min == b.a_min && a.a_max == b.a_max && a.gender_classes == b.gender_classes &&
         a.ethnicity_classes == b.ethnicity_classes && a.group_boundaries == b.group_boundaries;
}

namespace {

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
  const std::size_t w = logits.dim(1);
  const double* p = logits.data() + row * w;
  return static_cast<std::size_t>(std::max_element(p, p + w) - p);
}

}  // namespace

EvalReport evaluate(const AgeNet& model, std::span<const Sample> samples, std::size_t crop_size,
                    std::size_t batch_size) {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty split");
  if (batch_size == 0) throw std::invalid_argument("evaluate: batch_size must be positive");
  const AttributeSchema& schema = model.config().schema;
  EvalReport rep;
  rep.count = samples.size();
  for (int lower : schema.group_boundaries) rep.group_mae.push_back({lower, 0, 0.0});
  std::size_t gender_hits = 0, group_hits = 0, ethnicity_hits = 0;
  double abs_sum = 0.0;

  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, samples.size() - start);
    std::vector<Tensor> crops;
    std::vector<AttributeLabels> labels;
    for (std::size_t i = 0; i < n; ++i) {
      const Sample& s = samples[start + i];
      labels.push_back(make_attribute_labels(s.age, s.gender, s.ethnicity, schema));
      crops.push_back(center_crop(s.image, crop_size));
    }
    Tape tape;
    const ModelOutput out = model.forward(tape, stack_images(crops));
    const auto pred =
        predict_ages(model.config().loss, out.head.age_output.value(), model.points());
    for (std::size_t i = 0; i < n; ++i) {
      const double err = std::abs(pred[i] - samples[start + i].age);
      abs_sum += err;
      GroupMae& g = rep.group_mae[static_cast<std::size_t>(labels[i].age_group)];
      g.count += 1;
      g.mae += err;
      gender_hits += argmax_row(out.head.branches.gender.value(), i) ==
                     static_cast<std::size_t>(labels[i].gender);
      group_hits += argmax_row(out.head.branches.age_group.value(), i) ==
                    static_cast<std::size_t>(labels[i].age_group);
      if (out.head.branches.ethnicity) {
        ethnicity_hits += argmax_row(out.head.branches.ethnicity->value(), i) ==
                          static_cast<std::size_t>(labels[i].ethnicity);
      }
    }
  }
  const double n = static_cast<double>(rep.count);
  rep.mae = abs_sum / n;
  for (auto& g : rep.group_mae) {
    if (g.count > 0) g.mae /= static_cast<double>(g.count);
  }
  rep.gender_accuracy = static_cast<double>(gender_hits) / n;
  rep.age_group_accuracy = static_cast<double>(group_hits) / n;
  if (schema.ethnicity_classes > 0) rep.ethnicity_accuracy = static_cast<double>(ethnicity_hits) / n;
  return rep;
}

EvalReport evaluate(const AgeNet& model, const AttributeSchema& dataset_schema,
                    std::span<const Sample> samples, std::size_t crop_size,
                    std::size_t batch_size) {
  if (!same_schema(model.config().schema, dataset_schema)) {
    throw std::invalid_argument("evaluate: dataset schema '" + dataset_schema.name +
                                "' does not match checkpoint schema '" +
                                model.config().schema.name + "'");
  }
  return evaluate(model, samples, crop_size, batch_size);
}

// ---- training ----------------------------------------------------------------

TrainResult train(const TrainConfig& cfg, const Dataset& data, const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.train.empty()) throw std::invalid_argument("train: empty training split");
  if (data.val.empty()) throw std::invalid_argument("train: empty validation split");

  TrainResult result;
  result.final_model = std::make_unique<AgeNet>(cfg.model_config());
  AgeNet& model = *result.final_model;
  model.initialize(cfg.seed);
  const AttributeSchema& schema = model.config().schema;
  const IntervalPoints& points = model.points();

  std::vector<AttributeLabels> labels;
  std::vector<int> ages;
  for (const Sample& s : data.train) {
    labels.push_back(make_attribute_labels(s.age, s.gender, s.ethnicity, schema));
    ages.push_back(s.age);
  }

  std::ofstream metrics_file;
  fs::path best_path;
  if (cfg.output_dir) {
    fs::create_directories(*cfg.output_dir);
    best_path = *cfg.output_dir / "best.agn";
    metrics_file.open(*cfg.output_dir / "metrics.jsonl", std::ios::trunc);
    if (!metrics_file) throw std::runtime_error("cannot write metrics log in " + cfg.output_dir->string());
  }

  Adam adam({.learning_rate = cfg.learning_rate});
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(data.train.size());
  double best = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[static_cast<std::size_t>(rng() % (i + 1))]);
    }
    double loss_sum = 0.0, abs_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      std::vector<Tensor> crops;
      std::vector<int> batch_ages;
      std::vector<AttributeLabels> batch_labels;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = order[start + i];
        crops.push_back(random_crop(data.train[idx].image, cfg.crop_size, rng));
        batch_ages.push_back(ages[idx]);
        batch_labels.push_back(labels[idx]);
      }
      model.parameters().zero_grad();
      Tape tape;
      const ModelOutput out = model.forward(tape, stack_images(crops));
      Var loss = age_loss(cfg.loss, out.head.age_output, batch_ages, points);
      if (cfg.attribute_guidance) {
        loss = total_loss(loss, attr_loss(out.head.branches, batch_labels, cfg.head.alpha,
                                          cfg.head.beta, cfg.head.gamma));
      }
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "training diverged: loss " << value << " at epoch " << epoch << ", batch "
            << batch_index;
        throw DivergenceError(epoch, batch_index, msg.str());
      }
      const auto pred = predict_ages(cfg.loss, out.head.age_output.value(), points);
      for (std::size_t i = 0; i < n; ++i) abs_sum += std::abs(pred[i] - batch_ages[i]);
      loss_sum += value;
      tape.backward(loss);
      adam.step(model.parameters());
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(order.size());
    m.train_mae = abs_sum / static_cast<double>(order.size());
    m.val_mae = evaluate(model, data.val, cfg.crop_size).mae;
    m.retained = m.val_mae < best;
    if (m.retained) {
      best = m.val_mae;
      result.best = make_checkpoint(model, cfg, best, epoch);
      if (cfg.output_dir) save_checkpoint(result.best, best_path);
    }
    if (metrics_file.is_open()) metrics_file << metrics_line(m) << '\n' << std::flush;
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return result;
}

TrainResult train(const TrainConfig& cfg) { return train(cfg, load_dataset(cfg)); }

}  // namespace agenet
