// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "agenet/data.hpp"
#include "agenet/model.hpp"

namespace agenet {

/// Where samples come from. A non-empty `manifest` selects files on disk, split 8:1:1
/// with `split_seed`; otherwise the synthetic generator fills each split with its own
/// index range (train first, then validation, then test).
struct DataConfig {
  std::filesystem::path manifest;
  std::uint64_t split_seed = 0;

  std::size_t resolution = 64;
  double noise_sigma = 0.0;
  std::uint64_t synthetic_seed = 0;
  std::size_t train_count = 64;
  std::size_t val_count = 16;
  std::size_t test_count = 16;
};

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double learning_rate = 0.0005;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::Ecr;
  bool attribute_guidance = true;
  HeadConfig head;
  NetworkConfig network = NetworkConfig::desk();
  AttributeSchema schema = AttributeSchema::morph();
  std::size_t crop_size = 56;
  DataConfig data;
  /// When set, the best checkpoint (best.agn) and the metrics log (metrics.jsonl) are
  /// written here as training proceeds.
  std::optional<std::filesystem::path> output_dir;

  /// Positive sizes and rates, crop within the image, consistent schema and network.
  void validate() const;
  ModelConfig model_config() const;
};

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
};

/// Materialises every split in memory. Manifest rows that fail validation are skipped;
/// `warnings` receives one line per skipped row.
Dataset load_dataset(const TrainConfig& cfg, std::vector<std::string>* warnings = nullptr);

/// Synthetic spec matching the config's schema and data section.
SyntheticSpec synthetic_spec(const TrainConfig& cfg);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  /// Mean per-sample training objective over the epoch.
  double train_loss = 0.0;
  /// MAE of the pre-update predictions on the (randomly cropped) training batches.
  double train_mae = 0.0;
  double val_mae = 0.0;
  bool retained = false;
};

/// One JSON object per line.
std::string metrics_line(const EpochMetrics& m);

struct Checkpoint {
  struct Record {
    std::string name;
    Tensor value;
  };
  std::vector<Record> records;
  TrainConfig config;
  double best_val_mae = 0.0;
  std::size_t epoch = 0;
};

/// Current parameter values of a model, in registration order.
Checkpoint make_checkpoint(const AgeNet& model, const TrainConfig& cfg, double best_val_mae,
                           std::size_t epoch);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rebuilds the network from the config snapshot and loads every parameter by name.
/// Rejects unknown, missing, and mis-shaped records.
std::unique_ptr<AgeNet> restore_model(const Checkpoint& ckpt);

struct TrainResult {
  std::vector<EpochMetrics> metrics;
  /// Snapshot of the epoch with the lowest validation MAE (earliest on ties).
  Checkpoint best;
  /// Model as it stands after the last epoch.
  std::unique_ptr<AgeNet> final_model;
};

/// Raised when the objective stops being finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t epoch, std::size_t batch, const std::string& what)
      : std::runtime_error(what), epoch_(epoch), batch_(batch) {}
  std::size_t epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

TrainResult train(const TrainConfig& cfg, const Dataset& data, const EpochCallback& on_epoch = {});
TrainResult train(const TrainConfig& cfg);

struct GroupMae {
  int lower_age = 0;
  std::size_t count = 0;
  double mae = 0.0;
};

struct EvalReport {
  std::size_t count = 0;
  double mae = 0.0;
  /// One entry per age group of the schema; groups with no samples report count 0, mae 0.
  std::vector<GroupMae> group_mae;
  double gender_accuracy = 0.0;
  double age_group_accuracy = 0.0;
  std::optional<double> ethnicity_accuracy;
};

/// Deterministic centre-cropped pass. Rejects an empty split and labels that do not fit
/// the model's schema.
EvalReport evaluate(const AgeNet& model, std::span<const Sample> samples, std::size_t crop_size,
                    std::size_t batch_size = 32);

/// Same as evaluate(), but first checks that `dataset_schema` matches the model's.
EvalReport evaluate(const AgeNet& model, const AttributeSchema& dataset_schema,
                    std::span<const Sample> samples, std::size_t crop_size,
                    std::size_t batch_size = 32);

bool same_schema(const AttributeSchema& a, const AttributeSchema& b);

}  // namespace agenet
