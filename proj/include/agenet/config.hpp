// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "agenet/trainer.hpp"

// JSON run configuration. Every object rejects keys it does not know; errors carry the
// dotted key path ("data.train_count").

namespace agenet {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& message)
      : std::runtime_error(path.empty() ? message : path + ": " + message), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Missing keys keep their TrainConfig defaults. Relative manifest paths resolve against
/// `base_dir`. With `check_paths`, a manifest that does not exist is an error.
TrainConfig train_config_from_json(const nlohmann::json& j,
                                   const std::filesystem::path& base_dir = {},
                                   bool check_paths = true);
nlohmann::json to_json(const TrainConfig& cfg);

TrainConfig load_train_config(const std::filesystem::path& file);

nlohmann::json to_json(const NetworkConfig& cfg);
nlohmann::json to_json(const AttributeSchema& schema);

}  // namespace agenet
