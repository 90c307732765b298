// SPDX-License-Identifier: Apache-2.0
#include "agenet/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace agenet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Walks one JSON object, consuming known keys and rejecting the rest on finish().
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string key_path(const std::string& key) const { return join(path_, key); }

  template <typename Fn>
  void read(const std::string& key, Fn&& fn) {
    if (has(key)) fn(j_.at(key), key_path(key));
  }

  void size(const std::string& key, std::size_t& out) {
    read(key, [&](const json& v, const std::string& p) {
      if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ConfigError(p, "expected a non-negative integer");
      }
      out = v.get<std::size_t>();
    });
  }

  void integer(const std::string& key, int& out) {
    read(key, [&](const json& v, const std::string& p) {
      if (!v.is_number_integer()) throw ConfigError(p, "expected an integer");
      out = v.get<int>();
    });
  }

  void u64(const std::string& key, std::uint64_t& out) {
    read(key, [&](const json& v, const std::string& p) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                     v.get<long long>() < 0)) {
        throw ConfigError(p, "expected a non-negative integer");
      }
      out = v.get<std::uint64_t>();
    });
  }

  void real(const std::string& key, double& out) {
    read(key, [&](const json& v, const std::string& p) {
      if (!v.is_number()) throw ConfigError(p, "expected a number");
      out = v.get<double>();
    });
  }

  void boolean(const std::string& key, bool& out) {
    read(key, [&](const json& v, const std::string& p) {
      if (!v.is_boolean()) throw ConfigError(p, "expected true or false");
      out = v.get<bool>();
    });
  }

  void string(const std::string& key, std::string& out) {
    read(key, [&](const json& v, const std::string& p) {
      if (!v.is_string()) throw ConfigError(p, "expected a string");
      out = v.get<std::string>();
    });
  }

  template <std::size_t N>
  void sizes(const std::string& key, std::array<std::size_t, N>& out) {
    read(key, [&](const json& v, const std::string& p) {
      if (!v.is_array() || v.size() != N) {
        throw ConfigError(p, "expected an array of " + std::to_string(N) + " integers");
      }
      for (std::size_t i = 0; i < N; ++i) {
        if (!v[i].is_number_integer() || v[i].get<long long>() < 0) {
          throw ConfigError(p + "[" + std::to_string(i) + "]", "expected a non-negative integer");
        }
        out[i] = v[i].get<std::size_t>();
      }
    });
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw ConfigError(join(path_, key), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

NetworkConfig network_from_json(const json& j, const std::string& path) {
  if (j.is_string()) {
    try {
      return NetworkConfig::preset(j.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(path, e.what());
    }
  }
  ObjectReader r(j, path);
  std::string preset = "desk";
  r.string("preset", preset);
  NetworkConfig cfg;
  try {
    cfg = NetworkConfig::preset(preset);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(r.key_path("preset"), e.what());
  }
  r.size("input_channels", cfg.input_channels);
  r.size("input_resolution", cfg.input_resolution);
  r.size("stem_kernel", cfg.stem_kernel);
  r.size("stem_channels", cfg.stem_channels);
  r.size("stem_stride", cfg.stem_stride);
  r.size("pool_kernel", cfg.pool_kernel);
  r.size("pool_stride", cfg.pool_stride);
  r.size("pool_padding", cfg.pool_padding);
  r.sizes("stage_blocks", cfg.stage_blocks);
  r.sizes("stage_channels", cfg.stage_channels);
  r.size("attention_threshold", cfg.attention_threshold);
  r.finish();
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
  return cfg;
}

AttributeSchema schema_from_json(const json& j, const std::string& path) {
  if (j.is_string()) {
    try {
      return AttributeSchema::named(j.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(path, e.what());
    }
  }
  ObjectReader r(j, path);
  AttributeSchema s;
  for (const char* required : {"name", "a_min", "a_max", "group_boundaries"}) {
    if (!r.has(required)) throw ConfigError(r.key_path(required), "missing required key");
  }
  r.string("name", s.name);
  r.integer("a_min", s.a_min);
  r.integer("a_max", s.a_max);
  r.size("gender_classes", s.gender_classes);
  r.size("ethnicity_classes", s.ethnicity_classes);
  r.read("group_boundaries", [&](const json& v, const std::string& p) {
    if (!v.is_array()) throw ConfigError(p, "expected an array of integers");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer()) {
        throw ConfigError(p + "[" + std::to_string(i) + "]", "expected an integer");
      }
      s.group_boundaries.push_back(v[i].get<int>());
    }
  });
  r.finish();
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
  return s;
}

}  // namespace

json to_json(const NetworkConfig& cfg) {
  return json{{"preset", cfg.name},
              {"input_channels", cfg.input_channels},
              {"input_resolution", cfg.input_resolution},
              {"stem_kernel", cfg.stem_kernel},
              {"stem_channels", cfg.stem_channels},
              {"stem_stride", cfg.stem_stride},
              {"pool_kernel", cfg.pool_kernel},
              {"pool_stride", cfg.pool_stride},
              {"pool_padding", cfg.pool_padding},
              {"stage_blocks", cfg.stage_blocks},
              {"stage_channels", cfg.stage_channels},
              {"attention_threshold", cfg.attention_threshold}};
}

json to_json(const AttributeSchema& s) {
  return json{{"name", s.name},
              {"a_min", s.a_min},
              {"a_max", s.a_max},
              {"gender_classes", s.gender_classes},
              {"ethnicity_classes", s.ethnicity_classes},
              {"group_boundaries", s.group_boundaries}};
}

json to_json(const TrainConfig& cfg) {
  json data{{"split_seed", cfg.data.split_seed},
            {"resolution", cfg.data.resolution},
            {"noise_sigma", cfg.data.noise_sigma},
            {"synthetic_seed", cfg.data.synthetic_seed},
            {"train_count", cfg.data.train_count},
            {"val_count", cfg.data.val_count},
            {"test_count", cfg.data.test_count}};
  if (!cfg.data.manifest.empty()) data["manifest"] = cfg.data.manifest.generic_string();
  json j{{"epochs", cfg.epochs},
         {"batch_size", cfg.batch_size},
         {"learning_rate", cfg.learning_rate},
         {"seed", cfg.seed},
         {"loss", to_string(cfg.loss)},
         {"attribute_guidance", cfg.attribute_guidance},
         {"head",
          {{"global_dim", cfg.head.global_dim},
           {"fuse_kernel", cfg.head.fuse_kernel},
           {"alpha", cfg.head.alpha},
           {"beta", cfg.head.beta},
           {"gamma", cfg.head.gamma}}},
         {"network", to_json(cfg.network)},
         {"schema", to_json(cfg.schema)},
         {"crop_size", cfg.crop_size},
         {"data", data}};
  if (cfg.output_dir) j["output_dir"] = cfg.output_dir->generic_string();
  return j;
}

TrainConfig train_config_from_json(const json& j, const fs::path& base_dir, bool check_paths) {
  ObjectReader r(j, "");
  TrainConfig cfg;
  r.size("epochs", cfg.epochs);
  r.size("batch_size", cfg.batch_size);
  r.real("learning_rate", cfg.learning_rate);
  r.u64("seed", cfg.seed);
  r.read("loss", [&](const json& v, const std::string& p) {
    if (!v.is_string()) throw ConfigError(p, "expected a string");
    try {
      cfg.loss = loss_kind_from_string(v.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(p, e.what());
    }
  });
  r.boolean("attribute_guidance", cfg.attribute_guidance);
  r.read("head", [&](const json& v, const std::string& p) {
    ObjectReader h(v, p);
    h.size("global_dim", cfg.head.global_dim);
    h.size("fuse_kernel", cfg.head.fuse_kernel);
    h.real("alpha", cfg.head.alpha);
    h.real("beta", cfg.head.beta);
    h.real("gamma", cfg.head.gamma);
    h.finish();
  });
  r.read("network", [&](const json& v, const std::string& p) { cfg.network = network_from_json(v, p); });
  r.read("schema", [&](const json& v, const std::string& p) { cfg.schema = schema_from_json(v, p); });
  r.size("crop_size", cfg.crop_size);
  r.read("data", [&](const json& v, const std::string& p) {
    ObjectReader d(v, p);
    std::string manifest;
    d.string("manifest", manifest);
    if (!manifest.empty()) {
      fs::path m(manifest);
      if (m.is_relative() && !base_dir.empty()) m = base_dir / m;
      if (check_paths && !fs::exists(m)) {
        throw ConfigError(d.key_path("manifest"), "file not found: " + m.string());
      }
      cfg.data.manifest = m;
    }
    d.u64("split_seed", cfg.data.split_seed);
    d.size("resolution", cfg.data.resolution);
    d.real("noise_sigma", cfg.data.noise_sigma);
    d.u64("synthetic_seed", cfg.data.synthetic_seed);
    d.size("train_count", cfg.data.train_count);
    d.size("val_count", cfg.data.val_count);
    d.size("test_count", cfg.data.test_count);
    d.finish();
  });
  r.read("output_dir", [&](const json& v, const std::string& p) {
    if (!v.is_string()) throw ConfigError(p, "expected a string");
    fs::path out(v.get<std::string>());
    if (out.is_relative() && !base_dir.empty()) out = base_dir / out;
    cfg.output_dir = out;
  });
  r.finish();
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("", e.what());
  }
  return cfg;
}

TrainConfig load_train_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("", "cannot open config " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "config " + file.string() + " is not valid JSON: " + e.what());
  }
  return train_config_from_json(j, file.parent_path());
}

}  // namespace agenet
