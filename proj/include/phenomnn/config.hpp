#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "phenomnn/data.hpp"
#include "phenomnn/model.hpp"
#include "phenomnn/train.hpp"

namespace phenomnn {

class ConfigError : public Error {
public:
  using Error::Error;
};

/// Everything one `train` invocation needs. On disk it is a flat JSON object;
/// see config_keys() for the accepted keys.
struct RunConfig {
  std::string dataset;
  std::string out = "out";
  std::string description;
  ModelConfig model;
  TrainConfig train;
  bool resplit = false;  ///< draw fresh splits from the seed instead of splits.txt
  SplitFractions fractions;

  void validate() const {
    model.validate();
    train.validate();
  }
};

inline const std::set<std::string>& config_keys() {
  static const std::set<std::string> keys{
      "dataset", "out",          "description",    "variant",      "prop_step",     "hidden",
      "relu_mode", "alpha",      "lambda0",        "lambda1",      "mlp_layers",    "strict_alpha",
      "clique_pairs", "lr",      "dropout",        "epochs",       "weight_decay",  "optimizer",
      "beta1",   "beta2",        "eps",            "seed",         "early_stop_patience",
      "dropout_input", "dropout_embedding", "resplit", "train_fraction", "val_fraction", "test_fraction"};
  return keys;
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j = to_json(c.model);
  j["dataset"] = c.dataset;
  j["out"] = c.out;
  j["description"] = c.description;
  j["lr"] = c.train.lr;
  j["dropout"] = c.train.dropout;
  j["epochs"] = c.train.epochs;
  j["weight_decay"] = c.train.weight_decay;
  j["optimizer"] = to_string(c.train.optimizer);
  j["beta1"] = c.train.beta1;
  j["beta2"] = c.train.beta2;
  j["eps"] = c.train.eps;
  j["seed"] = c.train.seed;
  j["early_stop_patience"] = c.train.early_stop_patience;
  j["dropout_input"] = c.train.dropout_input;
  j["dropout_embedding"] = c.train.dropout_embedding;
  j["resplit"] = c.resplit;
  j["train_fraction"] = c.fractions.train;
  j["val_fraction"] = c.fractions.val;
  j["test_fraction"] = c.fractions.test;
  return j;
}

namespace detail {

template <class T>
T config_get(const nlohmann::json& j, const std::string& key) {
  const auto& v = j.at(key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError("config key '" + key + "' must be true or false");
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      throw ConfigError("config key '" + key + "' must be a nonnegative integer");
  } else {
    if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  }
  return v.get<T>();
}

}  // namespace detail

/// Overlays `j` on the defaults in `base`. Unknown keys are rejected.
inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!config_keys().contains(key)) throw ConfigError("unknown config key '" + key + "'");
  nlohmann::json merged = to_json(base);
  merged.update(j);
  RunConfig c;
  using detail::config_get;
  try {
    c.dataset = config_get<std::string>(merged, "dataset");
    c.out = config_get<std::string>(merged, "out");
    c.description = config_get<std::string>(merged, "description");
    c.model.variant = parse_variant(config_get<std::string>(merged, "variant"));
    c.model.layers = config_get<std::size_t>(merged, "prop_step");
    c.model.hidden = config_get<std::size_t>(merged, "hidden");
    c.model.relu_mode = parse_relu_mode(config_get<std::string>(merged, "relu_mode"));
    c.model.alpha = config_get<double>(merged, "alpha");
    c.model.lambda0 = config_get<double>(merged, "lambda0");
    c.model.lambda1 = config_get<double>(merged, "lambda1");
    c.model.mlp_layers = config_get<std::size_t>(merged, "mlp_layers");
    c.model.strict_alpha = config_get<bool>(merged, "strict_alpha");
    c.model.clique_pairs = parse_clique_pairs(config_get<std::string>(merged, "clique_pairs"));
    c.train.lr = config_get<double>(merged, "lr");
    c.train.dropout = config_get<double>(merged, "dropout");
    c.train.epochs = config_get<std::size_t>(merged, "epochs");
    c.train.weight_decay = config_get<double>(merged, "weight_decay");
    c.train.optimizer = parse_optimizer(config_get<std::string>(merged, "optimizer"));
    c.train.beta1 = config_get<double>(merged, "beta1");
    c.train.beta2 = config_get<double>(merged, "beta2");
    c.train.eps = config_get<double>(merged, "eps");
    c.train.seed = config_get<std::uint64_t>(merged, "seed");
    c.train.early_stop_patience = config_get<std::size_t>(merged, "early_stop_patience");
    c.train.dropout_input = config_get<bool>(merged, "dropout_input");
    c.train.dropout_embedding = config_get<bool>(merged, "dropout_embedding");
    c.resplit = config_get<bool>(merged, "resplit");
    c.fractions.train = config_get<double>(merged, "train_fraction");
    c.fractions.val = config_get<double>(merged, "val_fraction");
    c.fractions.test = config_get<double>(merged, "test_fraction");
  } catch (const ConfigError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
}

inline RunConfig load_run_config(const std::string& path, RunConfig base = {}) {
  return run_config_from_json(read_json_file(path), std::move(base));
}

/// Applies one `key=value` override. The value is parsed as JSON when it is
/// valid JSON and taken as a plain string otherwise, so `variant=general`
/// and `alpha=0.05` both work.
inline RunConfig apply_override(const RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }
  return run_config_from_json(nlohmann::json{{key, value}}, c);
}

}  // namespace phenomnn
