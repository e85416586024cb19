#pragma once

#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace trail::cli {

/// Invalid configuration; `field` is the dotted path of the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct EnvironmentConfig {
  std::string kind = "gridworld";  // gridworld | point_mass
  int redundancy = 16;
  double slip_prob = 0.1;
  double gamma = 0.95;
  int action_dim = 8;
  double noise_std = 0.01;
  int max_steps = 50;
  double expert_jitter = 0.3;
};

struct ModelConfig {
  int embed_dim = 8;
  int rff_dim = 0;
  int negatives = 0;
  int steps = 1000;
  double lr = 3e-4;
  int batch = 64;
  std::vector<int> hidden{256, 256};
  int n_latent = 4;
  bool joint_phi = false;
  bool finetune_decoder = false;
  double prior_count = 0.0;
};

struct ExperimentConfig {
  EnvironmentConfig environment;
  std::size_t m_offline = 50000;
  std::size_t n_expert = 50;
  std::string method = "trail-tabular";  // trail-ebm | trail-linear | trail-tabular | bc
  ModelConfig model;
  std::uint64_t seed = 0;
  int episodes = 10;
  int eval_seeds = 4;
  int horizon = 20;
  std::string out = "runs/default";

  bool tabular() const { return environment.kind == "gridworld"; }
  void validate() const;
};

/// Reads keys present in `doc` over the defaults; unknown keys raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

/// FNV-1a over the compact dump of `to_json(cfg)`, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace trail::cli
