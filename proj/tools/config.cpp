#include "config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace trail::cli {

namespace {

using nlohmann::json;

void reject_unknown(const json& doc, const std::set<std::string>& allowed, const std::string& prefix) {
  if (!doc.is_object()) throw ConfigError(prefix.empty() ? "<root>" : prefix, "expected an object");
  for (const auto& [key, value] : doc.items()) {
    if (!allowed.count(key)) throw ConfigError(prefix.empty() ? key : prefix + "." + key, "unknown key");
  }
}

template <typename T>
void read(const json& doc, const char* key, T& target, const std::string& prefix) {
  if (!doc.contains(key)) return;
  const std::string field = prefix.empty() ? key : prefix + "." + key;
  try {
    target = doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(field, "wrong type");
  }
}

// nlohmann converts 2.5 to int silently; integers must be written as integers.
void read_int(const json& doc, const char* key, int& target, const std::string& prefix) {
  if (!doc.contains(key)) return;
  const std::string field = prefix.empty() ? key : prefix + "." + key;
  if (!doc.at(key).is_number_integer()) throw ConfigError(field, "expected an integer");
  target = doc.at(key).get<int>();
}

void read_count(const json& doc, const char* key, std::size_t& target) {
  if (!doc.contains(key)) return;
  if (!doc.at(key).is_number_unsigned()) throw ConfigError(key, "expected a nonnegative integer");
  target = doc.at(key).get<std::size_t>();
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

}  // namespace

void ExperimentConfig::validate() const {
  const auto& env = environment;
  require(env.kind == "gridworld" || env.kind == "point_mass", "environment.kind", "must be gridworld or point_mass");
  require(env.redundancy >= 1, "environment.redundancy", "must be at least 1");
  require(env.slip_prob >= 0.0 && env.slip_prob <= 1.0, "environment.slip_prob", "must lie in [0, 1]");
  require(env.gamma > 0.0 && env.gamma < 1.0, "environment.gamma", "must lie in (0, 1)");
  require(env.action_dim >= 2, "environment.action_dim", "must be at least 2");
  require(env.noise_std >= 0.0, "environment.noise_std", "must be nonnegative");
  require(env.max_steps >= 1, "environment.max_steps", "must be positive");
  require(env.expert_jitter >= 0.0, "environment.expert_jitter", "must be nonnegative");
  require(m_offline >= 1, "m_offline", "must be positive");
  require(n_expert >= 1, "n_expert", "must be positive");
  require(method == "trail-ebm" || method == "trail-linear" || method == "trail-tabular" || method == "bc", "method",
          "must be one of trail-ebm, trail-linear, trail-tabular, bc");
  if (method == "trail-tabular") require(tabular(), "method", "trail-tabular needs environment.kind = gridworld");
  if (method == "trail-ebm" || method == "trail-linear") {
    require(!tabular(), "method", method + " needs environment.kind = point_mass");
  }
  if (method == "trail-linear") require(model.rff_dim > 0, "model.rff_dim", "trail-linear needs a positive rff_dim");
  require(model.embed_dim >= 1, "model.embed_dim", "must be positive");
  require(model.rff_dim >= 0, "model.rff_dim", "must be nonnegative");
  require(model.negatives >= 0, "model.negatives", "must be nonnegative (0 = in-batch)");
  require(model.steps >= 1, "model.steps", "must be positive");
  require(model.lr > 0.0, "model.lr", "must be positive");
  require(model.batch >= 1, "model.batch", "must be positive");
  for (int h : model.hidden) require(h >= 1, "model.hidden", "widths must be positive");
  require(model.n_latent >= 1, "model.n_latent", "must be positive");
  if (tabular()) {
    require(model.n_latent <= 4 * env.redundancy, "model.n_latent", "must not exceed the number of actions");
  }
  require(model.prior_count >= 0.0, "model.prior_count", "must be nonnegative");
  require(episodes >= 1, "episodes", "must be positive");
  require(eval_seeds >= 1, "eval_seeds", "must be positive");
  require(horizon >= 1, "horizon", "must be positive");
  require(!out.empty(), "out", "must be a nonempty path");
}

ExperimentConfig config_from_json(const json& doc) {
  reject_unknown(doc, {"environment", "m_offline", "n_expert", "method", "model", "seed", "episodes", "eval_seeds",
                       "horizon", "out"},
                 "");
  ExperimentConfig cfg;
  if (doc.contains("environment")) {
    const json& env = doc.at("environment");
    const std::string p = "environment";
    reject_unknown(env, {"kind", "redundancy", "slip_prob", "gamma", "action_dim", "noise_std", "max_steps", "expert_jitter"},
                   p);
    read(env, "kind", cfg.environment.kind, p);
    read_int(env, "redundancy", cfg.environment.redundancy, p);
    read(env, "slip_prob", cfg.environment.slip_prob, p);
    read(env, "gamma", cfg.environment.gamma, p);
    read_int(env, "action_dim", cfg.environment.action_dim, p);
    read(env, "noise_std", cfg.environment.noise_std, p);
    read_int(env, "max_steps", cfg.environment.max_steps, p);
    read(env, "expert_jitter", cfg.environment.expert_jitter, p);
  }
  read_count(doc, "m_offline", cfg.m_offline);
  read_count(doc, "n_expert", cfg.n_expert);
  read(doc, "method", cfg.method, "");
  if (doc.contains("model")) {
    const json& m = doc.at("model");
    const std::string p = "model";
    reject_unknown(m, {"embed_dim", "rff_dim", "negatives", "steps", "lr", "batch", "hidden", "n_latent", "joint_phi",
                       "finetune_decoder", "prior_count"},
                   p);
    read_int(m, "embed_dim", cfg.model.embed_dim, p);
    read_int(m, "rff_dim", cfg.model.rff_dim, p);
    read_int(m, "negatives", cfg.model.negatives, p);
    read_int(m, "steps", cfg.model.steps, p);
    read(m, "lr", cfg.model.lr, p);
    read_int(m, "batch", cfg.model.batch, p);
    read(m, "hidden", cfg.model.hidden, p);
    read_int(m, "n_latent", cfg.model.n_latent, p);
    read(m, "joint_phi", cfg.model.joint_phi, p);
    read(m, "finetune_decoder", cfg.model.finetune_decoder, p);
    read(m, "prior_count", cfg.model.prior_count, p);
  }
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned()) throw ConfigError("seed", "expected a nonnegative integer");
    cfg.seed = doc.at("seed").get<std::uint64_t>();
  }
  read_int(doc, "episodes", cfg.episodes, "");
  read_int(doc, "eval_seeds", cfg.eval_seeds, "");
  read_int(doc, "horizon", cfg.horizon, "");
  read(doc, "out", cfg.out, "");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("malformed JSON: ") + e.what());
  }
  return config_from_json(doc);
}

json to_json(const ExperimentConfig& cfg) {
  const auto& e = cfg.environment;
  const auto& m = cfg.model;
  return {{"environment",
           {{"kind", e.kind}, {"redundancy", e.redundancy}, {"slip_prob", e.slip_prob}, {"gamma", e.gamma},
            {"action_dim", e.action_dim}, {"noise_std", e.noise_std}, {"max_steps", e.max_steps},
            {"expert_jitter", e.expert_jitter}}},
          {"m_offline", cfg.m_offline},
          {"n_expert", cfg.n_expert},
          {"method", cfg.method},
          {"model",
           {{"embed_dim", m.embed_dim}, {"rff_dim", m.rff_dim}, {"negatives", m.negatives}, {"steps", m.steps},
            {"lr", m.lr}, {"batch", m.batch}, {"hidden", m.hidden}, {"n_latent", m.n_latent},
            {"joint_phi", m.joint_phi}, {"finetune_decoder", m.finetune_decoder}, {"prior_count", m.prior_count}}},
          {"seed", cfg.seed},
          {"episodes", cfg.episodes},
          {"eval_seeds", cfg.eval_seeds},
          {"horizon", cfg.horizon},
          {"out", cfg.out}};
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_json(cfg).dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace trail::cli
