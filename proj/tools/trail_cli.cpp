// trail: dataset generation, pretraining, imitation, evaluation, bound checks and reports.
//
// Exit codes: 0 success, 1 runtime failure, 2 invalid configuration, 3 bound violation.

#include "config.hpp"
#include "svg.hpp"

#include "trail/baselines.hpp"
#include "trail/evaluation.hpp"
#include "trail/policy.hpp"
#include "trail/reparam.hpp"
#include "trail/theory.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace trail::cli {
namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitViolation = 3;

// Seed streams; each artifact draws from its own stream so stages can be rerun independently.
constexpr std::uint64_t kEnvStream = 0x656e76;
constexpr std::uint64_t kOfflineStream = 1;
constexpr std::uint64_t kExpertStream = 2;
constexpr std::uint64_t kRffStream = 0x726666;
constexpr std::uint64_t kEvalStream = 0x6576616c;

struct Overrides {
  std::string config_path;
  int embed_dim = 0;
  int rff_dim = 0;
  int negatives = 0;
  int steps = 0;
  double lr = 0.0;
  int batch = 0;
  std::uint64_t seed = 0;
  bool joint_phi = false;
  bool finetune_decoder = false;
  int episodes = 0;
  int eval_seeds = 0;
  std::string out;
  std::map<std::string, CLI::Option*> opts;

  bool given(const std::string& name) const {
    auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }
};

void add_common(CLI::App* sub, Overrides& o) {
  o.opts["config"] = sub->add_option("--config", o.config_path, "JSON experiment config");
  o.opts["embed-dim"] = sub->add_option("--embed-dim", o.embed_dim, "latent embedding dimension");
  o.opts["rff-dim"] = sub->add_option("--rff-dim", o.rff_dim, "random Fourier feature dimension (0 = none)");
  o.opts["negatives"] = sub->add_option("--negatives", o.negatives, "contrastive negatives (0 = in-batch)");
  o.opts["steps"] = sub->add_option("--steps", o.steps, "optimizer steps");
  o.opts["lr"] = sub->add_option("--lr", o.lr, "Adam learning rate");
  o.opts["batch"] = sub->add_option("--batch", o.batch, "minibatch size");
  o.opts["seed"] = sub->add_option("--seed", o.seed, "root seed");
  o.opts["joint-phi"] = sub->add_flag("--joint-phi", o.joint_phi, "co-train phi with the decoder");
  o.opts["finetune-decoder"] = sub->add_flag("--finetune-decoder", o.finetune_decoder, "fine-tune decoder on expert data");
  o.opts["episodes"] = sub->add_option("--episodes", o.episodes, "evaluation episodes per seed");
  o.opts["eval-seeds"] = sub->add_option("--eval-seeds", o.eval_seeds, "evaluation seeds");
  o.opts["out"] = sub->add_option("--out", o.out, "output directory");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig cfg = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  if (o.given("embed-dim")) cfg.model.embed_dim = o.embed_dim;
  if (o.given("rff-dim")) cfg.model.rff_dim = o.rff_dim;
  if (o.given("negatives")) cfg.model.negatives = o.negatives;
  if (o.given("steps")) cfg.model.steps = o.steps;
  if (o.given("lr")) cfg.model.lr = o.lr;
  if (o.given("batch")) cfg.model.batch = o.batch;
  if (o.given("seed")) cfg.seed = o.seed;
  if (o.given("joint-phi")) cfg.model.joint_phi = o.joint_phi;
  if (o.given("finetune-decoder")) cfg.model.finetune_decoder = o.finetune_decoder;
  if (o.given("episodes")) cfg.episodes = o.episodes;
  if (o.given("eval-seeds")) cfg.eval_seeds = o.eval_seeds;
  if (o.given("out")) cfg.out = o.out;
  cfg.validate();
  return cfg;
}

// ---- files ----

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing artifact " + path.string() + " (run the earlier stage first)");
  return json::parse(in);
}

void write_manifest(const ExperimentConfig& cfg, const std::string& command, const std::vector<std::string>& artifacts) {
  json doc{{"command", command},
           {"config", to_json(cfg)},
           {"config_hash", config_hash(cfg)},
           {"seed", cfg.seed},
           {"artifacts", artifacts}};
  write_text(fs::path(cfg.out) / ("manifest-" + command + ".json"), doc.dump(2) + "\n");
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  return rows;
}

Matrix matrix_from_json(const json& rows, Eigen::Index n_rows, Eigen::Index n_cols, const std::string& what) {
  if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != n_rows) throw ValidationError(what + ": wrong row count");
  Matrix m(n_rows, n_cols);
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    const auto row = rows[static_cast<std::size_t>(r)].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != n_cols) throw ValidationError(what + ": wrong column count");
    for (Eigen::Index c = 0; c < n_cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

// ---- environments ----

Gridworld make_grid(const ExperimentConfig& cfg) {
  const auto& e = cfg.environment;
  return build_redundant_gridworld(default_grid_spec(e.redundancy, e.slip_prob, e.gamma));
}

PointMassEnv make_env(const ExperimentConfig& cfg) {
  return make_point_mass(cfg.environment.action_dim, derive_seed(cfg.seed, kEnvStream), 0.1, cfg.environment.noise_std);
}

fs::path out_path(const ExperimentConfig& cfg, const std::string& name) { return fs::path(cfg.out) / name; }

std::optional<RffMap> make_rff(const ExperimentConfig& cfg) {
  if (cfg.model.rff_dim <= 0) return std::nullopt;
  return RffMap::sample(cfg.model.embed_dim, cfg.model.rff_dim, derive_seed(cfg.seed, kRffStream));
}

// ---- gen-data ----

int cmd_gen_data(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out);
  std::vector<std::string> artifacts{"offline.jsonl", "expert.jsonl"};
  if (cfg.tabular()) {
    const Gridworld world = make_grid(cfg);
    const DistVector d_off = DistVector::uniform(world.mdp.n_states());
    save_dataset(out_path(cfg, "offline.jsonl"),
                 generate_offline(world.mdp, d_off, cfg.m_offline, derive_seed(cfg.seed, kOfflineStream)));
    save_dataset(out_path(cfg, "expert.jsonl"),
                 generate_expert(world.mdp, optimal_expert(world), cfg.n_expert, derive_seed(cfg.seed, kExpertStream)));
    save_mdp(out_path(cfg, "mdp.json"), world.mdp);
    artifacts.push_back("mdp.json");
  } else {
    const PointMassEnv env = make_env(cfg);
    save_dataset(out_path(cfg, "offline.jsonl"),
                 generate_point_mass_offline(env, cfg.m_offline, derive_seed(cfg.seed, kOfflineStream)));
    save_dataset(out_path(cfg, "expert.jsonl"),
                 generate_point_mass_expert(env, cfg.n_expert, derive_seed(cfg.seed, kExpertStream),
                                            cfg.environment.max_steps, cfg.environment.expert_jitter));
  }
  write_manifest(cfg, "gen-data", artifacts);
  std::cout << "wrote " << cfg.m_offline << " offline and " << cfg.n_expert << " expert samples to " << cfg.out << "\n";
  return 0;
}

// ---- pretrain ----

OfflineDataset load_grid_offline(const ExperimentConfig& cfg, const Gridworld& world) {
  return load_offline(out_path(cfg, "offline.jsonl"), world.mdp.n_states(), world.mdp.n_actions());
}

ExpertDataset load_grid_expert(const ExperimentConfig& cfg, const Gridworld& world) {
  return load_expert(out_path(cfg, "expert.jsonl"), world.mdp.n_states(), world.mdp.n_actions());
}

json mlp_sidecar(const Mlp& net, const ExperimentConfig& cfg) {
  return {{"sizes", net.sizes()}, {"config_hash", config_hash(cfg)}, {"seed", cfg.seed}};
}

void save_net(const ExperimentConfig& cfg, const std::string& stem, const Mlp& net, json extra = json::object()) {
  save_checkpoint(out_path(cfg, stem + ".bin"), net);
  json side = mlp_sidecar(net, cfg);
  side.update(extra);
  write_text(out_path(cfg, stem + ".json"), side.dump(2) + "\n");
}

int cmd_pretrain(const ExperimentConfig& cfg) {
  if (cfg.method == "bc") {
    write_manifest(cfg, "pretrain", {});
    std::cout << "bc has no pretraining stage\n";
    return 0;
  }
  if (cfg.method == "trail-tabular") {
    const Gridworld world = make_grid(cfg);
    const OfflineDataset offline = load_grid_offline(cfg, world);
    Vector counts = Vector::Zero(offline.n_states);
    for (const auto& t : offline.triples) counts(t.s) += 1.0;
    const DistVector d_off(counts / counts.sum(), 1e-9);
    const Reparametrization rep = tabular_reparametrize(empirical_transitions(offline), offline.n_states,
                                                        offline.n_actions, d_off, cfg.model.n_latent, cfg.seed);
    std::optional<ExpertDataset> expert;
    if (cfg.model.finetune_decoder) expert = load_grid_expert(cfg, world);
    const TabularDecoder decoder = train_action_decoder(offline, rep.phi, expert ? &*expert : nullptr);
    json phi{{"n_latent", rep.phi.n_latent}, {"j_t", rep.j_t}, {"t_z", matrix_to_json(rep.t_z)}};
    json table = json::array();
    for (int s = 0; s < rep.phi.n_states(); ++s) {
      table.push_back(std::vector<int>(rep.phi.table.row(s).begin(), rep.phi.table.row(s).end()));
    }
    phi["table"] = table;
    write_text(out_path(cfg, "phi.json"), phi.dump() + "\n");
    write_text(out_path(cfg, "decoder.json"), json{{"probs", matrix_to_json(decoder.probs)}}.dump() + "\n");
    write_manifest(cfg, "pretrain", {"phi.json", "decoder.json"});
    std::cout << "tabular reparametrization: |Z| = " << rep.phi.n_latent << ", J_T = " << rep.j_t << "\n";
    return 0;
  }

  const ContinuousOfflineDataset offline = load_continuous_offline(out_path(cfg, "offline.jsonl"));
  EbmConfig ecfg;
  ecfg.embed_dim = cfg.model.embed_dim;
  ecfg.hidden = cfg.model.hidden;
  ecfg.steps = cfg.model.steps;
  ecfg.batch = cfg.model.batch;
  ecfg.negatives = cfg.model.negatives;
  ecfg.lr = cfg.model.lr;
  ecfg.seed = cfg.seed;
  ecfg.log_every = std::max(1, cfg.model.steps / 10);
  TrainLog log;
  const EnergyModel model = train_transition_ebm(encode(offline), ecfg, &log);
  json log_json = json::array();
  for (const auto& [step, loss] : log.entries) log_json.push_back({{"step", step}, {"loss", loss}});
  save_net(cfg, "ebm_phi", model.phi, {{"train_log", log_json}});
  save_net(cfg, "ebm_psi", model.psi);

  ActionEncoder encoder = action_encoder(model, make_rff(cfg));
  DecoderConfig dcfg;
  dcfg.hidden = cfg.model.hidden;
  dcfg.steps = cfg.model.steps;
  dcfg.batch = cfg.model.batch;
  dcfg.lr = cfg.model.lr;
  dcfg.seed = cfg.seed;
  dcfg.joint_phi = cfg.model.joint_phi;
  std::optional<ContinuousExpertDataset> expert;
  if (cfg.model.finetune_decoder) expert = load_continuous_expert(out_path(cfg, "expert.jsonl"));
  const GaussianDecoder decoder = train_action_decoder(offline, encoder, dcfg, expert ? &*expert : nullptr);
  save_net(cfg, "encoder", encoder.net, {{"rff_dim", cfg.model.rff_dim}});
  save_net(cfg, "decoder", decoder.net,
           {{"state_dim", decoder.state_dim}, {"latent_dim", decoder.latent_dim}, {"action_dim", decoder.action_dim}});
  write_manifest(cfg, "pretrain",
                 {"ebm_phi.bin", "ebm_phi.json", "ebm_psi.bin", "ebm_psi.json", "encoder.bin", "encoder.json",
                  "decoder.bin", "decoder.json"});
  std::cout << "trained transition EBM (" << cfg.model.steps << " steps), final loss "
            << (log.entries.empty() ? 0.0 : log.entries.back().second) << "\n";
  return 0;
}

// ---- imitate ----

struct TabularArtifacts {
  LatentMap phi;
  TabularDecoder decoder;
};

TabularArtifacts load_tabular(const ExperimentConfig& cfg, const Gridworld& world) {
  const int nS = world.mdp.n_states();
  const int nA = world.mdp.n_actions();
  const json phi_doc = read_json(out_path(cfg, "phi.json"));
  TabularArtifacts art;
  art.phi.n_latent = phi_doc.at("n_latent").get<int>();
  art.phi.table.resize(nS, nA);
  const auto& table = phi_doc.at("table");
  if (static_cast<int>(table.size()) != nS) throw ValidationError("phi.json: wrong number of states");
  for (int s = 0; s < nS; ++s) {
    const auto row = table[static_cast<std::size_t>(s)].get<std::vector<int>>();
    if (static_cast<int>(row.size()) != nA) throw ValidationError("phi.json: wrong number of actions");
    for (int a = 0; a < nA; ++a) art.phi.table(s, a) = row[static_cast<std::size_t>(a)];
  }
  art.decoder.n_states = nS;
  art.decoder.n_latent = art.phi.n_latent;
  art.decoder.n_actions = nA;
  art.decoder.probs = matrix_from_json(read_json(out_path(cfg, "decoder.json")).at("probs"),
                                       static_cast<Eigen::Index>(nS) * art.phi.n_latent, nA, "decoder.json");
  art.decoder.validate();
  return art;
}

Mlp load_net(const ExperimentConfig& cfg, const std::string& stem) { return load_checkpoint(out_path(cfg, stem + ".bin")); }

ActionEncoder load_encoder(const ExperimentConfig& cfg) { return ActionEncoder{load_net(cfg, "encoder"), make_rff(cfg)}; }

LatentConfig latent_config(const ExperimentConfig& cfg) {
  LatentConfig lc;
  lc.hidden = cfg.model.hidden;
  lc.steps = cfg.model.steps;
  lc.batch = cfg.model.batch;
  lc.lr = cfg.model.lr;
  lc.seed = cfg.seed;
  return lc;
}

int cmd_imitate(const ExperimentConfig& cfg) {
  if (cfg.tabular()) {
    const Gridworld world = make_grid(cfg);
    const ExpertDataset expert = load_grid_expert(cfg, world);
    Matrix probs;
    if (cfg.method == "bc") {
      probs = vanilla_bc(expert, cfg.model.prior_count).probs();
    } else {
      const TabularArtifacts art = load_tabular(cfg, world);
      probs = tabular_latent_bc(expert, art.phi, art.phi.n_latent, cfg.model.prior_count).probs;
    }
    write_text(out_path(cfg, "policy.json"), json{{"method", cfg.method}, {"probs", matrix_to_json(probs)}}.dump() + "\n");
    write_manifest(cfg, "imitate", {"policy.json"});
    std::cout << "fit " << cfg.method << " on " << expert.size() << " expert pairs\n";
    return 0;
  }

  const ContinuousExpertDataset expert = load_continuous_expert(out_path(cfg, "expert.jsonl"));
  if (cfg.method == "bc") {
    BcConfig bc;
    bc.hidden = cfg.model.hidden;
    bc.steps = cfg.model.steps;
    bc.batch = cfg.model.batch;
    bc.lr = cfg.model.lr;
    bc.seed = cfg.seed;
    save_net(cfg, "bc", vanilla_bc(expert, bc).net);
    write_manifest(cfg, "imitate", {"bc.bin", "bc.json"});
  } else {
    const ActionEncoder encoder = load_encoder(cfg);
    Matrix sa(expert.states.rows() + expert.actions.rows(), expert.size());
    sa << expert.states, expert.actions;
    const Matrix z = encoder.encode(sa);
    if (cfg.method == "trail-ebm") {
      save_net(cfg, "latent", train_gaussian_latent(expert.states, z, latent_config(cfg)).net);
    } else {
      save_net(cfg, "latent", train_deterministic_latent(expert.states, z, latent_config(cfg)).net);
    }
    write_manifest(cfg, "imitate", {"latent.bin", "latent.json"});
  }
  std::cout << "fit " << cfg.method << " on " << expert.size() << " expert pairs\n";
  return 0;
}

// ---- eval ----

int cmd_eval(const ExperimentConfig& cfg) {
  std::vector<double> success;
  std::vector<double> returns;
  auto record = [&](const RolloutStats& r) {
    success.push_back(r.success_rate);
    returns.push_back(r.mean_return);
  };

  if (cfg.tabular()) {
    const Gridworld world = make_grid(cfg);
    const json doc = read_json(out_path(cfg, "policy.json"));
    const int nS = world.mdp.n_states();
    const int nA = world.mdp.n_actions();
    TabularPolicy policy;
    if (cfg.method == "bc") {
      policy = TabularPolicy(matrix_from_json(doc.at("probs"), nS, nA, "policy.json"), 1e-9);
    } else {
      const TabularArtifacts art = load_tabular(cfg, world);
      const TabularLatent latent{matrix_from_json(doc.at("probs"), nS, art.phi.n_latent, "policy.json")};
      policy = compose_policy(latent, art.decoder);
    }
    for (int k = 0; k < cfg.eval_seeds; ++k) {
      record(rollout_tabular(world.mdp, policy, world.goal_state, cfg.episodes, cfg.horizon,
                             derive_seed(cfg.seed, kEvalStream, static_cast<std::uint64_t>(k))));
    }
  } else {
    const PointMassEnv env = make_env(cfg);
    ContinuousPolicyFn fn;
    if (cfg.method == "bc") {
      GaussianBcPolicy bc{2, env.action_dim, load_net(cfg, "bc")};
      fn = [bc](const Eigen::Vector2d& s, Rng& rng) { return bc.act(s, rng); };
    } else {
      GaussianDecoder decoder;
      decoder.net = load_net(cfg, "decoder");
      const json side = read_json(out_path(cfg, "decoder.json"));
      decoder.state_dim = side.at("state_dim").get<int>();
      decoder.latent_dim = side.at("latent_dim").get<int>();
      decoder.action_dim = side.at("action_dim").get<int>();
      LatentPolicy latent;
      if (cfg.method == "trail-ebm") {
        GaussianLatent g;
        g.net = load_net(cfg, "latent");
        g.latent_dim = g.net.output_dim() / 2;
        latent = std::move(g);
      } else {
        DeterministicLatent d;
        d.tabular = false;
        d.net = load_net(cfg, "latent");
        latent = std::move(d);
      }
      fn = [latent, decoder](const Eigen::Vector2d& s, Rng& rng) {
        return std::get<Vector>(infer_action(Observation(Vector(s)), latent, ActionDecoder(decoder), rng));
      };
    }
    for (int k = 0; k < cfg.eval_seeds; ++k) {
      record(rollout_point_mass(env, fn, cfg.episodes, cfg.environment.max_steps,
                                derive_seed(cfg.seed, kEvalStream, static_cast<std::uint64_t>(k))));
    }
  }

  const Summary s = summarize(success);
  const Summary r = summarize(returns);
  std::ostringstream csv;
  csv << "method,seed,success,return\n";
  for (std::size_t k = 0; k < success.size(); ++k) csv << cfg.method << "," << k << "," << success[k] << "," << returns[k] << "\n";
  write_text(out_path(cfg, "eval.csv"), csv.str());
  json doc{{"method", cfg.method},
           {"episodes", cfg.episodes},
           {"eval_seeds", cfg.eval_seeds},
           {"success", {{"mean", s.mean}, {"stderr", s.stderr_mean}, {"per_seed", success}}},
           {"return", {{"mean", r.mean}, {"stderr", r.stderr_mean}, {"per_seed", returns}}}};
  write_text(out_path(cfg, "eval.json"), doc.dump(2) + "\n");
  write_manifest(cfg, "eval", {"eval.csv", "eval.json"});
  std::cout << cfg.method << ": success " << s.mean << " +- " << s.stderr_mean << ", return " << r.mean << " +- "
            << r.stderr_mean << " (" << cfg.eval_seeds << " seeds x " << cfg.episodes << " episodes)\n";
  return 0;
}

// ---- verify-bound ----

int cmd_verify(const ExperimentConfig& cfg, int instances, const std::string& which) {
  if (instances <= 0) throw ConfigError("instances", "must be positive");
  if (which != "1" && which != "3" && which != "all") throw ConfigError("theorem", "must be 1, 3 or all");
  fs::create_directories(cfg.out);
  json doc = json::object();
  int violations = 0;
  std::ostringstream csv;
  csv << "kind,instance,lhs,rhs,holds\n";
  if (which != "3") {
    json rows = json::array();
    for (int i = 0; i < instances; ++i) {
      Rng rng(derive_seed(cfg.seed, 0x7431, static_cast<std::uint64_t>(i)));
      const Theorem1Instance inst = random_theorem1_instance(rng);
      const BoundReport rep =
          theorem1_report(inst.mdp, inst.pi_star, inst.d_off, inst.phi, inst.t_z, inst.decoder, inst.latent);
      json row = to_json(rep);
      row["instance"] = i;
      rows.push_back(row);
      violations += rep.holds ? 0 : 1;
      csv << "bound1," << i << "," << rep.lhs << "," << rep.rhs << "," << rep.holds << "\n";
    }
    doc["theorem1"] = rows;
  }
  if (which != "1") {
    json rows = json::array();
    for (int i = 0; i < instances; ++i) {
      Rng rng(derive_seed(cfg.seed, 0x7433, static_cast<std::uint64_t>(i)));
      const Theorem3Instance inst = random_theorem3_instance(rng);
      const Theorem3Report rep =
          theorem3_report(inst.linear.spec, inst.linear.mdp, inst.pi_star, inst.d_off, inst.theta, inst.decoder);
      json row = to_json(rep);
      row["instance"] = i;
      rows.push_back(row);
      violations += rep.holds ? 0 : 1;
      csv << "bound3," << i << "," << rep.lhs << "," << rep.rhs << "," << rep.holds << "\n";
    }
    doc["theorem3"] = rows;
  }
  doc["violations"] = violations;
  write_text(out_path(cfg, "verify.json"), doc.dump(2) + "\n");
  write_text(out_path(cfg, "verify.csv"), csv.str());
  write_manifest(cfg, "verify-bound", {"verify.json", "verify.csv"});
  std::cout << "checked " << instances << " instances per bound, " << violations << " violations\n";
  return violations == 0 ? 0 : kExitViolation;
}

// ---- sweep ----

int cmd_sweep(const ExperimentConfig& cfg, const std::vector<std::size_t>& n_grid, int resamples, double eps) {
  if (!cfg.tabular()) throw ConfigError("environment.kind", "sweep needs the gridworld");
  if (n_grid.empty()) throw ConfigError("n-grid", "must list at least one n");
  if (resamples <= 0) throw ConfigError("resamples", "must be positive");
  if (eps < 0.0 || eps > 1.0) throw ConfigError("eps", "must lie in [0, 1]");
  fs::create_directories(cfg.out);
  const Gridworld world = make_grid(cfg);
  const int nS = world.mdp.n_states();
  const int nA = world.mdp.n_actions();
  // Ground-truth factorization: latent z is the cardinal direction, realized by raw action z.
  Matrix t_z(static_cast<Eigen::Index>(nS) * 4, nS);
  for (int s = 0; s < nS; ++s) {
    for (int z = 0; z < 4; ++z) t_z.row(static_cast<Eigen::Index>(s) * 4 + z) = world.mdp.row(s, z);
  }
  const DistVector d_off = DistVector::uniform(nS);
  const TabularDecoder decoder = optimal_decoder(offline_joint(d_off.probs(), nA), world.phi_star).decoder;
  SweepConfig sc;
  sc.n_grid = n_grid;
  sc.resamples = resamples;
  sc.seed = cfg.seed;
  sc.prior_count = cfg.model.prior_count;
  const auto rows = theorem2_sweep(world.mdp, soft_expert(world, eps), d_off, world.phi_star, t_z, decoder, sc);

  std::ostringstream csv;
  csv.precision(17);
  csv << "n,mean_diff,stderr,bound\n";
  json jrows = json::array();
  bool ok = true;
  for (const auto& r : rows) {
    csv << r.n << "," << r.mean_diff << "," << r.stderr_diff << "," << r.bound << "\n";
    jrows.push_back({{"n", r.n}, {"mean_diff", r.mean_diff}, {"stderr", r.stderr_diff}, {"bound", r.bound}, {"holds", r.holds}});
    ok = ok && r.holds;
  }
  json doc{{"rows", jrows}, {"resamples", resamples}, {"expert_eps", eps}};
  if (rows.size() >= 2) doc["loglog_slope"] = loglog_slope(rows);
  write_text(out_path(cfg, "sweep.csv"), csv.str());
  write_text(out_path(cfg, "sweep.json"), doc.dump(2) + "\n");
  write_manifest(cfg, "sweep", {"sweep.csv", "sweep.json"});
  for (const auto& r : rows) std::cout << "n=" << r.n << " mean Diff " << r.mean_diff << " bound " << r.bound << "\n";
  if (doc.contains("loglog_slope")) std::cout << "log-log slope " << doc["loglog_slope"].get<double>() << "\n";
  return ok ? 0 : kExitViolation;
}

// ---- report ----

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  if (rows.empty()) throw ValidationError(path.string() + ": empty CSV");
  return rows;
}

int cmd_report(const ExperimentConfig& cfg, const std::vector<std::string>& inputs) {
  if (inputs.empty()) throw ConfigError("inputs", "give at least one CSV");
  fs::create_directories(cfg.out);
  std::map<std::string, std::vector<double>> success_by_method;
  std::vector<std::string> artifacts;
  for (const auto& input : inputs) {
    const auto rows = read_csv(input);
    const auto& header = rows.front();
    const std::string stem = fs::path(input).stem().string();
    if (header.size() >= 4 && header[0] == "n" && header[1] == "mean_diff") {
      Series diff{"mean Diff", {}, {}};
      Series bound{"bound", {}, {}};
      for (std::size_t i = 1; i < rows.size(); ++i) {
        const double n = std::stod(rows[i][0]);
        diff.x.push_back(n);
        diff.y.push_back(std::stod(rows[i][1]));
        bound.x.push_back(n);
        bound.y.push_back(std::stod(rows[i][3]));
      }
      ChartOptions opts{"Imitation error vs expert samples", "n", "Diff", true, true};
      write_text(out_path(cfg, stem + ".svg"), line_chart({diff, bound}, opts));
      artifacts.push_back(stem + ".svg");
    } else if (header.size() >= 3 && header[0] == "method" && header[2] == "success") {
      for (std::size_t i = 1; i < rows.size(); ++i) success_by_method[rows[i][0]].push_back(std::stod(rows[i][2]));
    } else if (header.size() >= 4 && header[0] == "kind" && header[2] == "lhs") {
      std::map<std::string, Series> by_kind;
      for (std::size_t i = 1; i < rows.size(); ++i) {
        auto& s = by_kind[rows[i][0]];
        s.name = rows[i][0] + " lhs/rhs";
        s.x.push_back(std::stod(rows[i][1]));
        const double rhs = std::stod(rows[i][3]);
        s.y.push_back(rhs > 0.0 ? std::stod(rows[i][2]) / rhs : 0.0);
      }
      std::vector<Series> series;
      for (auto& [kind, s] : by_kind) series.push_back(s);
      ChartOptions opts{"Bound tightness per instance", "instance", "lhs / rhs"};
      write_text(out_path(cfg, stem + ".svg"), line_chart(series, opts));
      artifacts.push_back(stem + ".svg");
    } else {
      throw ValidationError(input + ": unrecognized CSV header");
    }
  }
  if (!success_by_method.empty()) {
    std::vector<std::string> labels;
    std::vector<double> means;
    std::vector<double> errs;
    std::ostringstream csv;
    csv << "method,success_mean,success_stderr,seeds\n";
    for (const auto& [method, xs] : success_by_method) {
      const Summary s = summarize(xs);
      labels.push_back(method);
      means.push_back(s.mean);
      errs.push_back(s.stderr_mean);
      csv << method << "," << s.mean << "," << s.stderr_mean << "," << xs.size() << "\n";
    }
    ChartOptions opts{"Goal-reaching success", "method", "success rate"};
    write_text(out_path(cfg, "success.svg"), bar_chart(labels, means, errs, opts));
    write_text(out_path(cfg, "summary.csv"), csv.str());
    artifacts.push_back("success.svg");
    artifacts.push_back("summary.csv");
  }
  write_manifest(cfg, "report", artifacts);
  std::cout << "wrote " << artifacts.size() << " report artifacts to " << cfg.out << "\n";
  return 0;
}

}  // namespace
}  // namespace trail::cli

int main(int argc, char** argv) {
  using namespace trail::cli;
  CLI::App app{"Latent-action imitation learning from suboptimal offline data"};
  app.require_subcommand(1);

  Overrides gen_o, pre_o, imi_o, eval_o, ver_o, sweep_o, rep_o;
  auto* gen = app.add_subcommand("gen-data", "generate offline and expert datasets");
  add_common(gen, gen_o);
  auto* pre = app.add_subcommand("pretrain", "fit the transition model, latent actions and decoder");
  add_common(pre, pre_o);
  auto* imi = app.add_subcommand("imitate", "fit the latent (or raw-action) policy on expert data");
  add_common(imi, imi_o);
  auto* ev = app.add_subcommand("eval", "roll out the learned policy");
  add_common(ev, eval_o);

  auto* ver = app.add_subcommand("verify-bound", "check the imitation bounds on random tabular instances");
  add_common(ver, ver_o);
  int instances = 100;
  std::string theorem = "all";
  ver->add_option("--instances", instances, "instances per bound");
  ver->add_option("--theorem", theorem, "1, 3 or all");

  auto* sw = app.add_subcommand("sweep", "latent BC error against expert sample count");
  add_common(sw, sweep_o);
  std::vector<std::size_t> n_grid{100, 1000, 10000};
  int resamples = 200;
  double eps = 0.5;
  sw->add_option("--n-grid", n_grid, "comma-separated sample counts")->delimiter(',');
  sw->add_option("--resamples", resamples, "datasets per n");
  sw->add_option("--eps", eps, "expert softness: (1 - eps) greedy + eps uniform");

  auto* rep = app.add_subcommand("report", "aggregate CSV outputs into summaries and SVG charts");
  add_common(rep, rep_o);
  std::vector<std::string> inputs;
  rep->add_option("inputs", inputs, "CSV files from eval, sweep or verify-bound")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(resolve(gen_o));
    if (pre->parsed()) return cmd_pretrain(resolve(pre_o));
    if (imi->parsed()) return cmd_imitate(resolve(imi_o));
    if (ev->parsed()) return cmd_eval(resolve(eval_o));
    if (ver->parsed()) return cmd_verify(resolve(ver_o), instances, theorem);
    if (sw->parsed()) return cmd_sweep(resolve(sweep_o), n_grid, resamples, eps);
    if (rep->parsed()) return cmd_report(resolve(rep_o), inputs);
  } catch (const ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
