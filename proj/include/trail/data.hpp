#pragma once

#include "trail/envs.hpp"
#include "trail/mdp.hpp"
#include "trail/random.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace trail {

/// Raised when a dataset file contains no records.
class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

struct Transition {
  int s = 0;
  int a = 0;
  int sp = 0;
  friend bool operator==(const Transition&, const Transition&) = default;
};

struct StateAction {
  int s = 0;
  int a = 0;
  friend bool operator==(const StateAction&, const StateAction&) = default;
};

/// Suboptimal (s, a, s') triples with uniformly random actions.
struct OfflineDataset {
  int n_states = 0;
  int n_actions = 0;
  std::vector<Transition> triples;
  std::optional<DistVector> source_dist;

  std::size_t size() const { return triples.size(); }
};

/// Expert (s, a) pairs; `episode_starts` indexes the first pair of each rollout when known.
struct ExpertDataset {
  int n_states = 0;
  int n_actions = 0;
  std::vector<StateAction> pairs;
  std::vector<std::size_t> episode_starts;

  std::size_t size() const { return pairs.size(); }
};

/// Continuous-state counterpart; one sample per column.
struct ContinuousOfflineDataset {
  Matrix states;
  Matrix actions;
  Matrix next_states;

  Eigen::Index size() const { return states.cols(); }
};

struct ContinuousExpertDataset {
  Matrix states;
  Matrix actions;
  std::vector<std::size_t> episode_starts;

  Eigen::Index size() const { return states.cols(); }
};

/// i.i.d. s ~ d_off, a ~ Unif(A), s' ~ T(s, a).
OfflineDataset generate_offline(const TabularMdp& mdp, const DistVector& d_off, std::size_t m, std::uint64_t seed);

/// Expert rollouts from mu, terminated with probability (1 - gamma) after every step, until n pairs exist.
ExpertDataset generate_expert(const TabularMdp& mdp, const TabularPolicy& expert, std::size_t n, std::uint64_t seed);

/// Uniform states in the box and uniform raw actions in [-1, 1]^D.
ContinuousOfflineDataset generate_point_mass_offline(const PointMassEnv& env, std::size_t m, std::uint64_t seed);

/// Expert rollouts from uniform starts until the goal is reached or `max_steps` elapse.
ContinuousExpertDataset generate_point_mass_expert(const PointMassEnv& env, std::size_t n, std::uint64_t seed,
                                                   int max_steps = 50, double jitter = 0.0);

// JSONL persistence: one record per line, gzip when the path ends in ".gz".
void save_dataset(const std::string& path, const OfflineDataset& data);
void save_dataset(const std::string& path, const ExpertDataset& data);
void save_dataset(const std::string& path, const ContinuousOfflineDataset& data);
void save_dataset(const std::string& path, const ContinuousExpertDataset& data);

OfflineDataset load_offline(const std::string& path, int n_states, int n_actions);
ExpertDataset load_expert(const std::string& path, int n_states, int n_actions);
ContinuousOfflineDataset load_continuous_offline(const std::string& path);
ContinuousExpertDataset load_continuous_expert(const std::string& path);

/// Empirical state frequencies of an expert dataset.
Vector state_frequencies(const ExpertDataset& data);

/// Row-normalized empirical transition rows ((|S|*|A|) x |S|); unseen (s, a) rows are uniform.
Matrix empirical_transitions(const OfflineDataset& data);

}  // namespace trail
