#include "trail/data.hpp"

#include <zlib.h>

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <memory>

namespace trail {

OfflineDataset generate_offline(const TabularMdp& mdp, const DistVector& d_off, std::size_t m, std::uint64_t seed) {
  if (m == 0) throw ValidationError("generate_offline: m must be at least 1");
  require_dims(d_off.size() == mdp.n_states(), "generate_offline: d_off must be over |S|");
  OfflineDataset data;
  data.n_states = mdp.n_states();
  data.n_actions = mdp.n_actions();
  data.source_dist = d_off;
  data.triples.reserve(m);
  Rng rng(derive_seed(seed, 0x6f6666));
  for (std::size_t i = 0; i < m; ++i) {
    const int s = rng.categorical(d_off.probs());
    const int a = rng.uniform_int(mdp.n_actions());
    const int sp = rng.categorical(mdp.row(s, a).transpose());
    data.triples.push_back({s, a, sp});
  }
  return data;
}

ExpertDataset generate_expert(const TabularMdp& mdp, const TabularPolicy& expert, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ValidationError("generate_expert: n must be at least 1");
  require_dims(expert.n_states() == mdp.n_states() && expert.n_actions() == mdp.n_actions(),
               "generate_expert: policy shape does not match MDP");
  ExpertDataset data;
  data.n_states = mdp.n_states();
  data.n_actions = mdp.n_actions();
  data.pairs.reserve(n);
  Rng rng(derive_seed(seed, 0x657870));
  bool fresh = true;
  int s = 0;
  while (data.pairs.size() < n) {
    if (fresh) {
      s = rng.categorical(mdp.initial());
      data.episode_starts.push_back(data.pairs.size());
      fresh = false;
    }
    const int a = rng.categorical(expert.probs().row(s).transpose());
    data.pairs.push_back({s, a});
    if (!rng.bernoulli(mdp.gamma())) {
      fresh = true;
      continue;
    }
    s = rng.categorical(mdp.row(s, a).transpose());
  }
  return data;
}

ContinuousOfflineDataset generate_point_mass_offline(const PointMassEnv& env, std::size_t m, std::uint64_t seed) {
  if (m == 0) throw ValidationError("generate_point_mass_offline: m must be at least 1");
  ContinuousOfflineDataset data;
  const auto cols = static_cast<Eigen::Index>(m);
  data.states.resize(2, cols);
  data.actions.resize(env.action_dim, cols);
  data.next_states.resize(2, cols);
  Rng rng(derive_seed(seed, 0x706d6f));
  for (Eigen::Index i = 0; i < cols; ++i) {
    Eigen::Vector2d s(rng.uniform(env.lo, env.hi), rng.uniform(env.lo, env.hi));
    Vector a(env.action_dim);
    for (int k = 0; k < env.action_dim; ++k) a(k) = rng.uniform(-1.0, 1.0);
    data.states.col(i) = s;
    data.actions.col(i) = a;
    data.next_states.col(i) = point_mass_step(s, a, env, rng);
  }
  return data;
}

ContinuousExpertDataset generate_point_mass_expert(const PointMassEnv& env, std::size_t n, std::uint64_t seed,
                                                   int max_steps, double jitter) {
  if (n == 0) throw ValidationError("generate_point_mass_expert: n must be at least 1");
  std::vector<Eigen::Vector2d> states;
  std::vector<Vector> actions;
  ContinuousExpertDataset data;
  Rng rng(derive_seed(seed, 0x706d65));
  while (states.size() < n) {
    data.episode_starts.push_back(states.size());
    Eigen::Vector2d s(rng.uniform(env.lo, env.hi), rng.uniform(env.lo, env.hi));
    for (int t = 0; t < max_steps && states.size() < n; ++t) {
      if ((s - env.goal).norm() <= env.goal_radius) break;
      Vector a = point_mass_expert_action(s, env, rng, jitter);
      states.push_back(s);
      actions.push_back(a);
      s = point_mass_step(s, a, env, rng);
    }
  }
  data.states.resize(2, static_cast<Eigen::Index>(n));
  data.actions.resize(env.action_dim, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    data.states.col(static_cast<Eigen::Index>(i)) = states[i];
    data.actions.col(static_cast<Eigen::Index>(i)) = actions[i];
  }
  return data;
}

namespace {

bool is_gzip(const std::string& path) { return path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0; }

class LineSink {
 public:
  explicit LineSink(const std::string& path) : path_(path) {
    if (is_gzip(path)) {
      gz_ = gzopen(path.c_str(), "wb");
      if (gz_ == nullptr) throw Error("cannot open " + path + " for writing");
    } else {
      plain_.open(path, std::ios::binary);
      if (!plain_) throw Error("cannot open " + path + " for writing");
    }
  }
  ~LineSink() {
    if (gz_ != nullptr) gzclose(gz_);
  }
  LineSink(const LineSink&) = delete;
  LineSink& operator=(const LineSink&) = delete;

  void write(const std::string& line) {
    if (gz_ != nullptr) {
      const std::string out = line + '\n';
      if (gzwrite(gz_, out.data(), static_cast<unsigned>(out.size())) != static_cast<int>(out.size())) {
        throw Error("write failed on " + path_);
      }
    } else {
      plain_ << line << '\n';
      if (!plain_) throw Error("write failed on " + path_);
    }
  }

 private:
  std::string path_;
  gzFile gz_ = nullptr;
  std::ofstream plain_;
};

std::vector<std::string> read_lines(const std::string& path) {
  std::string content;
  if (is_gzip(path)) {
    gzFile gz = gzopen(path.c_str(), "rb");
    if (gz == nullptr) throw Error("cannot open " + path);
    char buf[1 << 15];
    int got = 0;
    while ((got = gzread(gz, buf, sizeof buf)) > 0) content.append(buf, static_cast<std::size_t>(got));
    gzclose(gz);
    if (got < 0) throw Error("gzip read failed on " + path);
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    content.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string::npos) end = content.size();
    lines.push_back(content.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <typename Derived>
std::string format_array(const Eigen::MatrixBase<Derived>& v) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) out += ',';
    out += format_real(v(i));
  }
  return out + "]";
}

// Calls `fn(line_number, record)` on every non-blank line.
template <typename Fn>
void for_each_record(const std::string& path, Fn&& fn) {
  const auto lines = read_lines(path);
  std::size_t records = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::size_t line_no = i + 1;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
    }
    if (!rec.is_object()) throw ValidationError(path + ":" + std::to_string(line_no) + ": record is not an object");
    try {
      fn(line_no, rec);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    ++records;
  }
  if (records == 0) throw EmptyDatasetError(path + ": empty dataset");
}

int checked_index(const nlohmann::json& rec, const char* key, int bound, const std::string& where) {
  const auto& v = rec.at(key);
  if (!v.is_number_integer()) throw ValidationError(where + ": field '" + key + "' must be an integer");
  const auto x = v.get<long long>();
  if (x < 0 || x >= bound) {
    throw ValidationError(where + ": field '" + key + "' = " + std::to_string(x) + " out of range [0, " +
                          std::to_string(bound) + ")");
  }
  return static_cast<int>(x);
}

Vector read_vector(const nlohmann::json& rec, const char* key, Eigen::Index expected, const std::string& where) {
  const auto values = rec.at(key).get<std::vector<double>>();
  if (expected >= 0 && static_cast<Eigen::Index>(values.size()) != expected) {
    throw ValidationError(where + ": field '" + key + "' has length " + std::to_string(values.size()) + ", expected " +
                          std::to_string(expected));
  }
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Matrix stack_columns(const std::vector<Vector>& cols) {
  Matrix out(cols.front().size(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = cols[i];
  return out;
}

}  // namespace

void save_dataset(const std::string& path, const OfflineDataset& data) {
  LineSink sink(path);
  for (const auto& t : data.triples) {
    sink.write("{\"s\":" + std::to_string(t.s) + ",\"a\":" + std::to_string(t.a) + ",\"sp\":" + std::to_string(t.sp) + "}");
  }
}

void save_dataset(const std::string& path, const ExpertDataset& data) {
  LineSink sink(path);
  for (const auto& p : data.pairs) sink.write("{\"s\":" + std::to_string(p.s) + ",\"a\":" + std::to_string(p.a) + "}");
}

void save_dataset(const std::string& path, const ContinuousOfflineDataset& data) {
  LineSink sink(path);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    sink.write("{\"s\":" + format_array(data.states.col(i)) + ",\"a\":" + format_array(data.actions.col(i)) +
               ",\"sp\":" + format_array(data.next_states.col(i)) + "}");
  }
}

void save_dataset(const std::string& path, const ContinuousExpertDataset& data) {
  LineSink sink(path);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    sink.write("{\"s\":" + format_array(data.states.col(i)) + ",\"a\":" + format_array(data.actions.col(i)) + "}");
  }
}

OfflineDataset load_offline(const std::string& path, int n_states, int n_actions) {
  OfflineDataset data;
  data.n_states = n_states;
  data.n_actions = n_actions;
  for_each_record(path, [&](std::size_t line, const nlohmann::json& rec) {
    const std::string where = path + ":" + std::to_string(line);
    data.triples.push_back({checked_index(rec, "s", n_states, where), checked_index(rec, "a", n_actions, where),
                            checked_index(rec, "sp", n_states, where)});
  });
  return data;
}

ExpertDataset load_expert(const std::string& path, int n_states, int n_actions) {
  ExpertDataset data;
  data.n_states = n_states;
  data.n_actions = n_actions;
  for_each_record(path, [&](std::size_t line, const nlohmann::json& rec) {
    const std::string where = path + ":" + std::to_string(line);
    data.pairs.push_back({checked_index(rec, "s", n_states, where), checked_index(rec, "a", n_actions, where)});
  });
  return data;
}

ContinuousOfflineDataset load_continuous_offline(const std::string& path) {
  std::vector<Vector> s, a, sp;
  for_each_record(path, [&](std::size_t line, const nlohmann::json& rec) {
    const std::string where = path + ":" + std::to_string(line);
    s.push_back(read_vector(rec, "s", s.empty() ? -1 : s.front().size(), where));
    a.push_back(read_vector(rec, "a", a.empty() ? -1 : a.front().size(), where));
    sp.push_back(read_vector(rec, "sp", s.front().size(), where));
  });
  return {stack_columns(s), stack_columns(a), stack_columns(sp)};
}

ContinuousExpertDataset load_continuous_expert(const std::string& path) {
  std::vector<Vector> s, a;
  for_each_record(path, [&](std::size_t line, const nlohmann::json& rec) {
    const std::string where = path + ":" + std::to_string(line);
    s.push_back(read_vector(rec, "s", s.empty() ? -1 : s.front().size(), where));
    a.push_back(read_vector(rec, "a", a.empty() ? -1 : a.front().size(), where));
  });
  return {stack_columns(s), stack_columns(a), {}};
}

Vector state_frequencies(const ExpertDataset& data) {
  Vector freq = Vector::Zero(data.n_states);
  for (const auto& p : data.pairs) freq(p.s) += 1.0;
  return freq / static_cast<double>(data.pairs.size());
}

Matrix empirical_transitions(const OfflineDataset& data) {
  const int ns = data.n_states;
  const int na = data.n_actions;
  Matrix counts = Matrix::Zero(static_cast<Eigen::Index>(ns) * na, ns);
  for (const auto& t : data.triples) counts(static_cast<Eigen::Index>(t.s) * na + t.a, t.sp) += 1.0;
  for (Eigen::Index r = 0; r < counts.rows(); ++r) {
    const double total = counts.row(r).sum();
    if (total > 0.0) {
      counts.row(r) /= total;
    } else {
      counts.row(r).setConstant(1.0 / ns);
    }
  }
  return counts;
}

}  // namespace trail
