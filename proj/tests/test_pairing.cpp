#include <cmath>
#include <set>

#include "doctest.h"
#include "fsdpo/env.hpp"
#include "fsdpo/errors.hpp"
#include "fsdpo/harness.hpp"
#include "fsdpo/pairing.hpp"

using namespace fsdpo;
using env::Problem;
using env::Step;

namespace {

policy::PolicyConfig small_config(int modulus = 10, int depth = 3, int branch = 4) {
  policy::PolicyConfig cfg;
  cfg.generator.modulus = modulus;
  cfg.generator.depth = depth;
  cfg.branch = branch;
  return cfg;
}

// a trace for a hand-chosen chain; mean/logprob filled by the caller
pairing::StepRewardTrace hand_trace(const Problem& p, std::vector<int> values,
                                    std::vector<double> rewards, double logprob = 0.0) {
  pairing::StepRewardTrace t;
  t.solution = env::make_solution(p, values);
  t.mean_reward = 0.0;
  for (const double r : rewards) t.mean_reward += r;
  t.mean_reward /= static_cast<double>(rewards.size());
  t.rewards = std::move(rewards);
  t.logprob = logprob;
  return t;
}

// distinct chains with a chosen correctness flag: correct chains end on the
// gold answer through distinct intermediate values, incorrect ones end off
std::vector<int> chain_values(const Problem& p, int variant, bool correct) {
  std::vector<int> values = env::gold_trace(p);
  values[0] = (values[0] + variant) % p.modulus;  // make the chain unique
  if (!correct) values.back() = (values.back() + 1 + variant % 3) % p.modulus;
  return values;
}

}  // namespace

TEST_SUITE_BEGIN("pairing");

TEST_CASE("score_solution: zero prm gives flat 0.5 rewards") {
  const policy::PolicyConfig cfg = small_config();
  const prm::PrmParams model = prm::init_prm(cfg);
  const Problem p = env::generate_problem(3, cfg.generator);
  const auto trace = pairing::score_solution(model, p, env::gold_solution(p));
  CHECK(trace.rewards == std::vector<double>{0.5, 0.5, 0.5});
  CHECK(trace.mean_reward == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("score_solution: single-step mean equals the single reward") {
  const policy::PolicyConfig cfg = small_config(10, 1, 4);
  prm::PrmParams model = prm::init_prm(cfg);
  model.bias = 0.7;
  const Problem p = env::generate_problem(5, cfg.generator);
  const auto trace = pairing::score_solution(model, p, env::gold_solution(p));
  REQUIRE(trace.rewards.size() == 1);
  CHECK(trace.mean_reward == trace.rewards[0]);
}

TEST_CASE("score_solution: mean survives a serialization round-trip") {
  const policy::PolicyConfig cfg = small_config();
  const policy::PolicyParams pol = policy::init_params(cfg, 9);
  prm::PrmParams model = prm::init_prm(cfg);
  for (std::size_t i = 0; i < model.table.size(); ++i)
    model.table[i] = 0.1 * static_cast<double>(i % 7) - 0.3;
  const Problem p = env::generate_problem(8, cfg.generator);
  Rng rng(2);
  const env::Solution y = policy::sample_solution(pol, p, 0.8, rng);

  pairing::PreferencePair pair;
  pair.problem_id = p.id;
  pair.preferred = pairing::score_solution(model, p, y);
  pair.preferred.logprob = policy::solution_logprob(pol, p, y);
  pair.dispreferred = pair.preferred;
  const pairing::PreferencePair back =
      pairing::pair_from_json_line(pairing::to_json_line(pair));

  double recomputed = 0.0;
  for (const double r : back.preferred.rewards) recomputed += r;
  recomputed /= static_cast<double>(back.preferred.rewards.size());
  CHECK(back.preferred.mean_reward == doctest::Approx(recomputed).epsilon(1e-12));
  CHECK(pairing::to_json_line(back) == pairing::to_json_line(pair));
}

TEST_CASE("select_pairs: full sides give t^2 pairs ordered by rank") {
  policy::PolicyConfig cfg = small_config();
  cfg.generator.op_kinds = {env::OpKind::add};
  const Problem p = env::generate_problem(11, cfg.generator);
  prm::SamplingBudget budget;
  budget.m = 32;
  budget.t = 4;

  std::vector<pairing::StepRewardTrace> traces;
  for (int v = 0; v < 6; ++v)
    traces.push_back(hand_trace(p, chain_values(p, v, true),
                                {0.1 * v + 0.2, 0.1 * v + 0.25, 0.1 * v + 0.3}));
  for (int v = 0; v < 6; ++v)
    traces.push_back(hand_trace(p, chain_values(p, v, false),
                                {0.05 * v + 0.1, 0.05 * v + 0.15, 0.05 * v + 0.2}));
  Rng rng(1);
  const auto result =
      pairing::select_pairs(p, traces, budget, pairing::PairSelection::full_cross, rng);
  CHECK(result.pairs.size() == 16);
  CHECK(result.correct == 6);
  CHECK(result.incorrect == 6);
  CHECK_FALSE(result.skipped);

  // every selected preferred trace outranks every unselected correct trace
  double worst_selected = 2.0;
  for (int w = 0; w < 4; ++w)
    worst_selected = std::min(worst_selected, result.pairs[w * 4].preferred.mean_reward);
  CHECK(worst_selected >= traces[0].mean_reward);  // traces[0] = lowest correct
  // symmetric for dispreferred
  double worst_dispreferred = -1.0;
  for (int l = 0; l < 4; ++l)
    worst_dispreferred = std::max(worst_dispreferred, result.pairs[l].dispreferred.mean_reward);
  CHECK(worst_dispreferred <= traces[11].mean_reward);  // highest incorrect

  for (const auto& pair : result.pairs) {
    CHECK(env::check_answer(pair.preferred.solution, p));
    CHECK_FALSE(env::check_answer(pair.dispreferred.solution, p));
  }
}

TEST_CASE("select_pairs: clamped sides give |correct| * |incorrect| pairs") {
  policy::PolicyConfig cfg = small_config();
  cfg.generator.op_kinds = {env::OpKind::add};
  const Problem p = env::generate_problem(11, cfg.generator);
  prm::SamplingBudget budget;
  budget.m = 32;
  budget.t = 4;
  std::vector<pairing::StepRewardTrace> traces;
  for (int v = 0; v < 2; ++v)
    traces.push_back(hand_trace(p, chain_values(p, v, true), {0.8, 0.8, 0.8}));
  for (int v = 0; v < 3; ++v)
    traces.push_back(hand_trace(p, chain_values(p, v, false), {0.2, 0.2, 0.2}));
  Rng rng(1);
  const auto result =
      pairing::select_pairs(p, traces, budget, pairing::PairSelection::full_cross, rng);
  CHECK(result.pairs.size() == 6);  // 2 * 3
}

TEST_CASE("select_pairs: one-sided pools are skipped with a diagnostic") {
  policy::PolicyConfig cfg = small_config();
  cfg.generator.op_kinds = {env::OpKind::add};
  const Problem p = env::generate_problem(11, cfg.generator);
  prm::SamplingBudget budget;
  budget.m = 32;
  budget.t = 4;
  std::vector<pairing::StepRewardTrace> traces;
  for (int v = 0; v < 5; ++v)
    traces.push_back(hand_trace(p, chain_values(p, v, true), {0.9, 0.9, 0.9}));
  Rng rng(1);
  const auto result =
      pairing::select_pairs(p, traces, budget, pairing::PairSelection::full_cross, rng);
  CHECK(result.pairs.empty());
  CHECK(result.skipped);
  CHECK(result.diagnostic.find(p.id) != std::string::npos);
}

TEST_CASE("select_pairs: ties break by logprob then first-seen order") {
  policy::PolicyConfig cfg = small_config();
  cfg.generator.op_kinds = {env::OpKind::add};
  const Problem p = env::generate_problem(11, cfg.generator);
  prm::SamplingBudget budget;
  budget.m = 4;
  budget.t = 1;
  std::vector<pairing::StepRewardTrace> traces;
  traces.push_back(hand_trace(p, chain_values(p, 0, true), {0.5, 0.5, 0.5}, -2.0));
  traces.push_back(hand_trace(p, chain_values(p, 1, true), {0.5, 0.5, 0.5}, -1.0));
  traces.push_back(hand_trace(p, chain_values(p, 0, false), {0.5, 0.5, 0.5}, -3.0));
  traces.push_back(hand_trace(p, chain_values(p, 1, false), {0.5, 0.5, 0.5}, -3.0));
  Rng rng(1);
  const auto result =
      pairing::select_pairs(p, traces, budget, pairing::PairSelection::full_cross, rng);
  REQUIRE(result.pairs.size() == 1);
  // equal rewards: higher logprob wins on the preferred side
  CHECK(result.pairs[0].preferred.logprob == -1.0);
  // equal rewards and logprob: first-seen order wins on the dispreferred side
  CHECK(result.pairs[0].dispreferred.solution == traces[2].solution);
}

TEST_CASE("build_pairs: deterministic under a fixed seed and bounded by t^2") {
  const policy::PolicyConfig cfg = small_config(10, 4, 4);
  const auto problems = harness::generate_problem_set(cfg.generator, 17, "t", 6);
  harness::SftConfig sft;
  const policy::PolicyParams pol = harness::run_sft(cfg, problems, sft, 17);
  prm::SamplingBudget budget;
  const auto dataset = prm::build_prm_dataset(pol, problems, budget, 0.8, 17);
  const env::ProblemIndex index(problems);
  const prm::PrmParams model = prm::train_prm(cfg, dataset, index, 2, 0.5);

  pairing::PairBuildConfig pc;
  pc.budget = budget;
  for (const Problem& p : problems) {
    Rng rng_a(7), rng_b(7);
    const auto a = pairing::build_pairs(pol, model, p, pc, rng_a);
    const auto b = pairing::build_pairs(pol, model, p, pc, rng_b);
    CHECK(a.pairs.size() == b.pairs.size());
    CHECK(a.pairs.size() <= static_cast<std::size_t>(budget.t) * budget.t);
    for (std::size_t i = 0; i < a.pairs.size(); ++i)
      CHECK(pairing::to_json_line(a.pairs[i]) == pairing::to_json_line(b.pairs[i]));
    for (const auto& pair : a.pairs) {
      CHECK(env::check_answer(pair.preferred.solution, p));
      CHECK_FALSE(env::check_answer(pair.dispreferred.solution, p));
      CHECK(pair.preferred.rewards.size() == pair.preferred.solution.steps.size());
      for (const double r : pair.preferred.rewards) {
        CHECK(r > 0.0);
        CHECK(r < 1.0);
      }
    }
  }
}

TEST_CASE("build_pairs: an all-correct sample pool yields zero pairs and a diagnostic") {
  const policy::PolicyConfig cfg = small_config();
  policy::PolicyConfig certain = cfg;
  certain.init_noise = 0.0;
  policy::PolicyParams pol = policy::init_params(certain, 1);
  const policy::FeatureMap map(certain);
  for (int s = 0; s < map.state_count(); ++s) pol.theta[map.theta_index(s, 0)] = 60.0;

  const Problem p = env::generate_problem(23, cfg.generator);
  const prm::PrmParams model = prm::init_prm(cfg);
  pairing::PairBuildConfig pc;
  pc.budget.m = 32;
  pc.budget.t = 4;
  Rng rng(5);
  const auto result = pairing::build_pairs(pol, model, p, pc, rng);
  CHECK(result.pairs.empty());
  CHECK(result.skipped);
  CHECK(result.unique_solutions == 1);  // dedup collapsed all 32 samples
}

TEST_CASE("build_pairs: random_subset keeps the same pair set, reordered") {
  const policy::PolicyConfig cfg = small_config(10, 4, 4);
  const auto problems = harness::generate_problem_set(cfg.generator, 29, "t", 1);
  harness::SftConfig sft;
  const policy::PolicyParams pol = harness::run_sft(cfg, problems, sft, 29);
  const prm::PrmParams model = prm::init_prm(cfg);

  pairing::PairBuildConfig pc;
  pc.budget.m = 32;
  pc.budget.t = 2;
  Rng rng_full(3), rng_rand(3);
  const auto full = pairing::build_pairs(pol, model, problems[0], pc, rng_full);
  pc.selection = pairing::PairSelection::random_subset;
  const auto rand = pairing::build_pairs(pol, model, problems[0], pc, rng_rand);
  CHECK(full.pairs.size() == rand.pairs.size());

  std::multiset<std::string> full_set, rand_set;
  for (const auto& pair : full.pairs) full_set.insert(pairing::to_json_line(pair));
  for (const auto& pair : rand.pairs) rand_set.insert(pairing::to_json_line(pair));
  CHECK(full_set == rand_set);
}

TEST_SUITE_END();
