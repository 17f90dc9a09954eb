#include <cmath>
#include <set>

#include "doctest.h"
#include "fsdpo/env.hpp"
#include "fsdpo/errors.hpp"
#include "fsdpo/numerics.hpp"
#include "fsdpo/policy.hpp"
#include "oracles.hpp"

using namespace fsdpo;
using env::OpKind;
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

Problem problem_for(const policy::PolicyConfig& cfg, std::uint64_t seed) {
  return env::generate_problem(seed, cfg.generator);
}

}  // namespace

TEST_SUITE_BEGIN("policy");

TEST_CASE("feature map is injective over the reachable space") {
  const policy::PolicyConfig cfg = small_config(6, 3, 3);
  const policy::FeatureMap map(cfg);
  std::set<int> ids;
  for (int i = 0; i < cfg.generator.depth; ++i)
    for (int prev = 0; prev < cfg.generator.modulus; ++prev)
      for (const OpKind kind : cfg.generator.op_kinds) {
        const int id = map.state_id(i, prev, kind);
        CHECK(id >= 0);
        CHECK(id < map.state_count());
        CHECK(ids.insert(id).second);  // no collisions
      }
  CHECK(static_cast<int>(ids.size()) == map.state_count());
  CHECK_THROWS_AS(map.state_id(3, 0, OpKind::add), std::domain_error);
  CHECK_THROWS_AS(map.state_id(0, 6, OpKind::add), std::domain_error);
}

TEST_CASE("config validation") {
  policy::PolicyConfig cfg = small_config();
  cfg.branch = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.branch = 11;  // > modulus: candidates would collide
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("uniform logits give log(1/B) for every candidate") {
  policy::PolicyConfig cfg = small_config();
  cfg.init_noise = 0.0;  // all-zero logits
  const policy::PolicyParams params = policy::init_params(cfg, 1);
  const Problem p = problem_for(cfg, 5);
  for (const int value : policy::candidate_values(params, p, {})) {
    const double lp = policy::step_logprob(params, p, {}, Step{0, value});
    CHECK(lp == doctest::Approx(std::log(0.25)).epsilon(1e-12));
  }
}

TEST_CASE("a dominating logit saturates toward logprob 0") {
  policy::PolicyConfig cfg = small_config();
  cfg.init_noise = 0.0;
  policy::PolicyParams params = policy::init_params(cfg, 1);
  const Problem p = problem_for(cfg, 5);
  const auto view = policy::state_at(params, p, {});
  const policy::FeatureMap map(cfg);
  params.theta[map.theta_index(view.state, 2)] = 50.0;
  const Step s{0, (view.true_next + 2) % p.modulus};
  CHECK(policy::step_logprob(params, p, {}, s) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(policy::step_logprob(params, p, {}, s) <= 0.0);
}

TEST_CASE("step_logprob matches a direct softmax normalizer on random logits") {
  const policy::PolicyConfig cfg = small_config();
  const Problem p = problem_for(cfg, 11);
  Rng rng(42);
  for (int it = 0; it < 50; ++it) {
    const policy::PolicyParams params = policy::init_params(cfg, rng.next_u64());
    const auto view = policy::state_at(params, p, {});
    std::vector<double> logits;
    for (int j = 0; j < cfg.branch; ++j)
      logits.push_back(params.theta[policy::FeatureMap(cfg).theta_index(view.state, j)]);
    const int pick = rng.uniform_int(0, cfg.branch);
    const Step s{0, (view.true_next + pick) % p.modulus};
    CHECK(policy::step_logprob(params, p, {}, s) ==
          doctest::Approx(oracles::direct_log_softmax(logits, pick)).epsilon(1e-12));
  }
}

TEST_CASE("non-candidate steps are a domain error") {
  const policy::PolicyConfig cfg = small_config();  // B=4, V=10
  const policy::PolicyParams params = policy::init_params(cfg, 3);
  const Problem p = problem_for(cfg, 5);
  const auto view = policy::state_at(params, p, {});
  const Step outside{0, (view.true_next + cfg.branch) % p.modulus};
  CHECK_THROWS_AS(policy::step_logprob(params, p, {}, outside), std::domain_error);
  CHECK_THROWS_AS(policy::grad_step_logprob(params, p, {}, outside), std::domain_error);
  const Step wrong_index{1, view.true_next};
  CHECK_THROWS_AS(policy::step_logprob(params, p, {}, wrong_index), std::domain_error);
}

TEST_CASE("per-state probabilities normalize to 1 within 1e-9") {
  const policy::PolicyConfig cfg = small_config(8, 4, 5);
  Rng rng(7);
  for (int it = 0; it < 100; ++it) {
    const policy::PolicyParams params = policy::init_params(cfg, rng.next_u64());
    const Problem p = problem_for(cfg, rng.next_u64());
    // random prefix depth
    const int depth = rng.uniform_int(0, p.depth());
    std::vector<Step> prefix;
    for (int i = 0; i < depth; ++i)
      prefix.push_back(Step{i, rng.uniform_int(0, p.modulus)});
    const auto lp = policy::step_logprobs(params, p, prefix);
    double sum = 0.0;
    for (const double v : lp) sum += std::exp(v);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("solution_logprob is additive over prefix and suffix") {
  const policy::PolicyConfig cfg = small_config();
  const policy::PolicyParams params = policy::init_params(cfg, 9);
  const Problem p = problem_for(cfg, 13);
  Rng rng(1);
  const env::Solution y = policy::sample_solution(params, p, 1.0, rng);

  double stepwise = 0.0;
  for (std::size_t i = 0; i < y.steps.size(); ++i)
    stepwise += policy::step_logprob(params, p, std::span(y.steps.data(), i), y.steps[i]);
  CHECK(policy::solution_logprob(params, p, y) == doctest::Approx(stepwise).epsilon(1e-12));

  // single-step problems reduce to one step term
  policy::PolicyConfig cfg1 = small_config(10, 1, 4);
  const policy::PolicyParams params1 = policy::init_params(cfg1, 2);
  const Problem p1 = problem_for(cfg1, 17);
  Rng rng1(2);
  const env::Solution y1 = policy::sample_solution(params1, p1, 1.0, rng1);
  CHECK(policy::solution_logprob(params1, p1, y1) ==
        doctest::Approx(policy::step_logprob(params1, p1, {}, y1.steps[0])).epsilon(1e-12));
}

TEST_CASE("solution_logprob matches enumeration over the policy tree") {
  const policy::PolicyConfig cfg = small_config(10, 3, 3);
  const policy::PolicyParams params = policy::init_params(cfg, 21);
  const Problem p = problem_for(cfg, 23);
  const auto paths = oracles::enumerate_paths(policy::step_distribution(params), p);
  double total = 0.0;
  for (const auto& path : paths) {
    total += path.prob;
    const env::Solution y = env::make_solution(p, path.values);
    CHECK(policy::solution_logprob(params, p, y) ==
          doctest::Approx(std::log(path.prob)).epsilon(1e-10));
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("grad_step_logprob passes central differences on 100 random draws") {
  const policy::PolicyConfig cfg = small_config();
  Rng rng(31);
  int checked = 0;
  while (checked < 100) {
    const policy::PolicyParams params = policy::init_params(cfg, rng.next_u64());
    const Problem p = problem_for(cfg, rng.next_u64());
    const auto view = policy::state_at(params, p, {});
    const int pick = rng.uniform_int(0, cfg.branch);
    const Step s{0, (view.true_next + pick) % p.modulus};
    const policy::SparseVec grad = policy::grad_step_logprob(params, p, {}, s);
    // one random coordinate from the state block
    const auto& [coord, analytic] =
        grad.entries[rng.uniform_below(grad.entries.size())];
    const double numeric = oracles::central_difference(
        [&p, &s](const policy::PolicyParams& q) { return policy::step_logprob(q, p, {}, s); },
        params, coord);
    CHECK(analytic == doctest::Approx(numeric).epsilon(1e-6));
    ++checked;
  }
}

TEST_CASE("gradient entries over one state sum to zero") {
  const policy::PolicyConfig cfg = small_config();
  const policy::PolicyParams params = policy::init_params(cfg, 5);
  const Problem p = problem_for(cfg, 29);
  const auto view = policy::state_at(params, p, {});
  const policy::SparseVec grad =
      policy::grad_step_logprob(params, p, {}, Step{0, view.true_next});
  double sum = 0.0;
  for (const auto& [_, v] : grad.entries) sum += v;
  CHECK(sum == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("uniform two-candidate gradient is +-0.5") {
  policy::PolicyConfig cfg = small_config(10, 1, 2);
  cfg.init_noise = 0.0;
  const policy::PolicyParams params = policy::init_params(cfg, 1);
  const Problem p = problem_for(cfg, 3);
  const auto view = policy::state_at(params, p, {});
  const policy::SparseVec grad =
      policy::grad_step_logprob(params, p, {}, Step{0, view.true_next});
  REQUIRE(grad.entries.size() == 2);
  CHECK(grad.entries[0].second == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(grad.entries[1].second == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("sampling: fixed seed reproduces, tiny temperature matches greedy") {
  const policy::PolicyConfig cfg = small_config();
  const policy::PolicyParams params = policy::init_params(cfg, 77);
  const Problem p = problem_for(cfg, 41);

  Rng a(123), b(123);
  CHECK(policy::sample_solution(params, p, 0.8, a) ==
        policy::sample_solution(params, p, 0.8, b));

  const env::Solution greedy = policy::greedy_decode(params, p);
  Rng c(9);
  CHECK(policy::sample_solution(params, p, 1e-9, c) == greedy);
}

TEST_CASE("sampled frequencies match softmax(logits / 0.8) within 3 sigma") {
  const policy::PolicyConfig cfg = small_config();
  const policy::PolicyParams params = policy::init_params(cfg, 55);
  const Problem p = problem_for(cfg, 43);
  const double temperature = 0.8;
  const int draws = 100000;

  const auto view = policy::state_at(params, p, {});
  const policy::FeatureMap map(cfg);
  std::vector<double> logits;
  for (int j = 0; j < cfg.branch; ++j)
    logits.push_back(params.theta[map.theta_index(view.state, j)]);
  const std::vector<double> expected = softmax_scaled(logits, 1.0 / temperature);

  std::vector<int> counts(cfg.branch, 0);
  Rng rng(7);
  for (int d = 0; d < draws; ++d) {
    const env::Solution y = policy::sample_solution(params, p, temperature, rng);
    int off = y.steps[0].claimed_value - view.true_next;
    if (off < 0) off += p.modulus;
    ++counts[off];
  }
  for (int j = 0; j < cfg.branch; ++j) {
    const double mean = expected[j] * draws;
    const double sigma = std::sqrt(draws * expected[j] * (1.0 - expected[j]));
    CHECK(std::abs(counts[j] - mean) <= 3.0 * sigma);
  }
}

TEST_CASE("greedy ties resolve to the lowest candidate index") {
  policy::PolicyConfig cfg = small_config();
  cfg.init_noise = 0.0;  // every state fully tied
  const policy::PolicyParams params = policy::init_params(cfg, 1);
  const Problem p = problem_for(cfg, 47);
  const env::Solution y = policy::greedy_decode(params, p);
  CHECK(y.steps == env::gold_solution(p).steps);  // candidate 0 is the true value
}

TEST_CASE("apply_gradient edge cases") {
  const policy::PolicyConfig cfg = small_config();
  policy::PolicyParams params = policy::init_params(cfg, 15);
  const std::vector<double> before = params.theta;

  policy::SparseVec zero;
  policy::apply_gradient(params, zero, 0.5);
  CHECK(params.theta == before);

  policy::SparseVec g;
  g.add(0, 1.25);
  policy::apply_gradient(params, g, 0.0);  // lr = 0
  CHECK(params.theta == before);

  policy::SparseVec bad;
  bad.add(0, std::nan(""));
  CHECK_THROWS_AS(policy::apply_gradient(params, bad, 0.1), TrainingError);

  policy::apply_gradient(params, g, 0.1);
  CHECK(params.theta[0] == doctest::Approx(before[0] - 0.125).epsilon(1e-12));
}

TEST_CASE("reference policy stays bit-identical while the trainee moves") {
  const policy::PolicyConfig cfg = small_config();
  policy::PolicyParams params = policy::init_params(cfg, 16);
  const policy::ReferencePolicy ref = params;  // frozen deep copy
  const std::string ref_bytes = policy::to_json(ref);

  policy::SparseVec g;
  g.add(3, 0.7);
  g.add(11, -0.2);
  for (int i = 0; i < 10; ++i) policy::apply_gradient(params, g, 0.1);

  CHECK(policy::to_json(ref) == ref_bytes);
  CHECK(policy::to_json(params) != ref_bytes);
}

TEST_CASE("params serialization round-trips and validates") {
  policy::PolicyConfig cfg = small_config(12, 4, 6);
  const policy::PolicyParams params = policy::init_params(cfg, 1234);
  const std::string text = policy::to_json(params);
  const policy::PolicyParams back = policy::params_from_json(text);
  CHECK(back.config == params.config);
  CHECK(back.theta == params.theta);
  CHECK(policy::to_json(back) == text);

  // a tampered feature hash is rejected
  std::string broken = text;
  const auto pos = broken.find("\"feature_hash\":\"");
  broken[pos + 16] = broken[pos + 16] == 'a' ? 'b' : 'a';
  CHECK_THROWS_AS(policy::params_from_json(broken), UsageError);
}

TEST_CASE("optimizer: adamw moves along the gradient and stays finite") {
  const policy::PolicyConfig cfg = small_config();
  policy::PolicyParams params = policy::init_params(cfg, 18);
  const double before = params.theta[5];
  policy::OptimizerConfig oc;
  oc.kind = policy::OptimizerConfig::Kind::adamw;
  oc.learning_rate = 0.05;
  policy::Optimizer opt(oc);
  policy::SparseVec g;
  g.add(5, 2.0);
  for (int i = 0; i < 3; ++i) opt.step(params, g);
  CHECK(params.theta[5] < before);
  CHECK(std::isfinite(params.theta[5]));
}

TEST_SUITE_END();
