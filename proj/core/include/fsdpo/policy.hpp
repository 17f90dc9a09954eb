#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fsdpo/env.hpp"
#include "fsdpo/rng.hpp"

namespace fsdpo::policy {

// Tabular softmax step-policy. A state is (step index, previous claimed
// value, op kind); each state owns `branch` logits, one per candidate
// claimed value. Candidate j asserts (true_next + j) mod V, so candidate 0
// is always the correct continuation of the given prefix.

struct PolicyConfig {
  env::GeneratorConfig generator;
  int branch = 4;           // B, candidates per state; must be <= modulus
  double init_noise = 1.0;  // stddev of the initial logits

  void validate() const;  // throws ConfigError
  // Hash of the feature-map shape (V, D, B, op set); init_noise is excluded.
  std::uint64_t feature_hash() const;
  friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

// (step index, previous value, op kind) -> dense state id; total and
// injective over every prefix reachable under the generator config.
class FeatureMap {
 public:
  explicit FeatureMap(const PolicyConfig& cfg);

  int state_count() const { return state_count_; }
  int branch() const { return branch_; }
  int theta_size() const { return state_count_ * branch_; }

  int state_id(int step_index, int prev_value, env::OpKind kind) const;  // domain_error
  int theta_index(int state, int candidate) const { return state * branch_ + candidate; }

 private:
  int modulus_;
  int depth_;
  int branch_;
  int kind_index_[3];
  int state_count_;
};

struct PolicyParams {
  PolicyConfig config;
  std::vector<double> theta;  // state-major, `branch` entries per state
};

// Frozen deep copy taken at training start; value semantics make the freeze
// literal — pass by const reference and nothing can touch it.
using ReferencePolicy = PolicyParams;

PolicyParams init_params(const PolicyConfig& cfg, std::uint64_t seed);

// Resolved view of the state reached by a prefix.
struct StateView {
  int state = 0;       // dense state id
  int true_next = 0;   // correct continuation value
  int step_index = 0;  // == prefix.size()
};

StateView state_at(const PolicyParams& params, const env::Problem& p,
                   std::span<const env::Step> prefix);

// Candidate claimed values at the state, candidate j = (true_next + j) mod V.
std::vector<int> candidate_values(const PolicyParams& params, const env::Problem& p,
                                  std::span<const env::Step> prefix);

// log softmax(theta[state]/temperature) for every candidate, in candidate order.
std::vector<double> step_logprobs(const PolicyParams& params, const env::Problem& p,
                                  std::span<const env::Step> prefix, double temperature = 1.0);

// log pi(s | x, prefix); throws std::domain_error when s is not a candidate.
double step_logprob(const PolicyParams& params, const env::Problem& p,
                    std::span<const env::Step> prefix, const env::Step& s);

// Sum of step terms over the whole chain.
double solution_logprob(const PolicyParams& params, const env::Problem& p,
                        const env::Solution& y);

// Sparse vector over theta, ordered by index.
struct SparseVec {
  std::vector<std::pair<int, double>> entries;

  void add(int index, double value);
  void sort_and_merge();
  double norm2() const;
  SparseVec& scale(double a);
  SparseVec& axpy(double a, const SparseVec& other);  // this += a * other
  double dot_dense(std::span<const double> dense) const;
  bool finite() const;
};

// d log pi(s | x, prefix) / d theta: (indicator - softmax) on the state's
// candidate entries, zero elsewhere.
SparseVec grad_step_logprob(const PolicyParams& params, const env::Problem& p,
                            std::span<const env::Step> prefix, const env::Step& s);

env::Solution sample_solution(const PolicyParams& params, const env::Problem& p,
                              double temperature, Rng& rng);

// Completes a chain from the prefix onward; used by rollout labeling and
// step-wise beam search.
env::Solution sample_continuation(const PolicyParams& params, const env::Problem& p,
                                  std::span<const env::Step> prefix, double temperature,
                                  Rng& rng);

// Argmax candidate per step; ties resolve to the lowest candidate index.
env::Solution greedy_decode(const PolicyParams& params, const env::Problem& p);

// Adapter for env::enumerate_success_prob at a given sampling temperature.
env::StepDistributionFn step_distribution(const PolicyParams& params, double temperature = 1.0);

// Plain descent step: theta -= lr * grad. Throws TrainingError on
// non-finite gradient entries.
void apply_gradient(PolicyParams& params, const SparseVec& grad, double learning_rate);

// Optional AdamW-style update behind config; SGD by default.
struct OptimizerConfig {
  enum class Kind { sgd, adamw };
  Kind kind = Kind::sgd;
  double learning_rate = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}
  void step(PolicyParams& params, const SparseVec& grad, double lr_scale = 1.0);

 private:
  OptimizerConfig cfg_;
  std::vector<double> m_, v_;
  std::int64_t t_ = 0;
};

// JSON with a {version, feature-map hash} header.
std::string to_json(const PolicyParams& params);
PolicyParams params_from_json(const std::string& text);

}  // namespace fsdpo::policy
