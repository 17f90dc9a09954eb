#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fsdpo/env.hpp"
#include "fsdpo/policy.hpp"

namespace fsdpo::prm {

// Process reward model over the same state space as the policy: one logit
// per (state, candidate) plus a shared bias, squashed through a sigmoid.

struct SamplingBudget {
  int m = 32;  // solutions sampled per problem
  int n = 0;   // rollouts per step; 0 selects the simplified outcome labels
  int t = 4;   // pair-selection width

  void validate() const;  // throws ConfigError
};

enum class LabelMode { simple, monte_carlo };
inline LabelMode label_mode(const SamplingBudget& b) {
  return b.n == 0 ? LabelMode::simple : LabelMode::monte_carlo;
}

struct PrmExample {
  std::string problem_id;
  std::vector<int> prefix;  // claimed values before the labeled step
  int step_value = 0;
  double label = 0.0;  // in [0,1]; {0,1} under the simplified scheme
};

struct PrmParams {
  policy::PolicyConfig config;
  std::vector<double> table;  // same layout as policy theta
  double bias = 0.0;
};

PrmParams init_prm(const policy::PolicyConfig& cfg);

// Work counters for the two labeling schemes. `work_units` counts one unit
// per label assignment in simple mode and one per simulation in MC mode,
// the quantities whose growth the modes are compared by.
struct LabelCostCounters {
  std::uint64_t work_units = 0;
  std::uint64_t simulations = 0;
  std::uint64_t sampled_steps = 0;
  std::uint64_t answer_checks = 0;
};

// Fraction of `n` policy rollouts continuing after step `step_index` that
// reach the gold answer. The final step has no continuation, so every
// rollout degenerates to the outcome check and the label is the indicator.
double mc_label(const policy::PolicyParams& pol, const env::Problem& p,
                const env::Solution& y, int step_index, int n, double temperature, Rng& rng,
                LabelCostCounters* counters = nullptr);

// Outcome indicator broadcast to every step; no simulation.
std::vector<double> simple_label(const env::Solution& y, const env::Problem& p);

// Samples budget.m solutions per problem and labels every step according to
// the budget (n = 0 simple, n >= 1 Monte Carlo). Solution sampling and
// rollout labeling use separate per-problem streams derived from `seed`, so
// different n label identical sampled solutions.
std::vector<PrmExample> build_prm_dataset(const policy::PolicyParams& pol,
                                          std::span<const env::Problem> problems,
                                          const SamplingBudget& budget, double temperature,
                                          std::uint64_t seed,
                                          LabelCostCounters* counters = nullptr);

struct PrmTrainConfig {
  int epochs = 1;
  double learning_rate = 0.5;
  int batch_size = 64;
  std::uint64_t seed = 0;  // shuffle stream
};

struct PrmTrainReport {
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;  // mean BCE over the dataset after each epoch
};

// Minimizes mean binary cross-entropy by mini-batch SGD. States are
// resolved against the problems the examples were generated from.
// Throws UsageError on an empty dataset.
PrmTrainReport train_prm(PrmParams& prm, std::span<const PrmExample> dataset,
                         const env::ProblemIndex& problems, const PrmTrainConfig& cfg);
PrmParams train_prm(const policy::PolicyConfig& cfg, std::span<const PrmExample> dataset,
                    const env::ProblemIndex& problems, int epochs, double learning_rate);

// Sigmoid score of a step given its prefix, in (0,1).
double prm_score(const PrmParams& prm, const env::Problem& p,
                 std::span<const env::Step> prefix, const env::Step& step);

// Mean BCE of the model on a dataset.
double prm_loss(const PrmParams& prm, std::span<const PrmExample> dataset,
                const env::ProblemIndex& problems);

// Minimum across step scores; the solution-level score used by reranking.
double min_aggregate(std::span<const double> scores);  // UsageError when empty

std::string to_json_line(const PrmExample& ex);
PrmExample example_from_json_line(const std::string& line);
std::string to_json(const PrmParams& prm);
PrmParams prm_from_json(const std::string& text);

}  // namespace fsdpo::prm
