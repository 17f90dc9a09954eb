#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fsdpo/env.hpp"
#include "fsdpo/policy.hpp"
#include "fsdpo/prm.hpp"

namespace fsdpo::pairing {

struct StepRewardTrace {
  env::Solution solution;
  std::vector<double> rewards;  // one PRM score per step, in (0,1)
  double mean_reward = 0.0;
  double logprob = 0.0;  // under the sampling policy; selection tie-break
};

// Scores every step of `y` with the PRM and attaches the mean.
StepRewardTrace score_solution(const prm::PrmParams& prm, const env::Problem& p,
                               const env::Solution& y);

struct PreferencePair {
  std::string problem_id;
  StepRewardTrace preferred;     // correct answer
  StepRewardTrace dispreferred;  // incorrect answer
};

enum class PairSelection { full_cross, random_subset };

struct PairBuildConfig {
  prm::SamplingBudget budget;
  double temperature = 0.8;
  PairSelection selection = PairSelection::full_cross;
};

struct PairBuildResult {
  std::vector<PreferencePair> pairs;
  std::size_t sampled = 0;
  std::size_t unique_solutions = 0;
  std::size_t correct = 0;
  std::size_t incorrect = 0;
  bool skipped = false;      // one side empty, no pairs for this problem
  std::string diagnostic;
};

// Ranking and selection over already-scored unique traces: correct sorted by
// mean reward descending, incorrect ascending, ties by logprob descending
// then first-seen order; min(t, available) per side, cross product emitted
// in (preferred, dispreferred) index order. `rng` is touched only when
// selection == random_subset.
PairBuildResult select_pairs(const env::Problem& p, std::vector<StepRewardTrace> traces,
                             const prm::SamplingBudget& budget, PairSelection selection,
                             Rng& rng);

// Samples budget.m solutions, deduplicates identical step sequences, scores
// the survivors, and delegates to select_pairs.
PairBuildResult build_pairs(const policy::PolicyParams& pol, const prm::PrmParams& prm,
                            const env::Problem& p, const PairBuildConfig& cfg, Rng& rng);

// {"problem_id","w":{"steps":[...],"rewards":[...]},"l":{...}}
std::string to_json_line(const PreferencePair& pair);
PreferencePair pair_from_json_line(const std::string& line);

}  // namespace fsdpo::pairing
