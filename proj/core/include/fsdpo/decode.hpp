#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fsdpo/env.hpp"
#include "fsdpo/policy.hpp"
#include "fsdpo/prm.hpp"

namespace fsdpo::decode {

struct DecodeConfig {
  int n_samples = 5;         // samples for self-consistency / best-of-n
  double temperature = 0.8;  // sampling temperature for all strategies
  int b1 = 5;                // beam search sampling size per expansion
  int b2 = 1;                // beam width kept after scoring
  int max_steps = 32;        // step budget C for beam search
  // rank partial beams by min score over the prefix instead of the newest
  // step's score
  bool min_over_prefix = false;

  void validate() const;  // throws ConfigError
};

// Majority vote over sampled answers; ties resolve to the smaller value.
int self_consistency(const policy::PolicyParams& pol, const env::Problem& p,
                     const DecodeConfig& cfg, Rng& rng);

struct ScoredSolution {
  env::Solution solution;
  std::vector<double> rewards;
  double min_reward = 0.0;
  double mean_reward = 0.0;
};

// Index of the winner: highest min reward, ties by higher mean reward, then
// sample order. Exposed separately so the ranking rule is testable on
// hand-built score sets.
std::size_t best_of_n_select(std::span<const ScoredSolution> pool);

// Samples n_samples solutions, scores each step with the PRM, returns the
// one whose minimum step score is highest.
ScoredSolution best_of_n(const policy::PolicyParams& pol, const prm::PrmParams& prm,
                         const env::Problem& p, const DecodeConfig& cfg, Rng& rng);

struct BeamResult {
  env::Solution solution;
  bool complete = false;    // false when the step budget ran out first
  double final_reward = 0.0;
};

// Step-wise beam search: sample b1 candidate steps per beam, score each
// extension with the PRM, keep the top b2, stop when all beams are complete
// or max_steps levels were expanded. Duplicate candidate steps within one
// beam's expansion are collapsed before ranking.
BeamResult step_beam_search(const policy::PolicyParams& pol, const prm::PrmParams& prm,
                            const env::Problem& p, const DecodeConfig& cfg, Rng& rng);

enum class Strategy { greedy, self_consistency, best_of_n, step_beam_search };

std::string_view strategy_name(Strategy s);

struct AccuracyReport {
  Strategy strategy = Strategy::greedy;
  DecodeConfig cfg;
  std::uint64_t seed = 0;
  int problems = 0;
  double accuracy = 0.0;
  double mean_ms_per_problem = 0.0;
};

// Fraction of problems whose returned answer equals gold. Per-problem RNG
// streams derive from (seed, strategy, config, index); strategies needing a
// PRM throw UsageError when `prm` is null.
AccuracyReport evaluate_accuracy(Strategy strategy, const policy::PolicyParams& pol,
                                 const prm::PrmParams* prm,
                                 std::span<const env::Problem> problems,
                                 const DecodeConfig& cfg, std::uint64_t seed,
                                 int threads = 1);

std::string report_csv_header();
std::string report_csv_row(const AccuracyReport& r);

}  // namespace fsdpo::decode
