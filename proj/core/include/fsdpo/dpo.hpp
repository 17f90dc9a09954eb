#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fsdpo/env.hpp"
#include "fsdpo/pairing.hpp"
#include "fsdpo/policy.hpp"

namespace fsdpo::dpo {

struct DpoConfig {
  double beta = 0.05;   // deviation penalty against the reference policy
  double gamma = 0.5;   // step-reward softmax temperature; 0 recovers vanilla DPO
  double learning_rate = 4.0;
  int epochs = 1;
  int batch_size = 16;
  bool use_adamw = false;
  double warmup_ratio = 0.0;  // fraction of total updates spent ramping lr up
  bool linear_decay = false;  // ramp lr down to 0 over the remaining updates
  std::uint64_t seed = 0;     // pair-shuffle stream

  void validate() const;  // throws ConfigError
};

// beta * (log pi_theta(y|x) - log pi_ref(y|x))
double implicit_reward(const policy::PolicyParams& pol, const policy::PolicyParams& ref,
                       const env::Problem& p, const env::Solution& y, double beta);

// -log sigma(r_hat(y_w) - r_hat(y_l)), evaluated with the stable log-sigmoid.
double dpo_loss(const policy::PolicyParams& pol, const policy::PolicyParams& ref,
                const env::Problem& p, const pairing::PreferencePair& pair, double beta);

enum class Side { preferred, dispreferred };

struct AlphaWeights {
  std::vector<double> weights;  // positive, sums to 1
};

// softmax(gamma * rewards) for the preferred side, softmax(-gamma * rewards)
// for the dispreferred side; max-subtracted. UsageError on empty rewards.
AlphaWeights alpha_weights(std::span<const double> rewards, double gamma, Side side);

// Loss gradient with per-step weights K * alpha_i per side (alpha from
// alpha_weights, scaled by the side's step count). The scaling makes the
// gamma = 0 case coincide exactly with the vanilla DPO loss gradient instead
// of a 1/K multiple of it; the weighting and the sigmoid factor are treated
// as constants with respect to theta. Throws TrainingError on NaN.
policy::SparseVec full_step_gradient(const policy::PolicyParams& pol,
                                     const policy::PolicyParams& ref, const env::Problem& p,
                                     const pairing::PreferencePair& pair,
                                     const DpoConfig& cfg);

// Exact gradient of dpo_loss: unit weight on every step term.
policy::SparseVec vanilla_dpo_gradient(const policy::PolicyParams& pol,
                                       const policy::PolicyParams& ref,
                                       const env::Problem& p,
                                       const pairing::PreferencePair& pair, double beta);

struct BatchMetrics {
  int step = 0;
  double monitored_loss = 0.0;  // mean vanilla dpo_loss over the batch
  double mean_margin = 0.0;     // mean r_hat(y_w) - r_hat(y_l)
  double grad_norm = 0.0;
  double pair_accuracy = 0.0;  // fraction of batch pairs with positive margin
};

struct TrainReport {
  std::vector<BatchMetrics> history;
};

// Mini-batch training with the step-wise weighted gradient. Pairs are
// shuffled per epoch from cfg.seed; batch accumulation order is fixed, so
// results are bitwise reproducible. Aborts with TrainingError when the
// monitored loss exceeds 10x its initial value.
TrainReport train_full_step_dpo(policy::PolicyParams& pol, const policy::PolicyParams& ref,
                                const env::ProblemIndex& problems,
                                std::span<const pairing::PreferencePair> pairs,
                                const DpoConfig& cfg);

std::string metrics_json_line(const BatchMetrics& m);

}  // namespace fsdpo::dpo
