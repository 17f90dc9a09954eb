#include "fsdpo/dpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fsdpo/errors.hpp"
#include "fsdpo/numerics.hpp"
#include "json.hpp"

namespace fsdpo::dpo {

void DpoConfig::validate() const {
  if (!(beta > 0.0)) throw ConfigError("dpo: beta must be > 0");
  if (!(gamma >= 0.0)) throw ConfigError("dpo: gamma must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("dpo: learning rate must be > 0");
  if (epochs < 1) throw ConfigError("dpo: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("dpo: batch size must be >= 1");
  if (warmup_ratio < 0.0 || warmup_ratio >= 1.0)
    throw ConfigError("dpo: warmup ratio must be in [0, 1)");
}

double implicit_reward(const policy::PolicyParams& pol, const policy::PolicyParams& ref,
                       const env::Problem& p, const env::Solution& y, double beta) {
  return beta * (policy::solution_logprob(pol, p, y) - policy::solution_logprob(ref, p, y));
}

double dpo_loss(const policy::PolicyParams& pol, const policy::PolicyParams& ref,
                const env::Problem& p, const pairing::PreferencePair& pair, double beta) {
  const double margin = implicit_reward(pol, ref, p, pair.preferred.solution, beta) -
                        implicit_reward(pol, ref, p, pair.dispreferred.solution, beta);
  return -log_sigmoid(margin);
}

AlphaWeights alpha_weights(std::span<const double> rewards, double gamma, Side side) {
  if (rewards.empty()) throw UsageError("alpha_weights: empty reward list");
  if (!(gamma >= 0.0)) throw ConfigError("alpha_weights: gamma must be >= 0");
  const double sign = side == Side::preferred ? 1.0 : -1.0;
  return AlphaWeights{softmax_scaled(rewards, sign * gamma)};
}

namespace {

// sum_i w_i * grad log pi(s_i | x, s_<i) for one side of a pair
policy::SparseVec weighted_side_grad(const policy::PolicyParams& pol, const env::Problem& p,
                                     const env::Solution& y,
                                     std::span<const double> weights) {
  policy::SparseVec sum;
  for (std::size_t i = 0; i < y.steps.size(); ++i) {
    policy::SparseVec g =
        policy::grad_step_logprob(pol, p, std::span(y.steps.data(), i), y.steps[i]);
    sum.axpy(weights[i], g);
  }
  return sum;
}

policy::SparseVec pair_gradient(const policy::PolicyParams& pol,
                                const policy::PolicyParams& ref, const env::Problem& p,
                                const pairing::PreferencePair& pair, double beta,
                                std::span<const double> w_weights,
                                std::span<const double> l_weights) {
  const double margin = implicit_reward(pol, ref, p, pair.preferred.solution, beta) -
                        implicit_reward(pol, ref, p, pair.dispreferred.solution, beta);
  const double factor = sigmoid(-margin);  // sigma(r_hat_l - r_hat_w), in (0,1)

  policy::SparseVec grad = weighted_side_grad(pol, p, pair.preferred.solution, w_weights);
  const policy::SparseVec l_grad =
      weighted_side_grad(pol, p, pair.dispreferred.solution, l_weights);
  grad.axpy(-1.0, l_grad);
  grad.scale(-beta * factor);
  if (!grad.finite())
    throw TrainingError("pair gradient has non-finite entries", pair.problem_id);
  return grad;
}

}  // namespace

policy::SparseVec full_step_gradient(const policy::PolicyParams& pol,
                                     const policy::PolicyParams& ref, const env::Problem& p,
                                     const pairing::PreferencePair& pair,
                                     const DpoConfig& cfg) {
  const AlphaWeights aw =
      alpha_weights(pair.preferred.rewards, cfg.gamma, Side::preferred);
  const AlphaWeights al =
      alpha_weights(pair.dispreferred.rewards, cfg.gamma, Side::dispreferred);
  // scale each side's weights by its step count: uniform weights become 1
  // and the gamma = 0 gradient equals vanilla_dpo_gradient exactly
  std::vector<double> ww(aw.weights);
  for (double& w : ww) w *= static_cast<double>(ww.size());
  std::vector<double> wl(al.weights);
  for (double& w : wl) w *= static_cast<double>(wl.size());
  return pair_gradient(pol, ref, p, pair, cfg.beta, ww, wl);
}

policy::SparseVec vanilla_dpo_gradient(const policy::PolicyParams& pol,
                                       const policy::PolicyParams& ref,
                                       const env::Problem& p,
                                       const pairing::PreferencePair& pair, double beta) {
  const std::vector<double> ww(pair.preferred.solution.steps.size(), 1.0);
  const std::vector<double> wl(pair.dispreferred.solution.steps.size(), 1.0);
  return pair_gradient(pol, ref, p, pair, beta, ww, wl);
}

TrainReport train_full_step_dpo(policy::PolicyParams& pol, const policy::PolicyParams& ref,
                                const env::ProblemIndex& problems,
                                std::span<const pairing::PreferencePair> pairs,
                                const DpoConfig& cfg) {
  cfg.validate();
  if (pairs.empty()) throw UsageError("train_full_step_dpo: no pairs");

  policy::OptimizerConfig oc;
  oc.kind = cfg.use_adamw ? policy::OptimizerConfig::Kind::adamw
                          : policy::OptimizerConfig::Kind::sgd;
  oc.learning_rate = cfg.learning_rate;
  policy::Optimizer optimizer(oc);

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(cfg.seed);

  const std::size_t batches_per_epoch =
      (pairs.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_updates = batches_per_epoch * cfg.epochs;
  const std::size_t warmup_updates =
      static_cast<std::size_t>(cfg.warmup_ratio * static_cast<double>(total_updates));

  TrainReport report;
  double initial_loss = -1.0;
  int update = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span(order));
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - begin);

      policy::SparseVec batch_grad;
      BatchMetrics metrics;
      metrics.step = update;
      for (std::size_t k = begin; k < end; ++k) {
        const pairing::PreferencePair& pair = pairs[order[k]];
        const env::Problem& p = problems.at(pair.problem_id);
        const policy::SparseVec g = full_step_gradient(pol, ref, p, pair, cfg);
        batch_grad.axpy(inv_batch, g);
        const double margin = implicit_reward(pol, ref, p, pair.preferred.solution, cfg.beta) -
                              implicit_reward(pol, ref, p, pair.dispreferred.solution, cfg.beta);
        metrics.monitored_loss += -log_sigmoid(margin) * inv_batch;
        metrics.mean_margin += margin * inv_batch;
        if (margin > 0.0) metrics.pair_accuracy += inv_batch;
      }
      metrics.grad_norm = batch_grad.norm2();

      if (initial_loss < 0.0) initial_loss = metrics.monitored_loss;
      if (metrics.monitored_loss > 10.0 * initial_loss && initial_loss > 0.0)
        throw TrainingError("training diverged at update " + std::to_string(update) +
                            ": monitored loss " + std::to_string(metrics.monitored_loss) +
                            " > 10x initial " + std::to_string(initial_loss));

      double lr_scale = 1.0;
      if (warmup_updates > 0 && static_cast<std::size_t>(update) < warmup_updates)
        lr_scale *= static_cast<double>(update + 1) / static_cast<double>(warmup_updates);
      if (cfg.linear_decay)
        lr_scale *= 1.0 - static_cast<double>(update) / static_cast<double>(total_updates);

      optimizer.step(pol, batch_grad, lr_scale);
      report.history.push_back(metrics);
      ++update;
    }
  }
  return report;
}

std::string metrics_json_line(const BatchMetrics& m) {
  nlohmann::json j{{"step", m.step},
                   {"monitored_loss", m.monitored_loss},
                   {"mean_margin", m.mean_margin},
                   {"grad_norm", m.grad_norm},
                   {"pair_accuracy", m.pair_accuracy}};
  return j.dump();
}

}  // namespace fsdpo::dpo
