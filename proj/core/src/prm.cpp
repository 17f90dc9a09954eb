#include "fsdpo/prm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "fsdpo/errors.hpp"
#include "fsdpo/numerics.hpp"
#include "json.hpp"

namespace fsdpo::prm {

using nlohmann::json;

void SamplingBudget::validate() const {
  if (m < 1) throw ConfigError("budget: m must be >= 1");
  if (n < 0) throw ConfigError("budget: n must be >= 0");
  if (t < 1 || 2 * t > m) throw ConfigError("budget: t must satisfy 1 <= t <= m/2");
}

PrmParams init_prm(const policy::PolicyConfig& cfg) {
  cfg.validate();
  const policy::FeatureMap map(cfg);
  return PrmParams{cfg, std::vector<double>(map.theta_size(), 0.0), 0.0};
}

double mc_label(const policy::PolicyParams& pol, const env::Problem& p,
                const env::Solution& y, int step_index, int n, double temperature, Rng& rng,
                LabelCostCounters* counters) {
  if (n < 1) throw ConfigError("mc_label: n must be >= 1");
  if (step_index < 0 || step_index >= static_cast<int>(y.steps.size()))
    throw UsageError("mc_label: step index out of range");
  const std::span<const env::Step> prefix(y.steps.data(),
                                          static_cast<std::size_t>(step_index) + 1);
  const int gold = env::gold_answer(p);
  int hits = 0;
  for (int j = 0; j < n; ++j) {
    const env::Solution rollout = policy::sample_continuation(pol, p, prefix, temperature, rng);
    if (counters) {
      counters->work_units += 1;
      counters->simulations += 1;
      counters->sampled_steps += rollout.steps.size() - prefix.size();
      counters->answer_checks += 1;
    }
    if (rollout.answer() == gold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

std::vector<double> simple_label(const env::Solution& y, const env::Problem& p) {
  const double label = env::check_answer(y, p) ? 1.0 : 0.0;
  return std::vector<double>(y.steps.size(), label);
}

std::vector<PrmExample> build_prm_dataset(const policy::PolicyParams& pol,
                                          std::span<const env::Problem> problems,
                                          const SamplingBudget& budget, double temperature,
                                          std::uint64_t seed, LabelCostCounters* counters) {
  budget.validate();
  std::vector<PrmExample> dataset;
  dataset.reserve(problems.size() * budget.m * pol.config.generator.depth);
  for (std::size_t pi = 0; pi < problems.size(); ++pi) {
    const env::Problem& p = problems[pi];
    Rng sample_rng(derive_seed(seed, "prm-data/sample", pi));
    Rng label_rng(derive_seed(seed, "prm-data/label", pi));
    for (int s = 0; s < budget.m; ++s) {
      const env::Solution y = policy::sample_solution(pol, p, temperature, sample_rng);
      if (counters) counters->sampled_steps += y.steps.size();
      const int k = static_cast<int>(y.steps.size());
      if (label_mode(budget) == LabelMode::simple) {
        const std::vector<double> labels = simple_label(y, p);
        if (counters) {
          counters->answer_checks += 1;
          counters->work_units += labels.size();
        }
        for (int i = 0; i < k; ++i) {
          PrmExample ex;
          ex.problem_id = p.id;
          for (int j = 0; j < i; ++j) ex.prefix.push_back(y.steps[j].claimed_value);
          ex.step_value = y.steps[i].claimed_value;
          ex.label = labels[i];
          dataset.push_back(std::move(ex));
        }
      } else {
        for (int i = 0; i < k; ++i) {
          PrmExample ex;
          ex.problem_id = p.id;
          for (int j = 0; j < i; ++j) ex.prefix.push_back(y.steps[j].claimed_value);
          ex.step_value = y.steps[i].claimed_value;
          ex.label = mc_label(pol, p, y, i, budget.n, temperature, label_rng, counters);
          dataset.push_back(std::move(ex));
        }
      }
    }
  }
  return dataset;
}

namespace {

// (state, candidate) table index of an example, resolved via its problem
std::pair<int, int> example_index(const PrmParams& prm, const env::Problem& p,
                                  const PrmExample& ex) {
  const policy::FeatureMap map(prm.config);
  const int i = static_cast<int>(ex.prefix.size());
  if (i >= p.depth()) throw UsageError("prm example: prefix as long as the problem");
  const int prev = ex.prefix.empty() ? p.start_value : ex.prefix.back();
  const int state = map.state_id(i, prev, p.ops[i].kind);
  const int true_next = env::apply_op(p.ops[i], prev, p.modulus);
  int off = ex.step_value - true_next;
  if (off < 0) off += p.modulus;
  if (off >= prm.config.branch)
    throw std::domain_error("prm example: step value is not in the candidate set");
  return {state, off};
}

double example_logit(const PrmParams& prm, int state, int off) {
  const policy::FeatureMap map(prm.config);
  return prm.table[map.theta_index(state, off)] + prm.bias;
}

double bce(double score, double label) {
  // clamp keeps the loss finite when a logit saturates
  const double s = std::clamp(score, 1e-12, 1.0 - 1e-12);
  return -(label * std::log(s) + (1.0 - label) * std::log(1.0 - s));
}

}  // namespace

double prm_loss(const PrmParams& prm, std::span<const PrmExample> dataset,
                const env::ProblemIndex& problems) {
  if (dataset.empty()) throw UsageError("prm_loss: empty dataset");
  double total = 0.0;
  for (const PrmExample& ex : dataset) {
    const env::Problem& p = problems.at(ex.problem_id);
    const auto [state, off] = example_index(prm, p, ex);
    total += bce(sigmoid(example_logit(prm, state, off)), ex.label);
  }
  return total / static_cast<double>(dataset.size());
}

PrmTrainReport train_prm(PrmParams& prm, std::span<const PrmExample> dataset,
                         const env::ProblemIndex& problems, const PrmTrainConfig& cfg) {
  if (dataset.empty()) throw UsageError("train_prm: empty dataset");
  if (cfg.epochs < 1) throw ConfigError("train_prm: epochs must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("train_prm: learning rate must be > 0");
  const policy::FeatureMap map(prm.config);

  // resolve table indices once
  std::vector<std::pair<int, int>> indices;
  indices.reserve(dataset.size());
  for (const PrmExample& ex : dataset)
    indices.push_back(example_index(prm, problems.at(ex.problem_id), ex));

  PrmTrainReport report;
  report.initial_loss = prm_loss(prm, dataset, problems);

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(cfg.seed);
  const int batch = std::max(1, cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span(order));
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      // accumulate d(mean BCE)/d(logit) = (score - label)/batch per example
      double bias_grad = 0.0;
      std::vector<std::pair<int, double>> table_grad;
      table_grad.reserve(end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        const auto [state, off] = indices[order[k]];
        const double err =
            sigmoid(example_logit(prm, state, off)) - dataset[order[k]].label;
        table_grad.emplace_back(map.theta_index(state, off), err);
        bias_grad += err;
      }
      const double scale = cfg.learning_rate / static_cast<double>(end - begin);
      for (const auto& [idx, g] : table_grad) prm.table[idx] -= scale * g;
      prm.bias -= scale * bias_grad;
    }
    report.epoch_loss.push_back(prm_loss(prm, dataset, problems));
  }
  return report;
}

PrmParams train_prm(const policy::PolicyConfig& cfg, std::span<const PrmExample> dataset,
                    const env::ProblemIndex& problems, int epochs, double learning_rate) {
  PrmParams prm = init_prm(cfg);
  PrmTrainConfig tc;
  tc.epochs = epochs;
  tc.learning_rate = learning_rate;
  train_prm(prm, dataset, problems, tc);
  return prm;
}

double prm_score(const PrmParams& prm, const env::Problem& p,
                 std::span<const env::Step> prefix, const env::Step& step) {
  const policy::FeatureMap map(prm.config);
  const int i = static_cast<int>(prefix.size());
  if (step.index != i) throw std::domain_error("prm_score: step index mismatch");
  if (i >= p.depth()) throw std::domain_error("prm_score: prefix already complete");
  const int prev = prefix.empty() ? p.start_value : prefix.back().claimed_value;
  const int state = map.state_id(i, prev, p.ops[i].kind);
  const int true_next = env::apply_op(p.ops[i], prev, p.modulus);
  int off = step.claimed_value - true_next;
  if (off < 0) off += p.modulus;
  if (off >= prm.config.branch)
    throw std::domain_error("prm_score: step value is not in the candidate set");
  return sigmoid(prm.table[map.theta_index(state, off)] + prm.bias);
}

double min_aggregate(std::span<const double> scores) {
  if (scores.empty()) throw UsageError("min_aggregate: empty score list");
  return *std::min_element(scores.begin(), scores.end());
}

std::string to_json_line(const PrmExample& ex) {
  json j{{"problem_id", ex.problem_id},
         {"prefix", ex.prefix},
         {"step", ex.step_value},
         {"label", ex.label}};
  return j.dump();
}

PrmExample example_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  PrmExample ex;
  ex.problem_id = j.at("problem_id").get<std::string>();
  ex.prefix = j.at("prefix").get<std::vector<int>>();
  ex.step_value = j.at("step").get<int>();
  ex.label = j.at("label").get<double>();
  return ex;
}

std::string to_json(const PrmParams& prm) {
  json j;
  j["version"] = 1;
  j["kind"] = "prm";
  char hash[19];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(prm.config.feature_hash()));
  j["feature_hash"] = hash;
  j["config"] = {{"modulus", prm.config.generator.modulus},
                 {"depth", prm.config.generator.depth},
                 {"ops", json::array()},
                 {"branch", prm.config.branch},
                 {"init_noise", prm.config.init_noise}};
  for (const auto k : prm.config.generator.op_kinds)
    j["config"]["ops"].push_back(std::string(env::op_name(k)));
  j["bias"] = prm.bias;
  j["table"] = prm.table;
  return j.dump();
}

PrmParams prm_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.at("version").get<int>() != 1) throw UsageError("prm params: unsupported version");
  if (j.at("kind").get<std::string>() != "prm") throw UsageError("prm params: wrong kind");
  PrmParams prm;
  const json& jc = j.at("config");
  prm.config.generator.modulus = jc.at("modulus").get<int>();
  prm.config.generator.depth = jc.at("depth").get<int>();
  prm.config.generator.op_kinds.clear();
  for (const auto& name : jc.at("ops")) {
    const auto kind = env::op_from_name(name.get<std::string>());
    if (!kind) throw UsageError("prm params: unknown op kind " + name.dump());
    prm.config.generator.op_kinds.push_back(*kind);
  }
  prm.config.branch = jc.at("branch").get<int>();
  prm.config.init_noise = jc.at("init_noise").get<double>();
  prm.config.validate();
  prm.bias = j.at("bias").get<double>();
  prm.table = j.at("table").get<std::vector<double>>();
  const policy::FeatureMap map(prm.config);
  if (static_cast<int>(prm.table.size()) != map.theta_size())
    throw UsageError("prm params: table size does not match feature map");
  return prm;
}

}  // namespace fsdpo::prm
