#include "fsdpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fsdpo/errors.hpp"
#include "fsdpo/numerics.hpp"
#include "json.hpp"

namespace fsdpo::policy {

using nlohmann::json;

void PolicyConfig::validate() const {
  generator.validate();
  if (branch < 2) throw ConfigError("policy: branch must be >= 2");
  if (branch > generator.modulus)
    throw ConfigError("policy: branch must be <= modulus so candidates stay distinct");
  if (!(init_noise >= 0.0)) throw ConfigError("policy: init_noise must be >= 0");
}

std::uint64_t PolicyConfig::feature_hash() const {
  return fnv1a64(generator.canonical_string() + ";b=" + std::to_string(branch));
}

FeatureMap::FeatureMap(const PolicyConfig& cfg)
    : modulus_(cfg.generator.modulus),
      depth_(cfg.generator.depth),
      branch_(cfg.branch),
      kind_index_{-1, -1, -1} {
  cfg.validate();
  for (std::size_t i = 0; i < cfg.generator.op_kinds.size(); ++i)
    kind_index_[static_cast<int>(cfg.generator.op_kinds[i])] = static_cast<int>(i);
  state_count_ = depth_ * modulus_ * static_cast<int>(cfg.generator.op_kinds.size());
}

int FeatureMap::state_id(int step_index, int prev_value, env::OpKind kind) const {
  const int kinds = state_count_ / (depth_ * modulus_);
  const int k = kind_index_[static_cast<int>(kind)];
  if (step_index < 0 || step_index >= depth_ || prev_value < 0 || prev_value >= modulus_ ||
      k < 0)
    throw std::domain_error("feature map: state outside the reachable space");
  return (step_index * modulus_ + prev_value) * kinds + k;
}

PolicyParams init_params(const PolicyConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const FeatureMap map(cfg);
  PolicyParams params{cfg, std::vector<double>(map.theta_size(), 0.0)};
  Rng rng(seed);
  for (double& w : params.theta) w = cfg.init_noise * rng.normal();
  return params;
}

namespace {

int prev_value_of(const env::Problem& p, std::span<const env::Step> prefix) {
  return prefix.empty() ? p.start_value : prefix.back().claimed_value;
}

}  // namespace

StateView state_at(const PolicyParams& params, const env::Problem& p,
                   std::span<const env::Step> prefix) {
  const int i = static_cast<int>(prefix.size());
  if (i >= p.depth()) throw std::domain_error("state_at: prefix already complete");
  const FeatureMap map(params.config);
  const int prev = prev_value_of(p, prefix);
  const env::Op& op = p.ops[i];
  StateView view;
  view.step_index = i;
  view.state = map.state_id(i, prev, op.kind);
  view.true_next = env::apply_op(op, prev, p.modulus);
  return view;
}

std::vector<int> candidate_values(const PolicyParams& params, const env::Problem& p,
                                  std::span<const env::Step> prefix) {
  const StateView view = state_at(params, p, prefix);
  std::vector<int> values(params.config.branch);
  for (int j = 0; j < params.config.branch; ++j)
    values[j] = (view.true_next + j) % p.modulus;
  return values;
}

namespace {

std::span<const double> state_logits(const PolicyParams& params, int state) {
  const int b = params.config.branch;
  return {params.theta.data() + static_cast<std::size_t>(state) * b,
          static_cast<std::size_t>(b)};
}

// candidate index of a claimed value, or -1 when not in the candidate set
int candidate_offset(const PolicyParams& params, const env::Problem& p, int true_next,
                     int claimed) {
  int off = claimed - true_next;
  if (off < 0) off += p.modulus;
  return off < params.config.branch ? off : -1;
}

}  // namespace

std::vector<double> step_logprobs(const PolicyParams& params, const env::Problem& p,
                                  std::span<const env::Step> prefix, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
  const StateView view = state_at(params, p, prefix);
  const auto logits = state_logits(params, view.state);
  std::vector<double> scaled(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j) scaled[j] = logits[j] / temperature;
  const double lse = logsumexp(scaled);
  for (double& z : scaled) z -= lse;
  return scaled;
}

double step_logprob(const PolicyParams& params, const env::Problem& p,
                    std::span<const env::Step> prefix, const env::Step& s) {
  const StateView view = state_at(params, p, prefix);
  if (s.index != view.step_index)
    throw std::domain_error("step_logprob: step index does not match prefix length");
  const int off = candidate_offset(params, p, view.true_next, s.claimed_value);
  if (off < 0)
    throw std::domain_error("step_logprob: claimed value is not in the candidate set");
  const auto lp = step_logprobs(params, p, prefix);
  return lp[off];
}

double solution_logprob(const PolicyParams& params, const env::Problem& p,
                        const env::Solution& y) {
  double sum = 0.0;
  for (std::size_t i = 0; i < y.steps.size(); ++i)
    sum += step_logprob(params, p, std::span(y.steps.data(), i), y.steps[i]);
  return sum;
}

void SparseVec::add(int index, double value) { entries.emplace_back(index, value); }

void SparseVec::sort_and_merge() {
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::size_t out = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (out > 0 && entries[out - 1].first == entries[i].first) {
      entries[out - 1].second += entries[i].second;
    } else {
      entries[out++] = entries[i];
    }
  }
  entries.resize(out);
}

double SparseVec::norm2() const {
  double s = 0.0;
  for (const auto& [_, v] : entries) s += v * v;
  return std::sqrt(s);
}

SparseVec& SparseVec::scale(double a) {
  for (auto& [_, v] : entries) v *= a;
  return *this;
}

SparseVec& SparseVec::axpy(double a, const SparseVec& other) {
  for (const auto& [i, v] : other.entries) entries.emplace_back(i, a * v);
  sort_and_merge();
  return *this;
}

double SparseVec::dot_dense(std::span<const double> dense) const {
  double s = 0.0;
  for (const auto& [i, v] : entries) s += v * dense[i];
  return s;
}

bool SparseVec::finite() const {
  for (const auto& [_, v] : entries)
    if (!std::isfinite(v)) return false;
  return true;
}

SparseVec grad_step_logprob(const PolicyParams& params, const env::Problem& p,
                            std::span<const env::Step> prefix, const env::Step& s) {
  const StateView view = state_at(params, p, prefix);
  if (s.index != view.step_index)
    throw std::domain_error("grad_step_logprob: step index does not match prefix length");
  const int off = candidate_offset(params, p, view.true_next, s.claimed_value);
  if (off < 0)
    throw std::domain_error("grad_step_logprob: claimed value is not in the candidate set");
  const auto probs = softmax(state_logits(params, view.state));
  SparseVec g;
  g.entries.reserve(probs.size());
  const FeatureMap map(params.config);
  for (int j = 0; j < static_cast<int>(probs.size()); ++j)
    g.add(map.theta_index(view.state, j), (j == off ? 1.0 : 0.0) - probs[j]);
  return g;
}

namespace {

env::Step sample_step(const PolicyParams& params, const env::Problem& p,
                      std::span<const env::Step> prefix, double temperature, Rng& rng) {
  const auto lp = step_logprobs(params, p, prefix, temperature);
  std::vector<double> probs(lp.size());
  for (std::size_t j = 0; j < lp.size(); ++j) probs[j] = std::exp(lp[j]);
  const std::size_t pick = rng.categorical(probs);
  const StateView view = state_at(params, p, prefix);
  return env::Step{view.step_index,
                   (view.true_next + static_cast<int>(pick)) % p.modulus};
}

}  // namespace

env::Solution sample_continuation(const PolicyParams& params, const env::Problem& p,
                                  std::span<const env::Step> prefix, double temperature,
                                  Rng& rng) {
  std::vector<env::Step> chain(prefix.begin(), prefix.end());
  while (static_cast<int>(chain.size()) < p.depth())
    chain.push_back(sample_step(params, p, chain, temperature, rng));
  env::Solution y;
  y.problem_id = p.id;
  y.steps = std::move(chain);
  return y;
}

env::Solution sample_solution(const PolicyParams& params, const env::Problem& p,
                              double temperature, Rng& rng) {
  return sample_continuation(params, p, {}, temperature, rng);
}

env::Solution greedy_decode(const PolicyParams& params, const env::Problem& p) {
  std::vector<env::Step> chain;
  chain.reserve(p.depth());
  while (static_cast<int>(chain.size()) < p.depth()) {
    const StateView view = state_at(params, p, chain);
    const auto logits = state_logits(params, view.state);
    int best = 0;
    for (int j = 1; j < static_cast<int>(logits.size()); ++j)
      if (logits[j] > logits[best]) best = j;
    chain.push_back(env::Step{view.step_index, (view.true_next + best) % p.modulus});
  }
  env::Solution y;
  y.problem_id = p.id;
  y.steps = std::move(chain);
  return y;
}

env::StepDistributionFn step_distribution(const PolicyParams& params, double temperature) {
  return [params, temperature](const env::Problem& p, std::span<const env::Step> prefix) {
    const auto lp = step_logprobs(params, p, prefix, temperature);
    const StateView view = state_at(params, p, prefix);
    std::vector<env::WeightedStep> dist(lp.size());
    for (std::size_t j = 0; j < lp.size(); ++j) {
      dist[j].value = (view.true_next + static_cast<int>(j)) % p.modulus;
      dist[j].prob = std::exp(lp[j]);
    }
    return dist;
  };
}

void apply_gradient(PolicyParams& params, const SparseVec& grad, double learning_rate) {
  if (!grad.finite()) throw TrainingError("apply_gradient: non-finite gradient entry");
  for (const auto& [i, v] : grad.entries) params.theta[i] -= learning_rate * v;
}

void Optimizer::step(PolicyParams& params, const SparseVec& grad, double lr_scale) {
  if (!grad.finite()) throw TrainingError("optimizer: non-finite gradient entry");
  const double lr = cfg_.learning_rate * lr_scale;
  if (cfg_.kind == OptimizerConfig::Kind::sgd) {
    for (const auto& [i, v] : grad.entries) params.theta[i] -= lr * v;
    return;
  }
  if (m_.size() != params.theta.size()) {
    m_.assign(params.theta.size(), 0.0);
    v_.assign(params.theta.size(), 0.0);
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (const auto& [i, g] : grad.entries) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    params.theta[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                             cfg_.weight_decay * params.theta[i]);
  }
}

std::string to_json(const PolicyParams& params) {
  json j;
  j["version"] = 1;
  j["kind"] = "policy";
  char hash[19];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(params.config.feature_hash()));
  j["feature_hash"] = hash;
  j["config"] = {{"modulus", params.config.generator.modulus},
                 {"depth", params.config.generator.depth},
                 {"ops", json::array()},
                 {"branch", params.config.branch},
                 {"init_noise", params.config.init_noise}};
  for (const auto k : params.config.generator.op_kinds)
    j["config"]["ops"].push_back(std::string(env::op_name(k)));
  j["theta"] = params.theta;
  return j.dump();
}

PolicyParams params_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.at("version").get<int>() != 1) throw UsageError("params: unsupported version");
  if (j.at("kind").get<std::string>() != "policy") throw UsageError("params: wrong kind");
  PolicyParams params;
  const json& jc = j.at("config");
  params.config.generator.modulus = jc.at("modulus").get<int>();
  params.config.generator.depth = jc.at("depth").get<int>();
  params.config.generator.op_kinds.clear();
  for (const auto& name : jc.at("ops")) {
    const auto kind = env::op_from_name(name.get<std::string>());
    if (!kind) throw UsageError("params: unknown op kind " + name.dump());
    params.config.generator.op_kinds.push_back(*kind);
  }
  params.config.branch = jc.at("branch").get<int>();
  params.config.init_noise = jc.at("init_noise").get<double>();
  params.config.validate();
  char hash[19];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(params.config.feature_hash()));
  if (j.at("feature_hash").get<std::string>() != hash)
    throw UsageError("params: feature hash does not match config");
  params.theta = j.at("theta").get<std::vector<double>>();
  const FeatureMap map(params.config);
  if (static_cast<int>(params.theta.size()) != map.theta_size())
    throw UsageError("params: theta size does not match feature map");
  return params;
}

}  // namespace fsdpo::policy
