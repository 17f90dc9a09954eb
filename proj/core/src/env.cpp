#include "fsdpo/env.hpp"

#include <algorithm>
#include <cstdio>

#include "fsdpo/errors.hpp"
#include "fsdpo/rng.hpp"
#include "json.hpp"

namespace fsdpo::env {

using nlohmann::json;

std::string_view op_name(OpKind k) {
  switch (k) {
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
  }
  return "?";
}

std::optional<OpKind> op_from_name(std::string_view name) {
  if (name == "add") return OpKind::add;
  if (name == "sub") return OpKind::sub;
  if (name == "mul") return OpKind::mul;
  return std::nullopt;
}

int apply_op(const Op& op, int value, int modulus) {
  long long v = value;
  switch (op.kind) {
    case OpKind::add: v = v + op.operand; break;
    case OpKind::sub: v = v - op.operand; break;
    case OpKind::mul: v = v * op.operand; break;
  }
  long long m = v % modulus;
  if (m < 0) m += modulus;
  return static_cast<int>(m);
}

void GeneratorConfig::validate() const {
  if (modulus < 2) throw ConfigError("generator: modulus must be >= 2");
  if (depth < 1) throw ConfigError("generator: depth must be >= 1");
  if (op_kinds.empty()) throw ConfigError("generator: op set must be nonempty");
  for (std::size_t i = 0; i < op_kinds.size(); ++i)
    for (std::size_t j = i + 1; j < op_kinds.size(); ++j)
      if (op_kinds[i] == op_kinds[j]) throw ConfigError("generator: duplicate op kind");
}

std::string GeneratorConfig::canonical_string() const {
  std::string s = "v=" + std::to_string(modulus) + ";d=" + std::to_string(depth) + ";ops=";
  for (std::size_t i = 0; i < op_kinds.size(); ++i) {
    if (i) s += ',';
    s += op_name(op_kinds[i]);
  }
  return s;
}

int Solution::answer() const {
  if (steps.empty()) throw UsageError("solution has no steps");
  return steps.back().claimed_value;
}

std::vector<int> Solution::values() const {
  std::vector<int> out;
  out.reserve(steps.size());
  for (const Step& s : steps) out.push_back(s.claimed_value);
  return out;
}

Solution make_solution(const Problem& p, std::span<const int> claimed_values) {
  if (static_cast<int>(claimed_values.size()) != p.depth())
    throw UsageError("solution must have exactly one step per op");
  Solution s;
  s.problem_id = p.id;
  s.steps.reserve(claimed_values.size());
  for (std::size_t i = 0; i < claimed_values.size(); ++i)
    s.steps.push_back(Step{static_cast<int>(i), claimed_values[i]});
  return s;
}

Problem generate_problem(std::uint64_t rng_seed, const GeneratorConfig& cfg) {
  cfg.validate();
  Rng rng(rng_seed);
  Problem p;
  char buf[19];
  std::snprintf(buf, sizeof buf, "p%016llx", static_cast<unsigned long long>(rng_seed));
  p.id = buf;
  p.modulus = cfg.modulus;
  p.start_value = rng.uniform_int(0, cfg.modulus);
  p.ops.reserve(cfg.depth);
  for (int i = 0; i < cfg.depth; ++i) {
    const OpKind kind = cfg.op_kinds[rng.uniform_below(cfg.op_kinds.size())];
    const int operand = rng.uniform_int(1, cfg.modulus);
    p.ops.push_back(Op{kind, operand});
  }
  return p;
}

std::vector<int> gold_trace(const Problem& p) {
  std::vector<int> trace;
  trace.reserve(p.ops.size());
  int v = p.start_value;
  for (const Op& op : p.ops) {
    v = apply_op(op, v, p.modulus);
    trace.push_back(v);
  }
  return trace;
}

int gold_answer(const Problem& p) { return gold_trace(p).back(); }

Solution gold_solution(const Problem& p) {
  const std::vector<int> trace = gold_trace(p);
  return make_solution(p, trace);
}

bool check_answer(const Solution& s, const Problem& p) {
  if (s.problem_id != p.id)
    throw UsageError("check_answer: solution " + s.problem_id + " does not belong to " + p.id);
  return s.answer() == gold_answer(p);
}

namespace {

double enumerate_from(const StepDistributionFn& policy, const Problem& p,
                      std::vector<Step>& chain, int gold, std::uint64_t max_leaves,
                      std::uint64_t& leaves) {
  if (static_cast<int>(chain.size()) == p.depth()) {
    if (++leaves > max_leaves)
      throw EnumerationBoundError("enumerate_success_prob: more than " +
                                  std::to_string(max_leaves) + " leaves; shrink V or D");
    return chain.back().claimed_value == gold ? 1.0 : 0.0;
  }
  const auto dist = policy(p, chain);
  double prob = 0.0;
  for (const WeightedStep& ws : dist) {
    if (ws.prob == 0.0) continue;
    chain.push_back(Step{static_cast<int>(chain.size()), ws.value});
    prob += ws.prob * enumerate_from(policy, p, chain, gold, max_leaves, leaves);
    chain.pop_back();
  }
  return prob;
}

}  // namespace

double enumerate_success_prob(const StepDistributionFn& policy, const Problem& p,
                              std::span<const Step> prefix, std::uint64_t max_leaves) {
  const int gold = gold_answer(p);
  if (static_cast<int>(prefix.size()) == p.depth())
    return prefix.back().claimed_value == gold ? 1.0 : 0.0;
  std::vector<Step> chain(prefix.begin(), prefix.end());
  std::uint64_t leaves = 0;
  return enumerate_from(policy, p, chain, gold, max_leaves, leaves);
}

std::string to_json_line(const Problem& p) {
  json ops = json::array();
  for (const Op& op : p.ops) ops.push_back(json::array({op_name(op.kind), op.operand}));
  json j{{"id", p.id}, {"start", p.start_value}, {"ops", std::move(ops)}, {"V", p.modulus}};
  return j.dump();
}

Problem problem_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  Problem p;
  p.id = j.at("id").get<std::string>();
  p.start_value = j.at("start").get<int>();
  p.modulus = j.at("V").get<int>();
  for (const auto& jop : j.at("ops")) {
    const auto kind = op_from_name(jop.at(0).get<std::string>());
    if (!kind) throw UsageError("unknown op kind in problem record: " + jop.at(0).dump());
    p.ops.push_back(Op{*kind, jop.at(1).get<int>()});
  }
  return p;
}

std::string to_json_line(const Solution& s) {
  json j{{"problem_id", s.problem_id}, {"steps", s.values()}};
  return j.dump();
}

Solution solution_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  Solution s;
  s.problem_id = j.at("problem_id").get<std::string>();
  const auto values = j.at("steps").get<std::vector<int>>();
  s.steps.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    s.steps.push_back(Step{static_cast<int>(i), values[i]});
  return s;
}

ProblemIndex::ProblemIndex(std::vector<Problem> problems) : items_(std::move(problems)) {
  for (std::size_t i = 0; i < items_.size(); ++i) by_id_[items_[i].id] = i;
}

const Problem& ProblemIndex::at(const std::string& id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) throw UsageError("unknown problem id: " + id);
  return items_[it->second];
}

}  // namespace fsdpo::env
