#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fsdpo::env {

// Modular chain arithmetic: a problem is a start value and D operations
// applied in order, everything mod V. One operation == one reasoning step.

enum class OpKind : std::uint8_t { add, sub, mul };

std::string_view op_name(OpKind k);
std::optional<OpKind> op_from_name(std::string_view name);

struct Op {
  OpKind kind = OpKind::add;
  int operand = 1;  // in [1, V)
  friend bool operator==(const Op&, const Op&) = default;
};

int apply_op(const Op& op, int value, int modulus);

struct GeneratorConfig {
  int modulus = 10;  // V, arithmetic is mod V
  int depth = 4;     // D, number of ops == number of steps
  std::vector<OpKind> op_kinds = {OpKind::add, OpKind::sub, OpKind::mul};

  void validate() const;  // throws ConfigError
  std::string canonical_string() const;
  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

struct Problem {
  std::string id;
  int start_value = 0;
  std::vector<Op> ops;
  int modulus = 2;

  int depth() const { return static_cast<int>(ops.size()); }
  friend bool operator==(const Problem&, const Problem&) = default;
};

struct Step {
  int index = 0;          // 0-based position in the chain
  int claimed_value = 0;  // asserted value after ops[index], in [0, V)
  friend bool operator==(const Step&, const Step&) = default;
};

struct Solution {
  std::string problem_id;
  std::vector<Step> steps;

  // equals the final step's claimed value; steps must be nonempty
  int answer() const;
  std::vector<int> values() const;
  friend bool operator==(const Solution&, const Solution&) = default;
};

Solution make_solution(const Problem& p, std::span<const int> claimed_values);

// Deterministic: the same (seed, cfg) yields the same Problem, including id.
Problem generate_problem(std::uint64_t rng_seed, const GeneratorConfig& cfg);

// True intermediate values after each op.
std::vector<int> gold_trace(const Problem& p);
int gold_answer(const Problem& p);
Solution gold_solution(const Problem& p);

// Outcome check: final answer only, intermediate steps are not inspected.
// Throws UsageError if the solution belongs to a different problem.
bool check_answer(const Solution& s, const Problem& p);

// A policy seen abstractly as a per-state step distribution; probabilities
// over candidate claimed values given the prefix.
struct WeightedStep {
  int value = 0;
  double prob = 0.0;
};
using StepDistributionFn =
    std::function<std::vector<WeightedStep>(const Problem&, std::span<const Step>)>;

// Exact probability that continuing from `prefix` ends at the gold answer,
// by full enumeration of the distribution tree. Throws EnumerationBoundError
// when more than `max_leaves` leaves would be visited.
double enumerate_success_prob(const StepDistributionFn& policy, const Problem& p,
                              std::span<const Step> prefix,
                              std::uint64_t max_leaves = (1ull << 22));

// Line-delimited JSON: {"id","start","ops":[["add",4],...],"V"} and
// {"problem_id","steps":[int,...]}.
std::string to_json_line(const Problem& p);
Problem problem_from_json_line(const std::string& line);
std::string to_json_line(const Solution& s);
Solution solution_from_json_line(const std::string& line);

// Id -> problem lookup for training/eval loops.
class ProblemIndex {
 public:
  ProblemIndex() = default;
  explicit ProblemIndex(std::vector<Problem> problems);
  const Problem& at(const std::string& id) const;  // UsageError if absent
  const std::vector<Problem>& items() const { return items_; }

 private:
  std::vector<Problem> items_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

}  // namespace fsdpo::env
