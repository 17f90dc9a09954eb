#include "fsdpo/pairing.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "fsdpo/errors.hpp"
#include "json.hpp"

namespace fsdpo::pairing {

using nlohmann::json;

StepRewardTrace score_solution(const prm::PrmParams& prm, const env::Problem& p,
                               const env::Solution& y) {
  StepRewardTrace trace;
  trace.solution = y;
  trace.rewards.reserve(y.steps.size());
  for (std::size_t i = 0; i < y.steps.size(); ++i)
    trace.rewards.push_back(
        prm::prm_score(prm, p, std::span(y.steps.data(), i), y.steps[i]));
  trace.mean_reward =
      std::accumulate(trace.rewards.begin(), trace.rewards.end(), 0.0) /
      static_cast<double>(trace.rewards.size());
  return trace;
}

PairBuildResult select_pairs(const env::Problem& p, std::vector<StepRewardTrace> traces,
                             const prm::SamplingBudget& budget, PairSelection selection,
                             Rng& rng) {
  budget.validate();
  PairBuildResult result;
  result.unique_solutions = traces.size();

  std::vector<std::size_t> correct, incorrect;
  for (std::size_t i = 0; i < traces.size(); ++i)
    (env::check_answer(traces[i].solution, p) ? correct : incorrect).push_back(i);
  result.correct = correct.size();
  result.incorrect = incorrect.size();

  if (correct.empty() || incorrect.empty()) {
    result.skipped = true;
    result.diagnostic = "problem " + p.id + " skipped: " +
                        (correct.empty() ? "no correct" : "no incorrect") +
                        " solutions among " + std::to_string(traces.size()) + " unique";
    return result;
  }

  const auto by_reward = [&traces](bool descending) {
    return [&traces, descending](std::size_t a, std::size_t b) {
      if (traces[a].mean_reward != traces[b].mean_reward)
        return descending ? traces[a].mean_reward > traces[b].mean_reward
                          : traces[a].mean_reward < traces[b].mean_reward;
      return traces[a].logprob > traces[b].logprob;  // then first-seen (stable)
    };
  };
  std::stable_sort(correct.begin(), correct.end(), by_reward(true));
  std::stable_sort(incorrect.begin(), incorrect.end(), by_reward(false));

  const std::size_t top = std::min<std::size_t>(budget.t, correct.size());
  const std::size_t bottom = std::min<std::size_t>(budget.t, incorrect.size());

  std::vector<std::pair<std::size_t, std::size_t>> cross;
  cross.reserve(top * bottom);
  for (std::size_t w = 0; w < top; ++w)
    for (std::size_t l = 0; l < bottom; ++l) cross.emplace_back(correct[w], incorrect[l]);

  if (selection == PairSelection::random_subset) {
    rng.shuffle(std::span(cross));
    const std::size_t keep = std::min<std::size_t>(
        cross.size(), static_cast<std::size_t>(budget.t) * budget.t);
    cross.resize(keep);
  }

  result.pairs.reserve(cross.size());
  for (const auto& [w, l] : cross) {
    PreferencePair pair;
    pair.problem_id = p.id;
    pair.preferred = traces[w];
    pair.dispreferred = traces[l];
    result.pairs.push_back(std::move(pair));
  }
  return result;
}

PairBuildResult build_pairs(const policy::PolicyParams& pol, const prm::PrmParams& prm,
                            const env::Problem& p, const PairBuildConfig& cfg, Rng& rng) {
  cfg.budget.validate();
  std::vector<env::Solution> unique;
  std::unordered_set<std::string> seen;
  for (int s = 0; s < cfg.budget.m; ++s) {
    env::Solution y = policy::sample_solution(pol, p, cfg.temperature, rng);
    std::string key;
    for (const env::Step& st : y.steps) {
      key += std::to_string(st.claimed_value);
      key += ',';
    }
    if (seen.insert(std::move(key)).second) unique.push_back(std::move(y));
  }
  std::vector<StepRewardTrace> traces;
  traces.reserve(unique.size());
  for (const env::Solution& y : unique) {
    StepRewardTrace t = score_solution(prm, p, y);
    t.logprob = policy::solution_logprob(pol, p, y);
    traces.push_back(std::move(t));
  }
  PairBuildResult result = select_pairs(p, std::move(traces), cfg.budget, cfg.selection, rng);
  result.sampled = cfg.budget.m;
  return result;
}

namespace {

json trace_to_json(const StepRewardTrace& t) {
  return json{{"steps", t.solution.values()},
              {"rewards", t.rewards},
              {"mean_reward", t.mean_reward},
              {"logprob", t.logprob}};
}

StepRewardTrace trace_from_json(const json& j, const std::string& problem_id) {
  StepRewardTrace t;
  t.solution.problem_id = problem_id;
  const auto values = j.at("steps").get<std::vector<int>>();
  for (std::size_t i = 0; i < values.size(); ++i)
    t.solution.steps.push_back(env::Step{static_cast<int>(i), values[i]});
  t.rewards = j.at("rewards").get<std::vector<double>>();
  if (t.rewards.size() != t.solution.steps.size())
    throw UsageError("preference pair record: rewards/steps length mismatch");
  t.mean_reward = j.at("mean_reward").get<double>();
  t.logprob = j.at("logprob").get<double>();
  return t;
}

}  // namespace

std::string to_json_line(const PreferencePair& pair) {
  json j{{"problem_id", pair.problem_id},
         {"w", trace_to_json(pair.preferred)},
         {"l", trace_to_json(pair.dispreferred)}};
  return j.dump();
}

PreferencePair pair_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  PreferencePair pair;
  pair.problem_id = j.at("problem_id").get<std::string>();
  pair.preferred = trace_from_json(j.at("w"), pair.problem_id);
  pair.dispreferred = trace_from_json(j.at("l"), pair.problem_id);
  return pair;
}

}  // namespace fsdpo::pairing
