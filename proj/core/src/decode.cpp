#include "fsdpo/decode.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <numeric>
#include <thread>

#include "fsdpo/errors.hpp"

namespace fsdpo::decode {

void DecodeConfig::validate() const {
  if (n_samples < 1) throw ConfigError("decode: n_samples must be >= 1");
  if (!(temperature > 0.0)) throw ConfigError("decode: temperature must be > 0");
  if (b2 < 1 || b1 < b2) throw ConfigError("decode: need b1 >= b2 >= 1");
  if (max_steps < 1) throw ConfigError("decode: max_steps must be >= 1");
}

int self_consistency(const policy::PolicyParams& pol, const env::Problem& p,
                     const DecodeConfig& cfg, Rng& rng) {
  cfg.validate();
  std::map<int, int> votes;  // ordered: ties resolve to the smaller answer
  for (int s = 0; s < cfg.n_samples; ++s)
    ++votes[policy::sample_solution(pol, p, cfg.temperature, rng).answer()];
  int best_answer = votes.begin()->first;
  int best_count = votes.begin()->second;
  for (const auto& [answer, count] : votes) {
    if (count > best_count) {
      best_answer = answer;
      best_count = count;
    }
  }
  return best_answer;
}

std::size_t best_of_n_select(std::span<const ScoredSolution> pool) {
  if (pool.empty()) throw UsageError("best_of_n_select: empty pool");
  std::size_t best = 0;
  for (std::size_t i = 1; i < pool.size(); ++i) {
    if (pool[i].min_reward > pool[best].min_reward ||
        (pool[i].min_reward == pool[best].min_reward &&
         pool[i].mean_reward > pool[best].mean_reward))
      best = i;
  }
  return best;
}

namespace {

ScoredSolution score_sample(const prm::PrmParams& prm, const env::Problem& p,
                            env::Solution y) {
  ScoredSolution scored;
  scored.rewards.reserve(y.steps.size());
  for (std::size_t i = 0; i < y.steps.size(); ++i)
    scored.rewards.push_back(
        prm::prm_score(prm, p, std::span(y.steps.data(), i), y.steps[i]));
  scored.min_reward = prm::min_aggregate(scored.rewards);
  scored.mean_reward =
      std::accumulate(scored.rewards.begin(), scored.rewards.end(), 0.0) /
      static_cast<double>(scored.rewards.size());
  scored.solution = std::move(y);
  return scored;
}

}  // namespace

ScoredSolution best_of_n(const policy::PolicyParams& pol, const prm::PrmParams& prm,
                         const env::Problem& p, const DecodeConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<ScoredSolution> pool;
  pool.reserve(cfg.n_samples);
  for (int s = 0; s < cfg.n_samples; ++s)
    pool.push_back(score_sample(prm, p, policy::sample_solution(pol, p, cfg.temperature, rng)));
  return pool[best_of_n_select(pool)];
}

namespace {

struct Beam {
  std::vector<env::Step> steps;
  std::vector<double> rewards;
  double score = 0.0;  // ranking score of the newest extension

  bool complete(const env::Problem& p) const {
    return static_cast<int>(steps.size()) == p.depth();
  }
};

double beam_rank_score(const Beam& b, bool min_over_prefix) {
  if (!min_over_prefix) return b.score;
  return *std::min_element(b.rewards.begin(), b.rewards.end());
}

// expand one beam by up to b1 sampled steps, deduplicated by claimed value
void expand_beam(const policy::PolicyParams& pol, const prm::PrmParams& prm,
                 const env::Problem& p, const DecodeConfig& cfg, const Beam& beam, Rng& rng,
                 std::vector<Beam>& out) {
  std::vector<int> seen;
  for (int s = 0; s < cfg.b1; ++s) {
    const env::Solution one =
        policy::sample_continuation(pol, p, beam.steps, cfg.temperature, rng);
    const env::Step next = one.steps[beam.steps.size()];
    if (std::find(seen.begin(), seen.end(), next.claimed_value) != seen.end()) continue;
    seen.push_back(next.claimed_value);
    Beam extended = beam;
    extended.steps.push_back(next);
    extended.rewards.push_back(prm::prm_score(prm, p, beam.steps, next));
    extended.score = extended.rewards.back();
    out.push_back(std::move(extended));
  }
}

}  // namespace

BeamResult step_beam_search(const policy::PolicyParams& pol, const prm::PrmParams& prm,
                            const env::Problem& p, const DecodeConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto keep_top = [&cfg](std::vector<Beam>& beams) {
    std::stable_sort(beams.begin(), beams.end(), [&cfg](const Beam& a, const Beam& b) {
      return beam_rank_score(a, cfg.min_over_prefix) > beam_rank_score(b, cfg.min_over_prefix);
    });
    if (static_cast<int>(beams.size()) > cfg.b2) beams.resize(cfg.b2);
  };

  // level 1: sample and score initial steps, keep the top b2
  std::vector<Beam> beams;
  expand_beam(pol, prm, p, cfg, Beam{}, rng, beams);
  keep_top(beams);

  int level = 1;
  while (level < cfg.max_steps) {
    const bool all_complete = std::all_of(beams.begin(), beams.end(),
                                          [&p](const Beam& b) { return b.complete(p); });
    if (all_complete) break;
    std::vector<Beam> pool;
    for (const Beam& beam : beams) {
      if (beam.complete(p)) {
        pool.push_back(beam);  // finished beams keep competing by their score
        continue;
      }
      expand_beam(pol, prm, p, cfg, beam, rng, pool);
    }
    keep_top(pool);
    beams = std::move(pool);
    ++level;
  }

  // best complete beam by final reward, else the best partial
  const Beam* best = nullptr;
  for (const Beam& b : beams)
    if (b.complete(p) && (!best || beam_rank_score(b, cfg.min_over_prefix) >
                                       beam_rank_score(*best, cfg.min_over_prefix)))
      best = &b;
  const bool complete = best != nullptr;
  if (!best) best = &beams.front();  // keep_top left them sorted

  BeamResult result;
  result.solution.problem_id = p.id;
  result.solution.steps = best->steps;
  result.complete = complete;
  result.final_reward = beam_rank_score(*best, cfg.min_over_prefix);
  return result;
}

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::greedy: return "greedy";
    case Strategy::self_consistency: return "sc";
    case Strategy::best_of_n: return "bon";
    case Strategy::step_beam_search: return "sbs";
  }
  return "?";
}

namespace {

int decode_answer(Strategy strategy, const policy::PolicyParams& pol,
                  const prm::PrmParams* prm, const env::Problem& p, const DecodeConfig& cfg,
                  Rng& rng) {
  switch (strategy) {
    case Strategy::greedy:
      return policy::greedy_decode(pol, p).answer();
    case Strategy::self_consistency:
      return self_consistency(pol, p, cfg, rng);
    case Strategy::best_of_n:
      return best_of_n(pol, *prm, p, cfg, rng).solution.answer();
    case Strategy::step_beam_search:
      return step_beam_search(pol, *prm, p, cfg, rng).solution.answer();
  }
  throw UsageError("unknown strategy");
}

}  // namespace

AccuracyReport evaluate_accuracy(Strategy strategy, const policy::PolicyParams& pol,
                                 const prm::PrmParams* prm,
                                 std::span<const env::Problem> problems,
                                 const DecodeConfig& cfg, std::uint64_t seed, int threads) {
  cfg.validate();
  if (problems.empty()) throw UsageError("evaluate_accuracy: no problems");
  if ((strategy == Strategy::best_of_n || strategy == Strategy::step_beam_search) && !prm)
    throw UsageError("evaluate_accuracy: strategy requires a PRM");

  const std::string stream = std::string("eval/") + std::string(strategy_name(strategy)) +
                             "/" + std::to_string(cfg.n_samples) + "-" +
                             std::to_string(cfg.b1) + "-" + std::to_string(cfg.b2);
  std::vector<int> correct(problems.size(), 0);

  const auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng(derive_seed(seed, stream, i));
      const int answer = decode_answer(strategy, pol, prm, problems[i], cfg, rng);
      correct[i] = answer == env::gold_answer(problems[i]) ? 1 : 0;
    }
  };

  const auto start = std::chrono::steady_clock::now();
  const int nthreads = std::max(1, threads);
  if (nthreads == 1 || problems.size() < 2) {
    worker(0, problems.size());
  } else {
    std::vector<std::thread> workers;
    const std::size_t chunk = (problems.size() + nthreads - 1) / nthreads;
    for (int t = 0; t < nthreads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(problems.size(), begin + chunk);
      if (begin >= end) break;
      workers.emplace_back(worker, begin, end);
    }
    for (std::thread& w : workers) w.join();
  }
  const auto elapsed = std::chrono::steady_clock::now() - start;

  AccuracyReport report;
  report.strategy = strategy;
  report.cfg = cfg;
  report.seed = seed;
  report.problems = static_cast<int>(problems.size());
  report.accuracy = std::accumulate(correct.begin(), correct.end(), 0) /
                    static_cast<double>(problems.size());
  report.mean_ms_per_problem =
      std::chrono::duration<double, std::milli>(elapsed).count() /
      static_cast<double>(problems.size());
  return report;
}

std::string report_csv_header() {
  return "strategy,n_samples,b1,b2,temperature,seed,problems,accuracy,mean_ms_per_problem";
}

std::string report_csv_row(const AccuracyReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%d,%d,%d,%g,%llu,%d,%.6f,%.3f",
                std::string(strategy_name(r.strategy)).c_str(), r.cfg.n_samples, r.cfg.b1,
                r.cfg.b2, r.cfg.temperature, static_cast<unsigned long long>(r.seed),
                r.problems, r.accuracy, r.mean_ms_per_problem);
  return buf;
}

}  // namespace fsdpo::decode
