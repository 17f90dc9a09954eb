#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fsdpo/decode.hpp"
#include "fsdpo/dpo.hpp"
#include "fsdpo/env.hpp"
#include "fsdpo/pairing.hpp"
#include "fsdpo/policy.hpp"
#include "fsdpo/prm.hpp"

namespace fsdpo::harness {

// Stands in for supervised fine-tuning: fits the policy to gold chains with
// a label-smoothed target so sampled solutions mix correct and incorrect
// steps instead of being uniformly right or uniformly random.
struct SftConfig {
  double target = 0.9;  // per-step probability mass on the correct candidate
  int epochs = 2;       // 0 leaves the policy at its random initialization
  double learning_rate = 0.4;
};

struct ExperimentConfig {
  env::GeneratorConfig generator{20, 4,
                                 {env::OpKind::add, env::OpKind::sub, env::OpKind::mul}};
  int branch = 8;
  double init_noise = 1.0;
  int train_problems = 260;
  int eval_problems = 2000;
  SftConfig sft;
  prm::SamplingBudget budget;
  double sample_temperature = 0.8;
  prm::PrmTrainConfig prm_train{.epochs = 24, .learning_rate = 2.0, .batch_size = 64,
                                .seed = 0};
  // beta and gamma follow the reference settings; the learning rate, batch
  // size, and epoch count are desk-scale values for the tabular policy
  dpo::DpoConfig dpo{.beta = 0.05, .gamma = 0.5, .learning_rate = 140.0, .epochs = 1,
                     .batch_size = 8};
  decode::DecodeConfig decode;
  pairing::PairSelection pair_selection = pairing::PairSelection::full_cross;
  int sweep_bon_samples = 15;
  std::uint64_t seed = 12345;
  std::string out_dir = "runs/default";
  int threads = 1;

  struct Stages {
    bool gen = true, sft = true, prm_data = true, prm = true, pairs = true, dpo = true,
         eval = true;
  } stages;

  policy::PolicyConfig policy_config() const;
  void validate() const;
  // Canonical key=value dump of everything that determines artifact content
  // (stage toggles and out_dir excluded); hashed into artifact headers.
  std::string canonical_string() const;
  std::uint64_t config_hash() const;
  static ExperimentConfig defaults() { return {}; }
};

// key = value lines, '#' comments; unknown keys raise UsageError.
void apply_config_kv(ExperimentConfig& cfg, const std::string& key, const std::string& value);
ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base);

// Artifact locations under one run directory.
struct Paths {
  std::filesystem::path root;
  explicit Paths(const ExperimentConfig& cfg) : root(cfg.out_dir) {}

  std::filesystem::path problems() const { return root / "problems.jsonl"; }
  std::filesystem::path eval_problems() const { return root / "problems.eval.jsonl"; }
  std::filesystem::path sft_policy() const { return root / "sft-policy.params"; }
  std::filesystem::path prm_data() const { return root / "prm-data.jsonl"; }
  std::filesystem::path prm() const { return root / "prm.params"; }
  std::filesystem::path pairs() const { return root / "pairs.jsonl"; }
  std::filesystem::path policy() const { return root / "policy.params"; }
  std::filesystem::path metrics() const { return root / "metrics"; }
  std::filesystem::path report() const { return root / "report.json"; }
};

// ----- reusable building blocks (stages call these; tests can too) -----

std::vector<env::Problem> generate_problem_set(const env::GeneratorConfig& generator,
                                               std::uint64_t master_seed,
                                               std::string_view stream, int count);

policy::PolicyParams run_sft(const policy::PolicyConfig& cfg,
                             std::span<const env::Problem> problems, const SftConfig& sft,
                             std::uint64_t master_seed,
                             std::vector<double>* epoch_loss = nullptr);

// params artifacts are one-line jsonl files with the usual header
void save_params(const std::filesystem::path& path, const std::string& artifact,
                 const std::string& params_json, const ExperimentConfig& cfg);
policy::PolicyParams load_policy_params(const std::filesystem::path& path);
prm::PrmParams load_prm_params(const std::filesystem::path& path);
std::vector<env::Problem> load_problems(const std::filesystem::path& path);

// ----- pipeline stages; each reads/writes artifacts under cfg.out_dir -----

void gen_problems_stage(const ExperimentConfig& cfg);
void sft_init_stage(const ExperimentConfig& cfg);
void build_prm_data_stage(const ExperimentConfig& cfg);
void train_prm_stage(const ExperimentConfig& cfg);
void build_pairs_stage(const ExperimentConfig& cfg);
void train_dpo_stage(const ExperimentConfig& cfg);

// Evaluates the requested strategies ("greedy,sc,bon,sbs" or "all") with the
// given policy artifact (empty = policy.params) and writes metrics/eval.csv.
std::vector<decode::AccuracyReport> eval_stage(const ExperimentConfig& cfg,
                                               const std::string& strategies = "all",
                                               const std::string& policy_artifact = "");

// Runs the enabled stages in order and writes report.json.
void run_pipeline(const ExperimentConfig& cfg);

// ----- sweep studies -----

struct GammaSweepRow {
  double gamma = 0.0;
  double accuracy = 0.0;  // greedy accuracy of the policy trained at this gamma
};

// One training run per gamma from the same frozen pairs and seed; writes
// metrics/sweep-gamma.csv.
std::vector<GammaSweepRow> sweep_gamma(const ExperimentConfig& cfg,
                                       std::span<const double> gammas);

struct NSweepRow {
  int n = 0;                     // 0 = simplified labels
  std::uint64_t cost_units = 0;  // label-construction work counter
  double bon_accuracy = 0.0;
};

// Builds a PRM dataset and trains a PRM per n, then scores best-of-n
// decoding with each; writes metrics/sweep-n.csv.
std::vector<NSweepRow> sweep_n(const ExperimentConfig& cfg, std::span<const int> ns);

}  // namespace fsdpo::harness
