// Command-line driver for the step-wise DPO laboratory: dataset generation,
// PRM training, preference-pair construction, policy training, evaluation,
// and the gamma / rollout-count sweep studies.

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fsdpo/errors.hpp"
#include "fsdpo/harness.hpp"

namespace {

using fsdpo::harness::ExperimentConfig;

struct CommonOpts {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_file, "key=value config file");
  cmd->add_option("--seed", opts.seed, "master seed for all derived RNG streams");
  cmd->add_option("--out", opts.out_dir, "run directory for artifacts");
  cmd->add_option("--threads", opts.threads, "worker threads for per-problem stages");
  cmd->add_option("--set", opts.sets, "override any config key, e.g. --set dpo.gamma=1.0")
      ->take_all();
}

ExperimentConfig resolve_config(const CommonOpts& opts) {
  ExperimentConfig cfg = ExperimentConfig::defaults();
  if (!opts.config_file.empty())
    cfg = fsdpo::harness::load_config_file(opts.config_file, cfg);
  for (const std::string& kv : opts.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw fsdpo::UsageError("--set expects key=value, got '" + kv + "'");
    fsdpo::harness::apply_config_kv(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.out_dir) cfg.out_dir = *opts.out_dir;
  if (opts.threads) cfg.threads = *opts.threads;
  return cfg;
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    const auto comma = csv.find(',', pos);
    const std::string item =
        csv.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!item.empty()) values.push_back(std::stod(item));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (values.empty()) throw fsdpo::UsageError("--values: empty list");
  return values;
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> values;
  for (const double v : parse_double_list(csv)) values.push_back(static_cast<int>(v));
  return values;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"step-wise-reward DPO laboratory on modular chain arithmetic"};
  app.require_subcommand(1);

  CommonOpts common;

  auto* gen = app.add_subcommand("gen-problems", "generate train/eval problem sets");
  add_common(gen, common);

  auto* sft = app.add_subcommand(
      "sft-init", "initialize the policy and fit it to gold chains (label-smoothed)");
  add_common(sft, common);

  auto* prm_data = app.add_subcommand("build-prm-data",
                                      "sample solutions and label steps for PRM training");
  add_common(prm_data, common);

  auto* train_prm = app.add_subcommand("train-prm", "train the process reward model");
  add_common(train_prm, common);

  auto* pairs = app.add_subcommand("build-pairs",
                                   "build step-wise-reward preference pairs");
  add_common(pairs, common);

  auto* train_dpo =
      app.add_subcommand("train-dpo", "train the policy with the step-wise weighted loss");
  add_common(train_dpo, common);
  std::optional<double> dpo_gamma;
  train_dpo->add_option("--gamma", dpo_gamma, "reward softmax temperature (0 = vanilla)");

  auto* eval = app.add_subcommand("eval", "evaluate decoding strategies on the eval set");
  add_common(eval, common);
  std::string strategies = "all";
  std::string policy_artifact;
  std::optional<int> n_samples, b1, b2;
  eval->add_option("--strategy", strategies, "greedy|sc|bon|sbs or comma list or all");
  eval->add_option("--policy", policy_artifact, "policy artifact (default policy.params)");
  eval->add_option("--n-samples", n_samples, "samples for sc/bon");
  eval->add_option("--b1", b1, "beam search sampling size");
  eval->add_option("--b2", b2, "beam width");

  auto* sweep_gamma = app.add_subcommand(
      "sweep-gamma", "train one policy per gamma from frozen pairs, report greedy accuracy");
  add_common(sweep_gamma, common);
  std::string gamma_values = "0,0.25,0.5,1,2,4";
  sweep_gamma->add_option("--values", gamma_values, "comma list of gamma values");

  auto* sweep_n = app.add_subcommand(
      "sweep-n", "PRM label-construction cost/quality across rollout counts");
  add_common(sweep_n, common);
  std::string n_values = "0,1,2,4,8";
  sweep_n->add_option("--values", n_values, "comma list of rollout counts (0 = simplified)");

  auto* pipeline = app.add_subcommand("pipeline", "run all stages in order");
  add_common(pipeline, common);
  std::vector<std::string> skip;
  pipeline->add_option("--skip", skip, "stages to skip (gen,sft,prm-data,prm,pairs,dpo,eval)")
      ->take_all();

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = resolve_config(common);

    if (gen->parsed()) {
      fsdpo::harness::gen_problems_stage(cfg);
      std::printf("wrote %s and %s\n",
                  fsdpo::harness::Paths(cfg).problems().string().c_str(),
                  fsdpo::harness::Paths(cfg).eval_problems().string().c_str());
    } else if (sft->parsed()) {
      fsdpo::harness::sft_init_stage(cfg);
      std::printf("wrote %s\n", fsdpo::harness::Paths(cfg).sft_policy().string().c_str());
    } else if (prm_data->parsed()) {
      fsdpo::harness::build_prm_data_stage(cfg);
      std::printf("wrote %s\n", fsdpo::harness::Paths(cfg).prm_data().string().c_str());
    } else if (train_prm->parsed()) {
      fsdpo::harness::train_prm_stage(cfg);
      std::printf("wrote %s\n", fsdpo::harness::Paths(cfg).prm().string().c_str());
    } else if (pairs->parsed()) {
      fsdpo::harness::build_pairs_stage(cfg);
      std::printf("wrote %s\n", fsdpo::harness::Paths(cfg).pairs().string().c_str());
    } else if (train_dpo->parsed()) {
      if (dpo_gamma) cfg.dpo.gamma = *dpo_gamma;
      fsdpo::harness::train_dpo_stage(cfg);
      std::printf("wrote %s\n", fsdpo::harness::Paths(cfg).policy().string().c_str());
    } else if (eval->parsed()) {
      if (n_samples) cfg.decode.n_samples = *n_samples;
      if (b1) cfg.decode.b1 = *b1;
      if (b2) cfg.decode.b2 = *b2;
      const auto reports = fsdpo::harness::eval_stage(cfg, strategies, policy_artifact);
      for (const auto& r : reports)
        std::printf("%-6s accuracy %.4f  (%d problems, %.2f ms/problem)\n",
                    std::string(fsdpo::decode::strategy_name(r.strategy)).c_str(),
                    r.accuracy, r.problems, r.mean_ms_per_problem);
    } else if (sweep_gamma->parsed()) {
      const auto values = parse_double_list(gamma_values);
      const auto rows = fsdpo::harness::sweep_gamma(cfg, values);
      for (const auto& row : rows)
        std::printf("gamma %-6g greedy accuracy %.4f\n", row.gamma, row.accuracy);
    } else if (sweep_n->parsed()) {
      const auto values = parse_int_list(n_values);
      const auto rows = fsdpo::harness::sweep_n(cfg, values);
      for (const auto& row : rows)
        std::printf("n %-3d cost %-10llu bon accuracy %.4f\n", row.n,
                    static_cast<unsigned long long>(row.cost_units), row.bon_accuracy);
    } else if (pipeline->parsed()) {
      for (const std::string& s : skip) {
        if (s == "gen") cfg.stages.gen = false;
        else if (s == "sft") cfg.stages.sft = false;
        else if (s == "prm-data") cfg.stages.prm_data = false;
        else if (s == "prm") cfg.stages.prm = false;
        else if (s == "pairs") cfg.stages.pairs = false;
        else if (s == "dpo") cfg.stages.dpo = false;
        else if (s == "eval") cfg.stages.eval = false;
        else throw fsdpo::UsageError("--skip: unknown stage '" + s + "'");
      }
      fsdpo::harness::run_pipeline(cfg);
      std::printf("wrote %s\n", fsdpo::harness::Paths(cfg).report().string().c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
