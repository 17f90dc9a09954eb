#include "fsdpo/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fsdpo/artifacts.hpp"
#include "fsdpo/errors.hpp"
#include "fsdpo/numerics.hpp"
#include "json.hpp"

namespace fsdpo::harness {

using nlohmann::json;

policy::PolicyConfig ExperimentConfig::policy_config() const {
  policy::PolicyConfig pc;
  pc.generator = generator;
  pc.branch = branch;
  pc.init_noise = init_noise;
  return pc;
}

void ExperimentConfig::validate() const {
  policy_config().validate();
  budget.validate();
  dpo.validate();
  decode.validate();
  if (train_problems < 1 || eval_problems < 1)
    throw ConfigError("config: problem counts must be >= 1");
  if (sft.epochs < 0) throw ConfigError("config: sft.epochs must be >= 0");
  if (!(sft.target > 0.0 && sft.target < 1.0))
    throw ConfigError("config: sft.target must be in (0,1)");
  if (!(sample_temperature > 0.0)) throw ConfigError("config: sample temperature must be > 0");
  if (threads < 1) throw ConfigError("config: threads must be >= 1");
  if (sweep_bon_samples < 1) throw ConfigError("config: sweep.bon_samples must be >= 1");
  if (out_dir.empty()) throw ConfigError("config: out_dir must be set");
}

std::string ExperimentConfig::canonical_string() const {
  std::ostringstream ss;
  ss << "env.modulus=" << generator.modulus << "\nenv.depth=" << generator.depth
     << "\nenv.ops=";
  for (std::size_t i = 0; i < generator.op_kinds.size(); ++i)
    ss << (i ? "," : "") << env::op_name(generator.op_kinds[i]);
  ss << "\npolicy.branch=" << branch << "\npolicy.init_noise=" << init_noise
     << "\ndata.train_problems=" << train_problems
     << "\ndata.eval_problems=" << eval_problems << "\nsft.target=" << sft.target
     << "\nsft.epochs=" << sft.epochs << "\nsft.lr=" << sft.learning_rate
     << "\nbudget.m=" << budget.m << "\nbudget.n=" << budget.n << "\nbudget.t=" << budget.t
     << "\nsample.temperature=" << sample_temperature << "\nprm.epochs=" << prm_train.epochs
     << "\nprm.lr=" << prm_train.learning_rate << "\nprm.batch_size=" << prm_train.batch_size
     << "\ndpo.beta=" << dpo.beta << "\ndpo.gamma=" << dpo.gamma << "\ndpo.lr="
     << dpo.learning_rate << "\ndpo.epochs=" << dpo.epochs << "\ndpo.batch_size="
     << dpo.batch_size << "\ndpo.adamw=" << (dpo.use_adamw ? 1 : 0)
     << "\ndpo.warmup_ratio=" << dpo.warmup_ratio
     << "\ndpo.linear_decay=" << (dpo.linear_decay ? 1 : 0)
     << "\ndecode.n_samples=" << decode.n_samples
     << "\ndecode.temperature=" << decode.temperature << "\ndecode.b1=" << decode.b1
     << "\ndecode.b2=" << decode.b2 << "\ndecode.max_steps=" << decode.max_steps
     << "\ndecode.min_over_prefix=" << (decode.min_over_prefix ? 1 : 0)
     << "\npairs.selection="
     << (pair_selection == pairing::PairSelection::full_cross ? "full_cross"
                                                              : "random_subset")
     << "\nsweep.bon_samples=" << sweep_bon_samples << "\n";
  return ss.str();
}

std::uint64_t ExperimentConfig::config_hash() const { return fnv1a64(canonical_string()); }

namespace {

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw UsageError("config: expected boolean, got '" + v + "'");
}

std::vector<env::OpKind> parse_ops(const std::string& v) {
  std::vector<env::OpKind> kinds;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto kind = env::op_from_name(item);
    if (!kind) throw UsageError("config: unknown op kind '" + item + "'");
    kinds.push_back(*kind);
  }
  if (kinds.empty()) throw UsageError("config: env.ops must list at least one op");
  return kinds;
}

}  // namespace

void apply_config_kv(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "seed") cfg.seed = std::stoull(value);
  else if (key == "out_dir") cfg.out_dir = value;
  else if (key == "threads") cfg.threads = std::stoi(value);
  else if (key == "env.modulus") cfg.generator.modulus = std::stoi(value);
  else if (key == "env.depth") cfg.generator.depth = std::stoi(value);
  else if (key == "env.ops") cfg.generator.op_kinds = parse_ops(value);
  else if (key == "policy.branch") cfg.branch = std::stoi(value);
  else if (key == "policy.init_noise") cfg.init_noise = std::stod(value);
  else if (key == "data.train_problems") cfg.train_problems = std::stoi(value);
  else if (key == "data.eval_problems") cfg.eval_problems = std::stoi(value);
  else if (key == "sft.target") cfg.sft.target = std::stod(value);
  else if (key == "sft.epochs") cfg.sft.epochs = std::stoi(value);
  else if (key == "sft.lr") cfg.sft.learning_rate = std::stod(value);
  else if (key == "budget.m") cfg.budget.m = std::stoi(value);
  else if (key == "budget.n") cfg.budget.n = std::stoi(value);
  else if (key == "budget.t") cfg.budget.t = std::stoi(value);
  else if (key == "sample.temperature") cfg.sample_temperature = std::stod(value);
  else if (key == "prm.epochs") cfg.prm_train.epochs = std::stoi(value);
  else if (key == "prm.lr") cfg.prm_train.learning_rate = std::stod(value);
  else if (key == "prm.batch_size") cfg.prm_train.batch_size = std::stoi(value);
  else if (key == "dpo.beta") cfg.dpo.beta = std::stod(value);
  else if (key == "dpo.gamma") cfg.dpo.gamma = std::stod(value);
  else if (key == "dpo.lr") cfg.dpo.learning_rate = std::stod(value);
  else if (key == "dpo.epochs") cfg.dpo.epochs = std::stoi(value);
  else if (key == "dpo.batch_size") cfg.dpo.batch_size = std::stoi(value);
  else if (key == "dpo.adamw") cfg.dpo.use_adamw = parse_bool(value);
  else if (key == "dpo.warmup_ratio") cfg.dpo.warmup_ratio = std::stod(value);
  else if (key == "dpo.linear_decay") cfg.dpo.linear_decay = parse_bool(value);
  else if (key == "decode.n_samples") cfg.decode.n_samples = std::stoi(value);
  else if (key == "decode.temperature") cfg.decode.temperature = std::stod(value);
  else if (key == "decode.b1") cfg.decode.b1 = std::stoi(value);
  else if (key == "decode.b2") cfg.decode.b2 = std::stoi(value);
  else if (key == "decode.max_steps") cfg.decode.max_steps = std::stoi(value);
  else if (key == "decode.min_over_prefix") cfg.decode.min_over_prefix = parse_bool(value);
  else if (key == "pairs.selection") {
    if (value == "full_cross") cfg.pair_selection = pairing::PairSelection::full_cross;
    else if (value == "random_subset")
      cfg.pair_selection = pairing::PairSelection::random_subset;
    else throw UsageError("config: unknown pairs.selection '" + value + "'");
  } else if (key == "sweep.bon_samples") cfg.sweep_bon_samples = std::stoi(value);
  else throw UsageError("config: unknown key '" + key + "'");
}

ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    if (eq == std::string::npos)
      throw UsageError("config " + path.string() + ":" + std::to_string(lineno) +
                       ": expected key = value");
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r\n");
      const auto e = s.find_last_not_of(" \t\r\n");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    apply_config_kv(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

std::vector<env::Problem> generate_problem_set(const env::GeneratorConfig& generator,
                                               std::uint64_t master_seed,
                                               std::string_view stream, int count) {
  std::vector<env::Problem> problems;
  problems.reserve(count);
  for (int i = 0; i < count; ++i)
    problems.push_back(
        env::generate_problem(derive_seed(master_seed, stream, i), generator));
  return problems;
}

policy::PolicyParams run_sft(const policy::PolicyConfig& cfg,
                             std::span<const env::Problem> problems, const SftConfig& sft,
                             std::uint64_t master_seed, std::vector<double>* epoch_loss) {
  policy::PolicyParams params =
      policy::init_params(cfg, derive_seed(master_seed, "policy-init"));
  const policy::FeatureMap map(cfg);
  const int b = cfg.branch;
  std::vector<double> target(b, (1.0 - sft.target) / static_cast<double>(b - 1));
  target[0] = sft.target;  // candidate 0 is the correct continuation

  for (int epoch = 0; epoch < sft.epochs; ++epoch) {
    double ce_sum = 0.0;
    std::size_t steps = 0;
    for (const env::Problem& p : problems) {
      const std::vector<int> trace = env::gold_trace(p);
      for (int i = 0; i < p.depth(); ++i) {
        const int prev = i == 0 ? p.start_value : trace[i - 1];
        const int state = map.state_id(i, prev, p.ops[i].kind);
        const std::span<const double> logits(params.theta.data() +
                                                 static_cast<std::size_t>(state) * b,
                                             static_cast<std::size_t>(b));
        const std::vector<double> probs = softmax(logits);
        for (int j = 0; j < b; ++j) {
          ce_sum -= target[j] * std::log(std::max(probs[j], 1e-300));
          params.theta[map.theta_index(state, j)] -=
              sft.learning_rate * (probs[j] - target[j]);
        }
        ++steps;
      }
    }
    if (epoch_loss) epoch_loss->push_back(ce_sum / static_cast<double>(steps));
  }
  return params;
}

void save_params(const std::filesystem::path& path, const std::string& artifact,
                 const std::string& params_json, const ExperimentConfig& cfg) {
  ArtifactHeader header{artifact, 1, cfg.seed, cfg.config_hash(), {}};
  write_jsonl(path, header, {params_json});
}

policy::PolicyParams load_policy_params(const std::filesystem::path& path) {
  ArtifactHeader header;
  const auto lines = read_jsonl(path, "", &header);
  if (header.artifact != "policy-params" && header.artifact != "sft-policy-params")
    throw UsageError(path.string() + " is not a policy params artifact");
  if (lines.size() != 1) throw UsageError(path.string() + ": expected one params record");
  return policy::params_from_json(lines[0]);
}

prm::PrmParams load_prm_params(const std::filesystem::path& path) {
  ArtifactHeader header;
  const auto lines = read_jsonl(path, "", &header);
  if (header.artifact != "prm-params")
    throw UsageError(path.string() + " is not a prm params artifact");
  if (lines.size() != 1) throw UsageError(path.string() + ": expected one params record");
  return prm::prm_from_json(lines[0]);
}

std::vector<env::Problem> load_problems(const std::filesystem::path& path) {
  const auto lines = read_jsonl(path, "problems");
  std::vector<env::Problem> problems;
  problems.reserve(lines.size());
  for (const std::string& line : lines) problems.push_back(env::problem_from_json_line(line));
  return problems;
}

void gen_problems_stage(const ExperimentConfig& cfg) {
  cfg.validate();
  const Paths paths(cfg);
  const ArtifactHeader header{"problems", 1, cfg.seed, cfg.config_hash(), {}};
  std::vector<std::string> lines;
  for (const env::Problem& p :
       generate_problem_set(cfg.generator, cfg.seed, "problems/train", cfg.train_problems))
    lines.push_back(env::to_json_line(p));
  write_jsonl(paths.problems(), header, lines);

  lines.clear();
  for (const env::Problem& p :
       generate_problem_set(cfg.generator, cfg.seed, "problems/eval", cfg.eval_problems))
    lines.push_back(env::to_json_line(p));
  write_jsonl(paths.eval_problems(), header, lines);
}

void sft_init_stage(const ExperimentConfig& cfg) {
  cfg.validate();
  const Paths paths(cfg);
  const auto problems = load_problems(paths.problems());
  std::vector<double> epoch_loss;
  const policy::PolicyParams params =
      run_sft(cfg.policy_config(), problems, cfg.sft, cfg.seed, &epoch_loss);
  save_params(paths.sft_policy(), "sft-policy-params", policy::to_json(params), cfg);

  std::vector<std::string> rows;
  for (std::size_t e = 0; e < epoch_loss.size(); ++e) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%zu,%.12g", e, epoch_loss[e]);
    rows.emplace_back(buf);
  }
  write_csv(paths.metrics() / "sft-train.csv",
            ArtifactHeader{"sft-train", 1, cfg.seed, cfg.config_hash(), {}},
            "epoch,mean_cross_entropy", rows);
}

void build_prm_data_stage(const ExperimentConfig& cfg) {
  cfg.validate();
  const Paths paths(cfg);
  const auto problems = load_problems(paths.problems());
  const policy::PolicyParams pol = load_policy_params(paths.sft_policy());
  prm::LabelCostCounters counters;
  const auto dataset = prm::build_prm_dataset(pol, problems, cfg.budget,
                                              cfg.sample_temperature, cfg.seed, &counters);
  ArtifactHeader header{"prm-data", 1, cfg.seed, cfg.config_hash(), {}};
  header.extra["m"] = std::to_string(cfg.budget.m);
  header.extra["n"] = std::to_string(cfg.budget.n);
  header.extra["work_units"] = std::to_string(counters.work_units);
  header.extra["simulations"] = std::to_string(counters.simulations);
  header.extra["sampled_steps"] = std::to_string(counters.sampled_steps);
  std::vector<std::string> lines;
  lines.reserve(dataset.size());
  for (const prm::PrmExample& ex : dataset) lines.push_back(prm::to_json_line(ex));
  write_jsonl(paths.prm_data(), header, lines);
}

void train_prm_stage(const ExperimentConfig& cfg) {
  cfg.validate();
  const Paths paths(cfg);
  const env::ProblemIndex problems(load_problems(paths.problems()));
  const auto lines = read_jsonl(paths.prm_data(), "prm-data");
  std::vector<prm::PrmExample> dataset;
  dataset.reserve(lines.size());
  for (const std::string& line : lines) dataset.push_back(prm::example_from_json_line(line));

  prm::PrmParams model = prm::init_prm(cfg.policy_config());
  prm::PrmTrainConfig tc = cfg.prm_train;
  tc.seed = derive_seed(cfg.seed, "prm-shuffle");
  const prm::PrmTrainReport report = prm::train_prm(model, dataset, problems, tc);
  save_params(paths.prm(), "prm-params", prm::to_json(model), cfg);

  std::vector<std::string> rows;
  {
    char buf[64];
    std::snprintf(buf, sizeof buf, "init,%.12g", report.initial_loss);
    rows.emplace_back(buf);
    for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
      std::snprintf(buf, sizeof buf, "%zu,%.12g", e, report.epoch_loss[e]);
      rows.emplace_back(buf);
    }
  }
  write_csv(paths.metrics() / "prm-train.csv",
            ArtifactHeader{"prm-train", 1, cfg.seed, cfg.config_hash(), {}},
            "epoch,mean_bce", rows);
}

void build_pairs_stage(const ExperimentConfig& cfg) {
  cfg.validate();
  const Paths paths(cfg);
  const auto problems = load_problems(paths.problems());
  const policy::PolicyParams pol = load_policy_params(paths.sft_policy());
  const prm::PrmParams model = load_prm_params(paths.prm());

  pairing::PairBuildConfig pc;
  pc.budget = cfg.budget;
  pc.temperature = cfg.sample_temperature;
  pc.selection = cfg.pair_selection;

  std::vector<std::string> lines;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    Rng rng(derive_seed(cfg.seed, "pairs", i));
    const pairing::PairBuildResult result =
        pairing::build_pairs(pol, model, problems[i], pc, rng);
    if (result.skipped) ++skipped;
    for (const pairing::PreferencePair& pair : result.pairs)
      lines.push_back(pairing::to_json_line(pair));
  }
  ArtifactHeader header{"pairs", 1, cfg.seed, cfg.config_hash(), {}};
  header.extra["skipped_problems"] = std::to_string(skipped);
  header.extra["pair_count"] = std::to_string(lines.size());
  write_jsonl(paths.pairs(), header, lines);
}

namespace {

std::vector<pairing::PreferencePair> load_pairs(const std::filesystem::path& path) {
  const auto lines = read_jsonl(path, "pairs");
  std::vector<pairing::PreferencePair> pairs;
  pairs.reserve(lines.size());
  for (const std::string& line : lines) pairs.push_back(pairing::pair_from_json_line(line));
  return pairs;
}

dpo::TrainReport train_policy_on_pairs(policy::PolicyParams& pol,
                                       const env::ProblemIndex& problems,
                                       std::span<const pairing::PreferencePair> pairs,
                                       const ExperimentConfig& cfg, double gamma) {
  dpo::DpoConfig dc = cfg.dpo;
  dc.gamma = gamma;
  dc.seed = derive_seed(cfg.seed, "dpo-shuffle");
  const policy::ReferencePolicy ref = pol;  // frozen snapshot at training start
  return dpo::train_full_step_dpo(pol, ref, problems, pairs, dc);
}

}  // namespace

void train_dpo_stage(const ExperimentConfig& cfg) {
  cfg.validate();
  const Paths paths(cfg);
  const env::ProblemIndex problems(load_problems(paths.problems()));
  const auto pairs = load_pairs(paths.pairs());
  policy::PolicyParams pol = load_policy_params(paths.sft_policy());
  const dpo::TrainReport report =
      train_policy_on_pairs(pol, problems, pairs, cfg, cfg.dpo.gamma);
  save_params(paths.policy(), "policy-params", policy::to_json(pol), cfg);

  std::vector<std::string> lines;
  lines.reserve(report.history.size());
  for (const dpo::BatchMetrics& m : report.history)
    lines.push_back(dpo::metrics_json_line(m));
  write_jsonl(paths.metrics() / "dpo-train.jsonl",
              ArtifactHeader{"dpo-train", 1, cfg.seed, cfg.config_hash(), {}}, lines);
}

namespace {

decode::Strategy strategy_from_name(const std::string& name) {
  if (name == "greedy") return decode::Strategy::greedy;
  if (name == "sc") return decode::Strategy::self_consistency;
  if (name == "bon") return decode::Strategy::best_of_n;
  if (name == "sbs") return decode::Strategy::step_beam_search;
  throw UsageError("unknown strategy '" + name + "' (greedy|sc|bon|sbs)");
}

}  // namespace

std::vector<decode::AccuracyReport> eval_stage(const ExperimentConfig& cfg,
                                               const std::string& strategies,
                                               const std::string& policy_artifact) {
  cfg.validate();
  const Paths paths(cfg);
  const auto problems = load_problems(paths.eval_problems());
  const std::filesystem::path policy_path =
      policy_artifact.empty() ? paths.policy() : std::filesystem::path(policy_artifact);
  const policy::PolicyParams pol = load_policy_params(policy_path);

  std::vector<std::string> names;
  if (strategies == "all" || strategies.empty()) {
    names = {"greedy", "sc", "bon", "sbs"};
  } else {
    std::stringstream ss(strategies);
    std::string item;
    while (std::getline(ss, item, ',')) names.push_back(item);
  }

  prm::PrmParams model;
  bool prm_loaded = false;
  std::vector<decode::AccuracyReport> reports;
  std::vector<std::string> rows;
  for (const std::string& name : names) {
    const decode::Strategy strategy = strategy_from_name(name);
    const prm::PrmParams* prm_ptr = nullptr;
    if (strategy == decode::Strategy::best_of_n ||
        strategy == decode::Strategy::step_beam_search) {
      if (!prm_loaded) {
        model = load_prm_params(paths.prm());
        prm_loaded = true;
      }
      prm_ptr = &model;
    }
    const decode::AccuracyReport report = decode::evaluate_accuracy(
        strategy, pol, prm_ptr, problems, cfg.decode, cfg.seed, cfg.threads);
    rows.push_back(decode::report_csv_row(report));
    reports.push_back(report);
  }
  write_csv(paths.metrics() / "eval.csv",
            ArtifactHeader{"eval", 1, cfg.seed, cfg.config_hash(), {}},
            decode::report_csv_header(), rows);
  return reports;
}

void run_pipeline(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.stages.gen) gen_problems_stage(cfg);
  if (cfg.stages.sft) sft_init_stage(cfg);
  if (cfg.stages.prm_data) build_prm_data_stage(cfg);
  if (cfg.stages.prm) train_prm_stage(cfg);
  if (cfg.stages.pairs) build_pairs_stage(cfg);
  if (cfg.stages.dpo) train_dpo_stage(cfg);

  json report;
  report["seed"] = std::to_string(cfg.seed);
  char hash[19];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(cfg.config_hash()));
  report["config_hash"] = hash;

  if (cfg.stages.eval) {
    const auto reports = eval_stage(cfg, "all");
    json eval = json::object();
    for (const decode::AccuracyReport& r : reports)
      eval[std::string(decode::strategy_name(r.strategy))] = r.accuracy;
    report["eval"] = std::move(eval);
  }

  const Paths paths(cfg);
  ArtifactHeader prm_header;
  if (std::filesystem::exists(paths.prm_data())) {
    read_jsonl(paths.prm_data(), "prm-data", &prm_header);
    json cost = json::object();
    for (const auto& [k, v] : prm_header.extra) cost[k] = v;
    report["prm_data"] = std::move(cost);
  }
  if (std::filesystem::exists(paths.pairs())) {
    ArtifactHeader pairs_header;
    read_jsonl(paths.pairs(), "pairs", &pairs_header);
    json stats = json::object();
    for (const auto& [k, v] : pairs_header.extra) stats[k] = v;
    report["pairs"] = std::move(stats);
  }
  write_text(paths.report(), report.dump(2) + "\n");
}

std::vector<GammaSweepRow> sweep_gamma(const ExperimentConfig& cfg,
                                       std::span<const double> gammas) {
  cfg.validate();
  const Paths paths(cfg);
  const env::ProblemIndex problems(load_problems(paths.problems()));
  const auto eval_problems = load_problems(paths.eval_problems());
  const auto pairs = load_pairs(paths.pairs());
  const policy::PolicyParams sft_pol = load_policy_params(paths.sft_policy());

  std::vector<GammaSweepRow> rows;
  std::vector<std::string> csv_rows;
  for (const double gamma : gammas) {
    policy::PolicyParams pol = sft_pol;
    train_policy_on_pairs(pol, problems, pairs, cfg, gamma);
    const decode::AccuracyReport report =
        decode::evaluate_accuracy(decode::Strategy::greedy, pol, nullptr, eval_problems,
                                  cfg.decode, cfg.seed, cfg.threads);
    rows.push_back(GammaSweepRow{gamma, report.accuracy});
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g,%.6f", gamma, report.accuracy);
    csv_rows.emplace_back(buf);
  }
  write_csv(paths.metrics() / "sweep-gamma.csv",
            ArtifactHeader{"sweep-gamma", 1, cfg.seed, cfg.config_hash(), {}},
            "gamma,greedy_accuracy", csv_rows);
  return rows;
}

std::vector<NSweepRow> sweep_n(const ExperimentConfig& cfg, std::span<const int> ns) {
  cfg.validate();
  const Paths paths(cfg);
  const auto train_problems = load_problems(paths.problems());
  const env::ProblemIndex problem_index{std::vector<env::Problem>(train_problems)};
  const auto eval_problems = load_problems(paths.eval_problems());
  const policy::PolicyParams gen_pol = load_policy_params(paths.sft_policy());
  // decode with the preference-trained policy when present, else the SFT one
  const policy::PolicyParams eval_pol = std::filesystem::exists(paths.policy())
                                            ? load_policy_params(paths.policy())
                                            : gen_pol;

  decode::DecodeConfig dc = cfg.decode;
  dc.n_samples = cfg.sweep_bon_samples;

  std::vector<NSweepRow> rows;
  std::vector<std::string> csv_rows;
  for (const int n : ns) {
    prm::SamplingBudget budget = cfg.budget;
    budget.n = n;
    prm::LabelCostCounters counters;
    const auto dataset = prm::build_prm_dataset(gen_pol, train_problems, budget,
                                                cfg.sample_temperature, cfg.seed, &counters);
    prm::PrmParams model = prm::init_prm(cfg.policy_config());
    prm::PrmTrainConfig tc = cfg.prm_train;
    tc.seed = derive_seed(cfg.seed, "prm-shuffle");
    prm::train_prm(model, dataset, problem_index, tc);

    const decode::AccuracyReport report =
        decode::evaluate_accuracy(decode::Strategy::best_of_n, eval_pol, &model,
                                  eval_problems, dc, cfg.seed, cfg.threads);
    rows.push_back(NSweepRow{n, counters.work_units, report.accuracy});
    char buf[96];
    std::snprintf(buf, sizeof buf, "%d,%llu,%.6f", n,
                  static_cast<unsigned long long>(counters.work_units), report.accuracy);
    csv_rows.emplace_back(buf);
  }
  write_csv(paths.metrics() / "sweep-n.csv",
            ArtifactHeader{"sweep-n", 1, cfg.seed, cfg.config_hash(), {}},
            "n,cost_units,bon_accuracy", csv_rows);
  return rows;
}

}  // namespace fsdpo::harness
