#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfsl/checkpoint.hpp"
#include "cfsl/corpus.hpp"
#include "cfsl/error.hpp"
#include "cfsl/fewshot.hpp"
#include "cfsl/synthgen.hpp"
#include "cfsl/trainer.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cfsl::cli {

namespace {

bool log_enabled() {
  const char* level = std::getenv("CFSL_LOG");
  return level == nullptr || std::string(level) != "quiet";
}

void log_line(const std::string& msg) {
  if (log_enabled()) std::cerr << msg << '\n';
}

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_loss_csv(const std::vector<double>& trajectory, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < trajectory.size(); ++i)
    out << (i + 1) << ',' << fmt_double(trajectory[i]) << '\n';
}

json read_manifest(const fs::path& prepared) {
  std::ifstream in(prepared / "manifest.json", std::ios::binary);
  if (!in) throw IoError("cannot open manifest in " + prepared.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("manifest parse error: " + std::string(e.what()));
  }
}

struct PreparedData {
  LabeledCorpus train;
  LabeledCorpus test;
  Vocabulary vocab;
  std::vector<SupportSet> supports;
  json manifest;
};

PreparedData load_prepared(const fs::path& prepared) {
  PreparedData data;
  data.manifest = read_manifest(prepared);
  data.train = load_labeled_corpus((prepared / "train_tokens.jsonl").string(), true);
  data.test = load_labeled_corpus((prepared / "test_tokens.jsonl").string());
  data.vocab = Vocabulary::load_tsv((prepared / "vocab.tsv").string());
  for (const auto& file : data.manifest.at("files").at("support_sets"))
    data.supports.push_back(
        load_support_set((prepared / file.get<std::string>()).string(), data.test));
  return data;
}

int cmd_synth(const RunConfig& cfg, const std::string& out_dir) {
  if (!cfg.has_synth) throw IoError("config has no \"synth\" section");
  fs::create_directories(out_dir);
  auto [train, test] = generate(cfg.synth);
  save_raw_corpus(train, (fs::path(out_dir) / "train.jsonl").string());
  save_raw_corpus(test, (fs::path(out_dir) / "test.jsonl").string());
  log_line("synth: wrote " + out_dir + "/train.jsonl (" +
           std::to_string(train.documents.size()) + " docs), test.jsonl (" +
           std::to_string(test.documents.size()) + " docs)");
  return 0;
}

int cmd_prepare(const RunConfig& cfg, const std::string& out_dir) {
  const PrepareConfig& prep = cfg.prepare;
  if (cfg.paths.train_corpus.empty() || cfg.paths.test_corpus.empty())
    throw IoError("config: paths.train_corpus and paths.test_corpus are required");
  fs::create_directories(out_dir);

  RawCorpus raw_train = load_corpus(cfg.paths.train_corpus);
  RawCorpus raw_test = load_corpus(cfg.paths.test_corpus);

  if (prep.partition_chunk_size > 0)
    raw_train = partition_corpus(raw_train, prep.partition_chunk_size,
                                 prep.partition_max_chunks);

  ConstraintSpec constraint{prep.m_tshot, derive_seed(prep.seed, 1)};
  raw_train = apply_tshot_constraint(raw_train, constraint);

  Vocabulary vocab =
      build_vocabulary({&raw_train, &raw_test}, prep.vocab_min_count, prep.vocab_max_size);
  LabeledCorpus train = tokenize_corpus(raw_train, vocab, prep.max_tokens);
  LabeledCorpus test = tokenize_corpus(raw_test, vocab, prep.max_tokens);

  const fs::path out(out_dir);
  save_labeled_corpus(train, (out / "train_tokens.jsonl").string());
  save_labeled_corpus(test, (out / "test_tokens.jsonl").string());
  vocab.dump_tsv((out / "vocab.tsv").string());

  int n_way = prep.n_way > 0 ? prep.n_way : static_cast<int>(test.classes.size());
  std::vector<std::uint64_t> support_seeds;
  std::vector<std::string> support_files;
  for (int i = 0; i < prep.n_support_sets; ++i) {
    EpisodeSpec episode;
    episode.n_way = n_way;
    episode.k_shot = prep.k_shot;
    episode.queries_per_class = 0;  // support sampling; queries unused here
    episode.seed = derive_seed(prep.seed, 1000 + static_cast<std::uint64_t>(i));
    auto [support, query] = sample_support_query(test, episode);
    std::string file = "support_" + std::to_string(i) + ".json";
    save_support_set(support, (out / file).string());
    support_seeds.push_back(episode.seed);
    support_files.push_back(file);
  }

  json manifest;
  manifest["version"] = 1;
  manifest["m_tshot"] = prep.m_tshot;
  manifest["seed"] = prep.seed;
  manifest["constraint_seed"] = constraint.seed;
  manifest["max_tokens"] = prep.max_tokens;
  manifest["vocab_min_count"] = prep.vocab_min_count;
  manifest["vocab_max_size"] = prep.vocab_max_size;
  manifest["partition_chunk_size"] = prep.partition_chunk_size;
  manifest["partition_max_chunks"] = prep.partition_max_chunks;
  manifest["n_way"] = n_way;
  manifest["k_shot"] = prep.k_shot;
  manifest["support_seeds"] = support_seeds;
  manifest["files"] = {{"train", "train_tokens.jsonl"},
                       {"test", "test_tokens.jsonl"},
                       {"vocab", "vocab.tsv"},
                       {"support_sets", support_files}};
  std::ofstream mf(out / "manifest.json", std::ios::binary);
  if (!mf) throw IoError("cannot write manifest");
  mf << manifest.dump(2) << '\n';

  log_line("prepare: " + std::to_string(train.documents.size()) + " train docs, " +
           std::to_string(test.documents.size()) + " test docs, vocab " +
           std::to_string(vocab.size()) + ", " + std::to_string(prep.n_support_sets) +
           " support sets -> " + out_dir);
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& prepared, int support_index,
              const std::string& out_dir_flag) {
  PreparedData data = load_prepared(prepared);
  const std::string out_dir = out_dir_flag.empty() ? prepared : out_dir_flag;
  fs::create_directories(out_dir);

  std::vector<int> indices;
  if (support_index >= 0) {
    if (static_cast<std::size_t>(support_index) >= data.supports.size())
      throw IoError("support index " + std::to_string(support_index) + " out of range");
    indices.push_back(support_index);
  } else {
    indices.resize(data.supports.size());
    std::iota(indices.begin(), indices.end(), 0);
  }

  const std::string objective = objective_to_string(cfg.train.objective);
  for (int i : indices) {
    MergedTrainingSet merged = merge_training_set(data.train, data.supports[static_cast<std::size_t>(i)]);
    TrainedModel model = train(cfg.train, merged, data.vocab);
    fs::path base(out_dir);
    std::string stem = "model_" + objective + "_s" + std::to_string(i);
    save_checkpoint(model, (base / (stem + ".c2v")).string());
    write_loss_csv(model.loss_trajectory, (base / ("loss_" + objective + "_s" +
                                                   std::to_string(i) + ".csv")).string());
    log_line("train: " + stem + ".c2v (final epoch loss " +
             fmt_double(model.loss_trajectory.back()) + ")");
  }
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& prepared,
             const std::vector<std::string>& checkpoints, const std::string& out_dir_flag,
             const std::string& prefix) {
  PreparedData data = load_prepared(prepared);
  const std::string out_dir = out_dir_flag.empty() ? prepared : out_dir_flag;
  fs::create_directories(out_dir);
  if (checkpoints.empty()) throw IoError("at least one --checkpoint is required");

  EvalReport report;
  if (cfg.eval.metric == EvalMetric::Full) {
    if (checkpoints.size() == 1) {
      TrainedModel model = load_checkpoint(checkpoints[0]);
      report = evaluate_full(model, data.supports, data.test, cfg.eval.mode);
    } else if (checkpoints.size() == data.supports.size()) {
      // One model per support set: score each pair, then aggregate.
      report.metric = EvalMetric::Full;
      report.mode = cfg.eval.mode;
      for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        TrainedModel model = load_checkpoint(checkpoints[i]);
        EvalReport part = evaluate_full(model, {data.supports[i]}, data.test, cfg.eval.mode);
        report.accuracies.push_back(part.accuracies.at(0));
        report.total_evaluated += part.total_evaluated;
        report.total_correct += part.total_correct;
        for (const auto& [true_name, row] : part.confusion)
          for (const auto& [pred_name, count] : row)
            report.confusion[true_name][pred_name] += count;
      }
      report.mean = std::accumulate(report.accuracies.begin(), report.accuracies.end(), 0.0) /
                    static_cast<double>(report.accuracies.size());
      double acc = 0.0;
      for (double a : report.accuracies) acc += (a - report.mean) * (a - report.mean);
      report.stddev = std::sqrt(acc / static_cast<double>(report.accuracies.size()));
    } else {
      throw IoError("pass one checkpoint, or exactly one per support set (" +
                    std::to_string(data.supports.size()) + ")");
    }
  } else {
    if (checkpoints.size() != 1)
      throw IoError("episodic metric takes exactly one checkpoint");
    TrainedModel model = load_checkpoint(checkpoints[0]);
    int n_way = data.manifest.at("n_way").get<int>();
    int k_shot = data.manifest.at("k_shot").get<int>();
    std::vector<Episode> episodes;
    for (int e = 0; e < cfg.eval.n_episodes; ++e) {
      EpisodeSpec spec;
      spec.n_way = n_way;
      spec.k_shot = k_shot;
      spec.queries_per_class = cfg.eval.episode_queries_per_class;
      spec.seed = derive_seed(cfg.eval.episode_seed, 2000 + static_cast<std::uint64_t>(e));
      episodes.push_back(sample_support_query(data.test, spec));
    }
    report = evaluate_episodic(model, episodes, cfg.eval.mode);
  }

  fs::path base(out_dir);
  save_eval_report_json(report, (base / (prefix + "_report.json")).string());
  save_eval_report_csv(report, (base / (prefix + "_report.csv")).string());
  save_confusion_csv(report, (base / (prefix + "_confusion.csv")).string());
  log_line("eval: mean accuracy " + fmt_double(report.mean) + " -> " +
           (base / (prefix + "_report.json")).string());
  return 0;
}

int cmd_dump_embeddings(const std::string& checkpoint, const std::string& corpus_path,
                        const std::string& out_path) {
  TrainedModel model = load_checkpoint(checkpoint);
  LabeledCorpus corpus = load_labeled_corpus(corpus_path, true);

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw IoError("cannot open " + out_path + " for writing");
  for (const auto& doc : corpus.documents) {
    Vector v = encode(doc, model.encoder);
    out << doc.id << '\t' << corpus.classes.names[static_cast<std::size_t>(doc.label)];
    for (Eigen::Index i = 0; i < v.size(); ++i) out << '\t' << fmt_double(v(i));
    out << '\n';
  }
  for (ClassId c = 0; c < model.n_classes(); ++c) {
    out << model.class_names[static_cast<std::size_t>(c)] << "\t__category__";
    auto row = model.categories.rows().row(model.categories.row_of(c));
    for (Eigen::Index i = 0; i < row.size(); ++i) out << '\t' << fmt_double(row(i));
    out << '\n';
  }
  log_line("dump-embeddings: " + std::to_string(corpus.documents.size()) + " documents + " +
           std::to_string(model.n_classes()) + " categories -> " + out_path);
  return 0;
}

// Random small instance for the gradient checker. SC/NCA batches get two
// documents per class so positives exist.
MergedTrainingSet gradcheck_instance(ObjectiveKind objective, Rng& rng, Vocabulary& vocab) {
  std::uniform_int_distribution<int> vocab_size(3, 8);
  std::uniform_int_distribution<int> doc_len(1, 4);
  const int v = vocab_size(rng);
  vocab = Vocabulary();
  for (int t = 0; t < v; ++t) vocab.add("t" + std::to_string(t), 1);

  const bool grouped = objective == ObjectiveKind::Sc || objective == ObjectiveKind::Nca;
  MergedTrainingSet data;
  // CC needs >= 2 classes per origin pool; grouped objectives need in-class
  // positives. Both stay within a batch of 6.
  data.n_train_classes = grouped ? 1 : 2;
  const ClassId n_classes = grouped ? 3 : 4;
  const int docs_per_class = grouped ? 2 : 1;
  for (ClassId cls = 0; cls < n_classes; ++cls)
    data.class_names.push_back("c" + std::to_string(cls));
  std::uniform_int_distribution<TokenId> token(0, static_cast<TokenId>(v));
  int doc_counter = 0;
  for (ClassId cls = 0; cls < n_classes; ++cls) {
    for (int d = 0; d < docs_per_class; ++d) {
      Document doc;
      doc.id = "d" + std::to_string(doc_counter++);
      doc.label = cls;
      int len = doc_len(rng);
      for (int t = 0; t < len; ++t) doc.tokens.push_back(token(rng));
      data.documents.push_back(std::move(doc));
      data.origins.push_back(cls < data.n_train_classes ? Origin::TrainClass
                                                        : Origin::TestKShot);
    }
  }
  return data;
}

int cmd_gradcheck(const std::string& objective_name, int instances, double epsilon,
                  std::uint64_t seed, double threshold) {
  std::vector<ObjectiveKind> objectives;
  if (objective_name == "all")
    objectives = {ObjectiveKind::Nce, ObjectiveKind::Cc, ObjectiveKind::Sc,
                  ObjectiveKind::Nca, ObjectiveKind::Xent};
  else
    objectives = {objective_from_string(objective_name)};

  bool ok = true;
  Rng rng(seed);
  std::uniform_int_distribution<std::int32_t> dim(2, 5);
  for (ObjectiveKind objective : objectives) {
    double worst = 0.0;
    for (int i = 0; i < instances; ++i) {
      Vocabulary vocab;
      MergedTrainingSet data = gradcheck_instance(objective, rng, vocab);
      TrainConfig config;
      config.objective = objective;
      config.embed_dim = dim(rng);
      config.output_dim = dim(rng);
      config.n_neg = 3;
      config.seed = rng();
      worst = std::max(worst, grad_check(config, data, vocab, epsilon));
    }
    bool pass = worst < threshold;
    ok = ok && pass;
    std::cout << objective_to_string(objective) << " max_rel_err " << fmt_double(worst)
              << (pass ? " ok" : " FAIL") << '\n';
  }
  return ok ? 0 : 2;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Constrained few-shot learning pipeline (Cat2Vec category embeddings)"};
  app.require_subcommand(1);

  std::string config_path, out_dir, prepared, corpus_path, out_path, checkpoint;
  std::string objective = "all", report_prefix = "eval";
  std::vector<std::string> checkpoints;
  int support_index = -1, instances = 20;
  double epsilon = 1e-5, threshold = 1e-4;
  std::uint64_t gc_seed = 0;

  // Flag overrides applied on top of the config file.
  std::string ov_objective, ov_metric, ov_mode;
  std::int64_t ov_epochs = -1;
  double ov_lr = -1.0;
  std::int64_t ov_seed = -1;
  std::int64_t ov_m_tshot = -1;

  auto add_config_opt = [&](CLI::App* cmd, bool required = true) {
    auto* opt = cmd->add_option("--config", config_path, "Run config JSON");
    if (required) opt->required();
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled corpus pair");
  add_config_opt(synth);
  synth->add_option("--out-dir", out_dir, "Output directory (overrides paths.out_dir)");

  auto* prepare = app.add_subcommand("prepare", "Tokenize, constrain and sample support sets");
  add_config_opt(prepare);
  prepare->add_option("--out-dir", out_dir, "Output directory (overrides paths.out_dir)");
  prepare->add_option("--m-tshot", ov_m_tshot, "Override prepare.m_tshot");
  prepare->add_option("--seed", ov_seed, "Override prepare.seed");

  auto* train_cmd = app.add_subcommand("train", "Train one checkpoint per support set");
  add_config_opt(train_cmd);
  train_cmd->add_option("--prepared", prepared, "Prepared dataset directory")->required();
  train_cmd->add_option("--support", support_index, "Train on one support set only");
  train_cmd->add_option("--out-dir", out_dir, "Output directory (default: prepared dir)");
  train_cmd->add_option("--objective", ov_objective, "Override train.objective");
  train_cmd->add_option("--epochs", ov_epochs, "Override train.epochs");
  train_cmd->add_option("--learning-rate", ov_lr, "Override train.learning_rate");
  train_cmd->add_option("--seed", ov_seed, "Override train.seed");

  auto* eval_cmd = app.add_subcommand("eval", "Score checkpoints under a metric");
  add_config_opt(eval_cmd);
  eval_cmd->add_option("--prepared", prepared, "Prepared dataset directory")->required();
  eval_cmd->add_option("--checkpoint", checkpoints, "Checkpoint file (repeatable)")
      ->required();
  eval_cmd->add_option("--out-dir", out_dir, "Output directory (default: prepared dir)");
  eval_cmd->add_option("--report-prefix", report_prefix, "Report file prefix");
  eval_cmd->add_option("--metric", ov_metric, "Override eval.metric (full|episodic)");
  eval_cmd->add_option("--mode", ov_mode, "Override eval.mode (category-table|prototypes)");

  auto* dump = app.add_subcommand("dump-embeddings", "Write document and category embeddings");
  dump->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  dump->add_option("--corpus", corpus_path, "Tokenized corpus (JSON lines)")->required();
  dump->add_option("--out", out_path, "Output TSV")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  gradcheck->add_option("--objective", objective, "Objective name or 'all'");
  gradcheck->add_option("--instances", instances, "Random instances per objective");
  gradcheck->add_option("--epsilon", epsilon, "Central difference step");
  gradcheck->add_option("--seed", gc_seed, "Instance generator seed");
  gradcheck->add_option("--threshold", threshold, "Max relative error to pass");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  RunConfig cfg;
  if (!config_path.empty()) cfg = load_run_config(config_path);
  if (!ov_objective.empty()) cfg.train.objective = objective_from_string(ov_objective);
  if (ov_epochs >= 0) cfg.train.epochs = static_cast<int>(ov_epochs);
  if (ov_lr >= 0.0) cfg.train.learning_rate = ov_lr;
  if (ov_m_tshot >= 0) cfg.prepare.m_tshot = ov_m_tshot;
  if (ov_seed >= 0) {
    cfg.train.seed = static_cast<std::uint64_t>(ov_seed);
    cfg.prepare.seed = static_cast<std::uint64_t>(ov_seed);
  }
  if (!ov_metric.empty())
    cfg.eval.metric = ov_metric == "episodic" ? EvalMetric::Episodic : EvalMetric::Full;
  if (!ov_mode.empty())
    cfg.eval.mode = ov_mode == "prototypes" ? EvalMode::Prototypes : EvalMode::CategoryTable;
  if (out_dir.empty() && (synth->parsed() || prepare->parsed())) out_dir = cfg.paths.out_dir;

  if (synth->parsed()) return cmd_synth(cfg, out_dir);
  if (prepare->parsed()) return cmd_prepare(cfg, out_dir);
  if (train_cmd->parsed()) return cmd_train(cfg, prepared, support_index, out_dir);
  if (eval_cmd->parsed()) return cmd_eval(cfg, prepared, checkpoints, out_dir, report_prefix);
  if (dump->parsed()) return cmd_dump_embeddings(checkpoint, corpus_path, out_path);
  if (gradcheck->parsed())
    return cmd_gradcheck(objective, instances, epsilon, gc_seed, threshold);
  return 1;
}

}  // namespace

}  // namespace cfsl::cli

int main(int argc, char** argv) {
  try {
    return cfsl::cli::dispatch(argc, argv);
  } catch (const cfsl::DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const cfsl::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
