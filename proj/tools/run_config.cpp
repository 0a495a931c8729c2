#include "run_config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "cfsl/error.hpp"

namespace cfsl::cli {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::string& section,
                         const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw IoError("config: unknown key '" + key + "' in section '" + section + "'");
}

template <typename T>
void read_into(const json& obj, const char* key, T& slot) {
  if (obj.contains(key)) slot = obj.at(key).get<T>();
}

void parse_paths(const json& obj, PathsConfig& cfg) {
  reject_unknown_keys(obj, "paths", {"train_corpus", "test_corpus", "out_dir"});
  read_into(obj, "train_corpus", cfg.train_corpus);
  read_into(obj, "test_corpus", cfg.test_corpus);
  read_into(obj, "out_dir", cfg.out_dir);
}

void parse_prepare(const json& obj, PrepareConfig& cfg) {
  reject_unknown_keys(obj, "prepare",
                      {"m_tshot", "seed", "max_tokens", "vocab_min_count", "vocab_max_size",
                       "partition_chunk_size", "partition_max_chunks", "n_way", "k_shot",
                       "n_support_sets"});
  read_into(obj, "m_tshot", cfg.m_tshot);
  read_into(obj, "seed", cfg.seed);
  read_into(obj, "max_tokens", cfg.max_tokens);
  read_into(obj, "vocab_min_count", cfg.vocab_min_count);
  read_into(obj, "vocab_max_size", cfg.vocab_max_size);
  read_into(obj, "partition_chunk_size", cfg.partition_chunk_size);
  read_into(obj, "partition_max_chunks", cfg.partition_max_chunks);
  read_into(obj, "n_way", cfg.n_way);
  read_into(obj, "k_shot", cfg.k_shot);
  read_into(obj, "n_support_sets", cfg.n_support_sets);
}

void parse_train(const json& obj, TrainConfig& cfg) {
  reject_unknown_keys(obj, "train",
                      {"objective", "epochs", "batch_size", "n_neg", "learning_rate",
                       "optimizer", "adam_beta1", "adam_beta2", "adam_epsilon", "seed",
                       "embed_dim", "output_dim", "tau", "nca_dim", "max_tokens"});
  if (obj.contains("objective"))
    cfg.objective = objective_from_string(obj.at("objective").get<std::string>());
  read_into(obj, "epochs", cfg.epochs);
  read_into(obj, "batch_size", cfg.batch_size);
  read_into(obj, "n_neg", cfg.n_neg);
  read_into(obj, "learning_rate", cfg.learning_rate);
  if (obj.contains("optimizer")) {
    std::string name = obj.at("optimizer").get<std::string>();
    if (name == "adam")
      cfg.optimizer = OptimizerKind::Adam;
    else if (name == "sgd")
      cfg.optimizer = OptimizerKind::Sgd;
    else
      throw IoError("config: unknown optimizer '" + name + "'");
  }
  read_into(obj, "adam_beta1", cfg.adam.beta1);
  read_into(obj, "adam_beta2", cfg.adam.beta2);
  read_into(obj, "adam_epsilon", cfg.adam.epsilon);
  read_into(obj, "seed", cfg.seed);
  read_into(obj, "embed_dim", cfg.embed_dim);
  read_into(obj, "output_dim", cfg.output_dim);
  read_into(obj, "tau", cfg.tau);
  read_into(obj, "nca_dim", cfg.nca_dim);
  read_into(obj, "max_tokens", cfg.max_tokens);
}

void parse_eval(const json& obj, EvalConfig& cfg) {
  reject_unknown_keys(
      obj, "eval",
      {"metric", "mode", "n_episodes", "episode_queries_per_class", "episode_seed"});
  if (obj.contains("metric")) {
    std::string metric = obj.at("metric").get<std::string>();
    if (metric == "full")
      cfg.metric = EvalMetric::Full;
    else if (metric == "episodic")
      cfg.metric = EvalMetric::Episodic;
    else
      throw IoError("config: unknown metric '" + metric + "'");
  }
  if (obj.contains("mode")) {
    std::string mode = obj.at("mode").get<std::string>();
    if (mode == "category-table")
      cfg.mode = EvalMode::CategoryTable;
    else if (mode == "prototypes")
      cfg.mode = EvalMode::Prototypes;
    else
      throw IoError("config: unknown eval mode '" + mode + "'");
  }
  read_into(obj, "n_episodes", cfg.n_episodes);
  read_into(obj, "episode_queries_per_class", cfg.episode_queries_per_class);
  read_into(obj, "episode_seed", cfg.episode_seed);
}

void parse_synth(const json& obj, SynthSpec& cfg) {
  reject_unknown_keys(obj, "synth",
                      {"n_train_classes", "n_test_classes", "docs_per_train_class",
                       "k_shot_docs_per_test_class", "query_docs_per_test_class",
                       "vocab_size", "tokens_per_doc", "concentration", "shift", "seed"});
  read_into(obj, "n_train_classes", cfg.n_train_classes);
  read_into(obj, "n_test_classes", cfg.n_test_classes);
  read_into(obj, "docs_per_train_class", cfg.docs_per_train_class);
  read_into(obj, "k_shot_docs_per_test_class", cfg.k_shot_docs_per_test_class);
  read_into(obj, "query_docs_per_test_class", cfg.query_docs_per_test_class);
  read_into(obj, "vocab_size", cfg.vocab_size);
  read_into(obj, "tokens_per_doc", cfg.tokens_per_doc);
  read_into(obj, "concentration", cfg.class_token_concentration);
  read_into(obj, "shift", cfg.shift);
  read_into(obj, "seed", cfg.seed);
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path);
  json obj;
  try {
    obj = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path + ": parse error: " + e.what());
  }
  if (!obj.is_object()) throw IoError(path + ": config must be a JSON object");
  reject_unknown_keys(obj, "<top>", {"version", "paths", "prepare", "train", "eval", "synth"});
  if (!obj.contains("version") || !obj["version"].is_number_integer())
    throw IoError(path + ": missing integer \"version\"");
  if (obj["version"].get<int>() != 1)
    throw IoError(path + ": unsupported config version " +
                  std::to_string(obj["version"].get<int>()));

  RunConfig cfg;
  try {
    if (obj.contains("paths")) parse_paths(obj["paths"], cfg.paths);
    if (obj.contains("prepare")) parse_prepare(obj["prepare"], cfg.prepare);
    if (obj.contains("train")) parse_train(obj["train"], cfg.train);
    if (obj.contains("eval")) parse_eval(obj["eval"], cfg.eval);
    if (obj.contains("synth")) {
      parse_synth(obj["synth"], cfg.synth);
      cfg.has_synth = true;
    }
  } catch (const json::exception& e) {
    throw IoError(path + ": bad config value: " + e.what());
  }
  return cfg;
}

}  // namespace cfsl::cli
