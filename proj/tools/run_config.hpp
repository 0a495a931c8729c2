#ifndef CFSL_TOOLS_RUN_CONFIG_HPP_
#define CFSL_TOOLS_RUN_CONFIG_HPP_

#include <string>

#include "cfsl/fewshot.hpp"
#include "cfsl/synthgen.hpp"
#include "cfsl/trainer.hpp"

namespace cfsl::cli {

struct PathsConfig {
  std::string train_corpus;
  std::string test_corpus;
  std::string out_dir = "out";
};

struct PrepareConfig {
  std::int64_t m_tshot = 1;
  std::uint64_t seed = 0;
  std::int64_t max_tokens = 50;
  std::int64_t vocab_min_count = 1;
  std::int64_t vocab_max_size = 1000000;
  std::int64_t partition_chunk_size = 0;  // 0 disables partitioning
  std::int64_t partition_max_chunks = 5;
  int n_way = 0;  // 0 means every test class
  int k_shot = 5;
  int n_support_sets = 3;
};

struct EvalConfig {
  cfsl::EvalMetric metric = cfsl::EvalMetric::Full;
  cfsl::EvalMode mode = cfsl::EvalMode::CategoryTable;
  int n_episodes = 10;
  int episode_queries_per_class = 15;
  std::uint64_t episode_seed = 0;
};

// One JSON document drives every stage; sections are optional until the
// subcommand that needs them runs. Unknown keys are rejected.
struct RunConfig {
  PathsConfig paths;
  PrepareConfig prepare;
  cfsl::TrainConfig train;
  EvalConfig eval;
  cfsl::SynthSpec synth;
  bool has_synth = false;
};

RunConfig load_run_config(const std::string& path);

}  // namespace cfsl::cli

#endif  // CFSL_TOOLS_RUN_CONFIG_HPP_
