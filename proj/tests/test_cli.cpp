#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "cfsl/checkpoint.hpp"
#include "cfsl/corpus.hpp"
#include "cfsl/encoder.hpp"
#include "support/run_cli.hpp"
#include "support/temp_dir.hpp"

using namespace cfsl;
using testutil::CliResult;
using testutil::run_cli;
using testutil::TempDir;

namespace {

const char* kBaseConfig = R"({
  "version": 1,
  "paths": {"train_corpus": "data/train.jsonl", "test_corpus": "data/test.jsonl", "out_dir": "data"},
  "synth": {"n_train_classes": 8, "n_test_classes": 3, "docs_per_train_class": 3,
            "k_shot_docs_per_test_class": 3, "query_docs_per_test_class": 6,
            "vocab_size": 120, "tokens_per_doc": 10, "concentration": 1.0, "shift": 0.0,
            "seed": 5},
  "prepare": {"m_tshot": 1, "seed": 5, "max_tokens": 50, "vocab_min_count": 1,
              "vocab_max_size": 10000, "n_way": 0, "k_shot": 2, "n_support_sets": 3},
  "train": {"objective": "cc", "epochs": 30, "batch_size": 8, "n_neg": 3,
            "learning_rate": 0.01, "optimizer": "adam", "seed": 9,
            "embed_dim": 8, "output_dim": 8},
  "eval": {"metric": "full", "mode": "category-table", "n_episodes": 4,
           "episode_queries_per_class": 4, "episode_seed": 3}
})";

// synth + prepare into "<work>/prep"
void make_prepared(const TempDir& work) {
  work.write("cfg.json", kBaseConfig);
  REQUIRE(run_cli("synth --config cfg.json --out-dir data", work.path().string()).exit_code == 0);
  REQUIRE(run_cli("prepare --config cfg.json --out-dir prep", work.path().string()).exit_code == 0);
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("prepare writes the manifest, support sets and capped train set") {
  TempDir work;
  make_prepared(work);
  auto prep = work.path() / "prep";
  CHECK(std::filesystem::exists(prep / "manifest.json"));
  CHECK(std::filesystem::exists(prep / "vocab.tsv"));
  for (int i = 0; i < 3; ++i)
    CHECK(std::filesystem::exists(prep / ("support_" + std::to_string(i) + ".json")));

  // M=1 on a 3-doc-per-class corpus leaves one document per class
  auto train = load_labeled_corpus((prep / "train_tokens.jsonl").string());
  for (std::int64_t count : train.class_counts) CHECK(count == 1);
  CHECK(train.documents.size() == 8);

  auto manifest = testutil::read_file((prep / "manifest.json").string());
  CHECK(manifest.find("support_seeds") != std::string::npos);
  CHECK(manifest.find("constraint_seed") != std::string::npos);
}

TEST_CASE("prepare and synth are byte-identical across reruns") {
  TempDir work;
  work.write("cfg.json", kBaseConfig);
  const std::string root = work.path().string();
  REQUIRE(run_cli("synth --config cfg.json --out-dir data", root).exit_code == 0);
  REQUIRE(run_cli("prepare --config cfg.json --out-dir prep_a", root).exit_code == 0);
  REQUIRE(run_cli("prepare --config cfg.json --out-dir prep_b", root).exit_code == 0);
  for (const auto& entry : std::filesystem::directory_iterator(work.path() / "prep_a")) {
    auto name = entry.path().filename().string();
    CHECK(testutil::read_file(entry.path().string()) ==
          testutil::read_file((work.path() / "prep_b" / name).string()));
  }
}

TEST_CASE("train then eval produces a three-row report plus mean") {
  TempDir work;
  make_prepared(work);
  const std::string root = work.path().string();
  REQUIRE(run_cli("train --config cfg.json --prepared prep", root).exit_code == 0);

  std::string checkpoints;
  for (int i = 0; i < 3; ++i)
    checkpoints += " --checkpoint prep/model_cc_s" + std::to_string(i) + ".c2v";
  auto eval = run_cli("eval --config cfg.json --prepared prep" + checkpoints, root);
  CHECK(eval.exit_code == 0);

  auto csv = split_lines(testutil::read_file((work.path() / "prep/eval_report.csv").string()));
  REQUIRE(csv.size() == 5);  // header + 3 rows + mean
  CHECK(csv[0] == "support_set,metric,accuracy");
  CHECK(csv[4].rfind("mean,full,", 0) == 0);

  // loss trajectory trends down on the separable corpus
  auto loss = split_lines(testutil::read_file((work.path() / "prep/loss_cc_s0.csv").string()));
  REQUIRE(loss.size() >= 3);
  double first = std::stod(loss[1].substr(loss[1].find(',') + 1));
  double last = std::stod(loss.back().substr(loss.back().find(',') + 1));
  CHECK(last < first);
}

TEST_CASE("train/eval artifacts are byte-identical across reruns") {
  TempDir work;
  make_prepared(work);
  const std::string root = work.path().string();
  for (const char* out : {"run_a", "run_b"}) {
    REQUIRE(run_cli(std::string("train --config cfg.json --prepared prep --support 0 --out-dir ") +
                        out, root).exit_code == 0);
    REQUIRE(run_cli(std::string("eval --config cfg.json --prepared prep --checkpoint ") + out +
                        "/model_cc_s0.c2v --out-dir " + out, root).exit_code == 0);
  }
  for (const auto& entry : std::filesystem::directory_iterator(work.path() / "run_a")) {
    auto name = entry.path().filename().string();
    CHECK(testutil::read_file(entry.path().string()) ==
          testutil::read_file((work.path() / "run_b" / name).string()));
  }
}

TEST_CASE("sc training on an M=1 K=1 prepared set exits 2 with the degeneracy message") {
  TempDir work;
  std::string config(kBaseConfig);
  auto pos = config.find("\"k_shot\": 2");
  REQUIRE(pos != std::string::npos);
  config.replace(pos, 11, "\"k_shot\": 1");
  work.write("cfg.json", config);
  const std::string root = work.path().string();
  REQUIRE(run_cli("synth --config cfg.json --out-dir data", root).exit_code == 0);
  REQUIRE(run_cli("prepare --config cfg.json --out-dir prep", root).exit_code == 0);

  auto result = run_cli("train --config cfg.json --prepared prep --objective sc --support 0", root);
  CHECK(result.exit_code == 2);
  CHECK(result.err.find("no positive pairs") != std::string::npos);
}

TEST_CASE("zero learning rate leaves the checkpoint at initialization") {
  TempDir work;
  make_prepared(work);
  const std::string root = work.path().string();
  REQUIRE(run_cli("train --config cfg.json --prepared prep --support 0 --learning-rate 0 "
                  "--epochs 1 --out-dir lr0_a", root).exit_code == 0);
  REQUIRE(run_cli("train --config cfg.json --prepared prep --support 0 --learning-rate 0 "
                  "--epochs 3 --out-dir lr0_b", root).exit_code == 0);
  auto a = load_checkpoint((work.path() / "lr0_a/model_cc_s0.c2v").string());
  auto b = load_checkpoint((work.path() / "lr0_b/model_cc_s0.c2v").string());
  CHECK(a.encoder.token_embeddings.isApprox(b.encoder.token_embeddings, 0.0));
  CHECK(a.categories.rows().isApprox(b.categories.rows(), 0.0));
}

TEST_CASE("eval with a missing checkpoint exits 1") {
  TempDir work;
  make_prepared(work);
  auto result = run_cli("eval --config cfg.json --prepared prep --checkpoint missing.c2v",
                        work.path().string());
  CHECK(result.exit_code == 1);
}

TEST_CASE("episodic metric matches the full metric on the same support set") {
  TempDir work;
  make_prepared(work);
  const std::string root = work.path().string();
  REQUIRE(run_cli("train --config cfg.json --prepared prep --support 0", root).exit_code == 0);
  REQUIRE(run_cli("eval --config cfg.json --prepared prep --checkpoint prep/model_cc_s0.c2v "
                  "--metric episodic --report-prefix epi", root).exit_code == 0);
  CHECK(std::filesystem::exists(work.path() / "prep/epi_report.json"));
  auto csv = split_lines(testutil::read_file((work.path() / "prep/epi_report.csv").string()));
  CHECK(csv.size() >= 3);
  CHECK(csv[1].find("episodic") != std::string::npos);
}

TEST_CASE("dump-embeddings emits document rows plus flagged category rows") {
  TempDir work;
  make_prepared(work);
  const std::string root = work.path().string();
  REQUIRE(run_cli("train --config cfg.json --prepared prep --support 0", root).exit_code == 0);
  REQUIRE(run_cli("dump-embeddings --checkpoint prep/model_cc_s0.c2v "
                  "--corpus prep/test_tokens.jsonl --out emb.tsv", root).exit_code == 0);

  auto model = load_checkpoint((work.path() / "prep/model_cc_s0.c2v").string());
  auto test = load_labeled_corpus((work.path() / "prep/test_tokens.jsonl").string());
  auto lines = split_lines(testutil::read_file((work.path() / "emb.tsv").string()));
  REQUIRE(lines.size() == test.documents.size() + model.class_names.size());

  int category_rows = 0;
  for (const auto& line : lines)
    if (line.find("\t__category__\t") != std::string::npos) ++category_rows;
  CHECK(category_rows == static_cast<int>(model.class_names.size()));

  // first row reproduces encode() at full precision
  auto first = lines[0];
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    auto tab = first.find('\t', start);
    cells.push_back(first.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  REQUIRE(cells.size() == 2 + static_cast<std::size_t>(model.encoder.output_dim()));
  Vector expected = encode(test.documents[0], model.encoder);
  for (Eigen::Index i = 0; i < expected.size(); ++i)
    CHECK(std::stod(cells[static_cast<std::size_t>(2 + i)]) == expected(i));

  SUBCASE("empty corpus dumps category rows only") {
    work.write("empty.jsonl", "");
    REQUIRE(run_cli("dump-embeddings --checkpoint prep/model_cc_s0.c2v "
                    "--corpus empty.jsonl --out emb_empty.tsv", root).exit_code == 0);
    auto empty_lines = split_lines(testutil::read_file((work.path() / "emb_empty.tsv").string()));
    CHECK(empty_lines.size() == model.class_names.size());
  }
}

TEST_CASE("config rejects unknown keys and bad versions with exit 1") {
  TempDir work;
  work.write("bad.json", R"({"version": 1, "train": {"learning_rte": 0.1}})");
  auto result = run_cli("gradcheck --objective nce --instances 1", work.path().string());
  CHECK(result.exit_code == 0);  // gradcheck without config works

  work.write("data/.keep", "");
  auto bad = run_cli("prepare --config bad.json", work.path().string());
  CHECK(bad.exit_code == 1);
  CHECK(bad.err.find("unknown key") != std::string::npos);

  work.write("v2.json", R"({"version": 2})");
  auto v2 = run_cli("prepare --config v2.json", work.path().string());
  CHECK(v2.exit_code == 1);
}

TEST_CASE("gradcheck subcommand reports per-objective errors") {
  TempDir work;
  auto result = run_cli("gradcheck --instances 5 --seed 11", work.path().string());
  CHECK(result.exit_code == 0);
  auto lines = split_lines(result.out);
  REQUIRE(lines.size() == 5);
  for (const auto& line : lines) CHECK(line.find(" ok") != std::string::npos);
}
