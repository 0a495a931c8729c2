#include <doctest.h>

#include <map>
#include <string>
#include <vector>

#include "cfsl/corpus.hpp"
#include "cfsl/error.hpp"
#include "cfsl/synthgen.hpp"
#include "cfsl/vocabulary.hpp"
#include "support/temp_dir.hpp"

using namespace cfsl;

namespace {

SynthSpec small_spec() {
  SynthSpec spec;
  spec.n_train_classes = 4;
  spec.n_test_classes = 3;
  spec.docs_per_train_class = 2;
  spec.k_shot_docs_per_test_class = 2;
  spec.query_docs_per_test_class = 3;
  spec.vocab_size = 100;
  spec.tokens_per_doc = 12;
  spec.class_token_concentration = 1.0;
  spec.shift = 0.0;
  spec.seed = 99;
  return spec;
}

std::vector<int> token_indices(const std::string& text) {
  std::vector<int> out;
  for (const auto& word : tokenize_text(text)) out.push_back(std::stoi(word.substr(1)));
  return out;
}

}  // namespace

TEST_CASE("generate honors the requested counts") {
  auto spec = small_spec();
  auto [train, test] = generate(spec);
  CHECK(train.documents.size() == 4 * 2);
  CHECK(test.documents.size() == 3 * (2 + 3));
  CHECK(train.classes.size() == 4);
  CHECK(test.classes.size() == 3);
  for (std::int64_t count : train.class_counts) CHECK(count == 2);
  for (std::int64_t count : test.class_counts) CHECK(count == 5);
}

TEST_CASE("generate is deterministic under the seed") {
  auto spec = small_spec();
  auto [train_a, test_a] = generate(spec);
  auto [train_b, test_b] = generate(spec);
  REQUIRE(train_a.documents.size() == train_b.documents.size());
  for (std::size_t i = 0; i < train_a.documents.size(); ++i) {
    CHECK(train_a.documents[i].id == train_b.documents[i].id);
    CHECK(train_a.documents[i].text == train_b.documents[i].text);
  }
  spec.seed = 100;
  auto [train_c, test_c] = generate(spec);
  bool any_diff = false;
  for (std::size_t i = 0; i < train_a.documents.size(); ++i)
    any_diff = any_diff || train_a.documents[i].text != train_c.documents[i].text;
  CHECK(any_diff);
}

TEST_CASE("token indices stay inside the vocabulary") {
  auto spec = small_spec();
  spec.class_token_concentration = 0.6;
  auto [train, test] = generate(spec);
  for (const auto& corpus : {train, test})
    for (const auto& doc : corpus.documents)
      for (int token : token_indices(doc.text)) {
        CHECK(token >= 0);
        CHECK(token < spec.vocab_size);
      }
}

TEST_CASE("concentration 1 gives disjoint blocks and a perfect centroid classifier") {
  auto spec = small_spec();
  auto [train, test] = generate(spec);

  // with concentration 1 every token of a test doc lies in its class block
  for (const auto& doc : test.documents) {
    ClassId cls = test.classes.id_of(doc.label);
    auto [first, last] = private_block(spec, true, cls);
    for (int token : token_indices(doc.text)) {
      CHECK(token >= first);
      CHECK(token < last);
    }
  }

  // nearest centroid on raw token histograms over the test corpus
  std::map<ClassId, std::vector<double>> centroid;
  std::map<ClassId, int> members;
  auto histogram = [&](const RawDocument& doc) {
    std::vector<double> h(static_cast<std::size_t>(spec.vocab_size), 0.0);
    for (int token : token_indices(doc.text)) h[static_cast<std::size_t>(token)] += 1.0;
    return h;
  };
  for (const auto& doc : test.documents) {
    ClassId cls = test.classes.id_of(doc.label);
    auto h = histogram(doc);
    auto& c = centroid[cls];
    if (c.empty()) c.assign(h.size(), 0.0);
    for (std::size_t i = 0; i < h.size(); ++i) c[i] += h[i];
    members[cls]++;
  }
  for (auto& [cls, c] : centroid)
    for (double& x : c) x /= members[cls];

  int correct = 0;
  for (const auto& doc : test.documents) {
    auto h = histogram(doc);
    ClassId best = -1;
    double best_dist = 0.0;
    for (const auto& [cls, c] : centroid) {
      double dist = 0.0;
      for (std::size_t i = 0; i < h.size(); ++i) dist += (h[i] - c[i]) * (h[i] - c[i]);
      if (best < 0 || dist < best_dist) {
        best = cls;
        best_dist = dist;
      }
    }
    if (best == test.classes.id_of(doc.label)) ++correct;
  }
  CHECK(correct == static_cast<int>(test.documents.size()));
}

TEST_CASE("shift 1 makes each train class clone a test class distribution") {
  auto spec = small_spec();
  spec.shift = 1.0;
  auto [train, test] = generate(spec);

  // with concentration 1 the clone relation is structural: every token of
  // train class i falls in test class (i mod n_test)'s private block
  for (const auto& doc : train.documents) {
    ClassId cls = train.classes.id_of(doc.label);
    auto [first, last] = private_block(spec, true, cls % spec.n_test_classes);
    for (int token : token_indices(doc.text)) {
      CHECK(token >= first);
      CHECK(token < last);
    }
  }
}

TEST_CASE("forty one-document train classes satisfy the M=1 constraint untouched") {
  SynthSpec spec = small_spec();
  spec.n_train_classes = 40;
  spec.docs_per_train_class = 1;
  spec.vocab_size = 400;
  auto [train, test] = generate(spec);
  CHECK(train.documents.size() == 40);

  auto capped = apply_tshot_constraint(train, ConstraintSpec{1, 5});
  CHECK(capped.documents.size() == train.documents.size());
  for (std::size_t i = 0; i < capped.documents.size(); ++i)
    CHECK(capped.documents[i].id == train.documents[i].id);
}

TEST_CASE("inconsistent specs are rejected") {
  auto spec = small_spec();
  SUBCASE("zero counts") {
    spec.docs_per_train_class = 0;
    CHECK_THROWS_AS(generate(spec), DomainError);
  }
  SUBCASE("bad concentration") {
    spec.class_token_concentration = 0.0;
    CHECK_THROWS_AS(generate(spec), DomainError);
  }
  SUBCASE("bad shift") {
    spec.shift = 1.5;
    CHECK_THROWS_AS(generate(spec), DomainError);
  }
  SUBCASE("vocabulary too small for the blocks") {
    spec.vocab_size = 5;  // 7 classes need at least 7 block tokens
    CHECK_THROWS_AS(generate(spec), DomainError);
  }
}

TEST_CASE("raw corpus jsonl output matches the loader format") {
  auto spec = small_spec();
  auto [train, test] = generate(spec);
  testutil::TempDir dir;
  auto path = dir.file("synth.jsonl");
  save_raw_corpus(train, path);
  auto loaded = load_corpus(path);
  REQUIRE(loaded.documents.size() == train.documents.size());
  for (std::size_t i = 0; i < loaded.documents.size(); ++i) {
    CHECK(loaded.documents[i].id == train.documents[i].id);
    CHECK(loaded.documents[i].text == train.documents[i].text);
    CHECK(loaded.documents[i].label == train.documents[i].label);
  }
}
