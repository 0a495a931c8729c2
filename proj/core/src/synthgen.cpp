#include "cfsl/synthgen.hpp"

#include <fstream>
#include <string>

#include <json.hpp>

#include "cfsl/error.hpp"
#include "cfsl/rng.hpp"

namespace cfsl {

namespace {

void validate(const SynthSpec& spec) {
  if (spec.n_train_classes < 1 || spec.n_test_classes < 1 ||
      spec.docs_per_train_class < 1 || spec.k_shot_docs_per_test_class < 1 ||
      spec.query_docs_per_test_class < 1 || spec.vocab_size < 1 || spec.tokens_per_doc < 1)
    throw DomainError("inconsistent synth spec: all counts must be >= 1");
  if (!(spec.class_token_concentration > 0.0) || spec.class_token_concentration > 1.0)
    throw DomainError("inconsistent synth spec: concentration must be in (0, 1]");
  if (spec.shift < 0.0 || spec.shift > 1.0)
    throw DomainError("inconsistent synth spec: shift must be in [0, 1]");

  const std::int32_t n_total = spec.n_train_classes + spec.n_test_classes;
  const std::int32_t block = std::max<std::int32_t>(1, spec.vocab_size / (2 * n_total));
  if (static_cast<std::int64_t>(block) * n_total > spec.vocab_size)
    throw DomainError("inconsistent synth spec: private blocks do not fit in vocab_size");
  if (spec.class_token_concentration < 1.0 && block * n_total == spec.vocab_size)
    throw DomainError("inconsistent synth spec: no background tokens left");
}

std::int32_t block_size(const SynthSpec& spec) {
  const std::int32_t n_total = spec.n_train_classes + spec.n_test_classes;
  return std::max<std::int32_t>(1, spec.vocab_size / (2 * n_total));
}

// Draw one token from a class's distribution: private block with probability
// `concentration`, otherwise uniform background.
std::int32_t draw_token(const SynthSpec& spec, std::int32_t block_first,
                        std::int32_t block_last, Rng& rng) {
  const std::int32_t n_total = spec.n_train_classes + spec.n_test_classes;
  const std::int32_t background_first = block_size(spec) * n_total;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (spec.class_token_concentration >= 1.0 || coin(rng) < spec.class_token_concentration) {
    std::uniform_int_distribution<std::int32_t> pick(block_first, block_last - 1);
    return pick(rng);
  }
  std::uniform_int_distribution<std::int32_t> pick(background_first, spec.vocab_size - 1);
  return pick(rng);
}

std::string make_doc(const SynthSpec& spec, bool train_class, std::int32_t class_index,
                     Rng& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::string text;
  for (std::int32_t t = 0; t < spec.tokens_per_doc; ++t) {
    bool clone = train_class && spec.shift > 0.0 &&
                 (spec.shift >= 1.0 || coin(rng) < spec.shift);
    auto [first, last] =
        clone ? private_block(spec, true, class_index % spec.n_test_classes)
              : private_block(spec, !train_class, class_index);
    std::int32_t token = draw_token(spec, first, last, rng);
    if (!text.empty()) text.push_back(' ');
    text += "w" + std::to_string(token);
  }
  return text;
}

void append_class_docs(const SynthSpec& spec, bool train_class, std::int32_t class_index,
                       std::int32_t n_docs, RawCorpus& corpus) {
  const std::string label = (train_class ? "train_c" : "test_c") + std::to_string(class_index);
  // Per-class sub-stream; train classes are salted past the test range.
  const std::uint64_t salt = train_class
                                 ? static_cast<std::uint64_t>(spec.n_test_classes + class_index)
                                 : static_cast<std::uint64_t>(class_index);
  Rng rng(derive_seed(spec.seed, salt));

  ClassId cls = corpus.classes.add(label);
  if (static_cast<std::size_t>(cls) >= corpus.class_counts.size())
    corpus.class_counts.resize(static_cast<std::size_t>(cls) + 1, 0);
  for (std::int32_t d = 0; d < n_docs; ++d) {
    RawDocument doc;
    doc.id = label + "_d" + std::to_string(d);
    doc.label = label;
    doc.text = make_doc(spec, train_class, class_index, rng);
    corpus.documents.push_back(std::move(doc));
    corpus.class_counts[static_cast<std::size_t>(cls)]++;
  }
}

}  // namespace

std::pair<std::int32_t, std::int32_t> private_block(const SynthSpec& spec, bool test_class,
                                                    std::int32_t class_index) {
  const std::int32_t block = block_size(spec);
  const std::int32_t ordinal =
      test_class ? class_index : spec.n_test_classes + class_index;
  return {ordinal * block, (ordinal + 1) * block};
}

std::pair<RawCorpus, RawCorpus> generate(const SynthSpec& spec) {
  validate(spec);
  RawCorpus train, test;
  for (std::int32_t j = 0; j < spec.n_test_classes; ++j)
    append_class_docs(spec, false, j,
                      spec.k_shot_docs_per_test_class + spec.query_docs_per_test_class, test);
  for (std::int32_t i = 0; i < spec.n_train_classes; ++i)
    append_class_docs(spec, true, i, spec.docs_per_train_class, train);
  return {std::move(train), std::move(test)};
}

void save_raw_corpus(const RawCorpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const auto& doc : corpus.documents) {
    nlohmann::json obj;
    obj["id"] = doc.id;
    obj["label"] = doc.label;
    obj["text"] = doc.text;
    out << obj.dump() << '\n';
  }
}

}  // namespace cfsl
