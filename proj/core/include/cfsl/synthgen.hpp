#ifndef CFSL_SYNTHGEN_HPP_
#define CFSL_SYNTHGEN_HPP_

#include <cstdint>
#include <utility>

#include "cfsl/types.hpp"

namespace cfsl {

// Token-block mixture corpus: every class owns a private token block and
// shares a background block. `class_token_concentration` is the probability
// of drawing from the private block; `shift` is the probability that a train
// class draws from its paired test class's distribution instead of its own
// (at 1 the train class clones the test class).
struct SynthSpec {
  std::int32_t n_train_classes = 4;
  std::int32_t n_test_classes = 2;
  std::int32_t docs_per_train_class = 1;
  std::int32_t k_shot_docs_per_test_class = 5;
  std::int32_t query_docs_per_test_class = 15;
  std::int32_t vocab_size = 200;
  std::int32_t tokens_per_doc = 20;
  double class_token_concentration = 1.0;  // in (0, 1]
  double shift = 0.0;                      // in [0, 1]
  std::uint64_t seed = 0;
};

// Returns (train, test) corpora in the JSON-lines RawCorpus shape. Class
// labels are "train_c<i>" and "test_c<j>"; document ids are
// "<label>_d<n>". Deterministic given the seed, with per-class derived
// sub-streams.
std::pair<RawCorpus, RawCorpus> generate(const SynthSpec& spec);

// The private token block of a class, as [first, last) token indices. Test
// classes come first in block order.
std::pair<std::int32_t, std::int32_t> private_block(const SynthSpec& spec, bool test_class,
                                                    std::int32_t class_index);

void save_raw_corpus(const RawCorpus& corpus, const std::string& path);

}  // namespace cfsl

#endif  // CFSL_SYNTHGEN_HPP_
