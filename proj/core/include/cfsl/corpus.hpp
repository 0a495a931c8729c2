#ifndef CFSL_CORPUS_HPP_
#define CFSL_CORPUS_HPP_

#include <string>
#include <vector>

#include "cfsl/types.hpp"
#include "cfsl/vocabulary.hpp"

namespace cfsl {

// Reads a JSON-lines corpus: one object per line with "text", "label" and an
// optional "id". Missing ids become the 1-based line number. Class ids are
// assigned in first-seen order.
RawCorpus load_corpus(const std::string& path);

// Count tokens across the corpus, drop tokens below min_count, keep at most
// max_size by descending count (ties lexicographic). Id 0 stays reserved.
Vocabulary build_vocabulary(const RawCorpus& corpus, std::int64_t min_count,
                            std::int64_t max_size);
Vocabulary build_vocabulary(const std::vector<const RawCorpus*>& corpora,
                            std::int64_t min_count, std::int64_t max_size);

// Tokenize, map to ids (UNK for OOV) and keep the first max_tokens tokens.
// Throws DomainError when tokenization leaves nothing.
Document tokenize_truncate(const RawDocument& doc, const Vocabulary& vocab,
                           std::int64_t max_tokens, ClassId label);

LabeledCorpus tokenize_corpus(const RawCorpus& corpus, const Vocabulary& vocab,
                              std::int64_t max_tokens);

// Split a document into contiguous token chunks of chunk_size, keeping the
// final short chunk and at most max_chunks chunks. Chunk ids are the parent
// id suffixed with "#<index>".
std::vector<RawDocument> partition_document(const RawDocument& doc,
                                            std::int64_t chunk_size,
                                            std::int64_t max_chunks);

RawCorpus partition_corpus(const RawCorpus& corpus, std::int64_t chunk_size,
                           std::int64_t max_chunks);

// Uniformly subsample every class exceeding m_tshot down to m_tshot documents
// (without replacement, seeded). Document order follows the input corpus.
RawCorpus apply_tshot_constraint(const RawCorpus& corpus, const ConstraintSpec& spec);
LabeledCorpus apply_tshot_constraint(const LabeledCorpus& corpus, const ConstraintSpec& spec);

// Build D'_train from the training pool and a support set. Class names must
// be disjoint between the two; merged ids place train classes first.
MergedTrainingSet merge_training_set(const LabeledCorpus& train, const SupportSet& support);

// Tokenized-corpus persistence (JSON lines with "id", "label", "tokens").
void save_labeled_corpus(const LabeledCorpus& corpus, const std::string& path);
LabeledCorpus load_labeled_corpus(const std::string& path, bool allow_empty = false);

}  // namespace cfsl

#endif  // CFSL_CORPUS_HPP_
