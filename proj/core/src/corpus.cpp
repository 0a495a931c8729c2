#include "cfsl/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "cfsl/error.hpp"
#include "cfsl/rng.hpp"

namespace cfsl {

namespace {

using nlohmann::json;

std::vector<std::int64_t> count_classes(const std::vector<Document>& docs,
                                        std::size_t n_classes) {
  std::vector<std::int64_t> counts(n_classes, 0);
  for (const auto& d : docs) counts[static_cast<std::size_t>(d.label)]++;
  return counts;
}

}  // namespace

RawCorpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file " + path);

  RawCorpus corpus;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": parse error: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("text") || !obj.contains("label") ||
        !obj["text"].is_string() || !obj["label"].is_string())
      throw IoError(path + ":" + std::to_string(line_no) +
                    ": expected object with string \"text\" and \"label\"");

    RawDocument doc;
    doc.text = obj["text"].get<std::string>();
    doc.label = obj["label"].get<std::string>();
    if (doc.label.empty())
      throw IoError(path + ":" + std::to_string(line_no) + ": empty label");
    if (obj.contains("id")) {
      if (!obj["id"].is_string())
        throw IoError(path + ":" + std::to_string(line_no) + ": \"id\" must be a string");
      doc.id = obj["id"].get<std::string>();
    } else {
      doc.id = std::to_string(line_no);
    }
    if (!seen_ids.insert(doc.id).second)
      throw IoError(path + ":" + std::to_string(line_no) + ": duplicate document id '" +
                    doc.id + "'");

    ClassId cls = corpus.classes.add(doc.label);
    if (static_cast<std::size_t>(cls) >= corpus.class_counts.size())
      corpus.class_counts.resize(cls + 1, 0);
    corpus.class_counts[static_cast<std::size_t>(cls)]++;
    corpus.documents.push_back(std::move(doc));
  }
  if (corpus.documents.empty()) throw IoError("empty corpus: " + path);
  return corpus;
}

Vocabulary build_vocabulary(const std::vector<const RawCorpus*>& corpora,
                            std::int64_t min_count, std::int64_t max_size) {
  if (min_count < 1) throw DomainError("min_count must be >= 1");
  if (max_size < 1) throw DomainError("max_size must be >= 1");

  std::unordered_map<std::string, std::int64_t> counts;
  for (const RawCorpus* corpus : corpora)
    for (const auto& doc : corpus->documents)
      for (auto& token : tokenize_text(doc.text)) counts[std::move(token)]++;

  std::vector<std::pair<std::string, std::int64_t>> retained;
  retained.reserve(counts.size());
  for (auto& [token, count] : counts)
    if (count >= min_count) retained.emplace_back(token, count);
  if (retained.empty()) throw DomainError("no token survives vocabulary filtering");

  std::sort(retained.begin(), retained.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<std::int64_t>(retained.size()) > max_size)
    retained.resize(static_cast<std::size_t>(max_size));

  Vocabulary vocab;
  for (auto& [token, count] : retained) vocab.add(std::move(token), count);
  return vocab;
}

Vocabulary build_vocabulary(const RawCorpus& corpus, std::int64_t min_count,
                            std::int64_t max_size) {
  return build_vocabulary(std::vector<const RawCorpus*>{&corpus}, min_count, max_size);
}

Document tokenize_truncate(const RawDocument& doc, const Vocabulary& vocab,
                           std::int64_t max_tokens, ClassId label) {
  if (max_tokens < 1) throw DomainError("max_tokens must be >= 1");
  auto words = tokenize_text(doc.text);
  if (words.empty())
    throw DomainError("document '" + doc.id + "' has no tokens after tokenization");

  Document out;
  out.id = doc.id;
  out.label = label;
  std::size_t keep = std::min<std::size_t>(words.size(), static_cast<std::size_t>(max_tokens));
  out.tokens.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.tokens.push_back(vocab.id_of(words[i]));
  return out;
}

LabeledCorpus tokenize_corpus(const RawCorpus& corpus, const Vocabulary& vocab,
                              std::int64_t max_tokens) {
  LabeledCorpus out;
  out.classes = corpus.classes;
  out.documents.reserve(corpus.documents.size());
  for (const auto& doc : corpus.documents) {
    ClassId label = corpus.classes.id_of(doc.label);
    out.documents.push_back(tokenize_truncate(doc, vocab, max_tokens, label));
  }
  out.class_counts = count_classes(out.documents, out.classes.size());
  return out;
}

std::vector<RawDocument> partition_document(const RawDocument& doc,
                                            std::int64_t chunk_size,
                                            std::int64_t max_chunks) {
  if (chunk_size < 1) throw DomainError("chunk_size must be >= 1");
  if (max_chunks < 1) throw DomainError("max_chunks must be >= 1");
  auto words = tokenize_text(doc.text);
  if (words.empty()) throw DomainError("document '" + doc.id + "' is empty");

  std::vector<RawDocument> chunks;
  std::size_t step = static_cast<std::size_t>(chunk_size);
  for (std::size_t start = 0;
       start < words.size() && chunks.size() < static_cast<std::size_t>(max_chunks);
       start += step) {
    std::size_t end = std::min(words.size(), start + step);
    std::string text;
    for (std::size_t i = start; i < end; ++i) {
      if (i > start) text.push_back(' ');
      text += words[i];
    }
    RawDocument chunk;
    chunk.id = doc.id + "#" + std::to_string(chunks.size());
    chunk.text = std::move(text);
    chunk.label = doc.label;
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

RawCorpus partition_corpus(const RawCorpus& corpus, std::int64_t chunk_size,
                           std::int64_t max_chunks) {
  RawCorpus out;
  out.classes = corpus.classes;
  out.class_counts.assign(corpus.classes.size(), 0);
  for (const auto& doc : corpus.documents) {
    for (auto& chunk : partition_document(doc, chunk_size, max_chunks)) {
      ClassId cls = out.classes.id_of(chunk.label);
      out.class_counts[static_cast<std::size_t>(cls)]++;
      out.documents.push_back(std::move(chunk));
    }
  }
  return out;
}

namespace {

// Indices to keep under the M-tshot cap, in original document order. The rng
// is consumed class by class in ascending class-id order.
std::vector<bool> tshot_keep_mask(const std::vector<ClassId>& labels,
                                  std::size_t n_classes, const ConstraintSpec& spec) {
  if (spec.m_tshot < 1) throw DomainError("m_tshot must be >= 1");
  std::vector<std::vector<std::size_t>> positions(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i)
    positions[static_cast<std::size_t>(labels[i])].push_back(i);

  Rng rng(spec.seed);
  std::vector<bool> keep(labels.size(), true);
  for (std::size_t cls = 0; cls < n_classes; ++cls) {
    auto& pos = positions[cls];
    if (static_cast<std::int64_t>(pos.size()) <= spec.m_tshot) continue;
    std::vector<std::size_t> chosen;
    std::sample(pos.begin(), pos.end(), std::back_inserter(chosen),
                static_cast<std::size_t>(spec.m_tshot), rng);
    for (std::size_t p : pos) keep[p] = false;
    for (std::size_t p : chosen) keep[p] = true;
  }
  return keep;
}

}  // namespace

RawCorpus apply_tshot_constraint(const RawCorpus& corpus, const ConstraintSpec& spec) {
  if (corpus.documents.empty()) throw DomainError("empty corpus");
  std::vector<ClassId> labels;
  labels.reserve(corpus.documents.size());
  for (const auto& d : corpus.documents) labels.push_back(corpus.classes.id_of(d.label));

  auto keep = tshot_keep_mask(labels, corpus.classes.size(), spec);
  RawCorpus out;
  out.classes = corpus.classes;
  out.class_counts.assign(corpus.classes.size(), 0);
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    if (!keep[i]) continue;
    out.class_counts[static_cast<std::size_t>(labels[i])]++;
    out.documents.push_back(corpus.documents[i]);
  }
  return out;
}

LabeledCorpus apply_tshot_constraint(const LabeledCorpus& corpus, const ConstraintSpec& spec) {
  if (corpus.documents.empty()) throw DomainError("empty corpus");
  std::vector<ClassId> labels;
  labels.reserve(corpus.documents.size());
  for (const auto& d : corpus.documents) labels.push_back(d.label);

  auto keep = tshot_keep_mask(labels, corpus.classes.size(), spec);
  LabeledCorpus out;
  out.classes = corpus.classes;
  for (std::size_t i = 0; i < corpus.documents.size(); ++i)
    if (keep[i]) out.documents.push_back(corpus.documents[i]);
  out.class_counts = count_classes(out.documents, out.classes.size());
  return out;
}

MergedTrainingSet merge_training_set(const LabeledCorpus& train, const SupportSet& support) {
  for (const auto& sc : support.classes)
    if (train.classes.id_of(sc.class_name) >= 0)
      throw DomainError("class name '" + sc.class_name +
                        "' appears in both the training and support pools");

  MergedTrainingSet merged;
  merged.n_train_classes = static_cast<ClassId>(train.classes.size());
  merged.class_names = train.classes.names;

  merged.documents.reserve(train.documents.size());
  for (const auto& doc : train.documents) {
    merged.documents.push_back(doc);
    merged.origins.push_back(Origin::TrainClass);
  }
  for (const auto& sc : support.classes) {
    ClassId merged_id = static_cast<ClassId>(merged.class_names.size());
    merged.class_names.push_back(sc.class_name);
    for (const auto& doc : sc.docs) {
      Document copy = doc;
      copy.label = merged_id;
      merged.documents.push_back(std::move(copy));
      merged.origins.push_back(Origin::TestKShot);
    }
  }
  return merged;
}

void save_labeled_corpus(const LabeledCorpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const auto& doc : corpus.documents) {
    json obj;
    obj["id"] = doc.id;
    obj["label"] = corpus.classes.names[static_cast<std::size_t>(doc.label)];
    obj["tokens"] = doc.tokens;
    out << obj.dump() << '\n';
  }
}

LabeledCorpus load_labeled_corpus(const std::string& path, bool allow_empty) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file " + path);
  LabeledCorpus corpus;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": parse error: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj.contains("label") ||
        !obj.contains("tokens"))
      throw IoError(path + ":" + std::to_string(line_no) +
                    ": expected object with \"id\", \"label\", \"tokens\"");
    Document doc;
    doc.id = obj["id"].get<std::string>();
    doc.tokens = obj["tokens"].get<std::vector<TokenId>>();
    doc.label = corpus.classes.add(obj["label"].get<std::string>());
    if (doc.tokens.empty())
      throw IoError(path + ":" + std::to_string(line_no) + ": empty token list");
    if (!seen_ids.insert(doc.id).second)
      throw IoError(path + ":" + std::to_string(line_no) + ": duplicate document id '" +
                    doc.id + "'");
    corpus.documents.push_back(std::move(doc));
  }
  if (corpus.documents.empty() && !allow_empty) throw IoError("empty corpus: " + path);
  corpus.class_counts = count_classes(corpus.documents, corpus.classes.size());
  return corpus;
}

}  // namespace cfsl
