#ifndef CFSL_TYPES_HPP_
#define CFSL_TYPES_HPP_

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace cfsl {

using ClassId = std::int32_t;
using TokenId = std::int32_t;

// A document as read from disk, before tokenization.
struct RawDocument {
  std::string id;
  std::string text;
  std::string label;
};

// A tokenized document. `label` indexes the class index of the owning corpus.
struct Document {
  std::string id;
  std::vector<TokenId> tokens;
  ClassId label = -1;
};

// Bidirectional class-name <-> class-id map. Ids are assigned in first-seen
// order and are dense in [0, size).
struct ClassIndex {
  std::vector<std::string> names;
  std::unordered_map<std::string, ClassId> ids;

  ClassId add(const std::string& name) {
    auto it = ids.find(name);
    if (it != ids.end()) return it->second;
    ClassId id = static_cast<ClassId>(names.size());
    names.push_back(name);
    ids.emplace(name, id);
    return id;
  }
  ClassId id_of(const std::string& name) const {
    auto it = ids.find(name);
    return it == ids.end() ? -1 : it->second;
  }
  std::size_t size() const { return names.size(); }
};

struct RawCorpus {
  std::vector<RawDocument> documents;
  ClassIndex classes;
  std::vector<std::int64_t> class_counts;  // class id -> document count
};

struct LabeledCorpus {
  std::vector<Document> documents;
  ClassIndex classes;
  std::vector<std::int64_t> class_counts;
};

// The M-tshot cap: at most m_tshot instances of each training class survive.
struct ConstraintSpec {
  std::int64_t m_tshot = 1;
  std::uint64_t seed = 0;
};

enum class Origin : std::uint8_t { TrainClass = 0, TestKShot = 1 };

// One support class: K documents of a single test class. Ids/labels are in
// the test corpus's class space.
struct SupportClass {
  ClassId class_id = -1;
  std::string class_name;
  std::vector<Document> docs;
};

struct SupportSet {
  std::vector<SupportClass> classes;  // sorted by class_id

  std::size_t n_way() const { return classes.size(); }
  std::size_t k_shot() const { return classes.empty() ? 0 : classes.front().docs.size(); }
};

struct QuerySet {
  std::vector<Document> docs;  // labels are test-corpus class ids
};

// D'_train: the training pool plus the support set, over a fresh class-id
// space. Train classes occupy ids [0, n_train_classes), K-shot test classes
// the remainder. The two pools are disjoint by construction.
struct MergedTrainingSet {
  std::vector<Document> documents;       // labels are merged class ids
  std::vector<Origin> origins;           // parallel to documents
  std::vector<std::string> class_names;  // merged id -> name
  ClassId n_train_classes = 0;

  ClassId n_classes() const { return static_cast<ClassId>(class_names.size()); }
  Origin class_origin(ClassId c) const {
    return c < n_train_classes ? Origin::TrainClass : Origin::TestKShot;
  }
  std::vector<ClassId> train_class_ids() const {
    std::vector<ClassId> out;
    for (ClassId c = 0; c < n_train_classes; ++c) out.push_back(c);
    return out;
  }
  std::vector<ClassId> kshot_class_ids() const {
    std::vector<ClassId> out;
    for (ClassId c = n_train_classes; c < n_classes(); ++c) out.push_back(c);
    return out;
  }
};

}  // namespace cfsl

#endif  // CFSL_TYPES_HPP_
