#ifndef CFSL_FEWSHOT_HPP_
#define CFSL_FEWSHOT_HPP_

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cfsl/trainer.hpp"
#include "cfsl/types.hpp"

namespace cfsl {

struct EpisodeSpec {
  int n_way = 2;
  int k_shot = 1;
  int queries_per_class = 0;  // 0 means all remaining documents
  std::uint64_t seed = 0;
};

// Uniformly choose n_way classes, then k_shot support documents and the query
// documents per class, all without replacement. Support and query are
// disjoint by construction.
std::pair<SupportSet, QuerySet> sample_support_query(const LabeledCorpus& test,
                                                     const EpisodeSpec& spec);

// class id (test-corpus space) -> candidate vector
using ClassVectors = std::map<ClassId, Vector>;

using EncodeFn = std::function<Vector(const Document&)>;

// Mean of the encoded support documents per class.
ClassVectors compute_prototypes(const SupportSet& support, const TrainedModel& model);
ClassVectors compute_prototypes(const SupportSet& support, const EncodeFn& encode_doc);

// Nearest category under squared euclidean distance; ties go to the lowest
// class id.
ClassId classify(const Vector& embedding, const ClassVectors& candidates);

enum class EvalMode { CategoryTable, Prototypes };
enum class EvalMetric { Full, Episodic };

struct EvalReport {
  EvalMetric metric = EvalMetric::Full;
  EvalMode mode = EvalMode::CategoryTable;
  std::vector<double> accuracies;  // per support set (full) or per episode
  // Full: mean of per-support accuracies. Episodic: pooled accuracy, i.e.
  // total correct over total queries.
  double mean = 0.0;
  double stddev = 0.0;  // population std across the accuracies
  long long total_evaluated = 0;
  long long total_correct = 0;
  std::map<std::string, std::map<std::string, long long>> confusion;  // true -> pred
};

// Accuracy of each support set against all test documents outside it.
// CategoryTable mode classifies against the learned K-shot category
// embeddings and ignores the support documents at inference; Prototypes mode
// rebuilds prototypes from each support set.
EvalReport evaluate_full(const TrainedModel& model, const std::vector<SupportSet>& supports,
                         const LabeledCorpus& test, EvalMode mode);

using Episode = std::pair<SupportSet, QuerySet>;

// Pooled query accuracy across episodes (total correct / total queries).
EvalReport evaluate_episodic(const TrainedModel& model, const std::vector<Episode>& episodes,
                             EvalMode mode);

void save_eval_report_json(const EvalReport& report, const std::string& path);
void save_eval_report_csv(const EvalReport& report, const std::string& path);
void save_confusion_csv(const EvalReport& report, const std::string& path);

// Support-set persistence: JSON holding class names and document ids,
// resolved against a tokenized corpus on load.
void save_support_set(const SupportSet& support, const std::string& path);
SupportSet load_support_set(const std::string& path, const LabeledCorpus& corpus);

}  // namespace cfsl

#endif  // CFSL_FEWSHOT_HPP_
