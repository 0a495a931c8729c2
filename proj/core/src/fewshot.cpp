#include "cfsl/fewshot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "cfsl/error.hpp"
#include "cfsl/rng.hpp"

namespace cfsl {

namespace {

using nlohmann::json;

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

double population_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

std::string metric_to_string(EvalMetric metric) {
  return metric == EvalMetric::Full ? "full" : "episodic";
}

std::string mode_to_string(EvalMode mode) {
  return mode == EvalMode::CategoryTable ? "category-table" : "prototypes";
}

// Candidate vectors from the model's learned K-shot category embeddings,
// keyed by the given corpus-space class ids.
ClassVectors category_candidates(const TrainedModel& model, const ClassIndex& classes,
                                 const std::vector<ClassId>& wanted) {
  ClassVectors candidates;
  for (ClassId y : wanted) {
    const std::string& name = classes.names[static_cast<std::size_t>(y)];
    ClassId merged = model.class_id_of(name);
    if (merged < 0 || model.class_origins[static_cast<std::size_t>(merged)] != Origin::TestKShot)
      throw DomainError("test class '" + name +
                        "' is not covered by the model's K-shot classes");
    candidates[y] = model.categories.rows().row(model.categories.row_of(merged)).transpose();
  }
  return candidates;
}

}  // namespace

std::pair<SupportSet, QuerySet> sample_support_query(const LabeledCorpus& test,
                                                     const EpisodeSpec& spec) {
  if (spec.n_way < 2) throw DomainError("n_way must be >= 2");
  if (spec.k_shot < 1) throw DomainError("k_shot must be >= 1");
  if (spec.queries_per_class < 0) throw DomainError("queries_per_class must be >= 0");
  const ClassId n_classes = static_cast<ClassId>(test.classes.size());
  if (n_classes < spec.n_way)
    throw DomainError("corpus has " + std::to_string(n_classes) + " classes; need " +
                      std::to_string(spec.n_way));

  Rng rng(spec.seed);
  std::vector<ClassId> all_classes(static_cast<std::size_t>(n_classes));
  std::iota(all_classes.begin(), all_classes.end(), 0);
  std::vector<ClassId> chosen;
  std::sample(all_classes.begin(), all_classes.end(), std::back_inserter(chosen),
              static_cast<std::size_t>(spec.n_way), rng);

  std::vector<std::vector<std::size_t>> positions(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < test.documents.size(); ++i)
    positions[static_cast<std::size_t>(test.documents[i].label)].push_back(i);

  SupportSet support;
  QuerySet query;
  for (ClassId cls : chosen) {
    auto pos = positions[static_cast<std::size_t>(cls)];
    const std::size_t k = static_cast<std::size_t>(spec.k_shot);
    const std::size_t q = static_cast<std::size_t>(spec.queries_per_class);
    const std::size_t needed = q == 0 ? k : k + q;
    if (pos.size() < needed)
      throw DomainError("class '" + test.classes.names[static_cast<std::size_t>(cls)] +
                        "' has " + std::to_string(pos.size()) + " documents; need " +
                        std::to_string(needed));
    std::shuffle(pos.begin(), pos.end(), rng);

    SupportClass sc;
    sc.class_id = cls;
    sc.class_name = test.classes.names[static_cast<std::size_t>(cls)];
    for (std::size_t i = 0; i < k; ++i) sc.docs.push_back(test.documents[pos[i]]);
    support.classes.push_back(std::move(sc));

    const std::size_t q_end = q == 0 ? pos.size() : k + q;
    for (std::size_t i = k; i < q_end; ++i) query.docs.push_back(test.documents[pos[i]]);
  }
  return {std::move(support), std::move(query)};
}

ClassVectors compute_prototypes(const SupportSet& support, const EncodeFn& encode_doc) {
  ClassVectors prototypes;
  for (const auto& sc : support.classes) {
    if (sc.docs.empty())
      throw DomainError("support class '" + sc.class_name + "' has no documents");
    Vector sum;
    for (const auto& doc : sc.docs) {
      Vector v = encode_doc(doc);
      if (sum.size() == 0)
        sum = v;
      else
        sum += v;
    }
    prototypes[sc.class_id] = sum / static_cast<double>(sc.docs.size());
  }
  return prototypes;
}

ClassVectors compute_prototypes(const SupportSet& support, const TrainedModel& model) {
  return compute_prototypes(
      support, [&model](const Document& doc) { return encode(doc, model.encoder); });
}

ClassId classify(const Vector& embedding, const ClassVectors& candidates) {
  if (candidates.empty()) throw DomainError("empty test class set");
  ClassId best = -1;
  double best_dist = 0.0;
  for (const auto& [cls, vec] : candidates) {
    double dist = (embedding - vec).squaredNorm();
    if (best < 0 || dist < best_dist) {
      best = cls;
      best_dist = dist;
    }
  }
  return best;
}

EvalReport evaluate_full(const TrainedModel& model, const std::vector<SupportSet>& supports,
                         const LabeledCorpus& test, EvalMode mode) {
  if (supports.empty()) throw DomainError("no support sets to evaluate");
  if (test.documents.empty()) throw DomainError("empty test corpus");

  std::vector<ClassId> test_classes(test.classes.size());
  std::iota(test_classes.begin(), test_classes.end(), 0);

  ClassVectors table_candidates;
  if (mode == EvalMode::CategoryTable)
    table_candidates = category_candidates(model, test.classes, test_classes);

  // Embeddings do not depend on the support set; encode once.
  std::vector<Vector> embeddings;
  embeddings.reserve(test.documents.size());
  for (const auto& doc : test.documents) embeddings.push_back(encode(doc, model.encoder));

  EvalReport report;
  report.metric = EvalMetric::Full;
  report.mode = mode;

  for (std::size_t s = 0; s < supports.size(); ++s) {
    const SupportSet& support = supports[s];
    ClassVectors candidates;
    if (mode == EvalMode::CategoryTable) {
      candidates = table_candidates;
    } else {
      candidates = compute_prototypes(support, model);
      for (ClassId y : test_classes)
        if (!candidates.count(y))
          throw DomainError("test class '" + test.classes.names[static_cast<std::size_t>(y)] +
                            "' is not covered by support set " + std::to_string(s));
    }

    std::unordered_set<std::string> support_ids;
    for (const auto& sc : support.classes)
      for (const auto& doc : sc.docs) support_ids.insert(doc.id);

    long long correct = 0, evaluated = 0;
    for (std::size_t i = 0; i < test.documents.size(); ++i) {
      const Document& doc = test.documents[i];
      if (support_ids.count(doc.id)) continue;
      ClassId pred = classify(embeddings[i], candidates);
      ++evaluated;
      if (pred == doc.label) ++correct;
      const auto& true_name = test.classes.names[static_cast<std::size_t>(doc.label)];
      const auto& pred_name = test.classes.names[static_cast<std::size_t>(pred)];
      report.confusion[true_name][pred_name]++;
    }
    if (evaluated == 0)
      throw DomainError("support set " + std::to_string(s) + " covers the whole test corpus");
    report.accuracies.push_back(static_cast<double>(correct) /
                                static_cast<double>(evaluated));
    report.total_evaluated += evaluated;
    report.total_correct += correct;
  }

  report.mean = std::accumulate(report.accuracies.begin(), report.accuracies.end(), 0.0) /
                static_cast<double>(report.accuracies.size());
  report.stddev = population_std(report.accuracies, report.mean);
  return report;
}

EvalReport evaluate_episodic(const TrainedModel& model, const std::vector<Episode>& episodes,
                             EvalMode mode) {
  if (episodes.empty()) throw DomainError("no episodes to evaluate");

  EvalReport report;
  report.metric = EvalMetric::Episodic;
  report.mode = mode;

  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const auto& [support, query] = episodes[e];
    if (query.docs.empty())
      throw DomainError("empty query set in episode " + std::to_string(e));

    ClassVectors candidates;
    std::unordered_map<ClassId, std::string> names;
    for (const auto& sc : support.classes) names[sc.class_id] = sc.class_name;

    if (mode == EvalMode::CategoryTable) {
      for (const auto& sc : support.classes) {
        ClassId merged = model.class_id_of(sc.class_name);
        if (merged < 0 ||
            model.class_origins[static_cast<std::size_t>(merged)] != Origin::TestKShot)
          throw DomainError("test class '" + sc.class_name +
                            "' is not covered by the model's K-shot classes");
        candidates[sc.class_id] =
            model.categories.rows().row(model.categories.row_of(merged)).transpose();
      }
    } else {
      candidates = compute_prototypes(support, model);
    }

    long long correct = 0;
    for (const auto& doc : query.docs) {
      if (!candidates.count(doc.label))
        throw DomainError("query document '" + doc.id +
                          "' has a label outside the episode's support classes");
      ClassId pred = classify(encode(doc, model.encoder), candidates);
      if (pred == doc.label) ++correct;
      report.confusion[names[doc.label]][names[pred]]++;
    }
    report.accuracies.push_back(static_cast<double>(correct) /
                                static_cast<double>(query.docs.size()));
    report.total_evaluated += static_cast<long long>(query.docs.size());
    report.total_correct += correct;
  }

  // Eq.-style pooling: every query counts once regardless of episode size.
  report.mean =
      static_cast<double>(report.total_correct) / static_cast<double>(report.total_evaluated);
  double acc_mean =
      std::accumulate(report.accuracies.begin(), report.accuracies.end(), 0.0) /
      static_cast<double>(report.accuracies.size());
  report.stddev = population_std(report.accuracies, acc_mean);
  return report;
}

void save_eval_report_json(const EvalReport& report, const std::string& path) {
  json obj;
  obj["version"] = 1;
  obj["metric"] = metric_to_string(report.metric);
  obj["mode"] = mode_to_string(report.mode);
  obj["accuracies"] = report.accuracies;
  obj["mean"] = report.mean;
  obj["std"] = report.stddev;
  obj["total_evaluated"] = report.total_evaluated;
  obj["total_correct"] = report.total_correct;
  json confusion = json::object();
  for (const auto& [true_name, row] : report.confusion) {
    json preds = json::object();
    for (const auto& [pred_name, count] : row) preds[pred_name] = count;
    confusion[true_name] = preds;
  }
  obj["confusion"] = confusion;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << obj.dump(2) << '\n';
}

void save_eval_report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "support_set,metric,accuracy\n";
  for (std::size_t i = 0; i < report.accuracies.size(); ++i)
    out << i << ',' << metric_to_string(report.metric) << ','
        << fmt_double(report.accuracies[i]) << '\n';
  out << "mean," << metric_to_string(report.metric) << ',' << fmt_double(report.mean) << '\n';
}

void save_confusion_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "true_class,predicted_class,count\n";
  for (const auto& [true_name, row] : report.confusion)
    for (const auto& [pred_name, count] : row)
      out << true_name << ',' << pred_name << ',' << count << '\n';
}

void save_support_set(const SupportSet& support, const std::string& path) {
  json obj;
  obj["version"] = 1;
  json classes = json::array();
  for (const auto& sc : support.classes) {
    json entry;
    entry["name"] = sc.class_name;
    json ids = json::array();
    for (const auto& doc : sc.docs) ids.push_back(doc.id);
    entry["doc_ids"] = ids;
    classes.push_back(entry);
  }
  obj["classes"] = classes;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << obj.dump(2) << '\n';
}

SupportSet load_support_set(const std::string& path, const LabeledCorpus& corpus) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open support set " + path);
  json obj;
  try {
    obj = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path + ": parse error: " + e.what());
  }
  if (!obj.is_object() || obj.value("version", 0) != 1 || !obj.contains("classes"))
    throw IoError(path + ": not a version-1 support set file");

  std::unordered_map<std::string, std::size_t> doc_index;
  for (std::size_t i = 0; i < corpus.documents.size(); ++i)
    doc_index[corpus.documents[i].id] = i;

  SupportSet support;
  for (const auto& entry : obj["classes"]) {
    SupportClass sc;
    sc.class_name = entry.at("name").get<std::string>();
    sc.class_id = corpus.classes.id_of(sc.class_name);
    if (sc.class_id < 0)
      throw IoError(path + ": class '" + sc.class_name + "' not present in corpus");
    for (const auto& id : entry.at("doc_ids")) {
      auto it = doc_index.find(id.get<std::string>());
      if (it == doc_index.end())
        throw IoError(path + ": support document '" + id.get<std::string>() +
                      "' not found in corpus");
      sc.docs.push_back(corpus.documents[it->second]);
    }
    support.classes.push_back(std::move(sc));
  }
  std::sort(support.classes.begin(), support.classes.end(),
            [](const SupportClass& a, const SupportClass& b) { return a.class_id < b.class_id; });
  return support;
}

}  // namespace cfsl
