#ifndef CFSL_TRAINER_HPP_
#define CFSL_TRAINER_HPP_

#include <optional>
#include <string>
#include <vector>

#include "cfsl/encoder.hpp"
#include "cfsl/objectives.hpp"
#include "cfsl/types.hpp"
#include "cfsl/vocabulary.hpp"

namespace cfsl {

enum class OptimizerKind { Sgd, Adam };

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  ObjectiveKind objective = ObjectiveKind::Nce;
  int epochs = 100;
  int batch_size = 32;
  int n_neg = 5;
  double learning_rate = 1e-2;
  OptimizerKind optimizer = OptimizerKind::Adam;
  AdamParams adam;
  std::uint64_t seed = 0;
  std::int32_t embed_dim = 16;   // D
  std::int32_t output_dim = 16;  // O
  double tau = 0.1;              // SC temperature
  std::int32_t nca_dim = 0;      // A rows; 0 means output_dim (square, identity init)
  std::int64_t max_tokens = 50;

  std::int32_t effective_nca_dim() const { return nca_dim > 0 ? nca_dim : output_dim; }
  std::string fingerprint() const;
};

struct TrainedModel {
  EncoderParams encoder;
  CategoryEmbeddingTable categories;
  NCAParams nca;
  Vocabulary vocab;
  std::vector<std::string> class_names;  // merged id -> name
  std::vector<Origin> class_origins;     // merged id -> pool tag
  std::string config_fingerprint;
  std::vector<double> loss_trajectory;   // mean loss per epoch

  ClassId n_classes() const { return static_cast<ClassId>(class_names.size()); }
  // -1 when the name is unknown
  ClassId class_id_of(const std::string& name) const;
  std::vector<ClassId> kshot_class_ids() const;
};

// Mini-batch optimization of the encoder and the category table (and A for
// NCA) under the configured objective. Deterministic given (config, data,
// vocab): initialization, shuffling and negative sampling run on disjoint
// sub-streams derived from config.seed.
TrainedModel train(const TrainConfig& config, const MergedTrainingSet& data,
                   const Vocabulary& vocab);

// Central finite differences over every parameter of a freshly initialized
// model against the analytic gradients of the configured objective, on the
// given data treated as a single batch with frozen negative draws. Returns
// the max relative error.
double grad_check(const TrainConfig& config, const MergedTrainingSet& batch_data,
                  const Vocabulary& vocab, double epsilon);

}  // namespace cfsl

#endif  // CFSL_TRAINER_HPP_
