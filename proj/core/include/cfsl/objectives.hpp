#ifndef CFSL_OBJECTIVES_HPP_
#define CFSL_OBJECTIVES_HPP_

#include <map>
#include <span>
#include <vector>

#include "cfsl/encoder.hpp"
#include "cfsl/rng.hpp"
#include "cfsl/types.hpp"

namespace cfsl {

enum class ObjectiveKind { Nce, Cc, Sc, Nca, Xent };

ObjectiveKind objective_from_string(const std::string& name);
std::string objective_to_string(ObjectiveKind kind);

// One learned vector per class in C_T u C_K; row index equals the merged
// class id.
class CategoryEmbeddingTable {
 public:
  CategoryEmbeddingTable() = default;
  CategoryEmbeddingTable(ClassId n_classes, Eigen::Index output_dim, Rng& rng);

  Eigen::Index row_of(ClassId id) const;
  const Matrix& rows() const { return rows_; }
  Matrix& rows() { return rows_; }
  ClassId n_classes() const { return static_cast<ClassId>(rows_.rows()); }
  Eigen::Index output_dim() const { return rows_.cols(); }

 private:
  Matrix rows_;
};

// Uniform noise distribution over a class pool. The anchor's own class is
// excluded per draw.
struct NoiseDistribution {
  std::vector<ClassId> pool;  // ascending class ids
};

struct SCConfig {
  double tau = 0.1;
};

struct NCAParams {
  Matrix projection;  // A, O' x O
};

// Identity when square, otherwise scaled-uniform.
NCAParams init_nca_params(Eigen::Index rows, Eigen::Index cols, Rng& rng);

// One document as the objectives see it: its encoded embedding, its merged
// class id, and which pool it came from.
struct BatchItem {
  Vector embedding;
  ClassId class_id = -1;
  Origin origin = Origin::TrainClass;
};

struct LossResult {
  double loss = 0.0;
  std::vector<Vector> encoder_upstream;       // d loss / d v_d per batch item
  std::map<ClassId, Vector> category_grads;   // touched category rows only
  Matrix nca_projection_grad;                 // d loss / d A (NCA only)
  int skipped_anchors = 0;
  // Sampled negative class ids per anchor (NCE/CC only), for audit.
  std::vector<std::vector<ClassId>> sampled_negatives;
};

// n_neg iid uniform draws with replacement from pool \ {anchor_class}.
std::vector<ClassId> sample_negatives(ClassId anchor_class, const NoiseDistribution& dist,
                                      int n_neg, Rng& rng);

// NCE: loss = -(1/B) sum_i [log s(v_c.v_d) + sum_j log s(-v_n.v_d)].
LossResult nce_loss(std::span<const BatchItem> batch, const CategoryEmbeddingTable& table,
                    const NoiseDistribution& dist, int n_neg, Rng& rng);
LossResult nce_loss_with_negatives(std::span<const BatchItem> batch,
                                   const CategoryEmbeddingTable& table,
                                   const std::vector<std::vector<ClassId>>& negatives);

// Categorical contrastive loss: NCE with the negative pool split by the
// anchor's origin. Test-class anchors draw only from other K-shot test
// classes, training-class anchors only from other training classes.
LossResult cc_loss(std::span<const BatchItem> batch, const CategoryEmbeddingTable& table,
                   const NoiseDistribution& dist_train, const NoiseDistribution& dist_kshot,
                   int n_neg, Rng& rng);
LossResult cc_loss_with_negatives(std::span<const BatchItem> batch,
                                  const CategoryEmbeddingTable& table,
                                  const std::vector<std::vector<ClassId>>& negatives);

// Supervised contrastive loss over in-batch positives, temperature tau.
// Anchors without positives are skipped and counted; a batch where every
// anchor is skipped is an error.
LossResult sc_loss(std::span<const BatchItem> batch, const SCConfig& config);

// Neighbourhood component analysis loss under the learned projection A.
// Same skip rule as sc_loss.
LossResult nca_loss(std::span<const BatchItem> batch, const NCAParams& params);

// Softmax cross-entropy over every class in the table.
LossResult xent_loss(std::span<const BatchItem> batch, const CategoryEmbeddingTable& table);

}  // namespace cfsl

#endif  // CFSL_OBJECTIVES_HPP_
