#include "cfsl/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cfsl/error.hpp"

namespace cfsl {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double log_sigmoid(double x) {
  // -log(1 + e^-x), computed on the stable side
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

void add_category_grad(std::map<ClassId, Vector>& grads, ClassId id, const Vector& g) {
  auto [it, inserted] = grads.try_emplace(id, g);
  if (!inserted) it->second += g;
}

void check_batch_classes(std::span<const BatchItem> batch,
                         const CategoryEmbeddingTable& table) {
  for (const auto& item : batch) table.row_of(item.class_id);
}

}  // namespace

ObjectiveKind objective_from_string(const std::string& name) {
  if (name == "nce") return ObjectiveKind::Nce;
  if (name == "cc") return ObjectiveKind::Cc;
  if (name == "sc") return ObjectiveKind::Sc;
  if (name == "nca") return ObjectiveKind::Nca;
  if (name == "xent") return ObjectiveKind::Xent;
  throw DomainError("unknown objective '" + name + "'");
}

std::string objective_to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::Nce: return "nce";
    case ObjectiveKind::Cc: return "cc";
    case ObjectiveKind::Sc: return "sc";
    case ObjectiveKind::Nca: return "nca";
    case ObjectiveKind::Xent: return "xent";
  }
  throw DomainError("unknown objective kind");
}

CategoryEmbeddingTable::CategoryEmbeddingTable(ClassId n_classes, Eigen::Index output_dim,
                                               Rng& rng) {
  if (n_classes < 1 || output_dim < 1)
    throw DomainError("category table dimensions must be positive");
  // Small noise rather than zeros so xEnt logits can break symmetry at step 0.
  std::uniform_real_distribution<double> dist(-1e-3, 1e-3);
  rows_.resize(n_classes, output_dim);
  for (Eigen::Index r = 0; r < rows_.rows(); ++r)
    for (Eigen::Index c = 0; c < rows_.cols(); ++c) rows_(r, c) = dist(rng);
}

Eigen::Index CategoryEmbeddingTable::row_of(ClassId id) const {
  if (id < 0 || id >= n_classes())
    throw DomainError("class id " + std::to_string(id) + " has no category row");
  return static_cast<Eigen::Index>(id);
}

NCAParams init_nca_params(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  if (rows < 1 || cols < 1) throw DomainError("NCA projection dimensions must be positive");
  NCAParams params;
  if (rows == cols) {
    params.projection = Matrix::Identity(rows, cols);
  } else {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    params.projection.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) params.projection(r, c) = dist(rng);
  }
  return params;
}

std::vector<ClassId> sample_negatives(ClassId anchor_class, const NoiseDistribution& dist,
                                      int n_neg, Rng& rng) {
  if (n_neg < 1) throw DomainError("n_neg must be >= 1");
  std::vector<ClassId> effective;
  effective.reserve(dist.pool.size());
  for (ClassId c : dist.pool)
    if (c != anchor_class) effective.push_back(c);
  if (effective.empty())
    throw DomainError("degenerate noise pool for class " + std::to_string(anchor_class));

  std::uniform_int_distribution<std::size_t> pick(0, effective.size() - 1);
  std::vector<ClassId> out(static_cast<std::size_t>(n_neg));
  for (auto& slot : out) slot = effective[pick(rng)];
  return out;
}

LossResult nce_loss_with_negatives(std::span<const BatchItem> batch,
                                   const CategoryEmbeddingTable& table,
                                   const std::vector<std::vector<ClassId>>& negatives) {
  if (batch.empty()) throw DomainError("empty batch");
  if (negatives.size() != batch.size())
    throw DomainError("negatives must align with the batch");
  check_batch_classes(batch, table);

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  LossResult result;
  result.encoder_upstream.assign(batch.size(), Vector());
  double loss_sum = 0.0;

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const BatchItem& item = batch[i];
    const Vector& vd = item.embedding;
    Vector d_vd = Vector::Zero(vd.size());

    auto pos_row = table.rows().row(table.row_of(item.class_id));
    double p = pos_row.dot(vd);
    loss_sum += log_sigmoid(p);
    double pos_coeff = -(1.0 - sigmoid(p)) * inv_b;
    add_category_grad(result.category_grads, item.class_id, pos_coeff * vd);
    d_vd += pos_coeff * pos_row.transpose();

    for (ClassId neg : negatives[i]) {
      auto neg_row = table.rows().row(table.row_of(neg));
      double q = neg_row.dot(vd);
      loss_sum += log_sigmoid(-q);
      double neg_coeff = sigmoid(q) * inv_b;
      add_category_grad(result.category_grads, neg, neg_coeff * vd);
      d_vd += neg_coeff * neg_row.transpose();
    }
    result.encoder_upstream[i] = std::move(d_vd);
  }
  result.loss = -loss_sum * inv_b;
  result.sampled_negatives = negatives;
  return result;
}

LossResult nce_loss(std::span<const BatchItem> batch, const CategoryEmbeddingTable& table,
                    const NoiseDistribution& dist, int n_neg, Rng& rng) {
  std::vector<std::vector<ClassId>> negatives;
  negatives.reserve(batch.size());
  for (const auto& item : batch)
    negatives.push_back(sample_negatives(item.class_id, dist, n_neg, rng));
  return nce_loss_with_negatives(batch, table, negatives);
}

// Kept as an independent evaluation loop so the CC == NCE reduction check
// compares two code paths rather than one.
LossResult cc_loss_with_negatives(std::span<const BatchItem> batch,
                                  const CategoryEmbeddingTable& table,
                                  const std::vector<std::vector<ClassId>>& negatives) {
  if (batch.empty()) throw DomainError("empty batch");
  if (negatives.size() != batch.size())
    throw DomainError("negatives must align with the batch");
  check_batch_classes(batch, table);

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  LossResult result;
  result.encoder_upstream.assign(batch.size(), Vector());
  double loss_sum = 0.0;

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const BatchItem& item = batch[i];
    const Vector& vd = item.embedding;
    Vector d_vd = Vector::Zero(vd.size());

    auto true_row = table.rows().row(table.row_of(item.class_id));
    double pos_dot = true_row.dot(vd);
    loss_sum += log_sigmoid(pos_dot);
    double pos_coeff = -(1.0 - sigmoid(pos_dot)) * inv_b;
    add_category_grad(result.category_grads, item.class_id, pos_coeff * vd);
    d_vd += pos_coeff * true_row.transpose();

    for (ClassId neg : negatives[i]) {
      auto noise_row = table.rows().row(table.row_of(neg));
      double neg_dot = noise_row.dot(vd);
      loss_sum += log_sigmoid(-neg_dot);
      double neg_coeff = sigmoid(neg_dot) * inv_b;
      add_category_grad(result.category_grads, neg, neg_coeff * vd);
      d_vd += neg_coeff * noise_row.transpose();
    }
    result.encoder_upstream[i] = std::move(d_vd);
  }
  result.loss = -loss_sum * inv_b;
  result.sampled_negatives = negatives;
  return result;
}

LossResult cc_loss(std::span<const BatchItem> batch, const CategoryEmbeddingTable& table,
                   const NoiseDistribution& dist_train, const NoiseDistribution& dist_kshot,
                   int n_neg, Rng& rng) {
  std::vector<std::vector<ClassId>> negatives;
  negatives.reserve(batch.size());
  for (const auto& item : batch) {
    const NoiseDistribution& pool =
        item.origin == Origin::TestKShot ? dist_kshot : dist_train;
    negatives.push_back(sample_negatives(item.class_id, pool, n_neg, rng));
  }
  return cc_loss_with_negatives(batch, table, negatives);
}

LossResult sc_loss(std::span<const BatchItem> batch, const SCConfig& config) {
  if (batch.size() < 2) throw DomainError("sc_loss needs a batch of at least 2");
  if (!(config.tau > 0.0)) throw DomainError("tau must be positive");

  const std::size_t b = batch.size();
  const double inv_tau = 1.0 / config.tau;

  LossResult result;
  result.encoder_upstream.assign(b, Vector::Zero(batch[0].embedding.size()));
  double loss_sum = 0.0;
  int active = 0;

  for (std::size_t i = 0; i < b; ++i) {
    const Vector& vi = batch[i].embedding;
    std::vector<std::size_t> positives;
    for (std::size_t p = 0; p < b; ++p)
      if (p != i && batch[p].class_id == batch[i].class_id) positives.push_back(p);
    if (positives.empty()) {
      result.skipped_anchors++;
      continue;
    }
    ++active;
    const double inv_p = 1.0 / static_cast<double>(positives.size());

    // exponents over A(i) = batch \ {i}
    std::vector<double> exponent(b, 0.0);
    double max_e = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < b; ++a) {
      if (a == i) continue;
      exponent[a] = vi.dot(batch[a].embedding) * inv_tau;
      max_e = std::max(max_e, exponent[a]);
    }
    double z = 0.0;
    for (std::size_t a = 0; a < b; ++a)
      if (a != i) z += std::exp(exponent[a] - max_e);
    const double log_z = max_e + std::log(z);

    double pos_sum = 0.0;
    for (std::size_t p : positives) pos_sum += exponent[p];
    loss_sum += -inv_p * pos_sum + log_z;

    // softmax over A(i), then chain through both dot-product arguments
    for (std::size_t a = 0; a < b; ++a) {
      if (a == i) continue;
      double s = std::exp(exponent[a] - max_e) / z;
      result.encoder_upstream[i] += (s * inv_tau) * batch[a].embedding;
      result.encoder_upstream[a] += (s * inv_tau) * vi;
    }
    for (std::size_t p : positives) {
      result.encoder_upstream[i] -= (inv_p * inv_tau) * batch[p].embedding;
      result.encoder_upstream[p] -= (inv_p * inv_tau) * vi;
    }
  }
  if (active == 0) throw DomainError("no positive pairs in batch");
  result.loss = loss_sum;
  return result;
}

LossResult nca_loss(std::span<const BatchItem> batch, const NCAParams& params) {
  if (batch.size() < 2) throw DomainError("nca_loss needs a batch of at least 2");
  const std::size_t b = batch.size();
  const Matrix& a_proj = params.projection;

  std::vector<Vector> projected(b);
  for (std::size_t i = 0; i < b; ++i) projected[i] = a_proj * batch[i].embedding;

  // neg_dist(i, k) = -|Au_i - Au_k|^2
  Matrix neg_dist(b, b);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t k = 0; k < b; ++k)
      neg_dist(i, k) = -(projected[i] - projected[k]).squaredNorm();

  LossResult result;
  std::vector<Vector> d_proj_embed(b, Vector::Zero(a_proj.rows()));
  double loss_sum = 0.0;
  int active = 0;

  for (std::size_t i = 0; i < b; ++i) {
    std::vector<std::size_t> positives;
    for (std::size_t j = 0; j < b; ++j)
      if (j != i && batch[j].class_id == batch[i].class_id) positives.push_back(j);
    if (positives.empty()) {
      result.skipped_anchors++;
      continue;
    }
    ++active;

    double max_all = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < b; ++k)
      if (k != i) max_all = std::max(max_all, neg_dist(i, k));
    double z = 0.0;
    for (std::size_t k = 0; k < b; ++k)
      if (k != i) z += std::exp(neg_dist(i, k) - max_all);
    const double log_z = max_all + std::log(z);

    double n = 0.0;
    for (std::size_t j : positives) n += std::exp(neg_dist(i, j) - max_all);
    const double log_n = max_all + std::log(n);
    loss_sum += log_z - log_n;

    // d loss / d neg_dist(i,k) = p_ik - w_ik, with p over all k != i and w
    // the in-class renormalization
    for (std::size_t k = 0; k < b; ++k) {
      if (k == i) continue;
      double p_ik = std::exp(neg_dist(i, k) - log_z);
      double w_ik = batch[k].class_id == batch[i].class_id
                        ? std::exp(neg_dist(i, k) - log_n)
                        : 0.0;
      double g = p_ik - w_ik;  // d loss / d neg_dist
      // neg_dist = -|u_i - u_k|^2, so d neg_dist / d u_i = -2 (u_i - u_k)
      Vector diff = projected[i] - projected[k];
      d_proj_embed[i] += g * (-2.0) * diff;
      d_proj_embed[k] += g * 2.0 * diff;
    }
  }
  if (active == 0) throw DomainError("no positive pairs in batch");

  result.loss = loss_sum;
  result.encoder_upstream.assign(b, Vector());
  result.nca_projection_grad = Matrix::Zero(a_proj.rows(), a_proj.cols());
  for (std::size_t m = 0; m < b; ++m) {
    result.encoder_upstream[m] = a_proj.transpose() * d_proj_embed[m];
    result.nca_projection_grad += d_proj_embed[m] * batch[m].embedding.transpose();
  }
  return result;
}

LossResult xent_loss(std::span<const BatchItem> batch, const CategoryEmbeddingTable& table) {
  if (batch.empty()) throw DomainError("empty batch");
  check_batch_classes(batch, table);

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const ClassId n_classes = table.n_classes();

  LossResult result;
  result.encoder_upstream.assign(batch.size(), Vector());
  double loss_sum = 0.0;

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Vector& vd = batch[i].embedding;
    Vector logits = table.rows() * vd;
    double max_logit = logits.maxCoeff();
    Vector shifted = (logits.array() - max_logit).exp();
    double z = shifted.sum();
    double lse = max_logit + std::log(z);
    loss_sum += lse - logits(table.row_of(batch[i].class_id));

    Vector probs = shifted / z;
    Vector d_logits = probs * inv_b;
    d_logits(table.row_of(batch[i].class_id)) -= inv_b;

    result.encoder_upstream[i] = table.rows().transpose() * d_logits;
    for (ClassId c = 0; c < n_classes; ++c)
      add_category_grad(result.category_grads, c, d_logits(c) * vd);
  }
  result.loss = loss_sum * inv_b;
  return result;
}

}  // namespace cfsl
