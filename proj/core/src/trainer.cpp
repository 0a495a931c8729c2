#include "cfsl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cfsl/error.hpp"
#include "cfsl/optimizer.hpp"

namespace cfsl {

namespace {

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// At most this many documents of one class enter a class-grouped batch.
constexpr std::size_t kClassGroupCap = 5;

struct ModelState {
  EncoderParams encoder;
  CategoryEmbeddingTable categories;
  NCAParams nca;
};

ModelState init_model_state(const TrainConfig& config, std::int32_t vocab_rows,
                            ClassId n_classes, Rng& rng) {
  ModelState state;
  state.encoder = init_encoder_params(vocab_rows, config.embed_dim, config.output_dim, rng);
  state.categories = CategoryEmbeddingTable(n_classes, config.output_dim, rng);
  state.nca = init_nca_params(config.effective_nca_dim(), config.output_dim, rng);
  return state;
}

struct NoisePools {
  NoiseDistribution all;    // every class with at least one document
  NoiseDistribution train;  // present classes from C_T
  NoiseDistribution kshot;  // present classes from C_K
};

NoisePools build_pools(const MergedTrainingSet& data) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(data.n_classes()), 0);
  for (const auto& doc : data.documents) counts[static_cast<std::size_t>(doc.label)]++;

  NoisePools pools;
  for (ClassId c = 0; c < data.n_classes(); ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) continue;
    pools.all.pool.push_back(c);
    if (data.class_origin(c) == Origin::TrainClass)
      pools.train.pool.push_back(c);
    else
      pools.kshot.pool.push_back(c);
  }
  return pools;
}

bool is_grouped_objective(ObjectiveKind kind) {
  return kind == ObjectiveKind::Sc || kind == ObjectiveKind::Nca;
}

std::vector<std::vector<std::size_t>> make_batches(const TrainConfig& config,
                                                   const MergedTrainingSet& data, Rng& rng) {
  const std::size_t n = data.documents.size();
  const std::size_t batch_size = static_cast<std::size_t>(config.batch_size);
  std::vector<std::vector<std::size_t>> batches;

  if (!is_grouped_objective(config.objective)) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t start = 0; start < n; start += batch_size) {
      std::size_t end = std::min(n, start + batch_size);
      batches.emplace_back(perm.begin() + start, perm.begin() + end);
    }
    return batches;
  }

  // Class-grouped batching so SC/NCA anchors see in-batch positives whenever
  // the data has them: sample classes, then up to kClassGroupCap docs each.
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.n_classes()));
  for (std::size_t i = 0; i < n; ++i)
    by_class[static_cast<std::size_t>(data.documents[i].label)].push_back(i);

  std::vector<ClassId> class_order;
  for (ClassId c = 0; c < data.n_classes(); ++c)
    if (!by_class[static_cast<std::size_t>(c)].empty()) class_order.push_back(c);
  std::shuffle(class_order.begin(), class_order.end(), rng);

  std::vector<std::size_t> current;
  for (ClassId c : class_order) {
    auto docs = by_class[static_cast<std::size_t>(c)];
    std::shuffle(docs.begin(), docs.end(), rng);
    if (docs.size() > kClassGroupCap) docs.resize(kClassGroupCap);
    if (!current.empty() && current.size() + docs.size() > batch_size) {
      batches.push_back(std::move(current));
      current.clear();
    }
    current.insert(current.end(), docs.begin(), docs.end());
  }
  if (!current.empty()) batches.push_back(std::move(current));
  // A trailing single-doc batch can never contain a positive pair; fold it
  // into its predecessor.
  if (batches.size() > 1 && batches.back().size() == 1) {
    auto tail = batches.back();
    batches.pop_back();
    batches.back().push_back(tail[0]);
  }
  return batches;
}

struct BatchGradients {
  double loss = 0.0;
  int skipped = 0;
  EncoderGrads encoder;
  std::map<ClassId, Vector> category_rows;
  Matrix nca_projection;
  std::vector<std::vector<ClassId>> sampled_negatives;
};

BatchGradients compute_batch_gradients(
    const ModelState& state, const MergedTrainingSet& data,
    const std::vector<std::size_t>& indices, const TrainConfig& config,
    const NoisePools& pools, Rng* neg_rng,
    const std::vector<std::vector<ClassId>>* fixed_negatives) {
  std::vector<BatchItem> batch;
  batch.reserve(indices.size());
  for (std::size_t idx : indices) {
    const Document& doc = data.documents[idx];
    batch.push_back({encode(doc, state.encoder), doc.label, data.origins[idx]});
  }

  LossResult loss;
  switch (config.objective) {
    case ObjectiveKind::Nce:
      loss = fixed_negatives
                 ? nce_loss_with_negatives(batch, state.categories, *fixed_negatives)
                 : nce_loss(batch, state.categories, pools.all, config.n_neg, *neg_rng);
      break;
    case ObjectiveKind::Cc:
      loss = fixed_negatives
                 ? cc_loss_with_negatives(batch, state.categories, *fixed_negatives)
                 : cc_loss(batch, state.categories, pools.train, pools.kshot,
                           config.n_neg, *neg_rng);
      break;
    case ObjectiveKind::Sc:
      loss = sc_loss(batch, SCConfig{config.tau});
      break;
    case ObjectiveKind::Nca:
      loss = nca_loss(batch, state.nca);
      break;
    case ObjectiveKind::Xent:
      loss = xent_loss(batch, state.categories);
      break;
  }

  BatchGradients grads;
  grads.loss = loss.loss;
  grads.skipped = loss.skipped_anchors;
  grads.category_rows = std::move(loss.category_grads);
  grads.nca_projection = std::move(loss.nca_projection_grad);
  grads.sampled_negatives = std::move(loss.sampled_negatives);
  for (std::size_t i = 0; i < indices.size(); ++i)
    grads.encoder.accumulate(
        encode_grad(data.documents[indices[i]], state.encoder, loss.encoder_upstream[i]));
  return grads;
}

struct OptimizerState {
  RowAdamState token_embeddings;
  RowAdamState projection;
  VecAdamState bias;
  RowAdamState categories;
  RowAdamState nca;

  explicit OptimizerState(const ModelState& state)
      : token_embeddings(state.encoder.token_embeddings.rows(),
                         state.encoder.token_embeddings.cols()),
        projection(state.encoder.projection.rows(), state.encoder.projection.cols()),
        bias(state.encoder.bias.size()),
        categories(state.categories.rows().rows(), state.categories.rows().cols()),
        nca(state.nca.projection.rows(), state.nca.projection.cols()) {}
};

void apply_gradients(const BatchGradients& grads, ModelState& state, OptimizerState& opt,
                     const TrainConfig& config) {
  const double lr = config.learning_rate;
  const bool adam = config.optimizer == OptimizerKind::Adam;

  for (const auto& [row, g] : grads.encoder.token_rows) {
    if (adam)
      adam_step_row(state.encoder.token_embeddings, opt.token_embeddings, row,
                    g.transpose(), lr, config.adam);
    else
      sgd_step_row(state.encoder.token_embeddings, row, g.transpose(), lr);
  }
  if (grads.encoder.projection.size() != 0) {
    for (Eigen::Index r = 0; r < state.encoder.projection.rows(); ++r) {
      if (adam)
        adam_step_row(state.encoder.projection, opt.projection, r,
                      grads.encoder.projection.row(r), lr, config.adam);
      else
        sgd_step_row(state.encoder.projection, r, grads.encoder.projection.row(r), lr);
    }
    if (adam)
      adam_step_vec(state.encoder.bias, opt.bias, grads.encoder.bias, lr, config.adam);
    else
      state.encoder.bias -= lr * grads.encoder.bias;
  }
  for (const auto& [cid, g] : grads.category_rows) {
    Eigen::Index row = state.categories.row_of(cid);
    if (adam)
      adam_step_row(state.categories.rows(), opt.categories, row, g.transpose(), lr,
                    config.adam);
    else
      sgd_step_row(state.categories.rows(), row, g.transpose(), lr);
  }
  if (grads.nca_projection.size() != 0) {
    for (Eigen::Index r = 0; r < state.nca.projection.rows(); ++r) {
      if (adam)
        adam_step_row(state.nca.projection, opt.nca, r, grads.nca_projection.row(r), lr,
                      config.adam);
      else
        sgd_step_row(state.nca.projection, r, grads.nca_projection.row(r), lr);
    }
  }
}

void validate_config(const TrainConfig& config, const MergedTrainingSet& data) {
  if (data.documents.empty()) throw DomainError("training data is empty");
  if (config.epochs < 1) throw DomainError("epochs must be >= 1");
  if (config.batch_size < 1) throw DomainError("batch_size must be >= 1");
  if (config.embed_dim < 1 || config.output_dim < 1)
    throw DomainError("embedding dimensions must be >= 1");
  if (config.learning_rate < 0.0) throw DomainError("learning_rate must be >= 0");
  bool sampled = config.objective == ObjectiveKind::Nce || config.objective == ObjectiveKind::Cc;
  if (sampled && config.n_neg < 1) throw DomainError("n_neg must be >= 1");
  if (config.objective == ObjectiveKind::Sc && !(config.tau > 0.0))
    throw DomainError("tau must be positive");
}

}  // namespace

std::string TrainConfig::fingerprint() const {
  std::string fp = "c2v:v1";
  fp += "|objective=" + objective_to_string(objective);
  fp += "|epochs=" + std::to_string(epochs);
  fp += "|batch_size=" + std::to_string(batch_size);
  fp += "|n_neg=" + std::to_string(n_neg);
  fp += "|lr=" + fmt_double(learning_rate);
  fp += std::string("|optimizer=") + (optimizer == OptimizerKind::Adam ? "adam" : "sgd");
  fp += "|beta1=" + fmt_double(adam.beta1);
  fp += "|beta2=" + fmt_double(adam.beta2);
  fp += "|eps=" + fmt_double(adam.epsilon);
  fp += "|seed=" + std::to_string(seed);
  fp += "|embed_dim=" + std::to_string(embed_dim);
  fp += "|output_dim=" + std::to_string(output_dim);
  fp += "|tau=" + fmt_double(tau);
  fp += "|nca_dim=" + std::to_string(effective_nca_dim());
  fp += "|max_tokens=" + std::to_string(max_tokens);
  return fp;
}

ClassId TrainedModel::class_id_of(const std::string& name) const {
  for (std::size_t i = 0; i < class_names.size(); ++i)
    if (class_names[i] == name) return static_cast<ClassId>(i);
  return -1;
}

std::vector<ClassId> TrainedModel::kshot_class_ids() const {
  std::vector<ClassId> out;
  for (std::size_t i = 0; i < class_origins.size(); ++i)
    if (class_origins[i] == Origin::TestKShot) out.push_back(static_cast<ClassId>(i));
  return out;
}

TrainedModel train(const TrainConfig& config, const MergedTrainingSet& data,
                   const Vocabulary& vocab) {
  validate_config(config, data);

  Rng rng_init(derive_seed(config.seed, 1));
  Rng rng_shuffle(derive_seed(config.seed, 2));
  Rng rng_neg(derive_seed(config.seed, 3));

  ModelState state = init_model_state(config, vocab.table_rows(), data.n_classes(), rng_init);
  NoisePools pools = build_pools(data);
  OptimizerState opt(state);
  std::vector<double> trajectory;

  const bool sum_type = is_grouped_objective(config.objective);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    auto batches = make_batches(config, data, rng_shuffle);
    double num = 0.0, den = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      BatchGradients grads;
      try {
        grads = compute_batch_gradients(state, data, batches[b], config, pools, &rng_neg,
                                        nullptr);
      } catch (const DomainError& e) {
        throw DomainError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                          ", batch " + std::to_string(b + 1) + ")");
      }
      if (!std::isfinite(grads.loss))
        throw DomainError("divergence at epoch " + std::to_string(epoch) + ", batch " +
                          std::to_string(b + 1));
      apply_gradients(grads, state, opt, config);
      if (sum_type) {
        num += grads.loss;
        den += static_cast<double>(batches[b].size()) - grads.skipped;
      } else {
        num += grads.loss * static_cast<double>(batches[b].size());
        den += static_cast<double>(batches[b].size());
      }
    }
    trajectory.push_back(den > 0.0 ? num / den : 0.0);
  }

  TrainedModel model;
  model.encoder = std::move(state.encoder);
  model.categories = std::move(state.categories);
  model.nca = std::move(state.nca);
  model.vocab = vocab;
  model.class_names = data.class_names;
  model.class_origins.reserve(data.class_names.size());
  for (ClassId c = 0; c < data.n_classes(); ++c)
    model.class_origins.push_back(data.class_origin(c));
  model.config_fingerprint = config.fingerprint();
  model.loss_trajectory = std::move(trajectory);
  return model;
}

namespace {

// Central differences at eps=1e-5 carry an eps^2 truncation floor around
// 1e-10; entries below the guard are compared absolutely so that floor does
// not masquerade as relative error.
double fd_relative_error(double analytic, double numeric) {
  double denom = std::max(std::abs(analytic), std::abs(numeric));
  if (denom < 1e-5) return std::abs(analytic - numeric);
  return std::abs(analytic - numeric) / denom;
}

}  // namespace

double grad_check(const TrainConfig& config, const MergedTrainingSet& batch_data,
                  const Vocabulary& vocab, double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
  if (batch_data.documents.empty()) throw DomainError("empty gradient-check batch");

  Rng rng_init(derive_seed(config.seed, 1));
  ModelState state =
      init_model_state(config, vocab.table_rows(), batch_data.n_classes(), rng_init);
  NoisePools pools = build_pools(batch_data);

  std::vector<std::size_t> indices(batch_data.documents.size());
  std::iota(indices.begin(), indices.end(), 0);

  // Freeze the negative draws so the loss is a deterministic function of the
  // parameters.
  std::vector<std::vector<ClassId>> negatives;
  if (config.objective == ObjectiveKind::Nce || config.objective == ObjectiveKind::Cc) {
    Rng rng_neg(derive_seed(config.seed, 3));
    for (std::size_t idx : indices) {
      const Document& doc = batch_data.documents[idx];
      const NoiseDistribution& pool =
          config.objective == ObjectiveKind::Nce
              ? pools.all
              : (batch_data.origins[idx] == Origin::TestKShot ? pools.kshot : pools.train);
      negatives.push_back(sample_negatives(doc.label, pool, config.n_neg, rng_neg));
    }
  }
  const auto* fixed = negatives.empty() ? nullptr : &negatives;

  BatchGradients analytic =
      compute_batch_gradients(state, batch_data, indices, config, pools, nullptr, fixed);

  auto loss_at = [&]() {
    return compute_batch_gradients(state, batch_data, indices, config, pools, nullptr, fixed)
        .loss;
  };
  auto central_diff = [&](double& slot) {
    const double saved = slot;
    slot = saved + epsilon;
    double up = loss_at();
    slot = saved - epsilon;
    double down = loss_at();
    slot = saved;
    return (up - down) / (2.0 * epsilon);
  };

  double max_err = 0.0;
  auto check = [&](double& slot, double analytic_value) {
    max_err = std::max(max_err, fd_relative_error(analytic_value, central_diff(slot)));
  };

  Matrix& tokens = state.encoder.token_embeddings;
  for (Eigen::Index r = 0; r < tokens.rows(); ++r) {
    auto it = analytic.encoder.token_rows.find(static_cast<TokenId>(r));
    for (Eigen::Index c = 0; c < tokens.cols(); ++c)
      check(tokens(r, c), it == analytic.encoder.token_rows.end() ? 0.0 : it->second(c));
  }
  Matrix& proj = state.encoder.projection;
  for (Eigen::Index r = 0; r < proj.rows(); ++r)
    for (Eigen::Index c = 0; c < proj.cols(); ++c)
      check(proj(r, c), analytic.encoder.projection(r, c));
  for (Eigen::Index i = 0; i < state.encoder.bias.size(); ++i)
    check(state.encoder.bias(i), analytic.encoder.bias(i));

  Matrix& cats = state.categories.rows();
  for (Eigen::Index r = 0; r < cats.rows(); ++r) {
    auto it = analytic.category_rows.find(static_cast<ClassId>(r));
    for (Eigen::Index c = 0; c < cats.cols(); ++c)
      check(cats(r, c), it == analytic.category_rows.end() ? 0.0 : it->second(c));
  }
  if (config.objective == ObjectiveKind::Nca) {
    Matrix& a = state.nca.projection;
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      for (Eigen::Index c = 0; c < a.cols(); ++c)
        check(a(r, c), analytic.nca_projection(r, c));
  }
  return max_err;
}

}  // namespace cfsl
