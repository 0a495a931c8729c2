#include "cfsl/encoder.hpp"

#include <cmath>
#include <string>

#include "cfsl/error.hpp"

namespace cfsl {

namespace {

void check_tokens(const Document& doc, const EncoderParams& params) {
  if (doc.tokens.empty())
    throw DomainError("document '" + doc.id + "' has no tokens");
  for (TokenId t : doc.tokens)
    if (t < 0 || t >= params.table_rows())
      throw DomainError("token id " + std::to_string(t) + " out of range in document '" +
                        doc.id + "'");
}

Vector mean_pooled(const Document& doc, const EncoderParams& params) {
  Vector mean = Vector::Zero(params.input_dim());
  for (TokenId t : doc.tokens) mean += params.token_embeddings.row(t).transpose();
  mean /= static_cast<double>(doc.tokens.size());
  return mean;
}

}  // namespace

EncoderParams init_encoder_params(std::int32_t vocab_table_rows, std::int32_t embed_dim,
                                  std::int32_t output_dim, Rng& rng) {
  if (vocab_table_rows < 1 || embed_dim < 1 || output_dim < 1)
    throw DomainError("encoder dimensions must be positive");
  EncoderParams params;
  const double embed_bound = 0.5 / embed_dim;
  const double proj_bound = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  std::uniform_real_distribution<double> embed_dist(-embed_bound, embed_bound);
  std::uniform_real_distribution<double> proj_dist(-proj_bound, proj_bound);

  params.token_embeddings.resize(vocab_table_rows, embed_dim);
  for (Eigen::Index r = 0; r < params.token_embeddings.rows(); ++r)
    for (Eigen::Index c = 0; c < params.token_embeddings.cols(); ++c)
      params.token_embeddings(r, c) = embed_dist(rng);

  params.projection.resize(output_dim, embed_dim);
  for (Eigen::Index r = 0; r < params.projection.rows(); ++r)
    for (Eigen::Index c = 0; c < params.projection.cols(); ++c)
      params.projection(r, c) = proj_dist(rng);

  params.bias = Vector::Zero(output_dim);
  return params;
}

Vector encode(const Document& doc, const EncoderParams& params) {
  check_tokens(doc, params);
  Vector pre = params.projection * mean_pooled(doc, params) + params.bias;
  return pre.array().tanh();
}

void EncoderGrads::accumulate(const EncoderGrads& other) {
  for (const auto& [row, grad] : other.token_rows) {
    auto [it, inserted] = token_rows.try_emplace(row, grad);
    if (!inserted) it->second += grad;
  }
  if (projection.size() == 0) {
    projection = other.projection;
    bias = other.bias;
  } else {
    projection += other.projection;
    bias += other.bias;
  }
}

EncoderGrads encode_grad(const Document& doc, const EncoderParams& params,
                         const Vector& upstream) {
  check_tokens(doc, params);
  Vector mean = mean_pooled(doc, params);
  Vector pre = params.projection * mean + params.bias;
  Vector v = pre.array().tanh();

  // d(upstream . tanh(pre)) / d pre
  Vector s = upstream.array() * (1.0 - v.array().square());

  EncoderGrads grads;
  grads.bias = s;
  grads.projection = s * mean.transpose();

  Vector d_mean = params.projection.transpose() * s;
  Vector per_token = d_mean / static_cast<double>(doc.tokens.size());
  for (TokenId t : doc.tokens) {
    auto [it, inserted] = grads.token_rows.try_emplace(t, per_token);
    if (!inserted) it->second += per_token;
  }
  return grads;
}

}  // namespace cfsl
