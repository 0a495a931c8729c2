#ifndef CFSL_ENCODER_HPP_
#define CFSL_ENCODER_HPP_

#include <Eigen/Dense>
#include <map>

#include "cfsl/rng.hpp"
#include "cfsl/types.hpp"

namespace cfsl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Reference trainable encoder: mean-pooled token embeddings followed by an
// affine projection and tanh. Anything matching encode()'s shape can stand in
// for it, e.g. precomputed external embeddings.
struct EncoderParams {
  Matrix token_embeddings;  // (V + 1) x D, row 0 is UNK
  Matrix projection;        // O x D
  Vector bias;              // O

  Eigen::Index input_dim() const { return token_embeddings.cols(); }
  Eigen::Index output_dim() const { return projection.rows(); }
  Eigen::Index table_rows() const { return token_embeddings.rows(); }
};

// Token embeddings U[-0.5/D, 0.5/D], projection U[-1/sqrt(D), 1/sqrt(D)],
// bias zero.
EncoderParams init_encoder_params(std::int32_t vocab_table_rows, std::int32_t embed_dim,
                                  std::int32_t output_dim, Rng& rng);

// v_d = tanh(projection * mean(token_embeddings[tokens]) + bias)
Vector encode(const Document& doc, const EncoderParams& params);

struct EncoderGrads {
  std::map<TokenId, Vector> token_rows;  // touched rows only, D each
  Matrix projection;                     // O x D
  Vector bias;                           // O

  void accumulate(const EncoderGrads& other);
};

// Gradient of (upstream . encode(doc)) with respect to every encoder
// parameter. Token rows receive 1/len(tokens) of the pooled gradient per
// occurrence.
EncoderGrads encode_grad(const Document& doc, const EncoderParams& params,
                         const Vector& upstream);

}  // namespace cfsl

#endif  // CFSL_ENCODER_HPP_
