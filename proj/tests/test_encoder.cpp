#include <doctest.h>

#include <algorithm>
#include <random>

#include "cfsl/encoder.hpp"
#include "cfsl/error.hpp"
#include "support/oracles.hpp"

using namespace cfsl;

namespace {

Document doc_with(std::vector<TokenId> tokens) {
  Document doc;
  doc.id = "d";
  doc.tokens = std::move(tokens);
  doc.label = 0;
  return doc;
}

EncoderParams random_params(std::int32_t rows, std::int32_t d, std::int32_t o, Rng& rng) {
  EncoderParams params;
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  params.token_embeddings.resize(rows, d);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < d; ++c) params.token_embeddings(r, c) = dist(rng);
  params.projection.resize(o, d);
  for (Eigen::Index r = 0; r < o; ++r)
    for (Eigen::Index c = 0; c < d; ++c) params.projection(r, c) = dist(rng);
  params.bias = Vector::Zero(o);
  for (Eigen::Index i = 0; i < o; ++i) params.bias(i) = dist(rng);
  return params;
}

oracle::Mat to_mat(const Matrix& m) {
  oracle::Mat out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out[static_cast<std::size_t>(r)].resize(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      out[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = m(r, c);
  }
  return out;
}

oracle::Vec to_vec(const Vector& v) {
  return {v.data(), v.data() + v.size()};
}

}  // namespace

TEST_CASE("encode: zero embedding row through identity projection gives zeros") {
  EncoderParams params;
  params.token_embeddings = Matrix::Zero(2, 3);
  params.projection = Matrix::Identity(3, 3);
  params.bias = Vector::Zero(3);
  Vector v = encode(doc_with({1}), params);
  CHECK(v.isZero(0.0));  // tanh(0) = 0 exactly
}

TEST_CASE("encode: two tokens are mean pooled") {
  Rng rng(3);
  auto params = random_params(4, 3, 3, rng);
  params.projection = Matrix::Identity(3, 3);
  params.bias = Vector::Zero(3);
  Vector v = encode(doc_with({1, 2}), params);
  Vector mean =
      0.5 * (params.token_embeddings.row(1) + params.token_embeddings.row(2)).transpose();
  Vector expected = mean.array().tanh();
  CHECK((v - expected).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("encode matches the independent re-implementation to 1e-12") {
  Rng rng(17);
  std::uniform_int_distribution<int> dim(1, 8), len(1, 12), rows(2, 9);
  for (int trial = 0; trial < 50; ++trial) {
    int table_rows = rows(rng), d = dim(rng), o = dim(rng);
    auto params = random_params(table_rows, d, o, rng);
    std::uniform_int_distribution<TokenId> token(0, table_rows - 1);
    std::vector<TokenId> tokens(static_cast<std::size_t>(len(rng)));
    for (auto& t : tokens) t = token(rng);

    Vector got = encode(doc_with(tokens), params);
    oracle::Vec expected = oracle::encode(tokens, to_mat(params.token_embeddings),
                                          to_mat(params.projection), to_vec(params.bias));
    REQUIRE(static_cast<std::size_t>(got.size()) == expected.size());
    for (Eigen::Index i = 0; i < got.size(); ++i)
      CHECK(got(i) == doctest::Approx(expected[static_cast<std::size_t>(i)]).epsilon(1e-12));
  }
}

TEST_CASE("encode is permutation invariant over token order") {
  Rng rng(11);
  auto params = random_params(6, 4, 3, rng);
  std::vector<TokenId> tokens{1, 3, 5, 2, 1};
  Vector base = encode(doc_with(tokens), params);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(tokens.begin(), tokens.end(), rng);
    Vector shuffled = encode(doc_with(tokens), params);
    CHECK((base - shuffled).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("encode output is bounded by the tanh range") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    auto params = random_params(5, 4, 4, rng);
    Vector v = encode(doc_with({1, 2, 3}), params);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      CHECK(v(i) < 1.0);
      CHECK(v(i) > -1.0);
    }
    // saturated preactivations still never escape [-1, 1]
    params.projection *= 50.0;
    Vector saturated = encode(doc_with({1, 2, 3}), params);
    for (Eigen::Index i = 0; i < saturated.size(); ++i)
      CHECK(std::abs(saturated(i)) <= 1.0);
  }
}

TEST_CASE("encode rejects out-of-range token ids") {
  Rng rng(1);
  auto params = random_params(3, 2, 2, rng);
  CHECK_THROWS_AS(encode(doc_with({7}), params), DomainError);
  CHECK_THROWS_AS(encode(doc_with({}), params), DomainError);
}

TEST_CASE("encode_grad: zero upstream gives zero gradients") {
  Rng rng(5);
  auto params = random_params(4, 3, 2, rng);
  auto grads = encode_grad(doc_with({1, 2}), params, Vector::Zero(2));
  CHECK(grads.projection.isZero(0.0));
  CHECK(grads.bias.isZero(0.0));
  for (const auto& [row, g] : grads.token_rows) CHECK(g.isZero(0.0));
}

TEST_CASE("encode_grad: a token appearing twice gets twice the single-occurrence share") {
  Rng rng(7);
  auto params = random_params(5, 3, 2, rng);
  Vector upstream(2);
  upstream << 0.3, -0.7;

  // within one document the pooled gradient is shared per occurrence, so the
  // row of token 2 (twice) is exactly double the row of token 3 (once)
  auto grads = encode_grad(doc_with({2, 2, 3}), params, upstream);
  Vector expected = 2.0 * grads.token_rows.at(3);
  CHECK((grads.token_rows.at(2) - expected).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("encode_grad matches central finite differences") {
  Rng rng(29);
  std::uniform_int_distribution<int> dim(1, 8), len(1, 6), rows(2, 6);
  const double eps = 1e-5;

  double max_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    int table_rows = rows(rng), d = dim(rng), o = dim(rng);
    auto params = random_params(table_rows, d, o, rng);
    std::uniform_int_distribution<TokenId> token(0, table_rows - 1);
    std::vector<TokenId> tokens(static_cast<std::size_t>(len(rng)));
    for (auto& t : tokens) t = token(rng);
    Document doc = doc_with(tokens);
    Vector upstream = Vector::Random(o);

    auto grads = encode_grad(doc, params, upstream);
    auto objective = [&]() { return upstream.dot(encode(doc, params)); };
    auto check_entry = [&](double& slot, double analytic) {
      double saved = slot;
      slot = saved + eps;
      double up = objective();
      slot = saved - eps;
      double down = objective();
      slot = saved;
      double numeric = (up - down) / (2 * eps);
      double denom = std::max(std::abs(analytic), std::abs(numeric));
      double err = denom < 1e-6 ? std::abs(analytic - numeric)
                                : std::abs(analytic - numeric) / denom;
      max_err = std::max(max_err, err);
    };

    for (Eigen::Index r = 0; r < params.token_embeddings.rows(); ++r) {
      auto it = grads.token_rows.find(static_cast<TokenId>(r));
      for (Eigen::Index c = 0; c < params.token_embeddings.cols(); ++c)
        check_entry(params.token_embeddings(r, c),
                    it == grads.token_rows.end() ? 0.0 : it->second(c));
    }
    for (Eigen::Index r = 0; r < params.projection.rows(); ++r)
      for (Eigen::Index c = 0; c < params.projection.cols(); ++c)
        check_entry(params.projection(r, c), grads.projection(r, c));
    for (Eigen::Index i = 0; i < params.bias.size(); ++i)
      check_entry(params.bias(i), grads.bias(i));
  }
  CHECK(max_err < 1e-4);
}
