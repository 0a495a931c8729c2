#ifndef CFSL_TESTS_ORACLES_HPP_
#define CFSL_TESTS_ORACLES_HPP_

// Independent reference implementations used as test oracles. Everything here
// is written with plain loops over std::vector<double>, deliberately avoiding
// the library's Eigen code paths.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<std::vector<double>>;  // row-major

inline double dot(const Vec& a, const Vec& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double sq_dist(const Vec& a, const Vec& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

inline Vec mat_vec(const Mat& m, const Vec& x) {
  Vec out(m.size(), 0.0);
  for (std::size_t r = 0; r < m.size(); ++r)
    for (std::size_t c = 0; c < x.size(); ++c) out[r] += m[r][c] * x[c];
  return out;
}

// Mean-pooled token rows -> affine projection -> tanh, straight from the
// definition.
inline Vec encode(const std::vector<std::int32_t>& tokens, const Mat& token_embeddings,
                  const Mat& projection, const Vec& bias) {
  Vec mean(token_embeddings[0].size(), 0.0);
  for (std::int32_t t : tokens)
    for (std::size_t c = 0; c < mean.size(); ++c)
      mean[c] += token_embeddings[static_cast<std::size_t>(t)][c];
  for (double& x : mean) x /= static_cast<double>(tokens.size());
  Vec out = mat_vec(projection, mean);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i] + bias[i]);
  return out;
}

// Supervised contrastive loss by direct double summation; anchors without
// positives contribute nothing.
inline double sc_loss(const std::vector<Vec>& embeddings, const std::vector<int>& labels,
                      double tau) {
  const std::size_t n = embeddings.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> positives;
    for (std::size_t p = 0; p < n; ++p)
      if (p != i && labels[p] == labels[i]) positives.push_back(p);
    if (positives.empty()) continue;
    double denom = 0.0;
    for (std::size_t a = 0; a < n; ++a)
      if (a != i) denom += std::exp(dot(embeddings[i], embeddings[a]) / tau);
    double anchor = 0.0;
    for (std::size_t p : positives)
      anchor += std::log(std::exp(dot(embeddings[i], embeddings[p]) / tau) / denom);
    total += -anchor / static_cast<double>(positives.size());
  }
  return total;
}

// NCA loss by direct summation: -log of the same-class neighbour mass under
// the projection A.
inline double nca_loss(const std::vector<Vec>& embeddings, const std::vector<int>& labels,
                       const Mat& a_projection) {
  const std::size_t n = embeddings.size();
  std::vector<Vec> projected;
  projected.reserve(n);
  for (const auto& e : embeddings) projected.push_back(mat_vec(a_projection, e));

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double numer = 0.0, denom = 0.0;
    bool has_positive = false;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      double e = std::exp(-sq_dist(projected[i], projected[k]));
      denom += e;
      if (labels[k] == labels[i]) {
        numer += e;
        has_positive = true;
      }
    }
    if (!has_positive) continue;
    total += -std::log(numer / denom);
  }
  return total;
}

inline Vec prototype(const std::vector<Vec>& members) {
  Vec mean(members[0].size(), 0.0);
  for (const auto& m : members)
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += m[i];
  for (double& x : mean) x /= static_cast<double>(members.size());
  return mean;
}

// Exhaustive nearest-class scan with lowest-id tie break.
inline int classify(const Vec& embedding, const std::map<int, Vec>& candidates) {
  int best = -1;
  double best_dist = 0.0;
  for (const auto& [cls, vec] : candidates) {
    double d = sq_dist(embedding, vec);
    if (best < 0 || d < best_dist) {
      best = cls;
      best_dist = d;
    }
  }
  return best;
}

inline Vec random_vec(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Vec out(n);
  for (double& x : out) x = dist(rng);
  return out;
}

inline Mat random_mat(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                      double scale = 1.0) {
  Mat out(rows);
  for (auto& row : out) row = random_vec(cols, rng, scale);
  return out;
}

}  // namespace oracle

#endif  // CFSL_TESTS_ORACLES_HPP_
