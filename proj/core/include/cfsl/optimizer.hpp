#ifndef CFSL_OPTIMIZER_HPP_
#define CFSL_OPTIMIZER_HPP_

#include <cstdint>
#include <vector>

#include "cfsl/encoder.hpp"

namespace cfsl {

struct AdamParams;

// Row-lazy Adam: moments and bias-correction timesteps advance only for rows
// that actually receive a gradient, so untouched embedding rows stay put.
struct RowAdamState {
  Matrix m;
  Matrix v;
  std::vector<std::int64_t> t;

  RowAdamState() = default;
  RowAdamState(Eigen::Index rows, Eigen::Index cols)
      : m(Matrix::Zero(rows, cols)), v(Matrix::Zero(rows, cols)), t(rows, 0) {}
};

void adam_step_row(Matrix& param, RowAdamState& state, Eigen::Index row,
                   const Eigen::RowVectorXd& grad, double lr, const AdamParams& adam);

void sgd_step_row(Matrix& param, Eigen::Index row, const Eigen::RowVectorXd& grad,
                  double lr);

struct VecAdamState {
  Vector m;
  Vector v;
  std::int64_t t = 0;

  VecAdamState() = default;
  explicit VecAdamState(Eigen::Index size)
      : m(Vector::Zero(size)), v(Vector::Zero(size)) {}
};

void adam_step_vec(Vector& param, VecAdamState& state, const Vector& grad, double lr,
                   const AdamParams& adam);

}  // namespace cfsl

#endif  // CFSL_OPTIMIZER_HPP_
