#include "cfsl/optimizer.hpp"

#include <cmath>

#include "cfsl/trainer.hpp"

namespace cfsl {

void adam_step_row(Matrix& param, RowAdamState& state, Eigen::Index row,
                   const Eigen::RowVectorXd& grad, double lr, const AdamParams& adam) {
  std::int64_t t = ++state.t[static_cast<std::size_t>(row)];
  state.m.row(row) = adam.beta1 * state.m.row(row) + (1.0 - adam.beta1) * grad;
  state.v.row(row) =
      adam.beta2 * state.v.row(row).array() + (1.0 - adam.beta2) * grad.array().square();
  const double m_corr = 1.0 - std::pow(adam.beta1, static_cast<double>(t));
  const double v_corr = 1.0 - std::pow(adam.beta2, static_cast<double>(t));
  Eigen::ArrayXd m_hat = state.m.row(row).transpose().array() / m_corr;
  Eigen::ArrayXd v_hat = state.v.row(row).transpose().array() / v_corr;
  param.row(row) -= (lr * m_hat / (v_hat.sqrt() + adam.epsilon)).matrix().transpose();
}

void sgd_step_row(Matrix& param, Eigen::Index row, const Eigen::RowVectorXd& grad,
                  double lr) {
  param.row(row) -= lr * grad;
}

void adam_step_vec(Vector& param, VecAdamState& state, const Vector& grad, double lr,
                   const AdamParams& adam) {
  std::int64_t t = ++state.t;
  state.m = adam.beta1 * state.m + (1.0 - adam.beta1) * grad;
  state.v = adam.beta2 * state.v.array() + (1.0 - adam.beta2) * grad.array().square();
  const double m_corr = 1.0 - std::pow(adam.beta1, static_cast<double>(t));
  const double v_corr = 1.0 - std::pow(adam.beta2, static_cast<double>(t));
  param -= (lr * (state.m.array() / m_corr) / ((state.v.array() / v_corr).sqrt() + adam.epsilon))
               .matrix();
}

}  // namespace cfsl
