#pragma once
// Parameter update rules: plain SGD with a constant step and Adam with
// moment estimation and bias correction.

#include <Eigen/Dense>

#include "deepsplit/network.hpp"

namespace deepsplit {

/// theta' = theta - gamma * grad.
ParameterVector sgd_step(const ParameterVector& params, const ParameterVector& grad,
                         double learning_rate);

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Eigen::VectorXd first_moment;   // x
  Eigen::VectorXd second_moment;  // y, entrywise >= 0
  long step = 0;                  // m: completed updates

  static AdamState fresh(Eigen::Index size) {
    return {Eigen::VectorXd::Zero(size), Eigen::VectorXd::Zero(size), 0};
  }
};

/// x <- b1 x + (1-b1) g;  y <- b2 y + (1-b2) g^2;
/// theta' = theta - gamma * (x/(1-b1^{m+1})) / (sqrt(|y|/(1-b2^{m+1})) + eps).
/// Bias correction uses exponent m+1 so the first update is well defined.
std::pair<AdamState, ParameterVector> adam_step(const AdamState& state,
                                                const ParameterVector& params,
                                                const ParameterVector& grad,
                                                double learning_rate, const AdamParams& hp);

}  // namespace deepsplit
