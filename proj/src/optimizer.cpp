#include "deepsplit/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace deepsplit {

ParameterVector sgd_step(const ParameterVector& params, const ParameterVector& grad,
                         double learning_rate) {
  if (params.values().size() != grad.values().size())
    throw std::invalid_argument("sgd_step: shape mismatch");
  ParameterVector next = params;
  next.mutable_values() -= learning_rate * grad.values();
  return next;
}

std::pair<AdamState, ParameterVector> adam_step(const AdamState& state,
                                                const ParameterVector& params,
                                                const ParameterVector& grad,
                                                double learning_rate, const AdamParams& hp) {
  const Eigen::Index n = params.values().size();
  if (grad.values().size() != n) throw std::invalid_argument("adam_step: shape mismatch");
  if (state.first_moment.size() != n || state.second_moment.size() != n)
    throw std::invalid_argument("adam_step: state size mismatch");

  AdamState next = state;
  const auto& g = grad.values();
  next.first_moment = hp.beta1 * state.first_moment + (1.0 - hp.beta1) * g;
  next.second_moment =
      (hp.beta2 * state.second_moment.array() + (1.0 - hp.beta2) * g.array().square()).matrix();
  next.step = state.step + 1;

  const double corr1 = 1.0 - std::pow(hp.beta1, static_cast<double>(next.step));
  const double corr2 = 1.0 - std::pow(hp.beta2, static_cast<double>(next.step));

  ParameterVector updated = params;
  updated.mutable_values().array() -=
      learning_rate * (next.first_moment.array() / corr1) /
      ((next.second_moment.array().abs() / corr2).sqrt() + hp.epsilon);
  return {std::move(next), std::move(updated)};
}

}  // namespace deepsplit
