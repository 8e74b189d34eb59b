#pragma once

#include <cstddef>
#include <span>

#include "turnover/matrix.hpp"

namespace turnover {

struct LossResult {
  double loss = 0.0;
  Vector grad_logits;
};

/// -log softmax(logits)[label] with max subtraction, plus its gradient
/// softmax(logits) - onehot(label).
LossResult softmax_cross_entropy(std::span<const double> logits, std::size_t label);

/// Loss only; same arithmetic as softmax_cross_entropy.
double cross_entropy(std::span<const double> logits, std::size_t label);

/// Index of the largest logit, lowest index on ties.
std::size_t argmax(std::span<const double> values);

}  // namespace turnover
