#include "turnover/loss.hpp"

#include <algorithm>
#include <cmath>

#include "turnover/error.hpp"

namespace turnover {

namespace {

void check_label(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) {
    throw DataError("label " + std::to_string(label) + " out of range for " +
                    std::to_string(logits.size()) + " classes");
  }
}

}  // namespace

LossResult softmax_cross_entropy(std::span<const double> logits, std::size_t label) {
  check_label(logits, label);
  const double top = *std::max_element(logits.begin(), logits.end());
  LossResult result;
  result.grad_logits.resize(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    result.grad_logits[i] = std::exp(logits[i] - top);
    total += result.grad_logits[i];
  }
  for (double& g : result.grad_logits) g /= total;
  result.grad_logits[label] -= 1.0;
  result.loss = std::log(total) - (logits[label] - top);
  return result;
}

double cross_entropy(std::span<const double> logits, std::size_t label) {
  check_label(logits, label);
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double v : logits) total += std::exp(v - top);
  return std::log(total) - (logits[label] - top);
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw DataError("argmax of an empty vector");
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace turnover
