#pragma once

#include "lesionforge/tensor.hpp"

namespace lesionforge::tensornet {

struct LossResult {
    double value = 0.0;
    Tensor grad;
};

// mean((pred - target)^2); grad = 2*(pred - target)/N
LossResult mse_loss(const Tensor& pred, const Tensor& target);

// softmax cross-entropy with log-sum-exp stabilization;
// grad = softmax(logits) - onehot(label)
LossResult cross_entropy_loss(const Tensor& logits, int label);

// numerically stable softmax of a flat logits tensor
Tensor softmax(const Tensor& logits);

}  // namespace lesionforge::tensornet
