#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lesionforge/tensor.hpp"

namespace lesionforge::tensornet {

enum class OptimAlgo { kSgdMomentum, kAdam };

struct OptimConfig {
    OptimAlgo algo = OptimAlgo::kAdam;
    double learning_rate = 2e-4;
    double momentum = 0.9;   // sgd
    double beta1 = 0.9;      // adam
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Update rules, exactly:
//   sgd_momentum (classical):  v <- mu*v + g;          p <- p - lr*v
//   adam:                      m <- b1*m + (1-b1)*g
//                              v <- b2*v + (1-b2)*g^2
//                              p <- p - lr * (m/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps)
// A step with any non-finite gradient is refused (NumericError) and leaves
// parameters and state untouched.
class Optimizer {
public:
    explicit Optimizer(OptimConfig cfg) : cfg_(cfg) {}

    void step(const std::vector<Param*>& params);

    int64_t step_count() const { return t_; }
    const OptimConfig& config() const { return cfg_; }

private:
    OptimConfig cfg_;
    int64_t t_ = 0;
    std::vector<Tensor> moment1_;  // sgd velocity / adam m
    std::vector<Tensor> moment2_;  // adam v
    bool initialized_ = false;
};

}  // namespace lesionforge::tensornet
