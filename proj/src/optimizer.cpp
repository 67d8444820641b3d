#include "lesionforge/optimizer.hpp"

#include <cmath>

namespace lesionforge::tensornet {

void Optimizer::step(const std::vector<Param*>& params) {
    if (!initialized_) {
        for (const Param* p : params) {
            moment1_.push_back(Tensor::zeros(p->value.shape));
            if (cfg_.algo == OptimAlgo::kAdam) moment2_.push_back(Tensor::zeros(p->value.shape));
        }
        initialized_ = true;
    }
    if (params.size() != moment1_.size())
        throw UsageError("optimizer: parameter set changed between steps");
    for (size_t i = 0; i < params.size(); ++i) {
        if (!params[i]->value.same_shape(moment1_[i]))
            throw ShapeError("optimizer: parameter shape changed: " + params[i]->name);
        if (!params[i]->grad.all_finite())
            throw NumericError("optimizer: non-finite gradient in " + params[i]->name +
                               ", step refused");
    }

    ++t_;
    if (cfg_.algo == OptimAlgo::kSgdMomentum) {
        for (size_t i = 0; i < params.size(); ++i) {
            Tensor& v = moment1_[i];
            Param& p = *params[i];
            for (size_t k = 0; k < v.data.size(); ++k) {
                v.data[k] = cfg_.momentum * v.data[k] + p.grad.data[k];
                p.value.data[k] -= cfg_.learning_rate * v.data[k];
            }
        }
    } else {
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (size_t i = 0; i < params.size(); ++i) {
            Tensor& m = moment1_[i];
            Tensor& v = moment2_[i];
            Param& p = *params[i];
            for (size_t k = 0; k < m.data.size(); ++k) {
                const double g = p.grad.data[k];
                m.data[k] = cfg_.beta1 * m.data[k] + (1.0 - cfg_.beta1) * g;
                v.data[k] = cfg_.beta2 * v.data[k] + (1.0 - cfg_.beta2) * g * g;
                const double m_hat = m.data[k] / bc1;
                const double v_hat = v.data[k] / bc2;
                p.value.data[k] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
            }
        }
    }
}

}  // namespace lesionforge::tensornet
