#include "lesionforge/losses.hpp"

#include <algorithm>
#include <cmath>

namespace lesionforge::tensornet {

LossResult mse_loss(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target))
        throw ShapeError("mse_loss: " + pred.shape_str() + " vs " + target.shape_str());
    const double n = static_cast<double>(pred.size());
    LossResult r;
    r.grad = Tensor(pred.shape);
    double acc = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.data[i] - target.data[i];
        acc += d * d;
        r.grad.data[i] = 2.0 * d / n;
    }
    r.value = acc / n;
    return r;
}

Tensor softmax(const Tensor& logits) {
    Tensor p(logits.shape);
    const double m = *std::max_element(logits.data.begin(), logits.data.end());
    double z = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p.data[i] = std::exp(logits.data[i] - m);
        z += p.data[i];
    }
    for (double& v : p.data) v /= z;
    return p;
}

LossResult cross_entropy_loss(const Tensor& logits, int label) {
    if (!logits.all_finite()) throw NumericError("cross_entropy: non-finite logits");
    if (label < 0 || label >= static_cast<int>(logits.size()))
        throw UsageError("cross_entropy: label out of range");

    const double m = *std::max_element(logits.data.begin(), logits.data.end());
    double z = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) z += std::exp(logits.data[i] - m);
    const double lse = m + std::log(z);

    LossResult r;
    r.value = lse - logits.data[static_cast<size_t>(label)];
    r.grad = Tensor(logits.shape);
    for (size_t i = 0; i < logits.size(); ++i) {
        r.grad.data[i] = std::exp(logits.data[i] - m) / z;
        if (static_cast<int>(i) == label) r.grad.data[i] -= 1.0;
    }
    return r;
}

}  // namespace lesionforge::tensornet
