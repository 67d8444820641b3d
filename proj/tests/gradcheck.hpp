#pragma once

// Finite-difference gradient oracle shared by the unit tests and the
// acceptance suite. Central differences, h = 1e-4, double precision; the
// analytic side must match with max relative error < 1e-4.

#include <functional>
#include <map>
#include <string>

#include "lesionforge/layers.hpp"
#include "test_util.hpp"

namespace lftest {

using lesionforge::Rng;
using namespace lesionforge::tensornet;

constexpr double kFdStep = 1e-4;

template <typename Loss>
double fd_check_buffer(Loss&& scalar_loss, std::vector<double>& buffer,
                       const std::vector<double>& analytic, double h = kFdStep) {
    double max_err = 0.0;
    for (size_t i = 0; i < buffer.size(); ++i) {
        const double keep = buffer[i];
        buffer[i] = keep + h;
        const double lp = scalar_loss();
        buffer[i] = keep - h;
        const double lm = scalar_loss();
        buffer[i] = keep;
        max_err = std::max(max_err, rel_err(analytic[i], (lp - lm) / (2.0 * h)));
    }
    return max_err;
}

// Scalar loss = sum(w .* layer(x)); checks d/dx and d/dparams.
inline double check_layer(Layer& layer, Tensor& x, Rng& rng,
                          const std::function<void()>& pre_forward = {}) {
    if (pre_forward) pre_forward();
    const Tensor w = randn_tensor(layer.forward(x).shape, rng);
    auto scalar_loss = [&]() {
        if (pre_forward) pre_forward();
        const Tensor y = layer.forward(x);
        double acc = 0.0;
        for (size_t i = 0; i < y.size(); ++i) acc += w.data[i] * y.data[i];
        return acc;
    };

    for (Param* p : layer.params()) p->zero_grad();
    if (pre_forward) pre_forward();
    layer.forward(x);
    const Tensor dx = layer.backward(w);

    double err = fd_check_buffer(scalar_loss, x.data, dx.data);
    for (Param* p : layer.params())
        err = std::max(err, fd_check_buffer(scalar_loss, p->value.data, p->grad.data));
    return err;
}

inline Tensor random_activation(std::vector<int> shape, Rng& rng) {
    Tensor x = randn_tensor(std::move(shape), rng);
    return x;
}

// keep ReLU inputs away from the kink where finite differences lie
inline Tensor random_activation_nudged(std::vector<int> shape, Rng& rng) {
    Tensor x = randn_tensor(std::move(shape), rng);
    for (double& v : x.data)
        if (std::abs(v) < 1e-3) v += (v >= 0.0 ? 1.0 : -1.0) * 0.01;
    return x;
}

inline double check_conv2d_instance(Rng& rng) {
    const int ic = static_cast<int>(rng.uniform_int(1, 3));
    const int oc = static_cast<int>(rng.uniform_int(1, 3));
    const int k = rng.uniform() < 0.5 ? 1 : 3;
    const int stride = static_cast<int>(rng.uniform_int(1, 2));
    const int pad = k == 3 ? static_cast<int>(rng.uniform_int(0, 1)) : 0;
    const int h = static_cast<int>(rng.uniform_int(k + 1, 6));
    const int w = static_cast<int>(rng.uniform_int(k + 1, 6));
    Conv2d layer("c", ic, oc, k, stride, pad, rng);
    Tensor x = random_activation({ic, h, w}, rng);
    return check_layer(layer, x, rng);
}

inline double check_dense_instance(Rng& rng) {
    const int in = static_cast<int>(rng.uniform_int(1, 8));
    const int out = static_cast<int>(rng.uniform_int(1, 6));
    Dense layer("d", in, out, rng);
    Tensor x = random_activation({in}, rng);
    return check_layer(layer, x, rng);
}

inline double check_relu_instance(Rng& rng) {
    ReLU layer;
    Tensor x = random_activation_nudged({static_cast<int>(rng.uniform_int(2, 4)),
                                         static_cast<int>(rng.uniform_int(2, 5)),
                                         static_cast<int>(rng.uniform_int(2, 5))},
                                        rng);
    return check_layer(layer, x, rng);
}

inline double check_silu_instance(Rng& rng) {
    SiLU layer;
    Tensor x = random_activation({static_cast<int>(rng.uniform_int(2, 4)),
                                  static_cast<int>(rng.uniform_int(2, 5)),
                                  static_cast<int>(rng.uniform_int(2, 5))},
                                 rng);
    return check_layer(layer, x, rng);
}

inline double check_groupnorm_instance(Rng& rng) {
    const int c = static_cast<int>(rng.uniform_int(1, 4)) * 4;
    GroupNorm layer("g", c);
    Tensor x = random_activation({c, static_cast<int>(rng.uniform_int(2, 4)),
                                  static_cast<int>(rng.uniform_int(2, 4))},
                                 rng);
    return check_layer(layer, x, rng);
}

inline double check_upsample_instance(Rng& rng) {
    NearestUpsample2x layer;
    Tensor x = random_activation({static_cast<int>(rng.uniform_int(1, 3)),
                                  static_cast<int>(rng.uniform_int(2, 4)),
                                  static_cast<int>(rng.uniform_int(2, 4))},
                                 rng);
    return check_layer(layer, x, rng);
}

inline double check_gap_instance(Rng& rng) {
    GlobalAvgPool layer;
    Tensor x = random_activation({static_cast<int>(rng.uniform_int(1, 6)),
                                  static_cast<int>(rng.uniform_int(2, 5)),
                                  static_cast<int>(rng.uniform_int(2, 5))},
                                 rng);
    return check_layer(layer, x, rng);
}

inline double check_embed_inject_instance(Rng& rng) {
    const int c = static_cast<int>(rng.uniform_int(1, 4));
    const int e = static_cast<int>(rng.uniform_int(1, 6));
    EmbedInject layer("i", c, e, rng);
    Tensor embed = randn_tensor({e}, rng);
    Tensor x = random_activation({c, static_cast<int>(rng.uniform_int(2, 4)),
                                  static_cast<int>(rng.uniform_int(2, 4))},
                                 rng);
    const auto pre = [&]() { layer.set_embedding(embed); };

    double err = check_layer(layer, x, rng, pre);

    // the embedding input is differentiable too
    const Tensor w = randn_tensor(layer.forward(x).shape, rng);
    auto scalar_loss = [&]() {
        layer.set_embedding(embed);
        const Tensor y = layer.forward(x);
        double acc = 0.0;
        for (size_t i = 0; i < y.size(); ++i) acc += w.data[i] * y.data[i];
        return acc;
    };
    layer.set_embedding(embed);
    layer.forward(x);
    layer.backward(w);
    Tensor de = layer.embedding_grad();
    err = std::max(err, fd_check_buffer(scalar_loss, embed.data, de.data));
    return err;
}

using InstanceCheck = double (*)(Rng&);

inline const std::map<std::string, InstanceCheck>& layer_checks() {
    static const std::map<std::string, InstanceCheck> checks = {
        {"conv2d", check_conv2d_instance},
        {"dense", check_dense_instance},
        {"relu", check_relu_instance},
        {"silu", check_silu_instance},
        {"groupnorm", check_groupnorm_instance},
        {"upsample2x", check_upsample_instance},
        {"gap", check_gap_instance},
        {"embed_inject", check_embed_inject_instance},
    };
    return checks;
}

// max relative error per layer type over n random instances each
inline std::map<std::string, double> run_layer_gradchecks(int n_instances, uint64_t seed) {
    std::map<std::string, double> worst;
    for (const auto& [name, check] : layer_checks()) {
        Rng rng(lesionforge::derive_seed(seed, std::hash<std::string>{}(name)));
        double err = 0.0;
        for (int i = 0; i < n_instances; ++i) err = std::max(err, check(rng));
        worst[name] = err;
    }
    return worst;
}

}  // namespace lftest
