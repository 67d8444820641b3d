#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lesionforge/rng.hpp"
#include "lesionforge/tensor.hpp"

namespace lesionforge::tensornet {

// A layer caches what its backward pass needs during forward. backward()
// accumulates into param grads and returns the gradient w.r.t. its input.
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x) = 0;
    virtual Tensor backward(const Tensor& dy) = 0;
    virtual std::vector<Param*> params() { return {}; }
    virtual std::string type_name() const = 0;
};

// 2-D convolution over (C,H,W), square kernel, symmetric zero padding.
class Conv2d : public Layer {
public:
    Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& dy) override;
    std::vector<Param*> params() override { return {&weight_, &bias_}; }
    std::string type_name() const override { return "conv2d"; }

    int out_channels() const { return out_ch_; }

private:
    int in_ch_, out_ch_, kernel_, stride_, pad_;
    Param weight_;  // (oc, ic, k, k)
    Param bias_;    // (oc)
    Tensor cache_x_;
};

class Dense : public Layer {
public:
    Dense(std::string name, int in_dim, int out_dim, Rng& rng);
    Tensor forward(const Tensor& x) override;  // input flattened to in_dim
    Tensor backward(const Tensor& dy) override;
    std::vector<Param*> params() override { return {&weight_, &bias_}; }
    std::string type_name() const override { return "dense"; }

private:
    int in_dim_, out_dim_;
    Param weight_;  // (out, in)
    Param bias_;    // (out)
    Tensor cache_x_;
    std::vector<int> cache_input_shape_;
};

class ReLU : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& dy) override;
    std::string type_name() const override { return "relu"; }

private:
    Tensor cache_x_;
};

class SiLU : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& dy) override;
    std::string type_name() const override { return "silu"; }

private:
    Tensor cache_x_;
};

// Group normalization over (C,H,W); groups = largest divisor of C that is
// <= 8 (instance norm falls out when C < number of spatial groups).
// Batch-free, so batch-size-one training stays deterministic.
class GroupNorm : public Layer {
public:
    GroupNorm(std::string name, int channels);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& dy) override;
    std::vector<Param*> params() override { return {&gamma_, &beta_}; }
    std::string type_name() const override { return "groupnorm"; }

    static int pick_groups(int channels);

private:
    int channels_, groups_;
    Param gamma_, beta_;
    Tensor cache_xhat_;
    std::vector<double> cache_inv_std_;
};

// Nearest-neighbor 2x upsample of (C,H,W).
class NearestUpsample2x : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& dy) override;
    std::string type_name() const override { return "upsample2x"; }

private:
    std::vector<int> cache_in_shape_;
};

// (C,H,W) -> (C) spatial mean.
class GlobalAvgPool : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& dy) override;
    std::string type_name() const override { return "gap"; }

private:
    std::vector<int> cache_in_shape_;
};

// Additive embedding injection: y[c,h,w] = x[c,h,w] + (W e + b)[c].
// set_embedding must be called before forward; the embedding gradient is
// accumulated into embedding_grad() for the caller to route.
class EmbedInject : public Layer {
public:
    EmbedInject(std::string name, int channels, int embed_dim, Rng& rng);
    void set_embedding(const Tensor& e);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& dy) override;
    std::vector<Param*> params() override { return {&weight_, &bias_}; }
    std::string type_name() const override { return "embed_inject"; }

    const Tensor& embedding_grad() const { return embed_grad_; }

private:
    int channels_, embed_dim_;
    Param weight_;  // (C, E)
    Param bias_;    // (C)
    Tensor embed_;
    Tensor embed_grad_;
    bool has_embed_ = false;
};

// Sinusoidal timestep embedding, first half sines, second half cosines,
// geometric frequency ladder down to 1/10000.
Tensor timestep_embedding(int t, int dim);

}  // namespace lesionforge::tensornet
