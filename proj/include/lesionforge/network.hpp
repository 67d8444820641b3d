#pragma once

#include <memory>
#include <vector>

#include "lesionforge/layers.hpp"

namespace lesionforge::tensornet {

// Ordered layer chain. An empty chain is the identity.
class Sequential {
public:
    Sequential() = default;
    Sequential(Sequential&&) = default;
    Sequential& operator=(Sequential&&) = default;

    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

    Tensor forward(const Tensor& x);

    // Also returns each layer's output (taps for features / Grad-CAM).
    Tensor forward_collect(const Tensor& x, std::vector<Tensor>& layer_outputs);

    // boundary_grads (optional) receives d(loss)/d(output of layer i).
    Tensor backward(const Tensor& dy, std::vector<Tensor>* boundary_grads = nullptr);

    std::vector<Param*> params();
    void zero_grads();

    size_t layer_count() const { return layers_.size(); }
    Layer& layer(size_t i) { return *layers_.at(i); }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    bool forward_done_ = false;
};

// Anything that maps (x, timestep, token) -> tensor and can backprop.
class ConditionalModel {
public:
    virtual ~ConditionalModel() = default;
    virtual Tensor forward(const Tensor& x, int timestep, int token) = 0;
    virtual Tensor backward(const Tensor& dy) = 0;
    virtual std::vector<Param*> params() = 0;
    virtual void zero_grads() = 0;
};

// Compact conditional U-Net denoiser: stem at full resolution, two
// stride-2 down blocks, bottleneck, two upsample blocks with skip
// concatenation. Every block is conv -> groupnorm -> +embedding -> SiLU.
// The conditioning embedding is silu(dense(sinusoidal(t))) + token_row.
struct UNetConfig {
    int in_channels = 3;
    int base_width = 32;  // down-block width; stem = base/2, bottleneck = 2*base
    int embed_dim = 32;
    int n_tokens = 3;
};

class UNet : public ConditionalModel {
public:
    UNet(const UNetConfig& cfg, uint64_t init_seed);

    Tensor forward(const Tensor& x, int timestep, int token) override;
    // Gradient w.r.t. the forward input; accumulates all parameter grads.
    Tensor backward(const Tensor& dy) override;

    std::vector<Param*> params() override;
    void zero_grads() override;
    const UNetConfig& config() const { return cfg_; }

private:
    UNetConfig cfg_;
    int w0_, w1_, w2_;

    std::unique_ptr<Conv2d> conv_in_, down1_, down2_, mid_, up1_conv_, up2_conv_, conv_out_;
    std::unique_ptr<GroupNorm> gn_in_, gn_d1_, gn_d2_, gn_mid_, gn_u1_, gn_u2_;
    std::unique_ptr<EmbedInject> inj_in_, inj_d1_, inj_d2_, inj_mid_, inj_u1_, inj_u2_;
    SiLU silu_in_, silu_d1_, silu_d2_, silu_mid_, silu_u1_, silu_u2_;
    NearestUpsample2x ups1_, ups2_;

    std::unique_ptr<Dense> time_dense_;
    SiLU time_act_;
    std::unique_ptr<Param> token_table_;  // (n_tokens, embed_dim)

    int cache_token_ = -1;
    bool forward_done_ = false;
};

// concat along channel axis (shared H,W)
Tensor concat_channels(const Tensor& a, const Tensor& b);

}  // namespace lesionforge::tensornet
