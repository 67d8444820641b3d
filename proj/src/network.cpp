#include "lesionforge/network.hpp"

#include <algorithm>

namespace lesionforge::tensornet {

Tensor Sequential::forward(const Tensor& x) {
    Tensor h = x;
    for (auto& layer : layers_) h = layer->forward(h);
    forward_done_ = true;
    return h;
}

Tensor Sequential::forward_collect(const Tensor& x, std::vector<Tensor>& layer_outputs) {
    layer_outputs.clear();
    Tensor h = x;
    for (auto& layer : layers_) {
        h = layer->forward(h);
        layer_outputs.push_back(h);
    }
    forward_done_ = true;
    return h;
}

Tensor Sequential::backward(const Tensor& dy, std::vector<Tensor>* boundary_grads) {
    if (!forward_done_) throw UsageError("network: backward before forward");
    if (boundary_grads) boundary_grads->assign(layers_.size(), Tensor());
    Tensor d = dy;
    for (size_t i = layers_.size(); i-- > 0;) {
        if (boundary_grads) (*boundary_grads)[i] = d;
        d = layers_[i]->backward(d);
    }
    return d;
}

std::vector<Param*> Sequential::params() {
    std::vector<Param*> out;
    for (auto& layer : layers_)
        for (Param* p : layer->params()) out.push_back(p);
    return out;
}

void Sequential::zero_grads() {
    for (Param* p : params()) p->zero_grad();
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 3 || b.shape.size() != 3 || a.shape[1] != b.shape[1] ||
        a.shape[2] != b.shape[2])
        throw ShapeError("concat_channels: incompatible shapes " + a.shape_str() + " vs " +
                         b.shape_str());
    Tensor out({a.shape[0] + b.shape[0], a.shape[1], a.shape[2]});
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
    return out;
}

namespace {

std::pair<Tensor, Tensor> split_channels(const Tensor& x, int first_channels) {
    Tensor a({first_channels, x.shape[1], x.shape[2]});
    Tensor b({x.shape[0] - first_channels, x.shape[1], x.shape[2]});
    std::copy(x.data.begin(), x.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()),
              a.data.begin());
    std::copy(x.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()), x.data.end(),
              b.data.begin());
    return {std::move(a), std::move(b)};
}

void add_into(Tensor& dst, const Tensor& src) {
    for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

UNet::UNet(const UNetConfig& cfg, uint64_t init_seed)
    : cfg_(cfg),
      w0_(std::max(8, cfg.base_width / 2)),
      w1_(cfg.base_width),
      w2_(cfg.base_width * 2) {
    // fixed construction order: the init RNG stream defines the weights
    Rng rng(init_seed);
    conv_in_ = std::make_unique<Conv2d>("conv_in", cfg.in_channels, w0_, 3, 1, 1, rng);
    down1_ = std::make_unique<Conv2d>("down1", w0_, w1_, 3, 2, 1, rng);
    down2_ = std::make_unique<Conv2d>("down2", w1_, w2_, 3, 2, 1, rng);
    mid_ = std::make_unique<Conv2d>("mid", w2_, w2_, 3, 1, 1, rng);
    up1_conv_ = std::make_unique<Conv2d>("up1", w2_ + w1_, w1_, 3, 1, 1, rng);
    up2_conv_ = std::make_unique<Conv2d>("up2", w1_ + w0_, w0_, 3, 1, 1, rng);
    conv_out_ = std::make_unique<Conv2d>("conv_out", w0_, cfg.in_channels, 3, 1, 1, rng);

    gn_in_ = std::make_unique<GroupNorm>("gn_in", w0_);
    gn_d1_ = std::make_unique<GroupNorm>("gn_d1", w1_);
    gn_d2_ = std::make_unique<GroupNorm>("gn_d2", w2_);
    gn_mid_ = std::make_unique<GroupNorm>("gn_mid", w2_);
    gn_u1_ = std::make_unique<GroupNorm>("gn_u1", w1_);
    gn_u2_ = std::make_unique<GroupNorm>("gn_u2", w0_);

    inj_in_ = std::make_unique<EmbedInject>("inj_in", w0_, cfg.embed_dim, rng);
    inj_d1_ = std::make_unique<EmbedInject>("inj_d1", w1_, cfg.embed_dim, rng);
    inj_d2_ = std::make_unique<EmbedInject>("inj_d2", w2_, cfg.embed_dim, rng);
    inj_mid_ = std::make_unique<EmbedInject>("inj_mid", w2_, cfg.embed_dim, rng);
    inj_u1_ = std::make_unique<EmbedInject>("inj_u1", w1_, cfg.embed_dim, rng);
    inj_u2_ = std::make_unique<EmbedInject>("inj_u2", w0_, cfg.embed_dim, rng);

    time_dense_ = std::make_unique<Dense>("time_dense", cfg.embed_dim, cfg.embed_dim, rng);

    Tensor table({cfg.n_tokens, cfg.embed_dim});
    for (double& v : table.data) v = rng.normal(0.0, 0.05);
    token_table_ = std::make_unique<Param>("token_table", std::move(table));
}

Tensor UNet::forward(const Tensor& x, int timestep, int token) {
    if (x.shape.size() != 3 || x.shape[0] != cfg_.in_channels)
        throw ShapeError("unet: input " + x.shape_str());
    if (x.shape[1] % 4 != 0 || x.shape[2] % 4 != 0)
        throw ShapeError("unet: spatial dims must be divisible by 4");
    if (token < 0 || token >= cfg_.n_tokens) throw UsageError("unet: bad token id");

    cache_token_ = token;
    Tensor e = time_act_.forward(time_dense_->forward(timestep_embedding(timestep, cfg_.embed_dim)));
    const double* row =
        token_table_->value.data.data() + static_cast<size_t>(token) * cfg_.embed_dim;
    for (int i = 0; i < cfg_.embed_dim; ++i) e.data[i] += row[i];

    for (EmbedInject* inj : {inj_in_.get(), inj_d1_.get(), inj_d2_.get(), inj_mid_.get(),
                             inj_u1_.get(), inj_u2_.get()})
        inj->set_embedding(e);

    const Tensor h0 = silu_in_.forward(inj_in_->forward(gn_in_->forward(conv_in_->forward(x))));
    const Tensor h1 = silu_d1_.forward(inj_d1_->forward(gn_d1_->forward(down1_->forward(h0))));
    const Tensor h2 = silu_d2_.forward(inj_d2_->forward(gn_d2_->forward(down2_->forward(h1))));
    const Tensor m = silu_mid_.forward(inj_mid_->forward(gn_mid_->forward(mid_->forward(h2))));
    const Tensor u1 = silu_u1_.forward(inj_u1_->forward(
        gn_u1_->forward(up1_conv_->forward(concat_channels(ups1_.forward(m), h1)))));
    const Tensor u2 = silu_u2_.forward(inj_u2_->forward(
        gn_u2_->forward(up2_conv_->forward(concat_channels(ups2_.forward(u1), h0)))));
    forward_done_ = true;
    return conv_out_->forward(u2);
}

Tensor UNet::backward(const Tensor& dy) {
    if (!forward_done_) throw UsageError("unet: backward before forward");
    forward_done_ = false;

    Tensor d = conv_out_->backward(dy);
    d = up2_conv_->backward(gn_u2_->backward(inj_u2_->backward(silu_u2_.backward(d))));
    auto [d_ups2, d_h0_skip] = split_channels(d, w1_);
    Tensor du1 = ups2_.backward(d_ups2);

    d = up1_conv_->backward(gn_u1_->backward(inj_u1_->backward(silu_u1_.backward(du1))));
    auto [d_ups1, d_h1_skip] = split_channels(d, w2_);
    Tensor dm = ups1_.backward(d_ups1);

    Tensor dh2 = mid_->backward(gn_mid_->backward(inj_mid_->backward(silu_mid_.backward(dm))));
    Tensor dh1 = down2_->backward(gn_d2_->backward(inj_d2_->backward(silu_d2_.backward(dh2))));
    add_into(dh1, d_h1_skip);
    Tensor dh0 = down1_->backward(gn_d1_->backward(inj_d1_->backward(silu_d1_.backward(dh1))));
    add_into(dh0, d_h0_skip);
    Tensor dx = conv_in_->backward(gn_in_->backward(inj_in_->backward(silu_in_.backward(dh0))));

    // conditioning path: all injection sites feed the shared embedding
    Tensor de({cfg_.embed_dim});
    for (EmbedInject* inj : {inj_in_.get(), inj_d1_.get(), inj_d2_.get(), inj_mid_.get(),
                             inj_u1_.get(), inj_u2_.get()})
        add_into(de, inj->embedding_grad());

    double* trow =
        token_table_->grad.data.data() + static_cast<size_t>(cache_token_) * cfg_.embed_dim;
    for (int i = 0; i < cfg_.embed_dim; ++i) trow[i] += de.data[i];
    time_dense_->backward(time_act_.backward(de));

    return dx;
}

std::vector<Param*> UNet::params() {
    std::vector<Param*> out;
    for (Layer* layer :
         std::initializer_list<Layer*>{conv_in_.get(), gn_in_.get(), inj_in_.get(), down1_.get(),
                                       gn_d1_.get(), inj_d1_.get(), down2_.get(), gn_d2_.get(),
                                       inj_d2_.get(), mid_.get(), gn_mid_.get(), inj_mid_.get(),
                                       up1_conv_.get(), gn_u1_.get(), inj_u1_.get(), up2_conv_.get(),
                                       gn_u2_.get(), inj_u2_.get(), conv_out_.get(),
                                       time_dense_.get()}) {
        for (Param* p : layer->params()) out.push_back(p);
    }
    out.push_back(token_table_.get());
    return out;
}

void UNet::zero_grads() {
    for (Param* p : params()) p->zero_grad();
}

}  // namespace lesionforge::tensornet
