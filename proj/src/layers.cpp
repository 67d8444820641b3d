#include "lesionforge/layers.hpp"

#include <cmath>

namespace lesionforge::tensornet {

namespace {

Tensor he_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    const double limit = std::sqrt(6.0 / fan_in);
    for (double& v : t.data) v = rng.uniform(-limit, limit);
    return t;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng)
    : in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      weight_(name + ".w", he_uniform({out_ch, in_ch, kernel, kernel}, in_ch * kernel * kernel, rng)),
      bias_(name + ".b", Tensor::zeros({out_ch})) {
    if (kernel < 1 || stride < 1 || pad < 0) throw ConfigError("conv2d: bad geometry");
}

Tensor Conv2d::forward(const Tensor& x) {
    if (x.shape.size() != 3 || x.shape[0] != in_ch_)
        throw ShapeError("conv2d: input " + x.shape_str() + ", expected (" +
                         std::to_string(in_ch_) + ",H,W)");
    const int h = x.shape[1], w = x.shape[2];
    if (h + 2 * pad_ < kernel_ || w + 2 * pad_ < kernel_)
        throw ShapeError("conv2d: input smaller than kernel");
    const int oh = (h + 2 * pad_ - kernel_) / stride_ + 1;
    const int ow = (w + 2 * pad_ - kernel_) / stride_ + 1;

    cache_x_ = x;
    Tensor out({out_ch_, oh, ow});
    for (int oc = 0; oc < out_ch_; ++oc) {
        const double b = bias_.value.data[oc];
        double* oplane = out.data.data() + static_cast<size_t>(oc) * oh * ow;
        for (int i = 0; i < oh * ow; ++i) oplane[i] = b;
    }
    for (int oc = 0; oc < out_ch_; ++oc) {
        double* oplane = out.data.data() + static_cast<size_t>(oc) * oh * ow;
        for (int ic = 0; ic < in_ch_; ++ic) {
            const double* xplane = x.data.data() + static_cast<size_t>(ic) * h * w;
            const double* wk =
                weight_.value.data.data() + (static_cast<size_t>(oc) * in_ch_ + ic) * kernel_ * kernel_;
            for (int ky = 0; ky < kernel_; ++ky) {
                for (int kx = 0; kx < kernel_; ++kx) {
                    const double wv = wk[ky * kernel_ + kx];
                    // output x range with in-bounds input column
                    const int ox_lo = std::max(0, (pad_ - kx + stride_ - 1) / stride_);
                    const int ox_hi = std::min(ow - 1, (w - 1 - kx + pad_) / stride_);
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * stride_ + ky - pad_;
                        if (iy < 0 || iy >= h) continue;
                        const double* xrow = xplane + static_cast<size_t>(iy) * w;
                        double* orow = oplane + static_cast<size_t>(oy) * ow;
                        const int base = kx - pad_;
                        for (int ox = ox_lo; ox <= ox_hi; ++ox)
                            orow[ox] += wv * xrow[ox * stride_ + base];
                    }
                }
            }
        }
    }
    return out;
}

Tensor Conv2d::backward(const Tensor& dy) {
    if (cache_x_.size() == 0) throw UsageError("conv2d: backward before forward");
    const Tensor& x = cache_x_;
    const int h = x.shape[1], w = x.shape[2];
    const int oh = dy.shape[1], ow = dy.shape[2];
    if (dy.shape[0] != out_ch_) throw ShapeError("conv2d: dy channel mismatch");

    Tensor dx({in_ch_, h, w});
    for (int oc = 0; oc < out_ch_; ++oc) {
        const double* dplane = dy.data.data() + static_cast<size_t>(oc) * oh * ow;
        double acc = 0.0;
        for (int i = 0; i < oh * ow; ++i) acc += dplane[i];
        bias_.grad.data[oc] += acc;

        for (int ic = 0; ic < in_ch_; ++ic) {
            const double* xplane = x.data.data() + static_cast<size_t>(ic) * h * w;
            double* dxplane = dx.data.data() + static_cast<size_t>(ic) * h * w;
            const size_t wbase = (static_cast<size_t>(oc) * in_ch_ + ic) * kernel_ * kernel_;
            for (int ky = 0; ky < kernel_; ++ky) {
                for (int kx = 0; kx < kernel_; ++kx) {
                    const double wv = weight_.value.data[wbase + ky * kernel_ + kx];
                    double wgrad = 0.0;
                    const int ox_lo = std::max(0, (pad_ - kx + stride_ - 1) / stride_);
                    const int ox_hi = std::min(ow - 1, (w - 1 - kx + pad_) / stride_);
                    const int base = kx - pad_;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * stride_ + ky - pad_;
                        if (iy < 0 || iy >= h) continue;
                        const double* xrow = xplane + static_cast<size_t>(iy) * w;
                        double* dxrow = dxplane + static_cast<size_t>(iy) * w;
                        const double* drow = dplane + static_cast<size_t>(oy) * ow;
                        for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                            const double d = drow[ox];
                            wgrad += d * xrow[ox * stride_ + base];
                            dxrow[ox * stride_ + base] += wv * d;
                        }
                    }
                    weight_.grad.data[wbase + ky * kernel_ + kx] += wgrad;
                }
            }
        }
    }
    return dx;
}

// ----------------------------------------------------------------- Dense

Dense::Dense(std::string name, int in_dim, int out_dim, Rng& rng)
    : in_dim_(in_dim),
      out_dim_(out_dim),
      weight_(name + ".w", he_uniform({out_dim, in_dim}, in_dim, rng)),
      bias_(name + ".b", Tensor::zeros({out_dim})) {}

Tensor Dense::forward(const Tensor& x) {
    if (static_cast<int>(x.size()) != in_dim_)
        throw ShapeError("dense: input size " + std::to_string(x.size()) + ", expected " +
                         std::to_string(in_dim_));
    cache_x_ = x;
    cache_input_shape_ = x.shape;
    Tensor y({out_dim_});
    for (int o = 0; o < out_dim_; ++o) {
        const double* wrow = weight_.value.data.data() + static_cast<size_t>(o) * in_dim_;
        double acc = bias_.value.data[o];
        for (int i = 0; i < in_dim_; ++i) acc += wrow[i] * x.data[i];
        y.data[o] = acc;
    }
    return y;
}

Tensor Dense::backward(const Tensor& dy) {
    if (cache_x_.size() == 0) throw UsageError("dense: backward before forward");
    if (static_cast<int>(dy.size()) != out_dim_) throw ShapeError("dense: dy size mismatch");
    Tensor dx(cache_input_shape_);
    for (int o = 0; o < out_dim_; ++o) {
        const double d = dy.data[o];
        bias_.grad.data[o] += d;
        const double* wrow = weight_.value.data.data() + static_cast<size_t>(o) * in_dim_;
        double* gwrow = weight_.grad.data.data() + static_cast<size_t>(o) * in_dim_;
        for (int i = 0; i < in_dim_; ++i) {
            gwrow[i] += d * cache_x_.data[i];
            dx.data[i] += wrow[i] * d;
        }
    }
    return dx;
}

// ------------------------------------------------------------ activations

Tensor ReLU::forward(const Tensor& x) {
    cache_x_ = x;
    Tensor y(x.shape);
    for (size_t i = 0; i < x.size(); ++i) y.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
    return y;
}

Tensor ReLU::backward(const Tensor& dy) {
    if (cache_x_.size() == 0) throw UsageError("relu: backward before forward");
    Tensor dx(cache_x_.shape);
    for (size_t i = 0; i < dx.size(); ++i)
        dx.data[i] = cache_x_.data[i] > 0.0 ? dy.data[i] : 0.0;
    return dx;
}

Tensor SiLU::forward(const Tensor& x) {
    cache_x_ = x;
    Tensor y(x.shape);
    for (size_t i = 0; i < x.size(); ++i) y.data[i] = x.data[i] * sigmoid(x.data[i]);
    return y;
}

Tensor SiLU::backward(const Tensor& dy) {
    if (cache_x_.size() == 0) throw UsageError("silu: backward before forward");
    Tensor dx(cache_x_.shape);
    for (size_t i = 0; i < dx.size(); ++i) {
        const double s = sigmoid(cache_x_.data[i]);
        dx.data[i] = dy.data[i] * (s + cache_x_.data[i] * s * (1.0 - s));
    }
    return dx;
}

// -------------------------------------------------------------- GroupNorm

int GroupNorm::pick_groups(int channels) {
    for (int g = std::min(8, channels); g >= 1; --g)
        if (channels % g == 0) return g;
    return 1;
}

GroupNorm::GroupNorm(std::string name, int channels)
    : channels_(channels),
      groups_(pick_groups(channels)),
      gamma_(name + ".gamma", Tensor::full({channels}, 1.0)),
      beta_(name + ".beta", Tensor::zeros({channels})) {}

Tensor GroupNorm::forward(const Tensor& x) {
    if (x.shape.size() != 3 || x.shape[0] != channels_)
        throw ShapeError("groupnorm: input " + x.shape_str() + ", expected (" +
                         std::to_string(channels_) + ",H,W)");
    const int hw = x.shape[1] * x.shape[2];
    const int cpg = channels_ / groups_;
    const size_t group_elems = static_cast<size_t>(cpg) * hw;
    constexpr double kEps = 1e-5;

    cache_xhat_ = Tensor(x.shape);
    cache_inv_std_.assign(static_cast<size_t>(groups_), 0.0);
    Tensor y(x.shape);
    for (int g = 0; g < groups_; ++g) {
        const size_t base = static_cast<size_t>(g) * group_elems;
        double mean = 0.0;
        for (size_t i = 0; i < group_elems; ++i) mean += x.data[base + i];
        mean /= static_cast<double>(group_elems);
        double var = 0.0;
        for (size_t i = 0; i < group_elems; ++i) {
            const double d = x.data[base + i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(group_elems);
        const double inv_std = 1.0 / std::sqrt(var + kEps);
        cache_inv_std_[static_cast<size_t>(g)] = inv_std;
        for (int c = 0; c < cpg; ++c) {
            const int ch = g * cpg + c;
            const double gm = gamma_.value.data[ch], bt = beta_.value.data[ch];
            for (int i = 0; i < hw; ++i) {
                const size_t idx = base + static_cast<size_t>(c) * hw + i;
                const double xhat = (x.data[idx] - mean) * inv_std;
                cache_xhat_.data[idx] = xhat;
                y.data[idx] = gm * xhat + bt;
            }
        }
    }
    return y;
}

Tensor GroupNorm::backward(const Tensor& dy) {
    if (cache_xhat_.size() == 0) throw UsageError("groupnorm: backward before forward");
    const int hw = cache_xhat_.shape[1] * cache_xhat_.shape[2];
    const int cpg = channels_ / groups_;
    const size_t group_elems = static_cast<size_t>(cpg) * hw;

    Tensor dx(cache_xhat_.shape);
    for (int ch = 0; ch < channels_; ++ch) {
        double dg = 0.0, db = 0.0;
        const size_t base = static_cast<size_t>(ch) * hw;
        for (int i = 0; i < hw; ++i) {
            dg += dy.data[base + i] * cache_xhat_.data[base + i];
            db += dy.data[base + i];
        }
        gamma_.grad.data[ch] += dg;
        beta_.grad.data[ch] += db;
    }
    for (int g = 0; g < groups_; ++g) {
        const size_t base = static_cast<size_t>(g) * group_elems;
        const double inv_std = cache_inv_std_[static_cast<size_t>(g)];
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (int c = 0; c < cpg; ++c) {
            const double gm = gamma_.value.data[g * cpg + c];
            for (int i = 0; i < hw; ++i) {
                const size_t idx = base + static_cast<size_t>(c) * hw + i;
                const double dxhat = dy.data[idx] * gm;
                mean_dxhat += dxhat;
                mean_dxhat_xhat += dxhat * cache_xhat_.data[idx];
            }
        }
        mean_dxhat /= static_cast<double>(group_elems);
        mean_dxhat_xhat /= static_cast<double>(group_elems);
        for (int c = 0; c < cpg; ++c) {
            const double gm = gamma_.value.data[g * cpg + c];
            for (int i = 0; i < hw; ++i) {
                const size_t idx = base + static_cast<size_t>(c) * hw + i;
                const double dxhat = dy.data[idx] * gm;
                dx.data[idx] =
                    inv_std * (dxhat - mean_dxhat - cache_xhat_.data[idx] * mean_dxhat_xhat);
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------- resize

Tensor NearestUpsample2x::forward(const Tensor& x) {
    if (x.shape.size() != 3) throw ShapeError("upsample2x: expected (C,H,W)");
    cache_in_shape_ = x.shape;
    const int c = x.shape[0], h = x.shape[1], w = x.shape[2];
    Tensor y({c, 2 * h, 2 * w});
    for (int ch = 0; ch < c; ++ch)
        for (int yy = 0; yy < 2 * h; ++yy)
            for (int xx = 0; xx < 2 * w; ++xx)
                y.data[(static_cast<size_t>(ch) * 2 * h + yy) * 2 * w + xx] =
                    x.data[(static_cast<size_t>(ch) * h + yy / 2) * w + xx / 2];
    return y;
}

Tensor NearestUpsample2x::backward(const Tensor& dy) {
    if (cache_in_shape_.empty()) throw UsageError("upsample2x: backward before forward");
    const int c = cache_in_shape_[0], h = cache_in_shape_[1], w = cache_in_shape_[2];
    Tensor dx(cache_in_shape_);
    for (int ch = 0; ch < c; ++ch)
        for (int yy = 0; yy < 2 * h; ++yy)
            for (int xx = 0; xx < 2 * w; ++xx)
                dx.data[(static_cast<size_t>(ch) * h + yy / 2) * w + xx / 2] +=
                    dy.data[(static_cast<size_t>(ch) * 2 * h + yy) * 2 * w + xx];
    return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x) {
    if (x.shape.size() != 3) throw ShapeError("gap: expected (C,H,W)");
    cache_in_shape_ = x.shape;
    const int c = x.shape[0], hw = x.shape[1] * x.shape[2];
    Tensor y({c});
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        const double* plane = x.data.data() + static_cast<size_t>(ch) * hw;
        for (int i = 0; i < hw; ++i) acc += plane[i];
        y.data[ch] = acc / hw;
    }
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
    if (cache_in_shape_.empty()) throw UsageError("gap: backward before forward");
    const int c = cache_in_shape_[0], hw = cache_in_shape_[1] * cache_in_shape_[2];
    Tensor dx(cache_in_shape_);
    for (int ch = 0; ch < c; ++ch) {
        const double d = dy.data[ch] / hw;
        double* plane = dx.data.data() + static_cast<size_t>(ch) * hw;
        for (int i = 0; i < hw; ++i) plane[i] = d;
    }
    return dx;
}

// ------------------------------------------------------------ EmbedInject

EmbedInject::EmbedInject(std::string name, int channels, int embed_dim, Rng& rng)
    : channels_(channels),
      embed_dim_(embed_dim),
      weight_(name + ".w", he_uniform({channels, embed_dim}, embed_dim, rng)),
      bias_(name + ".b", Tensor::zeros({channels})) {}

void EmbedInject::set_embedding(const Tensor& e) {
    if (static_cast<int>(e.size()) != embed_dim_) throw ShapeError("embed_inject: bad embedding dim");
    embed_ = e;
    has_embed_ = true;
}

Tensor EmbedInject::forward(const Tensor& x) {
    if (!has_embed_) throw UsageError("embed_inject: set_embedding not called");
    if (x.shape.size() != 3 || x.shape[0] != channels_)
        throw ShapeError("embed_inject: input " + x.shape_str());
    const int hw = x.shape[1] * x.shape[2];
    Tensor y(x.shape);
    for (int c = 0; c < channels_; ++c) {
        const double* wrow = weight_.value.data.data() + static_cast<size_t>(c) * embed_dim_;
        double proj = bias_.value.data[c];
        for (int e = 0; e < embed_dim_; ++e) proj += wrow[e] * embed_.data[e];
        const double* xin = x.data.data() + static_cast<size_t>(c) * hw;
        double* yout = y.data.data() + static_cast<size_t>(c) * hw;
        for (int i = 0; i < hw; ++i) yout[i] = xin[i] + proj;
    }
    return y;
}

Tensor EmbedInject::backward(const Tensor& dy) {
    if (!has_embed_) throw UsageError("embed_inject: backward before forward");
    const int hw = dy.shape[1] * dy.shape[2];
    embed_grad_ = Tensor({embed_dim_});
    for (int c = 0; c < channels_; ++c) {
        const double* drow = dy.data.data() + static_cast<size_t>(c) * hw;
        double dchan = 0.0;
        for (int i = 0; i < hw; ++i) dchan += drow[i];
        bias_.grad.data[c] += dchan;
        const double* wrow = weight_.value.data.data() + static_cast<size_t>(c) * embed_dim_;
        double* gwrow = weight_.grad.data.data() + static_cast<size_t>(c) * embed_dim_;
        for (int e = 0; e < embed_dim_; ++e) {
            gwrow[e] += dchan * embed_.data[e];
            embed_grad_.data[e] += wrow[e] * dchan;
        }
    }
    return dy;  // identity path for x
}

Tensor timestep_embedding(int t, int dim) {
    if (dim % 2 != 0) throw ConfigError("timestep embedding dim must be even");
    const int half = dim / 2;
    Tensor e({dim});
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        e.data[i] = std::sin(t * freq);
        e.data[half + i] = std::cos(t * freq);
    }
    return e;
}

}  // namespace lesionforge::tensornet
