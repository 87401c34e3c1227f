#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "specae/error.hpp"
#include "specae/rng.hpp"
#include "specae/tensor.hpp"

namespace specae {

enum class LayerKind : std::uint8_t {
    Dense = 0,
    Conv1d = 1,
    Conv1dTranspose = 2,
    MaxPool1d = 3,
    AvgPool1d = 4,
    Upsample1d = 5,
    BatchNorm = 6,
    Elu = 7,
    Flatten = 8,
    Reshape = 9,
};

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Dense: return "dense";
        case LayerKind::Conv1d: return "conv1d";
        case LayerKind::Conv1dTranspose: return "conv1d_transpose";
        case LayerKind::MaxPool1d: return "maxpool1d";
        case LayerKind::AvgPool1d: return "avgpool1d";
        case LayerKind::Upsample1d: return "upsample1d";
        case LayerKind::BatchNorm: return "batchnorm";
        case LayerKind::Elu: return "elu";
        case LayerKind::Flatten: return "flatten";
        case LayerKind::Reshape: return "reshape";
    }
    return "?";
}

// Serializable layer description. Meaning of p0..p2 depends on kind:
//   dense:            p0=in, p1=out
//   conv1d / deconv:  p0=kernel, p1=in_channels, p2=out_channels
//   pools / upsample: p0=factor
//   batchnorm:        p0=channels
//   reshape:          p0=length, p1=channels
struct LayerSpec {
    LayerKind kind = LayerKind::Dense;
    std::uint32_t p0 = 0, p1 = 0, p2 = 0;
};

template <class Real>
struct Parameter {
    std::string name;
    Tensor<Real> value;
    Tensor<Real> grad;
    bool trainable = true;

    Parameter() = default;
    Parameter(std::string n, Tensor<Real> v, bool train = true)
        : name(std::move(n)), value(std::move(v)), grad(value.shape), trainable(train) {}
};

enum class Mode { Train, Infer };

template <class Real>
class Layer {
  public:
    virtual ~Layer() = default;
    virtual LayerSpec spec() const = 0;
    // per-sample shape (without the batch dimension)
    virtual std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const = 0;
    virtual Tensor<Real> forward(const Tensor<Real>& x, Mode mode) = 0;
    // Accumulates into parameter grads; returns gradient w.r.t. the input.
    virtual Tensor<Real> backward(const Tensor<Real>& dy) = 0;
    virtual std::vector<Parameter<Real>*> params() { return {}; }
};

namespace detail {

template <class Real>
void glorot_uniform(Tensor<Real>& t, std::size_t fan_in, std::size_t fan_out,
                    std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& v : t.values) v = static_cast<Real>(dist(rng));
}

}  // namespace detail

template <class Real>
class DenseLayer final : public Layer<Real> {
  public:
    DenseLayer(std::size_t in, std::size_t out, std::mt19937_64& rng, const std::string& name)
        : in_(in), out_(out),
          weights_(name + ".w", Tensor<Real>({in, out})),
          bias_(name + ".b", Tensor<Real>({out})) {
        detail::glorot_uniform(weights_.value, in, out, rng);
    }

    LayerSpec spec() const override {
        return {LayerKind::Dense, std::uint32_t(in_), std::uint32_t(out_), 0};
    }

    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        if (in.size() != 1 || in[0] != in_)
            throw ShapeError("dense: input " + shape_str(in) + " incompatible with in=" +
                             std::to_string(in_));
        return {out_};
    }

    Tensor<Real> forward(const Tensor<Real>& x, Mode) override {
        if (x.rank() != 2 || x.dim(1) != in_)
            throw ShapeError("dense: bad input " + shape_str(x.shape));
        x_ = x;
        const std::size_t batch = x.dim(0);
        Tensor<Real> y({batch, out_});
        const Real* w = weights_.value.data();
        const Real* b = bias_.value.data();
        for (std::size_t bi = 0; bi < batch; ++bi) {
            Real* yr = y.data() + bi * out_;
            for (std::size_t j = 0; j < out_; ++j) yr[j] = b[j];
            const Real* xr = x.data() + bi * in_;
            for (std::size_t i = 0; i < in_; ++i) {
                const Real xv = xr[i];
                const Real* wr = w + i * out_;
                for (std::size_t j = 0; j < out_; ++j) yr[j] += xv * wr[j];
            }
        }
        return y;
    }

    Tensor<Real> backward(const Tensor<Real>& dy) override {
        const std::size_t batch = x_.dim(0);
        require_shape(dy, {batch, out_}, "dense backward");
        Tensor<Real> dx({batch, in_});
        Real* dw = weights_.grad.data();
        Real* db = bias_.grad.data();
        const Real* w = weights_.value.data();
        for (std::size_t bi = 0; bi < batch; ++bi) {
            const Real* dyr = dy.data() + bi * out_;
            const Real* xr = x_.data() + bi * in_;
            Real* dxr = dx.data() + bi * in_;
            for (std::size_t j = 0; j < out_; ++j) db[j] += dyr[j];
            for (std::size_t i = 0; i < in_; ++i) {
                const Real xv = xr[i];
                const Real* wr = w + i * out_;
                Real* dwr = dw + i * out_;
                Real acc = 0;
                for (std::size_t j = 0; j < out_; ++j) {
                    dwr[j] += xv * dyr[j];
                    acc += wr[j] * dyr[j];
                }
                dxr[i] = acc;
            }
        }
        return dx;
    }

    std::vector<Parameter<Real>*> params() override { return {&weights_, &bias_}; }

    Parameter<Real>& weights() { return weights_; }
    Parameter<Real>& bias() { return bias_; }

  private:
    std::size_t in_, out_;
    Parameter<Real> weights_, bias_;
    Tensor<Real> x_;
};

// Same-padding stride-1 1D convolution. Kernels are stored [K, Cin, Cout] so
// the innermost output-channel loop runs over contiguous memory. The
// transposed variant evaluates the same sum with the kernel reversed along
// its spatial axis, which is the adjoint of the forward convolution.
template <class Real>
class Conv1dLayer final : public Layer<Real> {
  public:
    Conv1dLayer(std::size_t kernel, std::size_t cin, std::size_t cout, bool transposed,
                std::mt19937_64& rng, const std::string& name)
        : k_(kernel), cin_(cin), cout_(cout), transposed_(transposed),
          kernels_(name + ".k", Tensor<Real>({kernel, cin, cout})),
          bias_(name + ".b", Tensor<Real>({cout})) {
        if (kernel % 2 == 0 || kernel < 1)
            throw ConfigError("conv1d: kernel width must be odd and >=1, got " +
                              std::to_string(kernel));
        detail::glorot_uniform(kernels_.value, kernel * cin, kernel * cout, rng);
    }

    LayerSpec spec() const override {
        return {transposed_ ? LayerKind::Conv1dTranspose : LayerKind::Conv1d,
                std::uint32_t(k_), std::uint32_t(cin_), std::uint32_t(cout_)};
    }

    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        if (in.size() != 2 || in[1] != cin_)
            throw ShapeError("conv1d: input " + shape_str(in) + " incompatible with cin=" +
                             std::to_string(cin_));
        return {in[0], cout_};
    }

    Tensor<Real> forward(const Tensor<Real>& x, Mode) override {
        if (x.rank() != 3 || x.dim(2) != cin_)
            throw ShapeError("conv1d: bad input " + shape_str(x.shape));
        x_ = x;
        const std::size_t batch = x.dim(0), len = x.dim(1);
        const std::ptrdiff_t half = std::ptrdiff_t(k_ / 2);
        Tensor<Real> y({batch, len, cout_});
        const Real* b = bias_.value.data();
        for (std::size_t bi = 0; bi < batch; ++bi) {
            for (std::size_t l = 0; l < len; ++l) {
                Real* yr = y.data() + (bi * len + l) * cout_;
                for (std::size_t o = 0; o < cout_; ++o) yr[o] = b[o];
                for (std::size_t k = 0; k < k_; ++k) {
                    const std::ptrdiff_t p = std::ptrdiff_t(l) + std::ptrdiff_t(k) - half;
                    if (p < 0 || p >= std::ptrdiff_t(len)) continue;
                    const Real* xr = x.data() + (bi * len + std::size_t(p)) * cin_;
                    const Real* kr = kernel_row(k);
                    for (std::size_t c = 0; c < cin_; ++c) {
                        const Real xv = xr[c];
                        const Real* kc = kr + c * cout_;
                        for (std::size_t o = 0; o < cout_; ++o) yr[o] += xv * kc[o];
                    }
                }
            }
        }
        return y;
    }

    Tensor<Real> backward(const Tensor<Real>& dy) override {
        const std::size_t batch = x_.dim(0), len = x_.dim(1);
        require_shape(dy, {batch, len, cout_}, "conv1d backward");
        const std::ptrdiff_t half = std::ptrdiff_t(k_ / 2);
        Tensor<Real> dx({batch, len, cin_});
        Real* db = bias_.grad.data();
        for (std::size_t bi = 0; bi < batch; ++bi) {
            for (std::size_t l = 0; l < len; ++l) {
                const Real* dyr = dy.data() + (bi * len + l) * cout_;
                for (std::size_t o = 0; o < cout_; ++o) db[o] += dyr[o];
                for (std::size_t k = 0; k < k_; ++k) {
                    const std::ptrdiff_t p = std::ptrdiff_t(l) + std::ptrdiff_t(k) - half;
                    if (p < 0 || p >= std::ptrdiff_t(len)) continue;
                    const Real* xr = x_.data() + (bi * len + std::size_t(p)) * cin_;
                    Real* dxr = dx.data() + (bi * len + std::size_t(p)) * cin_;
                    const Real* kr = kernel_row(k);
                    Real* dkr = kernel_grad_row(k);
                    for (std::size_t c = 0; c < cin_; ++c) {
                        const Real xv = xr[c];
                        const Real* kc = kr + c * cout_;
                        Real* dkc = dkr + c * cout_;
                        Real acc = 0;
                        for (std::size_t o = 0; o < cout_; ++o) {
                            dkc[o] += xv * dyr[o];
                            acc += kc[o] * dyr[o];
                        }
                        dxr[c] += acc;
                    }
                }
            }
        }
        return dx;
    }

    std::vector<Parameter<Real>*> params() override { return {&kernels_, &bias_}; }

    Parameter<Real>& kernels() { return kernels_; }
    Parameter<Real>& bias() { return bias_; }

  private:
    const Real* kernel_row(std::size_t k) const {
        const std::size_t kk = transposed_ ? (k_ - 1 - k) : k;
        return kernels_.value.data() + kk * cin_ * cout_;
    }
    Real* kernel_grad_row(std::size_t k) {
        const std::size_t kk = transposed_ ? (k_ - 1 - k) : k;
        return kernels_.grad.data() + kk * cin_ * cout_;
    }

    std::size_t k_, cin_, cout_;
    bool transposed_;
    Parameter<Real> kernels_, bias_;
    Tensor<Real> x_;
};

template <class Real>
class MaxPool1dLayer final : public Layer<Real> {
  public:
    explicit MaxPool1dLayer(std::size_t factor) : factor_(factor) {
        if (factor < 2) throw ConfigError("maxpool1d: factor must be >= 2");
    }

    LayerSpec spec() const override { return {LayerKind::MaxPool1d, std::uint32_t(factor_), 0, 0}; }

    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        if (in.size() != 2) throw ShapeError("maxpool1d: expected rank-2 sample shape");
        if (in[0] % factor_ != 0)
            throw ShapeError("maxpool1d: length " + std::to_string(in[0]) +
                             " not divisible by factor " + std::to_string(factor_));
        return {in[0] / factor_, in[1]};
    }

    Tensor<Real> forward(const Tensor<Real>& x, Mode) override {
        if (x.rank() != 3) throw ShapeError("maxpool1d: bad input " + shape_str(x.shape));
        const std::size_t batch = x.dim(0), len = x.dim(1), ch = x.dim(2);
        if (len % factor_ != 0)
            throw ShapeError("maxpool1d: length " + std::to_string(len) +
                             " not divisible by factor " + std::to_string(factor_));
        in_shape_ = x.shape;
        const std::size_t olen = len / factor_;
        Tensor<Real> y({batch, olen, ch});
        argmax_.assign(y.size(), 0);
        tied_.assign(y.size(), 0);
        for (std::size_t bi = 0; bi < batch; ++bi)
            for (std::size_t l = 0; l < olen; ++l)
                for (std::size_t c = 0; c < ch; ++c) {
                    std::size_t best = l * factor_;
                    Real bv = x.at3(bi, best, c);
                    bool tie = false;
                    for (std::size_t f = 1; f < factor_; ++f) {
                        const Real v = x.at3(bi, l * factor_ + f, c);
                        if (v > bv) {
                            bv = v;
                            best = l * factor_ + f;
                            tie = false;
                        } else if (v == bv) {
                            tie = true;  // first index keeps the gradient
                        }
                    }
                    const std::size_t oi = (bi * olen + l) * ch + c;
                    y.values[oi] = bv;
                    argmax_[oi] = std::uint32_t(best);
                    tied_[oi] = tie ? 1 : 0;
                }
        return y;
    }

    Tensor<Real> backward(const Tensor<Real>& dy) override {
        const std::size_t batch = in_shape_[0], len = in_shape_[1], ch = in_shape_[2];
        const std::size_t olen = len / factor_;
        require_shape(dy, {batch, olen, ch}, "maxpool1d backward");
        Tensor<Real> dx(in_shape_);
        for (std::size_t bi = 0; bi < batch; ++bi)
            for (std::size_t l = 0; l < olen; ++l)
                for (std::size_t c = 0; c < ch; ++c) {
                    const std::size_t oi = (bi * olen + l) * ch + c;
                    dx.at3(bi, argmax_[oi], c) += dy.values[oi];
                }
        return dx;
    }

    // selection pattern of the last forward; used by the gradient checker to
    // detect argmax flips / tied windows
    const std::vector<std::uint32_t>& last_argmax() const { return argmax_; }
    const std::vector<std::uint8_t>& last_ties() const { return tied_; }

  private:
    std::size_t factor_;
    std::vector<std::size_t> in_shape_;
    std::vector<std::uint32_t> argmax_;
    std::vector<std::uint8_t> tied_;
};

template <class Real>
class AvgPool1dLayer final : public Layer<Real> {
  public:
    explicit AvgPool1dLayer(std::size_t factor) : factor_(factor) {
        if (factor < 2) throw ConfigError("avgpool1d: factor must be >= 2");
    }

    LayerSpec spec() const override { return {LayerKind::AvgPool1d, std::uint32_t(factor_), 0, 0}; }

    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        if (in.size() != 2) throw ShapeError("avgpool1d: expected rank-2 sample shape");
        if (in[0] % factor_ != 0)
            throw ShapeError("avgpool1d: length " + std::to_string(in[0]) +
                             " not divisible by factor " + std::to_string(factor_));
        return {in[0] / factor_, in[1]};
    }

    Tensor<Real> forward(const Tensor<Real>& x, Mode) override {
        if (x.rank() != 3) throw ShapeError("avgpool1d: bad input " + shape_str(x.shape));
        const std::size_t batch = x.dim(0), len = x.dim(1), ch = x.dim(2);
        if (len % factor_ != 0)
            throw ShapeError("avgpool1d: length " + std::to_string(len) +
                             " not divisible by factor " + std::to_string(factor_));
        in_shape_ = x.shape;
        const std::size_t olen = len / factor_;
        const Real inv = Real(1) / Real(factor_);
        Tensor<Real> y({batch, olen, ch});
        for (std::size_t bi = 0; bi < batch; ++bi)
            for (std::size_t l = 0; l < olen; ++l)
                for (std::size_t c = 0; c < ch; ++c) {
                    Real acc = 0;
                    for (std::size_t f = 0; f < factor_; ++f)
                        acc += x.at3(bi, l * factor_ + f, c);
                    y.at3(bi, l, c) = acc * inv;
                }
        return y;
    }

    Tensor<Real> backward(const Tensor<Real>& dy) override {
        const std::size_t batch = in_shape_[0], len = in_shape_[1], ch = in_shape_[2];
        const std::size_t olen = len / factor_;
        require_shape(dy, {batch, olen, ch}, "avgpool1d backward");
        const Real inv = Real(1) / Real(factor_);
        Tensor<Real> dx(in_shape_);
        for (std::size_t bi = 0; bi < batch; ++bi)
            for (std::size_t l = 0; l < olen; ++l)
                for (std::size_t c = 0; c < ch; ++c) {
                    const Real g = dy.at3(bi, l, c) * inv;
                    for (std::size_t f = 0; f < factor_; ++f)
                        dx.at3(bi, l * factor_ + f, c) += g;
                }
        return dx;
    }

  private:
    std::size_t factor_;
    std::vector<std::size_t> in_shape_;
};

template <class Real>
class Upsample1dLayer final : public Layer<Real> {
  public:
    explicit Upsample1dLayer(std::size_t factor) : factor_(factor) {
        if (factor < 2) throw ConfigError("upsample1d: factor must be >= 2");
    }

    LayerSpec spec() const override {
        return {LayerKind::Upsample1d, std::uint32_t(factor_), 0, 0};
    }

    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        if (in.size() != 2) throw ShapeError("upsample1d: expected rank-2 sample shape");
        return {in[0] * factor_, in[1]};
    }

    Tensor<Real> forward(const Tensor<Real>& x, Mode) override {
        if (x.rank() != 3) throw ShapeError("upsample1d: bad input " + shape_str(x.shape));
        const std::size_t batch = x.dim(0), len = x.dim(1), ch = x.dim(2);
        in_shape_ = x.shape;
        Tensor<Real> y({batch, len * factor_, ch});
        for (std::size_t bi = 0; bi < batch; ++bi)
            for (std::size_t l = 0; l < len; ++l)
                for (std::size_t f = 0; f < factor_; ++f)
                    for (std::size_t c = 0; c < ch; ++c)
                        y.at3(bi, l * factor_ + f, c) = x.at3(bi, l, c);
        return y;
    }

    Tensor<Real> backward(const Tensor<Real>& dy) override {
        const std::size_t batch = in_shape_[0], len = in_shape_[1], ch = in_shape_[2];
        require_shape(dy, {batch, len * factor_, ch}, "upsample1d backward");
        Tensor<Real> dx(in_shape_);
        for (std::size_t bi = 0; bi < batch; ++bi)
            for (std::size_t l = 0; l < len; ++l)
                for (std::size_t f = 0; f < factor_; ++f)
                    for (std::size_t c = 0; c < ch; ++c)
                        dx.at3(bi, l, c) += dy.at3(bi, l * factor_ + f, c);
        return dx;
    }

  private:
    std::size_t factor_;
    std::vector<std::size_t> in_shape_;
};

// Per-channel batch normalization over [batch, C] or [batch, L, C].
// Biased variance for both normalization and the moving update.
template <class Real>
class BatchNormLayer final : public Layer<Real> {
  public:
    BatchNormLayer(std::size_t channels, const std::string& name, Real eps = Real(1e-3),
                   Real momentum = Real(0.99))
        : ch_(channels), eps_(eps), momentum_(momentum),
          gamma_(name + ".gamma", Tensor<Real>({channels})),
          beta_(name + ".beta", Tensor<Real>({channels})),
          moving_mean_(name + ".mmean", Tensor<Real>({channels}), false),
          moving_var_(name + ".mvar", Tensor<Real>({channels}), false) {
        gamma_.value.fill(Real(1));
        moving_var_.value.fill(Real(1));
    }

    LayerSpec spec() const override { return {LayerKind::BatchNorm, std::uint32_t(ch_), 0, 0}; }

    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        if (in.empty() || in.back() != ch_)
            throw ShapeError("batchnorm: input " + shape_str(in) + " incompatible with channels=" +
                             std::to_string(ch_));
        return in;
    }

    Tensor<Real> forward(const Tensor<Real>& x, Mode mode) override {
        if (x.rank() < 2 || x.shape.back() != ch_)
            throw ShapeError("batchnorm: bad input " + shape_str(x.shape));
        const std::size_t rows = x.size() / ch_;
        if (mode == Mode::Train && x.dim(0) < 2)
            throw NumericError("batchnorm: train mode requires batch >= 2");
        x_ = x;
        mode_ = mode;
        Tensor<Real> y(x.shape);
        if (mode == Mode::Train) {
            mean_.assign(ch_, Real(0));
            var_.assign(ch_, Real(0));
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < ch_; ++c) mean_[c] += x.values[r * ch_ + c];
            for (std::size_t c = 0; c < ch_; ++c) mean_[c] /= Real(rows);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < ch_; ++c) {
                    const Real d = x.values[r * ch_ + c] - mean_[c];
                    var_[c] += d * d;
                }
            inv_std_.resize(ch_);
            for (std::size_t c = 0; c < ch_; ++c) {
                var_[c] /= Real(rows);
                inv_std_[c] = Real(1) / std::sqrt(var_[c] + eps_);
                moving_mean_.value[c] =
                    momentum_ * moving_mean_.value[c] + (Real(1) - momentum_) * mean_[c];
                moving_var_.value[c] =
                    momentum_ * moving_var_.value[c] + (Real(1) - momentum_) * var_[c];
            }
            xhat_ = Tensor<Real>(x.shape);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < ch_; ++c) {
                    const Real h = (x.values[r * ch_ + c] - mean_[c]) * inv_std_[c];
                    xhat_.values[r * ch_ + c] = h;
                    y.values[r * ch_ + c] = gamma_.value[c] * h + beta_.value[c];
                }
        } else {
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < ch_; ++c) {
                    const Real h = (x.values[r * ch_ + c] - moving_mean_.value[c]) /
                                   std::sqrt(moving_var_.value[c] + eps_);
                    y.values[r * ch_ + c] = gamma_.value[c] * h + beta_.value[c];
                }
        }
        return y;
    }

    Tensor<Real> backward(const Tensor<Real>& dy) override {
        require_shape(dy, x_.shape, "batchnorm backward");
        const std::size_t rows = x_.size() / ch_;
        Tensor<Real> dx(x_.shape);
        if (mode_ == Mode::Infer) {
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < ch_; ++c) {
                    const Real g = dy.values[r * ch_ + c];
                    gamma_.grad[c] += g * (x_.values[r * ch_ + c] - moving_mean_.value[c]) /
                                      std::sqrt(moving_var_.value[c] + eps_);
                    beta_.grad[c] += g;
                    dx.values[r * ch_ + c] =
                        g * gamma_.value[c] / std::sqrt(moving_var_.value[c] + eps_);
                }
            return dx;
        }
        // train mode: differentiate through the batch statistics
        std::vector<Real> sum_dh(ch_, Real(0)), sum_dh_xhat(ch_, Real(0));
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < ch_; ++c) {
                const Real g = dy.values[r * ch_ + c];
                const Real h = xhat_.values[r * ch_ + c];
                gamma_.grad[c] += g * h;
                beta_.grad[c] += g;
                const Real dh = g * gamma_.value[c];
                sum_dh[c] += dh;
                sum_dh_xhat[c] += dh * h;
            }
        const Real invn = Real(1) / Real(rows);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < ch_; ++c) {
                const Real dh = dy.values[r * ch_ + c] * gamma_.value[c];
                const Real h = xhat_.values[r * ch_ + c];
                dx.values[r * ch_ + c] =
                    inv_std_[c] * (dh - invn * sum_dh[c] - invn * h * sum_dh_xhat[c]);
            }
        return dx;
    }

    std::vector<Parameter<Real>*> params() override {
        return {&gamma_, &beta_, &moving_mean_, &moving_var_};
    }

  private:
    std::size_t ch_;
    Real eps_, momentum_;
    Parameter<Real> gamma_, beta_, moving_mean_, moving_var_;
    Tensor<Real> x_, xhat_;
    std::vector<Real> mean_, var_, inv_std_;
    Mode mode_ = Mode::Train;
};

template <class Real>
class EluLayer final : public Layer<Real> {
  public:
    explicit EluLayer(Real alpha = Real(1)) : alpha_(alpha) {}

    LayerSpec spec() const override { return {LayerKind::Elu, 0, 0, 0}; }

    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        return in;
    }

    Tensor<Real> forward(const Tensor<Real>& x, Mode) override {
        Tensor<Real> y(x.shape);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const Real v = x.values[i];
            y.values[i] = v > Real(0) ? v : alpha_ * (std::exp(v) - Real(1));
        }
        y_ = y;
        return y;
    }

    Tensor<Real> backward(const Tensor<Real>& dy) override {
        require_shape(dy, y_.shape, "elu backward");
        Tensor<Real> dx(y_.shape);
        // for x <= 0 the output is alpha*(e^x - 1), so d/dx = output + alpha
        for (std::size_t i = 0; i < dy.size(); ++i) {
            const Real o = y_.values[i];
            dx.values[i] = dy.values[i] * (o > Real(0) ? Real(1) : o + alpha_);
        }
        return dx;
    }

  private:
    Real alpha_;
    Tensor<Real> y_;
};

template <class Real>
class FlattenLayer final : public Layer<Real> {
  public:
    LayerSpec spec() const override { return {LayerKind::Flatten, 0, 0, 0}; }

    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        std::size_t n = 1;
        for (std::size_t e : in) n *= e;
        return {n};
    }

    Tensor<Real> forward(const Tensor<Real>& x, Mode) override {
        in_shape_ = x.shape;
        Tensor<Real> y;
        y.shape = {x.dim(0), x.size() / x.dim(0)};
        y.values = x.values;
        return y;
    }

    Tensor<Real> backward(const Tensor<Real>& dy) override {
        Tensor<Real> dx;
        dx.shape = in_shape_;
        dx.values = dy.values;
        return dx;
    }

  private:
    std::vector<std::size_t> in_shape_;
};

template <class Real>
class ReshapeLayer final : public Layer<Real> {
  public:
    ReshapeLayer(std::size_t length, std::size_t channels) : len_(length), ch_(channels) {}

    LayerSpec spec() const override {
        return {LayerKind::Reshape, std::uint32_t(len_), std::uint32_t(ch_), 0};
    }

    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        std::size_t n = 1;
        for (std::size_t e : in) n *= e;
        if (n != len_ * ch_)
            throw ShapeError("reshape: input " + shape_str(in) + " has " + std::to_string(n) +
                             " elements, expected " + std::to_string(len_ * ch_));
        return {len_, ch_};
    }

    Tensor<Real> forward(const Tensor<Real>& x, Mode) override {
        const std::size_t batch = x.dim(0);
        if (x.size() != batch * len_ * ch_)
            throw ShapeError("reshape: bad input " + shape_str(x.shape));
        in_shape_ = x.shape;
        Tensor<Real> y;
        y.shape = {batch, len_, ch_};
        y.values = x.values;
        return y;
    }

    Tensor<Real> backward(const Tensor<Real>& dy) override {
        Tensor<Real> dx;
        dx.shape = in_shape_;
        dx.values = dy.values;
        return dx;
    }

  private:
    std::size_t len_, ch_;
    std::vector<std::size_t> in_shape_;
};

}  // namespace specae
