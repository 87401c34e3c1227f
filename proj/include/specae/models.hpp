#pragma once

#include <cstdint>
#include <iostream>
#include <memory>
#include <string>

#include "specae/graph.hpp"
#include "specae/rng.hpp"

namespace specae {

inline constexpr std::size_t kWavelengths = 112;
inline constexpr std::size_t kProfileSize = 2 * kWavelengths;  // I and V
inline constexpr std::size_t kDefaultBottleneck = 28;
// continuum window (inclusive wavelength indices) used for noise estimation
inline constexpr std::size_t kContinuumLo = 0;
inline constexpr std::size_t kContinuumHi = 15;

enum class ModelTag : std::uint8_t { DAE = 0, CAE = 1 };

struct ModelKind {
    ModelTag tag = ModelTag::CAE;
    std::size_t bottleneck = kDefaultBottleneck;
};

inline const char* model_tag_name(ModelTag t) { return t == ModelTag::DAE ? "dae" : "cae"; }

inline ModelTag parse_model_tag(const std::string& s) {
    if (s == "dae" || s == "DAE") return ModelTag::DAE;
    if (s == "cae" || s == "CAE") return ModelTag::CAE;
    throw ConfigError("unknown model kind '" + s + "' (expected dae or cae)");
}

namespace detail {

inline void check_bottleneck(std::size_t b) {
    if (b < 1 || b > kProfileSize)
        throw ConfigError("bottleneck must be in [1, " + std::to_string(kProfileSize) +
                          "], got " + std::to_string(b));
}

}  // namespace detail

// Fully connected autoencoder: 224 -> 448 -> 224 -> 112 -> bottleneck ->
// 112 -> 224 -> 448 -> 224, each hidden block Dense+BN+ELU, bottleneck and
// output linear.
template <class Real>
NetworkGraph<Real> build_dae(std::size_t bottleneck, std::uint64_t seed) {
    detail::check_bottleneck(bottleneck);
    NetworkGraph<Real> g({kProfileSize});
    std::size_t prev = kProfileSize;
    int li = 0;
    auto dense_bn_elu = [&](std::size_t units) {
        auto rng = make_rng(derive_seed(seed, std::uint64_t(li)));
        const std::string name = "dense" + std::to_string(li);
        g.add(std::make_unique<DenseLayer<Real>>(prev, units, rng, name));
        g.add(std::make_unique<BatchNormLayer<Real>>(units, "bn" + std::to_string(li)));
        g.add(std::make_unique<EluLayer<Real>>());
        prev = units;
        ++li;
    };
    dense_bn_elu(448);
    dense_bn_elu(224);
    dense_bn_elu(112);
    {
        auto rng = make_rng(derive_seed(seed, std::uint64_t(li)));
        g.add(std::make_unique<DenseLayer<Real>>(prev, bottleneck, rng,
                                                 "dense" + std::to_string(li)));
        g.mark_bottleneck();
        prev = bottleneck;
        ++li;
    }
    dense_bn_elu(112);
    dense_bn_elu(224);
    dense_bn_elu(448);
    {
        auto rng = make_rng(derive_seed(seed, std::uint64_t(li)));
        g.add(std::make_unique<DenseLayer<Real>>(prev, kProfileSize, rng,
                                                 "dense" + std::to_string(li)));
    }
    return g;
}

// 1D-convolutional autoencoder. Encoder: three Conv+ELU+BN blocks with
// pooling (112 -> 56 -> 28 -> 14, channels 64 -> 32 -> 16), flatten to 224,
// linear dense bottleneck. Decoder mirrors with upsampling and transposed
// convolutions, ending in a 2-channel Deconv+ELU.
template <class Real>
NetworkGraph<Real> build_cae(std::size_t bottleneck, std::uint64_t seed) {
    detail::check_bottleneck(bottleneck);
    constexpr std::size_t kKernel = 7;
    NetworkGraph<Real> g({kWavelengths, 2});
    int li = 0;
    auto next_rng = [&] { return make_rng(derive_seed(seed, 100 + std::uint64_t(li++))); };
    auto conv_elu_bn = [&](std::size_t cin, std::size_t cout, bool transposed) {
        auto rng = next_rng();
        const std::string name = (transposed ? "deconv" : "conv") + std::to_string(li);
        g.add(std::make_unique<Conv1dLayer<Real>>(kKernel, cin, cout, transposed, rng, name));
        g.add(std::make_unique<EluLayer<Real>>());
        g.add(std::make_unique<BatchNormLayer<Real>>(cout, "bn" + std::to_string(li)));
    };
    conv_elu_bn(2, 64, false);
    g.add(std::make_unique<MaxPool1dLayer<Real>>(2));
    conv_elu_bn(64, 32, false);
    g.add(std::make_unique<MaxPool1dLayer<Real>>(2));
    conv_elu_bn(32, 16, false);
    g.add(std::make_unique<AvgPool1dLayer<Real>>(2));
    g.add(std::make_unique<FlattenLayer<Real>>());
    {
        auto rng = next_rng();
        g.add(std::make_unique<DenseLayer<Real>>(224, bottleneck, rng, "latent"));
        g.mark_bottleneck();
    }
    {
        auto rng = next_rng();
        g.add(std::make_unique<DenseLayer<Real>>(bottleneck, 224, rng, "expand"));
        g.add(std::make_unique<ReshapeLayer<Real>>(14, 16));
    }
    g.add(std::make_unique<Upsample1dLayer<Real>>(2));
    conv_elu_bn(16, 16, true);
    g.add(std::make_unique<Upsample1dLayer<Real>>(2));
    conv_elu_bn(16, 32, true);
    g.add(std::make_unique<Upsample1dLayer<Real>>(2));
    conv_elu_bn(32, 64, true);
    {
        auto rng = next_rng();
        g.add(std::make_unique<Conv1dLayer<Real>>(kKernel, 64, 2, true, rng, "deconv_out"));
        g.add(std::make_unique<EluLayer<Real>>());
    }
    return g;
}

template <class Real>
NetworkGraph<Real> build_model(ModelKind kind, std::uint64_t seed) {
    return kind.tag == ModelTag::DAE ? build_dae<Real>(kind.bottleneck, seed)
                                     : build_cae<Real>(kind.bottleneck, seed);
}

// Scaled Stokes I should live in [0,1]; values far outside suggest the
// caller skipped scaling. Warns, does not fail.
template <class Real>
void warn_if_unscaled(const Tensor<Real>& x) {
    const std::size_t batch = x.dim(0);
    const std::size_t n_i = x.size() / (2 * batch);
    bool bad = false;
    for (std::size_t i = 0; i < x.size() && !bad; ++i) {
        const bool stokes_i = x.rank() == 3 ? (i % x.shape[2] == 0) : (i % x.shape[1] < n_i);
        if (stokes_i) {
            const double v = double(x.values[i]);
            if (v < -0.2 || v > 1.2) bad = true;
        }
    }
    if (bad)
        std::cerr << "warning: Stokes I input outside [-0.2, 1.2]; "
                     "did you forget to scale the profiles?\n";
}

template <class Real>
Tensor<Real> encode(NetworkGraph<Real>& graph, const Tensor<Real>& scaled_profiles) {
    if (graph.bottleneck_index() < 0) throw ConfigError("encode: graph has no bottleneck layer");
    warn_if_unscaled(scaled_profiles);
    return graph.forward_range(scaled_profiles, Mode::Infer, 0,
                               std::size_t(graph.bottleneck_index()) + 1);
}

template <class Real>
Tensor<Real> decode(NetworkGraph<Real>& graph, const Tensor<Real>& latents) {
    if (graph.bottleneck_index() < 0) throw ConfigError("decode: graph has no bottleneck layer");
    const auto trace = graph.shape_trace();
    const auto& latent_shape = trace[std::size_t(graph.bottleneck_index()) + 1];
    if (latents.rank() != 2 || latents.dim(1) != latent_shape[0])
        throw ShapeError("decode: latent width " + shape_str(latents.shape) +
                         " does not match bottleneck " + shape_str(latent_shape));
    return graph.forward_range(latents, Mode::Infer, std::size_t(graph.bottleneck_index()) + 1,
                               graph.layer_count());
}

template <class Real>
Tensor<Real> reconstruct(NetworkGraph<Real>& graph, const Tensor<Real>& scaled_profiles) {
    warn_if_unscaled(scaled_profiles);
    return graph.forward(scaled_profiles, Mode::Infer);
}

// [batch, 224] (I then V) -> [batch, 112, 2] view for evaluation parity
template <class Real>
Tensor<Real> flat_to_profile_view(const Tensor<Real>& flat) {
    if (flat.rank() == 3 && flat.shape[2] == 2) return flat;
    if (flat.rank() != 2 || flat.dim(1) != kProfileSize)
        throw ShapeError("flat_to_profile_view: bad shape " + shape_str(flat.shape));
    const std::size_t batch = flat.dim(0);
    Tensor<Real> out({batch, kWavelengths, 2});
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t w = 0; w < kWavelengths; ++w) {
            out.at3(b, w, 0) = flat.at2(b, w);
            out.at3(b, w, 1) = flat.at2(b, kWavelengths + w);
        }
    return out;
}

}  // namespace specae
