#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "specae/dataio.hpp"
#include "specae/graph.hpp"
#include "specae/models.hpp"

namespace specae {

struct WeightsMeta {
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::uint64_t dataset_hash = 0;
    ModelTag tag = ModelTag::CAE;
    std::uint32_t bottleneck = kDefaultBottleneck;
};

// Rebuilds a layer chain from serialized specs. Weights are loaded
// afterwards, so the init seed is irrelevant here.
template <class Real>
NetworkGraph<Real> graph_from_specs(const std::vector<LayerSpec>& specs,
                                    std::vector<std::size_t> input_shape,
                                    std::ptrdiff_t bottleneck_index) {
    NetworkGraph<Real> g(std::move(input_shape));
    auto rng = make_rng(0);
    int li = 0;
    for (const LayerSpec& s : specs) {
        const std::string name = std::string(layer_kind_name(s.kind)) + std::to_string(li++);
        switch (s.kind) {
            case LayerKind::Dense:
                g.add(std::make_unique<DenseLayer<Real>>(s.p0, s.p1, rng, name));
                break;
            case LayerKind::Conv1d:
                g.add(std::make_unique<Conv1dLayer<Real>>(s.p0, s.p1, s.p2, false, rng, name));
                break;
            case LayerKind::Conv1dTranspose:
                g.add(std::make_unique<Conv1dLayer<Real>>(s.p0, s.p1, s.p2, true, rng, name));
                break;
            case LayerKind::MaxPool1d:
                g.add(std::make_unique<MaxPool1dLayer<Real>>(s.p0));
                break;
            case LayerKind::AvgPool1d:
                g.add(std::make_unique<AvgPool1dLayer<Real>>(s.p0));
                break;
            case LayerKind::Upsample1d:
                g.add(std::make_unique<Upsample1dLayer<Real>>(s.p0));
                break;
            case LayerKind::BatchNorm:
                g.add(std::make_unique<BatchNormLayer<Real>>(s.p0, name));
                break;
            case LayerKind::Elu:
                g.add(std::make_unique<EluLayer<Real>>());
                break;
            case LayerKind::Flatten:
                g.add(std::make_unique<FlattenLayer<Real>>());
                break;
            case LayerKind::Reshape:
                g.add(std::make_unique<ReshapeLayer<Real>>(s.p0, s.p1));
                break;
        }
    }
    g.set_bottleneck_index(bottleneck_index);
    return g;
}

inline constexpr char kWeightsMagic[8] = {'S', 'P', 'A', 'E', 'W', 'T', '0', '1'};

inline std::vector<unsigned char> serialize_weights(NetworkGraph<float>& graph,
                                                    const WeightsMeta& meta) {
    using namespace container_detail;
    std::vector<unsigned char> b;
    b.insert(b.end(), kWeightsMagic, kWeightsMagic + 8);
    put_u64(b, meta.seed);
    put_u64(b, meta.config_hash);
    put_u64(b, meta.dataset_hash);
    b.push_back((unsigned char)meta.tag);
    put_u32(b, meta.bottleneck);

    const auto& ishape = graph.input_shape();
    put_u32(b, std::uint32_t(ishape.size()));
    for (std::size_t d : ishape) put_u64(b, d);
    put_u32(b, std::uint32_t(graph.bottleneck_index() + 1));  // 0 = none

    const auto specs = graph.specs();
    put_u32(b, std::uint32_t(specs.size()));
    for (const LayerSpec& s : specs) {
        b.push_back((unsigned char)s.kind);
        put_u32(b, s.p0);
        put_u32(b, s.p1);
        put_u32(b, s.p2);
    }
    auto params = graph.params();
    put_u64(b, std::uint64_t(graph.param_count()));  // re-verified on load
    put_u32(b, std::uint32_t(params.size()));
    for (auto* p : params) {
        put_u32(b, std::uint32_t(p->value.rank()));
        for (std::size_t d : p->value.shape) put_u64(b, d);
        b.push_back(p->trainable ? 1 : 0);
        for (float f : p->value.values) put_f32(b, f);
    }
    return b;
}

struct LoadedModel {
    NetworkGraph<float> graph;
    WeightsMeta meta;
};

inline LoadedModel deserialize_weights(const std::vector<unsigned char>& bytes) {
    using namespace container_detail;
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kWeightsMagic, 8) != 0)
        throw ParseError("not a weights container (bad magic)");
    Reader r{bytes, 8};
    WeightsMeta meta;
    meta.seed = r.u64();
    meta.config_hash = r.u64();
    meta.dataset_hash = r.u64();
    meta.tag = ModelTag(r.byte());
    meta.bottleneck = r.u32();

    std::vector<std::size_t> input_shape(r.u32());
    for (auto& d : input_shape) d = r.u64();
    const std::ptrdiff_t bneck = std::ptrdiff_t(r.u32()) - 1;

    std::vector<LayerSpec> specs(r.u32());
    for (auto& s : specs) {
        s.kind = LayerKind(r.byte());
        s.p0 = r.u32();
        s.p1 = r.u32();
        s.p2 = r.u32();
    }
    NetworkGraph<float> graph = graph_from_specs<float>(specs, std::move(input_shape), bneck);

    const std::uint64_t declared_count = r.u64();
    if (graph.param_count() != declared_count)
        throw ParseError("weights container: parameter count " + std::to_string(declared_count) +
                         " does not match rebuilt graph (" + std::to_string(graph.param_count()) +
                         ")");
    const std::uint32_t ntensors = r.u32();
    auto params = graph.params();
    if (ntensors != params.size())
        throw ParseError("weights container: tensor count mismatch");
    for (auto* p : params) {
        std::vector<std::size_t> shape(r.u32());
        for (auto& d : shape) d = r.u64();
        const bool trainable = r.byte() != 0;
        if (shape != p->value.shape || trainable != p->trainable)
            throw ParseError("weights container: layout mismatch at " + p->name);
        for (auto& f : p->value.values) f = r.f32();
    }
    return {std::move(graph), meta};
}

inline void save_model(NetworkGraph<float>& graph, const WeightsMeta& meta,
                       const std::string& path) {
    // atomic: write to a temp name, then rename
    const std::string tmp = path + ".tmp";
    write_binary_file(tmp, serialize_weights(graph, meta));
    std::filesystem::rename(tmp, path);
}

inline LoadedModel load_model(const std::string& path) {
    return deserialize_weights(read_binary_file(path));
}

}  // namespace specae
