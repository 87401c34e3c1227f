#pragma once

#include <iomanip>
#include <memory>
#include <ostream>
#include <vector>

#include "specae/layers.hpp"
#include "specae/tensor.hpp"

namespace specae {

// Sequential chain of layers. Forward caches per-layer activations inside the
// layers themselves; backward walks the chain in reverse and accumulates
// parameter gradients.
template <class Real>
class NetworkGraph {
  public:
    NetworkGraph() = default;
    explicit NetworkGraph(std::vector<std::size_t> input_shape)
        : input_shape_(std::move(input_shape)) {}

    NetworkGraph(NetworkGraph&&) noexcept = default;
    NetworkGraph& operator=(NetworkGraph&&) noexcept = default;

    void set_input_shape(std::vector<std::size_t> s) { input_shape_ = std::move(s); }
    const std::vector<std::size_t>& input_shape() const { return input_shape_; }

    void add(std::unique_ptr<Layer<Real>> layer) { layers_.push_back(std::move(layer)); }

    void mark_bottleneck() { bottleneck_index_ = std::ptrdiff_t(layers_.size()) - 1; }
    std::ptrdiff_t bottleneck_index() const { return bottleneck_index_; }
    void set_bottleneck_index(std::ptrdiff_t i) { bottleneck_index_ = i; }

    std::size_t layer_count() const { return layers_.size(); }
    Layer<Real>& layer(std::size_t i) { return *layers_[i]; }
    const Layer<Real>& layer(std::size_t i) const { return *layers_[i]; }

    // per-sample shape after each layer, starting from the declared input
    std::vector<std::vector<std::size_t>> shape_trace() const {
        std::vector<std::vector<std::size_t>> trace;
        trace.push_back(input_shape_);
        std::vector<std::size_t> cur = input_shape_;
        for (const auto& l : layers_) {
            cur = l->output_shape(cur);
            trace.push_back(cur);
        }
        return trace;
    }

    std::vector<std::size_t> output_shape() const { return shape_trace().back(); }

    Tensor<Real> forward(const Tensor<Real>& x, Mode mode) {
        return forward_range(x, mode, 0, layers_.size());
    }

    // runs layers [first, last); used to split at the bottleneck
    Tensor<Real> forward_range(const Tensor<Real>& x, Mode mode, std::size_t first,
                               std::size_t last) {
        Tensor<Real> cur = x;
        for (std::size_t i = first; i < last; ++i) {
            cur = layers_[i]->forward(cur, mode);
            require_finite(cur, layer_kind_name(layers_[i]->spec().kind));
        }
        return cur;
    }

    // dLoss/dOutput in, dLoss/dInput out; parameter grads accumulated
    Tensor<Real> backward(const Tensor<Real>& dy) {
        return backward_range(dy, 0, layers_.size());
    }

    Tensor<Real> backward_range(const Tensor<Real>& dy, std::size_t first, std::size_t last) {
        Tensor<Real> cur = dy;
        for (std::size_t i = last; i-- > first;) cur = layers_[i]->backward(cur);
        return cur;
    }

    std::vector<Parameter<Real>*> params() {
        std::vector<Parameter<Real>*> out;
        for (auto& l : layers_)
            for (auto* p : l->params()) out.push_back(p);
        return out;
    }

    std::vector<Parameter<Real>*> trainable_params() {
        std::vector<Parameter<Real>*> out;
        for (auto& l : layers_)
            for (auto* p : l->params())
                if (p->trainable) out.push_back(p);
        return out;
    }

    void zero_grad() {
        for (auto* p : params()) p->grad.fill(Real(0));
    }

    std::size_t param_count() {
        std::size_t n = 0;
        for (auto* p : params()) n += p->value.size();
        return n;
    }

    // snapshot / restore of every parameter tensor, moving statistics included
    std::vector<Tensor<Real>> save_weights() {
        std::vector<Tensor<Real>> out;
        for (auto* p : params()) out.push_back(p->value);
        return out;
    }

    void load_weights(const std::vector<Tensor<Real>>& w) {
        auto ps = params();
        if (w.size() != ps.size())
            throw ShapeError("load_weights: tensor count mismatch (" + std::to_string(w.size()) +
                             " vs " + std::to_string(ps.size()) + ")");
        for (std::size_t i = 0; i < ps.size(); ++i) {
            if (ps[i]->value.shape != w[i].shape)
                throw ShapeError("load_weights: shape mismatch at " + ps[i]->name);
            ps[i]->value = w[i];
        }
    }

    std::vector<LayerSpec> specs() const {
        std::vector<LayerSpec> out;
        for (const auto& l : layers_) out.push_back(l->spec());
        return out;
    }

    void describe(std::ostream& os) {
        auto trace = shape_trace();
        os << std::left << std::setw(4) << "#" << std::setw(18) << "layer" << std::setw(14)
           << "output" << std::setw(10) << "params" << "\n";
        os << std::setw(4) << "" << std::setw(18) << "input" << std::setw(14)
           << shape_str(trace[0]) << std::setw(10) << 0 << "\n";
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            std::size_t n = 0;
            for (auto* p : layers_[i]->params()) n += p->value.size();
            std::string name = layer_kind_name(layers_[i]->spec().kind);
            if (std::ptrdiff_t(i) == bottleneck_index_) name += " [bottleneck]";
            os << std::setw(4) << i << std::setw(18) << name << std::setw(14)
               << shape_str(trace[i + 1]) << std::setw(10) << n << "\n";
        }
        os << "total params: " << param_count() << "\n";
    }

  private:
    std::vector<std::unique_ptr<Layer<Real>>> layers_;
    std::vector<std::size_t> input_shape_;
    std::ptrdiff_t bottleneck_index_ = -1;
};

}  // namespace specae
