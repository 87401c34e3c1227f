#pragma once

#include <cmath>

#include "specae/error.hpp"
#include "specae/tensor.hpp"

namespace specae {

// Reconstruction loss: mean absolute error per Stokes parameter, averaged
// over batch and wavelength, then summed. Works on both model layouts:
// [batch, 112, 2] with channels (I, V), and [batch, 224] with I in the first
// half and V in the second.
struct LossValue {
    double mae_i = 0;
    double mae_v = 0;
    double total() const { return mae_i + mae_v; }
};

namespace detail {

// true -> element i belongs to Stokes I
template <class Real>
inline bool is_stokes_i(const Tensor<Real>& t, std::size_t flat_index) {
    if (t.rank() == 3) return flat_index % t.shape[2] == 0;
    const std::size_t f = t.shape[1];
    return flat_index % f < f / 2;
}

}  // namespace detail

template <class Real>
LossValue compute_loss(const Tensor<Real>& pred, const Tensor<Real>& target) {
    if (!pred.same_shape(target))
        throw ShapeError("compute_loss: shape mismatch " + shape_str(pred.shape) + " vs " +
                         shape_str(target.shape));
    if (!(pred.rank() == 2 || (pred.rank() == 3 && pred.shape[2] == 2)))
        throw ShapeError("compute_loss: unsupported layout " + shape_str(pred.shape));
    const std::size_t batch = pred.dim(0);
    const std::size_t per_stokes = pred.size() / (2 * batch);  // wavelength points
    double sum_i = 0, sum_v = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = std::fabs(double(pred.values[i]) - double(target.values[i]));
        if (detail::is_stokes_i(pred, i))
            sum_i += d;
        else
            sum_v += d;
    }
    const double denom = double(batch) * double(per_stokes);
    return {sum_i / denom, sum_v / denom};
}

// d(total)/d(pred); subgradient 0 where pred == target
template <class Real>
Tensor<Real> loss_gradient(const Tensor<Real>& pred, const Tensor<Real>& target) {
    if (!pred.same_shape(target))
        throw ShapeError("loss_gradient: shape mismatch");
    const std::size_t batch = pred.dim(0);
    const std::size_t per_stokes = pred.size() / (2 * batch);
    const Real scale = Real(1) / (Real(batch) * Real(per_stokes));
    Tensor<Real> g(pred.shape);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const Real d = pred.values[i] - target.values[i];
        g.values[i] = d > Real(0) ? scale : (d < Real(0) ? -scale : Real(0));
    }
    return g;
}

}  // namespace specae
