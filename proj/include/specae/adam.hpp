#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "specae/error.hpp"
#include "specae/layers.hpp"

namespace specae {

// Adam with bias correction. Moment buffers are keyed by position in the
// trainable-parameter list, so the same AdamState must be reused with the
// same graph for its whole life.
template <class Real>
struct AdamState {
    Real lr = Real(1e-3);
    Real beta1 = Real(0.9);
    Real beta2 = Real(0.999);
    Real eps = Real(1e-7);
    std::int64_t t = 0;
    std::vector<Tensor<Real>> m, v;

    void step(const std::vector<Parameter<Real>*>& params) {
        // lr == 0 is allowed as a frozen-optimizer no-op (moments and t
        // still advance); negative rates are nonsense
        if (lr < Real(0)) throw ConfigError("adam: learning rate must be >= 0");
        if (m.empty()) {
            for (auto* p : params) {
                m.emplace_back(p->value.shape);
                v.emplace_back(p->value.shape);
            }
        }
        if (m.size() != params.size())
            throw ConfigError("adam: parameter list changed size");
        ++t;
        const Real bc1 = Real(1) - Real(std::pow(double(beta1), double(t)));
        const Real bc2 = Real(1) - Real(std::pow(double(beta2), double(t)));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Parameter<Real>& p = *params[i];
            if (!p.grad.all_finite())
                throw NumericError("adam: non-finite gradient in parameter " + p.name);
            for (std::size_t j = 0; j < p.value.size(); ++j) {
                const Real g = p.grad[j];
                m[i][j] = beta1 * m[i][j] + (Real(1) - beta1) * g;
                v[i][j] = beta2 * v[i][j] + (Real(1) - beta2) * g * g;
                const Real mhat = m[i][j] / bc1;
                const Real vhat = v[i][j] / bc2;
                p.value[j] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }
};

}  // namespace specae
