#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "specae/graph.hpp"
#include "specae/loss.hpp"
#include "specae/rng.hpp"

namespace specae {

struct GradCheckOptions {
    double h = 1e-4;
    // 0 = every element; otherwise at most this many per tensor, sampled
    // with the given seed (full graphs are far too large to sweep entirely)
    std::size_t samples_per_tensor = 0;
    std::uint64_t seed = 0;
    bool check_input = true;
};

struct GradCheckResult {
    double max_rel_error = 0;
    std::size_t checked = 0;
    std::size_t skipped_ties = 0;
};

namespace detail {

// concatenated argmax pattern of every maxpool layer in the graph, captured
// after a forward pass
inline std::vector<std::uint32_t> pool_selection(NetworkGraph<double>& g) {
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < g.layer_count(); ++i)
        if (auto* mp = dynamic_cast<MaxPool1dLayer<double>*>(&g.layer(i)))
            out.insert(out.end(), mp->last_argmax().begin(), mp->last_argmax().end());
    return out;
}

inline bool pool_has_ties(NetworkGraph<double>& g) {
    for (std::size_t i = 0; i < g.layer_count(); ++i)
        if (auto* mp = dynamic_cast<MaxPool1dLayer<double>*>(&g.layer(i)))
            for (std::uint8_t t : mp->last_ties())
                if (t) return true;
    return false;
}

inline std::vector<std::size_t> pick_indices(std::size_t n, std::size_t limit,
                                             std::mt19937_64& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (limit == 0 || limit >= n) return idx;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(limit);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace detail

// Central-difference check of reverse-mode gradients on a double-precision
// graph. Loss is the reconstruction MAE against `target`. Elements whose
// perturbation flips a maxpool argmax (tied or near-tied windows) are skipped
// since the subgradient there is ambiguous.
inline GradCheckResult gradient_check(NetworkGraph<double>& graph, const Tensor<double>& input,
                                      const Tensor<double>& target,
                                      const GradCheckOptions& opt = {}) {
    auto loss_of = [&](const Tensor<double>& x) {
        return compute_loss(graph.forward(x, Mode::Train), target).total();
    };

    // analytic gradients first; FD forwards below overwrite cached activations
    graph.zero_grad();
    Tensor<double> pred = graph.forward(input, Mode::Train);
    Tensor<double> dinput = graph.backward(loss_gradient(pred, target));

    struct Target {
        Tensor<double>* value;
        Tensor<double> analytic;
    };
    std::vector<Target> targets;
    for (auto* p : graph.trainable_params()) targets.push_back({&p->value, p->grad});
    Tensor<double> input_copy = input;
    if (opt.check_input) targets.push_back({&input_copy, dinput});
    auto run_loss = [&](void) { return loss_of(input_copy); };

    std::mt19937_64 rng(make_rng(opt.seed)());
    GradCheckResult res;
    for (auto& t : targets) {
        auto indices = detail::pick_indices(t.value->size(), opt.samples_per_tensor, rng);
        for (std::size_t j : indices) {
            const double orig = (*t.value)[j];
            (*t.value)[j] = orig + opt.h;
            const double lp = run_loss();
            auto sel_plus = detail::pool_selection(graph);
            const bool tie_plus = detail::pool_has_ties(graph);
            (*t.value)[j] = orig - opt.h;
            const double lm = run_loss();
            auto sel_minus = detail::pool_selection(graph);
            const bool tie_minus = detail::pool_has_ties(graph);
            (*t.value)[j] = orig;
            if (sel_plus != sel_minus || tie_plus || tie_minus) {
                ++res.skipped_ties;
                continue;
            }
            const double fd = (lp - lm) / (2.0 * opt.h);
            const double an = t.analytic[j];
            const double denom = std::max(std::fabs(fd), std::fabs(an));
            const double err = denom < 1e-10 ? 0.0 : std::fabs(fd - an) / denom;
            res.max_rel_error = std::max(res.max_rel_error, err);
            ++res.checked;
        }
    }
    return res;
}

}  // namespace specae
