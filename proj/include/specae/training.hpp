#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <vector>

#include "specae/adam.hpp"
#include "specae/dataio.hpp"
#include "specae/graph.hpp"
#include "specae/loss.hpp"
#include "specae/models.hpp"
#include "specae/rng.hpp"

namespace specae {

struct TrainConfig {
    std::size_t epochs = 1000;
    std::size_t batch_size = 512;
    double learning_rate = 1e-3;
    std::size_t early_stop_patience = 100;
    std::size_t plateau_patience = 50;
    double plateau_factor = 0.1;
    double min_learning_rate = 1e-6;
    std::uint64_t seed = 0;

    void validate() const {
        if (early_stop_patience < 1 || plateau_patience < 1)
            throw ConfigError("train: patiences must be >= 1");
        if (!(plateau_factor > 0 && plateau_factor < 1))
            throw ConfigError("train: plateau factor must be in (0, 1)");
        if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
        if (!(learning_rate > 0)) throw ConfigError("train: learning rate must be > 0");
    }
};

// Early stopping and reduce-on-plateau share the improvement test (strict
// decrease, zero min-delta) but keep independent counters; a learning-rate
// reduction never resets the stopping counter.
struct CallbackState {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t wait_stop = 0;
    std::size_t wait_plateau = 0;
    double lr = 0;
};

struct CallbackDecision {
    bool improved = false;
    bool reduced_lr = false;
    bool stop = false;
};

inline CallbackDecision update_callbacks(CallbackState& st, std::size_t epoch, double val_loss,
                                         const TrainConfig& cfg) {
    CallbackDecision d;
    if (val_loss < st.best) {
        st.best = val_loss;
        st.best_epoch = epoch;
        st.wait_stop = 0;
        st.wait_plateau = 0;
        d.improved = true;
        return d;
    }
    ++st.wait_stop;
    ++st.wait_plateau;
    if (st.wait_plateau >= cfg.plateau_patience) {
        const double next = std::max(st.lr * cfg.plateau_factor, cfg.min_learning_rate);
        if (next < st.lr) {
            st.lr = next;
            d.reduced_lr = true;
        }
        st.wait_plateau = 0;
    }
    if (st.wait_stop >= cfg.early_stop_patience) d.stop = true;
    return d;
}

struct EpochRecord {
    std::size_t epoch = 0;
    double lr = 0;
    double train_mae_i = 0, train_mae_v = 0, train_total = 0;
    double val_total = 0;
    double seconds = 0;
};

template <class Real>
struct TrainState {
    std::vector<EpochRecord> history;
    CallbackState callbacks;
    std::vector<Tensor<Real>> best_weights;
    bool stopped_early = false;

    double best_val() const { return callbacks.best; }
    std::size_t best_epoch() const { return callbacks.best_epoch; }
};

// Builds the model input for a list of dataset pixels: [n, 112, 2] for the
// CAE, [n, 224] (I then V) for the DAE.
template <class Real>
Tensor<Real> make_batch(const PixelDataset& ds, const std::vector<std::size_t>& idx,
                        std::size_t first, std::size_t last, ModelTag tag) {
    const std::size_t n = last - first;
    Tensor<Real> t(tag == ModelTag::CAE ? std::vector<std::size_t>{n, kWavelengths, 2}
                                        : std::vector<std::size_t>{n, kProfileSize});
    for (std::size_t b = 0; b < n; ++b) {
        const std::size_t p = idx[first + b];
        const float* ip = ds.profile_i(p);
        const float* vp = ds.profile_v(p);
        if (tag == ModelTag::CAE) {
            for (std::size_t w = 0; w < kWavelengths; ++w) {
                t.at3(b, w, 0) = Real(ip[w]);
                t.at3(b, w, 1) = Real(vp[w]);
            }
        } else {
            for (std::size_t w = 0; w < kWavelengths; ++w) {
                t.at2(b, w) = Real(ip[w]);
                t.at2(b, kWavelengths + w) = Real(vp[w]);
            }
        }
    }
    return t;
}

template <class Real>
ModelTag tag_of(const NetworkGraph<Real>& g) {
    return g.input_shape().size() == 2 ? ModelTag::CAE : ModelTag::DAE;
}

// One Adam pass over all batches (final partial batch included). Batch order
// follows `order` as given; the caller shuffles. Returns the mean of the
// per-batch losses.
template <class Real>
LossValue train_epoch(NetworkGraph<Real>& graph, AdamState<Real>& adam, const PixelDataset& ds,
                      const std::vector<std::size_t>& order, const TrainConfig& cfg,
                      std::size_t epoch = 0) {
    if (order.empty()) throw ConfigError("train_epoch: empty training set");
    const ModelTag tag = tag_of(graph);
    double sum_i = 0, sum_v = 0;
    std::size_t batches = 0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_size) {
        const std::size_t last = std::min(first + cfg.batch_size, order.size());
        Tensor<Real> x = make_batch<Real>(ds, order, first, last, tag);
        graph.zero_grad();
        Tensor<Real> pred;
        try {
            pred = graph.forward(x, Mode::Train);
        } catch (const NumericError& e) {
            throw NumericError("train: " + std::string(e.what()) + " (epoch " +
                               std::to_string(epoch) + ", batch " + std::to_string(batches) + ")");
        }
        const LossValue loss = compute_loss(pred, x);
        if (!std::isfinite(loss.total()))
            throw NumericError("train: non-finite loss (epoch " + std::to_string(epoch) +
                               ", batch " + std::to_string(batches) + ")");
        graph.backward(loss_gradient(pred, x));
        adam.step(graph.trainable_params());
        sum_i += loss.mae_i;
        sum_v += loss.mae_v;
        ++batches;
    }
    return {sum_i / double(batches), sum_v / double(batches)};
}

template <class Real>
LossValue evaluate_loss(NetworkGraph<Real>& graph, const PixelDataset& ds,
                        const std::vector<std::size_t>& idx, std::size_t batch_size) {
    const ModelTag tag = tag_of(graph);
    double sum_i = 0, sum_v = 0;
    for (std::size_t first = 0; first < idx.size(); first += batch_size) {
        const std::size_t last = std::min(first + batch_size, idx.size());
        Tensor<Real> x = make_batch<Real>(ds, idx, first, last, tag);
        const LossValue l = compute_loss(graph.forward(x, Mode::Infer), x);
        sum_i += l.mae_i * double(last - first);
        sum_v += l.mae_v * double(last - first);
    }
    return {sum_i / double(idx.size()), sum_v / double(idx.size())};
}

inline void write_log_header(std::ostream& os) {
    os << "epoch,lr,train_mae_i,train_mae_v,train_total,val_total,seconds\n";
}

inline void write_log_row(std::ostream& os, const EpochRecord& r) {
    os.precision(10);
    os << r.epoch << ',' << r.lr << ',' << r.train_mae_i << ',' << r.train_mae_v << ','
       << r.train_total << ',' << r.val_total << ',' << r.seconds << '\n';
}

// Full training loop: seeded per-epoch shuffling, early stopping, lr
// reduction on plateau, best-validation weight restoration at the end.
// `on_improve` fires after each new best epoch (checkpointing hook).
template <class Real>
TrainState<Real> fit(
    NetworkGraph<Real>& graph, const PixelDataset& ds, const TrainConfig& cfg,
    std::ostream* log = nullptr,
    const std::function<void(NetworkGraph<Real>&, const TrainState<Real>&)>& on_improve = {}) {
    cfg.validate();
    const auto train_idx = ds.indices_with(SplitLabel::Train);
    const auto val_idx = ds.indices_with(SplitLabel::Validation);
    if (train_idx.empty()) throw ConfigError("fit: empty training split");
    if (val_idx.empty()) throw ConfigError("fit: empty validation split");

    AdamState<Real> adam;
    adam.lr = Real(cfg.learning_rate);
    TrainState<Real> state;
    state.callbacks.lr = cfg.learning_rate;
    if (log) write_log_header(*log);

    std::vector<std::size_t> order = train_idx;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        auto rng = make_rng(derive_seed(cfg.seed, 0xe70c5ull, epoch));
        std::shuffle(order.begin(), order.end(), rng);
        adam.lr = Real(state.callbacks.lr);
        const LossValue train_loss = train_epoch(graph, adam, ds, order, cfg, epoch);
        const LossValue val_loss = evaluate_loss(graph, ds, val_idx, cfg.batch_size);

        const CallbackDecision d = update_callbacks(state.callbacks, epoch, val_loss.total(), cfg);
        const auto t1 = std::chrono::steady_clock::now();
        EpochRecord rec{epoch,
                        state.callbacks.lr,
                        train_loss.mae_i,
                        train_loss.mae_v,
                        train_loss.total(),
                        val_loss.total(),
                        std::chrono::duration<double>(t1 - t0).count()};
        state.history.push_back(rec);
        if (log) write_log_row(*log, rec);
        if (d.improved) {
            state.best_weights = graph.save_weights();
            if (on_improve) on_improve(graph, state);
        }
        if (d.stop) {
            state.stopped_early = true;
            break;
        }
    }
    if (!state.best_weights.empty()) graph.load_weights(state.best_weights);
    return state;
}

}  // namespace specae
