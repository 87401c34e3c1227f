#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "specae/models.hpp"
#include "specae/training.hpp"

using namespace specae;

namespace {

// dataset of random (already scaled) profiles, first `n_train` labelled
// Train, next `n_val` Validation
PixelDataset tiny_dataset(std::size_t n_train, std::size_t n_val, std::uint64_t seed) {
    PixelDataset ds;
    const std::size_t n = n_train + n_val;
    ds.ny = 1;
    ds.nx = n;
    ds.i_scaled.resize(n * kWavelengths);
    ds.v_scaled.resize(n * kWavelengths);
    ds.scaling.resize(n);
    ds.origin_y.assign(n, 0);
    ds.origin_x.resize(n);
    ds.labels.resize(n);
    ds.continuum.assign(n, 1000.0f);
    auto rng = make_rng(seed);
    std::uniform_real_distribution<float> ui(0.0f, 1.0f), uv(-1.0f, 1.0f);
    for (std::size_t p = 0; p < n; ++p) {
        ds.origin_x[p] = std::uint32_t(p);
        ds.labels[p] = p < n_train ? SplitLabel::Train : SplitLabel::Validation;
        for (std::size_t w = 0; w < kWavelengths; ++w) {
            ds.i_scaled[p * kWavelengths + w] = ui(rng);
            ds.v_scaled[p * kWavelengths + w] = uv(rng);
        }
    }
    return ds;
}

std::vector<float> snapshot_params(NetworkGraph<float>& g) {
    std::vector<float> all;
    for (auto* p : g.params()) all.insert(all.end(), p->value.values.begin(), p->value.values.end());
    return all;
}

}  // namespace

TEST_CASE("reconstruction loss") {
    Tensor<float> a({1, kWavelengths, 2});
    auto rng = make_rng(7);
    std::uniform_real_distribution<float> d(0, 1);
    for (auto& v : a.values) v = d(rng);

    SUBCASE("identical tensors give zero") {
        auto l = compute_loss(a, a);
        CHECK(l.mae_i == 0.0);
        CHECK(l.mae_v == 0.0);
        CHECK(l.total() == 0.0);
    }
    SUBCASE("constant offset on I only") {
        Tensor<float> b = a;
        for (std::size_t w = 0; w < kWavelengths; ++w) b.at3(0, w, 0) += 0.1f;
        auto l = compute_loss(b, a);
        CHECK(l.mae_i == doctest::Approx(0.1).epsilon(1e-6));
        CHECK(l.mae_v == 0.0);
        CHECK(l.total() == doctest::Approx(0.1).epsilon(1e-6));
    }
    SUBCASE("hand-averaged residuals {0.2, -0.2, 0, ...}") {
        Tensor<float> b = a;
        b.at3(0, 0, 0) += 0.2f;
        b.at3(0, 1, 0) -= 0.2f;
        auto l = compute_loss(b, a);
        CHECK(l.mae_i == doctest::Approx(0.4 / 112.0).epsilon(1e-6));  // ~0.003571
        CHECK(l.mae_v == 0.0);
    }
    SUBCASE("decomposition is bit-exact") {
        Tensor<float> b = a;
        for (auto& v : b.values) v += 0.05f;
        auto l = compute_loss(b, a);
        CHECK(l.total() == l.mae_i + l.mae_v);
    }
    SUBCASE("shape mismatch rejected") {
        Tensor<float> b({2, kWavelengths, 2});
        CHECK_THROWS_AS(compute_loss(a, b), ShapeError);
    }
}

TEST_CASE("callback semantics (scripted loss sequences)") {
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;

    SUBCASE("constant validation loss stops after 1 + patience epochs") {
        cfg.early_stop_patience = 5;
        CallbackState st;
        st.lr = cfg.learning_rate;
        std::size_t stop_epoch = 0;
        for (std::size_t e = 1; e <= 50 && stop_epoch == 0; ++e)
            if (update_callbacks(st, e, 1.0, cfg).stop) stop_epoch = e;
        CHECK(stop_epoch == 1 + cfg.early_stop_patience);
        CHECK(st.best_epoch == 1);
    }
    SUBCASE("strictly improving loss: no stop, no reduction") {
        CallbackState st;
        st.lr = cfg.learning_rate;
        for (std::size_t e = 1; e <= 200; ++e) {
            auto d = update_callbacks(st, e, 1.0 / double(e), cfg);
            CHECK(d.improved);
            CHECK_FALSE(d.stop);
            CHECK_FALSE(d.reduced_lr);
        }
        CHECK(st.lr == cfg.learning_rate);
        CHECK(st.best_epoch == 200);
    }
    SUBCASE("51-epoch plateau then improvement: exactly one lr reduction") {
        cfg.plateau_patience = 50;
        CallbackState st;
        st.lr = cfg.learning_rate;
        std::size_t reductions = 0;
        update_callbacks(st, 1, 1.0, cfg);  // best at epoch 1
        for (std::size_t e = 2; e <= 52; ++e)
            if (update_callbacks(st, e, 1.0, cfg).reduced_lr) ++reductions;
        auto d = update_callbacks(st, 53, 0.5, cfg);
        CHECK(d.improved);
        CHECK(reductions == 1);
        CHECK(st.lr == doctest::Approx(1e-4));
    }
    SUBCASE("equal loss is not an improvement") {
        CallbackState st;
        st.lr = cfg.learning_rate;
        update_callbacks(st, 1, 0.7, cfg);
        auto d = update_callbacks(st, 2, 0.7, cfg);
        CHECK_FALSE(d.improved);
        CHECK(st.wait_stop == 1);
        CHECK(st.best_epoch == 1);
    }
    SUBCASE("lr reduction does not reset the early-stop counter") {
        cfg.plateau_patience = 3;
        cfg.early_stop_patience = 8;
        CallbackState st;
        st.lr = cfg.learning_rate;
        update_callbacks(st, 1, 1.0, cfg);
        std::size_t stop_epoch = 0, reductions = 0;
        for (std::size_t e = 2; e <= 30 && stop_epoch == 0; ++e) {
            auto d = update_callbacks(st, e, 1.0, cfg);
            if (d.reduced_lr) ++reductions;
            if (d.stop) stop_epoch = e;
        }
        CHECK(stop_epoch == 9);   // 1 + 8, regardless of the reductions
        CHECK(reductions == 2);   // at waits 3 and 6
    }
    SUBCASE("lr never drops below the configured minimum") {
        cfg.plateau_patience = 1;
        cfg.min_learning_rate = 1e-6;
        CallbackState st;
        st.lr = 1e-5;
        update_callbacks(st, 1, 1.0, cfg);
        for (std::size_t e = 2; e <= 10; ++e) {
            update_callbacks(st, e, 1.0, cfg);
            CHECK(st.lr >= cfg.min_learning_rate);
        }
        CHECK(st.lr == doctest::Approx(1e-6));
        // already at the floor: no further reduction is reported
        CallbackState at_min;
        at_min.lr = 1e-6;
        update_callbacks(at_min, 1, 1.0, cfg);
        auto d = update_callbacks(at_min, 2, 1.0, cfg);
        CHECK_FALSE(d.reduced_lr);
        CHECK(at_min.lr == 1e-6);
    }
}

TEST_CASE("config validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    TrainConfig bad = cfg;
    bad.plateau_factor = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.early_stop_patience = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.learning_rate = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("train_epoch") {
    auto ds = tiny_dataset(4, 2, 101);
    TrainConfig cfg;
    cfg.batch_size = 4;
    const auto train_idx = ds.indices_with(SplitLabel::Train);

    SUBCASE("one epoch on a small set decreases the loss") {
        auto g = build_dae<float>(28, 3);
        AdamState<float> adam;
        adam.lr = 1e-3f;
        const double before = evaluate_loss(g, ds, train_idx, cfg.batch_size).total();
        for (int e = 0; e < 3; ++e) train_epoch(g, adam, ds, train_idx, cfg);
        const double after = evaluate_loss(g, ds, train_idx, cfg.batch_size).total();
        CHECK(after < before);
    }
    SUBCASE("zero learning rate leaves parameters unchanged") {
        auto g = build_dae<float>(28, 5);
        auto before = snapshot_params(g);
        AdamState<float> adam;
        adam.lr = 0.0f;
        train_epoch(g, adam, ds, train_idx, cfg);
        // trainable params untouched; batchnorm moving stats do move, so
        // compare trainable tensors only
        std::size_t off = 0;
        for (auto* p : g.params()) {
            if (p->trainable)
                for (std::size_t i = 0; i < p->value.size(); ++i)
                    CHECK(p->value.values[i] == before[off + i]);
            off += p->value.size();
        }
    }
    SUBCASE("empty order rejected") {
        auto g = build_dae<float>(28, 5);
        AdamState<float> adam;
        CHECK_THROWS_AS(train_epoch(g, adam, ds, {}, cfg), ConfigError);
    }
}

TEST_CASE("fit") {
    auto ds = tiny_dataset(32, 8, 202);
    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.batch_size = 16;
    cfg.seed = 9;

    SUBCASE("history, best tracking and weight restoration") {
        auto g = build_dae<float>(28, 9);
        std::ostringstream log;
        std::size_t improvements = 0;
        auto st = fit<float>(g, ds, cfg, &log,
                             [&](NetworkGraph<float>&, const TrainState<float>&) { ++improvements; });
        CHECK(st.history.size() == cfg.epochs);
        double min_val = st.history[0].val_total;
        for (const auto& r : st.history) {
            min_val = std::min(min_val, r.val_total);
            CHECK(r.train_total == r.train_mae_i + r.train_mae_v);  // bit-exact decomposition
        }
        CHECK(st.best_val() == doctest::Approx(min_val).epsilon(1e-12));
        CHECK(improvements >= 1);

        // restored weights reproduce the best validation loss
        const auto val_idx = ds.indices_with(SplitLabel::Validation);
        const double replay = evaluate_loss(g, ds, val_idx, cfg.batch_size).total();
        CHECK(replay == doctest::Approx(st.best_val()).epsilon(1e-6));

        // log: header + one row per epoch
        std::string line;
        std::istringstream in(log.str());
        std::getline(in, line);
        CHECK(line == "epoch,lr,train_mae_i,train_mae_v,train_total,val_total,seconds");
        std::size_t rows = 0;
        while (std::getline(in, line))
            if (!line.empty()) ++rows;
        CHECK(rows == cfg.epochs);
    }
    SUBCASE("determinism: same seed, same trajectory, bitwise-equal weights") {
        auto g1 = build_dae<float>(28, 9);
        auto g2 = build_dae<float>(28, 9);
        auto s1 = fit<float>(g1, ds, cfg);
        auto s2 = fit<float>(g2, ds, cfg);
        REQUIRE(s1.history.size() == s2.history.size());
        for (std::size_t i = 0; i < s1.history.size(); ++i) {
            CHECK(s1.history[i].train_total == s2.history[i].train_total);
            CHECK(s1.history[i].val_total == s2.history[i].val_total);
        }
        CHECK(snapshot_params(g1) == snapshot_params(g2));
    }
    SUBCASE("empty splits rejected") {
        auto g = build_dae<float>(28, 9);
        auto no_val = tiny_dataset(4, 0, 5);
        CHECK_THROWS_AS(fit<float>(g, no_val, cfg), ConfigError);
        auto no_train = tiny_dataset(0, 4, 5);
        CHECK_THROWS_AS(fit<float>(g, no_train, cfg), ConfigError);
    }
}
