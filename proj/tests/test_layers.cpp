#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "specae/layers.hpp"

using namespace specae;

namespace {

std::mt19937_64 rng_for_test(std::uint64_t seed = 7) { return make_rng(seed); }

Tensor<double> random_tensor(std::vector<std::size_t> shape, std::uint64_t seed) {
    Tensor<double> t(std::move(shape));
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& v : t.values) v = dist(rng);
    return t;
}

}  // namespace

TEST_CASE("dense forward matches hand-computed examples") {
    auto rng = rng_for_test();
    DenseLayer<double> layer(2, 2, rng, "d");

    SUBCASE("identity weights, zero bias") {
        layer.weights().value.values = {1, 0, 0, 1};
        layer.bias().value.fill(0);
        Tensor<double> x({1, 2}, {1, 1});
        auto y = layer.forward(x, Mode::Infer);
        CHECK(y.values == std::vector<double>{1, 1});
    }
    SUBCASE("general weights") {
        layer.weights().value.values = {1, 2, 3, 4};
        layer.bias().value.fill(0);
        Tensor<double> x({1, 2}, {1, 1});
        auto y = layer.forward(x, Mode::Infer);
        CHECK(y.values[0] == doctest::Approx(4));
        CHECK(y.values[1] == doctest::Approx(6));
    }
    SUBCASE("zero weights return bias") {
        layer.weights().value.fill(0);
        layer.bias().value.values = {2, 3};
        Tensor<double> x({1, 2}, {5, 7});
        auto y = layer.forward(x, Mode::Infer);
        CHECK(y.values == std::vector<double>{2, 3});
    }
    SUBCASE("shape mismatch rejected") {
        Tensor<double> x({1, 3}, {1, 2, 3});
        CHECK_THROWS_AS(layer.forward(x, Mode::Infer), ShapeError);
    }
}

TEST_CASE("conv1d same-padding examples") {
    auto rng = rng_for_test();
    Conv1dLayer<double> conv(3, 1, 1, false, rng, "c");
    conv.bias().value.fill(0);
    Tensor<double> x({1, 4, 1}, {1, 2, 3, 4});

    SUBCASE("identity kernel passes input through") {
        conv.kernels().value.values = {0, 1, 0};
        auto y = conv.forward(x, Mode::Infer);
        CHECK(y.values == x.values);
    }
    SUBCASE("difference kernel with zero padding") {
        conv.kernels().value.values = {1, 0, -1};
        auto y = conv.forward(x, Mode::Infer);
        CHECK(y.values == std::vector<double>{-2, -2, -2, 3});
    }
    SUBCASE("zero kernel gives zeros") {
        conv.kernels().value.fill(0);
        auto y = conv.forward(x, Mode::Infer);
        for (double v : y.values) CHECK(v == 0);
    }
    SUBCASE("even kernel width rejected") {
        CHECK_THROWS_AS(Conv1dLayer<double>(4, 1, 1, false, rng, "bad"), ConfigError);
    }
}

TEST_CASE("conv1d_transpose is the spatially reversed convolution") {
    auto rng = rng_for_test();
    Conv1dLayer<double> deconv(3, 1, 1, true, rng, "dc");
    deconv.bias().value.fill(0);
    Tensor<double> x({1, 4, 1}, {1, 2, 3, 4});

    SUBCASE("identity kernel is its own reverse") {
        deconv.kernels().value.values = {0, 1, 0};
        auto y = deconv.forward(x, Mode::Infer);
        CHECK(y.values == x.values);
    }
    SUBCASE("reversed difference kernel") {
        deconv.kernels().value.values = {1, 0, -1};
        auto y = deconv.forward(x, Mode::Infer);
        CHECK(y.values == std::vector<double>{2, 2, 2, -3});
    }
    SUBCASE("zero kernel gives zeros") {
        deconv.kernels().value.fill(0);
        auto y = deconv.forward(x, Mode::Infer);
        for (double v : y.values) CHECK(v == 0);
    }
}

TEST_CASE("adjoint identity: <conv(x), y> == <x, conv_transpose(y)>") {
    auto rng = rng_for_test(11);
    const std::size_t K = 7, cin = 3, cout = 5, len = 16;
    Conv1dLayer<double> conv(K, cin, cout, false, rng, "c");
    conv.bias().value.fill(0);
    Conv1dLayer<double> deconv(K, cout, cin, true, rng, "ct");
    deconv.bias().value.fill(0);
    // adjoint kernel = same spatial taps with in/out channel axes swapped
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t c = 0; c < cin; ++c)
            for (std::size_t o = 0; o < cout; ++o)
                deconv.kernels().value.values[(k * cout + o) * cin + c] =
                    conv.kernels().value.values[(k * cin + c) * cout + o];

    auto x = random_tensor({2, len, cin}, 21);
    auto y = random_tensor({2, len, cout}, 22);
    auto cx = conv.forward(x, Mode::Infer);
    auto cty = deconv.forward(y, Mode::Infer);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < cx.size(); ++i) lhs += cx.values[i] * y.values[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x.values[i] * cty.values[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-5));
}

TEST_CASE("maxpool1d") {
    MaxPool1dLayer<double> pool(2);
    SUBCASE("basic") {
        Tensor<double> x({1, 4, 1}, {1, 3, 2, 4});
        auto y = pool.forward(x, Mode::Infer);
        CHECK(y.values == std::vector<double>{3, 4});
    }
    SUBCASE("hand example with negatives") {
        Tensor<double> x({1, 4, 1}, {-5, -1, 0, -2});
        auto y = pool.forward(x, Mode::Infer);
        CHECK(y.values == std::vector<double>{-1, 0});
    }
    SUBCASE("ties route gradient to the first index") {
        Tensor<double> x({1, 4, 1}, {2, 2, 2, 2});
        auto y = pool.forward(x, Mode::Infer);
        CHECK(y.values == std::vector<double>{2, 2});
        Tensor<double> dy({1, 2, 1}, {1, 1});
        auto dx = pool.backward(dy);
        CHECK(dx.values == std::vector<double>{1, 0, 1, 0});
        CHECK(pool.last_ties() == std::vector<std::uint8_t>{1, 1});
    }
    SUBCASE("odd length rejected") {
        Tensor<double> x({1, 3, 1}, {1, 2, 3});
        CHECK_THROWS_AS(pool.forward(x, Mode::Infer), ShapeError);
    }
}

TEST_CASE("avgpool1d") {
    AvgPool1dLayer<double> pool(2);
    SUBCASE("basic") {
        Tensor<double> x({1, 4, 1}, {1, 3, 2, 4});
        auto y = pool.forward(x, Mode::Infer);
        CHECK(y.values == std::vector<double>{2, 3});
    }
    SUBCASE("hand example") {
        Tensor<double> x({1, 4, 1}, {0.5, 1.5, -2, 0});
        auto y = pool.forward(x, Mode::Infer);
        CHECK(y.values == std::vector<double>{1, -1});
    }
    SUBCASE("constant preserved") {
        Tensor<double> x({1, 4, 1}, {7, 7, 7, 7});
        auto y = pool.forward(x, Mode::Infer);
        CHECK(y.values == std::vector<double>{7, 7});
    }
}

TEST_CASE("upsample1d and pool duality") {
    Upsample1dLayer<double> up(2);
    SUBCASE("nearest-neighbor repetition") {
        Tensor<double> x({1, 2, 1}, {1, 2});
        auto y = up.forward(x, Mode::Infer);
        CHECK(y.values == std::vector<double>{1, 1, 2, 2});
    }
    SUBCASE("avgpool(upsample(x)) == x exactly") {
        auto x = random_tensor({3, 8, 4}, 5);
        AvgPool1dLayer<double> pool(2);
        auto y = pool.forward(up.forward(x, Mode::Infer), Mode::Infer);
        CHECK(y.values == x.values);
    }
    SUBCASE("backward sums gradient pairs") {
        Tensor<double> x({1, 2, 1}, {1, 2});
        up.forward(x, Mode::Infer);
        Tensor<double> dy({1, 4, 1}, {1, 1, 1, 1});
        auto dx = up.backward(dy);
        CHECK(dx.values == std::vector<double>{2, 2});
    }
}

TEST_CASE("batchnorm") {
    SUBCASE("batch {1,3} normalizes to {-1,1} as eps -> 0") {
        BatchNormLayer<double> bn(1, "bn", 1e-12);
        Tensor<double> x({2, 1}, {1, 3});
        auto y = bn.forward(x, Mode::Train);
        CHECK(y.values[0] == doctest::Approx(-1).epsilon(1e-6));
        CHECK(y.values[1] == doctest::Approx(1).epsilon(1e-6));
    }
    SUBCASE("already standardized batch nearly unchanged") {
        BatchNormLayer<double> bn(1, "bn", 1e-12);
        Tensor<double> x({4, 1});
        // mean 0, variance 1
        x.values = {-1, 1, -1, 1};
        auto y = bn.forward(x, Mode::Train);
        for (std::size_t i = 0; i < 4; ++i)
            CHECK(y.values[i] == doctest::Approx(x.values[i]).epsilon(1e-6));
    }
    SUBCASE("gamma=0 collapses to beta") {
        BatchNormLayer<double> bn(2, "bn");
        auto ps = bn.params();
        ps[0]->value.fill(0);       // gamma
        ps[1]->value.values = {5, -3};  // beta
        auto x = random_tensor({3, 2}, 9);
        auto y = bn.forward(x, Mode::Train);
        for (std::size_t b = 0; b < 3; ++b) {
            CHECK(y.at2(b, 0) == 5);
            CHECK(y.at2(b, 1) == -3);
        }
    }
    SUBCASE("batch of 1 rejected in train mode") {
        BatchNormLayer<double> bn(1, "bn");
        Tensor<double> x({1, 1}, {2});
        CHECK_THROWS_AS(bn.forward(x, Mode::Train), NumericError);
        CHECK_NOTHROW(bn.forward(x, Mode::Infer));
    }
    SUBCASE("moving statistics are non-trainable") {
        BatchNormLayer<double> bn(1, "bn");
        auto ps = bn.params();
        CHECK(ps[0]->trainable);
        CHECK(ps[1]->trainable);
        CHECK_FALSE(ps[2]->trainable);
        CHECK_FALSE(ps[3]->trainable);
    }
}

TEST_CASE("elu") {
    EluLayer<double> elu;
    Tensor<double> x({1, 3}, {0, 2, -1});
    auto y = elu.forward(x, Mode::Infer);
    CHECK(y.values[0] == 0);
    CHECK(y.values[1] == 2);
    CHECK(y.values[2] == doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-9));
    CHECK(y.values[2] == doctest::Approx(-0.63212).epsilon(1e-4));

    SUBCASE("continuity and derivative continuity at 0") {
        for (double h : {1e-3, 1e-5, 1e-7}) {
            Tensor<double> p({1, 2}, {h, -h});
            auto v = elu.forward(p, Mode::Infer);
            CHECK(std::fabs(v.values[0] - v.values[1]) < 3 * h);
            // derivative: 1 for x>0, e^x for x<0 with alpha=1
            Tensor<double> dy({1, 2}, {1, 1});
            auto dx = elu.backward(dy);
            CHECK(std::fabs(dx.values[0] - dx.values[1]) < 3 * h);
        }
    }
}

TEST_CASE("shape algebra: declared output shape equals actual") {
    auto rng = rng_for_test(33);
    std::vector<std::unique_ptr<Layer<double>>> layers;
    layers.push_back(std::make_unique<Conv1dLayer<double>>(7, 2, 8, false, rng, "c"));
    layers.push_back(std::make_unique<Conv1dLayer<double>>(5, 2, 3, true, rng, "ct"));
    layers.push_back(std::make_unique<MaxPool1dLayer<double>>(2));
    layers.push_back(std::make_unique<AvgPool1dLayer<double>>(2));
    layers.push_back(std::make_unique<Upsample1dLayer<double>>(2));
    layers.push_back(std::make_unique<BatchNormLayer<double>>(2, "bn"));
    layers.push_back(std::make_unique<EluLayer<double>>());
    layers.push_back(std::make_unique<FlattenLayer<double>>());
    for (auto& l : layers) {
        auto x = random_tensor({3, 12, 2}, 77);
        auto declared = l->output_shape({12, 2});
        auto y = l->forward(x, Mode::Infer);
        std::vector<std::size_t> actual(y.shape.begin() + 1, y.shape.end());
        CHECK(actual == declared);
        CHECK(y.dim(0) == 3);
    }
    // dense and reshape on the flat layout
    DenseLayer<double> dense(24, 5, rng, "d");
    auto x = random_tensor({3, 24}, 78);
    CHECK(dense.forward(x, Mode::Infer).shape == std::vector<std::size_t>{3, 5});
    CHECK(dense.output_shape({24}) == std::vector<std::size_t>{5});
    ReshapeLayer<double> reshape(12, 2);
    CHECK(reshape.forward(x, Mode::Infer).shape == std::vector<std::size_t>{3, 12, 2});
}
