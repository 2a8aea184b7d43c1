#include <cmath>

#include "doctest.h"

#include "gsa/contract.hpp"
#include "gsa/layers.hpp"
#include "gsa/ops.hpp"

using namespace gsa;

TEST_SUITE("ops") {

TEST_CASE("softmax closed forms") {
    Tensor c = softmax(Tensor({3}, 5.0), {0});
    for (std::size_t i = 0; i < 3; ++i) CHECK(c[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    Tensor t = softmax(Tensor({2}, {0.0, std::log(3.0)}), {0});
    CHECK(t[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(t[1] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK_THROWS_AS(softmax(t, {}), ArgumentError);
}

TEST_CASE("softmax over two axes matches direct evaluation") {
    const Tensor x = random_normal({4, 4, 2}, 5);
    const Tensor s = softmax(x, {0, 1});
    for (std::size_t ch = 0; ch < 2; ++ch) {
        double z = 0.0, total = 0.0;
        for (std::size_t i = 0; i < 16; ++i) z += std::exp(x[i * 2 + ch]);
        for (std::size_t i = 0; i < 16; ++i) {
            CHECK(std::abs(s[i * 2 + ch] - std::exp(x[i * 2 + ch]) / z) < 1e-15);
            total += s[i * 2 + ch];
        }
        CHECK(std::abs(total - 1.0) < 1e-12);
    }
}

TEST_CASE("batch norm infer mode matches the scalar formula") {
    BatchNormState st = BatchNormState::identity(3);
    st.gamma = {1.5, 0.5, -1.0};
    st.beta = {0.1, 0.0, 2.0};
    st.running_mean = {0.3, -0.2, 1.0};
    st.running_var = {2.0, 0.5, 1.0};
    const Tensor x = random_normal({2, 2, 3}, 9);
    const Tensor y = batch_norm(x, st, Mode::infer).out;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t k = i % 3;
        const double expect = st.gamma[k] * (x[i] - st.running_mean[k]) / std::sqrt(st.running_var[k] + 1e-5) + st.beta[k];
        CHECK(std::abs(y[i] - expect) < 1e-14);
    }
    const Tensor id = batch_norm(x, BatchNormState::identity(3), Mode::infer).out;
    CHECK(max_abs(sub(id, x)) <= 1e-5 * max_abs(x));
    CHECK_THROWS_AS(batch_norm(Tensor({2, 4}), st, Mode::infer), ShapeError);
}

TEST_CASE("batch norm train mode uses batch statistics and blends running stats") {
    const Tensor x({4, 1}, {1, 2, 3, 6});
    BatchNormState st = BatchNormState::identity(1);
    auto res = batch_norm(x, st, Mode::train);
    CHECK(res.used.mean[0] == 3.0);
    CHECK(res.used.var[0] == 3.5);
    CHECK(res.state.running_mean[0] == doctest::Approx(0.9 * 0.0 + 0.1 * 3.0));
    CHECK(res.state.running_var[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 3.5));
    double s = 0.0;
    for (double v : res.out.data()) s += v;
    CHECK(std::abs(s) < 1e-12);
}

TEST_CASE("batch norm backward agrees with finite differences") {
    for (Mode mode : {Mode::train, Mode::infer}) {
        BatchNormState st = BatchNormState::identity(2);
        st.gamma = {1.3, -0.4};
        st.beta = {0.2, 0.5};
        st.running_mean = {0.1, -0.3};
        st.running_var = {1.5, 0.7};
        Tensor x = random_normal({3, 2, 2}, 31);
        const Tensor u = random_normal({3, 2, 2}, 32);
        auto fwd = batch_norm(x, st, mode);
        auto g = batch_norm_backward(x, st, fwd.used, mode, u);
        auto loss = [&] { return sum(hadamard(batch_norm(x, st, mode).out, u)); };
        const double h = 1e-6;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double saved = x[i];
            x[i] = saved + h;
            const double up = loss();
            x[i] = saved - h;
            const double down = loss();
            x[i] = saved;
            CHECK(std::abs((up - down) / (2 * h) - g.input[i]) < 1e-7);
        }
        for (std::size_t k = 0; k < 2; ++k) {
            const double saved = st.gamma[k];
            st.gamma[k] = saved + h;
            const double up = loss();
            st.gamma[k] = saved - h;
            const double down = loss();
            st.gamma[k] = saved;
            CHECK(std::abs((up - down) / (2 * h) - g.gamma[k]) < 1e-7);
        }
    }
}

TEST_CASE("average pooling") {
    Tensor c({1, 4, 4, 2}, 3.5);
    const Tensor pc = avg_pool_2x2(c);
    CHECK(pc.shape() == Shape{1, 2, 2, 2});
    for (double v : pc.data()) CHECK(v == 3.5);
    const Tensor p = avg_pool_2x2(Tensor({1, 2, 2, 1}, {1, 2, 3, 4}));
    CHECK(p[0] == 2.5);
    CHECK_THROWS_AS(avg_pool_2x2(Tensor({1, 3, 2, 1})), ShapeError);

    const Tensor r = random_normal({1, 4, 4, 3}, 41);
    const Tensor pr = avg_pool_2x2(r);
    for (std::size_t y = 0; y < 2; ++y)
        for (std::size_t x = 0; x < 2; ++x)
            for (std::size_t ch = 0; ch < 3; ++ch) {
                double s = 0.0;
                for (std::size_t dy = 0; dy < 2; ++dy)
                    for (std::size_t dx = 0; dx < 2; ++dx) s += r.at({0, 2 * y + dy, 2 * x + dx, ch});
                CHECK(std::abs(pr.at({0, y, x, ch}) - s / 4.0) < 1e-15);
            }
}

TEST_CASE("pointwise convolution") {
    const Tensor x({1, 1, 1, 3}, {1, 2, 3});
    CHECK(pointwise_conv(x, Tensor({3, 1}, 1.0))[0] == 6.0);
    CHECK(pointwise_conv(x, Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1})) == x);
    const Tensor r = random_normal({2, 3, 3, 4}, 51), w = random_normal({4, 5}, 52);
    CHECK(pointwise_conv(r, w) == einsum("bhwi,io->bhwo", r, w));
    CHECK_THROWS_AS(pointwise_conv(r, Tensor({3, 5})), ShapeError);
}

TEST_CASE("seeded initialization") {
    const Tensor z = seeded_init({3, 4}, InitScheme::zeros, 1);
    for (double v : z.data()) CHECK(v == 0.0);
    CHECK(seeded_init({5, 7}, InitScheme::fan_in_normal, 42) == seeded_init({5, 7}, InitScheme::fan_in_normal, 42));
    CHECK_FALSE(seeded_init({5, 7}, InitScheme::fan_in_normal, 42) == seeded_init({5, 7}, InitScheme::fan_in_normal, 43));

    const Tensor big = seeded_init({25, 40000}, InitScheme::fan_in_normal, 7);
    double s2 = 0.0;
    for (double v : big.data()) s2 += v * v;
    const double std_dev = std::sqrt(s2 / static_cast<double>(big.size()));
    CHECK(std::abs(std_dev - 1.0 / 5.0) < 0.02 * (1.0 / 5.0));
}

TEST_CASE("convolution against a direct window sum") {
    const Tensor x = random_normal({1, 5, 5, 2}, 61), w = random_normal({3, 3, 2, 3}, 62);
    const Tensor y = conv2d(x, w, 2, 1);
    CHECK(y.shape() == Shape{1, 3, 3, 3});
    for (std::size_t oy = 0; oy < 3; ++oy)
        for (std::size_t ox = 0; ox < 3; ++ox)
            for (std::size_t co = 0; co < 3; ++co) {
                double s = 0.0;
                for (std::size_t ky = 0; ky < 3; ++ky)
                    for (std::size_t kx = 0; kx < 3; ++kx) {
                        const long iy = static_cast<long>(2 * oy + ky) - 1, ix = static_cast<long>(2 * ox + kx) - 1;
                        if (iy < 0 || ix < 0 || iy >= 5 || ix >= 5) continue;
                        for (std::size_t ci = 0; ci < 2; ++ci) {
                            s += x.at({0, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), ci}) * w.at({ky, kx, ci, co});
                        }
                    }
                CHECK(std::abs(y.at({0, oy, ox, co}) - s) < 1e-13);
            }
}

TEST_CASE("cross entropy of uniform logits is ln K") {
    auto ce = softmax_cross_entropy(Tensor({3, 10}), {0, 4, 9});
    CHECK(std::abs(ce.loss - std::log(10.0)) < 1e-15);
}

}
