#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gms/gradcheck.hpp"
#include "gms/ops.hpp"
#include "oracles.hpp"

using gms::Tensor;

namespace {

template <typename T>
Tensor<T> randu(gms::Shape shape, gms::Rng& rng, T lo = T(-1), T hi = T(1)) {
    return Tensor<T>::uniform(std::move(shape), lo, hi, rng);
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    REQUIRE(a.shape() == b.shape());
    double m = 0.0;
    for (size_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i])));
    return m;
}

}  // namespace

TEST_CASE("conv2d scalar 1x1 case") {
    auto x = Tensor<float>::from_data({1, 1, 1, 1}, {2.0f});
    auto w = Tensor<float>::from_data({1, 1, 1, 1}, {3.0f});
    auto b = Tensor<float>::from_data({1}, {1.0f});
    auto y = gms::conv2d(x, w, b, 1, 0);
    CHECK(y.item() == doctest::Approx(7.0f));
}

TEST_CASE("conv2d 3x3 identity kernel reproduces the input") {
    gms::Rng rng(11);
    auto x = randu<float>({1, 2, 6, 7}, rng);
    auto w = Tensor<float>::zeros({2, 2, 3, 3});
    w.data()[(0 * 2 + 0) * 9 + 4] = 1.0f;  // center tap, channel 0 -> 0
    w.data()[(1 * 2 + 1) * 9 + 4] = 1.0f;  // center tap, channel 1 -> 1
    auto b = Tensor<float>::zeros({2});
    auto y = gms::conv2d(x, w, b, 1, 1);
    CHECK(max_abs_diff(x, y) == 0.0);
}

TEST_CASE("conv2d matches the naive loop oracle") {
    gms::Rng rng(42);
    auto x = randu<float>({1, 2, 5, 5}, rng);
    auto w = randu<float>({3, 2, 3, 3}, rng);
    auto b = randu<float>({3}, rng);
    auto fast = gms::conv2d(x, w, b, 1, 0);
    auto ref = oracle::conv2d_naive(x, w, b, 1, 0);
    CHECK(max_abs_diff(fast, ref) < 1e-6);
}

TEST_CASE("conv2d randomized shape sweep vs oracle") {
    gms::Rng rng(7);
    for (int kernel : {1, 3, 5})
        for (int stride : {1, 2})
            for (int pad : {0, 1}) {
                for (int rep = 0; rep < 4; ++rep) {
                    const int cin = 1 + static_cast<int>(rng.below(3));
                    const int cout = 1 + static_cast<int>(rng.below(3));
                    int h = kernel + static_cast<int>(rng.below(6));
                    // make (h + 2p - k) divisible by stride
                    while ((h + 2 * pad - kernel) % stride != 0) ++h;
                    int w = h;
                    auto x = randu<float>({2, cin, h, w}, rng, -0.5f, 0.5f);
                    auto wt = randu<float>({cout, cin, kernel, kernel}, rng, -0.5f, 0.5f);
                    auto b = randu<float>({cout}, rng, -0.5f, 0.5f);
                    auto fast = gms::conv2d(x, wt, b, stride, pad);
                    auto ref = oracle::conv2d_naive(x, wt, b, stride, pad);
                    CHECK(max_abs_diff(fast, ref) < 1e-6);
                }
            }
}

TEST_CASE("conv2d dimension and configuration errors") {
    gms::Rng rng(3);
    auto x = randu<float>({1, 3, 8, 8}, rng);
    auto w = randu<float>({4, 2, 3, 3}, rng);  // Cin mismatch
    auto b = Tensor<float>::zeros({4});
    CHECK_THROWS_AS((void)gms::conv2d(x, w, b, 1, 1), gms::DimensionError);
    auto w2 = randu<float>({4, 3, 3, 3}, rng);
    CHECK_THROWS_AS((void)gms::conv2d(x, w2, b, 2, 0), gms::ConfigError);  // (8-3)%2 != 0
}

TEST_CASE("matmul identity and hand-computed case") {
    auto eye = Tensor<float>::from_data({1, 2, 2}, {1, 0, 0, 1});
    gms::Rng rng(5);
    auto m = randu<float>({1, 2, 2}, rng);
    CHECK(max_abs_diff(gms::matmul(eye, m), m) == 0.0);

    auto a = Tensor<float>::from_data({1, 2, 2}, {1, 2, 3, 4});
    auto b = Tensor<float>::from_data({1, 2, 2}, {5, 6, 7, 8});
    auto c = gms::matmul(a, b);
    CHECK(c.at({0, 0, 0}) == doctest::Approx(19));
    CHECK(c.at({0, 0, 1}) == doctest::Approx(22));
    CHECK(c.at({0, 1, 0}) == doctest::Approx(43));
    CHECK(c.at({0, 1, 1}) == doctest::Approx(50));
}

TEST_CASE("matmul random vs triple-loop oracle, and shape errors") {
    gms::Rng rng(9);
    auto a = randu<float>({2, 3, 4}, rng);
    auto b = randu<float>({2, 4, 5}, rng);
    CHECK(max_abs_diff(gms::matmul(a, b), oracle::matmul_naive(a, b)) < 1e-6);
    auto bad = randu<float>({2, 3, 5}, rng);
    CHECK_THROWS_AS((void)gms::matmul(a, bad), gms::DimensionError);
    auto batch_bad = randu<float>({3, 4, 5}, rng);
    CHECK_THROWS_AS((void)gms::matmul(a, batch_bad), gms::DimensionError);
}

TEST_CASE("softmax examples and normalization") {
    auto x = Tensor<double>::from_data({2}, {0.0, 0.0});
    auto y = gms::softmax_lastdim(x);
    CHECK(y.at({0}) == doctest::Approx(0.5));
    CHECK(y.at({1}) == doctest::Approx(0.5));

    auto x2 = Tensor<double>::from_data({2}, {std::log(2.0), 0.0});
    auto y2 = gms::softmax_lastdim(x2);
    CHECK(y2.at({0}) == doctest::Approx(2.0 / 3.0));
    CHECK(y2.at({1}) == doctest::Approx(1.0 / 3.0));

    gms::Rng rng(13);
    auto r = randu<float>({4, 7}, rng, -5.0f, 5.0f);
    auto s = gms::softmax_lastdim(r);
    for (int row = 0; row < 4; ++row) {
        double total = 0.0;
        for (int i = 0; i < 7; ++i) {
            const double v = s.at({row, i});
            CHECK(v > 0.0);
            CHECK(v < 1.0);
            total += v;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("elementwise suite basics") {
    auto a = Tensor<float>::from_data({3}, {1, 0, 1});
    auto b = Tensor<float>::from_data({3}, {1, 1, 0});
    auto m = gms::mul(a, b);
    CHECK(m.at({0}) == 1.0f);
    CHECK(m.at({1}) == 0.0f);
    CHECK(m.at({2}) == 0.0f);

    CHECK(gms::tanh(Tensor<float>::scalar(0.0f)).item() == 0.0f);

    // d(x^2)/dx at x=3
    auto x = Tensor<double>::scalar(3.0).set_requires_grad(true);
    auto loss = gms::sum(gms::square(x));
    auto grads = gms::backward(loss);
    CHECK(grads.grad(x).item() == doctest::Approx(6.0));

    auto big = Tensor<float>::from_data({2}, {1, 2});
    CHECK_THROWS_AS((void)gms::add(a, big), gms::DimensionError);
}

TEST_CASE("clamp gradient is zero outside the active range") {
    auto x = Tensor<double>::from_data({3}, {-2.0, 0.5, 2.0}).set_requires_grad(true);
    auto loss = gms::sum(gms::clamp(x, 0.0, 1.0));
    auto grads = gms::backward(loss);
    auto g = grads.grad(x);
    CHECK(g.at({0}) == 0.0);
    CHECK(g.at({1}) == 1.0);
    CHECK(g.at({2}) == 0.0);
}

TEST_CASE("reduce sum/mean and their gradients") {
    auto x = Tensor<float>::from_data({3}, {1, 2, 3});
    CHECK(gms::sum(x).item() == doctest::Approx(6.0f));
    auto y = Tensor<float>::from_data({2}, {2, 4});
    CHECK(gms::mean(y).item() == doctest::Approx(3.0f));

    auto xs = Tensor<double>::from_data({3}, {1, 2, 3}).set_requires_grad(true);
    auto grads = gms::backward(gms::sum(xs));
    for (int i = 0; i < 3; ++i) CHECK(grads.grad(xs).at({i}) == 1.0);
}

TEST_CASE("backward basics: scalar loss, frozen leaves, double backward") {
    auto x = Tensor<double>::from_data({1}, {3.0}).set_requires_grad(true);
    auto loss = gms::sum(gms::square(x));
    auto grads = gms::backward(loss);
    CHECK(grads.grad(x).item() == doctest::Approx(6.0));
    CHECK_THROWS_AS((void)gms::backward(loss), gms::StateError);  // graph consumed

    // frozen leaf: gradient flows through but is not accumulated
    auto frozen = Tensor<double>::from_data({2}, {1.0, 2.0});  // requires_grad=false
    auto live = Tensor<double>::from_data({2}, {0.5, 0.5}).set_requires_grad(true);
    auto l2 = gms::sum(gms::mul(frozen, live));
    auto g2 = gms::backward(l2);
    CHECK(g2.has(live));
    CHECK_FALSE(g2.has(frozen));
    CHECK(g2.grad(live).at({0}) == doctest::Approx(1.0));

    auto notscalar = Tensor<double>::from_data({2}, {1.0, 2.0}).set_requires_grad(true);
    auto vec = gms::square(notscalar);
    CHECK_THROWS_AS((void)gms::backward(vec), gms::UsageError);
}

TEST_CASE("gradient accumulation over fan-out") {
    auto y = Tensor<double>::from_data({2}, {1.0, 2.0}).set_requires_grad(true);
    // y appears twice in a sum: gradient is exactly the sum of both paths
    auto loss = gms::add(gms::sum(y), gms::sum(y));
    auto grads = gms::backward(loss);
    CHECK(grads.grad(y).at({0}) == 2.0);
    CHECK(grads.grad(y).at({1}) == 2.0);

    auto z = Tensor<double>::from_data({1}, {3.0}).set_requires_grad(true);
    auto l2 = gms::sum(gms::mul(z, z));
    auto g2 = gms::backward(l2);
    CHECK(g2.grad(z).item() == doctest::Approx(6.0));
}

TEST_CASE("reshape round trip is bit-exact and never reorders") {
    gms::Rng rng(21);
    auto x = randu<float>({3, 4, 5}, rng);
    auto r = gms::reshape(gms::reshape(x, {12, 5}), {3, 4, 5});
    CHECK(x.same_values(r));
    CHECK_THROWS_AS((void)gms::reshape(x, {7, 7}), gms::DimensionError);
}

TEST_CASE("space_to_depth / depth_to_space invert bit-exactly") {
    gms::Rng rng(31);
    auto x = randu<float>({2, 3, 16, 16}, rng, 0.0f, 1.0f);
    auto z = gms::space_to_depth(x, 8);
    CHECK(z.shape() == gms::Shape{2, 192, 2, 2});
    auto back = gms::depth_to_space(z, 8);
    CHECK(x.same_values(back));
}

TEST_CASE("transpose_last2 double application is identity") {
    gms::Rng rng(33);
    auto x = randu<float>({2, 3, 5}, rng);
    CHECK(x.same_values(gms::transpose_last2(gms::transpose_last2(x))));
}

TEST_CASE("grad_check: tanh suite is tight, conv is within 1e-5") {
    gms::Rng rng(55);
    auto x = Tensor<double>::uniform({4, 5}, -2.0, 2.0, rng).set_requires_grad(true);
    auto rep = gms::grad_check([&]() { return gms::sum(gms::tanh(x)); }, {x});
    CHECK(rep.max_rel_err < 1e-7);
    CHECK(rep.coords_checked == 20);

    auto xi = Tensor<double>::uniform({1, 2, 6, 6}, -1.0, 1.0, rng).set_requires_grad(true);
    auto w = Tensor<double>::uniform({3, 2, 3, 3}, -0.5, 0.5, rng).set_requires_grad(true);
    auto b = Tensor<double>::uniform({3}, -0.5, 0.5, rng).set_requires_grad(true);
    auto rep2 = gms::grad_check([&]() { return gms::sum(gms::conv2d(xi, w, b, 1, 1)); }, {xi, w, b});
    CHECK(rep2.max_rel_err < 1e-5);

    // requires_grad=false inputs are skipped, not checked
    auto fixed = Tensor<double>::uniform({4, 5}, -1.0, 1.0, rng);
    auto rep3 = gms::grad_check([&]() { return gms::sum(gms::mul(x, fixed)); }, {x, fixed});
    CHECK(rep3.inputs_skipped == 1);
}

TEST_CASE("per-op finite-difference spot checks") {
    gms::Rng rng(77);
    auto check = [&](auto make_loss, std::vector<Tensor<double>> inputs, double tol = 1e-5) {
        auto rep = gms::grad_check(make_loss, inputs, {1e-5, 60, rng.next_u64()});
        CHECK(rep.max_rel_err < tol);
    };

    for (int rep = 0; rep < 10; ++rep) {
        auto a = Tensor<double>::uniform({3, 4}, -2, 2, rng).set_requires_grad(true);
        auto b = Tensor<double>::uniform({3, 4}, 0.5, 2.0, rng).set_requires_grad(true);
        check([&]() { return gms::sum(gms::div(a, b)); }, {a, b});
        check([&]() { return gms::mean(gms::mul(a, b)); }, {a, b});
        check([&]() { return gms::sum(gms::square(gms::sub(a, b))); }, {a, b});
        check([&]() { return gms::sum(gms::exp(gms::scale(a, 0.3))); }, {a});
        check([&]() { return gms::sum(gms::softmax_lastdim(a)); }, {a});
        check([&]() { return gms::sum(gms::square(gms::softmax_lastdim(a))); }, {a});

        auto m1 = Tensor<double>::uniform({2, 3, 4}, -1, 1, rng).set_requires_grad(true);
        auto m2 = Tensor<double>::uniform({2, 4, 3}, -1, 1, rng).set_requires_grad(true);
        check([&]() { return gms::sum(gms::square(gms::matmul(m1, m2))); }, {m1, m2});
        check([&]() { return gms::sum(gms::square(gms::transpose_last2(m1))); }, {m1});

        auto x4 = Tensor<double>::uniform({2, 4, 4, 4}, -1, 1, rng).set_requires_grad(true);
        auto cb = Tensor<double>::uniform({4}, -1, 1, rng).set_requires_grad(true);
        check([&]() { return gms::sum(gms::square(gms::add_channel(x4, cb))); }, {x4, cb});
        check([&]() { return gms::sum(gms::square(gms::mul_channel(x4, cb))); }, {x4, cb});
        check([&]() { return gms::sum(gms::square(gms::upsample_nearest2x(x4))); }, {x4});
        check([&]() { return gms::sum(gms::square(gms::space_to_depth(x4, 2))); }, {x4});
        check([&]() { return gms::sum(gms::square(gms::channel_slice(x4, 1, 3))); }, {x4});
        check([&]() { return gms::sum(gms::square(gms::slice_batch(x4, 1))); }, {x4});
        check([&]() { return gms::sum(gms::square(gms::sum_per_sample(x4))); }, {x4});
    }
}

TEST_CASE("ops are deterministic across repeated evaluation") {
    gms::Rng rng(88);
    auto x = randu<float>({2, 3, 9, 9}, rng);
    auto w = randu<float>({5, 3, 3, 3}, rng);
    auto b = randu<float>({5}, rng);
    auto y1 = gms::conv2d(x, w, b, 1, 1);
    auto y2 = gms::conv2d(x, w, b, 1, 1);
    CHECK(y1.same_values(y2));
}
