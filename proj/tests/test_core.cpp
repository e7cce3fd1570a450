#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ipaint/core/autograd.hpp"
#include "ipaint/core/container.hpp"
#include "ipaint/core/kernels.hpp"
#include "ipaint/core/reference.hpp"
#include "ipaint/core/rng.hpp"
#include "ipaint/core/sha256.hpp"
#include "test_util.hpp"

#include <cstdio>

using namespace ipaint;
using testutil::gradcheck;
using testutil::random_tensor;

namespace {

template <typename T>
void expect_close(const Tensor<T>& a, const Tensor<T>& b, double tol) {
    REQUIRE(a.shape() == b.shape());
    double worst = 0;
    for (int64_t i = 0; i < a.numel(); ++i)
        worst = std::max(worst, testutil::rel_err(a[i], b[i]));
    CHECK(worst < tol);
}

}  // namespace

TEST_CASE("det_sum matches serial order and is length-robust") {
    Rng rng(1);
    for (int64_t n : {0L, 1L, 7L, 4096L, 5000L, 100000L}) {
        auto t = random_tensor<double>({n}, rng);
        double serial = 0;
        // det_sum's blocked order differs from plain order; doubles agree tightly
        for (int64_t i = 0; i < n; ++i) serial += t[i];
        CHECK(std::abs(kern::det_sum(t.data(), n) - serial) < 1e-9);
    }
}

TEST_CASE("conv2d forward matches reference across layer plans") {
    Rng rng(2);
    struct Plan { int64_t n, ic, ih, iw, oc, k, s, p; };
    for (const Plan& pl : {Plan{2, 3, 16, 16, 4, 3, 1, 1}, Plan{1, 2, 15, 13, 5, 4, 2, 1},
                           Plan{2, 4, 8, 8, 3, 1, 1, 0}, Plan{1, 1, 9, 9, 2, 4, 1, 1}}) {
        auto s = kern::ConvShape::conv(pl.n, pl.ic, pl.ih, pl.iw, pl.oc, pl.k, pl.s, pl.p);
        auto x = random_tensor<float>({pl.n, pl.ic, pl.ih, pl.iw}, rng);
        auto w = random_tensor<float>({pl.oc, pl.ic, pl.k, pl.k}, rng);
        auto b = random_tensor<float>({pl.oc}, rng);
        Tensor<float> y({s.n, s.oc, s.oh, s.ow}), yref(y.shape());
        kern::conv2d_forward(s, x.data(), w.data(), b.data(), y.data());
        ref::conv2d_forward(s, x.data(), w.data(), b.data(), yref.data());
        expect_close(y, yref, 1e-5);
    }
}

TEST_CASE("conv2d backward matches reference") {
    Rng rng(3);
    auto s = kern::ConvShape::conv(2, 3, 10, 12, 4, 4, 2, 1);
    auto x = random_tensor<double>({2, 3, 10, 12}, rng);
    auto w = random_tensor<double>({4, 3, 4, 4}, rng);
    auto dy = random_tensor<double>({s.n, s.oc, s.oh, s.ow}, rng);

    Tensor<double> dx({2, 3, 10, 12}), dxref(dx.shape());
    kern::conv2d_backward_data(s, dy.data(), w.data(), dx.data());
    ref::conv2d_backward_data(s, dy.data(), w.data(), dxref.data());
    expect_close(dx, dxref, 1e-10);

    Tensor<double> dw(w.shape()), dwref(w.shape());
    Tensor<double> db({4}), dbref({4});
    kern::conv2d_backward_filter(s, x.data(), dy.data(), dw.data(), db.data());
    ref::conv2d_backward_filter(s, x.data(), dy.data(), dwref.data(), dbref.data());
    expect_close(dw, dwref, 1e-10);
    expect_close(db, dbref, 1e-10);
}

TEST_CASE("deconv2d forward matches reference") {
    Rng rng(4);
    auto s = kern::ConvShape::deconv(2, 3, 7, 9, 4, 2, 2);
    auto x = random_tensor<float>({2, 3, 7, 9}, rng);
    auto w = random_tensor<float>({3, 4, 2, 2}, rng);
    auto b = random_tensor<float>({4}, rng);
    Tensor<float> y({s.n, s.oc, s.oh, s.ow}), yref(y.shape());
    kern::deconv2d_forward(s, x.data(), w.data(), b.data(), y.data());
    ref::deconv2d_forward(s, x.data(), w.data(), b.data(), yref.data());
    expect_close(y, yref, 1e-5);
    CHECK(s.oh == 14);
    CHECK(s.ow == 18);
}

TEST_CASE("gram matches reference bit for bit") {
    Rng rng(5);
    auto f = random_tensor<double>({2, 3, 4, 5}, rng);
    Tensor<double> g({2, 3, 3}), gref({2, 3, 3});
    kern::gram(2, 3, 20, f.data(), g.data());
    ref::gram(2, 3, 20, f.data(), gref.data());
    for (int64_t i = 0; i < g.numel(); ++i) CHECK(g[i] == gref[i]);
}

TEST_CASE("batchnorm forward matches reference") {
    Rng rng(6);
    auto x = random_tensor<float>({3, 5, 6, 6}, rng);
    Tensor<float> gamma = random_tensor<float>({5}, rng, 0.5, 1.5);
    Tensor<float> beta = random_tensor<float>({5}, rng);
    Tensor<float> y(x.shape()), yref(x.shape());
    Tensor<float> mean({5}), invstd({5}), xhat(x.shape());
    kern::batchnorm_forward<float>(3, 5, 36, x.data(), gamma.data(), beta.data(), 1e-5f,
                                   y.data(), mean.data(), invstd.data(), xhat.data());
    ref::batchnorm_forward<float>(3, 5, 36, x.data(), gamma.data(), beta.data(), 1e-5f,
                                  yref.data());
    expect_close(y, yref, 1e-4);
}

TEST_CASE("autograd ops pass finite-difference checks") {
    Rng rng(7);
    // conv2d wrt x, w, b
    {
        auto x = ag::leaf(random_tensor<double>({2, 2, 6, 6}, rng), true);
        auto w = ag::leaf(random_tensor<double>({3, 2, 3, 3}, rng), true);
        auto b = ag::leaf(random_tensor<double>({3}, rng), true);
        auto fwd = [&] { return ag::mean_all(ag::tanh_op(ag::conv2d(x, w, b, 1, 1))); };
        CHECK(gradcheck<double>(fwd, {x, w, b}, rng, 20) < 1e-6);
    }
    // strided conv
    {
        auto x = ag::leaf(random_tensor<double>({1, 2, 8, 8}, rng), true);
        auto w = ag::leaf(random_tensor<double>({4, 2, 4, 4}, rng), true);
        auto fwd = [&] { return ag::mean_all(ag::square(ag::conv2d<double>(x, w, nullptr, 2, 1))); };
        CHECK(gradcheck<double>(fwd, {x, w}, rng, 20) < 1e-6);
    }
    // deconv
    {
        auto x = ag::leaf(random_tensor<double>({2, 3, 5, 5}, rng), true);
        auto w = ag::leaf(random_tensor<double>({3, 2, 2, 2}, rng), true);
        auto b = ag::leaf(random_tensor<double>({2}, rng), true);
        auto fwd = [&] { return ag::mean_all(ag::abs_op(ag::deconv2d(x, w, b, 2))); };
        CHECK(gradcheck<double>(fwd, {x, w, b}, rng, 20) < 1e-6);
    }
    // maxpool + relu chain
    {
        auto x = ag::leaf(random_tensor<double>({2, 3, 8, 8}, rng), true);
        auto fwd = [&] { return ag::mean_all(ag::relu(ag::maxpool2(x))); };
        CHECK(gradcheck<double>(fwd, {x}, rng, 20) < 1e-6);
    }
    // batchnorm wrt x, gamma, beta
    {
        auto x = ag::leaf(random_tensor<double>({3, 2, 4, 4}, rng), true);
        auto g = ag::leaf(random_tensor<double>({2}, rng, 0.5, 1.5), true);
        auto be = ag::leaf(random_tensor<double>({2}, rng), true);
        auto fwd = [&] { return ag::mean_all(ag::square(ag::batchnorm(x, g, be, 1e-5))); };
        CHECK(gradcheck<double>(fwd, {x, g, be}, rng, 20) < 1e-5);
    }
    // gram + concat + leaky + sigmoid/log chain
    {
        auto a = ag::leaf(random_tensor<double>({1, 2, 3, 3}, rng), true);
        auto b = ag::leaf(random_tensor<double>({1, 3, 3, 3}, rng), true);
        auto fwd = [&] {
            auto cat = ag::concat_channels<double>({a, b});
            auto lk = ag::leaky_relu(cat, 0.2);
            auto gm = ag::gram_op(lk);
            return ag::mean_all(ag::log_clamped(ag::sigmoid(gm), 1e-8));
        };
        CHECK(gradcheck<double>(fwd, {a, b}, rng, 20) < 1e-6);
    }
    // a var consumed twice accumulates both paths
    {
        auto x = ag::leaf(random_tensor<double>({1, 1, 4, 4}, rng), true);
        auto fwd = [&] {
            auto s1 = ag::mean_all(ag::square(x));
            auto s2 = ag::mean_all(ag::tanh_op(x));
            return ag::weighted_sum<double>({{0.7, s1}, {1.3, s2}});
        };
        CHECK(gradcheck<double>(fwd, {x}, rng, 20) < 1e-6);
    }
}

TEST_CASE("detach blocks gradient flow") {
    Rng rng(8);
    auto x = ag::leaf(random_tensor<double>({1, 1, 4, 4}, rng), true);
    auto y = ag::mean_all(ag::square(ag::detach(x)));
    CHECK_FALSE(y->requires_grad);
}

TEST_CASE("container round-trips bit-identically and rejects corruption") {
    Rng rng(9);
    const std::string path = "/tmp/ipaint_test_container.nac";
    io::Container c;
    c.put("alpha", random_tensor<float>({3, 4}, rng));
    c.put("beta", random_tensor<double>({7}, rng));
    c.set_meta(R"({"kind":"test"})");
    c.save(path);
    const std::string h1 = sha256_hex_of_file(path);

    auto c2 = io::Container::load(path);
    CHECK(c2.names() == std::vector<std::string>{"alpha", "beta"});
    c2.save(path);
    CHECK(sha256_hex_of_file(path) == h1);

    auto back = c2.get<float>("alpha");
    auto orig = c.get<float>("alpha");
    for (int64_t i = 0; i < back.numel(); ++i) CHECK(back[i] == orig[i]);

    // widening f32 -> f64 allowed, narrowing rejected
    CHECK_NOTHROW(c2.get<double>("alpha"));
    CHECK_THROWS_AS(c2.get<float>("beta"), DataError);

    // flip one payload byte: checksum must catch it
    {
        std::FILE* f = std::fopen(path.c_str(), "r+b");
        std::fseek(f, -40, SEEK_END);
        int ch = std::fgetc(f);
        std::fseek(f, -40, SEEK_END);
        std::fputc(ch ^ 0x01, f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(io::Container::load(path), DataError);
    std::remove(path.c_str());
}

TEST_CASE("split_seed produces distinct deterministic streams") {
    CHECK(split_seed(42, 0) == split_seed(42, 0));
    CHECK(split_seed(42, 0) != split_seed(42, 1));
    CHECK(split_seed(42, 0) != split_seed(43, 0));
}
