#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "ipaint/nn/discriminator.hpp"
#include "ipaint/nn/generator.hpp"
#include "ipaint/nn/vgg19.hpp"
#include "test_util.hpp"

using namespace ipaint;
using namespace ipaint::nn;
using testutil::gradcheck;
using testutil::random_tensor;

namespace {

template <typename T>
ag::Var<T> batch(int64_t n, int64_t h, int64_t w, Rng& rng, bool grad = false) {
    return ag::leaf(random_tensor<T>({n, 1, h, w}, rng, -0.9, 0.9), grad);
}

bool has_param(const std::vector<Param<float>>& ps, const std::string& name) {
    for (const auto& p : ps)
        if (p.name == name) return true;
    return false;
}

}  // namespace

TEST_CASE("receptive field arithmetic") {
    CHECK(receptive_field(DiscriminatorSpec::patch()) == 70);
    CHECK(receptive_field(DiscriminatorSpec::global()) == 286);
    CHECK(receptive_field(DiscriminatorSpec::global()) >= 256);

    DiscriminatorSpec single;
    single.kind = DiscKind::Patch;
    single.layers = {{3, 1, 8, false, Activation::LeakyRelu},
                     {1, 1, 8, true, Activation::LeakyRelu},
                     {1, 1, 8, true, Activation::LeakyRelu},
                     {1, 1, 8, true, Activation::LeakyRelu},
                     {1, 1, 1, false, Activation::None}};
    CHECK(receptive_field(single) == 3);

    // monotone in kernel, stride, and depth
    auto base = DiscriminatorSpec::patch();
    auto wider = base;
    wider.layers[0].kernel = 6;
    CHECK(receptive_field(wider) > receptive_field(base));
    auto strided = base;
    strided.layers[3].stride = 2;
    CHECK(receptive_field(strided) > receptive_field(base));
    auto shallow = base;
    shallow.layers.pop_back();
    CHECK(receptive_field(shallow) < receptive_field(base));
}

TEST_CASE("spec validation rejects malformed plans") {
    auto p = DiscriminatorSpec::patch();
    p.layers.pop_back();
    p.layers.back().out_channels = 1;
    CHECK_THROWS_AS(p.validate(), DataError);

    auto g = DiscriminatorSpec::global();
    g.kind = DiscKind::Patch;  // 6 feature layers under a patch label
    CHECK_THROWS_AS(g.validate(), DataError);
}

TEST_CASE("patch discriminator: 30x30 map and four taps at 256") {
    Rng rng(1);
    Discriminator<float> d(DiscriminatorSpec::patch(), 7);
    FeatureStack<float> taps;
    auto score = d.forward(batch<float>(1, 256, 256, rng), batch<float>(1, 256, 256, rng),
                           &taps);
    CHECK(score->value.shape() == std::vector<int64_t>{1, 1, 30, 30});
    REQUIRE(taps.size() == 4);
    std::vector<int64_t> sizes;
    for (const auto& t : taps.taps) sizes.push_back(t->value.dim(2));
    CHECK(sizes == std::vector<int64_t>{128, 64, 32, 31});
    CHECK(taps.d[0] == 64 * 128 * 128);
}

TEST_CASE("global discriminator reduces to one scalar per sample") {
    Rng rng(2);
    Discriminator<float> d(DiscriminatorSpec::global(32), 8);
    auto score = d.forward(batch<float>(3, 256, 256, rng), batch<float>(3, 256, 256, rng));
    CHECK(score->value.shape() == std::vector<int64_t>{3, 1, 1, 1});
}

TEST_CASE("zero-weight discriminator scores zero logits") {
    Rng rng(3);
    Discriminator<float> d(DiscriminatorSpec::global_desk(), 9);
    for (auto& p : d.params()) p.var->value.fill(0.0f);
    auto score = d.forward(batch<float>(2, 32, 32, rng), batch<float>(2, 32, 32, rng));
    for (int64_t i = 0; i < score->value.numel(); ++i) CHECK(score->value[i] == 0.0f);
}

TEST_CASE("conditioning is not symmetric in (candidate, condition)") {
    Rng rng(4);
    Discriminator<float> d(DiscriminatorSpec::patch_desk(), 10);
    auto a = batch<float>(1, 32, 32, rng);
    auto b = batch<float>(1, 32, 32, rng);
    auto s1 = d.forward(a, b);
    auto s2 = d.forward(b, a);
    bool differs = false;
    for (int64_t i = 0; i < s1->value.numel() && !differs; ++i)
        differs = s1->value[i] != s2->value[i];
    CHECK(differs);

    auto wrong = batch<float>(1, 16, 16, rng);
    CHECK_THROWS_AS(d.forward(a, wrong), DataError);
}

TEST_CASE("discriminator parameter gradients match finite differences") {
    Rng rng(5);
    Discriminator<double> d(DiscriminatorSpec::patch_desk(4), 11);
    auto cand = batch<double>(1, 32, 32, rng);
    auto cond = batch<double>(1, 32, 32, rng);
    auto fwd = [&] { return ag::mean_all(ag::sigmoid(d.forward(cand, cond))); };
    std::vector<ag::Var<double>> leaves;
    for (auto& p : d.params()) leaves.push_back(p.var);
    // 3 coords per tensor keeps this quick; the acceptance suite goes deeper
    CHECK(gradcheck<double>(fwd, leaves, rng, 3) < 1e-3);
}

TEST_CASE("multires split arithmetic") {
    auto s = mr_split(16);
    CHECK(s.w1 == 2);
    CHECK(s.w2 == 5);
    CHECK(s.w3 == 9);
    CHECK(s.total() == 16);
    for (int64_t u : {8, 17, 32, 51, 64, 256}) CHECK(mr_split(u).total() == u);
}

TEST_CASE("multires block: channel growth, same padding, zero map") {
    Rng rng(6);
    MultiResBlock<float> blk(8, 16, rng);
    auto x = ag::leaf(random_tensor<float>({2, 8, 64, 64}, rng), false);
    auto y = blk.forward(x);
    CHECK(y->value.shape() == std::vector<int64_t>{2, 16, 64, 64});

    auto odd = ag::leaf(random_tensor<float>({1, 8, 11, 13}, rng), false);
    CHECK(blk.forward(odd)->value.dim(2) == 11);
    CHECK(blk.forward(odd)->value.dim(3) == 13);

    auto wrong = ag::leaf(random_tensor<float>({1, 4, 8, 8}, rng), false);
    CHECK_THROWS_AS(blk.forward(wrong), DataError);

    // zero conv weights and biases silence the whole block
    for (auto& p : blk.params())
        if (p.name.ends_with(".w") || p.name.ends_with(".b")) p.var->value.fill(0.0f);
    auto z = blk.forward(x);
    for (int64_t i = 0; i < z->value.numel(); ++i) REQUIRE(z->value[i] == 0.0f);
}

TEST_CASE("respath unit passes nonnegative input through when identity-initialized") {
    Rng rng(7);
    ResPath<float> rp(3, 1, rng);
    for (auto& p : rp.params()) {
        p.var->value.fill(0.0f);
        if (p.name == "u0.res.w")  // [3,3,1,1] channel identity
            for (int64_t c = 0; c < 3; ++c) p.var->value.at({c, c, 0, 0}) = 1.0f;
    }
    auto x = ag::leaf(random_tensor<float>({1, 3, 8, 8}, rng, 0.0, 1.0), false);
    auto y = rp.forward(x);
    for (int64_t i = 0; i < x->value.numel(); ++i) REQUIRE(y->value[i] == x->value[i]);

    ResPath<float> chain(5, 3, rng);
    auto v = ag::leaf(random_tensor<float>({2, 5, 12, 12}, rng), false);
    CHECK(chain.forward(v)->value.shape() == v->value.shape());
}

TEST_CASE("unet skip chains shorten with depth (4,3,2,1)") {
    GeneratorConfig cfg;
    cfg.base_width = 8;
    Rng rng(8);
    MultiResUNet<float> net(cfg, rng);
    auto ps = net.params();
    for (int l = 0; l < 4; ++l) {
        const std::string last = "skip" + std::to_string(l) + ".u" + std::to_string(3 - l);
        const std::string over = "skip" + std::to_string(l) + ".u" + std::to_string(4 - l);
        CHECK(has_param(ps, last + ".main.w"));
        CHECK_FALSE(has_param(ps, over + ".main.w"));
    }
}

TEST_CASE("unet forward: shape, bound, batch equivariance") {
    GeneratorConfig cfg;
    cfg.base_width = 8;
    Rng rng(9);
    MultiResUNet<float> net(cfg, rng);

    auto y = batch<float>(2, 64, 64, rng);
    auto out = net.forward(y);
    CHECK(out->value.shape() == std::vector<int64_t>{2, 1, 64, 64});
    for (int64_t i = 0; i < out->value.numel(); ++i) {
        REQUIRE(out->value[i] >= -1.0f);
        REQUIRE(out->value[i] <= 1.0f);
    }

    // swapping the batch order swaps the outputs exactly
    Tensor<float> swapped(y->value.shape());
    const int64_t per = 64 * 64;
    std::copy_n(y->value.data() + per, per, swapped.data());
    std::copy_n(y->value.data(), per, swapped.data() + per);
    auto out2 = net.forward(ag::leaf(std::move(swapped), false));
    for (int64_t i = 0; i < per; ++i) {
        REQUIRE(out2->value[i] == out->value[per + i]);
        REQUIRE(out2->value[per + i] == out->value[i]);
    }

    auto bad = batch<float>(1, 40, 40, rng);
    CHECK_THROWS_WITH_AS(net.forward(bad),
                         "generator input spatial dims must be divisible by 16", DataError);
}

TEST_CASE("cascade: shapes, determinism, stage-1 gradient flow") {
    GeneratorConfig cfg;
    cfg.base_width = 8;
    CascadeGenerator<float> g(cfg, 123);
    Rng rng(10);
    auto y = batch<float>(1, 64, 64, rng);
    auto [xh, xh1] = g.forward(y);
    CHECK(xh->value.shape() == y->value.shape());
    CHECK(xh1->value.shape() == y->value.shape());

    auto [xh2, xh1b] = g.forward(y);
    for (int64_t i = 0; i < xh->value.numel(); ++i) REQUIRE(xh2->value[i] == xh->value[i]);

    // loss on the final output reaches stage-1 parameters
    g.zero_grad();
    ag::backward(ag::mean_all(xh));
    double gsum = 0;
    for (auto& p : g.params())
        if (p.name.starts_with("stage1.") && p.var->grad.numel())
            for (int64_t i = 0; i < p.var->grad.numel(); ++i)
                gsum += std::abs(static_cast<double>(p.var->grad[i]));
    CHECK(gsum > 0.0);
}

TEST_CASE("parameter count depends only on the config") {
    GeneratorConfig cfg;
    cfg.base_width = 8;
    CascadeGenerator<float> a(cfg, 1), b(cfg, 999);
    CHECK(a.param_count() == b.param_count());
    CHECK(a.param_count() > 0);

    GeneratorConfig single = cfg;
    single.stages = 1;
    CascadeGenerator<float> c(single, 1);
    CHECK(2 * c.param_count() == a.param_count());
}

TEST_CASE("generator weight files round-trip and reject config mismatch") {
    namespace fs = std::filesystem;
    const std::string path = "/tmp/ipaint_test_gen.nac";
    GeneratorConfig cfg;
    cfg.base_width = 8;
    CascadeGenerator<float> g(cfg, 55);
    Rng rng(11);
    auto y = batch<float>(1, 64, 64, rng);
    auto before = g.forward(y).first;

    save_generator(g, path);
    CHECK(fs::exists(path + ".json"));
    auto loaded = load_generator<float>(path);
    auto after = loaded->forward(y).first;
    for (int64_t i = 0; i < before->value.numel(); ++i)
        REQUIRE(after->value[i] == before->value[i]);

    GeneratorConfig other = cfg;
    other.base_width = 16;
    CascadeGenerator<float> wrong(other, 55);
    CHECK_THROWS_AS(load_generator_weights(wrong, path), DataError);
    std::remove(path.c_str());
    std::remove((path + ".json").c_str());
}

TEST_CASE("extractor: topology, taps, frozen weights") {
    const std::string path = "/tmp/ipaint_test_vgg.nac";
    testutil::write_vgg_stub(path, 77);
    Vgg19Extractor<float> vgg(path);

    // all 16 convs reachable: expected parameter count from the channel table
    int64_t expect = 0, in_ch = 3;
    for (int64_t oc : Vgg19Extractor<float>::conv_channels()) {
        expect += oc * in_ch * 9 + oc;
        in_ch = oc;
    }
    CHECK(vgg.param_count() == expect);
    for (auto& p : vgg.params()) CHECK_FALSE(p.var->requires_grad);

    Rng rng(12);
    auto img = batch<float>(1, 64, 64, rng);
    auto taps = vgg.extract(img);
    REQUIRE(taps.size() == 6);
    CHECK(taps.d[0] == 64 * 64 * 64);
    CHECK(taps.d[1] == 128 * 32 * 32);
    CHECK(taps.d[5] == 512 * 4 * 4);
    for (size_t i = 1; i < taps.size(); ++i)
        CHECK(taps.taps[i]->value.dim(2) <= taps.taps[i - 1]->value.dim(2));

    // two loads agree on a fixed probe
    Vgg19Extractor<float> vgg2(path);
    auto taps2 = vgg2.extract(img);
    for (size_t t = 0; t < taps.size(); ++t)
        for (int64_t i = 0; i < taps.taps[t]->value.numel(); ++i)
            REQUIRE(taps2.taps[t]->value[i] == taps.taps[t]->value[i]);

    auto loud = ag::leaf(Tensor<float>::full({1, 1, 32, 32}, 3.0f), false);
    CHECK_THROWS_AS(vgg.extract(loud), DataError);
    std::remove(path.c_str());
}

TEST_CASE("extractor load failures carry export instructions") {
    const std::string path = "/tmp/ipaint_test_vgg_bad.nac";
    try {
        Vgg19Extractor<float> vgg("/tmp/ipaint_vgg_does_not_exist.nac");
        FAIL("expected a load error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("export_vgg19") != std::string::npos);
    }

    testutil::write_vgg_stub(path, 1);
    {  // flip a payload byte; the container checksum must reject it
        std::FILE* f = std::fopen(path.c_str(), "r+b");
        std::fseek(f, -200, SEEK_END);
        int ch = std::fgetc(f);
        std::fseek(f, -200, SEEK_END);
        std::fputc(ch ^ 0x40, f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(Vgg19Extractor<float>{path}, DataError);
    std::remove(path.c_str());
}

TEST_CASE("extractor is constant-covariant and differentiable to its input") {
    const std::string path = "/tmp/ipaint_test_vgg2.nac";
    testutil::write_vgg_stub(path, 33);
    Vgg19Extractor<double> vgg(path);

    // constant input -> constant interior per channel on the first tap
    auto flat = ag::leaf(Tensor<double>::full({1, 1, 32, 32}, 0.25), false);
    auto taps = vgg.extract(flat);
    const auto& t0 = taps.taps[0]->value;
    for (int64_t c = 0; c < t0.dim(1); ++c) {
        const double v = t0.at({0, c, 1, 1});
        for (int64_t y = 1; y < 31; ++y)
            for (int64_t x = 1; x < 31; ++x)
                REQUIRE(t0.at({0, c, y, x}) == doctest::Approx(v).epsilon(1e-12));
    }

    // input-gradient finite differences (10 pixels)
    Rng rng(13);
    auto img = batch<double>(1, 64, 64, rng, true);
    auto fwd = [&] {
        auto ts = vgg.extract(img);
        std::vector<std::pair<double, ag::Var<double>>> parts;
        for (auto& t : ts.taps) parts.push_back({1.0, ag::mean_all(ag::square(t))});
        return ag::weighted_sum<double>(parts);
    };
    CHECK(gradcheck<double>(fwd, {img}, rng, 10) < 1e-3);

    // extractor parameters keep no gradients
    ag::backward(fwd());
    for (auto& p : vgg.params()) CHECK(p.var->grad.numel() == 0);
    std::remove(path.c_str());
}
