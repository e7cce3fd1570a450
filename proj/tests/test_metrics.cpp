#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "ipaint/img/png_io.hpp"
#include "ipaint/metric/metrics.hpp"
#include "test_util.hpp"

using namespace ipaint;
namespace me = ipaint::metric;

namespace {

Tensor<double> random_frame(int64_t h, int64_t w, Rng& rng) {
    Tensor<double> t({h, w});
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(0.0, 255.0);
    return t;
}

// Direct per-window SSIM: explicit 2-D Gaussian weights and weighted central
// moments, no shared code with the library's separable-filter version.
double ssim_oracle(const Tensor<double>& a, const Tensor<double>& b) {
    const int64_t h = a.dim(0), w = a.dim(1), k = 11;
    double wgt[11][11], wsum = 0.0;
    for (int u = 0; u < k; ++u)
        for (int v = 0; v < k; ++v) {
            wgt[u][v] = std::exp(-((u - 5.0) * (u - 5.0) + (v - 5.0) * (v - 5.0)) /
                                 (2.0 * 1.5 * 1.5));
            wsum += wgt[u][v];
        }
    for (int u = 0; u < k; ++u)
        for (int v = 0; v < k; ++v) wgt[u][v] /= wsum;
    const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
    const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
    double acc = 0.0;
    int64_t n = 0;
    for (int64_t i = 0; i + k <= h; ++i)
        for (int64_t j = 0; j + k <= w; ++j, ++n) {
            double ma = 0.0, mb = 0.0;
            for (int u = 0; u < k; ++u)
                for (int v = 0; v < k; ++v) {
                    ma += wgt[u][v] * a[(i + u) * w + j + v];
                    mb += wgt[u][v] * b[(i + u) * w + j + v];
                }
            double va = 0.0, vb = 0.0, cov = 0.0;
            for (int u = 0; u < k; ++u)
                for (int v = 0; v < k; ++v) {
                    const double da = a[(i + u) * w + j + v] - ma;
                    const double db = b[(i + u) * w + j + v] - mb;
                    va += wgt[u][v] * da * da;
                    vb += wgt[u][v] * db * db;
                    cov += wgt[u][v] * da * db;
                }
            acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                   ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    return acc / static_cast<double>(n);
}

// Direct per-window UQI via raw moments E[x^2]-m^2 (different algebra from
// the library's two-pass central moments).
double uqi_oracle(const Tensor<double>& a, const Tensor<double>& b) {
    const int64_t h = a.dim(0), w = a.dim(1), k = 8;
    const double inv_n = 1.0 / 64.0;
    double acc = 0.0;
    int64_t n = 0;
    for (int64_t i = 0; i + k <= h; ++i)
        for (int64_t j = 0; j + k <= w; ++j, ++n) {
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (int u = 0; u < k; ++u)
                for (int v = 0; v < k; ++v) {
                    const double x = a[(i + u) * w + j + v];
                    const double y = b[(i + u) * w + j + v];
                    sa += x;
                    sb += y;
                    saa += x * x;
                    sbb += y * y;
                    sab += x * y;
                }
            const double ma = sa * inv_n, mb = sb * inv_n;
            const double va = saa * inv_n - ma * ma;
            const double vb = sbb * inv_n - mb * mb;
            const double cab = sab * inv_n - ma * mb;
            acc += 4.0 * cab * ma * mb / ((va + vb) * (ma * ma + mb * mb) + 1e-12);
        }
    return acc / static_cast<double>(n);
}

}  // namespace

TEST_CASE("mse: hand values and symmetry") {
    Rng rng(501);
    Tensor<double> x({64, 64});
    for (int64_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(10.0, 200.0);
    CHECK(me::mse(x, x) == 0.0);

    Tensor<double> y = x;
    for (int64_t i = 0; i < y.numel(); ++i) y[i] += 16.0;
    CHECK(me::mse(x, y) == 256.0);
    CHECK(me::mse(x, y) == me::mse(y, x));

    Tensor<double> z = random_frame(64, 64, rng);
    double acc = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) acc += (x[i] - z[i]) * (x[i] - z[i]);
    CHECK(testutil::rel_err(me::mse(x, z), acc / 4096.0) < 1e-15);

    CHECK_THROWS_AS((void)me::mse(x, Tensor<double>({64, 32})), DataError);
    CHECK_THROWS_AS((void)me::mse(Tensor<double>({4, 4, 4}), Tensor<double>({4, 4, 4})),
                    DataError);
}

TEST_CASE("psnr: formula, identical-image cap, ceiling") {
    Rng rng(502);
    auto x = random_frame(32, 32, rng);
    CHECK(me::psnr(x, x) == 100.0);

    Tensor<double> y = x;
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = x[i] + 16.0;
    const double expect = 10.0 * std::log10(255.0 * 255.0 / 256.0);
    CHECK(std::abs(me::psnr(x, y) - expect) < 1e-12);
    CHECK(std::abs(me::psnr(x, y) - 24.05) < 5e-3);

    // near-identical pair: raw formula would exceed 100 dB; ceiling applies
    Tensor<double> z = x;
    z[0] += 1e-4;
    CHECK(me::psnr(x, z) == 100.0);
}

TEST_CASE("ssim: hand cases") {
    Rng rng(503);
    auto x = random_frame(64, 64, rng);
    CHECK(std::abs(me::ssim(x, x) - 1.0) < 1e-9);

    Tensor<double> inv({64, 64});
    for (int64_t i = 0; i < inv.numel(); ++i) inv[i] = 255.0 - x[i];
    CHECK(me::ssim(x, inv) < 0.1);

    auto y = random_frame(64, 64, rng);
    CHECK(std::abs(me::ssim(x, y) - me::ssim(y, x)) < 1e-12);

    CHECK_THROWS_AS((void)me::ssim(Tensor<double>({10, 10}), Tensor<double>({10, 10})),
                    DataError);
}

TEST_CASE("ssim: sliding-window oracle agreement") {
    Rng rng(504);
    for (int rep = 0; rep < 10; ++rep) {
        auto x = random_frame(64, 64, rng);
        auto y = random_frame(64, 64, rng);
        // correlate some pairs so the oracle sees non-trivial covariances
        if (rep % 2 == 0)
            for (int64_t i = 0; i < y.numel(); ++i)
                y[i] = std::min(255.0, 0.7 * x[i] + 0.3 * y[i] + 5.0);
        CHECK(std::abs(me::ssim(x, y) - ssim_oracle(x, y)) < 1e-6);
    }
}

TEST_CASE("uqi: hand cases and degenerate windows") {
    Rng rng(505);
    auto x = random_frame(64, 64, rng);
    CHECK(std::abs(me::uqi(x, x) - 1.0) < 1e-9);

    Tensor<double> flat7({64, 64}), flat7b({64, 64}), flat9({64, 64});
    flat7.fill(7.0);
    flat7b.fill(7.0);
    flat9.fill(9.0);
    CHECK(me::uqi(flat7, flat7b) == 1.0);  // both constant, equal
    CHECK(me::uqi(flat7, flat9) == 0.0);   // both constant, different
    CHECK(me::uqi(flat7, x) == 0.0);       // exactly one constant
    CHECK(me::uqi(x, flat7) == 0.0);

    auto y = random_frame(64, 64, rng);
    CHECK(std::abs(me::uqi(x, y) - me::uqi(y, x)) < 1e-12);

    CHECK_THROWS_AS((void)me::uqi(Tensor<double>({7, 7}), Tensor<double>({7, 7})),
                    DataError);
}

TEST_CASE("uqi: sliding-window oracle agreement") {
    Rng rng(506);
    for (int rep = 0; rep < 10; ++rep) {
        auto x = random_frame(64, 64, rng);
        auto y = random_frame(64, 64, rng);
        if (rep % 2 == 0)
            for (int64_t i = 0; i < y.numel(); ++i)
                y[i] = std::min(255.0, 0.8 * x[i] + 0.2 * y[i]);
        CHECK(std::abs(me::uqi(x, y) - uqi_oracle(x, y)) < 1e-9);
    }
}

TEST_CASE("metric range remapping from tagged slices and PNGs") {
    Tensor<float> px({16, 16});
    px.fill(0.0f);
    px[0] = -1.0f;
    px[1] = 1.0f;
    px[2] = 0.5f;
    auto fr = me::metric_frame(img::ImageSlice::make(px, img::Range::Signed));
    CHECK(fr[0] == 0.0);
    CHECK(fr[1] == 255.0);
    CHECK(std::abs(fr[2] - 191.25) < 1e-12);
    CHECK(fr[3] == 127.5);

    Tensor<float> raw({16, 16});
    raw.fill(257.0f);
    raw[0] = 65535.0f;
    auto fr16 = me::metric_frame(img::ImageSlice::make(raw, img::Range::RawU16));
    CHECK(fr16[0] == 255.0);
    CHECK(std::abs(fr16[1] - 1.0) < 1e-12);

    const std::string p8 = "/tmp/ipaint_metric_g8.png";
    std::vector<uint8_t> b8(16 * 16, 128);
    b8[0] = 0;
    b8[1] = 255;
    img::write_png_gray8(p8, 16, 16, b8.data());
    auto l8 = me::load_metric_frame(p8);
    CHECK(l8[0] == 0.0);
    CHECK(l8[1] == 255.0);
    CHECK(l8[2] == 128.0);

    const std::string p16 = "/tmp/ipaint_metric_g16.png";
    std::vector<uint16_t> b16(16 * 16, 257);
    b16[0] = 65535;
    img::write_png_gray16(p16, 16, 16, b16.data());
    auto l16 = me::load_metric_frame(p16);
    CHECK(l16[0] == 255.0);
    CHECK(l16[1] == 1.0);
}

TEST_CASE("evaluate: directory pairing, means, report stability") {
    namespace fs = std::filesystem;
    const std::string outd = "/tmp/ipaint_eval_out", tgtd = "/tmp/ipaint_eval_tgt";
    fs::remove_all(outd);
    fs::remove_all(tgtd);
    fs::create_directories(outd);
    fs::create_directories(tgtd);

    Rng rng(507);
    auto put = [&](const std::string& dir, const std::string& name, uint8_t bias) {
        std::vector<uint8_t> px(32 * 32);
        Rng r(900 + bias);
        for (auto& v : px) v = static_cast<uint8_t>(r.uniform_int(0, 200) + bias);
        img::write_png_gray8(dir + "/" + name, 32, 32, px.data());
    };
    // identical pairs first: all metrics hit their ideal values
    put(outd, "a.png", 3);
    put(tgtd, "a.png", 3);
    put(outd, "b.png", 9);
    put(tgtd, "b.png", 9);
    auto ideal = me::evaluate(outd, tgtd);
    CHECK(ideal.n_images == 2);
    CHECK(ideal.means.mse == 0.0);
    CHECK(ideal.means.psnr_db == 100.0);
    CHECK(std::abs(ideal.means.ssim - 1.0) < 1e-9);
    CHECK(std::abs(ideal.means.uqi - 1.0) < 1e-9);

    // now distinct pairs: means must equal hand-averaged per-image values
    put(tgtd, "a.png", 11);
    put(tgtd, "b.png", 27);
    auto rep = me::evaluate(outd, tgtd);
    auto fa = me::load_metric_frame(outd + "/a.png");
    auto fb = me::load_metric_frame(outd + "/b.png");
    auto ta = me::load_metric_frame(tgtd + "/a.png");
    auto tb = me::load_metric_frame(tgtd + "/b.png");
    CHECK(rep.per_image[0].id == "a.png");
    CHECK(rep.per_image[1].id == "b.png");
    CHECK(rep.per_image[0].mse == me::mse(fa, ta));
    CHECK(std::abs(rep.means.mse - 0.5 * (me::mse(fa, ta) + me::mse(fb, tb))) < 1e-12);
    CHECK(std::abs(rep.means.ssim - 0.5 * (me::ssim(fa, ta) + me::ssim(fb, tb))) < 1e-12);
    CHECK(std::abs(rep.means.uqi - 0.5 * (me::uqi(fa, ta) + me::uqi(fb, tb))) < 1e-12);
    CHECK(std::abs(rep.means.psnr_db - 0.5 * (me::psnr(fa, ta) + me::psnr(fb, tb))) <
          1e-12);

    // stable hash across repeated runs; JSON parses and matches the table
    auto rep2 = me::evaluate(outd, tgtd);
    CHECK(rep.sha256() == rep2.sha256());
    auto j = nlohmann::json::parse(rep.to_json());
    CHECK(j["n_images"] == 2);
    CHECK(j["per_image"].size() == 2);
    CHECK(j["means"]["mse"] == rep.means.mse);
    CHECK(rep.to_table().find("mean") != std::string::npos);
    CHECK(rep.eval_config_sha256.size() == 64);

    // orphans on either side are called out by name
    put(outd, "c.png", 5);
    CHECK_THROWS_WITH_AS((void)me::evaluate(outd, tgtd),
                         doctest::Contains("c.png"), DataError);
    fs::remove(outd + "/c.png");
    put(tgtd, "d.png", 5);
    CHECK_THROWS_WITH_AS((void)me::evaluate(outd, tgtd),
                         doctest::Contains("d.png"), DataError);
    fs::remove(tgtd + "/d.png");

    // mismatched shapes are a data error
    std::vector<uint8_t> small(16 * 16, 4);
    img::write_png_gray8(outd + "/a.png", 16, 16, small.data());
    CHECK_THROWS_AS((void)me::evaluate(outd, tgtd), DataError);

    fs::remove_all(outd);
    fs::remove_all(tgtd);
    CHECK_THROWS_AS((void)me::evaluate(outd, tgtd), DataError);
}
