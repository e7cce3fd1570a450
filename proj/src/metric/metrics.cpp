#include "ipaint/metric/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "ipaint/core/error.hpp"
#include "ipaint/core/sha256.hpp"
#include "ipaint/img/png_io.hpp"

namespace fs = std::filesystem;

namespace ipaint::metric {

namespace {

void check_pair(const Tensor<double>& a, const Tensor<double>& b, int64_t min_hw) {
    if (a.rank() != 2 || b.rank() != 2) throw DataError("metrics expect [H,W] frames");
    if (!a.same_shape(b)) throw DataError("metric frame shapes differ");
    if (a.dim(0) < min_hw || a.dim(1) < min_hw)
        throw DataError("metric frame smaller than the " + std::to_string(min_hw) +
                        "-pixel window");
}

// Separable valid-region filtering with a normalized 1-D kernel; the
// workhorse behind the SSIM local statistics.
Tensor<double> filter_valid(const Tensor<double>& src, const std::vector<double>& g) {
    const int64_t k = static_cast<int64_t>(g.size());
    const int64_t h = src.dim(0), w = src.dim(1);
    Tensor<double> rows({h, w - k + 1});
    for (int64_t i = 0; i < h; ++i)
        for (int64_t j = 0; j + k <= w; ++j) {
            double acc = 0.0;
            for (int64_t t = 0; t < k; ++t) acc += g[t] * src[i * w + j + t];
            rows[i * (w - k + 1) + j] = acc;
        }
    const int64_t wo = w - k + 1;
    Tensor<double> out({h - k + 1, wo});
    for (int64_t i = 0; i + k <= h; ++i)
        for (int64_t j = 0; j < wo; ++j) {
            double acc = 0.0;
            for (int64_t t = 0; t < k; ++t) acc += g[t] * rows[(i + t) * wo + j];
            out[i * wo + j] = acc;
        }
    return out;
}

std::vector<double> gaussian_window() {
    std::vector<double> g(kSsimWindow);
    const double c = (kSsimWindow - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        g[i] = std::exp(-(i - c) * (i - c) / (2.0 * kSsimSigma * kSsimSigma));
        sum += g[i];
    }
    for (double& v : g) v /= sum;
    return g;
}

}  // namespace

Tensor<double> metric_frame(const img::ImageSlice& slice) {
    const auto [lo, hi] = img::range_bounds(slice.range);
    const double scale = kPeak / (hi - lo);
    Tensor<double> out({slice.h(), slice.w()});
    for (int64_t i = 0; i < out.numel(); ++i)
        out[i] = (static_cast<double>(slice.pixels[i]) - lo) * scale;
    return out;
}

Tensor<double> load_metric_frame(const std::string& png_path) {
    const img::GrayPng png = img::read_png_gray(png_path);
    Tensor<double> out({png.h, png.w});
    const double scale = png.bit_depth == 16 ? 1.0 / 257.0 : 1.0;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = png.px[static_cast<size_t>(i)] * scale;
    return out;
}

double mse(const Tensor<double>& a, const Tensor<double>& b) {
    check_pair(a, b, 1);
    double acc = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.numel());
}

double psnr_from_mse(double mse_value) {
    if (mse_value <= 0.0) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(kPeak * kPeak / mse_value));
}

double psnr(const Tensor<double>& a, const Tensor<double>& b) {
    return psnr_from_mse(mse(a, b));
}

double ssim(const Tensor<double>& a, const Tensor<double>& b) {
    check_pair(a, b, kSsimWindow);
    const auto g = gaussian_window();

    Tensor<double> aa(a.shape()), bb(a.shape()), ab(a.shape());
    for (int64_t i = 0; i < a.numel(); ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    const auto mu_a = filter_valid(a, g);
    const auto mu_b = filter_valid(b, g);
    const auto m_aa = filter_valid(aa, g);
    const auto m_bb = filter_valid(bb, g);
    const auto m_ab = filter_valid(ab, g);

    const double c1 = (kSsimK1 * kPeak) * (kSsimK1 * kPeak);
    const double c2 = (kSsimK2 * kPeak) * (kSsimK2 * kPeak);
    double acc = 0.0;
    for (int64_t i = 0; i < mu_a.numel(); ++i) {
        const double ma = mu_a[i], mb = mu_b[i];
        const double va = m_aa[i] - ma * ma;
        const double vb = m_bb[i] - mb * mb;
        const double cov = m_ab[i] - ma * mb;
        acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    return acc / static_cast<double>(mu_a.numel());
}

double uqi(const Tensor<double>& a, const Tensor<double>& b) {
    check_pair(a, b, kUqiWindow);
    const int64_t h = a.dim(0), w = a.dim(1), k = kUqiWindow;
    const double inv_n = 1.0 / static_cast<double>(k * k);
    double acc = 0.0;
    int64_t windows = 0;
    for (int64_t i = 0; i + k <= h; ++i)
        for (int64_t j = 0; j + k <= w; ++j, ++windows) {
            double sa = 0.0, sb = 0.0;
            for (int64_t u = 0; u < k; ++u)
                for (int64_t v = 0; v < k; ++v) {
                    sa += a[(i + u) * w + j + v];
                    sb += b[(i + u) * w + j + v];
                }
            const double ma = sa * inv_n, mb = sb * inv_n;
            // two-pass central moments: exactly zero for constant windows
            double va = 0.0, vb = 0.0, cab = 0.0;
            for (int64_t u = 0; u < k; ++u)
                for (int64_t v = 0; v < k; ++v) {
                    const double da = a[(i + u) * w + j + v] - ma;
                    const double db = b[(i + u) * w + j + v] - mb;
                    va += da * da;
                    vb += db * db;
                    cab += da * db;
                }
            va *= inv_n;
            vb *= inv_n;
            cab *= inv_n;
            if (va == 0.0 && vb == 0.0) {
                acc += (ma == mb) ? 1.0 : 0.0;
            } else if (va == 0.0 || vb == 0.0) {
                // exactly one flat window: no structure to agree on
            } else {
                acc += 4.0 * cab * ma * mb /
                       ((va + vb) * (ma * ma + mb * mb) + kUqiEps);
            }
        }
    return acc / static_cast<double>(windows);
}

ImageMetrics image_metrics(const std::string& id, const Tensor<double>& output,
                           const Tensor<double>& target) {
    ImageMetrics m;
    m.id = id;
    m.mse = mse(output, target);
    m.psnr_db = psnr_from_mse(m.mse);
    m.ssim = ssim(output, target);
    m.uqi = uqi(output, target);
    return m;
}

namespace {

std::string eval_config_string() {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "peak=%g;psnr_cap=%g;ssim_window=%d;ssim_sigma=%g;ssim_k1=%g;"
                  "ssim_k2=%g;uqi_window=%d;uqi_eps=%g",
                  kPeak, kPsnrCapDb, kSsimWindow, kSsimSigma, kSsimK1, kSsimK2,
                  kUqiWindow, kUqiEps);
    return buf;
}

nlohmann::json row_json(const ImageMetrics& m) {
    return {{"id", m.id}, {"mse", m.mse}, {"psnr_db", m.psnr_db},
            {"ssim", m.ssim}, {"uqi", m.uqi}};
}

std::vector<std::string> png_names(const std::string& dir) {
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png")
            names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
}

}  // namespace

std::string MetricReport::to_json() const {
    nlohmann::json j;
    j["n_images"] = n_images;
    j["eval_config_sha256"] = eval_config_sha256;
    j["means"] = row_json(means);
    j["means"].erase("id");
    j["per_image"] = nlohmann::json::array();
    for (const auto& m : per_image) j["per_image"].push_back(row_json(m));
    return j.dump(2);
}

std::string MetricReport::to_table() const {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-28s %12s %10s %8s %8s\n", "image", "MSE",
                  "PSNR(dB)", "SSIM", "UQI");
    out += line;
    auto emit = [&](const ImageMetrics& m, const char* name) {
        std::snprintf(line, sizeof(line), "%-28s %12.4f %10.2f %8.4f %8.4f\n", name,
                      m.mse, m.psnr_db, m.ssim, m.uqi);
        out += line;
    };
    for (const auto& m : per_image) emit(m, m.id.c_str());
    emit(means, "mean");
    return out;
}

std::string MetricReport::sha256() const {
    const std::string j = to_json();
    return sha256_hex(j.data(), j.size());
}

MetricReport evaluate(const std::string& outputs_dir, const std::string& targets_dir) {
    const auto out_names = png_names(outputs_dir);
    const auto tgt_names = png_names(targets_dir);

    std::vector<std::string> out_only, tgt_only;
    std::set_difference(out_names.begin(), out_names.end(), tgt_names.begin(),
                        tgt_names.end(), std::back_inserter(out_only));
    std::set_difference(tgt_names.begin(), tgt_names.end(), out_names.begin(),
                        out_names.end(), std::back_inserter(tgt_only));
    if (!out_only.empty() || !tgt_only.empty()) {
        std::string msg = "unmatched files between directories;";
        for (const auto& n : out_only) msg += " outputs-only: " + n;
        for (const auto& n : tgt_only) msg += " targets-only: " + n;
        throw DataError(msg);
    }
    if (out_names.empty()) throw DataError("no .png files to evaluate in " + outputs_dir);

    MetricReport rep;
    rep.eval_config_sha256 = [] {
        const std::string c = eval_config_string();
        return sha256_hex(c.data(), c.size());
    }();
    for (const auto& name : out_names) {
        const auto out = load_metric_frame((fs::path(outputs_dir) / name).string());
        const auto tgt = load_metric_frame((fs::path(targets_dir) / name).string());
        if (!out.same_shape(tgt))
            throw DataError("shape mismatch for " + name);
        rep.per_image.push_back(image_metrics(name, out, tgt));
    }
    rep.n_images = static_cast<int64_t>(rep.per_image.size());
    rep.means.id = "mean";
    for (const auto& m : rep.per_image) {
        rep.means.mse += m.mse;
        rep.means.psnr_db += m.psnr_db;
        rep.means.ssim += m.ssim;
        rep.means.uqi += m.uqi;
    }
    const double inv = 1.0 / static_cast<double>(rep.n_images);
    rep.means.mse *= inv;
    rep.means.psnr_db *= inv;
    rep.means.ssim *= inv;
    rep.means.uqi *= inv;
    return rep;
}

}  // namespace ipaint::metric
