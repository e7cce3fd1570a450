#pragma once

#include <string>
#include <vector>

#include "ipaint/core/tensor.hpp"
#include "ipaint/img/image.hpp"

namespace ipaint::metric {

// Every metric runs on [H,W] double frames in [0,255] (the L=255
// convention), regardless of how pixels were stored on disk.
constexpr double kPeak = 255.0;
constexpr double kPsnrCapDb = 100.0;
constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimK1 = 0.01;
constexpr double kSsimK2 = 0.03;
constexpr int kUqiWindow = 8;
constexpr double kUqiEps = 1e-12;

// Linear remap of a tagged slice onto the metric range.
Tensor<double> metric_frame(const img::ImageSlice& slice);
// Decode a gray PNG straight to the metric range (8-bit as-is, 16-bit /257).
Tensor<double> load_metric_frame(const std::string& png_path);

double mse(const Tensor<double>& a, const Tensor<double>& b);
double psnr_from_mse(double mse_value);
// 10*log10(L^2/MSE), ceiling-capped at 100 dB (exactly 100 when MSE = 0).
double psnr(const Tensor<double>& a, const Tensor<double>& b);
// 11x11 Gaussian-window SSIM, sigma 1.5, K1=0.01 K2=0.03, valid windows
// only, mean over the map.
double ssim(const Tensor<double>& a, const Tensor<double>& b);
// 8x8 uniform-window UQI, stride 1. Degenerate windows: both constant and
// equal -> 1, exactly one constant -> 0; otherwise eps-stabilized quotient.
double uqi(const Tensor<double>& a, const Tensor<double>& b);

struct ImageMetrics {
    std::string id;
    double mse = 0.0;
    double psnr_db = 0.0;
    double ssim = 0.0;
    double uqi = 0.0;
};

ImageMetrics image_metrics(const std::string& id, const Tensor<double>& output,
                           const Tensor<double>& target);

struct MetricReport {
    std::vector<ImageMetrics> per_image;  // sorted by id
    ImageMetrics means;                   // arithmetic means of the rows
    int64_t n_images = 0;
    std::string eval_config_sha256;       // hash of the metric constants above

    std::string to_json() const;
    std::string to_table() const;
    // Hash of the canonical JSON; independent of directory enumeration order.
    std::string sha256() const;
};

// Pairs files by name across the two directories (*.png) and reports
// per-image metrics plus means. Unpaired files on either side are an error.
MetricReport evaluate(const std::string& outputs_dir, const std::string& targets_dir);

}  // namespace ipaint::metric
