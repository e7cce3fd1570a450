#include "ipaint/img/phantom.hpp"

#include <cmath>

#include "ipaint/core/error.hpp"
#include "ipaint/core/rng.hpp"

namespace ipaint::img {

namespace {

struct Ellipse {
    double cy, cx, ay, ax, theta;  // center, semi-axes, rotation
    double intensity;

    bool contains(double y, double x) const {
        const double dy = y - cy, dx = x - cx;
        const double u = dx * std::cos(theta) + dy * std::sin(theta);
        const double v = -dx * std::sin(theta) + dy * std::cos(theta);
        return (u / ax) * (u / ax) + (v / ay) * (v / ay) <= 1.0;
    }
};

}  // namespace

ImageSlice generate_phantom(uint64_t seed, int64_t h, int64_t w, double* head_fraction) {
    if (h < 64 || w < 64) throw DataError("phantom size must be at least 64x64");

    Rng rng(seed);

    // Head: near-centered, axis-aligned, fully inside the frame. Semi-axis
    // ratios in [0.33, 0.42] keep the covered fraction (pi * ry * rx) above
    // 0.34 regardless of the draw.
    Ellipse head;
    head.cy = h * (0.5 + rng.uniform(-0.03, 0.03));
    head.cx = w * (0.5 + rng.uniform(-0.03, 0.03));
    head.ay = h * rng.uniform(0.33, 0.42);
    head.ax = w * rng.uniform(0.33, 0.42);
    head.theta = 0.0;
    head.intensity = rng.uniform(0.40, 0.55);

    const int n_blobs = static_cast<int>(rng.uniform_int(5, 10));
    std::vector<Ellipse> blobs;
    blobs.reserve(static_cast<size_t>(n_blobs));
    const double blob_scale = static_cast<double>(std::min(h, w));
    for (int i = 0; i < n_blobs; ++i) {
        Ellipse e;
        // Uniform position inside the head (shrunk 85% so blobs sit interior).
        const double t = rng.uniform(0.0, 2.0 * M_PI);
        const double r = std::sqrt(rng.uniform()) * 0.85;
        e.cy = head.cy + r * std::sin(t) * head.ay;
        e.cx = head.cx + r * std::cos(t) * head.ax;
        e.ay = blob_scale * rng.uniform(0.04, 0.12);
        e.ax = blob_scale * rng.uniform(0.04, 0.12);
        e.theta = rng.uniform(0.0, M_PI);
        e.intensity = rng.uniform(0.20, 0.90);
        blobs.push_back(e);
    }

    // Smooth multiplicative bias field, amplitude well under the clamp margin.
    const double bias_amp = rng.uniform(0.05, 0.15);
    const double fy = rng.uniform(0.4, 0.9), fx = rng.uniform(0.4, 0.9);
    const double py = rng.uniform(0.0, 2.0 * M_PI), px = rng.uniform(0.0, 2.0 * M_PI);

    Tensor<float> out({h, w});
    int64_t inside = 0;
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            const double yd = static_cast<double>(y), xd = static_cast<double>(x);
            double v = 0.02;  // background
            if (head.contains(yd, xd)) {
                ++inside;
                v = head.intensity;
                for (const Ellipse& e : blobs)
                    if (e.contains(yd, xd)) v = e.intensity;
            }
            const double bias = 1.0 + bias_amp * std::cos(2.0 * M_PI * fy * yd / h + py) *
                                           std::cos(2.0 * M_PI * fx * xd / w + px);
            v = v * bias + rng.normal(0.0, 0.01);
            v = std::min(1.0, std::max(0.0, v));
            out[y * w + x] = static_cast<float>(2.0 * v - 1.0);
        }
    }
    if (head_fraction)
        *head_fraction = static_cast<double>(inside) / static_cast<double>(h * w);
    return ImageSlice::make(std::move(out), Range::Signed);
}

}  // namespace ipaint::img
