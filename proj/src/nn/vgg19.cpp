#include "ipaint/nn/vgg19.hpp"

#include <cmath>

#include "ipaint/core/error.hpp"

namespace ipaint::nn {

namespace {

constexpr double kMean[3] = {0.485, 0.456, 0.406};
constexpr double kStd[3] = {0.229, 0.224, 0.225};

bool pool_after(int conv) { return conv == 1 || conv == 3 || conv == 7 || conv == 11; }

std::string missing_weights_help(const std::string& path, const std::string& why) {
    return "feature extractor weights unusable at '" + path + "': " + why +
           "\nExport them once with:\n"
           "    python tools/export_vgg19.py --out " + path +
           "\n(downloads the ImageNet-pretrained checkpoint via torchvision, then"
           " converts it to this container format)";
}

}  // namespace

template <typename T>
const std::array<int64_t, Vgg19Extractor<T>::kConvs>& Vgg19Extractor<T>::conv_channels() {
    static const std::array<int64_t, kConvs> c = {64,  64,  128, 128, 256, 256, 256, 256,
                                                  512, 512, 512, 512, 512, 512, 512, 512};
    return c;
}

template <typename T>
const std::array<int, Vgg19Extractor<T>::kTaps>& Vgg19Extractor<T>::tap_convs() {
    static const std::array<int, kTaps> t = {0, 2, 4, 8, 12, 15};
    return t;
}

template <typename T>
const std::array<const char*, Vgg19Extractor<T>::kTaps>& Vgg19Extractor<T>::tap_names() {
    static const std::array<const char*, kTaps> t = {"relu1_1", "relu2_1", "relu3_1",
                                                     "relu4_1", "relu5_1", "relu5_4"};
    return t;
}

template <typename T>
Vgg19Extractor<T>::Vgg19Extractor(const std::string& weights_path) {
    Rng rng(0);  // placeholder draws, overwritten by the load below
    int64_t in_ch = 3;
    for (int i = 0; i < kConvs; ++i) {
        const int64_t out_ch = conv_channels()[static_cast<size_t>(i)];
        convs_.push_back(std::make_unique<Conv2d<T>>(in_ch, out_ch, 3, 1, 1, true, rng));
        this->add_child("conv" + std::to_string(i), convs_.back().get());
        in_ch = out_ch;
    }

    io::Container c;
    try {
        c = io::Container::load(weights_path);
    } catch (const Error& e) {
        throw DataError(missing_weights_help(weights_path, e.what()));
    }
    try {
        this->load_params(c, "");
    } catch (const Error& e) {
        throw DataError(missing_weights_help(weights_path, e.what()));
    }
    weights_sha_ = c.payload_sha256();
    this->freeze();
}

template <typename T>
FeatureStack<T> Vgg19Extractor<T>::extract(ag::Var<T> img) const {
    const auto& s = img->value.shape();
    if (s.size() != 4 || s[1] != 1)
        throw DataError("extractor input must be a [n,1,h,w] batch");
    if (s[2] % 16 || s[3] % 16)
        throw DataError("extractor input spatial dims must be divisible by 16");
    for (int64_t i = 0; i < img->value.numel(); ++i)
        if (!(std::abs(static_cast<double>(img->value[i])) <= 1.0 + 1e-6))
            throw DataError("extractor input must be in the signed range [-1, 1]");

    // [-1,1] -> [0,1], replicate to RGB and normalize, all in one fixed
    // 1x1 conv: w_c = 0.5/std_c, b_c = (0.5 - mean_c)/std_c.
    Tensor<T> w({3, 1, 1, 1});
    Tensor<T> b({3});
    for (int64_t ch = 0; ch < 3; ++ch) {
        w[ch] = static_cast<T>(0.5 / kStd[ch]);
        b[ch] = static_cast<T>((0.5 - kMean[ch]) / kStd[ch]);
    }
    auto x = ag::conv2d(std::move(img), ag::constant(std::move(w)),
                        ag::constant(std::move(b)), 1, 0);

    FeatureStack<T> out;
    size_t next_tap = 0;
    for (int i = 0; i < kConvs; ++i) {
        x = ag::relu(convs_[static_cast<size_t>(i)]->forward(x));
        if (next_tap < kTaps && tap_convs()[next_tap] == i) {
            out.push(x);
            ++next_tap;
        }
        if (pool_after(i)) x = ag::maxpool2(x);
    }
    return out;
}

template class Vgg19Extractor<float>;
template class Vgg19Extractor<double>;

}  // namespace ipaint::nn
