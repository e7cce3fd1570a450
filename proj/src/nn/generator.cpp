#include "ipaint/nn/generator.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "ipaint/core/error.hpp"

using json = nlohmann::json;

namespace ipaint::nn {

void GeneratorConfig::validate() const {
    if (depth < 1) throw DataError("generator depth must be >= 1");
    if (base_width < 6) throw DataError("generator base width must be >= 6");
    if (stages != 1 && stages != 2) throw DataError("generator stages must be 1 or 2");
}

std::string GeneratorConfig::to_json() const {
    json j{{"depth", depth}, {"base_width", base_width}, {"stages", stages}};
    return j.dump();
}

GeneratorConfig GeneratorConfig::from_json(const std::string& text) {
    GeneratorConfig c;
    try {
        json j = json::parse(text);
        c.depth = j.at("depth").get<int64_t>();
        c.base_width = j.at("base_width").get<int64_t>();
        c.stages = j.at("stages").get<int64_t>();
    } catch (const json::exception& e) {
        throw DataError(std::string("bad generator config: ") + e.what());
    }
    c.validate();
    return c;
}

MrSplit mr_split(int64_t u) {
    MrSplit s;
    s.w1 = u / 6;
    s.w2 = u / 3;
    s.w3 = u - s.w1 - s.w2;
    return s;
}

template <typename T>
MultiResBlock<T>::MultiResBlock(int64_t in_ch, int64_t u, Rng& rng)
    : in_ch_(in_ch), u_(u) {
    const MrSplit s = mr_split(u);
    if (s.w1 < 1) throw DataError("block width " + std::to_string(u) + " is too narrow");
    c1_ = std::make_unique<Conv2d<T>>(in_ch, s.w1, 3, 1, 1, true, rng);
    c2_ = std::make_unique<Conv2d<T>>(s.w1, s.w2, 3, 1, 1, true, rng);
    c3_ = std::make_unique<Conv2d<T>>(s.w2, s.w3, 3, 1, 1, true, rng);
    shortcut_ = std::make_unique<Conv2d<T>>(in_ch, u, 1, 1, 0, true, rng);
    n1_ = std::make_unique<BatchNorm2d<T>>(s.w1);
    n2_ = std::make_unique<BatchNorm2d<T>>(s.w2);
    n3_ = std::make_unique<BatchNorm2d<T>>(s.w3);
    nsc_ = std::make_unique<BatchNorm2d<T>>(u);
    ncat_ = std::make_unique<BatchNorm2d<T>>(u);
    nout_ = std::make_unique<BatchNorm2d<T>>(u);
    this->add_child("c1", c1_.get());
    this->add_child("c2", c2_.get());
    this->add_child("c3", c3_.get());
    this->add_child("sc", shortcut_.get());
    this->add_child("n1", n1_.get());
    this->add_child("n2", n2_.get());
    this->add_child("n3", n3_.get());
    this->add_child("nsc", nsc_.get());
    this->add_child("ncat", ncat_.get());
    this->add_child("nout", nout_.get());
}

template <typename T>
ag::Var<T> MultiResBlock<T>::forward(ag::Var<T> x) const {
    if (x->value.dim(1) != in_ch_)
        throw DataError("block expects " + std::to_string(in_ch_) + " channels, got " +
                        std::to_string(x->value.dim(1)));
    auto a1 = ag::relu(n1_->forward(c1_->forward(x)));
    auto a2 = ag::relu(n2_->forward(c2_->forward(a1)));
    auto a3 = ag::relu(n3_->forward(c3_->forward(a2)));
    auto cat = ncat_->forward(ag::concat_channels<T>({a1, a2, a3}));
    auto sc = nsc_->forward(shortcut_->forward(x));
    return nout_->forward(ag::relu(ag::add(cat, sc)));
}

template <typename T>
ResPath<T>::Unit::Unit(int64_t channels, Rng& rng) {
    main = std::make_unique<Conv2d<T>>(channels, channels, 3, 1, 1, true, rng);
    res = std::make_unique<Conv2d<T>>(channels, channels, 1, 1, 0, true, rng);
    this->add_child("main", main.get());
    this->add_child("res", res.get());
}

template <typename T>
ResPath<T>::ResPath(int64_t channels, int64_t length, Rng& rng) {
    if (length < 1) throw DataError("respath length must be >= 1");
    for (int64_t i = 0; i < length; ++i) {
        units_.push_back(std::make_unique<Unit>(channels, rng));
        this->add_child("u" + std::to_string(i), units_.back().get());
    }
}

template <typename T>
ag::Var<T> ResPath<T>::forward(ag::Var<T> x) const {
    for (const auto& u : units_)
        x = ag::relu(ag::add(u->main->forward(x), u->res->forward(x)));
    return x;
}

template <typename T>
MultiResUNet<T>::MultiResUNet(const GeneratorConfig& cfg, Rng& rng) : depth_(cfg.depth) {
    cfg.validate();
    int64_t in_ch = 1;
    for (int64_t l = 0; l < depth_; ++l) {
        const int64_t u = cfg.base_width << l;
        enc_.push_back(std::make_unique<MultiResBlock<T>>(in_ch, u, rng));
        this->add_child("enc" + std::to_string(l), enc_.back().get());
        // shallow skips get the longest filter chains: depth - l units
        skips_.push_back(std::make_unique<ResPath<T>>(u, depth_ - l, rng));
        this->add_child("skip" + std::to_string(l), skips_.back().get());
        in_ch = u;
    }
    const int64_t ubridge = cfg.base_width << depth_;
    bridge_ = std::make_unique<MultiResBlock<T>>(in_ch, ubridge, rng);
    this->add_child("bridge", bridge_.get());

    int64_t below = ubridge;
    for (int64_t l = depth_ - 1; l >= 0; --l) {
        const int64_t u = cfg.base_width << l;
        ups_.push_back(std::make_unique<ConvTranspose2d<T>>(below, u, 2, 2, true, rng));
        this->add_child("up" + std::to_string(l), ups_.back().get());
        dec_.push_back(std::make_unique<MultiResBlock<T>>(2 * u, u, rng));
        this->add_child("dec" + std::to_string(l), dec_.back().get());
        below = u;
    }
    head_ = std::make_unique<Conv2d<T>>(cfg.base_width, 1, 1, 1, 0, true, rng);
    this->add_child("head", head_.get());
}

template <typename T>
ag::Var<T> MultiResUNet<T>::forward(ag::Var<T> y) const {
    const auto& s = y->value.shape();
    if (s.size() != 4 || s[1] != 1) throw DataError("generator input must be [n,1,h,w]");
    const int64_t div = int64_t(1) << depth_;
    if (s[2] % div || s[3] % div)
        throw DataError("generator input spatial dims must be divisible by " +
                        std::to_string(div));

    std::vector<ag::Var<T>> skips;
    auto x = std::move(y);
    for (int64_t l = 0; l < depth_; ++l) {
        x = enc_[static_cast<size_t>(l)]->forward(x);
        skips.push_back(skips_[static_cast<size_t>(l)]->forward(x));
        x = ag::maxpool2(x);
    }
    x = bridge_->forward(x);
    for (int64_t i = 0; i < depth_; ++i) {
        const int64_t l = depth_ - 1 - i;
        x = ups_[static_cast<size_t>(i)]->forward(x);
        x = ag::concat_channels<T>({x, skips[static_cast<size_t>(l)]});
        x = dec_[static_cast<size_t>(i)]->forward(x);
    }
    return ag::tanh_op(head_->forward(x));
}

template <typename T>
CascadeGenerator<T>::CascadeGenerator(const GeneratorConfig& cfg, uint64_t seed)
    : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    for (int64_t i = 0; i < cfg_.stages; ++i) {
        stages_.push_back(std::make_unique<MultiResUNet<T>>(cfg_, rng));
        this->add_child("stage" + std::to_string(i + 1), stages_.back().get());
    }
}

template <typename T>
std::pair<ag::Var<T>, ag::Var<T>> CascadeGenerator<T>::forward(ag::Var<T> y) const {
    auto first = stages_[0]->forward(std::move(y));
    if (stages_.size() == 1) return {first, first};
    return {stages_[1]->forward(first), first};
}

template <typename T>
void save_generator(const CascadeGenerator<T>& g, const std::string& path) {
    io::Container c;
    g.save_params(c, "");
    c.set_meta(g.config().to_json());
    c.save(path);
    std::ofstream side(path + ".json");
    if (!side) throw DataError("cannot write sidecar " + path + ".json");
    side << g.config().to_json() << "\n";
}

namespace {

GeneratorConfig read_sidecar(const std::string& path) {
    std::ifstream side(path + ".json");
    if (!side) throw DataError("missing generator sidecar " + path + ".json");
    std::string text((std::istreambuf_iterator<char>(side)),
                     std::istreambuf_iterator<char>());
    return GeneratorConfig::from_json(text);
}

}  // namespace

template <typename T>
void load_generator_weights(CascadeGenerator<T>& g, const std::string& path) {
    const GeneratorConfig side = read_sidecar(path);
    if (!(side == g.config()))
        throw DataError("generator config mismatch: checkpoint has " + side.to_json() +
                        ", model expects " + g.config().to_json());
    auto c = io::Container::load(path);
    g.load_params(c, "");
}

template <typename T>
std::unique_ptr<CascadeGenerator<T>> load_generator(const std::string& path, uint64_t seed) {
    auto g = std::make_unique<CascadeGenerator<T>>(read_sidecar(path), seed);
    load_generator_weights(*g, path);
    return g;
}

template class MultiResBlock<float>;
template class MultiResBlock<double>;
template class ResPath<float>;
template class ResPath<double>;
template class MultiResUNet<float>;
template class MultiResUNet<double>;
template class CascadeGenerator<float>;
template class CascadeGenerator<double>;
template void save_generator<float>(const CascadeGenerator<float>&, const std::string&);
template void save_generator<double>(const CascadeGenerator<double>&, const std::string&);
template void load_generator_weights<float>(CascadeGenerator<float>&, const std::string&);
template void load_generator_weights<double>(CascadeGenerator<double>&, const std::string&);
template std::unique_ptr<CascadeGenerator<float>> load_generator<float>(const std::string&,
                                                                        uint64_t);
template std::unique_ptr<CascadeGenerator<double>> load_generator<double>(const std::string&,
                                                                          uint64_t);

}  // namespace ipaint::nn
