#pragma once

#include <memory>
#include <string>
#include <utility>

#include "ipaint/nn/module.hpp"

namespace ipaint::nn {

struct GeneratorConfig {
    int64_t depth = 4;       // encoder levels
    int64_t base_width = 32; // level-0 nominal width; desk tests use 8
    int64_t stages = 2;      // 1 = single network ablation

    bool operator==(const GeneratorConfig&) const = default;
    void validate() const;
    std::string to_json() const;
    static GeneratorConfig from_json(const std::string& text);
};

// Branch widths of a block with nominal width u: floor(u/6), floor(u/3),
// remainder. Always sums to u.
struct MrSplit {
    int64_t w1 = 0, w2 = 0, w3 = 0;
    int64_t total() const { return w1 + w2 + w3; }
};
MrSplit mr_split(int64_t u);

// Three chained 3x3 convs (conv -> norm -> rectifier) whose outputs are
// concatenated, plus a normalized 1x1 residual of the block input; the sum
// passes a rectifier and a final normalization. Output channels = u.
template <typename T>
class MultiResBlock : public Module<T> {
public:
    MultiResBlock(int64_t in_ch, int64_t u, Rng& rng);
    ag::Var<T> forward(ag::Var<T> x) const;
    int64_t out_channels() const { return u_; }
    int64_t in_channels() const { return in_ch_; }

private:
    int64_t in_ch_, u_;
    std::unique_ptr<Conv2d<T>> c1_, c2_, c3_, shortcut_;
    std::unique_ptr<BatchNorm2d<T>> n1_, n2_, n3_, nsc_, ncat_, nout_;
};

// Channel-preserving skip-connection filter: `length` units of
// rectifier(conv3x3(x) + conv1x1(x)). Units carry no normalization so an
// identity-initialized unit passes nonnegative input through unchanged.
template <typename T>
class ResPath : public Module<T> {
public:
    ResPath(int64_t channels, int64_t length, Rng& rng);
    ag::Var<T> forward(ag::Var<T> x) const;
    int64_t length() const { return static_cast<int64_t>(units_.size()); }

    struct Unit : Module<T> {
        Unit(int64_t channels, Rng& rng);
        std::unique_ptr<Conv2d<T>> main, res;
    };

private:
    std::vector<std::unique_ptr<Unit>> units_;
};

// Single encoder/decoder network: blocks of doubling width down to a bridge,
// 2x2 max-pool descent, transposed-conv ascent with ResPath-filtered skip
// concatenations, final 1x1 conv bounded by tanh.
template <typename T>
class MultiResUNet : public Module<T> {
public:
    MultiResUNet(const GeneratorConfig& cfg, Rng& rng);
    // [n,1,h,w] signed -> [n,1,h,w] in [-1,1]; h,w divisible by 2^depth
    ag::Var<T> forward(ag::Var<T> y) const;

private:
    int64_t depth_;
    std::vector<std::unique_ptr<MultiResBlock<T>>> enc_;
    std::vector<std::unique_ptr<ResPath<T>>> skips_;
    std::unique_ptr<MultiResBlock<T>> bridge_;
    std::vector<std::unique_ptr<ConvTranspose2d<T>>> ups_;   // deepest first
    std::vector<std::unique_ptr<MultiResBlock<T>>> dec_;     // deepest first
    std::unique_ptr<Conv2d<T>> head_;
};

// Two-stage cascade: stage 1 maps the corrupted input to a first estimate,
// stage 2 refines that estimate alone (the input is not re-concatenated).
template <typename T>
class CascadeGenerator : public Module<T> {
public:
    CascadeGenerator(const GeneratorConfig& cfg, uint64_t seed);
    // returns (final, intermediate); with stages == 1 both are the same node
    std::pair<ag::Var<T>, ag::Var<T>> forward(ag::Var<T> y) const;
    const GeneratorConfig& config() const { return cfg_; }

private:
    GeneratorConfig cfg_;
    std::vector<std::unique_ptr<MultiResUNet<T>>> stages_;
};

// Weights container at `path` plus a `path + ".json"` sidecar holding the
// config. Loading into an existing model fails loudly on config mismatch.
template <typename T>
void save_generator(const CascadeGenerator<T>& g, const std::string& path);
template <typename T>
void load_generator_weights(CascadeGenerator<T>& g, const std::string& path);
template <typename T>
std::unique_ptr<CascadeGenerator<T>> load_generator(const std::string& path,
                                                    uint64_t seed = 0);

}  // namespace ipaint::nn
