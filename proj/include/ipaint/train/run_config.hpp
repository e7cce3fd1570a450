#pragma once

#include <cstdint>
#include <string>

#include "ipaint/img/image.hpp"
#include "ipaint/loss/losses.hpp"
#include "ipaint/nn/generator.hpp"

namespace ipaint::train {

struct Seeds {
    uint64_t global = 1;  // weight initialization
    uint64_t data = 2;    // epoch shuffling
    uint64_t masks = 3;   // slice-to-mask pairing
};

// One run, one file. Parsing is strict: unknown keys are usage errors so a
// typo cannot silently fall back to a default.
struct RunConfig {
    int64_t epochs = 100;
    int64_t batch_size = 4;
    // stop after this many optimizer steps, 0 = run all epochs
    int64_t max_steps = 0;
    int64_t val_every = 1;  // epochs between validation passes
    bool desk_scale = false;

    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;

    loss::LossWeights weights;
    img::MaskKind mask_mode = img::MaskKind::Arbitrary;
    Seeds seeds;
    nn::GeneratorConfig model;

    std::string slices_dir;
    std::string train_masks_dir;
    std::string val_masks_dir;
    std::string vgg_weights;
    std::string out_dir;

    void validate() const;

    // Canonical emission: fixed key order and float formatting, so the hash
    // is stable across save/load cycles.
    std::string to_yaml() const;
    static RunConfig from_yaml(const std::string& text);
    static RunConfig from_yaml_file(const std::string& path);

    std::string sha256() const;

    // Hash of the experiment identity only: stop controls (max_steps) and
    // filesystem paths are zeroed out first, so a crash-resume matches even
    // when the artifact directory moved. Checkpoint loading checks this one.
    std::string identity_sha256() const;
};

// $IPAINT_OUT_ROOT prefixes relative artifact paths when set.
std::string resolve_out_path(const std::string& path);

}  // namespace ipaint::train
