#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ipaint/img/mask_gen.hpp"
#include "ipaint/loss/losses.hpp"
#include "ipaint/nn/discriminator.hpp"
#include "ipaint/nn/generator.hpp"
#include "ipaint/nn/vgg19.hpp"
#include "ipaint/train/run_config.hpp"

namespace ipaint::train {

// One optimizer step's loss components. Deliberately free of wall-clock
// fields: the determinism audit compares these records bit for bit.
struct LossRecord {
    int64_t epoch = 0;
    int64_t step = 0;  // 1-based, cumulative across resumes
    double d_global = 0.0;
    double d_patch = 0.0;
    double adv = 0.0;
    double style = 0.0;
    double percep = 0.0;
    double l1 = 0.0;
    double total = 0.0;

    std::string to_jsonl() const;  // one line, no trailing newline
};

struct ValRecord {
    int64_t epoch = 0;  // epochs completed when measured
    int64_t step = 0;
    double ssim = 0.0;
};

// In-memory run inputs. load_train_data() fills this from the config's
// paths; tests synthesize it directly.
struct TrainData {
    std::vector<img::ImageSlice> slices;  // signed range, equal shapes
    std::vector<img::Mask> train_masks;
    std::vector<img::Mask> val_masks;
};
TrainData load_train_data(const RunConfig& cfg);

struct Batch {
    Tensor<float> x;                // [n,1,h,w] targets, signed
    Tensor<float> y;                // [n,1,h,w] corrupted condition
    std::vector<size_t> slice_idx;  // provenance, keys the style-gram cache
};

// MSE restricted to corrupted pixels, in signed units. Training probe only;
// reported metrics stay full-image.
double masked_region_mse(const Tensor<float>& target, const Tensor<float>& output,
                         const Tensor<uint8_t>& bits);

class Trainer {
public:
    Trainer(RunConfig cfg, TrainData data);

    // One D update (detached candidate) followed by one G update.
    LossRecord train_step(const Batch& batch);
    // Assembles x/y pairs for the given slice indices, drawing each sample's
    // mask from the training corpus with `mask_rng`.
    Batch make_batch(const std::vector<size_t>& idx, Rng& mask_rng) const;

    // Full protocol: shuffled epochs, periodic validation, best/last
    // checkpoints, JSONL step log. Honors max_steps.
    void fit();

    // Mean full-image SSIM over slices paired with held-out masks (fixed
    // pairing, batch-1 forward passes).
    double validate();

    void save_checkpoint(const std::string& path) const;
    void load_checkpoint(const std::string& path);

    // Batch-1 generator pass on one corrupted slice.
    img::ImageSlice infer_one(const img::ImageSlice& corrupted) const;

    const RunConfig& config() const { return cfg_; }
    const TrainData& data() const { return data_; }
    const nn::CascadeGenerator<float>& generator() const { return *gen_; }
    const nn::Vgg19Extractor<float>* extractor() const { return vgg_.get(); }
    int64_t step() const { return step_; }
    int64_t epochs_done() const { return epoch_; }
    double best_val_ssim() const { return best_val_ssim_; }
    const std::vector<ValRecord>& val_history() const { return val_history_; }

    static constexpr const char* kLastCkpt = "last.ckpt";
    static constexpr const char* kBestCkpt = "best.ckpt";
    static constexpr const char* kStepLog = "train_log.jsonl";

private:
    ag::Var<float> style_term(const Batch& batch, ag::Var<float> xhat);
    void abort_non_finite(const LossRecord& rec);

    RunConfig cfg_;
    TrainData data_;
    std::unique_ptr<nn::CascadeGenerator<float>> gen_;
    std::unique_ptr<nn::Discriminator<float>> dg_, dp_;
    std::unique_ptr<nn::Vgg19Extractor<float>> vgg_;
    std::unique_ptr<nn::Adam<float>> adam_g_, adam_dg_, adam_dp_;

    int64_t step_ = 0;
    int64_t epoch_ = 0;  // completed epochs
    double best_val_ssim_ = -2.0;
    std::vector<ValRecord> val_history_;
    // per-slice target Grams for each extractor tap ([1,c,c] tensors)
    std::map<size_t, std::vector<Tensor<float>>> gram_cache_;
};

// Rebuild just the generator of a stored checkpoint (inference path).
std::unique_ptr<nn::CascadeGenerator<float>> load_checkpoint_generator(
    const std::string& path);

// Deterministic inference; when `composite_mask` is given, pixels outside
// the mask are pasted back from the input.
img::ImageSlice infer(const nn::CascadeGenerator<float>& g,
                      const img::ImageSlice& corrupted,
                      const img::Mask* composite_mask = nullptr);

}  // namespace ipaint::train
