#include "ipaint/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ipaint/core/error.hpp"
#include "ipaint/img/png_io.hpp"
#include "ipaint/metric/metrics.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace ipaint::train {

std::string LossRecord::to_jsonl() const {
    ordered_json j;
    j["epoch"] = epoch;
    j["step"] = step;
    j["d_global"] = d_global;
    j["d_patch"] = d_patch;
    j["adv"] = adv;
    j["style"] = style;
    j["percep"] = percep;
    j["l1"] = l1;
    j["total"] = total;
    return j.dump();
}

TrainData load_train_data(const RunConfig& cfg) {
    if (cfg.slices_dir.empty()) throw UsageError("config: paths.slices is required");
    if (!fs::is_directory(cfg.slices_dir))
        throw DataError("slice directory not found: " + cfg.slices_dir);
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(cfg.slices_dir))
        if (e.is_regular_file() && e.path().extension() == ".png")
            names.push_back(e.path().string());
    std::sort(names.begin(), names.end());
    TrainData d;
    for (const auto& p : names)
        d.slices.push_back(img::convert_range(img::load_slice_png(p), img::Range::Signed));
    if (d.slices.empty()) throw DataError("no slice PNGs in " + cfg.slices_dir);
    if (!cfg.train_masks_dir.empty())
        d.train_masks = img::load_mask_corpus(cfg.train_masks_dir).masks;
    if (!cfg.val_masks_dir.empty())
        d.val_masks = img::load_mask_corpus(cfg.val_masks_dir).masks;
    return d;
}

double masked_region_mse(const Tensor<float>& target, const Tensor<float>& output,
                         const Tensor<uint8_t>& bits) {
    if (!target.same_shape(output) || target.rank() != 2 ||
        target.shape() != bits.shape())
        throw DataError("masked_region_mse: shape mismatch");
    double acc = 0.0;
    int64_t count = 0;
    for (int64_t i = 0; i < bits.numel(); ++i)
        if (bits[i]) {
            const double diff = static_cast<double>(target[i]) - output[i];
            acc += diff * diff;
            ++count;
        }
    if (count == 0) throw DataError("masked_region_mse: empty mask");
    return acc / static_cast<double>(count);
}

Trainer::Trainer(RunConfig cfg, TrainData data)
    : cfg_(std::move(cfg)), data_(std::move(data)) {
    cfg_.validate();
    if (!data_.slices.empty()) {
        const auto& shape = data_.slices.front().pixels.shape();
        for (const auto& s : data_.slices) {
            if (s.range != img::Range::Signed)
                throw DataError("training slices must use the signed convention");
            if (s.pixels.shape() != shape) throw DataError("training slices differ in shape");
        }
        for (const auto* corpus : {&data_.train_masks, &data_.val_masks})
            for (const auto& m : *corpus)
                if (m.bits.shape() != shape)
                    throw DataError("mask shape does not match the slices");
    }

    gen_ = std::make_unique<nn::CascadeGenerator<float>>(cfg_.model,
                                                         split_seed(cfg_.seeds.global, 0));
    const auto gspec = cfg_.desk_scale ? nn::DiscriminatorSpec::global_desk()
                                       : nn::DiscriminatorSpec::global();
    const auto pspec = cfg_.desk_scale ? nn::DiscriminatorSpec::patch_desk()
                                       : nn::DiscriminatorSpec::patch();
    dg_ = std::make_unique<nn::Discriminator<float>>(gspec, split_seed(cfg_.seeds.global, 1));
    dp_ = std::make_unique<nn::Discriminator<float>>(pspec, split_seed(cfg_.seeds.global, 2));
    if (cfg_.weights.style > 0.0) {
        if (cfg_.vgg_weights.empty())
            throw UsageError(
                "loss.style > 0 needs paths.vgg_weights (or set loss.style: 0)");
        vgg_ = std::make_unique<nn::Vgg19Extractor<float>>(cfg_.vgg_weights);
    }
    const auto lr = static_cast<float>(cfg_.lr);
    const auto b1 = static_cast<float>(cfg_.beta1), b2 = static_cast<float>(cfg_.beta2);
    adam_g_ = std::make_unique<nn::Adam<float>>(gen_->params(), lr, b1, b2);
    adam_dg_ = std::make_unique<nn::Adam<float>>(dg_->params(), lr, b1, b2);
    adam_dp_ = std::make_unique<nn::Adam<float>>(dp_->params(), lr, b1, b2);
}

Batch Trainer::make_batch(const std::vector<size_t>& idx, Rng& mask_rng) const {
    if (idx.empty()) throw UsageError("make_batch: empty index list");
    if (data_.train_masks.empty()) throw DataError("make_batch: no training masks");
    const int64_t n = static_cast<int64_t>(idx.size());
    const int64_t h = data_.slices.at(idx[0]).h(), w = data_.slices.at(idx[0]).w();
    Batch b;
    b.x = Tensor<float>({n, 1, h, w});
    b.y = Tensor<float>({n, 1, h, w});
    for (int64_t s = 0; s < n; ++s) {
        const auto& slice = data_.slices.at(idx[static_cast<size_t>(s)]);
        const auto& mask = data_.train_masks[static_cast<size_t>(
            mask_rng.uniform_int(0, static_cast<int64_t>(data_.train_masks.size()) - 1))];
        const auto corrupted = img::apply_mask(slice, mask, -1.0f);
        std::memcpy(b.x.data() + s * h * w, slice.pixels.data(),
                    sizeof(float) * static_cast<size_t>(h * w));
        std::memcpy(b.y.data() + s * h * w, corrupted.pixels.data(),
                    sizeof(float) * static_cast<size_t>(h * w));
        b.slice_idx.push_back(idx[static_cast<size_t>(s)]);
    }
    return b;
}

ag::Var<float> Trainer::style_term(const Batch& batch, ag::Var<float> xhat) {
    const int64_t n = batch.x.dim(0), h = batch.x.dim(2), w = batch.x.dim(3);
    for (int64_t s = 0; s < n; ++s) {
        const size_t key = batch.slice_idx[static_cast<size_t>(s)];
        if (gram_cache_.count(key)) continue;
        Tensor<float> one({1, 1, h, w});
        std::memcpy(one.data(), batch.x.data() + s * h * w,
                    sizeof(float) * static_cast<size_t>(h * w));
        const auto taps = vgg_->extract(ag::constant(std::move(one)));
        std::vector<Tensor<float>> grams;
        for (const auto& t : taps.taps) grams.push_back(ag::gram_op(t)->value);
        gram_cache_.emplace(key, std::move(grams));
    }
    auto fake_taps = vgg_->extract(std::move(xhat));
    std::vector<Tensor<float>> targets;
    for (size_t tap = 0; tap < fake_taps.size(); ++tap) {
        const auto& g0 = gram_cache_.at(batch.slice_idx[0])[tap];
        const int64_t c = g0.dim(1);
        Tensor<float> tg({n, c, c});
        for (int64_t s = 0; s < n; ++s)
            std::memcpy(tg.data() + s * c * c,
                        gram_cache_.at(batch.slice_idx[static_cast<size_t>(s)])[tap].data(),
                        sizeof(float) * static_cast<size_t>(c * c));
        targets.push_back(std::move(tg));
    }
    return loss::style_loss_vs_grams(targets, fake_taps, cfg_.weights.style_tap);
}

LossRecord Trainer::train_step(const Batch& batch) {
    if (batch.x.rank() != 4 || !batch.x.same_shape(batch.y) || batch.x.dim(1) != 1)
        throw DataError("train_step: batch must be matching [n,1,h,w] pairs");
    if (batch.slice_idx.size() != static_cast<size_t>(batch.x.dim(0)))
        throw DataError("train_step: slice_idx does not match the batch");

    adam_g_->zero_grad();
    adam_dg_->zero_grad();
    adam_dp_->zero_grad();

    auto x = ag::constant(batch.x);
    auto y = ag::constant(batch.y);
    auto [xhat, xhat_mid] = gen_->forward(y);

    // discriminator update on the detached candidate
    auto xhat_d = ag::detach(xhat);
    auto ld_g = loss::adversarial_loss_D(dg_->forward(x, y), dg_->forward(xhat_d, y));
    auto ld_p = loss::adversarial_loss_D(dp_->forward(x, y), dp_->forward(xhat_d, y));
    auto d_total = ag::weighted_sum<float>({{1.0f, ld_g}, {1.0f, ld_p}});
    ag::backward(d_total);
    adam_dg_->step();
    adam_dp_->step();

    // generator update against the freshly stepped critics
    auto zero = ag::constant(Tensor<float>::scalar(0.0f));
    const bool want_adv = cfg_.weights.adv > 0.0;
    const bool want_percep = cfg_.weights.percep > 0.0;
    nn::FeatureStack<float> taps_fake, taps_real;
    ag::Var<float> adv = zero, percep = zero;
    if (want_adv || want_percep) {
        auto fp = dp_->forward(xhat, y, &taps_fake);
        if (want_adv) adv = loss::adversarial_loss_G(dg_->forward(xhat, y), fp);
    }
    if (want_percep) {
        (void)dp_->forward(x, y, &taps_real);
        percep = loss::perceptual_loss(taps_real, taps_fake, cfg_.weights.percep_tap);
    }
    auto style = vgg_ ? style_term(batch, xhat) : zero;
    auto l1 = loss::pixel_l1(x, xhat, xhat_mid);
    auto total = loss::total_generator_loss(adv, style, percep, l1, cfg_.weights);
    ag::backward(total);
    adam_g_->step();

    LossRecord rec;
    rec.epoch = epoch_;
    rec.step = step_ + 1;
    rec.d_global = ld_g->value[0];
    rec.d_patch = ld_p->value[0];
    rec.adv = adv->value[0];
    rec.style = style->value[0];
    rec.percep = percep->value[0];
    rec.l1 = l1->value[0];
    rec.total = total->value[0];
    const bool finite = std::isfinite(rec.d_global) && std::isfinite(rec.d_patch) &&
                        std::isfinite(rec.adv) && std::isfinite(rec.style) &&
                        std::isfinite(rec.percep) && std::isfinite(rec.l1) &&
                        std::isfinite(rec.total);
    if (!finite) abort_non_finite(rec);
    ++step_;
    return rec;
}

void Trainer::abort_non_finite(const LossRecord& rec) {
    std::string where = "epoch " + std::to_string(rec.epoch) + " step " +
                        std::to_string(rec.step);
    const std::string out = resolve_out_path(cfg_.out_dir);
    if (!out.empty()) {
        try {
            fs::create_directories(out);
            std::ofstream diag(out + "/abort_step" + std::to_string(rec.step) + ".json");
            diag << rec.to_jsonl() << "\n";
            save_checkpoint(out + "/abort.ckpt");
            where += " (diagnostics in " + out + ")";
        } catch (const std::exception&) {
            // the abort itself must still surface
        }
    }
    throw NumericError("non-finite loss at " + where + ": " + rec.to_jsonl());
}

double Trainer::validate() {
    if (data_.slices.empty()) throw DataError("validate: no slices");
    if (data_.val_masks.empty()) throw DataError("validate: no validation masks");
    double acc = 0.0;
    for (size_t i = 0; i < data_.slices.size(); ++i) {
        const auto& mask = data_.val_masks[i % data_.val_masks.size()];
        const auto corrupted = img::apply_mask(data_.slices[i], mask, -1.0f);
        const auto out =
            infer_one(img::ImageSlice::make(corrupted.pixels, img::Range::Signed));
        acc += metric::ssim(metric::metric_frame(out),
                            metric::metric_frame(data_.slices[i]));
    }
    return acc / static_cast<double>(data_.slices.size());
}

img::ImageSlice Trainer::infer_one(const img::ImageSlice& corrupted) const {
    return infer(*gen_, corrupted);
}

void Trainer::fit() {
    if (data_.slices.empty()) throw DataError("fit: no training slices");
    if (data_.train_masks.empty()) throw DataError("fit: no training masks");
    if (data_.val_masks.empty()) throw DataError("fit: no validation masks");

    const std::string out = resolve_out_path(cfg_.out_dir);
    std::ofstream log;
    if (!out.empty()) {
        fs::create_directories(out);
        log.open(out + "/" + kStepLog, std::ios::app);
        if (!log) throw DataError("fit: cannot open step log in " + out);
    }

    const size_t n = data_.slices.size();
    bool stopped = cfg_.max_steps > 0 && step_ >= cfg_.max_steps;
    while (epoch_ < cfg_.epochs && !stopped) {
        // per-epoch seed derivation: resuming at an epoch boundary replays
        // the exact shuffles and mask pairings of an uninterrupted run
        Rng shuffle_rng(split_seed(cfg_.seeds.data, static_cast<uint64_t>(epoch_)));
        Rng mask_rng(split_seed(cfg_.seeds.masks, static_cast<uint64_t>(epoch_)));
        std::vector<size_t> order(n);
        for (size_t i = 0; i < n; ++i) order[i] = i;
        for (size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[static_cast<size_t>(
                                        shuffle_rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);

        size_t beg = 0;
        for (; beg < n && !stopped; beg += static_cast<size_t>(cfg_.batch_size)) {
            const size_t end = std::min(n, beg + static_cast<size_t>(cfg_.batch_size));
            const std::vector<size_t> idx(order.begin() + static_cast<int64_t>(beg),
                                          order.begin() + static_cast<int64_t>(end));
            const LossRecord rec = train_step(make_batch(idx, mask_rng));
            if (log.is_open()) log << rec.to_jsonl() << "\n" << std::flush;
            if (cfg_.max_steps > 0 && step_ >= cfg_.max_steps) stopped = true;
        }
        // the step cap can land exactly on the last batch, in which case the
        // epoch is complete and a later resume must not replay it
        if (beg >= n) ++epoch_;

        if (stopped || epoch_ == cfg_.epochs || epoch_ % cfg_.val_every == 0) {
            const double v = validate();
            val_history_.push_back({epoch_, step_, v});
            if (v > best_val_ssim_) {
                best_val_ssim_ = v;
                if (!out.empty()) save_checkpoint(out + "/" + kBestCkpt);
            }
            if (!out.empty()) save_checkpoint(out + "/" + kLastCkpt);
        }
    }
}

namespace {

ordered_json history_json(const std::vector<ValRecord>& h) {
    ordered_json arr = ordered_json::array();
    for (const auto& v : h)
        arr.push_back({{"epoch", v.epoch}, {"step", v.step}, {"ssim", v.ssim}});
    return arr;
}

}  // namespace

void Trainer::save_checkpoint(const std::string& path) const {
    io::Container c;
    gen_->save_params(c, "g");
    dg_->save_params(c, "dg");
    dp_->save_params(c, "dp");
    adam_g_->save_state(c, "adam_g");
    adam_dg_->save_state(c, "adam_dg");
    adam_dp_->save_state(c, "adam_dp");

    ordered_json meta;
    meta["epoch"] = epoch_;
    meta["step"] = step_;
    meta["best_val_ssim"] = best_val_ssim_;
    meta["config_sha256"] = cfg_.sha256();
    meta["config_identity_sha256"] = cfg_.identity_sha256();
    meta["model"] = ordered_json::parse(cfg_.model.to_json());
    meta["val_history"] = history_json(val_history_);
    if (vgg_) {
        meta["extractor_weights_sha256"] = vgg_->weights_sha256();
        // recomputed from the live parameters: proves the extractor stayed frozen
        meta["extractor_params_sha256"] = vgg_->params_sha256();
    }
    c.set_meta(meta.dump());

    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    c.save(path);

    ordered_json side = meta;
    side["config_yaml"] = cfg_.to_yaml();
    std::ofstream sj(path + ".json");
    if (!sj) throw DataError("cannot write checkpoint sidecar for " + path);
    sj << side.dump(2) << "\n";
}

void Trainer::load_checkpoint(const std::string& path) {
    const io::Container c = io::Container::load(path);
    ordered_json meta;
    try {
        meta = ordered_json::parse(c.meta());
    } catch (const nlohmann::json::exception&) {
        throw DataError("checkpoint meta is not valid JSON: " + path);
    }
    if (meta.value("config_identity_sha256", std::string()) != cfg_.identity_sha256())
        throw DataError("checkpoint was produced by a different config; refusing to resume");
    gen_->load_params(c, "g");
    dg_->load_params(c, "dg");
    dp_->load_params(c, "dp");
    adam_g_->load_state(c, "adam_g");
    adam_dg_->load_state(c, "adam_dg");
    adam_dp_->load_state(c, "adam_dp");
    epoch_ = meta.at("epoch").get<int64_t>();
    step_ = meta.at("step").get<int64_t>();
    best_val_ssim_ = meta.at("best_val_ssim").get<double>();
    val_history_.clear();
    for (const auto& v : meta.at("val_history"))
        val_history_.push_back({v.at("epoch").get<int64_t>(), v.at("step").get<int64_t>(),
                                v.at("ssim").get<double>()});
}

std::unique_ptr<nn::CascadeGenerator<float>> load_checkpoint_generator(
    const std::string& path) {
    const io::Container c = io::Container::load(path);
    ordered_json meta;
    try {
        meta = ordered_json::parse(c.meta());
    } catch (const nlohmann::json::exception&) {
        throw DataError("checkpoint meta is not valid JSON: " + path);
    }
    if (!meta.contains("model"))
        throw DataError("checkpoint carries no model config: " + path);
    const auto cfg = nn::GeneratorConfig::from_json(meta.at("model").dump());
    auto g = std::make_unique<nn::CascadeGenerator<float>>(cfg, 0);
    g->load_params(c, "g");
    return g;
}

img::ImageSlice infer(const nn::CascadeGenerator<float>& g,
                      const img::ImageSlice& corrupted, const img::Mask* composite_mask) {
    if (corrupted.range != img::Range::Signed)
        throw DataError("inference expects a signed-range input slice");
    const int64_t h = corrupted.h(), w = corrupted.w();
    Tensor<float> in({1, 1, h, w});
    std::memcpy(in.data(), corrupted.pixels.data(), sizeof(float) * static_cast<size_t>(h * w));
    auto [xhat, mid] = g.forward(ag::constant(std::move(in)));
    (void)mid;
    Tensor<float> px({h, w});
    std::memcpy(px.data(), xhat->value.data(), sizeof(float) * static_cast<size_t>(h * w));
    if (composite_mask != nullptr) {
        if (composite_mask->bits.shape() != px.shape())
            throw DataError("composite mask shape does not match the image");
        for (int64_t i = 0; i < px.numel(); ++i)
            if (!composite_mask->bits[i]) px[i] = corrupted.pixels[i];
    }
    return img::ImageSlice::make(std::move(px), img::Range::Signed);
}

}  // namespace ipaint::train
