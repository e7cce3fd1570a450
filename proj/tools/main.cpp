#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ipaint/core/error.hpp"
#include "ipaint/core/sha256.hpp"
#include "ipaint/img/mask_gen.hpp"
#include "ipaint/img/phantom.hpp"
#include "ipaint/img/png_io.hpp"
#include "ipaint/metric/metrics.hpp"
#include "ipaint/nn/disc_spec.hpp"
#include "ipaint/train/trainer.hpp"
#include "render.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace ipaint;

namespace {

// Claims a fresh artifact directory and removes it again unless the command
// commits, so failed runs leave no partial outputs behind.
class ArtifactDir {
public:
    explicit ArtifactDir(const std::string& out) : dir_(out) {
        if (out.empty()) throw UsageError("--out is required");
        if (fs::exists(dir_)) {
            if (!fs::is_directory(dir_) || !fs::is_empty(dir_))
                throw DataError("output directory exists and is not empty: " + out);
        }
        fs::create_directories(dir_);
    }
    ~ArtifactDir() {
        if (!committed_) {
            std::error_code ec;
            fs::remove_all(dir_, ec);
        }
    }
    const fs::path& path() const { return dir_; }
    void commit() { committed_ = true; }

private:
    fs::path dir_;
    bool committed_ = false;
};

void write_text_file(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write " + tmp);
        out << text;
    }
    fs::rename(tmp, path);
}

void emit(bool json, const ordered_json& summary, const std::string& human) {
    if (json)
        std::printf("%s\n", summary.dump(2).c_str());
    else if (!human.empty())
        std::printf("%s\n", human.c_str());
}

img::Mask load_mask_png(const std::string& path) {
    const auto png = img::read_png_gray(path);
    const uint16_t half = png.bit_depth == 16 ? 32768 : 128;
    img::Mask m;
    m.bits = Tensor<uint8_t>({png.h, png.w});
    for (int64_t i = 0; i < m.bits.numel(); ++i)
        m.bits[i] = png.px[static_cast<size_t>(i)] >= half ? 1 : 0;
    m.area_fraction = img::mask_fraction(m.bits);
    m.kind = img::MaskKind::Arbitrary;
    return m;
}

struct GenPhantomsOpts {
    int64_t n = 0;
    int64_t size = 256;
    uint64_t seed = 1;
    std::string out;
};

ordered_json run_gen_phantoms(const GenPhantomsOpts& o) {
    if (o.n < 1) throw UsageError("--n must be at least 1");
    if (o.size < 64) throw UsageError("--size must be at least 64");
    ArtifactDir dir(o.out);

    ordered_json images = ordered_json::array();
    for (int64_t i = 0; i < o.n; ++i) {
        const uint64_t s = split_seed(o.seed, static_cast<uint64_t>(i));
        const auto slice = img::generate_phantom(s, o.size, o.size);
        char name[32];
        std::snprintf(name, sizeof name, "phantom_%04lld.png", static_cast<long long>(i));
        const std::string path = (dir.path() / name).string();
        img::save_slice_png(slice, path);
        images.push_back({{"file", name}, {"seed", s}, {"sha256", sha256_hex_of_file(path)}});
    }
    ordered_json manifest;
    manifest["command"] = "gen-phantoms";
    manifest["n"] = o.n;
    manifest["size"] = o.size;
    manifest["seed"] = o.seed;
    manifest["images"] = images;
    const std::string text = manifest.dump(2) + "\n";
    write_text_file((dir.path() / "manifest.json").string(), text);
    dir.commit();

    ordered_json summary;
    summary["command"] = "gen-phantoms";
    summary["out"] = o.out;
    summary["n"] = o.n;
    summary["size"] = o.size;
    summary["seed"] = o.seed;
    summary["manifest_sha256"] = sha256_hex(text.data(), text.size());
    summary["artifacts"] = {o.out};
    return summary;
}

struct GenMasksOpts {
    std::string mode = "arbitrary";
    int64_t n = 0;
    int64_t size = 256;
    double area_low = 0.0136;
    double area_high = 0.0546;
    uint64_t seed = 1;
    std::string role = "train";
    std::string out;
};

ordered_json run_gen_masks(const GenMasksOpts& o) {
    if (o.n < 1) throw UsageError("--n must be at least 1");
    if (o.area_high < o.area_low)
        throw UsageError("--area-high must not be below --area-low");
    const img::MaskKind kind = img::mask_kind_from_name(o.mode);
    const img::CorpusRole role = img::corpus_role_from_name(o.role);

    ArtifactDir dir(o.out);
    const auto corpus =
        img::build_mask_corpus(o.seed, o.n, o.size, o.size, o.area_low, o.area_high,
                               role, kind);
    img::save_mask_corpus(corpus, dir.path().string());
    dir.commit();

    double lo = 1.0, hi = 0.0;
    for (const auto& m : corpus.masks) {
        lo = std::min(lo, m.area_fraction);
        hi = std::max(hi, m.area_fraction);
    }
    ordered_json summary;
    summary["command"] = "gen-masks";
    summary["out"] = o.out;
    summary["mode"] = o.mode;
    summary["role"] = o.role;
    summary["n"] = o.n;
    summary["size"] = o.size;
    summary["seed"] = o.seed;
    summary["area_low"] = o.area_low;
    summary["area_high"] = o.area_high;
    summary["observed_area_min"] = lo;
    summary["observed_area_max"] = hi;
    summary["corpus_sha256"] = img::corpus_sha256(corpus);
    summary["artifacts"] = {o.out};
    return summary;
}

struct TrainOpts {
    std::string config;
    std::string resume;
};

ordered_json run_train(const TrainOpts& o) {
    const auto cfg = train::RunConfig::from_yaml_file(o.config);
    auto data = train::load_train_data(cfg);
    train::Trainer t(cfg, std::move(data));
    if (!o.resume.empty()) t.load_checkpoint(o.resume);

    const std::string out = train::resolve_out_path(cfg.out_dir);
    if (!out.empty()) {
        fs::create_directories(out);
        // the recorded config plus the seeds inside it reproduce the run
        write_text_file(out + "/config.yaml", cfg.to_yaml());
    }
    t.fit();

    ordered_json summary;
    summary["command"] = "train";
    summary["config"] = o.config;
    summary["config_sha256"] = cfg.sha256();
    summary["config_identity_sha256"] = cfg.identity_sha256();
    summary["seeds"] = {{"global", cfg.seeds.global},
                        {"data", cfg.seeds.data},
                        {"masks", cfg.seeds.masks}};
    summary["epochs_done"] = t.epochs_done();
    summary["steps"] = t.step();
    summary["best_val_ssim"] = t.best_val_ssim();
    ordered_json arts = ordered_json::array();
    if (!out.empty()) {
        arts.push_back(out + "/config.yaml");
        arts.push_back(out + "/" + train::Trainer::kStepLog);
        arts.push_back(out + "/" + train::Trainer::kLastCkpt);
        if (fs::exists(out + "/" + train::Trainer::kBestCkpt))
            arts.push_back(out + "/" + train::Trainer::kBestCkpt);
    }
    summary["artifacts"] = arts;
    return summary;
}

struct InferOpts {
    std::string ckpt, in, out;
    std::string mask;
    std::string save_input;
    bool composite = false;
};

ordered_json run_infer(const InferOpts& o) {
    if (o.composite && o.mask.empty())
        throw UsageError("--composite needs --mask");
    const auto g = train::load_checkpoint_generator(o.ckpt);
    auto slice = img::convert_range(img::load_slice_png(o.in), img::Range::Signed);

    img::Mask mask;
    if (!o.mask.empty()) {
        mask = load_mask_png(o.mask);
        if (mask.bits.shape() != slice.pixels.shape())
            throw DataError("mask shape does not match the input image");
        slice = img::ImageSlice::make(img::apply_mask(slice, mask, -1.0f).pixels,
                                      img::Range::Signed);
    }
    if (!o.save_input.empty()) img::save_slice_png(slice, o.save_input);

    const auto result =
        train::infer(*g, slice, o.composite ? &mask : nullptr);
    img::save_slice_png(result, o.out);

    ordered_json summary;
    summary["command"] = "infer";
    summary["ckpt"] = o.ckpt;
    summary["in"] = o.in;
    summary["out"] = o.out;
    summary["masked"] = !o.mask.empty();
    summary["composite"] = o.composite;
    summary["output_sha256"] = sha256_hex_of_file(o.out);
    ordered_json arts = ordered_json::array();
    arts.push_back(o.out);
    if (!o.save_input.empty()) arts.push_back(o.save_input);
    summary["artifacts"] = arts;
    return summary;
}

struct EvalOpts {
    std::string outputs, targets, report;
};

ordered_json run_eval(const EvalOpts& o) {
    const auto rep = metric::evaluate(o.outputs, o.targets);
    if (!o.report.empty()) {
        const fs::path parent = fs::path(o.report).parent_path();
        if (!parent.empty()) fs::create_directories(parent);
        write_text_file(o.report, rep.to_json() + "\n");
    }

    ordered_json summary;
    summary["command"] = "eval";
    summary["outputs"] = o.outputs;
    summary["targets"] = o.targets;
    summary["n_images"] = rep.n_images;
    summary["means"] = {{"mse", rep.means.mse},
                       {"psnr_db", rep.means.psnr_db},
                       {"ssim", rep.means.ssim},
                       {"uqi", rep.means.uqi}};
    summary["report_sha256"] = rep.sha256();
    summary["eval_config_sha256"] = rep.eval_config_sha256;
    summary["artifacts"] =
        o.report.empty() ? ordered_json::array() : ordered_json::array({o.report});
    summary["table"] = rep.to_table();
    return summary;
}

ordered_json run_rf_audit() {
    const int64_t patch = nn::receptive_field(nn::DiscriminatorSpec::patch());
    const int64_t global = nn::receptive_field(nn::DiscriminatorSpec::global());
    ordered_json summary;
    summary["command"] = "rf-audit";
    summary["patch"] = patch;
    summary["global"] = global;
    summary["patch_desk"] = nn::receptive_field(nn::DiscriminatorSpec::patch_desk());
    summary["global_desk"] = nn::receptive_field(nn::DiscriminatorSpec::global_desk());
    if (patch != 70 || global < 256)
        throw NumericError("receptive fields drifted: patch=" + std::to_string(patch) +
                           " global=" + std::to_string(global));
    return summary;
}

struct PlotOpts {
    std::string report;
    std::string inputs, outputs, targets;
    std::string out;
    int64_t rows = 8;
};

ordered_json run_plot(const PlotOpts& o) {
    std::ifstream in(o.report);
    if (!in) throw DataError("report not readable: " + o.report);
    ordered_json rep;
    try {
        rep = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("report is not valid JSON: " + std::string(e.what()));
    }
    if (!rep.contains("per_image") || rep["per_image"].empty())
        throw DataError("report has no per_image entries");

    std::vector<std::string> ids;
    std::map<std::string, std::vector<double>> series;
    for (const auto& row : rep["per_image"]) {
        ids.push_back(row.at("id").get<std::string>());
        for (const char* k : {"ssim", "psnr_db", "uqi", "mse"})
            series[k].push_back(row.at(k).get<double>());
    }

    ArtifactDir dir(o.out);
    ordered_json arts = ordered_json::array();

    {
        // one panel per metric, images along x in report order
        const int64_t pw = 480, ph = 96, margin = 10, label_h = 18;
        const int64_t panels = 4;
        tool::Canvas cv(margin + panels * (label_h + ph + margin), pw + 2 * margin, 16);
        int64_t y = margin;
        for (const char* k : {"ssim", "psnr_db", "uqi", "mse"}) {
            const auto& ys = series[k];
            const double lo = *std::min_element(ys.begin(), ys.end());
            const double hi = *std::max_element(ys.begin(), ys.end());
            std::string label(k);
            std::transform(label.begin(), label.end(), label.begin(), ::toupper);
            char range[80];
            std::snprintf(range, sizeof range, "  %.4g - %.4g", lo, hi);
            cv.text(y + 4, margin, label == "PSNR_DB" ? "PSNR" : label, 255, 2);
            cv.text(y + 8, margin + 12 * 6, range, 160, 1);
            draw_series(cv, y + label_h, margin, ph, pw, ys, lo, hi);
            y += label_h + ph + margin;
        }
        const std::string path = (dir.path() / "curves.png").string();
        cv.save(path);
        arts.push_back(path);
    }

    const bool montage = !o.inputs.empty() || !o.outputs.empty() || !o.targets.empty();
    if (montage) {
        if (o.inputs.empty() || o.outputs.empty() || o.targets.empty())
            throw UsageError("montage needs --inputs, --outputs and --targets together");
        const int64_t rows = std::min<int64_t>(o.rows, static_cast<int64_t>(ids.size()));
        if (rows < 1) throw UsageError("--rows must be at least 1");

        std::vector<std::array<Tensor<double>, 3>> cells;
        for (int64_t r = 0; r < rows; ++r) {
            const auto& id = ids[static_cast<size_t>(r)];
            cells.push_back({metric::load_metric_frame(o.inputs + "/" + id),
                             metric::load_metric_frame(o.outputs + "/" + id),
                             metric::load_metric_frame(o.targets + "/" + id)});
            for (const auto& f : cells.back())
                if (f.shape() != cells.front()[0].shape())
                    throw DataError("montage images differ in shape at " + id);
        }
        const int64_t ch = cells[0][0].dim(0), cw = cells[0][0].dim(1);
        const int64_t gap = 4, header = 24;
        tool::Canvas cv(header + rows * (ch + gap), gap + 3 * (cw + gap), 16);
        const char* titles[3] = {"Input", "Output", "Target"};
        for (int64_t c = 0; c < 3; ++c) {
            const int64_t cx = gap + c * (cw + gap);
            cv.text(5, cx + (cw - tool::text_width(titles[c], 2)) / 2, titles[c], 255, 2);
        }
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t c = 0; c < 3; ++c)
                cv.blit(header + r * (ch + gap), gap + c * (cw + gap),
                        cells[static_cast<size_t>(r)][static_cast<size_t>(c)]);
        const std::string path = (dir.path() / "montage.png").string();
        cv.save(path);
        arts.push_back(path);
    }
    dir.commit();

    ordered_json summary;
    summary["command"] = "plot";
    summary["report"] = o.report;
    summary["n_images"] = ids.size();
    summary["montage"] = montage;
    summary["artifacts"] = arts;
    return summary;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"2D inpainting workbench: data synthesis, training, evaluation"};
    app.require_subcommand(1);
    bool json = false;
    app.add_flag("--json", json, "print a machine-readable summary to stdout");

    GenPhantomsOpts gp;
    auto* cmd_gp = app.add_subcommand("gen-phantoms", "synthesize target slices");
    cmd_gp->add_option("--n", gp.n, "number of images")->required();
    cmd_gp->add_option("--size", gp.size, "square image size (min 64)");
    cmd_gp->add_option("--seed", gp.seed, "master seed");
    cmd_gp->add_option("--out", gp.out, "output directory")->required();

    GenMasksOpts gm;
    auto* cmd_gm = app.add_subcommand("gen-masks", "build a mask corpus");
    cmd_gm->add_option("--mode", gm.mode, "square|arbitrary");
    cmd_gm->add_option("--n", gm.n, "number of masks")->required();
    cmd_gm->add_option("--size", gm.size, "square mask size");
    cmd_gm->add_option("--area-low", gm.area_low, "minimum corrupted fraction");
    cmd_gm->add_option("--area-high", gm.area_high, "maximum corrupted fraction");
    cmd_gm->add_option("--seed", gm.seed, "master seed");
    cmd_gm->add_option("--role", gm.role, "train|validation");
    cmd_gm->add_option("--out", gm.out, "output directory")->required();

    TrainOpts tn;
    auto* cmd_tn = app.add_subcommand("train", "run the training protocol");
    cmd_tn->add_option("--config", tn.config, "run config YAML")->required();
    cmd_tn->add_option("--resume", tn.resume, "checkpoint to continue from");

    InferOpts inf;
    auto* cmd_inf = app.add_subcommand("infer", "inpaint one image");
    cmd_inf->add_option("--ckpt", inf.ckpt, "checkpoint file")->required();
    cmd_inf->add_option("--in", inf.in, "input slice PNG")->required();
    cmd_inf->add_option("--out", inf.out, "output PNG")->required();
    cmd_inf->add_option("--mask", inf.mask, "mask PNG to corrupt the input first");
    cmd_inf->add_option("--save-input", inf.save_input, "also write the corrupted input");
    cmd_inf->add_flag("--composite", inf.composite,
                      "paste known pixels back over the output");

    EvalOpts ev;
    auto* cmd_ev = app.add_subcommand("eval", "score outputs against targets");
    cmd_ev->add_option("--outputs", ev.outputs, "directory of results")->required();
    cmd_ev->add_option("--targets", ev.targets, "directory of ground truth")->required();
    cmd_ev->add_option("--report", ev.report, "write the JSON report here");

    auto* cmd_rf = app.add_subcommand("rf-audit", "verify discriminator receptive fields");

    PlotOpts pl;
    auto* cmd_pl = app.add_subcommand("plot", "render metric curves and montages");
    cmd_pl->add_option("--report", pl.report, "eval report JSON")->required();
    cmd_pl->add_option("--inputs", pl.inputs, "corrupted inputs directory");
    cmd_pl->add_option("--outputs", pl.outputs, "results directory");
    cmd_pl->add_option("--targets", pl.targets, "ground truth directory");
    cmd_pl->add_option("--out", pl.out, "output directory")->required();
    cmd_pl->add_option("--rows", pl.rows, "montage rows (default 8)");

    try {
        app.parse(argc, argv);
        ordered_json summary;
        std::string human;
        if (cmd_gp->parsed()) {
            summary = run_gen_phantoms(gp);
            human = "wrote " + std::to_string(gp.n) + " phantoms to " + gp.out +
                    "\nmanifest sha256 " + summary["manifest_sha256"].get<std::string>();
        } else if (cmd_gm->parsed()) {
            summary = run_gen_masks(gm);
            char buf[160];
            std::snprintf(buf, sizeof buf,
                          "wrote %lld %s masks to %s\narea fractions in [%.4f, %.4f]",
                          static_cast<long long>(gm.n), gm.mode.c_str(), gm.out.c_str(),
                          summary["observed_area_min"].get<double>(),
                          summary["observed_area_max"].get<double>());
            human = buf;
        } else if (cmd_tn->parsed()) {
            summary = run_train(tn);
            char buf[160];
            std::snprintf(buf, sizeof buf, "trained %lld steps (%lld epochs), best val SSIM %.4f",
                          summary["steps"].get<long long>(),
                          summary["epochs_done"].get<long long>(),
                          summary["best_val_ssim"].get<double>());
            human = buf;
        } else if (cmd_inf->parsed()) {
            summary = run_infer(inf);
            human = "wrote " + inf.out;
        } else if (cmd_ev->parsed()) {
            summary = run_eval(ev);
            human = summary["table"].get<std::string>();
            if (!ev.report.empty()) human += "report: " + ev.report;
        } else if (cmd_rf->parsed()) {
            summary = run_rf_audit();
            human = "patch=" + std::to_string(summary["patch"].get<int64_t>()) +
                    "\nglobal=" + std::to_string(summary["global"].get<int64_t>());
        } else if (cmd_pl->parsed()) {
            summary = run_plot(pl);
            human = "wrote plots to " + pl.out;
        }
        emit(json, summary, human);
        return 0;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 3;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
