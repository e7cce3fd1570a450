#include "ipaint/img/mask_gen.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ipaint/core/error.hpp"
#include "ipaint/core/rng.hpp"
#include "ipaint/core/sha256.hpp"
#include "ipaint/img/png_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace ipaint::img {

Mask generate_square_mask(uint64_t seed, int64_t h, int64_t w, int64_t block) {
    if (block <= 0 || block > h || block > w)
        throw UsageError("square mask block " + std::to_string(block) +
                         " does not fit a " + std::to_string(h) + "x" +
                         std::to_string(w) + " image");
    Rng rng(seed);
    const int64_t top = rng.uniform_int(0, h - block);
    const int64_t left = rng.uniform_int(0, w - block);

    Mask m;
    m.bits = Tensor<uint8_t>({h, w});
    for (int64_t y = top; y < top + block; ++y)
        for (int64_t x = left; x < left + block; ++x) m.bits[y * w + x] = 1;
    m.area_fraction = static_cast<double>(block * block) / static_cast<double>(h * w);
    m.seed = seed;
    m.kind = MaskKind::Square;
    return m;
}

namespace {

void stamp_disk(Tensor<uint8_t>& bits, int64_t h, int64_t w, double cy, double cx,
                double r) {
    const int64_t y0 = std::max<int64_t>(0, static_cast<int64_t>(std::ceil(cy - r)));
    const int64_t y1 = std::min<int64_t>(h - 1, static_cast<int64_t>(std::floor(cy + r)));
    const int64_t x0 = std::max<int64_t>(0, static_cast<int64_t>(std::ceil(cx - r)));
    const int64_t x1 = std::min<int64_t>(w - 1, static_cast<int64_t>(std::floor(cx + r)));
    for (int64_t y = y0; y <= y1; ++y)
        for (int64_t x = x0; x <= x1; ++x)
            if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r) bits[y * w + x] = 1;
}

double brush_walk(Rng& rng, Tensor<uint8_t>& bits, int64_t h, int64_t w,
                  double geom_scale, double radius_scale) {
    bits.fill(0);
    const int64_t strokes = rng.uniform_int(1, 4);
    for (int64_t s = 0; s < strokes; ++s) {
        double y = rng.uniform(0.125 * h, 0.875 * h);
        double x = rng.uniform(0.125 * w, 0.875 * w);
        const double r = std::max(1.0, rng.uniform(6.0, 14.0) * geom_scale * radius_scale);
        const int64_t steps = rng.uniform_int(10, 40);
        double heading = rng.uniform(0.0, 2.0 * M_PI);
        stamp_disk(bits, h, w, y, x, r);
        for (int64_t k = 0; k < steps; ++k) {
            heading += rng.uniform(-M_PI / 4.0, M_PI / 4.0);
            const double len = rng.uniform(4.0, 12.0) * geom_scale;
            y += len * std::sin(heading);
            x += len * std::cos(heading);
            stamp_disk(bits, h, w, y, x, r);
        }
    }
    return mask_fraction(bits);
}

}  // namespace

Mask generate_arbitrary_mask(uint64_t seed, int64_t h, int64_t w, double area_lo,
                             double area_hi) {
    if (!(0.0 < area_lo && area_lo < area_hi && area_hi < 0.5))
        throw UsageError("mask area range must satisfy 0 < lo < hi < 0.5");
    if (h < 32 || w < 32) throw UsageError("arbitrary masks need at least a 32x32 image");

    // Brush geometry is specified at 256x256; scale for other frame sizes.
    const double geom_scale = static_cast<double>(std::min(h, w)) / 256.0;

    Rng rng(seed);
    Mask m;
    m.bits = Tensor<uint8_t>({h, w});
    m.seed = seed;
    m.kind = MaskKind::Arbitrary;

    double frac_sum = 0.0;
    for (int attempt = 0; attempt < 100; ++attempt) {
        const double frac = brush_walk(rng, m.bits, h, w, geom_scale, 1.0);
        if (frac >= area_lo && frac <= area_hi) {
            m.area_fraction = frac;
            return m;
        }
        frac_sum += frac;
    }

    // One radius adaptation: aim the mean attempt area at the range midpoint
    // (area scales roughly with radius squared), then try again.
    const double mean_frac = std::max(1e-6, frac_sum / 100.0);
    const double target = 0.5 * (area_lo + area_hi);
    const double adapt = std::clamp(std::sqrt(target / mean_frac), 0.25, 4.0);
    for (int attempt = 0; attempt < 100; ++attempt) {
        const double frac = brush_walk(rng, m.bits, h, w, geom_scale, adapt);
        if (frac >= area_lo && frac <= area_hi) {
            m.area_fraction = frac;
            return m;
        }
    }
    throw DataError("arbitrary mask generation failed for seed " + std::to_string(seed) +
                    ": area stayed outside [" + std::to_string(area_lo) + ", " +
                    std::to_string(area_hi) + "] after radius adaptation");
}

const char* corpus_role_name(CorpusRole r) {
    return r == CorpusRole::Train ? "train" : "validation";
}

CorpusRole corpus_role_from_name(const std::string& name) {
    if (name == "train") return CorpusRole::Train;
    if (name == "validation") return CorpusRole::Validation;
    throw DataError("unknown corpus role '" + name + "'");
}

MaskCorpus build_mask_corpus(uint64_t master_seed, int64_t n, int64_t h, int64_t w,
                             double area_lo, double area_hi, CorpusRole role,
                             MaskKind kind) {
    if (n < 1) throw UsageError("mask corpus needs at least one mask");
    MaskCorpus c;
    c.role = role;
    c.area_lo = area_lo;
    c.area_hi = area_hi;
    c.master_seed = master_seed;
    c.h = h;
    c.w = w;
    c.kind = kind;
    c.masks.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        const uint64_t s = split_seed(master_seed, static_cast<uint64_t>(i));
        c.masks.push_back(kind == MaskKind::Square
                              ? generate_square_mask(s, h, w)
                              : generate_arbitrary_mask(s, h, w, area_lo, area_hi));
    }
    return c;
}

std::string corpus_sha256(const MaskCorpus& corpus) {
    Sha256 sha;
    for (const Mask& m : corpus.masks)
        sha.update(m.bits.data(), static_cast<size_t>(m.bits.numel()));
    return sha.hex();
}

void save_mask_corpus(const MaskCorpus& corpus, const std::string& dir) {
    fs::create_directories(dir);
    json manifest;
    manifest["master_seed"] = corpus.master_seed;
    manifest["role"] = corpus_role_name(corpus.role);
    manifest["shape_kind"] = mask_kind_name(corpus.kind);
    manifest["area_range"] = {corpus.area_lo, corpus.area_hi};
    manifest["height"] = corpus.h;
    manifest["width"] = corpus.w;
    manifest["masks"] = json::array();
    for (size_t i = 0; i < corpus.masks.size(); ++i) {
        const Mask& m = corpus.masks[i];
        char name[32];
        std::snprintf(name, sizeof(name), "mask_%04zu.png", i);
        Tensor<uint8_t> px(m.bits.shape());
        for (int64_t j = 0; j < px.numel(); ++j) px[j] = m.bits[j] ? 255 : 0;
        write_png_gray8((fs::path(dir) / name).string(), m.h(), m.w(), px.data());
        manifest["masks"].push_back(
            {{"file", name}, {"seed", m.seed}, {"area_fraction", m.area_fraction}});
    }
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw DataError("cannot write corpus manifest in " + dir);
    out << manifest.dump(2) << "\n";
}

MaskCorpus load_mask_corpus(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw DataError("no corpus manifest in " + dir);
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw DataError("bad corpus manifest in " + dir + ": " + e.what());
    }

    MaskCorpus c;
    try {
        c.master_seed = manifest.at("master_seed").get<uint64_t>();
        c.role = corpus_role_from_name(manifest.at("role").get<std::string>());
        c.kind = mask_kind_from_name(manifest.at("shape_kind").get<std::string>());
        c.area_lo = manifest.at("area_range").at(0).get<double>();
        c.area_hi = manifest.at("area_range").at(1).get<double>();
        c.h = manifest.at("height").get<int64_t>();
        c.w = manifest.at("width").get<int64_t>();
        for (const json& e : manifest.at("masks")) {
            const std::string file = e.at("file").get<std::string>();
            GrayPng png = read_png_gray((fs::path(dir) / file).string());
            if (png.bit_depth != 8)
                throw DataError("mask " + file + " is not an 8-bit PNG");
            if (png.h != c.h || png.w != c.w)
                throw DataError("mask " + file + " size disagrees with manifest");
            Mask m;
            m.bits = Tensor<uint8_t>({png.h, png.w});
            for (int64_t j = 0; j < m.bits.numel(); ++j) {
                if (png.px[static_cast<size_t>(j)] != 0 &&
                    png.px[static_cast<size_t>(j)] != 255)
                    throw DataError("mask " + file + " has a non-binary pixel");
                m.bits[j] = png.px[static_cast<size_t>(j)] ? 1 : 0;
            }
            m.seed = e.at("seed").get<uint64_t>();
            m.area_fraction = e.at("area_fraction").get<double>();
            m.kind = c.kind;
            if (mask_fraction(m.bits) != m.area_fraction)
                throw DataError("mask " + file +
                                " area_fraction disagrees with its bits");
            c.masks.push_back(std::move(m));
        }
    } catch (const json::exception& e) {
        throw DataError("bad corpus manifest in " + dir + ": " + e.what());
    }
    return c;
}

}  // namespace ipaint::img
