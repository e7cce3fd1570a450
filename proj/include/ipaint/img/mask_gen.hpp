#pragma once

#include <string>
#include <vector>

#include "ipaint/img/image.hpp"

namespace ipaint::img {

// Uniformly placed axis-aligned block of ones, fully inside the image.
Mask generate_square_mask(uint64_t seed, int64_t h, int64_t w, int64_t block = 64);

// Union of 1-4 brush strokes (random walks of stamped disks), rejection
// resampled until the corrupted fraction lands in [area_lo, area_hi]. After
// 100 failed attempts the brush radius is rescaled once; 100 more failures
// raise an error. Brush geometry is tuned for 256x256 and scaled by
// min(h, w)/256 for other sizes.
Mask generate_arbitrary_mask(uint64_t seed, int64_t h, int64_t w, double area_lo,
                             double area_hi);

enum class CorpusRole { Train, Validation };

const char* corpus_role_name(CorpusRole r);
CorpusRole corpus_role_from_name(const std::string& name);

struct MaskCorpus {
    std::vector<Mask> masks;
    CorpusRole role = CorpusRole::Train;
    double area_lo = 0.0, area_hi = 0.0;
    uint64_t master_seed = 0;
    int64_t h = 0, w = 0;
    MaskKind kind = MaskKind::Arbitrary;
};

// n masks with per-mask seeds split off master_seed by a fixed rule. For
// square corpora area_lo/area_hi are ignored (block size is fixed at 64).
MaskCorpus build_mask_corpus(uint64_t master_seed, int64_t n, int64_t h, int64_t w,
                             double area_lo, double area_hi, CorpusRole role,
                             MaskKind kind = MaskKind::Arbitrary);

// SHA-256 over the concatenated mask bits, in corpus order.
std::string corpus_sha256(const MaskCorpus& corpus);

// Persists masks as 8-bit PNGs (255 = corrupted) plus manifest.json into dir;
// load re-reads the manifest and every mask and re-checks the stored area
// fractions against the bits.
void save_mask_corpus(const MaskCorpus& corpus, const std::string& dir);
MaskCorpus load_mask_corpus(const std::string& dir);

}  // namespace ipaint::img
