#pragma once

// Training-time context augmentation: two overlapping random crops per batch
// plus independent timestamp masks. Evaluation paths never use this module.

#include <cstdint>
#include <vector>

#include "ts2rep/common.hpp"
#include "ts2rep/encoder.hpp"

namespace ts2rep::augment {

/// Two overlapping half-open windows [a1, b1) and [a2, b2) with
/// 0 <= a1 <= a2 < b1 <= b2 <= T. The overlap [a2, b1) is never empty.
struct CropPair {
    int64_t a1 = 0, b1 = 0, a2 = 0, b2 = 0;

    int64_t overlap_len() const { return b1 - a2; }
    bool valid(int64_t T) const {
        return 0 <= a1 && a1 <= a2 && a2 < b1 && b1 <= b2 && b2 <= T;
    }
};

/// Sample the overlap endpoints first (a2 < b1), then extend each side
/// uniformly. Every index has nonzero probability of landing in the overlap.
inline CropPair sample_crop_pair(int64_t T, Rng& rng) {
    if (T < 1) throw ArgumentError("sample_crop_pair: T must be >= 1");
    CropPair p;
    p.a2 = rng.uniform_int(0, T - 1);
    p.b1 = rng.uniform_int(p.a2 + 1, T);
    p.a1 = rng.uniform_int(0, p.a2);
    p.b2 = rng.uniform_int(p.b1, T);
    return p;
}

/// One augmented context view: cropped values plus a fresh timestamp mask and
/// the overlap range in the view's local coordinates.
struct View {
    encoder::Batch batch;
    encoder::MaskPlan plan;
    int64_t overlap_begin = 0;  // local index of the first overlap timestamp
    int64_t overlap_end = 0;    // one past the last
};

struct ViewPair {
    View view1;  // covers [a1, b1)
    View view2;  // covers [a2, b2)
};

inline encoder::Batch crop_batch(const encoder::Batch& batch, int64_t lo, int64_t hi) {
    encoder::Batch out;
    out.B = batch.B;
    out.T = hi - lo;
    out.F = batch.F;
    out.values.resize(static_cast<size_t>(out.B * out.T * out.F));
    for (int64_t b = 0; b < batch.B; ++b)
        std::copy(batch.values.begin() + (b * batch.T + lo) * batch.F,
                  batch.values.begin() + (b * batch.T + hi) * batch.F,
                  out.values.begin() + b * out.T * out.F);
    return out;
}

/// Build the two views for one batch. view1[local1 + i] and view2[local2 + i]
/// address the same original timestamp for every i in [0, b1 - a2).
inline ViewPair make_views(const encoder::Batch& batch, const CropPair& pair, Rng& rng,
                           bool bernoulli_masks = true) {
    if (!pair.valid(batch.T)) throw ArgumentError("make_views: crop pair invalid for T=" + std::to_string(batch.T));
    ViewPair vp;
    vp.view1.batch = crop_batch(batch, pair.a1, pair.b1);
    vp.view2.batch = crop_batch(batch, pair.a2, pair.b2);
    vp.view1.plan = bernoulli_masks ? encoder::MaskPlan::bernoulli_half(batch.B, pair.b1 - pair.a1, rng)
                                    : encoder::MaskPlan::all_ones(batch.B, pair.b1 - pair.a1);
    vp.view2.plan = bernoulli_masks ? encoder::MaskPlan::bernoulli_half(batch.B, pair.b2 - pair.a2, rng)
                                    : encoder::MaskPlan::all_ones(batch.B, pair.b2 - pair.a2);
    vp.view1.overlap_begin = pair.a2 - pair.a1;
    vp.view1.overlap_end = pair.b1 - pair.a1;
    vp.view2.overlap_begin = 0;
    vp.view2.overlap_end = pair.b1 - pair.a2;
    return vp;
}

}  // namespace ts2rep::augment
