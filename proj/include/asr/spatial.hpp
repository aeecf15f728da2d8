// Differentiable glyph write (place) and attention read (crop) between a
// G x G glyph grid and an S x S canvas, both stored row-major, one image
// per row of the batch.
//
// Pixel (r, c) of an image covers [c, c+1] x [r, r+1]. A box with center
// (cx, cy) and side s covers [cx - s/2, cx + s/2] x [cy - s/2, cy + s/2].
#pragma once

#include "asr/autodiff.hpp"

namespace asr::spatial {

/// Writes each glyph into its box. The glyph is resampled bilinearly with
/// edge clamping and multiplied by the fraction of each canvas pixel that
/// the box covers, so the output is exactly zero outside the box extent.
/// glyph: B x G*G; cx, cy, side: B x 1. Returns B x S*S.
ad::Var place(const ad::Var& glyph, const ad::Var& cx, const ad::Var& cy, const ad::Var& side, int G, int S);

/// Bilinear read of a G x G window at each box (zero padding outside the
/// canvas). image: B x S*S. Returns B x G*G.
ad::Var crop(const ad::Var& image, const ad::Var& cx, const ad::Var& cy, const ad::Var& side, int S, int G);

}  // namespace asr::spatial
