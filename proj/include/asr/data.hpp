// Synthetic multi-object datasets: glyph sources, rejection-sampled layouts,
// rendering, and the binary dataset archive.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "asr/random.hpp"
#include "asr/scene.hpp"
#include "asr/trajectory.hpp"

namespace asr {

struct DatasetExample {
  Canvas image;
  std::vector<BoundingBox> gt_boxes;
  int gt_count = 0;

  friend bool operator==(const DatasetExample& a, const DatasetExample& b) {
    return a.gt_count == b.gt_count && a.gt_boxes == b.gt_boxes && a.image.pixels == b.image.pixels;
  }
};

struct Dataset {
  int S = 50;
  std::uint64_t seed = 0;
  std::vector<DatasetExample> examples;

  std::size_t size() const { return examples.size(); }
  /// count -> number of examples
  std::map<int, int> histogram() const;
};

enum class GlyphSourceKind { Mnist, Sprites };
GlyphSourceKind parse_glyph_source(const std::string& s);
std::string to_string(GlyphSourceKind k);

struct DatasetSpec {
  GlyphSourceKind source = GlyphSourceKind::Mnist;
  /// (object count, number of examples) pairs, emitted in this order.
  std::vector<std::pair<int, int>> counts{{1, 10}, {3, 10}};
  int S = 50;
  int glyph_side = 20;
  bool non_overlap = false;
  std::uint64_t seed = 0;
  /// IDX image file (optionally gzip-compressed) for the MNIST source.
  std::string mnist_path;
  /// Half-open range of digit indices drawn from the IDX file; end < 0 means all.
  int digit_begin = 0;
  int digit_end = -1;
  int max_attempts = 100000;
  /// Overlapping pixels are summed and clamped instead of max-composited.
  bool sum_composite = false;

  void validate() const;
};

/// Produces G x G glyphs with values that are multiples of 1/255.
class GlyphSource {
 public:
  virtual ~GlyphSource() = default;
  virtual int side() const = 0;
  virtual Glyph draw(Rng& rng) const = 0;
};

/// Digits from an IDX image file. Each digit's tight bounding box is centered
/// in a 20 x 20 glyph, then resampled to `side` if needed.
class MnistGlyphs : public GlyphSource {
 public:
  MnistGlyphs(const std::string& idx_path, int side, int begin = 0, int end = -1);
  int side() const override { return side_; }
  Glyph draw(Rng& rng) const override;
  std::size_t size() const { return glyphs_.size(); }
  const Glyph& at(std::size_t i) const { return glyphs_.at(i); }

 private:
  int side_;
  std::vector<Glyph> glyphs_;
};

/// Procedurally rasterized squares, ellipses, and triangles.
class SpriteGlyphs : public GlyphSource {
 public:
  explicit SpriteGlyphs(int side) : side_(side) {}
  int side() const override { return side_; }
  Glyph draw(Rng& rng) const override;

 private:
  int side_;
};

/// Raw 8-bit images from an IDX3 file (gzip or plain).
struct IdxImages {
  int count = 0;
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> pixels;
};
IdxImages read_idx_images(const std::string& path);

/// n boxes of the given side with integer-aligned left/top edges uniform over
/// [0, S - side]. With non_overlap the whole layout is redrawn until
/// f1_pairwise_overlap is exactly zero.
std::vector<BoundingBox> sample_layout(int n, int S, int side, bool non_overlap, Rng& rng, int max_attempts);

/// Pastes glyphs at the layout boxes (max-composite, or clamped sum).
DatasetExample render_example(std::span<const Glyph> glyphs, std::span<const BoundingBox> layout, int S,
                              bool sum_composite = false);

std::unique_ptr<GlyphSource> make_glyph_source(const DatasetSpec& spec);
Dataset synth_dataset(const DatasetSpec& spec, const GlyphSource& glyphs);
Dataset synth_dataset(const DatasetSpec& spec);

void write_dataset(const std::string& path, const Dataset& data);
Dataset read_dataset(const std::string& path);

/// Largest overlap and containment violation across the dataset (both 0 for a
/// feasible non-overlap dataset).
struct FeasibilityAudit {
  double max_overlap = 0.0;
  double max_containment = 0.0;
  bool feasible() const { return max_overlap == 0.0 && max_containment == 0.0; }
};
FeasibilityAudit audit_dataset(const Dataset& data);

/// Examples as rows of a B x S*S matrix.
Matrix stack_images(const Dataset& data, std::span<const std::size_t> indices);

}  // namespace asr
