#include "asr/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "asr/binary_io.hpp"
#include "asr/constraints.hpp"
#include "asr/errors.hpp"
#include "asr/generative.hpp"

namespace asr {

namespace {

constexpr std::uint32_t kDatasetMagic = 0x44525341;  // "ASRD"
constexpr std::uint32_t kDatasetVersion = 1;

Real quantize(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return static_cast<Real>(std::round(v * 255.0) / 255.0);
}

std::uint32_t be32(const unsigned char* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

bool is_integer(double v) { return v == std::floor(v); }

}  // namespace

std::map<int, int> Dataset::histogram() const {
  std::map<int, int> h;
  for (const auto& e : examples) ++h[e.gt_count];
  return h;
}

GlyphSourceKind parse_glyph_source(const std::string& s) {
  if (s == "mnist") return GlyphSourceKind::Mnist;
  if (s == "sprites") return GlyphSourceKind::Sprites;
  throw ConfigError("unknown glyph source: " + s);
}

std::string to_string(GlyphSourceKind k) { return k == GlyphSourceKind::Mnist ? "mnist" : "sprites"; }

void DatasetSpec::validate() const {
  if (S < 1) throw ContractViolation("dataset spec: S must be >= 1");
  if (glyph_side < 1 || glyph_side > S) throw ContractViolation("dataset spec: glyph side must be in [1, S]");
  if (counts.empty()) throw ContractViolation("dataset spec: no counts given");
  for (const auto& [n, num] : counts) {
    if (n < 0) throw ContractViolation("dataset spec: negative object count");
    if (num < 1) throw ContractViolation("dataset spec: examples per count must be >= 1");
  }
  if (max_attempts < 1) throw ContractViolation("dataset spec: max_attempts must be >= 1");
  if (source == GlyphSourceKind::Mnist && mnist_path.empty()) {
    throw ContractViolation("dataset spec: mnist source needs mnist_path");
  }
}

IdxImages read_idx_images(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");  // reads plain files transparently
  if (f == nullptr) throw IoError("cannot open IDX file " + path);
  std::vector<unsigned char> bytes;
  unsigned char buf[1 << 16];
  int got = 0;
  while ((got = gzread(f, buf, sizeof(buf))) > 0) bytes.insert(bytes.end(), buf, buf + got);
  const bool bad = got < 0;
  gzclose(f);
  if (bad) throw IoError("corrupt compressed IDX file " + path);
  if (bytes.size() < 16 || be32(bytes.data()) != 0x00000803) throw IoError("not an IDX3 u8 image file: " + path);
  IdxImages out;
  out.count = static_cast<int>(be32(bytes.data() + 4));
  out.rows = static_cast<int>(be32(bytes.data() + 8));
  out.cols = static_cast<int>(be32(bytes.data() + 12));
  const std::size_t need = static_cast<std::size_t>(out.count) * out.rows * out.cols;
  if (bytes.size() - 16 < need) throw IoError("truncated IDX file " + path);
  out.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(need));
  return out;
}

MnistGlyphs::MnistGlyphs(const std::string& idx_path, int side, int begin, int end) : side_(side) {
  if (side < 1) throw ContractViolation("mnist glyphs: side must be >= 1");
  IdxImages idx = read_idx_images(idx_path);
  if (end < 0 || end > idx.count) end = idx.count;
  if (begin < 0 || begin >= end) throw ContractViolation("mnist glyphs: empty digit range");
  const int R = idx.rows, C = idx.cols;
  constexpr int kBox = 20;
  for (int i = begin; i < end; ++i) {
    const std::uint8_t* img = idx.pixels.data() + static_cast<std::size_t>(i) * R * C;
    int r0 = R, r1 = -1, c0 = C, c1 = -1;
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < C; ++c)
        if (img[r * C + c] > 0) {
          r0 = std::min(r0, r);
          r1 = std::max(r1, r);
          c0 = std::min(c0, c);
          c1 = std::max(c1, c);
        }
    Glyph g = Canvas::zeros(kBox);
    if (r1 >= 0) {
      const int h = std::min(r1 - r0 + 1, kBox), w = std::min(c1 - c0 + 1, kBox);
      const int cr = (r0 + r1 + 1) / 2, cc = (c0 + c1 + 1) / 2;  // center of the tight box
      const int src_r = cr - h / 2, src_c = cc - w / 2;
      const int dst_r = (kBox - h) / 2, dst_c = (kBox - w) / 2;
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) g.pixels(dst_r + r, dst_c + c) = img[(src_r + r) * C + src_c + c] / Real(255);
    }
    if (side != kBox) {
      g = place_glyph(g, {side / 2.0, side / 2.0, double(side)}, side);
      for (Eigen::Index k = 0; k < g.pixels.size(); ++k) g.pixels.data()[k] = quantize(g.pixels.data()[k]);
    }
    glyphs_.push_back(std::move(g));
  }
}

Glyph MnistGlyphs::draw(Rng& rng) const {
  return glyphs_[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(glyphs_.size()) - 1))];
}

Glyph SpriteGlyphs::draw(Rng& rng) const {
  const int shape = rng.uniform_int(0, 2);
  const double size = 0.65 + 0.35 * rng.uniform();  // fraction of the glyph side
  const double angle = 2 * std::numbers::pi * rng.uniform();
  const double aspect = 0.5 + 0.5 * rng.uniform();
  const double half = side_ / 2.0, rad = size * half;
  auto inside = [&](double px, double py) {
    const double dx = px - half, dy = py - half;
    if (shape == 0) return std::abs(dx) <= rad && std::abs(dy) <= rad;
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double u = ca * dx + sa * dy, v = -sa * dx + ca * dy;
    if (shape == 1) return (u * u) / (rad * rad) + (v * v) / (rad * rad * aspect * aspect) <= 1.0;
    // equilateral triangle inscribed in the circle of radius rad
    for (int k = 0; k < 3; ++k) {
      const double a = angle + k * 2 * std::numbers::pi / 3 + std::numbers::pi / 3;
      if (std::cos(a) * dx + std::sin(a) * dy > rad / 2) return false;
    }
    return true;
  };
  constexpr int kSuper = 4;
  Glyph g = Canvas::zeros(side_);
  for (int r = 0; r < side_; ++r)
    for (int c = 0; c < side_; ++c) {
      int hits = 0;
      for (int i = 0; i < kSuper; ++i)
        for (int j = 0; j < kSuper; ++j) hits += inside(c + (j + 0.5) / kSuper, r + (i + 0.5) / kSuper) ? 1 : 0;
      g.pixels(r, c) = quantize(hits / double(kSuper * kSuper));
    }
  return g;
}

std::vector<BoundingBox> sample_layout(int n, int S, int side, bool non_overlap, Rng& rng, int max_attempts) {
  if (n < 0) throw ContractViolation("sample_layout: negative count");
  if (side < 1 || side > S) throw ContractViolation("sample_layout: side must be in [1, S]");
  std::vector<BoundingBox> boxes(static_cast<std::size_t>(n));
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    for (auto& b : boxes) {
      b.side = side;
      b.cx = rng.uniform_int(0, S - side) + side / 2.0;
      b.cy = rng.uniform_int(0, S - side) + side / 2.0;
    }
    if (!non_overlap || f1_pairwise_overlap(boxes) == 0.0) return boxes;
  }
  throw InfeasibleLayout("no feasible layout for n=" + std::to_string(n) + ", S=" + std::to_string(S) +
                         ", side=" + std::to_string(side) + " after " + std::to_string(max_attempts) + " attempts");
}

DatasetExample render_example(std::span<const Glyph> glyphs, std::span<const BoundingBox> layout, int S,
                              bool sum_composite) {
  if (glyphs.size() != layout.size()) throw ContractViolation("render_example: glyph and box counts differ");
  DatasetExample ex;
  ex.image = Canvas::zeros(S);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const BoundingBox& b = layout[i];
    if (b.left() < 0 || b.top() < 0 || b.right() > S || b.bottom() > S) {
      throw ContractViolation("render_example: box outside the canvas");
    }
    Canvas patch;
    const Glyph& g = glyphs[i];
    if (b.side == g.size() && is_integer(b.left()) && is_integer(b.top())) {
      patch = Canvas::zeros(S);
      patch.pixels.block(static_cast<Eigen::Index>(b.top()), static_cast<Eigen::Index>(b.left()), g.size(), g.size()) =
          g.pixels;
    } else {
      patch = place_glyph(g, b, S);
      for (Eigen::Index k = 0; k < patch.pixels.size(); ++k) patch.pixels.data()[k] = quantize(patch.pixels.data()[k]);
    }
    if (sum_composite) {
      ex.image.pixels = (ex.image.pixels + patch.pixels).cwiseMin(Real(1));
    } else {
      ex.image.pixels = ex.image.pixels.cwiseMax(patch.pixels);
    }
  }
  ex.gt_boxes.assign(layout.begin(), layout.end());
  ex.gt_count = static_cast<int>(layout.size());
  return ex;
}

std::unique_ptr<GlyphSource> make_glyph_source(const DatasetSpec& spec) {
  if (spec.source == GlyphSourceKind::Mnist) {
    return std::make_unique<MnistGlyphs>(spec.mnist_path, spec.glyph_side, spec.digit_begin, spec.digit_end);
  }
  return std::make_unique<SpriteGlyphs>(spec.glyph_side);
}

Dataset synth_dataset(const DatasetSpec& spec, const GlyphSource& glyphs) {
  spec.validate();
  if (glyphs.side() != spec.glyph_side) throw ContractViolation("synth_dataset: glyph source side mismatch");
  Dataset data;
  data.S = spec.S;
  data.seed = spec.seed;
  for (const auto& [n, num] : spec.counts) {
    for (int i = 0; i < num; ++i) {
      Rng rng = Rng::derive(spec.seed, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(i)});
      std::vector<BoundingBox> layout = sample_layout(n, spec.S, spec.glyph_side, spec.non_overlap, rng, spec.max_attempts);
      std::vector<Glyph> gs;
      for (int k = 0; k < n; ++k) gs.push_back(glyphs.draw(rng));
      data.examples.push_back(render_example(gs, layout, spec.S, spec.sum_composite));
    }
  }
  return data;
}

Dataset synth_dataset(const DatasetSpec& spec) {
  spec.validate();
  auto source = make_glyph_source(spec);
  return synth_dataset(spec, *source);
}

void write_dataset(const std::string& path, const Dataset& data) {
  io::ByteWriter w;
  w.put<std::uint32_t>(kDatasetMagic);
  w.put<std::uint32_t>(kDatasetVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(data.S));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(data.size()));
  w.put<std::uint64_t>(data.seed);
  const auto hist = data.histogram();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(hist.size()));
  for (const auto& [n, num] : hist) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(n));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(num));
  }
  std::vector<std::uint8_t> pixels;
  pixels.reserve(data.size() * data.S * data.S);
  std::uint64_t rows = 0;
  for (const auto& e : data.examples) {
    if (e.image.size() != data.S) throw ContractViolation("write_dataset: image size mismatch");
    for (Eigen::Index k = 0; k < e.image.pixels.size(); ++k) {
      const double v = e.image.pixels.data()[k] * 255.0;
      const double r = std::round(v);
      if (r < 0 || r > 255 || std::abs(v - r) > 1e-3) {
        throw ContractViolation("write_dataset: pixel values must be multiples of 1/255 in [0,1]");
      }
      pixels.push_back(static_cast<std::uint8_t>(r));
    }
    rows += e.gt_boxes.size();
  }
  w.put_bytes(pixels.data(), pixels.size());
  w.put<std::uint64_t>(rows);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (const auto& b : data.examples[i].gt_boxes) {
      w.put<std::uint32_t>(static_cast<std::uint32_t>(i));
      w.put<double>(b.cx);
      w.put<double>(b.cy);
      w.put<double>(b.side);
    }
  }
  w.seal();
  io::write_file(path, w.bytes());
}

Dataset read_dataset(const std::string& path) {
  const auto bytes = io::read_file(path);
  const std::size_t n = io::verify_sealed(bytes, "dataset " + path);
  io::ByteReader r(bytes.data(), n, "dataset " + path);
  if (r.get<std::uint32_t>() != kDatasetMagic) throw IoError("not a dataset archive: " + path);
  const auto version = r.get<std::uint32_t>();
  if (version != kDatasetVersion) throw IoError("unsupported dataset version " + std::to_string(version));
  Dataset data;
  data.S = static_cast<int>(r.get<std::uint32_t>());
  const auto N = r.get<std::uint64_t>();
  data.seed = r.get<std::uint64_t>();
  if (data.S < 1 || N > (1ULL << 32)) throw IoError("corrupt dataset header: " + path);
  const auto nh = r.get<std::uint32_t>();
  std::map<int, int> hist;
  for (std::uint32_t i = 0; i < nh; ++i) {
    const auto c = r.get<std::uint32_t>();
    hist[static_cast<int>(c)] = static_cast<int>(r.get<std::uint32_t>());
  }
  const std::size_t npix = static_cast<std::size_t>(data.S) * data.S;
  if (N * npix > r.remaining()) throw IoError("dataset " + path + ": truncated file");
  std::vector<std::uint8_t> pixels(N * npix);
  r.get_bytes(pixels.data(), pixels.size());
  data.examples.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    Canvas c = Canvas::zeros(data.S);
    for (std::size_t k = 0; k < npix; ++k) c.pixels.data()[k] = pixels[i * npix + k] / Real(255);
    data.examples[i].image = std::move(c);
  }
  const auto rows = r.get<std::uint64_t>();
  for (std::uint64_t k = 0; k < rows; ++k) {
    const auto idx = r.get<std::uint32_t>();
    if (idx >= N) throw IoError("dataset " + path + ": annotation index out of range");
    BoundingBox b;
    b.cx = r.get<double>();
    b.cy = r.get<double>();
    b.side = r.get<double>();
    data.examples[idx].gt_boxes.push_back(b);
  }
  if (r.remaining() != 0) throw IoError("dataset " + path + ": trailing bytes");
  for (auto& e : data.examples) e.gt_count = static_cast<int>(e.gt_boxes.size());
  if (data.histogram() != hist) throw IoError("dataset " + path + ": histogram does not match annotations");
  return data;
}

FeasibilityAudit audit_dataset(const Dataset& data) {
  FeasibilityAudit a;
  for (const auto& e : data.examples) {
    a.max_overlap = std::max(a.max_overlap, f1_pairwise_overlap(e.gt_boxes));
    for (double v : f_containment(e.gt_boxes, data.S)) a.max_containment = std::max(a.max_containment, v);
  }
  return a;
}

Matrix stack_images(const Dataset& data, std::span<const std::size_t> indices) {
  const Eigen::Index P = static_cast<Eigen::Index>(data.S) * data.S;
  Matrix out(static_cast<Eigen::Index>(indices.size()), P);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Canvas& c = data.examples.at(indices[i]).image;
    out.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::Matrix<Real, 1, Eigen::Dynamic>>(c.pixels.data(), P);
  }
  return out;
}

}  // namespace asr
