#pragma once
// Model file format plus loaders for common image inputs.
//
// A model file is a short ASCII header followed by one binary blob:
//
//   bnnkit-model 1
//   name <token>
//   layers <count>
//   layer <kind> <shape fields...>
//   ...
//   fold <layer_index> <pe> <simd>      (optional, per matrix layer)
//   weights present|absent
//   blob <byte count>
//   <blob bytes>
//
// The blob packs, per matrix layer in network order: the weight rows (each
// padded to whole 64-bit little-endian words), the integer thresholds
// (u32 popcount compares or s32 signed compares), and the per-neuron flip
// flags. Pooling layers contribute nothing. `weights absent` files carry an
// empty blob and describe only shapes and folds.

#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "compile.hpp"
#include "errors.hpp"
#include "folding.hpp"
#include "topology.hpp"

namespace bnnkit {

namespace detail {

constexpr char kModelMagic[] = "bnnkit-model";
constexpr int kModelVersion = 1;

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

class BlobReader {
 public:
  explicit BlobReader(const std::string& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | std::uint8_t(bytes_[pos_ + i]);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | std::uint8_t(bytes_[pos_ + i]);
    pos_ += 8;
    return v;
  }

  std::uint8_t u8() {
    need(1);
    return std::uint8_t(bytes_[pos_++]);
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) {
    if (bytes_.size() - pos_ < n)
      throw truncated_blob_error("model blob ends inside a layer record");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

inline const char* pad_token(PadMode p) {
  switch (p) {
    case PadMode::None: return "none";
    case PadMode::PlusOne: return "plus";
    case PadMode::MinusOne: return "minus";
  }
  return "?";
}

inline PadMode parse_pad(const std::string& s) {
  if (s == "none") return PadMode::None;
  if (s == "plus") return PadMode::PlusOne;
  if (s == "minus") return PadMode::MinusOne;
  throw io_error("model header: unknown padding mode '" + s + "'");
}

inline LayerKind parse_kind(const std::string& s) {
  for (LayerKind k : {LayerKind::BinaryFC, LayerKind::BinaryConv, LayerKind::MaxPool,
                      LayerKind::FixedInputFC, LayerKind::FixedInputConv,
                      LayerKind::OutputFC})
    if (s == layer_kind_name(k)) return k;
  throw io_error("model header: unknown layer kind '" + s + "'");
}

// Blob bytes one compiled layer occupies.
inline std::uint64_t layer_blob_bytes(const LayerSpec& spec) {
  if (!spec.has_matrix()) return 0;
  const std::uint64_t rows = spec.matrix_rows();
  const std::uint64_t row_words = (spec.matrix_cols() + 63) / 64;
  std::uint64_t bytes = rows * row_words * 8;
  if (spec.thresholded()) bytes += rows * 4 + rows;  // thresholds + flips
  return bytes;
}

inline std::string header_line(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw io_error("model header ends unexpectedly");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace detail

struct ModelFileOptions {
  bool include_weights = true;
};

struct LoadedModel {
  CompiledNetwork net;
  bool has_weights = false;
  FoldingConfig folds;  // empty when the file carries no fold lines
};

inline void save_model(std::ostream& out, const CompiledNetwork& net,
                       const FoldingConfig* folds = nullptr,
                       ModelFileOptions opt = {}) {
  std::ostringstream hdr;
  hdr << detail::kModelMagic << ' ' << detail::kModelVersion << '\n';
  hdr << "name " << net.topology.name << '\n';
  hdr << "layers " << net.topology.layers.size() << '\n';
  for (const LayerSpec& l : net.topology.layers) {
    hdr << "layer " << layer_kind_name(l.kind);
    if (l.is_fc()) {
      hdr << ' ' << l.out_neurons << ' ' << l.in_synapses << ' ' << l.input_width
          << ' ' << l.output_width;
    } else if (l.is_conv()) {
      hdr << ' ' << l.in_channels << ' ' << l.in_h << ' ' << l.in_w << ' '
          << l.out_channels << ' ' << l.win_j << ' ' << l.win_k << ' '
          << detail::pad_token(l.pad) << ' ' << l.input_width << ' '
          << l.output_width;
    } else {
      hdr << ' ' << l.in_channels << ' ' << l.in_h << ' ' << l.in_w << ' '
          << l.pool_k;
    }
    hdr << '\n';
  }
  if (folds)
    for (const LayerFold& f : folds->layers)
      hdr << "fold " << f.layer_index << ' ' << f.pe << ' ' << f.simd << '\n';
  hdr << "weights " << (opt.include_weights ? "present" : "absent") << '\n';

  std::string blob;
  if (opt.include_weights) {
    for (const CompiledLayer& l : net.layers) {
      if (!l.spec.has_matrix()) continue;
      for (std::size_t r = 0; r < l.weights.rows(); ++r)
        for (std::uint64_t w : l.weights.row(r).words()) detail::put_u64(blob, w);
      if (l.spec.thresholded()) {
        if (!l.thresholds.empty())
          for (std::uint32_t t : l.thresholds) detail::put_u32(blob, t);
        else
          for (std::int32_t t : l.fx_thresholds)
            detail::put_u32(blob, std::uint32_t(t));
        for (std::uint8_t f : l.flips) blob.push_back(char(f));
      }
    }
  }
  hdr << "blob " << blob.size() << '\n';

  const std::string h = hdr.str();
  out.write(h.data(), std::streamsize(h.size()));
  out.write(blob.data(), std::streamsize(blob.size()));
  if (!out) throw io_error("model write failed");
}

inline void save_model(const std::string& path, const CompiledNetwork& net,
                       const FoldingConfig* folds = nullptr,
                       ModelFileOptions opt = {}) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "' for writing");
  save_model(f, net, folds, opt);
}

inline LoadedModel load_model(std::istream& in) {
  // Magic and version.
  {
    std::istringstream first(detail::header_line(in));
    std::string magic;
    long long version = -1;
    first >> magic >> version;
    if (magic != detail::kModelMagic)
      throw format_version_error("not a model file (bad magic)");
    if (version != detail::kModelVersion)
      throw format_version_error("unsupported model version " +
                                 std::to_string(version));
  }

  LoadedModel m;
  std::size_t declared_layers = 0;
  bool have_layer_count = false;
  std::uint64_t blob_size = 0;
  std::vector<LayerSpec> specs;

  for (;;) {
    std::istringstream ls(detail::header_line(in));
    std::string key;
    ls >> key;
    if (key == "name") {
      ls >> m.net.topology.name;
    } else if (key == "layers") {
      ls >> declared_layers;
      have_layer_count = true;
    } else if (key == "layer") {
      std::string kind_tok;
      ls >> kind_tok;
      LayerSpec l;
      l.kind = detail::parse_kind(kind_tok);
      if (l.is_fc()) {
        ls >> l.out_neurons >> l.in_synapses >> l.input_width >> l.output_width;
      } else if (l.is_conv()) {
        std::string pad_tok;
        ls >> l.in_channels >> l.in_h >> l.in_w >> l.out_channels >> l.win_j >>
            l.win_k >> pad_tok >> l.input_width >> l.output_width;
        l.pad = detail::parse_pad(pad_tok);
      } else {
        ls >> l.in_channels >> l.in_h >> l.in_w >> l.pool_k;
      }
      if (!ls) throw io_error("model header: malformed layer line");
      specs.push_back(l);
    } else if (key == "fold") {
      LayerFold f;
      ls >> f.layer_index >> f.pe >> f.simd;
      if (!ls) throw io_error("model header: malformed fold line");
      m.folds.layers.push_back(f);
    } else if (key == "weights") {
      std::string tok;
      ls >> tok;
      if (tok == "present")
        m.has_weights = true;
      else if (tok == "absent")
        m.has_weights = false;
      else
        throw io_error("model header: bad weights flag '" + tok + "'");
    } else if (key == "blob") {
      ls >> blob_size;
      if (!ls) throw io_error("model header: malformed blob line");
      break;
    } else {
      throw io_error("model header: unknown keyword '" + key + "'");
    }
  }

  if (!have_layer_count || specs.size() != declared_layers)
    throw dimension_error("model header: layer count does not match layer lines");
  m.net.topology.layers = specs;
  m.net.topology.validate();

  // Resolve fold lines against the shapes before touching the blob.
  for (LayerFold& f : m.folds.layers) {
    if (f.layer_index >= specs.size() || !specs[f.layer_index].has_matrix())
      throw dimension_error("model header: fold line for a non-matrix layer");
    f = make_layer_fold(specs[f.layer_index], f.layer_index, f.pe, f.simd);
  }

  std::uint64_t expected = 0;
  if (m.has_weights)
    for (const LayerSpec& l : specs) expected += detail::layer_blob_bytes(l);
  if (expected != blob_size)
    throw dimension_error("model header: blob size " + std::to_string(blob_size) +
                          " does not match layer shapes (expected " +
                          std::to_string(expected) + ")");

  std::string blob(blob_size, '\0');
  in.read(blob.data(), std::streamsize(blob_size));
  if (std::uint64_t(in.gcount()) != blob_size)
    throw truncated_blob_error("model blob is shorter than declared");

  detail::BlobReader rd(blob);
  for (const LayerSpec& spec : specs) {
    CompiledLayer l;
    l.spec = spec;
    if (spec.has_matrix()) {
      const bool fixed = spec.kind == LayerKind::FixedInputFC ||
                         spec.kind == LayerKind::FixedInputConv;
      l.acc_width = fixed ? accumulator_width_fixed(spec.matrix_cols(), spec.input_width)
                          : accumulator_width(spec.matrix_cols());
      if (m.has_weights) {
        const std::size_t rows = spec.matrix_rows();
        const std::size_t cols = spec.matrix_cols();
        BitMatrix w(rows, cols);
        BipolarBitVector row(cols);
        const std::size_t row_words = (cols + 63) / 64;
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t i = 0; i < row_words; ++i) {
            std::uint64_t word = rd.u64();
            const std::size_t base = i * 64;
            const std::size_t take = std::min<std::size_t>(64, cols - base);
            for (std::size_t b = 0; b < take; ++b)
              row.set_bit(base + b, (word >> b) & 1);
          }
          w.set_row(r, row);
        }
        l.weights = std::move(w);
        if (spec.thresholded()) {
          if (fixed) {
            l.fx_thresholds.resize(rows);
            for (std::size_t r = 0; r < rows; ++r)
              l.fx_thresholds[r] = std::int32_t(rd.u32());
          } else {
            l.thresholds.resize(rows);
            for (std::size_t r = 0; r < rows; ++r) l.thresholds[r] = rd.u32();
          }
          l.flips.resize(rows);
          for (std::size_t r = 0; r < rows; ++r) l.flips[r] = rd.u8();
        }
      }
    }
    m.net.layers.push_back(std::move(l));
  }
  return m;
}

inline LoadedModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "'");
  return load_model(f);
}

// ---------------------------------------------------------------------------
// Image containers and loaders.

struct ImageSet {
  std::size_t count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;  // image-major, then row-major, then channel

  std::span<const std::uint8_t> image(std::size_t i) const {
    const std::size_t n = rows * cols * channels;
    return {pixels.data() + i * n, n};
  }
};

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const char* what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw io_error(std::string("unexpected end of ") + what);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

inline void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace detail

// IDX containers: magic 0x00000803 for u8 image stacks, 0x00000801 for labels.
inline ImageSet load_idx_images(std::istream& in) {
  const std::uint32_t magic = detail::read_be32(in, "idx header");
  if (magic != 0x803) throw format_version_error("not an idx u8 image file");
  ImageSet s;
  s.count = detail::read_be32(in, "idx header");
  s.rows = detail::read_be32(in, "idx header");
  s.cols = detail::read_be32(in, "idx header");
  s.pixels.resize(s.count * s.rows * s.cols);
  in.read(reinterpret_cast<char*>(s.pixels.data()), std::streamsize(s.pixels.size()));
  if (std::size_t(in.gcount()) != s.pixels.size())
    throw truncated_blob_error("idx image data is shorter than declared");
  return s;
}

inline ImageSet load_idx_images(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "'");
  return load_idx_images(f);
}

inline std::vector<std::uint8_t> load_idx_labels(std::istream& in) {
  const std::uint32_t magic = detail::read_be32(in, "idx header");
  if (magic != 0x801) throw format_version_error("not an idx u8 label file");
  const std::uint32_t n = detail::read_be32(in, "idx header");
  std::vector<std::uint8_t> labels(n);
  in.read(reinterpret_cast<char*>(labels.data()), std::streamsize(n));
  if (std::size_t(in.gcount()) != labels.size())
    throw truncated_blob_error("idx label data is shorter than declared");
  return labels;
}

inline std::vector<std::uint8_t> load_idx_labels(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "'");
  return load_idx_labels(f);
}

inline void save_idx_images(std::ostream& out, const ImageSet& s) {
  detail::write_be32(out, 0x803);
  detail::write_be32(out, std::uint32_t(s.count));
  detail::write_be32(out, std::uint32_t(s.rows));
  detail::write_be32(out, std::uint32_t(s.cols));
  out.write(reinterpret_cast<const char*>(s.pixels.data()),
            std::streamsize(s.pixels.size()));
  if (!out) throw io_error("idx write failed");
}

inline void save_idx_images(const std::string& path, const ImageSet& s) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "' for writing");
  save_idx_images(f, s);
}

inline void save_idx_labels(std::ostream& out, std::span<const std::uint8_t> labels) {
  detail::write_be32(out, 0x801);
  detail::write_be32(out, std::uint32_t(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            std::streamsize(labels.size()));
  if (!out) throw io_error("idx write failed");
}

inline void save_idx_labels(const std::string& path,
                            std::span<const std::uint8_t> labels) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "' for writing");
  save_idx_labels(f, labels);
}

namespace detail {

// Next whitespace-delimited token, skipping '#' comments.
inline std::string pnm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (!std::isspace(c)) {
      tok.push_back(char(c));
      while ((c = in.peek()) != EOF && !std::isspace(c)) tok.push_back(char(in.get()));
      return tok;
    }
  }
  throw io_error("unexpected end of image header");
}

}  // namespace detail

// Binary PGM (P5, one channel) or PPM (P6, three channels), maxval up to 255.
inline ImageSet load_pnm(std::istream& in) {
  const std::string magic = detail::pnm_token(in);
  std::size_t channels;
  if (magic == "P5")
    channels = 1;
  else if (magic == "P6")
    channels = 3;
  else
    throw format_version_error("not a binary pgm/ppm file");
  ImageSet s;
  s.count = 1;
  s.channels = channels;
  s.cols = std::stoul(detail::pnm_token(in));
  s.rows = std::stoul(detail::pnm_token(in));
  const unsigned long maxval = std::stoul(detail::pnm_token(in));
  if (maxval == 0 || maxval > 255) throw io_error("pgm/ppm maxval out of range");
  in.get();  // single whitespace after maxval
  s.pixels.resize(s.rows * s.cols * channels);
  in.read(reinterpret_cast<char*>(s.pixels.data()), std::streamsize(s.pixels.size()));
  if (std::size_t(in.gcount()) != s.pixels.size())
    throw truncated_blob_error("pgm/ppm pixel data is shorter than declared");
  return s;
}

inline ImageSet load_pnm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "'");
  return load_pnm(f);
}

inline void save_pnm(std::ostream& out, const ImageSet& s) {
  if (s.count != 1 || (s.channels != 1 && s.channels != 3))
    throw dimension_error("save_pnm: need a single 1- or 3-channel image");
  out << (s.channels == 1 ? "P5" : "P6") << '\n'
      << s.cols << ' ' << s.rows << '\n'
      << 255 << '\n';
  out.write(reinterpret_cast<const char*>(s.pixels.data()),
            std::streamsize(s.pixels.size()));
  if (!out) throw io_error("image write failed");
}

inline void save_pnm(const std::string& path, const ImageSet& s) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "' for writing");
  save_pnm(f, s);
}

// ---------------------------------------------------------------------------
// Input conditioning: 8-bit pixels to bipolar bits or fixed-point tensors.

inline BipolarBitVector binarize_bits(std::span<const std::uint8_t> pixels,
                                      unsigned threshold = 128) {
  BipolarBitVector v(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i)
    if (pixels[i] >= threshold) v.set_bit(i, true);
  return v;
}

inline InterleavedFrame binarize_frame(std::span<const std::uint8_t> pixels,
                                       std::size_t h, std::size_t w, std::size_t c,
                                       unsigned threshold = 128) {
  if (pixels.size() != h * w * c)
    throw dimension_error("binarize_frame: pixel count does not match shape");
  InterleavedFrame f(h, w, c);
  // Pixel-major interleaved storage matches the loader layout directly.
  f.raw() = binarize_bits(pixels, threshold);
  return f;
}

inline FixedPointTensor to_fixed_tensor(std::span<const std::uint8_t> pixels,
                                        std::size_t h, std::size_t w, std::size_t c,
                                        unsigned width = 8) {
  if (pixels.size() != h * w * c)
    throw dimension_error("to_fixed_tensor: pixel count does not match shape");
  FixedPointTensor t({h, w, c}, width);
  const long long cap = (1LL << (width - 1)) - 1;
  for (std::size_t i = 0; i < pixels.size(); ++i)
    t.set(i, std::min<long long>(pixels[i], cap));
  return t;
}

}  // namespace bnnkit
