#pragma once
// Bit-packed bipolar containers and the XNOR-popcount primitives.
//
// Encoding: bit 1 means +1, bit 0 means -1; the representation has no zero.
// Storage is 64-bit words in little-endian bit order (element i lives in word
// i/64 at bit i%64). Padding bits past length() are kept at zero and are
// masked out of every reduction, so they can never leak into a popcount.

#include <bit>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "errors.hpp"

namespace bnnkit {

class BipolarBitVector {
public:
  BipolarBitVector() = default;

  explicit BipolarBitVector(std::size_t length)
      : len_(length), words_(word_count(length), 0) {}

  // Packs a +1/-1 sequence. Any other value is rejected.
  static BipolarBitVector from_bipolar(std::span<const int> values) {
    BipolarBitVector v(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] == 1) {
        v.set_bit(i, true);
      } else if (values[i] != -1) {
        throw std::invalid_argument("bipolar element must be +1 or -1");
      }
    }
    return v;
  }

  // The low `length` bits of `bits`, length <= 64. Handy for exhaustive tests.
  static BipolarBitVector from_word_bits(std::uint64_t bits, std::size_t length) {
    assert(length <= 64);
    BipolarBitVector v(length);
    if (length > 0) {
      v.words_[0] = bits & tail_mask(length);
    }
    return v;
  }

  std::vector<int> to_bipolar() const {
    std::vector<int> out(len_);
    for (std::size_t i = 0; i < len_; ++i) out[i] = element(i);
    return out;
  }

  std::size_t length() const { return len_; }

  bool bit(std::size_t i) const {
    assert(i < len_);
    return (words_[i >> 6] >> (i & 63)) & 1u;
  }

  int element(std::size_t i) const { return bit(i) ? +1 : -1; }

  void set_bit(std::size_t i, bool v) {
    assert(i < len_);
    const std::uint64_t m = std::uint64_t{1} << (i & 63);
    if (v)
      words_[i >> 6] |= m;
    else
      words_[i >> 6] &= ~m;
  }

  // Reuses the existing allocation; low `length` bits of `bits`, length <= 64.
  void assign_word_bits(std::uint64_t bits, std::size_t length) {
    assert(length <= 64);
    len_ = length;
    words_.assign(word_count(length), 0);
    if (length > 0) words_[0] = bits & tail_mask(length);
  }

  // Flips every payload bit; padding stays zero.
  BipolarBitVector complemented() const {
    BipolarBitVector v(len_);
    for (std::size_t w = 0; w < words_.size(); ++w) v.words_[w] = ~words_[w];
    if (len_ & 63) v.words_.back() &= tail_mask(len_ & 63);
    return v;
  }

  std::span<const std::uint64_t> words() const { return words_; }

  bool operator==(const BipolarBitVector&) const = default;

private:
  static std::size_t word_count(std::size_t n) { return (n + 63) / 64; }
  static std::uint64_t tail_mask(std::size_t bits) {
    return bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits) - 1;
  }

  std::size_t len_ = 0;
  std::vector<std::uint64_t> words_;

  friend std::size_t xnor_popcount(const BipolarBitVector&, const BipolarBitVector&);
  friend std::size_t xnor_popcount_range(const BipolarBitVector&, const BipolarBitVector&,
                                         std::size_t, std::size_t);
};

inline std::size_t popcount(const BipolarBitVector& v) {
  std::size_t c = 0;
  for (std::uint64_t w : v.words()) c += std::size_t(std::popcount(w));
  return c;
}

// Number of positions where the two vectors agree.
inline std::size_t xnor_popcount(const BipolarBitVector& w, const BipolarBitVector& a) {
  if (w.length() != a.length())
    throw dimension_error("xnor_popcount: operand lengths differ");
  const std::size_t n = w.length();
  if (n == 0) return 0;
  std::size_t c = 0;
  const std::size_t full = n / 64;
  for (std::size_t i = 0; i < full; ++i)
    c += std::size_t(std::popcount(~(w.words_[i] ^ a.words_[i])));
  if (n & 63) {
    const std::uint64_t mask = (std::uint64_t{1} << (n & 63)) - 1;
    c += std::size_t(std::popcount(~(w.words_[full] ^ a.words_[full]) & mask));
  }
  return c;
}

// Agreement count restricted to bit positions [lo, hi).
inline std::size_t xnor_popcount_range(const BipolarBitVector& w, const BipolarBitVector& a,
                                       std::size_t lo, std::size_t hi) {
  if (w.length() != a.length())
    throw dimension_error("xnor_popcount_range: operand lengths differ");
  assert(lo <= hi && hi <= w.length());
  if (lo == hi) return 0;
  std::size_t c = 0;
  const std::size_t first = lo / 64;
  const std::size_t last = (hi - 1) / 64;
  for (std::size_t i = first; i <= last; ++i) {
    std::uint64_t x = ~(w.words_[i] ^ a.words_[i]);
    if (i == first && (lo & 63)) x &= ~std::uint64_t{0} << (lo & 63);
    if (i == last && (hi & 63)) x &= (std::uint64_t{1} << (hi & 63)) - 1;
    c += std::size_t(std::popcount(x));
  }
  return c;
}

// Signed dot product of two bipolar vectors: 2 * agreements - length.
inline long long bipolar_dot(const BipolarBitVector& w, const BipolarBitVector& a) {
  return 2LL * (long long)(xnor_popcount(w, a)) - (long long)(w.length());
}

// Dense bit matrix, one packed bipolar row per output neuron.
class BitMatrix {
public:
  BitMatrix() = default;  // 0x0 placeholder, used by layers without a matrix

  BitMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
    if (rows == 0 || cols == 0)
      throw dimension_error("BitMatrix: dimensions must be at least 1x1");
    data_.assign(rows, BipolarBitVector(cols));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  const BipolarBitVector& row(std::size_t r) const {
    assert(r < rows_);
    return data_[r];
  }

  void set_row(std::size_t r, BipolarBitVector v) {
    assert(r < rows_);
    if (v.length() != cols_)
      throw dimension_error("BitMatrix::set_row: length mismatch");
    data_[r] = std::move(v);
  }

  bool bit(std::size_t r, std::size_t c) const { return data_[r].bit(c); }
  void set_bit(std::size_t r, std::size_t c, bool v) { data_[r].set_bit(c, v); }

  bool operator==(const BitMatrix&) const = default;

private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<BipolarBitVector> data_;
};

// A binary feature map stored pixel-major: all channel bits of a pixel are
// contiguous, pixels run row-major. Bit index of (r, c, ch) is
// (r*width + c)*channels + ch.
class InterleavedFrame {
public:
  InterleavedFrame() = default;

  InterleavedFrame(std::size_t height, std::size_t width, std::size_t channels)
      : h_(height), w_(width), c_(channels), bits_(height * width * channels) {
    if (height == 0 || width == 0 || channels == 0)
      throw dimension_error("InterleavedFrame: dimensions must be nonzero");
  }

  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }
  std::size_t channels() const { return c_; }

  std::size_t bit_index(std::size_t r, std::size_t c, std::size_t ch) const {
    assert(r < h_ && c < w_ && ch < c_);
    return (r * w_ + c) * c_ + ch;
  }

  bool bit(std::size_t r, std::size_t c, std::size_t ch) const {
    return bits_.bit(bit_index(r, c, ch));
  }

  void set_bit(std::size_t r, std::size_t c, std::size_t ch, bool v) {
    bits_.set_bit(bit_index(r, c, ch), v);
  }

  // The flat bit string; also the order in which a frame feeds a dense layer.
  const BipolarBitVector& raw() const { return bits_; }
  BipolarBitVector& raw() { return bits_; }

  bool operator==(const InterleavedFrame&) const = default;

private:
  std::size_t h_ = 0, w_ = 0, c_ = 0;
  BipolarBitVector bits_;
};

// Dense tensor of signed integers with a declared bit width. Used for the
// non-binarized edges of a network (8-bit image input, wide final outputs).
class FixedPointTensor {
public:
  FixedPointTensor() = default;

  FixedPointTensor(std::vector<std::size_t> shape, unsigned width)
      : shape_(std::move(shape)), width_(width) {
    if (width_ == 0 || width_ > 32)
      throw dimension_error("FixedPointTensor: width must be in [1, 32]");
    std::size_t n = 1;
    for (std::size_t d : shape_) {
      if (d == 0) throw dimension_error("FixedPointTensor: zero-sized dimension");
      n *= d;
    }
    data_.assign(n, 0);
  }

  static bool fits(long long v, unsigned width) {
    if (width >= 32) return v >= INT32_MIN && v <= INT32_MAX;
    const long long lo = -(1LL << (width - 1));
    const long long hi = (1LL << (width - 1)) - 1;
    return v >= lo && v <= hi;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  unsigned width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  std::int32_t get(std::size_t i) const {
    assert(i < data_.size());
    return data_[i];
  }

  void set(std::size_t i, long long v) {
    assert(i < data_.size());
    if (!fits(v, width_))
      throw overflow_error("FixedPointTensor: value does not fit declared width");
    data_[i] = std::int32_t(v);
  }

  // Frame-shaped accessors for {H, W, C} tensors, pixel-major like
  // InterleavedFrame.
  std::size_t frame_index(std::size_t r, std::size_t c, std::size_t ch) const {
    assert(shape_.size() == 3);
    return (r * shape_[1] + c) * shape_[2] + ch;
  }

  std::int32_t at(std::size_t r, std::size_t c, std::size_t ch) const {
    return get(frame_index(r, c, ch));
  }

  void set_at(std::size_t r, std::size_t c, std::size_t ch, long long v) {
    set(frame_index(r, c, ch), v);
  }

  std::span<const std::int32_t> data() const { return data_; }

  bool operator==(const FixedPointTensor&) const = default;

private:
  std::vector<std::size_t> shape_;
  unsigned width_ = 0;
  std::vector<std::int32_t> data_;
};

}  // namespace bnnkit
