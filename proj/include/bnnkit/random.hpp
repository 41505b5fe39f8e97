#pragma once
// Deterministic parameter and input generation. Every draw uses raw
// mt19937_64 outputs reduced with explicit arithmetic, never the standard
// distributions, so the same seed yields the same bits on every platform.
//
// Batch normalization parameters are drawn from an exact power-of-two grid:
// slopes are powers of two and target thresholds sit on quarter-integers, so
// the threshold derivation sees doubles with no rounding error and the
// derived compare never lands within 0.1 of a tie.

#include <cstdint>
#include <random>
#include <vector>

#include "bitcore.hpp"
#include "compile.hpp"
#include "modelio.hpp"
#include "topology.hpp"

namespace bnnkit {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t raw() { return eng_(); }

  std::uint64_t below(std::uint64_t n) { return eng_() % n; }

  int pm1() { return (eng_() & 1) ? +1 : -1; }

  bool coin() { return (eng_() & 1) != 0; }

 private:
  std::mt19937_64 eng_;
};

inline BipolarBitVector random_bits(Rng& rng, std::size_t n) {
  BipolarBitVector v(n);
  for (std::size_t i = 0; i < n; ++i) v.set_bit(i, rng.coin());
  return v;
}

inline InterleavedFrame random_frame(Rng& rng, std::size_t h, std::size_t w,
                                     std::size_t c) {
  InterleavedFrame f(h, w, c);
  f.raw() = random_bits(rng, h * w * c);
  return f;
}

// Image-like fixed-point frame: non-negative values that fit the width.
inline FixedPointTensor random_fixed_frame(Rng& rng, std::size_t h, std::size_t w,
                                           std::size_t c, unsigned width = 8) {
  FixedPointTensor t({h, w, c}, width);
  const std::uint64_t span = std::uint64_t{1} << (width - 1);
  for (std::size_t i = 0; i < t.size(); ++i)
    t.set(i, std::int64_t(rng.below(span)));
  return t;
}

inline std::vector<int> random_weights(Rng& rng, std::size_t n) {
  std::vector<int> w(n);
  for (int& v : w) v = rng.pm1();
  return w;
}

inline BatchNormParams random_batchnorm(Rng& rng, std::size_t fanin) {
  static const double kScale[] = {0.5, 1.0, 2.0};
  BatchNormParams p;
  p.gamma = kScale[rng.below(3)] * double(rng.pm1());
  p.inv_std = kScale[rng.below(3)];
  p.mu = double(std::int64_t(rng.below(21)) - 10);
  // Target threshold on the quarter-integer grid, a little beyond [0, fanin]
  // on both sides so clamping paths get exercised too.
  const double tau = double(std::int64_t(rng.below(fanin + 5)) - 2) +
                     0.25 * double(1 + std::int64_t(rng.below(3)));
  p.beta = (p.mu - tau) * p.gamma * p.inv_std;
  return p;
}

// Fully specified random parameters for every layer of a topology.
inline std::vector<TrainedLayer> random_trained(const NetworkTopology& topo,
                                                std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TrainedLayer> out;
  for (const LayerSpec& spec : topo.layers) {
    TrainedLayer t;
    t.spec = spec;
    if (spec.has_matrix()) {
      t.weights = random_weights(rng, spec.matrix_rows() * spec.matrix_cols());
      if (spec.thresholded()) {
        t.batchnorm.reserve(spec.matrix_rows());
        for (std::size_t n = 0; n < spec.matrix_rows(); ++n)
          t.batchnorm.push_back(random_batchnorm(rng, spec.matrix_cols()));
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

// Small random but always-valid topology; exercises every layer kind.
inline NetworkTopology random_topology(Rng& rng) {
  NetworkTopology t;
  t.name = "rand";
  std::size_t flat;
  if (rng.coin()) {
    // Dense stack.
    flat = 8 * (1 + rng.below(24));
    const std::size_t depth = 1 + rng.below(3);
    for (std::size_t i = 0; i < depth; ++i) {
      const std::size_t out = 4 * (1 + rng.below(16));
      t.layers.push_back(fc_layer(LayerKind::BinaryFC, out, flat));
      flat = out;
    }
  } else {
    // Convolution stack: one fixed-point or binary conv, optional pooling.
    const std::size_t c = 1 + rng.below(4);
    const std::size_t hw = 6 + 2 * rng.below(4);
    const bool fixed = rng.coin();
    // Padding is a binary-frame feature; fixed-point frames stream unpadded.
    const PadMode pad =
        fixed || rng.coin() ? PadMode::None : PadMode::PlusOne;
    LayerSpec conv = conv_layer(fixed ? LayerKind::FixedInputConv : LayerKind::BinaryConv,
                                c, hw, hw, 2 * (1 + rng.below(8)), 3, 3, pad);
    if (fixed) conv.input_width = 8;
    t.layers.push_back(conv);
    std::size_t oh = conv.out_h(), ow = conv.out_w(), oc = conv.out_channels;
    if (oh % 2 == 0 && ow % 2 == 0 && rng.coin()) {
      t.layers.push_back(pool_layer(oc, oh, ow, 2));
      oh /= 2;
      ow /= 2;
    }
    flat = oh * ow * oc;
    const std::size_t out = 4 * (1 + rng.below(16));
    t.layers.push_back(fc_layer(LayerKind::BinaryFC, out, flat));
    flat = out;
  }
  if (rng.coin()) {
    LayerSpec out = fc_layer(LayerKind::OutputFC, 2 + rng.below(14), flat);
    out.output_width = 16;
    t.layers.push_back(out);
  }
  t.validate();
  return t;
}

inline ImageSet random_images(Rng& rng, std::size_t count, std::size_t rows,
                              std::size_t cols, std::size_t channels = 1) {
  ImageSet s;
  s.count = count;
  s.rows = rows;
  s.cols = cols;
  s.channels = channels;
  s.pixels.resize(count * rows * cols * channels);
  for (std::uint8_t& p : s.pixels) p = std::uint8_t(rng.below(256));
  return s;
}

}  // namespace bnnkit
