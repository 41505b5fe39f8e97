#pragma once
// Turns trained parameters into an executable bit-level network: batch
// normalization folded into integer thresholds, weights packed into bit
// matrices, channels interleaved, filters lowered to matrix rows.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bitcore.hpp"
#include "errors.hpp"
#include "topology.hpp"

namespace bnnkit {

// Batch normalization y = gamma * (a - mu) * inv_std + beta, applied to the
// pre-activation a. The sign activation maps y >= 0 to +1.
struct BatchNormParams {
  double gamma = 1.0;
  double mu = 0.0;
  double inv_std = 1.0;
  double beta = 0.0;

  bool operator==(const BatchNormParams&) const = default;
};

struct ThresholdResult {
  std::uint32_t tau_plus;  // unsigned popcount threshold, in [0, fanin + 1]
  bool flip;               // weights of this neuron were sign-flipped
};

inline unsigned ceil_log2(std::uint64_t n) {
  unsigned b = 0;
  while ((std::uint64_t{1} << b) < n) ++b;
  return b;
}

// Accumulator width for a popcount over `fanin` bits: enough to hold every
// count in [0, fanin] plus the never-fires threshold fanin + 1.
inline unsigned accumulator_width(std::size_t fanin) {
  unsigned t = 1 + ceil_log2(fanin);
  return t < 2 ? 2 : t;
}

// Accumulator width for signed sums of `fanin` inputs of `in_width` bits,
// treating inputs as magnitudes up to 2^in_width - 1.
inline unsigned accumulator_width_fixed(std::size_t fanin, unsigned in_width) {
  const std::uint64_t max_abs =
      std::uint64_t(fanin) * ((std::uint64_t{1} << in_width) - 1);
  unsigned bits = 1;
  while ((std::uint64_t{1} << (bits - 1)) <= max_abs && bits < 63) ++bits;
  return bits;  // sign bit included
}

// Collapses batch normalization + sign into one unsigned popcount compare.
//
// Solving gamma*(a - mu)*inv_std + beta >= 0 for the bipolar dot product
// a = 2c - Y gives a threshold tau = mu - beta/(gamma*inv_std) on a. When the
// slope gamma*inv_std is negative the comparison direction reverses; flipping
// the neuron's weights negates a, so the unsigned compare c >= tau_plus works
// for both slopes. tau_plus = ceil((tau + Y)/2), clamped to [0, Y+1] where 0
// always fires and Y+1 never fires.
inline ThresholdResult derive_threshold(const BatchNormParams& t, std::size_t fanin) {
  const double slope = t.gamma * t.inv_std;
  if (slope == 0.0)
    throw compile_error("batch normalization has zero slope (gamma * inv_std == 0)");
  double tau = t.mu - t.beta / slope;
  const bool flip = slope < 0.0;
  if (flip) tau = -tau;
  const double tp = std::ceil((tau + double(fanin)) / 2.0);
  std::uint32_t tau_plus;
  if (tp <= 0.0)
    tau_plus = 0;
  else if (tp > double(fanin))
    tau_plus = std::uint32_t(fanin) + 1;
  else
    tau_plus = std::uint32_t(tp);
  return {tau_plus, flip};
}

// Same folding for layers with fixed-point inputs: the integer pre-activation
// is compared directly against ceil(tau), sign-flip handled the same way.
inline std::pair<std::int32_t, bool> derive_fixed_threshold(const BatchNormParams& t) {
  const double slope = t.gamma * t.inv_std;
  if (slope == 0.0)
    throw compile_error("batch normalization has zero slope (gamma * inv_std == 0)");
  double tau = t.mu - t.beta / slope;
  const bool flip = slope < 0.0;
  if (flip) tau = -tau;
  double c = std::ceil(tau);
  if (c > double(INT32_MAX)) c = double(INT32_MAX);
  if (c < double(INT32_MIN)) c = double(INT32_MIN);
  return {std::int32_t(c), flip};
}

// Packs per-channel bit planes into one pixel-major frame.
inline InterleavedFrame interleave_channels(const std::vector<BipolarBitVector>& planes,
                                            std::size_t h, std::size_t w) {
  if (planes.empty()) throw dimension_error("interleave_channels: no planes");
  for (const auto& p : planes)
    if (p.length() != h * w)
      throw dimension_error("interleave_channels: plane size does not match h*w");
  InterleavedFrame f(h, w, planes.size());
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c)
      for (std::size_t ch = 0; ch < planes.size(); ++ch)
        f.set_bit(r, c, ch, planes[ch].bit(r * w + c));
  return f;
}

inline std::vector<BipolarBitVector> deinterleave_channels(const InterleavedFrame& f) {
  std::vector<BipolarBitVector> planes(f.channels(),
                                       BipolarBitVector(f.height() * f.width()));
  for (std::size_t r = 0; r < f.height(); ++r)
    for (std::size_t c = 0; c < f.width(); ++c)
      for (std::size_t ch = 0; ch < f.channels(); ++ch)
        planes[ch].set_bit(r * f.width() + c, f.bit(r, c, ch));
  return planes;
}

// Lowers convolution filters w[n][s][j][k] (flat, row-major in that order) to
// a bit matrix with one row per output channel. Columns are ordered window
// position major with channels interleaved inside each position — the same
// order a sliding window emits pixels from an interleaved frame — so row n
// dotted with a lowered image column equals the direct convolution sum.
inline BitMatrix pack_filter_matrix(std::span<const int> weights, std::size_t out_ch,
                                    std::size_t in_ch, std::size_t win_j,
                                    std::size_t win_k) {
  const std::size_t per_row = in_ch * win_j * win_k;
  if (weights.size() != out_ch * per_row)
    throw dimension_error("pack_filter_matrix: weight count does not match shape");
  BitMatrix m(out_ch, per_row);
  for (std::size_t n = 0; n < out_ch; ++n)
    for (std::size_t s = 0; s < in_ch; ++s)
      for (std::size_t j = 0; j < win_j; ++j)
        for (std::size_t k = 0; k < win_k; ++k) {
          const int v = weights[((n * in_ch + s) * win_j + j) * win_k + k];
          if (v != 1 && v != -1)
            throw std::invalid_argument("pack_filter_matrix: weight must be +1 or -1");
          m.set_bit(n, (j * win_k + k) * in_ch + s, v == 1);
        }
  return m;
}

// One layer of trained parameters. Weights are bipolar everywhere; dense
// layers use weights[x*in + y], convolutions w[n][s][j][k] flattened
// row-major. batchnorm has one entry per neuron (output channel for
// convolutions) and is required exactly on thresholded layers. bias is
// optional and folded into beta.
struct TrainedLayer {
  LayerSpec spec;
  std::vector<int> weights;
  std::vector<BatchNormParams> batchnorm;
  std::vector<double> bias;
};

struct CompiledLayer {
  LayerSpec spec;
  BitMatrix weights;                         // post-flip rows; empty for pooling
  std::vector<std::uint32_t> thresholds;     // tau_plus per neuron (binary input)
  std::vector<std::int32_t> fx_thresholds;   // ceil(tau) per neuron (fixed input)
  std::vector<std::uint8_t> flips;           // audit trail of sign flips
  unsigned acc_width = 0;

  std::size_t fanin() const { return spec.matrix_cols(); }
  std::size_t neurons() const { return spec.matrix_rows(); }

  bool operator==(const CompiledLayer&) const = default;
};

struct CompiledNetwork {
  NetworkTopology topology;
  std::vector<CompiledLayer> layers;

  bool operator==(const CompiledNetwork&) const = default;
};

namespace detail {

inline std::string at_layer(std::size_t i, const std::string& msg) {
  return "layer " + std::to_string(i) + ": " + msg;
}

inline bool fixed_input(LayerKind k) {
  return k == LayerKind::FixedInputFC || k == LayerKind::FixedInputConv;
}

}  // namespace detail

// Compiles a trained network into packed weights and integer thresholds.
// Throws compile_error naming layer and neuron for degenerate batch
// normalization, dimension_error for shape disagreements.
inline CompiledNetwork compile_network(const std::vector<TrainedLayer>& trained) {
  CompiledNetwork net;
  for (const TrainedLayer& t : trained) net.topology.layers.push_back(t.spec);
  net.topology.validate();

  for (std::size_t li = 0; li < trained.size(); ++li) {
    const TrainedLayer& t = trained[li];
    CompiledLayer out;
    out.spec = t.spec;

    if (!t.spec.has_matrix()) {
      if (!t.weights.empty() || !t.batchnorm.empty())
        throw dimension_error(detail::at_layer(li, "pooling layer carries parameters"));
      net.layers.push_back(std::move(out));
      continue;
    }

    const std::size_t x = t.spec.matrix_rows();
    const std::size_t y = t.spec.matrix_cols();
    if (t.weights.size() != x * y)
      throw dimension_error(detail::at_layer(li, "weight count does not match shape"));
    if (!t.bias.empty() && t.bias.size() != x)
      throw dimension_error(detail::at_layer(li, "bias count does not match neurons"));

    const bool needs_bn = t.spec.thresholded();
    if (needs_bn && t.batchnorm.size() != x)
      throw dimension_error(
          detail::at_layer(li, "batch normalization count does not match neurons"));
    if (!needs_bn && !t.batchnorm.empty())
      throw dimension_error(
          detail::at_layer(li, "non-thresholded layer carries batch normalization"));

    // Pack weights first (unflipped), in matrix orientation.
    BitMatrix m = t.spec.is_conv()
                      ? pack_filter_matrix(t.weights, t.spec.out_channels,
                                           t.spec.in_channels, t.spec.win_j,
                                           t.spec.win_k)
                      : BitMatrix(x, y);
    if (!t.spec.is_conv()) {
      for (std::size_t r = 0; r < x; ++r)
        for (std::size_t c = 0; c < y; ++c) {
          const int v = t.weights[r * y + c];
          if (v != 1 && v != -1)
            throw std::invalid_argument(
                detail::at_layer(li, "weight must be +1 or -1"));
          m.set_bit(r, c, v == 1);
        }
    }

    const bool fixed = detail::fixed_input(t.spec.kind);
    if (needs_bn) {
      out.flips.assign(x, 0);
      for (std::size_t n = 0; n < x; ++n) {
        BatchNormParams bn = t.batchnorm[n];
        const double slope = bn.gamma * bn.inv_std;
        if (slope == 0.0)
          throw compile_error(detail::at_layer(
              li, "neuron " + std::to_string(n) +
                      ": batch normalization has zero slope"));
        if (!t.bias.empty()) bn.beta += slope * t.bias[n];  // fold bias into beta
        bool flip;
        if (fixed) {
          auto [tau, fl] = derive_fixed_threshold(bn);
          out.fx_thresholds.push_back(tau);
          flip = fl;
        } else {
          ThresholdResult r = derive_threshold(bn, y);
          out.thresholds.push_back(r.tau_plus);
          flip = r.flip;
        }
        if (flip) {
          out.flips[n] = 1;
          m.set_row(n, m.row(n).complemented());
        }
      }
    } else if (!t.bias.empty()) {
      throw dimension_error(
          detail::at_layer(li, "non-thresholded layer cannot absorb a bias"));
    }

    out.weights = std::move(m);
    out.acc_width = fixed ? accumulator_width_fixed(y, t.spec.input_width)
                          : accumulator_width(y);
    net.layers.push_back(std::move(out));
  }
  return net;
}

}  // namespace bnnkit
