#pragma once
// Bit-exact models of the streaming execution units: the folded
// matrix-vector-threshold unit, the sliding window generator and the
// boolean pooling unit, plus a whole-network runner.
//
// Every unit also reports the cycle count its hardware counterpart would
// take, which the timing models build on.

#include <algorithm>
#include <cstdint>
#include <variant>
#include <vector>

#include "bitcore.hpp"
#include "compile.hpp"
#include "errors.hpp"
#include "topology.hpp"

namespace bnnkit {

// Processing-element geometry of one matrix unit: `pe` neuron lanes, each
// consuming `simd` synapses per cycle. Zero means "fully parallel" and is
// resolved against the layer shape.
struct MVTUConfig {
  std::size_t pe = 0;
  std::size_t simd = 0;
};

struct MvtuResult {
  BipolarBitVector output;
  std::uint64_t cycles = 0;
};

struct MvtuIntResult {
  FixedPointTensor output;
  std::uint64_t cycles = 0;
};

namespace detail {

struct Geometry {
  std::size_t pe, simd, neuron_tiles, synapse_tiles;
};

inline Geometry resolve_geometry(const CompiledLayer& l, MVTUConfig cfg) {
  const std::size_t x = l.neurons();
  const std::size_t y = l.fanin();
  const std::size_t pe = cfg.pe == 0 ? x : cfg.pe;
  const std::size_t simd = cfg.simd == 0 ? y : cfg.simd;
  if (pe == 0 || simd == 0 || x % pe != 0 || y % simd != 0)
    throw dimension_error("mvtu: PE/SIMD geometry must divide the layer shape (" +
                          std::to_string(x) + "x" + std::to_string(y) + " vs " +
                          std::to_string(pe) + "/" + std::to_string(simd) + ")");
  return {pe, simd, x / pe, y / simd};
}

}  // namespace detail

// Folded binary matrix pass: iterates neuron_tiles x synapse_tiles tiles of
// pe x simd synapses, one tile per cycle, accumulating agreement counts and
// comparing against the unsigned thresholds.
inline MvtuResult mvtu_execute(const CompiledLayer& l, const BipolarBitVector& input,
                               MVTUConfig cfg = {}) {
  if (l.spec.kind != LayerKind::BinaryFC && l.spec.kind != LayerKind::BinaryConv)
    throw compile_error("mvtu_execute: layer is not a binary matrix layer");
  if (input.length() != l.fanin())
    throw dimension_error("mvtu_execute: input length does not match fan-in");
  const auto g = detail::resolve_geometry(l, cfg);

  MvtuResult res;
  res.output = BipolarBitVector(l.neurons());
  std::vector<std::uint32_t> acc(g.pe);
  for (std::size_t nt = 0; nt < g.neuron_tiles; ++nt) {
    std::fill(acc.begin(), acc.end(), 0);
    for (std::size_t st = 0; st < g.synapse_tiles; ++st) {
      const std::size_t lo = st * g.simd;
      for (std::size_t p = 0; p < g.pe; ++p)
        acc[p] += std::uint32_t(
            xnor_popcount_range(l.weights.row(nt * g.pe + p), input, lo, lo + g.simd));
      ++res.cycles;
    }
    for (std::size_t p = 0; p < g.pe; ++p) {
      const std::size_t n = nt * g.pe + p;
      res.output.set_bit(n, acc[p] >= l.thresholds[n]);
    }
  }
  return res;
}

// Same tile walk for fixed-point inputs: signed multiply-accumulate with the
// bipolar weights, compared against the integer thresholds. Partial sums are
// checked against the declared accumulator width after every tile.
inline MvtuResult mvtu_execute_fixedpoint_input(const CompiledLayer& l,
                                                std::span<const std::int32_t> input,
                                                MVTUConfig cfg = {}) {
  if (l.spec.kind != LayerKind::FixedInputFC && l.spec.kind != LayerKind::FixedInputConv)
    throw compile_error("mvtu_execute_fixedpoint_input: layer has no fixed-point input");
  if (input.size() != l.fanin())
    throw dimension_error("mvtu_execute_fixedpoint_input: input length mismatch");
  const auto g = detail::resolve_geometry(l, cfg);
  const long long lo_limit = -(1LL << (l.acc_width - 1));
  const long long hi_limit = (1LL << (l.acc_width - 1)) - 1;

  MvtuResult res;
  res.output = BipolarBitVector(l.neurons());
  std::vector<long long> acc(g.pe);
  for (std::size_t nt = 0; nt < g.neuron_tiles; ++nt) {
    std::fill(acc.begin(), acc.end(), 0);
    for (std::size_t st = 0; st < g.synapse_tiles; ++st) {
      for (std::size_t p = 0; p < g.pe; ++p) {
        const BipolarBitVector& row = l.weights.row(nt * g.pe + p);
        long long a = acc[p];
        for (std::size_t s = st * g.simd; s < (st + 1) * g.simd; ++s)
          a += row.bit(s) ? input[s] : -(long long)(input[s]);
        if (a < lo_limit || a > hi_limit)
          throw overflow_error("mvtu: accumulator exceeds declared width");
        acc[p] = a;
      }
      ++res.cycles;
    }
    for (std::size_t p = 0; p < g.pe; ++p) {
      const std::size_t n = nt * g.pe + p;
      res.output.set_bit(n, acc[p] >= l.fx_thresholds[n]);
    }
  }
  return res;
}

inline MvtuResult mvtu_execute_fixedpoint_input(const CompiledLayer& l,
                                                const FixedPointTensor& input,
                                                MVTUConfig cfg = {}) {
  return mvtu_execute_fixedpoint_input(l, input.data(), cfg);
}

// Thresholding removed: emits the signed dot products 2*count - fanin.
inline MvtuIntResult mvtu_execute_nonthresholded(const CompiledLayer& l,
                                                 const BipolarBitVector& input,
                                                 MVTUConfig cfg = {}) {
  if (l.spec.kind != LayerKind::OutputFC)
    throw compile_error("mvtu_execute_nonthresholded: layer is thresholded");
  if (input.length() != l.fanin())
    throw dimension_error("mvtu_execute_nonthresholded: input length mismatch");
  const auto g = detail::resolve_geometry(l, cfg);

  MvtuIntResult res;
  res.output = FixedPointTensor({l.neurons()}, l.spec.output_width);
  std::vector<std::uint32_t> acc(g.pe);
  for (std::size_t nt = 0; nt < g.neuron_tiles; ++nt) {
    std::fill(acc.begin(), acc.end(), 0);
    for (std::size_t st = 0; st < g.synapse_tiles; ++st) {
      const std::size_t lo = st * g.simd;
      for (std::size_t p = 0; p < g.pe; ++p)
        acc[p] += std::uint32_t(
            xnor_popcount_range(l.weights.row(nt * g.pe + p), input, lo, lo + g.simd));
      ++res.cycles;
    }
    for (std::size_t p = 0; p < g.pe; ++p) {
      const std::size_t n = nt * g.pe + p;
      res.output.set(n, 2LL * acc[p] - (long long)(l.fanin()));
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Sliding window generation (lowering).

// Emits one column per output pixel, row-major over output positions. Column
// bits are window-position major with the input channels interleaved inside
// each position, matching pack_filter_matrix. Padding (if any) adds
// (window-1)/2 rows/columns on each side, filled with the chosen constant.
inline std::vector<BipolarBitVector> sliding_window(const InterleavedFrame& in,
                                                    std::size_t win_j, std::size_t win_k,
                                                    PadMode pad = PadMode::None) {
  if (win_j == 0 || win_k == 0) throw dimension_error("sliding_window: zero window");
  const std::size_t pr = pad == PadMode::None ? 0 : (win_j - 1) / 2;
  const std::size_t pc = pad == PadMode::None ? 0 : (win_k - 1) / 2;
  if (in.height() + 2 * pr < win_j || in.width() + 2 * pc < win_k)
    throw dimension_error("sliding_window: window larger than (padded) input");
  const bool pad_bit = pad == PadMode::PlusOne;  // PadMode::None never reads pads
  const std::size_t oh = in.height() + 2 * pr - win_j + 1;
  const std::size_t ow = in.width() + 2 * pc - win_k + 1;
  const std::size_t c = in.channels();

  std::vector<BipolarBitVector> cols;
  cols.reserve(oh * ow);
  for (std::size_t r = 0; r < oh; ++r)
    for (std::size_t col = 0; col < ow; ++col) {
      BipolarBitVector v(win_j * win_k * c);
      for (std::size_t j = 0; j < win_j; ++j)
        for (std::size_t k = 0; k < win_k; ++k) {
          const long rr = long(r + j) - long(pr);
          const long cc = long(col + k) - long(pc);
          const bool inside = rr >= 0 && cc >= 0 && rr < long(in.height()) &&
                              cc < long(in.width());
          for (std::size_t ch = 0; ch < c; ++ch) {
            const bool bit =
                inside ? in.bit(std::size_t(rr), std::size_t(cc), ch) : pad_bit;
            v.set_bit((j * win_k + k) * c + ch, bit);
          }
        }
      cols.push_back(std::move(v));
    }
  return cols;
}

// Fixed-point variant for image inputs; padding is not supported here.
inline std::vector<std::vector<std::int32_t>> sliding_window_fixed(
    const FixedPointTensor& in, std::size_t win_j, std::size_t win_k) {
  if (in.shape().size() != 3)
    throw dimension_error("sliding_window_fixed: tensor is not a frame");
  const std::size_t h = in.shape()[0], w = in.shape()[1], c = in.shape()[2];
  if (win_j == 0 || win_k == 0 || h < win_j || w < win_k)
    throw dimension_error("sliding_window_fixed: window larger than input");
  const std::size_t oh = h - win_j + 1, ow = w - win_k + 1;
  std::vector<std::vector<std::int32_t>> cols;
  cols.reserve(oh * ow);
  for (std::size_t r = 0; r < oh; ++r)
    for (std::size_t col = 0; col < ow; ++col) {
      std::vector<std::int32_t> v(win_j * win_k * c);
      for (std::size_t j = 0; j < win_j; ++j)
        for (std::size_t k = 0; k < win_k; ++k)
          for (std::size_t ch = 0; ch < c; ++ch)
            v[(j * win_k + k) * c + ch] = in.at(r + j, col + k, ch);
      cols.push_back(std::move(v));
    }
  return cols;
}

struct ConvResult {
  InterleavedFrame output;
  std::uint64_t cycles = 0;
};

// Full convolution layer: sliding window feeding the matrix unit once per
// output pixel. The emitted frame is already channel-interleaved. Total
// cycles are passes * neuron_tiles * synapse_tiles.
inline ConvResult conv_layer_execute(const CompiledLayer& l, const InterleavedFrame& in,
                                     MVTUConfig cfg = {}) {
  if (l.spec.kind != LayerKind::BinaryConv)
    throw compile_error("conv_layer_execute: not a binary convolution layer");
  if (in.height() != l.spec.in_h || in.width() != l.spec.in_w ||
      in.channels() != l.spec.in_channels)
    throw dimension_error("conv_layer_execute: frame shape mismatch");
  auto cols = sliding_window(in, l.spec.win_j, l.spec.win_k, l.spec.pad);
  ConvResult res;
  res.output = InterleavedFrame(l.spec.out_h(), l.spec.out_w(), l.spec.out_channels);
  std::size_t px = 0;
  for (std::size_t r = 0; r < l.spec.out_h(); ++r)
    for (std::size_t c = 0; c < l.spec.out_w(); ++c, ++px) {
      MvtuResult m = mvtu_execute(l, cols[px], cfg);
      res.cycles += m.cycles;
      for (std::size_t ch = 0; ch < l.spec.out_channels; ++ch)
        res.output.set_bit(r, c, ch, m.output.bit(ch));
    }
  return res;
}

inline ConvResult conv_layer_execute_fixed(const CompiledLayer& l,
                                           const FixedPointTensor& in,
                                           MVTUConfig cfg = {}) {
  if (l.spec.kind != LayerKind::FixedInputConv)
    throw compile_error("conv_layer_execute_fixed: not a fixed-input convolution");
  if (in.shape().size() != 3 || in.shape()[0] != l.spec.in_h ||
      in.shape()[1] != l.spec.in_w || in.shape()[2] != l.spec.in_channels)
    throw dimension_error("conv_layer_execute_fixed: frame shape mismatch");
  if (l.spec.pad != PadMode::None)
    throw dimension_error("conv_layer_execute_fixed: padding not supported");
  auto cols = sliding_window_fixed(in, l.spec.win_j, l.spec.win_k);
  ConvResult res;
  res.output = InterleavedFrame(l.spec.out_h(), l.spec.out_w(), l.spec.out_channels);
  std::size_t px = 0;
  for (std::size_t r = 0; r < l.spec.out_h(); ++r)
    for (std::size_t c = 0; c < l.spec.out_w(); ++c, ++px) {
      MvtuResult m = mvtu_execute_fixedpoint_input(l, cols[px], cfg);
      res.cycles += m.cycles;
      for (std::size_t ch = 0; ch < l.spec.out_channels; ++ch)
        res.output.set_bit(r, c, ch, m.output.bit(ch));
    }
  return res;
}

// ---------------------------------------------------------------------------
// Pooling unit. Max pooling over +/-1 activations is a boolean OR, min is an
// AND, average is a majority vote (ties round up to +1).
//
// The implementation mirrors the streaming datapath: for every band of k
// input rows it fills k line buffers (one interleaved row each, i.e.
// channels * k single-channel line buffers of the image width), reduces each
// buffer horizontally over k neighbouring pixels, then reduces the k partial
// rows vertically.

namespace detail {

enum class PoolOp { Or, And, Majority };

inline InterleavedFrame pool_execute(const InterleavedFrame& in, std::size_t k,
                                     PoolOp op) {
  if (k == 0) throw dimension_error("pooling: zero window");
  if (in.height() % k != 0 || in.width() % k != 0)
    throw dimension_error("pooling: window does not tile the frame");
  const std::size_t oh = in.height() / k, ow = in.width() / k, c = in.channels();
  InterleavedFrame out(oh, ow, c);

  std::vector<BipolarBitVector> lines(k);
  std::vector<std::uint32_t> horiz(k);
  for (std::size_t band = 0; band < oh; ++band) {
    // Ingest k rows; row r of the frame is one contiguous bit run.
    for (std::size_t j = 0; j < k; ++j) {
      BipolarBitVector line(in.width() * c);
      const std::size_t base = (band * k + j) * in.width() * c;
      for (std::size_t b = 0; b < in.width() * c; ++b)
        line.set_bit(b, in.raw().bit(base + b));
      lines[j] = std::move(line);
    }
    for (std::size_t col = 0; col < ow; ++col)
      for (std::size_t ch = 0; ch < c; ++ch) {
        // Horizontal reduce within each line buffer...
        for (std::size_t j = 0; j < k; ++j) {
          std::uint32_t acc = op == PoolOp::And ? 1 : 0;
          for (std::size_t i = 0; i < k; ++i) {
            const bool bit = lines[j].bit((col * k + i) * c + ch);
            switch (op) {
              case PoolOp::Or: acc |= bit ? 1 : 0; break;
              case PoolOp::And: acc &= bit ? 1 : 0; break;
              case PoolOp::Majority: acc += bit ? 1 : 0; break;
            }
          }
          horiz[j] = acc;
        }
        // ...then vertical reduce across the k lines.
        bool result;
        if (op == PoolOp::Or) {
          result = false;
          for (std::size_t j = 0; j < k; ++j) result = result || horiz[j] != 0;
        } else if (op == PoolOp::And) {
          result = true;
          for (std::size_t j = 0; j < k; ++j) result = result && horiz[j] != 0;
        } else {
          std::uint32_t count = 0;
          for (std::size_t j = 0; j < k; ++j) count += horiz[j];
          result = 2 * count >= k * k;  // tie rounds up to +1
        }
        out.set_bit(band, col, ch, result);
      }
  }
  return out;
}

}  // namespace detail

inline InterleavedFrame or_pool(const InterleavedFrame& in, std::size_t k) {
  return detail::pool_execute(in, k, detail::PoolOp::Or);
}

inline InterleavedFrame and_pool(const InterleavedFrame& in, std::size_t k) {
  return detail::pool_execute(in, k, detail::PoolOp::And);
}

inline InterleavedFrame majority_pool(const InterleavedFrame& in, std::size_t k) {
  return detail::pool_execute(in, k, detail::PoolOp::Majority);
}

// ---------------------------------------------------------------------------
// Whole-network execution.

using NetworkValue = std::variant<BipolarBitVector, InterleavedFrame, FixedPointTensor>;

namespace detail {

inline BipolarBitVector as_bits(const NetworkValue& v, std::size_t expected) {
  if (const auto* b = std::get_if<BipolarBitVector>(&v)) {
    if (b->length() != expected)
      throw dimension_error("network: vector length does not match layer fan-in");
    return *b;
  }
  if (const auto* f = std::get_if<InterleavedFrame>(&v)) {
    if (f->raw().length() != expected)
      throw dimension_error("network: frame size does not match layer fan-in");
    return f->raw();  // flatten: pixel-major, channels interleaved
  }
  throw dimension_error("network: fixed-point value fed to a binary layer");
}

inline InterleavedFrame as_frame(const NetworkValue& v, std::size_t h, std::size_t w,
                                 std::size_t c) {
  if (const auto* f = std::get_if<InterleavedFrame>(&v)) {
    if (f->height() != h || f->width() != w || f->channels() != c)
      throw dimension_error("network: frame shape mismatch");
    return *f;
  }
  throw dimension_error("network: layer expects a binary frame");
}

}  // namespace detail

struct NetworkRunResult {
  NetworkValue output;
  std::uint64_t cycles = 0;                // sum of matrix-unit cycles
  std::vector<NetworkValue> trace;         // per-layer outputs
};

// Runs a compiled network. `configs` (if non-empty) supplies one MVTUConfig
// per matrix layer, in network order; missing/empty means fully parallel.
inline NetworkRunResult run_network(const CompiledNetwork& net, const NetworkValue& input,
                                    std::span<const MVTUConfig> configs = {}) {
  NetworkRunResult res;
  NetworkValue cur = input;
  std::size_t mi = 0;  // matrix-layer counter
  for (const CompiledLayer& l : net.layers) {
    MVTUConfig cfg{};
    if (l.spec.has_matrix()) {
      if (!configs.empty()) {
        if (mi >= configs.size())
          throw dimension_error("network: folding config shorter than network");
        cfg = configs[mi];
      }
      ++mi;
    }
    switch (l.spec.kind) {
      case LayerKind::BinaryFC: {
        MvtuResult m = mvtu_execute(l, detail::as_bits(cur, l.fanin()), cfg);
        res.cycles += m.cycles;
        cur = std::move(m.output);
        break;
      }
      case LayerKind::OutputFC: {
        MvtuIntResult m =
            mvtu_execute_nonthresholded(l, detail::as_bits(cur, l.fanin()), cfg);
        res.cycles += m.cycles;
        cur = std::move(m.output);
        break;
      }
      case LayerKind::FixedInputFC: {
        const auto* t = std::get_if<FixedPointTensor>(&cur);
        if (!t || t->size() != l.fanin())
          throw dimension_error("network: fixed-point input shape mismatch");
        MvtuResult m = mvtu_execute_fixedpoint_input(l, *t, cfg);
        res.cycles += m.cycles;
        cur = std::move(m.output);
        break;
      }
      case LayerKind::BinaryConv: {
        ConvResult r = conv_layer_execute(
            l, detail::as_frame(cur, l.spec.in_h, l.spec.in_w, l.spec.in_channels), cfg);
        res.cycles += r.cycles;
        cur = std::move(r.output);
        break;
      }
      case LayerKind::FixedInputConv: {
        const auto* t = std::get_if<FixedPointTensor>(&cur);
        if (!t) throw dimension_error("network: layer expects a fixed-point frame");
        ConvResult r = conv_layer_execute_fixed(l, *t, cfg);
        res.cycles += r.cycles;
        cur = std::move(r.output);
        break;
      }
      case LayerKind::MaxPool: {
        cur = or_pool(
            detail::as_frame(cur, l.spec.in_h, l.spec.in_w, l.spec.in_channels),
            l.spec.pool_k);
        break;
      }
    }
    res.trace.push_back(cur);
  }
  res.output = cur;
  return res;
}

}  // namespace bnnkit
