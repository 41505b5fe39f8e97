#pragma once
// Independent full-precision reference path. Everything here is evaluated
// with plain nested loops over doubles and integers, in fixed ascending
// order, and never touches the bit-packed execution path. Used as the truth
// source in equivalence tests.
//
// Frame data is carried as one dense vector per channel (row-major pixels);
// flattening a frame for a dense layer interleaves channels per pixel, the
// same order the packed frames use.

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "compile.hpp"
#include "errors.hpp"
#include "topology.hpp"

namespace bnnkit::oracle {

inline double batchnorm(double a, const BatchNormParams& t) {
  return t.gamma * (a - t.mu) * t.inv_std + t.beta;
}

// Sign activation with Sign(0) = +1.
inline int sign_activation(double x) { return x >= 0.0 ? +1 : -1; }

struct RealFcLayer {
  std::size_t out = 0, in = 0;
  std::vector<double> weights;             // weights[x*in + y]
  std::vector<double> bias;                // optional
  std::vector<BatchNormParams> batchnorm;  // optional
  bool use_batchnorm = false;
  bool use_sign = false;
};

inline std::vector<double> fc_forward(const RealFcLayer& l, std::span<const double> input) {
  if (input.size() != l.in) throw dimension_error("fc_forward: input length mismatch");
  if (l.weights.size() != l.out * l.in)
    throw dimension_error("fc_forward: weight count mismatch");
  std::vector<double> out(l.out);
  for (std::size_t x = 0; x < l.out; ++x) {
    double acc = 0.0;
    for (std::size_t y = 0; y < l.in; ++y) acc += l.weights[x * l.in + y] * input[y];
    if (!l.bias.empty()) acc += l.bias[x];
    if (l.use_batchnorm) acc = batchnorm(acc, l.batchnorm[x]);
    out[x] = l.use_sign ? double(sign_activation(acc)) : acc;
  }
  return out;
}

using Planes = std::vector<std::vector<double>>;        // [ch][r*W + c]
using IntPlanes = std::vector<std::vector<long long>>;  // [ch][r*W + c]

struct RealConvLayer {
  std::size_t in_ch = 0, in_h = 0, in_w = 0;
  std::size_t out_ch = 0, win_j = 0, win_k = 0;
  std::vector<double> weights;  // w[n][s][j][k] flattened row-major
  std::vector<double> bias;
  std::vector<BatchNormParams> batchnorm;
  bool use_batchnorm = false;
  bool use_sign = false;
};

// Direct unpadded convolution: out[n][r][c] = sum over s, j, k of
// w[n][s][j][k] * in[s][r+j][c+k].
inline Planes conv_forward(const RealConvLayer& l, const Planes& input) {
  if (input.size() != l.in_ch) throw dimension_error("conv_forward: channel mismatch");
  for (const auto& p : input)
    if (p.size() != l.in_h * l.in_w)
      throw dimension_error("conv_forward: plane size mismatch");
  if (l.weights.size() != l.out_ch * l.in_ch * l.win_j * l.win_k)
    throw dimension_error("conv_forward: weight count mismatch");
  if (l.in_h < l.win_j || l.in_w < l.win_k)
    throw dimension_error("conv_forward: window larger than input");

  const std::size_t oh = l.in_h - l.win_j + 1;
  const std::size_t ow = l.in_w - l.win_k + 1;
  Planes out(l.out_ch, std::vector<double>(oh * ow));
  for (std::size_t n = 0; n < l.out_ch; ++n) {
    for (std::size_t r = 0; r < oh; ++r)
      for (std::size_t c = 0; c < ow; ++c) {
        double acc = 0.0;
        for (std::size_t s = 0; s < l.in_ch; ++s) {
          const std::vector<double>& plane = input[s];
          const double* wrow = &l.weights[(n * l.in_ch + s) * l.win_j * l.win_k];
          for (std::size_t j = 0; j < l.win_j; ++j) {
            const double* prow = &plane[(r + j) * l.in_w + c];
            for (std::size_t k = 0; k < l.win_k; ++k)
              acc += wrow[j * l.win_k + k] * prow[k];
          }
        }
        if (!l.bias.empty()) acc += l.bias[n];
        if (l.use_batchnorm) acc = batchnorm(acc, l.batchnorm[n]);
        out[n][r * ow + c] = l.use_sign ? double(sign_activation(acc)) : acc;
      }
  }
  return out;
}

namespace detail {

template <typename Reduce>
IntPlanes tile_pool(const IntPlanes& in, std::size_t h, std::size_t w, std::size_t k,
                    Reduce reduce) {
  if (k == 0) throw dimension_error("pooling: zero window");
  if (h % k != 0 || w % k != 0)
    throw dimension_error("pooling: window does not tile the image");
  for (const auto& p : in)
    if (p.size() != h * w) throw dimension_error("pooling: plane size mismatch");
  IntPlanes out(in.size(), std::vector<long long>((h / k) * (w / k)));
  for (std::size_t ch = 0; ch < in.size(); ++ch)
    for (std::size_t r = 0; r < h / k; ++r)
      for (std::size_t c = 0; c < w / k; ++c) {
        long long acc = in[ch][(r * k) * w + (c * k)];
        bool first = true;
        for (std::size_t j = 0; j < k; ++j)
          for (std::size_t i = 0; i < k; ++i) {
            const long long v = in[ch][(r * k + j) * w + (c * k + i)];
            if (first) {
              acc = v;
              first = false;
            } else {
              acc = reduce(acc, v);
            }
          }
        out[ch][r * (w / k) + c] = acc;
      }
  return out;
}

}  // namespace detail

// Exact integer pooling over non-overlapping k x k tiles.
inline IntPlanes maxpool_int(const IntPlanes& in, std::size_t h, std::size_t w,
                             std::size_t k) {
  return detail::tile_pool(in, h, w, k,
                           [](long long a, long long b) { return std::max(a, b); });
}

inline IntPlanes minpool_int(const IntPlanes& in, std::size_t h, std::size_t w,
                             std::size_t k) {
  return detail::tile_pool(in, h, w, k,
                           [](long long a, long long b) { return std::min(a, b); });
}

inline IntPlanes sumpool_int(const IntPlanes& in, std::size_t h, std::size_t w,
                             std::size_t k) {
  return detail::tile_pool(in, h, w, k,
                           [](long long a, long long b) { return a + b; });
}

// Tile averages as doubles (sum / k^2). The sign of an average equals the
// sign of the corresponding sumpool_int entry.
inline Planes avgpool(const IntPlanes& in, std::size_t h, std::size_t w, std::size_t k) {
  IntPlanes sums = sumpool_int(in, h, w, k);
  Planes out(sums.size());
  for (std::size_t ch = 0; ch < sums.size(); ++ch) {
    out[ch].resize(sums[ch].size());
    for (std::size_t i = 0; i < sums[ch].size(); ++i)
      out[ch][i] = double(sums[ch][i]) / double(k * k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Whole-network reference evaluation over TrainedLayer parameters.
//
// Convention: activations are +/-1; pooling layers reduce the +/-1
// activations (max of bipolar values), matching the execution order of the
// compiled pipeline (threshold, then pool).

struct ReferenceResult {
  // Flattened per-layer outputs. Binary-valued layers record +/-1; the final
  // non-thresholded layer (if any) records raw accumulator values.
  std::vector<std::vector<double>> trace;
  std::vector<double> output;  // last trace entry, for convenience
};

namespace detail {

struct Signal {
  std::vector<double> flat;  // pixel-major, channels interleaved (for frames)
  std::size_t h = 0, w = 0, c = 0;
  bool is_frame = false;
};

inline Planes to_planes(const Signal& s) {
  Planes p(s.c, std::vector<double>(s.h * s.w));
  for (std::size_t r = 0; r < s.h; ++r)
    for (std::size_t col = 0; col < s.w; ++col)
      for (std::size_t ch = 0; ch < s.c; ++ch)
        p[ch][r * s.w + col] = s.flat[(r * s.w + col) * s.c + ch];
  return p;
}

inline Signal from_planes(const Planes& p, std::size_t h, std::size_t w) {
  Signal s;
  s.h = h;
  s.w = w;
  s.c = p.size();
  s.is_frame = true;
  s.flat.resize(h * w * p.size());
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t col = 0; col < w; ++col)
      for (std::size_t ch = 0; ch < p.size(); ++ch)
        s.flat[(r * w + col) * p.size() + ch] = p[ch][r * w + col];
  return s;
}

inline Signal reference_step(const TrainedLayer& t, const Signal& in) {
  const LayerSpec& spec = t.spec;
  if (spec.is_fc()) {
    RealFcLayer l;
    l.out = spec.matrix_rows();
    l.in = spec.matrix_cols();
    l.weights.assign(t.weights.begin(), t.weights.end());
    l.bias = t.bias;
    l.batchnorm = t.batchnorm;
    l.use_batchnorm = spec.thresholded();
    l.use_sign = spec.thresholded();
    Signal out;
    out.flat = fc_forward(l, in.flat);
    return out;
  }
  if (spec.is_conv()) {
    Planes planes = to_planes(in);
    std::size_t ih = spec.in_h, iw = spec.in_w;
    if (spec.pad != PadMode::None) {
      const std::size_t pr = spec.pad_rows(), pc = spec.pad_cols();
      const double pv = spec.pad == PadMode::PlusOne ? 1.0 : -1.0;
      const std::size_t ph = ih + 2 * pr, pw = iw + 2 * pc;
      Planes padded(planes.size(), std::vector<double>(ph * pw, pv));
      for (std::size_t ch = 0; ch < planes.size(); ++ch)
        for (std::size_t r = 0; r < ih; ++r)
          for (std::size_t c = 0; c < iw; ++c)
            padded[ch][(r + pr) * pw + (c + pc)] = planes[ch][r * iw + c];
      planes = std::move(padded);
      ih = ph;
      iw = pw;
    }
    RealConvLayer l;
    l.in_ch = spec.in_channels;
    l.in_h = ih;
    l.in_w = iw;
    l.out_ch = spec.out_channels;
    l.win_j = spec.win_j;
    l.win_k = spec.win_k;
    l.weights.assign(t.weights.begin(), t.weights.end());
    l.bias = t.bias;
    l.batchnorm = t.batchnorm;
    l.use_batchnorm = true;
    l.use_sign = true;
    return from_planes(conv_forward(l, planes), spec.out_h(), spec.out_w());
  }
  // MaxPool over +/-1 activations.
  IntPlanes ip(spec.in_channels, std::vector<long long>(spec.in_h * spec.in_w));
  Planes planes = to_planes(in);
  for (std::size_t ch = 0; ch < planes.size(); ++ch)
    for (std::size_t i = 0; i < planes[ch].size(); ++i)
      ip[ch][i] = (long long)(planes[ch][i]);
  IntPlanes pooled = maxpool_int(ip, spec.in_h, spec.in_w, spec.pool_k);
  Planes dp(pooled.size());
  for (std::size_t ch = 0; ch < pooled.size(); ++ch)
    dp[ch].assign(pooled[ch].begin(), pooled[ch].end());
  return from_planes(dp, spec.out_h(), spec.out_w());
}

inline ReferenceResult run_reference_impl(const std::vector<TrainedLayer>& net,
                                          Signal sig) {
  ReferenceResult res;
  for (const TrainedLayer& t : net) {
    Signal next = reference_step(t, sig);
    if (t.spec.is_conv()) {
      next.h = t.spec.out_h();
      next.w = t.spec.out_w();
      next.c = t.spec.out_channels;
      next.is_frame = true;
    } else if (t.spec.kind == LayerKind::MaxPool) {
      // set by reference_step
    } else {
      next.is_frame = false;
    }
    res.trace.push_back(next.flat);
    sig = std::move(next);
  }
  res.output = sig.flat;
  return res;
}

}  // namespace detail

// Binary-input networks: input is a +/-1 sequence. When the first layer
// consumes a frame the sequence is read pixel-major with channels
// interleaved, and the frame geometry comes from that layer.
inline ReferenceResult run_reference(const std::vector<TrainedLayer>& net,
                                     std::span<const int> bipolar_input) {
  detail::Signal s;
  s.flat.assign(bipolar_input.begin(), bipolar_input.end());
  if (!net.empty()) {
    const LayerSpec& first = net.front().spec;
    if (first.is_conv() || first.kind == LayerKind::MaxPool) {
      if (s.flat.size() != first.in_h * first.in_w * first.in_channels)
        throw dimension_error("run_reference: input does not match the first frame");
      s.h = first.in_h;
      s.w = first.in_w;
      s.c = first.in_channels;
      s.is_frame = true;
    }
  }
  return detail::run_reference_impl(net, std::move(s));
}

// Image-input networks: per-channel integer planes (e.g. 8-bit pixels).
inline ReferenceResult run_reference(const std::vector<TrainedLayer>& net,
                                     const IntPlanes& image, std::size_t h,
                                     std::size_t w) {
  Planes p(image.size());
  for (std::size_t ch = 0; ch < image.size(); ++ch)
    p[ch].assign(image[ch].begin(), image[ch].end());
  return detail::run_reference_impl(net, detail::from_planes(p, h, w));
}

}  // namespace bnnkit::oracle
