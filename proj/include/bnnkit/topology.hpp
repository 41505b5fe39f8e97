#pragma once
// Network topology descriptions: layer shapes without weights. Shared by the
// compiler, the folding solver and the performance models.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"

namespace bnnkit {

enum class LayerKind {
  BinaryFC,        // bipolar in, thresholded bipolar out
  BinaryConv,      // bipolar frame in, thresholded bipolar frame out
  MaxPool,         // bipolar frame in, OR-reduced bipolar frame out
  FixedInputFC,    // fixed-point in, thresholded bipolar out
  FixedInputConv,  // fixed-point frame in, thresholded bipolar frame out
  OutputFC,        // bipolar in, signed accumulators out (no threshold)
};

enum class PadMode { None, PlusOne, MinusOne };

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::BinaryFC: return "bfc";
    case LayerKind::BinaryConv: return "bconv";
    case LayerKind::MaxPool: return "pool";
    case LayerKind::FixedInputFC: return "fxfc";
    case LayerKind::FixedInputConv: return "fxconv";
    case LayerKind::OutputFC: return "outfc";
  }
  return "?";
}

struct LayerSpec {
  LayerKind kind = LayerKind::BinaryFC;

  // Fully connected shapes (BinaryFC, FixedInputFC, OutputFC).
  std::size_t out_neurons = 0;
  std::size_t in_synapses = 0;

  // Convolution shapes (BinaryConv, FixedInputConv). MaxPool reuses
  // in_channels/in_h/in_w.
  std::size_t in_channels = 0;
  std::size_t in_h = 0;
  std::size_t in_w = 0;
  std::size_t out_channels = 0;
  std::size_t win_j = 0;  // window rows
  std::size_t win_k = 0;  // window cols
  PadMode pad = PadMode::None;

  // Pooling window (square, non-overlapping).
  std::size_t pool_k = 0;

  unsigned input_width = 1;   // bits per input element (8 for image layers)
  unsigned output_width = 1;  // bits per output element (16 for wide outputs)

  bool is_conv() const {
    return kind == LayerKind::BinaryConv || kind == LayerKind::FixedInputConv;
  }
  bool is_fc() const {
    return kind == LayerKind::BinaryFC || kind == LayerKind::FixedInputFC ||
           kind == LayerKind::OutputFC;
  }
  bool thresholded() const {
    return kind == LayerKind::BinaryFC || kind == LayerKind::BinaryConv ||
           kind == LayerKind::FixedInputFC || kind == LayerKind::FixedInputConv;
  }
  // Layers executed as a matrix of synapse rows.
  bool has_matrix() const { return kind != LayerKind::MaxPool; }

  std::size_t pad_rows() const {
    return pad == PadMode::None ? 0 : (win_j - 1) / 2;
  }
  std::size_t pad_cols() const {
    return pad == PadMode::None ? 0 : (win_k - 1) / 2;
  }

  std::size_t out_h() const {
    if (is_conv()) return in_h + 2 * pad_rows() - win_j + 1;
    if (kind == LayerKind::MaxPool) return in_h / pool_k;
    return 1;
  }
  std::size_t out_w() const {
    if (is_conv()) return in_w + 2 * pad_cols() - win_k + 1;
    if (kind == LayerKind::MaxPool) return in_w / pool_k;
    return 1;
  }

  // Matrix view: X rows (neurons), Y columns (synapses per neuron).
  std::size_t matrix_rows() const { return is_conv() ? out_channels : out_neurons; }
  std::size_t matrix_cols() const {
    return is_conv() ? in_channels * win_j * win_k : in_synapses;
  }

  // How many matrix passes one frame needs: output pixels for a convolution,
  // one for a dense layer.
  std::uint64_t matrix_passes() const {
    return is_conv() ? std::uint64_t(out_h()) * out_w() : 1;
  }

  // Synapse evaluations per frame.
  std::uint64_t synapse_evals() const {
    return has_matrix()
               ? matrix_passes() * std::uint64_t(matrix_rows()) * matrix_cols()
               : 0;
  }

  // Elements leaving the layer per frame.
  std::size_t output_elements() const {
    if (is_conv()) return out_h() * out_w() * out_channels;
    if (kind == LayerKind::MaxPool) return out_h() * out_w() * in_channels;
    return out_neurons;
  }

  bool operator==(const LayerSpec&) const = default;
};

inline LayerSpec fc_layer(LayerKind kind, std::size_t out, std::size_t in) {
  LayerSpec s;
  s.kind = kind;
  s.out_neurons = out;
  s.in_synapses = in;
  return s;
}

inline LayerSpec conv_layer(LayerKind kind, std::size_t in_ch, std::size_t in_h,
                            std::size_t in_w, std::size_t out_ch, std::size_t win_j,
                            std::size_t win_k, PadMode pad = PadMode::None) {
  LayerSpec s;
  s.kind = kind;
  s.in_channels = in_ch;
  s.in_h = in_h;
  s.in_w = in_w;
  s.out_channels = out_ch;
  s.win_j = win_j;
  s.win_k = win_k;
  s.pad = pad;
  return s;
}

inline LayerSpec pool_layer(std::size_t channels, std::size_t in_h, std::size_t in_w,
                            std::size_t k) {
  LayerSpec s;
  s.kind = LayerKind::MaxPool;
  s.in_channels = channels;
  s.in_h = in_h;
  s.in_w = in_w;
  s.pool_k = k;
  return s;
}

struct NetworkTopology {
  std::string name = "custom";
  std::vector<LayerSpec> layers;

  // Indices of layers that own a synapse matrix (everything except pooling).
  std::vector<std::size_t> matrix_layer_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < layers.size(); ++i)
      if (layers[i].has_matrix()) out.push_back(i);
    return out;
  }

  // Checks per-layer shapes and that consecutive layers compose.
  void validate() const {
    std::size_t flat = 0;  // current flattened element count
    bool have_signal = false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const LayerSpec& l = layers[i];
      std::size_t needs = 0;
      if (l.is_fc()) {
        if (l.out_neurons == 0 || l.in_synapses == 0)
          throw dimension_error(layer_text(i, "dense layer with zero dimension"));
        needs = l.in_synapses;
      } else if (l.is_conv()) {
        if (l.in_channels == 0 || l.out_channels == 0 || l.win_j == 0 || l.win_k == 0)
          throw dimension_error(layer_text(i, "convolution with zero dimension"));
        if (l.in_h + 2 * l.pad_rows() < l.win_j || l.in_w + 2 * l.pad_cols() < l.win_k)
          throw dimension_error(layer_text(i, "window larger than (padded) input"));
        needs = l.in_channels * l.in_h * l.in_w;
      } else {  // MaxPool
        if (l.pool_k == 0 || l.in_channels == 0)
          throw dimension_error(layer_text(i, "pooling layer with zero dimension"));
        if (l.in_h % l.pool_k != 0 || l.in_w % l.pool_k != 0)
          throw dimension_error(layer_text(i, "pooling window does not tile the input"));
        needs = l.in_channels * l.in_h * l.in_w;
      }
      if (have_signal && needs != flat)
        throw dimension_error(layer_text(i, "input does not match previous layer output"));
      flat = l.output_elements();
      have_signal = true;
    }
  }

  // Dense stack: thresholded hidden layers, then a non-thresholded output
  // layer emitting 16-bit scores (the last width).
  static NetworkTopology mlp(std::size_t inputs, const std::vector<std::size_t>& widths,
                             std::string name = "custom") {
    NetworkTopology t;
    t.name = std::move(name);
    std::size_t in = inputs;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      const bool last = i + 1 == widths.size();
      LayerSpec l = fc_layer(last ? LayerKind::OutputFC : LayerKind::BinaryFC,
                             widths[i], in);
      if (last) l.output_width = 16;
      t.layers.push_back(l);
      in = widths[i];
    }
    t.validate();
    return t;
  }

  static NetworkTopology single_fc(std::size_t out, std::size_t in) {
    return mlp(in, {out}, "fc1");
  }

  // 784-input classifier, three hidden dense layers of 256, 10 outputs.
  static NetworkTopology sfc() { return mlp(784, {256, 256, 256, 10}, "sfc"); }

  // Same shape with 1024-wide hidden layers.
  static NetworkTopology lfc() { return mlp(784, {1024, 1024, 1024, 10}, "lfc"); }

  // 32x32 RGB classifier: 3x3 convolutions in pairs with 2x2 pooling between
  // the pairs, then three dense layers. All convolutions are unpadded, which
  // shrinks the map to 1x1 after the sixth convolution; a third pooling stage
  // would not fit and is therefore omitted. The first layer takes 8-bit
  // pixels, the last layer emits 16-bit scores.
  static NetworkTopology cnv() {
    NetworkTopology t;
    t.name = "cnv";
    LayerSpec c1 = conv_layer(LayerKind::FixedInputConv, 3, 32, 32, 64, 3, 3);
    c1.input_width = 8;
    t.layers.push_back(c1);
    t.layers.push_back(conv_layer(LayerKind::BinaryConv, 64, 30, 30, 64, 3, 3));
    t.layers.push_back(pool_layer(64, 28, 28, 2));
    t.layers.push_back(conv_layer(LayerKind::BinaryConv, 64, 14, 14, 128, 3, 3));
    t.layers.push_back(conv_layer(LayerKind::BinaryConv, 128, 12, 12, 128, 3, 3));
    t.layers.push_back(pool_layer(128, 10, 10, 2));
    t.layers.push_back(conv_layer(LayerKind::BinaryConv, 128, 5, 5, 256, 3, 3));
    t.layers.push_back(conv_layer(LayerKind::BinaryConv, 256, 3, 3, 256, 3, 3));
    t.layers.push_back(fc_layer(LayerKind::BinaryFC, 512, 256));
    t.layers.push_back(fc_layer(LayerKind::BinaryFC, 512, 512));
    LayerSpec out = fc_layer(LayerKind::OutputFC, 10, 512);
    out.output_width = 16;
    t.layers.push_back(out);
    t.validate();
    return t;
  }

  bool operator==(const NetworkTopology&) const = default;

private:
  static std::string layer_text(std::size_t i, const char* msg) {
    return "layer " + std::to_string(i) + ": " + msg;
  }
};

}  // namespace bnnkit
