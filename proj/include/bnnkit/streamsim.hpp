#pragma once
// Streaming pipeline timing: analytic throughput/latency bounds and an exact
// token-level simulation of a linear dataflow pipeline with finite FIFOs.
//
// Each stage s accepts one frame every ii[s] cycles and holds it for depth[s]
// cycles; a frame may leave only when the downstream FIFO has a free slot.
// The simulation advances whole frames with max-plus recurrences instead of
// stepping individual cycles, so long runs stay cheap and exact.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "folding.hpp"
#include "topology.hpp"

namespace bnnkit {

struct StageModel {
  std::string name;
  std::uint64_t ii = 1;     // cycles between successive frame starts
  std::uint64_t depth = 0;  // cycles from start to output of one frame
};

struct PipelineModel {
  std::vector<StageModel> stages;
  // fifo_frames[s] = capacity (in frames) of the queue after stage s.
  // Sized stages-1; missing entries default to 1.
  std::vector<std::uint64_t> fifo_frames;

  std::uint64_t fifo_after(std::size_t s) const {
    if (s < fifo_frames.size()) return std::max<std::uint64_t>(fifo_frames[s], 1);
    return 1;
  }

  std::uint64_t max_ii() const {
    std::uint64_t m = 1;
    for (const StageModel& st : stages) m = std::max(m, std::max<std::uint64_t>(st.ii, 1));
    return m;
  }

  std::uint64_t latency_cycles() const {
    std::uint64_t d = 0;
    for (const StageModel& st : stages) d += st.depth;
    return d;
  }

  double analytic_fps(double f_clk) const { return f_clk / double(max_ii()); }
  double analytic_latency_s(double f_clk) const {
    return double(latency_cycles()) / f_clk;
  }
};

struct StageStats {
  std::string name;
  std::uint64_t first_start = 0;
  std::uint64_t last_leave = 0;
  double busy_fraction = 0;               // depth-cycles over the active window
  std::uint64_t backpressure_cycles = 0;  // finished frames waiting on FIFO space
};

struct TokenSimResult {
  std::vector<std::uint64_t> frame_exit;  // cycle at which each frame leaves
  std::vector<StageStats> stages;
  std::uint64_t total_cycles = 0;
  std::uint64_t first_frame_latency = 0;

  // Steady-state rate, measured over the second half of the run to exclude
  // pipeline fill.
  double steady_fps(double f_clk) const {
    const std::size_t n = frame_exit.size();
    if (n < 2) throw dimension_error("steady_fps: need at least two frames");
    const std::size_t h = n / 2;
    const double cycles = double(frame_exit[n - 1] - frame_exit[h - 1]);
    return f_clk * double(n - h) / cycles;
  }
};

// Frame k cannot start at stage s before (a) the previous stage delivered it,
// (b) ii cycles after the stage's previous start, and (c) the previous frame
// left the stage. It cannot leave before its depth elapses nor before the
// downstream FIFO has room, which frees when frame k - capacity starts
// downstream.
inline TokenSimResult token_simulate(const PipelineModel& pipe, std::size_t n_frames) {
  const std::size_t ns = pipe.stages.size();
  if (ns == 0) throw dimension_error("token_simulate: empty pipeline");
  if (n_frames == 0) throw dimension_error("token_simulate: zero frames");

  std::vector<std::vector<std::uint64_t>> start(ns), leave(ns);
  for (std::size_t s = 0; s < ns; ++s) {
    start[s].resize(n_frames);
    leave[s].resize(n_frames);
  }

  for (std::size_t k = 0; k < n_frames; ++k) {
    for (std::size_t s = 0; s < ns; ++s) {
      std::uint64_t t = (s == 0) ? 0 : leave[s - 1][k];
      if (k > 0) {
        t = std::max(t, start[s][k - 1] + pipe.stages[s].ii);
        t = std::max(t, leave[s][k - 1]);
      }
      start[s][k] = t;
      std::uint64_t out = t + pipe.stages[s].depth;
      if (s + 1 < ns) {
        const std::uint64_t cap = pipe.fifo_after(s);
        if (k >= cap) out = std::max(out, start[s + 1][k - cap]);
      }
      leave[s][k] = out;
    }
  }

  TokenSimResult res;
  res.frame_exit = leave[ns - 1];
  res.first_frame_latency = res.frame_exit[0];
  res.total_cycles = res.frame_exit[n_frames - 1];
  res.stages.resize(ns);
  for (std::size_t s = 0; s < ns; ++s) {
    StageStats& st = res.stages[s];
    st.name = pipe.stages[s].name;
    st.first_start = start[s][0];
    st.last_leave = leave[s][n_frames - 1];
    const std::uint64_t window = st.last_leave - st.first_start;
    st.busy_fraction =
        window == 0 ? 0.0
                    : double(pipe.stages[s].depth) * double(n_frames) / double(window);
    for (std::size_t k = 0; k < n_frames; ++k)
      st.backpressure_cycles += leave[s][k] - (start[s][k] + pipe.stages[s].depth);
  }
  return res;
}

// One stage per folded matrix layer: a unit accepts a new frame every
// `total` cycles and needs the same count to produce one.
inline PipelineModel pipeline_from_folds(const NetworkTopology& topo,
                                         const FoldingConfig& cfg) {
  PipelineModel pipe;
  for (const LayerFold& f : cfg.layers) {
    const LayerSpec& spec = topo.layers.at(f.layer_index);
    StageModel st;
    st.name = std::string(layer_kind_name(spec.kind)) + std::to_string(f.layer_index);
    st.ii = f.total;
    st.depth = f.total;
    pipe.stages.push_back(st);
  }
  if (pipe.stages.empty()) throw dimension_error("pipeline_from_folds: no matrix layers");
  return pipe;
}

}  // namespace bnnkit
