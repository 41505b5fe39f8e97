#pragma once
// Built-in networks with reference folding schedules and throughput
// scenarios.
//
// Each built-in network ships two schedules: "max" folds every matrix unit
// down to (or near) the structural floor for peak frame rate, and "fixed"
// targets a uniform ~9000 fps budget on a 200 MHz clock. The schedules are
// pinned as explicit PE/SIMD grids. A few of them run a 64-wide SIMD unit
// over a 784-synapse row, in which case the last tile is short and the fold
// is the ceiling of Y/S; the general solver only produces exact grids, so
// these reference points are kept as data, not re-derived.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "folding.hpp"
#include "streamsim.hpp"
#include "topology.hpp"

namespace bnnkit {

struct Scenario {
  std::string network;  // "sfc" | "lfc" | "cnv"
  std::string mode;     // "max" | "fixed"
  NetworkTopology topology;
  FoldingConfig folds;  // reference schedule
  // Fixed initiation intervals of non-matrix stages (window generators).
  std::vector<std::pair<std::string, std::uint64_t>> ii_caps;
  PipelineModel pipeline;  // matrix stages plus the capped stages
  double f_clk = 200e6;
  double target_fps = 0;  // design goal of the schedule
  std::uint64_t offchip_bytes_per_frame = 0;
};

// Initiation interval of the window generator feeding the widest
// convolution; it outpaces every matrix unit of the peak schedule and is
// the real bottleneck of that pipeline.
inline constexpr std::uint64_t kCnvWindowII = 9132;

// Off-chip traffic per frame: packed input pixels plus the output scores.
inline constexpr std::uint64_t kFcFrameBytes = 112;    // 784 bits in, scores out
inline constexpr std::uint64_t kCnvFrameBytes = 3092;  // 3072 B pixels + 10 s16

namespace detail {

// Fold record allowing a short final SIMD tile (ceil on the synapse fold).
inline LayerFold preset_fold(const LayerSpec& spec, std::size_t index,
                             std::size_t pe, std::size_t simd) {
  LayerFold f;
  f.layer_index = index;
  f.pe = pe;
  f.simd = simd;
  f.neuron_fold = spec.matrix_rows() / pe;
  f.synapse_fold = (spec.matrix_cols() + simd - 1) / simd;
  f.matrix_passes = spec.matrix_passes();
  f.total = f.matrix_passes * f.neuron_fold * f.synapse_fold;
  return f;
}

struct GridEntry {
  std::size_t pe, simd;
};

inline FoldingConfig preset_schedule(const NetworkTopology& topo,
                                     const std::vector<GridEntry>& grids) {
  FoldingConfig cfg;
  const auto idx = topo.matrix_layer_indices();
  for (std::size_t i = 0; i < idx.size(); ++i)
    cfg.layers.push_back(
        preset_fold(topo.layers[idx[i]], idx[i], grids[i].pe, grids[i].simd));
  return cfg;
}

}  // namespace detail

inline NetworkTopology builtin_topology(const std::string& name) {
  if (name == "sfc") return NetworkTopology::sfc();
  if (name == "lfc") return NetworkTopology::lfc();
  if (name == "cnv") return NetworkTopology::cnv();
  throw io_error("unknown built-in network '" + name + "'");
}

inline Scenario builtin_scenario(const std::string& network,
                                 const std::string& mode) {
  const bool max_mode = mode == "max";
  if (!max_mode && mode != "fixed")
    throw io_error("unknown scenario mode '" + mode + "' (use max or fixed)");

  Scenario s;
  s.network = network;
  s.mode = mode;
  s.topology = builtin_topology(network);

  using detail::GridEntry;
  std::vector<GridEntry> grids;
  if (network == "sfc") {
    grids = max_mode ? std::vector<GridEntry>{{256, 64}, {64, 64}, {64, 64}, {10, 16}}
                     : std::vector<GridEntry>{{4, 4}, {2, 2}, {2, 2}, {1, 1}};
    s.target_fps = max_mode ? 12.5e6 : 9000;
    s.offchip_bytes_per_frame = kFcFrameBytes;
  } else if (network == "lfc") {
    grids = max_mode
                ? std::vector<GridEntry>{{128, 64}, {128, 64}, {128, 64}, {10, 8}}
                : std::vector<GridEntry>{{1, 64}, {1, 64}, {1, 64}, {1, 1}};
    s.target_fps = max_mode ? 1.5625e6 : 9000;
    s.offchip_bytes_per_frame = kFcFrameBytes;
  } else {
    grids = max_mode ? std::vector<GridEntry>{{64, 3}, {64, 64}, {32, 64},
                                              {32, 64}, {8, 64}, {2, 64},
                                              {4, 4}, {4, 8}, {2, 2}}
                     : std::vector<GridEntry>{{32, 3}, {32, 64}, {16, 64},
                                              {16, 64}, {4, 64}, {1, 64},
                                              {2, 4}, {4, 4}, {2, 2}};
    s.target_fps = max_mode ? 21900 : 9000;
    s.offchip_bytes_per_frame = kCnvFrameBytes;
    s.ii_caps.emplace_back("swu", kCnvWindowII);
  }
  s.folds = detail::preset_schedule(s.topology, grids);

  s.pipeline = pipeline_from_folds(s.topology, s.folds);
  // The window generator sits between the first two convolutions; it copies
  // the stream without adding whole-frame latency.
  if (network == "cnv")
    s.pipeline.stages.insert(s.pipeline.stages.begin() + 1,
                             StageModel{"swu", kCnvWindowII, 0});
  return s;
}

}  // namespace bnnkit
