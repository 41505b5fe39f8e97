#pragma once
// Back-of-envelope performance models: device peak throughput and roofline,
// workload operation/parameter counting, runtime efficiency, and LUT/BRAM
// resource estimates for folded layers.
//
// One operation is one synapse-level multiply or add, so a synapse evaluation
// (multiply-accumulate) counts as two operations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "compile.hpp"
#include "errors.hpp"
#include "folding.hpp"
#include "topology.hpp"

namespace bnnkit {

struct OpCostEntry {
  double luts_per_op = 0;
  double dsps_per_op = 0;
};

// Datapath cost per operation at a given precision. The defaults model a
// XNOR-popcount datapath for 1-bit values and multiplier datapaths above it.
struct OpCost {
  std::map<unsigned, OpCostEntry> by_precision;

  static OpCost defaults() {
    OpCost c;
    c.by_precision[1] = {2.5, 0.0};
    c.by_precision[8] = {40.0, 0.0};
    c.by_precision[16] = {8.0, 0.5};
    return c;
  }

  const OpCostEntry& at(unsigned precision) const {
    auto it = by_precision.find(precision);
    if (it == by_precision.end())
      throw compile_error("no operation cost entry for precision " +
                          std::to_string(precision));
    return it->second;
  }
};

struct DeviceModel {
  std::string name;
  double luts = 0;
  double brams = 0;  // 36 kbit blocks
  double dsps = 0;
  double bandwidth_bytes_per_s = 0;
  double f_clk_hz = 0;
  double utilization = 0.9;  // usable fraction of LUTs and DSPs
  OpCost op_cost = OpCost::defaults();

  static DeviceModel zu19eg() {
    DeviceModel d;
    d.name = "zu19eg";
    d.luts = 522720;
    d.brams = 984;
    d.dsps = 1968;
    d.bandwidth_bytes_per_s = 4.8e9;
    d.f_clk_hz = 350e6;
    return d;
  }

  static DeviceModel zc706() {
    DeviceModel d;
    d.name = "zc706";
    d.luts = 218600;
    d.brams = 545;
    d.dsps = 900;
    d.bandwidth_bytes_per_s = 1.6e9;
    d.f_clk_hz = 200e6;
    return d;
  }
};

// Compute-bound peak in ops/s: LUT-limited, and DSP-limited where the
// datapath consumes DSPs. The utilization fraction derates both pools.
inline double peak_compute(const DeviceModel& d, unsigned precision) {
  const OpCostEntry& c = d.op_cost.at(precision);
  if (c.luts_per_op <= 0) throw compile_error("peak_compute: nonpositive LUT cost");
  double ops_per_cycle = d.luts * d.utilization / c.luts_per_op;
  if (c.dsps_per_op > 0)
    ops_per_cycle = std::min(ops_per_cycle, d.dsps * d.utilization / c.dsps_per_op);
  return ops_per_cycle * d.f_clk_hz;
}

// Attainable ops/s at a given arithmetic intensity (ops per off-chip byte).
inline double roofline_point(const DeviceModel& d, unsigned precision,
                             double ops_per_byte) {
  if (ops_per_byte < 0) throw compile_error("roofline_point: negative intensity");
  return std::min(peak_compute(d, precision),
                  ops_per_byte * d.bandwidth_bytes_per_s);
}

// Reference throughput of a SIMT device that retires `ops_per_issue` binary
// ops every `cycles_per_issue` cycles on each of `cores` cores.
inline double gpu_peak_reference(double cores = 2880, double clock_hz = 875e6,
                                 double ops_per_issue = 64,
                                 double cycles_per_issue = 6) {
  if (cycles_per_issue <= 0)
    throw compile_error("gpu_peak_reference: nonpositive cycle count");
  return cores * clock_hz * ops_per_issue / cycles_per_issue;
}

// ---------------------------------------------------------------------------
// Workload accounting.

struct WorkloadModel {
  std::uint64_t params = 0;          // synapses plus one threshold/bias per neuron
  std::uint64_t param_bits = 0;      // 1-bit weights plus accumulator-wide thresholds
  std::uint64_t ops_per_frame = 0;   // 2 * synapse evaluations
  std::uint64_t offchip_bytes = 0;   // per frame; 0 when unknown
};

inline WorkloadModel count_ops_params(const NetworkTopology& topo) {
  WorkloadModel w;
  for (const LayerSpec& l : topo.layers) {
    if (!l.has_matrix()) continue;
    const std::uint64_t synapses = std::uint64_t(l.matrix_rows()) * l.matrix_cols();
    const std::uint64_t neurons = l.matrix_rows();
    w.params += synapses + neurons;
    w.param_bits += synapses + neurons * accumulator_width(l.matrix_cols());
    w.ops_per_frame += 2 * l.synapse_evals();
  }
  return w;
}

inline double arithmetic_intensity(const WorkloadModel& w) {
  if (w.offchip_bytes == 0)
    throw compile_error("arithmetic_intensity: unknown off-chip traffic");
  return double(w.ops_per_frame) / double(w.offchip_bytes);
}

// Fraction of the instantiated compute that a running pipeline keeps busy:
// actual ops per cycle (fps * ops_per_frame / f_clk) over the peak
// sum(2 * P * S) across layers.
inline double runtime_efficiency(double fps, double ops_per_frame, double f_clk,
                                 std::span<const std::size_t> pe_times_simd) {
  double peak = 0;
  for (std::size_t ps : pe_times_simd) peak += 2.0 * double(ps);
  if (peak <= 0 || f_clk <= 0)
    throw compile_error("runtime_efficiency: empty configuration");
  return fps * ops_per_frame / f_clk / peak;
}

inline double runtime_efficiency(double fps, double ops_per_frame, double f_clk,
                                 const FoldingConfig& cfg) {
  std::vector<std::size_t> ps;
  for (const LayerFold& l : cfg.layers) ps.push_back(l.pe * l.simd);
  return runtime_efficiency(fps, ops_per_frame, f_clk, ps);
}

// ---------------------------------------------------------------------------
// Resource estimate for folded matrix units.

struct ResourceModelOptions {
  // Calibration point: a 128-wide popcount-accumulate datapath.
  double popcount_luts_128 = 376;
  double popcount_ffs_128 = 29;
  double threshold_luts = 6;     // unsigned compare per PE
  double control_luts = 870;     // fixed per-matrix-unit overhead
  double bram_bits = 36864;      // one block
  double bram_max_width = 72;    // widest native port
  // Small weight memories are mapped to LUTs instead of being read from BRAM.
  double lutram_bit_threshold = 1024;
  double lutram_luts_per_bit = 0.25;
};

struct ResourceEstimate {
  double luts = 0;
  double ffs = 0;
  double brams = 0;
};

// Per-layer estimate. Weight memory per PE holds ceil(X/P) rows of Y bits
// plus one threshold per row; each PE memory occupies at least one BRAM (and
// enough blocks for both capacity and port width). Tiny memories additionally
// cost LUTs, modelling LUT-RAM mapping. Grids that do not divide the layer
// are allowed here (the last tile simply runs part-empty), so schedules with
// rounded-up folds can still be costed.
inline ResourceEstimate layer_resource_estimate(const LayerSpec& spec, std::size_t pe,
                                                std::size_t simd,
                                                const ResourceModelOptions& opt = {}) {
  if (!spec.has_matrix()) return {};
  const std::size_t x = spec.matrix_rows();
  const std::size_t y = spec.matrix_cols();
  if (pe == 0 || simd == 0 || pe > x || simd > y)
    throw dimension_error("layer_resource_estimate: illegal PE/SIMD grid");

  ResourceEstimate r;
  const double t = double(accumulator_width(y));
  const double per_pe_bits = double((x + pe - 1) / pe) * (double(y) + t);
  r.luts = double(pe) * (opt.popcount_luts_128 * double(simd) / 128.0 +
                         opt.threshold_luts) +
           opt.control_luts;
  r.ffs = double(pe) * opt.popcount_ffs_128 * double(simd) / 128.0;
  if (per_pe_bits < opt.lutram_bit_threshold)
    r.luts += double(pe) * per_pe_bits * opt.lutram_luts_per_bit;
  const double cap_blocks = std::ceil(per_pe_bits / opt.bram_bits);
  const double width_blocks = std::ceil(double(simd) / opt.bram_max_width);
  r.brams = double(pe) * std::max({cap_blocks, width_blocks, 1.0});
  return r;
}

inline ResourceEstimate bram_lut_estimate(const NetworkTopology& topo,
                                          const FoldingConfig& cfg,
                                          const ResourceModelOptions& opt = {}) {
  ResourceEstimate total;
  for (const LayerFold& f : cfg.layers) {
    const LayerSpec& spec = topo.layers.at(f.layer_index);
    ResourceEstimate r = layer_resource_estimate(spec, f.pe, f.simd, opt);
    total.luts += r.luts;
    total.ffs += r.ffs;
    total.brams += r.brams;
  }
  return total;
}

}  // namespace bnnkit
