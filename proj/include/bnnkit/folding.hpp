#pragma once
// Folding: time-multiplexing each matrix layer over a PE/SIMD grid, and the
// solver that picks per-layer grids for a frames-per-second target.
//
// A layer of X neurons x Y synapses on P PEs with S SIMD lanes needs
// neuron_fold = X/P times synapse_fold = Y/S cycles per matrix pass, and
// matrix_passes passes per frame (output pixels for a convolution, 1 for a
// dense layer). The slowest layer's total fold is the pipeline's initiation
// interval.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "topology.hpp"

namespace bnnkit {

struct LayerFold {
  std::size_t layer_index = 0;  // index into the topology's layer list
  std::size_t pe = 1;
  std::size_t simd = 1;
  std::uint64_t neuron_fold = 1;
  std::uint64_t synapse_fold = 1;
  std::uint64_t matrix_passes = 1;
  std::uint64_t total = 1;  // matrix_passes * neuron_fold * synapse_fold

  bool operator==(const LayerFold&) const = default;
};

struct FoldingConfig {
  std::vector<LayerFold> layers;  // one entry per matrix layer, network order

  std::uint64_t ii_max() const {
    std::uint64_t m = 0;
    for (const LayerFold& l : layers) m = std::max(m, l.total);
    return m;
  }

  std::vector<std::uint64_t> folds() const {
    std::vector<std::uint64_t> f;
    for (const LayerFold& l : layers) f.push_back(l.total);
    return f;
  }

  bool operator==(const FoldingConfig&) const = default;
};

// Cycles per frame for one layer under a P/S grid. Throws dimension_error
// naming the offending pair when the grid does not divide the layer.
inline std::uint64_t fold_of(const LayerSpec& spec, std::size_t pe, std::size_t simd) {
  if (!spec.has_matrix()) throw dimension_error("fold_of: layer has no matrix");
  const std::size_t x = spec.matrix_rows();
  const std::size_t y = spec.matrix_cols();
  if (pe == 0 || x % pe != 0)
    throw dimension_error("fold_of: PE count " + std::to_string(pe) +
                          " does not divide " + std::to_string(x) + " neurons");
  if (simd == 0 || y % simd != 0)
    throw dimension_error("fold_of: SIMD width " + std::to_string(simd) +
                          " does not divide " + std::to_string(y) + " synapses");
  return spec.matrix_passes() * std::uint64_t(x / pe) * std::uint64_t(y / simd);
}

// Full fold record for one layer under a P/S grid; validates divisibility.
inline LayerFold make_layer_fold(const LayerSpec& spec, std::size_t layer_index,
                                 std::size_t pe, std::size_t simd) {
  LayerFold f;
  f.layer_index = layer_index;
  f.pe = pe;
  f.simd = simd;
  f.total = fold_of(spec, pe, simd);
  f.neuron_fold = spec.matrix_rows() / pe;
  f.synapse_fold = spec.matrix_cols() / simd;
  f.matrix_passes = spec.matrix_passes();
  return f;
}

struct ThroughputTarget {
  double fps = 0;
  double f_clk = 0;
  // Fixed initiation intervals of stages outside the matrix units (e.g. a
  // window generator). The slowest cap becomes the pipeline bottleneck and
  // the matrix layers are relaxed to match it rather than waste resources.
  std::vector<std::pair<std::string, std::uint64_t>> ii_caps;
};

struct FoldingSolution {
  FoldingConfig config;
  std::uint64_t ii_max = 0;   // including caps
  double achieved_fps = 0;    // f_clk / ii_max
};

namespace detail {

inline std::vector<std::size_t> divisors(std::size_t n) {
  std::vector<std::size_t> d;
  for (std::size_t i = 1; i <= n; ++i)
    if (n % i == 0) d.push_back(i);
  return d;
}

// Largest legal neuron_fold*synapse_fold product <= budget. Preference among
// equal products: widest SIMD first (smallest synapse_fold), which also means
// the fewest PEs.
inline bool best_grid(std::size_t x, std::size_t y, std::uint64_t budget,
                      std::size_t& pe, std::size_t& simd) {
  if (budget == 0) return false;
  const auto dx = divisors(x);
  std::uint64_t best = 0;
  for (std::size_t fs : divisors(y)) {  // ascending synapse_fold
    if (fs > budget) break;
    // largest neuron fold fn with fn * fs <= budget
    std::uint64_t fn = 0;
    for (std::size_t cand : dx)
      if (std::uint64_t(cand) * fs <= budget) fn = cand;
    if (fn == 0) continue;
    const std::uint64_t total = fn * fs;
    if (total > best) {  // strict: keeps the smallest synapse_fold on ties
      best = total;
      pe = x / std::size_t(fn);
      simd = y / fs;
    }
  }
  return best != 0;
}

}  // namespace detail

// Chooses per-layer PE/SIMD grids so that every matrix layer's total fold
// stays within the cycle budget floor(f_clk / fps), maximizing each fold
// (fewest resources) under that budget. When the target has II caps, the
// budget is relaxed to the slowest cap: there is no point running the matrix
// units faster than the fixed bottleneck.
//
// Throws infeasible_error (carrying the best reachable rate) when even fully
// parallel layers cannot meet the target.
inline FoldingSolution solve_folding(const NetworkTopology& topo,
                                     const ThroughputTarget& target) {
  if (target.fps <= 0 || target.f_clk <= 0)
    throw infeasible_error("solve_folding: target and clock must be positive", 0);
  topo.validate();

  std::uint64_t budget = std::uint64_t(target.f_clk / target.fps);
  std::uint64_t cap_max = 0;
  for (const auto& [name, ii] : target.ii_caps) cap_max = std::max(cap_max, ii);
  if (cap_max > budget) budget = cap_max;  // relax to the bottleneck

  // Structural floor: a convolution needs at least one cycle per output pixel.
  std::uint64_t floor_ii = std::max<std::uint64_t>(cap_max, 1);
  for (const LayerSpec& l : topo.layers)
    if (l.has_matrix()) floor_ii = std::max(floor_ii, l.matrix_passes());
  if (budget < floor_ii)
    throw infeasible_error(
        "solve_folding: target " + std::to_string(target.fps) +
            " fps unreachable; best achievable is " +
            std::to_string(target.f_clk / double(floor_ii)) + " fps",
        target.f_clk / double(floor_ii));

  FoldingSolution sol;
  for (std::size_t i = 0; i < topo.layers.size(); ++i) {
    const LayerSpec& spec = topo.layers[i];
    if (!spec.has_matrix()) continue;
    const std::uint64_t pass_budget = budget / spec.matrix_passes();
    std::size_t pe = 0, simd = 0;
    if (!detail::best_grid(spec.matrix_rows(), spec.matrix_cols(), pass_budget, pe,
                           simd))
      throw infeasible_error(
          "solve_folding: layer " + std::to_string(i) + " cannot meet the budget",
          target.f_clk / double(floor_ii));
    sol.config.layers.push_back(make_layer_fold(spec, i, pe, simd));
  }
  sol.ii_max = std::max(sol.config.ii_max(), cap_max);
  sol.achieved_fps = target.f_clk / double(sol.ii_max);
  return sol;
}

// ---------------------------------------------------------------------------
// Rate balance: how close each layer runs to the pipeline bottleneck.

struct BalanceRow {
  std::size_t index = 0;
  std::uint64_t fold = 0;
  double ratio = 0;  // fold / max fold; 1.0 is the bottleneck
  bool flagged = false;
};

inline std::vector<BalanceRow> rate_balance_report(std::span<const std::uint64_t> folds,
                                                   double flag_below = 0.5) {
  std::uint64_t m = 0;
  for (std::uint64_t f : folds) m = std::max(m, f);
  std::vector<BalanceRow> rows;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    BalanceRow r;
    r.index = i;
    r.fold = folds[i];
    r.ratio = m == 0 ? 0.0 : double(folds[i]) / double(m);
    r.flagged = r.ratio < flag_below;
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<BalanceRow> rate_balance_report(const FoldingConfig& cfg,
                                                   double flag_below = 0.5) {
  const auto f = cfg.folds();
  return rate_balance_report(f, flag_below);
}

}  // namespace bnnkit
