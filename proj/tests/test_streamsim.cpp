#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "bnnkit/random.hpp"
#include "bnnkit/streamsim.hpp"

using namespace bnnkit;

namespace {

PipelineModel make_pipe(std::initializer_list<std::uint64_t> iis) {
  PipelineModel p;
  int i = 0;
  for (std::uint64_t ii : iis)
    p.stages.push_back({"s" + std::to_string(i++), ii, ii});
  return p;
}

}  // namespace

TEST_CASE("single stage streams at its initiation interval") {
  const PipelineModel p = make_pipe({4});
  const TokenSimResult r = token_simulate(p, 3);
  CHECK(r.frame_exit == std::vector<std::uint64_t>{4, 8, 12});
  CHECK(r.first_frame_latency == 4);
  CHECK(r.steady_fps(1.0) == Catch::Approx(0.25));
}

TEST_CASE("three stage hand example") {
  const PipelineModel p = make_pipe({2, 5, 3});
  const TokenSimResult r = token_simulate(p, 4);
  // Worked by hand: the middle stage paces the pipeline at one frame per 5.
  CHECK(r.frame_exit == std::vector<std::uint64_t>{10, 15, 20, 25});
  CHECK(r.first_frame_latency == p.latency_cycles());
  CHECK(r.steady_fps(1e6) == Catch::Approx(1e6 / 5.0));
  // The fast front stage finishes frames it cannot hand over.
  CHECK(r.stages[0].backpressure_cycles > 0);
  CHECK(r.stages[1].backpressure_cycles == 0);
  // The bottleneck stage is saturated.
  CHECK(r.stages[1].busy_fraction >= 0.9);
}

TEST_CASE("first frame latency is the sum of stage depths") {
  Rng rng(61);
  for (int round = 0; round < 30; ++round) {
    PipelineModel p;
    const std::size_t ns = 1 + rng.below(8);
    for (std::size_t s = 0; s < ns; ++s) {
      const std::uint64_t ii = 1 + rng.below(50);
      p.stages.push_back({"s" + std::to_string(s), ii, ii + rng.below(20)});
    }
    const TokenSimResult r = token_simulate(p, 3);
    CHECK(r.first_frame_latency == p.latency_cycles());
  }
}

TEST_CASE("steady rate equals the analytic bound when depth matches ii") {
  Rng rng(62);
  for (int round = 0; round < 20; ++round) {
    PipelineModel p;
    const std::size_t ns = 2 + rng.below(6);
    for (std::size_t s = 0; s < ns; ++s) {
      const std::uint64_t ii = 1 + rng.below(500);
      p.stages.push_back({"s" + std::to_string(s), ii, ii});
    }
    const TokenSimResult r = token_simulate(p, 64);
    INFO("round " << round);
    CHECK(r.steady_fps(200e6) == Catch::Approx(p.analytic_fps(200e6)).epsilon(0.01));
  }
}

TEST_CASE("zero-depth stages pass frames through instantly") {
  PipelineModel p = make_pipe({3});
  p.stages.push_back({"wire", 1, 0});
  const TokenSimResult r = token_simulate(p, 4);
  CHECK(r.frame_exit == std::vector<std::uint64_t>{3, 6, 9, 12});
}

TEST_CASE("bigger FIFOs never slow the pipeline down") {
  Rng rng(63);
  for (int round = 0; round < 10; ++round) {
    PipelineModel p;
    const std::size_t ns = 3 + rng.below(4);
    for (std::size_t s = 0; s < ns; ++s) {
      const std::uint64_t ii = 1 + rng.below(40);
      p.stages.push_back({"s" + std::to_string(s), ii, ii});
    }
    const TokenSimResult tight = token_simulate(p, 32);
    p.fifo_frames.assign(ns - 1, 8);
    const TokenSimResult roomy = token_simulate(p, 32);
    CHECK(roomy.total_cycles <= tight.total_cycles);
    for (std::size_t k = 0; k < 32; ++k)
      CHECK(roomy.frame_exit[k] <= tight.frame_exit[k]);
  }
}

TEST_CASE("simulation rejects empty work") {
  CHECK_THROWS_AS(token_simulate(PipelineModel{}, 4), dimension_error);
  CHECK_THROWS_AS(token_simulate(make_pipe({2}), 0), dimension_error);
  CHECK_THROWS_AS(token_simulate(make_pipe({2}), 1).steady_fps(1.0), dimension_error);
}

TEST_CASE("pipeline built from a folding solution") {
  const NetworkTopology t = NetworkTopology::mlp(784, {256, 256, 256, 10});
  const FoldingSolution sol = solve_folding(t, {9000.0, 200e6, {}});
  const PipelineModel p = pipeline_from_folds(t, sol.config);
  REQUIRE(p.stages.size() == 4);
  CHECK(p.stages[0].name == "bfc0");
  CHECK(p.stages[3].name == "outfc3");
  for (std::size_t s = 0; s < 4; ++s) {
    CHECK(p.stages[s].ii == sol.config.layers[s].total);
    CHECK(p.stages[s].depth == sol.config.layers[s].total);
  }
  CHECK(p.max_ii() == sol.ii_max);
  // Analytic and simulated steady state agree for matched ii/depth stages.
  const TokenSimResult r = token_simulate(p, 32);
  CHECK(r.steady_fps(200e6) == Catch::Approx(p.analytic_fps(200e6)).epsilon(0.01));
  CHECK(r.first_frame_latency == p.latency_cycles());
}
