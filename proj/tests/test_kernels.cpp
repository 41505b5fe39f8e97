#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "bnnkit/compile.hpp"
#include "bnnkit/kernels.hpp"
#include "bnnkit/oracle.hpp"
#include "bnnkit/random.hpp"

using namespace bnnkit;

namespace {

// Flattens a network value the same way the reference flattens its trace.
std::vector<double> flatten(const NetworkValue& v) {
  std::vector<double> out;
  const auto push_bits = [&out](const BipolarBitVector& b) {
    for (int e : b.to_bipolar()) out.push_back(double(e));
  };
  if (const auto* b = std::get_if<BipolarBitVector>(&v)) {
    push_bits(*b);
  } else if (const auto* f = std::get_if<InterleavedFrame>(&v)) {
    push_bits(f->raw());
  } else {
    const auto& t = std::get<FixedPointTensor>(v);
    out.assign(t.data().begin(), t.data().end());
  }
  return out;
}

CompiledNetwork compile_one(const LayerSpec& spec, Rng& rng,
                            std::vector<TrainedLayer>* trained_out = nullptr) {
  NetworkTopology t;
  t.layers.push_back(spec);
  t.validate();
  std::vector<TrainedLayer> trained = random_trained(t, rng.raw());
  CompiledNetwork net = compile_network(trained);
  if (trained_out) *trained_out = std::move(trained);
  return net;
}

}  // namespace

TEST_CASE("matrix unit matches batchnorm+sign reference") {
  Rng rng(41);
  for (int round = 0; round < 30; ++round) {
    const std::size_t out = 1 + rng.below(20);
    const std::size_t in = 1 + rng.below(40);
    std::vector<TrainedLayer> trained;
    const CompiledNetwork net =
        compile_one(fc_layer(LayerKind::BinaryFC, out, in), rng, &trained);
    const BipolarBitVector input = random_bits(rng, in);
    const MvtuResult got = mvtu_execute(net.layers[0], input);
    const auto want = oracle::run_reference(trained, input.to_bipolar());
    REQUIRE(got.output.length() == out);
    for (std::size_t n = 0; n < out; ++n) {
      INFO("round " << round << " neuron " << n);
      CHECK((got.output.bit(n) ? 1.0 : -1.0) == want.output[n]);
    }
  }
}

TEST_CASE("matrix unit output is invariant under folding") {
  Rng rng(42);
  std::vector<TrainedLayer> trained;
  const CompiledNetwork net =
      compile_one(fc_layer(LayerKind::BinaryFC, 8, 12), rng, &trained);
  const BipolarBitVector input = random_bits(rng, 12);
  const MvtuResult full = mvtu_execute(net.layers[0], input);

  for (std::size_t pe : {1u, 2u, 4u, 8u})
    for (std::size_t simd : {1u, 2u, 3u, 4u, 6u, 12u}) {
      const MvtuResult folded = mvtu_execute(net.layers[0], input, {pe, simd});
      INFO("pe=" << pe << " simd=" << simd);
      CHECK(folded.output == full.output);
      CHECK(folded.cycles == (8 / pe) * (12 / simd));
    }
}

TEST_CASE("cycle count walks the tile grid") {
  Rng rng(43);
  const CompiledNetwork net = compile_one(fc_layer(LayerKind::BinaryFC, 6, 4), rng);
  const MvtuResult r = mvtu_execute(net.layers[0], random_bits(rng, 4), {3, 2});
  CHECK(r.cycles == 4);  // 2 neuron tiles x 2 synapse tiles
}

TEST_CASE("geometry requires exact tiling") {
  Rng rng(44);
  const CompiledNetwork net = compile_one(fc_layer(LayerKind::BinaryFC, 8, 12), rng);
  const BipolarBitVector input = random_bits(rng, 12);
  CHECK_THROWS_AS(mvtu_execute(net.layers[0], input, {3, 1}), dimension_error);
  CHECK_THROWS_AS(mvtu_execute(net.layers[0], input, {1, 5}), dimension_error);
  CHECK_THROWS_AS(mvtu_execute(net.layers[0], random_bits(rng, 11)), dimension_error);
}

TEST_CASE("matrix unit rejects layers of the wrong kind") {
  Rng rng(45);
  const CompiledNetwork net = compile_one(fc_layer(LayerKind::OutputFC, 4, 8), rng);
  CHECK_THROWS_AS(mvtu_execute(net.layers[0], random_bits(rng, 8)), compile_error);
  CHECK_THROWS_AS(mvtu_execute_fixedpoint_input(
                      net.layers[0], std::vector<std::int32_t>(8)),
                  compile_error);
}

TEST_CASE("non-thresholded unit emits signed dot products") {
  Rng rng(46);
  std::vector<TrainedLayer> trained;
  LayerSpec spec = fc_layer(LayerKind::OutputFC, 5, 16);
  spec.output_width = 16;  // scores span [-16, 16]
  const CompiledNetwork net = compile_one(spec, rng, &trained);
  const BipolarBitVector input = random_bits(rng, 16);
  const MvtuIntResult got = mvtu_execute_nonthresholded(net.layers[0], input);
  for (std::size_t n = 0; n < 5; ++n) {
    const long long want = bipolar_dot(net.layers[0].weights.row(n), input);
    CHECK(got.output.get(n) == want);
  }
  // Fold invariance holds here too.
  const MvtuIntResult folded = mvtu_execute_nonthresholded(net.layers[0], input, {1, 4});
  CHECK(folded.output == got.output);
  CHECK(folded.cycles == 5 * 4);
}

TEST_CASE("fixed-point unit matches reference and respects declared width") {
  Rng rng(47);
  for (int round = 0; round < 20; ++round) {
    const std::size_t out = 1 + rng.below(8);
    const std::size_t in = 1 + rng.below(12);
    LayerSpec spec = fc_layer(LayerKind::FixedInputFC, out, in);
    spec.input_width = 8;
    std::vector<TrainedLayer> trained;
    const CompiledNetwork net = compile_one(spec, rng, &trained);

    std::vector<std::int32_t> input(in);
    oracle::IntPlanes img(1, std::vector<long long>(in));
    for (std::size_t i = 0; i < in; ++i) {
      input[i] = std::int32_t(rng.below(128));
      img[0][i] = input[i];
    }
    const MvtuResult got = mvtu_execute_fixedpoint_input(net.layers[0], input);
    const auto want = oracle::run_reference(trained, img, 1, in);
    for (std::size_t n = 0; n < out; ++n) {
      INFO("round " << round << " neuron " << n);
      CHECK((got.output.bit(n) ? 1.0 : -1.0) == want.output[n]);
    }
  }
}

TEST_CASE("fixed-point unit flags accumulator overflow") {
  Rng rng(48);
  LayerSpec spec = fc_layer(LayerKind::FixedInputFC, 1, 4);
  spec.input_width = 8;
  CompiledNetwork net = compile_one(spec, rng);
  // Four 8-bit magnitudes fit in the declared width; force a narrower one.
  net.layers[0].acc_width = 4;  // range [-8, 7]
  const std::vector<std::int32_t> input = {100, 100, 100, 100};
  CHECK_THROWS_AS(mvtu_execute_fixedpoint_input(net.layers[0], input), overflow_error);
}

TEST_CASE("sliding window emits filter-matrix column order") {
  InterleavedFrame f(3, 3, 1);
  // Number the pixels 0..8, set bits where the id is odd.
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) f.set_bit(r, c, 0, (r * 3 + c) % 2 == 1);
  const auto cols = sliding_window(f, 2, 2);
  REQUIRE(cols.size() == 4);  // 2x2 output positions, row-major
  // Window at (0,0) covers pixels 0,1,3,4 -> bits 0,1,1,0.
  CHECK(cols[0].to_bipolar() == std::vector<int>{-1, 1, 1, -1});
  // Window at (0,1) covers pixels 1,2,4,5 -> bits 1,0,0,1.
  CHECK(cols[1].to_bipolar() == std::vector<int>{1, -1, -1, 1});
  // Window at (1,0) covers pixels 3,4,6,7 -> bits 1,0,0,1.
  CHECK(cols[2].to_bipolar() == std::vector<int>{1, -1, -1, 1});
}

TEST_CASE("sliding window interleaves channels inside each tap") {
  InterleavedFrame f(1, 2, 2);
  f.set_bit(0, 0, 0, true);
  f.set_bit(0, 0, 1, false);
  f.set_bit(0, 1, 0, false);
  f.set_bit(0, 1, 1, true);
  const auto cols = sliding_window(f, 1, 2);
  REQUIRE(cols.size() == 1);
  // Tap (0,0) channels 0,1 then tap (0,1) channels 0,1.
  CHECK(cols[0].to_bipolar() == std::vector<int>{1, -1, -1, 1});
}

TEST_CASE("sliding window pads with the declared constant") {
  InterleavedFrame f(2, 2, 1);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 2; ++c) f.set_bit(r, c, 0, false);  // all -1

  const auto plus = sliding_window(f, 3, 3, PadMode::PlusOne);
  REQUIRE(plus.size() == 4);  // same-size output
  // Top-left window: 5 pad positions +1, 4 real -1 -> popcount 5.
  CHECK(popcount(plus[0]) == 5);

  const auto minus = sliding_window(f, 3, 3, PadMode::MinusOne);
  CHECK(popcount(minus[0]) == 0);

  const auto none = sliding_window(f, 1, 1, PadMode::None);
  CHECK(none.size() == 4);
}

TEST_CASE("convolution layer equals the direct reference") {
  Rng rng(49);
  for (int round = 0; round < 15; ++round) {
    const std::size_t c = 1 + rng.below(3);
    const std::size_t hw = 4 + rng.below(4);
    const std::size_t oc = 1 + rng.below(6);
    const std::size_t win = rng.coin() ? 3 : 1;
    const PadMode pad = rng.coin() ? PadMode::None : PadMode::PlusOne;
    std::vector<TrainedLayer> trained;
    const CompiledNetwork net = compile_one(
        conv_layer(LayerKind::BinaryConv, c, hw, hw, oc, win, win, pad), rng, &trained);

    const InterleavedFrame in = random_frame(rng, hw, hw, c);
    const ConvResult got = conv_layer_execute(net.layers[0], in);
    const auto want = oracle::run_reference(trained, in.raw().to_bipolar());
    const std::vector<double> flat = flatten(NetworkValue(got.output));
    REQUIRE(flat.size() == want.output.size());
    for (std::size_t i = 0; i < flat.size(); ++i) {
      INFO("round " << round << " element " << i);
      CHECK(flat[i] == want.output[i]);
    }
    const auto& spec = net.layers[0].spec;
    CHECK(got.cycles == spec.out_h() * spec.out_w());  // fully parallel: 1 cycle/pixel
  }
}

TEST_CASE("fixed-point convolution layer equals the reference") {
  Rng rng(50);
  LayerSpec spec = conv_layer(LayerKind::FixedInputConv, 2, 5, 5, 3, 3, 3);
  spec.input_width = 8;
  std::vector<TrainedLayer> trained;
  const CompiledNetwork net = compile_one(spec, rng, &trained);

  const FixedPointTensor in = random_fixed_frame(rng, 5, 5, 2, 8);
  oracle::IntPlanes img(2, std::vector<long long>(25));
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 5; ++c)
      for (std::size_t ch = 0; ch < 2; ++ch) img[ch][r * 5 + c] = in.at(r, c, ch);

  const ConvResult got = conv_layer_execute_fixed(net.layers[0], in);
  const auto want = oracle::run_reference(trained, img, 5, 5);
  CHECK(flatten(NetworkValue(got.output)) == want.output);
}

TEST_CASE("fixed-point convolution rejects padding") {
  Rng rng(51);
  LayerSpec spec = conv_layer(LayerKind::FixedInputConv, 1, 4, 4, 2, 3, 3,
                              PadMode::PlusOne);
  spec.input_width = 8;
  NetworkTopology t;
  t.layers.push_back(spec);
  const CompiledNetwork net = compile_network(random_trained(t, 1));
  const FixedPointTensor in = random_fixed_frame(rng, 4, 4, 1, 8);
  CHECK_THROWS_AS(conv_layer_execute_fixed(net.layers[0], in), dimension_error);
}

TEST_CASE("pooling reductions match the tiling oracles") {
  Rng rng(52);
  for (int round = 0; round < 20; ++round) {
    const std::size_t k = rng.coin() ? 2 : 4;
    const std::size_t h = k * (1 + rng.below(3));
    const std::size_t w = k * (1 + rng.below(3));
    const std::size_t c = 1 + rng.below(4);
    const InterleavedFrame in = random_frame(rng, h, w, c);

    oracle::IntPlanes ip(c, std::vector<long long>(h * w));
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t col = 0; col < w; ++col)
        for (std::size_t ch = 0; ch < c; ++ch)
          ip[ch][r * w + col] = in.bit(r, col, ch) ? 1 : -1;

    const auto mx = oracle::maxpool_int(ip, h, w, k);
    const auto mn = oracle::minpool_int(ip, h, w, k);
    const auto av = oracle::avgpool(ip, h, w, k);
    const InterleavedFrame fo = or_pool(in, k);
    const InterleavedFrame fa = and_pool(in, k);
    const InterleavedFrame fm = majority_pool(in, k);

    for (std::size_t r = 0; r < h / k; ++r)
      for (std::size_t col = 0; col < w / k; ++col)
        for (std::size_t ch = 0; ch < c; ++ch) {
          const std::size_t i = r * (w / k) + col;
          INFO("k=" << k << " r=" << r << " c=" << col << " ch=" << ch);
          CHECK((fo.bit(r, col, ch) ? 1 : -1) == mx[ch][i]);
          CHECK((fa.bit(r, col, ch) ? 1 : -1) == mn[ch][i]);
          // Majority = sign of the tile average, ties to +1.
          CHECK((fm.bit(r, col, ch) ? 1 : -1) ==
                oracle::sign_activation(av[ch][i]));
        }
  }
}

TEST_CASE("pooling window must tile the frame") {
  Rng rng(53);
  const InterleavedFrame in = random_frame(rng, 5, 4, 1);
  CHECK_THROWS_AS(or_pool(in, 2), dimension_error);
  CHECK_THROWS_AS(or_pool(random_frame(rng, 4, 4, 1), 0), dimension_error);
}

TEST_CASE("network execution equals the whole-network reference") {
  Rng rng(54);
  SECTION("dense stack") {
    const NetworkTopology t = NetworkTopology::mlp(12, {8, 6, 4});
    const std::vector<TrainedLayer> trained = random_trained(t, rng.raw());
    const CompiledNetwork net = compile_network(trained);
    for (int round = 0; round < 10; ++round) {
      const BipolarBitVector in = random_bits(rng, 12);
      const NetworkRunResult got = run_network(net, in);
      const auto want = oracle::run_reference(trained, in.to_bipolar());
      REQUIRE(got.trace.size() == want.trace.size());
      for (std::size_t l = 0; l < got.trace.size(); ++l)
        CHECK(flatten(got.trace[l]) == want.trace[l]);
    }
  }
  SECTION("conv stack with pooling and flatten") {
    NetworkTopology t;
    t.layers.push_back(conv_layer(LayerKind::BinaryConv, 1, 6, 6, 2, 3, 3));
    t.layers.push_back(pool_layer(2, 4, 4, 2));
    t.layers.push_back(fc_layer(LayerKind::BinaryFC, 3, 8));
    LayerSpec out = fc_layer(LayerKind::OutputFC, 2, 3);
    out.output_width = 16;
    t.layers.push_back(out);
    t.validate();
    const std::vector<TrainedLayer> trained = random_trained(t, rng.raw());
    const CompiledNetwork net = compile_network(trained);
    for (int round = 0; round < 10; ++round) {
      const InterleavedFrame in = random_frame(rng, 6, 6, 1);
      const NetworkRunResult got = run_network(net, in);
      const auto want = oracle::run_reference(trained, in.raw().to_bipolar());
      REQUIRE(got.trace.size() == 4);
      for (std::size_t l = 0; l < 4; ++l) {
        INFO("round " << round << " layer " << l);
        CHECK(flatten(got.trace[l]) == want.trace[l]);
      }
    }
  }
}

TEST_CASE("network execution applies per-layer folding") {
  Rng rng(55);
  const NetworkTopology t = NetworkTopology::mlp(16, {8, 4});
  const std::vector<TrainedLayer> trained = random_trained(t, rng.raw());
  const CompiledNetwork net = compile_network(trained);
  const BipolarBitVector in = random_bits(rng, 16);
  const NetworkRunResult full = run_network(net, in);
  const std::vector<MVTUConfig> cfgs = {{2, 4}, {1, 2}};
  const NetworkRunResult folded = run_network(net, in, cfgs);
  CHECK(flatten(folded.output) == flatten(full.output));
  CHECK(folded.cycles == (8 / 2) * (16 / 4) + (4 / 1) * (8 / 2));
  const std::vector<MVTUConfig> short_cfgs = {{2, 4}};
  CHECK_THROWS_AS(run_network(net, in, short_cfgs), dimension_error);
}
