// bnnkit command line: compile, run, fold, estimate, simulate and verify
// bit-packed binarized networks. Output is `key value` lines (--format kv).

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "bnnkit/bnnkit.hpp"

namespace {

using namespace bnnkit;

// --net accepts a built-in name, fc:INxOUT, mlp:IN x W1 x ... dims, or a
// model file path.
struct NetArg {
  NetworkTopology topo;
  std::optional<LoadedModel> model;  // set when --net was a file
};

std::vector<std::size_t> parse_dims(const std::string& s) {
  std::vector<std::size_t> dims;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, 'x')) {
    if (tok.empty()) throw CLI::ValidationError("--net", "empty dimension in '" + s + "'");
    char* end = nullptr;
    const unsigned long long v = std::strtoull(tok.c_str(), &end, 10);
    if (end == nullptr || *end != '\0' || v == 0)
      throw CLI::ValidationError("--net", "bad dimension '" + tok + "'");
    dims.push_back(std::size_t(v));
  }
  return dims;
}

NetArg parse_net(const std::string& arg) {
  NetArg n;
  if (arg == "sfc" || arg == "lfc" || arg == "cnv") {
    n.topo = builtin_topology(arg);
    return n;
  }
  if (arg.rfind("fc:", 0) == 0) {
    const auto dims = parse_dims(arg.substr(3));
    if (dims.size() != 2)
      throw CLI::ValidationError("--net", "fc wants INxOUT, got '" + arg + "'");
    n.topo = NetworkTopology::single_fc(dims[1], dims[0]);
    return n;
  }
  if (arg.rfind("mlp:", 0) == 0) {
    const auto dims = parse_dims(arg.substr(4));
    if (dims.size() < 2)
      throw CLI::ValidationError("--net", "mlp wants at least INxOUT");
    n.topo = NetworkTopology::mlp(dims[0], {dims.begin() + 1, dims.end()}, "mlp");
    return n;
  }
  n.model = load_model(arg);
  n.topo = n.model->net.topology;
  return n;
}

std::uint64_t parse_params_seed(const std::string& arg) {
  if (arg == "random") return 1;
  if (arg.rfind("random:", 0) == 0) {
    const std::string s = arg.substr(7);
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (end == nullptr || *end != '\0' || s.empty())
      throw CLI::ValidationError("--params", "bad seed '" + s + "'");
    return v;
  }
  throw CLI::ValidationError("--params", "only random[:SEED] parameters are supported");
}

Scenario parse_scenario(const std::string& arg) {
  const auto colon = arg.find(':');
  if (colon == std::string::npos)
    throw CLI::ValidationError("--scenario", "want NET:MODE, e.g. sfc:max");
  return builtin_scenario(arg.substr(0, colon), arg.substr(colon + 1));
}

std::pair<std::string, std::uint64_t> parse_cap(const std::string& arg) {
  const auto colon = arg.find(':');
  if (colon == std::string::npos)
    throw CLI::ValidationError("--cap", "want NAME:CYCLES");
  char* end = nullptr;
  const std::string s = arg.substr(colon + 1);
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (end == nullptr || *end != '\0' || v == 0)
    throw CLI::ValidationError("--cap", "bad cycle count '" + s + "'");
  return {arg.substr(0, colon), v};
}

DeviceModel parse_device(const std::string& arg) {
  if (arg == "zu19eg") return DeviceModel::zu19eg();
  if (arg == "zc706") return DeviceModel::zc706();
  throw CLI::ValidationError("--device", "unknown device '" + arg + "'");
}

std::string fmt(double v, int prec) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

// ---------------------------------------------------------------------------

int cmd_compile(const std::string& net_arg, const std::string& params_arg,
                const std::string& out_path) {
  NetArg net = parse_net(net_arg);
  const std::uint64_t seed = parse_params_seed(params_arg);
  CompiledNetwork compiled = compile_network(random_trained(net.topo, seed));
  compiled.topology.name = net.topo.name;  // compile_network only sees layers
  save_model(out_path, compiled);
  const WorkloadModel w = count_ops_params(net.topo);
  std::cout << "net " << net.topo.name << '\n'
            << "layers " << net.topo.layers.size() << '\n'
            << "params " << w.params << '\n'
            << "ops_per_frame " << w.ops_per_frame << '\n'
            << "model " << out_path << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

ImageSet load_images_sniffed(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "'");
  const int c0 = f.get();
  const int c1 = f.get();
  f.seekg(0);
  if (c0 == 'P' && (c1 == '5' || c1 == '6')) return load_pnm(f);
  return load_idx_images(f);
}

NetworkValue image_input(const CompiledNetwork& net, std::span<const std::uint8_t> px,
                         const ImageSet& set, unsigned threshold) {
  if (net.topology.layers.empty()) throw dimension_error("model has no layers");
  const LayerSpec& first = net.topology.layers.front();
  if (first.is_fc()) {
    if (px.size() != first.in_synapses)
      throw dimension_error("image size " + std::to_string(px.size()) +
                            " does not match fan-in " +
                            std::to_string(first.in_synapses));
    if (first.kind == LayerKind::FixedInputFC)
      return to_fixed_tensor(px, 1, 1, px.size(), first.input_width);
    return binarize_bits(px, threshold);
  }
  if (set.rows != first.in_h || set.cols != first.in_w ||
      set.channels != first.in_channels)
    throw dimension_error("image shape does not match network input");
  if (first.kind == LayerKind::FixedInputConv)
    return to_fixed_tensor(px, set.rows, set.cols, set.channels, first.input_width);
  return binarize_frame(px, set.rows, set.cols, set.channels, threshold);
}

int argmax_prediction(const NetworkValue& out) {
  std::vector<double> v;
  if (const auto* t = std::get_if<FixedPointTensor>(&out)) {
    for (std::int32_t x : t->data()) v.push_back(double(x));
  } else if (const auto* b = std::get_if<BipolarBitVector>(&out)) {
    for (std::size_t i = 0; i < b->length(); ++i) v.push_back(double(b->element(i)));
  } else {
    const auto& f = std::get<InterleavedFrame>(out);
    for (std::size_t i = 0; i < f.raw().length(); ++i)
      v.push_back(double(f.raw().element(i)));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return int(best);
}

int cmd_infer(const std::string& model_path, const std::string& input_path,
              const std::string& labels_path, std::size_t batch, unsigned threshold,
              std::size_t limit) {
  LoadedModel m = load_model(model_path);
  if (!m.has_weights) throw io_error("model '" + model_path + "' has no weights");
  const ImageSet set = load_images_sniffed(input_path);

  std::vector<std::uint8_t> labels;
  if (!labels_path.empty()) {
    labels = load_idx_labels(labels_path);
    if (labels.size() < set.count)
      throw dimension_error("fewer labels than images");
  }

  std::size_t n = set.count;
  if (limit > 0) n = std::min(n, limit);

  std::vector<int> pred(n, -1);
  std::vector<std::string> error(n);
  const std::size_t workers = std::max<std::size_t>(1, batch);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += workers) {
        try {
          const NetworkValue in = image_input(m.net, set.image(i), set, threshold);
          pred[i] = argmax_prediction(run_network(m.net, in).output);
        } catch (const std::exception& e) {
          error[i] = e.what();
        }
      }
    });
  }
  for (std::thread& th : pool) th.join();
  for (std::size_t i = 0; i < n; ++i)
    if (!error[i].empty()) throw dimension_error(error[i]);

  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::cout << "image " << i << " prediction " << pred[i];
    if (!labels.empty()) {
      std::cout << " label " << int(labels[i]);
      if (int(labels[i]) == pred[i]) ++correct;
    }
    std::cout << '\n';
  }
  std::cout << "images " << n << '\n';
  if (!labels.empty())
    std::cout << "accuracy " << (n == 0 ? "undefined" : fmt(double(correct) / double(n), 4))
              << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

void print_folds(const FoldingConfig& cfg) {
  for (const LayerFold& f : cfg.layers)
    std::cout << "layer " << f.layer_index << " pe " << f.pe << " simd " << f.simd
              << " fold " << f.total << '\n';
}

int cmd_fold(const std::string& net_arg, double fps, double f_clk,
             const std::vector<std::string>& caps, const std::string& out_path) {
  NetArg net = parse_net(net_arg);
  ThroughputTarget target;
  target.fps = fps;
  target.f_clk = f_clk;
  for (const std::string& c : caps) target.ii_caps.push_back(parse_cap(c));

  const FoldingSolution sol = solve_folding(net.topo, target);
  print_folds(sol.config);
  std::cout << "ii_max " << sol.ii_max << '\n'
            << "achieved_fps " << fmt(sol.achieved_fps, 2) << '\n';

  if (!out_path.empty()) {
    if (net.model && net.model->has_weights) {
      save_model(out_path, net.model->net, &sol.config);
    } else {
      CompiledNetwork shell;
      shell.topology = net.topo;
      ModelFileOptions opt;
      opt.include_weights = false;
      save_model(out_path, shell, &sol.config, opt);
    }
    std::cout << "model " << out_path << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct EstimateInput {
  NetworkTopology topo;
  FoldingConfig folds;
  double f_clk = 200e6;
  std::uint64_t cap_ii = 0;
  std::uint64_t offchip_bytes = 0;
  std::string label;
};

int cmd_estimate(const std::string& scenario_arg, const std::string& net_arg,
                 double fps, double f_clk, const std::string& device_arg) {
  EstimateInput in;
  if (!scenario_arg.empty()) {
    Scenario s = parse_scenario(scenario_arg);
    in.topo = s.topology;
    in.folds = s.folds;
    in.f_clk = s.f_clk;
    in.offchip_bytes = s.offchip_bytes_per_frame;
    for (const auto& [name, ii] : s.ii_caps) in.cap_ii = std::max(in.cap_ii, ii);
    in.label = s.network + ":" + s.mode;
  } else {
    if (net_arg.empty())
      throw CLI::ValidationError("estimate", "need --scenario or --net");
    NetArg net = parse_net(net_arg);
    in.topo = net.topo;
    in.f_clk = f_clk;
    if (fps > 0) {
      ThroughputTarget target;
      target.fps = fps;
      target.f_clk = f_clk;
      in.folds = solve_folding(net.topo, target).config;
    } else if (net.model && !net.model->folds.layers.empty()) {
      in.folds = net.model->folds;  // schedule stored by `fold --out`
    } else {
      throw CLI::ValidationError("estimate", "need --fps or a model file with a fold schedule");
    }
    in.label = net.topo.name;
  }

  const DeviceModel dev = parse_device(device_arg);
  const WorkloadModel w = count_ops_params(in.topo);
  const std::uint64_t ii = std::max(in.folds.ii_max(), in.cap_ii);
  const double fps_est = in.f_clk / double(ii);
  std::uint64_t lat_cycles = 0;
  for (const auto& f : in.folds.layers) lat_cycles += f.total;
  const ResourceEstimate res = bram_lut_estimate(in.topo, in.folds);
  std::vector<std::size_t> ps;
  for (const LayerFold& f : in.folds.layers) ps.push_back(f.pe * f.simd);

  std::cout << "target " << in.label << '\n'
            << "device " << dev.name << '\n'
            << "ops_per_frame " << w.ops_per_frame << '\n'
            << "params " << w.params << '\n'
            << "param_bits " << w.param_bits << '\n'
            << "ii_max " << ii << '\n'
            << "fps " << fmt(fps_est, 2) << '\n'
            << "latency_us " << fmt(double(lat_cycles) / in.f_clk * 1e6, 2) << '\n'
            << "luts " << fmt(res.luts, 0) << '\n'
            << "ffs " << fmt(res.ffs, 0) << '\n'
            << "brams " << fmt(res.brams, 0) << '\n'
            << "efficiency "
            << fmt(runtime_efficiency(fps_est, double(w.ops_per_frame), in.f_clk, ps), 4)
            << '\n'
            << "peak_binary_ops " << fmt(peak_compute(dev, 1), 0) << '\n';
  if (in.offchip_bytes > 0) {
    WorkloadModel wb = w;
    wb.offchip_bytes = in.offchip_bytes;
    const double ai = arithmetic_intensity(wb);
    std::cout << "offchip_bytes " << in.offchip_bytes << '\n'
              << "arithmetic_intensity " << fmt(ai, 2) << '\n'
              << "roofline_fps "
              << fmt(roofline_point(dev, 1, ai) / double(w.ops_per_frame), 2) << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const std::string& scenario_arg, const std::string& net_arg,
                 double fps, double f_clk, std::size_t frames, std::size_t fifo) {
  PipelineModel pipe;
  double clk = f_clk;
  if (!scenario_arg.empty()) {
    Scenario s = parse_scenario(scenario_arg);
    pipe = s.pipeline;
    clk = s.f_clk;
  } else {
    if (net_arg.empty())
      throw CLI::ValidationError("simulate", "need --scenario or --net");
    NetArg net = parse_net(net_arg);
    FoldingConfig folds;
    if (fps > 0) {
      ThroughputTarget target;
      target.fps = fps;
      target.f_clk = f_clk;
      folds = solve_folding(net.topo, target).config;
    } else if (net.model && !net.model->folds.layers.empty()) {
      folds = net.model->folds;  // schedule stored by `fold --out`
    } else {
      throw CLI::ValidationError("simulate", "need --fps or a model file with a fold schedule");
    }
    pipe = pipeline_from_folds(net.topo, folds);
  }
  if (fifo > 0) pipe.fifo_frames.assign(pipe.stages.size() - 1, fifo);

  const TokenSimResult sim = token_simulate(pipe, frames);
  std::cout << "stages " << pipe.stages.size() << '\n'
            << "frames " << frames << '\n'
            << "analytic_fps " << fmt(pipe.analytic_fps(clk), 2) << '\n'
            << "analytic_latency_cycles " << pipe.latency_cycles() << '\n'
            << "analytic_latency_us " << fmt(pipe.analytic_latency_s(clk) * 1e6, 2)
            << '\n'
            << "sim_fps " << fmt(sim.steady_fps(clk), 2) << '\n'
            << "sim_first_frame_cycles " << sim.first_frame_latency << '\n'
            << "sim_total_cycles " << sim.total_cycles << '\n';
  for (const StageStats& st : sim.stages)
    std::cout << "stage " << st.name << " busy " << fmt(st.busy_fraction, 4)
              << " backpressure " << st.backpressure_cycles << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

std::vector<double> flatten_value(const NetworkValue& v) {
  std::vector<double> out;
  if (const auto* t = std::get_if<FixedPointTensor>(&v)) {
    for (std::int32_t x : t->data()) out.push_back(double(x));
  } else if (const auto* b = std::get_if<BipolarBitVector>(&v)) {
    for (std::size_t i = 0; i < b->length(); ++i) out.push_back(double(b->element(i)));
  } else {
    const auto& f = std::get<InterleavedFrame>(v);
    for (std::size_t i = 0; i < f.raw().length(); ++i)
      out.push_back(double(f.raw().element(i)));
  }
  return out;
}

int cmd_verify(const std::string& net_arg, const std::string& params_arg,
               std::size_t inputs, std::uint64_t input_seed) {
  NetArg net = parse_net(net_arg);
  const std::uint64_t seed = parse_params_seed(params_arg);
  const std::vector<TrainedLayer> trained = random_trained(net.topo, seed);
  const CompiledNetwork compiled = compile_network(trained);

  const LayerSpec& first = net.topo.layers.front();
  Rng rng(input_seed);
  std::size_t mismatches = 0;

  for (std::size_t i = 0; i < inputs; ++i) {
    NetworkValue in;
    oracle::ReferenceResult ref;
    if (first.kind == LayerKind::FixedInputFC) {
      FixedPointTensor t =
          random_fixed_frame(rng, 1, 1, first.in_synapses, first.input_width);
      oracle::IntPlanes planes(1, std::vector<long long>(first.in_synapses));
      for (std::size_t c = 0; c < first.in_synapses; ++c) planes[0][c] = t.at(0, 0, c);
      ref = oracle::run_reference(trained, planes, 1, first.in_synapses);
      in = std::move(t);
    } else if (first.is_fc()) {
      BipolarBitVector bits = random_bits(rng, first.in_synapses);
      const std::vector<int> ints = bits.to_bipolar();
      ref = oracle::run_reference(trained, ints);
      in = std::move(bits);
    } else if (first.kind == LayerKind::FixedInputConv) {
      FixedPointTensor t = random_fixed_frame(rng, first.in_h, first.in_w,
                                              first.in_channels, first.input_width);
      oracle::IntPlanes planes(first.in_channels);
      for (std::size_t ch = 0; ch < first.in_channels; ++ch) {
        planes[ch].resize(first.in_h * first.in_w);
        for (std::size_t r = 0; r < first.in_h; ++r)
          for (std::size_t c = 0; c < first.in_w; ++c)
            planes[ch][r * first.in_w + c] = t.at(r, c, ch);
      }
      ref = oracle::run_reference(trained, planes, first.in_h, first.in_w);
      in = std::move(t);
    } else {
      InterleavedFrame f = random_frame(rng, first.in_h, first.in_w, first.in_channels);
      oracle::IntPlanes planes(first.in_channels);
      for (std::size_t ch = 0; ch < first.in_channels; ++ch) {
        planes[ch].resize(first.in_h * first.in_w);
        for (std::size_t r = 0; r < first.in_h; ++r)
          for (std::size_t c = 0; c < first.in_w; ++c)
            planes[ch][r * first.in_w + c] = f.bit(r, c, ch) ? 1 : -1;
      }
      ref = oracle::run_reference(trained, planes, first.in_h, first.in_w);
      in = std::move(f);
    }

    const NetworkRunResult run = run_network(compiled, in);
    for (std::size_t li = 0; li < run.trace.size(); ++li) {
      const std::vector<double> got = flatten_value(run.trace[li]);
      const std::vector<double>& want = ref.trace[li];
      if (got != want) {
        std::cout << "mismatch input " << i << " layer " << li << '\n';
        ++mismatches;
        break;
      }
    }
  }

  std::cout << "inputs " << inputs << '\n'
            << "mismatches " << mismatches << '\n'
            << "verdict " << (mismatches == 0 ? "pass" : "fail") << '\n';
  return mismatches == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bit-packed binarized neural network toolkit"};
  app.require_subcommand(1);
  int rc = 0;

  std::string format = "kv";
  app.add_option("--format", format, "output format")->check(CLI::IsMember({"kv"}));

  // compile
  auto* compile = app.add_subcommand("compile", "binarize parameters into a model file");
  std::string c_net, c_params = "random:1", c_out = "model.bnn";
  compile->add_option("--net", c_net, "sfc|lfc|cnv|fc:INxOUT|mlp:DIMS|model file")
      ->required();
  compile->add_option("--params", c_params, "parameter source, random[:SEED]");
  compile->add_option("--out", c_out, "output model path");
  compile->callback([&] { rc = cmd_compile(c_net, c_params, c_out); });

  // infer
  auto* infer = app.add_subcommand("infer", "classify images with a compiled model");
  std::string i_model, i_input, i_labels;
  std::size_t i_batch = 1, i_limit = 0;
  unsigned i_threshold = 128;
  infer->add_option("--model", i_model, "compiled model file")->required();
  infer->add_option("--input", i_input, "idx image stack or pgm/ppm image")->required();
  infer->add_option("--labels", i_labels, "idx label file (enables accuracy)");
  infer->add_option("--batch", i_batch, "parallel workers");
  infer->add_option("--threshold", i_threshold, "binarization threshold");
  infer->add_option("--limit", i_limit, "classify only the first N images");
  infer->callback(
      [&] { rc = cmd_infer(i_model, i_input, i_labels, i_batch, i_threshold, i_limit); });

  // fold
  auto* fold = app.add_subcommand("fold", "choose PE/SIMD grids for a frame rate");
  std::string f_net, f_out;
  double f_fps = 0, f_clk = 200e6;
  std::vector<std::string> f_caps;
  fold->add_option("--net", f_net, "network or model file")->required();
  fold->add_option("--fps", f_fps, "target frames per second")->required();
  fold->add_option("--f-clk", f_clk, "clock frequency in Hz");
  fold->add_option("--cap", f_caps, "fixed stage interval NAME:CYCLES")->take_all();
  fold->add_option("--out", f_out, "write model file with the fold schedule");
  fold->callback([&] { rc = cmd_fold(f_net, f_fps, f_clk, f_caps, f_out); });

  // estimate
  auto* estimate = app.add_subcommand("estimate", "performance and resource model");
  std::string e_scenario, e_net, e_device = "zc706";
  double e_fps = 0, e_clk = 200e6;
  estimate->add_option("--scenario", e_scenario, "built-in scenario NET:MODE");
  estimate->add_option("--net", e_net, "network or model file");
  estimate->add_option("--fps", e_fps, "target frames per second");
  estimate->add_option("--f-clk", e_clk, "clock frequency in Hz");
  estimate->add_option("--device", e_device, "zu19eg|zc706");
  estimate->callback(
      [&] { rc = cmd_estimate(e_scenario, e_net, e_fps, e_clk, e_device); });

  // simulate
  auto* simulate = app.add_subcommand("simulate", "token-level pipeline timing");
  std::string s_scenario, s_net;
  double s_fps = 0, s_clk = 200e6;
  std::size_t s_frames = 64, s_fifo = 0;
  simulate->add_option("--scenario", s_scenario, "built-in scenario NET:MODE");
  simulate->add_option("--net", s_net, "network or model file");
  simulate->add_option("--fps", s_fps, "target frames per second");
  simulate->add_option("--f-clk", s_clk, "clock frequency in Hz");
  simulate->add_option("--frames", s_frames, "frames to push through the pipeline");
  simulate->add_option("--fifo", s_fifo, "uniform FIFO capacity between stages");
  simulate->callback(
      [&] { rc = cmd_simulate(s_scenario, s_net, s_fps, s_clk, s_frames, s_fifo); });

  // verify
  auto* verify = app.add_subcommand("verify", "bit-exactness against the reference");
  std::string v_net, v_params = "random:1";
  std::size_t v_inputs = 20;
  std::uint64_t v_seed = 7;
  verify->add_option("--net", v_net, "network to check")->required();
  verify->add_option("--params", v_params, "parameter source, random[:SEED]");
  verify->add_option("--inputs", v_inputs, "number of random inputs");
  verify->add_option("--input-seed", v_seed, "seed for the input stream");
  verify->callback([&] { rc = cmd_verify(v_net, v_params, v_inputs, v_seed); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const infeasible_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    std::cout << "max_achievable_fps " << fmt(e.max_achievable_fps, 2) << '\n';
    return 5;
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const error& e) {  // dimension, compile, overflow
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return rc;
}
