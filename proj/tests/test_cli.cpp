#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "bnnkit/modelio.hpp"
#include "bnnkit/random.hpp"

using namespace bnnkit;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;  // stdout and stderr combined

  bool contains(const std::string& needle) const {
    return out.find(needle) != std::string::npos;
  }

  // Value token following `key ` on a line of its own.
  std::string value(const std::string& key) const {
    std::istringstream ss(out);
    std::string line;
    while (std::getline(ss, line))
      if (line.rfind(key + " ", 0) == 0) return line.substr(key.size() + 1);
    return {};
  }
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(CLI_BIN) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  RunResult r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path temp_file(const std::string& stem) {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() /
                 ("bnnkit_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir / stem;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("compile --help").exit_code == 0);
  CHECK(run_cli("").exit_code == 2);               // subcommand required
  CHECK(run_cli("compile").exit_code == 2);        // --net required
  CHECK(run_cli("frobnicate").exit_code == 2);
  CHECK(run_cli("compile --net fc:bad").exit_code == 2);
}

TEST_CASE("compile is deterministic per seed") {
  const fs::path a = temp_file("det_a.bnn"), b = temp_file("det_b.bnn");
  const RunResult r1 =
      run_cli("compile --net fc:16x8 --params random:3 --out " + a.string());
  REQUIRE(r1.exit_code == 0);
  CHECK(r1.value("net") == "fc1");
  CHECK(r1.value("layers") == "1");
  CHECK(r1.value("params") == std::to_string(16 * 8 + 8));
  CHECK(r1.value("model") == a.string());

  const RunResult r2 =
      run_cli("compile --net fc:16x8 --params random:3 --out " + b.string());
  REQUIRE(r2.exit_code == 0);
  CHECK(slurp(a) == slurp(b));

  const RunResult r3 =
      run_cli("compile --net fc:16x8 --params random:4 --out " + b.string());
  REQUIRE(r3.exit_code == 0);
  CHECK(slurp(a) != slurp(b));
}

TEST_CASE("infer classifies an idx stack") {
  const fs::path model = temp_file("infer.bnn");
  REQUIRE(run_cli("compile --net mlp:16x8x4 --params random:5 --out " +
                  model.string())
              .exit_code == 0);

  Rng rng(85);
  ImageSet set;
  set.count = 6;
  set.rows = 4;
  set.cols = 4;
  set.pixels.resize(6 * 16);
  for (auto& p : set.pixels) p = std::uint8_t(rng.below(256));
  const fs::path images = temp_file("digits.idx");
  save_idx_images(images.string(), set);
  std::vector<std::uint8_t> labels = {0, 1, 2, 3, 0, 1};
  const fs::path labels_path = temp_file("labels.idx");
  save_idx_labels(labels_path.string(), labels);

  const RunResult r = run_cli("infer --model " + model.string() + " --input " +
                              images.string() + " --labels " + labels_path.string());
  REQUIRE(r.exit_code == 0);
  CHECK(r.value("images") == "6");
  CHECK_FALSE(r.value("accuracy").empty());
  CHECK(r.contains("image 0 prediction "));

  SECTION("worker count does not change results") {
    const RunResult batched =
        run_cli("infer --model " + model.string() + " --input " + images.string() +
                " --labels " + labels_path.string() + " --batch 4");
    CHECK(batched.exit_code == 0);
    CHECK(batched.out == r.out);
  }
  SECTION("limit trims the run") {
    const RunResult limited = run_cli("infer --model " + model.string() +
                                      " --input " + images.string() + " --limit 2");
    CHECK(limited.exit_code == 0);
    CHECK(limited.value("images") == "2");
  }
  SECTION("shape mismatch is a data error") {
    ImageSet small;
    small.count = 1;
    small.rows = 3;
    small.cols = 3;
    small.pixels.assign(9, 0);
    const fs::path bad = temp_file("small.idx");
    save_idx_images(bad.string(), small);
    const RunResult mismatch =
        run_cli("infer --model " + model.string() + " --input " + bad.string());
    CHECK(mismatch.exit_code == 4);
  }
}

TEST_CASE("infer reads a single pgm image") {
  const fs::path model = temp_file("pgm.bnn");
  REQUIRE(run_cli("compile --net fc:9x4 --params random:6 --out " + model.string())
              .exit_code == 0);
  ImageSet img;
  img.count = 1;
  img.rows = 3;
  img.cols = 3;
  img.pixels = {0, 255, 0, 255, 0, 255, 0, 255, 0};
  const fs::path p = temp_file("input.pgm");
  save_pnm(p.string(), img);
  const RunResult r =
      run_cli("infer --model " + model.string() + " --input " + p.string());
  CHECK(r.exit_code == 0);
  CHECK(r.value("images") == "1");
}

TEST_CASE("fold reports the chosen schedule") {
  const RunResult r = run_cli("fold --net fc:256x256 --fps 9000 --f-clk 200000000");
  REQUIRE(r.exit_code == 0);
  CHECK(r.contains("layer 0 pe 1 simd 4 fold 16384"));
  CHECK(r.value("ii_max") == "16384");
  CHECK(r.value("achieved_fps") == "12207.03");
}

TEST_CASE("fold can emit a schedule shell that other commands accept") {
  const fs::path shell = temp_file("shell.bnn");
  const RunResult folded =
      run_cli("fold --net fc:64x64 --fps 1000 --out " + shell.string());
  REQUIRE(folded.exit_code == 0);
  const LoadedModel m = load_model(shell.string());
  CHECK_FALSE(m.has_weights);
  REQUIRE(m.folds.layers.size() == 1);
  CHECK(m.folds.layers[0].total == 4096);  // budget 200000 fits the full fold

  // The shell names a topology, so fresh parameters can be compiled onto it.
  const fs::path full = temp_file("full.bnn");
  CHECK(run_cli("compile --net " + shell.string() + " --out " + full.string())
            .exit_code == 0);
  CHECK(load_model(full.string()).has_weights);

  // Without --fps, estimate and simulate pick up the stored schedule.
  const RunResult est = run_cli("estimate --net " + shell.string());
  CHECK(est.exit_code == 0);
  CHECK(est.value("ii_max") == "4096");
  const RunResult sim = run_cli("simulate --net " + shell.string() + " --frames 8");
  CHECK(sim.exit_code == 0);
  CHECK(sim.value("stages") == "1");
  CHECK(run_cli("simulate --net fc:64x64 --frames 8").exit_code != 0);
}

TEST_CASE("unreachable targets exit with the rate that is reachable") {
  const RunResult r = run_cli("fold --net fc:16x16 --fps 300000000");
  CHECK(r.exit_code == 5);
  CHECK(r.value("max_achievable_fps") == "200000000.00");
}

TEST_CASE("missing files are io errors") {
  CHECK(run_cli("infer --model /nonexistent/m.bnn --input /nonexistent/i.idx")
            .exit_code == 3);
  CHECK(run_cli("fold --net /nonexistent/m.bnn --fps 100").exit_code == 3);
}

TEST_CASE("verify agrees with the reference") {
  const RunResult r = run_cli("verify --net mlp:12x8x4 --inputs 5");
  REQUIRE(r.exit_code == 0);
  CHECK(r.value("inputs") == "5");
  CHECK(r.value("mismatches") == "0");
  CHECK(r.value("verdict") == "pass");
}

TEST_CASE("estimate covers built-in scenarios and ad hoc targets") {
  const RunResult s = run_cli("estimate --scenario sfc:max --device zu19eg");
  REQUIRE(s.exit_code == 0);
  CHECK(s.value("target") == "sfc:max");
  CHECK(s.value("device") == "zu19eg");
  CHECK(s.value("ops_per_frame") == "668672");
  CHECK_FALSE(s.value("luts").empty());
  CHECK_FALSE(s.value("roofline_fps").empty());

  const RunResult n = run_cli("estimate --net fc:128x64 --fps 10000");
  REQUIRE(n.exit_code == 0);
  CHECK(n.value("device") == "zc706");
  CHECK(n.value("offchip_bytes").empty());  // unknown for ad hoc nets

  CHECK(run_cli("estimate --scenario sfc:warp").exit_code == 3);
  CHECK(run_cli("estimate").exit_code == 2);
}

TEST_CASE("simulate matches its own analytic bound") {
  const RunResult r = run_cli("simulate --scenario sfc:fixed --frames 32");
  REQUIRE(r.exit_code == 0);
  const double analytic = std::stod(r.value("analytic_fps"));
  const double sim = std::stod(r.value("sim_fps"));
  CHECK(sim == Catch::Approx(analytic).epsilon(0.01));
  CHECK(r.contains("stage bfc0 "));

  const RunResult ad_hoc = run_cli("simulate --net mlp:32x16x8 --fps 100000 --frames 16");
  CHECK(ad_hoc.exit_code == 0);
}
