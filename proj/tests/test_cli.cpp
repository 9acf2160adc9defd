#include <gtest/gtest.h>

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "support/fixtures.hpp"
#include "zoomstack/cli.hpp"

using namespace zoomstack;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fixtures::temp_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
    spec = (dir / "tiny.scene").string();
    std::ofstream(spec) << "p = 2\nheight = 16\nwidth = 16\nsteps = 4\nseed = 3\nprompt = wide\nprompt = close\n";
  }
  void TearDown() override { std::filesystem::remove_all(dir); }

  std::filesystem::path dir;
  std::string spec;
};

}  // namespace

TEST_F(Cli, VerifyReportsAllSuites) {
  const CliResult r = run({"verify"});
  EXPECT_EQ(r.code, 0) << r.err;
  for (const char* name : {"consistency", "noise-stats", "pyramid-identity", "blend-fixed-point", "grounding-gradient"})
    EXPECT_NE(r.out.find(std::string("PASS ") + name), std::string::npos) << r.out;
}

TEST_F(Cli, GenerateWritesEverything) {
  const auto out = dir / "gen";
  const CliResult r = run({"generate", spec, "--out", out.string(), "--frames", "5", "--log", (dir / "trace.jsonl").string(),
                     "--dump-bands", (dir / "bands").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(out / "stack.zstk"));
  EXPECT_TRUE(std::filesystem::exists(out / "layers" / "layer_01.png"));
  EXPECT_TRUE(std::filesystem::exists(out / "renders" / "render_00.png"));
  EXPECT_TRUE(std::filesystem::exists(out / "frames" / "frame_00004.png"));
  EXPECT_TRUE(std::filesystem::exists(out / "frames" / "manifest.txt"));
  EXPECT_TRUE(std::filesystem::exists(dir / "bands" / "L01_band00.png"));
  EXPECT_TRUE(std::filesystem::exists(dir / "bands" / "L01_band01_obs00.png"));
  EXPECT_FALSE(std::filesystem::exists(dir / "bands" / "L01_band00_obs00.png"));
  std::ifstream log(dir / "trace.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["t"].get<int>(), 4 - lines);
    EXPECT_EQ(j["levels"].size(), 2u);
    ++lines;
  }
  EXPECT_EQ(lines, 4);
  const ZoomStack stack = read_zstk(out / "stack.zstk");
  EXPECT_EQ(stack.levels(), 2);
}

TEST_F(Cli, GenerateIsDeterministic) {
  for (const char* backend : {"builtin-gaussian", "builtin-oracle"}) {
    ASSERT_EQ(run({"generate", spec, "--backend", backend, "--out", (dir / "a").string(), "--frames", "3"}).code, 0);
    ASSERT_EQ(run({"generate", spec, "--backend", backend, "--out", (dir / "b").string(), "--frames", "3"}).code, 0);
    EXPECT_EQ(read_bytes(dir / "a" / "stack.zstk"), read_bytes(dir / "b" / "stack.zstk"));
    for (int k = 0; k < 3; ++k)
      EXPECT_EQ(read_bytes(dir / "a" / "frames" / frame_name(k)), read_bytes(dir / "b" / "frames" / frame_name(k)));
    ASSERT_EQ(run({"--seed", "99", "generate", spec, "--backend", backend, "--out", (dir / "c").string()}).code, 0);
    EXPECT_NE(read_bytes(dir / "a" / "stack.zstk"), read_bytes(dir / "c" / "stack.zstk"));
  }
}

TEST_F(Cli, AblateModesDiffer) {
  std::vector<std::vector<std::uint8_t>> stacks;
  for (const char* mode : {"joint", "independent", "iterative", "naive", "unshared-noise"}) {
    const auto out = dir / mode;
    const CliResult r = run({"ablate", spec, "--mode", mode, "--out", out.string(), "--frames", "0"});
    ASSERT_EQ(r.code, 0) << mode << ": " << r.err;
    stacks.push_back(read_bytes(out / "stack.zstk"));
  }
  for (std::size_t a = 0; a < stacks.size(); ++a)
    for (std::size_t b = a + 1; b < stacks.size(); ++b) EXPECT_NE(stacks[a], stacks[b]) << a << " vs " << b;
  EXPECT_EQ(run({"ablate", spec, "--mode", "bogus"}).code, 1);
}

TEST_F(Cli, RenderFromStack) {
  ASSERT_EQ(run({"generate", spec, "--out", (dir / "g").string(), "--frames", "0"}).code, 0);
  const CliResult r = run({"render", (dir / "g" / "stack.zstk").string(), "--frames", "4", "--out", (dir / "r").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "r" / "frame_00003.png"));
  EXPECT_EQ(run({"render", (dir / "g" / "stack.zstk").string(), "--frames", "1"}).code, 1);
  EXPECT_EQ(run({"render", (dir / "missing.zstk").string(), "--frames", "4"}).code, 1);
}

TEST_F(Cli, GroundWithImage) {
  Image xi(16, 16, 3);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c)
      for (int ch = 0; ch < 3; ++ch) xi(r, c, ch) = (r < 8 ? 0.8 : -0.8);
  write_png(dir / "photo.png", xi);
  const CliResult r = run({"ground", spec, "--image", (dir / "photo.png").string(), "--out", (dir / "gr").string(), "--frames", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  const ZoomStack grounded = read_zstk(dir / "gr" / "stack.zstk");
  ASSERT_EQ(run({"generate", spec, "--out", (dir / "free").string(), "--frames", "0"}).code, 0);
  const ZoomStack free = read_zstk(dir / "free" / "stack.zstk");
  EXPECT_LT(mean_abs_diff(render_image(grounded, 0), xi), mean_abs_diff(render_image(free, 0), xi));

  write_png(dir / "small.png", Image(8, 8, 3));
  EXPECT_EQ(run({"ground", spec, "--image", (dir / "small.png").string(), "--out", (dir / "x").string()}).code, 1);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"generate", (dir / "missing.scene").string()}).code, 1);
  std::ofstream(dir / "bad.scene") << "prompt = a\nN = 2\n";
  const CliResult bad = run({"generate", (dir / "bad.scene").string()});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("line 2"), std::string::npos) << bad.err;
  EXPECT_EQ(run({"generate", spec, "--backend", "nonsense"}).code, 1);
  EXPECT_EQ(run({"generate", spec, "--backend", fixtures::echo_backend("--fail"), "--out", (dir / "x").string()}).code, 2);
  EXPECT_EQ(run({"generate", spec, "--backend", "subprocess:exit 3", "--out", (dir / "x").string()}).code, 2);

  std::ostringstream sink;
  EXPECT_EQ(cli::report_error(std::make_exception_ptr(InvariantError("broken")), sink), 3);
  EXPECT_NE(sink.str().find("broken"), std::string::npos);
  EXPECT_EQ(cli::report_error(std::make_exception_ptr(DimensionError("x")), sink), 1);
  EXPECT_EQ(cli::report_error(std::make_exception_ptr(ProtocolError("x")), sink), 2);
}

TEST_F(Cli, ServeCheck) {
  EXPECT_EQ(run({"serve-check", fixtures::echo_backend()}).code, 0);
  EXPECT_EQ(run({"serve-check", fixtures::echo_backend("--bad-magic")}).code, 2);
  EXPECT_EQ(run({"serve-check", "nonsense"}).code, 1);
}

TEST_F(Cli, RemoteBackendMatchesLocalEcho) {
  // Echo over the wire is the same model as running with eps = z in process.
  const CliResult r = run({"--backend", fixtures::echo_backend(), "generate", spec, "--out", (dir / "e").string(), "--frames", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  const SceneSpec s = parse_scene_spec(spec);
  const auto local = joint_sample(s.zoom_schedule(), s.prompts, EchoDenoiser(), s.sampler_config());
  const ZoomStack remote = read_zstk(dir / "e" / "stack.zstk");
  for (int i = 0; i < 2; ++i) EXPECT_LT(max_abs_diff(remote.layer(i), local.stack.layer(i)), 1e-5);
}
