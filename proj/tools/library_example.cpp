// Using the library without the CLI: sample a three-level stack with the
// built-in Gaussian denoiser, then write its renders and a short zoom.

#include <cstdio>

#include "zoomstack.hpp"

int main(int argc, char** argv) {
  using namespace zoomstack;
  const std::filesystem::path out = argc > 1 ? argv[1] : "library_example_out";

  const ZoomSchedule schedule(/*p=*/2, /*N=*/3, 64, 64, 3);
  const std::vector<std::string> prompts = {"a valley", "a village", "a doorway"};

  SamplerConfig cfg;
  cfg.steps = 64;
  cfg.seed = 1;
  const GaussianDenoiser denoiser(schedule.blank(), 0.3, cfg.noise_schedule());

  const SamplingResult result = joint_sample(schedule, prompts, denoiser, cfg);
  std::printf("consistency error %.3g after %zu steps\n", consistency_error(result.stack),
              result.trace.steps.size());

  std::filesystem::create_directories(out);
  write_zstk(out / "stack.zstk", result.stack);
  for (int i = 0; i < schedule.levels(); ++i) write_png(out / ("render_" + std::to_string(i) + ".png"), render_image(result.stack, i));
  export_sequence(result.stack, 16, out / "frames");
  return 0;
}
