#include <gtest/gtest.h>

#include "support/fixtures.hpp"

using namespace zoomstack;

namespace {

ObservationSet random_observations(const ZoomSchedule& s, std::uint64_t seed) {
  std::vector<Image> est;
  for (int i = 0; i < s.levels(); ++i) est.push_back(uniform_image(s.height(), s.width(), s.channels(), seed, i));
  return ObservationSet(s, est);
}

// Period-2 checkerboard of amplitude a.
Image checkerboard(int h, int w, int c, double a) {
  Image x(h, w, c);
  for (int r = 0; r < h; ++r)
    for (int col = 0; col < w; ++col)
      for (int ch = 0; ch < c; ++ch) x(r, col, ch) = ((r + col) % 2 ? a : -a);
  return x;
}

}  // namespace

TEST(Blend, ContributingBands) {
  EXPECT_EQ(first_contributing_band(2, 0), 0);
  EXPECT_EQ(first_contributing_band(2, 1), 1);
  EXPECT_EQ(first_contributing_band(2, 3), 3);
  EXPECT_EQ(first_contributing_band(4, 1), 2);
  EXPECT_EQ(first_contributing_band(3, 1), 2);
  EXPECT_EQ(first_contributing_band(3, 2), 4);
  EXPECT_TRUE(contributes(2, 2, 2, 0));
  EXPECT_FALSE(contributes(2, 2, 1, 0));
  EXPECT_TRUE(contributes(2, 2, 1, 1));
  EXPECT_FALSE(contributes(2, 1, 2, 3));  // finer observations never feed a coarser layer
}

TEST(Blend, LayerZeroIsIdentity) {
  const ZoomSchedule s(2, 3, 32, 32, 3);
  const ObservationSet obs = random_observations(s, 1);
  EXPECT_EQ(blend_layer(obs, 0), obs.estimate(0));
  EXPECT_EQ(naive_blend(obs).layer(0), obs.estimate(0));
}

TEST(Blend, SingleLevelIsIdentity) {
  const ZoomSchedule s(2, 1, 32, 32, 3);
  const ObservationSet obs = random_observations(s, 2);
  EXPECT_EQ(blend_stack(obs).layer(0), obs.estimate(0));
}

TEST(Blend, TwoLevelBandAverage) {
  // Independent oracle: band 0 from x_1 only, coarser bands and the residual
  // are the mean of x_1 and the upscaled center of x_0.
  const ZoomSchedule s(2, 2, 32, 32, 1);
  const ObservationSet obs = random_observations(s, 3);
  const Image up = resize_bilinear(crop_center(obs.estimate(0), 16, 16), 32, 32);
  const LaplacianPyramid a = build_laplacian(up), b = build_laplacian(obs.estimate(1));
  LaplacianPyramid expect = b;
  for (int k = 1; k < b.band_count(); ++k) expect.bands[k] = 0.5 * (a.bands[k] + b.bands[k]);
  expect.residual = 0.5 * (a.residual + b.residual);
  EXPECT_LT(max_abs_diff(blend_layer(obs, 1), recompose(expect)), 1e-12);
}

TEST(Blend, NaiveIsPixelMean) {
  const ZoomSchedule s(2, 3, 32, 32, 1);
  const ObservationSet obs = random_observations(s, 4);
  const Image up0 = resize_bilinear(crop_center(obs.estimate(0), 8, 8), 32, 32);
  const Image up1 = resize_bilinear(crop_center(obs.estimate(1), 16, 16), 32, 32);
  const Image expect = (1.0 / 3.0) * (up0 + up1 + obs.estimate(2));
  EXPECT_LT(max_abs_diff(naive_blend(obs).layer(2), expect), 1e-12);
}

TEST(Blend, FixedPointOnConsistentStack) {
  for (int p : {2, 4}) {
    const ZoomSchedule s(p, 3, 64, 64, 3);
    const ObservationSet obs = render_all(smooth_scene_stack(s, 11));
    const ObservationSet again = render_all(blend_stack(obs));
    for (int i = 0; i < 3; ++i) EXPECT_LT(max_abs_diff(again.estimate(i), obs.estimate(i)), 2e-2) << "p=" << p;
  }
}

TEST(Blend, Linear) {
  const ZoomSchedule s(2, 3, 32, 32, 2);
  const ObservationSet a = random_observations(s, 5), b = random_observations(s, 6);
  std::vector<Image> sum;
  for (int i = 0; i < 3; ++i) sum.push_back(a.estimate(i) + 3.0 * b.estimate(i));
  const ZoomStack ba = blend_stack(a), bb = blend_stack(b), bs = blend_stack(ObservationSet(s, sum));
  for (int i = 0; i < 3; ++i) EXPECT_LT(max_abs_diff(bs.layer(i), ba.layer(i) + 3.0 * bb.layer(i)), 1e-12);
}

TEST(Blend, CheckerboardKeepsFinestBand) {
  // The finest observation holds a pixel checkerboard, coarser ones are flat.
  // Band averaging leaves band 0 to the finest level alone; pixel averaging
  // dilutes it.
  const ZoomSchedule s(2, 3, 64, 64, 1);
  std::vector<Image> est = {Image(64, 64, 1), Image(64, 64, 1), checkerboard(64, 64, 1, 0.5)};
  const ObservationSet obs(s, est);
  const double multi = squared_norm(build_laplacian(blend_layer(obs, 2)).bands[0]);
  const double naive = squared_norm(build_laplacian(naive_blend(obs).layer(2)).bands[0]);
  const double own = squared_norm(build_laplacian(est[2]).bands[0]);
  EXPECT_NEAR(multi, own, 1e-9 * own);
  EXPECT_LT(naive, multi);
  EXPECT_NEAR(naive, own / 9.0, 1e-9 * own);
}

TEST(Blend, RejectsMismatchedObservations) {
  const ZoomSchedule s(2, 2, 32, 32, 1);
  EXPECT_THROW(ObservationSet(s, {Image(32, 32, 1)}), ValidationError);
  EXPECT_THROW(ObservationSet(s, {Image(32, 32, 1), Image(32, 32, 3)}), DimensionError);
  const ZoomSchedule odd(3, 2, 54, 54, 1);
  EXPECT_THROW(blend_layer(random_observations(odd, 1), 1), DimensionError);
}
