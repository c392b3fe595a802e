#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "segrefine/raster.hpp"

using namespace segrefine;

TEST(Raster, RejectsEmptyDimensions) {
  EXPECT_THROW(Raster2D(0, 3, 1), std::invalid_argument);
  EXPECT_THROW(Raster2D(3, 3, 0), std::invalid_argument);
}

TEST(Raster, MaskFlavours) {
  Raster2D m(2, 2, 1, 0.3f);
  EXPECT_TRUE(is_prob_mask(m));
  EXPECT_FALSE(is_binary_mask(m));
  const auto b = binarize(m, 0.3f);
  EXPECT_TRUE(is_binary_mask(b));
  EXPECT_EQ(b.at(1, 1), 1.0f);
}

TEST(BilinearResize, ConstantStaysConstant) {
  Raster2D c(5, 7, 1, 0.7f);
  const auto out = bilinear_resize(c, 13, 3);
  for (float v : out.values()) EXPECT_FLOAT_EQ(v, 0.7f);
}

TEST(BilinearResize, SameSizeIsBitIdentical) {
  std::mt19937_64 rng(1);
  const auto x = oracle::random_prob(rng, 9, 11);
  EXPECT_EQ(bilinear_resize(x, 9, 11), x);
}

TEST(BilinearResize, HalfPixelFixture) {
  Raster2D x(2, 2, 1, std::vector<float>{0, 1, 0, 1});
  const auto out = bilinear_resize(x, 4, 4);
  const float expect[4] = {0.0f, 0.25f, 0.75f, 1.0f};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) EXPECT_FLOAT_EQ(out.at(r, c), expect[c]);
}

TEST(BilinearResize, MatchesOracle) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    std::uniform_int_distribution<int> d(1, 20);
    const int h = d(rng), w = d(rng), oh = d(rng), ow = d(rng);
    Raster2D x(h, w, 3);
    std::uniform_real_distribution<float> u(0, 1);
    for (auto& v : x.values()) v = u(rng);
    const auto a = bilinear_resize(x, oh, ow);
    const auto b = oracle::bilinear(x, oh, ow);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.values()[i], b.values()[i], 1e-6);
  }
}

TEST(BilinearResize, UpDownRoundTripAwayFromEdges) {
  Raster2D x(16, 16, 1);
  for (int r = 4; r < 12; ++r)
    for (int c = 4; c < 12; ++c) x.at(r, c) = 1.0f;
  const auto back = bilinear_resize(bilinear_resize(x, 32, 32), 16, 16);
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 16; ++c) {
      const bool near_edge = (r >= 3 && r <= 4) || (r >= 11 && r <= 12) || (c >= 3 && c <= 4) || (c >= 11 && c <= 12);
      if (!near_edge) EXPECT_NEAR(back.at(r, c), x.at(r, c), 1e-6);
    }
  }
}

TEST(BilinearResize, RejectsNonPositiveTarget) {
  Raster2D x(2, 2, 1);
  EXPECT_THROW(bilinear_resize(x, 0, 2), std::invalid_argument);
}

TEST(Crop, FullBoxSingleBoxAndOffsets) {
  std::mt19937_64 rng(3);
  const auto x = oracle::random_prob(rng, 10, 12);
  EXPECT_EQ(extract_crop(x, {0, 0, 10, 12}), x);
  EXPECT_EQ(extract_crop(x, {4, 5, 1, 1}).at(0, 0), x.at(4, 5));
  EXPECT_THROW(extract_crop(x, {5, 5, 6, 2}), std::invalid_argument);
  EXPECT_THROW(extract_crop(x, {-1, 0, 2, 2}), std::invalid_argument);
}

TEST(Crop, LargeInteriorCropRows) {
  Raster2D x(2000, 2000, 1);
  for (int r = 0; r < 2000; ++r) x.at(r, 0) = static_cast<float>(r);
  const auto c = extract_crop(x, {418, 418, 900, 900});
  EXPECT_EQ(c.height(), 900);
  EXPECT_EQ(x.at(418, 0), 418.0f);
  const auto col = extract_crop(x, {418, 0, 900, 1});
  EXPECT_EQ(col.at(0, 0), 418.0f);
  EXPECT_EQ(col.at(899, 0), 1317.0f);
}

TEST(Crop, PartitionReconstructs) {
  std::mt19937_64 rng(4);
  const auto x = oracle::random_prob(rng, 17, 23);
  Raster2D y(17, 23, 1);
  for (int r = 0; r < 17; r += 5) {
    for (int c = 0; c < 23; c += 7) {
      const BoxRegion b{r, c, std::min(5, 17 - r), std::min(7, 23 - c)};
      paste(y, extract_crop(x, b), r, c);
    }
  }
  EXPECT_EQ(x, y);
}

TEST(LongAxis, Fixtures) {
  EXPECT_EQ(long_axis_extent(2328, 3492, 900), std::make_pair(600, 900));
  EXPECT_EQ(long_axis_extent(224, 224, 900), std::make_pair(224, 224));
  EXPECT_EQ(long_axis_extent(900, 1800, 900), std::make_pair(450, 900));
  EXPECT_EQ(long_axis_extent(2400, 3600, 900), std::make_pair(600, 900));
  Raster2D small(224, 224, 1, 0.25f);
  const auto [same, scale] = downsample_to_long_axis(small, 900);
  EXPECT_EQ(scale, 1.0);
  EXPECT_EQ(same, small);
}

TEST(LongAxis, NeverUpsamples) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> d(1, 3000);
  for (int t = 0; t < 500; ++t) {
    const int h = d(rng), w = d(rng), l = d(rng);
    const auto [oh, ow] = long_axis_extent(h, w, l);
    EXPECT_LE(oh, h);
    EXPECT_LE(ow, w);
    EXPECT_EQ(std::max(oh, ow), std::min(std::max(h, w), l));
  }
}

TEST(MaskStack, ReplicationAndReplacement) {
  std::mt19937_64 rng(6);
  const auto init = oracle::random_prob(rng, 6, 6);
  auto stack = make_mask_stack(init);
  EXPECT_EQ(stack.initial, init);
  EXPECT_EQ(stack.coarse, init);
  EXPECT_EQ(stack.fine, init);
  const auto coarse = oracle::random_prob(rng, 6, 6);
  const auto fine = oracle::random_prob(rng, 6, 6);
  stack.replace(2, coarse);
  stack.replace(3, fine);
  EXPECT_EQ(stack.slot(1), init);
  EXPECT_EQ(stack.slot(2), coarse);
  EXPECT_EQ(stack.slot(3), fine);
  EXPECT_THROW(stack.replace(4, fine), std::invalid_argument);
  EXPECT_THROW(stack.replace(2, Raster2D(5, 6, 1)), std::invalid_argument);
}

TEST(PadReflect, MirrorsWithoutEdgeRepeat) {
  Raster2D x(1, 4, 1, std::vector<float>{1, 2, 3, 4});
  const auto p = pad_reflect(x, 0, 3);
  const float expect[7] = {1, 2, 3, 4, 3, 2, 1};
  for (int c = 0; c < 7; ++c) EXPECT_EQ(p.at(0, c), expect[c]);
}

TEST(StackChannels, ConcatAndSplit) {
  std::mt19937_64 rng(7);
  const std::array<Raster2D, 2> parts{oracle::random_prob(rng, 3, 4), oracle::random_prob(rng, 3, 4)};
  const auto s = stack_channels(parts);
  EXPECT_EQ(s.channels(), 2);
  EXPECT_EQ(channel(s, 0), parts[0]);
  EXPECT_EQ(channel(s, 1), parts[1]);
}
