#include <gtest/gtest.h>

#include <random>
#include <string>

#include "oracles.hpp"
#include "segrefine/engine.hpp"

using namespace segrefine;

namespace {

RefinerModel& shared_model() {
  static RefinerModel model = [] {
    auto m = build_refiner(RefinerConfig::toy(), 1);
    m.eval();
    return m;
  }();
  return model;
}

}  // namespace

TEST(TileStarts, Fixtures) {
  const EngineConfig cfg;
  EXPECT_EQ(cfg.tile_stride(), 418);
  EXPECT_EQ(tile_starts(2000, cfg), (std::vector<int>{0, 418, 836, 1100}));
  EXPECT_EQ(tile_starts(900, cfg), (std::vector<int>{0}));
  EXPECT_EQ(tile_starts(901, cfg), (std::vector<int>{0, 1}));
  EXPECT_THROW(tile_starts(899, cfg), std::invalid_argument);
}

TEST(PlanTiles, SingleCropAndRectangle) {
  const EngineConfig cfg;
  const auto one = plan_tiles(900, 900, cfg);
  ASSERT_EQ(one.crops.size(), 1u);
  EXPECT_EQ(one.crops[0].contribution, (BoxRegion{0, 0, 900, 900}));
  const auto wide = plan_tiles(2000, 900, cfg);
  EXPECT_EQ(wide.crops.size(), 4u);
  for (const auto& t : wide.crops) EXPECT_EQ(t.crop.top, 0);
  EXPECT_THROW(plan_tiles(899, 2000, cfg), std::invalid_argument);
}

TEST(PlanTiles, InteriorContributionAndOverlap) {
  const EngineConfig cfg;
  const auto plan = plan_tiles(2000, 2000, cfg);
  ASSERT_EQ(plan.crops.size(), 16u);
  // second crop of the first row
  EXPECT_EQ(plan.crops[1].crop, (BoxRegion{0, 418, 900, 900}));
  EXPECT_EQ(plan.crops[1].contribution.left, 434);
  EXPECT_EQ(plan.crops[1].contribution.right() - 1, 1301);
  FusionAccumulator acc(2000, 2000);
  for (const auto& t : plan.crops) acc.add(ProbMask(900, 900, 1), t);
  EXPECT_EQ(acc.count(1000, 1000), 4);
  EXPECT_EQ(acc.count(0, 0), 1);
}

TEST(PlanTiles, RandomizedCoverage) {
  std::mt19937_64 rng(51);
  std::uniform_int_distribution<int> ld(64, 300);
  for (int t = 0; t < 1000; ++t) {
    EngineConfig cfg;
    cfg.L = ld(rng);
    cfg.chip = std::uniform_int_distribution<int>(0, cfg.L / 8)(rng);
    if (cfg.tile_stride() <= 0) continue;
    std::uniform_int_distribution<int> ed(cfg.L, 3 * cfg.L);
    const int w = ed(rng), h = ed(rng);
    const auto plan = plan_tiles(w, h, cfg);
    std::vector<int> cover(static_cast<std::size_t>(w) * h, 0);
    for (const auto& tile : plan.crops) {
      ASSERT_TRUE(tile.crop.fits_inside(h, w));
      ASSERT_EQ(tile.crop.height, cfg.L);
      const auto& c = tile.contribution;
      ASSERT_TRUE(c.top >= tile.crop.top && c.bottom() <= tile.crop.bottom());
      for (int r = c.top; r < c.bottom(); ++r)
        for (int col = c.left; col < c.right(); ++col) ++cover[static_cast<std::size_t>(r) * w + col];
    }
    for (int v : cover) ASSERT_GE(v, 1);
  }
}

TEST(Fusion, MatchesPerPixelMeanOracle) {
  EngineConfig cfg;
  cfg.L = 64;
  cfg.chip = 4;
  std::mt19937_64 rng(52);
  const auto plan = plan_tiles(150, 130, cfg);
  FusionAccumulator acc(130, 150);
  std::vector<double> sum(130 * 150, 0.0);
  std::vector<int> n(130 * 150, 0);
  for (const auto& tile : plan.crops) {
    const auto out = oracle::random_prob(rng, 64, 64);
    acc.add(out, tile);
    const auto& c = tile.contribution;
    for (int r = c.top; r < c.bottom(); ++r) {
      for (int col = c.left; col < c.right(); ++col) {
        sum[r * 150 + col] += out.at(r - tile.crop.top, col - tile.crop.left);
        ++n[r * 150 + col];
      }
    }
  }
  const auto fused = acc.finalize();
  for (int i = 0; i < 130 * 150; ++i) EXPECT_EQ(fused.values()[i], static_cast<float>(sum[i] / n[i]));
}

TEST(Fusion, ConstantIsIdempotentAndGapsThrow) {
  EngineConfig cfg;
  cfg.L = 64;
  cfg.chip = 4;
  const auto plan = plan_tiles(200, 90, cfg);
  FusionAccumulator acc(90, 200);
  for (const auto& tile : plan.crops) acc.add(ProbMask(64, 64, 1, 0.3f), tile);
  const auto fused = acc.finalize();
  for (float v : fused.values()) EXPECT_EQ(v, 0.3f);
  FusionAccumulator empty(4, 4);
  EXPECT_THROW(empty.finalize(), std::logic_error);
}

TEST(EngineConfig, Validation) {
  EngineConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.L = 32;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = EngineConfig{};
  cfg.chip = 300;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(LocalLadder, Fixtures) {
  EngineConfig cfg;
  EXPECT_TRUE(local_ladder(899, cfg).empty());
  EXPECT_EQ(local_ladder(900, cfg), std::vector<int>{900});
  EXPECT_EQ(local_ladder(8000, cfg), std::vector<int>{8000});
  cfg.recursion = true;
  EXPECT_EQ(local_ladder(8000, cfg), (std::vector<int>{3600, 8000}));
  EXPECT_EQ(local_ladder(3000, cfg), std::vector<int>{3000});
}

TEST(Dispatch, ThresholdAt900) {
  auto& model = shared_model();
  const EngineConfig cfg;
  for (const int side : {899, 900}) {
    std::string path;
    int plans = 0;
    EngineHooks hooks;
    hooks.on_dispatch = [&](std::string_view p) { path = p; };
    hooks.on_plan = [&](const TilePlan&) { ++plans; };
    const auto out = refine(model, Raster2D(side, 120, 3, 0.5f), ProbMask(side, 120, 1, 0.5f), cfg, hooks);
    EXPECT_EQ(out.height(), side);
    EXPECT_EQ(out.width(), 120);
    EXPECT_EQ(path, side == 899 ? "global-only" : "global+local");
    EXPECT_EQ(plans, side == 899 ? 0 : 1);
  }
}

TEST(GlobalStep, SmallInputKeepsExtent) {
  auto& model = shared_model();
  std::mt19937_64 rng(53);
  const auto init = oracle::random_prob(rng, 224, 224);
  const auto g = global_step(model, Raster2D(224, 224, 3, 0.2f), init, EngineConfig{});
  EXPECT_EQ(g.s11.height(), 224);
  EXPECT_EQ(g.s14.width(), 224);
  const auto direct = cascade_final(model, Raster2D(224, 224, 3, 0.2f), init, init, {8, 4, 1});
  EXPECT_EQ(g.s11, direct.s11);
  EXPECT_THROW(global_step(model, Raster2D(20, 20, 3), ProbMask(20, 21, 1), EngineConfig{}),
               std::invalid_argument);
}
