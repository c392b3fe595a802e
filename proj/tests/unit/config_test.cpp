#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "segrefine/config.hpp"
#include "segrefine/errors.hpp"

using namespace segrefine;
namespace fs = std::filesystem;

TEST(Defaults, FullScaleRecipe) {
  const RunConfig c;
  EXPECT_EQ(c.schedule.optimizer, "adam");
  EXPECT_EQ(c.schedule.weight_decay, 1e-4);
  EXPECT_EQ(c.schedule.lr_phase1, 3e-4);
  EXPECT_EQ(c.schedule.lr_phase2, 3e-5);
  EXPECT_EQ(c.schedule.total_iterations(), 60000);
  EXPECT_EQ(c.schedule.batch_size, 9);
  EXPECT_EQ(c.schedule.crop_size, 224);
  EXPECT_EQ(c.loss.alpha, 5.0);
  EXPECT_EQ(c.engine.L, 900);
  EXPECT_EQ(c.engine.chip, 16);
  EXPECT_EQ(c.refiner.pyramid_bins, (std::vector<int>{1, 2, 3, 6}));
  EXPECT_EQ(c.scene.min_area, 1024);
  EXPECT_EQ(c.scene.stuff_attenuation, 0.0);
  EXPECT_EQ(c.schedule.learning_rate(29999), 3e-4);
  EXPECT_EQ(c.schedule.learning_rate(30000), 3e-5);
}

TEST(Settings, ParseCommentsAndWhitespace) {
  const auto s = parse_settings("# header\nseed = 7  # trailing\n\n  engine.L=450\n");
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.at("seed"), "7");
  EXPECT_EQ(s.at("engine.L"), "450");
  EXPECT_THROW(parse_settings("no equals sign\n"), std::invalid_argument);
}

TEST(Settings, UnknownKeyAndBadValue) {
  RunConfig c;
  EXPECT_THROW(apply_settings(c, {{"engine.size", "3"}}), std::invalid_argument);
  EXPECT_THROW(apply_settings(c, {{"engine.L", "big"}}), std::invalid_argument);
  EXPECT_THROW(apply_settings(c, {{"model.preset", "huge"}}), std::invalid_argument);
}

TEST(Settings, PresetBeforeChannelOverrides) {
  RunConfig c;
  apply_settings(c, {{"model.decoder4_channels", "24"}, {"model.preset", "toy"}});
  auto expect = RefinerConfig::toy();
  expect.decoder4_channels = 24;
  EXPECT_EQ(c.refiner, expect);
}

TEST(Resolve, DefaultsThenFileThenOverrides) {
  const auto dir = fs::temp_directory_path() / "segrefine_unit_config";
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "run.cfg");
    os << "seed = 3\nengine.L = 450\nscene.min_area = 10\n";
  }
  const auto c = resolve_config(dir / "run.cfg", {{"engine.L", "300"}});
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.engine.L, 300);
  EXPECT_EQ(c.scene.engine.L, 300);
  EXPECT_EQ(c.scene.min_area, 10);
  EXPECT_EQ(resolve_config({}, {}).engine.L, 900);
  EXPECT_THROW(resolve_config(dir / "absent.cfg", {}), IoError);
}

TEST(Dump, SortedAndReparsable) {
  RunConfig c;
  apply_settings(c, {{"model.preset", "toy"}, {"seed", "11"}, {"train.iters1", "5"}});
  const auto text = dump_config(c);
  EXPECT_NE(text.find("seed=11\n"), std::string::npos);
  std::string prev;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) {
    EXPECT_LT(prev, line);
    prev = line;
  }
  RunConfig again;
  apply_settings(again, parse_settings(text));
  EXPECT_EQ(dump_config(again), text);
}
