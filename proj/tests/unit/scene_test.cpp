#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "segrefine/errors.hpp"
#include "segrefine/scene.hpp"

using namespace segrefine;
namespace fs = std::filesystem;

namespace {

void fill_box(LabelMap& m, int top, int left, int h, int w, std::uint16_t cls) {
  for (int r = top; r < top + h; ++r)
    for (int c = left; c < left + w; ++c) m.at(r, c) = cls;
}

std::vector<RoiTask> of_class(const std::vector<RoiTask>& tasks, int cls) {
  std::vector<RoiTask> out;
  for (const auto& t : tasks)
    if (t.class_index == cls) out.push_back(t);
  return out;
}

LabelMap random_labels(std::mt19937_64& rng, int h, int w, int classes) {
  LabelMap m(h, w, classes);
  std::uniform_int_distribution<int> d(0, classes - 1);
  for (auto& l : m.labels) l = static_cast<std::uint16_t>(d(rng));
  return m;
}

}  // namespace

TEST(Rois, PaddedBoxFixture) {
  LabelMap m(1000, 1000, 2);
  fill_box(m, 400, 400, 100, 100, 1);
  const auto tasks = of_class(extract_object_rois(m, SceneConfig{}), 1);
  ASSERT_EQ(tasks.size(), 1u);
  EXPECT_EQ(tasks[0].box, (BoxRegion{375, 375, 150, 150}));
  EXPECT_EQ(tasks[0].component.at(25, 25), 1.0f);
  EXPECT_EQ(tasks[0].component.at(24, 25), 0.0f);
}

TEST(Rois, MinAreaAndComponents) {
  LabelMap m(200, 200, 3);
  fill_box(m, 10, 10, 40, 40, 1);    // 1600 px
  fill_box(m, 100, 100, 40, 40, 1);  // second component, same class
  fill_box(m, 150, 10, 30, 30, 2);   // 900 px, below default min area
  const auto tasks = extract_object_rois(m, SceneConfig{});
  EXPECT_EQ(of_class(tasks, 1).size(), 2u);
  EXPECT_TRUE(of_class(tasks, 2).empty());
  SceneConfig small;
  small.min_area = 900;
  EXPECT_EQ(of_class(extract_object_rois(m, small), 2).size(), 1u);
  // padding clamps at the image border
  for (const auto& t : extract_object_rois(m, small)) EXPECT_TRUE(t.box.fits_inside(200, 200));
}

TEST(Rois, DiagonalTouchIsTwoComponents) {
  LabelMap m(80, 80, 2);
  fill_box(m, 0, 0, 40, 40, 1);
  fill_box(m, 40, 40, 40, 40, 1);
  SceneConfig cfg;
  cfg.min_area = 100;
  EXPECT_EQ(of_class(extract_object_rois(m, cfg), 1).size(), 2u);
}

TEST(Fuse, FallbackKeepsOriginalWhereAllBelowThreshold) {
  std::mt19937_64 rng(61);
  for (int t = 0; t < 20; ++t) {
    const auto original = random_labels(rng, 24, 30, 4);
    ClassConfidence conf{24, 30, {}};
    for (int cls = 0; cls < 4; ++cls)
      if (cls != t % 4) conf.planes[cls] = oracle::random_prob(rng, 24, 30);
    const auto out = fuse(conf, original);
    for (int r = 0; r < 24; ++r) {
      for (int c = 0; c < 30; ++c) {
        int best = -1;
        float bv = -1.0f;
        for (int cls = 0; cls < 4; ++cls) {
          const float v = conf.at(cls, r, c);
          if (conf.planes.contains(cls) && v > bv) {
            bv = v;
            best = cls;
          }
        }
        const int expect = bv < 0.5f ? original.at(r, c) : best;
        ASSERT_EQ(out.at(r, c), expect);
      }
    }
  }
}

TEST(Fuse, TiesGoToLowestClass) {
  const LabelMap original(2, 2, 3, 0);
  ClassConfidence conf{2, 2, {}};
  conf.planes[2] = ProbMask(2, 2, 1, 0.7f);
  conf.planes[1] = ProbMask(2, 2, 1, 0.7f);
  for (auto l : fuse(conf, original).labels) EXPECT_EQ(l, 1);
}

TEST(Fuse, EmptyTaskSetIsIdentity) {
  std::mt19937_64 rng(62);
  const auto original = random_labels(rng, 40, 40, 5);
  const ClassConfidence none{40, 40, {}};
  EXPECT_EQ(fuse(none, original), original);
  EXPECT_THROW(fuse(ClassConfidence{40, 41, {}}, original), std::invalid_argument);
}

TEST(Confidence, MergeMaxAndMissingPlanes) {
  ClassConfidence conf{10, 10, {}};
  EXPECT_EQ(conf.at(3, 1, 1), 0.0f);
  conf.merge_max(3, {0, 0, 5, 5}, ProbMask(5, 5, 1, 0.4f));
  conf.merge_max(3, {2, 2, 5, 5}, ProbMask(5, 5, 1, 0.6f));
  conf.merge_max(3, {0, 0, 2, 2}, ProbMask(2, 2, 1, 0.1f));
  EXPECT_EQ(conf.at(3, 0, 0), 0.4f);
  EXPECT_EQ(conf.at(3, 3, 3), 0.6f);
  EXPECT_EQ(conf.at(3, 9, 9), 0.0f);
  EXPECT_THROW(conf.merge_max(3, {8, 8, 5, 5}, ProbMask(5, 5, 1)), std::invalid_argument);
}

TEST(RefineScene, StuffZeroPlaneAndLocality) {
  auto model = build_refiner(RefinerConfig::toy(), 2);
  model.eval();
  LabelMap labels(96, 96, 3, 0);
  labels.stuff = {0};
  fill_box(labels, 30, 30, 36, 36, 1);
  SceneConfig cfg;
  cfg.min_area = 400;
  const auto tasks = extract_object_rois(labels, cfg);
  Raster2D image(96, 96, 3, 0.3f);
  const auto conf = refine_rois(model, image, tasks, labels.stuff, cfg);
  ASSERT_TRUE(conf.planes.contains(0));
  for (float v : conf.planes.at(0).values()) EXPECT_EQ(v, 0.0f);

  const auto out = refine_scene(model, image, labels, cfg);
  const auto box = of_class(tasks, 1).at(0).box;
  for (int r = 0; r < 96; ++r) {
    for (int c = 0; c < 96; ++c) {
      const bool inside = r >= box.top && r < box.bottom() && c >= box.left && c < box.right();
      if (!inside) EXPECT_EQ(out.at(r, c), labels.at(r, c));
      EXPECT_NE(out.at(r, c), 2);
    }
  }
}

TEST(Manifest, RoundTripAndErrors) {
  const auto dir = fs::temp_directory_path() / "segrefine_unit_manifest";
  fs::create_directories(dir);
  const std::vector<ClassEntry> classes{{0, "sky", true}, {1, "cat", false}};
  write_class_manifest(dir / "m.txt", classes);
  const auto back = read_class_manifest(dir / "m.txt");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].name, "sky");
  EXPECT_TRUE(back[0].stuff);
  EXPECT_FALSE(back[1].stuff);
  EXPECT_THROW(read_class_manifest(dir / "missing.txt"), IoError);
  {
    std::ofstream bad(dir / "bad.txt");
    bad << "0,sky\n";
  }
  EXPECT_THROW(read_class_manifest(dir / "bad.txt"), DataFormatError);
}

TEST(MeanClassIou, Fixtures) {
  LabelMap a(2, 2, 2, 0);
  EXPECT_DOUBLE_EQ(mean_class_iou(a, a), 1.0);
  LabelMap b = a;
  b.at(0, 0) = 1;
  // class 0: 3/4, class 1: 0/1
  EXPECT_DOUBLE_EQ(mean_class_iou(b, a), 0.375);
}
