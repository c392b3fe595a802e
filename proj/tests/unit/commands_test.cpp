#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "segrefine/checkpoint.hpp"
#include "segrefine/commands.hpp"
#include "segrefine/image_io.hpp"
#include "segrefine/scene.hpp"

using namespace segrefine;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

BinaryMask blob(int h, int w, int top, int left, int size) {
  BinaryMask m(h, w, 1);
  for (int r = top; r < top + size; ++r)
    for (int c = left; c < left + size; ++c) m.at(r, c) = 1.0f;
  return m;
}

class Commands : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "segrefine_unit_commands";
    fs::remove_all(root_);
    fs::create_directories(root_);
    auto model = build_refiner(RefinerConfig::toy(), 4);
    save_checkpoint(root_ / "model.srck", model, CheckpointMeta{RefinerConfig::toy(), 0, 0, {}});
    Raster2D img(80, 96, 3, 0.2f);
    for (int r = 20; r < 60; ++r)
      for (int c = 30; c < 70; ++c) img.at(r, c, 0) = 0.9f;
    write_image(root_ / "img.png", img);
    write_mask(root_ / "mask.png", blob(80, 96, 22, 28, 36));
    write_mask(root_ / "mask_small.png", blob(40, 48, 11, 14, 18));
  }

  static RunConfig toy_config() {
    RunConfig c;
    apply_settings(c, {{"model.preset", "toy"}, {"seed", "3"}});
    return c;
  }

  static inline fs::path root_;
};

}  // namespace

TEST(LogEvent, QuotesValuesWithSpaces) {
  std::ostringstream os;
  log_event(os, "x", {{"a", "1"}, {"b", "two words"}, {"c", "k=v"}});
  EXPECT_EQ(os.str(), "event=x a=1 b=\"two words\" c=\"k=v\"\n");
}

TEST_F(Commands, RefineWritesOutputsDeterministically) {
  std::ostringstream log;
  RefineArgs args{root_ / "img.png", root_ / "mask.png", root_ / "out1.png", root_ / "model.srck",
                  root_ / "conf.png", root_ / "overlay.png"};
  ASSERT_EQ(cmd_refine(args, toy_config(), log), kExitOk) << log.str();
  EXPECT_NE(log.str().find("event=dispatch path=global-only"), std::string::npos);
  EXPECT_NO_THROW(read_mask(root_ / "out1.png"));
  EXPECT_TRUE(fs::exists(root_ / "conf.png"));
  EXPECT_TRUE(fs::exists(root_ / "overlay.png"));
  args.out = root_ / "out2.png";
  args.confidence_out = root_ / "conf2.png";
  ASSERT_EQ(cmd_refine(args, toy_config(), log), kExitOk);
  EXPECT_EQ(slurp(root_ / "out1.png"), slurp(root_ / "out2.png"));
  EXPECT_EQ(slurp(root_ / "conf.png"), slurp(root_ / "conf2.png"));
}

TEST_F(Commands, RefineResizesMismatchedMask) {
  std::ostringstream log;
  RefineArgs args{root_ / "img.png", root_ / "mask_small.png", root_ / "out3.png", root_ / "model.srck", {}, {}};
  ASSERT_EQ(cmd_refine(args, toy_config(), log), kExitOk);
  EXPECT_NE(log.str().find("reason=mask_resized"), std::string::npos);
  EXPECT_EQ(read_mask(root_ / "out3.png").width(), 96);
}

TEST_F(Commands, RefineErrorCodes) {
  std::ostringstream log;
  RefineArgs args{root_ / "img.png", root_ / "mask.png", root_ / "o.png", root_ / "absent.srck", {}, {}};
  EXPECT_EQ(cmd_refine(args, toy_config(), log), kExitIo);
  args.model = root_ / "model.srck";
  auto bad = toy_config();
  bad.engine.L = 16;
  EXPECT_EQ(cmd_refine(args, bad, log), kExitShape);
}

TEST_F(Commands, EvalReportsAndUnmatched) {
  const auto pred = root_ / "pred";
  const auto gt = root_ / "gt";
  fs::create_directories(pred);
  fs::create_directories(gt);
  write_mask(gt / "a.png", blob(32, 32, 4, 4, 16));
  write_mask(pred / "a.png", blob(32, 32, 4, 4, 16));
  write_mask(gt / "b.png", blob(32, 32, 8, 8, 10));
  write_mask(pred / "b.png", BinaryMask(32, 32, 1));
  std::ostringstream log;
  ASSERT_EQ(cmd_eval({pred, gt, root_ / "report"}, log), kExitOk) << log.str();
  const auto kv = slurp(root_ / "report" / "report.kv");
  EXPECT_NE(kv.find("image.a.iou=1\n"), std::string::npos);
  EXPECT_NE(kv.find("image.b.iou=0\n"), std::string::npos);

  write_mask(pred / "c.png", BinaryMask(32, 32, 1));
  EXPECT_EQ(cmd_eval({pred, gt, {}}, log), kExitUnmatched);
  EXPECT_NE(log.str().find("event=unmatched stem=c missing_in=gt"), std::string::npos);
  fs::remove(pred / "c.png");

  write_mask(pred / "b.png", BinaryMask(16, 32, 1));
  EXPECT_EQ(cmd_eval({pred, gt, {}}, log), kExitShape);
  EXPECT_EQ(cmd_eval({root_ / "nowhere", gt, {}}, log), kExitIo);
}

TEST_F(Commands, ParseUnknownLabelAndSuccess) {
  LabelImage labels{80, 96, std::vector<std::uint16_t>(80 * 96, 0)};
  for (int r = 20; r < 60; ++r)
    for (int c = 30; c < 70; ++c) labels.labels[r * 96 + c] = 2;
  write_label_image(root_ / "labels.png", labels);
  write_class_manifest(root_ / "classes.txt", {{0, "background", true}, {2, "box", false}});
  auto cfg = toy_config();
  cfg.scene.min_area = 100;
  std::ostringstream log;
  ParseArgs args{root_ / "img.png", root_ / "labels.png", root_ / "classes.txt", root_ / "parsed.png",
                 root_ / "model.srck"};
  ASSERT_EQ(cmd_parse(args, cfg, log), kExitOk) << log.str();
  const auto out = read_label_image(root_ / "parsed.png");
  EXPECT_EQ(out.height, 80);
  for (auto l : out.labels) EXPECT_TRUE(l == 0 || l == 2);

  write_class_manifest(root_ / "classes_short.txt", {{0, "background", true}});
  args.manifest = root_ / "classes_short.txt";
  EXPECT_EQ(cmd_parse(args, cfg, log), kExitUnknownLabel);
  EXPECT_NE(log.str().find("reason=unknown_label index=2"), std::string::npos);
}

TEST_F(Commands, PerturbManifestAndDeterminism) {
  const auto gt = root_ / "pgt";
  fs::create_directories(gt);
  write_mask(gt / "one.png", blob(64, 64, 10, 10, 30));
  write_mask(gt / "two.png", blob(64, 64, 20, 5, 25));
  write_mask(gt / "zero.png", BinaryMask(64, 64, 1));
  std::ostringstream log;
  ASSERT_EQ(cmd_perturb({gt, root_ / "p1"}, toy_config(), log), kExitOk);
  ASSERT_EQ(cmd_perturb({gt, root_ / "p2"}, toy_config(), log), kExitOk);
  EXPECT_NE(log.str().find("reason=empty_mask stem=zero"), std::string::npos);
  const auto manifest = slurp(root_ / "p1" / "perturb_manifest.txt");
  EXPECT_EQ(manifest, slurp(root_ / "p2" / "perturb_manifest.txt"));
  EXPECT_NE(manifest.find("file.two.stream=1\n"), std::string::npos);
  EXPECT_NE(manifest.find("count=3\n"), std::string::npos);
  for (const auto* s : {"one.png", "two.png", "zero.png"})
    EXPECT_EQ(slurp(root_ / "p1" / s), slurp(root_ / "p2" / s));
  EXPECT_EQ(cmd_perturb({root_ / "nowhere", root_ / "p3"}, toy_config(), log), kExitIo);
}

TEST_F(Commands, TrainTinyRunAndMissingResume) {
  auto cfg = toy_config();
  apply_settings(cfg, {{"train.dataset", "synthetic:2"},
                       {"train.synthetic_size", "48"},
                       {"train.crop_size", "32"},
                       {"train.batch_size", "1"},
                       {"train.iters1", "1"},
                       {"train.iters2", "1"},
                       {"train.log_every", "1"}});
  cfg.out_dir = root_ / "train";
  std::ostringstream log;
  ASSERT_EQ(cmd_train(cfg, log), kExitOk) << log.str();
  EXPECT_TRUE(fs::exists(cfg.out_dir / "final.srck"));
  EXPECT_NE(log.str().find("event=iter iter=2"), std::string::npos);
  cfg.resume = root_ / "absent.srck";
  EXPECT_EQ(cmd_train(cfg, log), kExitIo);
  cfg.resume.clear();
  cfg.dataset = (root_ / "no_dataset").string();
  EXPECT_EQ(cmd_train(cfg, log), kExitIo);
}
