#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "segrefine/engine.hpp"
#include "segrefine/network.hpp"
#include "segrefine/raster.hpp"

namespace segrefine {

struct LabelMap {
  int height = 0;
  int width = 0;
  int class_count = 0;
  std::vector<std::uint16_t> labels;  // row-major, each < class_count
  std::set<int> stuff;                // amorphous background classes

  LabelMap() = default;
  LabelMap(int height, int width, int class_count, std::uint16_t fill = 0);

  std::uint16_t at(int row, int col) const { return labels[static_cast<std::size_t>(row) * width + col]; }
  std::uint16_t& at(int row, int col) { return labels[static_cast<std::size_t>(row) * width + col]; }
  /// Throws std::invalid_argument when a label is >= class_count.
  void validate() const;
  friend bool operator==(const LabelMap& a, const LabelMap& b) {
    return a.height == b.height && a.width == b.width && a.labels == b.labels;
  }
};

struct ClassEntry {
  int index = 0;
  std::string name;
  bool stuff = false;
};

/// Class manifest: one `index,name,stuff` line per class (stuff is 0 or 1);
/// blank lines and lines starting with '#' are ignored.
std::vector<ClassEntry> read_class_manifest(const std::filesystem::path& path);
void write_class_manifest(const std::filesystem::path& path, const std::vector<ClassEntry>& classes);

struct SceneConfig {
  int min_area = 1024;             // components smaller than this are left alone
  double roi_padding = 0.25;       // fraction of the component box added per side
  double stuff_attenuation = 0.0;  // multiplier on stuff-class confidences
  float fuse_threshold = 0.5f;
  EngineConfig engine;
};

struct RoiTask {
  int class_index = 0;
  int component_id = 0;
  BoxRegion box;         // padded, clamped to the image
  BinaryMask component;  // this component only, in box coordinates
};

/// 4-connected components per class with area >= min_area, each boxed with
/// per-dimension padding.
std::vector<RoiTask> extract_object_rois(const LabelMap& labels, const SceneConfig& config);

/// Sparse per-class confidence planes; classes without a plane read as 0.
struct ClassConfidence {
  int height = 0;
  int width = 0;
  std::map<int, ProbMask> planes;

  float at(int cls, int row, int col) const;
  /// Per-pixel max merge of a box-local patch into the class plane.
  void merge_max(int cls, const BoxRegion& box, const ProbMask& patch);
};

/// Refines each task's ROI with the cascade engine and writes confidences back
/// (per-pixel max across same-class ROIs). Stuff planes are scaled by the
/// attenuation factor.
ClassConfidence refine_rois(RefinerModel& model, const Raster2D& image,
                            const std::vector<RoiTask>& tasks, const std::set<int>& stuff,
                            const SceneConfig& config);

/// Modified argmax: the original label survives wherever every refined
/// confidence is below `threshold`; ties go to the lowest class index.
LabelMap fuse(const ClassConfidence& conf, const LabelMap& original, float threshold = 0.5f);

/// extract_object_rois + refine_rois + fuse.
LabelMap refine_scene(RefinerModel& model, const Raster2D& image, const LabelMap& labels,
                      const SceneConfig& config);

/// Mean over classes present in either map of per-class IoU.
double mean_class_iou(const LabelMap& pred, const LabelMap& gt);

}  // namespace segrefine
