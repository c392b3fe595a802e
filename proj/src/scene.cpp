#include "segrefine/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "segrefine/errors.hpp"

namespace segrefine {

LabelMap::LabelMap(int height, int width, int class_count, std::uint16_t fill)
    : height(height),
      width(width),
      class_count(class_count),
      labels(static_cast<std::size_t>(height) * width, fill) {
  if (height < 1 || width < 1 || class_count < 1) {
    throw std::invalid_argument("label map needs positive extent and class count");
  }
}

void LabelMap::validate() const {
  if (labels.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("label map size does not match its extent");
  }
  for (const auto l : labels) {
    if (l >= class_count) {
      throw std::invalid_argument("label " + std::to_string(l) + " >= class count " +
                                  std::to_string(class_count));
    }
  }
}

std::vector<ClassEntry> read_class_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open class manifest: " + path.string());
  std::vector<ClassEntry> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string idx, name, stuff;
    if (!std::getline(ss, idx, ',') || !std::getline(ss, name, ',') || !std::getline(ss, stuff)) {
      throw DataFormatError(path.string(), "line " + std::to_string(line_no) + ": expected index,name,stuff");
    }
    try {
      out.push_back({std::stoi(idx), name, std::stoi(stuff) != 0});
    } catch (const std::exception&) {
      throw DataFormatError(path.string(), "line " + std::to_string(line_no) + ": bad number");
    }
  }
  return out;
}

void write_class_manifest(const std::filesystem::path& path, const std::vector<ClassEntry>& classes) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write class manifest: " + path.string());
  os << "# index,name,stuff\n";
  for (const auto& c : classes) os << c.index << ',' << c.name << ',' << (c.stuff ? 1 : 0) << '\n';
}

std::vector<RoiTask> extract_object_rois(const LabelMap& labels, const SceneConfig& config) {
  const int h = labels.height;
  const int w = labels.width;
  std::vector<int> comp(static_cast<std::size_t>(h) * w, -1);
  std::vector<RoiTask> tasks;
  std::vector<std::array<int, 2>> stack, pixels;
  int next_id = 0;
  for (int r0 = 0; r0 < h; ++r0) {
    for (int c0 = 0; c0 < w; ++c0) {
      if (comp[static_cast<std::size_t>(r0) * w + c0] >= 0) continue;
      const auto cls = labels.at(r0, c0);
      const int id = next_id++;
      pixels.clear();
      stack.push_back({r0, c0});
      comp[static_cast<std::size_t>(r0) * w + c0] = id;
      int top = r0, bottom = r0, left = c0, right = c0;
      while (!stack.empty()) {
        const auto [r, c] = stack.back();
        stack.pop_back();
        pixels.push_back({r, c});
        top = std::min(top, r);
        bottom = std::max(bottom, r);
        left = std::min(left, c);
        right = std::max(right, c);
        constexpr std::array<std::array<int, 2>, 4> kNeighbours{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
        for (const auto& d : kNeighbours) {
          const int nr = r + d[0], nc = c + d[1];
          if (nr < 0 || nc < 0 || nr >= h || nc >= w) continue;
          auto& slot = comp[static_cast<std::size_t>(nr) * w + nc];
          if (slot < 0 && labels.at(nr, nc) == cls) {
            slot = id;
            stack.push_back({nr, nc});
          }
        }
      }
      if (static_cast<long long>(pixels.size()) < config.min_area) continue;

      const int bh = bottom - top + 1;
      const int bw = right - left + 1;
      const int pad_y = static_cast<int>(std::lround(config.roi_padding * bh));
      const int pad_x = static_cast<int>(std::lround(config.roi_padding * bw));
      const int t = std::max(0, top - pad_y);
      const int l = std::max(0, left - pad_x);
      const int b = std::min(h, bottom + 1 + pad_y);
      const int rr = std::min(w, right + 1 + pad_x);
      RoiTask task{cls, id, BoxRegion{t, l, b - t, rr - l}, BinaryMask(b - t, rr - l, 1)};
      for (const auto& [r, c] : pixels) task.component.at(r - t, c - l) = 1.0f;
      tasks.push_back(std::move(task));
    }
  }
  return tasks;
}

float ClassConfidence::at(int cls, int row, int col) const {
  const auto it = planes.find(cls);
  return it == planes.end() ? 0.0f : it->second.at(row, col);
}

void ClassConfidence::merge_max(int cls, const BoxRegion& box, const ProbMask& patch) {
  if (!box.fits_inside(height, width) || patch.height() != box.height || patch.width() != box.width) {
    throw std::invalid_argument("merge_max: patch does not fit its box");
  }
  auto [it, _] = planes.try_emplace(cls, ProbMask(height, width, 1, 0.0f));
  auto& plane = it->second;
  for (int r = 0; r < box.height; ++r) {
    for (int c = 0; c < box.width; ++c) {
      float& dst = plane.at(box.top + r, box.left + c);
      dst = std::max(dst, patch.at(r, c));
    }
  }
}

ClassConfidence refine_rois(RefinerModel& model, const Raster2D& image,
                            const std::vector<RoiTask>& tasks, const std::set<int>& stuff,
                            const SceneConfig& config) {
  ClassConfidence conf{image.height(), image.width(), {}};
  for (const auto& task : tasks) {
    const bool is_stuff = stuff.contains(task.class_index);
    ProbMask patch;
    if (is_stuff && config.stuff_attenuation == 0.0) {
      // fully attenuated: the refined plane would be scaled to zero anyway
      patch = ProbMask(task.box.height, task.box.width, 1, 0.0f);
    } else {
      patch = refine(model, extract_crop(image, task.box), task.component, config.engine);
      if (is_stuff) {
        for (auto& v : patch.values()) v = static_cast<float>(v * config.stuff_attenuation);
      }
    }
    conf.merge_max(task.class_index, task.box, patch);
  }
  return conf;
}

LabelMap fuse(const ClassConfidence& conf, const LabelMap& original, float threshold) {
  if (conf.height != original.height || conf.width != original.width) {
    throw std::invalid_argument("fuse: confidence and label map extents differ");
  }
  LabelMap out = original;
  for (int r = 0; r < original.height; ++r) {
    for (int c = 0; c < original.width; ++c) {
      int best = -1;
      float best_value = -1.0f;
      // map iteration is ascending in class index, so strict '>' keeps the lowest on ties
      for (const auto& [cls, plane] : conf.planes) {
        const float v = plane.at(r, c);
        if (v > best_value) {
          best_value = v;
          best = cls;
        }
      }
      if (best >= 0 && best_value >= threshold) out.at(r, c) = static_cast<std::uint16_t>(best);
    }
  }
  return out;
}

LabelMap refine_scene(RefinerModel& model, const Raster2D& image, const LabelMap& labels,
                      const SceneConfig& config) {
  if (image.height() != labels.height || image.width() != labels.width) {
    throw std::invalid_argument("refine_scene: image and label map extents differ");
  }
  labels.validate();
  const auto tasks = extract_object_rois(labels, config);
  const auto conf = refine_rois(model, image, tasks, labels.stuff, config);
  return fuse(conf, labels, config.fuse_threshold);
}

double mean_class_iou(const LabelMap& pred, const LabelMap& gt) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw std::invalid_argument("mean_class_iou: extents differ");
  }
  std::map<int, std::pair<std::size_t, std::size_t>> counts;  // class -> (inter, union)
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const int a = pred.labels[i];
    const int b = gt.labels[i];
    if (a == b) {
      ++counts[a].first;
      ++counts[a].second;
    } else {
      ++counts[a].second;
      ++counts[b].second;
    }
  }
  if (counts.empty()) return 1.0;
  double sum = 0.0;
  for (const auto& [_, iu] : counts) sum += static_cast<double>(iu.first) / static_cast<double>(iu.second);
  return sum / static_cast<double>(counts.size());
}

}  // namespace segrefine
