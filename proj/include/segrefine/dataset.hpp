#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "segrefine/perturb.hpp"
#include "segrefine/raster.hpp"

namespace segrefine {

/// One filled shape in normalized [0, 1] x [0, 1] image coordinates.
struct ShapePrimitive {
  enum class Kind { Ellipse, Polygon };
  Kind kind = Kind::Ellipse;
  double cx = 0.5;
  double cy = 0.5;
  double rx = 0.2;
  double ry = 0.2;
  double angle = 0.0;
  std::vector<std::array<double, 2>> vertices;  // (x, y), polygons only

  bool contains(double x, double y) const;
};

/// Resolution-independent description of a synthetic image: a union of
/// primitives drawn with a striped, noisy foreground over a different
/// background texture. Texture periods are in pixels so local appearance does
/// not change with render size.
struct ShapeScene {
  std::vector<ShapePrimitive> parts;
  std::array<float, 3> fg_a{}, fg_b{}, bg_a{}, bg_b{};
  double fg_period = 10.0;
  double bg_period = 14.0;
  double fg_theta = 0.0;
  double bg_theta = 0.0;
  double noise = 0.06;
  std::uint64_t texture_seed = 0;

  bool contains(double x, double y) const;
};

struct RenderedItem {
  Raster2D image;
  BinaryMask mask;
};

RenderedItem render_scene(const ShapeScene& scene, int height, int width);

/// Random scene whose foreground covers between 5% and 70% of a size x size render.
ShapeScene random_scene(std::mt19937_64& rng, int size);

struct DatasetSpec {
  enum class Source { Synthetic, Directory };
  Source source = Source::Synthetic;

  // synthetic
  int size = 224;
  std::vector<ShapeScene> scenes;

  // directory: images/<id>.<ext> paired with masks/<id>.png
  std::filesystem::path root;
  std::vector<std::string> ids;
  std::vector<std::filesystem::path> image_files;

  bool flip = true;
  bool crop = true;

  std::size_t count() const {
    return source == Source::Synthetic ? scenes.size() : ids.size();
  }
};

struct DatasetItem {
  std::string id;
  Raster2D image;
  BinaryMask mask;
};

/// n synthetic scenes of size x size pixels.
DatasetSpec synth_shape_dataset(int n, int size, std::mt19937_64& rng);

/// Indexes a directory corpus. Every image must pair with exactly one mask
/// and vice versa; violations raise DataFormatError naming the id.
DatasetSpec open_directory_dataset(const std::filesystem::path& root);

/// Loads (or renders) item `index`. Unreadable items raise DataFormatError
/// or IoError identifying the item.
DatasetItem load_item(const DatasetSpec& spec, std::size_t index);

struct TrainingSample {
  std::string id;
  Raster2D image;      // crop_size x crop_size x 3
  ProbMask perturbed;  // binary values, IoU with gt in (0, 1]
  BinaryMask gt;
  bool flipped = false;
};

/// Random item, optional horizontal flip, random crop holding >= 1%
/// foreground (up to 20 draws, then the last draw is kept), perturbed input.
TrainingSample sample_training_example(const DatasetSpec& spec, const PerturbParams& params,
                                       std::mt19937_64& rng, int crop_size = 224);

}  // namespace segrefine
