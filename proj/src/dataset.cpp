#include "segrefine/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include "segrefine/errors.hpp"
#include "segrefine/image_io.hpp"
#include "segrefine/metrics.hpp"

namespace segrefine {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// deterministic per-pixel noise in [-1, 1]
double pixel_noise(std::uint64_t seed, int r, int c, int k) {
  const std::uint64_t h = splitmix(seed ^ splitmix((static_cast<std::uint64_t>(r) << 32) ^
                                                   (static_cast<std::uint64_t>(c) << 2) ^
                                                   static_cast<std::uint64_t>(k)));
  return static_cast<double>(h >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

std::array<float, 3> random_color(std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.05f, 0.95f);
  return {u(rng), u(rng), u(rng)};
}

std::array<float, 3> jitter(const std::array<float, 3>& base, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-0.15f, 0.15f);
  std::array<float, 3> out{};
  for (int k = 0; k < 3; ++k) out[k] = std::clamp(base[k] + u(rng), 0.0f, 1.0f);
  return out;
}

double color_distance(const std::array<float, 3>& a, const std::array<float, 3>& b) {
  double s = 0.0;
  for (int k = 0; k < 3; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

ShapePrimitive random_primitive(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> centre(0.25, 0.75);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ShapePrimitive p;
  p.cx = centre(rng);
  p.cy = centre(rng);
  if (unit(rng) < 0.5) {
    std::uniform_real_distribution<double> radius(0.1, 0.3);
    p.kind = ShapePrimitive::Kind::Ellipse;
    p.rx = radius(rng);
    p.ry = radius(rng);
    p.angle = unit(rng) * std::numbers::pi;
  } else {
    p.kind = ShapePrimitive::Kind::Polygon;
    std::uniform_int_distribution<int> count(5, 9);
    std::uniform_real_distribution<double> base(0.12, 0.3);
    std::uniform_real_distribution<double> wobble(0.6, 1.2);
    const int n = count(rng);
    const double r0 = base(rng);
    std::vector<double> angles(n);
    for (auto& a : angles) a = unit(rng) * 2.0 * std::numbers::pi;
    std::sort(angles.begin(), angles.end());
    for (const double a : angles) {
      const double r = r0 * wobble(rng);
      p.vertices.push_back({p.cx + r * std::cos(a), p.cy + r * std::sin(a)});
    }
  }
  return p;
}

Raster2D flip_horizontal(const Raster2D& src) {
  Raster2D out(src.height(), src.width(), src.channels());
  for (int r = 0; r < src.height(); ++r) {
    for (int c = 0; c < src.width(); ++c) {
      for (int k = 0; k < src.channels(); ++k) out.at(r, src.width() - 1 - c, k) = src.at(r, c, k);
    }
  }
  return out;
}

double foreground_fraction(const BinaryMask& m) {
  const auto v = m.values();
  return static_cast<double>(std::count(v.begin(), v.end(), 1.0f)) / static_cast<double>(v.size());
}

}  // namespace

bool ShapePrimitive::contains(double x, double y) const {
  if (kind == Kind::Ellipse) {
    const double dx = x - cx;
    const double dy = y - cy;
    const double ca = std::cos(angle);
    const double sa = std::sin(angle);
    const double u = (dx * ca + dy * sa) / rx;
    const double v = (-dx * sa + dy * ca) / ry;
    return u * u + v * v <= 1.0;
  }
  bool in = false;
  const std::size_t n = vertices.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto& a = vertices[i];
    const auto& b = vertices[j];
    if ((a[1] > y) != (b[1] > y) && x < (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]) + a[0]) {
      in = !in;
    }
  }
  return in;
}

bool ShapeScene::contains(double x, double y) const {
  return std::any_of(parts.begin(), parts.end(), [&](const ShapePrimitive& p) { return p.contains(x, y); });
}

RenderedItem render_scene(const ShapeScene& scene, int height, int width) {
  RenderedItem item{Raster2D(height, width, 3), BinaryMask(height, width, 1)};
  const double fct = std::cos(scene.fg_theta), fst = std::sin(scene.fg_theta);
  const double bct = std::cos(scene.bg_theta), bst = std::sin(scene.bg_theta);
  for (int r = 0; r < height; ++r) {
    const double y = (r + 0.5) / height;
    for (int c = 0; c < width; ++c) {
      const double x = (c + 0.5) / width;
      const bool fg = scene.contains(x, y);
      item.mask.at(r, c) = fg ? 1.0f : 0.0f;
      const double proj = fg ? c * fct + r * fst : c * bct + r * bst;
      const double period = fg ? scene.fg_period : scene.bg_period;
      const double t = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * proj / period);
      const auto& a = fg ? scene.fg_a : scene.bg_a;
      const auto& b = fg ? scene.fg_b : scene.bg_b;
      for (int k = 0; k < 3; ++k) {
        const double v = a[k] + (b[k] - a[k]) * t + scene.noise * pixel_noise(scene.texture_seed, r, c, k);
        item.image.at(r, c, k) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return item;
}

ShapeScene random_scene(std::mt19937_64& rng, int size) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> period(6.0, 20.0);
  while (true) {
    ShapeScene s;
    s.parts.push_back(random_primitive(rng));
    if (unit(rng) < 0.4) s.parts.push_back(random_primitive(rng));
    do {
      s.fg_a = random_color(rng);
      s.bg_a = random_color(rng);
    } while (color_distance(s.fg_a, s.bg_a) < 0.35);
    s.fg_b = jitter(s.fg_a, rng);
    s.bg_b = jitter(s.bg_a, rng);
    s.fg_period = period(rng);
    s.bg_period = period(rng);
    s.fg_theta = unit(rng) * std::numbers::pi;
    s.bg_theta = unit(rng) * std::numbers::pi;
    s.texture_seed = rng();

    std::size_t fg = 0;
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) fg += s.contains((c + 0.5) / size, (r + 0.5) / size);
    }
    const double frac = static_cast<double>(fg) / (static_cast<double>(size) * size);
    if (frac >= 0.05 && frac <= 0.7) return s;
  }
}

DatasetSpec synth_shape_dataset(int n, int size, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("synth_shape_dataset: n must be >= 1");
  if (size < 8) throw std::invalid_argument("synth_shape_dataset: size must be >= 8");
  DatasetSpec spec;
  spec.source = DatasetSpec::Source::Synthetic;
  spec.size = size;
  for (int i = 0; i < n; ++i) spec.scenes.push_back(random_scene(rng, size));
  return spec;
}

DatasetSpec open_directory_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  const fs::path images = root / "images";
  const fs::path masks = root / "masks";
  if (!fs::is_directory(images) || !fs::is_directory(masks)) {
    throw IoError("dataset root must contain images/ and masks/: " + root.string());
  }
  std::map<std::string, fs::path> image_by_id;
  for (const auto& e : fs::directory_iterator(images)) {
    if (!e.is_regular_file()) continue;
    const auto id = e.path().stem().string();
    if (!image_by_id.emplace(id, e.path()).second) {
      throw DataFormatError(id, "more than one image file for this id");
    }
  }
  std::map<std::string, fs::path> mask_by_id;
  for (const auto& e : fs::directory_iterator(masks)) {
    if (!e.is_regular_file()) continue;
    if (e.path().extension() != ".png") {
      throw DataFormatError(e.path().filename().string(), "masks must be .png files");
    }
    mask_by_id.emplace(e.path().stem().string(), e.path());
  }
  for (const auto& [id, _] : mask_by_id) {
    if (!image_by_id.contains(id)) throw DataFormatError(id, "mask has no matching image");
  }
  DatasetSpec spec;
  spec.source = DatasetSpec::Source::Directory;
  spec.root = root;
  for (const auto& [id, path] : image_by_id) {
    if (!mask_by_id.contains(id)) throw DataFormatError(id, "image has no matching mask");
    spec.ids.push_back(id);
    spec.image_files.push_back(path);
  }
  if (spec.ids.empty()) throw DataFormatError(root.string(), "dataset holds no items");
  return spec;
}

DatasetItem load_item(const DatasetSpec& spec, std::size_t index) {
  if (index >= spec.count()) throw std::out_of_range("dataset index out of range");
  if (spec.source == DatasetSpec::Source::Synthetic) {
    auto rendered = render_scene(spec.scenes[index], spec.size, spec.size);
    return {"synth" + std::to_string(index), std::move(rendered.image), std::move(rendered.mask)};
  }
  const auto& id = spec.ids[index];
  DatasetItem item{id, {}, {}};
  try {
    item.image = read_image(spec.image_files[index]);
    item.mask = read_mask(spec.root / "masks" / (id + ".png"));
  } catch (const DataFormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataFormatError(id, e.what());
  }
  if (!item.image.same_extent(item.mask)) throw DataFormatError(id, "image and mask sizes differ");
  return item;
}

TrainingSample sample_training_example(const DatasetSpec& spec, const PerturbParams& params,
                                       std::mt19937_64& rng, int crop_size) {
  if (spec.count() == 0) throw std::invalid_argument("sample_training_example: empty dataset");
  if (crop_size < 8) throw std::invalid_argument("crop_size must be >= 8");
  std::uniform_int_distribution<std::size_t> pick(0, spec.count() - 1);
  auto item = load_item(spec, pick(rng));

  TrainingSample sample;
  sample.id = item.id;
  if (spec.flip && std::bernoulli_distribution(0.5)(rng)) {
    item.image = flip_horizontal(item.image);
    item.mask = flip_horizontal(item.mask);
    sample.flipped = true;
  }

  Raster2D image = std::move(item.image);
  BinaryMask mask = std::move(item.mask);
  auto rescale = [&](int h, int w) {
    image = bilinear_resize(image, h, w);
    mask = binarize(bilinear_resize(mask, h, w));
  };
  if (!spec.crop) {
    rescale(crop_size, crop_size);
  } else if (image.height() < crop_size || image.width() < crop_size) {
    const double s = static_cast<double>(crop_size) / std::min(image.height(), image.width());
    rescale(std::max(crop_size, static_cast<int>(std::ceil(image.height() * s))),
            std::max(crop_size, static_cast<int>(std::ceil(image.width() * s))));
  }

  BoxRegion box{0, 0, crop_size, crop_size};
  if (image.height() > crop_size || image.width() > crop_size) {
    std::uniform_int_distribution<int> top(0, image.height() - crop_size);
    std::uniform_int_distribution<int> left(0, image.width() - crop_size);
    for (int attempt = 0; attempt < 20; ++attempt) {
      box.top = top(rng);
      box.left = left(rng);
      if (foreground_fraction(extract_crop(mask, box)) >= 0.01) break;
    }
  }
  sample.image = extract_crop(image, box);
  sample.gt = extract_crop(mask, box);

  // keep the perturbed input overlapping the target whenever the target has foreground
  const bool has_fg = foreground_fraction(sample.gt) > 0.0;
  BinaryMask perturbed = perturb_mask(sample.gt, params, rng);
  for (int attempt = 0; has_fg && attempt < 10 && iou(perturbed, sample.gt) == 0.0; ++attempt) {
    perturbed = perturb_mask(sample.gt, params, rng);
  }
  if (has_fg && iou(perturbed, sample.gt) == 0.0) perturbed = dilate_disk(sample.gt, params.radius_min);
  sample.perturbed = std::move(perturbed);
  return sample;
}

}  // namespace segrefine
