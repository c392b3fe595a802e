#include "segrefine/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>

#include "segrefine/errors.hpp"

namespace segrefine {

namespace {

cv::Mat load(const std::filesystem::path& path, int flags) {
  if (!std::filesystem::exists(path)) throw IoError("missing file: " + path.string());
  cv::Mat m = cv::imread(path.string(), flags);
  if (m.empty()) throw IoError("cannot decode image: " + path.string());
  return m;
}

void store(const std::filesystem::path& path, const cv::Mat& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw IoError("cannot write " + path.string());
}

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0f), 0L, 255L));
}

cv::Mat single_channel_u8(const cv::Mat& m, const std::filesystem::path& path) {
  if (m.depth() != CV_8U) throw DataFormatError(path.string(), "mask must be 8-bit");
  if (m.channels() == 1) return m;
  // tolerate gray images saved as RGB(A) as long as the channels agree
  std::vector<cv::Mat> planes;
  cv::split(m, planes);
  for (int c = 1; c < std::min(3, m.channels()); ++c) {
    if (cv::countNonZero(planes[c] != planes[0]) != 0) {
      throw DataFormatError(path.string(), "mask must be single-channel");
    }
  }
  return planes[0];
}

}  // namespace

Raster2D read_image(const std::filesystem::path& path) {
  cv::Mat bgr = load(path, cv::IMREAD_COLOR);
  Raster2D out(bgr.rows, bgr.cols, 3);
  for (int r = 0; r < bgr.rows; ++r) {
    const auto* row = bgr.ptr<cv::Vec3b>(r);
    for (int c = 0; c < bgr.cols; ++c) {
      for (int k = 0; k < 3; ++k) out.at(r, c, k) = row[c][2 - k] / 255.0f;
    }
  }
  return out;
}

BinaryMask read_mask(const std::filesystem::path& path) {
  cv::Mat m = single_channel_u8(load(path, cv::IMREAD_UNCHANGED), path);
  BinaryMask out(m.rows, m.cols, 1);
  for (int r = 0; r < m.rows; ++r) {
    const auto* row = m.ptr<std::uint8_t>(r);
    for (int c = 0; c < m.cols; ++c) {
      if (row[c] != 0 && row[c] != 255) {
        throw DataFormatError(path.string(), "mask value " + std::to_string(row[c]) +
                                                 " at (" + std::to_string(r) + "," +
                                                 std::to_string(c) + ") is neither 0 nor 255");
      }
      out.at(r, c) = row[c] == 255 ? 1.0f : 0.0f;
    }
  }
  return out;
}

ProbMask read_soft_mask(const std::filesystem::path& path) {
  cv::Mat m = single_channel_u8(load(path, cv::IMREAD_UNCHANGED), path);
  ProbMask out(m.rows, m.cols, 1);
  for (int r = 0; r < m.rows; ++r) {
    const auto* row = m.ptr<std::uint8_t>(r);
    for (int c = 0; c < m.cols; ++c) out.at(r, c) = row[c] / 255.0f;
  }
  return out;
}

void write_image(const std::filesystem::path& path, const Raster2D& rgb) {
  if (rgb.channels() != 3) throw std::invalid_argument("write_image expects 3 channels");
  cv::Mat m(rgb.height(), rgb.width(), CV_8UC3);
  for (int r = 0; r < rgb.height(); ++r) {
    auto* row = m.ptr<cv::Vec3b>(r);
    for (int c = 0; c < rgb.width(); ++c) {
      for (int k = 0; k < 3; ++k) row[c][2 - k] = to_byte(rgb.at(r, c, k));
    }
  }
  store(path, m);
}

void write_mask(const std::filesystem::path& path, const ProbMask& mask, float threshold) {
  cv::Mat m(mask.height(), mask.width(), CV_8UC1);
  for (int r = 0; r < mask.height(); ++r) {
    auto* row = m.ptr<std::uint8_t>(r);
    for (int c = 0; c < mask.width(); ++c) row[c] = mask.at(r, c) >= threshold ? 255 : 0;
  }
  store(path, m);
}

void write_confidence(const std::filesystem::path& path, const ProbMask& mask) {
  cv::Mat m(mask.height(), mask.width(), CV_8UC1);
  for (int r = 0; r < mask.height(); ++r) {
    auto* row = m.ptr<std::uint8_t>(r);
    for (int c = 0; c < mask.width(); ++c) row[c] = to_byte(mask.at(r, c));
  }
  store(path, m);
}

void write_overlay(const std::filesystem::path& path, const Raster2D& rgb, const ProbMask& mask,
                   float threshold) {
  Raster2D tinted = rgb;
  for (int r = 0; r < rgb.height(); ++r) {
    for (int c = 0; c < rgb.width(); ++c) {
      if (mask.at(r, c) < threshold) continue;
      tinted.at(r, c, 0) = 0.5f * tinted.at(r, c, 0) + 0.5f;
      tinted.at(r, c, 1) *= 0.5f;
      tinted.at(r, c, 2) *= 0.5f;
    }
  }
  write_image(path, tinted);
}

LabelImage read_label_image(const std::filesystem::path& path) {
  cv::Mat m = load(path, cv::IMREAD_UNCHANGED);
  if (m.channels() != 1 || (m.depth() != CV_8U && m.depth() != CV_16U)) {
    throw DataFormatError(path.string(), "label map must be 8- or 16-bit single-channel");
  }
  LabelImage out{m.rows, m.cols, std::vector<std::uint16_t>(static_cast<std::size_t>(m.rows) * m.cols)};
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      out.labels[static_cast<std::size_t>(r) * m.cols + c] =
          m.depth() == CV_8U ? m.at<std::uint8_t>(r, c) : m.at<std::uint16_t>(r, c);
    }
  }
  return out;
}

void write_label_image(const std::filesystem::path& path, const LabelImage& labels) {
  const bool narrow = std::all_of(labels.labels.begin(), labels.labels.end(),
                                  [](std::uint16_t v) { return v <= 255; });
  cv::Mat m(labels.height, labels.width, narrow ? CV_8UC1 : CV_16UC1);
  for (int r = 0; r < labels.height; ++r) {
    for (int c = 0; c < labels.width; ++c) {
      const auto v = labels.labels[static_cast<std::size_t>(r) * labels.width + c];
      if (narrow) {
        m.at<std::uint8_t>(r, c) = static_cast<std::uint8_t>(v);
      } else {
        m.at<std::uint16_t>(r, c) = v;
      }
    }
  }
  store(path, m);
}

}  // namespace segrefine
